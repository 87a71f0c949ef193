"""BP and TEP peeling decoders for LDPC codes on the binary erasure channel."""

from .bp import DecodeOutcome, bp_run
from .channel import ReceivedWord, transmit
from .density_evolution import (ResidualDD, StageResult, bp_positivity_check,
                                bp_threshold, p_shared_check, r1_analytic,
                                residual_dd_at_stall, stage_a_integrate,
                                stage_b_integrate, stall_point,
                                tep_threshold_lower_bound)
from .ensemble import (DegreeDistribution, EnsembleInstance, parse_dd,
                       parse_polynomial, sample_graph, systematic_encode)
from .graph import (ContradictionError, MergeReport, ResolutionLedger,
                    TannerGraph, resolve)
from .harness import WerRecord, ml_oracle_decode, wer_campaign, wilson_interval
from .tep import tep_run, tep_trace

__version__ = "0.1.0"

__all__ = [
    "DecodeOutcome", "bp_run", "ReceivedWord", "transmit", "ResidualDD",
    "StageResult", "bp_positivity_check", "bp_threshold", "p_shared_check",
    "r1_analytic", "residual_dd_at_stall", "stage_a_integrate",
    "stage_b_integrate", "stall_point", "tep_threshold_lower_bound",
    "DegreeDistribution", "EnsembleInstance", "parse_dd", "parse_polynomial",
    "sample_graph", "systematic_encode", "ContradictionError", "MergeReport",
    "ResolutionLedger", "TannerGraph", "resolve", "WerRecord",
    "ml_oracle_decode", "wer_campaign", "wilson_interval", "tep_run",
    "tep_trace",
]
