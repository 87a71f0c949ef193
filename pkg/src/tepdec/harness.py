"""Monte-Carlo WER campaigns, the ML-decoder oracle, and CSV reporting."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from . import gf2
from .bp import SUCCESS, STALLED, DecodeOutcome, bp_run
from .channel import ReceivedWord, transmit
from .ensemble import DegreeDistribution, EnsembleInstance, sample_graph
from .graph import ResidualSummary, ResolutionLedger, TannerGraph
from .tep import tep_run

DECODERS = ("bp", "tep", "ml")


def wilson_interval(failures: int, trials: int, z: float = 1.959964) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials == 0:
        return 0.0, 1.0
    p = failures / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = (z / denom) * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials))
    # clamp against 1-ulp rounding at the endpoints: the interval always
    # contains the point estimate
    return min(max(center - half, 0.0), p), max(min(center + half, 1.0), p)


def ml_oracle_decode(instance: EnsembleInstance, received: ReceivedWord) -> DecodeOutcome:
    """Maximum-likelihood decoding on the BEC by GF(2) elimination.

    Succeeds iff the erased-column submatrix of H has full column rank, in
    which case the completion is unique.  Failure is a valid outcome.
    """
    erased_idx = np.nonzero(received.erased)[0]
    assignment = received.values.copy()
    if erased_idx.size == 0:
        return DecodeOutcome(
            status=SUCCESS, assignment=assignment,
            residual=ResidualSummary(0, 0, 0), iterations=0,
        )
    h = instance.h_matrix()
    a = h[:, erased_idx]
    known = ~received.erased
    b = (h[:, known] @ received.bits[known]) % 2
    for c in range(instance.m):
        b[c] ^= instance.check_parity[c]
    x = gf2.solve_unique(a, b)
    if x is None:
        return DecodeOutcome(
            status=STALLED, assignment=assignment,
            residual=ResidualSummary(int(erased_idx.size), 0, 0), iterations=0,
        )
    assignment[erased_idx] = x
    return DecodeOutcome(
        status=SUCCESS, assignment=assignment,
        residual=ResidualSummary(0, 0, 0), iterations=0,
    )


def decode_with(instance: EnsembleInstance, received: ReceivedWord, decoder: str,
                schedule: str = "decoder", build_summary: bool = True) -> DecodeOutcome:
    """Run one named decoder on one received word."""
    if decoder == "ml":
        return ml_oracle_decode(instance, received)
    graph = TannerGraph.initialize(instance, received)
    ledger = ResolutionLedger(instance.n)
    if decoder == "bp":
        return bp_run(graph, ledger, build_summary=build_summary)
    if decoder == "tep":
        return tep_run(graph, ledger, schedule=schedule, build_summary=build_summary)
    raise ValueError(f"unknown decoder {decoder!r}")


def paired_success(instance: EnsembleInstance, received: ReceivedWord,
                   decoders: tuple[str, ...], schedule: str = "decoder") -> dict[str, bool]:
    """Success flags for several decoders on the same erasure pattern.

    BP and TEP share one decode: TEP's first inner BP phase stalls exactly
    where standalone BP does, so BP's outcome falls out of the TEP run.
    """
    out: dict[str, bool] = {}
    want_bp = "bp" in decoders
    want_tep = "tep" in decoders
    if want_bp or want_tep:
        graph = TannerGraph.initialize(instance, received)
        ledger = ResolutionLedger(instance.n)
        bp_out = bp_run(graph, ledger, build_summary=False)
        if want_bp:
            out["bp"] = bp_out.ok
        if want_tep:
            if bp_out.ok:
                out["tep"] = True
            else:
                out["tep"] = tep_run(graph, ledger, schedule=schedule,
                                     build_summary=False).ok
    if "ml" in decoders:
        out["ml"] = ml_oracle_decode(instance, received).ok
    return out


@dataclass
class WerRecord:
    """One (eps, n, decoder) Monte-Carlo measurement."""

    eps: float
    n: int
    decoder: str
    graphs: int
    trials: int  # total = graphs * trials_per_graph
    failures: int
    wer: float
    ci95: float  # Wilson 95% half-width
    seed: int


def wer_campaign(
    dd: DegreeDistribution,
    n: int,
    eps_grid: list[float],
    graphs: int,
    trials: int,
    seed: int,
    decoders: tuple[str, ...] = ("bp", "tep"),
    schedule: str = "decoder",
) -> list[WerRecord]:
    """Paired word-error-rate campaign.

    For every epsilon, each of `graphs` sampled instances sees `trials`
    transmissions of the all-zero codeword (the code is linear and the BEC
    erasure pattern is codeword-independent, so peeling success depends only
    on the erased set); every requested decoder sees the same pattern.
    Deterministic given `seed`.
    """
    for d in decoders:
        if d not in DECODERS:
            raise ValueError(f"unknown decoder {d!r}")
    if trials <= 0 or graphs <= 0:
        raise ValueError("graphs and trials must be positive")
    zero = np.zeros(n, dtype=np.uint8)
    fail: dict[tuple[float, str], int] = {(e, d): 0 for e in eps_grid for d in decoders}
    for gi in range(graphs):
        g_seed = int(np.random.SeedSequence((seed, n, gi)).generate_state(1)[0])
        instance = sample_graph(dd, n, seed=g_seed)
        for ei, eps in enumerate(eps_grid):
            for ti in range(trials):
                t_seed = int(
                    np.random.SeedSequence((seed, n, gi, ei, ti)).generate_state(1)[0]
                )
                received = transmit(zero, eps, seed=t_seed)
                ok = paired_success(instance, received, decoders, schedule)
                for d in decoders:
                    if not ok[d]:
                        fail[(eps, d)] += 1
    total = graphs * trials
    records = []
    for eps in eps_grid:
        for d in decoders:
            f = fail[(eps, d)]
            lo, hi = wilson_interval(f, total)
            records.append(WerRecord(
                eps=eps, n=n, decoder=d, graphs=graphs, trials=total,
                failures=f, wer=f / total, ci95=(hi - lo) / 2.0, seed=seed,
            ))
    return records


WER_HEADER = ["eps", "n", "decoder", "graphs", "trials", "failures", "wer", "ci95", "seed"]


def wer_records_to_csv(records: list[WerRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(WER_HEADER)
    for r in records:
        w.writerow([
            f"{r.eps:.9g}", r.n, r.decoder, r.graphs, r.trials, r.failures,
            f"{r.wer:.9g}", f"{r.ci95:.9g}", r.seed,
        ])
    return buf.getvalue()


def parse_eps_grid(spec: str) -> list[float]:
    """Parse "start:stop:step" (inclusive stop) or a comma list."""
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ValueError(f"bad eps grid {spec!r}; want start:stop:step")
        start, stop, step = (float(p) for p in parts)
        if step <= 0:
            raise ValueError("eps grid step must be positive")
        count = int(round((stop - start) / step))
        grid = [start + k * step for k in range(count + 1)]
        return [round(e, 12) for e in grid if e <= stop + 1e-12]
    return [float(p) for p in spec.split(",") if p.strip()]
