import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tepdec import (ml_oracle_decode, sample_graph, transmit, wer_campaign,
                    wilson_interval)
from tepdec.channel import erase_positions
from tepdec.harness import (paired_success, parse_eps_grid,
                            wer_records_to_csv)

from test_graph import all_erased, make_instance


class TestWilson:
    @given(st.integers(0, 500), st.integers(1, 500))
    @settings(max_examples=100, deadline=None)
    def test_bounds_and_ordering(self, f, n):
        f = min(f, n)
        lo, hi = wilson_interval(f, n)
        assert 0.0 <= lo <= hi <= 1.0
        assert lo <= f / n <= hi

    def test_coverage_on_bernoulli_stream(self):
        # the 95% interval should cover the true p in roughly 95% of repeats
        rng = np.random.default_rng(11)
        p = 0.3
        n = 400
        covered = 0
        reps = 500
        for _ in range(reps):
            f = int(rng.binomial(n, p))
            lo, hi = wilson_interval(f, n)
            covered += lo <= p <= hi
        assert covered / reps > 0.90

    def test_zero_trials(self):
        assert wilson_interval(0, 0) == (0.0, 1.0)


class TestMlOracle:
    def test_zero_erasures_trivial(self, dd36):
        inst = sample_graph(dd36, 64, seed=1)
        rw = erase_positions(np.zeros(64, dtype=np.uint8), [])
        assert ml_oracle_decode(inst, rw).ok

    def test_four_cycle_rank_deficient(self):
        inst = make_instance(2, [[0, 1], [0, 1]])
        out = ml_oracle_decode(inst, all_erased(2))
        assert not out.ok

    def test_unique_completion_matches_truth(self, dd36):
        from tepdec import systematic_encode, gf2
        inst = sample_graph(dd36, 64, seed=2)
        rank = len(gf2.rref(inst.h_matrix())[1])
        rng = np.random.default_rng(3)
        code = systematic_encode(inst, rng.integers(0, 2, 64 - rank).astype(np.uint8))
        rw = transmit(code, 0.3, seed=4)
        out = ml_oracle_decode(inst, rw)
        if out.ok:
            assert np.array_equal(out.assignment, code.astype(np.int8))

    def test_success_ordering_bp_tep_ml(self, dd36):
        n = 256
        inst = sample_graph(dd36, n, seed=5)
        zero = np.zeros(n, dtype=np.uint8)
        any_gap = False
        for t in range(150):
            rw = transmit(zero, 0.45, seed=t)
            ok = paired_success(inst, rw, ("bp", "tep", "ml"))
            assert (not ok["bp"]) or ok["tep"]
            assert (not ok["tep"]) or ok["ml"]
            any_gap |= ok["ml"] and not ok["bp"]
        assert any_gap  # the ordering is non-trivial at this eps


class TestWerCampaign:
    def test_eps_zero_no_failures(self, dd36):
        recs = wer_campaign(dd36, 64, [0.0], graphs=2, trials=5, seed=9)
        assert all(r.wer == 0.0 for r in recs)

    def test_paired_dominance_per_record(self, dd36):
        recs = wer_campaign(dd36, 128, [0.42, 0.44], graphs=3, trials=20, seed=10)
        by = {(r.eps, r.decoder): r for r in recs}
        for eps in (0.42, 0.44):
            assert by[(eps, "tep")].failures <= by[(eps, "bp")].failures

    def test_reproducible_csv(self, dd36):
        a = wer_records_to_csv(wer_campaign(dd36, 64, [0.43], graphs=2, trials=10, seed=3))
        b = wer_records_to_csv(wer_campaign(dd36, 64, [0.43], graphs=2, trials=10, seed=3))
        assert a == b

    def test_seed_changes_outcomes(self, dd36):
        a = wer_records_to_csv(wer_campaign(dd36, 64, [0.45], graphs=2, trials=30, seed=3))
        b = wer_records_to_csv(wer_campaign(dd36, 64, [0.45], graphs=2, trials=30, seed=4))
        assert a != b

    def test_record_fields(self, dd36):
        (rec,) = wer_campaign(dd36, 64, [0.4], graphs=2, trials=5, seed=1,
                              decoders=("tep",))
        assert rec.trials == 10
        assert rec.graphs == 2
        assert 0.0 <= rec.wer <= 1.0
        assert rec.failures <= rec.trials
        lo, hi = wilson_interval(rec.failures, rec.trials)
        assert rec.ci95 == pytest.approx((hi - lo) / 2)

    def test_above_capacity_all_fail(self, dd36):
        # eps=0.50 exceeds even the optimum-decoding limit for rate 1/2; at
        # n=2048 the peeling decoders always fail and ML fails up to the
        # ~1% of draws whose erasure count fluctuates under the rank bound
        recs = wer_campaign(dd36, 2048, [0.50], graphs=2, trials=15, seed=8,
                            decoders=("bp", "tep", "ml"))
        by = {r.decoder: r for r in recs}
        assert by["bp"].wer == 1.0
        assert by["tep"].wer == 1.0
        assert by["ml"].wer >= 0.9

    def test_ml_included(self, dd36):
        recs = wer_campaign(dd36, 64, [0.46], graphs=2, trials=10, seed=6,
                            decoders=("bp", "tep", "ml"))
        by = {r.decoder: r for r in recs}
        assert by["ml"].failures <= by["tep"].failures <= by["bp"].failures

    def test_bad_args(self, dd36):
        with pytest.raises(ValueError):
            wer_campaign(dd36, 64, [0.4], graphs=0, trials=5, seed=1)
        with pytest.raises(ValueError):
            wer_campaign(dd36, 64, [0.4], graphs=1, trials=5, seed=1,
                         decoders=("nope",))


class TestEpsGrid:
    def test_range_form(self):
        grid = parse_eps_grid("0.38:0.46:0.005")
        assert grid[0] == pytest.approx(0.38)
        assert grid[-1] == pytest.approx(0.46)
        assert len(grid) == 17

    def test_comma_form(self):
        assert parse_eps_grid("0.4,0.44") == [0.4, 0.44]

    def test_bad_step(self):
        with pytest.raises(ValueError):
            parse_eps_grid("0.4:0.5:0")
