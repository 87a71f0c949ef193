import numpy as np

from tepdec import (ResolutionLedger, TannerGraph, bp_run, sample_graph,
                    transmit)
from tepdec.channel import erase_positions

from test_graph import all_erased, make_instance


def test_tree_code_single_erased_leaf():
    # path code: c0 = v0^v1, c1 = v1^v2; only the leaf v2 erased
    inst = make_instance(3, [[0, 1], [1, 2]])
    rw = erase_positions(np.zeros(3, dtype=np.uint8), [2])
    g = TannerGraph.initialize(inst, rw)
    out = bp_run(g)
    assert out.ok
    assert out.iterations == 1
    assert list(out.assignment) == [0, 0, 0]


def test_four_cycle_stopping_set_stalls():
    inst = make_instance(2, [[0, 1], [0, 1]])
    g = TannerGraph.initialize(inst, all_erased(2))
    out = bp_run(g)
    assert out.status == "stalled"
    assert out.residual.alive_variables == 2
    assert out.residual.check_degree_hist == {2: 2}


def test_idempotent_on_stall():
    inst = make_instance(2, [[0, 1], [0, 1]])
    g = TannerGraph.initialize(inst, all_erased(2))
    bp_run(g)
    again = bp_run(g)
    assert again.iterations == 0
    assert again.status == "stalled"


def test_high_success_below_threshold(dd36):
    # eps = 0.35 is well below the asymptotic limit; finite n=1024 should
    # still decode nearly always
    n = 1024
    inst = sample_graph(dd36, n, seed=77)
    zero = np.zeros(n, dtype=np.uint8)
    ok = 0
    trials = 1000
    for t in range(trials):
        rw = transmit(zero, 0.35, seed=t)
        g = TannerGraph.initialize(inst, rw)
        ok += bp_run(g, build_summary=False).ok
    assert ok / trials > 0.95


def test_success_satisfies_all_checks(dd36):
    inst = sample_graph(dd36, 256, seed=5)
    zero = np.zeros(256, dtype=np.uint8)
    checked = 0
    for t in range(50):
        rw = transmit(zero, 0.38, seed=t)
        g = TannerGraph.initialize(inst, rw)
        out = bp_run(g, build_summary=False)
        if out.ok:
            assert not inst.syndrome(out.assignment).any()
            assert (out.assignment == 0).all()  # peeling never guesses
            checked += 1
    assert checked > 0


def test_erasure_superset_monotonicity(dd36):
    # adding erasures never turns a BP failure into a success
    rng = np.random.default_rng(42)
    n = 96
    for seed in range(10):
        inst = sample_graph(dd36, n, seed=200 + seed)
        zero = np.zeros(n, dtype=np.uint8)
        base = rng.random(n) < 0.42
        extra = base | (rng.random(n) < 0.05)
        r1 = erase_positions(zero, np.nonzero(base)[0])
        r2 = erase_positions(zero, np.nonzero(extra)[0])
        g1 = TannerGraph.initialize(inst, r1)
        g2 = TannerGraph.initialize(inst, r2)
        ok1 = bp_run(g1, build_summary=False).ok
        ok2 = bp_run(g2, build_summary=False).ok
        assert ok1 or not ok2  # ok2 implies ok1


def test_resumable_after_graph_change(dd36):
    # bp_run picks up where it left off once a merge frees a degree-1 check
    inst = make_instance(3, [[0, 1], [0, 1, 2], [1, 2], [0, 2]])
    g = TannerGraph.initialize(inst, all_erased(3))
    led = ResolutionLedger(3)
    first = bp_run(g, led)
    assert first.status == "stalled"
    c = g.pop_degree2()
    g.merge_variables(c, led)
    second = bp_run(g, led)
    assert second.ok
    assert list(second.assignment) == [0, 0, 0]
