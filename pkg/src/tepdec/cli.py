"""Command-line interface.

Subcommands: sample, decode, wer, oracle, and the `de` analysis group
(bp-threshold, tep-threshold, trace).  Stochastic subcommands require
--seed.  Exit codes: 0 on success, 1 on decode contradiction, 2 on usage
errors (argparse default).
"""
from __future__ import annotations

import argparse
import sys

import numpy as np

from . import density_evolution as de
from .channel import transmit
from .ensemble import (DegreeDistribution, read_graph_file, sample_graph,
                       write_graph_file)
from .graph import ContradictionError, ResolutionLedger, TannerGraph
from .harness import (decode_with, parse_eps_grid, wer_campaign,
                      wer_records_to_csv)
from .tep import tep_trace, write_trace_csv


def _fmt(x: float) -> str:
    return f"{x:.9g}"


def _dd_from_args(args) -> DegreeDistribution:
    return DegreeDistribution.from_polynomials(args.lam, args.rho)


def _add_dd_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lambda", dest="lam", required=True,
                   help="left edge-degree polynomial, e.g. x^2")
    p.add_argument("--rho", required=True,
                   help="right edge-degree polynomial, e.g. x^5")


def _out_stream(args):
    return open(args.out, "w") if args.out else sys.stdout


def cmd_sample(args) -> int:
    dd = _dd_from_args(args)
    inst = sample_graph(dd, args.n, args.seed)
    write_graph_file(inst, args.out, comment=f"seed={args.seed} "
                     f"collapsed_pairs={inst.collapsed_pairs}")
    print(f"n={inst.n} m={inst.m} E={inst.E} collapsed_pairs={inst.collapsed_pairs} "
          f"out={args.out}")
    return 0


def cmd_decode(args) -> int:
    inst = read_graph_file(args.graph)
    zero = np.zeros(inst.n, dtype=np.uint8)
    received = transmit(zero, args.eps, seed=args.seed)
    try:
        if args.trace:
            graph = TannerGraph.initialize(inst, received, track_counts=True)
            outcome, rows = tep_trace(graph, ResolutionLedger(inst.n),
                                      schedule=args.schedule)
            write_trace_csv(rows, args.trace, lmax=args.trace_lmax)
        else:
            outcome = decode_with(inst, received, args.decoder,
                                  schedule=args.schedule)
    except ContradictionError as exc:
        print(f"status=contradiction detail={exc}", file=sys.stderr)
        return 1
    res = outcome.residual
    print(f"status={outcome.status} iterations={outcome.iterations} "
          f"erasures={received.erasure_count} "
          f"unresolved={res.alive_variables if res else 'n/a'}")
    if args.dump_residual and not outcome.ok and not args.trace:
        graph = TannerGraph.initialize(inst, received)
        from .tep import tep_run
        tep_run(graph, ResolutionLedger(inst.n), schedule=args.schedule,
                build_summary=False)
        graph.dump(args.dump_residual, note=f"eps={_fmt(args.eps)} seed={args.seed}")
    return 0


def cmd_wer(args) -> int:
    dd = _dd_from_args(args)
    grid = parse_eps_grid(args.eps)
    decoders = tuple(args.decoders.split(","))
    records = wer_campaign(dd, args.n, grid, graphs=args.graphs,
                           trials=args.trials, seed=args.seed,
                           decoders=decoders, schedule=args.schedule)
    text = wer_records_to_csv(records)
    with _out_stream(args) as f:
        f.write(text)
    return 0


def cmd_oracle(args) -> int:
    inst = read_graph_file(args.graph)
    zero = np.zeros(inst.n, dtype=np.uint8)
    received = transmit(zero, args.eps, seed=args.seed)
    outcome = decode_with(inst, received, "ml")
    print(f"status={outcome.status} erasures={received.erasure_count}")
    return 0


def cmd_de_bp_threshold(args) -> int:
    dd = _dd_from_args(args)
    print(f"eps_bp={_fmt(de.bp_threshold(dd, tol=args.tol))}")
    return 0


def cmd_de_tep_threshold(args) -> int:
    dd = _dd_from_args(args)
    report = de.tep_threshold_lower_bound(dd, e_ref=args.e_ref,
                                          dt_rel=args.dt_rel, tol=args.tol)
    dt_abs = args.dt_rel * de.residual_dd_at_stall(
        dd, max(report.eps_max_a, report.eps_bp + args.tol), args.e_ref).r_of(2) \
        if report.improved else float("nan")
    print(f"eps_bp={_fmt(report.eps_bp)}")
    print(f"eps_maxA={_fmt(report.eps_max_a)}")
    print(f"E_ref={_fmt(report.e_ref)}")
    print(f"dt={_fmt(dt_abs)}")
    print(f"dt_rel={_fmt(report.dt_rel)}")
    print(f"improved={'yes' if report.improved else 'no'}")
    return 0


def cmd_de_trace(args) -> int:
    dd = _dd_from_args(args)
    init = de.residual_dd_at_stall(dd, args.eps, e_ref=args.e_ref)
    dt = args.dt_rel * init.r_of(2)
    a = de.stage_a_integrate(init, dt)
    stages = [("A", a)]
    if a.end_reason == de.PB_REACHED_ONE and args.stage_b:
        stages.append(("B", de.stage_b_integrate(a.final, dt)))
    import csv as _csv
    lmax = args.trace_lmax
    with _out_stream(args) as f:
        w = _csv.writer(f)
        rmax = max(len(s.final.r) - 1 for _, s in stages)
        w.writerow(["t", "e"] + [f"l_{i}" for i in range(2, lmax + 1)]
                   + [f"r_{i}" for i in range(1, rmax + 1)] + ["shared_event"])
        for _, stage in stages:
            for snap in stage.trajectory:
                rec = [_fmt(snap.t), _fmt(snap.e)]
                rec += [_fmt(snap.l_of(i)) for i in range(2, lmax + 1)]
                rec += [_fmt(snap.r_of(i)) for i in range(1, rmax + 1)]
                rec.append(_fmt(de.p_shared_check(snap)))
                w.writerow(rec)
    for name, stage in stages:
        print(f"stage{name}: end_time={_fmt(stage.end_time)} "
              f"end_reason={stage.end_reason}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tepdec",
                                description="BP/TEP erasure decoding toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("sample", help="sample an ensemble instance to a graph file")
    _add_dd_flags(sp)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_sample)

    dp = sub.add_parser("decode", help="decode one BEC transmission of the all-zero word")
    dp.add_argument("--graph", required=True)
    dp.add_argument("--eps", type=float, required=True)
    dp.add_argument("--seed", type=int, required=True)
    dp.add_argument("--decoder", choices=["bp", "tep", "ml"], default="tep")
    dp.add_argument("--schedule", choices=["decoder", "analysis"], default="decoder")
    dp.add_argument("--trace", help="write per-merge trace CSV here (uses TEP)")
    dp.add_argument("--trace-lmax", type=int, default=16)
    dp.add_argument("--dump-residual", help="write stalled residual graph here")
    dp.set_defaults(func=cmd_decode)

    wp = sub.add_parser("wer", help="Monte-Carlo word-error-rate campaign")
    _add_dd_flags(wp)
    wp.add_argument("--n", type=int, required=True)
    wp.add_argument("--eps", required=True, help="grid start:stop:step or comma list")
    wp.add_argument("--graphs", type=int, default=100)
    wp.add_argument("--trials", type=int, default=200)
    wp.add_argument("--decoders", default="bp,tep")
    wp.add_argument("--schedule", choices=["decoder", "analysis"], default="decoder")
    wp.add_argument("--seed", type=int, required=True)
    wp.add_argument("--out")
    wp.set_defaults(func=cmd_wer)

    op = sub.add_parser("oracle", help="ML-decode one transmission (rank test)")
    op.add_argument("--graph", required=True)
    op.add_argument("--eps", type=float, required=True)
    op.add_argument("--seed", type=int, required=True)
    op.set_defaults(func=cmd_oracle)

    dep = sub.add_parser("de", help="density-evolution analyses")
    desub = dep.add_subparsers(dest="de_command", required=True)

    bt = desub.add_parser("bp-threshold", help="BP threshold by bisection")
    _add_dd_flags(bt)
    bt.add_argument("--tol", type=float, default=1e-5)
    bt.set_defaults(func=cmd_de_bp_threshold)

    tt = desub.add_parser("tep-threshold", help="TEP threshold lower bound")
    _add_dd_flags(tt)
    tt.add_argument("--e-ref", type=float, default=de.DEFAULT_E_REF)
    tt.add_argument("--dt-rel", type=float, default=1e-5)
    tt.add_argument("--tol", type=float, default=1e-4)
    tt.set_defaults(func=cmd_de_tep_threshold)

    tr = desub.add_parser("trace", help="staged ODE trajectory CSV")
    _add_dd_flags(tr)
    tr.add_argument("--eps", type=float, required=True)
    tr.add_argument("--e-ref", type=float, default=de.DEFAULT_E_REF)
    tr.add_argument("--dt-rel", type=float, default=1e-5)
    tr.add_argument("--stage-b", action="store_true")
    tr.add_argument("--trace-lmax", type=int, default=16)
    tr.add_argument("--out")
    tr.set_defaults(func=cmd_de_trace)

    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ContradictionError as exc:
        print(f"status=contradiction detail={exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
