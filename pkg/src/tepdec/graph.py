"""Mutable peeling-graph runtime shared by the BP and TEP decoders.

Adjacency is kept as hash sets on both sides so that mod-2 edge cancellation
during merges is a set intersection and the no-parallel-edge invariant holds
under every mutation.  Degree-1/degree-2 queues are lazily validated: entries
are re-checked against the current degree on pop.
"""
from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass, field

import numpy as np

from .channel import ReceivedWord
from .ensemble import EnsembleInstance


class ContradictionError(RuntimeError):
    """A check lost all variables while holding parity 1.

    Impossible under a consistent BEC transmission; indicates graph
    corruption or an inconsistent parity assignment in the input.
    """

    def __init__(self, check: int):
        super().__init__(f"check {check} reduced to degree 0 with parity 1")
        self.check = check


class ResolutionLedger:
    """Parity-tracked union structure recording variable merges.

    Each merge links the removed variable to its surviving representative
    with the parity of the eliminated degree-2 check: once the survivor is
    de-erased, removed = survivor xor parity.
    """

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.offset = bytearray(n)
        self.merge_count = 0

    def record(self, removed: int, survivor: int, parity: int) -> None:
        assert self.parent[removed] == removed, "variable merged twice"
        self.parent[removed] = survivor
        self.offset[removed] = parity
        self.merge_count += 1

    def find(self, v: int) -> tuple[int, int]:
        """Representative of v and the parity of the path to it."""
        parent, offset = self.parent, self.offset
        root, par = v, 0
        while parent[root] != root:
            par ^= offset[root]
            root = parent[root]
        # path compression, keeping offsets relative to the root
        u, acc = v, par
        while parent[u] != root:
            nxt, step = parent[u], offset[u]
            parent[u], offset[u] = root, acc
            acc ^= step
            u = nxt
        return root, par


def resolve(ledger: ResolutionLedger, assignments) -> np.ndarray:
    """Expand root assignments to every merged variable.

    `assignments` holds -1 for unresolved positions.  Variables whose root
    is unresolved stay -1 in the output; the caller reports them as erased.
    """
    out = np.asarray(assignments, dtype=np.int8).copy()
    for v in range(len(out)):
        if out[v] >= 0:
            continue
        root, par = ledger.find(v)
        if root != v and out[root] >= 0:
            out[v] = out[root] ^ par
    return out


@dataclass
class MergeReport:
    """What one degree-two elimination did to the graph."""

    survivor: int
    removed: int
    parity: int
    shared_checks: tuple[int, ...]
    new_degree1: tuple[int, ...]
    new_degree0: tuple[int, ...]
    survivor_degree: int

    @property
    def shared(self) -> bool:
        return bool(self.shared_checks)


@dataclass
class ResidualSummary:
    alive_variables: int
    alive_checks: int
    edges: int
    var_degree_hist: dict[int, int] = field(default_factory=dict)
    check_degree_hist: dict[int, int] = field(default_factory=dict)


class TannerGraph:
    """Single-trial mutable decode state; build via `initialize`."""

    def __init__(self) -> None:
        self.n = 0
        self.m = 0
        self.E = 0
        self.check_members: list[set[int] | None] = []
        self.var_checks: list[set[int] | None] = []
        self.parity = bytearray()
        self.assign: list[int] = []
        self.deg1: deque[int] = deque()
        self.deg2: deque[int] = deque()
        self.alive_variables = 0
        self.alive_checks = 0
        self.removals = 0  # one (check, variable) pair per BP step or merge
        self.merges = 0
        self.op_count = 0  # adjacency touches, for the complexity contract
        self.discipline = "fifo"
        self.track_counts = False
        self.var_deg_counts: Counter[int] = Counter()
        self.chk_deg_counts: Counter[int] = Counter()
        self.alive_edges = 0

    # -- construction -------------------------------------------------

    @classmethod
    def initialize(
        cls,
        instance: EnsembleInstance,
        received: ReceivedWord,
        discipline: str = "fifo",
        track_counts: bool = False,
    ) -> "TannerGraph":
        """Remove every known variable, folding its value into check parities."""
        if len(received) != instance.n:
            raise ValueError("received word length differs from block length")
        g = cls()
        g.n, g.m, g.E = instance.n, instance.m, instance.E
        g.discipline = discipline
        g.track_counts = track_counts
        erased = received.erased
        er = erased.tolist()
        parity = bytearray(instance.check_parity)
        var_checks: list[set[int] | None] = [None] * instance.n
        var_adj = instance.var_adj
        erased_idx = np.nonzero(erased)[0].tolist()
        for v in erased_idx:
            var_checks[v] = set(var_adj[v])
        alive = len(erased_idx)
        for v in np.nonzero(~erased & (received.bits != 0))[0].tolist():
            for c in var_adj[v]:
                parity[c] ^= 1
        g.assign = np.where(erased, -1, received.bits).astype(np.int8).tolist()
        check_members: list[set[int] | None] = [None] * instance.m
        deg1, deg2 = g.deg1, g.deg2
        alive_checks = 0
        edges = 0
        for c, mem in enumerate(instance.check_adj):
            keep = {v for v in mem if er[v]}
            d = len(keep)
            if d == 0:
                if parity[c]:
                    raise ContradictionError(c)
                continue
            check_members[c] = keep
            alive_checks += 1
            edges += d
            if d == 1:
                deg1.append(c)
            elif d == 2:
                deg2.append(c)
            if track_counts:
                g.chk_deg_counts[d] += 1
        g.check_members = check_members
        g.var_checks = var_checks
        g.parity = parity
        g.alive_variables = alive
        g.alive_checks = alive_checks
        g.alive_edges = edges
        if track_counts:
            for v in range(instance.n):
                if var_checks[v] is not None:
                    g.var_deg_counts[len(var_checks[v])] += 1
        return g

    # -- queue helpers ------------------------------------------------

    def _pop_queue(self, q: deque[int], want: int) -> int | None:
        pop = q.popleft if self.discipline == "fifo" else q.pop
        members = self.check_members
        while q:
            c = pop()
            mem = members[c]
            if mem is not None and len(mem) == want:
                return c
        return None

    def _requeue(self, c: int, degree: int) -> None:
        if degree == 1:
            self.deg1.append(c)
        elif degree == 2:
            self.deg2.append(c)

    def pop_degree2(self) -> int | None:
        """Next valid degree-2 check (FIFO over discovery order), or None."""
        return self._pop_queue(self.deg2, 2)

    # -- mutations ----------------------------------------------------

    def remove_degree1_check(self) -> tuple[int, int] | None:
        """One BP step: copy a degree-1 check's parity into its variable and
        remove both.  Returns (variable, value) or None when no degree-1
        check remains."""
        c = self._pop_queue(self.deg1, 1)
        if c is None:
            return None
        members = self.check_members
        mem = members[c]
        if not mem:
            raise RuntimeError(f"degree-1 check {c} has no neighbors")
        (v,) = mem
        value = self.parity[c]
        members[c] = None
        self.alive_checks -= 1
        track = self.track_counts
        if track:
            self.chk_deg_counts[1] -= 1
            self.var_deg_counts[len(self.var_checks[v])] -= 1
            self.alive_edges -= len(self.var_checks[v])
        self._detach_variable(v, value, skip=c)
        self.assign[v] = value
        self.alive_variables -= 1
        self.removals += 1
        return v, value

    def _detach_variable(self, v: int, value: int, skip: int) -> None:
        members, parity = self.check_members, self.parity
        track = self.track_counts
        for c2 in self.var_checks[v]:
            if c2 == skip:
                continue
            mem2 = members[c2]
            if mem2 is None:
                continue
            mem2.discard(v)
            self.op_count += 1
            if value:
                parity[c2] ^= 1
            d = len(mem2)
            if track:
                self.chk_deg_counts[d + 1] -= 1
                if d:
                    self.chk_deg_counts[d] += 1
            if d == 0:
                if parity[c2]:
                    raise ContradictionError(c2)
                members[c2] = None
                self.alive_checks -= 1
            else:
                self._requeue(c2, d)
        self.var_checks[v] = None

    def merge_variables(self, check2: int, ledger: ResolutionLedger) -> MergeReport:
        """Eliminate a degree-2 check by merging its two variables.

        The higher-degree variable survives (fewer edges moved).  Every check
        attached to the removed variable flips parity when the eliminated
        check held parity 1; checks attached to both variables lose both
        edges (mod-2 cancellation)."""
        members, parity = self.check_members, self.parity
        mem = members[check2]
        if mem is None or len(mem) != 2:
            raise ValueError(f"check {check2} is not an alive degree-2 check")
        v1, v2 = mem
        if len(self.var_checks[v1]) < len(self.var_checks[v2]):
            v1, v2 = v2, v1
        elif len(self.var_checks[v1]) == len(self.var_checks[v2]) and v1 > v2:
            v1, v2 = v2, v1  # deterministic survivor on ties
        p = parity[check2]
        members[check2] = None
        self.alive_checks -= 1
        s1 = self.var_checks[v1]
        s2 = self.var_checks[v2]
        s1.discard(check2)
        s2.discard(check2)
        track = self.track_counts
        if track:
            self.chk_deg_counts[2] -= 1
            self.var_deg_counts[len(s1) + 1] -= 1
            self.var_deg_counts[len(s2) + 1] -= 1
        ledger.record(v2, v1, p)
        shared: list[int] = []
        new_d1: list[int] = []
        new_d0: list[int] = []
        for c2 in s2:
            mem2 = members[c2]
            self.op_count += 1
            if p:
                parity[c2] ^= 1
            if c2 in s1:
                shared.append(c2)
                mem2.discard(v1)
                mem2.discard(v2)
                d = len(mem2)
                if track:
                    self.chk_deg_counts[d + 2] -= 1
                    if d:
                        self.chk_deg_counts[d] += 1
                if d == 0:
                    if parity[c2]:
                        raise ContradictionError(c2)
                    members[c2] = None
                    self.alive_checks -= 1
                    new_d0.append(c2)
                else:
                    if d == 1:
                        new_d1.append(c2)
                    self._requeue(c2, d)
            else:
                mem2.discard(v2)
                mem2.add(v1)
        new_set = s1 ^ s2
        self.op_count += len(s1) + len(s2)
        self.var_checks[v1] = new_set
        self.var_checks[v2] = None
        self.alive_variables -= 1
        self.removals += 1
        self.merges += 1
        if track:
            self.var_deg_counts[len(new_set)] += 1
            # edges: v1+v2 edges replaced by the merged set; check2's two
            # edges and both edges of every shared check are gone
            self.alive_edges -= (len(s1) + len(s2) + 2) - len(new_set)
        return MergeReport(
            survivor=v1,
            removed=v2,
            parity=p,
            shared_checks=tuple(shared),
            new_degree1=tuple(new_d1),
            new_degree0=tuple(new_d0),
            survivor_degree=len(new_set),
        )

    # -- inspection ---------------------------------------------------

    def var_degree_hist(self) -> dict[int, int]:
        if self.track_counts:
            return {d: c for d, c in sorted(self.var_deg_counts.items()) if c}
        hist: Counter[int] = Counter()
        for s in self.var_checks:
            if s is not None:
                hist[len(s)] += 1
        return dict(sorted(hist.items()))

    def check_degree_hist(self) -> dict[int, int]:
        if self.track_counts:
            return {d: c for d, c in sorted(self.chk_deg_counts.items()) if c}
        hist: Counter[int] = Counter()
        for s in self.check_members:
            if s is not None:
                hist[len(s)] += 1
        return dict(sorted(hist.items()))

    def edge_total(self) -> int:
        if self.track_counts:
            return self.alive_edges
        return sum(len(s) for s in self.check_members if s is not None)

    def summary(self) -> ResidualSummary:
        return ResidualSummary(
            alive_variables=self.alive_variables,
            alive_checks=self.alive_checks,
            edges=self.edge_total(),
            var_degree_hist=self.var_degree_hist(),
            check_degree_hist=self.check_degree_hist(),
        )

    def alive_variable_ids(self) -> list[int]:
        return [v for v in range(self.n) if self.var_checks[v] is not None]

    def audit(self, truth: np.ndarray | None = None) -> None:
        """Debug walk: adjacency symmetry, queue coverage, and (optionally)
        ghost-parity consistency against a known transmitted word."""
        for c, mem in enumerate(self.check_members):
            if mem is None:
                continue
            for v in mem:
                assert self.var_checks[v] is not None, f"check {c} -> dead var {v}"
                assert c in self.var_checks[v], f"asymmetric edge ({v},{c})"
        for v, s in enumerate(self.var_checks):
            if s is None:
                continue
            for c in s:
                assert self.check_members[c] is not None, f"var {v} -> dead check {c}"
                assert v in self.check_members[c], f"asymmetric edge ({v},{c})"
        deg1_alive = {c for c, mem in enumerate(self.check_members)
                      if mem is not None and len(mem) == 1}
        deg2_alive = {c for c, mem in enumerate(self.check_members)
                      if mem is not None and len(mem) == 2}
        assert deg1_alive <= set(self.deg1), "degree-1 check missing from queue"
        assert deg2_alive <= set(self.deg2), "degree-2 check missing from queue"
        if truth is not None:
            truth = np.asarray(truth)
            for c, mem in enumerate(self.check_members):
                if mem is None:
                    continue
                acc = self.parity[c]
                for v in mem:
                    acc ^= int(truth[v])
                assert acc == 0, f"ghost parity violated at check {c}"

    def dump(self, path: str, note: str | None = None) -> None:
        """Residual graph in the ensemble file format plus a stall comment."""
        with open(path, "w") as f:
            f.write(f"n {self.n} m {self.m} E {self.E}\n")
            for c, mem in enumerate(self.check_members):
                if mem is None:
                    continue
                parts = [str(c), str(self.parity[c])] + [str(v) for v in sorted(mem)]
                f.write(" ".join(parts) + "\n")
            f.write(f"# stalled-at removals={self.removals} merges={self.merges}"
                    + (f" {note}" if note else "") + "\n")
