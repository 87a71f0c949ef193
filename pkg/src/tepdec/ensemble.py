"""Degree-distribution algebra, configuration-model graph sampling, GF(2) encoding.

Degree distributions are edge-perspective: lam[i] (rho[i]) is the fraction of
edges attached to a variable (check) node of degree i.  The generating
polynomials use the conventional exponent shift, e.g. "x^2" means every edge
sits on a degree-3 node.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import gf2


class DDFormatError(ValueError):
    """Malformed degree-distribution source text."""


class InvalidDistributionError(ValueError):
    """Coefficients that do not form a usable ensemble (sign, sum, or rate)."""


class InfeasibleEnsembleError(ValueError):
    """Degree sequence cannot be realized at the requested block length."""


class EncodingError(ValueError):
    """Systematic encoding failed; carries the GF(2) rank of H."""

    def __init__(self, message: str, rank: int):
        super().__init__(message)
        self.rank = rank


_TERM_RE = re.compile(
    r"^\s*(?P<coeff>[0-9.eE+-]+)?\s*\*?\s*(?P<var>x(\^(?P<exp>\d+))?)?\s*$"
)


def parse_polynomial(text: str) -> dict[int, float]:
    """Parse one side of a DD from polynomial notation into {degree: fraction}.

    "x^2" -> {3: 1.0}; "0.5x + 0.5x^2" -> {2: 0.5, 3: 0.5}.  Exponent k maps
    to node degree k+1.  Coefficients are normalized to sum to 1.
    """
    text = text.strip()
    if not text:
        raise DDFormatError("empty polynomial")
    # split on '+' only; leading '-' inside a term is a negative coefficient
    out: dict[int, float] = {}
    for term in text.split("+"):
        m = _TERM_RE.match(term)
        if not m or (m.group("coeff") is None and m.group("var") is None):
            raise DDFormatError(f"cannot parse term {term!r}")
        coeff = 1.0 if m.group("coeff") in (None, "") else float(m.group("coeff"))
        if m.group("var") is None:
            exp = 0
        else:
            exp = 1 if m.group("exp") is None else int(m.group("exp"))
        degree = exp + 1
        out[degree] = out.get(degree, 0.0) + coeff
    if any(c < 0 for c in out.values()):
        raise DDFormatError("negative coefficient")
    total = sum(out.values())
    if total <= 0:
        raise DDFormatError("empty support")
    return {d: c / total for d, c in sorted(out.items()) if c > 0}


@dataclass
class DegreeDistribution:
    """Edge-perspective degree-distribution pair (lambda, rho)."""

    lam: dict[int, float]
    rho: dict[int, float]

    def __post_init__(self) -> None:
        for name, side in (("lambda", self.lam), ("rho", self.rho)):
            if not side:
                raise InvalidDistributionError(f"{name}: empty support")
            if any(d < 1 for d in side):
                raise InvalidDistributionError(f"{name}: degree < 1")
            if any(c < 0 for c in side.values()):
                raise InvalidDistributionError(f"{name}: negative coefficient")
            s = sum(side.values())
            if abs(s - 1.0) > 1e-12:
                raise InvalidDistributionError(f"{name}: coefficients sum to {s!r}")
        r = self.rate
        if not 0.0 < r < 1.0:
            raise InvalidDistributionError(f"design rate {r:.6g} outside (0, 1)")

    @classmethod
    def from_polynomials(cls, lam_text: str, rho_text: str) -> "DegreeDistribution":
        return cls(parse_polynomial(lam_text), parse_polynomial(rho_text))

    @classmethod
    def regular(cls, dv: int, dc: int) -> "DegreeDistribution":
        return cls({dv: 1.0}, {dc: 1.0})

    @property
    def lam_inv_moment(self) -> float:
        """sum_i lambda_i / i; equals n / E."""
        return sum(c / d for d, c in self.lam.items())

    @property
    def rho_inv_moment(self) -> float:
        return sum(c / d for d, c in self.rho.items())

    @property
    def rate(self) -> float:
        return 1.0 - self.rho_inv_moment / self.lam_inv_moment

    @property
    def max_lam_degree(self) -> int:
        return max(self.lam)

    @property
    def max_rho_degree(self) -> int:
        return max(self.rho)

    def lam_poly(self, x):
        """lambda(x) = sum_i lam_i x^(i-1); accepts scalars or arrays."""
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for d, c in self.lam.items():
            out = out + c * x ** (d - 1)
        return out if out.shape else float(out)

    def rho_poly(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for d, c in self.rho.items():
            out = out + c * x ** (d - 1)
        return out if out.shape else float(out)


def parse_dd(text: str) -> DegreeDistribution:
    """Parse DD source text.

    Tabular form: lines "L <degree> <coeff>" / "R <degree> <coeff>"; each
    side must sum to 1 within 1e-6 (no renormalization beyond rounding).
    Polynomial form: two non-comment lines, lambda first, rho second;
    these are normalized.
    """
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise DDFormatError("empty DD source")
    if lines[0][:2].upper() in ("L ", "R "):
        lam: dict[int, float] = {}
        rho: dict[int, float] = {}
        for ln in lines:
            parts = ln.split()
            if len(parts) != 3 or parts[0].upper() not in ("L", "R"):
                raise DDFormatError(f"bad tabular line {ln!r}")
            side = lam if parts[0].upper() == "L" else rho
            d = int(parts[1])
            c = float(parts[2])
            if c < 0:
                raise DDFormatError("negative coefficient")
            side[d] = side.get(d, 0.0) + c
        for name, side in (("L", lam), ("R", rho)):
            if not side:
                raise DDFormatError(f"no {name} lines")
            s = sum(side.values())
            if abs(s - 1.0) > 1e-6:
                raise DDFormatError(f"{name} coefficients sum to {s!r}, not 1")
            for d in side:
                side[d] /= s
        return DegreeDistribution(
            {d: c for d, c in lam.items() if c > 0},
            {d: c for d, c in rho.items() if c > 0},
        )
    if len(lines) != 2:
        raise DDFormatError("polynomial form needs exactly two lines (lambda, rho)")
    return DegreeDistribution.from_polynomials(lines[0], lines[1])


def _apportion(total: int, weights: dict[int, float]) -> dict[int, int]:
    """Largest-remainder apportionment of `total` items over weighted classes."""
    wsum = sum(weights.values())
    ideal = {d: total * w / wsum for d, w in weights.items()}
    counts = {d: int(v) for d, v in ideal.items()}
    short = total - sum(counts.values())
    by_rem = sorted(ideal, key=lambda d: ideal[d] - counts[d], reverse=True)
    for d in by_rem[:short]:
        counts[d] += 1
    return counts


@dataclass
class EnsembleInstance:
    """One sampled Tanner graph plus its bookkeeping; immutable after build."""

    n: int
    m: int
    E: int  # socket count before mod-2 collapse
    dd: DegreeDistribution
    seed: int
    check_adj: tuple[tuple[int, ...], ...]
    check_parity: tuple[int, ...]
    collapsed_pairs: int
    _h_cache: np.ndarray | None = field(default=None, repr=False, compare=False)

    @cached_property
    def var_adj(self) -> tuple[tuple[int, ...], ...]:
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for c, mem in enumerate(self.check_adj):
            for v in mem:
                adj[v].append(c)
        return tuple(tuple(a) for a in adj)

    @property
    def edge_count(self) -> int:
        """Edges after mod-2 collapse."""
        return sum(len(mem) for mem in self.check_adj)

    def h_matrix(self) -> np.ndarray:
        if self._h_cache is None:
            h = np.zeros((self.m, self.n), dtype=np.uint8)
            for c, mem in enumerate(self.check_adj):
                h[c, list(mem)] = 1
            object.__setattr__(self, "_h_cache", h)
        return self._h_cache

    def syndrome(self, word: np.ndarray) -> np.ndarray:
        return (self.h_matrix() @ (np.asarray(word) & 1)) % 2


def sample_graph(dd: DegreeDistribution, n: int, seed: int) -> EnsembleInstance:
    """Sample a uniform configuration-model instance of the ensemble.

    Socket lists for both sides are matched through a seeded uniform
    permutation; parallel edges collapse mod 2 (an even multiplicity pair
    contributes no edge and is counted in `collapsed_pairs`).
    """
    if n < dd.max_lam_degree:
        raise InfeasibleEnsembleError(
            f"n={n} below maximum variable degree {dd.max_lam_degree}"
        )
    v_counts = _apportion(n, {d: c / d for d, c in dd.lam.items()})
    v_sockets = sum(d * c for d, c in v_counts.items())
    m = round(n * (1.0 - dd.rate))
    if m < 1:
        raise InfeasibleEnsembleError("no check nodes at this block length")
    c_counts = _apportion(m, {d: c / d for d, c in dd.rho.items()})
    c_sockets = sum(d * c for d, c in c_counts.items())

    # Equalize socket counts by adjusting the highest-degree check class,
    # moving any residue between existing classes when possible.
    delta = v_sockets - c_sockets
    d_hi = dd.max_rho_degree
    q, rem = divmod(delta, d_hi)
    if rem:
        moved = False
        degs = sorted(c_counts)
        for a in degs:
            b = a + rem
            if b in c_counts and c_counts[a] > 0:
                c_counts[a] -= 1
                c_counts[b] += 1
                moved = True
                break
        if not moved:
            raise InfeasibleEnsembleError(
                f"socket counts differ by {delta} and cannot be reconciled"
            )
    c_counts[d_hi] += q
    if c_counts[d_hi] < 0:
        raise InfeasibleEnsembleError("socket adjustment drove a class negative")
    assert sum(d * c for d, c in c_counts.items()) == v_sockets

    var_of_socket = np.repeat(_node_ids(v_counts), _degree_vector(v_counts))
    chk_of_socket = np.repeat(_node_ids(c_counts), _degree_vector(c_counts))
    rng = np.random.default_rng(seed)
    chk_of_socket = chk_of_socket[rng.permutation(len(chk_of_socket))]

    pair_mult: dict[tuple[int, int], int] = {}
    for v, c in zip(var_of_socket.tolist(), chk_of_socket.tolist()):
        key = (v, c)
        pair_mult[key] = pair_mult.get(key, 0) + 1
    adj: list[list[int]] = [[] for _ in range(m)]
    collapsed = 0
    for (v, c), mult in pair_mult.items():
        if mult >= 2:
            collapsed += 1
        if mult % 2 == 1:
            adj[c].append(v)
    for a in adj:
        a.sort()
    return EnsembleInstance(
        n=n,
        m=m,
        E=int(v_sockets),
        dd=dd,
        seed=seed,
        check_adj=tuple(tuple(a) for a in adj),
        check_parity=tuple([0] * m),
        collapsed_pairs=collapsed,
    )


def _node_ids(counts: dict[int, int]) -> np.ndarray:
    """Node ids 0..total-1 grouped by ascending degree class."""
    total = sum(counts.values())
    return np.arange(total, dtype=np.int64)


def _degree_vector(counts: dict[int, int]) -> np.ndarray:
    out = []
    for d in sorted(counts):
        out.extend([d] * counts[d])
    return np.array(out, dtype=np.int64)


def write_graph_file(instance: EnsembleInstance, path: str, comment: str | None = None) -> None:
    """Write the plain-text graph format: header then one line per check."""
    with open(path, "w") as f:
        f.write(f"n {instance.n} m {instance.m} E {instance.E}\n")
        for c, mem in enumerate(instance.check_adj):
            parts = [str(c), str(instance.check_parity[c])] + [str(v) for v in mem]
            f.write(" ".join(parts) + "\n")
        if comment:
            f.write(f"# {comment}\n")


def read_graph_file(path: str, dd: DegreeDistribution | None = None) -> EnsembleInstance:
    """Read a graph file; parity bits are preserved (a dumped residual graph
    re-loaded and decoded at eps=1 resumes from its recorded state)."""
    with open(path) as f:
        lines = [ln.strip() for ln in f if ln.strip() and not ln.startswith("#")]
    head = lines[0].split()
    if len(head) != 6 or head[0] != "n" or head[2] != "m" or head[4] != "E":
        raise DDFormatError(f"bad graph header {lines[0]!r}")
    n, m, e = int(head[1]), int(head[3]), int(head[5])
    adj: list[tuple[int, ...]] = [()] * m
    parity = [0] * m
    for ln in lines[1:]:
        parts = ln.split()
        c = int(parts[0])
        parity[c] = int(parts[1])
        adj[c] = tuple(int(v) for v in parts[2:])
    if dd is None:
        dd = DegreeDistribution.regular(3, 6)  # placeholder when unknown
    return EnsembleInstance(
        n=n, m=m, E=e, dd=dd, seed=-1,
        check_adj=tuple(adj), check_parity=tuple(parity), collapsed_pairs=0,
    )


def systematic_encode(instance: EnsembleInstance, message: np.ndarray) -> np.ndarray:
    """Encode `message` into a codeword with H c^T = 0 over GF(2).

    Message bits occupy the non-pivot (systematic) positions of H's RREF;
    pivot positions are solved by back-substitution.  Message length must be
    n - rank(H); the raised error reports the rank so callers can re-sample
    or shorten the message when H is row-rank deficient.
    """
    message = (np.asarray(message) & 1).astype(np.uint8)
    red, pivots = gf2.rref(instance.h_matrix())
    rank = len(pivots)
    k = instance.n - rank
    if len(message) != k:
        raise EncodingError(
            f"message length {len(message)} != n - rank = {k} (rank={rank})", rank
        )
    pivot_set = set(pivots)
    free_cols = [c for c in range(instance.n) if c not in pivot_set]
    code = np.zeros(instance.n, dtype=np.uint8)
    code[free_cols] = message
    # each pivot row: x_pivot = xor of free-column entries times message bits
    for row, col in enumerate(pivots):
        code[col] = (red[row, free_cols] @ message) % 2
    return code


def systematic_positions(instance: EnsembleInstance) -> list[int]:
    """Non-pivot columns of RREF(H): the positions carrying the message."""
    _, pivots = gf2.rref(instance.h_matrix())
    pivot_set = set(pivots)
    return [c for c in range(instance.n) if c not in pivot_set]
