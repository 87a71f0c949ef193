"""Asymptotic analysis engine.

Analytic degree-1 curve and its thresholds, the residual ensemble at the BP
stall, explicit-Euler integration of the two staged ODE systems describing
degree-2 elimination (stage A: merged pairs share no extra check; stage B:
they always share one), and the generic peeling DE used as the final
positivity verifier.

All edge fractions are normalized by the original edge count E, so e(0) <= 1.
Scaled time advances by 1/E per elimination.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .ensemble import DegreeDistribution

DEFAULT_E_REF = 3 * (1 << 12)  # edge count of an n=2^12 instance with lbar=3
DEFAULT_D_MAX = 1 << 14
MASS_FLOOR = 1e-18  # support entries below this are zeroed (see step notes)

PB_REACHED_ONE = "pB_reached_one"
RAN_OUT_OF_DEGREE2 = "ran_out_of_degree2"
R2_EXHAUSTED = "r2_exhausted"


class NoStallError(ValueError):
    """The degree-1 curve never touches zero: BP does not stall at this eps."""


class DegenerateCurveError(ValueError):
    """r1(x) is identically zero; the stall point is undefined."""


class StepSizeError(RuntimeError):
    """Integrator produced a negative fraction beyond tolerance."""


# ---------------------------------------------------------------------------
# analytic BP curve
# ---------------------------------------------------------------------------

def r1_analytic(dd: DegreeDistribution, eps: float, x):
    """Degree-1 right edge fraction along the peeling trajectory:
    r1(x) = eps * lambda(x) * [x - 1 + rho(1 - eps*lambda(x))]."""
    lx = dd.lam_poly(x)
    return eps * lx * (np.asarray(x, dtype=float) - 1.0 + dd.rho_poly(1.0 - eps * lx))


def _r1_min(dd: DegreeDistribution, eps: float, grid_points: int = 10_000) -> float:
    """min over (0,1] of r1, dense grid plus golden-section refinement."""
    x = np.linspace(1.0 / grid_points, 1.0, grid_points)
    vals = r1_analytic(dd, eps, x)
    k = int(np.argmin(vals))
    best = float(vals[k])
    lo = x[max(k - 1, 0)]
    hi = x[min(k + 1, grid_points - 1)]
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - phi * (b - a)
    d = a + phi * (b - a)
    fc = float(r1_analytic(dd, eps, c))
    fd = float(r1_analytic(dd, eps, d))
    for _ in range(60):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - phi * (b - a)
            fc = float(r1_analytic(dd, eps, c))
        else:
            a, c, fc = c, d, fd
            d = a + phi * (b - a)
            fd = float(r1_analytic(dd, eps, d))
    return min(best, fc, fd)


def bp_threshold(dd: DegreeDistribution, tol: float = 1e-5,
                 grid_points: int = 10_000) -> float:
    """Largest eps with r1(x) > 0 on all of (0,1], by bisection."""
    if _r1_min(dd, 1.0, grid_points) > 0:
        return 1.0
    lo, hi = 1e-6, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _r1_min(dd, mid, grid_points) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def stall_point(dd: DegreeDistribution, eps: float, tol: float = 1e-8) -> float:
    """Largest x in (0,1) where r1 crosses/touches zero (the BP stall abscissa)."""
    grid = np.linspace(1e-6, 1.0, 20_001)
    vals = r1_analytic(dd, eps, grid)
    if np.abs(vals).max() < 1e-12:
        raise DegenerateCurveError("r1(x) vanishes identically")
    neg = np.nonzero((vals <= 0.0) & (grid > 1e-4))[0]
    if neg.size == 0:
        raise NoStallError(f"r1 stays positive at eps={eps}; no BP stall")
    k = int(neg[-1])
    lo, hi = grid[k], grid[min(k + 1, len(grid) - 1)]
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if float(r1_analytic(dd, eps, mid)) <= 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# residual state
# ---------------------------------------------------------------------------

@dataclass
class ResidualDD:
    """Time-indexed residual degree distribution in original-E units.

    l[i] / r[i] hold the left/right degree-i edge fractions (index = degree);
    `cap` is the nominal left-support ceiling tracked by the doubling law,
    while the stored array may be shorter (trailing zero mass is trimmed).
    Left mass beyond d_max is pooled in (tail_mass, tail_moment).
    """

    l: np.ndarray
    r: np.ndarray
    e: float
    t: float
    e_ref: float
    cap: int
    tail_mass: float = 0.0
    tail_moment: float = 0.0

    @property
    def lbar(self) -> float:
        idx = np.arange(len(self.l))
        return float(((idx * self.l).sum() + self.tail_moment) / self.e)

    @property
    def l_sum(self) -> float:
        return float(self.l.sum() + self.tail_mass)

    @property
    def r_sum(self) -> float:
        return float(self.r.sum())

    def r_of(self, degree: int) -> float:
        return float(self.r[degree]) if degree < len(self.r) else 0.0

    def l_of(self, degree: int) -> float:
        return float(self.l[degree]) if degree < len(self.l) else 0.0

    def check_consistency(self, tol: float = 1e-8) -> None:
        if abs(self.l_sum - self.e) > tol or abs(self.r_sum - self.e) > tol:
            raise AssertionError(
                f"edge-mass mismatch: sum l={self.l_sum!r} sum r={self.r_sum!r} e={self.e!r}"
            )

    def copy(self) -> "ResidualDD":
        return replace(self, l=self.l.copy(), r=self.r.copy())


def _thinned_right_shape(dd: DegreeDistribution, y: float) -> np.ndarray:
    """Edge-perspective binomial thinning of rho at survival probability y;
    entry i (i >= 1) is the chance a surviving check edge has right degree i."""
    rmax = dd.max_rho_degree
    s = np.zeros(rmax + 1)
    for j, c in dd.rho.items():
        for i in range(1, j + 1):
            s[i] += c * math.comb(j - 1, i - 1) * y ** (i - 1) * (1.0 - y) ** (j - i)
    return s


def residual_dd_at_stall(dd: DegreeDistribution, eps: float,
                         e_ref: float = DEFAULT_E_REF) -> ResidualDD:
    """Predicted degree distribution of the stalled graph.

    Left side: peeling leaves unresolved variables with all their edges,
    so l_i = eps * lambda_i * x^i.  Right side: r1 from the analytic curve,
    r_i (i >= 2) by binomial thinning of rho with message-erasure parameter
    y = eps*lambda(x), rescaled so both sides carry equal mass.
    """
    x = stall_point(dd, eps)
    lmax = dd.max_lam_degree
    l = np.zeros(lmax + 1)
    for i, c in dd.lam.items():
        l[i] = eps * c * x ** i
    e = float(l.sum())
    r1 = max(float(r1_analytic(dd, eps, x)), 0.0)
    y = eps * float(dd.lam_poly(x))
    s = _thinned_right_shape(dd, y)
    s[1] = 0.0
    r = s * ((e - r1) / s.sum())
    r[1] = r1
    return ResidualDD(l=l, r=r, e=e, t=0.0, e_ref=float(e_ref), cap=lmax)


def fresh_residual_dd(dd: DegreeDistribution, eps: float,
                      e_ref: float = DEFAULT_E_REF) -> ResidualDD:
    """Degree distribution right after channel initialization (no peeling):
    l_i = eps*lambda_i and exact binomial thinning on the right, both sides
    summing to eps."""
    lmax = dd.max_lam_degree
    l = np.zeros(lmax + 1)
    for i, c in dd.lam.items():
        l[i] = eps * c
    r = eps * _thinned_right_shape(dd, eps)
    return ResidualDD(l=l, r=r, e=float(eps), t=0.0, e_ref=float(e_ref), cap=lmax)


def residual_dd_from_histograms(var_hist: dict[int, int], chk_hist: dict[int, int],
                                E: float, e_ref: float | None = None) -> ResidualDD:
    """Build a ResidualDD from empirical node-degree histograms (used to seed
    the integrator from a finite-length stall)."""
    lmax = max(var_hist) if var_hist else 2
    rmax = max(chk_hist) if chk_hist else 2
    l = np.zeros(lmax + 1)
    for d, cnt in var_hist.items():
        l[d] = d * cnt / E
    r = np.zeros(rmax + 1)
    for d, cnt in chk_hist.items():
        r[d] = d * cnt / E
    return ResidualDD(l=l, r=r, e=float(l.sum()), t=0.0,
                      e_ref=float(e_ref if e_ref is not None else E), cap=lmax)


def p_shared_check(state: ResidualDD) -> float:
    """Probability that the two variables of a degree-2 check share another
    check: lbar^2 * sum_{m>=2} r_m / (e * E), clamped to [0, 1]."""
    num = state.lbar ** 2 * float(state.r[2:].sum())
    return min(max(num / (state.e * state.e_ref), 0.0), 1.0)


# ---------------------------------------------------------------------------
# left-side elimination rates (two independently coded routes)
# ---------------------------------------------------------------------------

def left_rate_unified(l: np.ndarray, e: float, drop: int = 2) -> np.ndarray:
    """dl_i/dt = -2 i l_i / e + i * sum_{j+k=i+drop} l_j l_k / e^2.

    The indicator-derived convolution form; drop=2 for stage A (merged pair
    keeps d1+d2-2 edges), drop=4 for stage B.
    """
    l = np.asarray(l, dtype=float)
    n = len(l)
    idx = np.arange(n, dtype=float)
    conv = np.convolve(l, l)
    gains = np.zeros(n)
    s = np.arange(n) + drop
    valid = s < len(conv)
    gains[valid] = idx[valid] * conv[s[valid]] / (e * e)
    return -2.0 * idx * l / e + gains


def left_rate_cases(l: np.ndarray, e: float) -> np.ndarray:
    """Stage-A rate by explicit case decomposition.

    For i >= 3 the three-case probabilities are
      p1 = 2 q_i (1 - q_i - q_2),  p2 = q_i^2,
      p3 = sum_{j,k>=3, j+k=i+2} q_j q_k,
    with rate -i (p1 + 2 p2 - p3).  For i = 2 the printed closed forms are
    ambiguous (the class both loses two members and regains the merged
    variable when d1 = d2 = 2), so the rate is computed by enumerating
    ordered degree pairs directly.
    """
    l = np.asarray(l, dtype=float)
    n = len(l)
    q = l / e
    out = np.zeros(n)
    support = [j for j in range(2, n) if q[j] != 0.0]
    if n > 2:
        rate2 = 0.0
        for j in support:
            for k in support:
                delta = 0.0
                if j == 2:
                    delta -= 2.0
                if k == 2:
                    delta -= 2.0
                if j + k - 2 == 2:
                    delta += 2.0
                if delta:
                    rate2 += q[j] * q[k] * delta
        out[2] = rate2
    q2 = q[2] if n > 2 else 0.0
    for i in range(3, n):
        p1 = 2.0 * q[i] * (1.0 - q[i] - q2)
        p2 = q[i] * q[i]
        p3 = 0.0
        for j in range(3, i):
            k = i + 2 - j
            if 3 <= k < n:
                p3 += q[j] * q[k]
        out[i] = -i * (p1 + 2.0 * p2 - p3)
    return out


# ---------------------------------------------------------------------------
# staged Euler integration
# ---------------------------------------------------------------------------

def _self_conv(a: np.ndarray) -> np.ndarray:
    n = len(a)
    if n <= 600:
        return np.convolve(a, a)
    size = 1
    while size < 2 * n - 1:
        size <<= 1
    fa = np.fft.rfft(a, size)
    out = np.fft.irfft(fa * fa, size)[: 2 * n - 1]
    np.clip(out, 0.0, None, out=out)
    return out


class _LeftState:
    """Compact left support plus aggregated tail, advanced by Euler steps.

    Entries below MASS_FLOOR are zeroed each step: they are orders of
    magnitude beneath every stated tolerance, and keeping them would let the
    explicit scheme amplify roundoff at degrees where 2*i*dt/e approaches 1.
    """

    def __init__(self, l: np.ndarray, tail_mass: float, tail_moment: float,
                 cap: int, d_max: int):
        nz = np.nonzero(l)[0]
        hi = int(nz[-1]) if nz.size else 2
        self.l = l[: hi + 1].astype(float).copy()
        self.tail_mass = float(tail_mass)
        self.tail_moment = float(tail_moment)
        self.cap = cap
        self.d_max = d_max

    def moments(self) -> tuple[float, float]:
        idx = np.arange(len(self.l))
        return (float(self.l.sum() + self.tail_mass),
                float((idx * self.l).sum() + self.tail_moment))

    def step(self, dt: float, e: float, drop: int) -> None:
        l = self.l
        hi = len(l) - 1
        conv = _self_conv(l)
        new_top = min(2 * hi - drop, self.d_max)
        size = max(new_top, hi) + 1
        gains = np.zeros(size)
        if new_top >= 1:
            # merged degree can reach down to 1 (e.g. two degree-2 variables
            # sharing a check in the drop=4 stage); degree 0 carries no edges
            gd = np.arange(1, new_top + 1)
            src = gd + drop
            vals = np.where(src <= 2 * hi, conv[np.minimum(src, 2 * hi)], 0.0)
            gains[gd] = gd * vals / (e * e)
        d_tm = d_ts = 0.0
        if 2 * hi - drop > self.d_max:
            src = np.arange(self.d_max + drop + 1, 2 * hi + 1)
            deg = src - float(drop)
            w = conv[src] / (e * e)
            d_tm += float((deg * w).sum())
            d_ts += float((deg * deg * w).sum())
        if self.tail_mass > 0.0:
            d_t = self.tail_moment / self.tail_mass
            idx = np.arange(hi + 1)
            m0 = float(l.sum())
            m1 = float((idx * l).sum())
            m2 = float((idx * idx * l).sum())
            a = d_t - drop
            w = 2.0 * self.tail_mass / (e * e)
            d_tm += w * (a * m0 + m1)
            d_ts += w * (m2 + 2.0 * a * m1 + a * a * m0)
            w2 = self.tail_mass ** 2 / (e * e)
            d_tm += w2 * (2.0 * d_t - drop)
            d_ts += w2 * (2.0 * d_t - drop) ** 2
            d_tm -= 2.0 * d_t * self.tail_mass / e
            d_ts -= 2.0 * d_t * d_t * self.tail_mass / e
        idx = np.arange(size, dtype=float)
        lnew = np.zeros(size)
        lnew[: hi + 1] = l
        lnew += dt * (gains - 2.0 * idx * lnew / e)
        if float(lnew.min()) < -1e-9:
            raise StepSizeError(
                f"left fraction reached {lnew.min():.3e}; reduce dt"
            )
        np.clip(lnew, 0.0, None, out=lnew)
        lnew[lnew < MASS_FLOOR] = 0.0
        nz = np.nonzero(lnew)[0]
        self.l = lnew[: int(nz[-1]) + 1] if nz.size else lnew[:3]
        self.tail_mass = max(self.tail_mass + dt * d_tm, 0.0)
        self.tail_moment = max(self.tail_moment + dt * d_ts, 0.0)
        self.cap = min(2 * self.cap - drop, self.d_max)


@dataclass
class StageResult:
    """Outcome of one staged integration."""

    end_time: float
    end_reason: str
    trajectory: list[ResidualDD] = field(default_factory=list)
    final: ResidualDD | None = None


def _snapshot(left: _LeftState, r: np.ndarray, e: float, t: float,
              e_ref: float) -> ResidualDD:
    return ResidualDD(l=left.l.copy(), r=r.copy(), e=e, t=t, e_ref=e_ref,
                      cap=left.cap, tail_mass=left.tail_mass,
                      tail_moment=left.tail_moment)


def _interpolate(prev: ResidualDD, curr: ResidualDD, theta: float) -> ResidualDD:
    """State at prev.t + theta*(curr.t - prev.t).

    For states one Euler step apart this equals a partial Euler step, so
    crossing times and crossing states reported through it stay first-order
    accurate without the whole-step quantization of the stop check.
    """
    size = max(len(prev.l), len(curr.l))
    la = np.zeros(size)
    lb = np.zeros(size)
    la[: len(prev.l)] = prev.l
    lb[: len(curr.l)] = curr.l
    w = 1.0 - theta
    return ResidualDD(
        l=w * la + theta * lb,
        r=w * prev.r + theta * curr.r,
        e=w * prev.e + theta * curr.e,
        t=w * prev.t + theta * curr.t,
        e_ref=curr.e_ref,
        cap=curr.cap,
        tail_mass=w * prev.tail_mass + theta * curr.tail_mass,
        tail_moment=w * prev.tail_moment + theta * curr.tail_moment,
    )


def stage_a_integrate(init: ResidualDD, dt: float, d_max: int = DEFAULT_D_MAX,
                      record_every: int | None = None) -> StageResult:
    """Euler-integrate the no-shared-check elimination stage.

    Per unit time: the left side follows the unified convolution rate with
    drop=2, r2 falls at exactly 2 (closed form r2(t) = r2(0) - 2t), other
    right fractions are constant, and e falls at 2.  Stops when the shared
    -check probability reaches one or r2 is exhausted.
    """
    r2_0 = init.r_of(2)
    if dt > 1e-4 * r2_0:
        raise ValueError(f"dt={dt} exceeds 1e-4 * r2(0) = {1e-4 * r2_0}")
    if record_every is None:
        record_every = max(1, int(r2_0 / (2.0 * dt) / 400.0))
    left = _LeftState(init.l, init.tail_mass, init.tail_moment, init.cap, d_max)
    r = init.r.astype(float).copy()
    e = float(init.e)
    e_ref = float(init.e_ref)
    t = float(init.t)
    r2_rest = float(r[3:].sum()) if len(r) > 3 else 0.0
    traj: list[ResidualDD] = []
    steps = 0
    prev = _snapshot(left, r, e, t, e_ref)
    pb_prev = (prev.lbar ** 2) * (r[2] + r2_rest) / (e * e_ref)
    while True:
        curr = _snapshot(left, r, e, t, e_ref)
        pb = (curr.lbar ** 2) * (r[2] + r2_rest) / (e * e_ref)
        if steps % record_every == 0:
            traj.append(curr)
        if pb >= 1.0:
            reason = PB_REACHED_ONE
            # land exactly on the crossing via a partial step back
            theta = 1.0 if pb <= pb_prev else min(
                max((1.0 - pb_prev) / (pb - pb_prev), 0.0), 1.0)
            final = _interpolate(prev, curr, theta) if steps else curr
            break
        if r[2] <= 2.0 * dt:
            reason = RAN_OUT_OF_DEGREE2
            # r2 falls at exactly 2/unit: finish with a partial step
            theta = (r[2] / 2.0) / dt
            nxt = _advance_a(left, r, e, t, e_ref, dt, r2_rest)
            final = _interpolate(curr, nxt, theta)
            break
        prev, pb_prev = curr, pb
        left.step(dt, e, drop=2)
        r[2] -= 2.0 * dt
        e -= 2.0 * dt
        t += dt
        steps += 1
    traj.append(final)
    return StageResult(end_time=final.t, end_reason=reason, trajectory=traj,
                       final=final)


def _advance_a(left: _LeftState, r: np.ndarray, e: float, t: float,
               e_ref: float, dt: float, r2_rest: float) -> ResidualDD:
    """One lookahead step used only to interpolate the stage-A exhaustion."""
    l2 = _LeftState(left.l, left.tail_mass, left.tail_moment, left.cap, left.d_max)
    l2.step(dt, e, drop=2)
    r2 = r.copy()
    r2[2] -= 2.0 * dt
    return _snapshot(l2, r2, e - 2.0 * dt, t + dt, e_ref)


def stage_b_integrate(init: ResidualDD, dt: float, d_max: int = DEFAULT_D_MAX,
                      record_every: int | None = None,
                      require_pb: bool = True) -> StageResult:
    """Euler-integrate the always-shared-check stage until r2 is exhausted.

    The merged variable keeps d1+d2-4 edges (drop=4 convolution) and e falls
    at 4 per unit time.  The shared check has degree m >= 2 with probability
    r_m over the degree->=2 right mass; the resulting rates are
      dr1 = r3/e2,  dr2 = 2(r4 - r2)/e2 - 2,  drm = m (r_{m+2} - r_m)/e2,
    where e2 = sum_{m>=2} r_m.  (Normalizing by e2 rather than e keeps both
    sides losing exactly 4 edges per unit time once r1 grows.)
    """
    if require_pb and p_shared_check(init) < 0.999:
        raise ValueError("stage B requires a state whose shared-check "
                         "probability has reached one")
    r2_0 = init.r_of(2)
    if record_every is None:
        record_every = max(1, int(max(r2_0, 1e-12) / (2.0 * dt) / 400.0))
    left = _LeftState(init.l, init.tail_mass, init.tail_moment, init.cap, d_max)
    r = init.r.astype(float).copy()
    rmax = len(r) - 1
    e = float(init.e)
    e_ref = float(init.e_ref)
    t = float(init.t)
    traj: list[ResidualDD] = []
    steps = 0

    def right_rates(rv: np.ndarray, e2: float) -> np.ndarray:
        dr = np.zeros_like(rv)
        dr[1] = (rv[3] / e2) if rmax >= 3 else 0.0
        dr[2] = 2.0 * ((rv[4] if rmax >= 4 else 0.0) - rv[2]) / e2 - 2.0
        for m in range(3, rmax + 1):
            up = rv[m + 2] if m + 2 <= rmax else 0.0
            dr[m] = m * (up - rv[m]) / e2
        return dr

    while True:
        curr = _snapshot(left, r, e, t, e_ref)
        if steps % record_every == 0:
            traj.append(curr)
        e2 = float(r[2:].sum())
        if r[2] <= 2.0 * dt or e <= 4.0 * dt or e2 <= 0.0:
            # finish with a partial step onto the r2 = 0 crossing
            rate = 2.0
            if e2 > 0.0:
                rate = max(-float(right_rates(r, e2)[2]), 1e-9)
            theta = min(r[2] / rate / dt, 1.0)
            if theta > 0.0 and e > 4.0 * dt and e2 > 0.0:
                nxt = _advance_b(left, r, e, t, e_ref, dt, right_rates, e2)
                final = _interpolate(curr, nxt, theta)
            else:
                final = curr
            break
        left.step(dt, e, drop=4)
        r += dt * right_rates(r, e2)
        if float(r.min()) < -1e-9:
            raise StepSizeError(f"right fraction reached {r.min():.3e}; reduce dt")
        np.clip(r, 0.0, None, out=r)
        e -= 4.0 * dt
        t += dt
        steps += 1
    traj.append(final)
    return StageResult(end_time=final.t, end_reason=R2_EXHAUSTED, trajectory=traj,
                       final=final)


def _advance_b(left: _LeftState, r: np.ndarray, e: float, t: float,
               e_ref: float, dt: float, right_rates, e2: float) -> ResidualDD:
    l2 = _LeftState(left.l, left.tail_mass, left.tail_moment, left.cap, left.d_max)
    l2.step(dt, e, drop=4)
    rn = r + dt * right_rates(r, e2)
    np.clip(rn, 0.0, None, out=rn)
    return _snapshot(l2, rn, e - 4.0 * dt, t + dt, e_ref)


# ---------------------------------------------------------------------------
# generic peeling DE (the positivity verifier)
# ---------------------------------------------------------------------------

def peeling_de(init: ResidualDD, n_nominal: int = 20_000,
               e_stop_rel: float = 1e-4,
               record: bool = False) -> tuple[bool, list[tuple[float, float, float]]]:
    """Integrate the generic BP peeling differential equations from `init`.

    Per unit time one degree-1 check resolves a variable of edge-biased
    degree: dl_i = -i l_i / e; the variable's other (lbar - 1) edges each
    demote a uniformly random check one degree:
      dr_m = (lbar - 1) m (r_{m+1} - r_m)/e - [m == 1],
    and de = -lbar.  Returns (r1 stayed positive until e vanished, trajectory
    of (t, e, r1) rows when record is set).  Steps are Euler with the size
    clamped where the system stiffens (high lbar against small e).
    """
    l = init.l.astype(float).copy()
    tail_m, tail_s = float(init.tail_mass), float(init.tail_moment)
    r = init.r.astype(float).copy()
    rmax = len(r) - 1
    idx = np.arange(len(l), dtype=float)
    e = float(init.e)
    e_stop = e * e_stop_rel
    dt_nom = e / n_nominal
    rows: list[tuple[float, float, float]] = []
    t = 0.0
    guard = 0
    while e > e_stop:
        guard += 1
        if guard > 40 * n_nominal:
            raise StepSizeError("peeling DE failed to reach e ~ 0")
        if r[1] <= 0.0:
            if record:
                rows.append((t, e, float(r[1])))
            return False, rows
        m1 = float((idx * l).sum()) + tail_s
        lbar = m1 / e
        h = max(lbar - 1.0, 0.0)
        dt = min(dt_nom, 0.2 * e / (h * (rmax + 1) + 1e-12), 0.2 * e / max(lbar, 1.0))
        if record:
            rows.append((t, e, float(r[1])))
        dr = np.zeros_like(r)
        for m in range(1, rmax + 1):
            up = r[m + 1] if m + 1 <= rmax else 0.0
            dr[m] = h * m * (up - r[m]) / e
        dr[1] -= 1.0
        l += dt * (-idx * l / e)
        if tail_m > 0.0:
            d_t = tail_s / tail_m
            tail_m += dt * (-d_t * tail_m / e)
            tail_s += dt * (-d_t * d_t * tail_m / e)
        r += dt * dr
        np.clip(r, 0.0, None, out=r)
        e -= dt * lbar
        t += dt
    if record:
        rows.append((t, e, float(r[1])))
    return True, rows


def bp_positivity_check(final: ResidualDD, n_nominal: int = 20_000) -> bool:
    """Does BP, started from `final`, keep a positive degree-1 fraction all
    the way down?  Immediately false when no degree-1 checks exist and none
    can be created."""
    if final.r_of(1) <= 0.0 and final.r_of(3) <= 0.0 and final.r_of(2) <= 0.0:
        return False
    ok, _ = peeling_de(final, n_nominal=n_nominal)
    return ok


# ---------------------------------------------------------------------------
# TEP threshold lower bound
# ---------------------------------------------------------------------------

@dataclass
class ThresholdReport:
    eps_max_a: float
    eps_bp: float
    e_ref: float
    dt_rel: float
    improved: bool


def _tep_predicate(dd: DegreeDistribution, eps: float, e_ref: float,
                   dt_rel: float, d_max: int) -> bool:
    try:
        init = residual_dd_at_stall(dd, eps, e_ref)
    except (NoStallError, DegenerateCurveError):
        return False
    dt = dt_rel * init.r_of(2)
    if dt <= 0.0:
        return False
    a = stage_a_integrate(init, dt, d_max=d_max)
    if a.end_reason != PB_REACHED_ONE:
        return False
    b = stage_b_integrate(a.final, dt, d_max=d_max)
    return bp_positivity_check(b.final)


def tep_threshold_lower_bound(dd: DegreeDistribution,
                              e_ref: float = DEFAULT_E_REF,
                              dt_rel: float = 1e-5,
                              tol: float = 1e-4,
                              d_max: int = DEFAULT_D_MAX) -> ThresholdReport:
    """Bisect for the largest eps where stage A reaches shared-check
    probability one and the stage-B handoff passes the BP positivity check.

    Returns eps_bp(dd) with improved=False when the predicate already fails
    just above the BP threshold at these settings.
    """
    eps_bp = bp_threshold(dd)
    lo = eps_bp + tol
    if not _tep_predicate(dd, lo, e_ref, dt_rel, d_max):
        return ThresholdReport(eps_max_a=eps_bp, eps_bp=eps_bp, e_ref=e_ref,
                               dt_rel=dt_rel, improved=False)
    hi = 1.0 - dd.rate - 1e-9
    if _tep_predicate(dd, hi, e_ref, dt_rel, d_max):
        return ThresholdReport(eps_max_a=hi, eps_bp=eps_bp, e_ref=e_ref,
                               dt_rel=dt_rel, improved=True)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _tep_predicate(dd, mid, e_ref, dt_rel, d_max):
            lo = mid
        else:
            hi = mid
    return ThresholdReport(eps_max_a=0.5 * (lo + hi), eps_bp=eps_bp,
                           e_ref=e_ref, dt_rel=dt_rel, improved=True)


def x_of_e(dd: DegreeDistribution, eps: float, e: float) -> float:
    """Invert e = eps * x * lambda(x) for x in (0, 1] (monotone)."""
    lo, hi = 0.0, 1.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if eps * mid * float(dd.lam_poly(mid)) < e:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
