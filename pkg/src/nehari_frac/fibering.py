"""Fibering map along rays t (u, v), projection roots and branch classification.

For a nonzero state the ray energy reduces to three coefficients

    P = ||(u,v)||^p,   B = sum(lam|u|^q + mu|v|^q),   D = 2 sum|u|^a|v|^b,

so phi(t) = (t^p/p) P - (t^q/q) B - (t^(a+b)/(a+b)) D, and the auxiliary map
Psi(t) = t^(p-a-b) P - t^(q-a-b) B satisfies phi'(t) = t^(a+b-1) (Psi(t) - D):
stationary ray points are exactly the crossings of Psi with level D.  When
0 < D < Psi(t_max) there are two roots t1 < t_max < t2 with phi''(t1) > 0
(local minimum branch) and phi''(t2) < 0 (local maximum branch).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DegenerateDirectionError, NehariFracError, ZeroPairError
from .grid import FieldPair, GridDomain, as_values, seminorm_p, signed_pow
from .params import ModelParams

ROOT_RTOL = 1e-12
MANIFOLD_RTOL = 1e-8
CLASSIFY_DEADBAND = 1e-8
MAX_DOUBLINGS = 200

NPLUS = "Nplus"
NMINUS = "Nminus"
NZERO = "Nzero"
OFF_MANIFOLD = "off_manifold"

TWO_ROOTS = "two_roots"
PLUS_ONLY = "plus_only"
MINUS_ONLY = "minus_only"
ABOVE_THRESHOLD = "above_threshold"
NO_ROOTS = "no_roots"


@dataclass(frozen=True)
class ReducedTriple:
    """Ray coefficients (P, B, D) of a nonzero state."""

    P: float
    B: float
    D: float

    def scale_second(self) -> float:
        """Magnitude scale for phi''(1) built from term sizes; used for dead-bands."""
        return self.P + self.B + self.D


@dataclass(frozen=True)
class FiberingReport:
    triple: ReducedTriple
    outcome: str
    t_max: Optional[float]
    t1: Optional[float]
    t2: Optional[float]
    branch_energy_plus: Optional[float]
    branch_energy_minus: Optional[float]
    classification_at_1: str
    psi_at_tmax: Optional[float]

    def to_dict(self) -> dict:
        return {
            "P": self.triple.P,
            "B": self.triple.B,
            "D": self.triple.D,
            "outcome": self.outcome,
            "t_max": self.t_max,
            "t1": self.t1,
            "t2": self.t2,
            "branch_energy_plus": self.branch_energy_plus,
            "branch_energy_minus": self.branch_energy_minus,
            "classification_at_1": self.classification_at_1,
            "psi_at_tmax": self.psi_at_tmax,
        }


def reduce_pair(params: ModelParams, dom: GridDomain, pair: FieldPair) -> ReducedTriple:
    """Lattice sums for (P, B, D); rejects the zero pair."""
    u = as_values(pair.u)
    v = as_values(pair.v)
    if not (np.any(u) or np.any(v)):
        raise ZeroPairError("zero pair has no fibering")
    P = seminorm_p(dom, u) ** params.p + seminorm_p(dom, v) ** params.p
    cell = dom.h ** dom.dim
    au = np.abs(u)
    av = np.abs(v)
    B = cell * float(np.sum(params.lam * au ** params.q + params.mu * av ** params.q))
    D = 2.0 * cell * float(np.sum(au ** params.alpha * av ** params.beta))
    return ReducedTriple(P, B, D)


def _check_t(t: float):
    if not t > 0:
        raise ValueError(f"fibering maps are defined for t > 0, got t = {t}")


def phi(triple: ReducedTriple, params: ModelParams, t: float) -> float:
    _check_t(t)
    ab = params.ab
    return (t ** params.p / params.p) * triple.P - (t ** params.q / params.q) * triple.B - (t ** ab / ab) * triple.D


def phi_prime(triple: ReducedTriple, params: ModelParams, t: float) -> float:
    _check_t(t)
    ab = params.ab
    return t ** (params.p - 1) * triple.P - t ** (params.q - 1) * triple.B - t ** (ab - 1) * triple.D


def phi_second(triple: ReducedTriple, params: ModelParams, t: float) -> float:
    _check_t(t)
    p, q, ab = params.p, params.q, params.ab
    return (
        (p - 1) * t ** (p - 2) * triple.P
        - (q - 1) * t ** (q - 2) * triple.B
        - (ab - 1) * t ** (ab - 2) * triple.D
    )


def psi(triple: ReducedTriple, params: ModelParams, t: float) -> float:
    _check_t(t)
    ab = params.ab
    return t ** (params.p - ab) * triple.P - t ** (params.q - ab) * triple.B


def psi_prime(triple: ReducedTriple, params: ModelParams, t: float) -> float:
    _check_t(t)
    p, q, ab = params.p, params.q, params.ab
    return (p - ab) * t ** (p - ab - 1) * triple.P - (q - ab) * t ** (q - ab - 1) * triple.B


def t_max(triple: ReducedTriple, params: ModelParams) -> float:
    """Unique maximizer of Psi: ((a+b-q) B / ((a+b-p) P))^(1/(p-q))."""
    if triple.B <= 0:
        raise NehariFracError("Psi has no interior maximum when the concave integral vanishes")
    if triple.P <= 0:
        raise ZeroPairError("zero pair has no fibering")
    ab = params.ab
    return ((ab - params.q) * triple.B / ((ab - params.p) * triple.P)) ** (1.0 / (params.p - params.q))


def _phi_prime_scale(triple: ReducedTriple, params: ModelParams, t: float) -> float:
    """Sum of phi'(t) term magnitudes; the natural relative scale at t."""
    ab = params.ab
    return (
        t ** (params.p - 1) * triple.P
        + t ** (params.q - 1) * triple.B
        + t ** (ab - 1) * triple.D
    )


def _root_bisect(triple: ReducedTriple, params: ModelParams, lo: float, hi: float, rtol: float = ROOT_RTOL) -> float:
    """Bisection for phi' = 0 in [lo, hi] (sign change required), Newton-polished.

    Newton runs on the smooth scalar map t -> phi'(t) (smooth for every p > 1),
    guarded to stay inside the bracket.
    """
    flo = phi_prime(triple, params, lo)
    fhi = phi_prime(triple, params, hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0:
        raise NehariFracError("root bracket does not straddle a sign change")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fmid = phi_prime(triple, params, mid)
        if fmid == 0.0:
            return mid
        if flo * fmid < 0:
            hi, fhi = mid, fmid
        else:
            lo, flo = mid, fmid
        if hi - lo <= rtol * mid:
            break
    t = 0.5 * (lo + hi)
    for _ in range(8):
        f = phi_prime(triple, params, t)
        df = phi_second(triple, params, t)
        if df == 0.0:
            break
        step = f / df
        t_new = t - step
        if not lo <= t_new <= hi:
            break
        if t_new == t:
            break
        t = t_new
    return t


def project(params: ModelParams, dom: GridDomain, pair: FieldPair) -> FiberingReport:
    """Locate the stationary ray scales of a nonzero state.

    Returns two roots when 0 < D < Psi(t_max); degenerate rays (B = 0 or
    D = 0) come back as single-root variants, and D >= Psi(t_max) reports
    the above-threshold outcome that mirrors a failed smallness condition.
    """
    triple = reduce_pair(params, dom, pair)
    return project_triple(triple, params, classification=classify(params, dom, pair))


def project_triple(triple: ReducedTriple, params: ModelParams, classification: str = OFF_MANIFOLD) -> FiberingReport:
    """Root finding on precomputed (P, B, D); see project()."""
    p, q, ab = params.p, params.q, params.ab

    def report(outcome, tm=None, t1=None, t2=None, psi_tm=None):
        return FiberingReport(
            triple=triple,
            outcome=outcome,
            t_max=tm,
            t1=t1,
            t2=t2,
            branch_energy_plus=None if t1 is None else phi(triple, params, t1),
            branch_energy_minus=None if t2 is None else phi(triple, params, t2),
            classification_at_1=classification,
            psi_at_tmax=psi_tm,
        )

    if triple.B == 0.0 and triple.D == 0.0:
        return report(NO_ROOTS)
    if triple.D == 0.0:
        # pure concave ray: phi' = t^(q-1) (t^(p-q) P - B), single minimum
        t1 = (triple.B / triple.P) ** (1.0 / (p - q))
        return report(PLUS_ONLY, tm=t_max(triple, params), t1=t1)
    if triple.B == 0.0:
        # pure convex ray: single maximum
        t2 = (triple.P / triple.D) ** (1.0 / (ab - p))
        return report(MINUS_ONLY, t2=t2)

    tm = t_max(triple, params)
    psi_tm = psi(triple, params, tm)
    if not triple.D < psi_tm:
        return report(ABOVE_THRESHOLD, tm=tm, psi_tm=psi_tm)

    # lower root: phi' < 0 near 0 (concave term dominates), > 0 at t_max
    lo = tm
    for _ in range(MAX_DOUBLINGS):
        lo *= 0.5
        if phi_prime(triple, params, lo) < 0:
            break
    else:
        raise NehariFracError("failed to bracket the lower root")
    t1 = _root_bisect(triple, params, lo, tm)

    # upper root: phi' -> -infinity since a+b > p
    hi = tm
    for _ in range(MAX_DOUBLINGS):
        hi *= 2.0
        if phi_prime(triple, params, hi) < 0:
            break
    else:
        raise NehariFracError("failed to bracket the upper root after doublings")
    t2 = _root_bisect(triple, params, tm, hi)
    return report(TWO_ROOTS, tm=tm, t1=t1, t2=t2, psi_tm=psi_tm)


def scale_pair(pair: FieldPair, t: float) -> FieldPair:
    from .grid import Field

    return FieldPair(Field(t * as_values(pair.u)), Field(t * as_values(pair.v)))


def classify(params: ModelParams, dom: GridDomain, pair: FieldPair, tol: float = CLASSIFY_DEADBAND) -> str:
    """Trichotomy by sign of phi''(1) with a dead-band, after a membership check."""
    triple = reduce_pair(params, dom, pair)
    constraint = triple.P - triple.B - triple.D
    if abs(constraint) > tol * triple.P:
        return OFF_MANIFOLD
    second = phi_second(triple, params, 1.0)
    band = tol * triple.scale_second()
    if second > band:
        return NPLUS
    if second < -band:
        return NMINUS
    return NZERO


def phi_second_expressions(triple: ReducedTriple, params: ModelParams):
    """The four equivalent forms of phi''(1) for on-manifold states (P = B + D)."""
    p, q, ab = params.p, params.q, params.ab
    P, B, D = triple.P, triple.B, triple.D
    return (
        (p - 1) * P - (q - 1) * B - (ab - 1) * D,
        (p - ab) * D + (p - q) * B,
        (p - q) * P - (ab - q) * D,
        (p - ab) * P + (ab - q) * B,
    )


def phi_second_consistency(
    params: ModelParams, dom: GridDomain, pair: FieldPair, tol: float = MANIFOLD_RTOL
) -> float:
    """Max pairwise discrepancy of the four phi''(1) forms, relative to term scale.

    Only meaningful on the manifold; off-manifold input is rejected because
    the four forms use the constraint P = B + D.
    """
    triple = reduce_pair(params, dom, pair)
    constraint = triple.P - triple.B - triple.D
    if abs(constraint) > tol * triple.P:
        raise NehariFracError(
            f"pair is off the manifold (relative constraint {abs(constraint) / triple.P:.3e}); "
            "the equivalent second-derivative forms require membership"
        )
    exprs = phi_second_expressions(triple, params)
    scale = triple.scale_second()
    worst = 0.0
    for i in range(4):
        for j in range(i + 1, 4):
            worst = max(worst, abs(exprs[i] - exprs[j]))
    return worst / scale


def xi_prime(params: ModelParams, dom: GridDomain, z: FieldPair, omega: FieldPair,
             tol: float = MANIFOLD_RTOL, denom_floor: float = 1e-8) -> float:
    """Derivative of the re-projection scale xi at an on-manifold state z.

    xi(w) is the scale putting xi(w) (z - w) back on the manifold, xi(0) = 1.
    The value is the constraint variation over phi''(1):

        <xi'(0), omega> = DQ(z)[omega] / [(p-q) P - (a+b-q) D],

    with DQ(z)[omega] = p A(u,w1) + p A(v,w2) - K(z,omega)
                        - 2 sum(alpha |u|^(a-2) u |v|^b w1 + beta |u|^a |v|^(b-2) v w2)
    and K(z,omega) = q sum(lam |u|^(q-2) u w1 + mu |v|^(q-2) v w2).  The sign
    is fixed by the re-projection derivative itself: for omega = z the scale
    map is xi(eps z) = 1/(1-eps), so <xi'(0), z> = +1.
    """
    triple = reduce_pair(params, dom, z)
    constraint = triple.P - triple.B - triple.D
    if abs(constraint) > tol * triple.P:
        raise NehariFracError(
            f"xi_prime needs an on-manifold state (relative constraint {abs(constraint) / triple.P:.3e})"
        )
    p, q, ab = params.p, params.q, params.ab
    denom = (p - q) * triple.P - (ab - q) * triple.D
    if abs(denom) <= denom_floor * triple.scale_second():
        raise DegenerateDirectionError(
            "N0-degenerate direction: the implicit-map denominator is numerically zero"
        )

    u = as_values(z.u)
    v = as_values(z.v)
    w1 = as_values(omega.u)
    w2 = as_values(omega.v)
    from .grid import plap_gradient

    cell = dom.h ** dom.dim
    numer = p * (float(np.dot(plap_gradient(dom, u), w1)) + float(np.dot(plap_gradient(dom, v), w2)))
    numer -= q * cell * float(
        np.sum(params.lam * signed_pow(u, q - 1.0) * w1 + params.mu * signed_pow(v, q - 1.0) * w2)
    )
    au = np.abs(u)
    av = np.abs(v)
    numer -= 2.0 * cell * float(
        np.sum(
            params.alpha * signed_pow(u, params.alpha - 1.0) * av ** params.beta * w1
            + params.beta * au ** params.alpha * signed_pow(v, params.beta - 1.0) * w2
        )
    )
    return numer / denom


def sample_curves(triple: ReducedTriple, params: ModelParams, t_lo: float, t_hi: float, n_samples: int):
    """Sample (t, phi, phi', phi'', Psi) on a geometric t grid for plotting."""
    if not (t_lo > 0 and t_hi > t_lo):
        raise ValueError("need 0 < t_lo < t_hi")
    if n_samples < 2:
        raise ValueError("need at least two samples")
    ts = np.geomspace(t_lo, t_hi, n_samples)
    rows = []
    for t in ts:
        t = float(t)
        rows.append(
            (
                t,
                phi(triple, params, t),
                phi_prime(triple, params, t),
                phi_second(triple, params, t),
                psi(triple, params, t),
            )
        )
    return rows
