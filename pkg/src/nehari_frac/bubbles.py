"""Model minimizer profile, rescaling, truncation pipeline, and asymptotic scans.

The base profile U(r) = (1 + r^(p/(p-1)))^(-(n-ps)/p) is the conjectured
Rayleigh minimizer shape; it is a proven minimizer only for p = 2 and is used
here as a model profile (a tabulated radial profile can be injected instead).
The truncation maps g and G cut the rescaled profile U_eps to the ball of
radius theta*delta while keeping it untouched inside radius delta.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import SupportError
from .fibering import (
    ABOVE_THRESHOLD,
    ReducedTriple,
    phi,
    project_triple,
)
from .grid import Field, GridDomain, lr_norm, seminorm_p
from .params import ModelParams

MODEL_KIND = "model_p"
TABULATED_KIND = "tabulated"


# ---------------------------------------------------------------------------
# Radial profiles
# ---------------------------------------------------------------------------

def model_profile(params: ModelParams, r):
    """The conjectured minimizer shape; U(0) = 1, strictly decreasing.

    Proven to be the actual minimizer only for p = 2; for other p it is a
    model profile and downstream reports flag it as such.
    """
    r = np.asarray(r, dtype=np.float64)
    expo = params.p / (params.p - 1.0)
    out = (1.0 + r ** expo) ** (-(params.n - params.p * params.s) / params.p)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class RadialProfile:
    """A radial profile U(r) with the parameters that set its scaling laws."""

    params: ModelParams
    kind: str
    func: Callable[[np.ndarray], np.ndarray]

    def u(self, r):
        r = np.asarray(r, dtype=np.float64)
        out = np.asarray(self.func(r), dtype=np.float64)
        return out if out.ndim else float(out)


def model_radial_profile(params: ModelParams) -> RadialProfile:
    return RadialProfile(params, MODEL_KIND, lambda r: model_profile(params, r))


def tabulated_radial_profile(params: ModelParams, radii: np.ndarray, values: np.ndarray) -> RadialProfile:
    """Radial profile from a sample table; beyond the table it continues with
    the optimal decay power r^(-(n-ps)/(p-1)) matched at the last sample."""
    radii = np.asarray(radii, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if radii.ndim != 1 or radii.shape != values.shape or radii.shape[0] < 2:
        raise ValueError("need matching 1-d radius/value tables with at least two rows")
    if not np.all(np.diff(radii) > 0):
        raise ValueError("radius table must be strictly increasing")
    decay = (params.n - params.p * params.s) / (params.p - 1.0)
    r_end, v_end = radii[-1], values[-1]

    def func(r):
        r = np.asarray(r, dtype=np.float64)
        inside = np.interp(r, radii, values)
        tail = v_end * (np.maximum(r, r_end) / r_end) ** (-decay)
        return np.where(r <= r_end, inside, tail)

    return RadialProfile(params, TABULATED_KIND, func)


def rescale(profile: RadialProfile, epsilon: float, r):
    """U_eps(r) = eps^(-(n-ps)/p) U(r/eps)."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    params = profile.params
    scale = epsilon ** (-(params.n - params.p * params.s) / params.p)
    return scale * profile.u(np.asarray(r, dtype=np.float64) / epsilon)


# ---------------------------------------------------------------------------
# Truncation pipeline
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BubbleProfile:
    """A rescaled profile with its truncation levels precomputed."""

    profile: RadialProfile
    epsilon: float
    delta: float
    theta: float
    u_at_delta: float       # U_eps(delta)
    u_at_theta_delta: float  # U_eps(theta*delta)
    m_eps_delta: float

    @property
    def kind(self) -> str:
        return self.profile.kind

    def samples(self, radii) -> np.ndarray:
        """Radial table of the truncated profile u_eps_delta."""
        return bubble_value(self, np.asarray(radii, dtype=np.float64))


def make_bubble(profile: RadialProfile, epsilon: float, delta: float, theta: float) -> BubbleProfile:
    if delta <= 0:
        raise ValueError("delta must be positive")
    if theta <= 1:
        raise ValueError("theta must exceed 1")
    if not 0 < epsilon <= delta / 2.0:
        raise ValueError("need 0 < epsilon <= delta/2")
    u_d = float(rescale(profile, epsilon, delta))
    u_td = float(rescale(profile, epsilon, theta * delta))
    if not u_td < u_d:
        raise ValueError("profile is not strictly decreasing between delta and theta*delta")
    m = u_d / (u_d - u_td)
    return BubbleProfile(profile, epsilon, delta, theta, u_d, u_td, m)


def truncation(profile: RadialProfile, epsilon: float, delta: float, theta: float, t):
    """The cut maps (g, G) at level t >= 0.

    g is the three-piece absolutely continuous map with slope m^p in the
    transition band; G = integral of (g')^(1/p) collapses to 0 below the
    outer level, m*(t - outer) in the band, and t above the inner level.
    """
    bub = make_bubble(profile, epsilon, delta, theta)
    t_arr = np.asarray(t, dtype=np.float64)
    if np.any(t_arr < 0):
        raise ValueError("truncation maps are defined for t >= 0")
    p = profile.params.p
    lo, hi, m = bub.u_at_theta_delta, bub.u_at_delta, bub.m_eps_delta
    g = np.where(
        t_arr <= lo,
        0.0,
        np.where(t_arr <= hi, m ** p * (t_arr - lo), t_arr + hi * (m ** (p - 1.0) - 1.0)),
    )
    G = np.where(t_arr <= lo, 0.0, np.where(t_arr <= hi, m * (t_arr - lo), t_arr))
    if t_arr.ndim:
        return g, G
    return float(g), float(G)


def bubble_value(bub: BubbleProfile, r):
    """u_eps_delta(r) = G(U_eps(r)): U_eps inside delta, 0 outside theta*delta."""
    r = np.asarray(r, dtype=np.float64)
    t = rescale(bub.profile, bub.epsilon, r)
    lo, hi, m = bub.u_at_theta_delta, bub.u_at_delta, bub.m_eps_delta
    out = np.where(t <= lo, 0.0, np.where(t <= hi, m * (t - lo), t))
    return out if out.ndim else float(out)


def _interior_clearance(dom: GridDomain, center: np.ndarray) -> float:
    """Distance from the center to the boundary of the continuum region."""
    if dom.shape == "box":
        lo = np.min(center)
        hi = np.min(dom.box_length - center)
        return float(min(lo, hi))
    c0 = np.full(dom.dim, dom.box_length / 2.0)
    return float(dom.box_length / 2.0 - np.linalg.norm(center - c0))


def default_center(dom: GridDomain) -> np.ndarray:
    return np.full(dom.dim, dom.box_length / 2.0)


def bubble_field(
    dom: GridDomain,
    params: ModelParams,
    epsilon: float,
    delta: float,
    theta: float,
    center=None,
    profile: Optional[RadialProfile] = None,
) -> Field:
    """Sample the truncated bubble on the interior nodes.

    The support ball of radius theta*delta around the center must fit inside
    the interior region (touching the boundary is allowed; the profile is
    zero there anyway).
    """
    if profile is None:
        profile = model_radial_profile(params)
    center = default_center(dom) if center is None else np.asarray(center, dtype=np.float64)
    clearance = _interior_clearance(dom, center)
    if theta * delta > clearance * (1.0 + 1e-12):
        raise SupportError(
            f"support ball of radius {theta * delta:.6g} does not fit: clearance is {clearance:.6g}"
        )
    bub = make_bubble(profile, epsilon, delta, theta)
    r = np.linalg.norm(dom.interior - center, axis=1)
    return Field(bubble_value(bub, r))


# ---------------------------------------------------------------------------
# Decay diagnostics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DecayReport:
    c1_hat: float
    c2_hat: float
    halving_ok: bool
    theta_min: Optional[float]


def decay_check(profile: RadialProfile, r_grid, theta: float) -> DecayReport:
    """Fit the decay envelope U(r) r^((n-ps)/(p-1)) on r_grid (all r > 1) and
    check the halving property U(theta r) <= U(r)/2; also scan for the
    smallest theta achieving the halving over the same grid."""
    r = np.asarray(r_grid, dtype=np.float64)
    if np.any(r <= 1.0):
        raise ValueError("decay check needs radii > 1")
    params = profile.params
    decay = (params.n - params.p * params.s) / (params.p - 1.0)
    envelope = profile.u(r) * r ** decay
    c1, c2 = float(np.min(envelope)), float(np.max(envelope))
    halving_ok = bool(np.all(profile.u(theta * r) <= 0.5 * profile.u(r)))
    theta_min = None
    for cand in np.geomspace(1.01, 8.0, 400):
        if np.all(profile.u(cand * r) <= 0.5 * profile.u(r)):
            theta_min = float(cand)
            break
    return DecayReport(c1, c2, halving_ok, theta_min)


# ---------------------------------------------------------------------------
# Norm-estimate scan
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NormScanRow:
    eps: float
    seminorm_p_pow: float
    lpstar_pow: float
    excess: float
    deficit: float


@dataclass(frozen=True)
class NormScanResult:
    rows: tuple
    method: str
    sem_reference: float
    lp_reference: float
    excess_slope: Optional[float]
    deficit_slope: Optional[float]
    excess_slope_predicted: float
    deficit_slope_predicted: float
    fit_rows: int


def _loglog_slope(x: np.ndarray, residuals: np.ndarray, lead_scale: np.ndarray):
    """Least-squares slope of log residuals against log x, excluding rows with
    nonpositive residuals or residuals below 10x machine epsilon of the
    leading term."""
    keep = (residuals > 0) & (residuals > 10.0 * np.finfo(float).eps * lead_scale)
    if np.count_nonzero(keep) < 2:
        return None, int(np.count_nonzero(keep))
    slope = np.polyfit(np.log(x[keep]), np.log(residuals[keep]), 1)[0]
    return float(slope), int(np.count_nonzero(keep))


def _richardson_limit(values: np.ndarray, increasing: bool):
    """Extrapolated eps -> 0 limit of a sequence sampled on halving eps.

    Assumes value(eps) = limit +/- C eps^kappa; kappa is estimated from the
    last two consecutive differences and the geometric tail is summed.
    Returns None when the differences do not behave like a contraction.
    """
    d = np.diff(values)
    if not increasing:
        d = -d  # work with a positive decreasing difference sequence
    if d.size < 2 or np.any(d <= 0):
        return None
    ratio = d[-1] / d[-2]
    if not 0 < ratio < 1:
        return None
    tail = d[-1] * ratio / (1.0 - ratio)
    return values[-1] + tail if increasing else values[-1] - tail


def norm_estimate_scan(
    dom: GridDomain,
    params: ModelParams,
    delta: float,
    theta: float,
    eps_list: Sequence[float],
    s_ref: float,
    center=None,
    profile: Optional[RadialProfile] = None,
    method: str = "lattice",
) -> NormScanResult:
    """Seminorm and L^{p*} powers of the truncated bubble for each eps, with
    log-log least-squares fits of the excess/deficit trends.

    method="lattice" uses the grid sums with S_ref^(n/(ps)) as the reference
    level; on coarse grids the core is unresolved below eps ~ h and the
    residuals need not follow the continuum trend (slopes may come back
    None).  method="quadrature" evaluates the continuum radial integrals
    (resolved at every eps) and references them against their own
    Richardson-extrapolated eps -> 0 limits, computed from two auxiliary
    rows at half and a quarter of the smallest eps; this is the route that
    exhibits the predicted exponents (n-ps)/(p-1) and n/(p-1) at desk scale.
    """
    if len(eps_list) == 0:
        raise ValueError("eps_list must not be empty")
    for e in eps_list:
        if not 0 < e <= delta / 2.0:
            raise ValueError(f"eps = {e} violates 0 < eps <= delta/2 = {delta / 2.0}")
    if method not in ("lattice", "quadrature"):
        raise ValueError(f"unknown scan method {method!r}")
    n, p, s = params.n, params.p, params.s
    eps_sorted = sorted(eps_list, reverse=True)

    if method == "lattice":
        sems, lps = [], []
        for e in eps_sorted:
            u = bubble_field(dom, params, e, delta, theta, center=center, profile=profile)
            sems.append(seminorm_p(dom, u) ** p)
            lps.append(lr_norm(dom, u, params.p_star) ** params.p_star)
        sem_ref = lp_ref = s_ref ** (n / (p * s))
    else:
        from .radial_quad import gagliardo_pow_quad, lr_power_quad

        if profile is None:
            profile = model_radial_profile(params)
        support = theta * delta
        aux = eps_sorted + [eps_sorted[-1] / 2.0, eps_sorted[-1] / 4.0]
        sems, lps = [], []
        for e in aux:
            bub = make_bubble(profile, e, delta, theta)
            func = lambda r: bubble_value(bub, r)
            sems.append(gagliardo_pow_quad(params, func, support, e, breakpoints=(delta,)))
            lps.append(lr_power_quad(params, func, support, params.p_star, e, breakpoints=(delta,)))
        sem_ref = _richardson_limit(np.array(sems), increasing=False)
        lp_ref = _richardson_limit(np.array(lps), increasing=True)
        if sem_ref is None or lp_ref is None:
            raise ValueError(
                "Richardson reference failed: scan differences are not contracting; "
                "use more or smaller eps values"
            )
        sems, lps = sems[: len(eps_sorted)], lps[: len(eps_sorted)]

    rows = tuple(
        NormScanRow(e, sem, lp, sem - sem_ref, lp_ref - lp)
        for e, sem, lp in zip(eps_sorted, sems, lps)
    )
    x = np.array(eps_sorted) / delta
    ex_slope, n_ex = _loglog_slope(x, np.array([r.excess for r in rows]), np.array(sems))
    de_slope, n_de = _loglog_slope(x, np.array([r.deficit for r in rows]), np.array(lps))
    return NormScanResult(
        rows=rows,
        method=method,
        sem_reference=sem_ref,
        lp_reference=lp_ref,
        excess_slope=ex_slope,
        deficit_slope=de_slope,
        excess_slope_predicted=(n - p * s) / (p - 1.0),
        deficit_slope_predicted=n / (p - 1.0),
        fit_rows=min(n_ex, n_de),
    )


# ---------------------------------------------------------------------------
# Sup-energy scan
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SupScanRow:
    eps: float
    t_star: float
    t_grid_argmax: float
    h_at_tstar: float
    h_expanded: Optional[float]
    sup_full: float
    q_integral: float
    q_regime: str
    c_infty: float
    below_c_infty: bool


def _golden_max(f, lo: float, hi: float, rtol: float = 1e-10) -> float:
    """Golden-section maximizer on [lo, hi] for a unimodal function."""
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > rtol * (abs(a) + abs(b)) / 2.0:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def q_regime_label(params: ModelParams) -> str:
    """Scaling regime of the concave mass of the bubble core, by q against
    the threshold n(p-1)/(n-ps)."""
    n, p, q, s = params.n, params.p, params.q, params.s
    threshold = n * (p - 1.0) / (n - p * s)
    if abs(q - threshold) <= 1e-12 * max(1.0, threshold):
        expo = n - q * (n - p * s) / p
        return f"critical-q branch eps^{expo:.6g}*|log eps|"
    if q > threshold:
        expo = n - q * (n - p * s) / p
        return f"supercritical-q branch eps^{expo:.6g}"
    expo = (n - p * s) * q / (p * (p - 1.0))
    return f"subcritical-q branch eps^{expo:.6g}"


def sup_energy_scan(
    dom: GridDomain,
    params: ModelParams,
    delta: float,
    theta: float,
    eps_list: Sequence[float],
    lam: float,
    mu: float,
    s_d: float,
    s_ab_d: float,
    center=None,
    profile: Optional[RadialProfile] = None,
):
    """Ray-energy maxima of the weighted bubble pair (a^(1/p) u, b^(1/p) u).

    Per eps: the closed-form maximizer t_star of the coupling-only part and a
    grid-search cross check, the full ray supremum including the concave
    term, the core concave mass with its q-regime label, and the comparison
    against c_infty (computed from the supplied discrete constants).
    """
    from .constants import c0 as c0_fun
    from .constants import c_infty as c_infty_fun
    from .constants import ratio_predicted

    if len(eps_list) == 0:
        raise ValueError("eps_list must not be empty")
    for e in eps_list:
        if not 0 < e <= delta / 2.0:
            raise ValueError(f"eps = {e} violates 0 < eps <= delta/2 = {delta / 2.0}")
    if lam < 0 or mu < 0:
        raise ValueError("lam and mu must be nonnegative")

    p, q = params.p, params.q
    a, b = params.alpha, params.beta
    ab = params.ab
    n, s = params.n, params.s
    cell = dom.h ** dom.dim
    center_arr = default_center(dom) if center is None else np.asarray(center, dtype=np.float64)
    c0_value = c0_fun(params, s_d, dom.volume)
    c_inf = c_infty_fun(params, s_ab_d, c0_value, lam, mu)
    label = q_regime_label(params)

    rows = []
    for e in sorted(eps_list, reverse=True):
        u = bubble_field(dom, params, e, delta, theta, center=center_arr, profile=profile)
        uv = u.values
        sem_pow = seminorm_p(dom, u) ** p
        P0 = ab * sem_pow  # ||(a^(1/p) u, b^(1/p) u)||^p = (a + b) [u]^p
        coupling0 = cell * float(np.sum(np.abs(uv) ** ab)) * a ** (a / p) * b ** (b / p)
        D0 = 2.0 * coupling0
        B0 = lam * a ** (q / p) + mu * b ** (q / p)
        B0 *= cell * float(np.sum(np.abs(uv) ** q))
        triple = ReducedTriple(P0, B0, D0)

        t_star = (P0 / D0) ** (1.0 / (ab - p))
        h_at_tstar = (1.0 / p - 1.0 / ab) * P0 ** (ab / (ab - p)) / D0 ** (p / (ab - p))

        def h_of_t(t):
            return (t ** p / p) * P0 - (t ** ab / ab) * D0

        coarse = np.geomspace(t_star / 8.0, 8.0 * t_star, 241)
        k = int(np.argmax(h_of_t(coarse)))
        lo = coarse[max(k - 1, 0)]
        hi = coarse[min(k + 1, coarse.size - 1)]
        t_grid = _golden_max(h_of_t, lo, hi, rtol=1e-11)

        h_expanded = None
        if params.critical:
            lp_pow = cell * float(np.sum(np.abs(uv) ** params.p_star))
            quotient = sem_pow / lp_pow ** (p / params.p_star)
            h_expanded = (
                (s / n)
                * 2.0 ** (-(n - p * s) / (p * s))
                * ratio_predicted(params) ** (n / (p * s))
                * quotient ** (n / (p * s))
            )

        # sup over t >= 0 includes phi(0) = 0; with two roots the ray maximum
        # sits at the upper one, above the threshold phi is nonincreasing
        if B0 > 0:
            rep = project_triple(triple, params)
            sup_full = 0.0 if rep.outcome == ABOVE_THRESHOLD else max(phi(triple, params, rep.t2), 0.0)
        else:
            sup_full = h_at_tstar

        core = np.linalg.norm(dom.interior - center_arr, axis=1) <= delta
        q_integral = cell * float(np.sum(np.abs(uv[core]) ** q))

        rows.append(
            SupScanRow(
                eps=e,
                t_star=t_star,
                t_grid_argmax=t_grid,
                h_at_tstar=h_at_tstar,
                h_expanded=h_expanded,
                sup_full=sup_full,
                q_integral=q_integral,
                q_regime=label,
                c_infty=c_inf,
                below_c_infty=bool(sup_full < c_inf),
            )
        )
    return rows
