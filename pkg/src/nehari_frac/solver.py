"""Branch minimization, the scalar sublinear problem, and run diagnostics.

The two solutions are found by projected descent: a full-gradient step in the
product space followed by re-projection onto the requested fibering root
(lower root for the minimum branch, upper root for the maximum branch).
Because the Nehari constraint annihilates the state itself, re-projection is
first-order neutral and plain Armijo acceptance applies.  All energies are
labeled best-found: multi-start descent certifies local minimality plus
restart evidence, not global optimality.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .bubbles import bubble_field
from .constants import bump_field, c0, c_infty, d0_bound
from .energy import constraint_gradient_arrays, gradient_arrays
from .errors import BranchLostError, ConvergenceError
from .fibering import (
    MINUS_ONLY,
    NMINUS,
    NPLUS,
    PLUS_ONLY,
    TWO_ROOTS,
    ReducedTriple,
    classify,
    project_triple,
)
from .grid import Field, FieldPair, GridDomain, as_values, lr_norm, plap_gradient, seminorm_p, signed_pow
from .params import ModelParams


@dataclass(frozen=True)
class SolveOptions:
    max_iter: int = 4000
    grad_rtol: float = 1e-9          # stop when |grad| falls this far below its initial size
    energy_rtol: float = 1e-13       # accepted-step relative decrease considered flat
    flat_patience: int = 8
    armijo: float = 1e-4
    backtrack: float = 0.5
    step0: float = 1.0
    n_starts: int = 4
    seed: int = 0
    bubble_delta_frac: float = 0.25  # delta as a fraction of the box length
    bubble_eps_frac: float = 0.25    # eps as a fraction of delta
    theta: float = 2.0
    distinct_tol: float = 1e-6
    semitrivial_tol: float = 1e-8
    scalar_max_iter: int = 20000
    scalar_newton: bool = True


@dataclass
class SolutionReport:
    branch: str
    energy: float
    residual: float                  # tangential (constrained) gradient norm
    grad_norm: float                 # full gradient norm
    iterations: int
    converged: bool
    semitrivial: bool
    classification: str
    iterate_norm_max: float          # boundedness certificate for the iterates
    energy_min_trace: float          # coercivity certificate: min J along iterates
    pair: FieldPair
    seed_index: int = 0
    checks: dict = field(default_factory=dict)

    def field_hash(self) -> str:
        blob = self.pair.u.values.tobytes() + self.pair.v.values.tobytes()
        return hashlib.sha256(blob).hexdigest()

    def to_dict(self) -> dict:
        return {
            "branch": self.branch,
            "energy": self.energy,
            "residual": self.residual,
            "grad_norm": self.grad_norm,
            "iterations": self.iterations,
            "converged": self.converged,
            "semitrivial": self.semitrivial,
            "classification": self.classification,
            "iterate_norm_max": self.iterate_norm_max,
            "energy_min_trace": self.energy_min_trace,
            "seed_index": self.seed_index,
            "field_hash": self.field_hash(),
            "checks": dict(self.checks),
        }


def _triple_of(params: ModelParams, dom: GridDomain, u: np.ndarray, v: np.ndarray) -> ReducedTriple:
    P = seminorm_p(dom, u) ** params.p + seminorm_p(dom, v) ** params.p
    cell = dom.h ** dom.dim
    au = np.abs(u)
    av = np.abs(v)
    B = cell * float(np.sum(params.lam * au ** params.q + params.mu * av ** params.q))
    D = 2.0 * cell * float(np.sum(au ** params.alpha * av ** params.beta))
    return ReducedTriple(P, B, D)


def _branch_root(triple: ReducedTriple, params: ModelParams, branch: str) -> Optional[float]:
    if triple.P == 0.0:
        return None
    rep = project_triple(triple, params)
    if branch == NPLUS:
        return rep.t1 if rep.outcome in (TWO_ROOTS, PLUS_ONLY) else None
    return rep.t2 if rep.outcome in (TWO_ROOTS, MINUS_ONLY) else None


def _ray_energy(triple: ReducedTriple, params: ModelParams) -> float:
    return (
        triple.P / params.p - triple.B / params.q - triple.D / params.ab
    )


def minimize_on_branch(
    params: ModelParams,
    dom: GridDomain,
    branch: str,
    init: FieldPair,
    opts: SolveOptions = SolveOptions(),
    seed_index: int = 0,
) -> SolutionReport:
    """Projected descent of J restricted to one Nehari branch.

    Steps that lose the requested root are rejected by the backtracking line
    search; the run only aborts when the starting state itself cannot be
    projected.  Accepted energies are nonincreasing by construction.
    """
    if branch not in (NPLUS, NMINUS):
        raise ValueError(f"unknown branch {branch!r}")
    if params.lam <= 0 or params.mu <= 0:
        raise ValueError("parameters must be positive")

    u = as_values(init.u).copy()
    v = as_values(init.v).copy()
    triple = _triple_of(params, dom, u, v)
    t = _branch_root(triple, params, branch)
    if t is None:
        raise BranchLostError(
            "left the two-root regime: the requested root does not exist at the "
            "starting state; use smaller lambda and mu"
        )
    u *= t
    v *= t
    triple = ReducedTriple(triple.P * t ** params.p, triple.B * t ** params.q, triple.D * t ** params.ab)
    J = _ray_energy(triple, params)

    step = opts.step0
    norm_max = triple.P ** (1.0 / params.p)
    energy_min = J
    grad_scale = None
    res = grad_norm = np.inf
    flat = 0
    converged = False
    it = 0
    for it in range(1, opts.max_iter + 1):
        gu, gv = gradient_arrays(params, dom, u, v)
        qu, qv = constraint_gradient_arrays(params, dom, u, v)
        gdotq = float(np.dot(gu, qu) + np.dot(gv, qv))
        qn2 = float(np.dot(qu, qu) + np.dot(qv, qv))
        coef = gdotq / qn2 if qn2 > 0 else 0.0
        ru = gu - coef * qu
        rv = gv - coef * qv
        res = float(np.sqrt(np.dot(ru, ru) + np.dot(rv, rv)))
        gn2 = float(np.dot(gu, gu) + np.dot(gv, gv))
        grad_norm = float(np.sqrt(gn2))
        if grad_scale is None:
            grad_scale = max(grad_norm, 1e-300)
        if grad_norm <= opts.grad_rtol * grad_scale:
            converged = True
            break

        s = step
        accepted = False
        for _ in range(60):
            wu = u - s * gu
            wv = v - s * gv
            trial = _triple_of(params, dom, wu, wv)
            tb = _branch_root(trial, params, branch) if trial.P > 0 else None
            if tb is not None:
                scaled = ReducedTriple(
                    trial.P * tb ** params.p, trial.B * tb ** params.q, trial.D * tb ** params.ab
                )
                Jc = _ray_energy(scaled, params)
                if Jc <= J - opts.armijo * s * gn2:
                    u, v = tb * wu, tb * wv
                    drop = (J - Jc) / max(abs(J), 1e-300)
                    J, triple = Jc, scaled
                    accepted = True
                    break
            s *= opts.backtrack
        if not accepted:
            converged = True  # line search exhausted: first-order flat
            break
        step = min(s * 2.0, 1e12)
        norm_max = max(norm_max, triple.P ** (1.0 / params.p))
        energy_min = min(energy_min, J)
        if drop <= opts.energy_rtol:
            flat += 1
            if flat >= opts.flat_patience:
                converged = True
                break
        else:
            flat = 0

    pair = FieldPair(Field(u), Field(v))
    lq_u = lr_norm(dom, u, params.q)
    lq_v = lr_norm(dom, v, params.q)
    semitrivial = min(lq_u, lq_v) <= opts.semitrivial_tol * (lq_u + lq_v)
    return SolutionReport(
        branch=branch,
        energy=J,
        residual=res,
        grad_norm=grad_norm,
        iterations=it,
        converged=converged,
        semitrivial=semitrivial,
        classification=classify(params, dom, pair),
        iterate_norm_max=norm_max,
        energy_min_trace=energy_min,
        pair=pair,
        seed_index=seed_index,
    )


def _random_positive_pair(dom: GridDomain, rng) -> FieldPair:
    u = np.abs(rng.standard_normal(dom.n_interior)) + 1e-3
    v = np.abs(rng.standard_normal(dom.n_interior)) + 1e-3
    return FieldPair(Field(u), Field(v))


def _starts_for_branch(params: ModelParams, dom: GridDomain, branch: str, opts: SolveOptions,
                       extra=None):
    """Deterministic list of starting pairs.

    The maximum branch leads with the weighted bubble pair and, when
    available, the coupled-quotient minimizer (the natural candidate for the
    second solution); both branches include the smooth bump and seeded random
    positive pairs."""
    starts = []
    bump = bump_field(dom)
    if branch == NMINUS:
        if extra is not None:
            starts.append(extra)
        delta = opts.bubble_delta_frac * dom.box_length
        eps = opts.bubble_eps_frac * delta
        try:
            ub = bubble_field(dom, params, eps, delta, opts.theta).values
            starts.append(
                FieldPair(
                    Field(params.alpha ** (1.0 / params.p) * ub),
                    Field(params.beta ** (1.0 / params.p) * ub),
                )
            )
        except Exception:
            pass  # bubble support may not fit exotic grids; random starts remain
    starts.append(FieldPair(Field(bump.copy()), Field(bump.copy())))
    seq = np.random.SeedSequence(opts.seed, spawn_key=(0 if branch == NPLUS else 1,))
    for child in seq.spawn(max(opts.n_starts - 1, 0)):
        starts.append(_random_positive_pair(dom, np.random.default_rng(child)))
    return starts


def pair_distance(dom: GridDomain, a: FieldPair, b: FieldPair, r: Optional[float] = None) -> float:
    """Relative lattice L^p distance between pairs normalized to unit product norm."""
    p = dom.p if r is None else r
    na = (seminorm_p(dom, a.u) ** dom.p + seminorm_p(dom, a.v) ** dom.p) ** (1.0 / dom.p)
    nb = (seminorm_p(dom, b.u) ** dom.p + seminorm_p(dom, b.v) ** dom.p) ** (1.0 / dom.p)
    if na == 0.0 or nb == 0.0:
        return float(na != nb)
    du = as_values(a.u) / na - as_values(b.u) / nb
    dv = as_values(a.v) / na - as_values(b.v) / nb
    cell = dom.h ** dom.dim
    return float(cell * np.sum(np.abs(du) ** p + np.abs(dv) ** p)) ** (1.0 / p)


def solve_two(
    params: ModelParams,
    dom: GridDomain,
    opts: SolveOptions = SolveOptions(),
    s_d: Optional[float] = None,
    s_ab_d: Optional[float] = None,
    s_ab_minimizer: Optional[FieldPair] = None,
):
    """Minimize on both branches from multiple starts and cross-check the pair.

    Returns (minimum-branch report, maximum-branch report) with the checks
    map filled: energy signs, distinctness, semitriviality, the energy floor,
    and the d0 / c_infty comparisons when discrete constants are supplied.
    Passing the coupled-quotient minimizer adds it to the maximum-branch
    starts.
    """
    if params.lam <= 0 or params.mu <= 0:
        raise ValueError("parameters must be positive")

    best = {}
    for branch in (NPLUS, NMINUS):
        reports = []
        for idx, start in enumerate(_starts_for_branch(params, dom, branch, opts, extra=s_ab_minimizer)):
            try:
                reports.append(minimize_on_branch(params, dom, branch, start, opts, seed_index=idx))
            except BranchLostError:
                continue
        if not reports:
            raise BranchLostError(
                f"no starting state on branch {branch} could be projected; "
                "use smaller lambda and mu"
            )
        reports.sort(key=lambda r: (r.energy, r.seed_index))
        best[branch] = reports[0]

    plus, minus = best[NPLUS], best[NMINUS]
    p, q = params.p, params.q
    sigma = params.lam ** (p / (p - q)) + params.mu ** (p / (p - q))
    dist = pair_distance(dom, plus.pair, minus.pair)
    checks = {
        "energy_plus_negative": plus.energy < 0,
        "energy_minus_positive": minus.energy > 0,
        "distinct": dist > opts.distinct_tol and plus.field_hash() != minus.field_hash(),
        "pair_distance": dist,
        "non_semitrivial_plus": not plus.semitrivial,
        "non_semitrivial_minus": not minus.semitrivial,
        "classified_plus": plus.classification == NPLUS,
        "classified_minus": minus.classification == NMINUS,
    }
    if s_d is not None:
        floor = -c0(params, s_d, dom.volume) * sigma
        checks["energy_floor"] = floor
        checks["floor_plus_ok"] = plus.energy >= floor
        checks["floor_minus_ok"] = minus.energy >= floor
        d0 = d0_bound(params, s_d, dom.volume, params.lam, params.mu)
        checks["d0_bound"] = d0.value
        checks["d0_smallness_ok"] = d0.smallness_ok
        checks["d0_le_minus"] = d0.value <= minus.energy
        if s_ab_d is not None:
            c_inf = c_infty(params, s_ab_d, c0(params, s_d, dom.volume), params.lam, params.mu)
            checks["c_infty"] = c_inf
            checks["minus_below_c_infty"] = minus.energy < c_inf
    plus.checks = checks
    minus.checks = checks
    return plus, minus


# ---------------------------------------------------------------------------
# Scalar sublinear problem
# ---------------------------------------------------------------------------

def _scalar_energy_grad(params: ModelParams, dom: GridDomain, lam: float, u: np.ndarray):
    cell = dom.h ** dom.dim
    val = seminorm_p(dom, u) ** params.p / params.p - (lam / params.q) * cell * float(
        np.sum(np.abs(u) ** params.q)
    )
    g = plap_gradient(dom, u) - lam * cell * signed_pow(u, params.q - 1.0)
    return val, g


def _scalar_hessian(params: ModelParams, dom: GridDomain, lam: float, u: np.ndarray) -> np.ndarray:
    """Dense second variation; valid for p >= 2 and states without zeros."""
    p, q = params.p, params.q
    n = dom.n_interior
    du = u[dom.pair_i] - u[dom.pair_j]
    wse = (p - 1.0) * dom.pair_w * np.abs(du) ** (p - 2.0)
    H = np.zeros((n, n))
    np.add.at(H, (dom.pair_i, dom.pair_i), wse)
    np.add.at(H, (dom.pair_j, dom.pair_j), wse)
    np.add.at(H, (dom.pair_i, dom.pair_j), -wse)
    np.add.at(H, (dom.pair_j, dom.pair_i), -wse)
    H[np.diag_indices(n)] += (p - 1.0) * dom.collar_w * np.abs(u) ** (p - 2.0)
    cell = dom.h ** dom.dim
    H[np.diag_indices(n)] -= lam * cell * (q - 1.0) * np.abs(u) ** (q - 2.0)
    return H


def solve_scalar_sublinear(params: ModelParams, dom: GridDomain, lam: float, opts: SolveOptions = SolveOptions()):
    """Minimize (1/p)[u]^p - (lam/q) sum|u|^q; returns (Field, energy).

    Descent starts from the smooth bump at its exact ray minimum and is
    polished with damped Newton steps for p >= 2, so the stationarity
    identity [u]^p = lam sum|u|^q holds to near machine precision.
    """
    if lam <= 0:
        raise ValueError("the scalar sublinear problem needs lam > 0")
    p, q = params.p, params.q
    cell = dom.h ** dom.dim

    w0 = bump_field(dom)
    qint = cell * float(np.sum(np.abs(w0) ** q))
    ray = (lam * qint / seminorm_p(dom, w0) ** p) ** (1.0 / (p - q))
    u = ray * w0

    val, g = _scalar_energy_grad(params, dom, lam, u)
    scale0 = max(float(np.linalg.norm(g)), lam * cell * float(np.sum(np.abs(u) ** (q - 1.0))), 1e-300)
    newton_available = opts.scalar_newton and p >= 2 and dom.n_interior <= 6000
    bb_tol = 1e-6 * scale0 if newton_available else 1e-12 * scale0
    bb_budget = 3000 if newton_available else opts.scalar_max_iter
    step = 1.0
    u_prev = g_prev = None
    for it in range(bb_budget):
        gn = float(np.linalg.norm(g))
        if gn <= bb_tol:
            break
        if u_prev is not None:
            dx = u - u_prev
            dg = g - g_prev
            denom = float(np.dot(dx, dg))
            if denom > 0:
                step = float(np.dot(dx, dx)) / denom
            step = min(max(step, 1e-16), 1e16)
        s = step
        accepted = False
        for _ in range(60):
            trial = u - s * g
            tval, tg = _scalar_energy_grad(params, dom, lam, trial)
            if tval <= val:
                u_prev, g_prev = u, g
                u, val, g = trial, tval, tg
                accepted = True
                break
            s *= 0.5
        if not accepted:
            break

    if newton_available and np.all(u != 0.0):
        for _ in range(60):
            gn = float(np.linalg.norm(g))
            if gn <= 1e-15 * scale0:
                break
            H = _scalar_hessian(params, dom, lam, u)
            try:
                d = np.linalg.solve(H, -g)
            except np.linalg.LinAlgError:
                break
            improved = False
            s = 1.0
            for _ in range(40):
                trial = u + s * d
                if np.all(trial != 0.0):
                    tval, tg = _scalar_energy_grad(params, dom, lam, trial)
                    if tval < val or (tval == val and float(np.linalg.norm(tg)) < gn):
                        u, val, g = trial, tval, tg
                        improved = True
                        break
                s *= 0.5
            if not improved:
                break

    gn = float(np.linalg.norm(g))
    if gn > 1e-6 * scale0:
        raise ConvergenceError(
            f"scalar sublinear solve stalled with relative gradient {gn / scale0:.3e}",
            last_iterate=Field(u),
        )
    return Field(u), val


def semitrivial_tmax_check(
    params: ModelParams,
    dom: GridDomain,
    u1,
    w,
    stationarity_rtol: float = 1e-6,
) -> float:
    """Deviation of t_max(u1, w) from ((a+b-q)/(a+b-p))^(1/(p-q)).

    Assumes u1 is stationary for the scalar problem with weight lam and w
    with weight mu, so each component's norm power equals its own weighted
    q-integral and the fibering formula collapses to the closed form (> 1).
    """
    if params.lam <= 0 or params.mu <= 0:
        raise ValueError("semitrivial check needs lam > 0 and mu > 0")
    p, q = params.p, params.q
    ab = params.ab
    cell = dom.h ** dom.dim
    u1 = as_values(u1)
    w = as_values(w)
    pu = seminorm_p(dom, u1) ** p
    pw = seminorm_p(dom, w) ** p
    qu = params.lam * cell * float(np.sum(np.abs(u1) ** q))
    qw = params.mu * cell * float(np.sum(np.abs(w) ** q))
    r1 = abs(pu - qu) / pu
    r2 = abs(pw - qw) / pw
    if max(r1, r2) > stationarity_rtol:
        raise ConvergenceError(
            f"inputs are not stationary enough (relative residuals {r1:.3e}, {r2:.3e})"
        )
    t_max = ((ab - q) * (qu + qw) / ((ab - p) * (pu + pw))) ** (1.0 / (p - q))
    predicted = ((ab - q) / (ab - p)) ** (1.0 / (p - q))
    return abs(t_max - predicted) / predicted
