"""The functional J, its first variation, gradient assembly and the Nehari constraint.

J(u, v) = (1/p)||(u,v)||^p - (1/q) sum(lam |u|^q + mu |v|^q)
          - (2/(alpha+beta)) sum |u|^alpha |v|^beta,

with lattice sums weighted by h^n.  The first variation is assembled once per
state as a pair of gradient vectors; pairing a test state is then a plain dot
product, so the k-th gradient entry IS the variation against the k-th
canonical basis pair, bit for bit.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Field, FieldPair, GridDomain, as_values, plap_gradient, seminorm_p, signed_pow
from .params import ModelParams


@dataclass(frozen=True)
class EnergyBreakdown:
    """The three terms of J and their signed total."""

    gradient_term: float
    concave_term: float
    coupling_term: float
    total: float

    def to_dict(self) -> dict:
        return {
            "gradient_term": self.gradient_term,
            "concave_term": self.concave_term,
            "coupling_term": self.coupling_term,
            "total": self.total,
        }


def _integrals(params: ModelParams, dom: GridDomain, u: np.ndarray, v: np.ndarray):
    """Lattice integrals: concave sum(lam|u|^q + mu|v|^q) and coupling sum|u|^a |v|^b."""
    cell = dom.h ** dom.dim
    au = np.abs(u)
    av = np.abs(v)
    concave = cell * float(np.sum(params.lam * au ** params.q + params.mu * av ** params.q))
    coupling = cell * float(np.sum(au ** params.alpha * av ** params.beta))
    return concave, coupling


def energy(params: ModelParams, dom: GridDomain, pair: FieldPair) -> EnergyBreakdown:
    """Evaluate J with its three named terms."""
    u = as_values(pair.u)
    v = as_values(pair.v)
    grad = (seminorm_p(dom, u) ** params.p + seminorm_p(dom, v) ** params.p) / params.p
    concave, coupling = _integrals(params, dom, u, v)
    concave /= params.q
    coupling *= 2.0 / params.ab
    return EnergyBreakdown(grad, concave, coupling, grad - concave - coupling)


def gradient_arrays(params: ModelParams, dom: GridDomain, u: np.ndarray, v: np.ndarray):
    """(dJ/du, dJ/dv) on raw value arrays."""
    cell = dom.h ** dom.dim
    ab = params.ab
    au = np.abs(u)
    av = np.abs(v)
    gu = plap_gradient(dom, u)
    gu -= cell * params.lam * signed_pow(u, params.q - 1.0)
    gu -= cell * (2.0 * params.alpha / ab) * signed_pow(u, params.alpha - 1.0) * av ** params.beta
    gv = plap_gradient(dom, v)
    gv -= cell * params.mu * signed_pow(v, params.q - 1.0)
    gv -= cell * (2.0 * params.beta / ab) * au ** params.alpha * signed_pow(v, params.beta - 1.0)
    return gu, gv


def constraint_gradient_arrays(params: ModelParams, dom: GridDomain, u: np.ndarray, v: np.ndarray):
    """Gradient of the Nehari constraint Q on raw value arrays."""
    cell = dom.h ** dom.dim
    au = np.abs(u)
    av = np.abs(v)
    qu = params.p * plap_gradient(dom, u)
    qu -= cell * params.q * params.lam * signed_pow(u, params.q - 1.0)
    qu -= cell * 2.0 * params.alpha * signed_pow(u, params.alpha - 1.0) * av ** params.beta
    qv = params.p * plap_gradient(dom, v)
    qv -= cell * params.q * params.mu * signed_pow(v, params.q - 1.0)
    qv -= cell * 2.0 * params.beta * au ** params.alpha * signed_pow(v, params.beta - 1.0)
    return qu, qv


def gradient_pair(params: ModelParams, dom: GridDomain, pair: FieldPair):
    """Gradient vectors (dJ/du, dJ/dv); entry k equals the first variation
    against the k-th canonical basis pair."""
    return gradient_arrays(params, dom, as_values(pair.u), as_values(pair.v))


def gradient_vector(params: ModelParams, dom: GridDomain, pair: FieldPair) -> FieldPair:
    gu, gv = gradient_pair(params, dom, pair)
    return FieldPair(Field(gu), Field(gv))


def first_variation(params: ModelParams, dom: GridDomain, pair: FieldPair, test: FieldPair) -> float:
    """<J'(u, v), (phi, psi)>."""
    gu, gv = gradient_pair(params, dom, pair)
    return float(np.dot(gu, as_values(test.u)) + np.dot(gv, as_values(test.v)))


def nehari_constraint(params: ModelParams, dom: GridDomain, pair: FieldPair) -> float:
    """||(u,v)||^p - sum(lam|u|^q + mu|v|^q) - 2 sum|u|^a|v|^b.

    Zero exactly on the discrete Nehari manifold (the zero pair is excluded
    from membership although the value vanishes there too).
    """
    u = as_values(pair.u)
    v = as_values(pair.v)
    norm_p = seminorm_p(dom, u) ** params.p + seminorm_p(dom, v) ** params.p
    concave, coupling = _integrals(params, dom, u, v)
    return norm_p - concave - 2.0 * coupling


def manifold_energy_identity(params: ModelParams, dom: GridDomain, pair: FieldPair) -> float:
    """J rewritten for on-manifold states:
    ((1/p)-(1/(a+b))) ||(u,v)||^p - ((1/q)-(1/(a+b))) sum(lam|u|^q + mu|v|^q)."""
    u = as_values(pair.u)
    v = as_values(pair.v)
    norm_p = seminorm_p(dom, u) ** params.p + seminorm_p(dom, v) ** params.p
    concave, _ = _integrals(params, dom, u, v)
    ab = params.ab
    return (1.0 / params.p - 1.0 / ab) * norm_p - (1.0 / params.q - 1.0 / ab) * concave
