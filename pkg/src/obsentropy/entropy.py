"""Entropy and relative-entropy functionals.

Everything is computed in nats; ``to_bits`` converts at presentation time.
Observational entropy of a POVM M = {M_i} on a state rho is

    S_M(rho) = -sum_i p_i log(p_i / V_i),   p_i = tr(M_i rho), V_i = tr(M_i),

which splits into an observed Shannon part H(p) and a mean Boltzmann part
sum_i p_i log V_i.  Relative entropies return float('inf') on support
violations instead of raising: infinity is a legitimate value here and the
bound certificates downstream know how to compare infinities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import qmat
from .qmat import SUPPORT_TOL, Povm

LN2 = math.log(2.0)


def to_bits(x: float) -> float:
    """Convert an entropy value from nats to bits (infinity passes through)."""
    return x / LN2


def shannon(p) -> float:
    """H(p) = -sum p_i log p_i with 0 log 0 = 0."""
    v = qmat.probability_vector(p)
    nz = v[v > 0.0]
    return float(-(nz * np.log(nz)).sum())


def binary_h(x: float) -> float:
    """h(x) = -x log x - (1-x) log(1-x) on [0, 1]."""
    if x < -1e-12 or x > 1.0 + 1e-12:
        raise ValueError(f"binary_h argument {x!r} outside [0, 1]")
    x = min(max(x, 0.0), 1.0)
    if x == 0.0 or x == 1.0:
        return 0.0
    return float(-x * math.log(x) - (1.0 - x) * math.log(1.0 - x))


def g_func(x: float) -> float:
    """g(x) = -x log x + (1+x) log(1+x); the modulus appearing in the sharpened bounds.

    Equals (1+x) h(x/(1+x)).  Continuous, increasing and concave on x >= 0,
    with g(0) = 0 and g(x) >= h(x) on [0, 1].
    """
    if x < -1e-12:
        raise ValueError(f"g_func argument {x!r} is negative")
    x = max(x, 0.0)
    if x == 0.0:
        return 0.0
    return float(-x * math.log(x) + (1.0 + x) * math.log1p(x))


def von_neumann(rho) -> float:
    """S(rho) = -tr(rho log rho), the Shannon entropy of the spectrum."""
    w = np.linalg.eigvalsh(qmat.density(rho))
    w = np.clip(w, 0.0, None)
    nz = w[w > 0.0]
    return float(-(nz * np.log(nz)).sum())


@dataclass(frozen=True)
class OeBreakdown:
    """Observational entropy split into its observed-Shannon and Boltzmann parts."""

    total: float
    shannon_term: float
    boltzmann_term: float
    probs: np.ndarray
    volumes: np.ndarray

    def to_json(self) -> dict:
        return {
            "total": self.total,
            "shannon_term": self.shannon_term,
            "boltzmann_term": self.boltzmann_term,
            "probs": [float(x) for x in self.probs],
            "volumes": [float(x) for x in self.volumes],
        }


def outcome_probabilities(m: Povm, rho) -> np.ndarray:
    """Raw outcome probabilities tr(M_i rho), clipped into [0, 1] (unvalidated array)."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (m.dim, m.dim):
        raise ValueError(f"state dimension {rho.shape} does not match POVM dimension {m.dim}")
    p = np.einsum("kij,ji->k", m.elements, rho).real
    return np.clip(p, 0.0, 1.0)


def observational_entropy(m: Povm, rho) -> OeBreakdown:
    """S_M(rho) with its Shannon/Boltzmann decomposition.

    Outcomes with p_i = 0 contribute 0 to every term.  A zero-volume element
    (tr M_i ~ 0) is fine as long as it is never triggered; probability mass on
    it would make the Boltzmann term ill-defined and raises.
    """
    p = outcome_probabilities(m, qmat.density(rho))
    v = m.volumes
    live = p > 1e-12
    if np.any(live & (v <= 1e-12)):
        raise ValueError("probability mass on a zero-volume POVM element")
    ps, vs = p[live], v[live]
    sh = float(-(ps * np.log(ps)).sum())
    bz = float((ps * np.log(vs)).sum())
    return OeBreakdown(
        total=sh + bz,
        shannon_term=sh,
        boltzmann_term=bz,
        probs=qmat.probability_vector(p),
        volumes=qmat._freeze(v.copy()),
    )


def relative_entropy_classical(p, q) -> float:
    """D(p||q) = sum p_i log(p_i/q_i); q may be unnormalized (entries >= 0).

    Returns float('inf') iff some p_i > 0 sits on q_i = 0.
    """
    pv = qmat.probability_vector(p)
    qv = np.asarray(q, dtype=float).ravel()
    if qv.shape != pv.shape:
        raise ValueError(f"length mismatch: p has {pv.size}, q has {qv.size}")
    if qv.min() < -1e-12:
        raise ValueError(f"negative reference weight {qv.min():.3e}")
    qv = np.clip(qv, 0.0, None)
    sup = pv > 0.0
    if np.any(qv[sup] == 0.0):
        return math.inf
    return float((pv[sup] * np.log(pv[sup] / qv[sup])).sum())


def relative_entropy_quantum(rho, sigma) -> float:
    """D(rho||sigma) = tr rho(log rho - log sigma) with the support convention.

    sigma may be any PSD matrix (not necessarily normalized); the value is
    float('inf') iff the support of rho leaks out of the support of sigma,
    detected by an eigenvalue threshold of SUPPORT_TOL on sigma compressed
    to supp(rho).
    """
    rho = qmat.density(rho)
    sigma = qmat.hermitize(sigma)
    if sigma.shape != rho.shape:
        raise ValueError(f"dimension mismatch: {rho.shape} vs {sigma.shape}")
    wr, vr = np.linalg.eigh(rho)
    sup = wr > SUPPORT_TOL
    basis = vr[:, sup]  # columns spanning supp(rho)
    comp = basis.conj().T @ sigma @ basis
    if np.linalg.eigvalsh(qmat.hermitize(comp)).min() <= SUPPORT_TOL:
        return math.inf
    wrs = wr[sup]
    tr_rho_log_rho = float((wrs * np.log(wrs)).sum())
    log_sigma = qmat.matrix_log(sigma, support_only=True)
    tr_rho_log_sigma = float(np.einsum("ij,ji->", rho, log_sigma).real)
    return tr_rho_log_rho - tr_rho_log_sigma


def measured_relative_entropy(m: Povm, rho, sigma) -> float:
    """D_M(rho||sigma): classical relative entropy of the two outcome distributions."""
    rho = qmat.density(rho)
    sigma = qmat.density(sigma)
    p = outcome_probabilities(m, rho)
    q = outcome_probabilities(m, sigma)
    return relative_entropy_classical(qmat.probability_vector(p), q)
