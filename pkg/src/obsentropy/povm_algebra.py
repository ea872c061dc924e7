"""Structural operations on POVMs and the classical-quantum states they induce.

A POVM is handled as a list of elements, never a set: the refinement
pathology needs duplicate elements, and stochastic postprocessing needs
stable outcome ordering.  Labels propagate through the constructions
("k:i" for disjoint unions, "i:a"/"i:b" for splits) so combined outcome
sets stay traceable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import entropy, qmat
from .qmat import Povm


def measure_distribution(m: Povm, rho) -> np.ndarray:
    """Outcome distribution p_i = tr(M_i rho) of measuring rho with M."""
    p = entropy.outcome_probabilities(m, qmat.density(rho))
    return qmat.probability_vector(p)


def convex_combine(ms, lam) -> Povm:
    """Elementwise convex combination sum_k lambda_k (M_k)_i on a shared outcome set."""
    lam = qmat.probability_vector(lam)
    if len(ms) != lam.size:
        raise ValueError(f"{len(ms)} POVMs but {lam.size} weights")
    n, d = len(ms[0]), ms[0].dim
    for m in ms:
        if len(m) != n or m.dim != d:
            raise ValueError("convex_combine needs a common dimension and outcome count")
    elements = sum(w * m.elements for w, m in zip(lam, ms))
    return Povm(elements, ms[0].labels)


def disjoint_combine(ms, lam) -> Povm:
    """Flagged mixture on the disjoint union of outcome sets: element (k,i) is lambda_k (M_k)_i.

    Outcome labels become "k:label".  Weights of exactly 0 still contribute
    their (zero) elements, keeping the outcome bookkeeping total.
    """
    lam = qmat.probability_vector(lam)
    if len(ms) != lam.size:
        raise ValueError(f"{len(ms)} POVMs but {lam.size} weights")
    d = ms[0].dim
    blocks, labels = [], []
    for k, (w, m) in enumerate(zip(lam, ms)):
        if m.dim != d:
            raise ValueError("disjoint_combine needs a common dimension")
        blocks.append(w * m.elements)
        labels.extend(f"{k}:{lab}" for lab in m.labels)
    return Povm(np.concatenate(blocks, axis=0), tuple(labels))


def refine_split(m: Povm) -> Povm:
    """Split every element in half and count it twice.

    Observational entropy is invariant under this refinement for every state,
    while the coarse worst-case bounds that scale with |M| or with log V_i
    degrade; iterating it is the standard way to make them arbitrarily loose.
    """
    halves = np.concatenate([m.elements / 2.0, m.elements / 2.0], axis=0)
    labels = tuple(f"{lab}:a" for lab in m.labels) + tuple(f"{lab}:b" for lab in m.labels)
    return Povm(halves, labels)


@dataclass(frozen=True)
class StochasticMap:
    """Column-stochastic matrix carrying source outcomes to target outcomes."""

    entries: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=float)
        if a.ndim != 2:
            raise ValueError(f"expected a matrix, got shape {a.shape}")
        if a.min() < -1e-12:
            raise ValueError(f"negative transition probability {a.min():.3e}")
        a = np.clip(a, 0.0, None)
        colsums = a.sum(axis=0)
        if np.abs(colsums - 1.0).max() > 1e-10:
            raise ValueError("columns must sum to 1 within 1e-10")
        a = a / colsums
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]


def identity_map(n: int) -> StochasticMap:
    return StochasticMap(np.eye(n))


def merge_map(n: int) -> StochasticMap:
    """Coarsest postprocessing: all n outcomes merged into one."""
    return StochasticMap(np.ones((1, n)))


def split_map(n: int) -> StochasticMap:
    """Each outcome split uniformly in two; postprocessing twin of refine_split."""
    return StochasticMap(np.vstack([np.eye(n) / 2.0, np.eye(n) / 2.0]))


def postprocess(lambda_map: StochasticMap, m: Povm) -> Povm:
    """(Lambda M)_j = sum_i Lambda_{ji} M_i; distributions transform as p -> Lambda p."""
    if lambda_map.cols != len(m):
        raise ValueError(f"map has {lambda_map.cols} columns but POVM has {len(m)} outcomes")
    elements = np.einsum("ji,iab->jab", lambda_map.entries, m.elements)
    return Povm(elements)


@dataclass(frozen=True)
class CqState:
    """Classical-quantum state sum_j p_j |j><j| (x) rho_j from measuring the A side.

    Zero-weight outcomes keep a maximally mixed placeholder conditional and a
    flag; they never enter entropy sums but keep the outcome set total.
    """

    outcome_labels: tuple
    weights: np.ndarray
    conditionals: np.ndarray
    d_a: int

    def __post_init__(self):
        w = qmat.probability_vector(self.weights)
        c = np.asarray(self.conditionals, dtype=complex)
        if c.ndim != 3 or c.shape[1] != c.shape[2]:
            raise ValueError(f"conditionals must be a stack of square matrices, got {c.shape}")
        labels = tuple(self.outcome_labels)
        if not (len(labels) == w.size == c.shape[0]):
            raise ValueError("labels, weights, conditionals must have equal length")
        c = np.stack([qmat.density(x) for x in c])
        c.setflags(write=False)
        object.__setattr__(self, "outcome_labels", labels)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "conditionals", c)

    @property
    def d_b(self) -> int:
        return self.conditionals.shape[1]

    @property
    def live(self) -> np.ndarray:
        return self.weights > 1e-12

    def average_state(self) -> np.ndarray:
        """sum_j p_j rho_j; equals rho_B when built by partial_measure."""
        return np.einsum("j,jab->ab", self.weights, self.conditionals)

    def to_json(self) -> dict:
        return {
            "outcome_labels": list(self.outcome_labels),
            "weights": [float(x) for x in self.weights],
            "conditionals": [qmat.matrix_to_json(c) for c in self.conditionals],
            "d_a": self.d_a,
        }

    @staticmethod
    def from_json(obj) -> "CqState":
        return CqState(
            outcome_labels=tuple(obj["outcome_labels"]),
            weights=np.asarray(obj["weights"], dtype=float),
            conditionals=np.stack([qmat.matrix_from_json(c) for c in obj["conditionals"]]),
            d_a=int(obj["d_a"]),
        )


def partial_measure(m_a: Povm, rho_ab) -> CqState:
    """Measure the A factor of a bipartite state: (Phi_M (x) id) rho.

    d_B is inferred from the state dimension, which must be an exact multiple
    of the POVM dimension.
    """
    rho_ab = qmat.density(rho_ab)
    d_a = m_a.dim
    d = rho_ab.shape[0]
    if d % d_a != 0:
        raise ValueError(f"state dimension {d} is not a multiple of the A dimension {d_a}")
    d_b = d // d_a
    r = rho_ab.reshape(d_a, d_b, d_a, d_b)
    # tr_A((M_j (x) 1) rho) for all j at once
    blocks = np.einsum("jpq,qapb->jab", m_a.elements, r)
    weights = np.einsum("jaa->j", blocks).real
    weights = np.clip(weights, 0.0, None)
    conds = np.empty_like(blocks)
    mixed = np.eye(d_b) / d_b
    for j, w in enumerate(weights):
        conds[j] = blocks[j] / w if w > 1e-12 else mixed
    return CqState(
        outcome_labels=m_a.labels,
        weights=weights,
        conditionals=conds,
        d_a=d_a,
    )


def cq_relative_entropy(a: CqState, b: CqState) -> float:
    """Chain rule D(a||b) = D(p||q) + sum_j p_j D(rho_j||sigma_j).

    Agrees with the quantum relative entropy of the block-diagonal embeddings
    sum_j |j><j| (x) p_j rho_j.  Returns float('inf') on any support
    violation, classical or conditional.
    """
    if a.outcome_labels != b.outcome_labels:
        raise ValueError("outcome sets differ")
    if a.d_b != b.d_b:
        raise ValueError(f"conditional dimensions differ: {a.d_b} vs {b.d_b}")
    classical = entropy.relative_entropy_classical(a.weights, b.weights)
    if math.isinf(classical):
        return math.inf
    total = classical
    for j in np.nonzero(a.live)[0]:
        term = entropy.relative_entropy_quantum(a.conditionals[j], b.conditionals[j])
        if math.isinf(term):
            return math.inf
        total += float(a.weights[j]) * term
    return total
