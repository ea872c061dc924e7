"""Finite-dimensional quantum objects and the linear algebra underneath everything else.

Conventions used throughout the package:

- Matrices are dense complex numpy arrays, hermitized at construction and
  frozen (writeable = False) so downstream code can share them without copies.
- Density matrices have unit trace; POVM elements are PSD and sum to the
  identity.  Validation is tolerance-gated (see the module constants) and the
  constructors renormalize exactly after validating, so invariants hold to
  machine precision downstream, not merely to the construction tolerance.
- Randomness flows through numpy Generators backed by the Philox counter-based
  bit generator: ``trial_rng(seed, k)`` gives independent, platform-stable
  streams per trial index, which keeps fuzz campaigns replayable row by row.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

class ConvergenceError(RuntimeError):
    """An iterative solver hit its iteration cap before certifying its tolerance.

    Carries the best duality/feasibility gap seen so the caller can decide
    whether the partial answer is usable.
    """

    def __init__(self, message: str, gap: float, iterations: int):
        super().__init__(f"{message} (gap {gap:.3e} after {iterations} iterations)")
        self.gap = gap
        self.iterations = iterations


# validation tolerances
PSD_TOL = 1e-10          # most negative eigenvalue tolerated
TRACE_TOL = 1e-10        # |tr(rho) - 1|
COMPLETENESS_TOL = 1e-9  # deviation of sum of POVM elements from identity
PROB_CLIP = 1e-12        # probabilities above -PROB_CLIP are clipped to 0
SUPPORT_TOL = 1e-10      # eigenvalues below this count as outside the support


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def hermitize(m) -> np.ndarray:
    """(m + m^dagger)/2 as a fresh complex array."""
    m = np.asarray(m, dtype=complex)
    return (m + m.conj().T) / 2.0


def hermitian(m) -> np.ndarray:
    """Validate that m is square and Hermitian (within PSD_TOL), return frozen copy."""
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.allclose(a, a.conj().T, atol=1e-8, rtol=0.0):
        raise ValueError("matrix is not Hermitian")
    return _freeze(hermitize(a))


def density(m) -> np.ndarray:
    """Validate a density matrix: Hermitian, PSD within PSD_TOL, unit trace within TRACE_TOL.

    The returned array is renormalized to trace exactly 1 and frozen.
    """
    a = hermitian(m)
    w = np.linalg.eigvalsh(a)
    if w[0] < -PSD_TOL:
        raise ValueError(f"state is not positive semidefinite (min eigenvalue {w[0]:.3e})")
    tr = a.trace().real
    if abs(tr - 1.0) > TRACE_TOL:
        raise ValueError(f"state trace {tr!r} is not 1 within {TRACE_TOL}")
    return _freeze(a / tr)


def probability_vector(p) -> np.ndarray:
    """Validate a probability vector: entries >= -PROB_CLIP, sum 1 within 1e-9.

    Small negative entries are clipped to 0 and the vector is renormalized
    exactly; the result is frozen.
    """
    v = np.asarray(p, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("empty probability vector")
    if v.min() < -PROB_CLIP:
        raise ValueError(f"negative probability {v.min():.3e}")
    v = np.clip(v, 0.0, None)
    s = v.sum()
    if abs(s - 1.0) > 1e-9:
        raise ValueError(f"probabilities sum to {s!r}, not 1")
    return _freeze(v / s)


def _default_labels(n: int) -> tuple:
    return tuple(str(i) for i in range(n))


@dataclass(frozen=True)
class Povm:
    """A POVM: a stack of PSD matrices summing to the identity.

    ``elements`` has shape (n_outcomes, dim, dim).  ``labels`` are opaque
    outcome names, defaulting to "0", "1", ...; the algebra ops that build
    new POVMs out of old ones (disjoint unions, splits) derive structured
    labels so outcome bookkeeping survives composition.
    """

    elements: np.ndarray
    labels: tuple = field(default=())

    def __post_init__(self):
        a = np.asarray(self.elements, dtype=complex)
        if a.ndim != 3 or a.shape[1] != a.shape[2]:
            raise ValueError(f"expected shape (n, d, d), got {a.shape}")
        if a.shape[0] == 0:
            raise ValueError("POVM needs at least one outcome")
        a = np.stack([hermitize(e) for e in a])
        w = np.linalg.eigvalsh(a)
        if w.min() < -PSD_TOL:
            raise ValueError(
                f"POVM element {int(np.argmin(w.min(axis=1)))} is not PSD "
                f"(min eigenvalue {w.min():.3e})")
        total = a.sum(axis=0)
        dev = np.abs(total - np.eye(a.shape[1])).max()
        if dev > COMPLETENESS_TOL:
            raise ValueError(f"completeness violated: sum of elements deviates from identity by {dev:.3e}")
        labels = tuple(self.labels) if self.labels else _default_labels(a.shape[0])
        if len(labels) != a.shape[0]:
            raise ValueError(f"{len(labels)} labels for {a.shape[0]} outcomes")
        if len(set(labels)) != len(labels):
            raise ValueError("outcome labels must be distinct")
        object.__setattr__(self, "elements", _freeze(a))
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.elements.shape[0]

    @property
    def dim(self) -> int:
        return self.elements.shape[1]

    @property
    def volumes(self) -> np.ndarray:
        """tr(M_i) for each outcome; the coarse-graining volumes."""
        return np.einsum("kii->k", self.elements).real


def eig_hermitian(m) -> tuple:
    """Eigendecomposition of a Hermitian matrix: (ascending eigenvalues, unitary of columns)."""
    w, v = np.linalg.eigh(hermitize(m))
    return w, v


def psd_part(m: np.ndarray) -> np.ndarray:
    """Positive part: sum of lambda_i |v_i><v_i| over eigenvalues lambda_i > 0.

    Accepts a single Hermitian matrix or a stack (..., d, d); the
    decomposition is batched in either case.
    """
    w, v = np.linalg.eigh(m)
    wp = np.clip(w, 0.0, None)
    return np.einsum("...ik,...k,...jk->...ij", v, wp, v.conj())


def sqrtm_psd(m: np.ndarray) -> np.ndarray:
    """Matrix square root of a PSD matrix (negative rounding clipped to 0)."""
    w, v = np.linalg.eigh(hermitize(m))
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


def matrix_log(m, support_only: bool = False) -> np.ndarray:
    """Matrix logarithm of a PSD matrix.

    With ``support_only`` the log is taken on the support (eigenvalues above
    SUPPORT_TOL) and extended by 0 on the kernel, the convention under which
    tr(rho log rho) computes entropies.  Without it, eigenvalues at or below
    SUPPORT_TOL raise.
    """
    w, v = np.linalg.eigh(hermitize(m))
    if support_only:
        lw = np.where(w > SUPPORT_TOL, np.log(np.where(w > SUPPORT_TOL, w, 1.0)), 0.0)
    else:
        if w.min() <= SUPPORT_TOL:
            raise ValueError(f"matrix_log of a singular matrix (min eigenvalue {w.min():.3e}); "
                             "pass support_only=True for the support convention")
        lw = np.log(w)
    return hermitize((v * lw) @ v.conj().T)


def trace_norm(m) -> float:
    """Sum of absolute eigenvalues of a Hermitian matrix."""
    return float(np.abs(np.linalg.eigvalsh(hermitize(m))).sum())


def trace_distance(rho, sigma) -> float:
    """(1/2)||rho - sigma||_1, clipped into [0, 1]."""
    t = 0.5 * trace_norm(np.asarray(rho) - np.asarray(sigma))
    return float(min(max(t, 0.0), 1.0))


def partial_trace(rho_ab: np.ndarray, d_a: int, d_b: int, keep: str) -> np.ndarray:
    """Trace out one factor of a state on C^{d_a} (x) C^{d_b}.

    keep = "a" returns tr_B, keep = "b" returns tr_A.
    """
    r = np.asarray(rho_ab, dtype=complex).reshape(d_a, d_b, d_a, d_b)
    if keep == "a":
        return np.einsum("ibjb->ij", r)
    if keep == "b":
        return np.einsum("aiaj->ij", r)
    raise ValueError(f"keep must be 'a' or 'b', got {keep!r}")


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection of a real vector onto the probability simplex."""
    v = np.asarray(v, dtype=float).ravel()
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ks = np.arange(1, v.size + 1)
    cond = u - css / ks > 0
    k = ks[cond][-1]
    tau = css[cond][-1] / k
    return np.clip(v - tau, 0.0, None)


# ---------------------------------------------------------------------------
# randomness

_MASK64 = (1 << 64) - 1


def rng_from_seed(seed) -> np.random.Generator:
    """Accept a Generator as-is, an int as a Philox seed, None for fresh entropy."""
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        return np.random.Generator(np.random.Philox())
    return np.random.Generator(np.random.Philox(key=[int(seed) & _MASK64, 0]))


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Independent stream for one trial of a campaign keyed by (seed, trial).

    Philox is counter-based, so the (seed, trial) key gives the same stream on
    any platform and any execution order; campaigns can be parallelized or
    resumed without changing their rows.
    """
    return np.random.Generator(np.random.Philox(key=[int(seed) & _MASK64, int(trial) & _MASK64]))


def random_state_vector(dim: int, rng) -> np.ndarray:
    """Haar-random unit vector in C^dim."""
    rng = rng_from_seed(rng)
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def random_density(dim: int, rank: int, seed) -> np.ndarray:
    """Random density matrix of the given rank from the Ginibre ensemble.

    G is dim x rank with iid complex normal entries; G G^dagger / tr(...)
    is rank-``rank`` almost surely and Hilbert-Schmidt distributed at
    rank = dim.
    """
    if not 1 <= rank <= dim:
        raise ValueError(f"rank must be in [1, {dim}], got {rank}")
    rng = rng_from_seed(seed)
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    a = g @ g.conj().T
    return density(a / a.trace().real)


def random_povm(dim: int, outcomes: int, seed) -> Povm:
    """Random POVM: Wishart blocks A_i A_i^dagger normalized by S^{-1/2} (.) S^{-1/2}.

    S = sum_i A_i A_i^dagger is singular with probability zero; on a singular
    draw we redraw once and then give up.
    """
    if outcomes < 1:
        raise ValueError("need at least one outcome")
    rng = rng_from_seed(seed)
    for attempt in range(2):
        blocks = []
        for _ in range(outcomes):
            a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
            blocks.append(a @ a.conj().T)
        s = np.sum(blocks, axis=0)
        w = np.linalg.eigvalsh(s)
        if w.min() > 1e-12 * w.max():
            si = np.linalg.inv(sqrtm_psd(s))
            return Povm(np.stack([si @ b @ si for b in blocks]))
    raise ValueError("normalization matrix singular twice in a row")


# ---------------------------------------------------------------------------
# JSON formats
#
# Matrices: {"dim": n, "entries": [[[re, im], ...], ...]} row-major.
# POVMs:    {"dim": n, "elements": [matrix, ...]} with an optional "labels" list.

def matrix_to_json(m) -> dict:
    a = np.asarray(m, dtype=complex)
    entries = [[[float(x.real), float(x.imag)] for x in row] for row in a]
    return {"dim": int(a.shape[0]), "entries": entries}


def matrix_from_json(obj) -> np.ndarray:
    if not isinstance(obj, dict) or "entries" not in obj:
        raise ValueError("matrix JSON must be an object with an 'entries' field")
    rows = obj["entries"]
    a = np.array([[complex(e[0], e[1]) for e in row] for row in rows], dtype=complex)
    d = int(obj.get("dim", a.shape[0]))
    if a.shape != (d, d):
        raise ValueError(f"matrix JSON claims dim {d} but entries have shape {a.shape}")
    return a


def povm_to_json(m: Povm) -> dict:
    return {
        "dim": m.dim,
        "elements": [matrix_to_json(e) for e in m.elements],
        "labels": list(m.labels),
    }


def povm_from_json(obj) -> Povm:
    if not isinstance(obj, dict) or "elements" not in obj:
        raise ValueError("POVM JSON must be an object with an 'elements' field")
    elements = np.stack([matrix_from_json(e) for e in obj["elements"]])
    labels = tuple(obj["labels"]) if "labels" in obj else ()
    return Povm(elements, labels)


def load_state(path: str) -> np.ndarray:
    with open(path) as f:
        return density(matrix_from_json(json.load(f)))


def load_povm(path: str) -> Povm:
    with open(path) as f:
        return povm_from_json(json.load(f))


def save_json(obj: dict, path: str) -> None:
    with open(path, "w") as f:
        json.dump(obj, f, indent=1)
        f.write("\n")
