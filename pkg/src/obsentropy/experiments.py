"""Scripted demonstrations: the two-outcome mixing family, the no-go scan,
the channel and simulation continuity probes, the minimax spot-check, and
the refinement pathology.

The recurring construction is the family M_lambda = (1-lambda) M + lambda M~
where M = (P, 1-P) measures a pure state rho = P perfectly and M~ is M with
its outcomes swapped.  Everything about it is closed form:

    p = (1-lambda, lambda),
    V = (1 + lambda(d-2), (d-1) - lambda(d-2)),
    S_lambda = (1-lambda) log(V_0/(1-lambda)) + lambda log(V_1/lambda),

and both M and M~ give entropy 0 on rho, so S_lambda is simultaneously the
measurement-concavity gap and the entropy difference under a lambda-small
perturbation of the measuring channel.  Probe tables assert only facts that
are actually theorems; everything else is recorded as data with pass/fail
flags, so a false conjecture shows up as a False flag in the output instead
of a crash.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import bounds, entropy, measurement_distance, povm_algebra, qmat
from .bounds import BoundReport, ConvexStateSet
from .qmat import Povm


# ---------------------------------------------------------------------------
# the two-outcome mixing family

def mixing_family(d: int, lam: float):
    """(rho, m, m_swapped, m_lambda) for the pure-state two-outcome family."""
    if d < 2:
        raise ValueError("family needs dimension at least 2")
    if not -1e-12 <= lam <= 0.5 + 1e-12:
        raise ValueError(f"lambda {lam!r} outside [0, 1/2]")
    lam = min(max(lam, 0.0), 0.5)
    p = np.zeros((d, d), dtype=complex)
    p[0, 0] = 1.0
    rho = qmat.density(p)
    m = Povm(np.stack([p, np.eye(d) - p]))
    m_swapped = Povm(np.stack([np.eye(d) - p, p]))
    m_lambda = povm_algebra.convex_combine([m, m_swapped], (1.0 - lam, lam))
    return rho, m, m_swapped, m_lambda


def mixing_entropy(d: int, lam: float) -> float:
    """Closed-form S_lambda with the 0 log 0 convention at the endpoints."""
    v0 = 1.0 + lam * (d - 2.0)
    v1 = (d - 1.0) - lam * (d - 2.0)
    out = 0.0
    if lam < 1.0:
        out += (1.0 - lam) * math.log(v0 / (1.0 - lam))
    if lam > 0.0:
        out += lam * math.log(v1 / lam)
    return out


@dataclass(frozen=True)
class SweepRow:
    """One (d, lambda) grid point of the family, with bound columns at eps = lambda."""

    d: int
    lam: float
    s_lambda: float
    p0: float
    p1: float
    v0: float
    v1: float
    afw_rhs: float
    naive_rhs: float
    ratio_to_logd: float

    def __post_init__(self):
        if abs(self.p0 + self.p1 - 1.0) > 1e-12:
            raise ValueError("probabilities must sum to 1")
        if abs(self.v0 + self.v1 - self.d) > 1e-9:
            raise ValueError("volumes must sum to d")


SWEEP_COLUMNS = ("d", "lambda", "s_lambda", "p0", "p1", "v0", "v1",
                 "afw_rhs", "naive_rhs", "ratio_to_logd")


def example1_sweep(dims, lambdas) -> list:
    """Numeric sweep of the family, cross-checked against the closed form.

    Each row recomputes S_lambda from actual matrices through
    observational_entropy and insists it matches the formula to 1e-9; a
    mismatch means the library is broken and raises.
    """
    rows = []
    for d in dims:
        for lam in lambdas:
            rho, _, _, m_lambda = mixing_family(d, lam)
            br = entropy.observational_entropy(m_lambda, rho)
            closed = mixing_entropy(d, lam)
            if abs(br.total - closed) > 1e-9:
                raise ArithmeticError(
                    f"numeric S_lambda {br.total!r} disagrees with closed form {closed!r} "
                    f"at (d={d}, lambda={lam})")
            rows.append(SweepRow(
                d=d, lam=lam, s_lambda=br.total,
                p0=float(br.probs[0]), p1=float(br.probs[1]),
                v0=float(br.volumes[0]), v1=float(br.volumes[1]),
                afw_rhs=bounds.afw_bound(lam, math.log(d)),
                naive_rhs=bounds.naive_bound(m_lambda, lam),
                ratio_to_logd=br.total / math.log(d),
            ))
    return rows


@dataclass(frozen=True)
class NoGoScan:
    """Closed-form ratios S_lambda/log d along a dimension scan.

    first_dim_over is the smallest scanned dimension whose ratio exceeds the
    threshold, or None if the scan never gets there; delta is the gap left
    below 1 at the largest scanned dimension.  No assertion is made here; the
    scan reports what it finds.
    """

    lam: float
    threshold: float
    rows: tuple
    monotone: bool
    first_dim_over: int | None
    delta: float

    def __iter__(self):
        return iter(self.rows)

    def __len__(self):
        return len(self.rows)


def no_go_scan(lambda_fixed: float, dims, threshold: float = 0.9) -> NoGoScan:
    """Ratios S_lambda/log d for fixed lambda along ascending dims (closed form only).

    The ratio creeps toward 1 like 1 - O(1/log d), which is the obstruction
    to any bound of the form S_lambda <= f(lambda) log d with f continuous
    and f(0) = 0: no fixed f(lambda) < 1 survives all d.
    """
    if not 0.0 <= lambda_fixed <= 0.5 + 1e-12:
        raise ValueError(f"lambda {lambda_fixed!r} outside [0, 1/2]")
    dims = list(dims)
    if any(d < 2 for d in dims) or any(b <= a for a, b in zip(dims, dims[1:])):
        raise ValueError("dims must be an ascending list of integers >= 2")
    rows = tuple((d, mixing_entropy(d, lambda_fixed) / math.log(d)) for d in dims)
    ratios = [r for _, r in rows]
    monotone = all(b >= a - 1e-12 for a, b in zip(ratios, ratios[1:]))
    over = [d for d, r in rows if r > threshold]
    return NoGoScan(
        lam=lambda_fixed,
        threshold=threshold,
        rows=rows,
        monotone=monotone,
        first_dim_over=over[0] if over else None,
        delta=1.0 - max(ratios),
    )


def concavity_violation_demo(d: int, lam: float) -> BoundReport:
    """The measurement-mixing concavity gap against the state-mixing bound h(lambda).

    The gap equals S_lambda outright (both endpoint measurements see the pure
    state perfectly), so for large d the report's slack h(lambda) - S_lambda
    goes strongly negative: the bound that held for mixtures of states fails
    for mixtures of measurements by as much as log d.
    """
    s_lam = mixing_entropy(d, lam)
    rhs = entropy.binary_h(lam)
    return BoundReport(quantity_lhs=s_lam, bound_rhs=rhs, slack=rhs - s_lam,
                       epsilon=lam, dim=d, kappa=rhs, bound_kind="concavity")


# ---------------------------------------------------------------------------
# continuity probes

@dataclass(frozen=True)
class ChannelProbeRow:
    s: float
    f_s: float
    diff: float                 # f_full - f_s
    never_increases: bool       # f_s <= f_full + 1e-9
    fraction_bound: bool        # |f_full - f_s| <= s*f_full + 1e-9


@dataclass(frozen=True)
class ChannelProbe:
    """Relative entropy under increasing measurement noise.

    f_s mixes the measuring channel with the uniform-outcome channel at noise
    weight s.  never_increases and monotone reflect theorems (joint convexity
    of relative entropy); fraction_bound records the conjectured bound
    |f_full - f_s| <= s*f_full pointwise, which generic instances falsify, so
    expect False flags there.
    """

    f_full: float
    rows: tuple
    all_never_increase: bool
    all_fraction_bound: bool
    monotone: bool

    def to_json(self) -> dict:
        return {
            "f_full": self.f_full,
            "rows": [{"s": r.s, "f_s": r.f_s, "diff": r.diff,
                      "never_increases": r.never_increases,
                      "fraction_bound": r.fraction_bound} for r in self.rows],
            "all_never_increase": self.all_never_increase,
            "all_fraction_bound": self.all_fraction_bound,
            "monotone": self.monotone,
        }


CHANNEL_PROBE_COLUMNS = ("s", "f_s", "diff", "never_increases", "fraction_bound")


def uniform_noise_povm(dim: int, outcomes: int) -> Povm:
    """The POVM {1/n, ..., 1/n}: measures nothing, outputs uniform noise."""
    return Povm(np.stack([np.eye(dim) / outcomes] * outcomes))


def channel_continuity_probe(rho, sigma, m: Povm, s_grid) -> ChannelProbe:
    """Mix the measuring channel of m with uniform output noise and track D(p_s||q_s).

    Requires D(rho||sigma) finite.  The noisy channel at weight s is itself
    the measuring channel of (1-s) M + s {1/n}, so the whole probe stays
    inside POVM land.
    """
    rho = qmat.density(rho)
    sigma = qmat.density(sigma)
    if math.isinf(entropy.relative_entropy_quantum(rho, sigma)):
        raise ValueError("probe needs D(rho||sigma) finite")
    s_grid = sorted(float(s) for s in s_grid)
    if s_grid and (s_grid[0] <= 0.0 or s_grid[-1] >= 1.0):
        raise ValueError("s grid must lie strictly inside (0, 1)")
    f_full = entropy.measured_relative_entropy(m, rho, sigma)
    noise = uniform_noise_povm(m.dim, len(m))
    rows = []
    for s in s_grid:
        m_s = povm_algebra.convex_combine([m, noise], (1.0 - s, s))
        f_s = entropy.measured_relative_entropy(m_s, rho, sigma)
        rows.append(ChannelProbeRow(
            s=s, f_s=f_s, diff=f_full - f_s,
            never_increases=f_s <= f_full + 1e-9,
            fraction_bound=abs(f_full - f_s) <= s * f_full + 1e-9,
        ))
    monotone = all(b.f_s <= a.f_s + 1e-9 for a, b in zip(rows, rows[1:]))
    return ChannelProbe(
        f_full=f_full,
        rows=tuple(rows),
        all_never_increase=all(r.never_increases for r in rows),
        all_fraction_bound=all(r.fraction_bound for r in rows),
        monotone=monotone,
    )


@dataclass(frozen=True)
class GammaProbeRow:
    gamma: float
    d_m: float
    d_n: float
    diff: float


GAMMA_PROBE_COLUMNS = ("gamma", "d_m", "d_n", "diff")


def gamma_continuity_probe(rho, sigma, pairs, tol: float = 1e-4) -> list:
    """Scatter of |D_M - D_N| against the simulation distance gamma(M, N).

    For each pair the one-way optimizing maps are put through the
    data-processing check D_{Lambda M} <= D_M (and symmetrically), which is a
    theorem and raises on violation beyond 1e-9.  The scatter itself carries
    no asserted modulus: the no-go family shows none exists in terms of
    gamma alone.
    """
    rho = qmat.density(rho)
    sigma = qmat.density(sigma)
    if math.isinf(entropy.relative_entropy_quantum(rho, sigma)):
        raise ValueError("probe needs D(rho||sigma) finite")
    rows = []
    for m, n in pairs:
        fwd = measurement_distance.one_way_sim_distance(m, n, tol)
        bwd = measurement_distance.one_way_sim_distance(n, m, tol)
        d_m = entropy.measured_relative_entropy(m, rho, sigma)
        d_n = entropy.measured_relative_entropy(n, rho, sigma)
        for source, mapped in ((m, fwd.best_map), (n, bwd.best_map)):
            d_src = entropy.measured_relative_entropy(source, rho, sigma)
            d_post = entropy.measured_relative_entropy(
                povm_algebra.postprocess(mapped, source), rho, sigma)
            if d_post > d_src + 1e-9:
                raise ArithmeticError(
                    f"data processing violated: {d_post!r} > {d_src!r}")
        gamma = (fwd.value + bwd.value) / 2.0
        rows.append(GammaProbeRow(gamma=gamma, d_m=d_m, d_n=d_n, diff=abs(d_m - d_n)))
    return rows


# ---------------------------------------------------------------------------
# minimax spot-check

def _simplex_grid(k: int, resolution: float):
    """All weight vectors with entries on a 1/resolution lattice summing to 1."""
    n = int(round(1.0 / resolution))
    pts = []
    for comp in itertools.combinations_with_replacement(range(k), n):
        w = np.zeros(k)
        for c in comp:
            w[c] += 1.0
        pts.append(w / n)
    return np.array(pts)


def minimax_spot_check(rho, chi: ConvexStateSet, ms, tol: float = 1e-7,
                       gap_bound: float = 5e-3, resolution: float = 1e-2) -> float:
    """Numerical evidence for inf-sup = sup-inf over flagged mixtures of measurements.

    sup_inf comes from restricted_divergence (exact over generators); inf_sup
    is estimated by brute force: a dense grid over chi (hull weights at the
    given resolution), and at every grid state the max over the flagged
    closure, itself parameterized by a mixture-weight grid over the
    generators.  Raises if the gap exceeds gap_bound; returns the gap.
    """
    if len(ms) > 3:
        raise ValueError("spot check is meant for at most 3 generators")
    rho = qmat.density(rho)
    sup_inf = bounds.restricted_divergence(rho, chi, ms, tol).value

    if chi.kind == "singleton":
        sigmas = [chi.states[0]]
    elif chi.kind == "max_mixed":
        sigmas = [np.eye(chi.dim) / chi.dim]
    elif chi.kind == "hull":
        if len(chi.states) > 4:
            raise ValueError("spot check is meant for hulls with at most 4 vertices")
        grid = _simplex_grid(len(chi.states), resolution)
        stack = np.stack(chi.states)
        sigmas = np.einsum("gk,kab->gab", grid, stack)
    else:
        raise ValueError("spot check does not handle this set kind")

    # divergence matrix: generators x grid states
    div = np.empty((len(ms), len(sigmas)))
    for k, m in enumerate(ms):
        p = entropy.outcome_probabilities(m, rho)
        keep = p > 0.0
        ps = p[keep]
        q = np.stack([entropy.outcome_probabilities(m, qmat.density(s))[keep]
                      for s in sigmas], axis=1)
        with np.errstate(divide="ignore"):
            vals = np.where((q > 0.0).all(axis=0),
                            np.sum(ps[:, None] * np.log(ps[:, None] / np.where(q > 0, q, 1.0)),
                                   axis=0),
                            math.inf)
        div[k] = vals
    # flagged closure: divergence of a mu-mixture is the mu-average, so the
    # sup over the closure is a max of mu-grid averages
    mu_grid = _simplex_grid(len(ms), resolution)
    flagged = mu_grid @ div
    inf_sup = float(np.min(flagged.max(axis=0)))
    gap = inf_sup - sup_inf
    if gap > gap_bound:
        raise ArithmeticError(f"minimax gap {gap!r} exceeds {gap_bound!r}")
    return gap


# ---------------------------------------------------------------------------
# refinement pathology

@dataclass(frozen=True)
class PathologyRow:
    iteration: int
    outcomes: int
    entropy_diff: float
    naive_rhs: float
    afw_rhs: float
    all_volumes_le_1: bool


PATHOLOGY_COLUMNS = ("iteration", "outcomes", "entropy_diff", "naive_rhs",
                     "afw_rhs", "all_volumes_le_1")


def refinement_pathology(m: Povm, rho, sigma, iterations: int = 10) -> list:
    """Iterate refine_split and tabulate the frozen entropy difference vs the bounds.

    The entropy difference and the sharpened bound are refinement-invariant;
    the coarse bound's |M| and volume terms both degrade each split, strictly
    once every volume is at or below 1.
    """
    rho = qmat.density(rho)
    sigma = qmat.density(sigma)
    eps = qmat.trace_distance(rho, sigma)
    afw_rhs = bounds.afw_bound(eps, math.log(m.dim))
    rows = []
    current = m
    for k in range(iterations + 1):
        diff = abs(entropy.observational_entropy(current, rho).total
                   - entropy.observational_entropy(current, sigma).total)
        rows.append(PathologyRow(
            iteration=k,
            outcomes=len(current),
            entropy_diff=diff,
            naive_rhs=bounds.naive_bound(current, eps),
            afw_rhs=afw_rhs,
            all_volumes_le_1=bool((current.volumes <= 1.0 + 1e-12).all()),
        ))
        current = povm_algebra.refine_split(current)
    return rows


# ---------------------------------------------------------------------------
# canonical spot-check instances

def minimax_instances():
    """Three fixed qubit instances spanning the degenerate and generic cases.

    Returns (name, rho, chi, ms) tuples: a singleton reference set (no inf
    freedom), a single measurement (no sup freedom), and the generic case of
    two projective measurements against a hull of diagonal states.
    """
    z = Povm(np.stack([np.diag([1.0, 0.0]), np.diag([0.0, 1.0])]).astype(complex))
    plus = np.full((2, 2), 0.5, dtype=complex)
    minus = np.array([[0.5, -0.5], [-0.5, 0.5]], dtype=complex)
    x = Povm(np.stack([plus, minus]))
    rho = 0.6 * np.diag([1.0, 0.0]).astype(complex) + 0.4 * plus
    diag = [np.diag([0.1, 0.9]).astype(complex),
            np.diag([0.5, 0.5]).astype(complex),
            np.diag([0.95, 0.05]).astype(complex)]
    return (
        ("singleton_chi", rho, ConvexStateSet.singleton(np.diag([0.25, 0.75]).astype(complex)),
         [z, x]),
        ("single_measurement", rho, ConvexStateSet.hull(diag), [z]),
        ("two_projective_diag_hull", rho, ConvexStateSet.hull(diag), [z, x]),
    )
