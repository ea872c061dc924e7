"""Continuity certificates for observational entropy and its relatives.

The central objects are BoundReports: records pairing a computed quantity
(an entropy difference, a concavity gap) with the bound that is supposed to
dominate it, so a fuzz campaign is just a stream of reports whose slack
column stays nonnegative.

The sharpened continuity bound is g(eps) + eps*kappa with
g(x) = -x log x + (1+x) log(1+x) and eps the trace distance; kappa is
log d for observational entropy, log d_A for its conditional version, and a
caller-supplied constant for divergences restricted to a measurement class.
The decomposition behind these bounds writes two states rho, sigma as
mixtures around a common center omega; ``omega_delta`` constructs it and the
certificates downstream only consume trace distances, so they stay valid if
that construction is never materialized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import entropy, povm_algebra, qmat
from .entropy import measured_relative_entropy, observational_entropy
from .qmat import ConvergenceError, Povm


@dataclass(frozen=True)
class OmegaDelta:
    """Common-center decomposition of a pair of states.

    omega = rho/(1+eps) + eps*delta_minus/(1+eps)
          = sigma/(1+eps) + eps*delta_plus/(1+eps),
    rho - sigma = eps*(delta_plus - delta_minus),
    with eps the trace distance between rho and sigma.
    """

    epsilon: float
    omega: np.ndarray
    delta_plus: np.ndarray
    delta_minus: np.ndarray


def omega_delta(rho, sigma) -> OmegaDelta:
    """Build the common center omega and the normalized difference parts.

    delta_plusminus are the positive/negative eigenspace parts of rho - sigma
    scaled by 1/eps; both are states.  At eps <= 1e-12 the pair is treated as
    identical and the degenerate branch (omega = delta_pm = rho) is returned,
    under which the identities hold trivially.
    """
    rho = qmat.density(rho)
    sigma = qmat.density(sigma)
    if rho.shape != sigma.shape:
        raise ValueError(f"dimension mismatch: {rho.shape} vs {sigma.shape}")
    eps = qmat.trace_distance(rho, sigma)
    if eps <= 1e-12:
        return OmegaDelta(epsilon=eps, omega=rho, delta_plus=rho, delta_minus=rho)
    diff = rho - sigma
    pos = qmat.psd_part(diff)
    neg = qmat.psd_part(-diff)
    delta_plus = qmat.density(pos / eps)
    delta_minus = qmat.density(neg / eps)
    omega = (rho + sigma) / (2.0 * (1.0 + eps)) \
        + eps * (delta_plus + delta_minus) / (2.0 * (1.0 + eps))
    return OmegaDelta(epsilon=eps, omega=qmat.density(omega),
                      delta_plus=delta_plus, delta_minus=delta_minus)


def naive_bound(m: Povm, epsilon: float) -> float:
    """h(eps) + eps log|M| + eps max_i |log V_i|.

    The coarse bound that degrades under refinement: splitting elements grows
    |M| and shrinks the volumes, while the entropy difference it dominates is
    refinement-invariant.
    """
    if not 0.0 <= epsilon <= 1.0 + 1e-12:
        raise ValueError(f"epsilon {epsilon!r} outside [0, 1]")
    v = m.volumes
    if v.min() <= 1e-12:
        raise ValueError("zero-volume POVM element; log V_i undefined")
    return entropy.binary_h(min(epsilon, 1.0)) \
        + epsilon * math.log(len(m)) \
        + epsilon * float(np.abs(np.log(v)).max())


def afw_bound(epsilon: float, kappa: float) -> float:
    """Sharpened continuity modulus g(eps) + eps*kappa."""
    if epsilon < -1e-12 or kappa < -1e-12:
        raise ValueError("epsilon and kappa must be nonnegative")
    return entropy.g_func(max(epsilon, 0.0)) + max(epsilon, 0.0) * max(kappa, 0.0)


# ---------------------------------------------------------------------------
# certificates

_BOUND_KINDS = ("naive", "afw", "concavity", "conditional", "set_distance", "restricted")


@dataclass(frozen=True)
class BoundReport:
    """One certified comparison: quantity on the left, bound on the right.

    slack = bound_rhs - quantity_lhs; a passing report has slack >= -tol for
    the campaign's tolerance.  status is "ok" unless a precondition of the
    bound was violated (e.g. an infinite lhs against a finite rhs when the
    kappa assumption fails), in which case the row is a precondition failure,
    not a bound violation.
    """

    quantity_lhs: float
    bound_rhs: float
    slack: float
    epsilon: float
    dim: int
    kappa: float
    bound_kind: str
    status: str = "ok"

    def __post_init__(self):
        if self.bound_kind not in _BOUND_KINDS:
            raise ValueError(f"unknown bound kind {self.bound_kind!r}")
        if self.status not in ("ok", "failed_precondition"):
            raise ValueError(f"unknown status {self.status!r}")

    def passes(self, tolerance: float = 1e-9) -> bool:
        return self.status == "ok" and self.slack >= -tolerance

    def to_json(self) -> dict:
        def enc(x):
            return x if math.isfinite(x) else ("inf" if x > 0 else "-inf")
        return {
            "quantity_lhs": enc(self.quantity_lhs),
            "bound_rhs": enc(self.bound_rhs),
            "slack": enc(self.slack),
            "epsilon": self.epsilon,
            "dim": self.dim,
            "kappa": self.kappa,
            "bound_kind": self.bound_kind,
            "status": self.status,
        }


def _make_report(lhs: float, rhs: float, epsilon: float, dim: int, kappa: float,
                 kind: str) -> BoundReport:
    """Infinity-aware report assembly: inf <= inf passes, inf lhs vs finite rhs
    is a failed precondition."""
    status = "ok"
    if math.isinf(lhs) and math.isinf(rhs):
        slack = 0.0
    elif math.isinf(lhs):
        slack = -math.inf
        status = "failed_precondition"
    else:
        slack = rhs - lhs
    return BoundReport(quantity_lhs=lhs, bound_rhs=rhs, slack=slack, epsilon=epsilon,
                       dim=dim, kappa=kappa, bound_kind=kind, status=status)


def certify_oe_continuity(m: Povm, rho, sigma) -> BoundReport:
    """|S_M(rho) - S_M(sigma)| against g(eps) + eps log d."""
    rho = qmat.density(rho)
    sigma = qmat.density(sigma)
    d = m.dim
    lhs = abs(observational_entropy(m, rho).total - observational_entropy(m, sigma).total)
    eps = qmat.trace_distance(rho, sigma)
    kappa = math.log(d)
    return _make_report(lhs, afw_bound(eps, kappa), eps, d, kappa, "afw")


def certify_naive_continuity(m: Povm, rho, sigma) -> BoundReport:
    """Same entropy difference against the coarse h(eps) + eps log|M| + eps max|log V| bound."""
    rho = qmat.density(rho)
    sigma = qmat.density(sigma)
    lhs = abs(observational_entropy(m, rho).total - observational_entropy(m, sigma).total)
    eps = qmat.trace_distance(rho, sigma)
    return _make_report(lhs, naive_bound(m, eps), eps, m.dim, float(np.abs(np.log(m.volumes)).max()),
                        "naive")


def concavity_gap(m: Povm, states, lam) -> BoundReport:
    """Gap S_M(sum_k l_k rho_k) - sum_k l_k S_M(rho_k), sandwiched in [0, H(lambda)].

    The report's slack is the lesser margin of the two-sided sandwich, so a
    single nonnegativity check covers both directions.
    """
    lam = qmat.probability_vector(lam)
    states = [qmat.density(s) for s in states]
    if len(states) != lam.size:
        raise ValueError(f"{len(states)} states but {lam.size} weights")
    mixture = qmat.density(sum(w * s for w, s in zip(lam, states)))
    gap = observational_entropy(m, mixture).total \
        - sum(float(w) * observational_entropy(m, s).total for w, s in zip(lam, states))
    rhs = entropy.shannon(lam)
    return BoundReport(quantity_lhs=gap, bound_rhs=rhs, slack=min(rhs - gap, gap),
                       epsilon=0.0, dim=m.dim, kappa=rhs, bound_kind="concavity")


# ---------------------------------------------------------------------------
# relative-entropy distance to a convex set of states

_CHI_KINDS = ("singleton", "max_mixed", "product_with_free_b", "hull")


@dataclass(frozen=True)
class ConvexStateSet:
    """A convex set of reference states, given by kind plus payload.

    singleton(sigma)            the one-point set {sigma}
    max_mixed(dim)              {1/d}
    product_with_free_b(dA,dB)  {1_A/d_A (x) omega_B : omega_B arbitrary}
    hull(states)                convex hull of finitely many states
    """

    kind: str
    states: tuple = ()
    d_a: int = 0
    d_b: int = 0
    dim: int = 0

    def __post_init__(self):
        if self.kind not in _CHI_KINDS:
            raise ValueError(f"unknown set kind {self.kind!r}")
        if self.kind in ("singleton", "hull"):
            if not self.states:
                raise ValueError(f"{self.kind} set needs at least one state")
            sts = tuple(qmat.density(s) for s in self.states)
            d = sts[0].shape[0]
            if any(s.shape[0] != d for s in sts):
                raise ValueError("hull members must share a dimension")
            if self.kind == "singleton" and len(sts) != 1:
                raise ValueError("singleton set takes exactly one state")
            object.__setattr__(self, "states", sts)
            object.__setattr__(self, "dim", d)
        elif self.kind == "max_mixed":
            if self.dim < 1:
                raise ValueError("max_mixed set needs a positive dimension")
        else:
            if self.d_a < 1 or self.d_b < 1:
                raise ValueError("product_with_free_b needs positive d_a, d_b")
            object.__setattr__(self, "dim", self.d_a * self.d_b)

    @staticmethod
    def singleton(sigma) -> "ConvexStateSet":
        return ConvexStateSet(kind="singleton", states=(sigma,))

    @staticmethod
    def max_mixed(dim: int) -> "ConvexStateSet":
        return ConvexStateSet(kind="max_mixed", dim=dim)

    @staticmethod
    def product_with_free_b(d_a: int, d_b: int) -> "ConvexStateSet":
        return ConvexStateSet(kind="product_with_free_b", d_a=d_a, d_b=d_b)

    @staticmethod
    def hull(states) -> "ConvexStateSet":
        return ConvexStateSet(kind="hull", states=tuple(states))

    def to_json(self) -> dict:
        out = {"kind": self.kind}
        if self.kind in ("singleton", "hull"):
            out["states"] = [qmat.matrix_to_json(s) for s in self.states]
        elif self.kind == "max_mixed":
            out["dim"] = self.dim
        else:
            out["d_a"], out["d_b"] = self.d_a, self.d_b
        return out

    @staticmethod
    def from_json(obj) -> "ConvexStateSet":
        kind = obj.get("kind")
        if kind == "singleton":
            return ConvexStateSet.singleton(qmat.matrix_from_json(obj["states"][0]))
        if kind == "hull":
            return ConvexStateSet.hull([qmat.matrix_from_json(s) for s in obj["states"]])
        if kind == "max_mixed":
            return ConvexStateSet.max_mixed(int(obj["dim"]))
        if kind == "product_with_free_b":
            return ConvexStateSet.product_with_free_b(int(obj["d_a"]), int(obj["d_b"]))
        raise ValueError(f"unknown set kind {kind!r}")


def _fw_hull_min(p: np.ndarray, q_cols: np.ndarray, tol: float, max_iter: int = 10_000):
    """Minimize f(w) = sum_i p_i log(p_i/(Qw)_i) over simplex weights w.

    Q's columns are the vertex outcome distributions.  Pairwise Frank-Wolfe
    (vertex LMO, away vertex from the active set) with exact line search by
    bisection on the directional derivative; stops when the Frank-Wolfe
    duality gap certifies f(w) - f* <= tol.

    Returns (value, w, gap).  Returns +inf immediately if some p_i > 0 is
    unsupported by every vertex.
    """
    keep = p > 0.0
    ps = p[keep]
    qs = q_cols[keep, :]
    n_kept, n_vert = qs.shape
    if n_kept == 0:
        return 0.0, np.full(q_cols.shape[1], 1.0 / q_cols.shape[1]), 0.0
    if np.any(qs.max(axis=1) <= 0.0):
        return math.inf, None, 0.0
    base = float((ps * np.log(ps)).sum())

    def value_at(q):
        if q.min() <= 0.0:
            return math.inf
        return base - float((ps * np.log(q)).sum())

    w = np.full(n_vert, 1.0 / n_vert)
    q = qs @ w
    if n_vert == 1:
        return value_at(q), w, 0.0

    def dphi(q, dq, t):
        # derivative of f along direction dq at step t
        qt = q + t * dq
        if np.any(qt <= 0.0):
            return math.inf
        return -float((ps * (dq / qt)).sum())

    gap = math.inf
    for it in range(max_iter):
        grad = -(qs.T @ (ps / q))  # d f / d w_k
        k_fw = int(np.argmin(grad))
        gap = float(w @ grad - grad[k_fw])
        if gap <= tol:
            return value_at(q), w, gap
        active = np.nonzero(w > 1e-15)[0]
        k_aw = int(active[np.argmax(grad[active])])
        if k_aw == k_fw:
            # active set collapsed onto the FW vertex; gap should be ~0
            return value_at(q), w, gap
        dq = qs[:, k_fw] - qs[:, k_aw]
        t_max = float(w[k_aw])
        # exact line search: f is convex along dq, bisect the derivative
        if dphi(q, dq, 0.0) >= 0.0:
            t = 0.0
        elif dphi(q, dq, t_max) <= 0.0:
            t = t_max
        else:
            lo, hi = 0.0, t_max
            for _ in range(60):
                mid = (lo + hi) / 2.0
                if dphi(q, dq, mid) < 0.0:
                    lo = mid
                else:
                    hi = mid
            t = lo
        if t <= 0.0:
            # no progress along the pairwise direction; fall back to a plain FW step
            dq = qs[:, k_fw] - q
            if dphi(q, dq, 0.0) >= 0.0:
                return value_at(q), w, gap
            if dphi(q, dq, 1.0) <= 0.0:
                t = 1.0
            else:
                lo, hi = 0.0, 1.0
                for _ in range(60):
                    mid = (lo + hi) / 2.0
                    if dphi(q, dq, mid) < 0.0:
                        lo = mid
                    else:
                        hi = mid
                t = lo
            w = (1.0 - t) * w
            w[k_fw] += t
        else:
            w[k_aw] -= t
            w[k_fw] += t
        w = np.clip(w, 0.0, None)
        w /= w.sum()
        q = qs @ w
    raise ConvergenceError("Frank-Wolfe did not certify its tolerance", gap, max_iter)


def min_rel_entropy_to_set(m: Povm, rho, chi: ConvexStateSet, tol: float = 1e-7) -> float:
    """inf over sigma in chi of D_M(rho||sigma).

    Closed forms where available (point sets; the free-B product set, whose
    minimizer is sigma_B = rho_B); Frank-Wolfe over hull weights otherwise.
    """
    rho = qmat.density(rho)
    if chi.kind == "singleton":
        return measured_relative_entropy(m, rho, chi.states[0])
    if chi.kind == "max_mixed":
        d = chi.dim
        if m.dim != d:
            raise ValueError(f"set dimension {d} does not match POVM dimension {m.dim}")
        return measured_relative_entropy(m, rho, np.eye(d) / d)
    if chi.kind == "product_with_free_b":
        if rho.shape[0] != chi.dim:
            raise ValueError("state dimension does not match d_a*d_b")
        rho_b = qmat.partial_trace(rho, chi.d_a, chi.d_b, keep="b")
        sigma = np.kron(np.eye(chi.d_a) / chi.d_a, rho_b)
        return measured_relative_entropy(m, rho, sigma)
    # hull
    p = entropy.outcome_probabilities(m, rho)
    q_cols = np.stack([entropy.outcome_probabilities(m, s) for s in chi.states], axis=1)
    value, _, _ = _fw_hull_min(qmat.probability_vector(p), q_cols, tol)
    return value


def certify_set_distance_continuity(m: Povm, chi: ConvexStateSet, rho, sigma,
                                    kappa: float, tol: float = 1e-7) -> BoundReport:
    """|Z(rho) - Z(sigma)| against g(eps) + eps*kappa, Z the set distance under M.

    kappa is caller-supplied; log d is safe whenever 1/d lies in chi.  An
    infinite Z against a finite bound marks the report failed_precondition
    instead of counting as a violation.
    """
    rho = qmat.density(rho)
    sigma = qmat.density(sigma)
    z_rho = min_rel_entropy_to_set(m, rho, chi, tol)
    z_sigma = min_rel_entropy_to_set(m, sigma, chi, tol)
    eps = qmat.trace_distance(rho, sigma)
    rhs = afw_bound(eps, kappa)
    if math.isinf(z_rho) and math.isinf(z_sigma):
        lhs = 0.0  # inf against inf: the difference is declared closed
    elif math.isinf(z_rho) or math.isinf(z_sigma):
        lhs = math.inf
    else:
        lhs = abs(z_rho - z_sigma)
    return _make_report(lhs, rhs, eps, m.dim, kappa, "set_distance")


# ---------------------------------------------------------------------------
# conditional observational entropy

def conditional_oe(m_a: Povm, rho_ab, d_a: int, d_b: int) -> float:
    """S_{M_A}(A|B) = S_{M_A}(rho_A) - S(rho_B) + sum_j p_j S(rho_j).

    Evaluated through the measured classical-quantum state; agrees with the
    defining divergence log d_A - D((Phi (x) id) rho || (Phi (x) id)(1_A/d_A (x) rho_B))
    whenever the latter is finite, and lies in [0, log d_A].
    """
    rho_ab = qmat.density(rho_ab)
    if m_a.dim != d_a:
        raise ValueError(f"POVM dimension {m_a.dim} does not match d_a {d_a}")
    if rho_ab.shape[0] != d_a * d_b:
        raise ValueError(f"state dimension {rho_ab.shape[0]} is not d_a*d_b = {d_a * d_b}")
    cq = povm_algebra.partial_measure(m_a, rho_ab)
    rho_a = qmat.partial_trace(rho_ab, d_a, d_b, keep="a")
    rho_b = qmat.partial_trace(rho_ab, d_a, d_b, keep="b")
    s_a = observational_entropy(m_a, qmat.density(rho_a)).total
    s_b = entropy.von_neumann(qmat.density(rho_b))
    s_cond = sum(float(w) * entropy.von_neumann(c)
                 for w, c in zip(cq.weights, cq.conditionals) if w > 1e-12)
    return s_a - s_b + s_cond


@dataclass(frozen=True)
class VariationalCheck:
    """Comparison of conditional OE against its variational candidates."""

    value: float
    candidates: tuple
    worst_slack: float
    equality_gap: float
    ok: bool


def conditional_oe_variational_check(m_a: Povm, rho_ab, d_a: int, d_b: int,
                                     trial_states, tol: float = 1e-9) -> VariationalCheck:
    """Check log d_A - D(cq(rho) || cq(1/d_A (x) omega)) <= conditional_oe for trial omegas.

    rho_B is always appended to the trials, where the candidate must attain
    the value itself.  Candidates at -inf (support mismatch) satisfy the
    inequality trivially.
    """
    rho_ab = qmat.density(rho_ab)
    value = conditional_oe(m_a, rho_ab, d_a, d_b)
    cq_rho = povm_algebra.partial_measure(m_a, rho_ab)
    rho_b = qmat.density(qmat.partial_trace(rho_ab, d_a, d_b, keep="b"))
    log_da = math.log(d_a)

    def candidate(omega) -> float:
        ref = qmat.density(np.kron(np.eye(d_a) / d_a, qmat.density(omega)))
        div = povm_algebra.cq_relative_entropy(cq_rho, povm_algebra.partial_measure(m_a, ref))
        return -math.inf if math.isinf(div) else log_da - div

    cands = tuple(candidate(om) for om in trial_states) + (candidate(rho_b),)
    finite = [c for c in cands if math.isfinite(c)]
    worst = min(value - c for c in finite) if finite else math.inf
    eq_gap = abs(value - cands[-1])
    return VariationalCheck(
        value=value,
        candidates=cands,
        worst_slack=worst,
        equality_gap=eq_gap,
        ok=(worst >= -tol) and (eq_gap <= tol),
    )


def certify_conditional_continuity(m_a: Povm, rho, sigma, d_a: int, d_b: int) -> BoundReport:
    """|S_{M_A}(A|B)_rho - S_{M_A}(A|B)_sigma| against g(eps) + eps log d_A.

    The kappa here is log d_A, half the factor appearing in the analogous
    bound for the fully quantum conditional entropy.
    """
    rho = qmat.density(rho)
    sigma = qmat.density(sigma)
    lhs = abs(conditional_oe(m_a, rho, d_a, d_b) - conditional_oe(m_a, sigma, d_a, d_b))
    eps = qmat.trace_distance(rho, sigma)
    kappa = math.log(d_a)
    return _make_report(lhs, afw_bound(eps, kappa), eps, d_a * d_b, kappa, "conditional")


# ---------------------------------------------------------------------------
# divergence restricted to a measurement class

@dataclass(frozen=True)
class RestrictedDivergence:
    """sup over a finite measurement list of the set distance, plus a duality probe.

    value is the sup_inf order (exact over the generators, each inner inf
    Frank-Wolfe certified); gap reports how far an alternating inf_sup
    estimate sits above it, >= -tol by weak duality up to solver tolerance.
    """

    value: float
    order: str
    gap: float


def restricted_divergence(rho, chi: ConvexStateSet, ms, tol: float = 1e-7) -> RestrictedDivergence:
    """Divergence of rho from chi measured by the worst measurement among ms.

    The measurement class generated by ms is closed under flagged convex
    combination, under which the divergence is the weight-average of the
    members'; the sup over the class is therefore attained on the generator
    list and value = max_k min_{sigma in chi} D_{M_k}(rho||sigma).
    """
    if not ms:
        raise ValueError("empty measurement list")
    if chi.kind == "product_with_free_b":
        raise ValueError("product_with_free_b sets belong to the conditional-entropy ops")
    rho = qmat.density(rho)
    values = [min_rel_entropy_to_set(m, rho, chi, tol) for m in ms]
    value = max(values)
    if math.isinf(value):
        return RestrictedDivergence(value=value, order="sup_inf", gap=0.0)

    if chi.kind in ("singleton", "max_mixed"):
        # one-point chi: inf_sup and sup_inf coincide on the nose
        return RestrictedDivergence(value=value, order="sup_inf", gap=0.0)

    # hull: projected-subgradient descent of w -> max_k D_{M_k}(rho || sum_j w_j v_j)
    p_list = [entropy.outcome_probabilities(m, rho) for m in ms]
    q_mats = [np.stack([entropy.outcome_probabilities(m, s) for s in chi.states], axis=1)
              for m in ms]
    n_vert = len(chi.states)

    def phi_and_grad(w):
        worst, grad = -math.inf, None
        for p, q_cols in zip(p_list, q_mats):
            keep = p > 0.0
            q = q_cols[keep, :] @ w
            if np.any(q <= 0.0):
                return math.inf, None
            ps = p[keep]
            val = float((ps * np.log(ps / q)).sum())
            if val > worst:
                worst = val
                grad = -(q_cols[keep, :].T @ (ps / q))
        return worst, grad

    w = np.full(n_vert, 1.0 / n_vert)
    best = phi_and_grad(w)[0]
    if math.isinf(best):
        # uniform weights miss the support; bail out with the trivial estimate
        return RestrictedDivergence(value=value, order="sup_inf", gap=math.inf)
    step0 = 0.5
    for t in range(400):
        val, grad = phi_and_grad(w)
        if math.isinf(val):
            w = 0.5 * (w + np.full(n_vert, 1.0 / n_vert))
            continue
        best = min(best, val)
        scale = max(float(np.abs(grad).max()), 1e-15)
        w = qmat.project_simplex(w - (step0 / (scale * math.sqrt(t + 1.0))) * grad)
    return RestrictedDivergence(value=value, order="sup_inf", gap=best - value)


def certify_restricted_continuity(rho, rho_prime, chi: ConvexStateSet, ms,
                                  kappa: float, tol: float = 1e-7) -> BoundReport:
    """|Z(rho) - Z(rho')| for the restricted divergence against g(eps) + eps*kappa."""
    rho = qmat.density(rho)
    rho_prime = qmat.density(rho_prime)
    z = restricted_divergence(rho, chi, ms, tol).value
    z_prime = restricted_divergence(rho_prime, chi, ms, tol).value
    eps = qmat.trace_distance(rho, rho_prime)
    rhs = afw_bound(eps, kappa)
    if math.isinf(z) and math.isinf(z_prime):
        lhs = 0.0
    elif math.isinf(z) or math.isinf(z_prime):
        lhs = math.inf
    else:
        lhs = abs(z - z_prime)
    return _make_report(lhs, rhs, eps, rho.shape[0], kappa, "restricted")
