"""Randomized certificate campaigns.

A campaign is a declarative config (seed, trials, dimensions, outcome
counts, bound kinds, pass tolerance) expanded into one row per (kind, trial)
pair.  Row i draws its instance from the counter-based stream keyed by
(seed, i), so rows are independent of execution order and of each other:
the same config yields byte-identical CSV whether run serially, in
parallel, or resumed.

Violations (slack below -tolerance on an "ok" report) are dumped to a JSON
witness file carrying the full instance for replay.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import bounds, qmat
from .bounds import ConvexStateSet

CSV_HEADER = "seed,d,epsilon,lhs,rhs,slack,kind"

KNOWN_KINDS = ("afw", "naive", "concavity", "conditional", "set_distance", "restricted")


@dataclass(frozen=True)
class CampaignConfig:
    seed: int
    trials: int
    dims: tuple = (2, 3, 4, 5, 6)
    outcome_counts: tuple = (1, 2, 3, 4, 5)
    bound_kinds: tuple = ("afw",)
    tolerance: float = 1e-9
    output_path: str = "campaign.csv"

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "outcome_counts", tuple(int(n) for n in self.outcome_counts))
        object.__setattr__(self, "bound_kinds", tuple(self.bound_kinds))
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not self.dims or any(not 2 <= d <= 16 for d in self.dims):
            raise ValueError("dims must lie within [2, 16]")
        if not self.outcome_counts or any(n < 1 for n in self.outcome_counts):
            raise ValueError("outcome counts must be positive")
        if self.tolerance <= 0.0:
            raise ValueError("tolerance must be positive")
        for kind in self.bound_kinds:
            if kind not in KNOWN_KINDS:
                raise ValueError(f"unknown bound kind {kind!r} (known: {', '.join(KNOWN_KINDS)})")


def _draw(rng, config: CampaignConfig):
    d = int(rng.choice(config.dims))
    n = int(rng.choice(config.outcome_counts))
    return d, n


def _rand_state(d, rng):
    return qmat.random_density(d, int(rng.integers(1, d + 1)), rng)


def run_trial(config: CampaignConfig, kind: str, index: int):
    """One certificate draw; returns (BoundReport, witness payload)."""
    rng = qmat.trial_rng(config.seed, index)
    fw_tol = min(config.tolerance / 10.0, 1e-7)
    if kind == "afw" or kind == "naive":
        d, n = _draw(rng, config)
        m = qmat.random_povm(d, n, rng)
        rho, sigma = _rand_state(d, rng), _rand_state(d, rng)
        if kind == "afw":
            report = bounds.certify_oe_continuity(m, rho, sigma)
        else:
            report = bounds.certify_naive_continuity(m, rho, sigma)
        witness = {"povm": qmat.povm_to_json(m), "rho": qmat.matrix_to_json(rho),
                   "sigma": qmat.matrix_to_json(sigma)}
    elif kind == "concavity":
        d, n = _draw(rng, config)
        m = qmat.random_povm(d, n, rng)
        k = int(rng.integers(2, 5))
        states = [_rand_state(d, rng) for _ in range(k)]
        lam = rng.dirichlet(np.ones(k))
        report = bounds.concavity_gap(m, states, lam)
        witness = {"povm": qmat.povm_to_json(m),
                   "states": [qmat.matrix_to_json(s) for s in states],
                   "weights": [float(x) for x in lam]}
    elif kind == "conditional":
        d_a, n = _draw(rng, config)
        d_b = int(rng.choice(config.dims))
        m_a = qmat.random_povm(d_a, n, rng)
        rho = _rand_state(d_a * d_b, rng)
        sigma = _rand_state(d_a * d_b, rng)
        report = bounds.certify_conditional_continuity(m_a, rho, sigma, d_a, d_b)
        witness = {"povm": qmat.povm_to_json(m_a), "d_a": d_a, "d_b": d_b,
                   "rho": qmat.matrix_to_json(rho), "sigma": qmat.matrix_to_json(sigma)}
    elif kind == "set_distance":
        d, n = _draw(rng, config)
        m = qmat.random_povm(d, n, rng)
        verts = [np.eye(d) / d] + [_rand_state(d, rng) for _ in range(int(rng.integers(1, 4)))]
        chi = ConvexStateSet.hull(verts)
        rho, sigma = _rand_state(d, rng), _rand_state(d, rng)
        report = bounds.certify_set_distance_continuity(m, chi, rho, sigma,
                                                        kappa=math.log(d), tol=fw_tol)
        witness = {"povm": qmat.povm_to_json(m), "chi": chi.to_json(),
                   "rho": qmat.matrix_to_json(rho), "sigma": qmat.matrix_to_json(sigma)}
    elif kind == "restricted":
        d, n = _draw(rng, config)
        ms = [qmat.random_povm(d, n, rng) for _ in range(int(rng.integers(2, 4)))]
        verts = [np.eye(d) / d] + [_rand_state(d, rng) for _ in range(int(rng.integers(1, 3)))]
        chi = ConvexStateSet.hull(verts)
        rho, sigma = _rand_state(d, rng), _rand_state(d, rng)
        report = bounds.certify_restricted_continuity(rho, sigma, chi, ms,
                                                      kappa=math.log(d), tol=fw_tol)
        witness = {"povms": [qmat.povm_to_json(m) for m in ms], "chi": chi.to_json(),
                   "rho": qmat.matrix_to_json(rho), "sigma": qmat.matrix_to_json(sigma)}
    else:
        raise ValueError(f"unknown bound kind {kind!r}")
    return report, witness


def _csv_row(config: CampaignConfig, report) -> str:
    return ",".join([
        repr(config.seed),
        repr(report.dim),
        repr(report.epsilon),
        repr(report.quantity_lhs),
        repr(report.bound_rhs),
        repr(report.slack),
        report.bound_kind,
    ])


def _run_chunk(args):
    config, tasks = args
    out = []
    for index, kind in tasks:
        report, witness = run_trial(config, kind, index)
        bad = not report.passes(config.tolerance)
        out.append((index, _csv_row(config, report),
                    {"trial": index, "kind": kind, "report": report.to_json(),
                     "instance": witness} if bad else None))
    return out


@dataclass(frozen=True)
class CampaignResult:
    rows: int
    violations: int
    csv_path: str
    witness_path: str | None = None
    witnesses: tuple = field(default=())


def run_campaign(config: CampaignConfig, jobs: int = 1,
                 witness_path: str | None = None) -> CampaignResult:
    """Expand the config, run every (kind, trial) row, write CSV and witnesses.

    Rows are written in trial-index order regardless of how many workers
    computed them, keeping output byte-identical for a fixed config.
    """
    tasks = [(i, kind)
             for i, kind in enumerate(k for k in config.bound_kinds
                                      for _ in range(config.trials))]
    if jobs <= 1 or len(tasks) < 2:
        results = _run_chunk((config, tasks))
    else:
        chunks = [tasks[c::jobs] for c in range(jobs)]
        results = []
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for part in pool.map(_run_chunk, [(config, ch) for ch in chunks if ch]):
                results.extend(part)
    results.sort(key=lambda r: r[0])

    witnesses = [w for _, _, w in results if w is not None]
    with open(config.output_path, "w") as f:
        f.write(CSV_HEADER + "\n")
        for _, row, _ in results:
            f.write(row + "\n")
    out_witness = None
    if witnesses and witness_path:
        qmat.save_json({"config": {
            "seed": config.seed, "trials": config.trials,
            "dims": list(config.dims), "outcome_counts": list(config.outcome_counts),
            "bound_kinds": list(config.bound_kinds), "tolerance": config.tolerance,
        }, "violations": witnesses}, witness_path)
        out_witness = witness_path
    return CampaignResult(rows=len(results), violations=len(witnesses),
                          csv_path=config.output_path, witness_path=out_witness,
                          witnesses=tuple(witnesses))
