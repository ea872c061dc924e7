"""Shared fixtures plus the acceptance-criteria scoreboard.

Acceptance tests report each criterion (or clause of one) through
``record_criterion``; the terminal summary then prints one PASS/FAIL line
per criterion, a criterion passing only if every recorded clause did.
"""

import numpy as np
import pytest

from obsentropy import qmat

_criteria = {}


def record_criterion(num: int, desc: str, ok: bool) -> None:
    entry = _criteria.setdefault(num, {"desc": desc, "clauses": []})
    entry["clauses"].append(bool(ok))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_criteria):
        entry = _criteria[num]
        ok = all(entry["clauses"])
        tag = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"[{tag}] criterion {num:2d}: {entry['desc']}")


@pytest.fixture
def rng():
    return qmat.rng_from_seed(1234)


def random_instance(seed, trial, dims=(2, 3, 4, 5, 6), outcomes=(1, 2, 3, 4, 5, 6, 7, 8)):
    """One (rng, d, POVM, rho, sigma) draw from the campaign stream."""
    gen = qmat.trial_rng(seed, trial)
    d = int(gen.choice(dims))
    n = int(gen.choice(outcomes))
    m = qmat.random_povm(d, n, gen)
    rho = qmat.random_density(d, int(gen.integers(1, d + 1)), gen)
    sigma = qmat.random_density(d, int(gen.integers(1, d + 1)), gen)
    return gen, d, m, rho, sigma


def projective_povm(d: int) -> qmat.Povm:
    basis = np.eye(d, dtype=complex)
    return qmat.Povm(np.stack([np.outer(basis[i], basis[i].conj()) for i in range(d)]))
