"""Scripted demonstrations: closed forms, scans, probes, spot checks."""

import math

import numpy as np
import pytest

from obsentropy import entropy, experiments, povm_algebra, qmat
from tests.conftest import projective_povm


class TestMixingFamily:
    def test_construction(self):
        rho, m, m_swapped, m_lam = experiments.mixing_family(4, 0.3)
        assert np.allclose(np.trace(rho), 1.0)
        assert len(m) == len(m_swapped) == len(m_lam) == 2
        assert np.allclose(m.elements[0], m_swapped.elements[1], atol=1e-12)
        assert np.allclose(m_lam.elements,
                           0.7 * m.elements + 0.3 * m_swapped.elements, atol=1e-12)

    def test_closed_form_matches_direct_evaluation(self):
        for d in (2, 3, 5):
            for lam in (0.0, 0.1, 0.35, 0.5):
                rho, _, _, m_lam = experiments.mixing_family(d, lam)
                direct = entropy.observational_entropy(m_lam, rho).total
                assert abs(direct - experiments.mixing_entropy(d, lam)) < 1e-12

    def test_entropy_special_points(self):
        for d in (2, 3, 6):
            assert experiments.mixing_entropy(d, 0.0) == 0.0
            assert abs(experiments.mixing_entropy(d, 0.5) - math.log(d)) < 1e-12
        # d = 2 keeps both volumes at 1, so only the Shannon part survives
        assert abs(experiments.mixing_entropy(2, 0.2) - entropy.binary_h(0.2)) < 1e-12

    def test_both_endpoints_measure_perfectly(self):
        rho, m, m_swapped, _ = experiments.mixing_family(5, 0.2)
        assert abs(entropy.observational_entropy(m, rho).total) < 1e-12
        assert abs(entropy.observational_entropy(m_swapped, rho).total) < 1e-12


class TestSweep:
    def test_rows_and_invariants(self):
        rows = experiments.example1_sweep([2, 3], np.linspace(0.0, 0.5, 11))
        assert len(rows) == 22
        for r in rows:
            assert abs(r.p0 + r.p1 - 1.0) < 1e-12
            assert abs(r.v0 + r.v1 - r.d) < 1e-9
            assert 0.0 <= r.ratio_to_logd <= 1.0 + 1e-12

    def test_lambda_half_hits_log_d(self):
        rows = experiments.example1_sweep([4], [0.5])
        assert abs(rows[0].s_lambda - math.log(4)) < 1e-12
        assert abs(rows[0].ratio_to_logd - 1.0) < 1e-12

    def test_lambda_grid_outside_range_rejected(self):
        with pytest.raises(ValueError):
            experiments.example1_sweep([2], [0.6])


class TestNoGoScan:
    def test_ratio_columns(self):
        scan = experiments.no_go_scan(0.5, [2, 4, 8])
        for d, ratio in scan.rows:
            assert abs(ratio - 1.0) < 1e-12

    def test_lambda_zero_gives_zero(self):
        # a perfect measurement keeps the ratio at 0 for every d
        scan = experiments.no_go_scan(0.0, [2, 4])
        assert all(abs(r) < 1e-12 for _, r in scan.rows)

    def test_monotone_and_threshold_bookkeeping(self):
        dims = [2 ** k for k in range(2, 20)] + [10 ** 6]
        scan = experiments.no_go_scan(0.05, dims, threshold=0.9)
        ratios = [r for _, r in scan.rows]
        assert scan.monotone
        assert all(b >= a - 1e-12 for a, b in zip(ratios, ratios[1:]))
        # at lambda = 0.05 the ratio is still ~0.81 at d = 10^6
        assert abs(ratios[-1] - 0.8082) < 5e-4
        assert scan.first_dim_over is None
        assert abs(scan.delta - (1.0 - max(ratios))) < 1e-12

    def test_small_dims_step_down_first(self):
        # from d = 2 the first step decreases, so the flag reports it
        scan = experiments.no_go_scan(0.05, [2, 4, 8])
        assert not scan.monotone

    def test_first_dim_over_when_attainable(self):
        scan = experiments.no_go_scan(0.4, [2, 4, 16, 256], threshold=0.9)
        assert scan.first_dim_over is not None

    def test_dims_must_ascend(self):
        with pytest.raises(ValueError):
            experiments.no_go_scan(0.1, [4, 2])


class TestConcavityDemo:
    def test_gap_equals_family_entropy(self):
        for d, lam in ((2, 0.25), (6, 0.4), (100, 0.5)):
            rep = experiments.concavity_violation_demo(d, lam)
            assert abs(rep.quantity_lhs - experiments.mixing_entropy(d, lam)) < 1e-9
            assert rep.bound_kind == "concavity"

    def test_violation_flagged_at_large_d(self):
        # gap log d dwarfs the naive mixing-entropy bound h(lambda)
        rep = experiments.concavity_violation_demo(1000, 0.5)
        assert rep.quantity_lhs > rep.bound_rhs
        assert not rep.passes(1e-9)

    def test_no_violation_at_d_two(self):
        rep = experiments.concavity_violation_demo(2, 0.3)
        assert rep.passes(1e-9)


class TestChannelProbe:
    def test_flags_on_generic_instance(self, rng):
        rho = qmat.random_density(3, 3, rng)
        sigma = qmat.random_density(3, 3, rng)
        m = qmat.random_povm(3, 3, rng)
        probe = experiments.channel_continuity_probe(rho, sigma, m,
                                                     np.linspace(0.05, 0.95, 19))
        assert probe.all_never_increase
        assert probe.monotone
        assert probe.f_full >= max(r.f_s for r in probe.rows) - 1e-9
        # the claimed fractional bound fails generically; rows record it honestly
        assert probe.all_fraction_bound == all(r.fraction_bound for r in probe.rows)

    def test_sigma_equal_rho_collapses(self, rng):
        rho = qmat.random_density(2, 2, rng)
        m = qmat.random_povm(2, 2, rng)
        probe = experiments.channel_continuity_probe(rho, rho, m, [0.25, 0.5])
        assert probe.f_full == 0.0
        assert all(abs(r.f_s) < 1e-12 for r in probe.rows)
        assert probe.all_fraction_bound

    def test_infinite_divergence_rejected(self):
        rho = np.diag([1.0, 0.0]).astype(complex)
        sigma = np.diag([0.0, 1.0]).astype(complex)
        m = projective_povm(2)
        with pytest.raises(ValueError):
            experiments.channel_continuity_probe(rho, sigma, m, [0.5])

    def test_grid_validation(self, rng):
        rho = qmat.random_density(2, 2, rng)
        sigma = qmat.random_density(2, 2, rng)
        m = qmat.random_povm(2, 2, rng)
        with pytest.raises(ValueError):
            experiments.channel_continuity_probe(rho, sigma, m, [0.0, 0.5])

    def test_uniform_noise_povm(self):
        m = experiments.uniform_noise_povm(3, 4)
        assert len(m) == 4
        assert np.allclose(m.elements, np.eye(3) / 4)


class TestGammaProbe:
    def test_rows_on_family_pairs(self, rng):
        rho = qmat.random_density(2, 2, rng)
        sigma = qmat.random_density(2, 2, rng)
        pairs = []
        for lam in (0.2, 0.4):
            _, m, _, m_lam = experiments.mixing_family(2, lam)
            pairs.append((m_lam, m))
        rows = experiments.gamma_continuity_probe(rho, sigma, pairs)
        assert len(rows) == 2
        for r in rows:
            assert r.gamma >= -1e-12
            assert abs(r.diff - abs(r.d_m - r.d_n)) < 1e-12

    def test_identical_pair_gives_zero_row(self, rng):
        rho = qmat.random_density(2, 2, rng)
        sigma = qmat.random_density(2, 2, rng)
        m = qmat.random_povm(2, 2, rng)
        rows = experiments.gamma_continuity_probe(rho, sigma, [(m, m)])
        assert rows[0].gamma <= 1e-6
        assert rows[0].diff <= 1e-12

    def test_refined_pair_gives_zero_gamma_and_equal_divergence(self, rng):
        rho = qmat.random_density(2, 2, rng)
        sigma = qmat.random_density(2, 2, rng)
        m = qmat.random_povm(2, 2, rng)
        rows = experiments.gamma_continuity_probe(
            rho, sigma, [(m, povm_algebra.refine_split(m))])
        assert rows[0].gamma <= 1e-6
        assert rows[0].diff <= 1e-10


class TestMinimax:
    def test_canonical_instances_within_bound(self):
        for name, rho, chi, ms in experiments.minimax_instances():
            gap = experiments.minimax_spot_check(rho, chi, ms)
            assert gap <= 5e-3, name

    def test_generator_count_capped(self, rng):
        from obsentropy.bounds import ConvexStateSet
        rho = qmat.random_density(2, 2, rng)
        chi = ConvexStateSet.max_mixed(2)
        ms = [qmat.random_povm(2, 2, rng) for _ in range(4)]
        with pytest.raises(ValueError):
            experiments.minimax_spot_check(rho, chi, ms)


class TestRefinementPathology:
    def test_table_shape_and_freeze(self, rng):
        m = projective_povm(4)
        rho = qmat.random_density(4, 4, rng)
        sigma = qmat.random_density(4, 3, rng)
        rows = experiments.refinement_pathology(m, rho, sigma, iterations=10)
        assert len(rows) == 11
        assert rows[0].outcomes == 4 and rows[-1].outcomes == 4 * 2 ** 10
        diffs = [r.entropy_diff for r in rows]
        assert max(diffs) - min(diffs) < 1e-10
        assert all(r.all_volumes_le_1 for r in rows)
        naive = [r.naive_rhs for r in rows]
        assert all(b > a for a, b in zip(naive, naive[1:]))
        afw = {r.afw_rhs for r in rows}
        assert len(afw) == 1
