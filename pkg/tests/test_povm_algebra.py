"""Measurement algebra: combination, postprocessing, classical-quantum states."""

import math

import numpy as np
import pytest
import scipy.linalg

from obsentropy import entropy, povm_algebra, qmat
from tests.conftest import projective_povm, random_instance


class TestCombinations:
    def test_convex_combine_mixes_distributions(self, rng):
        m1 = qmat.random_povm(3, 4, rng)
        m2 = qmat.random_povm(3, 4, rng)
        rho = qmat.random_density(3, 3, rng)
        mix = povm_algebra.convex_combine([m1, m2], [0.3, 0.7])
        p = povm_algebra.measure_distribution(mix, rho)
        q = (0.3 * povm_algebra.measure_distribution(m1, rho)
             + 0.7 * povm_algebra.measure_distribution(m2, rho))
        assert np.allclose(p, q, atol=1e-12)

    def test_convex_combine_rejects_mismatched_outcomes(self, rng):
        with pytest.raises(ValueError):
            povm_algebra.convex_combine(
                [qmat.random_povm(2, 2, rng), qmat.random_povm(2, 3, rng)], [0.5, 0.5])

    def test_disjoint_combine_distribution_and_labels(self, rng):
        m1 = qmat.random_povm(2, 2, rng)
        m2 = qmat.random_povm(2, 3, rng)
        rho = qmat.random_density(2, 2, rng)
        mix = povm_algebra.disjoint_combine([m1, m2], [0.25, 0.75])
        assert len(mix) == 5
        assert mix.labels[0].startswith("0:") and mix.labels[-1].startswith("1:")
        p = povm_algebra.measure_distribution(mix, rho)
        expect = np.concatenate([0.25 * povm_algebra.measure_distribution(m1, rho),
                                 0.75 * povm_algebra.measure_distribution(m2, rho)])
        assert np.allclose(p, expect, atol=1e-12)

    def test_disjoint_combine_averages_divergence(self, rng):
        # flagged mixture: D_{disjoint} = sum_k lambda_k D_{M_k}
        rho = qmat.random_density(3, 3, rng)
        sigma = qmat.random_density(3, 3, rng)
        ms = [qmat.random_povm(3, 3, rng) for _ in range(3)]
        lam = np.array([0.2, 0.3, 0.5])
        mix = povm_algebra.disjoint_combine(ms, lam)
        direct = entropy.measured_relative_entropy(mix, rho, sigma)
        avg = sum(w * entropy.measured_relative_entropy(m, rho, sigma)
                  for w, m in zip(lam, ms))
        assert abs(direct - avg) < 1e-10

    def test_refine_split_doubles_outcomes_and_keeps_entropy(self):
        for trial in range(50):
            _, d, m, rho, sigma = random_instance(31, trial)
            split = povm_algebra.refine_split(m)
            assert len(split) == 2 * len(m)
            s0 = entropy.observational_entropy(m, rho).total
            s1 = entropy.observational_entropy(split, rho).total
            assert abs(s0 - s1) < 1e-10
            d0 = entropy.measured_relative_entropy(m, rho, sigma)
            d1 = entropy.measured_relative_entropy(split, rho, sigma)
            assert abs(d0 - d1) < 1e-10

    def test_refine_split_labels(self):
        split = povm_algebra.refine_split(projective_povm(2))
        assert split.labels == ("0:a", "1:a", "0:b", "1:b")


class TestStochasticMaps:
    def test_column_sums_validated(self):
        with pytest.raises(ValueError):
            povm_algebra.StochasticMap(np.array([[0.5, 0.2], [0.4, 0.8]]))

    def test_negative_entries_rejected(self):
        with pytest.raises(ValueError):
            povm_algebra.StochasticMap(np.array([[1.5], [-0.5]]))

    def test_identity_map_is_noop(self, rng):
        m = qmat.random_povm(3, 4, rng)
        out = povm_algebra.postprocess(povm_algebra.identity_map(4), m)
        assert np.allclose(out.elements, m.elements, atol=1e-12)

    def test_merge_map_gives_trivial_povm(self, rng):
        m = qmat.random_povm(3, 4, rng)
        out = povm_algebra.postprocess(povm_algebra.merge_map(4), m)
        assert len(out) == 1
        assert np.allclose(out.elements[0], np.eye(3), atol=1e-9)

    def test_split_map_matches_refine_split_elements(self, rng):
        m = qmat.random_povm(2, 3, rng)
        via_map = povm_algebra.postprocess(povm_algebra.split_map(3), m)
        via_refine = povm_algebra.refine_split(m)
        assert np.allclose(np.sort(via_map.elements.reshape(6, -1), axis=0),
                           np.sort(via_refine.elements.reshape(6, -1), axis=0), atol=1e-12)

    def test_postprocess_transforms_distribution(self, rng):
        m = qmat.random_povm(3, 4, rng)
        rho = qmat.random_density(3, 2, rng)
        lam = povm_algebra.StochasticMap(rng.dirichlet(np.ones(3), size=4).T)
        p = povm_algebra.measure_distribution(m, rho)
        q = povm_algebra.measure_distribution(povm_algebra.postprocess(lam, m), rho)
        assert np.allclose(q, lam.entries @ p, atol=1e-12)

    def test_postprocess_data_processing(self, rng):
        # divergence never increases under outcome postprocessing
        for _ in range(30):
            m = qmat.random_povm(3, 5, rng)
            rho = qmat.random_density(3, 3, rng)
            sigma = qmat.random_density(3, 3, rng)
            lam = povm_algebra.StochasticMap(rng.dirichlet(np.ones(3), size=5).T)
            before = entropy.measured_relative_entropy(m, rho, sigma)
            after = entropy.measured_relative_entropy(
                povm_algebra.postprocess(lam, m), rho, sigma)
            assert after <= before + 1e-10


def _embed(cq: povm_algebra.CqState) -> np.ndarray:
    """Block-diagonal density sum_j w_j |j><j| (x) rho_j."""
    blocks = [w * c for w, c in zip(cq.weights, cq.conditionals)]
    return scipy.linalg.block_diag(*blocks)


class TestCqStates:
    def test_partial_measure_weights_and_average(self, rng):
        m_a = qmat.random_povm(2, 3, rng)
        rho_ab = qmat.random_density(6, 6, rng)
        cq = povm_algebra.partial_measure(m_a, rho_ab)
        rho_a = qmat.partial_trace(rho_ab, 2, 3, keep="a")
        expect_w = povm_algebra.measure_distribution(m_a, qmat.density(rho_a))
        assert np.allclose(cq.weights, expect_w, atol=1e-12)
        rho_b = qmat.partial_trace(rho_ab, 2, 3, keep="b")
        assert np.allclose(cq.average_state(), rho_b, atol=1e-12)

    def test_partial_measure_product_state(self, rng):
        m_a = qmat.random_povm(2, 2, rng)
        rho_a = qmat.random_density(2, 2, rng)
        rho_b = qmat.random_density(3, 1, rng)
        cq = povm_algebra.partial_measure(m_a, np.kron(rho_a, rho_b))
        for w, c in zip(cq.weights, cq.conditionals):
            if w > 1e-12:
                assert np.allclose(c, rho_b, atol=1e-10)

    def test_partial_measure_oracle_blocks(self, rng):
        # conditionals against the direct formula tr_A[(M_j (x) 1) rho] / p_j
        m_a = qmat.random_povm(3, 4, rng)
        rho_ab = qmat.random_density(6, 5, rng)
        cq = povm_algebra.partial_measure(m_a, rho_ab)
        rho = qmat.density(rho_ab)
        for j in range(4):
            big = np.kron(m_a.elements[j], np.eye(2))
            block = qmat.partial_trace(big @ rho, 3, 2, keep="b")
            w = np.trace(block).real
            assert abs(w - cq.weights[j]) < 1e-12
            if w > 1e-12:
                assert np.allclose(block / w, cq.conditionals[j], atol=1e-10)

    def test_cq_json_roundtrip(self, rng):
        cq = povm_algebra.partial_measure(qmat.random_povm(2, 2, rng),
                                          qmat.random_density(4, 4, rng))
        back = povm_algebra.CqState.from_json(cq.to_json())
        assert np.allclose(back.weights, cq.weights)
        assert np.allclose(back.conditionals, cq.conditionals)
        assert back.outcome_labels == cq.outcome_labels

    def test_cq_relative_entropy_matches_embedding(self, rng):
        # oracle: the divergence of the block-diagonal embeddings
        for _ in range(25):
            m_a = qmat.random_povm(2, 3, rng)
            a = povm_algebra.partial_measure(m_a, qmat.random_density(4, 4, rng))
            b = povm_algebra.partial_measure(m_a, qmat.random_density(4, 4, rng))
            direct = povm_algebra.cq_relative_entropy(a, b)
            oracle = entropy.relative_entropy_quantum(qmat.density(_embed(a)),
                                                      qmat.density(_embed(b)))
            assert abs(direct - oracle) < 1e-8

    def test_cq_relative_entropy_infinite_on_weight_mismatch(self, rng):
        m_a = projective_povm(2)
        rho = np.kron(np.diag([1.0, 0.0]), np.eye(2) / 2).astype(complex)
        sigma = np.kron(np.diag([0.0, 1.0]), np.eye(2) / 2).astype(complex)
        a = povm_algebra.partial_measure(m_a, rho)
        b = povm_algebra.partial_measure(m_a, sigma)
        assert math.isinf(povm_algebra.cq_relative_entropy(a, b))

    def test_cq_relative_entropy_zero_on_self(self, rng):
        cq = povm_algebra.partial_measure(qmat.random_povm(2, 2, rng),
                                          qmat.random_density(6, 6, rng))
        assert abs(povm_algebra.cq_relative_entropy(cq, cq)) < 1e-9
