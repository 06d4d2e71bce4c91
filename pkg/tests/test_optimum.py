import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from loccdisc.core import Outcome, PriorPair, haar_vector, validate_measurement
from loccdisc.errors import InputError
from loccdisc.optimum import (
    CaseTag,
    brute_force_pmax,
    measurement_errors,
    measurement_success,
    orthogonal_measurement,
    pmax,
    two_state_success,
    udd_measurement,
)

from conftest import KET0, KET1, MINUS, PLUS

INV_SQRT2 = 1 / math.sqrt(2)


def pair_with_overlap(c, dim=2, rng=None):
    if rng is None:
        return KET0, c * KET0 + math.sqrt(1 - c * c) * KET1
    eta = haar_vector(dim, rng)
    perp = haar_vector(dim, rng)
    perp = perp - np.vdot(eta, perp) * eta
    perp /= np.linalg.norm(perp)
    return eta, c * eta + math.sqrt(max(1 - c * c, 0)) * perp


class TestPmax:
    def test_orthogonal(self):
        r = pmax(PriorPair(0.5, 0.5), 0.0)
        assert r.value == 1.0
        assert r.case is CaseTag.LINEAR

    def test_linear_equal_priors(self):
        r = pmax(PriorPair(0.5, 0.5), INV_SQRT2)
        assert r.value == pytest.approx(1 - INV_SQRT2, abs=1e-15)
        assert r.case is CaseTag.LINEAR

    def test_quadratic(self):
        r = pmax(PriorPair(0.1, 0.9), 0.5)
        assert r.value == pytest.approx(0.675, abs=1e-15)
        assert r.case is CaseTag.QUADRATIC

    def test_boundary_formulas_agree(self):
        r = pmax(PriorPair(0.2, 0.8), 0.5)
        assert r.case is CaseTag.BOUNDARY
        assert r.value == pytest.approx(0.6, abs=1e-12)
        assert abs((1 - 2 * math.sqrt(0.16) * 0.5) - 0.8 * 0.75) <= 1e-12

    def test_overlap_above_one_rejected(self):
        with pytest.raises(InputError):
            pmax(PriorPair(0.5, 0.5), 1.01)

    def test_non_canonical_rejected(self):
        with pytest.raises(InputError):
            pmax(PriorPair(0.7, 0.3), 0.2)

    @pytest.mark.parametrize("s", [0.05, 0.2, 0.35, 0.5])
    def test_monotone_in_overlap(self, s):
        prior = PriorPair.from_s(s)
        values = [pmax(prior, c).value for c in np.linspace(0, 1, 201)]
        assert all(b <= a + 1e-15 for a, b in zip(values, values[1:]))

    @settings(max_examples=200, deadline=None)
    @given(st.floats(1e-6, 1.0))
    def test_boundary_identity(self, c):
        t = 1 / (1 + c * c)
        s = 1 - t
        linear = 1 - 2 * math.sqrt(s * t) * c
        quadratic = t * (1 - c * c)
        assert abs(linear - quadratic) <= 1e-12
        assert abs(linear - (1 - c * c) / (1 + c * c)) <= 1e-12

    def test_two_state_success_order_free(self):
        assert two_state_success(0.9, 0.1, 0.5) == pytest.approx(0.675)
        assert two_state_success(0.1, 0.9, 0.5) == pytest.approx(0.675)


class TestUddMeasurement:
    def test_orthogonal_inputs(self):
        m = udd_measurement(KET0, KET1, 0.3, 0.7)
        assert measurement_success(m, KET0, KET1, 0.3, 0.7) == pytest.approx(1.0, abs=1e-12)
        assert validate_measurement(m).ok

    def test_three_outcome(self):
        m = udd_measurement(KET0, PLUS, 0.5, 0.5)
        assert len(m.operators) == 3
        assert measurement_success(m, KET0, PLUS, 0.5, 0.5) == pytest.approx(1 - INV_SQRT2, abs=1e-12)
        assert validate_measurement(m).ok
        assert max(measurement_errors(m, KET0, PLUS)) <= 1e-12

    def test_identical(self):
        m = udd_measurement(KET0, KET0, 0.3, 0.7)
        assert [label for label, _ in m.operators] == [Outcome.INCONCLUSIVE]
        np.testing.assert_array_equal(m.effect(Outcome.INCONCLUSIVE), np.eye(2))
        assert measurement_success(m, KET0, KET0, 0.3, 0.7) == 0

    def test_one_sided_regime(self):
        eta, gamma = pair_with_overlap(0.5)
        m = udd_measurement(eta, gamma, 0.1, 0.9)
        assert np.allclose(m.effect(Outcome.CONCLUDE_PHI), 0)
        assert measurement_success(m, eta, gamma, 0.1, 0.9) == pytest.approx(0.675, abs=1e-12)

    def test_mirrored_regime(self):
        eta, gamma = pair_with_overlap(0.5)
        m = udd_measurement(eta, gamma, 0.9, 0.1)
        assert np.allclose(m.effect(Outcome.CONCLUDE_PSI), 0)
        assert measurement_success(m, eta, gamma, 0.9, 0.1) == pytest.approx(0.675, abs=1e-12)

    def test_complex_overlap_rejected(self):
        with pytest.raises(InputError):
            udd_measurement(KET0, (KET0 + 1j * KET1) * INV_SQRT2 * np.exp(0.3j), 0.5, 0.5)

    def test_bad_weights_rejected(self):
        with pytest.raises(InputError):
            udd_measurement(KET0, PLUS, 0.5, 0.6)

    def test_random_samples(self):
        rng = np.random.default_rng(99)
        worst_gap = worst_err = 0.0
        for _ in range(1000):
            dim = int(rng.integers(2, 7))
            c = float(rng.uniform(0, 1))
            p = float(rng.uniform(0, 1))
            eta, gamma = pair_with_overlap(c, dim, rng)
            m = udd_measurement(eta, gamma, p, 1 - p)
            assert validate_measurement(m).ok
            worst_err = max(worst_err, *measurement_errors(m, eta, gamma))
            got = measurement_success(m, eta, gamma, p, 1 - p)
            worst_gap = max(worst_gap, abs(got - two_state_success(p, 1 - p, c)))
        assert worst_err <= 1e-10
        assert worst_gap <= 1e-9


class TestBruteForce:
    def test_orthogonal(self):
        assert brute_force_pmax(KET0, KET1, 0.5, 0.5) == pytest.approx(1.0, abs=1e-12)

    def test_linear_example(self):
        eta, gamma = pair_with_overlap(INV_SQRT2)
        assert abs(brute_force_pmax(eta, gamma, 0.5, 0.5) - 0.2929) <= 1e-3

    def test_fine_resolution(self):
        got = brute_force_pmax(KET0, PLUS, 0.5, 0.5, resolution=1e-4)
        assert abs(got - (1 - INV_SQRT2)) <= 2e-4

    def test_quadratic_example(self):
        eta, gamma = pair_with_overlap(0.5)
        assert abs(brute_force_pmax(eta, gamma, 0.1, 0.9) - 0.675) <= 1e-3

    def test_identical(self):
        assert brute_force_pmax(KET0, KET0, 0.3, 0.7) == 0.0

    def test_bad_resolution(self):
        with pytest.raises(InputError):
            brute_force_pmax(KET0, KET1, 0.5, 0.5, resolution=0)

    def test_never_exceeds_optimum(self):
        # a grid point is a valid POVM, so it cannot beat the closed form
        for c in np.linspace(0.05, 0.95, 10):
            eta, gamma = pair_with_overlap(c)
            for p in (0.1, 0.3, 0.5, 0.8):
                assert brute_force_pmax(eta, gamma, p, 1 - p) <= two_state_success(p, 1 - p, c) + 1e-12

    @settings(max_examples=25, deadline=None)
    @given(st.floats(0, 0.99), st.floats(0.01, 0.99), st.integers(0, 1000))
    def test_bisection_matches_exhaustive(self, c, p, seed):
        eta, gamma = pair_with_overlap(c, 3, np.random.default_rng(seed))
        fast = brute_force_pmax(eta, gamma, p, 1 - p, resolution=1e-2)
        full = brute_force_pmax(eta, gamma, p, 1 - p, resolution=1e-2, exhaustive=True)
        assert fast == full


class TestOrthogonalMeasurement:
    def test_computational_basis(self):
        m = orthogonal_measurement(KET0, KET1)
        np.testing.assert_allclose(m.effect(Outcome.CONCLUDE_PHI), np.diag([1, 0]))
        np.testing.assert_allclose(m.effect(Outcome.CONCLUDE_PSI), np.diag([0, 1]))

    def test_plus_minus(self):
        m = orthogonal_measurement(PLUS, MINUS)
        np.testing.assert_allclose(m.effect(Outcome.CONCLUDE_PHI), np.outer(PLUS, PLUS), atol=1e-15)
        np.testing.assert_allclose(m.effect(Outcome.CONCLUDE_PSI), np.outer(MINUS, MINUS), atol=1e-15)
        assert measurement_success(m, PLUS, MINUS, 0.4, 0.6) == pytest.approx(1.0)
        assert measurement_errors(m, PLUS, MINUS) == pytest.approx((0.0, 0.0), abs=1e-15)

    def test_non_orthogonal_rejected(self):
        with pytest.raises(InputError):
            orthogonal_measurement(KET0, KET0)
