import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from loccdisc.core import (
    BipartiteState,
    Measurement,
    Outcome,
    PriorPair,
    Tolerances,
    canonicalize,
    haar_vector,
    overlap,
    random_instance,
    validate_measurement,
)
from loccdisc.errors import InputError

from conftest import KET0, KET1, PLUS, ket


class TestOverlap:
    def test_identity(self):
        assert overlap(ket(KET0, KET0), ket(KET0, KET0)) == 1

    def test_orthogonal_basis_vectors(self):
        assert overlap(ket(KET0, KET0), ket(KET1, KET1)) == 0

    def test_half_superposition(self):
        assert overlap(ket(KET0, KET0), ket(KET0, PLUS)) == pytest.approx(1 / math.sqrt(2), abs=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(InputError):
            overlap(ket(KET0, KET0), BipartiteState(1, 4, [1, 0, 0, 0]))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 10_000), st.integers(1, 4), st.integers(1, 4))
    def test_conjugate_symmetric(self, seed, da, db):
        rng = np.random.default_rng(seed)
        a = BipartiteState(da, db, haar_vector(da * db, rng))
        b = BipartiteState(da, db, haar_vector(da * db, rng))
        assert overlap(a, b) == np.conj(overlap(b, a))


class TestCanonicalize:
    def test_swaps_heavier_phi(self, rng):
        phi = BipartiteState(2, 2, haar_vector(4, rng))
        psi = BipartiteState(2, 2, haar_vector(4, rng))
        inst = canonicalize(phi, psi, 0.7)
        assert inst.prior.swapped
        assert inst.s == pytest.approx(0.3)
        assert inst.t == pytest.approx(0.7)
        # phi slot now holds the caller's psi
        np.testing.assert_array_equal(inst.phi.amplitudes, psi.amplitudes)

    def test_removes_phase(self):
        phase = complex(math.cos(math.pi / 3), math.sin(math.pi / 3))
        inst = canonicalize(ket(KET0, KET0), ket(KET0, KET0).scaled(phase), 0.5)
        assert inst.overlap == pytest.approx(1.0, abs=1e-15)
        np.testing.assert_allclose(inst.psi.amplitudes, [1, 0, 0, 0], atol=1e-15)
        assert not inst.prior.swapped

    def test_orthogonal_untouched(self):
        phi, psi = ket(KET0, KET0), ket(KET1, KET1)
        inst = canonicalize(phi, psi, 0.4)
        assert inst.overlap == 0
        np.testing.assert_array_equal(inst.psi.amplitudes, psi.amplitudes)
        assert inst.s == 0.4

    def test_rejects_unnormalized(self):
        with pytest.raises(InputError):
            canonicalize(ket(KET0, KET0).scaled(1.1), ket(KET1, KET1), 0.5)

    def test_rejects_bad_prior(self):
        with pytest.raises(InputError):
            canonicalize(ket(KET0, KET0), ket(KET1, KET1), 1.5)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10_000), st.integers(1, 5), st.integers(1, 5), st.floats(0, 1))
    def test_invariants_and_idempotence(self, seed, da, db, s):
        inst = random_instance(da, db, s, seed)
        ov = overlap(inst.phi, inst.psi)
        assert abs(ov.imag) <= 1e-12
        assert ov.real >= 0
        assert inst.s <= inst.t
        assert inst.s + inst.t == pytest.approx(1, abs=1e-12)
        again = canonicalize(inst.phi, inst.psi, inst.s)
        assert np.max(np.abs(again.psi.amplitudes - inst.psi.amplitudes)) <= 1e-12
        assert abs(again.overlap - inst.overlap) <= 1e-12
        assert not again.prior.swapped


class TestRandomInstance:
    def test_deterministic(self):
        a = random_instance(2, 2, 0.5, seed=1)
        b = random_instance(2, 2, 0.5, seed=1)
        np.testing.assert_array_equal(a.phi.amplitudes, b.phi.amplitudes)
        np.testing.assert_array_equal(a.psi.amplitudes, b.psi.amplitudes)

    def test_contract(self):
        inst = random_instance(3, 4, 0.3, seed=7)
        assert inst.dims == (3, 4)
        assert abs(inst.phi.norm() - 1) <= 1e-10
        assert abs(inst.psi.norm() - 1) <= 1e-10

    def test_seed_changes_output(self):
        a = random_instance(2, 2, 0.5, seed=1)
        b = random_instance(2, 2, 0.5, seed=2)
        assert not np.array_equal(a.phi.amplitudes, b.phi.amplitudes)

    def test_rotation_invariant_moments(self):
        # |v_k|^2 of a uniform unit vector in C^n is Beta(1, n-1): mean 1/n
        rng = np.random.default_rng(3)
        samples = np.array([np.abs(haar_vector(4, rng)) ** 2 for _ in range(4000)])
        np.testing.assert_allclose(samples.mean(axis=0), 0.25, atol=0.01)


class TestPriorPair:
    def test_sum_enforced(self):
        with pytest.raises(InputError):
            PriorPair(0.3, 0.6)

    def test_canonical_flag(self):
        assert PriorPair(0.3, 0.7).is_canonical
        assert not PriorPair(0.7, 0.3).is_canonical


class TestTolerances:
    def test_defaults(self):
        tol = Tolerances()
        assert tol.sweeps_for(3) == 90

    def test_positive(self):
        with pytest.raises(InputError):
            Tolerances(eps_opt=0)


class TestValidateMeasurement:
    def test_identity(self):
        m = Measurement(((Outcome.INCONCLUSIVE, np.eye(2)),))
        assert validate_measurement(m).ok

    def test_projective(self):
        m = Measurement(
            (
                (Outcome.CONCLUDE_PHI, np.diag([1, 0])),
                (Outcome.CONCLUDE_PSI, np.diag([0, 1])),
            )
        )
        assert validate_measurement(m).ok

    def test_completeness_violation(self):
        m = Measurement(
            (
                (Outcome.CONCLUDE_PHI, 1.5 * np.diag([1, 0])),
                (Outcome.CONCLUDE_PSI, np.diag([0, 1])),
            )
        )
        verdict = validate_measurement(m)
        assert not verdict.ok
        assert verdict.completeness == pytest.approx(0.5)
        assert any("identity" in v for v in verdict.violations)

    def test_negative_and_non_hermitian(self):
        m = Measurement(
            (
                (Outcome.CONCLUDE_PHI, np.array([[1, 0.5], [0, 0]])),
                (Outcome.CONCLUDE_PSI, np.diag([0.2, 1.2])),
                (Outcome.INCONCLUSIVE, np.diag([-0.2, -0.2])),
            )
        )
        verdict = validate_measurement(m)
        assert not verdict.ok
        assert verdict.min_eigenvalue < 0
        assert verdict.hermiticity == pytest.approx(0.5)
