import math

import numpy as np
import pytest

from loccdisc.core import canonicalize, random_instance
from loccdisc.errors import InputError
from loccdisc.optimum import CaseTag
from loccdisc.protocol import build_protocol
from loccdisc.simulate import CHUNK, simulate

from conftest import KET0, KET1, PLUS, ket, random_orthogonal_pair


def test_orthogonal_is_perfect():
    inst = canonicalize(ket(KET0, KET0), ket(KET1, KET1), 0.4)
    rep = simulate(build_protocol(inst), trials=10_000, seed=0)
    assert rep.empirical_success == 1.0
    assert rep.count_inconclusive == 0 and rep.count_error == 0


def test_entangled_orthogonal_is_perfect(rng):
    phi, psi = random_orthogonal_pair(3, 3, rng)
    rep = simulate(build_protocol(canonicalize(phi, psi, 0.5)), trials=10_000, seed=4)
    assert rep.empirical_success == 1.0
    assert rep.count_error == 0


def test_identical_never_concludes():
    inst = canonicalize(ket(KET0, PLUS), ket(KET0, PLUS), 0.3)
    rep = simulate(build_protocol(inst), trials=5000, seed=2)
    assert rep.empirical_success == 0.0
    assert rep.count_inconclusive == 5000


def test_binomial_bound_seed23():
    inst = random_instance(3, 3, 0.4, seed=23)
    proto = build_protocol(inst)
    assert proto.case is CaseTag.LINEAR
    n = 100_000
    rep = simulate(proto, trials=n, seed=23)
    p = proto.analytic_success
    assert abs(rep.empirical_success - p) <= 5 * math.sqrt(p * (1 - p) / n)
    assert rep.count_error == 0


def test_counts_add_up():
    proto = build_protocol(random_instance(2, 3, 0.2, seed=5))
    for trials in (1, 7, CHUNK, CHUNK + 3):
        rep = simulate(proto, trials=trials, seed=1)
        total = rep.count_correct_phi + rep.count_correct_psi + rep.count_inconclusive + rep.count_error
        assert total == trials


def test_deterministic():
    proto = build_protocol(random_instance(3, 2, 0.3, seed=9))
    assert simulate(proto, trials=40_000, seed=8) == simulate(proto, trials=40_000, seed=8)
    assert simulate(proto, trials=40_000, seed=8) != simulate(proto, trials=40_000, seed=9)


def test_prior_frequencies():
    inst = random_instance(2, 2, 0.25, seed=3)
    rep = simulate(build_protocol(inst), trials=100_000, seed=0)
    # phi is never mistaken, so correct-phi counts are bounded by phi preparations
    assert rep.count_correct_phi <= 0.25 * 100_000 + 5 * math.sqrt(0.25 * 0.75 * 100_000)


def test_rejects_zero_trials():
    proto = build_protocol(random_instance(2, 2, 0.3, seed=0))
    with pytest.raises(InputError):
        simulate(proto, trials=0)
