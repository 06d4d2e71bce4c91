"""Monte Carlo execution of a built protocol."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .core import DiscriminationInstance, Outcome
from .errors import InputError
from .protocol import LoccProtocol, bob_density, leaf_probabilities, leaves

CHUNK = 1 << 14
_ORDER = (Outcome.CONCLUDE_PHI, Outcome.CONCLUDE_PSI, Outcome.INCONCLUSIVE)


@dataclass(frozen=True)
class SimulationReport:
    trials: int
    count_correct_phi: int
    count_correct_psi: int
    count_inconclusive: int
    count_error: int
    empirical_success: float
    analytic_success: float
    seed: int

    def to_dict(self) -> dict:
        return asdict(self)


def _tables(protocol: LoccProtocol, instance: DiscriminationInstance):
    """Per prepared state: Alice's leaf probabilities and Bob's conditional outcome
    distributions, both from the Born rule on the actual vectors."""
    alice, bob = [], []
    for state in (instance.phi, instance.psi):
        leaf_p, cond = [], []
        for leaf in leaves(protocol):
            w = float(np.real(np.trace(bob_density(leaf.kraus, state))))
            probs = leaf_probabilities(leaf, state)
            row = np.array([max(probs[lab], 0.0) for lab in _ORDER])
            total = row.sum()
            cond.append(row / total if total > 0 else np.array([0.0, 0.0, 1.0]))
            leaf_p.append(max(w, 0.0))
        leaf_p = np.array(leaf_p)
        alice.append(leaf_p / leaf_p.sum())
        bob.append(np.cumsum(np.array(cond), axis=1))
    return alice, bob


def _run_chunk(n: int, rng: np.random.Generator, s: float, alice, bob) -> np.ndarray:
    """Counts (correct phi, correct psi, inconclusive, error) for ``n`` trials."""
    prep = (rng.random(n) >= s).astype(int)  # 0 -> phi, 1 -> psi
    u_alice = rng.random(n)
    u_bob = rng.random(n)
    counts = np.zeros(4, dtype=np.int64)
    for k in (0, 1):
        mask = prep == k
        m = int(mask.sum())
        if m == 0:
            continue
        cum = np.cumsum(alice[k])
        leaf = np.minimum(np.searchsorted(cum, u_alice[mask] * cum[-1], side="right"), cum.size - 1)
        table = bob[k][leaf]
        outcome = (u_bob[mask][:, None] * table[:, -1:] >= table).sum(axis=1)
        outcome = np.minimum(outcome, 2)
        correct = outcome == k
        counts[k] += int(correct.sum())
        counts[2] += int((outcome == 2).sum())
        counts[3] += int(((outcome != k) & (outcome != 2)).sum())
    return counts


def simulate(
    protocol: LoccProtocol,
    instance: DiscriminationInstance | None = None,
    trials: int = 10_000,
    seed: int = 0,
) -> SimulationReport:
    """Sample preparation, Alice's announced outcome, then Bob's result.

    Trials are processed in fixed-size chunks, each with its own generator
    spawned from ``seed``, so the tallies do not depend on evaluation order.
    """
    if trials < 1:
        raise InputError("trials must be at least 1")
    instance = instance or protocol.instance
    alice, bob = _tables(protocol, instance)
    n_chunks = -(-trials // CHUNK)
    children = np.random.SeedSequence(seed).spawn(n_chunks)
    counts = np.zeros(4, dtype=np.int64)
    for idx, child in enumerate(children):
        n = min(CHUNK, trials - idx * CHUNK)
        counts += _run_chunk(n, np.random.default_rng(child), instance.prior.s, alice, bob)
    phi_ok, psi_ok, inc, err = (int(v) for v in counts)
    return SimulationReport(
        trials,
        phi_ok,
        psi_ok,
        inc,
        err,
        (phi_ok + psi_ok) / trials,
        protocol.analytic_success,
        seed,
    )
