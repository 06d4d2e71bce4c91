"""Closed-form optimum for conclusive discrimination of two pure states.

Also provides Bob's single-system zero-error POVM attaining it and a grid
search over the zero-error family that serves as an independent oracle.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .core import DEFAULT_TOL, Measurement, Outcome, PriorPair, Tolerances
from .errors import InputError

# 1 - c at or below this counts as identical states.
IDENTICAL_GAP = 1e-12


class CaseTag(str, enum.Enum):
    LINEAR = "Linear"
    QUADRATIC = "Quadratic"
    BOUNDARY = "Boundary"


@dataclass(frozen=True)
class OptimumResult:
    value: float
    case: CaseTag


def classify(prior: PriorPair, c: float, tol: Tolerances = DEFAULT_TOL) -> CaseTag:
    ratio = math.sqrt(prior.s / prior.t) if prior.t > 0 else math.inf
    if ratio > c + tol.eps_opt:
        return CaseTag.LINEAR
    if ratio < c - tol.eps_opt:
        return CaseTag.QUADRATIC
    return CaseTag.BOUNDARY


def pmax(prior: PriorPair, c: float, tol: Tolerances = DEFAULT_TOL) -> OptimumResult:
    """Best zero-error success probability for priors ``(s, t)``, ``s <= t``, overlap ``c``."""
    if c < -tol.eps_norm or c > 1 + tol.eps_norm:
        raise InputError(f"overlap must lie in [0, 1], got {c}")
    if not prior.is_canonical:
        raise InputError("pmax expects canonical priors with s <= t")
    c = min(max(float(c), 0.0), 1.0)
    s, t = prior.s, prior.t
    case = classify(prior, c, tol)
    if case is CaseTag.QUADRATIC:
        value = t * (1.0 - c * c)
    else:
        value = 1.0 - 2.0 * math.sqrt(s * t) * c
    return OptimumResult(min(max(value, 0.0), 1.0), case)


def two_state_success(p: float, q: float, c: float) -> float:
    """Optimum for weights ``p, q`` in either order (no canonical-order requirement)."""
    c = min(max(float(c), 0.0), 1.0)
    lo, hi = (p, q) if p <= q else (q, p)
    if lo >= hi * c * c:
        return 1.0 - 2.0 * math.sqrt(p * q) * c
    return hi * (1.0 - c * c)


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def _in_span_complements(eta: np.ndarray, gamma: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unit vectors in span{eta, gamma} orthogonal to gamma and to eta respectively."""
    c = np.vdot(gamma, eta)
    gamma_perp = _unit(eta - c * gamma)
    eta_perp = _unit(gamma - np.conj(c) * eta)
    return gamma_perp, eta_perp


def _real_overlap(eta: np.ndarray, gamma: np.ndarray, tol: Tolerances) -> float:
    c = complex(np.vdot(eta, gamma))
    if abs(c.imag) > tol.eps_real or c.real < -tol.eps_real:
        raise InputError(f"overlap <eta|gamma> must be real and nonnegative, got {c:.6g}")
    return min(max(c.real, 0.0), 1.0)


def orthogonal_measurement(eta, gamma, tol: Tolerances = DEFAULT_TOL) -> Measurement:
    eta = np.asarray(eta, dtype=complex)
    gamma = np.asarray(gamma, dtype=complex)
    if abs(np.vdot(eta, gamma)) > tol.eps_real:
        raise InputError("orthogonal_measurement needs <eta|gamma> = 0")
    proj = np.outer(eta, eta.conj())
    return Measurement(
        (
            (Outcome.CONCLUDE_PHI, proj),
            (Outcome.CONCLUDE_PSI, np.eye(eta.size) - proj),
        )
    )


def udd_measurement(eta, gamma, p: float, q: float, tol: Tolerances = DEFAULT_TOL) -> Measurement:
    """Zero-error POVM on Bob's space that is optimal for priors ``p`` (eta) and ``q`` (gamma).

    Effects are built in span{eta, gamma}; the orthogonal complement of the
    span goes to the inconclusive outcome.
    """
    eta = np.asarray(eta, dtype=complex)
    gamma = np.asarray(gamma, dtype=complex)
    if abs(p + q - 1.0) > 1e-12 or p < 0 or q < 0:
        raise InputError(f"weights must be a probability pair, got p={p}, q={q}")
    c = _real_overlap(eta, gamma, tol)
    dim = eta.size
    ident = np.eye(dim, dtype=complex)
    if 1.0 - c <= IDENTICAL_GAP:
        return Measurement(((Outcome.INCONCLUSIVE, ident),))

    gamma_perp, eta_perp = _in_span_complements(eta, gamma)
    proj_gp = np.outer(gamma_perp, gamma_perp.conj())
    proj_ep = np.outer(eta_perp, eta_perp.conj())
    cc = c * c
    if p < q * cc:
        a, b = 0.0, 1.0
    elif q < p * cc:
        a, b = 1.0, 0.0
    else:
        # sqrt(q/p) c and sqrt(p/q) c written without dividing by a zero weight
        a = (1.0 - math.sqrt(q * p) * c / p) / (1.0 - cc) if p > 0 else 0.0
        b = (1.0 - math.sqrt(q * p) * c / q) / (1.0 - cc) if q > 0 else 0.0
        a = min(max(a, 0.0), 1.0)
        b = min(max(b, 0.0), 1.0)
    e_phi = a * proj_gp
    e_psi = b * proj_ep
    e_inc = ident - e_phi - e_psi
    e_inc = 0.5 * (e_inc + e_inc.conj().T)
    return Measurement(
        (
            (Outcome.CONCLUDE_PHI, e_phi),
            (Outcome.CONCLUDE_PSI, e_psi),
            (Outcome.INCONCLUSIVE, e_inc),
        )
    )


def measurement_success(m: Measurement, eta, gamma, p: float, q: float) -> float:
    eta = np.asarray(eta, dtype=complex)
    gamma = np.asarray(gamma, dtype=complex)
    e_phi = m.effect(Outcome.CONCLUDE_PHI)
    e_psi = m.effect(Outcome.CONCLUDE_PSI)
    return float(p * np.real(np.vdot(eta, e_phi @ eta)) + q * np.real(np.vdot(gamma, e_psi @ gamma)))


def measurement_errors(m: Measurement, eta, gamma) -> tuple[float, float]:
    """(P[ConcludePsi | eta], P[ConcludePhi | gamma])."""
    eta = np.asarray(eta, dtype=complex)
    gamma = np.asarray(gamma, dtype=complex)
    e_phi = m.effect(Outcome.CONCLUDE_PHI)
    e_psi = m.effect(Outcome.CONCLUDE_PSI)
    return (
        float(np.real(np.vdot(eta, e_psi @ eta))),
        float(np.real(np.vdot(gamma, e_phi @ gamma))),
    )


def brute_force_pmax(
    eta, gamma, p: float, q: float, resolution: float = 1e-3, exhaustive: bool = False
) -> float:
    """Grid maximum over the family E_phi = a|g'><g'|, E_psi = b|e'><e'|.

    ``g'`` and ``e'`` are the in-span vectors orthogonal to gamma and eta.
    A grid point counts only if the remaining effect I - E_phi - E_psi is
    positive semidefinite, checked on its 2x2 restriction to span{eta, gamma}
    (it is the identity on the complement).

    Lowering b adds a positive operator to the remaining effect, so each grid
    row is feasible on a prefix of b values; the default search bisects that
    prefix per row.  ``exhaustive=True`` evaluates every grid point instead
    and returns the same number.
    """
    if not resolution > 0:
        raise InputError("resolution must be positive")
    eta = _unit(np.asarray(eta, dtype=complex))
    gamma = _unit(np.asarray(gamma, dtype=complex))
    if abs(np.vdot(eta, gamma)) >= 1.0 - IDENTICAL_GAP:
        return 0.0
    gp, ep = _in_span_complements(eta, gamma)
    frame = np.stack([eta, _unit(gamma - np.vdot(eta, gamma) * eta)], axis=1)
    g2 = frame.conj().T @ gp
    h2 = frame.conj().T @ ep
    G = np.outer(g2, g2.conj())
    H = np.outer(h2, h2.conj())
    gain_a = p * float(abs(np.vdot(gp, eta)) ** 2)
    gain_b = q * float(abs(np.vdot(ep, gamma)) ** 2)

    def feasible(a, b):
        m00 = 1.0 - a * G[0, 0].real - b * H[0, 0].real
        m11 = 1.0 - a * G[1, 1].real - b * H[1, 1].real
        m01 = -a * G[0, 1] - b * H[0, 1]
        det = m00 * m11 - np.abs(m01) ** 2
        return (m00 >= -1e-12) & (m11 >= -1e-12) & (det >= -1e-12)

    steps = int(round(1.0 / resolution))
    grid = np.linspace(0.0, 1.0, steps + 1)
    if exhaustive:
        a, b = grid[:, None], grid[None, :]
        objective = np.where(feasible(a, b), gain_a * a + gain_b * b, -np.inf)
        return float(objective.max())

    lo = np.full(grid.size, -1)
    hi = np.full(grid.size, steps + 1)
    while np.any(hi - lo > 1):
        mid = (lo + hi) // 2
        ok = feasible(grid, grid[np.clip(mid, 0, steps)]) & (hi - lo > 1)
        lo = np.where(ok, mid, lo)
        hi = np.where(ok | (hi - lo <= 1), hi, mid)
    rows = lo >= 0
    if not np.any(rows):
        return 0.0
    return float(np.max(gain_a * grid[rows] + gain_b * grid[lo[rows]]))
