"""Alice-side expansions of a pair of bipartite states and their 2x2 rotations.

An expansion is stored through its unnormalized Bob-side rows: row ``i`` of
``phi_rows`` is ``sqrt(s_i) |eta_i>`` and row ``i`` of ``psi_rows`` is
``sqrt(t_i) |gamma_i>``, both attached to Alice's basis vector ``basis[:, i]``.
The *product* of term ``i`` is ``<phi_row_i|psi_row_i> = sqrt(s_i t_i) <eta_i|gamma_i>``.

Every procedure acts by rotating a pair of rows with

    R(theta, omega) = [[cos theta,              sin theta e^{-i omega}],
                       [sin theta e^{i omega},  -cos theta           ]]

and updating the basis so that ``basis @ rows`` keeps reproducing the states.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import DEFAULT_TOL, DiscriminationInstance, PriorPair, Tolerances
from .errors import InputError, NumericalFailure

# Weight at or below which a term side is treated as absent.
WEIGHT_FLOOR = 1e-14
# Residual the procedures aim for; the Tolerances fields are the acceptance
# thresholds applied when the iteration cap is hit.
TARGET = 1e-13


@dataclass(frozen=True, eq=False)
class ExpansionTerm:
    s_weight: float
    t_weight: float
    eta: np.ndarray | None
    gamma: np.ndarray | None
    d: complex

    @property
    def degenerate(self) -> bool:
        return self.s_weight <= WEIGHT_FLOOR or self.t_weight <= WEIGHT_FLOOR


@dataclass(frozen=True, eq=False)
class AliceExpansion:
    basis: np.ndarray
    phi_rows: np.ndarray
    psi_rows: np.ndarray

    @property
    def n(self) -> int:
        return self.basis.shape[1]

    @property
    def s_weights(self) -> np.ndarray:
        return np.sum(np.abs(self.phi_rows) ** 2, axis=1)

    @property
    def t_weights(self) -> np.ndarray:
        return np.sum(np.abs(self.psi_rows) ** 2, axis=1)

    @property
    def products(self) -> np.ndarray:
        """Per-term sqrt(s_i t_i) <eta_i|gamma_i>."""
        return np.einsum("ij,ij->i", self.phi_rows.conj(), self.psi_rows)

    @property
    def terms(self) -> list[ExpansionTerm]:
        out = []
        for s_i, t_i, p_row, q_row, prod in zip(
            self.s_weights, self.t_weights, self.phi_rows, self.psi_rows, self.products
        ):
            eta = p_row / math.sqrt(s_i) if s_i > 0 else None
            gamma = q_row / math.sqrt(t_i) if t_i > 0 else None
            if s_i <= WEIGHT_FLOOR and t_i <= WEIGHT_FLOOR:
                d = 0j
            elif eta is not None and gamma is not None:
                d = complex(np.vdot(eta, gamma))
            else:
                d = 0j
            out.append(ExpansionTerm(float(s_i), float(t_i), eta, gamma, d))
        return out

    @property
    def overlaps(self) -> np.ndarray:
        """The d_i = <eta_i|gamma_i> (0 wherever a side is absent)."""
        return np.array([term.d for term in self.terms])

    def reconstruct(self) -> tuple[np.ndarray, np.ndarray]:
        """Coefficient matrices of phi and psi rebuilt from the expansion."""
        return self.basis @ self.phi_rows, self.basis @ self.psi_rows


@dataclass(frozen=True)
class CorrelationBlock:
    i: int
    j: int
    a: complex
    b: complex
    m12: complex
    m21: complex
    x: float
    y: float
    z: complex


@dataclass(frozen=True)
class RotationStep:
    i: int
    j: int
    theta: float
    omega: float

    def matrix(self) -> np.ndarray:
        c, s = math.cos(self.theta), math.sin(self.theta)
        e = complex(math.cos(self.omega), math.sin(self.omega))
        return np.array([[c, s * e.conjugate()], [s * e, -c]], dtype=complex)


@dataclass
class StepRecord:
    """One accepted rotation together with the diagnostics the caller asked for."""

    step: RotationStep
    residual_before: float
    residual_after: float
    roots: tuple[float, float] | None = None
    potential_before: int | None = None
    potential_after: int | None = None


@dataclass
class ProcedureLog:
    records: list[StepRecord] = field(default_factory=list)
    sweep_deviations: list[float] = field(default_factory=list)

    def append(self, record: StepRecord) -> None:
        self.records.append(record)


def _is_unitary(u: np.ndarray, tol: float) -> bool:
    return u.ndim == 2 and u.shape[0] == u.shape[1] and np.allclose(
        u.conj().T @ u, np.eye(u.shape[0]), atol=tol, rtol=0
    )


def expand_in_basis(
    instance: DiscriminationInstance, basis=None, tol: Tolerances = DEFAULT_TOL
) -> AliceExpansion:
    dim_a = instance.phi.dim_a
    u = np.eye(dim_a, dtype=complex) if basis is None else np.asarray(basis, dtype=complex)
    if u.shape != (dim_a, dim_a) or not _is_unitary(u, tol.eps_norm):
        raise InputError("Alice basis must be a unitary matrix of size dim_a")
    return AliceExpansion(u.copy(), u.conj().T @ instance.phi.matrix, u.conj().T @ instance.psi.matrix)


def correlation_block(expansion: AliceExpansion, i: int, j: int, omega: float = 0.0) -> CorrelationBlock:
    P, Q = expansion.phi_rows, expansion.psi_rows
    e = complex(math.cos(omega), -math.sin(omega))  # e^{-i omega}
    pij = np.vdot(P[i], P[j])
    qij = np.vdot(Q[i], Q[j])
    m12 = complex(np.vdot(P[i], Q[j]))
    m21 = complex(np.vdot(P[j], Q[i]))
    x = 2.0 * (e * pij).real
    y = 2.0 * (e * qij).real
    z = e * m12 + e.conjugate() * m21
    return CorrelationBlock(
        i, j, complex(np.vdot(P[i], Q[i])), complex(np.vdot(P[j], Q[j])), m12, m21, x, y, z
    )


def solve_omega(block: CorrelationBlock) -> float:
    """Phase that makes e^{-i w} m12 + e^{i w} m21 real, which keeps both
    rotated products real for every theta.  Returned in [0, pi)."""
    # Im(e^{-iw} m12 + e^{iw} m21) = cos w * Im(m12 + m21) + sin w * Re(m21 - m12)
    A = (block.m12 + block.m21).imag
    B = (block.m21 - block.m12).real
    if A == 0.0 and B == 0.0:
        return 0.0
    omega = math.atan2(A, -B)
    omega %= math.pi
    if math.isclose(omega, math.pi):
        omega = 0.0
    return omega


def rotate_pair(expansion: AliceExpansion, step: RotationStep) -> AliceExpansion:
    i, j = step.i, step.j
    if i == j:
        raise InputError("rotation needs two distinct indices")
    R = step.matrix()
    idx = [i, j]
    P = expansion.phi_rows.copy()
    Q = expansion.psi_rows.copy()
    U = expansion.basis.copy()
    P[idx] = R @ P[idx]
    Q[idx] = R @ Q[idx]
    U[:, idx] = U[:, idx] @ R.conj().T
    return AliceExpansion(U, P, Q)


def predicted_update(block: CorrelationBlock, s_i, s_j, t_i, t_j, theta: float):
    """Closed-form rotated weights and products for a block (no vectors touched)."""
    c, s = math.cos(theta), math.sin(theta)
    cs = c * s
    return (
        s_i * c * c + s_j * s * s + block.x * cs,
        s_j * c * c + s_i * s * s - block.x * cs,
        t_i * c * c + t_j * s * s + block.y * cs,
        t_j * c * c + t_i * s * s - block.y * cs,
        block.a * c * c + block.b * s * s + block.z * cs,
        block.b * c * c + block.a * s * s - block.z * cs,
    )


def opposite_sign_roots(a: float, b: float, c: float) -> tuple[float, float]:
    """Real roots of a tau^2 + b tau + c = 0 when a and c differ in sign."""
    if not a * c < 0:
        raise NumericalFailure(
            "quadratic coefficients do not differ in sign", stage="quadratic", residual=a * c
        )
    disc = math.sqrt(b * b - 4.0 * a * c)
    q = -0.5 * (b + math.copysign(disc, b))
    r1, r2 = q / a, c / q
    if not r1 * r2 < 0:
        raise NumericalFailure("roots do not differ in sign", stage="quadratic", residual=r1 * r2)
    return r1, r2


def _smaller(roots: tuple[float, float]) -> float:
    return min(roots, key=abs)


def _check_weights(expansion: AliceExpansion, stage: str) -> None:
    # Weights are squared norms, so negatives here mean a corrupted update.
    if np.min(expansion.s_weights) < -1e-12 or np.min(expansion.t_weights) < -1e-12:
        raise NumericalFailure("negative weight after rotation", stage=stage)


def realness_residual(expansion: AliceExpansion) -> float:
    return float(np.max(np.abs(expansion.products.imag)))


def make_diagonal_real(
    expansion: AliceExpansion, tol: Tolerances = DEFAULT_TOL, log: ProcedureLog | None = None
) -> AliceExpansion:
    """Rotate pairs until every product sqrt(s_i t_i)<eta_i|gamma_i> is real.

    Requires a real total overlap: then a term with positive imaginary part
    can always be paired with one whose imaginary part is negative, and a
    single rotation zeroes one of the two.
    """
    total = expansion.products.sum()
    if abs(total.imag) > tol.eps_real:
        raise InputError("total overlap must be real; canonicalize the instance first")
    cap = tol.sweeps_for(expansion.n)
    exp = expansion
    for _ in range(cap):
        im = exp.products.imag
        resid = float(np.max(np.abs(im)))
        if resid <= TARGET:
            return exp
        hi, lo = int(np.argmax(im)), int(np.argmin(im))
        if not (im[hi] > 0 > im[lo]):
            break
        # zero the larger-magnitude of the two; the partner keeps the sum
        i, j = (hi, lo) if im[hi] >= -im[lo] else (lo, hi)
        block = correlation_block(exp, i, j, 0.0)
        roots = opposite_sign_roots(block.b.imag, block.z.imag, block.a.imag)
        step = RotationStep(i, j, math.atan(_smaller(roots)), 0.0)
        exp = rotate_pair(exp, step)
        _check_weights(exp, "make_diagonal_real")
        if log is not None:
            log.append(StepRecord(step, resid, realness_residual(exp), roots))
    resid = realness_residual(exp)
    if resid <= tol.eps_real:
        return exp
    raise NumericalFailure("products could not be made real", stage="make_diagonal_real", residual=resid)


def weight_residual(expansion: AliceExpansion) -> float:
    return float(np.max(np.abs(expansion.s_weights - expansion.t_weights)))


def equalize_weights(
    expansion: AliceExpansion,
    prior: PriorPair | None = None,
    tol: Tolerances = DEFAULT_TOL,
    log: ProcedureLog | None = None,
) -> AliceExpansion:
    """Rotate until s_i = t_i for every term, keeping the products real.

    With s <= t this gives the weaker s s_i <= t t_i for free.  ``prior`` is
    accepted for symmetry with :func:`fix_ratios`; only its ordering matters.
    """
    if prior is not None and not prior.is_canonical:
        raise InputError("equalize_weights expects canonical priors")
    if realness_residual(expansion) > tol.eps_real:
        raise InputError("equalize_weights needs real products")
    cap = tol.sweeps_for(expansion.n)
    exp = expansion
    for _ in range(cap):
        diff = exp.s_weights - exp.t_weights
        resid = float(np.max(np.abs(diff)))
        if resid <= TARGET:
            return exp
        hi, lo = int(np.argmax(diff)), int(np.argmin(diff))
        if not (diff[hi] > 0 > diff[lo]):
            break
        # equalize the larger-magnitude side so the maximum deviation never grows
        i, j = (hi, lo) if diff[hi] >= -diff[lo] else (lo, hi)
        omega = solve_omega(correlation_block(exp, i, j))
        block = correlation_block(exp, i, j, omega)
        roots = opposite_sign_roots(diff[j], block.x - block.y, diff[i])
        step = RotationStep(i, j, math.atan(_smaller(roots)), omega)
        exp = rotate_pair(exp, step)
        _check_weights(exp, "equalize_weights")
        new_resid = weight_residual(exp)
        if new_resid > resid + 1e-12:
            raise NumericalFailure("weight deviation increased", stage="equalize_weights", residual=new_resid)
        if log is not None:
            log.append(StepRecord(step, resid, new_resid, roots))
    resid = weight_residual(exp)
    if resid <= tol.eps_opt:
        return exp
    raise NumericalFailure("weights could not be equalized", stage="equalize_weights", residual=resid)


def ratio_slacks(expansion: AliceExpansion, prior: PriorPair) -> np.ndarray:
    """Per-term sqrt(s/t) s_i - product; nonnegative exactly when the ratio bound holds."""
    r = math.sqrt(prior.s / prior.t)
    return r * expansion.s_weights - expansion.products.real


def ratio_violations(expansion: AliceExpansion, prior: PriorPair) -> np.ndarray:
    """Per-term d_i - sqrt(s s_i / (t t_i)); degenerate terms report -inf (exempt)."""
    s_w, t_w = expansion.s_weights, expansion.t_weights
    out = np.full(expansion.n, -np.inf)
    live = (s_w > WEIGHT_FLOOR) & (t_w > WEIGHT_FLOOR)
    if np.any(live):
        g = ratio_slacks(expansion, prior)[live]
        out[live] = -g / np.sqrt(s_w[live] * t_w[live])
    return out


def potential(expansion: AliceExpansion, prior: PriorPair, tol: float = 1e-10) -> int:
    """2 * (#terms at equality) + (#terms with strict slack).

    Degenerate terms are classified like the rest by their slack; a term with
    no t-weight has unbounded slack and counts as strict.
    """
    s_w, t_w = expansion.s_weights, expansion.t_weights
    viol = ratio_violations(expansion, prior)
    score = 0
    for k in range(expansion.n):
        if s_w[k] <= WEIGHT_FLOOR and t_w[k] <= WEIGHT_FLOOR:
            score += 2
        elif t_w[k] <= WEIGHT_FLOOR:
            score += 1
        elif s_w[k] <= WEIGHT_FLOOR:
            score += 2
        elif abs(viol[k]) <= tol:
            score += 2
        elif viol[k] < -tol:
            score += 1
    return score


def fix_ratios(
    expansion: AliceExpansion,
    prior: PriorPair,
    tol: Tolerances = DEFAULT_TOL,
    log: ProcedureLog | None = None,
    overlap: float | None = None,
) -> AliceExpansion:
    """Rotate until <eta_i|gamma_i> <= sqrt(s s_i / (t t_i)) for every term.

    Each step drives the worst violator to equality by pairing it with the
    term of largest slack; the root is picked with the sign of s x - t y so
    that s s_j <= t t_j survives on the partner.
    """
    if not prior.is_canonical or prior.t <= 0:
        raise InputError("fix_ratios expects canonical priors with t > 0")
    c = float(expansion.products.sum().real) if overlap is None else overlap
    r = math.sqrt(prior.s / prior.t)
    if r < c - tol.eps_opt:
        raise InputError(
            f"fix_ratios applies only when sqrt(s/t) >= overlap (got {r:.6g} < {c:.6g})"
        )
    if realness_residual(expansion) > tol.eps_real:
        raise InputError("fix_ratios needs real products")
    bad = prior.s * expansion.s_weights - prior.t * expansion.t_weights
    if np.max(bad) > tol.eps_opt:
        raise InputError("fix_ratios needs s s_i <= t t_i on every term")

    cap = tol.sweeps_for(expansion.n)
    exp = expansion
    for _ in range(cap):
        viol = ratio_violations(exp, prior)
        i = int(np.argmax(viol))
        worst = float(viol[i])
        if worst <= 1e-12:
            return exp
        g = ratio_slacks(exp, prior)
        g_i = g[i]
        cand = g.copy()
        cand[i] = -np.inf
        j = int(np.argmax(cand))
        if not (g_i < 0 < cand[j]):
            break
        omega = solve_omega(correlation_block(exp, i, j))
        block = correlation_block(exp, i, j, omega)
        roots = opposite_sign_roots(g[j], r * block.x - block.z.real, g_i)
        sign = prior.s * block.x - prior.t * block.y
        ordered = sorted(roots, key=lambda tau: (tau * sign < 0, abs(tau)))
        before = potential(exp, prior)
        for tau in ordered:
            trial = rotate_pair(exp, RotationStep(i, j, math.atan(tau), omega))
            pair = [i, j]
            if np.max(prior.s * trial.s_weights[pair] - prior.t * trial.t_weights[pair]) <= 1e-12:
                break
        else:
            raise NumericalFailure(
                "no root keeps s s_j <= t t_j", stage="fix_ratios", residual=worst
            )
        step = RotationStep(i, j, math.atan(tau), omega)
        _check_weights(trial, "fix_ratios")
        after = potential(trial, prior)
        if after < before:
            raise NumericalFailure(
                f"termination potential decreased ({before} -> {after})",
                stage="fix_ratios",
                residual=worst,
            )
        if log is not None:
            log.append(
                StepRecord(step, worst, float(np.max(ratio_violations(trial, prior))), roots, before, after)
            )
        exp = trial
    worst = float(np.max(ratio_violations(exp, prior)))
    if worst <= tol.eps_opt:
        return exp
    raise NumericalFailure("ratio bound not reached", stage="fix_ratios", residual=worst)


def product_deviation(expansion: AliceExpansion) -> float:
    p = expansion.products.real
    return float(p.max() - p.min())


def equalize_products(
    expansion: AliceExpansion, tol: Tolerances = DEFAULT_TOL, log: ProcedureLog | None = None
) -> AliceExpansion:
    """Rotate pairs until every product equals the mean <phi|psi> / n.

    A rotation preserves a_i + a_j, so moving one term of an above/below-mean
    pair exactly onto the mean leaves the other with the combined excess:
    at most n - 1 steps, and the largest deviation from the mean never grows.
    """
    if realness_residual(expansion) > tol.eps_real:
        raise InputError("equalize_products needs real products")
    n = expansion.n
    exp = expansion
    mean = float(exp.products.real.sum()) / n
    if log is not None:
        log.sweep_deviations.append(product_deviation(exp))
    for _ in range(tol.sweeps_for(n)):
        dev = exp.products.real - mean
        resid = float(np.max(np.abs(dev)))
        if resid <= TARGET:
            return exp
        hi, lo = int(np.argmax(dev)), int(np.argmin(dev))
        if not (dev[hi] > 0 > dev[lo]):
            break
        i, j = (hi, lo) if dev[hi] >= -dev[lo] else (lo, hi)
        omega = solve_omega(correlation_block(exp, i, j))
        block = correlation_block(exp, i, j, omega)
        # (b - mean) tau^2 + z tau + (a - mean) = 0 puts term i on the mean
        roots = opposite_sign_roots(block.b.real - mean, block.z.real, block.a.real - mean)
        step = RotationStep(i, j, math.atan(_smaller(roots)), omega)
        exp = rotate_pair(exp, step)
        new_resid = float(np.max(np.abs(exp.products.real - mean)))
        if new_resid > resid + 1e-15:
            raise NumericalFailure("product spread increased", stage="equalize_products", residual=new_resid)
        if log is not None:
            log.append(StepRecord(step, resid, new_resid, roots))
            log.sweep_deviations.append(product_deviation(exp))
    dev = product_deviation(exp)
    if dev <= tol.eps_opt:
        return exp
    raise NumericalFailure("products could not be equalized", stage="equalize_products", residual=dev)
