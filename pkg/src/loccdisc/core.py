"""Bipartite pure states, priors, canonical instances and measurement checks.

Amplitudes are stored Alice-index-major: entry ``a * dim_b + b`` is the
coefficient of ``|a>_A |b>_B``, so ``state.matrix[a]`` is the Bob-side block
attached to Alice's basis vector ``a``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError

# Below this modulus the overlap phase is meaningless and left alone.
PHASE_FLOOR = 1e-14


@dataclass(frozen=True)
class Tolerances:
    eps_norm: float = 1e-10
    eps_real: float = 1e-10
    eps_opt: float = 1e-9
    eps_psd: float = 1e-10
    max_sweeps: int | None = None

    def __post_init__(self):
        for name in ("eps_norm", "eps_real", "eps_opt", "eps_psd"):
            if not getattr(self, name) > 0:
                raise InputError(f"tolerance {name} must be strictly positive")
        if self.max_sweeps is not None and self.max_sweeps <= 0:
            raise InputError("max_sweeps must be strictly positive")

    def sweeps_for(self, n: int) -> int:
        """Iteration cap for an n-term expansion (default 10 n^2)."""
        if self.max_sweeps is not None:
            return self.max_sweeps
        return 10 * max(n, 1) ** 2


DEFAULT_TOL = Tolerances()


@dataclass(frozen=True)
class PriorPair:
    """Preparation probabilities ``s`` (for phi) and ``t`` (for psi).

    Canonical pairs additionally satisfy ``s <= t``; ``swapped`` records
    whether the user's labels were exchanged to get there.
    """

    s: float
    t: float
    swapped: bool = False

    def __post_init__(self):
        if not (0.0 <= self.s <= 1.0 and 0.0 <= self.t <= 1.0):
            raise InputError(f"priors must lie in [0, 1], got s={self.s}, t={self.t}")
        if abs(self.s + self.t - 1.0) > 1e-12:
            raise InputError(f"priors must sum to 1, got s+t={self.s + self.t!r}")

    @classmethod
    def from_s(cls, s: float) -> "PriorPair":
        return cls(float(s), 1.0 - float(s))

    @property
    def is_canonical(self) -> bool:
        return self.s <= self.t


@dataclass(frozen=True, eq=False)
class BipartiteState:
    dim_a: int
    dim_b: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.dim_a < 1 or self.dim_b < 1:
            raise InputError("dimensions must be positive")
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != self.dim_a * self.dim_b:
            raise InputError(
                f"expected {self.dim_a * self.dim_b} amplitudes, got {amps.size}"
            )
        amps = amps.copy()
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_matrix(cls, matrix) -> "BipartiteState":
        """Build from a ``dim_a x dim_b`` coefficient matrix."""
        m = np.asarray(matrix, dtype=complex)
        if m.ndim != 2:
            raise InputError("coefficient matrix must be two-dimensional")
        return cls(m.shape[0], m.shape[1], m.reshape(-1))

    @classmethod
    def product(cls, alice, bob) -> "BipartiteState":
        alice = np.asarray(alice, dtype=complex)
        bob = np.asarray(bob, dtype=complex)
        return cls(alice.size, bob.size, np.kron(alice, bob))

    @property
    def matrix(self) -> np.ndarray:
        return self.amplitudes.reshape(self.dim_a, self.dim_b)

    @property
    def dims(self) -> tuple[int, int]:
        return (self.dim_a, self.dim_b)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def scaled(self, factor: complex) -> "BipartiteState":
        return BipartiteState(self.dim_a, self.dim_b, self.amplitudes * factor)

    def normalized(self) -> "BipartiteState":
        n = self.norm()
        if n == 0:
            raise InputError("cannot normalize the zero vector")
        return self.scaled(1.0 / n)

    def is_normalized(self, tol: float = DEFAULT_TOL.eps_norm) -> bool:
        return abs(self.norm() - 1.0) <= tol


def overlap(a: BipartiteState, b: BipartiteState) -> complex:
    """Inner product <a|b>, antilinear in the first argument."""
    if a.dims != b.dims:
        raise InputError(f"dimension mismatch: {a.dims} vs {b.dims}")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


@dataclass(frozen=True, eq=False)
class DiscriminationInstance:
    """Two states, their priors and the cached (real, nonnegative) overlap."""

    phi: BipartiteState
    psi: BipartiteState
    prior: PriorPair
    overlap: float

    @property
    def dims(self) -> tuple[int, int]:
        return self.phi.dims

    @property
    def s(self) -> float:
        return self.prior.s

    @property
    def t(self) -> float:
        return self.prior.t


def canonicalize(
    phi: BipartiteState,
    psi: BipartiteState,
    s_raw: float,
    tol: Tolerances = DEFAULT_TOL,
) -> DiscriminationInstance:
    """Order the priors so that ``s <= t`` and make ``<phi|psi>`` real and nonnegative.

    The label swap is recorded in ``prior.swapped``; the phase is absorbed
    into ``psi``.  Already-canonical input is returned bit-for-bit unchanged.
    """
    if phi.dims != psi.dims:
        raise InputError(f"dimension mismatch: {phi.dims} vs {psi.dims}")
    if not 0.0 <= s_raw <= 1.0:
        raise InputError(f"prior must lie in [0, 1], got {s_raw}")
    for name, st in (("phi", phi), ("psi", psi)):
        if not st.is_normalized(tol.eps_norm):
            raise InputError(f"{name} is not normalized (norm {st.norm():.12g})")

    s, t = float(s_raw), 1.0 - float(s_raw)
    swapped = s > t
    if swapped:
        phi, psi = psi, phi
        s, t = t, s

    ov = overlap(phi, psi)
    mod = abs(ov)
    if mod >= PHASE_FLOOR and not (ov.real > 0 and abs(ov.imag) <= 1e-15 * mod):
        psi = psi.scaled(np.conj(ov) / mod)
        ov = overlap(phi, psi)
    return DiscriminationInstance(phi, psi, PriorPair(s, t, swapped), float(max(ov.real, 0.0)))


def haar_vector(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Unit vector from the unitarily invariant distribution on C^dim."""
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def random_instance(dim_a: int, dim_b: int, s_raw: float, seed: int) -> DiscriminationInstance:
    if dim_a < 1 or dim_b < 1:
        raise InputError("dimensions must be positive")
    rng = np.random.default_rng(seed)
    n = dim_a * dim_b
    phi = BipartiteState(dim_a, dim_b, haar_vector(n, rng))
    psi = BipartiteState(dim_a, dim_b, haar_vector(n, rng))
    return canonicalize(phi, psi, s_raw)


class Outcome(str, enum.Enum):
    CONCLUDE_PHI = "ConcludePhi"
    CONCLUDE_PSI = "ConcludePsi"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True, eq=False)
class Measurement:
    """A POVM on Bob's space, one labelled effect per outcome."""

    operators: tuple[tuple[Outcome, np.ndarray], ...]

    def __post_init__(self):
        ops = tuple((Outcome(label), np.asarray(op, dtype=complex)) for label, op in self.operators)
        if not ops:
            raise InputError("a measurement needs at least one operator")
        dim = ops[0][1].shape[0]
        for _, op in ops:
            if op.shape != (dim, dim):
                raise InputError("measurement operators must be square and equally sized")
        object.__setattr__(self, "operators", ops)

    @property
    def dim(self) -> int:
        return self.operators[0][1].shape[0]

    def effect(self, label: Outcome) -> np.ndarray:
        """Sum of all effects carrying ``label`` (zero if absent)."""
        total = np.zeros((self.dim, self.dim), dtype=complex)
        for lab, op in self.operators:
            if lab == label:
                total += op
        return total

    def probabilities(self, rho: np.ndarray) -> dict[Outcome, float]:
        """Born weights Tr(E rho) per label for a (possibly unnormalized) density."""
        return {lab: float(np.real(np.trace(self.effect(lab) @ rho))) for lab in Outcome}


@dataclass
class Verdict:
    ok: bool
    violations: list[str] = field(default_factory=list)
    hermiticity: float = 0.0
    min_eigenvalue: float = 0.0
    completeness: float = 0.0

    def __bool__(self) -> bool:
        return self.ok


def validate_measurement(m: Measurement, tol: Tolerances = DEFAULT_TOL) -> Verdict:
    violations = []
    herm = 0.0
    min_eig = np.inf
    total = np.zeros((m.dim, m.dim), dtype=complex)
    for k, (label, op) in enumerate(m.operators):
        h = float(np.max(np.abs(op - op.conj().T))) if op.size else 0.0
        herm = max(herm, h)
        if h > tol.eps_psd:
            violations.append(f"operator {k} ({label.value}) not Hermitian: {h:.3e}")
        ev = float(np.min(np.linalg.eigvalsh(0.5 * (op + op.conj().T))))
        min_eig = min(min_eig, ev)
        if ev < -tol.eps_psd:
            violations.append(f"operator {k} ({label.value}) not positive: min eigenvalue {ev:.3e}")
        total += op
    resid = float(np.linalg.norm(total - np.eye(m.dim), ord=2))
    if resid > tol.eps_psd:
        violations.append(f"operators do not sum to identity: residual {resid:.3e}")
    return Verdict(not violations, violations, herm, float(min_eig), resid)
