"""One-way LOCC protocol reaching the global optimum for two bipartite pure states.

Alice applies an isometry from her space into ``labels x A``, measures the
label and announces it.  Every label is either a block whose two conditional
states are orthogonal (finished by a nested perfect-discrimination protocol)
or a single product term on which Bob runs the optimal single-system
zero-error measurement with the updated priors.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    DEFAULT_TOL,
    PHASE_FLOOR,
    BipartiteState,
    DiscriminationInstance,
    Measurement,
    Outcome,
    PriorPair,
    Tolerances,
)
from .errors import InputError, NumericalFailure
from .expansion import (
    WEIGHT_FLOOR,
    AliceExpansion,
    equalize_products,
    equalize_weights,
    expand_in_basis,
    fix_ratios,
    make_diagonal_real,
)
from .optimum import (
    IDENTICAL_GAP,
    CaseTag,
    classify,
    orthogonal_measurement,
    pmax,
    two_state_success,
    udd_measurement,
)

# A split leaving less than this fraction of a term gives the term away whole.
SNAP_FRACTION = 1e-15


class Action(str, enum.Enum):
    BOB_MEASUREMENT = "BobMeasurement"
    WALGATE = "WalgateSubprotocol"
    CERTAIN_PHI = "CertainPhi"
    CERTAIN_PSI = "CertainPsi"
    ALWAYS_INCONCLUSIVE = "AlwaysInconclusive"


@dataclass(frozen=True, eq=False)
class OrthogonalBlock:
    label: int
    s: float
    t: float
    phi_block: BipartiteState
    psi_block: BipartiteState
    pieces: tuple[tuple[int, float], ...] = ()


@dataclass(frozen=True, eq=False)
class RatioTerm:
    label: int
    alice_vector: np.ndarray
    s: float
    t: float
    eta: np.ndarray | None
    gamma: np.ndarray | None
    d: float


@dataclass(frozen=True, eq=False)
class AncillaExpansion:
    orthogonal_blocks: tuple[OrthogonalBlock, ...]
    ratio_terms: tuple[RatioTerm, ...]
    isometry: np.ndarray
    dim_a: int
    dim_b: int
    construction_prior: PriorPair

    @property
    def m(self) -> int:
        return len(self.orthogonal_blocks)

    @property
    def n_labels(self) -> int:
        return len(self.orthogonal_blocks) + len(self.ratio_terms)

    def assembled(self, which: str) -> np.ndarray:
        """The extended state sum_label |label> (x) part, rebuilt from the parts alone."""
        da, db = self.dim_a, self.dim_b
        out = np.zeros((self.n_labels, da * db), dtype=complex)
        for blk in self.orthogonal_blocks:
            if which == "phi":
                out[blk.label] = math.sqrt(blk.s) * blk.phi_block.amplitudes
            else:
                out[blk.label] = math.sqrt(blk.t) * blk.psi_block.amplitudes
        for term in self.ratio_terms:
            weight, vec = (term.s, term.eta) if which == "phi" else (term.t, term.gamma)
            if vec is not None:
                out[term.label] = math.sqrt(weight) * np.kron(term.alice_vector, vec)
        return out.reshape(-1)


@dataclass(frozen=True)
class EffectivePriors:
    s_star: float
    t_star: float

    def as_prior(self) -> PriorPair:
        return PriorPair(self.s_star, self.t_star)


@dataclass(frozen=True, eq=False)
class OutcomeBranch:
    label: int
    probability: float
    post_phi: float
    post_psi: float
    action: Action
    overlap: float = 0.0
    measurement: Measurement | None = None
    subprotocol: "LoccProtocol | None" = None


@dataclass(frozen=True, eq=False)
class LoccProtocol:
    instance: DiscriminationInstance
    case: CaseTag
    isometry: np.ndarray
    branches: tuple[OutcomeBranch, ...]
    analytic_success: float = 0.0
    effective_priors: EffectivePriors | None = None
    ancilla: AncillaExpansion | None = None
    expansion: AliceExpansion | None = None
    stage_expansions: dict = field(default_factory=dict)

    @property
    def dim_a(self) -> int:
        return self.instance.phi.dim_a

    @property
    def n_labels(self) -> int:
        return self.isometry.shape[0] // self.dim_a

    def kraus(self, label: int) -> np.ndarray:
        """Alice's operator for announcing ``label``: a dim_a x dim_a slice of the isometry."""
        da = self.dim_a
        return self.isometry[label * da : (label + 1) * da]


def effective_priors(c: float) -> EffectivePriors:
    if not 0 < c <= 1:
        raise InputError(f"effective priors need 0 < overlap <= 1, got {c}")
    return EffectivePriors(c * c / (1 + c * c), 1 / (1 + c * c))


def branch_posteriors(prior: PriorPair, s_i: float, t_i: float) -> tuple[float, float, float]:
    """(P_i, P[phi | i], P[psi | i]) for a term with weights ``s_i``, ``t_i``."""
    if s_i < 0 or t_i < 0:
        raise InputError("term weights must be nonnegative")
    p_i = prior.s * s_i + prior.t * t_i
    if p_i <= 0:
        raise InputError("outcome has zero probability under both states")
    return p_i, prior.s * s_i / p_i, prior.t * t_i / p_i


def _posteriors_or_prior(prior: PriorPair, s_i: float, t_i: float) -> tuple[float, float, float]:
    p_i = prior.s * s_i + prior.t * t_i
    if p_i <= 0:
        return 0.0, prior.s, prior.t
    return branch_posteriors(prior, s_i, t_i)


def split_terms(
    expansion: AliceExpansion, prior: PriorPair, tol: Tolerances = DEFAULT_TOL
) -> AncillaExpansion:
    """Regroup the terms under ancilla labels so that no kept term has a negative overlap.

    A negative-product term is cancelled against a slice of a positive one
    (slicing scales s_i and t_i together, so d_i and s_i/t_i are untouched);
    each cancelling pair becomes one label whose two conditional states are
    orthogonal.  Remaining terms keep a label of their own.
    """
    n = expansion.n
    da, db = expansion.phi_rows.shape[0], expansion.phi_rows.shape[1]
    s_w, t_w = expansion.s_weights, expansion.t_weights
    prods = expansion.products.real
    remaining = np.ones(n)
    blocks: list[list[tuple[int, float]]] = []

    for _ in range(2 * n + 1):
        live = remaining > 0
        signed = prods * remaining
        neg = np.where(live & (signed < 0))[0]
        if neg.size == 0:
            break
        i = int(neg[np.argmin(signed[neg])])
        pos = np.where(live & (signed > 0))[0]
        if pos.size == 0:
            raise NumericalFailure(
                "negative product with no positive partner", stage="split_terms", residual=float(signed[i])
            )
        j = int(pos[np.argmax(signed[pos])])
        need, have = -signed[i], signed[j]
        if need <= have:
            piece = remaining[j] * need / have
            if remaining[j] - piece <= SNAP_FRACTION:
                piece = remaining[j]
            blocks.append([(i, remaining[i]), (j, piece)])
            remaining[i] = 0.0
            remaining[j] -= piece
        else:
            piece = remaining[i] * have / need
            if remaining[i] - piece <= SNAP_FRACTION:
                piece = remaining[i]
            blocks.append([(i, piece), (j, remaining[j])])
            remaining[j] = 0.0
            remaining[i] -= piece
    else:
        raise NumericalFailure("splitting did not terminate", stage="split_terms")

    U = expansion.basis
    P, Q = expansion.phi_rows, expansion.psi_rows
    kept = [k for k in range(n) if remaining[k] > 0]
    n_labels = len(blocks) + len(kept)
    V = np.zeros((n_labels * da, da), dtype=complex)

    def place(label: int, k: int, frac: float) -> None:
        u = U[:, k]
        V[label * da : (label + 1) * da] += math.sqrt(frac) * np.outer(u, u.conj())

    out_blocks = []
    for label, pieces in enumerate(blocks):
        phi_vec = np.zeros(da * db, dtype=complex)
        psi_vec = np.zeros(da * db, dtype=complex)
        for k, frac in pieces:
            place(label, k, frac)
            phi_vec += math.sqrt(frac) * np.kron(U[:, k], P[k])
            psi_vec += math.sqrt(frac) * np.kron(U[:, k], Q[k])
        s_b = float(np.vdot(phi_vec, phi_vec).real)
        t_b = float(np.vdot(psi_vec, psi_vec).real)
        out_blocks.append(
            OrthogonalBlock(
                label,
                s_b,
                t_b,
                BipartiteState(da, db, phi_vec / math.sqrt(s_b)),
                BipartiteState(da, db, psi_vec / math.sqrt(t_b)),
                tuple((int(k), float(f)) for k, f in pieces),
            )
        )

    terms = expansion.terms
    out_terms = []
    for offset, k in enumerate(kept):
        label = len(blocks) + offset
        frac = float(remaining[k])
        place(label, k, frac)
        term = terms[k]
        d = 0.0 if term.degenerate else max(float(term.d.real), 0.0)
        out_terms.append(
            RatioTerm(label, U[:, k].copy(), float(s_w[k] * frac), float(t_w[k] * frac), term.eta, term.gamma, d)
        )

    if not np.allclose(V.conj().T @ V, np.eye(da), atol=1e-9, rtol=0):
        raise NumericalFailure("ancilla map is not an isometry", stage="split_terms")
    return AncillaExpansion(tuple(out_blocks), tuple(out_terms), V, da, db, prior)


def _bob_branch(label: int, prior: PriorPair, term: RatioTerm, tol: Tolerances) -> OutcomeBranch:
    p_i, post_phi, post_psi = _posteriors_or_prior(prior, term.s, term.t)
    if term.s <= WEIGHT_FLOOR and term.t <= WEIGHT_FLOOR:
        return OutcomeBranch(label, p_i, post_phi, post_psi, Action.ALWAYS_INCONCLUSIVE)
    if term.t <= WEIGHT_FLOOR:
        return OutcomeBranch(label, p_i, post_phi, post_psi, Action.CERTAIN_PHI)
    if term.s <= WEIGHT_FLOOR:
        return OutcomeBranch(label, p_i, post_phi, post_psi, Action.CERTAIN_PSI)
    # gamma's phase is free; align it so the overlap is exactly real and nonnegative
    raw = complex(np.vdot(term.eta, term.gamma))
    gamma = term.gamma if abs(raw) < PHASE_FLOOR else term.gamma * (np.conj(raw) / abs(raw))
    meas = udd_measurement(term.eta, gamma, post_phi, post_psi, tol)
    return OutcomeBranch(label, p_i, post_phi, post_psi, Action.BOB_MEASUREMENT, abs(raw), meas)


def _branch_success(branch: OutcomeBranch) -> float:
    if branch.action is Action.BOB_MEASUREMENT:
        return two_state_success(branch.post_phi, branch.post_psi, branch.overlap)
    if branch.action is Action.WALGATE:
        return branch.subprotocol.analytic_success
    if branch.action in (Action.CERTAIN_PHI, Action.CERTAIN_PSI):
        return 1.0
    return 0.0


def analytic_success(protocol: LoccProtocol) -> float:
    """Sum over Alice's outcomes of P_i times the branch's conditional optimum."""
    return float(sum(b.probability * _branch_success(b) for b in protocol.branches))


def _basis_isometry(basis: np.ndarray) -> np.ndarray:
    """Projective measurement in ``basis`` written as a stacked isometry."""
    return np.concatenate([np.outer(basis[:, k], basis[:, k].conj()) for k in range(basis.shape[1])])


def walgate_subprotocol(
    phi: BipartiteState,
    psi: BipartiteState,
    prior: PriorPair | None = None,
    tol: Tolerances = DEFAULT_TOL,
) -> LoccProtocol:
    """Perfect LOCC discrimination of two orthogonal states.

    Alice moves to a basis in which every Bob-side pair is orthogonal, measures,
    and Bob separates the announced pair with a projective measurement.
    """
    if phi.dims != psi.dims:
        raise InputError("dimension mismatch")
    ov = np.vdot(phi.amplitudes, psi.amplitudes)
    if abs(ov) > 1e-9:
        raise InputError(f"walgate_subprotocol needs orthogonal states, |<phi|psi>| = {abs(ov):.3e}")
    prior = prior or PriorPair(0.5, 0.5)
    instance = DiscriminationInstance(phi, psi, prior, float(abs(ov)))
    exp = expand_in_basis(instance, tol=tol)
    exp = make_diagonal_real(exp, tol)
    exp = equalize_products(exp, tol)

    branches = []
    for k, term in enumerate(exp.terms):
        p_k, post_phi, post_psi = _posteriors_or_prior(prior, term.s_weight, term.t_weight)
        if term.s_weight <= WEIGHT_FLOOR and term.t_weight <= WEIGHT_FLOOR:
            branches.append(OutcomeBranch(k, p_k, post_phi, post_psi, Action.ALWAYS_INCONCLUSIVE))
        elif term.t_weight <= WEIGHT_FLOOR:
            branches.append(OutcomeBranch(k, p_k, post_phi, post_psi, Action.CERTAIN_PHI))
        elif term.s_weight <= WEIGHT_FLOOR:
            branches.append(OutcomeBranch(k, p_k, post_phi, post_psi, Action.CERTAIN_PSI))
        elif abs(term.d) <= tol.eps_real:
            meas = orthogonal_measurement(term.eta, term.gamma, tol)
            branches.append(
                OutcomeBranch(k, p_k, post_phi, post_psi, Action.BOB_MEASUREMENT, abs(term.d), meas)
            )
        else:
            # residual overlap from rounding on a light term: stay zero-error
            rt = RatioTerm(k, exp.basis[:, k], term.s_weight, term.t_weight, term.eta, term.gamma, abs(term.d))
            branches.append(_bob_branch(k, prior, rt, tol))
    protocol = LoccProtocol(
        instance,
        CaseTag.LINEAR,
        _basis_isometry(exp.basis),
        tuple(branches),
        expansion=exp,
    )
    return _with_success(protocol)


def _with_success(protocol: LoccProtocol) -> LoccProtocol:
    object.__setattr__(protocol, "analytic_success", analytic_success(protocol))
    return protocol


def build_protocol(instance: DiscriminationInstance, tol: Tolerances = DEFAULT_TOL) -> LoccProtocol:
    """Construct the optimal one-way protocol for a canonicalized instance."""
    prior = instance.prior
    if not prior.is_canonical:
        raise InputError("build_protocol expects a canonicalized instance")
    c = instance.overlap
    case = pmax(prior, c, tol).case
    da = instance.phi.dim_a

    if c <= PHASE_FLOOR:
        sub = walgate_subprotocol(instance.phi, instance.psi, prior, tol)
        return _with_success(
            LoccProtocol(instance, case, sub.isometry, sub.branches, expansion=sub.expansion)
        )
    if 1.0 - c <= IDENTICAL_GAP:
        branch = OutcomeBranch(0, 1.0, prior.s, prior.t, Action.ALWAYS_INCONCLUSIVE)
        return _with_success(
            LoccProtocol(instance, case, np.eye(da, dtype=complex), (branch,))
        )

    eff = None
    construction = prior
    if classify(prior, c, tol) is CaseTag.QUADRATIC:
        eff = effective_priors(c)
        construction = eff.as_prior()

    stages = {}
    exp = expand_in_basis(instance, tol=tol)
    stages["expand"] = exp
    exp = make_diagonal_real(exp, tol)
    stages["real"] = exp
    exp = equalize_weights(exp, construction, tol)
    stages["weights"] = exp
    exp = fix_ratios(exp, construction, tol, overlap=c)
    stages["ratios"] = exp
    anc = split_terms(exp, construction, tol)

    branches: list[OutcomeBranch] = []
    for blk in anc.orthogonal_blocks:
        p_i, post_phi, post_psi = _posteriors_or_prior(prior, blk.s, blk.t)
        sub = walgate_subprotocol(blk.phi_block, blk.psi_block, PriorPair(post_phi, post_psi), tol)
        branches.append(OutcomeBranch(blk.label, p_i, post_phi, post_psi, Action.WALGATE, 0.0, None, sub))
    for term in anc.ratio_terms:
        branches.append(_bob_branch(term.label, prior, term, tol))

    protocol = LoccProtocol(
        instance,
        case,
        anc.isometry,
        tuple(branches),
        effective_priors=eff,
        ancilla=anc,
        expansion=exp,
        stage_expansions=stages,
    )
    return _with_success(protocol)


# --- exact Born-rule evaluation -------------------------------------------


@dataclass(frozen=True, eq=False)
class Leaf:
    """A complete Alice outcome sequence: her Kraus operator and Bob's final action."""

    path: tuple[int, ...]
    kraus: np.ndarray
    action: Action
    measurement: Measurement | None


def leaves(protocol: LoccProtocol, prefix: tuple[int, ...] = (), outer=None):
    for branch in protocol.branches:
        K = protocol.kraus(branch.label)
        if outer is not None:
            K = K @ outer
        path = prefix + (branch.label,)
        if branch.action is Action.WALGATE:
            yield from leaves(branch.subprotocol, path, K)
        else:
            yield Leaf(path, K, branch.action, branch.measurement)


def bob_density(kraus: np.ndarray, state: BipartiteState) -> np.ndarray:
    """Bob's unnormalized conditional density after Alice applies ``kraus``."""
    C = kraus @ state.matrix
    return C.T @ C.conj()


_CERTAIN = {
    Action.CERTAIN_PHI: Outcome.CONCLUDE_PHI,
    Action.CERTAIN_PSI: Outcome.CONCLUDE_PSI,
    Action.ALWAYS_INCONCLUSIVE: Outcome.INCONCLUSIVE,
}


def leaf_probabilities(leaf: Leaf, state: BipartiteState) -> dict[Outcome, float]:
    rho = bob_density(leaf.kraus, state)
    if leaf.measurement is not None:
        return leaf.measurement.probabilities(rho)
    out = {lab: 0.0 for lab in Outcome}
    out[_CERTAIN[leaf.action]] = float(np.real(np.trace(rho)))
    return out


@dataclass
class ExactEvaluation:
    """Born-rule outcome probabilities of the whole protocol, per prepared state."""

    given_phi: dict[Outcome, float]
    given_psi: dict[Outcome, float]
    worst_leaf_cross: float
    success: float
    error: float
    inconclusive: float
    instrument_residual: float


def evaluate_exact(protocol: LoccProtocol) -> ExactEvaluation:
    inst = protocol.instance
    s, t = inst.prior.s, inst.prior.t
    tot_phi = {lab: 0.0 for lab in Outcome}
    tot_psi = {lab: 0.0 for lab in Outcome}
    worst = 0.0
    completeness = np.zeros((protocol.dim_a, protocol.dim_a), dtype=complex)
    for leaf in leaves(protocol):
        completeness += leaf.kraus.conj().T @ leaf.kraus
        pp = leaf_probabilities(leaf, inst.phi)
        qq = leaf_probabilities(leaf, inst.psi)
        worst = max(worst, pp[Outcome.CONCLUDE_PSI], qq[Outcome.CONCLUDE_PHI])
        for lab in Outcome:
            tot_phi[lab] += pp[lab]
            tot_psi[lab] += qq[lab]
    success = s * tot_phi[Outcome.CONCLUDE_PHI] + t * tot_psi[Outcome.CONCLUDE_PSI]
    error = s * tot_phi[Outcome.CONCLUDE_PSI] + t * tot_psi[Outcome.CONCLUDE_PHI]
    inconclusive = s * tot_phi[Outcome.INCONCLUSIVE] + t * tot_psi[Outcome.INCONCLUSIVE]
    resid = float(np.max(np.abs(completeness - np.eye(protocol.dim_a))))
    return ExactEvaluation(tot_phi, tot_psi, worst, success, error, inconclusive, resid)
