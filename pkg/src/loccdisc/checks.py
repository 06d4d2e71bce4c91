"""Residual-based invariant checks for every pipeline stage.

Each check reports a residual and the threshold it is held to, so the same
code backs the test suite and the ``verify`` command.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import DEFAULT_TOL, DiscriminationInstance, PriorPair, Tolerances, validate_measurement
from .expansion import (
    AliceExpansion,
    WEIGHT_FLOOR,
    ratio_violations,
    realness_residual,
    weight_residual,
)
from .optimum import measurement_errors, pmax
from .protocol import Action, AncillaExpansion, LoccProtocol, evaluate_exact


@dataclass(frozen=True)
class CheckResult:
    name: str
    residual: float
    threshold: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.residual)) and self.residual <= self.threshold

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] {self.name}: {self.residual:.3e} (<= {self.threshold:.1e})"


def expansion_residuals(exp: AliceExpansion, instance: DiscriminationInstance) -> dict[str, float]:
    P, Q = exp.reconstruct()
    return {
        "basis_unitarity": float(np.max(np.abs(exp.basis.conj().T @ exp.basis - np.eye(exp.n)))),
        "s_weight_sum": abs(float(exp.s_weights.sum()) - 1.0),
        "t_weight_sum": abs(float(exp.t_weights.sum()) - 1.0),
        "reconstruction": float(
            max(np.max(np.abs(P - instance.phi.matrix)), np.max(np.abs(Q - instance.psi.matrix)))
        ),
        "overlap_invariance": abs(complex(exp.products.sum()) - instance.overlap),
    }


def ratio_bound_residual(exp: AliceExpansion, prior: PriorPair) -> float:
    """max_i d_i - sqrt(s s_i / (t t_i)) over non-degenerate terms, clipped at 0."""
    v = ratio_violations(exp, prior)
    return max(float(np.max(v)), 0.0)


def weak_weight_residual(exp: AliceExpansion, prior: PriorPair) -> float:
    return max(float(np.max(prior.s * exp.s_weights - prior.t * exp.t_weights)), 0.0)


def ancilla_residuals(anc: AncillaExpansion, instance: DiscriminationInstance) -> dict[str, float]:
    prior = anc.construction_prior
    V = anc.isometry
    da, db = anc.dim_a, anc.dim_b
    ext_phi = (V @ instance.phi.matrix).reshape(-1)
    ext_psi = (V @ instance.psi.matrix).reshape(-1)
    asm_phi = anc.assembled("phi")
    asm_psi = anc.assembled("psi")

    def gram(a, b):
        return np.array([[np.vdot(a, a), np.vdot(a, b)], [np.vdot(b, a), np.vdot(b, b)]])

    g0 = gram(instance.phi.amplitudes, instance.psi.amplitudes)
    block_orth = max(
        (abs(np.vdot(b.phi_block.amplitudes, b.psi_block.amplitudes)) for b in anc.orthogonal_blocks),
        default=0.0,
    )
    bound = 0.0
    min_d = 0.0
    r = math.sqrt(prior.s / prior.t)
    for term in anc.ratio_terms:
        min_d = min(min_d, term.d)
        if term.s > WEIGHT_FLOOR and term.t > WEIGHT_FLOOR:
            bound = max(bound, term.d - r * math.sqrt(term.s / term.t))
    s_total = sum(b.s for b in anc.orthogonal_blocks) + sum(t.s for t in anc.ratio_terms)
    t_total = sum(b.t for b in anc.orthogonal_blocks) + sum(t.t for t in anc.ratio_terms)
    return {
        "block_orthogonality": float(block_orth),
        "ratio_bound": float(bound),
        "negative_overlap": float(-min_d),
        "isometry": float(np.max(np.abs(V.conj().T @ V - np.eye(da)))),
        "assembly": float(max(np.max(np.abs(ext_phi - asm_phi)), np.max(np.abs(ext_psi - asm_psi)))),
        "gram": float(np.max(np.abs(gram(asm_phi, asm_psi) - g0))),
        "s_weight_sum": abs(s_total - 1.0),
        "t_weight_sum": abs(t_total - 1.0),
    }


def quadratic_structure(anc: AncillaExpansion) -> dict[str, float]:
    """Under (s*, t*) every kept term sits on the ratio bound and carries all of phi."""
    prior = anc.construction_prior
    r = math.sqrt(prior.s / prior.t)
    eq = 0.0
    for term in anc.ratio_terms:
        if term.s > WEIGHT_FLOOR and term.t > WEIGHT_FLOOR:
            eq = max(eq, abs(term.d - r * math.sqrt(term.s / term.t)))
    return {
        "ratio_equality": eq,
        "ratio_s_sum": abs(sum(t.s for t in anc.ratio_terms) - 1.0),
    }


def _walk_branches(protocol: LoccProtocol):
    for b in protocol.branches:
        yield protocol, b
        if b.subprotocol is not None:
            yield from _walk_branches(b.subprotocol)


def branch_residuals(protocol: LoccProtocol, tol: Tolerances = DEFAULT_TOL) -> dict[str, float]:
    posterior = 0.0
    measurement = 0.0
    cross = 0.0
    for owner, b in _walk_branches(protocol):
        posterior = max(posterior, abs(b.post_phi + b.post_psi - 1.0))
        if b.measurement is not None:
            v = validate_measurement(b.measurement, tol)
            measurement = max(measurement, v.completeness, max(-v.min_eigenvalue, 0.0), v.hermiticity)
    ev = evaluate_exact(protocol)
    cross = ev.worst_leaf_cross
    top_sum = abs(sum(b.probability for b in protocol.branches) - 1.0)
    # P_i = s s_i + t t_i, recomputed from Alice's Kraus operators
    inst = protocol.instance
    prob_formula = 0.0
    for b in protocol.branches:
        K = protocol.kraus(b.label)
        w_phi = float(np.linalg.norm(K @ inst.phi.matrix) ** 2)
        w_psi = float(np.linalg.norm(K @ inst.psi.matrix) ** 2)
        prob_formula = max(prob_formula, abs(inst.s * w_phi + inst.t * w_psi - b.probability))
    return {
        "branch_probability_sum": top_sum,
        "branch_probability_formula": prob_formula,
        "posterior_sum": posterior,
        "measurement_validity": measurement,
        "cross_conclusion": cross,
        "instrument_completeness": ev.instrument_residual,
        "exact_success_vs_pmax": abs(ev.success - pmax(inst.prior, inst.overlap, tol).value),
    }


def bob_zero_error(protocol: LoccProtocol) -> float:
    """Largest single-branch error of Bob's measurement on its two candidate vectors."""
    worst = 0.0
    anc = protocol.ancilla
    if anc is None:
        return 0.0
    by_label = {t.label: t for t in anc.ratio_terms}
    for b in protocol.branches:
        if b.action is Action.BOB_MEASUREMENT:
            term = by_label[b.label]
            worst = max(worst, *measurement_errors(b.measurement, term.eta, term.gamma))
    return worst


# thresholds from the acceptance criteria
THRESHOLDS = {
    "realness": 1e-10,
    "weight_equality": 1e-9,
    "ratio_bound": 1e-8,
    "reconstruction": 1e-9,
    "ancilla": 1e-9,
    "optimality": 1e-9,
    "zero_error": 1e-10,
    "quadratic_equality": 1e-8,
    "quadratic_sum": 1e-9,
}


def invariant_suite(
    protocol: LoccProtocol, tol: Tolerances = DEFAULT_TOL, override: float | None = None
) -> list[CheckResult]:
    """All stage and protocol invariants of a built protocol as pass/fail results."""
    th = {k: (override if override is not None else v) for k, v in THRESHOLDS.items()}
    inst = protocol.instance
    out: list[CheckResult] = []
    stages = protocol.stage_expansions
    construction = protocol.ancilla.construction_prior if protocol.ancilla else inst.prior

    for name, exp in stages.items():
        for key, val in expansion_residuals(exp, inst).items():
            out.append(CheckResult(f"{name}.{key}", val, th["reconstruction"]))
    if "real" in stages:
        out.append(CheckResult("real.realness", realness_residual(stages["real"]), th["realness"]))
    if "weights" in stages:
        out.append(CheckResult("weights.equality", weight_residual(stages["weights"]), th["weight_equality"]))
        out.append(CheckResult("weights.realness", realness_residual(stages["weights"]), th["realness"]))
    if "ratios" in stages:
        r = stages["ratios"]
        out.append(CheckResult("ratios.bound", ratio_bound_residual(r, construction), th["ratio_bound"]))
        out.append(CheckResult("ratios.weak_weights", weak_weight_residual(r, construction), th["ratio_bound"]))
        out.append(CheckResult("ratios.realness", realness_residual(r), th["realness"]))
    if protocol.ancilla is not None:
        for key, val in ancilla_residuals(protocol.ancilla, inst).items():
            out.append(CheckResult(f"ancilla.{key}", val, th["ancilla"]))
        if protocol.effective_priors is not None:
            q = quadratic_structure(protocol.ancilla)
            out.append(CheckResult("quadratic.ratio_equality", q["ratio_equality"], th["quadratic_equality"]))
            out.append(CheckResult("quadratic.ratio_s_sum", q["ratio_s_sum"], th["quadratic_sum"]))
    br = branch_residuals(protocol, tol)
    out.append(CheckResult("branches.probability_sum", br["branch_probability_sum"], th["optimality"]))
    out.append(CheckResult("branches.probability_formula", br["branch_probability_formula"], th["optimality"]))
    out.append(CheckResult("branches.posterior_sum", br["posterior_sum"], th["optimality"]))
    out.append(CheckResult("branches.measurement_validity", br["measurement_validity"], tol.eps_psd))
    out.append(CheckResult("branches.cross_conclusion", br["cross_conclusion"], th["zero_error"]))
    out.append(CheckResult("branches.bob_zero_error", bob_zero_error(protocol), th["zero_error"]))
    out.append(CheckResult("alice.instrument_completeness", br["instrument_completeness"], th["ancilla"]))
    opt = pmax(inst.prior, inst.overlap, tol).value
    out.append(CheckResult("optimality.analytic_vs_pmax", abs(protocol.analytic_success - opt), th["optimality"]))
    out.append(CheckResult("optimality.exact_vs_pmax", br["exact_success_vs_pmax"], th["optimality"]))
    return out
