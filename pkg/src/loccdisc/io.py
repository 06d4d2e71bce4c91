"""JSON instance files and protocol export.

Complex numbers are written as ``[re, im]`` pairs; Python's float repr keeps
every value round-trippable.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from pathlib import Path

import numpy as np

from .core import BipartiteState, DiscriminationInstance, canonicalize
from .errors import InputError
from .protocol import LoccProtocol

log = logging.getLogger(__name__)

NORM_WARN = 1e-8
NORM_REJECT = 1e-4


class ParseError(InputError):
    pass


def encode_complex_array(a: np.ndarray):
    a = np.asarray(a, dtype=complex)
    if a.ndim == 1:
        return [[float(z.real), float(z.imag)] for z in a]
    return [encode_complex_array(row) for row in a]


def decode_complex_vector(raw, field: str) -> np.ndarray:
    if not isinstance(raw, list):
        raise ParseError(f"field '{field}': expected a list of [re, im] pairs")
    out = np.empty(len(raw), dtype=complex)
    for k, pair in enumerate(raw):
        if (
            not isinstance(pair, list)
            or len(pair) != 2
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in pair)
        ):
            raise ParseError(f"field '{field}[{k}]': expected [re, im] with two numbers, got {pair!r}")
        out[k] = complex(pair[0], pair[1])
    return out


def decode_complex_matrix(raw) -> np.ndarray:
    return np.array([decode_complex_vector(row, "matrix") for row in raw])


def instance_to_dict(instance: DiscriminationInstance, user_labels: bool = False) -> dict:
    """Serialize; with ``user_labels`` a swapped instance is written back in the
    caller's order, so that parsing it reproduces the same canonical instance."""
    phi, psi, prior = instance.phi, instance.psi, instance.prior.s
    if user_labels and instance.prior.swapped:
        phi, psi, prior = psi, phi, instance.prior.t
    return {
        "dimA": phi.dim_a,
        "dimB": phi.dim_b,
        "phi": encode_complex_array(phi.amplitudes),
        "psi": encode_complex_array(psi.amplitudes),
        "priorPhi": prior,
    }


def write_instance(instance: DiscriminationInstance, path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(instance, user_labels=True), indent=1) + "\n")


def _field(data: dict, name: str, kind):
    if name not in data:
        raise ParseError(f"missing field '{name}'")
    value = data[name]
    if kind is int:
        if not isinstance(value, int) or isinstance(value, bool) or value < 1:
            raise ParseError(f"field '{name}': expected a positive integer, got {value!r}")
    elif kind is float:
        if not isinstance(value, (int, float)) or isinstance(value, bool) or not math.isfinite(value):
            raise ParseError(f"field '{name}': expected a number, got {value!r}")
    return value


def _state(data: dict, name: str, da: int, db: int) -> BipartiteState:
    vec = decode_complex_vector(data.get(name), name) if name in data else None
    if vec is None:
        raise ParseError(f"missing field '{name}'")
    if vec.size != da * db:
        raise ParseError(f"field '{name}': expected {da * db} amplitudes for dimA={da}, dimB={db}, got {vec.size}")
    norm = float(np.linalg.norm(vec))
    dev = abs(norm - 1.0)
    if dev > NORM_REJECT:
        raise ParseError(f"field '{name}': norm {norm:.9g} is too far from 1")
    if dev > NORM_WARN:
        log.warning("field '%s': norm %.12g renormalized", name, norm)
        vec = vec / norm
    return BipartiteState(da, db, vec)


def instance_from_dict(data: dict) -> DiscriminationInstance:
    if not isinstance(data, dict):
        raise ParseError("instance file must contain a JSON object")
    da = _field(data, "dimA", int)
    db = _field(data, "dimB", int)
    prior = float(_field(data, "priorPhi", float))
    if not 0.0 <= prior <= 1.0:
        raise ParseError(f"field 'priorPhi': must lie in [0, 1], got {prior}")
    phi = _state(data, "phi", da, db)
    psi = _state(data, "psi", da, db)
    return canonicalize(phi, psi, prior)


def parse_instance(path) -> DiscriminationInstance:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    try:
        return instance_from_dict(data)
    except ParseError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def instance_digest(instance: DiscriminationInstance) -> str:
    payload = json.dumps(instance_to_dict(instance), sort_keys=True).encode()
    return hashlib.sha256(payload).hexdigest()


def _measurement_dict(m) -> list[dict]:
    return [{"label": label.value, "operator": encode_complex_array(op)} for label, op in m.operators]


def protocol_to_dict(protocol: LoccProtocol) -> dict:
    """Everything an external checker needs: isometry, branches, posteriors, effects."""
    branches = []
    for b in protocol.branches:
        entry = {
            "label": b.label,
            "probability": b.probability,
            "postPhi": b.post_phi,
            "postPsi": b.post_psi,
            "action": b.action.value,
            "overlap": b.overlap,
        }
        if b.measurement is not None:
            entry["measurement"] = _measurement_dict(b.measurement)
        if b.subprotocol is not None:
            entry["subprotocol"] = protocol_to_dict(b.subprotocol)
        branches.append(entry)
    out = {
        "instance": instance_to_dict(protocol.instance),
        "swapped": protocol.instance.prior.swapped,
        "overlap": protocol.instance.overlap,
        "caseTag": protocol.case.value,
        "isometry": encode_complex_array(protocol.isometry),
        "labels": protocol.n_labels,
        "branches": branches,
        "analyticSuccess": protocol.analytic_success,
    }
    if protocol.effective_priors is not None:
        out["effectivePriors"] = {
            "sStar": protocol.effective_priors.s_star,
            "tStar": protocol.effective_priors.t_star,
        }
    return out
