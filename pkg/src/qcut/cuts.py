"""Quasi-probability decompositions of non-local operations into local channels.

Three families are built here:

* gate cut -- ``exp(i*theta*A1xA2)`` as six weighted local terms: identity,
  ``A1xA2``, and four sign-carrying-measurement / quarter-rotation pairs;
* measurement cut -- the sandwich by ``I + A1xA2`` (and, scaled by 1/4, the
  non-local projection ``(I + A1xA2)/2``) as identity, ``A1xA2``, a joint
  sign-measurement pair, and four quarter-rotation pairs;
* wire cut -- the single-qubit identity channel as eight measure-and-prepare
  pairs with weights of magnitude 1/2.

Every constructor's output can be checked with :func:`verify_cut`, which
reassembles the weighted transfer-matrix sum and returns the max-norm residual
against the target channel. A sign-carrying measurement enters the reassembly
as its sampled expectation ``(S(I+A) - S(I-A)) / 4`` (equivalently
``rho -> (A rho + rho A)/2``), and a postselected branch as the unnormalized
sandwich ``rho -> P_a rho P_a``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .paulis import (
    AXIS_MATRICES,
    PauliAxis,
    PauliTransferMatrix,
    compose,
    identity_ptm,
    pauli_vector_of_density,
    pauli_vector_of_observable,
    ptm_of_general_map,
    ptm_of_unitary,
    tensor,
)

__all__ = [
    "LocalChannelSpec",
    "CutTerm",
    "CutDecomposition",
    "PREPARE_STATES",
    "READOUT_OBSERVABLES",
    "identity_channel",
    "apply_pauli",
    "rotate",
    "sign_measure",
    "postselect",
    "prepare",
    "readout",
    "rotation_matrix",
    "channel_ptm",
    "gate_cut",
    "cz_cut",
    "cnot_cut",
    "measurement_cut",
    "scaled_projection_cut",
    "wire_cut",
    "verify_cut",
    "gate_cut_gamma",
    "decomposition_to_json",
    "decomposition_from_json",
]

_HALF_PI = np.pi / 2

_KET = {
    "0": np.array([1, 0], dtype=complex),
    "1": np.array([0, 1], dtype=complex),
    "+": np.array([1, 1], dtype=complex) / np.sqrt(2),
    "-": np.array([1, -1], dtype=complex) / np.sqrt(2),
    "+i": np.array([1, 1j], dtype=complex) / np.sqrt(2),
    "-i": np.array([1, -1j], dtype=complex) / np.sqrt(2),
}

#: Single-qubit states a wire-cut term may re-prepare.
PREPARE_STATES = {label: np.outer(k, k.conj()) for label, k in _KET.items()}

#: Observables a wire-cut term may read out ("I" records no sign).
READOUT_OBSERVABLES = ("I", "X", "Y", "Z")


@dataclass(frozen=True)
class LocalChannelSpec:
    """One primitive single-qubit operation at a cut endpoint.

    ``kind`` is one of ``identity``, ``apply_pauli``, ``rotate`` (angle
    restricted to +-pi/2, the quarter turns ``exp(+-i*pi*A/4)``),
    ``sign_measure`` (sample the outcome, keep the normalized branch, carry
    the sign), ``postselect`` (keep the unnormalized branch for outcome
    ``alpha``), ``prepare``, or ``readout``.
    """

    kind: str
    axis: PauliAxis | None = None
    angle: float | None = None
    alpha: int | None = None
    state: str | None = None
    observable: str | None = None

    def __post_init__(self):
        if self.kind in ("apply_pauli", "rotate", "sign_measure", "postselect"):
            if self.axis is None or self.axis is PauliAxis.I:
                raise ValueError(f"{self.kind} requires a non-identity Pauli axis")
        if self.kind == "rotate":
            if self.angle is None or abs(abs(self.angle) - _HALF_PI) > 1e-12:
                raise ValueError(f"rotate supports only angles +-pi/2, got {self.angle}")
        if self.kind == "postselect" and self.alpha not in (+1, -1):
            raise ValueError(f"postselect requires alpha in {{+1,-1}}, got {self.alpha}")
        if self.kind == "prepare" and self.state not in PREPARE_STATES:
            raise ValueError(f"unknown preparation state {self.state!r}")
        if self.kind == "readout" and self.observable not in READOUT_OBSERVABLES:
            raise ValueError(f"unknown readout observable {self.observable!r}")

    @property
    def carries_sign(self) -> bool:
        """Channel contributes a +-1 factor to the run's weight."""
        return self.kind == "sign_measure" or (
            self.kind == "readout" and self.observable != "I"
        )


def identity_channel() -> LocalChannelSpec:
    return LocalChannelSpec("identity")


def apply_pauli(axis: PauliAxis) -> LocalChannelSpec:
    return LocalChannelSpec("apply_pauli", axis=axis)


def rotate(axis: PauliAxis, angle: float) -> LocalChannelSpec:
    return LocalChannelSpec("rotate", axis=axis, angle=angle)


def sign_measure(axis: PauliAxis) -> LocalChannelSpec:
    return LocalChannelSpec("sign_measure", axis=axis)


def postselect(axis: PauliAxis, alpha: int) -> LocalChannelSpec:
    return LocalChannelSpec("postselect", axis=axis, alpha=alpha)


def prepare(state: str) -> LocalChannelSpec:
    return LocalChannelSpec("prepare", state=state)


def readout(observable: str) -> LocalChannelSpec:
    return LocalChannelSpec("readout", observable=observable)


def rotation_matrix(axis: PauliAxis, angle: float) -> np.ndarray:
    """``exp(i * angle * A / 2)``; at +-pi/2 this is ``(I +- iA)/sqrt(2)``."""
    a = AXIS_MATRICES[axis]
    return np.cos(angle / 2) * np.eye(2, dtype=complex) + 1j * np.sin(angle / 2) * a


def channel_ptm(spec: LocalChannelSpec) -> PauliTransferMatrix:
    """Single-qubit transfer matrix a channel contributes to a reassembly."""
    if spec.kind == "identity":
        return identity_ptm(1)
    if spec.kind == "apply_pauli":
        return ptm_of_unitary(AXIS_MATRICES[spec.axis])
    if spec.kind == "rotate":
        return ptm_of_unitary(rotation_matrix(spec.axis, spec.angle))
    if spec.kind == "sign_measure":
        a = AXIS_MATRICES[spec.axis]
        eye = np.eye(2, dtype=complex)
        plus = ptm_of_general_map(eye + a, eye + a)
        minus = ptm_of_general_map(eye - a, eye - a)
        return PauliTransferMatrix(1, (plus.entries - minus.entries) / 4.0)
    if spec.kind == "postselect":
        proj = (np.eye(2, dtype=complex) + spec.alpha * AXIS_MATRICES[spec.axis]) / 2
        return ptm_of_general_map(proj, proj)
    raise ValueError(f"channel kind {spec.kind!r} has no standalone transfer matrix")


ChannelList = tuple[LocalChannelSpec, ...]


@dataclass(frozen=True)
class CutTerm:
    """One weighted assignment of local channels to the two cut endpoints.

    Channels within an endpoint's list apply in order. Wire-cut terms use a
    single readout channel upstream and a single prepare channel downstream.
    """

    coefficient: float
    channels: tuple[ChannelList, ChannelList]

    def __post_init__(self):
        if not np.isfinite(self.coefficient) or self.coefficient == 0.0:
            raise ValueError(f"coefficient must be finite and nonzero, got {self.coefficient}")


@dataclass(frozen=True)
class CutDecomposition:
    """Weighted term list realizing a non-local operation.

    ``gamma`` is the coefficient 1-norm, with sign-carrying terms counted at
    their worst-case magnitude (|b| = 1); ``gamma**2`` is the per-cut sampling
    overhead factor.
    """

    target: str
    terms: tuple[CutTerm, ...]
    gamma: float = field(init=False)

    def __post_init__(self):
        gamma = float(sum(abs(t.coefficient) for t in self.terms))
        object.__setattr__(self, "gamma", gamma)

    @property
    def is_wire_cut(self) -> bool:
        return self.target == "wire-cut"


def _endpoint_ptm(channels: ChannelList) -> PauliTransferMatrix:
    out = identity_ptm(1)
    for spec in channels:
        out = compose(channel_ptm(spec), out)
    return out


def _term_ptm(term: CutTerm, wire: bool) -> np.ndarray:
    if not wire:
        left, right = term.channels
        return tensor(_endpoint_ptm(left), _endpoint_ptm(right)).entries
    (read,), (prep,) = term.channels
    rho = PREPARE_STATES[prep.state]
    obs = AXIS_MATRICES[PauliAxis(read.observable)]
    col = pauli_vector_of_density(rho).coefficients
    row = pauli_vector_of_observable(obs).coefficients
    return np.outer(col, row)


def reassembled_ptm(decomp: CutDecomposition) -> PauliTransferMatrix:
    """Weighted sum of the terms' transfer matrices."""
    n = 1 if decomp.is_wire_cut else 2
    total = np.zeros((4**n, 4**n))
    for term in decomp.terms:
        total += term.coefficient * _term_ptm(term, decomp.is_wire_cut)
    return PauliTransferMatrix(n, total)


def verify_cut(decomp: CutDecomposition, target: PauliTransferMatrix) -> float:
    """Max-norm residual between the reassembled sum and the target channel."""
    expected = 1 if decomp.is_wire_cut else 2
    if target.n_qubits != expected:
        raise ValueError(
            f"arity mismatch: decomposition targets {expected} qubit(s), "
            f"matrix has {target.n_qubits}"
        )
    return float(np.abs(reassembled_ptm(decomp).entries - target.entries).max())


def gate_cut_gamma(theta: float) -> float:
    """Closed-form coefficient 1-norm of the gate cut, ``1 + 2|sin(2 theta)|``."""
    return 1.0 + 2.0 * abs(np.sin(2.0 * theta))


def _require_axes(a1: PauliAxis, a2: PauliAxis):
    if PauliAxis.I in (a1, a2):
        raise ValueError("cut axes must square to the identity and differ from I")


def gate_cut(theta: float, a1: PauliAxis, a2: PauliAxis) -> CutDecomposition:
    """Decompose ``exp(i*theta*A1xA2)`` into six local terms.

    Coefficients are ``cos^2, sin^2`` on the identity and ``A1xA2`` terms and
    ``+-cos*sin`` on the four measurement/rotation pairs; exactly-zero terms
    (e.g. at theta = 0) are dropped.
    """
    _require_axes(a1, a2)
    c, s = np.cos(theta), np.sin(theta)
    raw = [
        (c * c, ((identity_channel(),), (identity_channel(),))),
        (s * s, ((apply_pauli(a1),), (apply_pauli(a2),))),
        (c * s, ((sign_measure(a1),), (rotate(a2, +_HALF_PI),))),
        (-c * s, ((sign_measure(a1),), (rotate(a2, -_HALF_PI),))),
        (c * s, ((rotate(a1, +_HALF_PI),), (sign_measure(a2),))),
        (-c * s, ((rotate(a1, -_HALF_PI),), (sign_measure(a2),))),
    ]
    terms = tuple(CutTerm(co, ch) for co, ch in raw if co != 0.0)
    return CutDecomposition(f"gate-cut(theta={theta!r},{a1.value},{a2.value})", terms)


def _fold(decomp: CutDecomposition, target: str, left: ChannelList, right: ChannelList) -> CutDecomposition:
    """Append fixed local channels after every term's endpoint channels."""
    terms = tuple(
        CutTerm(t.coefficient, (t.channels[0] + left, t.channels[1] + right))
        for t in decomp.terms
    )
    return CutDecomposition(target, terms)


def cz_cut() -> CutDecomposition:
    """CZ as the theta = -pi/4 Z,Z gate cut with a quarter Z turn folded into
    each endpoint; six terms, gamma = 3."""
    base = gate_cut(-np.pi / 4, PauliAxis.Z, PauliAxis.Z)
    rz = (rotate(PauliAxis.Z, +_HALF_PI),)
    return _fold(base, "gate-cut(CZ)", rz, rz)


def cnot_cut() -> CutDecomposition:
    """CNOT (endpoint 0 control) via the basis-conjugated CZ cut.

    Conjugating the CZ identity by H on the target maps it to the
    theta = -pi/4 Z,X cut with quarter turns about Z (control) and X (target)
    folded in; six terms, gamma = 3.
    """
    base = gate_cut(-np.pi / 4, PauliAxis.Z, PauliAxis.X)
    return _fold(
        base,
        "gate-cut(CNOT)",
        (rotate(PauliAxis.Z, +_HALF_PI),),
        (rotate(PauliAxis.X, +_HALF_PI),),
    )


def measurement_cut(a1: PauliAxis, a2: PauliAxis) -> CutDecomposition:
    """Decompose the sandwich by ``I + A1xA2`` into local terms.

    Grouped for sampling: identity and ``A1xA2`` at weight 1, the joint
    sign-measurement pair at weight 2 (the four postselect/postselect
    combinations folded into one sampled channel), and the four quarter-turn
    pairs at weight -+1/2 by rotation sign pattern.
    """
    _require_axes(a1, a2)
    raw: list[tuple[float, tuple[ChannelList, ChannelList]]] = [
        (1.0, ((identity_channel(),), (identity_channel(),))),
        (1.0, ((apply_pauli(a1),), (apply_pauli(a2),))),
        (2.0, ((sign_measure(a1),), (sign_measure(a2),))),
    ]
    for sg in (+1, -1):
        for tg in (+1, -1):
            raw.append(
                (
                    -0.5 * sg * tg,
                    ((rotate(a1, sg * _HALF_PI),), (rotate(a2, tg * _HALF_PI),)),
                )
            )
    terms = tuple(CutTerm(co, ch) for co, ch in raw)
    return CutDecomposition(f"measurement-cut({a1.value},{a2.value})", terms)


def scaled_projection_cut(a1: PauliAxis, a2: PauliAxis) -> CutDecomposition:
    """Decomposition of the non-local projection ``(I + A1xA2)/2``.

    The projection's superoperator is the ``I + A1xA2`` sandwich scaled by
    1/4, so every coefficient of :func:`measurement_cut` is quartered.
    """
    base = measurement_cut(a1, a2)
    terms = tuple(CutTerm(t.coefficient / 4.0, t.channels) for t in base.terms)
    return CutDecomposition(f"projection-cut({a1.value},{a2.value})", terms)


_WIRE_TABLE = (
    ("I", "0", +0.5),
    ("I", "1", +0.5),
    ("X", "+", +0.5),
    ("X", "-", -0.5),
    ("Y", "+i", +0.5),
    ("Y", "-i", -0.5),
    ("Z", "0", +0.5),
    ("Z", "1", -0.5),
)


def wire_cut() -> CutDecomposition:
    """Identity channel on one wire as eight measure-and-prepare pairs.

    Upstream reads out I, X, Y, or Z (recording a sign for the non-identity
    observables), downstream prepares the paired eigenstate; gamma = 4.
    """
    terms = tuple(
        CutTerm(co, ((readout(obs),), (prepare(state),)))
        for obs, state, co in _WIRE_TABLE
    )
    return CutDecomposition("wire-cut", terms)


# --- JSON term-list serialization -----------------------------------------

def _channel_to_dict(spec: LocalChannelSpec) -> dict:
    out: dict = {"kind": spec.kind}
    if spec.axis is not None:
        out["axis"] = spec.axis.value
    if spec.angle is not None:
        out["angle"] = spec.angle
    if spec.alpha is not None:
        out["alpha"] = spec.alpha
    if spec.state is not None:
        out["state"] = spec.state
    if spec.observable is not None:
        out["observable"] = spec.observable
    return out


def _channel_from_dict(data: dict) -> LocalChannelSpec:
    return LocalChannelSpec(
        kind=data["kind"],
        axis=PauliAxis(data["axis"]) if "axis" in data else None,
        angle=data.get("angle"),
        alpha=data.get("alpha"),
        state=data.get("state"),
        observable=data.get("observable"),
    )


def decomposition_to_json(decomp: CutDecomposition, *, indent: int | None = 2) -> str:
    payload = {
        "target": decomp.target,
        "gamma": decomp.gamma,
        "terms": [
            {
                "coefficient": t.coefficient,
                "endpoints": [[_channel_to_dict(c) for c in side] for side in t.channels],
            }
            for t in decomp.terms
        ],
    }
    return json.dumps(payload, indent=indent, sort_keys=True)


def decomposition_from_json(text: str) -> CutDecomposition:
    data = json.loads(text)
    terms = []
    for i, entry in enumerate(data["terms"]):
        try:
            sides = entry["endpoints"]
            channels = tuple(tuple(_channel_from_dict(c) for c in side) for side in sides)
            terms.append(CutTerm(float(entry["coefficient"]), channels))
        except (KeyError, ValueError, TypeError) as exc:
            raise ValueError(f"terms[{i}]: {exc}") from exc
    return CutDecomposition(data["target"], tuple(terms))
