"""Circuit IR, a direct simulator with classical feedforward, and the
single-qubit HZ normal form.

Text format (one instruction per line, ``#`` starts a comment)::

    qubits 2
    init 0 plus          # zero | one | plus | minus, default zero
    h 0                  # also x, y, z
    rz 1 pi/4            # also rx, ry; angles are floats or k*pi/d forms
    hz 1 0.3             # sugar for: rz 1 0.3 ; h 1
    cnot 0 1
    cz 0 1
    measure 0 a          # record id optional, defaults to m<k>
    cmeas-x 1 if a       # apply X to wire 1 iff parity of the listed records is 1
    cmeas-z 1 if a^b     # also cmeas-y, cmeas-h
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np

from . import statevec as sv
from .errors import DomainError, ParseError


@dataclass(frozen=True)
class H:
    target: int


@dataclass(frozen=True)
class X:
    target: int


@dataclass(frozen=True)
class Y:
    target: int


@dataclass(frozen=True)
class Z:
    target: int


@dataclass(frozen=True)
class RX:
    target: int
    theta: float


@dataclass(frozen=True)
class RY:
    target: int
    theta: float


@dataclass(frozen=True)
class RZ:
    target: int
    theta: float


@dataclass(frozen=True)
class CNOT:
    control: int
    target: int


@dataclass(frozen=True)
class CZ:
    a: int
    b: int


@dataclass(frozen=True, eq=False)
class ControlledU:
    control: int
    target: int
    u: np.ndarray
    control_value: int = 1


@dataclass(frozen=True, eq=False)
class Measure:
    target: int
    record_id: str
    basis: np.ndarray | None = None


@dataclass(frozen=True)
class ClassicalCondition:
    records: frozenset[str]
    parity: int = 1

    def holds(self, outcomes: dict[str, int]) -> bool:
        return sum(outcomes[r] for r in self.records) % 2 == self.parity


@dataclass(frozen=True)
class ConditionalGate:
    condition: ClassicalCondition
    inner: "Gate"


SingleQubitGate = Union[H, X, Y, Z, RX, RY, RZ]
Gate = Union[H, X, Y, Z, RX, RY, RZ, CNOT, CZ, ControlledU, Measure, ConditionalGate]

_FIXED = {H: sv.H, X: sv.X, Y: sv.Y, Z: sv.Z}
_ROTATIONS = {RX: sv.rx, RY: sv.ry, RZ: sv.rz}


def gate_qubits(g: Gate) -> tuple[int, ...]:
    if isinstance(g, CNOT):
        return (g.control, g.target)
    if isinstance(g, CZ):
        return (g.a, g.b)
    if isinstance(g, ControlledU):
        return (g.control, g.target)
    if isinstance(g, ConditionalGate):
        return gate_qubits(g.inner)
    return (g.target,)


def gate_matrix(g: Gate) -> np.ndarray:
    """2x2 or 4x4 matrix of a unitary gate; two-qubit matrices are ordered as
    ``gate_qubits(g)``."""
    if type(g) in _FIXED:
        return _FIXED[type(g)].copy()
    if type(g) in _ROTATIONS:
        if not math.isfinite(g.theta):
            raise DomainError(f"non-finite angle in {g}")
        return _ROTATIONS[type(g)](g.theta)
    if isinstance(g, CNOT):
        return sv.CNOT.copy()
    if isinstance(g, CZ):
        return sv.CZ.copy()
    if isinstance(g, ControlledU):
        u = np.asarray(g.u, dtype=complex)
        if u.shape != (2, 2) or not sv.is_unitary(u):
            raise DomainError("ControlledU needs a 2x2 unitary")
        return sv.controlled(u, g.control_value)
    raise DomainError(f"{type(g).__name__} has no unitary matrix")


@dataclass
class Circuit:
    n_wires: int
    ops: list[Gate] = field(default_factory=list)
    # per-wire label from statevec.KET or an explicit 2-vector
    initial_states: list = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.initial_states:
            self.initial_states = ["zero"] * self.n_wires

    def initial_state(self) -> sv.StateVector:
        kets = []
        for s in self.initial_states:
            if isinstance(s, str):
                if s not in sv.KET:
                    raise DomainError(f"unknown initial state {s!r}")
                kets.append(sv.KET[s])
            else:
                ket = np.asarray(s, dtype=complex)
                kets.append(ket / np.linalg.norm(ket))
        return sv.product_state(kets)

    def measure_ops(self) -> list[Measure]:
        return [g for g in self.ops if isinstance(g, Measure)]

    def validate(self) -> None:
        if self.n_wires < 1:
            raise DomainError("circuit needs at least one wire")
        if len(self.initial_states) != self.n_wires:
            raise DomainError("one initial state per wire required")
        seen: set[str] = set()
        for k, g in enumerate(self.ops):
            qs = gate_qubits(g)
            if any(not 0 <= q < self.n_wires for q in qs):
                raise DomainError(f"op {k} ({g}) addresses a wire out of range")
            if len(set(qs)) != len(qs):
                raise DomainError(f"op {k} ({g}) repeats a wire")
            if isinstance(g, ConditionalGate):
                if isinstance(g.inner, (Measure, ConditionalGate)):
                    raise DomainError(f"op {k}: conditional body must be a unitary gate")
                missing = g.condition.records - seen
                if missing:
                    raise DomainError(
                        f"op {k}: condition reads records {sorted(missing)} not yet produced"
                    )
                gate_matrix(g.inner)
            elif isinstance(g, Measure):
                if g.record_id in seen:
                    raise DomainError(f"duplicate record id {g.record_id!r}")
                seen.add(g.record_id)
            else:
                gate_matrix(g)


@dataclass(frozen=True)
class Transcript:
    outcomes: list[tuple[str, int, float]]
    final_state: sv.StateVector
    live_wires: tuple[int, ...]

    @property
    def joint_probability(self) -> float:
        return math.prod(p for _, _, p in self.outcomes)

    def bits(self) -> dict[str, int]:
        return {rid: b for rid, b, _ in self.outcomes}


def _apply_gate(state: sv.StateVector, g: Gate) -> sv.StateVector:
    m = gate_matrix(g)
    qs = gate_qubits(g)
    if len(qs) == 1:
        return sv.apply_1q(state, m, qs[0])
    return sv.apply_2q(state, m, qs[0], qs[1])


def simulate_circuit(
    circuit: Circuit,
    seed: int | None = None,
    *,
    forced: Sequence[int] | None = None,
) -> Transcript:
    """Run ``circuit`` gate by gate.

    With ``forced`` (one bit per Measure, in circuit order) the branch is
    selected deterministically; otherwise outcomes are sampled from
    ``numpy.random.default_rng(seed)``.
    """
    circuit.validate()
    n_meas = len(circuit.measure_ops())
    if forced is not None and len(forced) != n_meas:
        raise DomainError(f"forced mode needs {n_meas} bits, got {len(forced)}")
    rng = np.random.default_rng(seed) if forced is None else None
    state = circuit.initial_state()
    outcomes: list[tuple[str, int, float]] = []
    record: dict[str, int] = {}
    measured: set[int] = set()
    for g in circuit.ops:
        if isinstance(g, Measure):
            if forced is None:
                res = sv.measure_1q(state, g.target, g.basis, rng=rng)
            else:
                res = sv.measure_1q(state, g.target, g.basis, forced=forced[len(outcomes)])
            state = res.posterior
            record[g.record_id] = res.outcome
            outcomes.append((g.record_id, res.outcome, res.probability))
            measured.add(g.target)
        elif isinstance(g, ConditionalGate):
            if g.condition.holds(record):
                state = _apply_gate(state, g.inner)
        else:
            state = _apply_gate(state, g)
    live = tuple(w for w in range(circuit.n_wires) if w not in measured)
    return Transcript(outcomes, state, live)


def circuit_unitary(circuit: Circuit) -> np.ndarray:
    """Dense unitary of a measurement-free circuit (columns are images of
    basis states)."""
    if any(isinstance(g, (Measure, ConditionalGate)) for g in circuit.ops):
        raise DomainError("circuit_unitary needs a measurement-free circuit")
    n = circuit.n_wires
    cols = []
    for idx in range(2**n):
        state = sv.basis_state(n, [(idx >> q) & 1 for q in range(n)])
        for g in circuit.ops:
            state = _apply_gate(state, g)
        cols.append(state.amplitudes)
    return np.array(cols).T


def euler_hz_decompose(u: np.ndarray) -> tuple[float, float, float, float, float]:
    """Angles (a, b, c, d) and phase with
    ``exp(i*phase) (H Z_a)(H Z_b)(H Z_c)(H Z_d) == u``.

    Uses (HZ_a)(HZ_b)(HZ_c)(HZ_d) = X_a Z_b X_c Z_d and a Z-X-Z Euler
    factorization of ``u``; the leading X slot is always the identity (a = 0).
    As a circuit the factors act right to left: HZ_d first.
    """
    u = np.asarray(u, dtype=complex)
    if u.shape != (2, 2) or not sv.is_unitary(u, 1e-10):
        raise DomainError("euler_hz_decompose needs a 2x2 unitary")
    v = u / np.sqrt(np.linalg.det(u))
    # v ~ Z_b X_c Z_d = [[cos(c/2) e^{-i(b+d)/2}, -i sin(c/2) e^{-i(b-d)/2}],
    #                    [-i sin(c/2) e^{i(b-d)/2},  cos(c/2) e^{i(b+d)/2}]]
    cos_half, sin_half = abs(v[0, 0]), abs(v[1, 0])
    c = 2.0 * math.atan2(sin_half, cos_half)
    b_plus_d = -2.0 * np.angle(v[0, 0]) if cos_half > 1e-12 else 0.0
    b_minus_d = 2.0 * (np.angle(v[1, 0]) + math.pi / 2) if sin_half > 1e-12 else 0.0
    b = _wrap((b_plus_d + b_minus_d) / 2)
    d = _wrap((b_plus_d - b_minus_d) / 2)
    a = 0.0
    m = sv.hz(a) @ sv.hz(b) @ sv.hz(c) @ sv.hz(d)
    phase = float(np.angle(np.trace(m.conj().T @ u)))
    err = np.abs(np.exp(1j * phase) * m - u).max()
    if err > 1e-10:  # pragma: no cover - numerical guard
        raise DomainError(f"Euler reconstruction error {err:.3g}")
    return a, b, _wrap(c), d, phase


def _wrap(angle: float) -> float:
    """Map to (-pi, pi]; exact zero stays zero."""
    w = math.remainder(float(angle), 2 * math.pi)
    return 0.0 if w == 0 else w


# ---------------------------------------------------------------- text format

_ANGLE = re.compile(
    r"^(?P<sign>[+-])?(?:(?P<coef>\d+(?:\.\d*)?|\.\d+)\*?)?pi(?:/(?P<den>\d+(?:\.\d*)?))?$"
)


def parse_angle(token: str) -> float:
    try:
        value = float(token)
    except ValueError:
        m = _ANGLE.match(token.strip().lower())
        if not m:
            raise ValueError(f"bad angle {token!r}") from None
        value = math.pi * float(m["coef"] or 1) / float(m["den"] or 1)
        if m["sign"] == "-":
            value = -value
    if not math.isfinite(value):
        raise ValueError(f"non-finite angle {token!r}")
    return value


_ONE_Q = {"h": H, "x": X, "y": Y, "z": Z}
_ROT_Q = {"rx": RX, "ry": RY, "rz": RZ}
_CMEAS = {"cmeas-x": X, "cmeas-y": Y, "cmeas-z": Z, "cmeas-h": H}


def parse_circuit(text: str) -> Circuit:
    """Parse the line-oriented circuit format; unknown tokens are errors."""
    n_wires: int | None = None
    inits: dict[int, str] = {}
    ops: list[Gate] = []
    n_meas = 0

    def wire(tok: str, lineno: int) -> int:
        try:
            w = int(tok)
        except ValueError:
            raise ParseError(f"expected wire index, got {tok!r}", lineno) from None
        if n_wires is None:
            raise ParseError("'qubits N' must come first", lineno)
        if not 0 <= w < n_wires:
            raise ParseError(f"wire {w} out of range", lineno)
        return w

    def arity(toks: list[str], k: int, lineno: int) -> None:
        if len(toks) != k:
            raise ParseError(f"{toks[0]!r} takes {k - 1} argument(s)", lineno)

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        op = toks[0].lower()
        if op == "qubits":
            arity(toks, 2, lineno)
            if n_wires is not None:
                raise ParseError("duplicate 'qubits' line", lineno)
            try:
                n_wires = int(toks[1])
            except ValueError:
                raise ParseError(f"bad qubit count {toks[1]!r}", lineno) from None
            if not 1 <= n_wires <= sv.MAX_QUBITS:
                raise ParseError(f"qubit count must be in [1, {sv.MAX_QUBITS}]", lineno)
        elif op == "init":
            arity(toks, 3, lineno)
            w = wire(toks[1], lineno)
            if toks[2] not in sv.KET:
                raise ParseError(f"unknown initial state {toks[2]!r}", lineno)
            inits[w] = toks[2]
        elif op in _ONE_Q:
            arity(toks, 2, lineno)
            ops.append(_ONE_Q[op](wire(toks[1], lineno)))
        elif op in _ROT_Q or op == "hz":
            arity(toks, 3, lineno)
            w = wire(toks[1], lineno)
            try:
                theta = parse_angle(toks[2])
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
            if op == "hz":
                ops.extend([RZ(w, theta), H(w)])
            else:
                ops.append(_ROT_Q[op](w, theta))
        elif op in ("cnot", "cz"):
            arity(toks, 3, lineno)
            a, b = wire(toks[1], lineno), wire(toks[2], lineno)
            if a == b:
                raise ParseError(f"{op} needs two distinct wires", lineno)
            ops.append(CNOT(a, b) if op == "cnot" else CZ(a, b))
        elif op == "measure":
            if len(toks) not in (2, 3):
                raise ParseError("usage: measure W [ID]", lineno)
            w = wire(toks[1], lineno)
            rid = toks[2] if len(toks) == 3 else f"m{n_meas}"
            ops.append(Measure(w, rid))
            n_meas += 1
        elif op in _CMEAS:
            if len(toks) != 4 or toks[2].lower() != "if":
                raise ParseError(f"usage: {op} W if ID1^ID2...", lineno)
            w = wire(toks[1], lineno)
            records = [r for r in toks[3].split("^")]
            if any(not r for r in records):
                raise ParseError(f"bad record list {toks[3]!r}", lineno)
            cond = ClassicalCondition(frozenset(records), 1)
            ops.append(ConditionalGate(cond, _CMEAS[op](w)))
        else:
            raise ParseError(f"unknown instruction {toks[0]!r}", lineno)

    if n_wires is None:
        raise ParseError("missing 'qubits N' line")
    circuit = Circuit(n_wires, ops, [inits.get(w, "zero") for w in range(n_wires)])
    try:
        circuit.validate()
    except DomainError as exc:
        raise ParseError(str(exc)) from None
    return circuit


def format_circuit(circuit: Circuit) -> str:
    """Inverse of ``parse_circuit`` for the gates the text format can express."""
    lines = [f"qubits {circuit.n_wires}"]
    for w, s in enumerate(circuit.initial_states):
        if not isinstance(s, str):
            raise DomainError("explicit initial vectors have no text form")
        if s != "zero":
            lines.append(f"init {w} {s}")
    names = {v: k for k, v in _ONE_Q.items()}
    rot_names = {v: k for k, v in _ROT_Q.items()}
    cnames = {v: k for k, v in _CMEAS.items()}
    for g in circuit.ops:
        if type(g) in names:
            lines.append(f"{names[type(g)]} {g.target}")
        elif type(g) in rot_names:
            lines.append(f"{rot_names[type(g)]} {g.target} {g.theta!r}")
        elif isinstance(g, CNOT):
            lines.append(f"cnot {g.control} {g.target}")
        elif isinstance(g, CZ):
            lines.append(f"cz {g.a} {g.b}")
        elif isinstance(g, Measure) and g.basis is None:
            lines.append(f"measure {g.target} {g.record_id}")
        elif (
            isinstance(g, ConditionalGate)
            and type(g.inner) in cnames
            and g.condition.parity == 1
        ):
            recs = "^".join(sorted(g.condition.records))
            lines.append(f"{cnames[type(g.inner)]} {g.inner.target} if {recs}")
        else:
            raise DomainError(f"{g} has no text form")
    return "\n".join(lines) + "\n"


def iter_branches(k: int) -> Iterable[tuple[int, ...]]:
    """All 2**k bit tuples in lexicographic order."""
    for idx in range(2**k):
        yield tuple((idx >> (k - 1 - j)) & 1 for j in range(k))
