"""Compile HZ/CZ normal-form circuits into cluster graphs with adaptive
measurement patterns, and check the result branch by branch.

Bookkeeping: the logical qubit of each wire sits on the wire's current chain
vertex as ``X^x Z^z |ideal>``, where x and z are parities of measurement
records. The two rules driving the frame are

* measuring the current vertex with H Z_{(-1)^x alpha} and outcome m moves
  the qubit to a fresh vertex and maps (x, z) -> (m + z, x), because
  Z_{-a} X = X Z_a and H X^x Z^z = Z^x X^z H up to sign;
* a CZ edge between two current vertices maps z_a += x_b and z_b += x_a,
  because CZ (X (x) I) = (X (x) Z) CZ.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from . import circuit as circ
from . import statevec as sv
from .cluster import (
    Graph,
    MeasurementPattern,
    PatternStep,
    PatternTranscript,
    enumerate_pattern_branches,
    execute_pattern,
    pattern_from_dict,
    pattern_to_dict,
)
from .errors import DomainError, ParseError


@dataclass(frozen=True)
class HZLayer:
    wire: int
    alpha: float


@dataclass(frozen=True)
class CZLayer:
    a: int
    b: int


Layer = Union[HZLayer, CZLayer]


@dataclass
class NormalFormCircuit:
    """Wires start in |+>; layers are HZ_alpha on one wire or CZ on two."""

    n_wires: int
    layers: list[Layer] = field(default_factory=list)

    def validate(self) -> None:
        if not 1 <= self.n_wires <= sv.MAX_QUBITS:
            raise DomainError(f"wire count must be in [1, {sv.MAX_QUBITS}]")
        for k, layer in enumerate(self.layers):
            if isinstance(layer, HZLayer):
                if not 0 <= layer.wire < self.n_wires:
                    raise DomainError(f"layer {k}: wire {layer.wire} out of range")
                if not math.isfinite(layer.alpha):
                    raise DomainError(f"layer {k}: non-finite angle")
            elif isinstance(layer, CZLayer):
                if layer.a == layer.b:
                    raise DomainError(f"layer {k}: CZ needs two distinct wires")
                if not (0 <= layer.a < self.n_wires and 0 <= layer.b < self.n_wires):
                    raise DomainError(f"layer {k}: CZ wire out of range")
            else:
                raise DomainError(f"layer {k}: unsupported layer {layer!r}")

    def to_circuit(self) -> circ.Circuit:
        ops: list = []
        for layer in self.layers:
            if isinstance(layer, HZLayer):
                ops += [circ.RZ(layer.wire, layer.alpha), circ.H(layer.wire)]
            else:
                ops.append(circ.CZ(layer.a, layer.b))
        return circ.Circuit(self.n_wires, ops, ["plus"] * self.n_wires)

    def simulate(self) -> sv.StateVector:
        """Direct circuit simulation; wire w is qubit w of the result."""
        self.validate()
        return circ.simulate_circuit(self.to_circuit(), forced=[]).final_state


@dataclass(frozen=True)
class ByproductFrame:
    """Per-wire record-id sets whose outcome parities give the exponents of
    the byproduct X^x Z^z on that wire."""

    x_sets: tuple[frozenset[int], ...]
    z_sets: tuple[frozenset[int], ...]

    def exponents(self, outcomes: dict[int, int]) -> list[tuple[int, int]]:
        return [
            (sum(outcomes[m] for m in xs) % 2, sum(outcomes[m] for m in zs) % 2)
            for xs, zs in zip(self.x_sets, self.z_sets)
        ]


@dataclass(frozen=True)
class CompiledProgram:
    graph: Graph
    pattern: MeasurementPattern
    frame: ByproductFrame
    wire_outputs: tuple[int, ...]
    # vertex -> (wire, column) in the chain picture
    layout: dict[int, tuple[int, int]] = field(default_factory=dict)

    @property
    def n_wires(self) -> int:
        return len(self.wire_outputs)


def compile(circuit: NormalFormCircuit, *, align: bool = True) -> CompiledProgram:  # noqa: A001
    """Translate ``circuit`` into a cluster graph, pattern and final frame.

    Each wire is a horizontal chain; every HZ layer measures the wire's
    current vertex and extends the chain by one. A CZ layer toggles an edge
    between the two current vertices. With ``align`` the compiler pads the
    shorter chain with HZ(0) pairs (H H = I) when the column gap is even so
    the CZ edge is vertical; odd gaps are left as diagonal edges.

    Vertices are numbered in creation order, starting with 0..n_wires-1 for
    the first vertex of each wire; the record id of a measurement is the id
    of the measured vertex. Time labels are the earliest level consistent
    with the dependencies and steps are listed in time order.
    """
    circuit.validate()
    n = circuit.n_wires
    current = list(range(n))
    column = [0] * n
    layout = {w: (w, 0) for w in range(n)}
    edges: set[tuple[int, int]] = set()
    x_sets: list[frozenset[int]] = [frozenset()] * n
    z_sets: list[frozenset[int]] = [frozenset()] * n
    steps: list[PatternStep] = []
    time_of: dict[int, int] = {}
    next_vertex = n

    def hz(w: int, alpha: float) -> None:
        nonlocal next_vertex
        v = current[w]
        deps = x_sets[w]
        t = 1 + max((time_of[d] for d in deps), default=0)
        steps.append(PatternStep(v, t, float(alpha), deps))
        time_of[v] = t
        new = next_vertex
        next_vertex += 1
        edges.add((v, new))
        column[w] += 1
        layout[new] = (w, column[w])
        current[w] = new
        x_sets[w], z_sets[w] = z_sets[w] ^ {v}, x_sets[w]

    for layer in circuit.layers:
        if isinstance(layer, HZLayer):
            hz(layer.wire, layer.alpha)
            continue
        a, b = layer.a, layer.b
        gap = column[a] - column[b]
        if align and gap and gap % 2 == 0:
            short = b if gap > 0 else a
            for _ in range(abs(gap)):
                hz(short, 0.0)
        e = (min(current[a], current[b]), max(current[a], current[b]))
        edges.symmetric_difference_update({e})
        za, zb = z_sets[a] ^ x_sets[b], z_sets[b] ^ x_sets[a]
        z_sets[a], z_sets[b] = za, zb

    graph = Graph(next_vertex, frozenset(edges))
    if graph.n_vertices > sv.MAX_QUBITS:
        raise DomainError(
            f"compiled graph has {graph.n_vertices} vertices, above the {sv.MAX_QUBITS}-qubit cap"
        )
    ordered = tuple(sorted(steps, key=lambda s: s.time))
    pattern = MeasurementPattern(ordered, tuple(current))
    frame = ByproductFrame(tuple(x_sets), tuple(z_sets))
    return CompiledProgram(graph, pattern, frame, tuple(current), layout)


def correct_output(program: CompiledProgram, transcript: PatternTranscript) -> sv.StateVector:
    """Undo the byproduct X^x Z^z on every wire of the pattern output."""
    state = transcript.output_state
    for w, (xe, ze) in enumerate(program.frame.exponents(transcript.outcomes())):
        if xe:
            state = sv.apply_1q(state, sv.X, w)
        if ze:
            state = sv.apply_1q(state, sv.Z, w)
    return state


def run_compiled(
    program: CompiledProgram,
    seed: int | None = None,
    *,
    forced: Sequence[int] | None = None,
) -> tuple[PatternTranscript, sv.StateVector]:
    """Execute the pattern and return (transcript, corrected output); the
    corrected output has wire w on qubit w."""
    transcript = execute_pattern(program.graph, program.pattern, seed, forced=forced)
    return transcript, correct_output(program, transcript)


@dataclass(frozen=True)
class BranchCheck:
    bits: tuple[int, ...]
    probability: float
    fidelity: float
    signs_consistent: bool


@dataclass(frozen=True)
class VerificationReport:
    n_measurements: int
    branches: tuple[BranchCheck, ...]
    fidelity_tol: float
    probability_tol: float

    @property
    def expected_probability(self) -> float:
        return 2.0 ** (-self.n_measurements)

    def branch_ok(self, b: BranchCheck) -> bool:
        return (
            b.fidelity >= 1 - self.fidelity_tol
            and abs(b.probability - self.expected_probability) <= self.probability_tol
            and b.signs_consistent
        )

    @property
    def n_passed(self) -> int:
        return sum(self.branch_ok(b) for b in self.branches)

    @property
    def passed(self) -> bool:
        return self.n_passed == len(self.branches)


def _signs_consistent(pattern: MeasurementPattern, transcript: PatternTranscript) -> bool:
    outcomes = transcript.outcomes()
    for step, rec in zip(pattern.steps, transcript.records):
        parity = sum(outcomes[d] for d in step.deps) % 2
        if rec.sign != (-1) ** parity:
            return False
    return True


def verify_compilation(
    circuit: NormalFormCircuit,
    program: CompiledProgram | None = None,
    *,
    samples: int | None = None,
    seed: int | None = None,
    fidelity_tol: float = 1e-9,
    probability_tol: float = 1e-10,
) -> VerificationReport:
    """Compare corrected pattern outputs with direct simulation of ``circuit``.

    ``samples=None`` checks every branch; otherwise ``samples`` branches are
    drawn with ``numpy.random.default_rng(seed)``.
    """
    if program is None:
        program = compile(circuit)
    reference = circuit.simulate()
    if samples is None:
        transcripts = enumerate_pattern_branches(program.graph, program.pattern)
    else:
        rng = np.random.default_rng(seed)
        transcripts = (
            execute_pattern(program.graph, program.pattern, int(rng.integers(2**63)))
            for _ in range(samples)
        )
    checks = []
    for tr in transcripts:
        corrected = correct_output(program, tr)
        checks.append(
            BranchCheck(
                tuple(r.outcome for r in tr.records),
                tr.joint_probability,
                sv.fidelity_up_to_phase(corrected, reference),
                _signs_consistent(program.pattern, tr),
            )
        )
    return VerificationReport(len(program.pattern.steps), tuple(checks), fidelity_tol, probability_tol)


# ------------------------------------------------------------------- lifting

_LIFTABLE_1Q = (circ.H, circ.X, circ.Y, circ.Z, circ.RX, circ.RY, circ.RZ)


def _is_plus(s) -> bool:
    if isinstance(s, str):
        return s == "plus"
    ket = np.asarray(s, dtype=complex)
    ket = ket / np.linalg.norm(ket)
    return abs(np.vdot(sv.KET["plus"], ket)) > 1 - 1e-12


def _flush(gates: list, wire: int, out: list[Layer]) -> None:
    if not gates:
        return
    direct: list[Layer] = []
    i = 0
    while i < len(gates):
        g = gates[i]
        if isinstance(g, circ.RZ) and i + 1 < len(gates) and isinstance(gates[i + 1], circ.H):
            direct.append(HZLayer(wire, g.theta))
            i += 2
        elif isinstance(g, circ.H):
            direct.append(HZLayer(wire, 0.0))
            i += 1
        else:
            break
    else:
        out.extend(direct)
        return
    u = np.eye(2, dtype=complex)
    for g in gates:
        u = circ.gate_matrix(g) @ u
    if abs(abs(np.trace(u)) - 2) < 1e-12:
        return  # identity up to phase
    a, b, c, d, _ = circ.euler_hz_decompose(u)
    out.extend([HZLayer(wire, d), HZLayer(wire, c), HZLayer(wire, b), HZLayer(wire, a)])


def lift_general_circuit(circuit: circ.Circuit) -> NormalFormCircuit:
    """Rewrite a measurement-free circuit on |+> inputs into HZ/CZ normal form.

    Runs of single-qubit gates that are already RZ-then-H pairs (or bare H)
    map one-to-one onto HZ layers; any other run is multiplied out and
    replaced by four HZ layers. CNOT(c, t) becomes H_t CZ H_t.
    """
    circuit.validate()
    if not all(_is_plus(s) for s in circuit.initial_states):
        raise DomainError("lifting needs every wire initialised to |+>")
    pending: list[list] = [[] for _ in range(circuit.n_wires)]
    layers: list[Layer] = []
    for g in circuit.ops:
        if isinstance(g, _LIFTABLE_1Q):
            pending[g.target].append(g)
        elif isinstance(g, circ.CZ):
            for w in (g.a, g.b):
                _flush(pending[w], w, layers)
                pending[w] = []
            layers.append(CZLayer(g.a, g.b))
        elif isinstance(g, circ.CNOT):
            pending[g.target].append(circ.H(g.target))
            for w in (g.control, g.target):
                _flush(pending[w], w, layers)
                pending[w] = []
            layers.append(CZLayer(g.control, g.target))
            pending[g.target] = [circ.H(g.target)]
        else:
            raise DomainError(f"cannot lift {type(g).__name__} into HZ/CZ normal form")
    for w in range(circuit.n_wires):
        _flush(pending[w], w, layers)
    return NormalFormCircuit(circuit.n_wires, layers)


# ------------------------------------------------------------- JSON format


def program_to_dict(program: CompiledProgram) -> dict:
    data = pattern_to_dict(program.graph, program.pattern)
    data["frame"] = {
        "wires": [
            {
                "wire": w,
                "output": program.wire_outputs[w],
                "x": sorted(program.frame.x_sets[w]),
                "z": sorted(program.frame.z_sets[w]),
            }
            for w in range(program.n_wires)
        ]
    }
    if program.layout:
        data["layout"] = [[v, *program.layout[v]] for v in sorted(program.layout)]
    return data


def program_from_dict(data: dict) -> CompiledProgram:
    graph, pattern = pattern_from_dict(data)
    try:
        wires = sorted(data["frame"]["wires"], key=lambda d: int(d["wire"]))
        if [int(d["wire"]) for d in wires] != list(range(len(wires))):
            raise ParseError("frame wires must be numbered 0..k-1")
        outputs = tuple(int(d["output"]) for d in wires)
        frame = ByproductFrame(
            tuple(frozenset(int(m) for m in d["x"]) for d in wires),
            tuple(frozenset(int(m) for m in d["z"]) for d in wires),
        )
        layout = {int(v): (int(w), int(c)) for v, w, c in data.get("layout", [])}
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(f"malformed frame section: {exc}") from None
    if outputs != pattern.outputs:
        raise ParseError("frame outputs must match the pattern outputs in wire order")
    measured = {s.vertex for s in pattern.steps}
    for xs, zs in zip(frame.x_sets, frame.z_sets):
        if not (xs | zs) <= measured:
            raise ParseError("frame references a vertex that is never measured")
    return CompiledProgram(graph, pattern, frame, outputs, layout)
