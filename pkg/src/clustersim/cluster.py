"""Graphs, cluster-state preparation, stabilizers and measurement patterns."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np

from . import statevec as sv
from .errors import DomainError, ImpossibleBranchError, ParseError


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph on vertices 0..n_vertices-1."""

    n_vertices: int
    edges: frozenset[tuple[int, int]] = frozenset()

    def __post_init__(self) -> None:
        if self.n_vertices < 1:
            raise DomainError("graph needs at least one vertex")
        norm = set()
        for u, v in self.edges:
            u, v = int(u), int(v)
            if u == v:
                raise DomainError(f"self-loop at vertex {u}")
            if not (0 <= u < self.n_vertices and 0 <= v < self.n_vertices):
                raise DomainError(f"edge ({u}, {v}) leaves the vertex range")
            e = (min(u, v), max(u, v))
            if e in norm:
                raise DomainError(f"duplicate edge {e}")
            norm.add(e)
        object.__setattr__(self, "edges", frozenset(norm))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Sequence[int]]) -> Graph:
        # a tuple keeps repeated edges visible to the duplicate check
        return cls(n, tuple(tuple(e) for e in edges))

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def neighbours(self, v: int) -> list[int]:
        return sorted(b if a == v else a for a, b in self.edges if v in (a, b))

    def degree(self, v: int) -> int:
        return sum(1 for e in self.edges if v in e)


def path_graph(n: int) -> Graph:
    return Graph(n, frozenset((i, i + 1) for i in range(n - 1)))


def grid_graph(rows: int, cols: int) -> Graph:
    """Rectangular lattice; vertex ``r * cols + c`` (row-major)."""
    if rows < 1 or cols < 1:
        raise DomainError("grid dimensions must be positive")
    edges = set()
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            if c + 1 < cols:
                edges.add((v, v + 1))
            if r + 1 < rows:
                edges.add((v, v + cols))
    return Graph(rows * cols, frozenset(edges))


def torus_graph(rows: int, cols: int) -> Graph:
    """Periodic lattice; both sides must be >= 3 to keep the graph simple."""
    if rows < 3 or cols < 3:
        raise DomainError("torus dimensions must both be at least 3")
    edges = set()
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            right = r * cols + (c + 1) % cols
            down = ((r + 1) % rows) * cols + c
            edges.add((min(v, right), max(v, right)))
            edges.add((min(v, down), max(v, down)))
    return Graph(rows * cols, frozenset(edges))


def parse_graph(text: str) -> Graph:
    """``graph N`` header followed by ``edge U V`` lines; ``#`` comments."""
    n = None
    edges = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        try:
            if toks[0] == "graph" and len(toks) == 2 and n is None:
                n = int(toks[1])
            elif toks[0] == "edge" and len(toks) == 3 and n is not None:
                edges.append((int(toks[1]), int(toks[2])))
            else:
                raise ParseError(f"unexpected line {line!r}", lineno)
        except ValueError as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(f"bad integer in {line!r}", lineno) from None
    if n is None:
        raise ParseError("missing 'graph N' header")
    try:
        return Graph.from_edges(n, edges)
    except DomainError as exc:
        raise ParseError(str(exc)) from None


def format_graph(graph: Graph) -> str:
    lines = [f"graph {graph.n_vertices}"]
    lines += [f"edge {u} {v}" for u, v in graph.sorted_edges()]
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class PauliString:
    """Pauli word with sign; ``letters[q]`` acts on qubit ``q``."""

    letters: str
    phase: int = 1

    def __post_init__(self) -> None:
        if self.phase not in (1, -1):
            raise DomainError("phase must be +1 or -1")
        if not self.letters or set(self.letters) - set("IXYZ"):
            raise DomainError(f"bad Pauli letters {self.letters!r}")

    def __len__(self) -> int:
        return len(self.letters)

    def __str__(self) -> str:
        return ("+" if self.phase == 1 else "-") + self.letters

    def commutes_with(self, other: PauliString) -> bool:
        return anticommuting_positions(self.letters, other.letters) % 2 == 0

    def matrix(self) -> np.ndarray:
        m = np.array([[1.0 + 0j]])
        for letter in self.letters:
            m = np.kron(sv.PAULIS[letter], m)
        return self.phase * m

    def apply(self, state: sv.StateVector) -> sv.StateVector:
        out = sv.apply_pauli(state, self.letters)
        return out if self.phase == 1 else sv.StateVector(-out.amplitudes)


def anticommuting_positions(a: str, b: str) -> int:
    if len(a) != len(b):
        raise DomainError("Pauli words of different length")
    return sum(1 for x, y in zip(a, b) if x != "I" and y != "I" and x != y)


def _cz_phases(graph: Graph) -> np.ndarray:
    n = graph.n_vertices
    idx = np.arange(2**n)
    parity = np.zeros(2**n, dtype=np.int64)
    for u, v in graph.edges:
        parity ^= (idx >> u) & (idx >> v) & 1
    return 1 - 2 * parity


def prepare_cluster(graph: Graph, edge_order: Sequence[tuple[int, int]] | None = None) -> sv.StateVector:
    """|+>^n followed by CZ on every edge.

    ``edge_order`` applies the CZ gates one at a time in the given order
    (useful for checking that the order is irrelevant); by default all CZ
    phases are applied in a single diagonal pass.
    """
    n = graph.n_vertices
    if n > sv.MAX_QUBITS:
        raise DomainError(f"{n} vertices exceeds the {sv.MAX_QUBITS}-qubit cap")
    state = sv.plus_state(n)
    if edge_order is None:
        return sv.StateVector(state.amplitudes * _cz_phases(graph))
    if {(min(e), max(e)) for e in edge_order} != set(graph.edges) or len(edge_order) != len(graph.edges):
        raise DomainError("edge_order must list every edge exactly once")
    for u, v in edge_order:
        state = sv.apply_2q(state, sv.CZ, u, v)
    return state


def stabilizer_generators(graph: Graph) -> list[PauliString]:
    """S_v = X_v times Z on each neighbour of v, one per vertex."""
    n = graph.n_vertices
    gens = []
    for v in range(n):
        letters = ["I"] * n
        letters[v] = "X"
        for w in graph.neighbours(v):
            letters[w] = "Z"
        gens.append(PauliString("".join(letters)))
    return gens


def verify_stabilized(
    state: sv.StateVector, generators: Sequence[PauliString], tol: float = 1e-10
) -> tuple[bool, float]:
    """(max_v ||S_v psi - psi|| < tol, that maximum)."""
    dev = 0.0
    for g in generators:
        if len(g) != state.n_qubits:
            raise DomainError("generator length does not match the state")
        dev = max(dev, float(np.linalg.norm(g.apply(state).amplitudes - state.amplitudes)))
    return dev < tol, dev


class MeasuredPreparation(NamedTuple):
    state: sv.StateVector
    correction: PauliString

    @property
    def eigenvalues(self) -> list[int]:
        return [-1 if c == "Z" else 1 for c in self.correction.letters]

    def corrected_state(self) -> sv.StateVector:
        return self.correction.apply(self.state)


def prepare_cluster_by_measurement(graph: Graph, seed: int | None = None) -> MeasuredPreparation:
    """Measure every S_v on |0...0> and return the raw post-measurement state
    with the Z correction that maps it to the cluster state."""
    n = graph.n_vertices
    if n > sv.MAX_QUBITS:
        raise DomainError(f"{n} vertices exceeds the {sv.MAX_QUBITS}-qubit cap")
    rng = np.random.default_rng(seed)
    amps = sv.basis_state(n, [0] * n).amplitudes
    correction = ["I"] * n
    for v, gen in enumerate(stabilizer_generators(graph)):
        s_amps = sv.apply_pauli(sv.StateVector(amps), gen.letters).amplitudes
        plus_part = (amps + s_amps) / 2
        p_plus = float(np.vdot(plus_part, plus_part).real)
        if sv.draw_outcome(rng, sv.clamped_p0(p_plus, 1 - p_plus)) == 0:
            amps = plus_part / math.sqrt(p_plus)
        else:
            minus_part = (amps - s_amps) / 2
            amps = minus_part / math.sqrt(1 - p_plus)
            correction[v] = "Z"
    return MeasuredPreparation(sv.StateVector(amps), PauliString("".join(correction)))


# ------------------------------------------------------------------ patterns


@dataclass(frozen=True)
class PatternStep:
    vertex: int
    time: int
    alpha: float
    deps: frozenset[int] = frozenset()


@dataclass(frozen=True)
class MeasurementPattern:
    """Ordered measurement steps plus the vertices left unmeasured.

    Each step measures its vertex with basis U = H Z_{s alpha}, where the sign
    s is (-1) to the parity of the outcomes recorded on ``deps``.
    """

    steps: tuple[PatternStep, ...]
    outputs: tuple[int, ...]

    def validate(self, graph: Graph) -> None:
        measured = [s.vertex for s in self.steps]
        if len(set(measured)) != len(measured):
            raise DomainError("a vertex is measured twice")
        if set(measured) & set(self.outputs):
            raise DomainError("output vertices must not be measured")
        if len(set(self.outputs)) != len(self.outputs):
            raise DomainError("repeated output vertex")
        if sorted(measured + list(self.outputs)) != list(range(graph.n_vertices)):
            raise DomainError("measured and output vertices must cover the graph exactly")
        time_of = {}
        last_time = 0
        for s in self.steps:
            if s.time < 1:
                raise DomainError("time labels are positive integers")
            if s.time < last_time:
                raise DomainError("time labels must be non-decreasing")
            if not math.isfinite(s.alpha):
                raise DomainError(f"non-finite angle at vertex {s.vertex}")
            for d in s.deps:
                if d not in time_of:
                    raise DomainError(f"vertex {s.vertex} depends on unmeasured vertex {d}")
                if time_of[d] >= s.time:
                    raise DomainError(
                        f"vertex {s.vertex} depends on vertex {d} with a later or equal time label"
                    )
            time_of[s.vertex] = s.time
            last_time = s.time


@dataclass(frozen=True)
class StepRecord:
    vertex: int
    outcome: int
    sign: int
    probability: float


@dataclass(frozen=True)
class PatternTranscript:
    records: tuple[StepRecord, ...]
    output_state: sv.StateVector | None

    @property
    def joint_probability(self) -> float:
        return math.prod(r.probability for r in self.records)

    def outcomes(self) -> dict[int, int]:
        return {r.vertex: r.outcome for r in self.records}


def _resolve_sign(step: PatternStep, outcomes: dict[int, int]) -> int:
    return -1 if sum(outcomes[d] for d in step.deps) % 2 else 1


def _step_basis(step: PatternStep, sign: int) -> np.ndarray:
    return sv.hz(sign * step.alpha)


def _finish(graph, pattern, state, records) -> PatternTranscript:
    if pattern.outputs:
        fixed = {r.vertex: r.outcome for r in records}
        out = sv.extract_qubits(state, pattern.outputs, fixed)
    else:
        out = None
    return PatternTranscript(tuple(records), out)


def execute_pattern(
    graph: Graph,
    pattern: MeasurementPattern,
    seed: int | None = None,
    *,
    forced: Sequence[int] | None = None,
) -> PatternTranscript:
    """Prepare the cluster for ``graph`` and run ``pattern`` step by step.

    ``forced`` gives one outcome bit per step (in step order); otherwise
    outcomes are sampled with ``numpy.random.default_rng(seed)``. The output
    state lists ``pattern.outputs`` in order, outputs[0] least significant.
    """
    pattern.validate(graph)
    if forced is not None and len(forced) != len(pattern.steps):
        raise DomainError(f"forced mode needs {len(pattern.steps)} bits, got {len(forced)}")
    rng = np.random.default_rng(seed) if forced is None else None
    state = prepare_cluster(graph)
    outcomes: dict[int, int] = {}
    records = []
    for k, step in enumerate(pattern.steps):
        sign = _resolve_sign(step, outcomes)
        basis = _step_basis(step, sign)
        if forced is None:
            res = sv.measure_1q(state, step.vertex, basis, rng=rng)
        else:
            res = sv.measure_1q(state, step.vertex, basis, forced=forced[k])
        state = res.posterior
        outcomes[step.vertex] = res.outcome
        records.append(StepRecord(step.vertex, res.outcome, sign, res.probability))
    return _finish(graph, pattern, state, records)


def enumerate_pattern_branches(graph: Graph, pattern: MeasurementPattern) -> Iterator[PatternTranscript]:
    """Every branch with nonzero probability, depth first, sharing the work of
    common prefixes. Yields transcripts in lexicographic outcome order."""
    pattern.validate(graph)
    start = prepare_cluster(graph)
    steps = pattern.steps

    def walk(k, state, outcomes, records):
        if k == len(steps):
            yield _finish(graph, pattern, state, records)
            return
        step = steps[k]
        sign = _resolve_sign(step, outcomes)
        basis = _step_basis(step, sign)
        for bit in (0, 1):
            try:
                res = sv.measure_1q(state, step.vertex, basis, forced=bit)
            except ImpossibleBranchError:
                continue
            outcomes[step.vertex] = bit
            yield from walk(
                k + 1,
                res.posterior,
                outcomes,
                records + [StepRecord(step.vertex, bit, sign, res.probability)],
            )
            del outcomes[step.vertex]

    yield from walk(0, start, {}, [])


# ------------------------------------------------------------- JSON format


def pattern_to_dict(graph: Graph, pattern: MeasurementPattern) -> dict:
    return {
        "vertices": graph.n_vertices,
        "edges": [list(e) for e in graph.sorted_edges()],
        "steps": [
            {"vertex": s.vertex, "time": s.time, "alpha": s.alpha, "deps": sorted(s.deps)}
            for s in pattern.steps
        ],
        "outputs": list(pattern.outputs),
    }


def pattern_from_dict(data: dict) -> tuple[Graph, MeasurementPattern]:
    try:
        graph = Graph.from_edges(int(data["vertices"]), [tuple(e) for e in data["edges"]])
        steps = tuple(
            PatternStep(
                int(s["vertex"]),
                int(s["time"]),
                float(s["alpha"]),
                frozenset(int(d) for d in s.get("deps", [])),
            )
            for s in data["steps"]
        )
        pattern = MeasurementPattern(steps, tuple(int(v) for v in data["outputs"]))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, DomainError):
            raise ParseError(str(exc)) from None
        raise ParseError(f"malformed pattern document: {exc}") from None
    try:
        pattern.validate(graph)
    except DomainError as exc:
        raise ParseError(str(exc)) from None
    return graph, pattern


def load_pattern(text: str) -> tuple[Graph, MeasurementPattern]:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno) from None
    if not isinstance(data, dict):
        raise ParseError("pattern document must be a JSON object")
    return pattern_from_dict(data)
