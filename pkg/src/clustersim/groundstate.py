"""Syndrome analysis: can a cluster state be the non-degenerate ground state
of a two-body Hamiltonian whose couplings follow the graph edges?

Every interaction term P maps the cluster |C> to another stabilizer state
whose generators are +-S_v; the sign pattern is the term's syndrome. Terms
with distinct syndromes send |C> to orthogonal states, so a vertex whose
terms all carry unique, non-trivial syndromes forces H|C> to leave the span
of |C>. Syndromes are computed with exact integer arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import statevec as sv
from .cluster import Graph, PauliString, prepare_cluster
from .errors import DomainError

LETTERS = "XYZ"
MAX_EIGENSOLVE_QUBITS = 10


@dataclass(frozen=True, order=True)
class InteractionTerm:
    """Non-identity Pauli letters on one vertex or on the two ends of an edge."""

    support: tuple[int, ...]
    letters: str

    def __post_init__(self) -> None:
        if len(self.support) not in (1, 2) or len(self.letters) != len(self.support):
            raise DomainError("a term acts on one vertex or one edge")
        if any(c not in LETTERS for c in self.letters):
            raise DomainError(f"term letters must be from XYZ, got {self.letters!r}")
        if len(self.support) == 2 and self.support[0] >= self.support[1]:
            raise DomainError("two-body support must be an increasing vertex pair")

    def __str__(self) -> str:
        return "*".join(f"{c}@{v}" for c, v in zip(self.letters, self.support))

    @classmethod
    def parse(cls, text: str) -> InteractionTerm:
        parts = []
        for factor in text.split("*"):
            letter, _, vertex = factor.partition("@")
            parts.append((int(vertex), letter))
        parts.sort()
        return cls(tuple(v for v, _ in parts), "".join(c for _, c in parts))

    def word(self, n: int) -> str:
        letters = ["I"] * n
        for c, v in zip(self.letters, self.support):
            letters[v] = c
        return "".join(letters)

    def touches(self, v: int) -> bool:
        return v in self.support


Syndrome = tuple[int, ...]


def _check_term(graph: Graph, term: InteractionTerm) -> None:
    if any(not 0 <= v < graph.n_vertices for v in term.support):
        raise DomainError(f"term {term} leaves the graph")
    if len(term.support) == 2 and term.support not in graph.edges:
        raise DomainError(f"term {term} is not supported on a graph edge")


def syndrome(graph: Graph, term: InteractionTerm | PauliString) -> Syndrome:
    """+1 where the term commutes with S_v, -1 where it anticommutes."""
    n = graph.n_vertices
    if isinstance(term, PauliString):
        if len(term) != n:
            raise DomainError("Pauli string length does not match the graph")
        word = term.letters
    else:
        _check_term(graph, term)
        word = term.word(n)
    out = []
    for v in range(n):
        flips = 0
        if word[v] in "YZ":  # anticommutes with the X of S_v
            flips += 1
        for w in graph.neighbours(v):
            if word[w] in "XY":  # anticommutes with Z
                flips += 1
        out.append(-1 if flips % 2 else 1)
    return tuple(out)


def enumerate_terms(graph: Graph) -> list[InteractionTerm]:
    """3 single-body terms per non-isolated vertex and 9 per edge, in
    canonical order (single-body by vertex, then edges lexicographically)."""
    terms = []
    for v in range(graph.n_vertices):
        if graph.degree(v):
            terms += [InteractionTerm((v,), c) for c in LETTERS]
    for u, v in graph.sorted_edges():
        terms += [InteractionTerm((u, v), a + b) for a in LETTERS for b in LETTERS]
    return terms


@dataclass(frozen=True)
class VertexVerdict:
    vertex: int
    satisfies: bool
    # (term, colliding term); the partner is None when the syndrome is trivial
    witnesses: tuple[tuple[InteractionTerm, InteractionTerm | None], ...]


def _syndrome_table(graph: Graph) -> tuple[list[InteractionTerm], dict[InteractionTerm, Syndrome], dict[Syndrome, list[InteractionTerm]]]:
    terms = enumerate_terms(graph)
    syn = {t: syndrome(graph, t) for t in terms}
    by_syn: dict[Syndrome, list[InteractionTerm]] = {}
    for t in terms:
        by_syn.setdefault(syn[t], []).append(t)
    return terms, syn, by_syn


def _vertex_verdict(v, terms, syn, by_syn, n) -> VertexVerdict:
    trivial = (1,) * n
    witnesses = []
    for t in terms:
        if not t.touches(v):
            continue
        if syn[t] == trivial:
            witnesses.append((t, None))
        witnesses += [(t, other) for other in by_syn[syn[t]] if other != t]
    return VertexVerdict(v, not witnesses, tuple(witnesses))


def unique_syndrome_condition(graph: Graph, vertex: int) -> tuple[bool, list]:
    """Whether every term touching ``vertex`` has a non-trivial syndrome
    shared with no other term of the graph; returns (verdict, witnesses)."""
    if not 0 <= vertex < graph.n_vertices:
        raise DomainError(f"vertex {vertex} out of range")
    terms, syn, by_syn = _syndrome_table(graph)
    verdict = _vertex_verdict(vertex, terms, syn, by_syn, graph.n_vertices)
    return verdict.satisfies, list(verdict.witnesses)


@dataclass(frozen=True)
class AnalysisReport:
    graph: Graph
    vertices: tuple[VertexVerdict, ...]

    @property
    def qualifying(self) -> list[int]:
        return [r.vertex for r in self.vertices if r.satisfies]

    @property
    def excluded(self) -> bool:
        """True when some vertex satisfies the unique syndrome condition, so
        the cluster cannot be a non-degenerate ground state."""
        return bool(self.qualifying)

    def to_dict(self) -> dict:
        return {
            "vertices": self.graph.n_vertices,
            "edges": [list(e) for e in self.graph.sorted_edges()],
            "per_vertex": [
                {
                    "vertex": r.vertex,
                    "satisfies": r.satisfies,
                    "witnesses": [
                        [str(a), None if b is None else str(b)] for a, b in r.witnesses
                    ],
                }
                for r in self.vertices
            ],
            "qualifying": self.qualifying,
            "excluded": self.excluded,
        }


def analyze_graph(graph: Graph) -> AnalysisReport:
    terms, syn, by_syn = _syndrome_table(graph)
    return AnalysisReport(
        graph,
        tuple(_vertex_verdict(v, terms, syn, by_syn, graph.n_vertices) for v in range(graph.n_vertices)),
    )


# ------------------------------------------------------------------ numerics

Coefficients = Mapping[InteractionTerm, float]


def _hamiltonian_action(graph: Graph, coefficients: Coefficients, state: sv.StateVector) -> np.ndarray:
    out = np.zeros_like(state.amplitudes)
    for term, h in coefficients.items():
        _check_term(graph, term)
        if h:
            out = out + h * sv.apply_pauli(state, term.word(graph.n_vertices)).amplitudes
    return out


def verify_not_eigenstate(graph: Graph, coefficients: Coefficients) -> float:
    """Norm of the part of H|C> orthogonal to |C>."""
    c = prepare_cluster(graph)
    hc = _hamiltonian_action(graph, coefficients, c)
    residual = hc - np.vdot(c.amplitudes, hc) * c.amplitudes
    return float(np.linalg.norm(residual))


def hamiltonian_matrix(graph: Graph, coefficients: Coefficients) -> np.ndarray:
    n = graph.n_vertices
    if n > MAX_EIGENSOLVE_QUBITS:
        raise DomainError(f"dense Hamiltonian limited to {MAX_EIGENSOLVE_QUBITS} qubits")
    mat = np.zeros((2**n, 2**n), dtype=complex)
    for term, h in coefficients.items():
        _check_term(graph, term)
        if h:
            mat += h * PauliString(term.word(n)).matrix()
    return mat


def ground_state_overlap(graph: Graph, coefficients: Coefficients, degeneracy_tol: float = 1e-9) -> float:
    """|<C|g>| for the ground state g; for a degenerate ground space this is
    the largest overlap attainable inside it (norm of the projection)."""
    mat = hamiltonian_matrix(graph, coefficients)
    evals, evecs = np.linalg.eigh(mat)
    ground = evecs[:, evals <= evals[0] + degeneracy_tol]
    c = prepare_cluster(graph).amplitudes
    return float(min(1.0, np.linalg.norm(ground.conj().T @ c)))


def random_coefficients(
    graph: Graph, rng: np.random.Generator, terms: Sequence[InteractionTerm] | None = None
) -> dict[InteractionTerm, float]:
    """Standard-normal coefficients, resampled away from zero."""
    terms = enumerate_terms(graph) if terms is None else terms
    coeffs = {}
    for t in terms:
        h = 0.0
        while abs(h) < 1e-3:
            h = float(rng.standard_normal())
        coeffs[t] = h
    return coeffs


def format_report(report: AnalysisReport) -> str:
    lines = []
    for r in report.vertices:
        if r.satisfies:
            lines.append(f"vertex {r.vertex}: satisfies")
            continue
        shown = []
        for a, b in r.witnesses:
            shown.append(f"{a} trivial" if b is None else f"{a} ~ {b}")
        lines.append(f"vertex {r.vertex}: fails ({len(r.witnesses)} witnesses) " + "; ".join(shown))
    q = report.qualifying
    lines.append(f"qualifying vertices: {len(q)}/{report.graph.n_vertices} {q}")
    lines.append(
        "verdict: excluded (not a non-degenerate ground state of any edge-local two-body Hamiltonian)"
        if report.excluded
        else "verdict: not excluded by the unique syndrome test"
    )
    return "\n".join(lines)

