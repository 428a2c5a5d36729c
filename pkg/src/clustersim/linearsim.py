"""Classical simulation of single-qubit measurements on linearly prepared
states.

A linear preparation starts from a product state and applies a cascade
U_{0,1}, U_{1,2}, ..., U_{n-2,n-1}; each U_{j,j+1} takes qubit j's current
state and qubit j+1's initial state (matrix index ``2 * x_j + x_{j+1}``).

Three interchangeable engines run the same measurement plans:

* ``simulate_forward``: ascending plans; carries one pure qubit state along
  the line, so memory is constant per step.
* ``simulate_any_order``: any order, including adaptive ones; keeps the
  state as a chain of tensors with bond dimension <= 2 (one cascade gate
  crosses every cut), moves the orthogonality centre to the measured site and
  absorbs the projected site into a neighbour.
* ``oracle_simulate``: dense statevector ground truth (n <= 20).

All three sample with ``statevec.draw_outcome`` from one
``numpy.random.default_rng(seed)`` draw per step, so equal seeds give equal
transcripts whenever the branch probabilities agree.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

import numpy as np

from . import statevec as sv
from .errors import DomainError, ImpossibleBranchError, ParseError

ORACLE_MAX_QUBITS = 20
MAX_ENUMERATION_STEPS = 12


@dataclass(frozen=True, eq=False)
class LinearPreparation:
    initial: np.ndarray  # (n, 2) kets
    cascade: np.ndarray  # (n - 1, 4, 4) unitaries

    def __post_init__(self) -> None:
        init = np.array(self.initial, dtype=complex)
        if init.ndim != 2 or init.shape[1] != 2 or init.shape[0] < 1:
            raise DomainError("initial states must be an (n, 2) array")
        norms = np.linalg.norm(init, axis=1)
        if np.any(norms < 1e-12):
            raise DomainError("initial state with zero norm")
        init = init / norms[:, None]
        n = init.shape[0]
        casc = np.array(self.cascade, dtype=complex).reshape(-1, 4, 4) if n > 1 else np.zeros((0, 4, 4), complex)
        if casc.shape[0] != n - 1:
            raise DomainError(f"{n} qubits need {n - 1} cascade unitaries, got {casc.shape[0]}")
        if n > 1:
            gram = np.einsum("kji,kjl->kil", casc.conj(), casc)
            if np.abs(gram - np.eye(4)).max() > sv.UNITARY_TOL:
                raise DomainError("cascade contains a non-unitary gate")
        init.setflags(write=False)
        casc.setflags(write=False)
        object.__setattr__(self, "initial", init)
        object.__setattr__(self, "cascade", casc)

    @property
    def n(self) -> int:
        return self.initial.shape[0]


def random_preparation(n: int, rng: np.random.Generator) -> LinearPreparation:
    initial = np.array([sv.random_ket(rng) for _ in range(n)])
    if n <= 1:
        return LinearPreparation(initial, np.zeros((0, 4, 4)))
    z = (rng.standard_normal((n - 1, 4, 4)) + 1j * rng.standard_normal((n - 1, 4, 4))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=1, axis2=2)
    return LinearPreparation(initial, q * (d / np.abs(d))[:, None, :])


def identity_preparation(n: int, initial: Sequence[np.ndarray] | None = None) -> LinearPreparation:
    init = np.array(initial if initial is not None else [sv.KET["zero"]] * n)
    return LinearPreparation(init, np.tile(np.eye(4, dtype=complex), (max(n - 1, 0), 1, 1)))


# ------------------------------------------------------------------- plans


@dataclass(frozen=True, eq=False)
class AdaptiveBasis:
    """Basis chosen by the outcomes on ``on`` (earlier-measured qubits);
    ``table`` maps each outcome tuple, in the order of ``on``, to a 2x2
    unitary."""

    on: tuple[int, ...]
    table: Mapping[tuple[int, ...], np.ndarray]

    def resolve(self, outcomes: Mapping[int, int]) -> np.ndarray:
        return self.table[tuple(outcomes[q] for q in self.on)]


BasisRule = Union[np.ndarray, AdaptiveBasis, None]


@dataclass(frozen=True, eq=False)
class PlanStep:
    qubit: int
    basis: BasisRule = None  # None means computational basis

    def resolve(self, outcomes: Mapping[int, int]) -> np.ndarray | None:
        if isinstance(self.basis, AdaptiveBasis):
            return self.basis.resolve(outcomes)
        return self.basis


@dataclass(frozen=True)
class MeasurementPlan:
    steps: tuple[PlanStep, ...]

    @classmethod
    def of(cls, qubits: Sequence[int], basis: np.ndarray | None = None) -> MeasurementPlan:
        return cls(tuple(PlanStep(int(q), basis) for q in qubits))

    def __len__(self) -> int:
        return len(self.steps)

    def validate(self, n: int) -> None:
        seen: set[int] = set()
        for k, step in enumerate(self.steps):
            if not 0 <= step.qubit < n:
                raise DomainError(f"step {k}: qubit {step.qubit} out of range")
            if step.qubit in seen:
                raise DomainError(f"step {k}: qubit {step.qubit} measured twice")
            rule = step.basis
            if isinstance(rule, AdaptiveBasis):
                missing = set(rule.on) - seen
                if missing:
                    raise DomainError(f"step {k}: adaptive rule reads unmeasured qubits {sorted(missing)}")
                for key in _bit_tuples(len(rule.on)):
                    if key not in rule.table:
                        raise DomainError(f"step {k}: adaptive table lacks entry {key}")
                    _check_basis(rule.table[key], k)
            elif rule is not None:
                _check_basis(rule, k)
            seen.add(step.qubit)

    def is_ascending_prefix(self) -> bool:
        return [s.qubit for s in self.steps] == list(range(len(self.steps)))


def _bit_tuples(k: int) -> list[tuple[int, ...]]:
    return [tuple((i >> (k - 1 - j)) & 1 for j in range(k)) for i in range(2**k)]


def _check_basis(u, k) -> None:
    u = np.asarray(u)
    if u.shape != (2, 2) or not sv.is_unitary(u, 1e-10):
        raise DomainError(f"step {k}: basis must be a 2x2 unitary")


@dataclass(frozen=True)
class LinearTranscript:
    steps: tuple[tuple[int, int, float], ...]  # (qubit, outcome, conditional probability)
    log_probability: float

    @property
    def joint_probability(self) -> float:
        return math.exp(self.log_probability)

    @property
    def bits(self) -> str:
        return "".join(str(b) for _, b, _ in self.steps)


# ----------------------------------------------------------------- engines


class _Engine:
    """One branch in progress: report (p0, p1) for the next step, then commit."""

    def __init__(self, plan: MeasurementPlan):
        self.plan = plan
        self.k = 0
        self.outcomes: dict[int, int] = {}

    def probabilities(self) -> tuple[float, float]:
        raise NotImplementedError

    def commit(self, bit: int, p: float) -> None:
        raise NotImplementedError

    def copy(self) -> _Engine:
        raise NotImplementedError

    def basis(self) -> np.ndarray | None:
        return self.plan.steps[self.k].resolve(self.outcomes)


def _rotate_probs(u: np.ndarray | None, block: np.ndarray) -> tuple[np.ndarray, float, float]:
    """Rotate axis 0 of ``block`` (shape (2, ...)) by u and return it with
    the squared norms of its two slices."""
    if u is not None:
        block = np.tensordot(u, block, axes=(1, 0))
    flat = block.reshape(2, -1)
    p0 = float(np.vdot(flat[0], flat[0]).real)
    p1 = float(np.vdot(flat[1], flat[1]).real)
    return block, p0, p1


class _ForwardEngine(_Engine):
    def __init__(self, prep: LinearPreparation, plan: MeasurementPlan):
        super().__init__(plan)
        self.prep = prep
        self.phi = prep.initial[0]
        self._pending = None

    def copy(self):
        other = _ForwardEngine.__new__(_ForwardEngine)
        other.plan, other.k, other.outcomes = self.plan, self.k, dict(self.outcomes)
        other.prep, other.phi, other._pending = self.prep, self.phi, self._pending
        return other

    def probabilities(self):
        j = self.k
        u = self.basis()
        if j < self.prep.n - 1:
            pair = (self.prep.cascade[j] @ np.kron(self.phi, self.prep.initial[j + 1])).reshape(2, 2)
        else:
            pair = self.phi
        block, p0, p1 = _rotate_probs(u, pair)
        total = p0 + p1
        self._pending = (block, total)
        return p0 / total, p1 / total

    def commit(self, bit, p):
        block, total = self._pending
        j = self.k
        if j < self.prep.n - 1:
            self.phi = block[bit] / math.sqrt(p * total)
        self.outcomes[self.plan.steps[j].qubit] = bit
        self.k += 1
        self._pending = None


class _ChainEngine(_Engine):
    """Bond-dimension <= 2 chain with a movable orthogonality centre.

    Live sites form a doubly linked list keyed by qubit label; measured sites
    are absorbed into a neighbour and unlinked.
    """

    def __init__(self, prep: LinearPreparation, plan: MeasurementPlan):
        super().__init__(plan)
        n = prep.n
        self.tensors: dict[int, np.ndarray] = {}
        self.prev: dict[int, int | None] = {q: q - 1 if q > 0 else None for q in range(n)}
        self.next: dict[int, int | None] = {q: q + 1 if q < n - 1 else None for q in range(n)}
        carry = prep.initial[0].reshape(1, 2)  # (left bond, physical)
        for j in range(n - 1):
            dl = carry.shape[0]
            theta = np.einsum("ab,lb->la", prep.cascade[j].reshape(4, 4), np.einsum("la,c->lac", carry, prep.initial[j + 1]).reshape(dl, 4))
            u, s, vh = np.linalg.svd(theta.reshape(dl * 2, 2), full_matrices=False)
            keep = max(1, int(np.sum(s > 1e-14 * s[0])))
            self.tensors[j] = u[:, :keep].reshape(dl, 2, keep)
            carry = s[:keep, None] * vh[:keep]
        self.tensors[n - 1] = carry.reshape(carry.shape[0], 2, 1)
        self.center = n - 1
        self._pending = None

    def copy(self):
        other = _ChainEngine.__new__(_ChainEngine)
        other.plan, other.k, other.outcomes = self.plan, self.k, dict(self.outcomes)
        other.tensors = dict(self.tensors)
        other.prev, other.next = dict(self.prev), dict(self.next)
        other.center, other._pending = self.center, self._pending
        return other

    def _move_right(self) -> None:
        c = self.center
        nxt = self.next[c]
        a = self.tensors[c]
        dl, _, dr = a.shape
        q, r = np.linalg.qr(a.reshape(dl * 2, dr))
        self.tensors[c] = q.reshape(dl, 2, q.shape[1])
        self.tensors[nxt] = np.tensordot(r, self.tensors[nxt], axes=(1, 0))
        self.center = nxt

    def _move_left(self) -> None:
        c = self.center
        prv = self.prev[c]
        a = self.tensors[c]
        dl, _, dr = a.shape
        q, r = np.linalg.qr(a.reshape(dl, 2 * dr).T)
        self.tensors[c] = q.T.reshape(q.shape[1], 2, dr)
        self.tensors[prv] = np.tensordot(self.tensors[prv], r.T, axes=(2, 0))
        self.center = prv

    def probabilities(self):
        target = self.plan.steps[self.k].qubit
        while self.center < target:
            self._move_right()
        while self.center > target:
            self._move_left()
        a = np.moveaxis(self.tensors[target], 1, 0)  # (phys, left, right)
        block, p0, p1 = _rotate_probs(self.basis(), a)
        total = p0 + p1
        self._pending = (block, total)
        return p0 / total, p1 / total

    def commit(self, bit, p):
        block, total = self._pending
        q = self.plan.steps[self.k].qubit
        m = block[bit] / math.sqrt(p * total)  # (left, right)
        prv, nxt = self.prev[q], self.next[q]
        if nxt is not None:
            self.tensors[nxt] = np.tensordot(m, self.tensors[nxt], axes=(1, 0))
            self.center = nxt
        elif prv is not None:
            self.tensors[prv] = np.tensordot(self.tensors[prv], m, axes=(2, 0))
            self.center = prv
        del self.tensors[q]
        if prv is not None:
            self.next[prv] = nxt
        if nxt is not None:
            self.prev[nxt] = prv
        self.outcomes[q] = bit
        self.k += 1
        self._pending = None


class _DenseEngine(_Engine):
    """Full statevector; measured qubits stay in the register collapsed to
    |m> (rotated frame), exactly as ``statevec.measure_1q`` leaves them."""

    def __init__(self, prep: LinearPreparation, plan: MeasurementPlan):
        super().__init__(plan)
        self.n = prep.n
        self.amps = prepare_dense(prep).amplitudes
        self._pending = None

    def copy(self):
        other = _DenseEngine.__new__(_DenseEngine)
        other.plan, other.k, other.outcomes = self.plan, self.k, dict(self.outcomes)
        other.n, other.amps, other._pending = self.n, self.amps, self._pending
        return other

    def probabilities(self):
        q = self.plan.steps[self.k].qubit
        u = self.basis()
        amps = self.amps if u is None else sv._apply_1q_unchecked(self.amps, u, q, self.n)
        view = amps.reshape(2 ** (self.n - 1 - q), 2, 2**q)
        p0 = float(np.vdot(view[:, 0, :], view[:, 0, :]).real)
        p1 = float(np.vdot(view[:, 1, :], view[:, 1, :]).real)
        total = p0 + p1
        self._pending = (view, total)
        return p0 / total, p1 / total

    def commit(self, bit, p):
        view, total = self._pending
        q = self.plan.steps[self.k].qubit
        out = np.zeros_like(view)
        out[:, bit, :] = view[:, bit, :] / math.sqrt(p * total)
        self.amps = out.reshape(-1)
        self.outcomes[q] = bit
        self.k += 1
        self._pending = None


def prepare_dense(prep: LinearPreparation) -> sv.StateVector:
    if prep.n > ORACLE_MAX_QUBITS:
        raise DomainError(f"dense oracle limited to {ORACLE_MAX_QUBITS} qubits")
    state = sv.product_state(list(prep.initial))
    for j in range(prep.n - 1):
        state = sv.StateVector(sv._apply_2q_unchecked(state.amplitudes, prep.cascade[j], j, j + 1, prep.n))
    return state


def _run(engine: _Engine, seed, forced) -> LinearTranscript:
    steps = engine.plan.steps
    if forced is not None and len(forced) != len(steps):
        raise DomainError(f"forced mode needs {len(steps)} bits, got {len(forced)}")
    rng = np.random.default_rng(seed) if forced is None else None
    out = []
    logp = 0.0
    for k in range(len(steps)):
        p0, p1 = engine.probabilities()
        if forced is None:
            bit = sv.draw_outcome(rng, sv.clamped_p0(p0, p1))
        else:
            bit = int(forced[k])
        p = p0 if bit == 0 else p1
        if p < sv.PROBABILITY_FLOOR:
            raise ImpossibleBranchError(f"step {k}: outcome {bit} has probability {p:.3g}")
        engine.commit(bit, p)
        out.append((steps[k].qubit, bit, p))
        logp += math.log(p)
    return LinearTranscript(tuple(out), logp)


def simulate_forward(
    prep: LinearPreparation, plan: MeasurementPlan, seed: int | None = None, *, forced: Sequence[int] | None = None
) -> LinearTranscript:
    """Measure qubits 0, 1, ..., k-1 in order (a suffix may stay unmeasured)."""
    plan.validate(prep.n)
    if not plan.is_ascending_prefix():
        raise DomainError("simulate_forward needs a plan measuring qubits 0..k-1 in order; use simulate_any_order")
    return _run(_ForwardEngine(prep, plan), seed, forced)


def simulate_any_order(
    prep: LinearPreparation, plan: MeasurementPlan, seed: int | None = None, *, forced: Sequence[int] | None = None
) -> LinearTranscript:
    plan.validate(prep.n)
    return _run(_ChainEngine(prep, plan), seed, forced)


def oracle_simulate(
    prep: LinearPreparation, plan: MeasurementPlan, seed: int | None = None, *, forced: Sequence[int] | None = None
) -> LinearTranscript:
    plan.validate(prep.n)
    return _run(_DenseEngine(prep, plan), seed, forced)


_ENGINES = {"forward": _ForwardEngine, "chain": _ChainEngine, "oracle": _DenseEngine}


def joint_distribution(prep: LinearPreparation, plan: MeasurementPlan, method: str = "chain") -> dict[str, float]:
    """Exact probability of every outcome string (bits in plan order).

    Branches are enumerated depth first, sharing prefixes; branches whose
    probability falls below the floor are pruned.
    """
    if len(plan) > MAX_ENUMERATION_STEPS:
        raise DomainError(f"enumeration limited to {MAX_ENUMERATION_STEPS} steps")
    if method not in _ENGINES:
        raise DomainError(f"unknown method {method!r}")
    plan.validate(prep.n)
    if method == "forward" and not plan.is_ascending_prefix():
        raise DomainError("forward enumeration needs an ascending plan")
    table: dict[str, float] = {}

    def walk(engine: _Engine, prefix: str, prob: float) -> None:
        if engine.k == len(plan):
            table[prefix] = prob
            return
        p0, p1 = engine.probabilities()
        for bit, p in ((0, p0), (1, p1)):
            if p < sv.PROBABILITY_FLOOR:
                continue
            branch = engine.copy()
            branch.commit(bit, p)
            walk(branch, prefix + str(bit), prob * p)

    walk(_ENGINES[method](prep, plan), "", 1.0)
    return table


def total_variation(p: Mapping[str, float], q: Mapping[str, float]) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


# -------------------------------------------------------- marginals and maps


def marginal_states(prep: LinearPreparation) -> list[np.ndarray]:
    """rho_j: state of qubit j after U_{j-1,j} and before U_{j,j+1}."""
    rho = np.outer(prep.initial[0], prep.initial[0].conj())
    out = [rho]
    for j in range(prep.n - 1):
        fresh = np.outer(prep.initial[j + 1], prep.initial[j + 1].conj())
        u = prep.cascade[j]
        joint = u @ np.kron(rho, fresh) @ u.conj().T
        rho = np.einsum("abac->bc", joint.reshape(2, 2, 2, 2))
        out.append(rho)
    return out


@dataclass(frozen=True, eq=False)
class TraceDecreasingMap:
    kraus: tuple[np.ndarray, ...] = field(default_factory=tuple)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return sum((k @ rho @ k.conj().T for k in self.kraus), np.zeros((2, 2), dtype=complex))

    def effect(self) -> np.ndarray:
        """Sum of K^dag K."""
        return sum((k.conj().T @ k for k in self.kraus), np.zeros((2, 2), dtype=complex))

    def is_trace_nonincreasing(self, tol: float = 1e-10) -> bool:
        return bool(np.linalg.eigvalsh(np.eye(2) - self.effect()).min() >= -tol)


def induced_map(u: np.ndarray, fresh_state: np.ndarray, basis: np.ndarray | None, outcome: int) -> TraceDecreasingMap:
    """Map induced on the left qubit of U when the right qubit, fed with
    ``fresh_state``, is measured (rotate by ``basis``, read ``outcome``).

    K = (I (x) <outcome| basis) U (I (x) |fresh>).
    """
    u = np.asarray(u, dtype=complex)
    if u.shape != (4, 4) or not sv.is_unitary(u, 1e-10):
        raise DomainError("induced_map needs a 4x4 unitary")
    fresh = np.asarray(fresh_state, dtype=complex)
    fresh = fresh / np.linalg.norm(fresh)
    b = np.eye(2, dtype=complex) if basis is None else np.asarray(basis, dtype=complex)
    u4 = u.reshape(2, 2, 2, 2)  # out_left, out_right, in_left, in_right
    k = np.einsum("r,lrab,b->la", b[outcome], u4, fresh)
    return TraceDecreasingMap((k,))


# --------------------------------------------------------------- witness


@dataclass(frozen=True)
class WitnessReport:
    ranks: tuple[int, ...]  # ranks[k-1] is the rank across {0..k-1} | {k..n-1}
    note: str = (
        "ranks refer to this qubit order only; a rank above 2 rules out a cascade "
        "along this order, not along every order"
    )

    @property
    def max_rank(self) -> int:
        return max(self.ranks, default=1)

    @property
    def consistent_with_cascade(self) -> bool:
        return self.max_rank <= 2


def linear_preparability_witness(source: sv.StateVector | LinearPreparation, tol: float = 1e-10) -> WitnessReport:
    state = prepare_dense(source) if isinstance(source, LinearPreparation) else source
    n = state.n_qubits
    return WitnessReport(tuple(sv.schmidt_rank(state, k, tol) for k in range(1, n)))


# ------------------------------------------------------------ JSON formats


def _complex(x) -> complex:
    if isinstance(x, (list, tuple)):
        if len(x) != 2:
            raise ValueError(f"complex entries are [re, im], got {x!r}")
        return complex(float(x[0]), float(x[1]))
    if isinstance(x, str):
        return complex(x.replace(" ", ""))
    return complex(float(x))


def _encode(z: complex) -> list[float]:
    return [float(z.real), float(z.imag)]


def prep_to_dict(prep: LinearPreparation) -> dict:
    return {
        "n": prep.n,
        "initial": [[_encode(a) for a in ket] for ket in prep.initial],
        "cascade": [[_encode(a) for a in u.reshape(-1)] for u in prep.cascade],
    }


def prep_from_dict(data: dict) -> LinearPreparation:
    try:
        n = int(data["n"])
        initial = []
        for s in data.get("initial", ["zero"] * n):
            initial.append(sv.KET[s] if isinstance(s, str) else [_complex(a) for a in s])
        cascade = []
        for entries in data["cascade"]:
            if len(entries) != 16:
                raise ValueError("cascade unitaries need 16 entries (row-major)")
            cascade.append(np.array([_complex(a) for a in entries]).reshape(4, 4))
        if len(initial) != n:
            raise ValueError("initial list length must equal n")
        return LinearPreparation(np.array(initial, dtype=complex), np.array(cascade, dtype=complex).reshape(-1, 4, 4))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, DomainError):
            raise ParseError(str(exc)) from None
        raise ParseError(f"malformed preparation: {exc}") from None


def _basis_from(entries) -> np.ndarray:
    if isinstance(entries, str):
        named = {"z": sv.I2, "x": sv.H, "y": sv.H @ np.diag([1, -1j])}
        return named[entries.lower()]
    if len(entries) != 4:
        raise ValueError("a basis needs 4 complex entries (row-major)")
    return np.array([_complex(a) for a in entries]).reshape(2, 2)


def plan_from_list(data: list) -> MeasurementPlan:
    """Each entry: {"qubit": q, "basis": 4 entries | "x"/"y"/"z"} or
    {"qubit": q, "adaptive": {"on": [q1, ...], "table": {"01": basis, ...}}}."""
    try:
        steps = []
        for item in data:
            q = int(item["qubit"])
            if "adaptive" in item:
                ad = item["adaptive"]
                on = tuple(int(x) for x in ad["on"])
                table = {tuple(int(c) for c in key): _basis_from(v) for key, v in ad["table"].items()}
                steps.append(PlanStep(q, AdaptiveBasis(on, table)))
            else:
                b = item.get("basis")
                steps.append(PlanStep(q, None if b is None else _basis_from(b)))
        return MeasurementPlan(tuple(steps))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed plan: {exc}") from None


def plan_to_list(plan: MeasurementPlan) -> list:
    out = []
    for s in plan.steps:
        if isinstance(s.basis, AdaptiveBasis):
            table = {"".join(map(str, k)): [_encode(a) for a in np.asarray(v).reshape(-1)] for k, v in s.basis.table.items()}
            out.append({"qubit": s.qubit, "adaptive": {"on": list(s.basis.on), "table": table}})
        elif s.basis is None:
            out.append({"qubit": s.qubit})
        else:
            out.append({"qubit": s.qubit, "basis": [_encode(a) for a in np.asarray(s.basis).reshape(-1)]})
    return out


def load_json(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno) from None
