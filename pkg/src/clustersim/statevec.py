"""Dense statevector engine.

Index convention is little-endian: qubit ``q`` is bit ``q`` of the basis
index, so ``basis_state(3, "010")`` has its amplitude at index 2. Two-qubit
matrices act on the ordered pair ``(first, second)`` with local index
``2 * x_first + x_second``, i.e. the usual textbook layout for CNOT with the
control listed first.

All operations return new ``StateVector`` objects; inputs are never mutated.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, ImpossibleBranchError

MAX_QUBITS = 24
UNITARY_TOL = 1e-12
# Outcomes with probability below this are treated as impossible.
PROBABILITY_FLOOR = 1e-14

SQRT2_INV = 1.0 / np.sqrt(2.0)

I2 = np.eye(2, dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) * SQRT2_INV
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)
CZ = np.diag([1, 1, 1, -1]).astype(complex)
SWAP = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
)

PAULIS = {"I": I2, "X": X, "Y": Y, "Z": Z}

KET = {
    "zero": np.array([1, 0], dtype=complex),
    "one": np.array([0, 1], dtype=complex),
    "plus": np.array([1, 1], dtype=complex) * SQRT2_INV,
    "minus": np.array([1, -1], dtype=complex) * SQRT2_INV,
}


def rx(theta: float) -> np.ndarray:
    """exp(-i theta X / 2)."""
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def ry(theta: float) -> np.ndarray:
    """exp(-i theta Y / 2)."""
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz(theta: float) -> np.ndarray:
    """exp(-i theta Z / 2)."""
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def hz(alpha: float) -> np.ndarray:
    """The cluster-model building block H @ Z_alpha."""
    return H @ rz(alpha)


def controlled(u: np.ndarray, control_value: int = 1) -> np.ndarray:
    """4x4 controlled-U with the control as the first qubit."""
    out = np.eye(4, dtype=complex)
    if control_value == 1:
        out[2:, 2:] = u
    else:
        out[:2, :2] = u
    return out


def is_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        return False
    return bool(np.allclose(u.conj().T @ u, np.eye(u.shape[0]), rtol=0, atol=tol))


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a complex Ginibre matrix."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def random_ket(rng: np.random.Generator, dim: int = 2) -> np.ndarray:
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def draw_outcome(rng: np.random.Generator, p0: float) -> int:
    """Sample a bit with P(0) = p0. Every sampler in the package uses this rule,
    so two simulators with the same seed and the same branch probabilities
    produce the same outcomes."""
    return 0 if rng.random() < p0 else 1


def clamped_p0(p0: float, p1: float) -> float:
    if p0 < PROBABILITY_FLOOR:
        return 0.0
    if p1 < PROBABILITY_FLOOR:
        return 1.0
    return p0


@dataclass(frozen=True, eq=False)
class StateVector:
    """Pure state on ``n_qubits`` qubits stored as 2**n complex amplitudes."""

    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        amps = np.array(self.amplitudes, dtype=np.complex128).reshape(-1)
        size = amps.shape[0]
        if size < 2 or size & (size - 1):
            raise DomainError(f"amplitude count {size} is not a power of two >= 2")
        n = size.bit_length() - 1
        if n > MAX_QUBITS:
            raise DomainError(f"{n} qubits exceeds the {MAX_QUBITS}-qubit cap")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def n_qubits(self) -> int:
        return self.amplitudes.shape[0].bit_length() - 1

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def normalized(self) -> StateVector:
        return StateVector(self.amplitudes / self.norm())

    def tensor(self) -> np.ndarray:
        """Amplitudes as an n-axis array; axis ``n - 1 - q`` is qubit ``q``."""
        return self.amplitudes.reshape((2,) * self.n_qubits)

    def __repr__(self) -> str:
        return f"StateVector(n_qubits={self.n_qubits})"


def _check_n(n: int) -> None:
    if n < 1:
        raise DomainError("qubit count must be at least 1")
    if n > MAX_QUBITS:
        raise DomainError(f"{n} qubits exceeds the {MAX_QUBITS}-qubit cap")


def _check_qubit(state: StateVector, q: int) -> None:
    if not 0 <= q < state.n_qubits:
        raise DomainError(f"qubit {q} out of range for {state.n_qubits} qubits")


def basis_state(n: int, bits: str | Sequence[int]) -> StateVector:
    """Computational basis state; ``bits[q]`` is the value of qubit ``q``."""
    _check_n(n)
    bits = [int(b) for b in bits]
    if len(bits) != n or any(b not in (0, 1) for b in bits):
        raise DomainError(f"need {n} bits, got {bits!r}")
    amps = np.zeros(2**n, dtype=complex)
    amps[sum(b << q for q, b in enumerate(bits))] = 1.0
    return StateVector(amps)


def plus_state(n: int) -> StateVector:
    _check_n(n)
    return StateVector(np.full(2**n, 2.0 ** (-n / 2), dtype=complex))


def product_state(kets: Sequence[np.ndarray]) -> StateVector:
    """Tensor product with ``kets[0]`` on qubit 0."""
    _check_n(len(kets))
    amps = np.array([1.0], dtype=complex)
    for ket in kets:
        amps = np.kron(np.asarray(ket, dtype=complex), amps)
    return StateVector(amps)


def apply_1q(state: StateVector, u: np.ndarray, target: int) -> StateVector:
    """Apply a 2x2 unitary to ``target``."""
    _check_qubit(state, target)
    u = np.asarray(u, dtype=complex)
    if u.shape != (2, 2) or not is_unitary(u):
        raise DomainError("single-qubit gate must be a 2x2 unitary")
    return StateVector(_apply_1q_unchecked(state.amplitudes, u, target, state.n_qubits))


def _apply_1q_unchecked(amps: np.ndarray, u: np.ndarray, q: int, n: int) -> np.ndarray:
    psi = amps.reshape(2 ** (n - 1 - q), 2, 2**q)
    return np.einsum("ij,ajb->aib", u, psi).reshape(-1)


def apply_2q(state: StateVector, u: np.ndarray, first: int, second: int) -> StateVector:
    """Apply a 4x4 unitary to the ordered pair (first, second)."""
    _check_qubit(state, first)
    _check_qubit(state, second)
    if first == second:
        raise DomainError("two-qubit gate needs distinct qubits")
    u = np.asarray(u, dtype=complex)
    if u.shape != (4, 4) or not is_unitary(u):
        raise DomainError("two-qubit gate must be a 4x4 unitary")
    return StateVector(_apply_2q_unchecked(state.amplitudes, u, first, second, state.n_qubits))


def _apply_2q_unchecked(amps, u, first, second, n):
    axes = (n - 1 - first, n - 1 - second)
    psi = np.moveaxis(amps.reshape((2,) * n), axes, (0, 1))
    shape = psi.shape
    psi = (u @ psi.reshape(4, -1)).reshape(shape)
    return np.moveaxis(psi, (0, 1), axes).reshape(-1)


def apply_pauli(state: StateVector, letters: str) -> StateVector:
    """Apply a Pauli word; ``letters[q]`` acts on qubit ``q``."""
    if len(letters) != state.n_qubits:
        raise DomainError("Pauli word length does not match qubit count")
    amps = state.amplitudes
    n = state.n_qubits
    for q, letter in enumerate(letters):
        if letter != "I":
            amps = _apply_1q_unchecked(amps, PAULIS[letter], q, n)
    return StateVector(amps)


@dataclass(frozen=True)
class MeasurementResult:
    outcome: int
    probability: float
    posterior: StateVector


def outcome_probabilities(state: StateVector, target: int, basis: np.ndarray | None = None):
    """(p0, p1) for measuring ``target`` after rotating it by ``basis``."""
    _check_qubit(state, target)
    n = state.n_qubits
    amps = state.amplitudes
    if basis is not None:
        amps = _apply_1q_unchecked(amps, np.asarray(basis, dtype=complex), target, n)
    psi = amps.reshape(2 ** (n - 1 - target), 2, 2**target)
    p1 = float(np.vdot(psi[:, 1, :], psi[:, 1, :]).real)
    p0 = float(np.vdot(psi[:, 0, :], psi[:, 0, :]).real)
    return p0, p1


def measure_1q(
    state: StateVector,
    target: int,
    basis: np.ndarray | None = None,
    *,
    rng: np.random.Generator | None = None,
    forced: int | None = None,
) -> MeasurementResult:
    """Measure ``target`` in the basis {U^dag|0>, U^dag|1>}.

    The qubit is rotated by ``basis`` (default identity) and then measured in
    the computational basis, so the posterior leaves ``target`` in ``|m>``.
    Exactly one of ``rng`` (sampling) or ``forced`` (branch selection) is
    required.
    """
    _check_qubit(state, target)
    if (rng is None) == (forced is None):
        raise DomainError("pass exactly one of rng= or forced=")
    n = state.n_qubits
    amps = state.amplitudes
    if basis is not None:
        basis = np.asarray(basis, dtype=complex)
        if basis.shape != (2, 2) or not is_unitary(basis):
            raise DomainError("measurement basis must be a 2x2 unitary")
        amps = _apply_1q_unchecked(amps, basis, target, n)
    psi = amps.reshape(2 ** (n - 1 - target), 2, 2**target)
    p0 = float(np.vdot(psi[:, 0, :], psi[:, 0, :]).real)
    p1 = float(np.vdot(psi[:, 1, :], psi[:, 1, :]).real)
    total = p0 + p1
    p0, p1 = p0 / total, p1 / total
    if forced is None:
        outcome = draw_outcome(rng, clamped_p0(p0, p1))
    else:
        outcome = int(forced)
        if outcome not in (0, 1):
            raise DomainError(f"forced outcome must be 0 or 1, got {forced!r}")
    prob = p0 if outcome == 0 else p1
    if prob < PROBABILITY_FLOOR:
        raise ImpossibleBranchError(
            f"outcome {outcome} on qubit {target} has probability {prob:.3g}"
        )
    post = np.zeros_like(psi)
    post[:, outcome, :] = psi[:, outcome, :] / np.sqrt(prob * total)
    return MeasurementResult(outcome, prob, StateVector(post.reshape(-1)))


def extract_qubits(state: StateVector, keep: Sequence[int], fixed: dict[int, int]) -> StateVector:
    """Amplitudes of ``keep`` (in that order, keep[0] least significant) with
    every other qubit pinned to the bit given in ``fixed``; renormalized."""
    n = state.n_qubits
    keep = list(keep)
    if sorted(keep + list(fixed)) != list(range(n)):
        raise DomainError("keep and fixed must partition the qubits")
    idx: list = [slice(None)] * n
    for q, b in fixed.items():
        idx[n - 1 - q] = int(b)
    sub = state.tensor()[tuple(idx)]
    # remaining axes are the kept qubits in descending qubit order
    remaining = sorted(keep, reverse=True)
    order = [remaining.index(q) for q in reversed(keep)]
    sub = np.transpose(sub, order).reshape(-1)
    norm = np.linalg.norm(sub)
    if norm < PROBABILITY_FLOOR:
        raise DomainError("pinned bits select a zero-amplitude slice")
    return StateVector(sub / norm)


def inner(a: StateVector, b: StateVector) -> complex:
    if a.amplitudes.shape != b.amplitudes.shape:
        raise DomainError("dimension mismatch")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def fidelity_up_to_phase(a: StateVector, b: StateVector) -> float:
    """|<a|b>|, clipped to [0, 1]."""
    return float(min(1.0, abs(inner(a, b))))


def reduced_density(state: StateVector, keep: Sequence[int]) -> np.ndarray:
    """Partial trace onto ``keep``; keep[0] is the least significant qubit of
    the returned matrix."""
    keep = list(keep)
    if not keep:
        raise DomainError("keep must be nonempty")
    if len(set(keep)) != len(keep):
        raise DomainError("keep has repeated qubits")
    for q in keep:
        _check_qubit(state, q)
    n = state.n_qubits
    rest = [q for q in range(n) if q not in keep]
    axes = [n - 1 - q for q in reversed(keep)] + [n - 1 - q for q in reversed(rest)]
    m = np.transpose(state.tensor(), axes).reshape(2 ** len(keep), -1)
    return m @ m.conj().T


def schmidt_coefficients(state: StateVector, cut: int) -> np.ndarray:
    n = state.n_qubits
    if not 1 <= cut <= n - 1:
        raise DomainError(f"cut must lie in [1, {n - 1}], got {cut}")
    m = state.amplitudes.reshape(2 ** (n - cut), 2**cut)
    return np.linalg.svd(m, compute_uv=False)


def schmidt_rank(state: StateVector, cut: int, tol: float = 1e-10) -> int:
    """Rank across qubits {0..cut-1} | {cut..n-1}."""
    return int(np.sum(schmidt_coefficients(state, cut) > tol))


def check_density_matrix(rho: np.ndarray, tol: float = 1e-10) -> None:
    """Raise DomainError unless ``rho`` is Hermitian, PSD, with trace <= 1."""
    rho = np.asarray(rho)
    if not np.allclose(rho, rho.conj().T, rtol=0, atol=1e-12):
        raise DomainError("density matrix is not Hermitian")
    tr = np.trace(rho).real
    if tr < -tol or tr > 1 + 1e-12:
        raise DomainError(f"trace {tr} outside [0, 1]")
    if np.linalg.eigvalsh(rho).min() < -tol:
        raise DomainError("density matrix is not positive semidefinite")
