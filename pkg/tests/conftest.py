from functools import reduce

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def kron_ket(kets):
    """Dense product state with kets[0] on qubit 0 (the least significant bit)."""
    return reduce(np.kron, [np.asarray(k, dtype=complex) for k in reversed(kets)])


def op_on(n, mats):
    """Full 2^n operator from {qubit: 2x2 matrix}, built with np.kron."""
    factors = [np.asarray(mats.get(q, np.eye(2)), dtype=complex) for q in reversed(range(n))]
    return reduce(np.kron, factors)


def graph_state_oracle(n, edges):
    """Cluster state via the diagonal phase (-1)^{sum x_u x_v} on the uniform state."""
    idx = np.arange(2**n)
    bits = (idx[:, None] >> np.arange(n)) & 1
    phase = np.zeros(2**n, dtype=int)
    for u, v in edges:
        phase += bits[:, u] * bits[:, v]
    return ((-1.0) ** phase / 2 ** (n / 2)).astype(complex)


def haar(rng, dim=2):
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def overlap(a, b):
    a = np.asarray(getattr(a, "amplitudes", a))
    b = np.asarray(getattr(b, "amplitudes", b))
    return abs(np.vdot(a, b))
