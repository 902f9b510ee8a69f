"""
Dense density-matrix reference for the distillation protocols.

Everything here is literal matrix algebra on 4x4 (one pair) and 16x16 (two
pairs) complex matrices.  Qubit order is (A, B) for one pair and
(A1, B1, A2, B2) for the control/target pair.  It is slow and exists to
certify the Bell-vector path and to handle states with coherences.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import expm

from .bellvec import DegenerateOutcomeError, NoiseModel
from .protocols import ProtocolId

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)

_s = 1 / np.sqrt(2)
BELL_KETS = np.array(
    [
        [_s, 0, 0, _s],   # Phi+
        [_s, 0, 0, -_s],  # Phi-
        [0, _s, _s, 0],   # Psi+
        [0, _s, -_s, 0],  # Psi-
    ],
    dtype=complex,
)

HERMITIAN_ATOL = 1e-12
TRACE_ATOL = 1e-12
PSD_ATOL = 1e-10


def kron(*ops):
    out = np.eye(1, dtype=complex)
    for op in ops:
        out = np.kron(out, op)
    return out


def embed(op, qubit, n):
    """Single-qubit operator ``op`` acting on ``qubit`` of an ``n``-qubit register."""
    return kron(*[op if k == qubit else I2 for k in range(n)])


def rx(theta):
    return expm(-0.5j * theta * X)


def cnot(control, target, n):
    dim = 2**n
    U = np.zeros((dim, dim), dtype=complex)
    for i in range(dim):
        bits = [(i >> (n - 1 - k)) & 1 for k in range(n)]
        if bits[control]:
            bits[target] ^= 1
        j = sum(b << (n - 1 - k) for k, b in enumerate(bits))
        U[j, i] = 1
    return U


# CNOT_{A1 A2} x CNOT_{B1 B2} on (A1, B1, A2, B2)
BILATERAL_CNOT = cnot(0, 2, 4) @ cnot(1, 3, 4)


def check_density(rho, atol_psd=PSD_ATOL):
    """Raise ``ValueError`` unless ``rho`` is Hermitian, unit trace and PSD."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or rho.shape[0] not in (4, 16):
        raise ValueError(f"expected a 4x4 or 16x16 matrix, got shape {rho.shape}")
    if not np.allclose(rho, rho.conj().T, atol=HERMITIAN_ATOL, rtol=0):
        raise ValueError("matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > TRACE_ATOL:
        raise ValueError(f"trace is {np.trace(rho)}")
    if np.linalg.eigvalsh(rho).min() < -atol_psd:
        raise ValueError("matrix is not positive semidefinite")
    return rho


def bell_vector_to_density(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return np.einsum("k,ki,kj->ij", q, BELL_KETS, BELL_KETS.conj())


def bell_diagonal_part(rho) -> np.ndarray:
    """``q_k = <B_k| rho |B_k>``; coherences between Bell states are dropped."""
    rho = np.asarray(rho)
    return np.real(np.einsum("ki,ij,kj->k", BELL_KETS.conj(), rho, BELL_KETS))


def bell_basis_matrix(rho) -> np.ndarray:
    """Two-pair density matrix expressed in the product Bell basis."""
    U = kron(BELL_KETS, BELL_KETS).conj()  # rows are <B_k B_j| in (A1,B1,A2,B2) order
    return U @ rho @ U.conj().T


def partial_trace(rho, keep, n):
    """Trace out all qubits not in ``keep`` (sorted qubit indices)."""
    rho = np.asarray(rho).reshape([2] * (2 * n))
    traced = [k for k in range(n) if k not in keep]
    # contract ket index k with bra index n+k for every traced qubit
    letters = "abcdefghijklmnopqrstuvwxyz"
    ket = list(letters[:n])
    bra = list(letters[n:2 * n])
    for k in traced:
        bra[k] = ket[k]
    out = [ket[k] for k in keep] + [bra[k] for k in keep]
    expr = "".join(ket) + "".join(bra) + "->" + "".join(out)
    red = np.einsum(expr, rho)
    d = 2 ** len(keep)
    return red.reshape(d, d)


def depolarize_qubit(rho, qubit, lam, n=2):
    """``(1-lam) rho + lam Tr_qubit(rho) x I/2`` with the identity put back in place."""
    keep = [k for k in range(n) if k != qubit]
    reduced = partial_trace(rho, keep, n)
    # rebuild reduced x I/2 in the original qubit order
    full = np.kron(reduced, I2 / 2).reshape([2] * (2 * n))
    order = keep + [qubit]
    perm = [order.index(k) for k in range(n)]
    full = full.transpose(perm + [n + p for p in perm]).reshape(2**n, 2**n)
    return (1 - lam) * rho + lam * full


def dephase_qubit(rho, qubit, zeta, n=2):
    Zq = embed(Z, qubit, n)
    return (1 - zeta) * rho + zeta * Zq @ rho @ Zq


def memory_noise(rho, model: NoiseModel, dt):
    lam_a, zeta_a, lam_b, zeta_b = (float(v) for v in model.memory_parameters(dt))
    rho = depolarize_qubit(rho, 1, lam_b)
    rho = dephase_qubit(rho, 1, zeta_b)
    rho = depolarize_qubit(rho, 0, lam_a)
    rho = dephase_qubit(rho, 0, zeta_a)
    return rho


def noisy_rotation(rho, m_a, m_b):
    """Alice applies Rx(-pi/2), Bob Rx(+pi/2), mixed with I/4."""
    U = kron(rx(-np.pi / 2), rx(np.pi / 2))
    keep = (1 - m_a) * (1 - m_b)
    return keep * U @ rho @ U.conj().T + (1 - keep) * np.eye(4) / 4


def noisy_bilateral_cnot(rho16, y_a, y_b):
    keep = (1 - y_a) * (1 - y_b)
    U = BILATERAL_CNOT
    return keep * U @ rho16 @ U.conj().T + (1 - keep) * np.eye(16) / 16


def up_povm(basis, eta_a, eta_b):
    """Two-qubit POVM element for the noisy both-up record."""
    if basis == "Z":
        up, down = np.diag([1, 0]).astype(complex), np.diag([0, 1]).astype(complex)
    else:
        plus = np.array([1, 1], dtype=complex) / np.sqrt(2)
        minus = np.array([1, -1], dtype=complex) / np.sqrt(2)
        up, down = np.outer(plus, plus), np.outer(minus, minus)
    ma = eta_a * up + (1 - eta_a) * down
    mb = eta_b * up + (1 - eta_b) * down
    return np.kron(ma, mb)


def coincidence_povm(basis, eta_a, eta_b):
    """Noisy both-up plus both-down element (equal readouts on both sides)."""
    flip = X if basis == "Z" else Z
    F = np.kron(flip, flip)
    up = up_povm(basis, eta_a, eta_b)
    return up + F @ up @ F


def run_protocol_dense(protocol, rho_ctrl, rho_tgt, model: NoiseModel, dt=0.0, outcome="up"):
    """Success probability and kept-pair density matrix from literal matrix algebra.

    ``outcome="coincidence"`` post-selects on equal readouts instead of both-up;
    for Bell-diagonal inputs that probability is exactly twice the both-up one,
    and unlike it, it never depends on coherences between Bell states.
    """
    povm = {"up": up_povm, "coincidence": coincidence_povm}[outcome]
    protocol = ProtocolId.parse(protocol)
    ctrl = memory_noise(np.asarray(rho_ctrl, dtype=complex), model, dt)
    tgt = np.asarray(rho_tgt, dtype=complex)
    if protocol is ProtocolId.C:
        ctrl = noisy_rotation(ctrl, model.alice.m, model.bob.m)
        tgt = noisy_rotation(tgt, model.alice.m, model.bob.m)
    joint = noisy_bilateral_cnot(np.kron(ctrl, tgt), model.alice.y, model.bob.y)
    if protocol.basis == "Z":
        M = np.kron(np.eye(4), povm("Z", model.alice.eta_z, model.bob.eta_z))
        kept = [0, 1]
    else:
        M = np.kron(povm("X", model.alice.eta_x, model.bob.eta_x), np.eye(4))
        kept = [2, 3]
    weighted = M @ joint
    p = float(np.real(np.trace(weighted)))
    if p <= 0:
        raise DegenerateOutcomeError(f"{outcome} outcome has zero probability")
    # M acts only on the traced pair, so Tr_meas(M rho) is the unnormalized kept state
    state = partial_trace(weighted, kept, 4) / p
    return p, (state + state.conj().T) / 2
