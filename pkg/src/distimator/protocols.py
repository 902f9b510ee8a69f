"""
The three two-copy distillation protocols built from Bell-vector operations.

* ``A``: bilateral CNOT, Z readout of the target.
* ``B``: bilateral CNOT, X readout of the control.
* ``C``: noisy Rx(-pi/2) x Rx(+pi/2) on both copies, then as ``A``.

Success always means the both-up record.  Only the control copy waits in
memory; the target copy is used as soon as it arrives.
"""

from __future__ import annotations

from enum import Enum

import numpy as np

from . import bellvec as bv
from .bellvec import NoiseModel


class ProtocolId(str, Enum):
    A = "A"
    B = "B"
    C = "C"

    @classmethod
    def parse(cls, value) -> "ProtocolId":
        if isinstance(value, cls):
            return value
        key = str(value).strip().upper()
        aliases = {"1": "A", "2": "B", "3": "C"}
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise ValueError(f"unknown protocol {value!r}; expected one of a, b, c") from None

    @property
    def index(self) -> int:
        """Zero-based position, also the offset of ``x_i`` in :func:`bellvec.x_values`."""
        return "ABC".index(self.value)

    @property
    def basis(self) -> str:
        return "X" if self is ProtocolId.B else "Z"


PROTOCOLS = (ProtocolId.A, ProtocolId.B, ProtocolId.C)

# Bell vectors with x_i = x for protocol i (all other x_j irrelevant to it).
_FAMILY = {
    ProtocolId.A: lambda x: np.stack([x, 0 * x, 1 - x, 0 * x], axis=-1),
    ProtocolId.B: lambda x: np.stack([x, 1 - x, 0 * x, 0 * x], axis=-1),
    ProtocolId.C: lambda x: np.stack([x, 1 - x, 0 * x, 0 * x], axis=-1),
}


def family_vector(protocol, x) -> np.ndarray:
    """Representative Bell vector whose protocol-relevant x equals ``x``."""
    return _FAMILY[ProtocolId.parse(protocol)](np.asarray(x, dtype=float))


def noiseless_success(protocol, q) -> np.ndarray:
    """Both-up probability of a perfect protocol run on two copies of ``q``."""
    protocol = ProtocolId.parse(protocol)
    q = np.asarray(q, dtype=float)
    pairs = {
        ProtocolId.A: ((0, 1), (2, 3)),
        ProtocolId.B: ((0, 2), (1, 3)),
        ProtocolId.C: ((0, 3), (1, 2)),
    }[protocol]
    (i, j), (k, l) = pairs
    return ((q[..., i] + q[..., j]) ** 2 + (q[..., k] + q[..., l]) ** 2) / 2


def joint_vector(protocol, q, model: NoiseModel, dt=0.0, q_target=None) -> np.ndarray:
    """16-entry Bell vector just before readout.

    ``q`` is the control copy as generated; ``q_target`` defaults to ``q``.
    """
    protocol = ProtocolId.parse(protocol)
    q = np.asarray(q, dtype=float)
    q_target = q if q_target is None else np.asarray(q_target, dtype=float)
    ctrl = bv.apply_memory_noise(q, model, dt)
    tgt = q_target
    if protocol is ProtocolId.C:
        m_a, m_b = model.alice.m, model.bob.m
        ctrl = bv.rotate_bilateral_rx(ctrl, m_a, m_b)
        tgt = bv.rotate_bilateral_rx(tgt, m_a, m_b)
    return bv.bilateral_cnot(ctrl, tgt, model.alice.y, model.bob.y)


def _etas(protocol: ProtocolId, model: NoiseModel):
    if protocol.basis == "X":
        return model.alice.eta_x, model.bob.eta_x
    return model.alice.eta_z, model.bob.eta_z


def noisy_success(protocol, q, model: NoiseModel, dt=0.0, q_target=None):
    """Both-up probability under the full device and memory noise model.

    Broadcasts over ``dt`` (and over leading axes of ``q``).
    """
    protocol = ProtocolId.parse(protocol)
    f = joint_vector(protocol, q, model, dt, q_target)
    eta_a, eta_b = _etas(protocol, model)
    if protocol.basis == "X":
        return bv.x_coincidence_up_prob(f, eta_a, eta_b)
    return bv.z_coincidence_up_prob(f, eta_a, eta_b)


def distilled_state(protocol, q, model: NoiseModel, dt=0.0, q_target=None):
    """Bell vector of the kept pair after a successful run, and the success probability."""
    protocol = ProtocolId.parse(protocol)
    f = joint_vector(protocol, q, model, dt, q_target)
    eta_a, eta_b = _etas(protocol, model)
    return bv.conditional_control_state(f, protocol.basis, eta_a, eta_b)


def quadratic_coefficients(protocol, model: NoiseModel, dt=0.0):
    """Return ``(f, C)`` with ``noisy_success = f x^2 - f x + C`` along the protocol's x.

    The success probability is an even quadratic about x = 1/2, so its values
    at x = 1/2 and x = 1 fix both coefficients.
    """
    protocol = ProtocolId.parse(protocol)
    p_half = noisy_success(protocol, family_vector(protocol, 0.5), model, dt)
    p_one = noisy_success(protocol, family_vector(protocol, 1.0), model, dt)
    f = 4 * (p_one - p_half)
    return f, p_one


class RegimeError(ValueError):
    """Input outside the distillable regime q1 > 1/2."""


def distilled_fidelity_noiseless(q) -> float:
    """Phi+ fidelity of the control pair kept by a perfect protocol ``A`` run."""
    q = bv.as_bell_vector(q)
    if q[0] <= 0.5:
        raise RegimeError(f"q1 = {q[0]} is not above 1/2")
    return float((q[0] ** 2 + q[1] ** 2) / (2 * noiseless_success(ProtocolId.A, q)))
