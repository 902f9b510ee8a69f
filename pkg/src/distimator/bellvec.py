"""
Bell-vector algebra for Bell-diagonal two-qubit states.

A Bell-diagonal state is stored as its diagonal in the Bell basis, ordered
(Phi+, Phi-, Psi+, Psi-).  A control/target pair after the bilateral CNOT is a
16-entry vector with entry ``4*k + j`` holding the weight of control Bell
state ``k`` and target Bell state ``j`` (zero based).

All functions accept numpy arrays with extra leading axes and broadcast over
them, so a whole batch of storage delays can be pushed through one call.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

SUM_ATOL = 1e-12
NEG_ATOL = 1e-12

PHI_PLUS, PHI_MINUS, PSI_PLUS, PSI_MINUS = range(4)

# Pre-image of each joint entry under the bilateral CNOT: entry e of the output
# carries q[CNOT_CTRL_SRC[e]] * q_tgt[CNOT_TGT_SRC[e]].
CNOT_CTRL_SRC = np.array([0, 1, 0, 1, 1, 0, 1, 0, 2, 3, 2, 3, 3, 2, 3, 2])
CNOT_TGT_SRC = np.array([0, 1, 2, 3, 0, 1, 2, 3, 2, 3, 0, 1, 2, 3, 0, 1])

# Joint entries whose target (Z readout) or control (X readout) sits in the
# even-parity group {Phi+, Phi-} resp. {Phi+, Psi+}.
_TGT_EVEN = np.array([0, 1, 4, 5, 8, 9, 12, 13])
_TGT_ODD = np.array([2, 3, 6, 7, 10, 11, 14, 15])
_CTRL_EVEN = np.array([0, 1, 2, 3, 8, 9, 10, 11])
_CTRL_ODD = np.array([4, 5, 6, 7, 12, 13, 14, 15])


class BellVectorError(ValueError):
    """A vector is not (close to) a probability vector."""


class DegenerateOutcomeError(ValueError):
    """Post-selection on an outcome that has zero probability."""


def _check_prob(name, value, lo=0.0, hi=1.0, lo_open=False):
    v = np.asarray(value, dtype=float)
    bad = (v <= lo) if lo_open else (v < lo)
    if np.any(bad) or np.any(v > hi) or np.any(np.isnan(v)):
        bracket = "(" if lo_open else "["
        raise ValueError(f"{name} must lie in {bracket}{lo}, {hi}], got {value!r}")
    return v


def as_bell_vector(q, size=4) -> np.ndarray:
    """Validate and return ``q`` as a float array whose last axis is a distribution.

    Entries slightly below zero (floating-point cancellation) are clamped and
    the vector renormalized; anything worse raises :class:`BellVectorError`.
    """
    q = np.array(q, dtype=float)
    if q.shape[-1:] != (size,):
        raise BellVectorError(f"expected last axis of length {size}, got shape {q.shape}")
    if np.any(np.isnan(q)):
        raise BellVectorError("NaN entry in Bell vector")
    if np.any(q < -NEG_ATOL) or np.any(q > 1 + NEG_ATOL):
        raise BellVectorError(f"entries outside [0, 1]: {q}")
    total = q.sum(axis=-1)
    if np.any(np.abs(total - 1.0) > SUM_ATOL):
        raise BellVectorError(f"entries sum to {total}, not 1")
    if np.any(q < 0) or np.any(q > 1):
        q = np.clip(q, 0.0, 1.0)
        q /= q.sum(axis=-1, keepdims=True)
    return q


def werner_vector(w) -> np.ndarray:
    """Bell vector of the Werner state ``(1-w)|Phi+><Phi+| + w I/4``."""
    w = _check_prob("w", w)
    q = np.stack([1 - 0.75 * w, 0.25 * w, 0.25 * w, 0.25 * w], axis=-1)
    return q


def x_values(q) -> np.ndarray:
    """Intermediate variables ``x_i = q1 + q_{i+1}`` for i = 1, 2, 3."""
    q = np.asarray(q, dtype=float)
    return q[..., :1] + q[..., 1:]


def _side(side):
    if side not in ("A", "B", "a", "b"):
        raise ValueError(f"side must be 'A' or 'B', got {side!r}")


def depolarize(q, side="B", lam=0.0) -> np.ndarray:
    """Single-qubit depolarizing channel on one half of a Bell-diagonal pair.

    On the Bell diagonal this is the same for either party: mix toward I/4.
    """
    _side(side)
    lam = _check_prob("lambda", lam)[..., None]
    q = np.asarray(q, dtype=float)
    return lam / 4 + (1 - lam) * q


def dephase(q, side="B", zeta=0.0) -> np.ndarray:
    """Z dephasing on one qubit: swaps weight within (Phi+, Phi-) and (Psi+, Psi-)."""
    _side(side)
    zeta = _check_prob("zeta", zeta, hi=0.5)[..., None]
    q = np.asarray(q, dtype=float)
    flipped = q[..., [1, 0, 3, 2]]
    return (1 - zeta) * q + zeta * flipped


@dataclass(frozen=True)
class PartyNoise:
    """Device noise for one party.

    ``lam`` and ``zeta`` are the memory depolarizing and dephasing
    probabilities already present at zero storage time; storage then decays
    the surviving weight further (see :meth:`NoiseModel.memory_parameters`).
    ``m`` and ``y`` depolarize the local rotation and the CNOT.  ``eta_z`` and
    ``eta_x`` are the readout non-error probabilities and must exceed 1/2.
    """

    lam: float = 0.0
    zeta: float = 0.0
    m: float = 0.0
    y: float = 0.0
    eta_z: float = 1.0
    eta_x: float = 1.0

    def __post_init__(self):
        _check_prob("lam", self.lam)
        _check_prob("zeta", self.zeta, hi=0.5)
        _check_prob("m", self.m)
        _check_prob("y", self.y)
        _check_prob("eta_z", self.eta_z, lo=0.5, lo_open=True)
        _check_prob("eta_x", self.eta_x, lo=0.5, lo_open=True)


@dataclass(frozen=True)
class NoiseModel:
    """Noise for both parties plus memory characteristic times.

    Times share the unit of the storage delay; ``math.inf`` switches the
    corresponding time-dependent channel off.
    """

    alice: PartyNoise = PartyNoise()
    bob: PartyNoise = PartyNoise()
    t_dpo_a: float = 1.0
    t_dpo_b: float = 1.0
    t_dph_a: float = 1.0
    t_dph_b: float = 1.0

    def __post_init__(self):
        for name in ("t_dpo_a", "t_dpo_b", "t_dph_a", "t_dph_b"):
            t = getattr(self, name)
            if not t > 0:
                raise ValueError(f"{name} must be strictly positive, got {t!r}")

    @classmethod
    def symmetric(cls, *, t_dpo=1.0, t_dph=1.0, **party):
        """Same device noise and times on both sides."""
        p = PartyNoise(**party)
        return cls(p, p, t_dpo, t_dpo, t_dph, t_dph)

    @classmethod
    def noiseless(cls):
        return cls(t_dpo_a=math.inf, t_dpo_b=math.inf, t_dph_a=math.inf, t_dph_b=math.inf)

    def memory_parameters(self, dt):
        """Return ``(lam_a, zeta_a, lam_b, zeta_b)`` after storing for ``dt``.

        ``lam(dt) = 1 - (1 - lam0) exp(-dt/T_dpo)`` and
        ``zeta(dt) = (1 - (1 - 2 zeta0) exp(-dt/T_dph)) / 2``; with zero static
        noise these are the usual exponential memory decay laws.
        """
        dt = np.asarray(dt, dtype=float)
        if np.any(dt < 0) or np.any(np.isnan(dt)):
            raise ValueError(f"storage delay must be non-negative, got {dt!r}")

        def decay(t):
            return np.exp(-dt / t)

        lam_a = 1 - (1 - self.alice.lam) * decay(self.t_dpo_a)
        lam_b = 1 - (1 - self.bob.lam) * decay(self.t_dpo_b)
        zeta_a = (1 - (1 - 2 * self.alice.zeta) * decay(self.t_dph_a)) / 2
        zeta_b = (1 - (1 - 2 * self.bob.zeta) * decay(self.t_dph_b)) / 2
        return lam_a, zeta_a, lam_b, zeta_b


def apply_memory_noise(q, model: NoiseModel, dt) -> np.ndarray:
    """Storage noise on the control pair: depolarize B, dephase B, depolarize A, dephase A.

    ``dt`` may be an array; the result then gains its shape as leading axes.
    """
    lam_a, zeta_a, lam_b, zeta_b = model.memory_parameters(dt)
    q = np.asarray(q, dtype=float)
    q = depolarize(q, "B", lam_b)
    q = dephase(q, "B", zeta_b)
    q = depolarize(q, "A", lam_a)
    q = dephase(q, "A", zeta_a)
    return q


def rotate_bilateral_rx(q, m_a=0.0, m_b=0.0) -> np.ndarray:
    """Noisy Rx(-pi/2) x Rx(+pi/2): swaps Phi- and Psi-, then depolarizes."""
    m_a = _check_prob("m_a", m_a)
    m_b = _check_prob("m_b", m_b)
    keep = ((1 - m_a) * (1 - m_b))[..., None]
    q = np.asarray(q, dtype=float)
    return keep * q[..., [0, 3, 2, 1]] + (1 - keep) / 4


def bilateral_cnot(q_ctrl, q_tgt, y_a=0.0, y_b=0.0) -> np.ndarray:
    """Joint 16-entry Bell vector after the noisy bilateral CNOT."""
    y_a = _check_prob("y_a", y_a)
    y_b = _check_prob("y_b", y_b)
    q_ctrl = np.asarray(q_ctrl, dtype=float)
    q_tgt = np.asarray(q_tgt, dtype=float)
    c = q_ctrl[..., CNOT_CTRL_SRC] * q_tgt[..., CNOT_TGT_SRC]
    keep = ((1 - y_a) * (1 - y_b))[..., None]
    return keep * c + (1 - keep) / 16


def _readout_weights(eta_a, eta_b):
    """Probability of the both-up record for an even / odd parity pair.

    Each parity state gives the two ideal records with probability 1/2, so
    both factors carry that 1/2.
    """
    eta_a = _check_prob("eta_a", eta_a, lo=0.5, lo_open=True)
    eta_b = _check_prob("eta_b", eta_b, lo=0.5, lo_open=True)
    even = 0.5 * (1 - eta_b - eta_a * (1 - 2 * eta_b))
    odd = 0.5 * (eta_b + eta_a * (1 - 2 * eta_b))
    return even, odd


def z_coincidence_up_prob(f, eta_a=1.0, eta_b=1.0):
    """Probability that both noisy Z readouts on the target pair give "up"."""
    f = np.asarray(f, dtype=float)
    even, odd = _readout_weights(eta_a, eta_b)
    return even * f[..., _TGT_EVEN].sum(axis=-1) + odd * f[..., _TGT_ODD].sum(axis=-1)


def x_coincidence_up_prob(f, eta_a=1.0, eta_b=1.0):
    """Probability that both noisy X readouts on the control pair give "+"."""
    f = np.asarray(f, dtype=float)
    even, odd = _readout_weights(eta_a, eta_b)
    return even * f[..., _CTRL_EVEN].sum(axis=-1) + odd * f[..., _CTRL_ODD].sum(axis=-1)


def conditional_control_state(f, basis="Z", eta_a=1.0, eta_b=1.0):
    """Bell vector of the unmeasured pair given the both-up record, and its probability.

    ``basis="Z"`` measures the target and keeps the control; ``basis="X"``
    measures the control and keeps the target.
    """
    f = np.asarray(f, dtype=float)
    even, odd = _readout_weights(eta_a, eta_b)
    grid = f.reshape(f.shape[:-1] + (4, 4))  # [..., control, target]
    if basis.upper() == "Z":
        weights = np.array([even, even, odd, odd])
        unnorm = (grid * weights).sum(axis=-1)
    elif basis.upper() == "X":
        weights = np.array([even, odd, even, odd])
        unnorm = (grid * weights[:, None]).sum(axis=-2)
    else:
        raise ValueError(f"basis must be 'Z' or 'X', got {basis!r}")
    p = unnorm.sum(axis=-1)
    if np.any(p <= 0):
        raise DegenerateOutcomeError("both-up outcome has zero probability")
    return unnorm / p[..., None], p


def trace_distance(a, b):
    """Half the l1 distance between two Bell vectors."""
    return 0.5 * np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)).sum(axis=-1)
