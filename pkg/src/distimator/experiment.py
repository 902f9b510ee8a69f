"""
Monte Carlo distillation experiments with random storage delays.

Each round waits a geometric number of generation attempts for the target
copy while the control copy sits in memory, then runs the protocol once.
Random draws come from fixed-size blocks of rounds, each block seeded from
``(seed, protocol, block index)``; the log is therefore the same however the
blocks are spread over workers, and a shorter run is a prefix of a longer one.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import bellvec as bv
from .bellvec import NoiseModel
from .protocols import ProtocolId, family_vector, noisy_success

BLOCK_SIZE = 4096
DEFAULT_DELAY_SCALE = 100.0


@dataclass(frozen=True)
class ExperimentConfig:
    protocol: ProtocolId
    n_rounds: int
    p_g: float = 0.2
    delay_scale: float = DEFAULT_DELAY_SCALE
    model: NoiseModel = field(default_factory=NoiseModel.noiseless)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "protocol", ProtocolId.parse(self.protocol))
        if int(self.n_rounds) != self.n_rounds or self.n_rounds < 1:
            raise ValueError(f"n_rounds must be a positive integer, got {self.n_rounds!r}")
        if not 0 < self.p_g <= 1:
            raise ValueError(f"p_g must lie in (0, 1], got {self.p_g!r}")
        if not self.delay_scale > 0:
            raise ValueError(f"delay_scale must be positive, got {self.delay_scale!r}")


@dataclass(frozen=True, eq=False)
class ExperimentLog:
    """Outcome record of ``n_rounds`` runs of one protocol.

    ``delays`` are storage times in the unit of the model's characteristic
    times (the default simulator stores ``t_geom / delay_scale``).
    """

    protocol: ProtocolId
    n_rounds: int
    n_success: int
    delays: np.ndarray
    model: NoiseModel

    def __post_init__(self):
        object.__setattr__(self, "protocol", ProtocolId.parse(self.protocol))
        delays = np.array(self.delays, dtype=float)
        delays.setflags(write=False)
        object.__setattr__(self, "delays", delays)
        if self.n_rounds < 1:
            raise ValueError("an experiment log needs at least one round")
        if not 0 <= self.n_success <= self.n_rounds:
            raise ValueError(f"n_success={self.n_success} outside [0, {self.n_rounds}]")
        if delays.shape != (self.n_rounds,):
            raise ValueError(f"expected {self.n_rounds} delays, got {delays.shape[0]}")
        if np.any(delays < 0):
            raise ValueError("negative storage delay in log")

    @property
    def p_hat(self) -> float:
        return self.n_success / self.n_rounds

    @cached_property
    def delay_histogram(self):
        """Distinct delays and their multiplicities."""
        return np.unique(self.delays, return_counts=True)

    def __eq__(self, other):
        if not isinstance(other, ExperimentLog):
            return NotImplemented
        return (
            self.protocol == other.protocol
            and self.n_rounds == other.n_rounds
            and self.n_success == other.n_success
            and self.model == other.model
            and np.array_equal(self.delays, other.delays)
        )


def _block_rng(seed, protocol: ProtocolId, block):
    ss = np.random.SeedSequence(int(seed), spawn_key=(protocol.index, int(block)))
    return np.random.Generator(np.random.Philox(ss))


def _block_draws(seed, protocol: ProtocolId, block, p_g):
    """Geometric attempt counts and Bernoulli uniforms for one full block."""
    rng = _block_rng(seed, protocol, block)
    t_geom = rng.geometric(p_g, size=BLOCK_SIZE)
    u = rng.random(BLOCK_SIZE)
    return t_geom, u


def sample_generation_delay(p_g, round_index, seed, protocol="A", delay_scale=DEFAULT_DELAY_SCALE):
    """Storage delay ``t_geom / delay_scale`` of one round, ``t_geom >= 1`` geometric."""
    if not 0 < p_g <= 1:
        raise ValueError(f"p_g must lie in (0, 1], got {p_g!r}")
    protocol = ProtocolId.parse(protocol)
    block, offset = divmod(int(round_index), BLOCK_SIZE)
    t_geom, _ = _block_draws(seed, protocol, block, p_g)
    return t_geom[offset] / delay_scale


def _run_block(q_true, cfg: ExperimentConfig, block):
    start = block * BLOCK_SIZE
    n = min(BLOCK_SIZE, cfg.n_rounds - start)
    t_geom, u = _block_draws(cfg.seed, cfg.protocol, block, cfg.p_g)
    delays = t_geom[:n] / cfg.delay_scale
    values, inverse = np.unique(delays, return_inverse=True)
    p = noisy_success(cfg.protocol, q_true, cfg.model, values)[inverse]
    return delays, int(np.count_nonzero(u[:n] < p))


def run_experiment(q_true, cfg: ExperimentConfig, workers=1) -> ExperimentLog:
    """Simulate ``cfg.n_rounds`` rounds on i.i.d. copies of ``q_true``."""
    q_true = bv.as_bell_vector(q_true)
    n_blocks = -(-cfg.n_rounds // BLOCK_SIZE)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda b: _run_block(q_true, cfg, b), range(n_blocks)))
    else:
        parts = [_run_block(q_true, cfg, b) for b in range(n_blocks)]
    delays = np.concatenate([d for d, _ in parts])
    n_success = sum(s for _, s in parts)
    return ExperimentLog(cfg.protocol, cfg.n_rounds, n_success, delays, cfg.model)


def candidate_vector(protocol, candidate, mode):
    """Bell vector for a Werner parameter (``mode="werner"``) or an x value (``"bell"``)."""
    candidate = np.asarray(candidate, dtype=float)
    if mode == "werner":
        if np.any(candidate < 0) or np.any(candidate > 1):
            raise ValueError(f"Werner parameter must lie in [0, 1], got {candidate!r}")
        return bv.werner_vector(candidate)
    if mode == "bell":
        if np.any(candidate < 0.5) or np.any(candidate > 1):
            raise ValueError(f"x must lie in [1/2, 1], got {candidate!r}")
        return family_vector(protocol, candidate)
    raise ValueError(f"mode must be 'werner' or 'bell', got {mode!r}")


def expected_statistic(log: ExperimentLog, candidate, mode="werner"):
    """Success probability averaged over the logged delays at a candidate parameter.

    ``candidate`` may be an array; the result has its shape.
    """
    q = candidate_vector(log.protocol, candidate, mode)
    values, counts = log.delay_histogram
    # q: (..., 4) -> (..., 1, 4) against delays (k,)
    p = noisy_success(log.protocol, q[..., None, :], log.model, values)
    return p @ counts / log.n_rounds
