"""
Inversion of distillation statistics into Bell-diagonal parameters.

Estimates come with Hoeffding failure-probability bounds.  Closed-form
estimators cover the noiseless and globally depolarized cases; the general
estimators invert the delay-averaged success probability of a logged
experiment by bisection.  Sample-complexity helpers and the local Pauli
tomography baselines live here too.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import json
import math

import numpy as np
from scipy.optimize import brentq

from . import bellvec as bv
from .experiment import ExperimentLog, expected_statistic
from .protocols import PROTOCOLS, ProtocolId

WERNER_BRACKET = (0.0, 2.0 / 3.0)
WERNER_DOMAIN = (0.0, 1.0)
X_BRACKET = (0.5, 1.0)

REPORT_FIELDS = ("w_hat", "q_hat", "x_hat", "eps_left", "eps_right", "delta", "clamped", "consumed")


class EstimationError(ValueError):
    pass


def hoeffding_tail(n, t, lo=0.0, hi=1.0):
    """``exp(-2 n t^2 / (hi - lo)^2)``: one-sided tail of a mean of n bounded variables."""
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n!r}")
    if not hi > lo:
        raise ValueError("need hi > lo")
    return math.exp(-2 * n * t * t / (hi - lo) ** 2)


def _tail_term(n, eps):
    """Hoeffding term for one deviation threshold; no information for eps <= 0."""
    if eps is None:  # failure direction excluded by the parameter domain
        return 0.0
    if eps <= 0:
        return 1.0
    return hoeffding_tail(n, eps)


def combine_failure(terms_per_channel):
    """``1 - prod_i (1 - min(1, sum_m term))`` over independent channels."""
    log_keep = 0.0
    for terms in terms_per_channel:
        t = min(1.0, sum(terms))
        if t == 1.0:
            return 1.0
        log_keep += math.log1p(-t)
    return -math.expm1(log_keep)


@dataclass(frozen=True)
class BisectionResult:
    root: float
    clamped: bool
    iterations: int


def bisection_search(F, a0, b0, target, eps, increasing=None) -> BisectionResult:
    """Invert a continuous monotone ``F`` on ``[a0, b0]`` at ``target``.

    The stopping tolerance is ``eps**3`` (``eps`` being the statistical error
    on the answer) with at most ``ceil(log2((b0 - a0) / eps**3))`` halvings.
    A target outside the range of ``F`` returns the nearer endpoint with
    ``clamped=True``.  ``increasing`` fixes the orientation; ``None`` reads it
    from the endpoint values.
    """
    if not b0 > a0:
        raise ValueError("need a0 < b0")
    if not eps > 0:
        raise ValueError("eps must be positive")
    fa, fb = F(a0), F(b0)
    if increasing is None:
        increasing = fb >= fa
    lo_val, hi_val = (fa, fb) if increasing else (fb, fa)
    if target == fa:
        return BisectionResult(a0, False, 0)
    if target == fb:
        return BisectionResult(b0, False, 0)
    if target < lo_val:
        return BisectionResult(a0 if increasing else b0, True, 0)
    if target > hi_val:
        return BisectionResult(b0 if increasing else a0, True, 0)

    eps_bis = eps**3
    n_half = math.ceil(math.log2((b0 - a0) / eps_bis))
    a, b = a0, b0
    for n in range(1, n_half + 2):
        x_mid = (a + b) / 2
        f_mid = F(x_mid)
        if f_mid == target or (b - a) / 2 <= eps_bis:
            return BisectionResult(x_mid, False, n)
        if (f_mid < target) == increasing:
            a = x_mid
        else:
            b = x_mid
    return BisectionResult((a + b) / 2, False, n_half + 1)


@dataclass(frozen=True)
class EstimateReport:
    """Result of one estimation.

    ``eps_left``/``eps_right`` hold one entry per protocol channel; an entry is
    ``None`` when that failure direction lies outside the parameter domain and
    contributes nothing to ``delta``.  ``delta`` is capped at 1, ``delta_raw``
    is not.
    """

    w_hat: float | None
    q_hat: tuple
    x_hat: tuple | None
    eps_left: tuple
    eps_right: tuple
    delta: float
    delta_raw: float
    clamped: tuple
    consumed: float
    valid: bool = True
    protocols: tuple = field(default=("A",))

    def to_dict(self):
        return {name: _jsonable(getattr(self, name)) for name in REPORT_FIELDS}

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    def to_keyvalue(self):
        lines = []
        for name in REPORT_FIELDS:
            value = getattr(self, name)
            if isinstance(value, (tuple, list)):
                value = ",".join(_fmt(v) for v in value)
            else:
                value = _fmt(value)
            lines.append(f"{name}={value}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_dict(cls, data):
        def tup(v):
            return None if v is None else tuple(v)

        delta = float(data["delta"])
        x_hat = tup(data.get("x_hat"))
        return cls(
            w_hat=data.get("w_hat"),
            q_hat=tup(data["q_hat"]),
            x_hat=x_hat,
            eps_left=tup(data["eps_left"]),
            eps_right=tup(data["eps_right"]),
            delta=delta,
            delta_raw=float(data.get("delta_raw", delta)),
            clamped=tuple(bool(c) for c in data["clamped"]),
            consumed=float(data["consumed"]),
            valid=bool(data.get("valid", min(data["q_hat"]) >= 0)),
            protocols=("A",) if x_hat is None else ("A", "B", "C"),
        )

    def trace_distance_to(self, q):
        return float(bv.trace_distance(self.q_hat, q))


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def _jsonable(v):
    if isinstance(v, tuple):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.generic):
        return v.item()
    return v


# --- Werner estimation ------------------------------------------------------


def _werner_closed_form(p_hat, n, eps_w, s):
    if not 0 <= p_hat <= 1:
        raise ValueError(f"p_hat must lie in [0, 1], got {p_hat!r}")
    if n < 1:
        raise ValueError("need at least one round")
    if not 0 < eps_w < 2 / 3:
        raise ValueError("eps_w must lie in (0, 2/3)")
    radicand = (4 * p_hat - 1) / s
    clamped = False
    if radicand < (1 / 3) ** 2:
        w_hat, clamped = 2 / 3, True
    elif radicand > 1:
        w_hat, clamped = 0.0, True
    else:
        w_hat = 1 - math.sqrt(radicand)
    slope = 2 * eps_w * (1 - w_hat)
    eps_r = s / 4 * (eps_w**2 + slope)
    eps_l = s / 4 * (-(eps_w**2) + slope)
    delta_raw = _tail_term(n, eps_l) + _tail_term(n, eps_r)
    q_hat = tuple(float(v) for v in bv.werner_vector(w_hat))
    return EstimateReport(
        w_hat=float(w_hat),
        q_hat=q_hat,
        x_hat=None,
        eps_left=(eps_l,),
        eps_right=(eps_r,),
        delta=min(1.0, delta_raw),
        delta_raw=delta_raw,
        clamped=(clamped,),
        consumed=(2 - p_hat) * n,
    )


def estimate_werner_noiseless(p_hat, n, eps_w) -> EstimateReport:
    """Closed-form ``w_hat = 1 - sqrt(4 p_hat - 1)`` with its Hoeffding bound."""
    return _werner_closed_form(p_hat, n, eps_w, 1.0)


def estimate_werner_depolarized(p_hat, s_avg, n, eps_w) -> EstimateReport:
    """Closed form when the stored copy keeps average survival weight ``s_avg``."""
    if not 0 < s_avg <= 1:
        raise ValueError(f"survival must lie in (0, 1], got {s_avg!r}")
    return _werner_closed_form(p_hat, n, eps_w, s_avg)


def mean_survival(log: ExperimentLog) -> float:
    """Average weight that survives memory depolarization of the stored pair."""
    lam_a, _, lam_b, _ = log.model.memory_parameters(log.delays)
    return float(np.mean((1 - lam_a) * (1 - lam_b)))


def _deviation_bounds(D, p_hat, x_hat, eps, domain, increasing):
    """Deviation thresholds (eps_left, eps_right) from the averaged statistic ``D``.

    A shifted point outside ``domain`` cannot hold the true parameter; that
    side is reported as ``None``.
    """
    lo, hi = domain

    def at(x):
        return float(D(x)) if lo <= x <= hi else None

    plus, minus = at(x_hat + eps), at(x_hat - eps)
    if increasing:
        eps_l = None if minus is None else p_hat - minus
        eps_r = None if plus is None else plus - p_hat
    else:
        eps_l = None if plus is None else p_hat - plus
        eps_r = None if minus is None else minus - p_hat
    return eps_l, eps_r


def estimate_werner(log: ExperimentLog, eps_w, bracket=WERNER_BRACKET, p_hat=None) -> EstimateReport:
    """Werner parameter from a protocol-A log under the log's noise model.

    ``p_hat`` replaces the logged success fraction, e.g. to feed exact
    expected statistics.
    """
    if log.protocol is not ProtocolId.A:
        raise EstimationError("Werner estimation needs a protocol A log")
    if not 0 < eps_w < 2 / 3:
        raise ValueError("eps_w must lie in (0, 2/3)")
    p_hat = log.p_hat if p_hat is None else float(p_hat)

    def D(w):
        return expected_statistic(log, w, "werner")

    res = bisection_search(D, bracket[0], bracket[1], p_hat, eps_w, increasing=False)
    eps_l, eps_r = _deviation_bounds(D, p_hat, res.root, eps_w, WERNER_DOMAIN, increasing=False)
    n = log.n_rounds
    delta_raw = _tail_term(n, eps_l) + _tail_term(n, eps_r)
    return EstimateReport(
        w_hat=float(res.root),
        q_hat=tuple(float(v) for v in bv.werner_vector(res.root)),
        x_hat=None,
        eps_left=(eps_l,),
        eps_right=(eps_r,),
        delta=min(1.0, delta_raw),
        delta_raw=delta_raw,
        clamped=(res.clamped,),
        consumed=(2 - p_hat) * n,
    )


# --- Bell-diagonal estimation ----------------------------------------------


def x_to_q(x) -> np.ndarray:
    """Bell vector from the intermediate variables ``x_i = q1 + q_{i+1}``."""
    x1, x2, x3 = (float(v) for v in x)
    return np.array(
        [
            (-1 + x1 + x2 + x3) / 2,
            (1 + x1 - x2 - x3) / 2,
            (1 - x1 + x2 - x3) / 2,
            (1 - x1 - x2 + x3) / 2,
        ]
    )


def _project(q, tol):
    """Zero negligible negative entries; flag anything larger as invalid."""
    q = np.array(q, dtype=float)
    neg = q < 0
    if not neg.any():
        return q, True
    if np.all(q[neg] >= -tol):
        q[neg] = 0.0
        return q / q.sum(), True
    return q, False


def _bell_report(x_hat, p_hats, ns, eps_l, eps_r, clamped, tol):
    q_hat, valid = _project(x_to_q(x_hat), tol)
    terms = [(_tail_term(n, l), _tail_term(n, r)) for n, l, r in zip(ns, eps_l, eps_r)]
    delta_raw = combine_failure(terms)
    return EstimateReport(
        w_hat=None,
        q_hat=tuple(float(v) for v in q_hat),
        x_hat=tuple(float(v) for v in x_hat),
        eps_left=tuple(eps_l),
        eps_right=tuple(eps_r),
        delta=min(1.0, delta_raw),
        delta_raw=delta_raw,
        clamped=tuple(clamped),
        consumed=float(sum((2 - p) * n for p, n in zip(p_hats, ns))),
        valid=valid,
        protocols=("A", "B", "C"),
    )


def estimate_bell_noiseless(p_hats, ns, eps) -> EstimateReport:
    """Closed-form ``x_i = (1 + sqrt(4 p_i - 1)) / 2`` for perfect protocols."""
    p_hats, ns, eps = _triple(p_hats), _triple(ns), _triple(eps)
    x_hat, clamped, eps_l, eps_r = [], [], [], []
    for p, e in zip(p_hats, eps):
        if not 0 <= p <= 1:
            raise ValueError(f"p_hat must lie in [0, 1], got {p!r}")
        radicand = 4 * p - 1
        if radicand < 0 or radicand > 1:
            x = 0.5 if radicand < 0 else 1.0
            clamped.append(True)
        else:
            x = (1 + math.sqrt(radicand)) / 2
            clamped.append(False)
        x_hat.append(x)
        eps_r.append(e**2 + e * (2 * x - 1))
        eps_l.append(-(e**2) + e * (2 * x - 1))
    tol = sum(e**3 for e in eps)
    return _bell_report(x_hat, p_hats, ns, eps_l, eps_r, clamped, tol)


def _triple(values):
    values = tuple(values)
    if len(values) != 3:
        raise ValueError(f"expected three values (protocols A, B, C), got {len(values)}")
    return values


def estimate_bell(logs, eps, p_hats=None) -> EstimateReport:
    """Bell-diagonal parameters from protocol A, B and C logs (gauge q1 > 1/2).

    ``p_hats`` optionally replaces the three logged success fractions.
    """
    logs, eps = _triple(logs), _triple(eps)
    p_hats = [log.p_hat for log in logs] if p_hats is None else [float(p) for p in _triple(p_hats)]
    for log, expected in zip(logs, PROTOCOLS):
        if log.protocol is not expected:
            raise EstimationError(
                f"logs must be ordered A, B, C; got {log.protocol.value} in place of {expected.value}"
            )
    x_hat, clamped, eps_l, eps_r = [], [], [], []
    for log, e, p_hat in zip(logs, eps, p_hats):

        def D(x, log=log):
            return expected_statistic(log, x, "bell")

        res = bisection_search(D, X_BRACKET[0], X_BRACKET[1], p_hat, e, increasing=True)
        l, r = _deviation_bounds(D, p_hat, res.root, e, X_BRACKET, increasing=True)
        x_hat.append(res.root)
        clamped.append(res.clamped)
        eps_l.append(l)
        eps_r.append(r)
    tol = sum(e**3 for e in eps)
    return _bell_report(
        x_hat, p_hats, [log.n_rounds for log in logs], eps_l, eps_r, clamped, tol
    )


def arbitrary_state_bound(q, eps_t) -> float:
    """Trace-distance radius once coherences of an arbitrary state are allowed."""
    q = np.asarray(q, dtype=float)
    return float(eps_t + np.sum(np.sqrt(q**2 * (1 - q**2))))


# --- Sample complexity and tomography baselines ----------------------------


def werner_sample_bound(delta, eps_w) -> int:
    """Rounds sufficient for any ``w_hat`` in [0, 2/3] (noiseless protocol A)."""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if not 0 < eps_w < 2 / 3:
        raise ValueError("eps_w must lie in (0, 2/3)")
    return math.ceil(8 * math.log(2 / delta) / (eps_w**2 * (2 / 3 - eps_w) ** 2))


def bell_sample_bound(delta, eps_t, x_max) -> int:
    """Rounds per protocol sufficient for trace distance ``eps_t`` (equal split)."""
    e = eps_t / 3
    if not 0.5 < x_max <= 1:
        raise ValueError("x_max must lie in (1/2, 1]")
    margin = -(e**2) + e * (2 * x_max - 1)
    if margin <= 0:
        raise ValueError("eps_t / 3 must be below 2 x_max - 1")
    return math.ceil(math.log(8 / delta) / (2 * margin**2))


def tomography_werner_prob(w):
    """Both-up probability for a ZZ (or XX, YY) measurement of a Werner state."""
    return (2 - np.asarray(w, dtype=float)) / 4


def tomography_werner_bound(n, eps_w) -> float:
    return min(1.0, 2 * math.exp(-n * eps_w**2 / 8))


def tomography_werner_rounds(delta, eps_w) -> int:
    return math.ceil(8 * math.log(2 / delta) / eps_w**2)


def tomography_bell_probs(q):
    """Both-up probabilities in the ZZ, XX and YY settings."""
    x1, x2, x3 = bv.x_values(q)
    return np.array([x1 / 2, x2 / 2, (1 - x3) / 2])


def tomography_bell_bound(ns, eps) -> float:
    ns, eps = _triple(ns), _triple(eps)
    terms = [(2 * math.exp(-2 * n * (e / 2) ** 2),) for n, e in zip(ns, eps)]
    return combine_failure(terms)


def tomography_bell_rounds(delta, eps) -> int:
    """Total states for equal-split tomography reaching failure bound ``delta``."""
    eps = _triple(eps)
    n = _smallest_n(lambda n: tomography_bell_bound((n, n, n), eps), delta)
    return 3 * n


def consumed_pairs(p, n):
    """``(consumed, survivors)``: states used up and distilled pairs left over."""
    p = np.atleast_1d(np.asarray(p, dtype=float))
    n = np.broadcast_to(np.asarray(n, dtype=float), p.shape)
    return float(np.sum((2 - p) * n)), float(np.sum(p * n))


def _smallest_n(delta_of_n, target):
    """Smallest integer n >= 1 with ``delta_of_n(n) <= target`` (decreasing in n)."""
    if delta_of_n(1) <= target:
        return 1
    hi = 2
    while delta_of_n(hi) > target:
        hi *= 2
        if hi > 1 << 62:
            raise ValueError("failure bound never reaches the target")
    root = brentq(lambda n: delta_of_n(n) - target, hi / 2, hi, xtol=1e-9)
    n = max(1, math.ceil(root - 1e-6))
    while delta_of_n(n) > target:
        n += 1
    while n > 1 and delta_of_n(n - 1) <= target:
        n -= 1
    return n


def werner_failure_bound(w, n, eps_w, s=1.0) -> float:
    """Bound reported by the closed-form estimator when ``w_hat = w``."""
    slope = 2 * eps_w * (1 - w)
    eps_r = s / 4 * (eps_w**2 + slope)
    eps_l = s / 4 * (-(eps_w**2) + slope)
    return min(1.0, _tail_term(n, eps_l) + _tail_term(n, eps_r))


def werner_required_rounds(w, delta, eps_w, s=1.0) -> int:
    """Fewest protocol-A rounds whose bound at ``w_hat = w`` is at most ``delta``."""
    return _smallest_n(lambda n: werner_failure_bound(w, n, eps_w, s), delta)


def werner_consumed(w, delta, eps_w, s=1.0) -> float:
    """Expected states consumed, ``(2 - p) N``, at the required round count."""
    p = (s * w**2 - 2 * s * w + s + 1) / 4
    return (2 - p) * werner_required_rounds(w, delta, eps_w, s)


def werner_crossover(delta, eps_w, s=1.0, w_max=2 / 3):
    """Largest-w edge of the region where distillation consumes fewer states than tomography.

    Returns ``None`` if distillation never wins on ``[0, w_max]``.  The
    consumed count is a step function in w, so the edge is located by
    bisection to 1e-9.
    """
    n_tom = tomography_werner_rounds(delta, eps_w)

    def wins(w):
        return werner_consumed(w, delta, eps_w, s) < n_tom

    if not wins(0.0):
        return None
    if wins(w_max):
        return w_max
    lo, hi = 0.0, w_max
    while hi - lo > 1e-9:
        mid = (lo + hi) / 2
        lo, hi = (mid, hi) if wins(mid) else (lo, mid)
    return lo


def bell_failure_bound(q, n, eps) -> float:
    """Noiseless closed-form bound evaluated at the true ``x``, ``n`` rounds per protocol."""
    x = bv.x_values(q)
    eps = _triple(eps)
    terms = []
    for xi, e in zip(x, eps):
        slope = e * (2 * xi - 1)
        terms.append((_tail_term(n, -(e**2) + slope), _tail_term(n, e**2 + slope)))
    return combine_failure(terms)


def bell_required_rounds(q, delta, eps) -> int:
    """Fewest rounds per protocol (equal split) reaching failure bound ``delta``."""
    return _smallest_n(lambda n: bell_failure_bound(q, n, eps), delta)
