"""Sequential detectors.

Every detector keeps the running per-sensor LLR means ``lam_bar`` (shape
``(..., m)``, so a whole batch of independent trials can be advanced at once)
and maps them to a decision in ``{0., 1.}`` at each step.  The decision rules
themselves are exposed as pure functions of ``lam_bar`` so they can be tested
against independent oracles.

Ties of the LLR sum at exactly zero decide ``1``.
"""
from __future__ import annotations

import math
from typing import Any, NamedTuple, Sequence

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import ConfigError, UnsupportedPair
from .limits import NetworkShape, TradeoffCurves
from .measures import BernoulliPair
from .rates import RateProfile

__all__ = [
    "smallest_sum",
    "bayes_decision",
    "secure_decision",
    "secure_sensors_decision",
    "unknown_n_decision",
    "trimmed_decision",
    "Detector",
    "BayesDetector",
    "SecureDetector",
    "SecureSensorsDetector",
    "UnknownNDetector",
    "TrimmedDetector",
    "QOutOfMDetector",
    "make_detector",
    "QomError",
    "QomOptimum",
    "qom_error_probs",
    "qom_exact_error",
    "qom_optimize",
    "qom_schedule",
]


# ---------------------------------------------------------------------------
# decision rules on the statistic vector
# ---------------------------------------------------------------------------
def smallest_sum(values: np.ndarray, count: int) -> np.ndarray:
    """Sum of the ``count`` smallest entries along the last axis.

    Equals the minimum over all ``count``-subsets of the subset sum, at the
    price of one sort.
    """
    values = np.asarray(values, dtype=np.float64)
    if count <= 0:
        return np.zeros(values.shape[:-1])
    return np.sort(values, axis=-1)[..., :count].sum(axis=-1)


def _sign_rule(lam_bar: np.ndarray) -> np.ndarray:
    return (np.asarray(lam_bar).sum(axis=-1) >= 0.0).astype(np.float64)


def bayes_decision(lam_bar, chi: float = 0.0, subset: Sequence[int] | None = None) -> np.ndarray:
    """``1`` iff the LLR means over ``subset`` (all sensors by default) sum to at least ``chi``."""
    lam_bar = np.asarray(lam_bar, dtype=np.float64)
    if subset is not None:
        lam_bar = lam_bar[..., list(subset)]
    return (lam_bar.sum(axis=-1) >= chi).astype(np.float64)


def secure_decision(profile: RateProfile, lam_bar, z_s: float, n: int) -> np.ndarray:
    """Decision of the secure detector tuned to security level ``z_s``.

    With ``delta_j`` the smallest total ``I_j`` rate over ``m - n`` sensors:
    decide 0 if ``delta_0 < z_s``, else 1 if ``delta_1 < z_s``, else the sign
    of the total LLR mean.
    """
    lam_bar = np.asarray(lam_bar, dtype=np.float64)
    keep = lam_bar.shape[-1] - n
    delta0 = smallest_sum(profile.rate(0, lam_bar, clamp=True), keep)
    delta1 = smallest_sum(profile.rate(1, lam_bar, clamp=True), keep)
    return np.where(delta0 < z_s, 0.0, np.where(delta1 < z_s, 1.0, _sign_rule(lam_bar)))


def secure_sensors_decision(
    profile: RateProfile, lam_bar, z_s: float, n: int, m_s: int
) -> np.ndarray:
    """Secure detector when the last ``m_s`` sensors are known to be benign.

    The subset minimisation runs over the normal sensors only; the secure
    sensors' rates are always added in full.
    """
    lam_bar = np.asarray(lam_bar, dtype=np.float64)
    m = lam_bar.shape[-1]
    normal, secure = lam_bar[..., : m - m_s], lam_bar[..., m - m_s :]
    keep = m - m_s - n
    out = _sign_rule(lam_bar)
    decided = np.zeros(out.shape, dtype=bool)
    for j in (0, 1):
        stat = smallest_sum(profile.rate(j, normal, clamp=True), keep)
        if m_s:
            stat = stat + profile.rate(j, secure, clamp=True).sum(axis=-1)
        fire = ~decided & (stat < z_s)
        out = np.where(fire, float(j), out)
        decided |= fire
    return out


def unknown_n_decision(profile: RateProfile, lam_bar, z_tuple: Sequence[float]) -> np.ndarray:
    """Detector for an unknown number of compromised sensors (at most ``len(z_tuple) - 1``).

    Tests ``n_a = n, n-1, ..., 1`` in turn against ``z_{n_a}`` and stops at the
    first test that fires; falls through to the sign rule.
    """
    lam_bar = np.asarray(lam_bar, dtype=np.float64)
    m = lam_bar.shape[-1]
    n = len(z_tuple) - 1
    r0 = profile.rate(0, lam_bar, clamp=True)
    r1 = profile.rate(1, lam_bar, clamp=True)
    out = _sign_rule(lam_bar)
    decided = np.zeros(out.shape, dtype=bool)
    for n_a in range(n, 0, -1):
        z = z_tuple[n_a]
        for j, r in ((0, r0), (1, r1)):
            fire = ~decided & (smallest_sum(r, m - n_a) < z)
            out = np.where(fire, float(j), out)
            decided |= fire
    return out


def trimmed_decision(lam_bar, n: int) -> np.ndarray:
    """Drop the ``n`` largest and ``n`` smallest LLR means and test the sign of the rest."""
    lam_bar = np.sort(np.asarray(lam_bar, dtype=np.float64), axis=-1)
    m = lam_bar.shape[-1]
    return (lam_bar[..., n : m - n].sum(axis=-1) >= 0.0).astype(np.float64)


# ---------------------------------------------------------------------------
# stateful detectors
# ---------------------------------------------------------------------------
class Detector:
    """Running-mean state shared by all detectors.

    ``step`` consumes the (possibly manipulated) measurements of one time step,
    shape ``(..., m)``, and returns the decisions for that step.
    """

    kind = "base"

    def __init__(self, profile: RateProfile, shape: NetworkShape):
        self.profile = profile
        self.shape = shape
        self.reset()

    def reset(self, batch_shape: tuple[int, ...] = ()) -> None:
        self.k = 0
        self.lam_bar = np.zeros(tuple(batch_shape) + (self.shape.m,))

    def _update(self, y_prime) -> None:
        y_prime = np.asarray(y_prime, dtype=np.float64)
        if y_prime.shape[-1] != self.shape.m:
            raise ConfigError(f"expected {self.shape.m} measurements per step, got {y_prime.shape[-1]}")
        lam = self.profile.pair.llr(y_prime)
        if lam.shape != self.lam_bar.shape:
            self.lam_bar = np.broadcast_to(self.lam_bar, lam.shape).copy()
        self.k += 1
        k = self.k
        self.lam_bar = ((k - 1) / k) * self.lam_bar + lam / k

    def decide(self) -> np.ndarray:
        raise NotImplementedError

    def step(self, y_prime) -> np.ndarray:
        self._update(y_prime)
        return self.decide()

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind}


class BayesDetector(Detector):
    kind = "bayes"

    def __init__(self, profile, shape, chi: float = 0.0, subset: Sequence[int] | None = None):
        self.chi = float(chi)
        self.subset = None if subset is None else tuple(int(i) for i in subset)
        if self.subset is not None and not all(0 <= i < shape.m for i in self.subset):
            raise ConfigError(f"subset {self.subset} has indices outside 0..{shape.m - 1}")
        super().__init__(profile, shape)

    def decide(self):
        return bayes_decision(self.lam_bar, self.chi, self.subset)

    def to_dict(self):
        d = {"kind": self.kind, "chi": self.chi}
        if self.subset is not None:
            d["subset"] = list(self.subset)
        return d


class SecureDetector(Detector):
    kind = "secure"

    def __init__(self, profile, shape, z_s: float):
        cap = TradeoffCurves(profile, shape).sec_cap
        if not 0.0 <= z_s <= cap * (1 + 1e-12):
            raise ConfigError(f"z_s = {z_s} must lie in [0, (m-2n)^+ C] = [0, {cap}]")
        self.z_s = float(z_s)
        super().__init__(profile, shape)

    def decide(self):
        return secure_decision(self.profile, self.lam_bar, self.z_s, self.shape.n)

    def to_dict(self):
        return {"kind": self.kind, "z_s": self.z_s}


class SecureSensorsDetector(Detector):
    kind = "secure_sensors"

    def __init__(self, profile, shape, z_s: float, m_s: int | None = None):
        m_s = shape.m_s if m_s is None else int(m_s)
        if shape.n + m_s > shape.m:
            raise ConfigError(f"n + m_s exceeds m ({shape.n} + {m_s} > {shape.m})")
        shape = NetworkShape(shape.m, shape.n, m_s)
        cap = TradeoffCurves(profile, shape).secure_sensor_caps().sec_cap
        if not 0.0 <= z_s <= cap * (1 + 1e-12):
            raise ConfigError(f"z_s = {z_s} must lie in [0, {cap}]")
        self.z_s = float(z_s)
        self.m_s = m_s
        super().__init__(profile, shape)

    def decide(self):
        return secure_sensors_decision(self.profile, self.lam_bar, self.z_s, self.shape.n, self.m_s)

    def to_dict(self):
        return {"kind": self.kind, "z_s": self.z_s, "m_s": self.m_s}


class UnknownNDetector(Detector):
    kind = "unknown_n"

    def __init__(self, profile, shape, z_tuple: Sequence[float]):
        TradeoffCurves(profile, shape).validate_z_tuple(z_tuple)
        self.z_tuple = tuple(float(z) for z in z_tuple)
        super().__init__(profile, shape)

    def decide(self):
        return unknown_n_decision(self.profile, self.lam_bar, self.z_tuple)

    def to_dict(self):
        return {"kind": self.kind, "z_tuple": list(self.z_tuple)}


class TrimmedDetector(Detector):
    kind = "trimmed"

    def __init__(self, profile, shape):
        if shape.m <= 2 * shape.n:
            raise ConfigError("the trimmed detector needs m > 2n")
        super().__init__(profile, shape)

    def decide(self):
        return trimmed_decision(self.lam_bar, self.shape.n)


class QOutOfMDetector(Detector):
    """Decide 1 once the cumulative count of positive binary reports reaches ``q_k``."""

    kind = "qom"

    def __init__(self, profile, shape, q_schedule: Sequence[int]):
        if not isinstance(profile.pair, BernoulliPair):
            raise UnsupportedPair("the q-out-of-m rule needs binary measurements")
        self.q_schedule = tuple(int(q) for q in q_schedule)
        if not self.q_schedule:
            raise ConfigError("q_schedule is empty")
        super().__init__(profile, shape)

    def reset(self, batch_shape=()):
        super().reset(batch_shape)
        self.count = np.zeros(tuple(batch_shape))

    def step(self, y_prime):
        self._update(y_prime)
        y_prime = np.asarray(y_prime, dtype=np.float64)
        self.count = self.count + y_prime.sum(axis=-1)
        return self.decide()

    def decide(self):
        if self.k > len(self.q_schedule):
            raise ConfigError(f"q_schedule covers {len(self.q_schedule)} steps; step {self.k} requested")
        return (self.count >= self.q_schedule[self.k - 1]).astype(np.float64)

    def to_dict(self):
        return {"kind": self.kind, "q_schedule": list(self.q_schedule)}


_DETECTORS = {
    "bayes": lambda prof, shp, s: BayesDetector(prof, shp, s.get("chi", 0.0), s.get("subset")),
    "secure": lambda prof, shp, s: SecureDetector(prof, shp, s["z_s"]),
    "secure_sensors": lambda prof, shp, s: SecureSensorsDetector(prof, shp, s["z_s"], s.get("m_s")),
    "unknown_n": lambda prof, shp, s: UnknownNDetector(prof, shp, s["z_tuple"]),
    "trimmed": lambda prof, shp, s: TrimmedDetector(prof, shp),
    "qom": lambda prof, shp, s: QOutOfMDetector(prof, shp, s["q_schedule"]),
}


def make_detector(spec: dict[str, Any], profile: RateProfile, shape: NetworkShape) -> Detector:
    """Instantiate a detector from its JSON specification."""
    try:
        factory = _DETECTORS[spec["kind"]]
        return factory(profile, shape, spec)
    except KeyError as exc:
        raise ConfigError(f"bad detector specification {spec!r}: missing {exc}") from exc


# ---------------------------------------------------------------------------
# q-out-of-m under the worst-case attack
# ---------------------------------------------------------------------------
class QomError(NamedTuple):
    p_miss: float
    p_fa: float

    @property
    def worst(self) -> float:
        return max(self.p_miss, self.p_fa)


class QomOptimum(NamedTuple):
    q_star: int
    worst_error: float


def _log_binom_pmf(trials: int, p: float) -> np.ndarray:
    j = np.arange(trials + 1)
    return (
        gammaln(trials + 1)
        - gammaln(j + 1)
        - gammaln(trials - j + 1)
        + j * math.log(p)
        + (trials - j) * math.log1p(-p)
    )


def _tail(log_pmf: np.ndarray, lo: int, hi: int) -> float:
    """``sum(pmf[lo..hi])`` (inclusive), clipped to the support."""
    lo, hi = max(lo, 0), min(hi, len(log_pmf) - 1)
    if lo > hi:
        return 0.0
    return float(min(1.0, math.exp(logsumexp(log_pmf[lo : hi + 1]))))


def qom_error_probs(p0: float, p1: float, m: int, n: int, q: int, k: int) -> QomError:
    """Error probabilities of the q-out-of-m rule at time ``k`` under the worst attack.

    The ``n`` compromised sensors always report 0 when theta=1 and 1 when
    theta=0; the ``(m-n)k`` honest reports are binomial.  A miss is an honest
    count below ``q``; a false alarm an honest count of at least ``q - nk``.
    """
    honest = (m - n) * k
    miss = _tail(_log_binom_pmf(honest, p1), 0, q - 1)
    fa = _tail(_log_binom_pmf(honest, p0), q - n * k, honest)
    return QomError(miss, fa)


def _binary_probs(profile: RateProfile) -> tuple[float, float]:
    pair = profile.pair
    if not isinstance(pair, BernoulliPair):
        raise UnsupportedPair("q-out-of-m analysis needs a Bernoulli pair")
    return pair.p0, pair.p1


def qom_exact_error(profile: RateProfile, shape: NetworkShape, q_k: int, k: int) -> QomError:
    if k < 1:
        raise ValueError("k must be positive")
    p0, p1 = _binary_probs(profile)
    return qom_error_probs(p0, p1, shape.m, shape.n, int(q_k), int(k))


def qom_optimize(profile: RateProfile, shape: NetworkShape, k: int) -> QomOptimum:
    """Threshold minimising the worst-case error at time ``k``.

    Searches ``nk < q <= (m-n)k`` exhaustively; ties go to the smaller ``q``.
    """
    p0, p1 = _binary_probs(profile)
    m, n = shape.m, shape.n
    candidates = range(n * k + 1, (m - n) * k + 1)
    if not candidates:
        # every threshold is degenerate: the attacker can force an error
        return QomOptimum(n * k, 1.0)
    honest = (m - n) * k
    lp1, lp0 = _log_binom_pmf(honest, p1), _log_binom_pmf(honest, p0)
    best_q, best = None, math.inf
    for q in candidates:
        worst = max(_tail(lp1, 0, q - 1), _tail(lp0, q - n * k, honest))
        if worst < best:
            best_q, best = q, worst
    return QomOptimum(best_q, best)


def qom_schedule(profile: RateProfile, shape: NetworkShape, horizon: int) -> list[QomOptimum]:
    """Optimal thresholds ``q_1*, ..., q_K*``."""
    return [qom_optimize(profile, shape, k) for k in range(1, horizon + 1)]
