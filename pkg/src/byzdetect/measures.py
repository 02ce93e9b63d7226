"""Hypothesis distribution pairs.

A pair bundles the measurement law under ``theta = 0`` (``nu``) and under
``theta = 1`` (``mu``) together with everything the rest of the package needs
from it: samplers (plain and exponentially tilted), the log-likelihood ratio
``llr(y) = log dmu/dnu (y)`` and the log moment generating functions of the
LLR under each hypothesis.

Only two families ship: a Bernoulli pair and a Gaussian mean-shift pair.  A new
family must supply the sampler, the LLR and the log-MGF (with its first two
derivatives) together; nothing is derived by quadrature.
"""
from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy.special import expit

from .errors import ConfigError, OutOfSupport

__all__ = [
    "DistributionPair",
    "BernoulliPair",
    "GaussianShiftPair",
    "pair_from_dict",
    "substream",
]


def substream(master_seed: int, *keys: int) -> np.random.Generator:
    """Independent generator keyed by ``(master_seed, *keys)``.

    The same key tuple always yields the same stream, regardless of which
    process asks for it or in what order.
    """
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), *map(int, keys)]))


def _check_theta(theta: int) -> int:
    if theta not in (0, 1):
        raise ValueError(f"theta must be 0 or 1, got {theta!r}")
    return int(theta)


class DistributionPair(ABC):
    """Interface shared by all hypothesis pairs."""

    #: True when the measurement has finite support.
    discrete: bool = False

    @abstractmethod
    def sample(self, theta: int, rng: np.random.Generator, count) -> np.ndarray:
        """I.i.d. draws from ``nu`` (theta=0) or ``mu`` (theta=1)."""

    @abstractmethod
    def sample_tilted(self, w: float, rng: np.random.Generator, count) -> np.ndarray:
        """Draws from ``nu_w``, the law with density ``exp(w*llr(y) - log M0(w))`` w.r.t. ``nu``."""

    @abstractmethod
    def llr(self, y) -> np.ndarray:
        """Log-likelihood ratio ``log dmu/dnu`` at ``y``."""

    @abstractmethod
    def log_mgf(self, theta: int, w) -> np.ndarray:
        """``log E_theta[exp(w * llr(y))]``."""

    @abstractmethod
    def dlog_mgf(self, theta: int, w) -> np.ndarray:
        """First derivative of :meth:`log_mgf` in ``w`` (mean of the LLR under the tilted law)."""

    @abstractmethod
    def d2log_mgf(self, theta: int, w) -> np.ndarray:
        """Second derivative of :meth:`log_mgf` in ``w``."""

    @property
    @abstractmethod
    def lambda_range(self) -> tuple[float, float]:
        """Closed hull of the essential range of the LLR."""

    @abstractmethod
    def kl(self) -> tuple[float, float]:
        """``(D(0||1), D(1||0))`` in closed form."""

    def endpoint_rate(self, theta: int, upper: bool) -> float:
        """Rate function value at an endpoint of :attr:`lambda_range`.

        For discrete pairs this is ``-log P_theta(llr = endpoint)``; continuous
        pairs have unbounded LLR range and never reach an endpoint.
        """
        return math.inf

    def rate_closed_form(self, theta: int, x):
        """Rate function in closed form, or ``None`` when it must be solved numerically."""
        return None

    @abstractmethod
    def to_dict(self) -> dict[str, Any]:
        """JSON-ready specification, inverse of :func:`pair_from_dict`."""


@dataclass(frozen=True)
class BernoulliPair(DistributionPair):
    """``y in {0, 1}`` with ``P(y=1) = p0`` under theta=0 and ``p1`` under theta=1."""

    p0: float
    p1: float

    discrete = True

    def __post_init__(self):
        for name in ("p0", "p1"):
            p = getattr(self, name)
            if not (0.0 < p < 1.0):
                raise ConfigError(f"{name} must lie in (0, 1), got {p!r}")
        if self.p0 == self.p1:
            raise ConfigError("p0 == p1: hypotheses are indistinguishable")

    @property
    def support(self) -> tuple[float, float]:
        return (0.0, 1.0)

    @property
    def llr_atoms(self) -> tuple[float, float]:
        """LLR values at ``y = 0`` and ``y = 1``."""
        return (
            math.log((1.0 - self.p1) / (1.0 - self.p0)),
            math.log(self.p1 / self.p0),
        )

    def _p(self, theta: int) -> float:
        return self.p1 if _check_theta(theta) else self.p0

    def sample(self, theta, rng, count):
        return (rng.random(count) < self._p(theta)).astype(np.float64)

    def tilted_one_prob(self, w: float) -> float:
        """``nu_w(y = 1)``."""
        l0, l1 = self.llr_atoms
        return float(expit(math.log(self.p0 / (1.0 - self.p0)) + w * (l1 - l0)))

    def sample_tilted(self, w, rng, count):
        return (rng.random(count) < self.tilted_one_prob(w)).astype(np.float64)

    def llr(self, y):
        y = np.asarray(y, dtype=np.float64)
        ones = y == 1.0
        if not np.all(ones | (y == 0.0)):
            bad = y[~(ones | (y == 0.0))].ravel()[:3]
            raise OutOfSupport(f"Bernoulli measurement outside {{0, 1}}: {bad.tolist()}")
        l0, l1 = self.llr_atoms
        return np.where(ones, l1, l0)

    def _log_weights(self, theta):
        p = self._p(theta)
        return math.log1p(-p), math.log(p)

    def log_mgf(self, theta, w):
        w = np.asarray(w, dtype=np.float64)
        a0, a1 = self._log_weights(theta)
        l0, l1 = self.llr_atoms
        return np.logaddexp(a0 + w * l0, a1 + w * l1)

    def _tilt_prob(self, theta, w):
        # probability of the y=1 atom under the law tilted by exp(w*llr)
        a0, a1 = self._log_weights(theta)
        l0, l1 = self.llr_atoms
        return expit(a1 - a0 + np.asarray(w, dtype=np.float64) * (l1 - l0))

    def dlog_mgf(self, theta, w):
        l0, l1 = self.llr_atoms
        return l0 + self._tilt_prob(theta, w) * (l1 - l0)

    def d2log_mgf(self, theta, w):
        l0, l1 = self.llr_atoms
        q = self._tilt_prob(theta, w)
        return (l1 - l0) ** 2 * q * (1.0 - q)

    @property
    def lambda_range(self):
        l0, l1 = self.llr_atoms
        return (min(l0, l1), max(l0, l1))

    def kl(self):
        l0, l1 = self.llr_atoms
        d01 = -((1.0 - self.p0) * l0 + self.p0 * l1)
        d10 = (1.0 - self.p1) * l0 + self.p1 * l1
        return d01, d10

    def endpoint_rate(self, theta, upper):
        l0, l1 = self.llr_atoms
        p = self._p(theta)
        # which atom sits at the requested end of the LLR range
        at_one = (l1 > l0) == bool(upper)
        return -math.log(p if at_one else 1.0 - p)

    def to_dict(self):
        return {"kind": "bernoulli", "p0": self.p0, "p1": self.p1}


@dataclass(frozen=True)
class GaussianShiftPair(DistributionPair):
    """``y = a*theta + v`` with ``v ~ N(vbar, sigma^2)``.

    The LLR is affine in ``y`` and Gaussian under both hypotheses, with mean
    ``-/+ d/2`` and variance ``d = a^2 / sigma^2``.
    """

    a: float
    vbar: float = 0.0
    sigma: float = 1.0

    discrete = False

    def __post_init__(self):
        if not self.sigma > 0.0:
            raise ConfigError(f"sigma must be positive, got {self.sigma!r}")
        if self.a == 0.0 or not math.isfinite(self.a):
            raise ConfigError(f"a must be finite and non-zero, got {self.a!r}")

    @property
    def snr(self) -> float:
        return self.a**2 / self.sigma**2

    def sample(self, theta, rng, count):
        mean = self.vbar + self.a * _check_theta(theta)
        return rng.normal(mean, self.sigma, count)

    def sample_tilted(self, w, rng, count):
        # exp(w*llr) shifts the Gaussian mean by w*a
        return rng.normal(self.vbar + w * self.a, self.sigma, count)

    def llr(self, y):
        y = np.asarray(y, dtype=np.float64)
        s2 = self.sigma**2
        return self.a * (y - self.vbar) / s2 - self.a**2 / (2.0 * s2)

    def llr_inverse(self, lam):
        """Measurement ``y`` with ``llr(y) = lam``."""
        lam = np.asarray(lam, dtype=np.float64)
        s2 = self.sigma**2
        return self.vbar + s2 / self.a * (lam + self.a**2 / (2.0 * s2))

    def _shift(self, theta, w):
        # log M1(w) = log M0(w + 1)
        return np.asarray(w, dtype=np.float64) + _check_theta(theta)

    def log_mgf(self, theta, w):
        u = self._shift(theta, w)
        return 0.5 * self.snr * u * (u - 1.0)

    def dlog_mgf(self, theta, w):
        u = self._shift(theta, w)
        return self.snr * (u - 0.5)

    def d2log_mgf(self, theta, w):
        return np.full_like(self._shift(theta, w), self.snr)

    @property
    def lambda_range(self):
        return (-math.inf, math.inf)

    def kl(self):
        d = 0.5 * self.snr
        return d, d

    def rate_closed_form(self, theta, x):
        # the LLR is N(-/+ d/2, d), whose rate function is a parabola
        d = self.snr
        mean = (d if _check_theta(theta) else -d) / 2.0
        return (np.asarray(x, dtype=np.float64) - mean) ** 2 / (2.0 * d)

    def to_dict(self):
        return {"kind": "gaussian_shift", "a": self.a, "vbar": self.vbar, "sigma": self.sigma}


def pair_from_dict(spec: dict[str, Any]) -> DistributionPair:
    """Build a pair from its JSON specification.

    >>> pair_from_dict({"kind": "bernoulli", "p0": 0.02, "p1": 0.6})
    BernoulliPair(p0=0.02, p1=0.6)
    """
    if isinstance(spec, DistributionPair):
        return spec
    try:
        kind = spec["kind"]
        if kind == "bernoulli":
            return BernoulliPair(float(spec["p0"]), float(spec["p1"]))
        if kind == "gaussian_shift":
            return GaussianShiftPair(
                float(spec["a"]), float(spec.get("vbar", 0.0)), float(spec.get("sigma", 1.0))
            )
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed pair specification {spec!r}: {exc}") from exc
    raise ConfigError(f"unknown pair kind {kind!r}")
