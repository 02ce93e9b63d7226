"""Efficiency/security trade-off curves and admissibility predicates.

All quantities are built from a :class:`~byzdetect.rates.RateProfile` and a
:class:`NetworkShape`; nothing here has a closed form beyond what the rate
functions provide.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

from .errors import ConfigError, RangeError
from .rates import RateProfile

__all__ = [
    "NetworkShape",
    "TradeoffCurves",
    "Theorem2Bounds",
    "SecureSensorCaps",
    "is_symmetric_case",
    "lemma2_value",
    "SYMMETRY_TOL",
]

SYMMETRY_TOL = 1e-8
# slack for comparisons against capped values that are computed, not stored
_ADMISSIBLE_SLACK = 1e-12


@dataclass(frozen=True)
class NetworkShape:
    """``m`` sensors, at most ``n`` compromised, ``m_s`` of them secure."""

    m: int
    n: int
    m_s: int = 0

    def __post_init__(self):
        if self.m < 1:
            raise ConfigError(f"m must be positive, got {self.m}")
        if self.n < 0 or self.m_s < 0:
            raise ConfigError("n and m_s must be non-negative")
        if self.n + self.m_s > self.m:
            raise ConfigError(f"n + m_s = {self.n + self.m_s} exceeds m = {self.m}")

    @property
    def redundancy(self) -> int:
        """``(m - 2n)^+``."""
        return max(0, self.m - 2 * self.n)


class Theorem2Bounds(NamedTuple):
    eff_cap: float
    sec_cap: float
    sec_given_eff: float


class SecureSensorCaps(NamedTuple):
    eff_cap: float
    sec_cap: float


@dataclass(frozen=True)
class TradeoffCurves:
    profile: RateProfile
    shape: NetworkShape

    @property
    def c(self) -> float:
        return self.profile.c

    @property
    def eff_cap(self) -> float:
        """``mC``: best efficiency of any detector."""
        return self.shape.m * self.c

    @property
    def sec_cap(self) -> float:
        """``(m-2n)^+ C``: best security of any detector."""
        return self.shape.redundancy * self.c

    @property
    def h_domain(self) -> tuple[float, float]:
        """Open interval ``(0, (m-n) Dmin)`` on which :meth:`h` is defined."""
        return 0.0, (self.shape.m - self.shape.n) * self.profile.dmin

    # -- per-sensor branch curves --------------------------------------
    def branch0(self, u: float) -> float:
        """``I_0(I_1^{-1}(u))``."""
        return self.profile.rate0(self.profile.inv_rate1(u))

    def branch1(self, u: float) -> float:
        """``I_1(I_0^{-1}(u))``."""
        return self.profile.rate1(self.profile.inv_rate0(u))

    def h(self, z: float) -> float:
        """Largest security compatible with efficiency ``z`` (and vice versa; ``h`` is an involution)."""
        lo, hi = self.h_domain
        if not lo < z < hi:
            raise RangeError(f"h is defined on ({lo}, {hi}); got z={z}")
        p = self.shape.m - self.shape.n
        u = z / p
        return p * min(self.branch0(u), self.branch1(u))

    def h_e(self, z_s: float) -> float:
        """Efficiency ceiling of a detector whose security is ``z_s``."""
        if not 0.0 <= z_s <= self.sec_cap * (1 + _ADMISSIBLE_SLACK):
            raise RangeError(f"h_e needs 0 <= z_s <= {self.sec_cap}; got {z_s}")
        if z_s == 0.0:
            return self.eff_cap
        return min(self.eff_cap, self.h(z_s))

    def h_s(self, z_e: float) -> float:
        """Security ceiling of a detector whose efficiency is ``z_e``."""
        if not 0.0 <= z_e <= self.eff_cap * (1 + _ADMISSIBLE_SLACK):
            raise RangeError(f"h_s needs 0 <= z_e <= {self.eff_cap}; got {z_e}")
        if z_e == 0.0 or z_e >= self.h_domain[1]:
            return 0.0
        return min(z_e, self.sec_cap, self.h(z_e))

    def is_admissible(self, z_e: float, z_s: float) -> bool:
        """Whether ``(z_e, z_s)`` is achievable, i.e. inside the shaded region."""
        if not 0.0 <= z_s <= self.sec_cap * (1 + _ADMISSIBLE_SLACK):
            return False
        limit = self.eff_cap if z_s == 0.0 else self.h_e(min(z_s, self.sec_cap))
        return z_e <= limit * (1 + _ADMISSIBLE_SLACK)

    def theorem2_bounds(self, z_e: float) -> Theorem2Bounds:
        """Caps on efficiency and security, and the security cap given efficiency ``z_e``."""
        if z_e < 0.0:
            raise RangeError(f"z_e must be non-negative, got {z_e}")
        lo, hi = self.h_domain
        sec_given_eff = self.h(z_e) if lo < z_e < hi else 0.0
        return Theorem2Bounds(self.eff_cap, self.sec_cap, sec_given_eff)

    def secure_sensor_caps(self) -> SecureSensorCaps:
        """Caps when ``m_s`` sensors can never be compromised.

        The trade-off curve itself is still :meth:`h`.
        """
        s = self.shape
        return SecureSensorCaps(self.eff_cap, max(s.redundancy, s.m_s) * self.c)

    def h_tilde(self, n_a: int, n_a_prime: int, z: float) -> float:
        """Pairwise bound between performance with ``n_a`` and ``n_a'`` compromised sensors."""
        n = self.shape.n
        if not (0 <= n_a <= n and 0 <= n_a_prime <= n):
            raise RangeError(f"n_a, n_a' must lie in [0, {n}]; got {n_a}, {n_a_prime}")
        if not z > 0.0:
            raise RangeError(f"h_tilde needs z > 0, got {z}")
        p = self.shape.m - (n_a + n_a_prime)
        if p <= 0:
            return 0.0
        u = z / p
        prof = self.profile
        b0 = self.branch0(u) if u < prof.d01 else 0.0
        b1 = self.branch1(u) if u < prof.d10 else 0.0
        return p * min(b0, b1)

    def validate_z_tuple(self, z_tuple) -> None:
        """Raise :class:`ConfigError` unless ``z_tuple`` is an admissible performance tuple.

        Weak inequalities are used throughout; a zero entry imposes no
        trade-off constraint on the others.
        """
        z = [float(v) for v in z_tuple]
        n, m, c = self.shape.n, self.shape.m, self.c
        if len(z) != n + 1:
            raise ConfigError(f"z_tuple needs n+1 = {n + 1} entries, got {len(z)}")
        for n_a, z_a in enumerate(z):
            if z_a < 0.0:
                raise ConfigError(f"z_{n_a} is negative")
            cap = max(0, m - 2 * n_a) * c
            if z_a > cap * (1 + _ADMISSIBLE_SLACK):
                raise ConfigError(f"z_{n_a} = {z_a} exceeds (m - 2 n_a) C = {cap}")
        for n_a, z_a in enumerate(z):
            for n_b, z_b in enumerate(z):
                if n_a == n_b or z_b == 0.0:
                    continue
                bound = self.h_tilde(n_a, n_b, z_b)
                if z_a > bound * (1 + _ADMISSIBLE_SLACK) + _ADMISSIBLE_SLACK:
                    raise ConfigError(
                        f"z_{n_a} = {z_a} violates the trade-off with z_{n_b} = {z_b} (bound {bound})"
                    )


def is_symmetric_case(profile: RateProfile, tol: float = SYMMETRY_TOL) -> bool:
    """True when ``I_0'(0) = -I_1'(0)``: maximal efficiency and security are then simultaneously achievable."""
    return abs(profile.rate_derivative(0, 0.0) + profile.rate_derivative(1, 0.0)) <= tol


def lemma2_value(profile: RateProfile, p: int, z: float) -> float:
    """``p * I_1(I_0^{-1}(z/p))``.

    This is the least total ``I_1`` rate of ``p`` statistics whose total ``I_0``
    rate stays below ``z``.
    """
    if p < 1:
        raise RangeError(f"p must be a positive integer, got {p}")
    if not 0.0 < z <= p * profile.d10:
        raise RangeError(f"lemma2_value needs 0 < z <= p*D(1||0) = {p * profile.d10}; got {z}")
    return p * profile.rate1(profile.inv_rate0(z / p))
