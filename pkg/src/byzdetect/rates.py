"""Large-deviation rate functions of the log-likelihood ratio.

``I_j(x) = sup_w { w*x - log M_j(w) }`` is evaluated through its stationarity
condition: the derivative ``psi_j`` of ``log M_j`` is strictly increasing, so
the maximising tilt ``phi_j(x)`` is the unique root of ``psi_j(w) = x`` and

    I_j(x) = phi_j(x) * x - log M_j(phi_j(x)),    I_j'(x) = phi_j(x).

The root is bracketed by doubling and then polished by Newton steps that fall
back to bisection whenever they leave the bracket, so convergence is global.
Everything here is vectorised over ``x``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegeneratePair, NumericalFailure, RangeError
from .measures import DistributionPair

__all__ = ["RateProfile", "build_profile", "solve_tilt"]

#: absolute tolerance on the tilt ``w`` returned by :func:`solve_tilt`
TILT_TOL = 1e-12
#: tolerance on ``|I_j(x) - z|`` for the branch inverses
INVERSE_TOL = 1e-10
#: KL divergences below this are treated as identical hypotheses
DEGENERATE_KL = 1e-12

_MAX_DOUBLINGS = 64
_MAX_ITER = 200
# np.unique pays off once arrays are larger than this
_UNIQUE_THRESHOLD = 64


def solve_tilt(pair: DistributionPair, theta: int, x, tol: float = TILT_TOL) -> np.ndarray:
    """Solve ``d/dw log M_theta(w) = x`` for ``w``, elementwise.

    ``x`` must lie strictly inside ``pair.lambda_range``.
    """
    x = np.asarray(x, dtype=np.float64)
    psi = lambda w: pair.dlog_mgf(theta, w)  # noqa: E731

    lo = np.full(x.shape, -1.0)
    hi = np.full(x.shape, 1.0)
    for _ in range(_MAX_DOUBLINGS):
        low_bad = psi(lo) > x
        high_bad = psi(hi) < x
        if not (low_bad.any() or high_bad.any()):
            break
        lo = np.where(low_bad, 2.0 * lo, lo)
        hi = np.where(high_bad, 2.0 * hi, hi)
    else:
        raise NumericalFailure("could not bracket the tilt; x too close to the LLR range boundary")

    w = 0.5 * (lo + hi)
    for _ in range(_MAX_ITER):
        f = psi(w) - x
        lo = np.where(f < 0.0, w, lo)
        hi = np.where(f > 0.0, w, hi)
        slope = pair.d2log_mgf(theta, w)
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = w - f / slope
        inside = np.isfinite(newton) & (newton > lo) & (newton < hi)
        w_new = np.where(inside, newton, 0.5 * (lo + hi))
        w_new = np.where(f == 0.0, w, w_new)
        step = np.abs(w_new - w)
        w = w_new
        if np.all((step <= tol) | (hi - lo <= tol)):
            return w
    raise NumericalFailure("tilt solver did not converge")


@dataclass(frozen=True)
class RateProfile:
    """Rate-function summary of one :class:`DistributionPair`.

    Built by :func:`build_profile`; immutable and safe to share.
    """

    pair: DistributionPair
    d01: float
    d10: float
    c: float
    wstar: float
    lambda_range: tuple[float, float]
    tilt_tol: float = TILT_TOL
    inverse_tol: float = INVERSE_TOL
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def dmin(self) -> float:
        return min(self.d01, self.d10)

    # -- rate functions -------------------------------------------------
    def tilt(self, j: int, x) -> np.ndarray:
        """Maximising tilt ``phi_j(x)`` for ``x`` inside the open LLR range."""
        return solve_tilt(self.pair, j, x, self.tilt_tol)

    def rate(self, j: int, x, clamp: bool = False):
        """``I_j(x)``; ``+inf`` outside :attr:`lambda_range`.

        With ``clamp=True`` the argument is first clipped into the LLR range,
        so rounding noise in an empirical mean never produces an infinite rate.
        """
        scalar = np.ndim(x) == 0
        x = np.asarray(x, dtype=np.float64)
        lo, hi = self.lambda_range
        if clamp:
            x = np.clip(x, lo, hi)
        if x.size > _UNIQUE_THRESHOLD:
            ux, inverse = np.unique(x, return_inverse=True)
            out = self._rate_flat(j, ux)[inverse].reshape(x.shape)
        else:
            out = self._rate_flat(j, x.ravel()).reshape(x.shape)
        return float(out) if scalar else out

    def _rate_flat(self, j, x):
        lo, hi = self.lambda_range
        out = np.full(x.shape, math.inf)
        interior = (x > lo) & (x < hi)
        closed = self.pair.rate_closed_form(j, x[interior]) if interior.any() else None
        if closed is not None:
            out[interior] = closed
        elif interior.any():
            xi = x[interior]
            w = self.tilt(j, xi)
            out[interior] = np.maximum(w * xi - self.pair.log_mgf(j, w), 0.0)
        out[x == lo] = self.pair.endpoint_rate(j, upper=False)
        out[x == hi] = self.pair.endpoint_rate(j, upper=True)
        return out

    def rate0(self, x, clamp: bool = False):
        return self.rate(0, x, clamp)

    def rate1(self, x, clamp: bool = False):
        return self.rate(1, x, clamp)

    def rate_derivative(self, j: int, x: float) -> float:
        """``I_j'(x)``, equal to the maximising tilt ``phi_j(x)``."""
        lo, hi = self.lambda_range
        if not lo < x < hi:
            raise RangeError(f"x={x} is not inside the open LLR range ({lo}, {hi})")
        return float(self.tilt(j, x))

    # -- branch inverses --------------------------------------------------
    def branch_sup(self, j: int) -> float:
        """Largest value attained on the monotone branch used by :meth:`inv_rate`."""
        return self.pair.endpoint_rate(j, upper=(j == 0))

    def inv_rate(self, j: int, z: float) -> float:
        """Branch inverse of ``I_j``.

        ``j=0``: the largest ``x`` with ``I_0(x) = z`` (increasing branch ``x >= -D(0||1)``).
        ``j=1``: the smallest ``x`` with ``I_1(x) = z`` (decreasing branch ``x <= D(1||0)``).
        """
        key = (j, float(z))
        if key in self._cache:
            return self._cache[key]
        value = self._inv_rate(j, float(z))
        self._cache[key] = value
        return value

    def _inv_rate(self, j, z):
        if not z >= 0.0:
            raise RangeError(f"inverse rate needs z >= 0, got {z}")
        sup = self.branch_sup(j)
        if z > sup:
            raise RangeError(f"z={z} exceeds the branch supremum {sup} of I_{j}")
        lo, hi = self.lambda_range
        # orient so that g(t) = I_j(start + sign*t) is increasing in t >= 0
        start, sign, end = (-self.d01, 1.0, hi) if j == 0 else (self.d10, -1.0, lo)
        if z == 0.0:
            return start
        if z == sup and math.isfinite(end):
            return end
        g = lambda t: self.rate(j, start + sign * t) - z  # noqa: E731

        t_lo = 0.0
        if math.isfinite(end):
            t_hi = abs(end - start)
        else:
            t_hi = 1.0
            while g(t_hi) < 0.0:
                t_lo, t_hi = t_hi, 2.0 * t_hi
        t = 0.5 * (t_lo + t_hi)
        for _ in range(_MAX_ITER):
            f = g(t)
            if abs(f) <= self.inverse_tol:
                return start + sign * t
            if f < 0.0:
                t_lo = t
            else:
                t_hi = t
            x = start + sign * t
            slope = sign * float(self.tilt(j, x)) if lo < x < hi else 0.0
            newton = t - f / slope if slope > 0.0 else math.nan
            t = newton if t_lo < newton < t_hi else 0.5 * (t_lo + t_hi)
            if t_hi - t_lo < 1e-15 * max(1.0, abs(t)):
                return start + sign * t
        raise NumericalFailure(f"inverse rate I_{j}^-1({z}) did not converge")

    def inv_rate0(self, z: float) -> float:
        return self.inv_rate(0, z)

    def inv_rate1(self, z: float) -> float:
        return self.inv_rate(1, z)

    def summary(self) -> dict:
        return {
            "c": self.c,
            "d01": self.d01,
            "d10": self.d10,
            "dmin": self.dmin,
            "wstar": self.wstar,
            "lambda_range": list(self.lambda_range),
        }


def build_profile(
    pair: DistributionPair, tilt_tol: float = TILT_TOL, inverse_tol: float = INVERSE_TOL
) -> RateProfile:
    """Compute KL divergences, the Chernoff constant ``C`` and its tilt ``w*``.

    ``w*`` minimises ``log M0`` on ``(0, 1)``; it is found from the stationarity
    condition ``psi_0(w*) = 0`` and ``C = -log M0(w*)``.
    """
    d01, d10 = pair.kl()
    if min(d01, d10) < DEGENERATE_KL:
        raise DegeneratePair(f"KL divergences ({d01}, {d10}) are numerically zero")
    wstar = float(solve_tilt(pair, 0, 0.0, tilt_tol))
    c = float(-pair.log_mgf(0, wstar))
    return RateProfile(
        pair=pair,
        d01=float(d01),
        d10=float(d10),
        c=c,
        wstar=wstar,
        lambda_range=tuple(float(v) for v in pair.lambda_range),
        tilt_tol=tilt_tol,
        inverse_tol=inverse_tol,
    )
