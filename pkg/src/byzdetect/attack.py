"""Causal attack strategies on a fixed set of compromised sensors.

An attack sees only what the compromised sensors see: their current true
measurements and the history of what they have reported.  It returns a bias
vector over all ``m`` sensors that is zero outside the compromised set, so the
fusion center receives ``y' = y + bias``.

Manipulated values are kept inside the measurement support so the LLR of every
report is defined.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from .errors import ConfigError, RangeError
from .limits import NetworkShape
from .measures import BernoulliPair, DistributionPair, GaussianShiftPair
from .rates import RateProfile

__all__ = [
    "AttackContext",
    "flip_compromised_set",
    "flip_attack",
    "attack_target",
    "rate_target_attack",
    "validate_admissible",
    "Attack",
    "NoAttack",
    "FlipAttack",
    "RateTargetAttack",
    "make_attack",
]

log = logging.getLogger(__name__)


@dataclass
class AttackContext:
    """Information available to the attacker at time ``k``.

    ``y_true`` holds the current true measurements of the compromised sensors,
    shape ``(..., len(compromised))``.  ``prev_lam_bar`` is the running LLR mean
    of what those sensors reported up to ``k - 1`` (a function of the attacker's
    own history).
    """

    compromised: tuple[int, ...]
    theta: int
    k: int
    m: int
    y_true: np.ndarray
    prev_lam_bar: np.ndarray | None = None
    budget: int | None = None

    def empty_bias(self) -> np.ndarray:
        return np.zeros(self.y_true.shape[:-1] + (self.m,))


def flip_compromised_set(m: int, n: int, theta: int) -> tuple[int, ...]:
    """Sensors taken over by the distribution-flipping attack.

    The first ``n`` sensors when theta=0 and the last ``n`` sensors (minus any
    overlap with the first ``n``) when theta=1.  Under both hypotheses the first
    block then reports ``mu`` and the last block ``nu``.
    """
    first = set(range(n))
    if theta == 0:
        return tuple(sorted(first))
    return tuple(sorted(set(range(m - n, m)) - first))


def flip_attack(ctx: AttackContext, pair: DistributionPair, rng: np.random.Generator) -> np.ndarray:
    """Replace each compromised report by a fresh draw from the other hypothesis."""
    bias = ctx.empty_bias()
    if not ctx.compromised:
        return bias
    fake = pair.sample(1 - ctx.theta, rng, ctx.y_true.shape)
    bias[..., list(ctx.compromised)] = fake - ctx.y_true
    return bias


def attack_target(profile: RateProfile, theta: int, z_s: float) -> tuple[float, bool]:
    """Target LLR mean for the rate-targeting attack and whether it is attainable.

    theta=0 targets ``I_0^{-1}(z_s)``, theta=1 targets ``I_1^{-1}(z_s)``.  When
    ``z_s`` exceeds the branch range the target is clamped to the far end of
    the LLR range.
    """
    try:
        return profile.inv_rate(theta, z_s), True
    except RangeError:
        lo, hi = profile.lambda_range
        return (hi if theta == 0 else lo), False


def rate_target_attack(
    ctx: AttackContext, profile: RateProfile, z_s: float, target: str = "nearest"
) -> tuple[np.ndarray, np.ndarray]:
    """Bias that keeps every compromised running mean at rate at least ``z_s``.

    Returns ``(bias, unmet)`` where ``unmet`` flags compromised sensors whose
    constraint ``I_theta(lam_bar) >= z_s`` could not be met this step.

    ``target="nearest"`` steers each mean as close as possible to the branch
    inverse of ``z_s``; ``target="extreme"`` pushes it to the far end of the
    LLR range (discrete pairs only).
    """
    pair = profile.pair
    bias = ctx.empty_bias()
    idx = list(ctx.compromised)
    if not idx:
        return bias, np.zeros(ctx.y_true.shape, dtype=bool)
    k = ctx.k
    prev = np.zeros(ctx.y_true.shape) if ctx.prev_lam_bar is None else ctx.prev_lam_bar
    x_star, _ = attack_target(profile, ctx.theta, z_s)

    if isinstance(pair, BernoulliPair):
        support = np.asarray(pair.support)
        llr = pair.llr(support)
        cand = ((k - 1) * prev[..., None] + llr) / k  # (..., |I|, |support|)
        if target == "extreme":
            choice = np.full(prev.shape, int(np.argmax(llr) if ctx.theta == 0 else np.argmin(llr)))
        else:
            ok = profile.rate(ctx.theta, cand, clamp=True) >= z_s
            dist = np.abs(cand - x_star)
            # feasible candidates first, then distance to the target
            score = np.where(ok, dist, dist + math.inf)
            any_ok = ok.any(axis=-1, keepdims=True)
            choice = np.argmin(np.where(any_ok, score, dist), axis=-1)
        fake = support[choice]
        new_mean = np.take_along_axis(cand, choice[..., None], axis=-1)[..., 0]
    elif isinstance(pair, GaussianShiftPair):
        if target == "extreme":
            raise ConfigError("target='extreme' needs a bounded LLR range")
        lam = k * x_star - (k - 1) * prev
        fake = pair.llr_inverse(lam)
        new_mean = np.full(prev.shape, x_star)
    else:  # pragma: no cover - only the two shipped pairs exist
        raise ConfigError(f"rate-target attack does not support {type(pair).__name__}")

    unmet = profile.rate(ctx.theta, new_mean, clamp=True) < z_s * (1 - 1e-12)
    bias[..., idx] = fake - ctx.y_true
    return bias, unmet


def validate_admissible(ctx: AttackContext, bias, n: int | None = None) -> bool:
    """True iff the bias touches only compromised sensors and the set fits the budget."""
    budget = ctx.budget if n is None else n
    if budget is not None and len(ctx.compromised) > budget:
        return False
    bias = np.asarray(bias)
    touched = np.flatnonzero(np.any(bias.reshape(-1, bias.shape[-1]) != 0.0, axis=0))
    return set(touched.tolist()) <= set(ctx.compromised)


# ---------------------------------------------------------------------------
# strategies used by the simulation harness
# ---------------------------------------------------------------------------
class Attack:
    """Stateful wrapper holding one scenario's compromised set and history."""

    kind = "none"

    def __init__(self, profile: RateProfile, shape: NetworkShape):
        self.profile = profile
        self.shape = shape
        self.trace: dict[str, Any] = {}

    def compromised_set(self, theta: int) -> tuple[int, ...]:
        return ()

    def reset(self, theta: int, batch_shape: tuple[int, ...] = ()) -> None:
        self.theta = theta
        self.compromised = self.compromised_set(theta)
        self.batch_shape = tuple(batch_shape)

    def context(self, y: np.ndarray, k: int) -> AttackContext:
        return AttackContext(
            self.compromised, self.theta, k, self.shape.m, y[..., list(self.compromised)],
            budget=self.shape.n,
        )

    def bias(self, y: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
        return np.zeros_like(y)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind}


class NoAttack(Attack):
    pass


class FlipAttack(Attack):
    kind = "flip"

    def compromised_set(self, theta):
        return flip_compromised_set(self.shape.m, self.shape.n, theta)

    def bias(self, y, k, rng):
        return flip_attack(self.context(y, k), self.profile.pair, rng)


class RateTargetAttack(Attack):
    kind = "rate_target"

    def __init__(self, profile, shape, z_s: float, target: str = "nearest"):
        if target not in ("nearest", "extreme"):
            raise ConfigError(f"unknown rate_target mode {target!r}")
        if z_s < 0.0:
            raise ConfigError("z_s must be non-negative")
        if target == "extreme" and not profile.pair.discrete:
            raise ConfigError("target='extreme' needs a discrete pair")
        super().__init__(profile, shape)
        self.z_s = float(z_s)
        self.target = target

    def compromised_set(self, theta):
        return tuple(range(self.shape.n))

    def reset(self, theta, batch_shape=()):
        super().reset(theta, batch_shape)
        x_star, feasible = attack_target(self.profile, theta, self.z_s)
        self._lam_bar = np.zeros(self.batch_shape + (len(self.compromised),))
        self.trace = {"theta": theta, "target": x_star, "feasible": feasible, "unmet": {}}
        if not feasible:
            log.info(
                "rate_target: z_s=%.4g unreachable on the theta=%d branch; target clamped to %.4g",
                self.z_s, theta, x_star,
            )

    def bias(self, y, k, rng):
        ctx = self.context(y, k)
        if self._lam_bar.shape != ctx.y_true.shape:
            self._lam_bar = np.broadcast_to(self._lam_bar, ctx.y_true.shape).copy()
        ctx.prev_lam_bar = self._lam_bar
        bias, unmet = rate_target_attack(ctx, self.profile, self.z_s, self.target)
        reported = ctx.y_true + bias[..., list(self.compromised)]
        self._lam_bar = ((k - 1) * self._lam_bar + self.profile.pair.llr(reported)) / k
        n_unmet = int(unmet.sum())
        if n_unmet:
            self.trace["unmet"][k] = self.trace["unmet"].get(k, 0) + n_unmet
        return bias

    def to_dict(self):
        return {"kind": self.kind, "z_s": self.z_s, "target": self.target}


def make_attack(spec: dict[str, Any], profile: RateProfile, shape: NetworkShape) -> Attack:
    """Instantiate an attack from its JSON specification."""
    kind = spec.get("kind", "none")
    if kind == "none":
        return NoAttack(profile, shape)
    if kind == "flip":
        return FlipAttack(profile, shape)
    if kind == "rate_target":
        if "z_s" not in spec:
            raise ConfigError("rate_target attack needs z_s")
        return RateTargetAttack(profile, shape, float(spec["z_s"]), spec.get("target", "nearest"))
    raise ConfigError(f"unknown attack kind {kind!r}")
