"""Monte-Carlo and importance-sampling estimates of finite-k error probabilities.

Trials are simulated in fixed-size blocks.  Block ``b`` under hypothesis
``theta`` draws everything from the substream ``(master_seed, theta, b)`` and
returns log-space sums of its (weighted) error indicators, which are reduced in
block order.  Results therefore do not depend on the number of workers.

Tilted sampling draws the benign sensors from ``nu_w`` (density proportional to
``exp(w * llr)`` w.r.t. ``nu``) under both hypotheses and reweights each prefix
of the stream by its likelihood ratio.  With ``tilt_count = t`` smaller than the
number of benign sensors, each trial tilts a uniformly random ``t``-subset and
the weight is taken against the whole subset mixture, which keeps the
estimator unbiased and its weights bounded when the dominant error event moves
only some of the sensors.  Compromised sensors are never tilted; the shipped
attacks choose their reports without looking at benign data, so the
reweighting stays valid under attack.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Sequence

import numpy as np
from scipy.special import gammaln, logsumexp

from .attack import make_attack
from .detect import make_detector
from .errors import ConfigError, InsufficientData, NumericalFailure
from .limits import NetworkShape, TradeoffCurves
from .measures import pair_from_dict, substream
from .rates import RateProfile, build_profile

__all__ = [
    "ScenarioConfig",
    "ErrorEstimate",
    "run_scenario",
    "fit_exponent",
    "tilt_for_mean",
    "sweep_security_efficiency",
    "BLOCK_SIZE",
]

log = logging.getLogger(__name__)

#: trials per RNG block; part of the reproducibility contract
BLOCK_SIZE = 4096


@dataclass
class ScenarioConfig:
    pair: dict
    m: int
    n: int
    detector: dict
    attack: dict = field(default_factory=lambda: {"kind": "none"})
    m_s: int = 0
    theta_mode: Any = "both"
    horizon: int = 60
    trials: int = 100_000
    master_seed: int = 0
    sampler: str = "plain"
    #: "auto" (the Chernoff tilt w*), a number, or a pair (w for theta=0, w for theta=1)
    tilt: Any = "auto"
    #: number of benign sensors tilted per trial; ``None`` tilts all of them
    tilt_count: int | None = None
    fit_window: tuple[int, int] | None = None
    workers: int = 1

    def __post_init__(self):
        if self.horizon < 1 or self.trials < 1:
            raise ConfigError("horizon and trials must be positive")
        if self.theta_mode not in ("both", 0, 1):
            raise ConfigError(f"theta_mode must be 'both', 0 or 1, got {self.theta_mode!r}")
        if self.sampler not in ("plain", "tilted"):
            raise ConfigError(f"sampler must be 'plain' or 'tilted', got {self.sampler!r}")
        if not 0 <= int(self.master_seed) < 2**64:
            raise ConfigError("master_seed must be a 64-bit unsigned integer")
        if self.fit_window is not None:
            self.fit_window = tuple(int(v) for v in self.fit_window)
        if isinstance(self.tilt, list):
            self.tilt = tuple(self.tilt)
        self.shape  # validates m, n, m_s

    @property
    def shape(self) -> NetworkShape:
        return NetworkShape(self.m, self.n, self.m_s)

    @property
    def thetas(self) -> tuple[int, ...]:
        return (0, 1) if self.theta_mode == "both" else (int(self.theta_mode),)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ScenarioConfig":
        data = dict(data)
        if "shape" in data:
            shape = data.pop("shape")
            data.update({k: shape[k] for k in ("m", "n", "m_s") if k in shape})
        sampler = data.get("sampler")
        if isinstance(sampler, dict):
            data["sampler"] = sampler.get("kind", "plain")
            for key in ("tilt", "tilt_count"):
                if key in sampler:
                    data[key] = sampler[key]
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown scenario fields: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        if isinstance(d["tilt"], tuple):
            d["tilt"] = list(d["tilt"])
        if d["fit_window"] is not None:
            d["fit_window"] = list(d["fit_window"])
        return d

    def replace(self, **changes) -> "ScenarioConfig":
        d = self.to_dict()
        d.update(changes)
        return ScenarioConfig.from_dict(d)


@dataclass
class ErrorEstimate:
    """Per-k error estimates under each hypothesis.

    Probabilities are also kept as logarithms so that deep tails estimated by
    importance sampling survive even where they underflow a double.
    """

    k: np.ndarray
    log_p0: np.ndarray
    log_p1: np.ndarray
    se0: np.ndarray
    se1: np.ndarray
    fitted_exponent: float = math.nan
    fit_window: tuple[int, int] | None = None
    config: dict | None = None
    trace: dict = field(default_factory=dict)

    @property
    def p_err0(self) -> np.ndarray:
        return np.exp(self.log_p0)

    @property
    def p_err1(self) -> np.ndarray:
        return np.exp(self.log_p1)

    @property
    def log_worst(self) -> np.ndarray:
        return np.fmax(self.log_p0, self.log_p1)

    @property
    def worst(self) -> np.ndarray:
        return np.exp(self.log_worst)

    def records(self) -> list[dict[str, float]]:
        return [
            {
                "k": int(k),
                "p_err0": float(p0),
                "se0": float(s0),
                "p_err1": float(p1),
                "se1": float(s1),
                "worst": float(w),
            }
            for k, p0, s0, p1, s1, w in zip(
                self.k, self.p_err0, self.se0, self.p_err1, self.se1, self.worst
            )
        ]

    def to_csv(self, stream=None) -> str:
        buf = io.StringIO() if stream is None else stream
        writer = csv.DictWriter(buf, ["k", "p_err0", "se0", "p_err1", "se1", "worst"])
        writer.writeheader()
        writer.writerows(self.records())
        return buf.getvalue() if stream is None else ""

    def summary(self) -> dict[str, Any]:
        cfg = self.config or {}
        return {
            "fitted_exponent": _json_float(self.fitted_exponent),
            "window": None if self.fit_window is None else list(self.fit_window),
            "config_echo": cfg,
            "seed": cfg.get("master_seed"),
            "trace": self.trace,
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True)


def _json_float(x: float):
    return None if not math.isfinite(x) else float(x)


# ---------------------------------------------------------------------------
# exponent fitting
# ---------------------------------------------------------------------------
def fit_exponent(curve, window: tuple[int, int] | None = None, min_points: int = 4) -> float:
    """Least-squares slope of ``-log(worst error)`` against ``k``.

    ``curve`` is an :class:`ErrorEstimate` or the sequence of worst-case errors
    for ``k = 1, 2, ...``.  ``window = (k_lo, k_hi)`` is inclusive and defaults
    to the last half of the horizon.  Points with zero estimated error are
    dropped.
    """
    if isinstance(curve, ErrorEstimate):
        ks = np.asarray(curve.k, dtype=float)
        logs = np.asarray(curve.log_worst, dtype=float)
    else:
        vals = np.asarray(curve, dtype=float)
        ks = np.arange(1, len(vals) + 1, dtype=float)
        with np.errstate(divide="ignore"):
            logs = np.log(vals)
    horizon = int(ks[-1]) if len(ks) else 0
    lo, hi = window if window is not None else (max(1, horizon // 2), horizon)
    sel = (ks >= lo) & (ks <= hi) & np.isfinite(logs)
    if sel.sum() < min_points:
        raise InsufficientData(
            f"only {int(sel.sum())} positive error estimates in window [{lo}, {hi}]; need {min_points}"
        )
    slope = np.polyfit(ks[sel], logs[sel], 1)[0]
    return float(-slope)


# ---------------------------------------------------------------------------
# tilting helpers
# ---------------------------------------------------------------------------
def tilt_for_mean(profile: RateProfile, x: float) -> float:
    """Tilt ``w`` such that the LLR has mean ``x`` under ``nu_w``."""
    lo, hi = profile.lambda_range
    if not lo < x < hi:
        raise ConfigError(f"tilted mean {x} must lie inside the LLR range ({lo}, {hi})")
    return float(profile.tilt(0, x))


def _resolve_tilts(cfg: ScenarioConfig, profile: RateProfile) -> tuple[float, float]:
    tilt = cfg.tilt
    if tilt == "auto":
        return profile.wstar, profile.wstar
    if isinstance(tilt, (tuple, list)):
        if len(tilt) != 2:
            raise ConfigError("a per-hypothesis tilt needs exactly two values")
        w = tuple(profile.wstar if t == "auto" else float(t) for t in tilt)
        return w[0], w[1]
    try:
        w = float(tilt)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad tilt {tilt!r}") from exc
    return w, w


def _log_esp(a: np.ndarray, t: int) -> np.ndarray:
    """``log e_t(exp(a))`` over the last axis: elementary symmetric polynomial in log space."""
    e = np.full(a.shape[:-1] + (t + 1,), -math.inf)
    e[..., 0] = 0.0
    for i in range(a.shape[-1]):
        e[..., 1:] = np.logaddexp(e[..., 1:], e[..., :-1] + a[..., i : i + 1])
    return e[..., t]


# ---------------------------------------------------------------------------
# one block of trials
# ---------------------------------------------------------------------------
def _simulate_block(cfg: ScenarioConfig, profile: RateProfile, theta: int, block: int, size: int):
    """Return ``(log_s1, log_s2, trace)`` for ``size`` trials of one block."""
    pair = profile.pair
    shape = cfg.shape
    K, m = cfg.horizon, shape.m
    rng = substream(cfg.master_seed, theta, block)

    detector = make_detector(cfg.detector, profile, shape)
    attack = make_attack(cfg.attack, profile, shape)
    detector.reset((size,))
    attack.reset(theta, (size,))
    compromised = list(attack.compromised)
    benign = [i for i in range(m) if i not in set(compromised)]
    b = len(benign)

    tilted = cfg.sampler == "tilted" and b > 0
    if tilted:
        w = _resolve_tilts(cfg, profile)[theta]
        t = b if cfg.tilt_count is None else int(cfg.tilt_count)
        if not 1 <= t <= b:
            raise ConfigError(f"tilt_count must lie in [1, {b}] (benign sensors), got {t}")
        log_m0 = float(pair.log_mgf(0, w))
        # log d(nu_w)/d(law_theta) per observation is slope*llr - log M0(w)
        slope = w - theta
        if t < b:
            order = np.argsort(rng.random((size, b)), axis=1)
            mask = np.zeros((size, b), dtype=bool)
            np.put_along_axis(mask, order[:, :t], True, axis=1)
            log_binom = gammaln(b + 1) - gammaln(t + 1) - gammaln(b - t + 1)
        log_q_over_p = np.zeros((size, b))

    log_s1 = np.full(K, -math.inf)
    log_s2 = np.full(K, -math.inf)
    for k in range(1, K + 1):
        y = np.empty((size, m))
        if compromised:
            y[:, compromised] = pair.sample(theta, rng, (size, len(compromised)))
        if tilted:
            y_tilt = pair.sample_tilted(w, rng, (size, b))
            if t < b:
                y_true = pair.sample(theta, rng, (size, b))
                y[:, benign] = np.where(mask, y_tilt, y_true)
            else:
                y[:, benign] = y_tilt
            log_q_over_p += slope * pair.llr(y[:, benign]) - log_m0
        elif b:
            y[:, benign] = pair.sample(theta, rng, (size, b))

        y_prime = y + attack.bias(y, k, rng)
        decision = detector.step(y_prime)
        wrong = decision if theta == 0 else 1.0 - decision

        if tilted:
            if t < b:
                log_w = log_binom - _log_esp(log_q_over_p, t)
            else:
                log_w = -log_q_over_p.sum(axis=1)
        else:
            log_w = np.zeros(size)
        hit = wrong > 0
        if hit.any():
            lw = log_w[hit] + np.log(wrong[hit])
            log_s1[k - 1] = logsumexp(lw)
            log_s2[k - 1] = logsumexp(2.0 * lw)
        if not (np.isfinite(log_s1[k - 1]) or log_s1[k - 1] == -math.inf):
            raise NumericalFailure(f"non-finite importance weights at k={k}")
    return log_s1, log_s2, attack.trace


def _block_task(args):
    cfg_dict, theta, block, size = args
    cfg = ScenarioConfig.from_dict(cfg_dict)
    profile = build_profile(pair_from_dict(cfg.pair))
    return _simulate_block(cfg, profile, theta, block, size)


def _merge_traces(traces: list[dict]) -> dict:
    if not traces or not traces[0]:
        return {}
    unmet: dict[int, int] = {}
    for tr in traces:
        for k, c in tr.get("unmet", {}).items():
            unmet[k] = unmet.get(k, 0) + c
    out = {key: traces[0][key] for key in ("theta", "target", "feasible") if key in traces[0]}
    out["unmet_steps"] = {str(k): unmet[k] for k in sorted(unmet)}
    out["burn_in"] = max(unmet) if unmet else 0
    return out


def run_scenario(cfg: ScenarioConfig | dict, profile: RateProfile | None = None) -> ErrorEstimate:
    """Estimate ``P(wrong decision at time k)`` for ``k = 1..K`` under each hypothesis."""
    if isinstance(cfg, dict):
        cfg = ScenarioConfig.from_dict(cfg)
    if profile is None:
        profile = build_profile(pair_from_dict(cfg.pair))
    # fail fast on bad detector/attack specifications
    make_detector(cfg.detector, profile, cfg.shape)
    make_attack(cfg.attack, profile, cfg.shape)
    if cfg.sampler == "tilted":
        _resolve_tilts(cfg, profile)

    N, K = cfg.trials, cfg.horizon
    sizes = [min(BLOCK_SIZE, N - start) for start in range(0, N, BLOCK_SIZE)]
    logp = {0: np.full(K, math.nan), 1: np.full(K, math.nan)}
    se = {0: np.full(K, math.nan), 1: np.full(K, math.nan)}
    traces = {}
    for theta in cfg.thetas:
        jobs = [(theta, b, s) for b, s in enumerate(sizes)]
        if cfg.workers > 1 and len(jobs) > 1:
            payload = [(cfg.to_dict(), *job) for job in jobs]
            with ProcessPoolExecutor(cfg.workers) as pool:
                results = list(pool.map(_block_task, payload))
        else:
            results = [_simulate_block(cfg, profile, *job) for job in jobs]
        # fixed reduction order over blocks
        s1 = logsumexp(np.stack([r[0] for r in results]), axis=0)
        s2 = logsumexp(np.stack([r[1] for r in results]), axis=0)
        mean_log = s1 - math.log(N)
        second = np.exp(s2 - math.log(N))
        mean = np.exp(mean_log)
        var = np.maximum(second - mean**2, 0.0) * N / max(N - 1, 1)
        logp[theta] = mean_log
        se[theta] = np.sqrt(var / N)
        traces[f"theta{theta}"] = _merge_traces([r[2] for r in results])

    est = ErrorEstimate(
        k=np.arange(1, K + 1),
        log_p0=logp[0],
        log_p1=logp[1],
        se0=se[0],
        se1=se[1],
        config=cfg.to_dict(),
        trace={k: v for k, v in traces.items() if v},
    )
    window = cfg.fit_window or (max(1, K // 2), K)
    est.fit_window = tuple(window)
    try:
        est.fitted_exponent = fit_exponent(est, window)
    except InsufficientData as exc:
        log.warning("no exponent fitted: %s", exc)
    return est


# ---------------------------------------------------------------------------
# efficiency/security sweep
# ---------------------------------------------------------------------------
def sweep_security_efficiency(
    pair,
    shape: NetworkShape,
    z_grid: Sequence[float],
    horizon: int = 60,
    trials: int = 20_000,
    master_seed: int = 0,
    sampler: str = "tilted",
    attack_target: str = "extreme",
    fit_window: tuple[int, int] | None = None,
) -> list[dict[str, float]]:
    """Measured efficiency and security of the secure detector along a ``z_s`` grid.

    Every grid point reuses ``master_seed``, so neighbouring points share random
    numbers and their ordering is not blurred by independent noise.  Under the
    attack the benign sensors of the theta=0 run are tilted towards the mean
    whose rate equals ``z_s / (m - n)``, the cheapest way for them to push the
    smallest rate sum past ``z_s``.
    """
    pair = pair_from_dict(pair)
    profile = build_profile(pair)
    curves = TradeoffCurves(profile, shape)
    cap = curves.sec_cap
    rows = []
    for z in z_grid:
        z = float(z)
        if not 0.0 <= z <= cap * (1 + 1e-12):
            raise ConfigError(f"grid point {z} outside [0, {cap}]")
        z = min(z, cap)
        base = dict(
            pair=pair.to_dict(),
            m=shape.m,
            n=shape.n,
            m_s=shape.m_s,
            detector={"kind": "secure", "z_s": z},
            horizon=horizon,
            trials=trials,
            master_seed=master_seed,
            sampler=sampler,
            fit_window=fit_window,
        )
        eff = run_scenario(ScenarioConfig.from_dict(base), profile)
        w0 = tilt_for_mean(profile, profile.inv_rate0(z / (shape.m - shape.n))) if z > 0 else 0.0
        sec_cfg = dict(base, attack={"kind": "rate_target", "z_s": z, "target": attack_target})
        sec_cfg["tilt"] = (w0, profile.wstar)
        sec = run_scenario(ScenarioConfig.from_dict(sec_cfg), profile)
        measured_sec = sec.fitted_exponent if math.isfinite(sec.fitted_exponent) else 0.0
        rows.append(
            {
                "z_s": z,
                "efficiency": eff.fitted_exponent,
                "security": max(measured_sec, 0.0),
                "h_e": curves.h_e(z),
            }
        )
    return rows
