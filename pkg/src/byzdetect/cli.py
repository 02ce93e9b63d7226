"""Command-line front end.

    byzdetect limits    [--config FILE]
    byzdetect region    [--config FILE] [--points N]
    byzdetect simulate  --config FILE
    byzdetect reproduce {table1,fig2,fig3,fig4}

``limits`` and ``region`` read ``{"pair": {...}, "m": .., "n": .., "m_s": ..}``
and default to the reference network.  ``simulate`` reads a scenario file.
Results go to stdout, or into ``--out`` (a directory) as CSV/JSON files.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
import time
from pathlib import Path
from typing import Any

import numpy as np

from . import reproduce as repro
from .errors import ByzDetectError, ConfigError, NumericalFailure
from .limits import NetworkShape, TradeoffCurves, is_symmetric_case
from .measures import pair_from_dict
from .rates import build_profile
from .sim import ScenarioConfig, run_scenario

log = logging.getLogger("byzdetect")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


def _load_json(path: str | None) -> dict[str, Any]:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must hold a JSON object")
    return data


def _network(cfg: dict[str, Any]):
    pair = pair_from_dict(cfg.get("pair", repro.REFERENCE_PAIR))
    shape_src = cfg.get("shape", cfg)
    try:
        shape = NetworkShape(
            int(shape_src.get("m", repro.REFERENCE_SHAPE["m"])),
            int(shape_src.get("n", repro.REFERENCE_SHAPE["n"])),
            int(shape_src.get("m_s", 0)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad network shape: {exc}") from exc
    return pair, shape


def _clean(obj):
    """Make numpy scalars and non-finite floats JSON friendly."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _rows_csv(rows: list[dict[str, Any]]) -> str:
    buf = io.StringIO()
    if rows:
        writer = csv.DictWriter(buf, list(rows[0]))
        writer.writeheader()
        writer.writerows([{k: ("" if v is None else v) for k, v in r.items()} for r in rows])
    return buf.getvalue()


class Output:
    """Writes named artifacts to ``--out`` or stdout."""

    def __init__(self, out: str | None, fmt: str):
        self.dir = Path(out) if out else None
        self.fmt = fmt
        if self.dir is not None:
            self.dir.mkdir(parents=True, exist_ok=True)

    def emit(self, name: str, text: str) -> None:
        if self.dir is None:
            sys.stdout.write(text if text.endswith("\n") else text + "\n")
        else:
            (self.dir / name).write_text(text)
            log.info("wrote %s", self.dir / name)

    def json(self, name: str, obj) -> None:
        self.emit(f"{name}.json", json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")

    def table(self, name: str, rows: list[dict[str, Any]], meta: dict[str, Any] | None = None) -> None:
        if self.fmt == "json":
            self.json(name, {"rows": rows, **(meta or {})})
        else:
            self.emit(f"{name}.csv", _rows_csv(rows))
            if meta is not None and self.dir is not None:
                self.json(f"{name}_meta", meta)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------
def cmd_limits(args) -> dict[str, Any]:
    pair, shape = _network(_load_json(args.config))
    profile = build_profile(pair)
    curves = TradeoffCurves(profile, shape)
    result = {
        "c": profile.c,
        "d01": profile.d01,
        "d10": profile.d10,
        "wstar": profile.wstar,
        "mC": curves.eff_cap,
        "(m-2n)C": curves.sec_cap,
        "symmetric": is_symmetric_case(profile),
        "pair": pair.to_dict(),
        "shape": {"m": shape.m, "n": shape.n, "m_s": shape.m_s},
    }
    if shape.m_s:
        result["secure_sensor_caps"] = curves.secure_sensor_caps()._asdict()
    Output(args.out, "json").json("limits", result)
    return result


def cmd_region(args) -> list[dict[str, Any]]:
    pair, shape = _network(_load_json(args.config))
    profile = build_profile(pair)
    rows = repro.region_rows(profile, shape, args.points or 200)
    meta = {"pair": pair.to_dict(), "shape": {"m": shape.m, "n": shape.n}, "c": profile.c}
    Output(args.out, args.format).table("region", rows, meta)
    return rows


def _scenario_from_args(args) -> ScenarioConfig:
    data = _load_json(args.config)
    if not data:
        raise ConfigError("simulate needs --config with a scenario")
    cfg = ScenarioConfig.from_dict(data)
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.horizon is not None:
        overrides["horizon"] = args.horizon
    if getattr(args, "workers", None):
        overrides["workers"] = args.workers
    return cfg.replace(**overrides) if overrides else cfg


def cmd_simulate(args):
    cfg = _scenario_from_args(args)
    est = run_scenario(cfg)
    out = Output(args.out, args.format)
    if args.format == "json":
        out.json("estimate", {**est.summary(), "records": est.records()})
    else:
        out.emit("estimate.csv", est.to_csv())
        if out.dir is not None:
            out.emit("summary.json", est.to_json() + "\n")
    return est


def _verdict_row(row):
    return {**row, "verdict": "pass" if row["within_tolerance"] else "fail"}


def cmd_reproduce(args):
    seed = 0 if args.seed is None else args.seed
    out = Output(args.out, args.format)
    provenance = {"target": args.target, "seed": seed}
    target = args.target
    if target == "table1":
        kw = {k: v for k, v in (("trials", args.trials), ("horizon", args.horizon)) if v is not None}
        res = repro.table1(seed=seed, **kw)
        rows = [_verdict_row(r) for r in res["rows"]]
        meta = {
            **provenance,
            "efficiency_ordering": res["efficiency_ordering"],
            "security_ordering": res["security_ordering"],
            "qom_efficiency_exact": res["qom_efficiency_exact"],
            "config_echo": res["configs"],
        }
        out.table("table1", rows, meta)
        return res
    if target == "fig2":
        profile = repro.reference_profile()
        rows = repro.region_rows(profile, NetworkShape(**repro.REFERENCE_SHAPE), args.points or 200)
        out.table("fig2", rows, {**provenance, "c": profile.c})
        return rows
    if target == "fig3":
        kw = {k: v for k, v in (("trials", args.trials), ("horizon", args.horizon)) if v is not None}
        rows = repro.fig3(points=args.points or 9, seed=seed, **kw)
        out.table("fig3", rows, provenance)
        return rows
    if target == "fig4":
        kw = {k: v for k, v in (("trials", args.trials), ("horizon", args.horizon)) if v is not None}
        curves = repro.fig4(seed=seed, **kw)
        ks = next(iter(curves.values())).k
        rows = [{"k": int(k), **{name: float(est.worst[i]) for name, est in curves.items()}} for i, k in enumerate(ks)]
        meta = {**provenance, "fitted_exponents": {n: e.fitted_exponent for n, e in curves.items()},
                "config_echo": {n: e.config for n, e in curves.items()}}
        out.table("fig4", rows, meta)
        return curves
    raise ConfigError(f"unknown reproduce target {target!r}")  # pragma: no cover - argparse guards this


# ---------------------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="byzdetect", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--out", help="output directory (default: stdout)")
    common.add_argument("--seed", type=int, help="override the master seed")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--trials", type=int, help="override the number of trials")
    common.add_argument("--horizon", type=int, help="override the horizon K")

    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("limits", parents=[common], help="Chernoff constant, KL divergences and caps")
    p.set_defaults(func=cmd_limits)
    p = sub.add_parser("region", parents=[common], help="trade-off curve data")
    p.add_argument("--points", type=int, default=None, help="grid size (default 200)")
    p.set_defaults(func=cmd_region)
    p = sub.add_parser("simulate", parents=[common], help="run one scenario")
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_simulate)
    p = sub.add_parser("reproduce", parents=[common], help="run a bundled experiment")
    p.add_argument("target", choices=("table1", "fig2", "fig3", "fig4"))
    p.add_argument("--points", type=int, default=None, help="grid size (fig2: 200, fig3: 9)")
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
        stream=sys.stderr,
    )
    for name in ("trials", "horizon", "points"):
        value = getattr(args, name, None)
        if value is not None and value < 1:
            print(f"error: --{name} must be positive", file=sys.stderr)
            return EXIT_CONFIG
    start = time.perf_counter()
    try:
        args.func(args)
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ByzDetectError, ValueError, TypeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    log.info("%s finished in %.1fs", args.command, time.perf_counter() - start)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
