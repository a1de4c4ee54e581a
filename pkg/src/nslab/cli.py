"""``nslab`` command line.

    nslab <constants|noise-check|checks|converge|simulate> --config FILE [--seed U64] [--out DIR]

Each subcommand writes ``<name>_*.csv`` / ``<name>_*.json`` files and one
``<name>_manifest.json`` listing them. Exit status: 0 when every asserted
property holds, 1 when one fails, 2 for usage or config errors.
"""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import hashlib
import json
import math
import os
import sys
from pathlib import Path

from . import __version__
from . import experiments as ex
from .config import ConfigError, load_config, to_jsonable
from .discrete import MultiplierSet
from .solver import SimConfig

COMMANDS = ("constants", "noise-check", "checks", "converge", "simulate")
U64_MAX = 2**64 - 1


def _u64(s: str) -> int:
    v = int(s, 10)
    if not 0 <= v <= U64_MAX:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nslab", description="Renormalized stochastic Navier-Stokes experiments.")
    p.add_argument("--version", action="version", version=f"nslab {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")
    helps = {
        "constants": "renormalization constants over an eps ladder",
        "noise-check": "noise covariances and the approximate/exact noise gap",
        "checks": "exact identities and operator ratio probes",
        "converge": "shared-noise discrepancy ladder of the solvers",
        "simulate": "one trajectory and its norm series",
    }
    for name in COMMANDS:
        s = sub.add_parser(name, help=helps[name])
        s.add_argument("--config", required=True, help="key = value config file")
        s.add_argument("--seed", type=_u64, default=None, help="overrides the config seed")
        s.add_argument("--out", default=None, help="output directory (overrides out_dir)")
    return p


# ------------------------------------------------------------------ writing


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path: Path, rows: list[dict]) -> None:
    header = []
    for r in rows:
        header.extend(k for k in r if k not in header)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(r.get(k, "")) for k in header])


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def write_json(path: Path, obj) -> None:
    text = json.dumps(_json_safe(obj), indent=2, sort_keys=True, allow_nan=False)
    path.write_text(text + "\n", encoding="utf-8")


def timestamp() -> str:
    """UTC time of the run; ``SOURCE_DATE_EPOCH`` pins it for reproducible manifests."""
    sde = os.environ.get("SOURCE_DATE_EPOCH")
    if sde is not None:
        t = dt.datetime.fromtimestamp(int(sde), tz=dt.timezone.utc)
    else:
        t = dt.datetime.now(tz=dt.timezone.utc).replace(microsecond=0)
    return t.isoformat().replace("+00:00", "Z")


def run_id(command: str, cfg: dict) -> str:
    # the output location does not change the results, so it is left out
    body = {k: v for k, v in to_jsonable(cfg).items() if k != "out_dir"}
    blob = json.dumps({"command": command, "config": _json_safe(body)}, sort_keys=True)
    return hashlib.sha1(blob.encode("utf-8")).hexdigest()[:12]


def emit(command: str, cfg: dict, outcome: ex.Outcome, out_dir: Path) -> list[str]:
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = command.replace("-", "_")
    files = []
    for name, rows in outcome.tables.items():
        fn = f"{stem}_{name}.csv"
        write_csv(out_dir / fn, rows)
        files.append(fn)
    for name, doc in outcome.documents.items():
        fn = f"{stem}_{name}.json"
        write_json(out_dir / fn, doc)
        files.append(fn)
    fn = f"{stem}_checks.csv"
    write_csv(out_dir / fn, [c.row() for c in outcome.checks])
    files.append(fn)
    manifest = {
        "tool": f"nslab {__version__}",
        "subcommand": command,
        "run_id": run_id(command, cfg),
        "seed": cfg["seed"],
        "timestamp": timestamp(),
        "config": to_jsonable(cfg),
        "outputs": files,
        "all_asserted_pass": outcome.ok,
    }
    write_json(out_dir / f"{stem}_manifest.json", manifest)
    return files + [f"{stem}_manifest.json"]


# ----------------------------------------------------------------- commands


def _ms(cfg: dict) -> MultiplierSet:
    return MultiplierSet(cfg["preset"], cfg["a"], cfg["b"], cfg["L0"])


def _ladder(cfg: dict, command: str) -> tuple:
    return tuple(cfg["eps_ladder"]) if cfg["eps_ladder"] is not None else ex.DEFAULT_LADDERS[command]


def _seeds(cfg: dict, default: int) -> list[int]:
    n = cfg["seeds"] if cfg["seeds"] is not None else default
    if n < 1:
        raise ConfigError("seeds must be at least 1", key="seeds")
    return [cfg["seed"] + i for i in range(n)]


def sim_config(cfg: dict) -> SimConfig:
    try:
        return SimConfig(N=cfg["N"], eps=cfg["eps"], dt=cfg["dt"], T=cfg["T"], z=cfg["z"], delta=cfg["delta"],
                         preset=cfg["preset"], a=cfg["a"], b=cfg["b"], L0=cfg["L0"], seed=cfg["seed"], L=cfg["L"],
                         noise_scale=cfg["noise_scale"], counterterms=cfg["counterterms"],
                         nonlinear=cfg["nonlinear"], norm_oversample=cfg["norm_oversample"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def execute(command: str, cfg: dict) -> ex.Outcome:
    try:
        ms = _ms(cfg)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if command == "constants":
        return ex.constants_ladder(ms, _ladder(cfg, command), cfg["t"], cfg["second_order"])
    if command == "noise-check":
        return ex.noise_check(cfg["N"], ms, cfg["eps"], _ladder(cfg, command), _seeds(cfg, 10), cfg["samples"],
                              cfg["seed"], cfg["delta"])
    if command == "checks":
        return ex.checks(ms, cfg["N"], cfg["eps"], _ladder(cfg, command), cfg["trials"], cfg["probe_N"],
                         cfg["seed"], cfg["t"])
    if command == "converge":
        return ex.converge(sim_config(cfg), _ladder(cfg, command), _seeds(cfg, 5))
    if command == "simulate":
        return ex.simulate(sim_config(cfg), cfg["variants"])
    raise ValueError(f"unknown command {command!r}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, {"seed": args.seed, "out_dir": args.out})
        outcome = execute(args.command, cfg)
    except ConfigError as exc:
        print(f"nslab: config error: {exc}", file=sys.stderr)
        return 2
    files = emit(args.command, cfg, outcome, Path(cfg["out_dir"]))
    for c in outcome.checks:
        status = "PASS" if c.passed else "FAIL"
        print(f"{status:4s} [{c.kind}] {c.name}: {c.value!r} ({c.threshold})")
    print(f"wrote {len(files)} files to {cfg['out_dir']}")
    return 0 if outcome.ok else 1


if __name__ == "__main__":
    sys.exit(main())
