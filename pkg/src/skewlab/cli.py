"""Command-line front door: `skewlab simulate | estimate {sigma,F,ldp} | ladder | replay`.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 failed `--check` or a replay whose outputs differ from the manifest.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import tempfile
import time
from pathlib import Path

from . import __version__, io
from .config import apply_overrides, config_hash, load_config, parse_config
from .errors import (
    CapacityError,
    ConfigError,
    ConvergenceError,
    InputError,
    IntegrationBlowup,
    JobFailure,
)
from .parallel import default_jobs
from .pipelines import RUNNERS, RunContext

MANIFEST = "manifest.txt"
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CHECK = 0, 2, 3, 4



def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON run configuration (defaults when omitted)")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key, e.g. system.eps=0.25")
    p.add_argument("--output-dir", help="overrides output_dir from the config")
    p.add_argument("--jobs", type=int, default=None, help="worker processes (default: all cores)")
    p.add_argument("--check", action="store_true", help="exit 4 if any acceptance check fails")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="skewlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"skewlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    _common(sub.add_parser("simulate", help="one skew-product trajectory"))
    est = sub.add_parser("estimate", help="Sigma, F or LDP tail estimates")
    est.add_argument("target", choices=["sigma", "F", "ldp"])
    _common(est)
    _common(sub.add_parser("ladder", help="eps ladder against the limiting SDE"))
    rep = sub.add_parser("replay", help="rerun a manifest and compare outputs byte for byte")
    rep.add_argument("manifest")
    rep.add_argument("--output-dir", help="where to write the replayed outputs (default: a temporary dir)")
    rep.add_argument("--jobs", type=int, default=None)
    rep.add_argument("-v", "--verbose", action="store_true")
    return parser


def _inventory(out: Path) -> dict:
    return {
        str(p.relative_to(out)): io.sha256_file(p)
        for p in sorted(out.rglob("*"))
        if p.is_file() and p.name != MANIFEST and not p.name.startswith(".")
    }


def execute(cfg: dict, command: str, target, out: Path, jobs: int) -> tuple[dict, dict]:
    """Run one pipeline and write its manifest atomically; returns (checks, manifest)."""
    out.mkdir(parents=True, exist_ok=True)
    stale = out / MANIFEST
    if stale.exists():
        stale.unlink()
    ctx = RunContext(cfg["root_seed"], jobs)
    runner = RUNNERS[(command, target)]
    t0 = time.perf_counter()
    checks = runner(cfg, out, ctx)
    ctx.timings["total"] = round(time.perf_counter() - t0, 6)
    manifest = {
        "tool": "skewlab",
        "tool_version": __version__,
        "command": command,
        "target": target or "",
        "config_hash": config_hash(cfg),
        "root_seed": cfg["root_seed"],
        "jobs": jobs,
        "job_seeds": ctx.seeds,
        "timings": ctx.timings,
        "checks": checks,
        "files": _inventory(out),
        "config": cfg,
    }
    io.write_report(out / MANIFEST, manifest)
    return checks, manifest


def read_manifest(path) -> dict:
    m = io.read_report(path)
    missing = {"command", "config", "files", "config_hash"} - set(m)
    if missing:
        raise ConfigError(f"manifest {path} lacks {sorted(missing)}")
    m["config"] = parse_config(json.dumps(m["config"]))
    if config_hash(m["config"]) != m["config_hash"]:
        raise ConfigError("manifest config does not match its recorded hash")
    return m


def replay(manifest_path, out: Path | None, jobs: int) -> tuple[bool, list[str]]:
    """Rerun the manifest's command and compare the output inventory."""
    m = read_manifest(manifest_path)
    target = m["target"] or None
    with tempfile.TemporaryDirectory(prefix="skewlab-replay-") as tmp:
        where = Path(out) if out else Path(tmp)
        _, again = execute(m["config"], m["command"], target, where, jobs)
        diffs = []
        for name, digest in m["files"].items():
            got = again["files"].get(name)
            if got != digest:
                diffs.append(f"{name}: expected {digest[:12]}, got {(got or 'missing')[:12]}")
        for name in sorted(set(again["files"]) - set(m["files"])):
            diffs.append(f"{name}: not in the manifest")
    return not diffs, diffs


def _exit_code(exc: BaseException) -> int:
    while isinstance(exc, JobFailure) and exc.__cause__ is not None:
        exc = exc.__cause__
    if isinstance(exc, (ConfigError, InputError)):
        return EXIT_CONFIG
    return EXIT_NUMERIC


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    jobs = args.jobs if args.jobs is not None else default_jobs()
    try:
        if jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        if args.command == "replay":
            ok, diffs = replay(args.manifest, args.output_dir, jobs)
            for line in diffs:
                print(f"MISMATCH {line}")
            print("replay: identical" if ok else "replay: outputs differ")
            return EXIT_OK if ok else EXIT_CHECK
        cfg = apply_overrides(load_config(args.config), args.set)
        if args.output_dir:
            cfg["output_dir"] = args.output_dir
        out = Path(cfg["output_dir"])
        target = getattr(args, "target", None)
        checks, _ = execute(cfg, args.command, target, out, jobs)
        for name, ok in checks.items():
            print(f"{'PASS' if ok else 'FAIL'} {name}")
        print(f"outputs in {out}")
        if args.check and not all(checks.values()):
            return EXIT_CHECK
        return EXIT_OK
    except (ConfigError, InputError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IntegrationBlowup, ConvergenceError, CapacityError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except JobFailure as exc:
        print(f"job failure: {exc}", file=sys.stderr)
        return _exit_code(exc)
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
