from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

try:
    from . import __version__ as PKG_VERSION  # type: ignore
except Exception:
    PKG_VERSION = None  # falls back to "0.0.0"

from . import pipeline
from .settings import CONFIG_DIR_ENV, ROOT_ENV, Settings
from .workers import WORKERS_ENV

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_USAGE = 2
EXIT_RUNTIME = 2


# ------------------------ parser ------------------------


def _window_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--window", type=int, help="world window level B (default: config)")
    p.add_argument("--bounds", help="explicit window 'lo,hi' applied to every axis")


def _add_metric(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("metric", help="F_a between two measure files")
    p.add_argument("--a", type=int, required=True)
    p.add_argument("--lhs", type=Path, required=True)
    p.add_argument("--rhs", type=Path, required=True)

    p = sub.add_parser("metric-d", help="truncated metric d with certified error")
    p.add_argument("--lhs", type=Path, required=True)
    p.add_argument("--rhs", type=Path, required=True)
    p.add_argument("--amax", type=int, help="truncation level (default: config)")


def _add_blowup(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("blowup", help="c T_{x,r#} of a measure file")
    p.add_argument("--in", dest="input", type=Path, required=True)
    p.add_argument("--x", required=True, help="centre, comma-separated")
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("dup", help="weighted duplication nu_a^w")
    p.add_argument("--nu", type=Path, required=True)
    p.add_argument("--a", type=int, required=True)
    p.add_argument("--weights", help="3^d weights w1,...; default all ones")
    p.add_argument("--out", type=Path)


def _add_approx(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("construct", help="build the approximant mu_k")
    p.add_argument("--mu", type=Path, required=True)
    p.add_argument("--nu", type=Path, required=True)
    p.add_argument("--a", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--background", type=float, help="add this mass to empty cubes")
    p.add_argument("--out", type=Path)
    _window_args(p)

    p = sub.add_parser("certify", help="certify membership in R(nu, a, n)")
    p.add_argument("--mu", type=Path, required=True)
    p.add_argument("--nu", type=Path, required=True)
    p.add_argument("--a", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--kmax", type=int, required=True)
    p.add_argument("--beta", type=float, help="override beta_a")
    p.add_argument("--out", type=Path)
    _window_args(p)

    p = sub.add_parser("probe", help="tangent probe (--x) or convergence probe")
    p.add_argument("--mu", type=Path, required=True)
    p.add_argument("--nu", type=Path, required=True)
    p.add_argument("--x", help="point for the tangent probe")
    p.add_argument("--alist", default="1,2", help="levels a for the tangent probe")
    p.add_argument("--a", type=int, help="level a for the convergence probe")
    p.add_argument("--klist", help="generations for the convergence probe")
    p.add_argument("--b", type=int, default=1)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--out", type=Path)
    _window_args(p)


def _add_limsup(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("bc", help="Borel-Cantelli lower bound")
    p.add_argument("--events", type=Path, help="event system JSON")
    p.add_argument("--N", type=int, help="number of leading events")
    p.add_argument("--sweep", type=int, help="number of seeded random systems")
    p.add_argument("--outcomes", type=int, default=64)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("cube-events", help="events A_{a,n}^b of central cubes")
    p.add_argument("--mu", type=Path, required=True)
    p.add_argument("--nu", type=Path, required=True)
    p.add_argument("--a", type=int, required=True)
    p.add_argument("--b", type=int, required=True)
    p.add_argument("--klist", required=True)
    p.add_argument("--exact", action="store_true", help="rational probabilities")
    p.add_argument("--out", type=Path)
    _window_args(p)

    p = sub.add_parser("doubling", help="mass ratios mu(B(x,2r))/mu(B(x,r))")
    p.add_argument("--mu", type=Path)
    p.add_argument("--witness", type=float, help="use Lebesgue minus B(0, N)")
    p.add_argument("--h", type=float, default=1.0 / 54.0)
    p.add_argument("--x", required=True)
    p.add_argument("--r0", type=float, required=True)
    p.add_argument("--factor", type=float, default=2.0)
    p.add_argument("--count", type=int, default=8)
    p.add_argument("--out", type=Path)
    _window_args(p)


def _add_sharpness(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("sharpness", help="point of Lebesgue/Heaviside avoidance")
    p.add_argument("--mu", type=Path, required=True)
    p.add_argument("--eps", type=float)
    p.add_argument("--imax", type=int)
    p.add_argument("--y0", type=float)
    p.add_argument("--h", type=float, help="Heaviside grid spacing")
    p.add_argument("--out", type=Path, help="report JSON; the CSV goes alongside")
    _window_args(p)


def _add_tree(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("tree", help="measures on the symbolic tree")
    tree = p.add_subparsers(dest="tree_command", required=True)

    t = tree.add_parser("pi", help="metric pi between two tree files")
    t.add_argument("--lhs", type=Path, required=True)
    t.add_argument("--rhs", type=Path, required=True)
    t.add_argument("--lp", action="store_true", help="use the LP oracle")

    t = tree.add_parser("zoom", help="micromeasures along a word")
    t.add_argument("--mu", type=Path, required=True)
    t.add_argument("--x", required=True)
    t.add_argument("--N", type=int, required=True)
    t.add_argument("--nu", type=Path, help="also report pi to this measure")
    t.add_argument("--out", type=Path)

    t = tree.add_parser("construct", help="tree approximant mu^k")
    t.add_argument("--mu", type=Path, required=True)
    t.add_argument("--nu", type=Path, required=True)
    t.add_argument("--k", type=int, required=True)
    t.add_argument("--out", type=Path)

    t = tree.add_parser("microdist", help="empirical micromeasure distribution")
    t.add_argument("--mu", type=Path, required=True)
    t.add_argument("--x", required=True)
    t.add_argument("--N", type=int, required=True)
    t.add_argument("--out", type=Path)


def _add_builders(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("lebesgue", help="discretized Lebesgue measure on a box")
    p.add_argument("--lo", required=True)
    p.add_argument("--hi", required=True)
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--remove-ball", type=float, help="drop the closed ball B(0, R)")
    p.add_argument("--out", type=Path)

    p = sub.add_parser("sample", help="random element of the dense family S")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--generation", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path)
    _window_args(p)


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="blowzoom",
        description="Blow-up and zooming experiments for typical measures.",
    )
    p.add_argument(
        "--config-dir",
        type=Path,
        help=f"Override config directory (default: ./config or ${CONFIG_DIR_ENV})",
    )
    p.add_argument(
        "--root",
        type=Path,
        help=f"Override repo root (default: inferred from package or ${ROOT_ENV})",
    )
    p.add_argument(
        "--dotenv",
        type=Path,
        help="Path to a .env file to load (default: <root>/.env).",
    )
    p.add_argument(
        "--workers",
        type=int,
        help=f"Worker pool size (${WORKERS_ENV} still wins when set)",
    )
    p.add_argument("--log-level", help="Override log_level from app.yaml")
    p.add_argument(
        "--print-settings",
        action="store_true",
        help="Print effective settings and exit.",
    )
    p.add_argument("--version", action="store_true", help="Print version and exit.")

    sub = p.add_subparsers(dest="command")
    _add_metric(sub)
    _add_blowup(sub)
    _add_approx(sub)
    _add_limsup(sub)
    _add_sharpness(sub)
    _add_tree(sub)
    _add_builders(sub)
    return p


def _parse_args(argv: List[str]) -> argparse.Namespace:
    return _build_parser().parse_args(argv)


def _as_dict(settings: Settings) -> Dict[str, Any]:
    def conv(v: Any) -> Any:
        if isinstance(v, Path):
            return str(v)
        if isinstance(v, list):
            return [conv(x) for x in v]
        if isinstance(v, dict):
            return {k: conv(x) for k, x in v.items()}
        # pydantic v2 models
        try:
            dumped = v.model_dump()  # type: ignore[attr-defined]
            return conv(dumped)
        except Exception:
            return v

    return {"paths": conv(settings.paths), "app": conv(settings.app)}


# ------------------------ entrypoint ------------------------


def main(argv: Optional[List[str]] = None) -> int:
    try:
        ns = _parse_args(sys.argv[1:] if argv is None else argv)
    except SystemExit as e:
        # argparse exits 0 for --help and 2 for usage errors
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    if ns.version:
        ver = PKG_VERSION or "0.0.0"
        print(f"blowzoom {ver}")
        return EXIT_OK

    # Environment overrides (allow CLI to take precedence)
    if ns.root:
        os.environ[ROOT_ENV] = str(ns.root.expanduser())
    if ns.config_dir:
        os.environ[CONFIG_DIR_ENV] = str(ns.config_dir.expanduser())

    try:
        settings = Settings.load(
            root=ns.root.expanduser() if ns.root else None,
            dotenv=ns.dotenv.expanduser() if ns.dotenv else None,
        )
        settings = settings.with_overrides(workers=ns.workers, log_level=ns.log_level)
    except Exception as e:
        print(f"[config] {e}", file=sys.stderr)
        return EXIT_DOMAIN

    if ns.print_settings:
        print(json.dumps(_as_dict(settings), indent=2, ensure_ascii=False))
        return EXIT_OK

    if not ns.command:
        _build_parser().print_usage(sys.stderr)
        return EXIT_USAGE

    try:
        summary = pipeline.run(settings, ns)
    except ValueError as e:
        # DomainError is a ValueError
        print(f"[domain] {e}", file=sys.stderr)
        return EXIT_DOMAIN
    except Exception as e:
        # solver failures and other unexpected errors
        print(f"[runtime] {e}", file=sys.stderr)
        return EXIT_RUNTIME
    print(summary)
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
