"""Command-line entry point: run, converge, penalty-sweep, facet-compare, validate."""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from .post import (
    converge_study,
    facet_compare,
    penalty_sweep,
    write_converge,
    write_facet,
    write_penalty,
    write_run,
)
from .scene import SceneConfig, build_scene, load_config
from .solver import ConfigError, LoadSchedule, SolverError, run_load_steps

DEFAULT_INSERTIONS = "0,2,4,6,8,10,14,18,20"
DEFAULT_EPSILONS = "1e9,1e10,1e11,1e12,1e13,1e14,1e15"


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals or min(vals) < 0:
        raise argparse.ArgumentTypeError("insertion counts must be non-negative")
    return vals


def _float_list(text: str) -> list[float]:
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals or min(vals) <= 0:
        raise argparse.ArgumentTypeError("penalty values must be positive")
    return vals


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scene", type=Path, help="scene config file (YAML); built-in scene if omitted")
    common.add_argument("--out", type=Path, help="output directory (default: the config's output.directory)")
    common.add_argument("--steps", type=_positive_int, help="override the number of load steps")
    common.add_argument("-v", "--verbose", action="store_true", help="log every load step")

    p = argparse.ArgumentParser(prog="igacontact", description="NURBS penalty contact for circular contact pairs.")
    sub = p.add_subparsers(dest="command", required=True, metavar="command")
    r = sub.add_parser("run", parents=[common], help="run one scene and write history, pairs, stresses, summary")
    r.add_argument("--insertions", type=int, help="knots inserted per direction (overrides the config)")
    c = sub.add_parser("converge", parents=[common], help="refinement study")
    c.add_argument("--insertions", type=_int_list, default=_int_list(DEFAULT_INSERTIONS), help="comma list")
    s = sub.add_parser("penalty-sweep", parents=[common], help="penalty factor study")
    s.add_argument("--epsilons", type=_float_list, default=_float_list(DEFAULT_EPSILONS), help="comma list, N/m^2")
    f = sub.add_parser("facet-compare", parents=[common], help="exact against faceted master boundary")
    f.add_argument("--segments", type=_positive_int, default=16, help="polyline segments")
    v = sub.add_parser("validate", parents=[common], help="run the invariant suite")
    v.add_argument("--quick", action="store_true", help="shorter run for the load-step checks")
    return p


def _config(args) -> SceneConfig:
    cfg = load_config(args.scene) if args.scene else SceneConfig()
    if args.steps is not None:
        inc = cfg.schedule.increment
        cfg = cfg.with_(schedule=LoadSchedule(inc, inc * args.steps))
    return cfg


def _out(args, cfg: SceneConfig) -> Path:
    return args.out if args.out is not None else Path(cfg.output_dir)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(message)s")
    t0 = time.perf_counter()
    try:
        cfg = _config(args)
        if args.command == "validate":
            from .validation import run_checks

            checks = run_checks(quick=args.quick)
            for chk in checks:
                print(chk.line())
            failed = sum(not c.passed for c in checks)
            print(f"{len(checks) - failed}/{len(checks)} checks passed")
            return 1 if failed else 0

        out = _out(args, cfg)
        if args.command == "run":
            if args.insertions is not None:
                cfg = cfg.with_(insertions=args.insertions)
            scene = build_scene(cfg)
            h = run_load_steps(scene, keep_pairs=True)
            files = write_run(h, scene, out)
            f = h.final
            print(f"{h.n_elements} elements, {h.n_dof} DOF, {len(h.steps)} steps")
            print(f"final F_c = {f.contact_force:.6e} N/m, max g_N = {f.max_penetration:.3e} m")
            print(f"sigma_ymax = {f.sigma_ymax:.4e} Pa")
        elif args.command == "converge":
            rows = converge_study(cfg, args.insertions)
            files = [write_converge(rows, out / "converge.csv")]
            for r in rows:
                print(f"k={r.insertions:3d}  elements={r.elements:4d}  dof={r.dof:5d}  sigma_ymax={r.sigma_ymax:.4e} Pa")
        elif args.command == "penalty-sweep":
            rows = penalty_sweep(cfg, args.epsilons)
            files = [write_penalty(rows, out / "penalty.csv")]
            for r in rows:
                print(f"eps={r.epsilon:.1e}  {r.status}  F_c={r.contact_force:.6e} N/m  max g_N={r.max_gap:.3e} m")
        else:
            rows = facet_compare(cfg, args.segments, steps=args.steps)
            files = [write_facet(rows, out / "facet.csv")]
            for r in rows:
                print(
                    f"{r.mode:8s} jump={r.max_normal_jump:.3e} rad  gap error={r.max_gap_error:.3e} m"
                    f"  sagitta={r.sagitta_bound:.3e} m  F_c={r.contact_force:.6e} N/m"
                )
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (SolverError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for p in files:
        print(f"wrote {p}")
    print(f"wall time {time.perf_counter() - t0:.2f} s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
