"""``eqboot`` command line: coverage, theory, pixelmap and bootstrap subcommands.

Exit codes: 0 success, 1 failed mathematical check, 2 configuration error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import shutil
import sys
from pathlib import Path

import numpy as np

from . import io
from .config import ConfigError, Experiment, bundled_config_path, bundled_configs, load_config
from .experiments import pixel_maps, run_arms, trial_stream
from .bootstrap import _run
from .theory import run_theory_checks

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def _err(msg: str) -> None:
    print(f"eqboot: {msg}", file=sys.stderr)


def _prepare(args) -> tuple[Experiment, Path]:
    cfg = load_config(args.config)
    if args.output_dir is not None:
        cfg["output_dir"] = args.output_dir
    exp = Experiment.from_config(cfg)
    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "config_echo.json").write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n")
    return exp, out


def cmd_coverage(args) -> int:
    exp, out = _prepare(args)
    cfg = exp.config
    n_trials = cfg["n_trials"]

    def progress(t):
        if args.verbose:
            print(f"trial {t + 1}/{n_trials}", file=sys.stderr)

    curves = run_arms(exp.model, exp.operator, exp.noise, exp.estimator, exp.arms, cfg["levels"],
                      n_trials, cfg["master_seed"], progress=progress)
    io.write_coverage_csv(out / "coverage.csv", curves)
    (out / "coverage.svg").write_text(io.coverage_svg(curves, title=f"{cfg['problem']} coverage"))
    for c in curves:
        print(f"{c.method_tag:<14s} MAD {c.mad():.3f}  " +
              " ".join(f"{lv:g}:{e:.3f}" for lv, e in zip(c.levels, c.empirical)))
    return EXIT_OK


def cmd_pixelmap(args) -> int:
    exp, out = _prepare(args)
    maps = pixel_maps(exp.model, exp.operator, exp.noise, exp.estimator, exp.primary_config(),
                      exp.config["master_seed"])
    for name in ("x_star", "x_hat", "std_map", "true_abs_err"):
        io.save_scaled_pgm(out / f"{name}.pgm", maps[name].image)
    rho = maps["spearman"]
    (out / "spearman.txt").write_text(("nan" if math.isnan(rho) else repr(rho)) + "\n")
    print(f"spearman(std_map, true_abs_err) = {rho:.4f}")
    return EXIT_OK


def cmd_bootstrap(args) -> int:
    exp, out = _prepare(args)
    seed = exp.config["master_seed"]
    stream = trial_stream(seed, 0)
    x_star = exp.model.sample(stream.spawn(0))
    y = exp.operator.apply(x_star)
    if exp.noise.sigma > 0:
        y = y + exp.noise.sigma * stream.spawn(1).standard_normal(exp.operator.m)
    res = _run(exp.estimator, exp.operator, exp.noise, y, exp.primary_config(), stream.spawn(2))
    res.save(out)
    np.save(out / "x_star.npy", x_star)
    print(f"{res.n_samples} replicates, mean squared error {res.mean_error():.6g}")
    return EXIT_OK


def cmd_theory(args) -> int:
    results = run_theory_checks(args.n, args.group, args.instances, args.seed, args.inject_lhs_error)
    for r in results:
        print(r.line())
    ok = all(r.passed for r in results)
    print("all checks passed" if ok else "FAILED")
    return EXIT_OK if ok else EXIT_CHECK


def cmd_configs(args) -> int:
    if args.export is None:
        for name in bundled_configs():
            print(name)
        return EXIT_OK
    dest = Path(args.export)
    dest.mkdir(parents=True, exist_ok=True)
    for name in bundled_configs():
        shutil.copyfile(bundled_config_path(name), dest / name)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eqboot", description="Equivariant bootstrap experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, fn, help_ in (
        ("coverage", cmd_coverage, "coverage curves for every configured arm"),
        ("pixelmap", cmd_pixelmap, "per-pixel std and true error maps for one trial"),
        ("bootstrap", cmd_bootstrap, "raw bootstrap result for one trial"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("config", help="experiment JSON file")
        p.add_argument("--output-dir", default=None, help="override the config's output_dir")
        p.add_argument("-v", "--verbose", action="store_true", help="per-trial counter on stderr")
        p.set_defaults(func=fn)

    p = sub.add_parser("theory", help="randomised identity and Reynolds checks")
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--group", default="shift",
                   choices=["shift", "trivial", "rotation", "shift2d", "shift_rotation"])
    p.add_argument("--instances", type=int, default=100)
    p.add_argument("--inject-lhs-error", type=float, nargs="?", const=1e-3, default=0.0,
                   help="add this amount to every lhs (sensitivity check)")
    p.set_defaults(func=cmd_theory)

    p = sub.add_parser("configs", help="list or export the bundled configs")
    p.add_argument("--export", metavar="DIR", default=None)
    p.set_defaults(func=cmd_configs)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "theory" and args.n > 64:
        _err(f"--n {args.n} exceeds the dense sweep limit of 64")
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        _err(f"numeric failure: {exc}")
        return EXIT_NUMERIC
    except ValueError as exc:
        # raised while building objects from an otherwise schema-valid config
        _err(f"invalid configuration: {exc}")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
