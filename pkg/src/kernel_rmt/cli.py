"""Command-line interface.

Every subcommand prints a JSON summary on stdout and, where it produces data,
writes CSV/JSON files under ``--out-dir``. Global flags may be given before or
after the subcommand. ``--config`` points at a JSON file whose keys provide
defaults for the subcommand options (command-line values win); a ``scenario``
key holds a mapping understood by :func:`kernel_rmt.model.scenario_from_config`.

Exit codes: ``0`` success, ``2`` infeasible design, ``3`` solver
non-convergence, ``1`` invalid input.
"""
from __future__ import annotations

import argparse
import json
import sys
from contextlib import nullcontext
from pathlib import Path
from typing import Sequence

import numpy as np

from . import _accel
from ._linalg import EigenConvergenceError
from .experiments import (
    benchmark,
    cluster_accuracy,
    equivalence_ladder,
    parity_experiment,
    reproduce_figure,
    spectral_cluster,
    write_csv,
    write_json,
    _json_default,
)
from .formats import save_dataset
from .hermite import HermiteCoeffs, InfeasibleCoefficientsError, NonIntegrableError, compute_coeffs, cubic_equivalent, parse_function
from .kernel import build_kernel, build_null_kernel, quantize_ternary
from .model import CovarianceError, MixtureParams, canonical_scenarios, sample_mixture, scenario_from_config, validate_regime
from .prototype import InfeasibleDesignError, coeffs_of_piecewise, design_piecewise
from .spectrum import LimitParams, SolverError, detect_spikes, empirical_esd, esd_distance, limiting_density

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_INFEASIBLE = 2
EXIT_NO_CONVERGENCE = 3


# ----------------------------------------------------------------------------
# helpers
# ----------------------------------------------------------------------------


def _scenario(args) -> MixtureParams:
    cfg = args.config_data.get("scenario")
    if isinstance(cfg, dict) and args.scenario is None:
        params = scenario_from_config(cfg)
    else:
        params = canonical_scenarios(args.scenario or cfg or "fig2")
    if getattr(args, "size", None):
        params = params.with_size(*args.size)
    if getattr(args, "null", False):
        params = params.nulled()
    return params


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _emit(args, name: str, payload: dict) -> int:
    write_json(_out_dir(args) / f"{name}.json", payload)
    json.dump(payload, sys.stdout, indent=2, sort_keys=True, default=_json_default)
    sys.stdout.write("\n")
    return EXIT_OK


def _target_coeffs(args) -> HermiteCoeffs:
    if args.function is not None:
        co = compute_coeffs(parse_function(args.function))
        return HermiteCoeffs(0.0, co.a1, co.a2, co.nu)
    if None in (args.a1, args.a2, args.nu):
        raise ValueError("give either --function or all of --a1, --a2, --nu")
    return HermiteCoeffs(0.0, args.a1, args.a2, args.nu)


# ----------------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------------


def cmd_sample(args) -> int:
    params = _scenario(args)
    ds = sample_mixture(params, args.seed)
    out = _out_dir(args)
    save_dataset(out / "dataset.bin", ds.X)
    write_csv(out / "labels.csv", ["label"], [ds.labels])
    rep = validate_regime(params)
    return _emit(args, "sample", {"n": params.n, "p": params.p, "c": params.c, "seed": args.seed,
                                  "dataset": str(out / "dataset.bin"), "regime": rep.__dict__ | {"ok": rep.ok}})


def cmd_coeffs(args) -> int:
    f = parse_function(args.function)
    co = compute_coeffs(f, order=args.order)
    cub = cubic_equivalent(co)
    return _emit(args, "coeffs", {"function": f.name, "coeffs": co.as_dict(),
                                  "cubic": {"c1": cub.c1, "c2": cub.c2, "c3": cub.c3}})


def cmd_density(args) -> int:
    if args.function is not None:
        lp = LimitParams.from_coeffs(compute_coeffs(parse_function(args.function)), args.c)
    else:
        if args.a1 is None or args.nu is None:
            raise ValueError("give either --function or both --a1 and --nu")
        lp = LimitParams(args.a1, args.nu, args.c)
    curve = limiting_density(lp)
    write_csv(_out_dir(args) / "density.csv", ["x", "density"], [curve.grid, curve.density])
    return _emit(args, "density", {"a1": lp.a1, "nu": lp.nu, "c": lp.c, "support": curve.support,
                                   "mass": curve.mass(), "flagged": int(np.sum(curve.flagged))})


def cmd_spectrum(args) -> int:
    params = _scenario(args)
    f = parse_function(args.function)
    ds = sample_mixture(params, args.seed)
    K = build_null_kernel(ds.Z, f) if args.null else build_kernel(ds.X, f)
    eigs = empirical_esd(K)
    curve = limiting_density(LimitParams.from_coeffs(compute_coeffs(f), params.c))
    write_csv(_out_dir(args) / "eigenvalues.csv", ["eigenvalue"], [eigs])
    return _emit(args, "spectrum", {"function": f.name, "n": params.n, "p": params.p, "support": curve.support,
                                    "spikes": detect_spikes(eigs, curve.support).tolist(),
                                    "l1_distance": esd_distance(eigs, curve)})


def cmd_equiv(args) -> int:
    params = _scenario(args)
    sizes = [tuple(s) for s in (args.sizes or [(params.n, params.p)])]
    res = equivalence_ladder(params, args.functions, sizes, args.seeds, spectra=args.spectra)
    return _emit(args, "equiv", res)


def cmd_design(args) -> int:
    target = _target_coeffs(args)
    proto = design_piecewise(target)
    return _emit(args, "design", {"target": target.as_dict(), "proto": proto.as_dict(),
                                  "achieved": coeffs_of_piecewise(proto).as_dict()})


def cmd_cluster(args) -> int:
    params = _scenario(args)
    ds = sample_mixture(params, args.seed)
    if args.ternary:
        proto = design_piecewise(_target_coeffs(args))
        K = quantize_ternary(ds.X, proto)
    else:
        K = build_kernel(ds.X, parse_function(args.function))
    labels = spectral_cluster(K, seed=args.seed)
    write_csv(_out_dir(args) / "cluster_labels.csv", ["label", "truth"], [labels, ds.labels])
    return _emit(args, "cluster", {"n": params.n, "p": params.p, "ternary": args.ternary,
                                   "accuracy": cluster_accuracy(labels, ds.labels)})


def cmd_parity(args) -> int:
    params = _scenario(args)
    rep = parity_experiment(args.function, params, seeds=args.seeds, timing=not args.no_timing)
    return _emit(args, "parity", rep.as_dict())


def cmd_reproduce(args) -> int:
    summary = reproduce_figure(args.figure, args.out_dir, seed=args.seed, size=tuple(args.size) if args.size else None)
    json.dump(summary, sys.stdout, indent=2, sort_keys=True, default=_json_default)
    sys.stdout.write("\n")
    return EXIT_OK


def cmd_bench(args) -> int:
    return _emit(args, "bench", benchmark(n=args.n, p=args.p, seed=args.seed, repeats=args.repeats))


# ----------------------------------------------------------------------------
# parser
# ----------------------------------------------------------------------------


def _globals_parser(suppress: bool) -> argparse.ArgumentParser:
    """Global flags; the subcommand copy uses SUPPRESS so it never clobbers
    values given before the subcommand."""
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    gp = argparse.ArgumentParser(add_help=False)
    gp.add_argument("--seed", type=int, default=d(0), help="base random seed")
    gp.add_argument("--out-dir", default=d("out"), help="directory for output files")
    gp.add_argument("--threads", type=int, default=d(None), help="cap on BLAS and numba threads")
    gp.add_argument("--config", default=d(None), help="JSON file with option defaults")
    return gp


def _add_function(sp, required: bool = True) -> None:
    sp.add_argument("--function", "-f", required=required, default=None,
                    help="sign, relu, relu_centered, linear, P<l>, cubic:c1,c2,c3, piecewise:t,s-,s+")


def _add_scenario(sp) -> None:
    sp.add_argument("--scenario", default=None, help="preset name (fig1, fig2, fig3)")
    sp.add_argument("--size", type=int, nargs=2, metavar=("N", "P"), default=None, help="rescale to n, p")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kernel-rmt", parents=[_globals_parser(False)],
                                     description="Inner-product kernel spectra on two-class mixtures.")
    sub = parser.add_subparsers(dest="command", required=True)
    gp = _globals_parser(True)

    def add(name: str, func, help_: str):
        sp = sub.add_parser(name, parents=[gp], help=help_)
        sp.set_defaults(func=func)
        return sp

    sp = add("sample", cmd_sample, "draw a dataset and report regime diagnostics")
    _add_scenario(sp)
    sp.add_argument("--null", action="store_true", help="drop means and covariance perturbations")

    sp = add("coeffs", cmd_coeffs, "Hermite fingerprint and cubic equivalent of a function")
    _add_function(sp)
    sp.add_argument("--order", type=int, default=128)

    sp = add("density", cmd_density, "limiting spectral density")
    _add_function(sp, required=False)
    sp.add_argument("--a1", type=float, default=None)
    sp.add_argument("--nu", type=float, default=None)
    sp.add_argument("--c", type=float, default=4.0, help="p/n")

    sp = add("spectrum", cmd_spectrum, "empirical spectrum against the limiting density")
    _add_function(sp)
    _add_scenario(sp)
    sp.add_argument("--null", action="store_true", help="use the null kernel on pure noise")

    sp = add("equiv", cmd_equiv, "distance to the spiked equivalent along a size ladder")
    sp.add_argument("--functions", nargs="+", default=["P1", "P2", "sign"])
    _add_scenario(sp)
    sp.add_argument("--sizes", type=int, nargs=2, action="append", metavar=("N", "P"), default=None)
    sp.add_argument("--seeds", type=int, nargs="+", default=[0])
    sp.add_argument("--spectra", action="store_true", help="also record spike eigenvalues")

    sp = add("design", cmd_design, "three-level prototype matching a fingerprint")
    _add_function(sp, required=False)
    for name in ("--a1", "--a2", "--nu"):
        sp.add_argument(name, type=float, default=None)

    sp = add("cluster", cmd_cluster, "two-way spectral clustering")
    _add_function(sp, required=False)
    _add_scenario(sp)
    sp.add_argument("--ternary", action="store_true", help="cluster with the packed prototype kernel")
    for name in ("--a1", "--a2", "--nu"):
        sp.add_argument(name, type=float, default=None)

    sp = add("parity", cmd_parity, "original, cubic and prototype kernels on identical data")
    _add_function(sp)
    _add_scenario(sp)
    sp.add_argument("--seeds", type=int, nargs="+", default=list(range(10)))
    sp.add_argument("--no-timing", action="store_true")

    sp = add("reproduce", cmd_reproduce, "regenerate the data behind a figure")
    sp.add_argument("figure", choices=["fig1", "fig2", "fig5"])
    sp.add_argument("--size", type=int, nargs=2, metavar=("N", "P"), default=None)

    sp = add("bench", cmd_bench, "storage and wall-time benchmark of dense and packed kernels")
    sp.add_argument("--n", type=int, default=2048)
    sp.add_argument("--p", type=int, default=8192)
    sp.add_argument("--repeats", type=int, default=5)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: Sequence[str], args) -> argparse.Namespace:
    """Re-parse with config-file values as defaults so explicit flags win."""
    args.config_data = {}
    if not args.config:
        return args
    data = json.loads(Path(args.config).read_text())
    if not isinstance(data, dict):
        raise ValueError("config must be a JSON object")
    opts = {k.replace("-", "_"): v for k, v in data.items() if k != "scenario"}
    parser.set_defaults(**{k: v for k, v in opts.items() if k in ("seed", "out_dir", "threads")})
    for action in parser._subparsers._group_actions:  # noqa: SLF001
        action.choices[args.command].set_defaults(**opts)
    args = parser.parse_args(argv)
    args.config_data = data
    return args


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args = _apply_config(parser, argv, args)
        if args.threads:
            _accel.set_num_threads(args.threads)
            from threadpoolctl import threadpool_limits

            limits = threadpool_limits(limits=args.threads)
        else:
            limits = nullcontext()
        with limits:
            return args.func(args)
    except InfeasibleDesignError as exc:
        print(f"infeasible design: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (EigenConvergenceError, SolverError) as exc:
        print(f"solver did not converge: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    except (ValueError, KeyError, CovarianceError, NonIntegrableError, InfeasibleCoefficientsError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    raise SystemExit(main())
