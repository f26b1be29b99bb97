"""Command-line front end.

Subcommands: ``state`` (build and summarize), ``cfi`` (information bound,
optionally a grid-refinement sweep), ``simulate`` (draw datasets), ``mle``
(reconstruct from a dataset file), ``bench`` (full campaign), ``wigner``
(phase-space grid).  Exit codes: 0 success, 1 validation or usage problem,
2 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import plots
from .bench import (
    DESK_K_MAX,
    campaign_from_config,
    emit_wigner_grid,
    resolve_grid,
    run_campaign,
)
from .config import coerce_float, coerce_int, coerce_int_list, parse_kv, state_config_text, state_from_kv
from .errors import NumericalError, ValidationError
from .fisher import (
    convergence_sweep,
    crlb_frobenius,
    heterodyne_cfi,
    homodyne_cfi,
    report_to_csv,
)
from .fock import STATE_KINDS, make_state, purity, truncation_error
from .ggm import to_bloch
from .mle import MleConfig, build_povm, reconstruct, result_to_json
from .sim import (
    bin_distribution,
    dataset_to_csv,
    load_dataset,
    sample_checkpoints,
    sample_counts,
    save_dataset,
)


def _complex_arg(text: str) -> complex:
    try:
        return complex(text.replace(" ", ""))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a complex number: {text!r}") from None


def _int_arg(text: str) -> int:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value != int(value):
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    return int(value)


def _add_state_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--kind", "--state", dest="kind", choices=STATE_KINDS, metavar="KIND",
        help=f"state family, one of: {', '.join(STATE_KINDS)}",
    )
    p.add_argument("--lambda", dest="lam", type=float, metavar="L",
                   help="thermal parameter, |lambda| < 1")
    p.add_argument("--alpha", type=_complex_arg,
                   help="coherent amplitude, e.g. 1.8 or 1+0.5j")
    p.add_argument("--r", type=float, help="squeezing parameter, r >= 0")
    p.add_argument("--n", type=int, help="Fock level")
    p.add_argument("--coeffs", help="comma-separated Fock amplitudes starting at |0>")
    p.add_argument("--purity-low", dest="purity_low", type=float,
                   help="lower purity bound for random_mixed")
    p.add_argument("--purity-high", dest="purity_high", type=float,
                   help="upper purity bound for random_mixed")
    p.add_argument("--nc", dest="n_c", type=int, help="Fock cutoff (dimension - 1)")


def _add_grid_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--x1", type=float, help="first bin center")
    p.add_argument("--dx", type=float, help="bin width")
    p.add_argument("--bins", dest="n_bins", type=int, help="bins per axis")
    p.add_argument("--s-phases", dest="s_phases", type=int,
                   help="number of homodyne phases")
    p.add_argument("--p1", type=float, help="first p bin center (heterodyne)")
    p.add_argument("--dp", type=float, help="p bin width (heterodyne)")


def _state_kv(args, seed_attr: str = "seed") -> dict[str, str]:
    """Merge the config file (if any) with explicit flags; flags win."""
    kv: dict[str, str] = {}
    if getattr(args, "config", None):
        kv.update(parse_kv(Path(args.config).read_text()))
    if args.kind is not None:
        kv["kind"] = args.kind
    if args.lam is not None:
        kv["lambda"] = repr(args.lam)
    if args.alpha is not None:
        kv["alpha_re"] = repr(args.alpha.real)
        kv["alpha_im"] = repr(args.alpha.imag)
    if args.r is not None:
        kv["r"] = repr(args.r)
    if args.n is not None:
        kv["n"] = str(args.n)
    if args.coeffs is not None:
        kv["coeffs"] = args.coeffs
    if args.purity_low is not None:
        kv["purity_low"] = repr(args.purity_low)
    if args.purity_high is not None:
        kv["purity_high"] = repr(args.purity_high)
    if args.n_c is not None:
        kv["n_c"] = str(args.n_c)
    seed = getattr(args, seed_attr, None)
    if seed is not None:
        kv["seed"] = str(seed)
    return kv


def _grid_from_args(args, modality: str):
    return resolve_grid(
        modality,
        x1=args.x1,
        dx=args.dx,
        n_bins=args.n_bins,
        s_phases=args.s_phases,
        p1=args.p1,
        dp=args.dp,
    )


def cmd_state(args) -> int:
    spec = state_from_kv(_state_kv(args))
    rho = make_state(spec, max_truncation_error=args.trunc_bound)
    eps = truncation_error(spec)
    print(f"kind = {spec.kind}")
    print(f"dim = {spec.dim}")
    print(f"purity = {purity(rho):.12g}")
    print(f"truncation_error = {'n/a' if eps is None else format(eps, '.6g')}")
    print(f"bloch_norm = {np.linalg.norm(to_bloch(rho).t):.12g}")
    if args.out:
        Path(args.out).write_text(state_config_text(spec))
        print(f"wrote {args.out}")
    return 0


def cmd_cfi(args) -> int:
    spec = state_from_kv(_state_kv(args))
    if args.sweep:
        kwargs = {}
        if args.sweep_s:
            kwargs["s_values"] = coerce_int_list(args.sweep_s, "--sweep-s")
        if args.sweep_x1:
            kwargs["x1_values"] = tuple(
                coerce_float(v, "--sweep-x1") for v in args.sweep_x1.split(",")
            )
        if args.sweep_dx:
            kwargs["dx_values"] = tuple(
                coerce_float(v, "--sweep-dx") for v in args.sweep_dx.split(",")
            )
        report = convergence_sweep(spec, args.modality, args.copies, **kwargs)
        print("S x1 dx trace_inv max_neighbor_pct eligible")
        for idx in np.ndindex(report.trace_inv.shape):
            i, j, k = idx
            pct = report.max_neighbor_pct[idx]
            print(
                f"{report.s_values[i]} {report.x1_values[j]:g} {report.dx_values[k]:g} "
                f"{report.trace_inv[idx]:.12g} "
                f"{'-' if np.isnan(pct) else format(pct, '.4g')} "
                f"{'yes' if report.eligible[idx] else 'no'}"
            )
        if report.converged:
            i, j, k = report.selected
            print(
                f"converged: S={report.s_values[i]} x1={report.x1_values[j]:g} "
                f"dx={report.dx_values[k]:g} trace_inv={report.value:.12g}"
            )
        else:
            print("converged: no")
        if args.csv:
            report_to_csv(report, args.csv)
            print(f"wrote {args.csv}")
        return 0

    rho = make_state(spec)
    t = to_bloch(rho)
    grid = _grid_from_args(args, args.modality)
    cfi = (
        homodyne_cfi(t, grid, args.copies)
        if args.modality == "hom"
        else heterodyne_cfi(t, grid, args.copies)
    )
    bound = crlb_frobenius(cfi)
    print(f"trace_inv_cfi = {0.5 * bound:.12g}")
    print(f"crlb_frobenius = {bound:.12g}")
    if args.csv:
        Path(args.csv).write_text(
            "metric,value\n"
            f"trace_inv_cfi,{0.5 * bound:.17g}\n"
            f"crlb_frobenius,{bound:.17g}\n"
        )
        print(f"wrote {args.csv}")
    return 0


def cmd_simulate(args) -> int:
    spec = state_from_kv(_state_kv(args, seed_attr="state_seed"))
    rho = make_state(spec)
    grid = _grid_from_args(args, args.modality)
    dist = bin_distribution(rho, args.modality, grid)
    seed = 0 if args.seed is None else args.seed
    out = Path(args.out)
    if args.checkpoints:
        if args.csv:
            raise ValidationError("--csv applies to single-budget runs, not --checkpoints")
        ks = coerce_int_list(args.checkpoints, "--checkpoints")
        for ds in sample_checkpoints(dist, ks, seed):
            path = out.with_name(f"{out.stem}_K{ds.copies}{out.suffix or '.dat'}")
            save_dataset(path, ds, grid, spec.dim)
            print(f"wrote {path}")
        return 0
    if args.copies is None:
        raise ValidationError("simulate needs --copies (or --checkpoints)")
    ds = sample_counts(dist, args.copies, seed)
    save_dataset(out, ds, grid, spec.dim)
    print(f"wrote {out}")
    if args.csv:
        dataset_to_csv(args.csv, ds)
        print(f"wrote {args.csv}")
    return 0


def cmd_mle(args) -> int:
    dataset, grid, dim = load_dataset(args.data)
    kv = parse_kv(Path(args.config).read_text()) if args.config else {}
    max_iters = args.max_iters
    if max_iters is None:
        max_iters = coerce_int(kv["mle_max_iters"], "mle_max_iters") if "mle_max_iters" in kv else 5000
    ll_tol = args.ll_tol
    if ll_tol is None:
        ll_tol = coerce_float(kv["mle_ll_tol"], "mle_ll_tol") if "mle_ll_tol" in kv else 1e-10
    povm = build_povm(dataset.modality, grid, dim)
    result = reconstruct(dataset, povm, MleConfig(max_iters=max_iters, ll_tol=ll_tol))
    print(f"dim = {dim}")
    print(f"iterations = {result.iterations}")
    print(f"converged = {'true' if result.converged else 'false'}")
    print(f"final_ll = {result.final_ll:.12g}")
    print(f"purity = {purity(result.rho_hat):.12g}")
    if args.out:
        Path(args.out).write_text(result_to_json(result) + "\n")
        print(f"wrote {args.out}")
    return 0


def cmd_bench(args) -> int:
    config = campaign_from_config(Path(args.config).read_text())
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.threads is not None:
        config = replace(config, threads=args.threads)
    if args.out is not None:
        config = replace(config, output_dir=args.out)
    if config.k_max > DESK_K_MAX and not args.full_scale:
        raise ValidationError(
            f"k_max {config.k_max} is above the desk-scale limit {DESK_K_MAX}; "
            "pass --full-scale to confirm an hour-scale run"
        )
    curves = run_campaign(config)
    for modality, curve in curves.items():
        print(
            f"{modality}: K={curve.checkpoints[-1]} "
            f"mean_frobenius_sq={curve.mean_errors[-1]:.6g} crlb={curve.crlb[-1]:.6g}"
        )
    print(f"report in {config.output_dir}")
    return 0


def cmd_wigner(args) -> int:
    spec = state_from_kv(_state_kv(args))
    xs, ps, w = emit_wigner_grid(spec, args.span, args.points, args.out)
    print(f"wrote {args.out}")
    print(f"min = {w.min():.12g}")
    print(f"max = {w.max():.12g}")
    if args.png:
        plots.save_wigner_heatmap(args.png, xs, ps, w)
        print(f"wrote {args.png}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cvtomo",
        description=(
            "Continuous-variable tomography workbench: truncated Fock states, "
            "Fisher-information bounds, binned-measurement simulation, and "
            "maximum-likelihood reconstruction."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("state", help="build a state and print a summary")
    ps.add_argument("--config", help="state config file (key = value lines)")
    ps.add_argument("--seed", type=int, help="RNG seed for random_mixed states")
    _add_state_flags(ps)
    ps.add_argument("--trunc-bound", type=float, default=1e-2,
                    help="maximum allowed population above the cutoff (default 1e-2)")
    ps.add_argument("--out", help="write the state config echo to this file")
    ps.set_defaults(func=cmd_state)

    pc = sub.add_parser("cfi", help="information bound for a state and modality")
    pc.add_argument("--config", help="state config file")
    pc.add_argument("--seed", type=int, help="RNG seed for random_mixed states")
    _add_state_flags(pc)
    _add_grid_flags(pc)
    pc.add_argument("--modality", choices=("hom", "het"), required=True)
    pc.add_argument("--copies", type=float, default=1.0,
                    help="copy budget the information scales with (default 1)")
    pc.add_argument("--sweep", action="store_true",
                    help="run the grid-refinement study instead of a single grid")
    pc.add_argument("--sweep-s", help="override sweep phase counts (comma-separated)")
    pc.add_argument("--sweep-x1", help="override sweep grid starts (comma-separated)")
    pc.add_argument("--sweep-dx", help="override sweep bin widths (comma-separated)")
    pc.add_argument("--csv", help="write the result table to this file")
    pc.set_defaults(func=cmd_cfi)

    psim = sub.add_parser("simulate", help="draw a binned dataset from a state")
    psim.add_argument("--config", help="state config file")
    psim.add_argument("--seed", type=int, help="sampling seed (default 0)")
    psim.add_argument("--state-seed", dest="state_seed", type=int,
                      help="RNG seed for random_mixed states")
    _add_state_flags(psim)
    _add_grid_flags(psim)
    psim.add_argument("--modality", choices=("hom", "het"), required=True)
    psim.add_argument("--copies", type=_int_arg,
                      help="total copies (homodyne: a multiple of the phase count)")
    psim.add_argument("--checkpoints",
                      help="comma-separated cumulative budgets; writes one file each")
    psim.add_argument("--out", required=True, help="dataset file to write")
    psim.add_argument("--csv", help="also write the counts as CSV")
    psim.set_defaults(func=cmd_simulate)

    pm = sub.add_parser("mle", help="reconstruct a state from a dataset file")
    pm.add_argument("--config", help="config file; honors mle_max_iters / mle_ll_tol")
    pm.add_argument("--seed", type=int,
                    help="accepted for interface uniformity; reconstruction is deterministic")
    pm.add_argument("--data", required=True, help="dataset file from simulate or bench")
    pm.add_argument("--max-iters", dest="max_iters", type=int,
                    help="iteration budget (default 5000)")
    pm.add_argument("--ll-tol", dest="ll_tol", type=float,
                    help="relative log-likelihood stopping tolerance (default 1e-10)")
    pm.add_argument("--out", help="write the result JSON to this file")
    pm.set_defaults(func=cmd_mle)

    pb = sub.add_parser("bench", help="run a full campaign from a config file")
    pb.add_argument("--config", required=True, help="campaign config file")
    pb.add_argument("--seed", type=int, help="override the campaign sampling seed")
    pb.add_argument("--threads", type=int, help="worker threads (overrides CVTOMO_THREADS)")
    pb.add_argument("--out", help="override the campaign output directory")
    pb.add_argument("--full-scale", action="store_true",
                    help=f"allow copy budgets above {DESK_K_MAX}")
    pb.set_defaults(func=cmd_bench)

    pw = sub.add_parser("wigner", help="write W(x, p) on a square grid")
    pw.add_argument("--config", help="state config file")
    pw.add_argument("--seed", type=int, help="RNG seed for random_mixed states")
    _add_state_flags(pw)
    pw.add_argument("--span", type=float, default=5.0, help="half-width of the grid")
    pw.add_argument("--points", type=int, default=101, help="points per axis (>= 16)")
    pw.add_argument("--out", default="wigner.csv", help="CSV file to write")
    pw.add_argument("--png", help="also render a heatmap to this file")
    pw.set_defaults(func=cmd_wigner)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code if exc.code is not None else 0
        return 0 if code == 0 else 1
    try:
        return args.func(args)
    except ValidationError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except NumericalError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
