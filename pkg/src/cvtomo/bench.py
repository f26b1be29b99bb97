"""Benchmark campaigns: sample, reconstruct, and report error curves.

A campaign fixes a ground-truth state and, per modality, bins its
distribution on a measurement grid, draws E independent experiments at
cumulative copy-count checkpoints, reconstructs each dataset, and compares
the squared Frobenius errors against the scalar bound 2 Tr I^{-1}.  Reports
are CSV plus a JSON manifest, with figures rendered alongside; everything is
deterministic for a fixed config.
"""

from __future__ import annotations

import json
import os
import platform
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import metadata
from pathlib import Path

import numpy as np
import scipy

from . import plots
from .config import (
    coerce_bool,
    coerce_float,
    coerce_int,
    coerce_int_list,
    parse_kv,
    state_from_kv,
    state_to_kv,
)
from .errors import IllConditionedError, NumericalError, ValidationError
from .fisher import heterodyne_cfi, homodyne_cfi
from .fock import GridSpec, StateSpec, default_phases, make_state, truncation_error, wigner
from .ggm import frobenius_sq, to_bloch
from .mle import MleConfig, build_povm, reconstruct
from .sim import bin_distribution, sample_checkpoints, save_dataset

MODALITIES = ("hom", "het")
DESK_K_MAX = 10_000_000
_MODALITY_CODE = {"hom": 0, "het": 1}

CAMPAIGN_KEYS = (
    "modalities",
    "k_max",
    "checkpoints",
    "trials",
    "seed",
    "state_seed",
    "output_dir",
    "x1",
    "dx",
    "n_bins",
    "s_phases",
    "p1",
    "dp",
    "emit_wigner",
    "wigner_span",
    "wigner_points",
    "save_datasets",
    "threads",
    "mle_max_iters",
    "mle_ll_tol",
)


def resolve_threads(requested: int | None, n_tasks: int) -> int:
    """Worker count: CVTOMO_THREADS caps the default, ``requested`` overrides."""
    limit = os.cpu_count() or 1
    env = os.environ.get("CVTOMO_THREADS")
    if env is not None:
        try:
            limit = min(limit, int(env))
        except ValueError:
            raise ValidationError(
                f"CVTOMO_THREADS must be an integer, got {env!r}"
            ) from None
    if requested is not None:
        limit = requested
    if limit < 1:
        raise ValidationError(f"thread count must be >= 1, got {limit}")
    return min(limit, n_tasks)


def resolve_grid(
    modality: str,
    *,
    x1: float | None = None,
    dx: float | None = None,
    n_bins: int | None = None,
    s_phases: int | None = None,
    p1: float | None = None,
    dp: float | None = None,
) -> GridSpec:
    """Benchmark grid for a modality with optional field overrides.

    Defaults are the 200-bin layout from -10 with step 0.1005, 100 evenly
    spread phases for homodyne, and for heterodyne a p axis mirroring the x
    axis unless overridden.
    """
    if modality not in MODALITIES:
        raise ValidationError(f"modality must be one of {MODALITIES}, got {modality!r}")
    rx1 = -10.0 if x1 is None else float(x1)
    rdx = 0.1005 if dx is None else float(dx)
    rbins = 200 if n_bins is None else int(n_bins)
    if modality == "hom":
        return GridSpec(
            x1=rx1,
            dx=rdx,
            n_bins=rbins,
            phases=default_phases(100 if s_phases is None else int(s_phases)),
        )
    return GridSpec(
        x1=rx1,
        dx=rdx,
        n_bins=rbins,
        p1=rx1 if p1 is None else float(p1),
        dp=rdx if dp is None else float(dp),
    )


def default_checkpoints(k_max: int, n_phases: int = 100) -> tuple[int, ...]:
    """Ten log-spaced budgets per decade from 1e2 up to ``k_max``.

    Values are snapped to multiples of ``n_phases`` so homodyne budgets
    split evenly across phases, then deduplicated; ``k_max`` itself is
    always represented (by its largest reachable multiple).
    """
    if k_max < n_phases:
        raise ValidationError(
            f"k_max ({k_max}) is below one copy per phase ({n_phases})"
        )
    raw: list[float] = []
    j = 0
    while True:
        k = 10.0 ** (2.0 + j / 10.0)
        if k > k_max * (1.0 + 1e-12):
            break
        raw.append(k)
        j += 1
    if not raw or raw[-1] < k_max:
        raw.append(float(k_max))
    top = (k_max // n_phases) * n_phases
    snapped: list[int] = []
    for k in raw:
        s = min(max(n_phases, int(round(k / n_phases)) * n_phases), top)
        if not snapped or s > snapped[-1]:
            snapped.append(s)
    return tuple(snapped)


@dataclass(frozen=True)
class CampaignConfig:
    """Everything a campaign needs; grid fields of None take the defaults.

    ``checkpoints`` of None means the standard log-spaced ladder up to
    ``k_max``.  ``save_datasets`` is one of none/final/all.
    """

    state: StateSpec
    modalities: tuple[str, ...] = ("hom", "het")
    k_max: int = DESK_K_MAX
    checkpoints: tuple[int, ...] | None = None
    trials: int = 10
    seed: int = 0
    output_dir: str = "campaign"
    x1: float | None = None
    dx: float | None = None
    n_bins: int | None = None
    s_phases: int | None = None
    p1: float | None = None
    dp: float | None = None
    emit_wigner: bool = False
    wigner_span: float = 5.0
    wigner_points: int = 101
    save_datasets: str = "final"
    threads: int | None = None
    mle_max_iters: int = 5000
    mle_ll_tol: float = 1e-10

    def __post_init__(self):
        mods = tuple(self.modalities)
        if (
            not mods
            or any(m not in MODALITIES for m in mods)
            or len(set(mods)) != len(mods)
        ):
            raise ValidationError(
                f"modalities must be a non-empty subset of {MODALITIES}, got {mods}"
            )
        object.__setattr__(self, "modalities", mods)
        if self.k_max < 1:
            raise ValidationError(f"k_max must be >= 1, got {self.k_max}")
        if self.trials < 1:
            raise ValidationError(f"trials must be >= 1, got {self.trials}")
        if self.seed < 0:
            raise ValidationError(f"seed must be >= 0, got {self.seed}")
        if self.save_datasets not in ("none", "final", "all"):
            raise ValidationError(
                f"save_datasets must be none, final or all, got {self.save_datasets!r}"
            )
        if self.threads is not None and self.threads < 1:
            raise ValidationError(f"threads must be >= 1, got {self.threads}")
        if self.wigner_points < 16:
            raise ValidationError(f"wigner_points must be >= 16, got {self.wigner_points}")
        if not (self.wigner_span > 0):
            raise ValidationError(f"wigner_span must be positive, got {self.wigner_span}")
        if self.checkpoints is not None:
            ks = tuple(int(k) for k in self.checkpoints)
            if not ks:
                raise ValidationError("checkpoints must not be empty")
            if ks[0] < 1:
                raise ValidationError(f"checkpoints must be positive, got {ks[0]}")
            if any(b <= a for a, b in zip(ks, ks[1:])):
                raise ValidationError("checkpoints must be strictly increasing")
            if ks[-1] > self.k_max:
                raise ValidationError(
                    f"checkpoint {ks[-1]} exceeds k_max {self.k_max}"
                )
            if "hom" in mods:
                s = 100 if self.s_phases is None else self.s_phases
                bad = [k for k in ks if k % s]
                if bad:
                    raise ValidationError(
                        f"homodyne checkpoints must be divisible by {s} phases: {bad}"
                    )
            object.__setattr__(self, "checkpoints", ks)
        # Validate the MLE settings eagerly rather than at first reconstruct.
        MleConfig(max_iters=self.mle_max_iters, ll_tol=self.mle_ll_tol)

    def grid_for(self, modality: str) -> GridSpec:
        return resolve_grid(
            modality,
            x1=self.x1,
            dx=self.dx,
            n_bins=self.n_bins,
            s_phases=self.s_phases,
            p1=self.p1,
            dp=self.dp,
        )

    def resolved_checkpoints(self) -> tuple[int, ...]:
        if self.checkpoints is not None:
            return self.checkpoints
        s = 100 if self.s_phases is None else self.s_phases
        return default_checkpoints(self.k_max, s if "hom" in self.modalities else 1)


def campaign_from_kv(kv: dict[str, str]) -> CampaignConfig:
    """Build a campaign from parsed key-value pairs.

    Campaign keys are split off first; whatever remains must describe the
    state.  Inside a campaign file ``seed`` is the sampling seed and
    ``state_seed`` holds the state's own RNG seed.
    """
    kv = dict(kv)
    camp: dict[str, str] = {}
    for key in CAMPAIGN_KEYS:
        if key in kv:
            camp[key] = kv.pop(key)
    if "state_seed" in camp:
        kv["seed"] = camp.pop("state_seed")
    state = state_from_kv(kv)

    fields: dict[str, object] = {"state": state}
    if "modalities" in camp:
        fields["modalities"] = tuple(
            m for m in camp["modalities"].replace(",", " ").split() if m
        )
    for key in ("k_max", "trials", "seed", "n_bins", "s_phases", "wigner_points",
                "threads", "mle_max_iters"):
        if key in camp:
            fields[key] = coerce_int(camp[key], key)
    for key in ("x1", "dx", "p1", "dp", "wigner_span", "mle_ll_tol"):
        if key in camp:
            fields[key] = coerce_float(camp[key], key)
    if "checkpoints" in camp:
        fields["checkpoints"] = coerce_int_list(camp["checkpoints"], "checkpoints")
    if "emit_wigner" in camp:
        fields["emit_wigner"] = coerce_bool(camp["emit_wigner"], "emit_wigner")
    for key in ("output_dir", "save_datasets"):
        if key in camp:
            fields[key] = camp[key]
    return CampaignConfig(**fields)


def campaign_from_config(text: str) -> CampaignConfig:
    return campaign_from_kv(parse_kv(text))


@dataclass(frozen=True)
class ErrorCurve:
    """Per-checkpoint squared Frobenius errors of one modality.

    ``trial_errors[e, j]`` is trial e at checkpoint ``checkpoints[j]``;
    ``mean_errors`` averages over trials and ``crlb`` holds 2 Tr I^{-1}
    evaluated at each checkpoint's copy count.
    """

    modality: str
    checkpoints: tuple[int, ...]
    trial_errors: np.ndarray
    mean_errors: np.ndarray
    crlb: np.ndarray


def _crlb_unit(cfi) -> float:
    """Report-column value 2 Tr I^{-1} at one copy, via the spectrum.

    Identical to ``crlb_frobenius`` for well-conditioned matrices, but the
    spectral sum stays defined for near-pure ground truths whose CFI spans
    many decades (the measurement density develops near-zeros).  Error
    curves for such states are standard report content, so the column must
    not refuse them; callers needing the guarded value should use
    ``crlb_frobenius`` directly.
    """
    evals = np.linalg.eigvalsh(cfi.matrix)
    if not np.all(np.isfinite(evals)) or evals[0] <= 0.0:
        raise IllConditionedError(
            f"CFI matrix is not positive definite (min eigenvalue {evals[0]:.3e})"
        )
    return 2.0 * float(np.sum(1.0 / evals))


def _run_trial(
    trial: int,
    dist,
    povm,
    checkpoints,
    seed: int,
    mle_cfg: MleConfig,
    rho_true,
    slot: list,
    data_dir: Path | None,
    save_mode: str,
    grid: GridSpec,
    dim: int,
) -> None:
    modality = dist.modality
    sub = int(
        np.random.SeedSequence([seed, trial, _MODALITY_CODE[modality]]).generate_state(
            1, dtype=np.uint64
        )[0]
    )
    datasets = sample_checkpoints(dist, checkpoints, sub)
    for j, ds in enumerate(datasets):
        try:
            result = reconstruct(ds, povm, mle_cfg)
        except (ValidationError, NumericalError) as err:
            raise type(err)(
                f"{modality} trial {trial}, checkpoint K={ds.copies}: {err}"
            ) from err
        slot.append((ds.copies, frobenius_sq(result.rho_hat, rho_true)))
        if data_dir is not None and (
            save_mode == "all" or (save_mode == "final" and j == len(datasets) - 1)
        ):
            save_dataset(
                data_dir / f"{modality}_trial{trial:02d}_K{ds.copies}.dat",
                ds,
                grid,
                dim,
            )


def _write_errors_csv(path: Path, checkpoints, slots, crlb) -> None:
    """Rows K,trial,frobenius_sq,mean_frobenius_sq,crlb grouped by K.

    Tolerates partially filled trial slots (abort path); the mean at each K
    then covers the trials that reached it.
    """
    index = {k: j for j, k in enumerate(checkpoints)}
    per_k: dict[int, list[tuple[int, float]]] = {k: [] for k in checkpoints}
    for e, slot in enumerate(slots, start=1):
        for k, err in slot:
            per_k[k].append((e, err))
    lines = ["K,trial,frobenius_sq,mean_frobenius_sq,crlb"]
    for k in checkpoints:
        rows = per_k[k]
        if not rows:
            continue
        mean = sum(err for _, err in rows) / len(rows)
        bound = crlb[index[k]]
        for e, err in rows:
            lines.append(
                f"{k},{e},{format(err, '.17g')},{format(mean, '.17g')},{format(bound, '.17g')}"
            )
    path.write_text("\n".join(lines) + "\n")


def run_campaign(config: CampaignConfig) -> dict[str, ErrorCurve]:
    """Execute the campaign and write its report files.

    Per modality: ``errors_<modality>.csv`` plus a shared ``errors.png``
    figure, ``manifest.json``, optional Wigner grid files, and datasets
    under ``data/`` according to ``save_datasets``.  Trials run on a thread
    pool (size from ``threads``/CVTOMO_THREADS) with one RNG substream per
    (seed, trial, modality), so outputs do not depend on scheduling.  On
    error, rows computed so far are flushed before the exception is
    re-raised with trial/checkpoint context.
    """
    rho = make_state(config.state)
    dim = rho.dim
    t = to_bloch(rho)
    checkpoints = config.resolved_checkpoints()
    mle_cfg = MleConfig(max_iters=config.mle_max_iters, ll_tol=config.mle_ll_tol)
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    data_dir: Path | None = None
    if config.save_datasets != "none":
        data_dir = out_dir / "data"
        data_dir.mkdir(exist_ok=True)

    curves: dict[str, ErrorCurve] = {}
    outputs: list[str] = []
    grids: dict[str, GridSpec] = {}
    for modality in config.modalities:
        grid = config.grid_for(modality)
        grids[modality] = grid
        dist = bin_distribution(rho, modality, grid)
        povm = build_povm(modality, grid, dim)
        cfi_unit = (
            homodyne_cfi(t, grid, 1.0)
            if modality == "hom"
            else heterodyne_cfi(t, grid, 1.0)
        )
        crlb_unit = _crlb_unit(cfi_unit)
        crlb = np.array([crlb_unit / k for k in checkpoints])

        slots: list[list[tuple[int, float]]] = [[] for _ in range(config.trials)]
        csv_path = out_dir / f"errors_{modality}.csv"
        workers = resolve_threads(config.threads, config.trials)
        try:
            if workers == 1:
                for e in range(1, config.trials + 1):
                    _run_trial(
                        e, dist, povm, checkpoints, config.seed, mle_cfg, rho,
                        slots[e - 1], data_dir, config.save_datasets, grid, dim,
                    )
            else:
                with ThreadPoolExecutor(max_workers=workers) as pool:
                    futures = [
                        pool.submit(
                            _run_trial,
                            e, dist, povm, checkpoints, config.seed, mle_cfg, rho,
                            slots[e - 1], data_dir, config.save_datasets, grid, dim,
                        )
                        for e in range(1, config.trials + 1)
                    ]
                    failure = None
                    for fut in futures:
                        exc = fut.exception()
                        if exc is not None and failure is None:
                            failure = exc
                    if failure is not None:
                        raise failure
        except BaseException:
            _write_errors_csv(csv_path, checkpoints, slots, crlb)
            raise

        trial_errors = np.array(
            [[err for _, err in slot] for slot in slots], dtype=np.float64
        )
        curves[modality] = ErrorCurve(
            modality=modality,
            checkpoints=checkpoints,
            trial_errors=trial_errors,
            mean_errors=trial_errors.mean(axis=0),
            crlb=crlb,
        )
        _write_errors_csv(csv_path, checkpoints, slots, crlb)
        outputs.append(csv_path.name)

    plots.save_error_curves(out_dir / "errors.png", curves.values())
    outputs.append("errors.png")

    if config.emit_wigner:
        xs, ps, w = emit_wigner_grid(
            config.state, config.wigner_span, config.wigner_points,
            out_dir / "wigner.csv",
        )
        plots.save_wigner_heatmap(out_dir / "wigner.png", xs, ps, w)
        outputs.extend(["wigner.csv", "wigner.png"])

    manifest = _manifest_payload(config, checkpoints, grids, outputs)
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n"
    )
    return curves


def _grid_echo(grid: GridSpec) -> dict:
    return {
        "x1": grid.x1,
        "dx": grid.dx,
        "n_bins": grid.n_bins,
        "s_phases": None if grid.phases is None else len(grid.phases),
        "p1": grid.p1,
        "dp": grid.dp,
    }


def _manifest_payload(config, checkpoints, grids, outputs) -> dict:
    try:
        package_version = metadata.version("cvtomo")
    except metadata.PackageNotFoundError:  # pragma: no cover
        package_version = "unknown"
    return {
        "campaign": {
            "state": dict(state_to_kv(config.state)),
            "truncation_error": truncation_error(config.state),
            "modalities": list(config.modalities),
            "k_max": config.k_max,
            "checkpoints": list(checkpoints),
            "trials": config.trials,
            "seed": config.seed,
            "grids": {m: _grid_echo(g) for m, g in grids.items()},
            "save_datasets": config.save_datasets,
            "threads": config.threads,
            "mle_max_iters": config.mle_max_iters,
            "mle_ll_tol": config.mle_ll_tol,
            "emit_wigner": config.emit_wigner,
            "wigner_span": config.wigner_span,
            "wigner_points": config.wigner_points,
        },
        "outputs": sorted(outputs),
        "versions": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "cvtomo": package_version,
        },
    }


def emit_wigner_grid(spec: StateSpec, span: float, n_points: int, path):
    """Write W(x, p) over a square grid to CSV; returns (xs, ps, w).

    The grid covers [-span, span) with the origin always a grid point
    (index n_points // 2), so peak values at the origin are sampled
    exactly.  CSV columns are x,p,w with x varying slowest.
    """
    if n_points < 16:
        raise ValidationError(f"n_points must be >= 16, got {n_points}")
    if not (span > 0):
        raise ValidationError(f"span must be positive, got {span}")
    rho = make_state(spec)
    step = 2.0 * span / n_points
    axis = (np.arange(n_points) - n_points // 2) * step
    w = wigner(rho, axis[:, None], axis[None, :])
    lines = ["x,p,w"]
    for i, x in enumerate(axis):
        for j, p in enumerate(axis):
            lines.append(
                f"{format(x, '.17g')},{format(p, '.17g')},{format(w[i, j], '.17g')}"
            )
    Path(path).write_text("\n".join(lines) + "\n")
    return axis, axis.copy(), w
