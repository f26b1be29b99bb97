"""Binned measurement distributions and multinomial count simulation.

Counts are drawn per bin with numpy's Generator.multinomial, which walks the
bins once drawing conditional binomials on the remaining mass; memory stays
O(bins) no matter how many copies are requested, so budgets of 1e9 copies
and beyond never materialize per-sample records.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import GridLeakageError, ValidationError
from .fock import DensityMatrix, GridSpec, heterodyne_pdf, homodyne_pdf

MAX_LEAK = 1e-6

_DATASET_FORMAT = "cvtomo-dataset"
_DATASET_VERSION = 1


@dataclass(frozen=True)
class BinnedDistribution:
    """Bin probabilities of one modality on one grid.

    Homodyne probabilities have shape (S, N), one simplex per phase;
    heterodyne probabilities are the flattened (N*N,) simplex with x varying
    slowest.  ``leak`` records the probability mass outside the grid before
    renormalization.
    """

    modality: str
    grid: GridSpec
    probs: np.ndarray
    leak: float

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        if self.modality == "hom":
            expected = (self.grid.n_phases, self.grid.n_bins)
        elif self.modality == "het":
            expected = (self.grid.n_bins**2,)
        else:
            raise ValidationError(f"modality must be 'hom' or 'het', got {self.modality!r}")
        if probs.shape != expected:
            raise ValidationError(f"probability array must have shape {expected}, got {probs.shape}")
        if np.any(probs < 0):
            raise ValidationError("probabilities must be nonnegative")
        sums = probs.sum(axis=-1)
        if np.any(np.abs(sums - 1.0) > 1e-9):
            raise ValidationError("each probability simplex must sum to 1 within 1e-9")
        probs = probs.copy()
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)


def bin_distribution(
    rho: DensityMatrix,
    modality: str,
    grid: GridSpec,
    *,
    max_leak: float = MAX_LEAK,
) -> BinnedDistribution:
    """Evaluate the modality's density at bin centers times the bin measure.

    The residual mass 1 - sum(probs) must stay below ``max_leak`` (per phase
    for homodyne); each simplex is then renormalized so sampling sees exact
    probability vectors.
    """
    if modality == "hom":
        if grid.phases is None:
            raise ValidationError("homodyne binning needs a grid with phases")
        xs = grid.x_centers
        raw = np.stack([homodyne_pdf(rho, theta, xs) for theta in grid.phases]) * grid.dx
    elif modality == "het":
        if grid.p1 is None:
            raise ValidationError("heterodyne binning needs a grid with a p axis")
        x_flat, p_flat = grid.quadrature_points()
        raw = heterodyne_pdf(rho, x_flat, p_flat) * (grid.dx * grid.dp)
    else:
        raise ValidationError(f"modality must be 'hom' or 'het', got {modality!r}")
    sums = raw.sum(axis=-1)
    leaks = 1.0 - sums
    worst = float(np.abs(leaks).max())
    if worst >= max_leak:
        raise GridLeakageError(
            f"grid keeps only {float(sums.min()):.6f} of the probability mass "
            f"(leak {worst:.3e} >= {max_leak:g}); widen the span or refine the step"
        )
    probs = raw / sums[..., None]
    return BinnedDistribution(modality=modality, grid=grid, probs=probs, leak=float(leaks.max()))


@dataclass(frozen=True)
class Dataset:
    """Observed counts for one modality.

    Homodyne counts have shape (S, N) with each phase holding copies/S
    draws; heterodyne counts are flat with ``copies`` total draws.
    """

    modality: str
    counts: np.ndarray
    copies: int
    seed: int

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if not np.issubdtype(counts.dtype, np.integer):
            raise ValidationError("counts must be integers")
        counts = counts.astype(np.int64)
        if np.any(counts < 0):
            raise ValidationError("counts must be nonnegative")
        if self.modality == "hom":
            if counts.ndim != 2:
                raise ValidationError("homodyne counts must be 2-D (phases, bins)")
            per_phase = counts.sum(axis=1)
            if np.any(per_phase != per_phase[0]):
                raise ValidationError("each phase must hold the same number of draws")
        elif self.modality == "het":
            if counts.ndim != 1:
                raise ValidationError("heterodyne counts must be 1-D")
        else:
            raise ValidationError(f"modality must be 'hom' or 'het', got {self.modality!r}")
        if counts.sum() != self.copies:
            raise ValidationError(
                f"counts sum to {counts.sum()} but copies = {self.copies}"
            )
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)


def _check_copies(dist: BinnedDistribution, copies: int) -> None:
    if copies <= 0:
        raise ValidationError(f"copies must be positive, got {copies}")
    if dist.modality == "hom" and copies % dist.grid.n_phases != 0:
        raise ValidationError(
            f"copies ({copies}) must be divisible by the number of phases "
            f"({dist.grid.n_phases})"
        )


def _draw(rng: np.random.Generator, dist: BinnedDistribution, copies: int) -> np.ndarray:
    if dist.modality == "hom":
        per_phase = copies // dist.grid.n_phases
        return np.stack([rng.multinomial(per_phase, row) for row in dist.probs])
    return rng.multinomial(copies, dist.probs)


def sample_counts(dist: BinnedDistribution, copies: int, seed: int) -> Dataset:
    """Draw ``copies`` measurement outcomes into bins, deterministically.

    Homodyne splits the budget evenly over phases, so ``copies`` must be a
    multiple of the phase count.
    """
    _check_copies(dist, copies)
    rng = np.random.default_rng(seed)
    counts = _draw(rng, dist, copies)
    return Dataset(modality=dist.modality, counts=counts, copies=copies, seed=seed)


def sample_checkpoints(dist: BinnedDistribution, copies_list, seed: int) -> list[Dataset]:
    """Cumulative datasets at increasing budgets from one RNG stream.

    Checkpoint j extends checkpoint j-1 with an independent draw of the
    difference, so a single checkpoint reproduces ``sample_counts`` exactly
    and growing a run never re-draws earlier data.
    """
    copies_list = [int(k) for k in copies_list]
    if not copies_list:
        raise ValidationError("need at least one checkpoint")
    if any(b <= a for a, b in zip(copies_list, copies_list[1:])):
        raise ValidationError("checkpoints must be strictly increasing")
    for k in copies_list:
        _check_copies(dist, k)
    rng = np.random.default_rng(seed)
    datasets = []
    running = None
    previous = 0
    for k in copies_list:
        increment = _draw(rng, dist, k - previous)
        running = increment if running is None else running + increment
        datasets.append(Dataset(modality=dist.modality, counts=running, copies=k, seed=seed))
        previous = k
    return datasets


def _grid_fields(grid: GridSpec) -> dict:
    return {
        "x1": grid.x1,
        "dx": grid.dx,
        "n_bins": grid.n_bins,
        "phases": list(grid.phases) if grid.phases is not None else None,
        "p1": grid.p1,
        "dp": grid.dp,
    }


def save_dataset(path, dataset: Dataset, grid: GridSpec, dim: int) -> None:
    """Write a dataset as a one-line JSON header plus raw little-endian int64 counts."""
    header = {
        "format": _DATASET_FORMAT,
        "version": _DATASET_VERSION,
        "modality": dataset.modality,
        "dim": dim,
        "grid": _grid_fields(grid),
        "copies": dataset.copies,
        "seed": dataset.seed,
        "shape": list(dataset.counts.shape),
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        fh.write(np.ascontiguousarray(dataset.counts, dtype="<i8").tobytes())


def load_dataset(path) -> tuple[Dataset, GridSpec, int]:
    """Inverse of :func:`save_dataset`; returns (dataset, grid, dim)."""
    blob = Path(path).read_bytes()
    newline = blob.find(b"\n")
    if newline < 0:
        raise ValidationError(f"{path}: not a dataset file (missing header)")
    try:
        header = json.loads(blob[:newline].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValidationError(f"{path}: unreadable dataset header: {exc}") from exc
    if header.get("format") != _DATASET_FORMAT:
        raise ValidationError(f"{path}: not a {_DATASET_FORMAT} file")
    shape = tuple(header["shape"])
    counts = np.frombuffer(blob[newline + 1 :], dtype="<i8")
    if counts.size != int(np.prod(shape)):
        raise ValidationError(
            f"{path}: expected {int(np.prod(shape))} counts, found {counts.size}"
        )
    g = header["grid"]
    grid = GridSpec(
        x1=g["x1"],
        dx=g["dx"],
        n_bins=g["n_bins"],
        phases=tuple(g["phases"]) if g["phases"] is not None else None,
        p1=g["p1"],
        dp=g["dp"],
    )
    dataset = Dataset(
        modality=header["modality"],
        counts=counts.reshape(shape).astype(np.int64),
        copies=int(header["copies"]),
        seed=int(header["seed"]),
    )
    return dataset, grid, int(header["dim"])


def dataset_to_csv(path, dataset: Dataset) -> None:
    """Export counts as rows of phase, bin_index, count (1-based indices)."""
    counts = dataset.counts if dataset.counts.ndim == 2 else dataset.counts[None, :]
    with open(path, "w", newline="") as fh:
        fh.write("phase,bin_index,count\n")
        for s, row in enumerate(counts, start=1):
            for i, value in enumerate(row, start=1):
                fh.write(f"{s},{i},{value}\n")
