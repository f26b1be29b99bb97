"""Classical Fisher information of binned quadrature measurements.

Both modalities share one structure: with Bloch coordinates t the binned
density at a measurement outcome is linear,
    f_i(t) = <xi_i| rho(t) |xi_i> = <xi_i|xi_i>/d + sum_j t_j C_ij,
where C_ij = <xi_i| Omega_j |xi_i> and |xi_i> is the truncated quadrature or
coherent projector vector of bin i.  The Fisher matrix of the multinomial
experiment is then a weighted normal-equations sum

    I_hom = K (dx / S) sum_{s,i} C_si C_si^T / f_si
    I_het = K (dx dp / pi) sum_i  C_i  C_i^T  / P_i,   P_i = <alpha_i|rho|alpha_i>

with the bin measure carried explicitly so the discrete sum converges to the
continuous-measurement information as the grid refines.  The diagonal weight
is applied as elementwise division; no dense inverse is ever formed.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import DegenerateBinError, IllConditionedError, ValidationError
from .fock import GridSpec, StateSpec, coherent_components, default_phases, hermite_functions, make_state
from .ggm import BlochVector, basis_expectations, to_bloch

PROBABILITY_FLOOR = 1e-300
CONDITION_LIMIT = 1e12

SWEEP_PHASE_COUNTS = (200, 300, 400, 500, 600)
SWEEP_X1 = (-2.5, -3.75, -5.0, -6.5, -7.5)
SWEEP_DX = (1.5, 1.0, 0.5, 0.1, 0.05)


@dataclass(frozen=True)
class CfiMatrix:
    """Fisher information matrix in the Bloch parametrization."""

    dim: int
    copies: float
    matrix: np.ndarray  # (dim^2 - 1, dim^2 - 1), symmetric PSD

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.shape != (self.dim**2 - 1, self.dim**2 - 1):
            raise ValidationError(
                f"CFI for dim {self.dim} must be {self.dim**2 - 1} square, got {m.shape}"
            )
        if not np.all(np.isfinite(m)):
            raise ValidationError("CFI matrix contains non-finite entries")
        scale = np.abs(m).max()
        sym_defect = np.abs(m - m.T).max()
        if sym_defect > 1e-10 * max(scale, 1.0):
            raise ValidationError(f"CFI matrix asymmetric by {sym_defect:.3e}")
        m = 0.5 * (m + m.T)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)


def _information_sum(c: np.ndarray, p: np.ndarray, labels) -> np.ndarray:
    """Accumulate C^T diag(1/p) C, rejecting (near-)zero weights.

    ``labels(flat_index)`` renders an offending bin for the error message.
    """
    bad = np.flatnonzero(p < PROBABILITY_FLOOR)
    if bad.size:
        shown = ", ".join(labels(int(i)) for i in bad[:5])
        more = f" (+{bad.size - 5} more)" if bad.size > 5 else ""
        raise DegenerateBinError(
            f"binned probability below {PROBABILITY_FLOOR:g} at {shown}{more}; "
            "shrink the grid span or mix the state away from purity"
        )
    return (c / p[:, None]).T @ c


def homodyne_cfi(t: BlochVector, grid: GridSpec, copies: float) -> CfiMatrix:
    """Fisher information of phase-binned homodyne sampling.

    ``grid.phases`` carries the S local-oscillator settings; each receives
    ``copies / S`` of the budget.
    """
    if grid.phases is None:
        raise ValidationError("homodyne CFI needs a grid with phases")
    if copies <= 0:
        raise ValidationError(f"copies must be positive, got {copies}")
    d = t.dim
    n_params = d * d - 1
    xs = grid.x_centers
    psi = hermite_functions(xs, d - 1).T  # (N, d)
    modes = np.arange(d)
    n_bins = len(xs)
    info = np.zeros((n_params, n_params))
    chunk = max(1, 65536 // n_bins)
    phases = np.asarray(grid.phases)
    for start in range(0, len(phases), chunk):
        block = phases[start : start + chunk]
        factors = np.exp(1j * np.outer(block, modes))  # (B, d)
        vecs = (factors[:, None, :] * psi[None, :, :]).reshape(-1, d)
        c, norm_sq = basis_expectations(vecs)
        p = norm_sq / d + c @ t.t

        def _label(i, offset=start):
            return f"(phase {offset + i // n_bins}, bin {i % n_bins})"

        info += _information_sum(c, p, _label)
    info *= copies * grid.dx / len(phases)
    return CfiMatrix(dim=d, copies=float(copies), matrix=info)


def heterodyne_cfi(t: BlochVector, grid: GridSpec, copies: float) -> CfiMatrix:
    """Fisher information of double-quadrature sampling on the 2-D grid.

    Bins are flattened row-major: flat index i = a * N + b addresses
    (x_a, p_b).  The density weight is P_i = <alpha_i| rho |alpha_i>, i.e.
    pi times the Husimi Q value, and the measure dx dp / pi restores the
    continuous normalization.
    """
    if grid.p1 is None:
        raise ValidationError("heterodyne CFI needs a grid with a p axis")
    if copies <= 0:
        raise ValidationError(f"copies must be positive, got {copies}")
    d = t.dim
    n_params = d * d - 1
    x_flat, p_flat = grid.quadrature_points()
    alphas = x_flat + 1j * p_flat
    info = np.zeros((n_params, n_params))
    chunk = 16384
    n_bins = grid.n_bins
    for start in range(0, alphas.size, chunk):
        vecs = coherent_components(d, alphas[start : start + chunk]).T
        c, norm_sq = basis_expectations(vecs)
        p = norm_sq / d + c @ t.t

        def _label(i, offset=start):
            flat = offset + i
            return f"(x bin {flat // n_bins}, p bin {flat % n_bins})"

        info += _information_sum(c, p, _label)
    info *= copies * grid.dx * grid.dp / math.pi
    return CfiMatrix(dim=d, copies=float(copies), matrix=info)


def crlb_frobenius(cfi: CfiMatrix) -> float:
    """Scalar bound 2 Tr I^{-1} on the expected squared Frobenius error.

    The trace is obtained from a Cholesky factorization solved against each
    basis column.  Matrices with condition number at or above 1e12 are
    rejected; pure ground truths routinely land there.
    """
    m = cfi.matrix
    evals = np.linalg.eigvalsh(m)
    if not np.all(np.isfinite(evals)) or evals[0] <= 0.0:
        raise IllConditionedError(
            f"CFI matrix is not positive definite (min eigenvalue {evals[0]:.3e})"
        )
    cond = float(evals[-1] / evals[0])
    if cond >= CONDITION_LIMIT:
        raise IllConditionedError(
            f"CFI condition number {cond:.3e} exceeds {CONDITION_LIMIT:g}"
        )
    factor = cho_factor(m, lower=False, check_finite=False)
    inverse_cols = cho_solve(factor, np.eye(m.shape[0]), check_finite=False)
    return 2.0 * float(np.trace(inverse_cols))


@dataclass(frozen=True)
class ConvergenceReport:
    """Grid-refinement study of Tr I^{-1} over (S, x1, dx).

    ``trace_inv`` is indexed [S, x1, dx] in the order of the value tuples.
    A point is ``eligible`` when all its refinement neighbors (more phases,
    wider span, finer step; every combination) exist and deviate by less
    than the threshold.  ``selected`` is the first eligible point in sweep
    order, if any.
    """

    modality: str
    s_values: tuple[int, ...]
    x1_values: tuple[float, ...]
    dx_values: tuple[float, ...]
    trace_inv: np.ndarray
    max_neighbor_pct: np.ndarray
    eligible: np.ndarray
    selected: tuple[int, int, int] | None
    converged: bool
    value: float | None
    threshold_pct: float


def _sweep_bins(x1: float, dx: float) -> int:
    # Choose N so the last center sits closest to -x1 (symmetric span).
    return int(round(-2.0 * x1 / dx)) + 1


def convergence_sweep(
    spec: StateSpec,
    modality: str,
    copies: float = 1.0,
    *,
    s_values: tuple[int, ...] = SWEEP_PHASE_COUNTS,
    x1_values: tuple[float, ...] = SWEEP_X1,
    dx_values: tuple[float, ...] = SWEEP_DX,
    threshold_pct: float = 2.0,
) -> ConvergenceReport:
    """Evaluate Tr I^{-1} across the refinement lattice and find convergence.

    Heterodyne has no phase axis, so ``s_values`` collapses to a single
    placeholder entry and each point has three neighbors instead of seven.

    The quantity under study is the information of the truncated model
    itself, so the state is built without the truncation gate; small-d
    sweeps of states with heavier tails are deliberate use, not error.
    """
    if modality not in ("hom", "het"):
        raise ValidationError(f"modality must be 'hom' or 'het', got {modality!r}")
    x1_values = tuple(float(v) for v in x1_values)
    dx_values = tuple(float(v) for v in dx_values)
    if any(v >= 0 for v in x1_values):
        raise ValidationError("sweep x1 values must be negative (grids straddle 0)")
    t = to_bloch(make_state(spec, max_truncation_error=1.0))
    s_axis = tuple(int(s) for s in s_values) if modality == "hom" else (1,)
    shape = (len(s_axis), len(x1_values), len(dx_values))
    trace_inv = np.empty(shape)
    for j, x1 in enumerate(x1_values):
        for k, dx in enumerate(dx_values):
            n_bins = _sweep_bins(x1, dx)
            if modality == "hom":
                for i, s in enumerate(s_axis):
                    grid = GridSpec(x1=x1, dx=dx, n_bins=n_bins, phases=default_phases(s))
                    cfi = homodyne_cfi(t, grid, copies)
                    trace_inv[i, j, k] = _trace_inverse(cfi, (s, x1, dx))
            else:
                grid = GridSpec(x1=x1, dx=dx, n_bins=n_bins, p1=x1, dp=dx)
                cfi = heterodyne_cfi(t, grid, copies)
                trace_inv[0, j, k] = _trace_inverse(cfi, (1, x1, dx))

    offsets = [
        off
        for off in itertools.product((0, 1), repeat=3)
        if off != (0, 0, 0) and not (modality == "het" and off[0] == 1)
    ]
    max_pct = np.full(shape, np.nan)
    eligible = np.zeros(shape, dtype=bool)
    for idx in np.ndindex(shape):
        here = trace_inv[idx]
        errs = []
        complete = True
        for off in offsets:
            nbr = tuple(a + b for a, b in zip(idx, off))
            if any(n >= s for n, s in zip(nbr, shape)):
                complete = False
                continue
            errs.append(100.0 * abs(trace_inv[nbr] - here) / abs(here))
        if errs:
            max_pct[idx] = max(errs)
        eligible[idx] = complete and bool(errs) and max(errs) < threshold_pct

    selected = None
    for idx in np.ndindex(shape):
        if eligible[idx]:
            selected = idx
            break
    return ConvergenceReport(
        modality=modality,
        s_values=s_axis,
        x1_values=x1_values,
        dx_values=dx_values,
        trace_inv=trace_inv,
        max_neighbor_pct=max_pct,
        eligible=eligible,
        selected=selected,
        converged=selected is not None,
        value=float(trace_inv[selected]) if selected is not None else None,
        threshold_pct=threshold_pct,
    )


def _trace_inverse(cfi: CfiMatrix, point) -> float:
    try:
        return 0.5 * crlb_frobenius(cfi)
    except (DegenerateBinError, IllConditionedError) as exc:
        raise type(exc)(f"at sweep point (S={point[0]}, x1={point[1]}, dx={point[2]}): {exc}")


def report_to_csv(report: ConvergenceReport, path) -> None:
    """Write the sweep as rows of S, x1, dx, trace_inv_cfi, max_neighbor_pct_err, converged."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["S", "x1", "dx", "trace_inv_cfi", "max_neighbor_pct_err", "converged"])
        for idx in np.ndindex(report.trace_inv.shape):
            i, j, k = idx
            pct = report.max_neighbor_pct[idx]
            writer.writerow(
                [
                    report.s_values[i],
                    f"{report.x1_values[j]:.12g}",
                    f"{report.dx_values[k]:.12g}",
                    f"{report.trace_inv[idx]:.12g}",
                    "" if math.isnan(pct) else f"{pct:.12g}",
                    "true" if report.eligible[idx] else "false",
                ]
            )
