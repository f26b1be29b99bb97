"""Maximum-likelihood state reconstruction from binned count data.

The estimator is the fixed-point iteration rho <- R rho R / Tr(R rho R) with
R = sum_j (n_j / Tr(rho Pi_j)) Pi_j over observed bins, which preserves
positivity and (generically) drives the multinomial log-likelihood upward.
When a step decreases the likelihood the update is retried with the diluted
map rho <- N[(I + eps R) rho (I + eps R)], halving eps until the step is
non-decreasing.

POVM elements are rank one, Pi_j = w |xi_j><xi_j| with a uniform bin-measure
weight w, so the set is stored factored as vectors plus a weight; the dense
matrices are materialized on demand.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import NoSignalError, NumericalError, ValidationError
from .fock import DensityMatrix, GridSpec, coherent_components, quadrature_components
from .sim import Dataset


@dataclass(frozen=True)
class PovmSet:
    """Rank-one POVM of a binned measurement, stored factored.

    ``vectors[j]`` holds the truncated components <n|xi_j> of outcome j and
    every element is Pi_j = weight * |xi_j><xi_j|.
    """

    dim: int
    modality: str
    vectors: np.ndarray  # (n_elements, dim)
    weight: float
    n_phases: int

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=np.complex128)
        if v.ndim != 2 or v.shape[1] != self.dim:
            raise ValidationError(f"vectors must be (n_elements, {self.dim}), got {v.shape}")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "vectors", v)

    @property
    def n_elements(self) -> int:
        return self.vectors.shape[0]

    @cached_property
    def elements(self) -> np.ndarray:
        """Dense (n_elements, dim, dim) PSD matrices; built lazily."""
        return self.weight * np.einsum("ja,jb->jab", self.vectors, self.vectors.conj())

    def probabilities(self, rho) -> np.ndarray:
        """Tr(rho Pi_j) for every element."""
        mat = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)
        return self.weight * _quadratic_forms(self.vectors, mat)

    def completeness_defect(self) -> float:
        """Frobenius distance of sum_j Pi_j from n_phases * identity.

        Small on grids that cover the state's support; purely diagnostic.
        """
        g = self.weight * (self.vectors.T @ self.vectors.conj())
        return float(np.linalg.norm(g / self.n_phases - np.eye(self.dim)))


def _quadratic_forms(vectors: np.ndarray, mat: np.ndarray) -> np.ndarray:
    return np.einsum("jd,jd->j", vectors.conj() @ mat, vectors).real


def build_povm(modality: str, grid: GridSpec, dim: int) -> PovmSet:
    """POVM matching :func:`cvtomo.sim.bin_distribution` on the same grid.

    Homodyne: one element dx |x_theta><x_theta| per (phase, bin), ordered
    phase-major.  Heterodyne: (dx dp / pi) |alpha><alpha| over the flattened
    2-D grid.  Probabilities Tr(rho Pi_j) reproduce the binned distribution
    up to its leak renormalization.
    """
    if dim < 2:
        raise ValidationError(f"dim must be >= 2, got {dim}")
    if modality == "hom":
        if grid.phases is None:
            raise ValidationError("homodyne POVM needs a grid with phases")
        xs = grid.x_centers
        vecs = np.concatenate(
            [quadrature_components(dim, xs, theta).T for theta in grid.phases]
        )
        return PovmSet(
            dim=dim,
            modality="hom",
            vectors=vecs,
            weight=grid.dx,
            n_phases=grid.n_phases,
        )
    if modality == "het":
        if grid.p1 is None:
            raise ValidationError("heterodyne POVM needs a grid with a p axis")
        x_flat, p_flat = grid.quadrature_points()
        vecs = coherent_components(dim, x_flat + 1j * p_flat).T
        return PovmSet(
            dim=dim,
            modality="het",
            vectors=vecs,
            weight=grid.dx * grid.dp / math.pi,
            n_phases=1,
        )
    raise ValidationError(f"modality must be 'hom' or 'het', got {modality!r}")


@dataclass(frozen=True)
class MleConfig:
    max_iters: int = 5000
    ll_tol: float = 1e-10
    dilution: float = 1.0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValidationError(f"max_iters must be >= 1, got {self.max_iters}")
        if not (self.ll_tol > 0):
            raise ValidationError(f"ll_tol must be positive, got {self.ll_tol}")
        if not (0.0 < self.dilution <= 1.0):
            raise ValidationError(f"dilution must be in (0, 1], got {self.dilution}")


@dataclass(frozen=True)
class MleResult:
    rho_hat: DensityMatrix
    iterations: int
    converged: bool
    final_ll: float
    ll_trace: np.ndarray


def _counts_array(data, povm: PovmSet) -> np.ndarray:
    counts = data.counts if isinstance(data, Dataset) else np.asarray(data)
    flat = np.asarray(counts, dtype=np.float64).ravel()
    if flat.size != povm.n_elements:
        raise ValidationError(
            f"dataset has {flat.size} bins but the POVM has {povm.n_elements} elements"
        )
    if np.any(flat < 0) or not np.all(np.isfinite(flat)):
        raise ValidationError("counts must be finite and nonnegative")
    return flat


def log_likelihood(rho, data, povm: PovmSet) -> float:
    """Multinomial log-likelihood sum_j n_j ln Tr(rho Pi_j) over observed bins.

    Bin-measure factors stay inside the probabilities, so values match the
    POVM literally (they shift the likelihood by a constant).  Returns -inf
    if any observed bin has nonpositive predicted probability; an empty
    dataset scores 0.
    """
    counts = _counts_array(data, povm)
    mask = counts > 0
    if not mask.any():
        return 0.0
    p = povm.probabilities(rho)[mask]
    if np.any(p <= 0.0):
        return -math.inf
    return float(counts[mask] @ np.log(p))


def reconstruct(data, povm: PovmSet, config: MleConfig | None = None, *, initial=None) -> MleResult:
    """Iterate the fixed-point map from the maximally mixed state.

    ``data`` may be a Dataset or a bare counts array (floats allowed, e.g.
    noise-free expected counts).  ``initial`` overrides the I/d starting
    point.  Stops when the relative log-likelihood change drops below
    ``config.ll_tol`` or after ``config.max_iters`` iterations (in which
    case ``converged`` is False).
    """
    config = config or MleConfig()
    counts = _counts_array(data, povm)
    if counts.sum() == 0:
        raise NoSignalError("dataset holds no counts; nothing to reconstruct")
    mask = counts > 0
    n = counts[mask]
    vecs = povm.vectors[mask]
    d = povm.dim
    eye = np.eye(d, dtype=np.complex128)

    if initial is None:
        rho = eye / d
    else:
        rho = np.array(initial.matrix if isinstance(initial, DensityMatrix) else initial,
                       dtype=np.complex128)

    def predicted(r):
        return povm.weight * _quadratic_forms(vecs, r)

    def ll_of(p):
        if np.any(p <= 0.0):
            return -math.inf
        return float(n @ np.log(p))

    p = predicted(rho)
    ll = ll_of(p)
    trace = [ll]
    converged = False
    iterations = 0
    for iterations in range(1, config.max_iters + 1):
        ratios = n / np.maximum(p, 1e-300)
        r_op = povm.weight * ((vecs * ratios[:, None]).T @ vecs.conj())
        r_op = 0.5 * (r_op + r_op.conj().T)
        candidate = _normalize(r_op @ rho @ r_op)
        p_new = predicted(candidate)
        ll_new = ll_of(p_new)
        tolerance = 1e-12 * max(1.0, abs(ll))
        if ll_new < ll - tolerance:
            eps = config.dilution
            while True:
                step = eye + eps * r_op
                candidate = _normalize(step @ rho @ step)
                p_new = predicted(candidate)
                ll_new = ll_of(p_new)
                if ll_new >= ll - tolerance:
                    break
                eps *= 0.5
                if eps < 1e-15:
                    candidate, p_new, ll_new = rho, p, ll
                    break
        rho, p = candidate, p_new
        trace.append(ll_new)
        if abs(ll_new - ll) <= config.ll_tol * max(1.0, abs(ll)):
            ll = ll_new
            converged = True
            break
        ll = ll_new

    return MleResult(
        rho_hat=DensityMatrix(rho),
        iterations=iterations,
        converged=converged,
        final_ll=ll,
        ll_trace=np.asarray(trace),
    )


def _normalize(mat: np.ndarray) -> np.ndarray:
    mat = 0.5 * (mat + mat.conj().T)
    tr = mat.trace().real
    if not (tr > 0.0) or not np.isfinite(tr):
        raise NumericalError(f"iteration produced trace {tr}; cannot renormalize")
    return mat / tr


def result_to_json(result: MleResult) -> str:
    """Serialize with rho_hat as a row-major list of interleaved re, im pairs."""
    m = result.rho_hat.matrix
    interleaved = np.empty(2 * m.size)
    interleaved[0::2] = m.real.ravel()
    interleaved[1::2] = m.imag.ravel()
    return json.dumps(
        {
            "dim": result.rho_hat.dim,
            "iterations": result.iterations,
            "converged": result.converged,
            "final_ll": result.final_ll,
            "ll_trace": [float(v) for v in result.ll_trace],
            "rho_hat": interleaved.tolist(),
        },
        sort_keys=True,
    )


def result_from_json(text: str) -> MleResult:
    payload = json.loads(text)
    d = int(payload["dim"])
    flat = np.asarray(payload["rho_hat"], dtype=np.float64)
    if flat.size != 2 * d * d:
        raise ValidationError(f"rho_hat needs {2 * d * d} numbers for dim {d}, got {flat.size}")
    mat = (flat[0::2] + 1j * flat[1::2]).reshape(d, d)
    return MleResult(
        rho_hat=DensityMatrix(mat),
        iterations=int(payload["iterations"]),
        converged=bool(payload["converged"]),
        final_ll=float(payload["final_ll"]),
        ll_trace=np.asarray(payload.get("ll_trace", []), dtype=np.float64),
    )
