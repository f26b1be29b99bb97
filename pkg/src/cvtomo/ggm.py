"""Generalized Gell-Mann basis and the Bloch parametrization it induces.

For dimension d the basis has d^2 - 1 traceless Hermitian matrices Omega_i
with Tr(Omega_i Omega_j) = 2 delta_ij, ordered as
  * d(d-1)/2 symmetric   |l><m| + |m><l|          for 0 <= l < m <= d-1,
  * d(d-1)/2 antisymmetric -i|l><m| + i|m><l|      same pair order,
  * d-1 diagonal sqrt(2/(l(l+1))) (sum_{m<l} |m><m| - l |l><l|)  for l >= 1.
Any density matrix decomposes as rho = I/d + sum_i t_i Omega_i with real
t_i = Tr(rho Omega_i)/2, and squared Frobenius distances reduce to
2 sum_i (Delta t_i)^2.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ValidationError
from .fock import DensityMatrix


@dataclass(frozen=True)
class GgmBasis:
    dim: int
    matrices: np.ndarray  # (dim^2 - 1, dim, dim), read-only

    @property
    def n_elements(self) -> int:
        return self.dim * self.dim - 1

    @property
    def n_offdiag(self) -> int:
        return self.dim * (self.dim - 1) // 2

    def symmetric(self) -> np.ndarray:
        return self.matrices[: self.n_offdiag]

    def antisymmetric(self) -> np.ndarray:
        return self.matrices[self.n_offdiag : 2 * self.n_offdiag]

    def diagonal(self) -> np.ndarray:
        return self.matrices[2 * self.n_offdiag :]


@lru_cache(maxsize=64)
def build_basis(d: int) -> GgmBasis:
    if not (2 <= d <= 64):
        raise ValidationError(f"basis dimension must be in [2, 64], got {d}")
    n_off = d * (d - 1) // 2
    mats = np.zeros((d * d - 1, d, d), dtype=np.complex128)
    k = 0
    for l in range(d):
        for m in range(l + 1, d):
            mats[k, l, m] = 1.0
            mats[k, m, l] = 1.0
            mats[n_off + k, l, m] = -1.0j
            mats[n_off + k, m, l] = 1.0j
            k += 1
    for l in range(1, d):
        w = np.sqrt(2.0 / (l * (l + 1)))
        mats[2 * n_off + l - 1, range(l), range(l)] = w
        mats[2 * n_off + l - 1, l, l] = -l * w
    mats.setflags(write=False)
    return GgmBasis(dim=d, matrices=mats)


@dataclass(frozen=True)
class BlochVector:
    dim: int
    t: np.ndarray  # (dim^2 - 1,), read-only

    def __post_init__(self):
        t = np.asarray(self.t, dtype=np.float64)
        if t.shape != (self.dim * self.dim - 1,):
            raise ValidationError(
                f"Bloch vector for dim {self.dim} needs {self.dim**2 - 1} entries, got shape {t.shape}"
            )
        if not np.all(np.isfinite(t)):
            raise ValidationError("Bloch vector contains non-finite entries")
        t = t.copy()
        t.setflags(write=False)
        object.__setattr__(self, "t", t)


def to_bloch(rho: DensityMatrix) -> BlochVector:
    """Coordinates t_i = Tr(rho Omega_i) / 2."""
    basis = build_basis(rho.dim)
    t = 0.5 * np.einsum("jnm,mn->j", basis.matrices, rho.matrix).real
    return BlochVector(dim=rho.dim, t=t)


def from_bloch(t: BlochVector) -> DensityMatrix:
    """Reassemble I/d + sum_i t_i Omega_i.

    The result is Hermitian with unit trace by construction but is NOT
    checked for positivity: arbitrary coordinates can leave the state space,
    and callers such as finite-difference probes rely on that.
    """
    basis = build_basis(t.dim)
    mat = np.tensordot(t.t, basis.matrices, axes=(0, 0))
    mat += np.eye(t.dim) / t.dim
    return DensityMatrix(mat, require_psd=False)


def frobenius_sq(a: DensityMatrix, b: DensityMatrix) -> float:
    """Squared Frobenius distance Tr[(a - b)^dag (a - b)]."""
    if a.dim != b.dim:
        raise ValidationError(f"dimension mismatch: {a.dim} vs {b.dim}")
    diff = a.matrix - b.matrix
    return float(np.sum(diff.real**2 + diff.imag**2))


def basis_expectations(vectors: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-row expectations <v|Omega_j|v> for every basis element.

    ``vectors`` has shape (M, d).  Returns ``(C, norm_sq)`` where C has shape
    (M, d^2 - 1) with columns ordered exactly as ``build_basis(d)`` and
    norm_sq holds <v|v>.  Exploits the sparsity of the basis: off-diagonal
    pairs reduce to 2 Re / 2 Im of conj(v_l) v_m and the diagonal elements to
    cumulative sums of |v_n|^2, which is much cheaper than dense contraction.
    """
    v = np.asarray(vectors, dtype=np.complex128)
    if v.ndim != 2:
        raise ValidationError(f"expected (M, d) vectors, got shape {v.shape}")
    d = v.shape[1]
    l_idx, m_idx = np.triu_indices(d, 1)
    cross = np.conj(v[:, l_idx]) * v[:, m_idx]
    abs2 = v.real**2 + v.imag**2
    csum = np.cumsum(abs2, axis=1)
    ls = np.arange(1, d)
    weights = np.sqrt(2.0 / (ls * (ls + 1)))
    diag = weights * (csum[:, :-1] - ls * abs2[:, 1:])
    c = np.concatenate([2.0 * cross.real, 2.0 * cross.imag, diag], axis=1)
    return c, csum[:, -1]
