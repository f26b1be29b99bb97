"""Truncated Fock-basis states and their phase-space distributions.

Everything here lives in the number basis |0>, ..., |n_c> with hbar = 1 and
quadrature convention x = (a + a^dag)/sqrt(2), so the vacuum homodyne
distribution is a normal with variance 1/2.  Probability densities are
evaluated through overlap vectors built with stable recurrences; no
factorials are formed directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import eval_genlaguerre, gammaln

from .errors import TruncationBoundError, ValidationError

_PI_QUARTER = math.pi ** -0.25

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
EIGENVALUE_FLOOR = -1e-10

STATE_KINDS = (
    "thermal",
    "coherent",
    "squeezed_vacuum",
    "fock",
    "superposition",
    "random_mixed",
)


class DensityMatrix:
    """Validated density matrix in the truncated Fock basis.

    The wrapped array is Hermitian within 1e-12 elementwise, has unit trace
    within 1e-12, and (unless ``require_psd=False``) no eigenvalue below
    -1e-10.  The array is frozen after validation so instances can be shared
    across threads.
    """

    __slots__ = ("matrix",)

    def __init__(self, matrix, *, require_psd: bool = True):
        m = np.array(matrix, dtype=np.complex128)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValidationError(f"density matrix must be square, got shape {m.shape}")
        if m.shape[0] < 1:
            raise ValidationError("density matrix must have dimension >= 1")
        if not np.all(np.isfinite(m.view(np.float64))):
            raise ValidationError("density matrix contains non-finite entries")
        herm_defect = np.abs(m - m.conj().T).max()
        if herm_defect >= HERMITIAN_TOL:
            raise ValidationError(
                f"density matrix is not Hermitian: max |rho - rho^dag| = {herm_defect:.3e}"
            )
        trace_defect = abs(m.trace() - 1.0)
        if trace_defect >= TRACE_TOL:
            raise ValidationError(
                f"density matrix trace differs from 1 by {trace_defect:.3e}"
            )
        if require_psd:
            smallest = float(np.linalg.eigvalsh(m)[0])
            if smallest < EIGENVALUE_FLOOR:
                raise ValidationError(
                    f"density matrix has eigenvalue {smallest:.3e} below {EIGENVALUE_FLOOR:g}"
                )
        m.setflags(write=False)
        self.matrix = m

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def is_psd(self, tol: float = -EIGENVALUE_FLOOR) -> bool:
        return float(np.linalg.eigvalsh(self.matrix)[0]) >= -tol

    def __repr__(self) -> str:  # pragma: no cover
        return f"DensityMatrix(dim={self.dim}, purity={purity(self):.6f})"


def purity(rho: DensityMatrix) -> float:
    """Tr rho^2, computed as the squared Frobenius norm of a Hermitian matrix."""
    m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)
    return float(np.sum(m.real**2 + m.imag**2))


@dataclass(frozen=True)
class GridSpec:
    """Uniform measurement grid of bin centers.

    ``x1`` is the first bin center and ``x_i = x1 + (i - 1) dx``.  Homodyne
    grids carry the local-oscillator ``phases``; heterodyne grids carry a
    second axis ``(p1, dp)`` with the same number of bins per axis.
    """

    x1: float
    dx: float
    n_bins: int
    phases: tuple[float, ...] | None = None
    p1: float | None = None
    dp: float | None = None

    def __post_init__(self):
        if not (self.dx > 0):
            raise ValidationError(f"dx must be positive, got {self.dx}")
        if self.n_bins < 2:
            raise ValidationError(f"need at least 2 bins, got {self.n_bins}")
        if self.phases is not None:
            ph = tuple(float(t) for t in self.phases)
            if len(ph) == 0:
                raise ValidationError("phase list must not be empty")
            if any(not (0.0 <= t < 2 * math.pi) for t in ph):
                raise ValidationError("phases must lie in [0, 2*pi)")
            if len(set(ph)) != len(ph):
                raise ValidationError("phases must be distinct")
            object.__setattr__(self, "phases", ph)
        if (self.p1 is None) != (self.dp is None):
            raise ValidationError("p1 and dp must be given together")
        if self.dp is not None and not (self.dp > 0):
            raise ValidationError(f"dp must be positive, got {self.dp}")

    @property
    def n_phases(self) -> int:
        if self.phases is None:
            raise ValidationError("grid has no phase axis")
        return len(self.phases)

    @property
    def x_centers(self) -> np.ndarray:
        return self.x1 + self.dx * np.arange(self.n_bins)

    @property
    def p_centers(self) -> np.ndarray:
        if self.p1 is None:
            raise ValidationError("grid has no p axis")
        return self.p1 + self.dp * np.arange(self.n_bins)

    def quadrature_points(self) -> tuple[np.ndarray, np.ndarray]:
        """Flattened (x, p) pairs of the 2-D grid, x varying slowest."""
        xg, pg = np.meshgrid(self.x_centers, self.p_centers, indexing="ij")
        return xg.ravel(), pg.ravel()


def default_phases(n: int) -> tuple[float, ...]:
    return tuple(2.0 * math.pi * k / n for k in range(n))


def default_homodyne_grid(n_phases: int = 100) -> GridSpec:
    """Benchmark homodyne grid: 200 bins from -10 with step 0.1005."""
    return GridSpec(x1=-10.0, dx=0.1005, n_bins=200, phases=default_phases(n_phases))


def default_heterodyne_grid() -> GridSpec:
    """Benchmark heterodyne grid: 200 x 200 bins from -10 with step 0.1005."""
    return GridSpec(x1=-10.0, dx=0.1005, n_bins=200, p1=-10.0, dp=0.1005)


@dataclass(frozen=True)
class StateSpec:
    """Declarative description of a benchmark state at cutoff ``n_c``.

    ``kind`` selects the family; only the fields that family uses may be set.
    ``coeffs`` are Fock amplitudes starting at |0> and must have unit 2-norm.
    """

    kind: str
    n_c: int
    lam: float | None = None
    alpha: complex | None = None
    r: float | None = None
    n: int | None = None
    coeffs: tuple[complex, ...] | None = None
    purity_low: float | None = None
    purity_high: float | None = None
    seed: int | None = None

    _FIELDS_BY_KIND = {
        "thermal": ("lam",),
        "coherent": ("alpha",),
        "squeezed_vacuum": ("r",),
        "fock": ("n",),
        "superposition": ("coeffs",),
        "random_mixed": ("purity_low", "purity_high", "seed"),
    }

    def __post_init__(self):
        if self.kind not in STATE_KINDS:
            raise ValidationError(f"unknown state kind {self.kind!r}; choose from {STATE_KINDS}")
        if not (0 <= self.n_c <= 63):
            raise ValidationError(f"n_c must be in [0, 63], got {self.n_c}")
        allowed = self._FIELDS_BY_KIND[self.kind]
        for name in ("lam", "alpha", "r", "n", "coeffs", "purity_low", "purity_high", "seed"):
            if name not in allowed and getattr(self, name) is not None:
                raise ValidationError(f"state kind {self.kind!r} does not use field {name!r}")
        if self.kind == "thermal":
            self._require("lam")
            if not (0.0 <= abs(self.lam) < 1.0):
                raise ValidationError(f"thermal parameter must satisfy 0 <= |lambda| < 1, got {self.lam}")
        elif self.kind == "coherent":
            self._require("alpha")
            object.__setattr__(self, "alpha", complex(self.alpha))
        elif self.kind == "squeezed_vacuum":
            self._require("r")
            if self.r < 0:
                raise ValidationError(f"squeezing parameter must be >= 0, got {self.r}")
        elif self.kind == "fock":
            self._require("n")
            if not (0 <= self.n <= self.n_c):
                raise ValidationError(f"fock index must be in [0, n_c={self.n_c}], got {self.n}")
        elif self.kind == "superposition":
            self._require("coeffs")
            c = tuple(complex(v) for v in self.coeffs)
            if not (1 <= len(c) <= self.n_c + 1):
                raise ValidationError(
                    f"need between 1 and n_c+1={self.n_c + 1} coefficients, got {len(c)}"
                )
            norm = math.sqrt(sum(abs(v) ** 2 for v in c))
            if abs(norm - 1.0) > 1e-6:
                raise ValidationError(
                    f"superposition coefficients must have unit 2-norm, got {norm:.8f}"
                )
            object.__setattr__(self, "coeffs", c)
        elif self.kind == "random_mixed":
            self._require("purity_low")
            self._require("purity_high")
            self._require("seed")
            if not (0.0 < self.purity_low < self.purity_high <= 1.0):
                raise ValidationError(
                    f"need 0 < purity_low < purity_high <= 1, got ({self.purity_low}, {self.purity_high})"
                )

    def _require(self, name: str) -> None:
        if getattr(self, name) is None:
            raise ValidationError(f"state kind {self.kind!r} requires field {name!r}")

    @property
    def dim(self) -> int:
        return self.n_c + 1

    # Convenience constructors for the canonical families.
    @classmethod
    def thermal(cls, lam: float, n_c: int = 10) -> "StateSpec":
        return cls(kind="thermal", n_c=n_c, lam=lam)

    @classmethod
    def coherent(cls, alpha: complex, n_c: int = 10) -> "StateSpec":
        return cls(kind="coherent", n_c=n_c, alpha=alpha)

    @classmethod
    def squeezed_vacuum(cls, r: float, n_c: int = 10) -> "StateSpec":
        return cls(kind="squeezed_vacuum", n_c=n_c, r=r)

    @classmethod
    def fock(cls, n: int, n_c: int = 10) -> "StateSpec":
        return cls(kind="fock", n_c=n_c, n=n)

    @classmethod
    def superposition(cls, coeffs, n_c: int = 10) -> "StateSpec":
        return cls(kind="superposition", n_c=n_c, coeffs=tuple(coeffs))

    @classmethod
    def random_mixed(cls, purity_low: float, purity_high: float, seed: int, n_c: int = 10) -> "StateSpec":
        return cls(
            kind="random_mixed",
            n_c=n_c,
            purity_low=purity_low,
            purity_high=purity_high,
            seed=seed,
        )


def hermite_functions(x, n_max: int) -> np.ndarray:
    """Normalized Hermite functions psi_0..psi_n_max evaluated at x.

    Uses the two-term recurrence
        psi_n(x) = sqrt(2/n) x psi_{n-1}(x) - sqrt((n-1)/n) psi_{n-2}(x)
    starting from psi_0(x) = pi^{-1/4} exp(-x^2/2), which keeps every
    intermediate bounded (no Hermite polynomial or factorial overflow).

    Returns an array of shape ``(n_max + 1,) + shape(x)``.
    """
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValidationError("hermite_functions requires finite x")
    if n_max < 0:
        raise ValidationError(f"n_max must be >= 0, got {n_max}")
    out = np.empty((n_max + 1,) + x.shape, dtype=np.float64)
    out[0] = _PI_QUARTER * np.exp(-0.5 * x * x)
    if n_max >= 1:
        out[1] = math.sqrt(2.0) * x * out[0]
    for n in range(2, n_max + 1):
        out[n] = math.sqrt(2.0 / n) * x * out[n - 1] - math.sqrt((n - 1) / n) * out[n - 2]
    return out


def quadrature_components(dim: int, x, theta: float) -> np.ndarray:
    """Overlaps <n|x_theta> for n < dim; shape ``(dim,) + shape(x)``."""
    psi = hermite_functions(x, dim - 1)
    phase = np.exp(1j * theta * np.arange(dim))
    return phase.reshape((dim,) + (1,) * (psi.ndim - 1)) * psi


def quadrature_overlap(n: int, x: float, theta: float) -> complex:
    """Single overlap <n|x_theta> = e^{i n theta} psi_n(x)."""
    if n < 0:
        raise ValidationError(f"n must be >= 0, got {n}")
    psi = hermite_functions(x, n)[n]
    return complex(np.exp(1j * n * theta) * psi)


def coherent_components(dim: int, alpha) -> np.ndarray:
    """Overlaps <n|alpha> for n < dim via c_{n+1} = c_n alpha / sqrt(n+1).

    ``alpha`` may be a scalar or array; the result has shape
    ``(dim,) + shape(alpha)``.
    """
    a = np.asarray(alpha, dtype=np.complex128)
    out = np.empty((dim,) + a.shape, dtype=np.complex128)
    out[0] = np.exp(-0.5 * (a.real**2 + a.imag**2))
    for n in range(1, dim):
        out[n] = out[n - 1] * a / math.sqrt(n)
    return out


def coherent_overlap(n: int, alpha: complex) -> complex:
    """Single overlap <n|alpha> = e^{-|alpha|^2/2} alpha^n / sqrt(n!)."""
    if n < 0:
        raise ValidationError(f"n must be >= 0, got {n}")
    c = complex(np.exp(-0.5 * abs(alpha) ** 2))
    for k in range(1, n + 1):
        c *= alpha / math.sqrt(k)
    return c


def _quadratic_form(vectors: np.ndarray, rho: np.ndarray) -> np.ndarray:
    # vectors has shape (dim, ...); returns Re <v|rho|v> per trailing point.
    rv = np.tensordot(rho, vectors, axes=(1, 0))
    return np.einsum("n...,n...->...", vectors.conj(), rv).real


def homodyne_pdf(rho: DensityMatrix, theta: float, x):
    """Homodyne quadrature density <x_theta| rho |x_theta>.

    For the vacuum this is a normal density with variance 1/2.  Values are
    clamped at zero; rounding can otherwise produce entries around -1e-17.
    """
    v = quadrature_components(rho.dim, x, theta)
    f = np.clip(_quadratic_form(v, rho.matrix), 0.0, None)
    return float(f) if f.ndim == 0 else f


def heterodyne_pdf(rho: DensityMatrix, x, p):
    """Heterodyne density (1/pi) <alpha| rho |alpha> at alpha = x + i p.

    This is the Husimi Q function of the truncated state; it integrates to
    one over the plane.
    """
    x = np.asarray(x, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    a = x + 1j * p
    v = coherent_components(rho.dim, a)
    q = np.clip(_quadratic_form(v, rho.matrix) / math.pi, 0.0, None)
    return float(q) if q.ndim == 0 else q


def wigner(rho: DensityMatrix, x, p):
    """Wigner function W(x, p) of a truncated-basis state.

    Evaluated with the closed-form Fock kernel: for m >= n the matrix unit
    |m><n| contributes
        (1/pi) (-1)^n sqrt(2^{m-n} n!/m!) (x + i p)^{m-n}
            e^{-(x^2+p^2)} L_n^{(m-n)}(2 x^2 + 2 p^2)
    and the m < n part follows from Hermiticity.  Normalized so the vacuum
    gives e^{-(x^2+p^2)} / pi and the integral over the plane is one.
    """
    x = np.asarray(x, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    x, p = np.broadcast_arrays(x, p)
    d = rho.dim
    m = rho.matrix
    r2 = x * x + p * p
    envelope = np.exp(-r2) / math.pi
    arg = 2.0 * r2
    w = np.zeros_like(r2)
    for n in range(d):
        w += ((-1.0) ** n) * m[n, n].real * eval_genlaguerre(n, 0, arg)
    z = x + 1j * p
    zk = np.ones_like(z)
    for k in range(1, d):
        zk = zk * z
        for n in range(d - k):
            mm = n + k
            if m[mm, n] == 0:
                continue
            coeff = math.exp(0.5 * (k * math.log(2.0) + gammaln(n + 1) - gammaln(mm + 1)))
            w += (
                2.0
                * ((-1.0) ** n)
                * coeff
                * (m[mm, n] * zk).real
                * eval_genlaguerre(n, k, arg)
            )
    w = w * envelope
    return float(w) if w.ndim == 0 else w


def truncation_error(spec: StateSpec) -> float | None:
    """Population the untruncated state carries above n_c, where defined.

    Returns 0.0 for states that live exactly below the cutoff and ``None``
    for ``random_mixed`` (which is constructed inside the truncated space).
    """
    if spec.kind == "thermal":
        return abs(spec.lam) ** (2 * (spec.n_c + 1))
    if spec.kind == "coherent":
        c = coherent_components(spec.n_c + 1, spec.alpha)
        return max(0.0, 1.0 - float(np.sum(np.abs(c) ** 2)))
    if spec.kind == "squeezed_vacuum":
        amps = _squeezed_even_amplitudes(spec.r, spec.n_c)
        return max(0.0, 1.0 - float(np.sum(amps**2)))
    if spec.kind in ("fock", "superposition"):
        return 0.0
    return None


def _squeezed_even_amplitudes(r: float, n_c: int) -> np.ndarray:
    # c_{2n} = (-1)^n sqrt((2n)!) / (2^n n!) tanh^n(r) / sqrt(cosh r),
    # built by the ratio c_{2n+2}/c_{2n} = -tanh(r) sqrt((2n+1)(2n+2))/(2n+2).
    n_even = n_c // 2 + 1
    amps = np.empty(n_even, dtype=np.float64)
    amps[0] = 1.0 / math.sqrt(math.cosh(r))
    th = math.tanh(r)
    for n in range(1, n_even):
        amps[n] = -amps[n - 1] * th * math.sqrt((2 * n - 1) * (2 * n)) / (2 * n)
    return amps


def make_state(spec: StateSpec, *, max_truncation_error: float = 1e-2) -> DensityMatrix:
    """Build the density matrix described by ``spec`` at its cutoff.

    States with support above the cutoff are truncated and renormalized; the
    discarded population must stay below ``max_truncation_error`` or a
    ``TruncationBoundError`` identifies the offending parameter.
    """
    d = spec.n_c + 1
    if spec.kind == "thermal":
        eps = truncation_error(spec)
        _check_truncation(eps, max_truncation_error, spec, "lambda")
        weights = (1.0 - abs(spec.lam) ** 2) * np.abs(spec.lam) ** (2 * np.arange(d))
        mat = np.diag(weights / weights.sum()).astype(np.complex128)
        return DensityMatrix(mat)
    if spec.kind == "coherent":
        eps = truncation_error(spec)
        _check_truncation(eps, max_truncation_error, spec, "alpha")
        c = coherent_components(d, spec.alpha)
        c = c / np.linalg.norm(c)
        return DensityMatrix(np.outer(c, c.conj()))
    if spec.kind == "squeezed_vacuum":
        eps = truncation_error(spec)
        _check_truncation(eps, max_truncation_error, spec, "r")
        vec = np.zeros(d, dtype=np.complex128)
        amps = _squeezed_even_amplitudes(spec.r, spec.n_c)
        vec[:: 2] = amps
        vec = vec / np.linalg.norm(vec)
        return DensityMatrix(np.outer(vec, vec.conj()))
    if spec.kind == "fock":
        mat = np.zeros((d, d), dtype=np.complex128)
        mat[spec.n, spec.n] = 1.0
        return DensityMatrix(mat)
    if spec.kind == "superposition":
        vec = np.zeros(d, dtype=np.complex128)
        vec[: len(spec.coeffs)] = spec.coeffs
        vec = vec / np.linalg.norm(vec)
        return DensityMatrix(np.outer(vec, vec.conj()))
    if spec.kind == "random_mixed":
        return _random_mixed(spec)
    raise ValidationError(f"unknown state kind {spec.kind!r}")  # pragma: no cover


def _check_truncation(eps, bound, spec, param_name):
    if eps is not None and eps > bound:
        value = {"lambda": spec.lam, "alpha": spec.alpha, "r": spec.r}[param_name]
        raise TruncationBoundError(
            f"state kind {spec.kind!r} with {param_name}={value}"
            f" leaves population {eps:.3e} above n_c={spec.n_c}"
            f" (bound {bound:g}); raise n_c or relax the bound"
        )


def _random_mixed(spec: StateSpec) -> DensityMatrix:
    """Full-rank random state with Tr rho^2 hitting a uniform purity draw.

    Draws a Ginibre matrix G, normalizes rho0 = G G^dag / Tr, then mixes
    rho(w) = w rho0 + (1 - w) I/d and bisects w; purity is monotone in w, so
    the target is reachable whenever purity(rho0) >= target.  A square G
    concentrates near purity 2/d, which sits below the requested range for
    d >= 3, so the number of Ginibre columns is reduced until a draw clears
    the target (fewer columns concentrate at higher purity; the mixing step
    keeps the result full rank regardless).
    """
    d = spec.n_c + 1
    rng = np.random.default_rng(spec.seed)
    target = float(rng.uniform(spec.purity_low, spec.purity_high))
    if target <= 1.0 / d + 1e-9:
        raise ValidationError(
            f"target purity {target:.4f} is not above the maximally mixed value 1/{d}"
        )
    rho0 = None
    for cols in range(d, 0, -1):
        for _ in range(16):
            g = rng.standard_normal((d, cols)) + 1j * rng.standard_normal((d, cols))
            cand = g @ g.conj().T
            cand /= cand.trace().real
            if purity(cand) >= target:
                rho0 = cand
                break
        if rho0 is not None:
            break
    assert rho0 is not None  # cols == 1 yields a pure state, purity 1
    eye = np.eye(d, dtype=np.complex128) / d
    lo, hi = 0.0, 1.0
    mixed = rho0
    for _ in range(200):
        w = 0.5 * (lo + hi)
        mixed = w * rho0 + (1.0 - w) * eye
        p = purity(mixed)
        if abs(p - target) <= 1e-6:
            break
        if p < target:
            lo = w
        else:
            hi = w
    mixed = 0.5 * (mixed + mixed.conj().T)
    mixed /= mixed.trace().real
    return DensityMatrix(mixed)
