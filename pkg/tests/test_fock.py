import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import eval_hermite, factorial, gammaln

from cvtomo import (
    DensityMatrix,
    GridSpec,
    StateSpec,
    TruncationBoundError,
    ValidationError,
    coherent_overlap,
    default_heterodyne_grid,
    default_homodyne_grid,
    default_phases,
    heterodyne_pdf,
    homodyne_pdf,
    make_state,
    purity,
    quadrature_overlap,
    truncation_error,
    wigner,
)
from cvtomo.fock import coherent_components, hermite_functions, quadrature_components


def _random_density(rng, d):
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    m = g @ g.conj().T
    return DensityMatrix(m / m.trace().real)


def test_hermite_functions_match_reference():
    # psi_n(x) = H_n(x) exp(-x^2/2) / sqrt(2^n n! sqrt(pi)) for modest n
    xs = np.linspace(-4.0, 4.0, 17)
    psi = hermite_functions(xs, 12)
    for n in range(13):
        norm = math.exp(-0.5 * (n * math.log(2.0) + gammaln(n + 1))) / math.pi**0.25
        ref = eval_hermite(n, xs) * np.exp(-0.5 * xs**2) * norm
        assert np.max(np.abs(psi[n] - ref)) < 1e-10


def test_hermite_functions_stable_at_high_order():
    # the recurrence must not overflow where the polynomial form would
    psi = hermite_functions(np.array([0.0, 5.0, 12.0]), 60)
    assert np.all(np.isfinite(psi))
    assert np.max(np.abs(psi)) < 1.0


def test_hermite_orthonormality():
    xs = np.linspace(-15.0, 15.0, 6001)
    psi = hermite_functions(xs, 10)
    gram = np.trapezoid(psi[:, None, :] * psi[None, :, :], xs, axis=-1)
    assert np.max(np.abs(gram - np.eye(11))) < 1e-8


def test_quadrature_overlap_phase_convention():
    x = 0.7
    psi = hermite_functions(np.array(x), 5)
    for n in range(6):
        v = quadrature_overlap(n, x, 0.9)
        assert abs(v - np.exp(1j * n * 0.9) * psi[n]) < 1e-14


def test_quadrature_components_match_scalar():
    xs = np.array([-1.3, 0.0, 2.1])
    comp = quadrature_components(4, xs, 1.1)
    for n in range(4):
        for j, x in enumerate(xs):
            assert abs(comp[n, j] - quadrature_overlap(n, float(x), 1.1)) < 1e-14


def test_coherent_overlap_explicit_formula():
    alpha = 0.8 - 0.3j
    for n in range(8):
        ref = (
            math.exp(-0.5 * abs(alpha) ** 2)
            * alpha**n
            / math.sqrt(float(factorial(n)))
        )
        assert abs(coherent_overlap(n, alpha) - ref) < 1e-14


def test_coherent_components_norm_is_poisson_head():
    alpha = 1.4 + 0.6j
    c = coherent_components(12, alpha)
    mean = abs(alpha) ** 2
    head = sum(math.exp(-mean) * mean**k / float(factorial(k)) for k in range(12))
    assert abs(np.sum(np.abs(c) ** 2) - head) < 1e-12


def test_vacuum_homodyne_pdf_is_gaussian():
    rho = make_state(StateSpec.fock(0, n_c=5))
    xs = np.linspace(-4.0, 4.0, 81)
    ref = np.exp(-(xs**2)) / math.sqrt(math.pi)
    assert np.max(np.abs(homodyne_pdf(rho, 0.0, xs) - ref)) < 1e-14
    # phase invariance of a rotationally symmetric state
    assert np.max(np.abs(homodyne_pdf(rho, 1.2, xs) - ref)) < 1e-14


def test_coherent_homodyne_mean_tracks_phase():
    """<x_theta> = sqrt(2) Re(alpha e^{-i theta}) for a coherent state."""
    alpha = 0.9 + 0.4j
    rho = make_state(StateSpec.coherent(alpha, n_c=25))
    xs = np.linspace(-8.0, 8.0, 3201)
    for theta in (0.0, 0.7, math.pi / 2, 4.0):
        f = homodyne_pdf(rho, theta, xs)
        mean = np.trapezoid(xs * f, xs)
        expected = math.sqrt(2.0) * (alpha * np.exp(-1j * theta)).real
        assert abs(mean - expected) < 1e-6


def test_homodyne_pdf_normalized():
    rng = np.random.default_rng(3)
    rho = _random_density(rng, 6)
    xs = np.linspace(-12.0, 12.0, 4801)
    total = np.trapezoid(homodyne_pdf(rho, 0.4, xs), xs)
    assert abs(total - 1.0) < 1e-9


def test_heterodyne_pdf_coherent_overlap_rule():
    # Q_beta(alpha) = exp(-|alpha - beta|^2)/pi, up to truncation tails
    beta = 0.5 + 0.2j
    rho = make_state(StateSpec.coherent(beta, n_c=30))
    for a in (0.0 + 0.0j, 0.4 - 0.1j, 1.0 + 1.0j):
        q = heterodyne_pdf(rho, a.real, a.imag)
        assert abs(q - math.exp(-abs(a - beta) ** 2) / math.pi) < 1e-9


def test_heterodyne_pdf_normalized():
    rng = np.random.default_rng(4)
    rho = _random_density(rng, 5)
    xs = np.linspace(-8.0, 8.0, 401)
    q = heterodyne_pdf(rho, xs[:, None], xs[None, :])
    total = np.trapezoid(np.trapezoid(q, xs, axis=1), xs)
    assert abs(total - 1.0) < 1e-6


def _wigner_integral_reference(rho, x, p):
    """Defining integral W(x,p) = (1/pi) int <x-y|rho|x+y> e^{-2ipy} dy."""

    def integrand(y, part):
        left = hermite_functions(np.array(x - y), rho.dim - 1)
        right = hermite_functions(np.array(x + y), rho.dim - 1)
        val = left @ rho.matrix @ right * np.exp(-2j * p * y)
        return val.real if part == "re" else val.imag

    re = quad(integrand, -9.0, 9.0, args=("re",), limit=200)[0]
    return re / math.pi


def test_wigner_matches_defining_integral():
    rng = np.random.default_rng(11)
    rho = _random_density(rng, 5)
    for x, p in [(0.0, 0.0), (0.8, -0.4), (-1.5, 0.9), (2.0, 2.0)]:
        assert abs(wigner(rho, x, p) - _wigner_integral_reference(rho, x, p)) < 1e-10


def test_wigner_known_values():
    vac = make_state(StateSpec.fock(0, n_c=4))
    assert abs(wigner(vac, 0.0, 0.0) - 1.0 / math.pi) < 1e-14
    one = make_state(StateSpec.fock(1, n_c=4))
    # W_{|1>}(0,0) = -1/pi, the textbook negativity at the origin
    assert abs(wigner(one, 0.0, 0.0) + 1.0 / math.pi) < 1e-14


def test_wigner_normalization():
    rng = np.random.default_rng(12)
    rho = _random_density(rng, 4)
    xs = np.linspace(-7.0, 7.0, 281)
    w = wigner(rho, xs[:, None], xs[None, :])
    total = np.trapezoid(np.trapezoid(w, xs, axis=1), xs)
    assert abs(total - 1.0) < 1e-6


def test_homodyne_pdf_is_wigner_marginal():
    """f(x, theta) integrates the rotated Wigner function over the conjugate axis."""
    rng = np.random.default_rng(21)
    rho = _random_density(rng, 4)
    us = np.linspace(-9.0, 9.0, 1441)
    for theta in default_phases(4):
        for x in (-1.2, 0.3, 1.7):
            xi = x * math.cos(theta) + us * math.sin(theta)
            pi_ = -x * math.sin(theta) + us * math.cos(theta)
            marginal = np.trapezoid(wigner(rho, xi, pi_), us)
            assert abs(homodyne_pdf(rho, theta, x) - marginal) < 1e-8


def test_thermal_state_geometric_weights():
    lam = 0.6
    rho = make_state(StateSpec.thermal(lam, n_c=12))
    diag = np.diag(rho.matrix).real
    ratio = diag[1:] / diag[:-1]
    assert np.max(np.abs(ratio - lam**2)) < 1e-12
    assert abs(diag.sum() - 1.0) < 1e-12
    assert np.max(np.abs(rho.matrix - np.diag(diag))) == 0.0


def test_coherent_state_is_pure():
    rho = make_state(StateSpec.coherent(1.1 - 0.5j, n_c=30))
    assert abs(purity(rho) - 1.0) < 1e-12


def test_squeezed_vacuum_structure():
    rho = make_state(StateSpec.squeezed_vacuum(0.5, n_c=20))
    diag = np.diag(rho.matrix).real
    assert np.max(diag[1::2]) < 1e-30  # odd photon numbers unpopulated
    # quadrature variances e^{-2r}/2 and e^{+2r}/2 along theta = 0, pi/2
    xs = np.linspace(-10.0, 10.0, 8001)
    for theta, scale in ((0.0, math.exp(-1.0)), (math.pi / 2, math.exp(1.0))):
        f = homodyne_pdf(rho, theta, xs)
        var = np.trapezoid(xs**2 * f, xs)
        assert abs(var - 0.5 * scale) < 1e-4


def test_superposition_matches_coeffs():
    coeffs = (1 / math.sqrt(2), 0.0, 1j / math.sqrt(2))
    rho = make_state(StateSpec.superposition(coeffs, n_c=4))
    vec = np.zeros(5, dtype=np.complex128)
    vec[: 3] = coeffs
    assert np.max(np.abs(rho.matrix - np.outer(vec, vec.conj()))) < 1e-12


def test_random_mixed_hits_purity_window():
    for seed in range(8):
        spec = StateSpec.random_mixed(0.55, 0.7, seed=seed, n_c=3)
        rho = make_state(spec)
        assert 0.55 - 1e-6 <= purity(rho) <= 0.7 + 1e-6
        assert rho.is_psd()
    # same seed, same state
    a = make_state(StateSpec.random_mixed(0.55, 0.7, seed=5, n_c=3))
    b = make_state(StateSpec.random_mixed(0.55, 0.7, seed=5, n_c=3))
    assert np.array_equal(a.matrix, b.matrix)


def test_truncation_error_values():
    assert truncation_error(StateSpec.thermal(0.5, n_c=2)) == pytest.approx(0.5**6)
    assert truncation_error(StateSpec.fock(3, n_c=5)) == 0.0
    assert truncation_error(StateSpec.superposition((1.0,), n_c=2)) == 0.0
    spec = StateSpec.coherent(1.0, n_c=10)
    mean = 1.0
    tail = 1.0 - sum(
        math.exp(-mean) * mean**k / float(factorial(k)) for k in range(11)
    )
    assert truncation_error(spec) == pytest.approx(tail, abs=1e-12)
    assert truncation_error(StateSpec.random_mixed(0.5, 0.6, seed=0)) is None
    # squeezed tail shrinks as the cutoff grows
    e8 = truncation_error(StateSpec.squeezed_vacuum(0.8, n_c=8))
    e20 = truncation_error(StateSpec.squeezed_vacuum(0.8, n_c=20))
    assert e20 < e8 < 0.1


def test_make_state_enforces_truncation_bound():
    with pytest.raises(TruncationBoundError):
        make_state(StateSpec.thermal(0.5, n_c=2))
    rho = make_state(StateSpec.thermal(0.5, n_c=2), max_truncation_error=0.02)
    assert abs(rho.matrix.trace() - 1.0) < 1e-12
    with pytest.raises(TruncationBoundError):
        make_state(StateSpec.coherent(3.0, n_c=8))


def test_density_matrix_validation():
    with pytest.raises(ValidationError):
        DensityMatrix(np.array([[0.5, 0.5j], [0.5j, 0.5]]))  # not Hermitian
    with pytest.raises(ValidationError):
        DensityMatrix(np.eye(2))  # trace 2
    neg = np.diag([1.5, -0.5]).astype(complex)
    with pytest.raises(ValidationError):
        DensityMatrix(neg)
    ok = DensityMatrix(neg, require_psd=False)
    assert not ok.is_psd()
    with pytest.raises(ValueError):
        ok.matrix[0, 0] = 2.0  # frozen after validation


def test_state_spec_validation():
    with pytest.raises(ValidationError):
        StateSpec(kind="gaussian", n_c=5)
    with pytest.raises(ValidationError):
        StateSpec.thermal(1.0)
    with pytest.raises(ValidationError):
        StateSpec.fock(6, n_c=5)
    with pytest.raises(ValidationError):
        StateSpec.superposition((1.0, 1.0))  # not normalized
    with pytest.raises(ValidationError):
        StateSpec.random_mixed(0.9, 0.4, seed=1)
    with pytest.raises(ValidationError):
        StateSpec(kind="thermal", n_c=3)  # missing lambda


def test_grid_spec_validation_and_centers():
    grid = GridSpec(x1=-1.0, dx=0.5, n_bins=5, phases=(0.0, 1.0))
    assert np.allclose(grid.x_centers, [-1.0, -0.5, 0.0, 0.5, 1.0])
    assert grid.n_phases == 2
    with pytest.raises(ValidationError):
        GridSpec(x1=0.0, dx=-0.1, n_bins=5)
    with pytest.raises(ValidationError):
        GridSpec(x1=0.0, dx=0.1, n_bins=1)
    with pytest.raises(ValidationError):
        GridSpec(x1=0.0, dx=0.1, n_bins=5, phases=(0.0, 7.0))
    with pytest.raises(ValidationError):
        GridSpec(x1=0.0, dx=0.1, n_bins=5, phases=(0.5, 0.5))
    with pytest.raises(ValidationError):
        GridSpec(x1=0.0, dx=0.1, n_bins=5, p1=-1.0)  # dp missing
    het = default_heterodyne_grid()
    xf, pf = het.quadrature_points()
    assert xf.shape == (200 * 200,)
    assert xf[0] == het.x_centers[0] and pf[1] - pf[0] == pytest.approx(het.dp)


def test_default_grids():
    hom = default_homodyne_grid()
    assert hom.n_bins == 200 and hom.n_phases == 100
    assert hom.x1 == -10.0 and hom.dx == 0.1005
    ph = default_phases(4)
    assert ph == (0.0, math.pi / 2, math.pi, 3 * math.pi / 2)
