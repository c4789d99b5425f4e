import math

import numpy as np
import pytest

from landau.coefficients import (
    biharmonic_potential,
    coefficient_upper_bounds,
    compute_coefficients,
    direct_quadrature_coefficients,
    structural_residuals,
)
from landau.fields import maxwellian
from landau.grid import Field, make_grid


@pytest.fixture(scope="module")
def grid48():
    return make_grid(48, 8.0)


@pytest.fixture(scope="module")
def mu48(grid48):
    return maxwellian(grid48)


@pytest.fixture(scope="module")
def coeffs48(mu48):
    return compute_coefficients(mu48)


def corpus_fields(grid):
    """Smooth, decaying probe densities for the structural identities."""
    v1, v2, v3 = grid.coords
    norm = (2.0 * np.pi) ** -1.5
    shapes = [
        maxwellian(grid).values,
        0.5 * norm * (np.exp(-0.5 * ((v1 - 1.0) ** 2 + v2**2 + v3**2))
                      + np.exp(-0.5 * ((v1 + 1.0) ** 2 + v2**2 + v3**2))),
        norm * np.exp(-0.5 * (v1**2 / 0.8 + v2**2 + v3**2 / 1.2)) / np.sqrt(0.96),
        norm * np.exp(-0.5 * (v1**2 + v2**2 + v3**2)) * (1.0 + 0.3 * np.cos(np.pi * v1 / grid.extent)),
        (2.0 * np.pi * 0.5) ** -1.5 * np.exp(-grid.radius2),
    ]
    return [Field(grid, s + np.zeros(grid.shape)) for s in shapes]


class TestBiharmonicPotential:
    def test_zero_source(self, grid48):
        phi = biharmonic_potential(Field(grid48, np.zeros(grid48.shape)))
        assert phi.max_abs() == 0.0

    def test_linearity(self):
        grid = make_grid(32, 8.0)
        fields = corpus_fields(grid)[:2]
        combo = Field(grid, 2.0 * fields[0].values - 0.5 * fields[1].values)
        lhs = biharmonic_potential(combo).values
        rhs = 2.0 * biharmonic_potential(fields[0]).values - 0.5 * biharmonic_potential(fields[1]).values
        scale = np.max(np.abs(rhs))
        assert np.max(np.abs(lhs - rhs)) <= 1e-12 * scale

    def test_boundary_warning(self):
        grid = make_grid(16, 4.0)
        wide = Field(grid, np.exp(-0.05 * grid.radius2) + np.zeros(grid.shape))
        with pytest.warns(UserWarning, match="boundary"):
            biharmonic_potential(wide)

    def test_laplacian_matches_newtonian_potential_at_origin(self, coeffs48, grid48):
        # the potential's Laplacian is the a-field by construction; its
        # value at v = 0 for the equilibrium is (2 pi)^(-3/2)
        mid = grid48.n // 2
        a0 = coeffs48.a.values[mid, mid, mid]
        assert a0 == pytest.approx((2.0 * np.pi) ** -1.5, abs=4e-5)

    def test_gaussian_potential_closed_form(self, mu48, grid48):
        # the |z|-kernel convolution of the standard Gaussian is the
        # mean-distance function ((r + 1/r) erf(r/sqrt2) + sqrt(2/pi) e^{-r^2/2}) / 8 pi
        phi = biharmonic_potential(mu48)
        mid = grid48.n // 2
        for i, tol in ((mid + 12, 1e-6), (mid + 18, 1e-10)):
            r = grid48.axis[i]
            exact = ((r + 1.0 / r) * math.erf(r / math.sqrt(2.0))
                     + math.sqrt(2.0 / np.pi) * math.exp(-0.5 * r * r)) / (8.0 * np.pi)
            assert phi.values[i, mid, mid] == pytest.approx(exact, rel=tol)


class TestComputeCoefficients:
    def test_equilibrium_diffusion_at_origin(self, coeffs48, grid48):
        # isotropy at the peak plus the kernel trace identity tr A = a
        # force A(0) = (a(0)/3) Id
        mid = grid48.n // 2
        a0 = coeffs48.a.values[mid, mid, mid]
        for i in range(3):
            assert coeffs48.A.component(i, i)[mid, mid, mid] == pytest.approx(a0 / 3.0, rel=1e-12)
            assert coeffs48.A.component(i, i)[mid, mid, mid] == pytest.approx(
                (2.0 * np.pi) ** -1.5 / 3.0, abs=2e-5
            )
        for i in range(3):
            for j in range(i + 1, 3):
                assert abs(coeffs48.A.component(i, j)[mid, mid, mid]) < 1e-12

    def test_structural_identities_on_corpus(self):
        grid = make_grid(32, 8.0)
        for f in corpus_fields(grid):
            trace_res, div_res = structural_residuals(f)
            assert trace_res <= 1e-10
            assert div_res <= 1e-8

    def test_positive_semidefinite(self, coeffs48):
        eigs = coeffs48.A.eigenvalues()
        floor = -1e-12 * coeffs48.lambda_max
        assert float(np.min(eigs[:, 0])) >= floor

    def test_coercivity_positive(self, coeffs48):
        assert coeffs48.c0_empirical > 0.0

    def test_coercivity_uniform_over_corpus(self):
        # the weighted smallest eigenvalue stays above one positive
        # constant across normalized densities (pointwise lower bound)
        grid = make_grid(32, 8.0)
        c0s = [compute_coefficients(f).c0_empirical for f in corpus_fields(grid)[:4]]
        assert min(c0s) > 0.01

    def test_newtonian_potential_closed_form_along_axis(self, coeffs48, grid48):
        # a[mu](v) = erf(|v|/sqrt2) / (4 pi |v|): the free-space solve
        # must reproduce the Coulomb field of a unit Gaussian with no
        # periodic-image contamination
        mid = grid48.n // 2
        worst = 0.0
        for i in range(grid48.n):
            r = abs(grid48.axis[i])
            if not 0.75 <= r <= 6.0:
                continue
            exact = math.erf(r / math.sqrt(2.0)) / (4.0 * np.pi * r)
            worst = max(worst, abs(coeffs48.a.values[i, mid, mid] - exact) / exact)
        assert worst <= 5e-4

    def test_drift_matches_enclosed_charge_along_axis(self, coeffs48, grid48):
        # grad a[mu](v) = -v_hat Q(|v|) / (4 pi |v|^2) with Q the
        # standard-normal mass enclosed within radius |v|
        mid = grid48.n // 2
        worst = 0.0
        for i in range(grid48.n):
            v = grid48.axis[i]
            r = abs(v)
            if not 0.75 <= r <= 6.0:
                continue
            q = math.erf(r / math.sqrt(2.0)) - math.sqrt(2.0 / np.pi) * r * math.exp(-0.5 * r * r)
            exact = -math.copysign(1.0, v) * q / (4.0 * np.pi * r * r)
            worst = max(worst, abs(coeffs48.grad_a.values[0][i, mid, mid] - exact) / abs(exact))
        assert worst <= 3e-3


class TestDirectQuadratureOracle:
    def test_zero_source(self, grid48):
        pts = [(0.0, 0.0, 0.0)]
        out = direct_quadrature_coefficients(Field(grid48, np.zeros(grid48.shape)), pts)
        assert out[0].a == 0.0
        assert np.all(out[0].A == 0.0)
        assert np.all(out[0].grad_a == 0.0)

    def test_rejects_off_lattice_points(self, mu48):
        with pytest.raises(ValueError):
            direct_quadrature_coefficients(mu48, [(0.1234, 0.0, 0.0)])

    def test_rejects_too_many_points(self, mu48):
        pts = [(0.0, 0.0, 0.0)] * 65
        with pytest.raises(ValueError):
            direct_quadrature_coefficients(mu48, pts)

    def test_origin_value_and_lattice_defect(self, mu48):
        # omitting the singular node biases the sum by about
        # -0.226 dv^2 f(v) (the simple-cubic lattice-sum defect of the
        # Coulomb kernel); second-order in the spacing
        exact = (2.0 * np.pi) ** -1.5
        errs = {}
        for n in (24, 48):
            grid = make_grid(n, 8.0)
            out = direct_quadrature_coefficients(maxwellian(grid), [(0.0, 0.0, 0.0)])
            errs[n] = out[0].a - exact
        assert abs(errs[48]) < 2.5e-3
        assert errs[48] < 0.0
        assert errs[24] / errs[48] > 3.0  # second-order decay

    def test_oracle_equivalence_away_from_peak(self, grid48, mu48, coeffs48):
        rng = np.random.default_rng(0)
        picks = rng.integers(0, grid48.n, size=(10, 3))
        points = [tuple(grid48.axis[i] for i in pick) for pick in picks]
        oracle = direct_quadrature_coefficients(mu48, points)
        worst = 0.0
        for pick, ora in zip(picks, oracle):
            i, j, k = (int(x) for x in pick)
            worst = max(worst, abs(coeffs48.a.values[i, j, k] - ora.a) / abs(ora.a))
            gmag = float(np.linalg.norm(ora.grad_a))
            for r in range(3):
                worst = max(
                    worst,
                    abs(coeffs48.grad_a.values[r][i, j, k] - ora.grad_a[r]) / max(gmag, 1e-10),
                )
                for c in range(r, 3):
                    spec = coeffs48.A.component(r, c)[i, j, k]
                    scale = max(abs(ora.a), abs(ora.A[r, c]))
                    worst = max(worst, abs(spec - ora.A[r, c]) / scale)
        assert worst <= 1e-3


class TestUpperBounds:
    def test_rejects_bad_exponent_and_sign(self, mu48, grid48):
        with pytest.raises(ValueError):
            coefficient_upper_bounds(mu48, 1.5)
        with pytest.raises(ValueError):
            coefficient_upper_bounds(Field(grid48, -maxwellian(grid48).values), 2.0)

    def test_equilibrium_baseline(self):
        grid = make_grid(32, 8.0)
        rep = coefficient_upper_bounds(maxwellian(grid), 2.0)
        # pinned regression values for n=32, L=8
        assert rep.a_ratio == pytest.approx(0.0752, abs=2e-3)
        assert rep.grad_a_ratio == pytest.approx(0.2445, abs=5e-3)

    def test_scale_invariance(self):
        grid = make_grid(32, 8.0)
        mu = maxwellian(grid)
        base = coefficient_upper_bounds(mu, 2.0)
        scaled = coefficient_upper_bounds(Field(grid, 7.0 * mu.values), 2.0)
        assert scaled.a_ratio == pytest.approx(base.a_ratio, abs=1e-10)
        assert scaled.grad_a_ratio == pytest.approx(base.grad_a_ratio, abs=1e-10)

    @pytest.mark.filterwarnings("ignore::UserWarning")  # theta=2 tail grazes the boundary
    def test_dilated_family_stays_near_baseline(self):
        grid = make_grid(32, 8.0)
        base = coefficient_upper_bounds(maxwellian(grid), 2.0)
        for theta in (0.5, 2.0):
            vals = (2.0 * np.pi * theta) ** -1.5 * np.exp(-0.5 * grid.radius2 / theta)
            rep = coefficient_upper_bounds(Field(grid, vals + np.zeros(grid.shape)), 2.0)
            assert rep.a_ratio <= 3.0 * base.a_ratio
            assert rep.grad_a_ratio <= 3.0 * base.grad_a_ratio
