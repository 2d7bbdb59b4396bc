import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from toalab.errors import InputError, RepresentationError, ResolutionError
from toalab.repspace import (
    PseudoSamples,
    SpatialGrid,
    ThetaGrid,
    WaveFunction,
    pseudoenergy,
    pseudotime_amplitude,
    step_capture_fraction,
    theta_step_state,
    to_momentum,
    to_position,
    to_pseudoenergy,
)

from conftest import gaussian_p, gaussian_x


def naive_forward(g, psi):
    # quadratic-cost Riemann sum, independent of the FFT index bookkeeping
    kernel = np.exp(-1j * np.outer(g.p, g.x))
    return kernel @ psi * g.dx / np.sqrt(2 * np.pi)


def naive_inverse(g, phat):
    kernel = np.exp(1j * np.outer(g.x, g.p))
    return kernel @ phat * g.dp / np.sqrt(2 * np.pi)


def random_state(rng, g):
    amp = rng.normal(size=g.n) + 1j * rng.normal(size=g.n)
    return WaveFunction(g, "position", amp).normalized()


class TestGrid:
    def test_defaults(self):
        g = SpatialGrid()
        assert g.n == 4096 and g.x_min == -40.0 and g.length == pytest.approx(80.0)

    def test_momentum_range(self):
        g = SpatialGrid(n=16, x_min=-1.0, dx=0.125)
        assert np.all(np.diff(g.p) > 0)
        assert g.p[-1] == pytest.approx(np.pi / g.dx)
        assert g.p[0] > -np.pi / g.dx
        assert g.p[g.zero_index] == 0.0

    @pytest.mark.parametrize("n", [0, 7, 100, 1000])
    def test_bad_size(self, n):
        with pytest.raises(InputError):
            SpatialGrid(n=n)

    def test_bad_spacing(self):
        with pytest.raises(InputError):
            SpatialGrid(dx=-1.0)

    def test_reflect_index(self):
        g = SpatialGrid(n=32, x_min=-4.0, dx=0.25)
        r = g.reflect_index()
        x = g.x
        # the image of x_min is +4, which wraps back to x_min
        inner = slice(1, None)
        np.testing.assert_allclose(x[r][inner], -x[inner])


class TestTransforms:
    def test_naive_oracle(self):
        rng = np.random.default_rng(1)
        g = SpatialGrid(n=64, x_min=-3.0, dx=0.1)
        for _ in range(20):
            psi = random_state(rng, g)
            phat = to_momentum(psi)
            np.testing.assert_allclose(phat.amp, naive_forward(g, psi.amp), atol=1e-12)
            back = naive_inverse(g, phat.amp)
            np.testing.assert_allclose(to_position(phat).amp, back, atol=1e-12)

    def test_round_trip(self):
        rng = np.random.default_rng(2)
        psi = random_state(rng, SpatialGrid(n=256, x_min=-5.0, dx=0.04))
        np.testing.assert_allclose(to_position(to_momentum(psi)).amp, psi.amp, atol=1e-13)

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), log_n=st.integers(3, 10),
           x_min=st.floats(-50, 50), dx=st.floats(0.01, 2.0))
    def test_unitarity(self, seed, log_n, x_min, dx):
        g = SpatialGrid(n=2 ** log_n, x_min=x_min, dx=dx)
        psi = random_state(np.random.default_rng(seed), g)
        assert to_momentum(psi).norm2() == pytest.approx(1.0, abs=1e-12)

    def test_gaussian_analytic(self, grid):
        psi = WaveFunction(grid, "position", gaussian_x(grid.x, -10.0, 1.0, 3.0))
        np.testing.assert_allclose(to_momentum(psi).amp, gaussian_p(grid.p, -10.0, 1.0, 3.0),
                                   atol=1e-12)

    def test_self_dual_gaussian(self):
        # exp(-x^2/2) is its own transform under the unitary convention
        g = SpatialGrid(n=512, x_min=-16.0, dx=1 / 16)
        psi = WaveFunction(g, "position", np.pi ** -0.25 * np.exp(-0.5 * g.x ** 2))
        np.testing.assert_allclose(to_momentum(psi).amp, np.pi ** -0.25 * np.exp(-0.5 * g.p ** 2),
                                   atol=1e-12)

    def test_modulation_shifts_momentum(self, grid):
        base = gaussian_x(grid.x, 0.0, 1.0, 0.0)
        k = 5 * grid.dp
        shifted = to_momentum(WaveFunction(grid, "position", base * np.exp(1j * k * grid.x))).amp
        ref = to_momentum(WaveFunction(grid, "position", base)).amp
        np.testing.assert_allclose(shifted[5:], ref[:-5], atol=1e-12)

    def test_representation_guard(self, grid):
        psi = WaveFunction(grid, "position", np.ones(grid.n))
        with pytest.raises(RepresentationError):
            to_position(psi)
        with pytest.raises(RepresentationError):
            to_pseudoenergy(psi)
        with pytest.raises(RepresentationError):
            WaveFunction(grid, "theta", np.ones(grid.n))

    def test_length_mismatch(self, grid):
        with pytest.raises(InputError):
            WaveFunction(grid, "position", np.ones(3))

    def test_amplitudes_read_only(self, grid):
        psi = WaveFunction(grid, "position", np.ones(grid.n))
        with pytest.raises(ValueError):
            psi.amp[0] = 2.0


class TestPseudoenergy:
    @pytest.mark.parametrize("p, xi", [(2.0, 2.0), (-3.0, -4.5), (0.0, 0.0)])
    def test_values(self, p, xi):
        assert pseudoenergy(p) == xi

    def test_jacobian_preserves_norm(self, grid, make_gauss):
        phat = to_momentum(make_gauss(grid, -10.0, 1.0, 3.0))
        ps = to_pseudoenergy(phat)
        assert ps.norm2() + ps.dropped_mass == pytest.approx(phat.norm2(), abs=1e-13)

    def test_parity(self, grid):
        # an odd momentum amplitude maps to an odd function of xi
        phat = gaussian_p(grid.p, 0.0, 1.0, 3.0) - gaussian_p(-grid.p, 0.0, 1.0, 3.0)
        ps = to_pseudoenergy(WaveFunction(grid, "momentum", phat))
        pos = ps.xi > 0
        neg = ps.xi < 0
        a_pos = ps.amp[pos][:-1]  # drop the unpaired Nyquist bin
        a_neg = ps.amp[neg][::-1]
        np.testing.assert_allclose(a_pos, -a_neg, atol=1e-14)


class TestPseudotime:
    def test_high_precision_oracle(self):
        rng = np.random.default_rng(3)
        k = 12
        xi = np.sort(rng.normal(size=k) * 4)
        w = rng.uniform(0.1, 1.0, k)
        amp = rng.normal(size=k) + 1j * rng.normal(size=k)

        ps = PseudoSamples(xi=xi, w=w, amp=amp, p=np.sign(xi) * np.sqrt(2 * np.abs(xi)))
        tg = ThetaGrid.spanning(-3.0, 3.0, 7)
        got = pseudotime_amplitude(ps, tg)
        mpmath.mp.dps = 40
        for th, val in zip(tg.axis, got):
            exact = sum(mpmath.mpf(wk) * mpmath.mpc(ak.real, ak.imag)
                        * mpmath.exp(-1j * mpmath.mpf(th) * mpmath.mpf(xk))
                        for xk, wk, ak in zip(xi, w, amp)) / mpmath.sqrt(2 * mpmath.pi)
            assert abs(complex(exact) - val) < 1e-13

    def test_continuum_right_mover(self, grid):
        # phi^(theta) = (2 pi)^-1/2 int_0^inf sqrt(p) exp(-i p^2 theta / 2) psi~(p) dp
        from scipy.integrate import quad
        # p0 = 6 keeps the sqrt(p) endpoint at p = 0 out of the error budget
        a, s, p0 = -10.0, 1.0, 6.0
        phat = WaveFunction(grid, "momentum", gaussian_p(grid.p, a, s, p0) * (grid.p > 0))
        tg = ThetaGrid.spanning(1.0, 2.5, 6)
        got = pseudotime_amplitude(to_pseudoenergy(phat), tg)
        for th, val in zip(tg.axis, got):
            def f(p, part):
                v = np.sqrt(p) * np.exp(-0.5j * p * p * th) * gaussian_p(p, a, s, p0)
                return v.real if part == 0 else v.imag
            re = quad(f, 0, 14, args=(0,), limit=400, epsabs=1e-13)[0]
            im = quad(f, 0, 14, args=(1,), limit=400, epsabs=1e-13)[0]
            assert abs(complex(re, im) / np.sqrt(2 * np.pi) - val) < 1e-9

    def test_single_zero_sample(self):
        ps = PseudoSamples(xi=np.array([0.0]), w=np.array([1.0]), amp=np.array([1.0 + 0j]),
                           p=np.array([0.0]))
        out = pseudotime_amplitude(ps, ThetaGrid.spanning(-5, 5, 11))
        np.testing.assert_allclose(np.abs(out), 1 / np.sqrt(2 * np.pi), rtol=1e-15)

    def test_empty_samples(self):
        e = np.array([])
        with pytest.raises(InputError):
            pseudotime_amplitude(PseudoSamples(e, e, e.astype(complex), e), ThetaGrid(2, 0.0, 1.0))

    def test_theta_grid_validation(self):
        with pytest.raises(InputError):
            ThetaGrid(1, 0.0, 1.0)
        with pytest.raises(InputError):
            ThetaGrid(3, 0.0, 0.0)
        tg = ThetaGrid.spanning(1.0, 2.0, 11)
        assert tg.theta_max == pytest.approx(2.0) and tg.shifted(0.5).theta_min == 1.5


class TestThetaStep:
    def test_capture_fraction_limits(self):
        assert step_capture_fraction(2.0, 2.1, 0.0) == 0.0
        assert step_capture_fraction(2.0, 2.1, 1e7) == pytest.approx(1.0, abs=1e-5)

    def test_capture_fraction_quadrature(self):
        from scipy.integrate import quad
        t1, t2, xm = 2.0, 2.1, 40.0
        f = lambda xi: abs((np.exp(1j * t2 * xi) - np.exp(1j * t1 * xi)) / xi) ** 2 / (2 * np.pi)
        num = 2 * quad(f, 1e-12, xm, limit=500)[0] / (t2 - t1)
        assert step_capture_fraction(t1, t2, xm) == pytest.approx(num, rel=1e-8)

    def test_unit_norm_and_window(self):
        from toalab.arrival import kijowski_theta_density, window_probability
        from toalab.experiments import THETA_STEP_GRID
        psi = theta_step_state(2.0, 2.1, THETA_STEP_GRID)
        assert psi.norm2() == pytest.approx(1.0, abs=1e-12)
        tg = ThetaGrid.spanning(1.0, 3.1, 4001)
        d = kijowski_theta_density(psi, tg)
        assert window_probability(d, 2.0, 2.1) >= 0.95

    @pytest.mark.parametrize("g", [SpatialGrid(), SpatialGrid(n=16384, x_min=-400.0, dx=480 / 16384)])
    def test_narrow_interval_unresolvable(self, g):
        with pytest.raises(ResolutionError, match="need"):
            theta_step_state(2.0, 2.00001, g)

    def test_reversed_interval(self, grid):
        with pytest.raises(InputError):
            theta_step_state(2.1, 2.0, grid)
