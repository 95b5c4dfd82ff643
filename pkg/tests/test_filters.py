"""Filter-analysis tests: kernels, transfer functions, convolution identity."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from holdlab import (
    HoldFilter,
    HoldParams,
    LiftedState,
    OuFilter,
    PoleError,
    build_forward_matrix,
    char_poly_eval,
    convolution_reconstruct,
    critically_damped_params,
    forced_ode_positions,
    frequency_magnitude,
    impulse_response,
    natural_response,
    pf_ode_generate,
    sample_prior,
    transfer_function,
    TimeGrid,
)


class TestImpulseResponse:
    def test_hold2_at_one(self):
        spec = HoldFilter(order=2)
        assert abs(impulse_response(spec, 1.0) - (-2.0 * math.exp(-1.0))) <= 1e-12

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_zero_at_origin(self, n):
        assert impulse_response(HoldFilter(order=n), 0.0) == 0.0

    def test_ou_at_origin(self):
        assert impulse_response(OuFilter(xi=1.0), 0.0) == -1.0

    def test_causal(self):
        for spec in (HoldFilter(order=3), OuFilter(xi=2.0)):
            assert impulse_response(spec, -0.5) == 0.0
            out = impulse_response(spec, np.array([-1.0, 0.5]))
            assert out[0] == 0.0 and out[1] != 0.0

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_matches_chain_response(self, n):
        # The kernel is -xi * l_inv times the (1, n) entry of exp(Ft).
        params = critically_damped_params(n)
        spec = HoldFilter.from_params(params)
        from holdlab import matrix_exponential

        f = build_forward_matrix(params)
        for t in (0.3, 0.9, 2.2):
            want = -params.xi * params.l_inv * matrix_exponential(f, t).entries[0, n - 1]
            assert abs(impulse_response(spec, t) - want) <= 1e-12 * max(1, abs(want))


class TestTransferFunction:
    def test_hold2_at_zero(self):
        assert transfer_function(HoldFilter(order=2), 0.0) == pytest.approx(-2.0)

    def test_pole_error(self):
        with pytest.raises(PoleError):
            transfer_function(HoldFilter(order=2), -1.0)
        with pytest.raises(PoleError):
            transfer_function(OuFilter(xi=1.5), -1.5)

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_laplace_quadrature(self, n):
        # Numerical Laplace transform of the kernel at s = 1.
        spec = HoldFilter(order=n)
        got, _ = quad(
            lambda t: impulse_response(spec, t) * math.exp(-t), 0.0, np.inf
        )
        want = transfer_function(spec, 1.0).real
        assert abs(got - want) <= 1e-6

    def test_laplace_quadrature_ou(self):
        spec = OuFilter(xi=2.0)
        got, _ = quad(
            lambda t: impulse_response(spec, t) * math.exp(-t), 0.0, np.inf
        )
        assert abs(got - transfer_function(spec, 1.0).real) <= 1e-8

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_denominator_is_char_poly(self, n):
        params = critically_damped_params(n)
        spec = HoldFilter.from_params(params)
        f = build_forward_matrix(params)
        rng = np.random.default_rng(n)
        for _ in range(5):
            s = complex(rng.uniform(-0.5, 2), rng.uniform(-2, 2))
            denom = -spec.gamma_bar * spec.xi * spec.l_inv / transfer_function(spec, s)
            want = char_poly_eval(f, s)
            assert abs(denom - want) <= 1e-10 * max(1.0, abs(want))


class TestFrequencyMagnitude:
    def test_hold2_dc(self):
        assert frequency_magnitude(HoldFilter(order=2), 0.0) == pytest.approx(2.0)

    def test_ou_dc(self):
        assert frequency_magnitude(OuFilter(xi=1.0), 0.0) == pytest.approx(1.0)

    def test_monotone_nonincreasing(self):
        omegas = np.linspace(0.0, 50.0, 400)
        for spec in (HoldFilter(order=2), HoldFilter(order=4), OuFilter(xi=1.0)):
            mags = frequency_magnitude(spec, omegas)
            assert np.all(np.diff(mags) <= 1e-15)

    def test_matches_transfer_function(self):
        omegas = np.logspace(-2, 3, 40)
        for spec in (HoldFilter(order=2), HoldFilter(order=3), OuFilter(xi=1.0)):
            for w in omegas:
                want = abs(transfer_function(spec, 1j * w))
                assert abs(frequency_magnitude(spec, w) - want) <= 1e-12 * want

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_high_frequency_slope(self, n):
        omegas = np.logspace(2, 4, 50)
        mags = frequency_magnitude(HoldFilter(order=n), omegas)
        slope = np.polyfit(np.log(omegas), np.log(mags), 1)[0]
        assert abs(slope - (-n)) <= 0.05

    def test_ou_slope(self):
        omegas = np.logspace(2, 4, 50)
        mags = frequency_magnitude(OuFilter(xi=1.0), omegas)
        slope = np.polyfit(np.log(omegas), np.log(mags), 1)[0]
        assert abs(slope - (-1.0)) <= 0.05

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_low_frequency_dominance_over_ou(self, n):
        omegas = np.linspace(0.0, 1.0, 50)
        hold = frequency_magnitude(HoldFilter(order=n), omegas)
        ou = frequency_magnitude(OuFilter(xi=1.0), omegas)
        assert np.all(hold > ou)

    def test_detuned_friction_leaks_high_frequencies(self):
        # Raising xi off the critical value splits the double pole into two
        # real poles, one slower than the critical eigenvalue, and the
        # resulting magnitude exceeds the critically damped one at high
        # frequency.
        crit = critically_damped_params(2)
        xi_off = 1.1 * crit.xi
        roots = np.roots([1.0, xi_off, crit.gammas[0] ** 2])
        assert max(roots.real) > -1.0
        omega = 1e3
        mag_off = (
            crit.gamma_bar
            * xi_off
            / (abs(1j * omega - roots[0]) * abs(1j * omega - roots[1]))
        )
        mag_crit = frequency_magnitude(HoldFilter(order=2), omega)
        assert mag_off > mag_crit


class TestNaturalResponse:
    def test_initial_value(self):
        params = critically_damped_params(3)
        u0 = LiftedState.from_blocks([1.0, -2.0], [0.1, 0.2], [0.0, 0.3])
        assert np.allclose(
            natural_response(params, u0, 0.0), [1.0, -2.0], atol=1e-14, rtol=0
        )

    def test_zero_state(self):
        params = critically_damped_params(2)
        u0 = LiftedState(2, 1, np.zeros(2))
        for t in (0.0, 0.5, 3.0):
            assert natural_response(params, u0, t)[0] == 0.0

    def test_matches_zero_score_flow(self):
        params = critically_damped_params(2)
        grid = TimeGrid(t_start=1.0, t_end=0.2, steps=2000)
        traj = pf_ode_generate(
            params, lambda u, t: np.zeros(1), grid, rng_seed=12, h=1
        )
        u_start = sample_prior(params, 1, 12)
        want = natural_response(params, u_start, grid.t_end - grid.t_start)
        assert abs(traj.endpoint.position[0] - want[0]) <= 1e-5 * max(
            1.0, abs(want[0])
        )


def uniform_grid(t_max=5.0, steps=10_000):
    return np.linspace(0.0, t_max, steps + 1)


class TestConvolutionReconstruct:
    def test_zero_forcing_is_natural(self):
        params = critically_damped_params(2)
        spec = HoldFilter.from_params(params)
        u0 = LiftedState(2, 1, np.array([1.0, 0.5]))
        times = uniform_grid(steps=500)
        out = convolution_reconstruct(spec, params, u0, np.zeros_like(times), times)
        want = np.stack([natural_response(params, u0, float(t)) for t in times])
        assert np.array_equal(out, want)

    def test_hold2_sine_forcing_vs_ode(self):
        params = critically_damped_params(2)
        spec = HoldFilter.from_params(params)
        u0 = LiftedState(2, 1, np.array([1.0, 0.5]))
        times = uniform_grid()
        forcing = np.sin(3.0 * times)
        recon = convolution_reconstruct(spec, params, u0, forcing, times)
        oracle = forced_ode_positions(params, u0, forcing, times)
        err = np.linalg.norm(recon - oracle) / np.linalg.norm(oracle)
        assert err <= 1e-3

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_random_forcings_vs_ode(self, n):
        params = critically_damped_params(n)
        spec = HoldFilter.from_params(params)
        u0 = LiftedState(n, 1, np.array([1.0] + [0.4] * (n - 1)))
        times = uniform_grid()
        rng = np.random.default_rng(60 + n)
        for _ in range(5):
            w = rng.uniform(0.5, 6.0)
            amp = rng.uniform(0.5, 2.0)
            kind = rng.integers(3)
            if kind == 0:
                forcing = amp * np.sin(w * times)
            elif kind == 1:
                forcing = amp * np.cos(w * times) * np.exp(-times)
            else:
                forcing = amp * np.exp(-w * times / 4.0)
            recon = convolution_reconstruct(spec, params, u0, forcing, times)
            oracle = forced_ode_positions(params, u0, forcing, times)
            err = np.linalg.norm(recon - oracle) / np.linalg.norm(oracle)
            assert err <= 1e-3

    def test_ou_exponential_forcing_vs_quadrature(self):
        xi = 2.0
        params = HoldParams(order=1, gammas=(), xi=xi, l_inv=1.0)
        spec = OuFilter(xi=xi)
        u0 = LiftedState(1, 1, np.array([1.0]))
        times = uniform_grid()
        forcing = np.exp(-times)
        recon = convolution_reconstruct(spec, params, u0, forcing, times)
        for idx in (2000, 5000, 10_000):
            t = float(times[idx])
            integral, _ = quad(
                lambda tau: math.exp(-xi * (t - tau)) * math.exp(-tau), 0.0, t
            )
            want = math.exp(-xi * t) * 1.0 - xi * 1.0 * integral
            assert abs(recon[idx, 0] - want) <= 1e-6

    def test_nonuniform_grid_rejected(self):
        params = critically_damped_params(2)
        spec = HoldFilter.from_params(params)
        u0 = LiftedState(2, 1, np.array([1.0, 0.0]))
        times = np.array([0.0, 0.1, 0.3, 0.35])
        with pytest.raises(ValueError):
            convolution_reconstruct(spec, params, u0, np.zeros(4), times)

    def test_grid_must_start_at_zero(self):
        params = critically_damped_params(2)
        spec = HoldFilter.from_params(params)
        u0 = LiftedState(2, 1, np.array([1.0, 0.0]))
        times = np.linspace(0.5, 1.5, 11)
        with pytest.raises(ValueError):
            convolution_reconstruct(spec, params, u0, np.zeros(11), times)
