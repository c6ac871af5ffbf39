"""Wire physics: equilibrium and integrator oracles, invariants."""

import math

import numpy as np
import pytest

from wirebeam import wire


def table_params(**overrides):
    base = dict(n_points=21, mass_total=10.0, spring_k=1000.0, drag_c=1.0,
                gravity=np.array([0.0, 0.0, -9.8]),
                wind_diffusion=0.1 * np.eye(3), endpoint_separation=10.0)
    base.update(overrides)
    return wire.WireParams(**base)


def quiet_params(**overrides):
    overrides.setdefault("wind_diffusion", np.zeros((3, 3)))
    return table_params(**overrides)


STILL = wire.WindModel(amplitude=0.0)


def closed_form_parabola(params):
    """Independent oracle: z_j = h + (c/2) j (j - (N-1)) with c = |g_z| m/(k0 N),
    shifted so the midpoint node sits at z = 0."""
    n = params.n_points
    c = abs(params.gravity[2]) * params.mass_total / (params.spring_k * n)
    j = np.arange(n)
    z = (c / 2.0) * j * (j - (n - 1))
    return z - z[(n - 1) // 2]


class TestEquilibrium:
    def test_matches_closed_form_parabola(self):
        params = table_params()
        eq = wire.solve_equilibrium(params)
        np.testing.assert_allclose(eq.positions[:, 2], closed_form_parabola(params),
                                   atol=1e-6)

    def test_second_difference_and_sag(self):
        # c = 9.8 * 10 / (1000 * 21) and s0 = (c/2) * ((N-1)/2)^2
        params = table_params()
        eq = wire.solve_equilibrium(params)
        z = eq.positions[:, 2]
        d2 = z[2:] + z[:-2] - 2.0 * z[1:-1]
        c = 9.8 * 10.0 / (1000.0 * 21)
        np.testing.assert_allclose(d2, c, rtol=1e-9)
        assert wire.sag_depth(params) == pytest.approx((c / 2.0) * 100.0, rel=1e-9)

    def test_zero_gravity_is_straight_and_even(self):
        params = table_params(gravity=np.zeros(3))
        eq = wire.solve_equilibrium(params)
        np.testing.assert_allclose(eq.positions[:, 1:], 0.0, atol=1e-12)
        np.testing.assert_allclose(eq.positions[:, 0], np.linspace(-5, 5, 21),
                                   atol=1e-12)

    def test_horizontal_spacing_even_regardless_of_gravity(self):
        eq = wire.solve_equilibrium(table_params())
        np.testing.assert_allclose(np.diff(eq.positions[:, 0]), 0.5, atol=1e-12)

    def test_acceleration_residual_below_1e9(self):
        params = table_params()
        eq = wire.solve_equilibrium(params)
        acc = wire.interior_acceleration(eq, params)
        assert np.abs(acc).max() < 1e-9

    def test_midpoint_at_origin_endpoints_elevated(self):
        params = table_params()
        eq = wire.solve_equilibrium(params)
        np.testing.assert_allclose(eq.positions[10], 0.0, atol=1e-12)
        assert eq.positions[0, 2] > 0 and eq.positions[-1, 2] > 0


class TestStep:
    def test_equilibrium_is_a_fixed_point(self):
        params = quiet_params()
        eq = wire.solve_equilibrium(params)
        out = wire.step(eq, params, STILL, None, 1e-3, np.zeros((19, 3)))
        np.testing.assert_allclose(out.positions, eq.positions, atol=1e-12)
        np.testing.assert_allclose(out.velocities, eq.velocities, atol=1e-12)

    def test_single_oscillator_update(self):
        # N=3: one free point displaced by delta in z, no gravity/wind/noise
        params = quiet_params(n_points=3, gravity=np.zeros(3))
        delta, dt = 0.01, 1e-3
        eq = wire.solve_equilibrium(params)
        st = eq.copy()
        st.positions[1, 2] = delta
        out = wire.step(st, params, STILL, None, dt, np.zeros((1, 3)))
        coeff = params.spring_accel_coeff
        v_expected = -2.0 * coeff * delta * dt
        z_expected = delta + v_expected * dt
        assert out.velocities[1, 2] == pytest.approx(v_expected, rel=1e-13)
        assert out.positions[1, 2] == pytest.approx(z_expected, rel=1e-13)

    def test_drag_decay_recurrence(self):
        # negligible spring: velocity follows v_k = v_0 (1 - c0 dt)^k
        params = quiet_params(n_points=5, spring_k=1e-12, gravity=np.zeros(3))
        dt, k = 1e-3, 200
        st = wire.solve_equilibrium(params)
        v0 = np.array([0.3, -0.2, 0.1])
        st.velocities[1:-1] = v0
        for _ in range(k):
            st = wire.step(st, params, STILL, None, dt, np.zeros((3, 3)))
        expected = v0 * (1.0 - params.drag_c * dt) ** k
        np.testing.assert_allclose(st.velocities[1:-1], np.tile(expected, (3, 1)),
                                   rtol=1e-9)

    def test_endpoints_never_move(self):
        params = table_params()
        rng = np.random.default_rng(3)
        st = wire.solve_equilibrium(params)
        p0, pn = st.positions[0].copy(), st.positions[-1].copy()
        for _ in range(100):
            st = wire.step(st, params, wire.WindModel(), None, 1e-3,
                           rng.standard_normal((19, 3)))
        assert np.array_equal(st.positions[0], p0)
        assert np.array_equal(st.positions[-1], pn)
        assert np.array_equal(st.velocities[0], np.zeros(3))

    def test_spring_term_linearity(self):
        params = quiet_params()
        eq = wire.solve_equilibrium(params)
        rng = np.random.default_rng(8)
        u = rng.normal(scale=0.05, size=(19, 3))

        def tensile(scale):
            st = eq.copy()
            st.positions[1:-1] += scale * u
            return wire.interior_acceleration(st, params) - params.gravity

        base = tensile(0.0)
        one = tensile(1.0) - base
        two = tensile(2.0) - base
        np.testing.assert_allclose(two, 2.0 * one, rtol=1e-12, atol=1e-12)

    def test_nonfinite_state_raises_named_point(self):
        params = table_params()
        st = wire.solve_equilibrium(params)
        st.positions[5, 2] = np.inf
        with pytest.raises(wire.IntegrationDivergedError) as err:
            wire.step(st, params, STILL, None, 1e-3, np.zeros((19, 3)))
        assert "P" in str(err.value)

    def test_drag_dissipates_energy(self):
        # zero diffusion, zero mean wind, perturbed equilibrium: windowed mean
        # kinetic energy is non-increasing once transients pass
        params = quiet_params()
        rng = np.random.default_rng(11)
        st = wire.solve_equilibrium(params)
        st.positions[1:-1, 2] += rng.normal(scale=0.02, size=19)
        dt, n_steps = 1e-3, 3000
        point_mass = params.mass_total / params.n_points
        ke = []
        for _ in range(n_steps):
            st = wire.step(st, params, STILL, None, dt, np.zeros((19, 3)))
            ke.append(0.5 * point_mass * float((st.velocities ** 2).sum()))
        window = 500  # > half the fundamental period, smooths the KE/PE exchange
        means = [np.mean(ke[i:i + window]) for i in range(window, n_steps - window, window)]
        for a, b in zip(means, means[1:]):
            assert b <= a * (1.0 + 1e-9)


class TestWindModel:
    def test_zero_at_t0(self):
        np.testing.assert_allclose(wire.wind_velocity(wire.WindModel(), 0.0), 0.0,
                                   atol=1e-15)

    def test_values_at_t1_and_t2(self):
        v1 = wire.wind_velocity(wire.WindModel(), 1.0)
        np.testing.assert_allclose(v1, [5.0, 4.3301, 3.5355], atol=1e-4)
        np.testing.assert_allclose(
            v1, [5 * math.sin(math.pi / 2), 5 * math.sin(math.pi / 3),
                 5 * math.sin(math.pi / 4)], rtol=1e-12)
        v2 = wire.wind_velocity(wire.WindModel(), 2.0)
        assert abs(v2[0]) < 1e-12
        np.testing.assert_allclose(v2[1:], [4.3301, 5.0], atol=1e-4)

    def test_custom_fn_overrides(self):
        model = wire.WindModel(mean_velocity_fn=lambda t: np.array([t, 0.0, 0.0]))
        np.testing.assert_allclose(wire.wind_velocity(model, 2.5), [2.5, 0, 0])


class TestImpulse:
    def test_single_substep_window(self):
        ev = wire.ImpulseEvent(point_number=4, force=[0, 0, 470], apply_time=1.0)
        dt = 1e-3
        assert ev.active_at(1.0, dt)
        assert not ev.active_at(1.0 - dt, dt)
        assert not ev.active_at(1.0 + dt, dt)

    def test_single_substep_velocity_kick(self):
        params = quiet_params(gravity=np.zeros(3))
        dt = 1e-3
        ev = wire.ImpulseEvent(point_number=4, force=[0, 0, 470.0], apply_time=0.0)
        eq = wire.solve_equilibrium(params)
        out = wire.step(eq, params, STILL, ev, dt, np.zeros((19, 3)))
        kick = 470.0 * dt * params.n_points / params.mass_total
        assert out.velocities[3, 2] == pytest.approx(kick, rel=1e-12)
        # other points see only the equilibrium solve's rounding residual
        assert np.abs(out.velocities[[1, 2] + list(range(4, 20))]).max() < 1e-12

    def test_duration_spans_substeps(self):
        ev = wire.ImpulseEvent(point_number=4, force=[0, 0, 470], apply_time=1.0,
                               duration_s=0.01)
        dt = 1e-3
        active = [t for t in np.arange(0.99, 1.02, dt) if ev.active_at(t, dt)]
        assert len(active) == 10
        assert active[0] == pytest.approx(1.0)

    def test_endpoint_impulse_rejected(self):
        params = table_params()
        ev = wire.ImpulseEvent(point_number=1, force=[0, 0, 1.0], apply_time=0.0)
        with pytest.raises(ValueError):
            ev.validate_for(params)


class TestTrajectory:
    def test_seed_determinism_bit_identical(self):
        params = table_params()
        kw = dict(params=params, wind=wire.WindModel(), impulses=[], duration=0.2,
                  dt=1e-3, seed=42)
        a = wire.simulate_trajectory(**kw)
        b = wire.simulate_trajectory(**kw)
        assert len(a) == len(b)
        for sa, sb in zip(a, b):
            assert np.array_equal(sa.positions, sb.positions)
            assert np.array_equal(sa.velocities, sb.velocities)

    def test_equilibrium_persists_without_forcing(self):
        params = quiet_params()
        eq = wire.solve_equilibrium(params)
        samples = wire.simulate_trajectory(params, STILL, [], 3.0, 1e-3, 0,
                                           sample_every=0.01)
        drift = max(np.abs(s.positions - eq.positions).max() for s in samples)
        assert drift < 1e-9

    def test_impulse_wave_propagates_toward_higher_indices(self):
        # peak |z| displacement time is non-decreasing from P4 to P10
        params = quiet_params()
        eq = wire.solve_equilibrium(params)
        ev = wire.ImpulseEvent(point_number=4, force=[0, 0, 470.0], apply_time=0.0)
        samples = wire.simulate_trajectory(params, STILL, [ev], 0.45, 1e-3, 0)
        dz = np.array([np.abs(s.positions[:, 2] - eq.positions[:, 2]) for s in samples])
        peak_steps = [int(np.argmax(dz[:, p - 1])) for p in range(4, 11)]
        assert all(b >= a for a, b in zip(peak_steps, peak_steps[1:]))

    def test_csv_export_columns(self, tmp_path):
        params = table_params()
        samples = wire.simulate_trajectory(params, STILL, [], 0.02, 1e-3, 0,
                                           sample_every=0.01)
        path = tmp_path / "traj.csv"
        wire.write_trajectory_csv(path, samples)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "time_s,point_index,x_m,y_m,z_m,vx_mps,vy_mps,vz_mps"
        assert len(lines) == 1 + len(samples) * 21

    def test_bad_params_rejected(self):
        with pytest.raises(ValueError):
            table_params(n_points=2)
        with pytest.raises(ValueError):
            table_params(spring_k=0.0)
        with pytest.raises(ValueError):
            table_params(wind_diffusion=np.array([[1, 2, 0], [0, 1, 0], [0, 0, 1.0]]))
