import numpy as np
import pytest

from sgfluid.additive import (
    AdditiveNoiseModel,
    StabilityError,
    VorticitySolver,
    additive_coefficients,
    check_equivalence,
    check_vorticity_energy_law,
    h3_from_vorticity,
    initial_vorticity,
    simulate_velocity_additive,
    simulate_vorticity_additive,
)
from sgfluid.galerkin import BrownianPath, GalerkinSystem, SimConfig, project_initial
from sgfluid.grid import VectorField, clamp_array, make_grid, perp_grad_array
from sgfluid.operators import build_noise_model
from sgfluid.stokes import stream_space


@pytest.fixture(scope="module")
def setup(grid33, stokes33, wbasis33):
    noise = build_noise_model("eigen", 3, 0.01, grid33, stokes33)
    return GalerkinSystem(wbasis33, noise), AdditiveNoiseModel.from_noise(noise)


def cfg(**kw):
    base = dict(alpha=0.1, nu=0.01, nu_tilde=0.01, N=12, dt=1e-3, T=0.02, save_stride=5)
    base.update(kw)
    return SimConfig(**base)


def smooth_u0(grid, amp=5.0):
    X, Y = grid.mesh
    psi = amp * (X * (1 - X) * Y * (1 - Y)) ** 2 * np.sin(3 * X + 1)
    return VectorField.from_array(grid, perp_grad_array(clamp_array(psi), grid.h), "no-slip")


def test_noise_model_K_zero(grid33):
    a = AdditiveNoiseModel.from_noise(build_noise_model("bumps", 0, 0.1, grid33))
    assert a.K == 0 and a.s.shape[0] == 0 and a.s_norm2().shape == (0,)


def test_additive_coefficients_scale_with_sqrt_nu_tilde(setup):
    system, noise = setup
    g = additive_coefficients(system, noise)
    assert g.shape == (3, 12)
    g4 = additive_coefficients(system, AdditiveNoiseModel.from_noise(noise.base.with_nu_tilde(0.04)))
    assert np.allclose(g4, 2 * g)
    g0 = additive_coefficients(system, AdditiveNoiseModel.from_noise(noise.base.with_nu_tilde(0.0)))
    assert np.all(g0 == 0.0)


def test_additive_coefficients_against_direct_quadrature(setup, grid33):
    # <sigma_k, e_i> by node quadrature of the velocities converges to the stream-space pairing
    system, noise = setup
    g = additive_coefficients(system, noise) / (np.sqrt(noise.nu_tilde) * system.lam)
    direct = np.einsum("kcxy,icxy,xy->ki", noise.base.sigma_arrays, system.fields, grid33.weights)
    assert np.abs(g - direct).max() < 0.05 * np.abs(direct).max()


def test_velocity_additive_energy_identity(setup, rng):
    system, noise = setup
    tr = simulate_velocity_additive(cfg(), system, noise, rng.standard_normal(12) * 0.1)
    assert np.abs(tr.energy_residual).max() < 1e-10 * tr.normV2[0]
    assert tr.meta["noise"] == "additive" and not tr.blown_up


def test_velocity_additive_zero_noise_zero_state(setup):
    system, noise = setup
    quiet = AdditiveNoiseModel.from_noise(noise.base.with_nu_tilde(0.0))
    tr = simulate_velocity_additive(cfg(), system, quiet, np.zeros(12))
    assert np.all(tr.states == 0.0)
    with pytest.raises(ValueError):
        simulate_velocity_additive(cfg(N=8), system, quiet, np.zeros(12))


def test_vorticity_round_trip(grid33, rng):
    sol = VorticitySolver(grid33, 0.1)
    xi = rng.standard_normal(stream_space(grid33).n_free)
    assert np.allclose(sol.stream_coords(sol.curl_v_stream(xi)), xi, atol=1e-9 * np.abs(xi).max())


def test_initial_vorticity_inverts(grid33):
    u0 = smooth_u0(grid33)
    sol = VorticitySolver(grid33, 0.1)
    assert np.allclose(sol.velocity(initial_vorticity(u0, 0.1)), u0.array, atol=1e-10)


def test_advection_skew(grid33, rng):
    sol = VorticitySolver(grid33, 0.1)
    m = stream_space(grid33).n_free
    ux, uy, q = rng.standard_normal((3, m))
    assert abs(q @ sol.advection(ux, uy, q)) < 1e-10 * np.abs(q).max() ** 2 * m


def test_solver_validation(grid33):
    with pytest.raises(ValueError):
        VorticitySolver(grid33, 0.0)


def test_vorticity_norm_conserved_without_damping_or_noise(setup, grid33):
    _, noise = setup
    quiet = AdditiveNoiseModel.from_noise(noise.base.with_nu_tilde(0.0))
    q0 = initial_vorticity(smooth_u0(grid33), 0.1)
    tr = simulate_vorticity_additive(cfg(nu=0.0, nu_tilde=0.0), q0, quiet, transport=False)
    assert np.allclose(tr.q[-1], q0)
    tr = simulate_vorticity_additive(cfg(nu=0.0, nu_tilde=0.0, dt=1e-4, T=2e-3), q0, quiet)
    # Heun is not exactly conservative; the skew stencil keeps the drift at O(dt^2)
    assert abs(tr.q_norm2[-1] / tr.q_norm2[0] - 1) < 1e-6
    assert tr.to_csv().startswith("t,q_norm2\n")


def test_vorticity_stability_guards(setup, grid33):
    _, noise = setup
    q0 = initial_vorticity(smooth_u0(grid33), 0.1)
    with pytest.raises(StabilityError):
        simulate_vorticity_additive(cfg(nu=10.0, dt=1e-3), q0, noise)
    with pytest.raises(StabilityError):
        simulate_vorticity_additive(cfg(nu=0.0, dt=1e-2, T=0.02), initial_vorticity(smooth_u0(grid33, 1e4), 0.1),
                                    noise)
    with pytest.raises(ValueError):
        simulate_vorticity_additive(cfg(), q0, noise, solver=VorticitySolver(grid33, 0.2))


def test_equivalence_noise_free(setup, grid33):
    system, noise = setup
    quiet = AdditiveNoiseModel.from_noise(noise.base.with_nu_tilde(0.0))
    out = check_equivalence(cfg(nu_tilde=0.0, T=0.01), system, quiet, smooth_u0(grid33))
    assert out["max_relative_discrepancy"] < 0.1
    assert out["relative_discrepancy"][0] < 1e-8
    assert len(out["times"]) == 3


def test_equivalence_zero_state_linear_noise(setup, grid33):
    system, noise = setup
    out = check_equivalence(cfg(nonlinear=False), system, noise, VectorField.from_array(
        grid33, np.zeros((2,) + grid33.shape)))
    # zero reference: absolute discrepancies, driven only by the projection of the noise
    assert np.isfinite(out["max_relative_discrepancy"])
    assert out["relative_discrepancy"][0] == 0.0


def test_energy_law_transport_off(setup):
    _, noise = setup
    c = cfg(nu=0.01, nu_tilde=0.01, T=0.05)
    m = noise.s.shape[1]
    q0 = np.zeros(m)
    ens = [simulate_vorticity_additive(c, q0, noise, BrownianPath.generate(9, p, 3, c.n_steps, c.dt),
                                       transport=False) for p in range(40)]
    res = check_vorticity_energy_law(ens, bin_steps=10)
    assert res["paths"] == 40 and len(res["z"]) == 5
    assert res["passed"]


def test_energy_law_noise_free_defect_is_first_order(setup, grid33):
    # without noise the only defect is the left-point drift quadrature, O(dt) over a fixed time
    _, noise = setup
    quiet = AdditiveNoiseModel.from_noise(noise.base.with_nu_tilde(0.0))
    q0 = initial_vorticity(smooth_u0(grid33), 0.1)
    tot = []
    for dt in (1e-3, 5e-4):
        ens = [simulate_vorticity_additive(cfg(nu_tilde=0.0, dt=dt), q0, quiet, transport=False)
               for _ in range(2)]
        res = check_vorticity_energy_law(ens, bin_steps=int(round(0.005 / dt)))
        assert np.all(np.array(res["standard_error"]) == 0.0)
        tot.append(abs(sum(res["mean_defect"])))
    assert tot[0] / tot[1] == pytest.approx(2.0, rel=0.1)
    with pytest.raises(ValueError):
        check_vorticity_energy_law(ens[:1])


def test_h3_from_vorticity(grid33):
    u = smooth_u0(grid33)
    q = initial_vorticity(u, 0.1)
    b = h3_from_vorticity(u, q, 0.1)
    assert b > 0 and h3_from_vorticity(u, 2 * q, 0.1) > b
    with pytest.raises(ValueError):
        h3_from_vorticity(u, q, 0.0)
