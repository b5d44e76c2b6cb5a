import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sgfluid.grid import ScalarField, VectorField, make_grid, perp_grad, vector_from_function, zero_vector
from sgfluid.operators import (
    AMPLITUDE_LAW,
    G_k,
    NoiseModel,
    amplitude,
    b_hat_direct,
    b_hat_pairing,
    build_noise_model,
    bump_centers,
    convective_array,
    curl_v,
    ito_corrector_F,
    kato_corrector,
    layer_cutoff,
    nonic_cutoff,
    quintic_cutoff,
    sup_norms_of,
    trilinear_b,
)
from sgfluid.stokes import curl_v_array, norm_H, resolvent_solve, stream_space


def smooth_noslip(grid, kx=1, ky=1, shift=0.0):
    X, Y = grid.mesh
    psi = (X * (1 - X) * Y * (1 - Y)) ** 2 * np.sin(kx * np.pi * X + shift) * np.cos(ky * np.pi * Y)
    return perp_grad(ScalarField(grid, psi, "dirichlet"))


def bubble(grid, p):
    X, Y = grid.mesh
    return perp_grad(ScalarField(grid, 50 * p * (X * (1 - X) * Y * (1 - Y)) ** 2, "dirichlet"))


def random_noslip(basis, r):
    return VectorField.from_array(basis.grid, basis.space.velocity(r.standard_normal(basis.N) @ basis.xi), "no-slip")


def random_array(grid, r):
    return VectorField.from_array(grid, r.standard_normal((2,) + grid.shape))


# trilinear form


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_trilinear_skew_in_last_slots(seed):
    g = make_grid(17)
    r = np.random.default_rng(seed)
    f, u, w = (random_array(g, r) for _ in range(3))
    assert abs(trilinear_b(f, u, w) + trilinear_b(f, w, u)) < 1e-12 * (1 + abs(trilinear_b(f, u, w)))
    assert abs(trilinear_b(f, u, u)) < 1e-12


def test_trilinear_linear_in_each_slot(grid33, rng):
    f, g, w, z = (random_array(grid33, rng) for _ in range(4))
    a, c = 1.7, -0.3
    lhs = trilinear_b(f * a + z * c, g, w)
    assert lhs == pytest.approx(a * trilinear_b(f, g, w) + c * trilinear_b(z, g, w), rel=1e-12, abs=1e-12)
    lhs = trilinear_b(f, g * a + z * c, w)
    assert lhs == pytest.approx(a * trilinear_b(f, g, w) + c * trilinear_b(f, z, w), rel=1e-12, abs=1e-12)


def test_unsymmetrized_matches_skew_to_second_order():
    errs = []
    for n in (33, 65, 129):
        g = make_grid(n)
        X, Y = g.mesh
        f, u, w = (bubble(g, p) for p in (np.exp(X + 2 * Y), np.sin(3 * X) * np.cos(2 * Y + 1), X**2 + np.cos(5 * Y)))
        errs.append(abs(trilinear_b(f, u, w, skew=False) - trilinear_b(f, u, w)))
    assert errs[1] < errs[0] / 3 and errs[2] < errs[1] / 3


def test_trilinear_zero_field(grid33, rng):
    z = zero_vector(grid33)
    f = random_array(grid33, rng)
    assert trilinear_b(z, f, f) == 0.0 and trilinear_b(f, z, f) == 0.0


def test_trilinear_rejects_mixed_grids(rng):
    a, b = make_grid(17), make_grid(33)
    with pytest.raises(ValueError):
        trilinear_b(random_array(a, rng), random_array(a, rng), random_array(b, rng))


def test_convective_constant_advection_of_linear_field():
    g = make_grid(33)
    f = vector_from_function(g, lambda X, Y: np.ones_like(X), lambda X, Y: np.zeros_like(X))
    u = vector_from_function(g, lambda X, Y: X, lambda X, Y: np.zeros_like(X))
    w = vector_from_function(g, lambda X, Y: np.ones_like(X), lambda X, Y: np.zeros_like(X))
    # (f . grad) u = (1, 0), integral over the unit square is 1
    assert convective_array(f.array, u.array, w.array, g) == pytest.approx(1.0, rel=1e-12)


# rotational term


def test_b_hat_vanishes_on_self_pairing(wbasis33, rng):
    for _ in range(5):
        u, v = random_noslip(wbasis33, rng), random_noslip(wbasis33, rng)
        assert abs(b_hat_pairing(u, v, 0.1, v=v)) < 1e-12
        assert abs(b_hat_pairing(u, u, 0.1)) < 1e-12


def test_b_hat_antisymmetric_in_v_w(wbasis33, rng):
    u, v, w = (random_noslip(wbasis33, rng) for _ in range(3))
    a = b_hat_pairing(u, w, 0.1, v=v)
    b = b_hat_pairing(u, v, 0.1, v=w)
    assert a == pytest.approx(-b, rel=1e-12, abs=1e-14)


def test_b_hat_agrees_with_direct_quadrature():
    rel = []
    for n in (33, 65, 129):
        g = make_grid(n)
        u, w = smooth_noslip(g), smooth_noslip(g, 2, 1, 0.4)
        p, d = b_hat_pairing(u, w, 0.1), b_hat_direct(u, w, 0.1)
        rel.append(abs(p - d) / abs(d))
    assert rel[-1] < 0.05
    assert rel[2] < rel[1] < rel[0]


def test_curl_v_alpha_zero_is_curl(grid33):
    u = smooth_noslip(grid33)
    q0 = curl_v(u, 0.0).values
    q = curl_v(u, 0.3).values
    assert np.allclose(q0, curl_v_array(u.array, grid33.h, 0.0))
    assert not np.allclose(q0, q)


def test_curl_v_linear_in_alpha_squared(grid33):
    u = smooth_noslip(grid33, 2, 1)
    q0, q1, q2 = (curl_v(u, a).values for a in (0.0, 0.1, 0.2))
    # q(alpha) = curl u - alpha^2 curl lap u
    assert np.allclose(q2 - q0, 4 * (q1 - q0), atol=1e-10 * np.abs(q2).max())


# noise


def test_amplitude_law():
    assert AMPLITUDE_LAW == "k^-2"
    assert [amplitude(k) for k in (1, 2, 4)] == [1.0, 0.25, 0.0625]


def test_bump_centers_deterministic_and_inside():
    c = bump_centers(8)
    assert c == bump_centers(8)
    assert all(0.3 <= x <= 0.7 and 0.3 <= y <= 0.7 for x, y, _ in c)
    assert [s for *_, s in c] == [1.0, -1.0] * 4


@pytest.mark.parametrize("kind", ["bumps", "eigen"])
def test_noise_fields_noslip_divfree_normalized(kind, grid33, stokes33):
    nm = build_noise_model(kind, 3, 0.5, grid33, stokes33)
    assert nm.sigma_arrays.shape == (3, 2) + grid33.shape
    S = stream_space(grid33)
    for k, s in enumerate(nm.sigma, start=1):
        a = s.array
        assert np.abs(a[:, ~grid33.interior_mask]).max() == 0.0
        # velocity of a clamped stream: exactly reproduced from its free coordinates
        assert np.allclose(S.velocity(S.restrict(nm.psi[k - 1])), a, atol=1e-12)
        assert np.hypot(a[0], a[1]).max() == pytest.approx(amplitude(k), rel=1e-12)


def test_sup_norms_brute_force(noise33, grid33):
    h = grid33.h
    for s, (linf, w1) in zip(noise33.sigma_arrays, noise33.sup_norms):
        mags = [np.hypot(s[0][i, j], s[1][i, j]) for i in range(grid33.nx) for j in range(grid33.ny)]
        assert linf == max(mags)
        assert w1 >= linf
        central = 0.0
        for c in (0, 1):
            for i in range(1, grid33.nx - 1):
                for j in range(1, grid33.ny - 1):
                    central = max(central, abs(s[c][i + 1, j] - s[c][i - 1, j]) / (2 * h),
                                  abs(s[c][i, j + 1] - s[c][i, j - 1]) / (2 * h))
        assert w1 >= central
    assert sup_norms_of(np.zeros((2,) + grid33.shape), h) == (0.0, 0.0)


def test_noise_validation(grid33):
    with pytest.raises(ValueError):
        build_noise_model("bumps", -1, 0.1, grid33)
    with pytest.raises(ValueError):
        build_noise_model("bumps", 2, -0.1, grid33)
    with pytest.raises(ValueError):
        build_noise_model("waves", 2, 0.1, grid33)


def test_noise_K_zero(grid33):
    nm = build_noise_model("bumps", 0, 0.2, grid33)
    assert nm.K == 0 and nm.sigma_arrays.shape == (0, 2) + grid33.shape
    assert nm.w1inf_sum_sq() == 0.0
    u = smooth_noslip(grid33)
    assert np.abs(ito_corrector_F(u, nm, 0.1).array).max() == 0.0


def test_noise_descriptor_round_trip(noise33):
    d = json.loads(noise33.to_json())
    assert d["amplitude_law"] == AMPLITUDE_LAW and d["K"] == 3
    back = NoiseModel.from_descriptor(noise33.to_json())
    assert np.array_equal(back.sigma_arrays, noise33.sigma_arrays)
    d["amplitude_law"] = "k^-1"
    with pytest.raises(ValueError):
        NoiseModel.from_descriptor(d)


def test_with_nu_tilde_keeps_fields(noise33):
    nm = noise33.with_nu_tilde(0.0)
    assert nm.nu_tilde == 0.0 and nm.sigma is noise33.sigma


def test_G_k_index_and_linearity(noise33, grid33):
    u, v = smooth_noslip(grid33), smooth_noslip(grid33, 2, 1)
    with pytest.raises(IndexError):
        G_k(u, noise33, 3)
    lhs = G_k(u * 2.0 + v, noise33, 1).array
    rhs = 2.0 * G_k(u, noise33, 1).array + G_k(v, noise33, 1).array
    assert np.allclose(lhs, rhs, atol=1e-12 * np.abs(rhs).max())


def test_G_k_sup_bound(noise33, grid33):
    # ||P (sigma . grad) u|| <= ||sigma||_inf ||grad u||, up to the O(h^2) projection defect
    from sgfluid.stokes import grad_norm

    u = smooth_noslip(grid33, 1, 2)
    for k in range(noise33.K):
        assert norm_H(G_k(u, noise33, k)) <= 1.05 * noise33.sup_norms[k][0] * grad_norm(u)


def test_ito_corrector_K1_unrolls(grid33):
    nm = build_noise_model("bumps", 1, 0.1, grid33)
    u = smooth_noslip(grid33)
    expect = 0.5 * G_k(resolvent_solve(G_k(u, nm, 0), 0.2), nm, 0).array
    assert np.allclose(ito_corrector_F(u, nm, 0.2).array, expect, atol=1e-14)
    with pytest.raises(ValueError):
        ito_corrector_F(u, nm, 0.0)


# boundary-layer corrector


@pytest.mark.parametrize("cut", [quintic_cutoff, nonic_cutoff])
def test_cutoff_profiles(cut):
    s = np.linspace(-0.5, 1.5, 401)
    c = cut(s)
    assert np.all(c[s <= 0] == 1.0) and np.all(c[s >= 1] == 0.0)
    assert np.all(np.diff(c) <= 1e-15)
    assert cut(np.array(0.5)) == pytest.approx(0.5)
    eps = 1e-4
    # flat at both ends
    assert abs(cut(np.array(eps)) - 1.0) < 1e-8 and abs(cut(np.array(1 - eps))) < 1e-8


def test_layer_cutoff_support():
    g = make_grid(65)
    chi = layer_cutoff(g, 0.2)
    d = g.boundary_distance
    assert np.all(chi[~g.interior_mask] == 1.0)
    assert np.all(chi[d >= 0.2 - 1e-12] == 0.0)
    assert chi.min() >= 0.0 and chi.max() <= 1.0


def test_kato_corrector_support_and_trace():
    g = make_grid(65)
    X, Y = g.mesh
    psi = np.sin(np.pi * X) * np.sin(np.pi * Y)
    psi[~g.interior_mask] = 0.0
    u = perp_grad(ScalarField(g, psi, "dirichlet"))
    cor = kato_corrector(u, 0.2)
    d = g.boundary_distance
    # supported in the layer, up to one stencil width
    assert np.abs(cor.v.array[:, d > 0.2 + 2 * g.h]).max() == 0.0
    # u_bar - v vanishes on the wall nodes
    diff_ = (u - cor.v).array
    assert np.abs(diff_[:, ~g.interior_mask]).max() < 1e-12
    assert cor.norm() > 0 and cor.grad_norm() > cor.norm()


def test_kato_corrector_linear_and_resolution_guard():
    g = make_grid(65)
    X, Y = g.mesh
    u = vector_from_function(g, lambda X, Y: np.sin(np.pi * Y) * 0 + Y, lambda X, Y: -X)
    a = kato_corrector(u, 0.2)
    b = kato_corrector(u * 2.0, 0.2)
    assert np.allclose(b.v.array, 2 * a.v.array, atol=1e-12)
    with pytest.raises(ValueError):
        kato_corrector(u, 3 * g.h)
    with pytest.raises(ValueError):
        kato_corrector(u, 0.2, make_grid(33))
