"""Nonlinear and stochastic operators: the trilinear form, transport noise, the Ito corrector
and the Kato boundary-layer corrector.

Convention for the trilinear form::

    b(f, g, h) = 1/2 <(f . grad) g, h> - 1/2 <(f . grad) h, g>

with node stencils and trapezoid quadrature.  It is skew in its last two
slots by construction, and with ``curl(v) x u = q (-u_y, u_x)`` it satisfies
``<curl(v) x u, w> = b(u, v, w) - b(w, v, u)`` for divergence-free fields.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .grid import (
    Grid,
    ScalarField,
    VectorField,
    clamp_array,
    diff,
    diff2,
    perp_grad_array,
    vector_laplacian_array,
)
from .stokes import curl_v_array, leray_project, resolvent_solve, stokes_eigensolve, stream_of

# ---------------------------------------------------------------------------
# trilinear form


def advect_array(f: np.ndarray, g: np.ndarray, h: float) -> np.ndarray:
    """``(f . grad) g`` for node arrays ``(..., 2, nx, ny)``."""
    fx, fy = f[..., 0:1, :, :], f[..., 1:2, :, :]
    return fx * diff(g, -2, h) + fy * diff(g, -1, h)


def convective_array(f: np.ndarray, g: np.ndarray, w: np.ndarray, grid: Grid) -> float:
    """Unsymmetrized ``<(f . grad) g, w>`` with trapezoid weights."""
    return float(np.sum(grid.weights * np.sum(advect_array(f, g, grid.h) * w, axis=-3)))


def trilinear_array(f: np.ndarray, g: np.ndarray, w: np.ndarray, grid: Grid, skew: bool = True) -> float:
    if not skew:
        return convective_array(f, g, w, grid)
    return 0.5 * convective_array(f, g, w, grid) - 0.5 * convective_array(f, w, g, grid)


def _check_same_grid(*fields) -> Grid:
    g = fields[0].grid
    for f in fields[1:]:
        if f.grid != g:
            raise ValueError("fields live on different grids")
    return g


def trilinear_b(f: VectorField, g: VectorField, h: VectorField, skew: bool = True) -> float:
    """Trilinear form ``b(f, g, h)``; ``skew=False`` gives the plain convective quadrature."""
    grid = _check_same_grid(f, g, h)
    return trilinear_array(f.array, g.array, h.array, grid, skew)


def curl_v(u: VectorField, alpha: float) -> ScalarField:
    """``q = curl(u - alpha^2 lap u)`` with the componentwise one-sided Laplacian."""
    return ScalarField(u.grid, curl_v_array(u.array, u.grid.h, alpha))


def b_hat_pairing(u: VectorField, w: VectorField, alpha: float, v: VectorField | None = None) -> float:
    """``<curl(u - alpha^2 lap u) x v, w>`` written as ``b(v, phi, w) - b(w, phi, v)``.

    ``phi = u - alpha^2 lap u``.  With the default ``v = u`` this is the
    pairing of the rotational nonlinearity with ``w``; it vanishes exactly
    for ``w = v`` and flips sign when ``v`` and ``w`` are exchanged.
    """
    v = u if v is None else v
    grid = _check_same_grid(u, v, w)
    phi = u.array - alpha**2 * vector_laplacian_array(u.array, grid.h)
    return trilinear_array(v.array, phi, w.array, grid) - trilinear_array(w.array, phi, v.array, grid)


def b_hat_direct(u: VectorField, w: VectorField, alpha: float) -> float:
    """Plain quadrature of ``<q (-u_y, u_x), w>``; agrees with :func:`b_hat_pairing` to O(h^2)."""
    q = curl_v_array(u.array, u.grid.h, alpha)
    cross = q * (-u.y.values * w.x.values + u.x.values * w.y.values)
    return float(np.sum(u.grid.weights * cross))


# ---------------------------------------------------------------------------
# noise


AMPLITUDE_LAW = "k^-2"


def amplitude(k: int) -> float:
    return float(k) ** -2


def _bump(grid: Grid, cx: float, cy: float, radius: float) -> np.ndarray:
    X, Y = grid.mesh
    r2 = ((X - cx) ** 2 + (Y - cy) ** 2) / radius**2
    return np.where(r2 < 1.0, (1.0 - np.minimum(r2, 1.0)) ** 4, 0.0)


def bump_centers(K: int) -> list[tuple[float, float, float]]:
    """Deterministic bump layout: low-discrepancy centres in [0.3, 0.7]^2, alternating sign."""
    g = 1.32471795724474602596  # plastic number, R2 sequence
    a1, a2 = 1 / g, 1 / g**2
    out = []
    for k in range(1, K + 1):
        cx = 0.3 + 0.4 * ((0.5 + a1 * k) % 1.0)
        cy = 0.3 + 0.4 * ((0.5 + a2 * k) % 1.0)
        out.append((cx, cy, 1.0 if k % 2 else -1.0))
    return out


@dataclass(frozen=True)
class NoiseModel:
    """Finite family of divergence-free no-slip noise fields ``sigma_k = a_k perp_grad(psi_k)``.

    ``psi`` holds the stream functions (clamped trace) scaled so that
    ``max |sigma_k| = a_k``.
    """

    kind: str
    K: int
    nu_tilde: float
    grid: Grid
    psi: tuple = ()
    sigma: tuple = ()
    sup_norms: tuple = ()  # (L_inf, W1_inf) per mode

    @property
    def sigma_arrays(self) -> np.ndarray:
        if self.K == 0:
            return np.zeros((0, 2) + self.grid.shape)
        return np.stack([s.array for s in self.sigma])

    def w1inf_sum_sq(self) -> float:
        return float(sum(w**2 for _, w in self.sup_norms))

    def descriptor(self) -> dict:
        return {"kind": self.kind, "K": self.K, "nu_tilde": self.nu_tilde, "amplitude_law": AMPLITUDE_LAW,
                "grid": [self.grid.nx, self.grid.ny], "seed": None}

    def to_json(self) -> str:
        return json.dumps(self.descriptor(), sort_keys=True)

    @classmethod
    def from_descriptor(cls, d) -> "NoiseModel":
        if isinstance(d, str):
            d = json.loads(d)
        if d.get("amplitude_law", AMPLITUDE_LAW) != AMPLITUDE_LAW:
            raise ValueError(f"unsupported amplitude law {d['amplitude_law']!r}")
        return build_noise_model(d["kind"], int(d["K"]), float(d["nu_tilde"]), Grid(*d["grid"]))

    def with_nu_tilde(self, nu_tilde: float) -> "NoiseModel":
        return NoiseModel(self.kind, self.K, float(nu_tilde), self.grid, self.psi, self.sigma, self.sup_norms)


def sup_norms_of(sigma: np.ndarray, h: float) -> tuple[float, float]:
    """``(max |sigma|, max(max |sigma|, max |d sigma_c / d x_j|))`` over nodes."""
    linf = float(np.max(np.hypot(sigma[0], sigma[1])))
    dmax = max(float(np.max(np.abs(diff(sigma, ax, h)))) for ax in (-2, -1))
    return linf, max(linf, dmax)


def build_noise_model(kind: str, K: int, nu_tilde: float, grid: Grid, stokes=None) -> NoiseModel:
    """Noise fields from clamped bumps (``kind='bumps'``) or Stokes stream functions (``'eigen'``)."""
    if K < 0:
        raise ValueError("K must be nonnegative")
    if nu_tilde < 0:
        raise ValueError("nu_tilde must be nonnegative")
    if kind not in ("bumps", "eigen"):
        raise ValueError(f"unknown noise kind {kind!r}")
    if K == 0:
        return NoiseModel(kind, 0, float(nu_tilde), grid)
    if kind == "bumps":
        raw = [s * _bump(grid, cx, cy, 0.22) for cx, cy, s in bump_centers(K)]
    else:
        if stokes is None or stokes.N < K or stokes.grid != grid:
            stokes = stokes_eigensolve(grid, K)
        raw = [stokes.stream(k).values for k in range(K)]
    psis, sigmas, norms = [], [], []
    for k, p in enumerate(raw, start=1):
        p = clamp_array(p)
        s = perp_grad_array(p, grid.h)
        scale = amplitude(k) / np.max(np.hypot(s[0], s[1]))
        p = p * scale
        s = perp_grad_array(p, grid.h)
        psis.append(p)
        sigmas.append(VectorField.from_array(grid, s, "no-slip"))
        norms.append(sup_norms_of(s, grid.h))
    return NoiseModel(kind, K, float(nu_tilde), grid, tuple(psis), tuple(sigmas), tuple(norms))


def G_k(u: VectorField, noise: NoiseModel, k: int) -> VectorField:
    """Transport noise map ``P((sigma_k . grad) u)`` (``k`` is 0-based)."""
    if not 0 <= k < noise.K:
        raise IndexError(f"noise index {k} out of range for K={noise.K}")
    a = advect_array(noise.sigma[k].array, u.array, u.grid.h)
    return leray_project(VectorField.from_array(u.grid, a))


def ito_corrector_F(u: VectorField, noise: NoiseModel, alpha: float) -> VectorField:
    """``F(u) = 1/2 sum_k P((sigma_k . grad) (I - alpha^2 A)^{-1} P((sigma_k . grad) u))``."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    out = np.zeros((2,) + u.grid.shape)
    for k in range(noise.K):
        y = resolvent_solve(G_k(u, noise, k), alpha)
        out += G_k(y, noise, k).array
    return VectorField.from_array(u.grid, 0.5 * out)


# ---------------------------------------------------------------------------
# boundary-layer corrector


def quintic_cutoff(s: np.ndarray) -> np.ndarray:
    """``chi(s) = 1 - 10 s^3 + 15 s^4 - 6 s^5`` on [0, 1], zero beyond; C^2 at both ends."""
    s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
    return 1.0 - s**3 * (10.0 - 15.0 * s + 6.0 * s**2)


def nonic_cutoff(s: np.ndarray) -> np.ndarray:
    """Degree-9 smoothstep cutoff, C^4 at both ends; used where third derivatives must stay square integrable."""
    s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
    return 1.0 - s**5 * (126.0 - 420.0 * s + 540.0 * s**2 - 315.0 * s**3 + 70.0 * s**4)


CUTOFF_PROFILES = {"quintic": quintic_cutoff, "nonic": nonic_cutoff}


def layer_cutoff(grid: Grid, delta: float, profile: str = "quintic") -> np.ndarray:
    """Cutoff equal to 1 on the walls and 0 at distance >= delta.

    Built as ``1 - prod_side (1 - chi(d_side / delta))`` so it stays smooth
    across the diagonals, where the plain distance function has a kink.
    """
    chi = CUTOFF_PROFILES[profile]
    X, Y = grid.mesh
    lx, ly = grid.domain
    keep = np.ones(grid.shape)
    for d in (X, lx - X, Y, ly - Y):
        keep *= 1.0 - chi(d / delta)
    return 1.0 - keep


def hessian_norm(g: np.ndarray, grid: Grid) -> float:
    """``||Hess g||`` with compact 3-point second differences and trapezoid weights.

    For ``v = perp_grad(g)`` this is ``||grad v||``; the compact stencils
    resolve thin layers better than applying the first-difference operator
    twice.
    """
    h = grid.h
    gxx = diff2(g, -2, h)
    gyy = diff2(g, -1, h)
    gxy = diff(diff(g, -2, h), -1, h)
    return float(np.sqrt(np.sum(grid.weights * (gxx**2 + 2 * gxy**2 + gyy**2))))


@dataclass(frozen=True)
class CorrectorField:
    """Kato corrector ``v = perp_grad(g)`` with ``g`` supported in the layer of width ``delta``."""

    delta: float
    v: VectorField
    stream: ScalarField
    profile: str = "quintic, tensor-product"

    def norm(self) -> float:
        w = self.v.grid.weights
        return float(np.sqrt(np.sum(w * (self.v.x.values**2 + self.v.y.values**2))))

    def grad_norm(self) -> float:
        return hessian_norm(self.stream.values, self.stream.grid)


def kato_corrector(u_bar: VectorField, delta: float, grid: Grid | None = None) -> CorrectorField:
    """Boundary-layer corrector of width ``delta`` for a tangential field ``u_bar``.

    ``psi_bar`` is the Dirichlet stream function of ``u_bar`` (exact inverse of
    ``perp_grad``).  The corrector stream is ``psi_bar - clamp((1 - chi) psi_bar)``,
    so ``u_bar - v`` is ``perp_grad`` of a clamped stream and vanishes on the
    wall nodes exactly.
    """
    grid = u_bar.grid if grid is None else grid
    if grid != u_bar.grid:
        raise ValueError("u_bar lives on a different grid")
    if delta < 4 * grid.h:
        raise ValueError(f"layer width {delta} under-resolved: need delta >= 4h = {4 * grid.h}")
    psi_bar = stream_of(u_bar).values
    chi = layer_cutoff(grid, delta)
    g = psi_bar - clamp_array((1.0 - chi) * psi_bar)
    v = VectorField.from_array(grid, perp_grad_array(g, grid.h))
    return CorrectorField(float(delta), v, ScalarField(grid, g, "dirichlet"))

