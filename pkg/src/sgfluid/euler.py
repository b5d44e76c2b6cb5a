"""Deterministic Euler reference flow and the alpha-indexed family of no-slip initial data.

The Euler solver advances vorticity with the Arakawa Jacobian and classical
RK4.  The stream function solves the 5-point Dirichlet Poisson problem, so
the velocity ``perp_grad(psi)`` has zero normal trace but slips along the
walls.  The Arakawa form conserves the discrete energy ``h^2 psi^T (-L) psi``
and the enstrophy ``h^2 sum omega^2`` semi-discretely.  Reference data are
supported away from the walls, where wall vorticity stays zero.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.fft import dstn, idstn

from .grid import Grid, ScalarField, VectorField, clamp_array, perp_grad_array
from .operators import layer_cutoff
from .results import ResultTable
from .stokes import grad_norm, norm_H, norm_H3s, resolvent_solve, stream_of, stream_space

CFL_MAX = 0.5


class CFLError(ValueError):
    pass


def bump_vorticity(grid: Grid, cx: float, cy: float, radius: float, power: int = 4) -> np.ndarray:
    X, Y = grid.mesh
    r2 = ((X - cx) ** 2 + (Y - cy) ** 2) / radius**2
    return np.where(r2 < 1.0, (1.0 - np.minimum(r2, 1.0)) ** power, 0.0)


def vortex_pair(grid: Grid, separation: float = 0.2, radius: float = 0.15, strength: float = 20.0,
                center=(0.5, 0.45)) -> ScalarField:
    """Two opposite-sign compact vortices side by side; the pair drifts along ``y``."""
    cx, cy = center
    w = strength * (bump_vorticity(grid, cx - separation / 2, cy, radius)
                    - bump_vorticity(grid, cx + separation / 2, cy, radius))
    return ScalarField(grid, w, "free")


def central_vortex(grid: Grid, radius: float = 0.1, strength: float = 20.0) -> ScalarField:
    """Radially symmetric compact vortex at the domain centre."""
    lx, ly = grid.domain
    return ScalarField(grid, strength * bump_vorticity(grid, lx / 2, ly / 2, radius), "free")


def velocity_from_vorticity(omega: ScalarField) -> VectorField:
    """``perp_grad(psi)`` with ``L psi = omega`` (5-point, Dirichlet)."""
    S = stream_space(omega.grid)
    psi = S.full_from_interior(S.lu_poisson.solve(S.interior(omega.values)))
    return VectorField.from_array(omega.grid, perp_grad_array(psi, omega.grid.h))


def arakawa(psi: np.ndarray, w: np.ndarray, h: float) -> np.ndarray:
    """Arakawa Jacobian ``J(psi, w) = psi_x w_y - psi_y w_x`` on interior nodes (zero on the boundary)."""
    p, q = psi, w
    c = (slice(1, -1), slice(1, -1))
    E, W_, N, S_ = (slice(2, None), slice(1, -1)), (slice(None, -2), slice(1, -1)), \
        (slice(1, -1), slice(2, None)), (slice(1, -1), slice(None, -2))
    NE, NW, SE, SW = (slice(2, None), slice(2, None)), (slice(None, -2), slice(2, None)), \
        (slice(2, None), slice(None, -2)), (slice(None, -2), slice(None, -2))
    jpp = (p[E] - p[W_]) * (q[N] - q[S_]) - (p[N] - p[S_]) * (q[E] - q[W_])
    jpx = p[E] * (q[NE] - q[SE]) - p[W_] * (q[NW] - q[SW]) - p[N] * (q[NE] - q[NW]) + p[S_] * (q[SE] - q[SW])
    jxp = q[N] * (p[NE] - p[NW]) - q[S_] * (p[SE] - p[SW]) - q[E] * (p[NE] - p[SE]) + q[W_] * (p[NW] - p[SW])
    out = np.zeros_like(w)
    out[c] = (jpp + jpx + jxp) / (12.0 * h * h)
    return out


@dataclass
class EulerTrajectory:
    grid: Grid
    times: np.ndarray
    omega: np.ndarray  # (n_save, nx, ny)
    psi: np.ndarray  # (n_save, nx, ny)
    energy: np.ndarray  # ||u|| from the conserved discrete form
    enstrophy: np.ndarray  # ||omega|| on interior nodes

    def velocity(self, k: int) -> VectorField:
        return VectorField.from_array(self.grid, perp_grad_array(self.psi[k], self.grid.h))

    def psi_at(self, t: float) -> np.ndarray:
        """Stream function at time ``t`` by linear interpolation between saved samples."""
        if t <= self.times[0]:
            return self.psi[0]
        if t >= self.times[-1]:
            return self.psi[-1]
        k = int(np.searchsorted(self.times, t)) - 1
        t0, t1 = self.times[k], self.times[k + 1]
        s = (t - t0) / (t1 - t0)
        return (1 - s) * self.psi[k] + s * self.psi[k + 1]

    def energy_csv(self) -> str:
        lines = ["t,energy,enstrophy"]
        lines += [f"{t!r},{e!r},{z!r}" for t, e, z in zip(self.times.tolist(), self.energy.tolist(),
                                                           self.enstrophy.tolist())]
        return "\n".join(lines) + "\n"

    def relative_drift(self) -> tuple[float, float]:
        e, z = self.energy, self.enstrophy
        de = float(np.max(np.abs(e - e[0])) / e[0]) if e[0] > 0 else 0.0
        dz = float(np.max(np.abs(z - z[0])) / z[0]) if z[0] > 0 else 0.0
        return de, dz


def solve_euler(omega0: ScalarField, grid: Grid, T: float, dt: float, save_stride: int = 1) -> EulerTrajectory:
    """Integrate ``omega_t + J(psi, omega) = 0``, ``L psi = omega``, with RK4 to time ``T``."""
    if omega0.grid != grid:
        raise ValueError("omega0 lives on a different grid")
    ratio = T / dt
    n = int(round(ratio))
    if n < 1 or abs(ratio - n) > 1e-9 * ratio:
        raise ValueError("T must be a positive integer multiple of dt")
    S = stream_space(grid)
    h = grid.h
    h2 = h * h

    def stream(w):
        return S.full_from_interior(S.lu_poisson.solve(S.interior(w)))

    def rhs(w):
        return -arakawa(stream(w), w, h)

    def cfl(psi):
        u = perp_grad_array(psi, h)
        return dt * float(np.max(np.hypot(u[0], u[1]))) / h

    def measures(w, psi):
        pi = S.interior(psi)
        return np.sqrt(h2 * float(pi @ (-(S.L @ pi)))), np.sqrt(h2 * float(np.sum(S.interior(w) ** 2)))

    w = np.array(omega0.values, dtype=float)
    psi = stream(w)
    times, ws, ps, es, zs = [], [], [], [], []

    def save(t, w, psi):
        e, z = measures(w, psi)
        times.append(t)
        ws.append(w.copy())
        ps.append(psi.copy())
        es.append(e)
        zs.append(z)

    save(0.0, w, psi)
    for s in range(n):
        c = cfl(psi)
        if c > CFL_MAX:
            raise CFLError(f"CFL number {c:.3f} exceeds {CFL_MAX} at t = {s * dt:g}")
        k1 = rhs(w)
        k2 = rhs(w + 0.5 * dt * k1)
        k3 = rhs(w + 0.5 * dt * k2)
        k4 = rhs(w + dt * k3)
        w = w + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        psi = stream(w)
        if (s + 1) % save_stride == 0 or s + 1 == n:
            save((s + 1) * dt, w, psi)
    return EulerTrajectory(grid, np.array(times), np.array(ws), np.array(ps), np.array(es), np.array(zs))


# ---------------------------------------------------------------------------
# initial-data family


LAYER_EXPONENT = 1.2


def layer_width(alpha: float) -> float:
    """Width ``alpha^(6/5)`` of the initial boundary layer.

    A layer of width ``delta`` and slip ``U`` has ``|u|_H3^2 ~ U^2 delta^-5``,
    so this width keeps ``alpha^6 |u0|_H3^2`` of order one while the L2 gap
    (``~ delta``) and ``alpha^2 |grad u0|^2`` (``~ alpha^0.8``) still vanish.
    """
    return float(alpha) ** LAYER_EXPONENT


def make_initial_family(u_bar0: VectorField, alpha: float, method: str = "cutoff",
                        stream: np.ndarray | None = None) -> VectorField:
    """No-slip initial datum ``u0^alpha`` approximating the slip field ``u_bar0``.

    ``method='cutoff'`` removes the wall slip inside a layer of width
    :func:`layer_width`: ``perp_grad(clamp((1 - chi) psi_bar))`` with the C^4
    profile ``chi``.  ``method='resolvent'`` filters with
    ``(I - alpha^2 A)^{-1} P``.  ``stream`` may supply the Dirichlet stream
    function of ``u_bar0`` (saves the sparse inversion on large grids).
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    grid = u_bar0.grid
    if method == "resolvent":
        return resolvent_solve(u_bar0, alpha)
    if method != "cutoff":
        raise ValueError(f"unknown method {method!r}")
    delta = layer_width(alpha)
    if delta < 2 * grid.h:
        warnings.warn(f"layer width {delta:.4g} spans fewer than two cells", stacklevel=2)
    psi_bar = stream_of(u_bar0).values if stream is None else np.asarray(stream)
    g = clamp_array((1.0 - layer_cutoff(grid, delta, "nonic")) * psi_bar)
    return VectorField.from_array(grid, perp_grad_array(g, grid.h), "no-slip")


def poisson_dst(omega: ScalarField) -> ScalarField:
    """Dirichlet solution of the 5-point ``L psi = omega`` by sine transforms (square grids)."""
    grid = omega.grid
    if grid.nx != grid.ny:
        raise ValueError("sine-transform solver needs a square grid")
    m = grid.nx - 2
    k = np.arange(1, m + 1)
    lam = (2.0 * np.cos(np.pi * k / (m + 1)) - 2.0) / grid.h**2
    f = dstn(omega.values[1:-1, 1:-1], type=1)
    out = np.zeros(grid.shape)
    out[1:-1, 1:-1] = idstn(f / (lam[:, None] + lam[None, :]), type=1)
    return ScalarField(grid, out, "dirichlet")


SCALING_COLUMNS = ["alpha", "l2_gap", "alpha2_grad2", "alpha6_h3s2"]


def verify_initial_scalings(u_bar0: VectorField, alpha_grid, method: str = "cutoff", family=None,
                            stream: np.ndarray | None = None) -> ResultTable:
    """Table of ``||u0^a - u_bar0||^2``, ``a^2 ||grad u0^a||^2`` and ``a^6 |u0^a|_H3s^2`` per ``a``.

    Flags: the first two columns strictly decreasing, the third within a factor 10.
    ``family`` overrides the construction with any callable ``(u_bar0, alpha) -> field``.
    """
    alphas = [float(a) for a in alpha_grid]
    if any(b >= a for a, b in zip(alphas, alphas[1:])):
        raise ValueError("alpha_grid must be strictly decreasing")
    if family is None and method == "cutoff" and stream is None:
        stream = stream_of(u_bar0).values
    make = family if family is not None else (lambda u, a: make_initial_family(u, a, method, stream))
    table = ResultTable(list(SCALING_COLUMNS))
    for a in alphas:
        u0 = make(u_bar0, a)
        table.add(alpha=a, l2_gap=norm_H(u0 - u_bar0) ** 2, alpha2_grad2=a**2 * grad_norm(u0) ** 2,
                  alpha6_h3s2=a**6 * norm_H3s(u0) ** 2)
    l2, g2, h3 = table.column("l2_gap"), table.column("alpha2_grad2"), table.column("alpha6_h3s2")
    table.flags = {
        "l2_decreasing": all(b < a for a, b in zip(l2, l2[1:])),
        "grad_decreasing": all(b < a for a, b in zip(g2, g2[1:])),
        "h3_within_factor_10": bool(h3) and max(h3) <= 10 * min(h3),
    }
    return table
