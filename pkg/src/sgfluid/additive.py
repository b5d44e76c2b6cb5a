"""Second-grade fluid driven by additive noise, in velocity and in vorticity form.

Velocity form: the Galerkin system of :mod:`sgfluid.galerkin` with the
transport noise replaced by constant coefficient increments

    dc_i = ... + sum_k g_ik dW_k,     g_ik = lambda_i sqrt(nu_t) <sigma_k, e_i>,

and no Ito correction (additive noise has none).

Vorticity form: ``q = curl(u - alpha^2 lap u)`` on the free nodes (distance
>= 2h from the walls) obeys

    dq + (nu / alpha^2 (q - curl u) + u . grad q) dt = sqrt(nu_t) sum_k s_k dW_k,

with ``s_k = curl2d(sigma_k)`` and ``u`` recovered from ``q`` at every stage
by collocating ``curl(1 - alpha^2 lap) perp_grad`` at the free nodes (the
Galerkin side uses the weak form instead).  It is integrated in grid space with the
stochastic Heun scheme, a skew-symmetric advection stencil and explicit
damping, so comparing the two forms is a genuine cross-check of two
discretizations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .galerkin import (
    BlowUpError,
    BrownianPath,
    FixedPointError,
    GalerkinSystem,
    SimConfig,
    Trajectory,
)
from .grid import Grid, ScalarField, VectorField, curl_array
from .operators import NoiseModel
from .stokes import SolveError, free_weights, grad_norm, stream_of, stream_space

DAMPING_LIMIT = 0.5
CFL_LIMIT = 0.5


class StabilityError(ValueError):
    pass


@dataclass(frozen=True)
class AdditiveNoiseModel:
    """Noise fields ``sigma_k`` with their vorticities ``s_k = curl2d(sigma_k)``.

    ``s`` holds free-node values.  The noise enters both forms multiplied
    by ``sqrt(nu_tilde)``.
    """

    base: NoiseModel
    s: np.ndarray  # (K, n_interior)

    @classmethod
    def from_noise(cls, noise: NoiseModel) -> "AdditiveNoiseModel":
        S = stream_space(noise.grid)
        if noise.K == 0:
            return cls(noise, np.zeros((0, S.n_free)))
        s = np.stack([S.restrict(curl_array(sig, noise.grid.h)) for sig in noise.sigma_arrays])
        return cls(noise, s)

    @property
    def K(self) -> int:
        return self.base.K

    @property
    def nu_tilde(self) -> float:
        return self.base.nu_tilde

    @property
    def grid(self) -> Grid:
        return self.base.grid

    def s_norm2(self) -> np.ndarray:
        """``||s_k||^2`` with free-node quadrature, per mode."""
        return self.grid.h**2 * np.sum(self.s**2, axis=1)


# ---------------------------------------------------------------------------
# velocity form


def additive_coefficients(system: GalerkinSystem, noise: AdditiveNoiseModel) -> np.ndarray:
    """``g[k, i] = lambda_i sqrt(nu_t) <sigma_k, e_i>``, shape ``(K, N)``."""
    if noise.K == 0:
        return np.zeros((0, system.N))
    S = system.space
    xi_sigma = S.restrict(np.stack(noise.base.psi))
    pair = (S.mass @ xi_sigma.T).T @ system.basis.xi.T  # <sigma_k, e_i> on the stream subspace
    return math.sqrt(noise.nu_tilde) * system.lam * pair


def simulate_velocity_additive(cfg: SimConfig, system: GalerkinSystem, noise: AdditiveNoiseModel, initial,
                               path: BrownianPath | None = None) -> Trajectory:
    """Integrate the additive-noise Galerkin system along one Brownian path.

    ``energy_residual`` is the pathwise defect of
    ``|u|_V^2(t) - |u|_V^2(0) + 2 nu int |grad u|^2 - 2 int <u, G dW>_V``
    with midpoint quadrature, which the implicit midpoint rule satisfies
    to round-off.  ``remainder_integral`` holds the martingale integral.
    """
    if cfg.N != system.N:
        raise ValueError(f"config N={cfg.N} does not match the system (N={system.N})")
    g = additive_coefficients(system, noise)
    n = cfg.n_steps
    if path is None:
        path = BrownianPath.generate(cfg.seed, 0, noise.K, n, cfg.dt)
    if path.n_steps != n or path.K != noise.K or not math.isclose(path.dt, cfg.dt, rel_tol=1e-12):
        raise ValueError("Brownian path does not match the configuration")
    lam = system.lam
    c = np.asarray(getattr(initial, "c", initial), dtype=float).copy()
    v0 = system.normV2(c)
    diss = mart = 0.0
    rows = []

    def record(t, c):
        v = system.normV2(c)
        rows.append((t, c.copy(), v, system.star2(c), system.H3s2(c), system.grad2(c),
                     v + 2 * cfg.nu * diss - v0 - mart, mart))

    record(0.0, c)
    blown, msg = False, ""
    for s in range(n):
        dW = path.increments[s]
        kick = dW @ g
        try:
            if cfg.scheme == "em_ito":
                new = c + cfg.dt * system.drift(c, cfg, ito=False) + kick
                m = 0.5 * (c + new)
            else:
                new = _midpoint_additive(c, kick, cfg, system)
                m = 0.5 * (c + new)
            if not np.all(np.isfinite(new)):
                raise BlowUpError(f"nonfinite state at t = {(s + 1) * cfg.dt:g}")
        except (BlowUpError, FixedPointError) as exc:
            blown, msg = True, str(exc)
            break
        diss += cfg.dt * system.grad2(m)
        mart += 2.0 * float(np.sum(m * kick / lam))
        c = new
        if (s + 1) % cfg.save_stride == 0 or s + 1 == n:
            record((s + 1) * cfg.dt, c)
    cols = list(zip(*rows))
    return Trajectory(
        times=np.array(cols[0]), states=np.array(cols[1]), normV2=np.array(cols[2]), normStar2=np.array(cols[3]),
        normH3s2=np.array(cols[4]), grad2=np.array(cols[5]), energy_residual=np.array(cols[6]),
        remainder_integral=np.array(cols[7]), blown_up=blown, message=msg,
        meta={"scheme": cfg.scheme, "seed": path.seed, "path_id": path.path_id, "noise": "additive"},
    )


def _midpoint_additive(c, kick, cfg, system, tol=1e-12, max_iter=50):
    new = c + kick
    scale = max(1.0, float(np.max(np.abs(c))))
    for _ in range(max_iter):
        nxt = c + cfg.dt * system.drift(0.5 * (c + new), cfg, ito=False) + kick
        err = float(np.max(np.abs(nxt - new)))
        new = nxt
        if not np.all(np.isfinite(new)):
            raise BlowUpError("nonfinite midpoint iterate")
        if err <= tol * scale:
            return new
    raise FixedPointError(f"midpoint iteration did not reach {tol:g} in {max_iter} iterations")


# ---------------------------------------------------------------------------
# vorticity form


class VorticitySolver:
    """Grid-space right-hand side of the vorticity form on the free nodes of one grid."""

    def __init__(self, grid: Grid, alpha: float):
        if alpha <= 0:
            raise ValueError("alpha must be positive")
        self.grid = grid
        self.alpha = float(alpha)
        S = stream_space(grid)
        self.space = S
        mx, my = grid.nx - 4, grid.ny - 4
        h = grid.h
        cx = sp.diags([-1.0, 1.0], [-1, 1], shape=(mx, mx)) / (2 * h)
        cy = sp.diags([-1.0, 1.0], [-1, 1], shape=(my, my)) / (2 * h)
        # central differences on the free block, zero outside: exactly antisymmetric
        self.Dx = sp.kron(cx, sp.eye(my)).tocsr()
        self.Dy = sp.kron(sp.eye(mx), cy).tocsr()
        self.star = S.star_operator(self.alpha)
        self.lu = S.lu_star(self.alpha)
        self.curl = (S.free_rows @ S.curl).tocsr()

    def stream_coords(self, q: np.ndarray) -> np.ndarray:
        """Free stream coordinates of the velocity with vorticity ``q``."""
        xi = self.lu.solve(np.asarray(q, dtype=float))
        if not np.all(np.isfinite(xi)):
            raise SolveError("collocated elliptic solve returned nonfinite values")
        return xi

    def velocity(self, q: np.ndarray) -> np.ndarray:
        return self.space.velocity(self.stream_coords(q))

    def curl_v_stream(self, xi: np.ndarray) -> np.ndarray:
        """Free-node ``curl(u - alpha^2 lap u)`` of ``u = perp_grad(E xi)``; inverse of :meth:`stream_coords`."""
        return self.star @ xi

    def advection(self, ux: np.ndarray, uy: np.ndarray, q: np.ndarray) -> np.ndarray:
        """Skew form ``1/2 (u . grad q + div(u q))``; ``<q, advection(u, q)> = 0`` for any ``u``."""
        return 0.5 * (ux * (self.Dx @ q) + uy * (self.Dy @ q) + self.Dx @ (ux * q) + self.Dy @ (uy * q))

    def drift(self, q: np.ndarray, nu: float, transport: bool = True) -> tuple[np.ndarray, float, np.ndarray]:
        """Deterministic rate, the CFL speed ``max |u|`` and the damping term ``q - curl u``."""
        S = self.space
        xi = self.stream_coords(q)
        damp = q - self.curl @ xi
        out = -(nu / self.alpha**2) * damp
        umax = 0.0
        if transport:
            u = S.velocity(xi)
            out = out - self.advection(S.restrict(u[0]), S.restrict(u[1]), q)
            umax = float(np.max(np.hypot(u[0], u[1])))
        return out, umax, damp


@dataclass
class VorticityTrajectory:
    """Saved interior vorticity and its diagnostics."""

    grid: Grid
    times: np.ndarray
    q: np.ndarray  # (n_save, n_free)
    q_norm2: np.ndarray
    energy_increments: np.ndarray = field(default_factory=lambda: np.zeros(0))  # per step: d||q||^2
    predicted_drift: np.ndarray = field(default_factory=lambda: np.zeros(0))  # per step: drift of ||q||^2 * dt
    meta: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        lines = ["t,q_norm2"]
        lines += [f"{t!r},{v!r}" for t, v in zip(self.times.tolist(), self.q_norm2.tolist())]
        return "\n".join(lines) + "\n"


def initial_vorticity(u0: VectorField, alpha: float) -> np.ndarray:
    """Free-node ``q0 = curl_v(u0, alpha)`` evaluated on the clamped stream of ``u0``.

    For ``u0 = perp_grad(E xi)`` this is the exact preimage of ``u0`` under the
    elliptic solve, so both formulations start from the same state.
    """
    S = stream_space(u0.grid)
    xi = S.restrict(stream_of(u0).values)
    return S.star_operator(alpha) @ xi


def simulate_vorticity_additive(cfg: SimConfig, q0: np.ndarray, noise: AdditiveNoiseModel,
                                path: BrownianPath | None = None, transport: bool = True,
                                solver: VorticitySolver | None = None) -> VorticityTrajectory:
    """Stochastic Heun integration of the vorticity form.

    ``q0`` holds free-node values (see :func:`initial_vorticity`).  With
    ``transport=False`` the advection term is switched off (the velocity is
    frozen at zero), a test mode for the additive energy law.  Per step the
    increment of ``||q||^2`` and the predicted drift
    ``(-(2 nu / alpha^2) <q - curl u, q> + nu_t sum ||s_k||^2) dt`` at the
    left point are stored for :func:`check_vorticity_energy_law`.
    """
    grid = noise.grid
    solver = solver if solver is not None else VorticitySolver(grid, cfg.alpha)
    if solver.grid != grid or solver.alpha != cfg.alpha:
        raise ValueError("solver does not match the configuration")
    if cfg.nu * cfg.dt / cfg.alpha**2 > DAMPING_LIMIT:
        raise StabilityError(f"explicit damping unstable: nu dt / alpha^2 = {cfg.nu * cfg.dt / cfg.alpha**2:.3g}"
                             f" > {DAMPING_LIMIT}")
    n = cfg.n_steps
    if path is None:
        path = BrownianPath.generate(cfg.seed, 0, noise.K, n, cfg.dt)
    if path.n_steps != n or path.K != noise.K or not math.isclose(path.dt, cfg.dt, rel_tol=1e-12):
        raise ValueError("Brownian path does not match the configuration")
    h2 = grid.h**2
    q = np.asarray(q0, dtype=float).copy()
    amp = math.sqrt(noise.nu_tilde)
    s_sum = noise.nu_tilde * float(np.sum(noise.s_norm2()))
    times, qs, norms, incs, preds = [0.0], [q.copy()], [h2 * float(q @ q)], [], []
    for step in range(n):
        f0, umax, damp = solver.drift(q, cfg.nu, transport)
        if umax * cfg.dt / grid.h > CFL_LIMIT:
            raise StabilityError(f"CFL number {umax * cfg.dt / grid.h:.3f} exceeds {CFL_LIMIT}"
                                 f" at t = {step * cfg.dt:g}")
        kick = amp * (path.increments[step] @ noise.s) if noise.K else 0.0
        pred = q + cfg.dt * f0 + kick
        f1, _, _ = solver.drift(pred, cfg.nu, transport)
        new = q + 0.5 * cfg.dt * (f0 + f1) + kick
        if not np.all(np.isfinite(new)):
            raise BlowUpError(f"nonfinite vorticity at t = {(step + 1) * cfg.dt:g}")
        e0 = h2 * float(q @ q)
        incs.append(h2 * float(new @ new) - e0)
        preds.append(cfg.dt * (-(2 * cfg.nu / cfg.alpha**2) * h2 * float(damp @ q) + s_sum))
        q = new
        if (step + 1) % cfg.save_stride == 0 or step + 1 == n:
            times.append((step + 1) * cfg.dt)
            qs.append(q.copy())
            norms.append(h2 * float(q @ q))
    return VorticityTrajectory(grid, np.array(times), np.array(qs), np.array(norms), np.array(incs),
                               np.array(preds), {"seed": path.seed, "path_id": path.path_id,
                                                 "transport": transport})


# ---------------------------------------------------------------------------
# checks


def check_equivalence(cfg: SimConfig, system: GalerkinSystem, noise: AdditiveNoiseModel, u0: VectorField,
                      path: BrownianPath | None = None) -> dict:
    """Run both forms on one path and compare vorticities at the saved times.

    ``u0`` is first projected onto the Galerkin space, so the two forms
    start from identical states.  The discrepancy is
    ``max_t ||curl_v(u_vel(t)) - q_vor(t)|| / ||q_vor(0)||``.
    """
    from .galerkin import project_initial

    grid = system.grid
    if path is None:
        path = BrownianPath.generate(cfg.seed, 0, noise.K, cfg.n_steps, cfg.dt)
    state = project_initial(u0, system.basis)
    solver = VorticitySolver(grid, cfg.alpha)
    xi0 = system.stream_coords(state.c)
    q0 = solver.curl_v_stream(xi0)
    vel = simulate_velocity_additive(cfg, system, noise, state, path)
    vor = simulate_vorticity_additive(cfg, q0, noise, path, transport=cfg.nonlinear, solver=solver)
    h2 = grid.h**2
    k = min(len(vel.times), len(vor.times))
    q_vel = solver.curl_v_stream((vel.states[:k] @ system.basis.xi).T).T if k else np.zeros((0, len(q0)))
    diff = np.sqrt(h2 * np.sum((q_vel - vor.q[:k]) ** 2, axis=1))
    ref = math.sqrt(h2 * float(q0 @ q0))
    rel = diff / ref if ref > 0 else diff
    # the same comparison for the velocities, in the V norm
    S = system.space
    xi_vor = np.stack([solver.stream_coords(q) for q in vor.q[:k]]) if k else np.zeros((0, S.n_free))
    xi_vel = vel.states[:k] @ system.basis.xi
    V = S.v_form(cfg.alpha)
    dv = xi_vel - xi_vor
    vdiff = np.sqrt(np.einsum("ti,ti->t", dv, (V @ dv.T).T))
    vref = math.sqrt(float(xi0 @ (V @ xi0)))
    vrel = vdiff / vref if vref > 0 else vdiff
    return {
        "grid": [grid.nx, grid.ny], "N": system.N, "dt": cfg.dt, "T": cfg.T, "alpha": cfg.alpha,
        "times": vel.times[:k].tolist(), "relative_discrepancy": rel.tolist(),
        "max_relative_discrepancy": float(np.max(rel)) if k else 0.0,
        "relative_velocity_discrepancy": vrel.tolist(),
        "max_relative_velocity_discrepancy": float(np.max(vrel)) if k else 0.0,
        "velocity_blown_up": vel.blown_up,
    }


def check_vorticity_energy_law(ensemble: list[VorticityTrajectory], bin_steps: int = 10, z_max: float = 3.0,
                               fraction: float = 0.95) -> dict:
    """Compare ensemble-mean increments of ``||q||^2`` with the predicted drift, per time bin.

    Per path and bin, ``D = sum(increments) - sum(predicted drift)``; the
    z-score is ``mean(D) / (std(D) / sqrt(M))``.  Bins with zero spread
    (noise-free runs) report the raw mean instead.
    """
    M = len(ensemble)
    if M < 2:
        raise ValueError("need at least two paths")
    inc = np.stack([tr.energy_increments for tr in ensemble])
    pred = np.stack([tr.predicted_drift for tr in ensemble])
    n = inc.shape[1] // bin_steps * bin_steps
    D = (inc[:, :n] - pred[:, :n]).reshape(M, -1, bin_steps).sum(axis=2)
    mean = D.mean(axis=0)
    se = D.std(axis=0, ddof=1) / math.sqrt(M)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, mean / se, 0.0)
    scale = max(float(np.max(np.abs(inc))), 1e-300)
    exact = se <= 1e-12 * scale
    ok = np.where(exact, np.abs(mean) <= 1e-9 * scale, np.abs(z) <= z_max)
    frac = float(np.mean(ok)) if len(ok) else 1.0
    return {"paths": M, "bin_steps": bin_steps, "z": z.tolist(), "mean_defect": mean.tolist(),
            "standard_error": se.tolist(), "fraction_within": frac, "passed": frac >= fraction}


def h3_from_vorticity(u: VectorField, q: ScalarField | np.ndarray, alpha: float) -> float:
    """Bound ``||q|| / alpha^2 + ||grad u|| / alpha^2 + ||grad u||`` on ``|u|_H3``."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    grid = u.grid
    qa = np.asarray(q.values if isinstance(q, ScalarField) else q, dtype=float)
    if qa.shape == grid.shape:
        qn = math.sqrt(float(np.sum(free_weights(grid) * qa**2)))
    else:
        qn = math.sqrt(grid.h**2 * float(qa @ qa))
    g = grad_norm(u)
    return qn / alpha**2 + g / alpha**2 + g
