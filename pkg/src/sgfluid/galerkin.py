"""Truncated stochastic second-grade system in the W-basis and its time integrators.

With ``u = sum_i c_i e_i`` the Ito system reads

    dc = [Lam (-nu K c - NL(c)) - 1/2 nu_t Lam Q c] dt + sqrt(nu_t) sum_k Lam S_k c dW_k

where ``Lam = diag(lambda_i)`` converts V-pairings into coefficient rates and

* ``K_ij   = <grad e_i, grad e_j>``
* ``NL_i   = b(u, u - alpha^2 lap u, e_i) + alpha^2 b(e_i, lap u, u)``  (quadratic tensor)
* ``S_k,ij = b(sigma_k, e_j, e_i)``, skew, so the noise is V-energy neutral
* ``Q_ij   = sum_k <y_k(e_i), y_k(e_j)>_V``, where ``y_k(g)`` is the V-Riesz
  representative of ``w -> b(sigma_k, g, w)`` over the full grid space.

The last term is ``<F(u), e_i>`` in weak form: ``F`` pairs the noise with
its resolvent image ``y_k = (I - alpha^2 A)^{-1} G_k(u)``.  Because ``y_k``
leaves the span of the first N modes, the Ito system loses V-energy at the
rate ``r(u) = -nu_t sum_k ||(I - P_N) y_k(u)||_V^2``, the finite-N remainder.
The Stratonovich system integrated by the implicit midpoint rule has no such
term: its increments are V-orthogonal to the midpoint state.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .grid import Grid, VectorField, vector_laplacian_array
from .operators import NoiseModel, advect_array
from .stokes import WEigenbasis, stream_of, stream_space

SCHEMES = ("em_ito", "midpoint_strat")
TRAJECTORY_COLUMNS = ("t", "normV2", "normStar2", "normH3s2", "energy_residual", "remainder_integral")


class BlowUpError(RuntimeError):
    pass


class FixedPointError(RuntimeError):
    pass


@dataclass(frozen=True)
class SimConfig:
    """Parameters of one Galerkin run.  ``c_nu``, ``c_nu_tilde`` record ``nu/alpha^2``, ``nu_t/alpha^2``."""

    alpha: float
    nu: float
    nu_tilde: float
    N: int
    dt: float
    T: float
    scheme: str = "midpoint_strat"
    seed: int = 0
    save_stride: int = 10
    c_nu: float | None = None
    c_nu_tilde: float | None = None
    nonlinear: bool = True

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.nu < 0 or self.nu_tilde < 0:
            raise ValueError("nu and nu_tilde must be nonnegative")
        if not 0 < self.dt <= self.T:
            raise ValueError("need 0 < dt <= T")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.save_stride < 1:
            raise ValueError("save_stride must be >= 1")
        ratio = self.T / self.dt
        if abs(ratio - round(ratio)) > 1e-9 * ratio:
            raise ValueError("T must be an integer multiple of dt")

    @classmethod
    def scaled(cls, alpha: float, c_nu: float, c_nu_tilde: float, **kw) -> "SimConfig":
        """Config in the scaling regime ``nu = c_nu alpha^2``, ``nu_t = c_nu_tilde alpha^2``."""
        return cls(alpha=alpha, nu=c_nu * alpha**2, nu_tilde=c_nu_tilde * alpha**2,
                   c_nu=c_nu, c_nu_tilde=c_nu_tilde, **kw)

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass(frozen=True)
class GalerkinState:
    t: float
    c: np.ndarray


@dataclass(frozen=True)
class BrownianPath:
    """Increments ``dW[step, k]`` drawn from a Philox stream keyed by ``(seed, path_id)``.

    Normals are drawn step-major, so step ``s`` mode ``k`` always comes from
    the same counter position.  ``coarsen`` sums consecutive increments,
    which gives the same Brownian path sampled on a coarser time grid.
    """

    seed: int
    path_id: int
    dt: float
    increments: np.ndarray

    @classmethod
    def generate(cls, seed: int, path_id: int, K: int, n_steps: int, dt: float) -> "BrownianPath":
        key = np.array([seed % 2**64, path_id % 2**64], dtype=np.uint64)
        rng = np.random.Generator(np.random.Philox(key=key))
        z = rng.standard_normal((n_steps, K)) if K else np.zeros((n_steps, 0))
        return cls(seed, path_id, dt, z * math.sqrt(dt))

    @property
    def K(self) -> int:
        return self.increments.shape[1]

    @property
    def n_steps(self) -> int:
        return self.increments.shape[0]

    def coarsen(self, factor: int) -> "BrownianPath":
        if self.n_steps % factor:
            raise ValueError("number of steps not divisible by the coarsening factor")
        inc = self.increments.reshape(self.n_steps // factor, factor, self.K).sum(axis=1)
        return BrownianPath(self.seed, self.path_id, self.dt * factor, inc)


class GalerkinSystem:
    """Precomputed Galerkin tensors for one W-basis, noise model and ``alpha``."""

    def __init__(self, basis: WEigenbasis, noise: NoiseModel, nonlinear_tensors: bool = True):
        if noise.grid != basis.grid:
            raise ValueError("noise and basis live on different grids")
        self.basis = basis
        self.noise = noise
        self.grid = basis.grid
        self.alpha = basis.alpha
        self.N = basis.N
        self.lam = np.asarray(basis.eigenvalues, dtype=float)
        S = stream_space(self.grid)
        self.space = S
        X = basis.xi
        self.gram_grad = _sym(basis.gram("grad"))
        self.gram_H = _sym(basis.gram("H"))
        self.gram_V = _sym(basis.gram("V"))
        self.gram_star = _sym(basis.gram("star"))
        self.gram_H3s = _sym(basis.gram("H3s"))
        self.fields = S.velocity(X)  # (N, 2, nx, ny)
        if nonlinear_tensors:
            self.T1, self.T2 = self._nonlinear_tensors()
        else:
            self.T1 = self.T2 = np.zeros((self.N,) * 3)
        self.S_k, self.Q_k = self._noise_matrices()
        self.Q = self.Q_k.sum(axis=0) if noise.K else np.zeros((self.N, self.N))

    # -- precomputation --------------------------------------------------
    def _nonlinear_tensors(self):
        E, h, W = self.fields, self.grid.h, self.grid.weights
        EW = E * W
        lapE = vector_laplacian_array(E, h)
        adv = advect_array(E[:, None], E[None, :], h)  # adv[j, l] = (e_j . grad) e_l
        A = np.einsum("icxy,jlcxy->ijl", EW, adv, optimize=True)
        T1 = 0.5 * (A - A.transpose(2, 1, 0))
        advL = advect_array(E[:, None], lapE[None, :], h)  # (e_i . grad) lap e_l
        P = np.einsum("jcxy,ilcxy->ijl", EW, advL, optimize=True)
        Qm = np.einsum("lcxy,ijcxy->ijl", lapE * W, adv, optimize=True)
        Y = 0.5 * P - 0.5 * Qm
        T2 = Y - Y.transpose(1, 0, 2)
        return T1, T2

    def _noise_matrices(self):
        N, K = self.N, self.noise.K
        if K == 0:
            return np.zeros((0, N, N)), np.zeros((0, N, N))
        S = self.space
        E, h, W = self.fields, self.grid.h, self.grid.weights
        lu = S.lu_v(float(self.alpha))
        X = self.basis.xi
        Sk, Qk = [], []
        for sig in self.noise.sigma_arrays:
            # gradient of w -> b(sigma, e_j, w) with respect to node values of w
            first = 0.5 * W * advect_array(sig, E, h)
            flux = W * sig[None, :, None] * E[:, None, :]  # (N, axis, comp, nx, ny)
            second = np.stack([S.Dx.T @ flux[:, 0, c].reshape(N, -1).T + S.Dy.T @ flux[:, 1, c].reshape(N, -1).T
                               for c in range(2)])  # (comp, P, N)
            G = first.reshape(N, 2, -1).transpose(1, 2, 0) - 0.5 * second
            beta = S.U.T @ G.reshape(-1, N)  # (n_free, N)
            Smat = X @ beta
            Sk.append(0.5 * (Smat - Smat.T))
            y = lu.solve(beta)
            Qk.append(_sym(beta.T @ y))
        return np.stack(Sk), np.stack(Qk)

    # -- coefficient maps ------------------------------------------------
    def nonlinear(self, c: np.ndarray) -> np.ndarray:
        T = self.T1 + self.alpha**2 * self.T2
        return np.einsum("ijl,j,l->i", T, c, c, optimize=True)

    def linear_part(self, c: np.ndarray, cfg: SimConfig, ito: bool = True) -> np.ndarray:
        out = -cfg.nu * (self.gram_grad @ c)
        if ito and self.noise.K:
            out = out - 0.5 * cfg.nu_tilde * (self.Q @ c)
        return self.lam * out

    def quadratic_part(self, c: np.ndarray, cfg: SimConfig) -> np.ndarray:
        if not cfg.nonlinear:
            return np.zeros_like(c)
        return -self.lam * self.nonlinear(c)

    def drift(self, c: np.ndarray, cfg: SimConfig, ito: bool = True) -> np.ndarray:
        return self.linear_part(c, cfg, ito) + self.quadratic_part(c, cfg)

    def diffusion(self, c: np.ndarray, cfg: SimConfig, k: int) -> np.ndarray:
        return math.sqrt(cfg.nu_tilde) * self.lam * (self.S_k[k] @ c)

    def diffusion_all(self, c: np.ndarray, cfg: SimConfig) -> np.ndarray:
        """All noise directions at once, shape ``(K, N)``."""
        if self.noise.K == 0:
            return np.zeros((0, self.N))
        return math.sqrt(cfg.nu_tilde) * self.lam * (self.S_k @ c)

    def remainder(self, c: np.ndarray, cfg: SimConfig) -> float:
        """``-nu_t sum_k ||(I - P_N) y_k(u)||_V^2`` (nonpositive)."""
        if self.noise.K == 0 or cfg.nu_tilde == 0:
            return 0.0
        Sc = self.S_k @ c
        full = float(c @ (self.Q @ c))
        kept = float(np.sum(self.lam * Sc**2))
        return -cfg.nu_tilde * (full - kept)

    # -- norms -----------------------------------------------------------
    def normV2(self, c):
        return float(np.sum(c**2 / self.lam))

    def grad2(self, c):
        return float(c @ (self.gram_grad @ c))

    def star2(self, c):
        return float(c @ (self.gram_star @ c))

    def H3s2(self, c):
        return float(c @ (self.gram_H3s @ c))

    def H2(self, c):
        return float(c @ (self.gram_H @ c))

    def stream_coords(self, c: np.ndarray) -> np.ndarray:
        return np.asarray(c) @ self.basis.xi

    def velocity(self, c: np.ndarray) -> VectorField:
        return VectorField.from_array(self.grid, self.space.velocity(self.stream_coords(c)), "no-slip")


def _sym(a):
    return 0.5 * (a + a.T)


# ---------------------------------------------------------------------------
# public operations


def project_initial(u0: VectorField, basis: WEigenbasis, norm: str = "W") -> GalerkinState:
    """Galerkin initial state: ``c_i = <u0, e_i>_W`` (``norm='W'``) or the V-orthogonal projection.

    The stream function of ``u0`` is recovered by inverting ``perp_grad``;
    for fields of the form ``perp_grad`` of a clamped stream the recovery is
    exact, so ``u0 = e_j`` maps to the unit vector ``j``.  ``norm='V'`` gives
    ``c_i = lambda_i <u0, e_i>_V``, the best V-norm approximation in the span,
    which stays close to ``u0`` in L2 when ``u0`` carries a thin layer that
    dominates its W-norm.  Both agree on the span and converge as N grows.
    """
    S = stream_space(basis.grid)
    xi0 = S.restrict(stream_of(u0).values)
    if norm == "W":
        return GalerkinState(0.0, w_coefficients(xi0, basis))
    if norm == "V":
        return GalerkinState(0.0, basis.eigenvalues * (basis.xi @ (S.v_form(basis.alpha) @ xi0)))
    raise ValueError(f"norm must be 'W' or 'V', got {norm!r}")


def w_coefficients(xi0: np.ndarray, basis: WEigenbasis) -> np.ndarray:
    S = stream_space(basis.grid)
    X = basis.xi
    St = S.star_operator(basis.alpha)
    return X @ (S.v_form(basis.alpha) @ xi0) + S.h**2 * ((St @ X.T).T @ (St @ xi0))


def galerkin_drift(state: GalerkinState, cfg: SimConfig, system: GalerkinSystem) -> np.ndarray:
    """Ito drift of the coefficient vector."""
    return system.drift(np.asarray(state.c, dtype=float), cfg)


def galerkin_diffusion(state: GalerkinState, cfg: SimConfig, system: GalerkinSystem, k: int) -> np.ndarray:
    """Coefficient direction of the ``k``-th noise (0-based), ``sqrt(nu_t) Lam S_k c``."""
    if not 0 <= k < system.noise.K:
        raise IndexError(f"noise index {k} out of range")
    return system.diffusion(np.asarray(state.c, dtype=float), cfg, k)


def galerkin_remainder(state: GalerkinState, cfg: SimConfig, system: GalerkinSystem) -> float:
    return system.remainder(np.asarray(state.c, dtype=float), cfg)


def step_em_ito(state: GalerkinState, dW: np.ndarray, cfg: SimConfig, system: GalerkinSystem) -> GalerkinState:
    """Euler-Maruyama step of the Ito system."""
    c = np.asarray(state.c, dtype=float)
    new = c + cfg.dt * system.drift(c, cfg) + np.asarray(dW) @ system.diffusion_all(c, cfg)
    if not np.all(np.isfinite(new)):
        raise BlowUpError(f"nonfinite state at t = {state.t + cfg.dt:g}")
    return GalerkinState(state.t + cfg.dt, new)


def step_midpoint_strat(state: GalerkinState, dW: np.ndarray, cfg: SimConfig, system: GalerkinSystem,
                        tol: float = 1e-12, max_iter: int = 50) -> GalerkinState:
    """Implicit midpoint step of the Stratonovich system, solved by fixed-point iteration."""
    c = np.asarray(state.c, dtype=float)
    dW = np.asarray(dW)
    new = c.copy()
    scale = max(1.0, float(np.max(np.abs(c))))
    for _ in range(max_iter):
        m = 0.5 * (c + new)
        nxt = c + cfg.dt * system.drift(m, cfg, ito=False) + dW @ system.diffusion_all(m, cfg)
        if not np.all(np.isfinite(nxt)):
            raise BlowUpError(f"nonfinite state at t = {state.t + cfg.dt:g}")
        err = float(np.max(np.abs(nxt - new)))
        new = nxt
        if err <= tol * scale:
            return GalerkinState(state.t + cfg.dt, new)
    raise FixedPointError(f"midpoint iteration did not reach {tol:g} in {max_iter} iterations (dt too large?)")


@dataclass
class Trajectory:
    """Saved states and diagnostics of one path."""

    times: np.ndarray
    states: np.ndarray
    normV2: np.ndarray
    normStar2: np.ndarray
    normH3s2: np.ndarray
    grad2: np.ndarray
    energy_residual: np.ndarray
    remainder_integral: np.ndarray
    blown_up: bool = False
    message: str = ""
    orth_defect: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    meta: dict = field(default_factory=dict)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        buf.write(",".join(TRAJECTORY_COLUMNS) + "\n")
        cols = (self.times, self.normV2, self.normStar2, self.normH3s2, self.energy_residual,
                self.remainder_integral)
        for row in zip(*cols):
            buf.write(",".join(repr(float(v)) for v in row) + "\n")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text


def simulate_path(cfg: SimConfig, system: GalerkinSystem, initial, path: BrownianPath | None = None,
                  check_structure: bool = False) -> Trajectory:
    """Integrate one path and record diagnostics every ``save_stride`` steps.

    ``energy_residual`` is ``|u|_V^2(t) + 2 nu int |grad u|^2 - |u|_V^2(0) - int r``
    with the quadratures matching the scheme: left-point values and the
    remainder ``r`` for Euler-Maruyama, midpoint values and ``r = 0`` for the
    Stratonovich midpoint rule.  With ``check_structure`` the V-orthogonality
    defects ``|sum_i c_i d_i / lambda_i|`` of the nonlinear drift and of the
    noise directions are logged for every step.
    """
    if cfg.N != system.N:
        raise ValueError(f"config N={cfg.N} does not match the system (N={system.N})")
    c = np.asarray(initial.c if isinstance(initial, GalerkinState) else initial, dtype=float).copy()
    S = cfg.n_steps
    if path is None:
        path = BrownianPath.generate(cfg.seed, 0, system.noise.K, S, cfg.dt)
    if path.n_steps != S or path.K != system.noise.K or not math.isclose(path.dt, cfg.dt, rel_tol=1e-12):
        raise ValueError("Brownian path does not match the configuration")
    ito = cfg.scheme == "em_ito"
    v0 = system.normV2(c)
    diss = 0.0
    rem = 0.0
    rows = []
    defects = []

    def record(t, c):
        v = system.normV2(c)
        rows.append((t, c.copy(), v, system.star2(c), system.H3s2(c), system.grad2(c),
                     v + 2 * cfg.nu * diss - v0 - rem, rem))

    record(0.0, c)
    t = 0.0
    blown, msg = False, ""
    for s in range(S):
        dW = path.increments[s]
        try:
            if ito:
                if check_structure:
                    defects.append(_defects(system, c, cfg))
                r = system.remainder(c, cfg)
                g2 = system.grad2(c)
                new = step_em_ito(GalerkinState(t, c), dW, cfg, system).c
                rem += cfg.dt * r
                diss += cfg.dt * g2
            else:
                new = step_midpoint_strat(GalerkinState(t, c), dW, cfg, system).c
                m = 0.5 * (c + new)
                if check_structure:
                    defects.append(_defects(system, m, cfg))
                diss += cfg.dt * system.grad2(m)
        except (BlowUpError, FixedPointError) as exc:
            blown, msg = True, str(exc)
            break
        c = new
        t = (s + 1) * cfg.dt
        if system.normV2(c) > 1e12 * max(v0, 1e-300):
            blown, msg = True, f"norm explosion at t = {t:g}"
            break
        if (s + 1) % cfg.save_stride == 0 or s + 1 == S:
            record(t, c)
    cols = list(zip(*rows))
    return Trajectory(
        times=np.array(cols[0]), states=np.array(cols[1]), normV2=np.array(cols[2]), normStar2=np.array(cols[3]),
        normH3s2=np.array(cols[4]), grad2=np.array(cols[5]), energy_residual=np.array(cols[6]),
        remainder_integral=np.array(cols[7]), blown_up=blown, message=msg,
        orth_defect=np.array(defects).reshape(-1, 2),
        meta={"scheme": cfg.scheme, "seed": path.seed, "path_id": path.path_id},
    )


def _defects(system: GalerkinSystem, c: np.ndarray, cfg: SimConfig) -> tuple[float, float]:
    nl = system.nonlinear(c)
    d_nl = abs(float(np.sum(c * nl)))
    g = system.diffusion_all(c, cfg)
    d_noise = float(np.max(np.abs(g @ (c / system.lam)))) if len(g) else 0.0
    return d_nl, d_noise


def deterministic_config(cfg: SimConfig) -> SimConfig:
    return replace(cfg, nu_tilde=0.0, c_nu_tilde=0.0 if cfg.c_nu_tilde is not None else None)
