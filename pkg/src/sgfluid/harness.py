"""Experiment orchestration: configuration, invariant suite, sweeps, diagnostics and persistence.

Every experiment returns a :class:`~sgfluid.results.ResultTable` (or a JSON
report) together with a :class:`~sgfluid.results.RunManifest` that echoes the
full configuration.  :func:`rerun_manifest` regenerates the outputs from a
manifest alone, and because all randomness comes from keyed Philox streams
and all reductions run in a fixed order, the regenerated files are
byte-identical.
"""

from __future__ import annotations

import configparser
import logging
import math
import warnings
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .additive import (
    AdditiveNoiseModel,
    VorticitySolver,
    check_equivalence,
    check_vorticity_energy_law,
    h3_from_vorticity,
    initial_vorticity,
    simulate_vorticity_additive,
)
from .euler import (
    central_vortex,
    make_initial_family,
    solve_euler,
    velocity_from_vorticity,
    vortex_pair,
)
from .galerkin import (
    BrownianPath,
    GalerkinSystem,
    TRAJECTORY_COLUMNS,
    SimConfig,
    project_initial,
    simulate_path,
)
from .grid import ScalarField, VectorField, clamp_array, divergence, grad, make_grid, perp_grad_array
from .operators import b_hat_pairing, build_noise_model, kato_corrector, trilinear_b
from .results import ResultTable, RunManifest, dumps_report, write_text
from .stokes import (
    cached_stokes_basis,
    elliptic_K_stream,
    leray_project,
    stokes_eigensolve,
    stream_space,
    w_basis,
)

log = logging.getLogger(__name__)

COUPLINGS = ("shared_paths", "independent")
BLOWUP_LIMIT = 0.10


# ---------------------------------------------------------------------------
# configuration


def _check_alpha_grid(grid):
    a = [float(x) for x in grid]
    if not a or any(x <= 0 for x in a) or any(y >= x for x, y in zip(a, a[1:])):
        raise ValueError("alpha_grid must be nonempty, positive and strictly decreasing")
    return tuple(a)


@dataclass(frozen=True)
class SweepConfig:
    """Inviscid-limit sweep: ``nu = c_nu alpha^2``, ``nu_t = c_nu_tilde alpha^2`` along ``alpha_grid``."""

    alpha_grid: tuple = (0.2, 0.1, 0.05, 0.025)
    c_nu: float = 1.0
    c_nu_tilde: float = 1.0
    M: int = 32
    coupling: str = "shared_paths"
    n: int = 65
    N: int = 16
    n_stokes: int = 24
    K: int = 4
    noise_kind: str = "bumps"
    T: float = 0.5
    dt: float = 1e-3
    save_stride: int = 10
    scheme: str = "midpoint_strat"
    projection: str = "V"
    seed: int = 2024

    def __post_init__(self):
        object.__setattr__(self, "alpha_grid", _check_alpha_grid(self.alpha_grid))
        if self.M < 1:
            raise ValueError("M must be >= 1")
        if self.coupling not in COUPLINGS:
            raise ValueError(f"coupling must be one of {COUPLINGS}")


@dataclass(frozen=True)
class EnergyConfig:
    alpha: float = 0.1
    c_nu: float = 1.0
    c_nu_tilde: float = 1.0
    n: int = 65
    N: int = 16
    n_stokes: int = 32
    K: int = 4
    noise_kind: str = "bumps"
    T: float = 0.5
    dt: float = 1e-3
    M: int = 8
    save_stride: int = 10
    remainder_N: tuple = (8, 12, 16, 20, 24)
    remainder_states: int = 20
    seed: int = 11


@dataclass(frozen=True)
class CorrectorConfig:
    alpha_grid: tuple = (0.4, 0.2, 0.1, 0.05)
    n: int = 129
    flow: str = "central_vortex"
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "alpha_grid", _check_alpha_grid(self.alpha_grid))


@dataclass(frozen=True)
class AdditiveConfig:
    alpha: float = 0.1
    c_nu: float = 1.0
    c_nu_tilde: float = 1.0
    n: int = 65
    N: int = 24
    n_stokes: int = 32
    K: int = 4
    dt: float = 5e-4
    T: float = 0.1
    amplitude: float = 10.0
    save_stride: int = 20
    M: int = 64
    bin_steps: int = 5
    seed: int = 7


@dataclass(frozen=True)
class CheckConfig:
    n: int = 33
    N: int = 12
    n_stokes: int = 32
    alpha: float = 0.1
    K: int = 3
    samples: int = 20
    steps: int = 50
    seed: int = 5


@dataclass(frozen=True)
class SimulateConfig:
    alpha: float = 0.1
    c_nu: float = 1.0
    c_nu_tilde: float = 1.0
    n: int = 65
    N: int = 16
    n_stokes: int = 24
    K: int = 4
    noise_kind: str = "bumps"
    T: float = 0.5
    dt: float = 1e-3
    save_stride: int = 10
    scheme: str = "midpoint_strat"
    seed: int = 0
    path_id: int = 0


SECTIONS = {"sweep": SweepConfig, "energy": EnergyConfig, "corrector": CorrectorConfig,
            "additive": AdditiveConfig, "check": CheckConfig, "simulate": SimulateConfig}


def _coerce(value: str, default):
    if isinstance(default, bool):
        return value.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(default, int):
        return int(value)
    if isinstance(default, float):
        return float(value)
    if isinstance(default, tuple):
        return tuple(type(default[0])(v) for v in value.replace(",", " ").split())
    return value.strip()


def load_config(path=None, text: str | None = None) -> dict:
    """Read an INI file (one section per experiment) into config dataclasses.

    Missing sections or keys keep their defaults; unknown keys are errors.
    Keys are case-sensitive (``T``, ``N``, ``M`` and ``K`` are upper case).
    """
    parser = configparser.ConfigParser()
    parser.optionxform = str
    if text is not None:
        parser.read_string(text)
    elif path is not None:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    out = {}
    for name, cls in SECTIONS.items():
        base = cls()
        if parser.has_section(name):
            known = {f.name: getattr(base, f.name) for f in fields(cls)}
            kw = {}
            for key, value in parser.items(name):
                if key not in known:
                    raise KeyError(f"unknown key {key!r} in section [{name}]")
                kw[key] = _coerce(value, known[key])
            base = cls(**{**known, **kw})
        out[name] = base
    for name in parser.sections():
        if name not in SECTIONS:
            raise KeyError(f"unknown section [{name}]")
    return out


def config_dict(cfg) -> dict:
    d = asdict(cfg)
    return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


def with_seed(cfg, seed: int | None):
    if seed is None or not hasattr(cfg, "seed"):
        return cfg
    return replace(cfg, seed=int(seed))


def _stats(x) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    if len(x) == 0:
        return float("nan"), float("nan")
    se = float(np.std(x, ddof=1) / math.sqrt(len(x))) if len(x) > 1 else 0.0
    return float(np.mean(x)), se


# ---------------------------------------------------------------------------
# invariant suite


def _check(report, name, margin, tol, detail=""):
    report["checks"].append({"name": name, "passed": bool(margin <= tol), "value": float(margin),
                             "tolerance": tol, "detail": detail})


def run_invariant_suite(cfg: CheckConfig = CheckConfig(), sabotage: bool = False, cache=None) -> dict:
    """Run every assertable invariant of the spectral and operator layers.

    ``sabotage=True`` evaluates the trilinear form without its skew
    symmetrization, a negative control that must fail the ``b(f,g,g) = 0``
    check.  Failures are report entries, never exceptions.
    """
    grid = make_grid(cfg.n)
    rng = np.random.Generator(np.random.Philox(key=np.array([cfg.seed, 0], dtype=np.uint64)))
    report = {"config": config_dict(cfg), "sabotage": sabotage, "checks": []}
    st = cached_stokes_basis(grid, cfg.n_stokes, cache)
    S = stream_space(grid)
    G = st.gram()
    _check(report, "stokes_H_orthonormal", float(np.max(np.abs(G - np.eye(st.N)))), 1e-10)
    _check(report, "stokes_residuals", float(np.max(st.residuals()) / st.eigenvalues[-1]), 1e-8)
    _check(report, "stokes_nondecreasing", float(max(0.0, -np.min(np.diff(st.eigenvalues)))), 0.0)
    B = w_basis(st, cfg.N, cfg.alpha)
    _check(report, "w_orthonormal", float(np.max(np.abs(B.gram("W") - np.eye(B.N)))), 1e-10)
    GV = B.gram("V")
    _check(report, "w_v_orthogonal",
           float(np.max(np.abs(GV - np.diag(1.0 / B.eigenvalues))) * B.eigenvalues.max()), 1e-8)

    def rand_field():
        a = rng.standard_normal((2,) + grid.shape)
        a[:, ~grid.interior_mask] = 0.0
        return VectorField.from_array(grid, a)

    def rand_noslip():
        c = rng.standard_normal(cfg.N)
        return VectorField.from_array(grid, S.velocity(c @ B.xi), "no-slip")

    idem = div = grad_kill = 0.0
    for _ in range(cfg.samples):
        p = leray_project(rand_field())
        idem = max(idem, float(np.max(np.abs(leray_project(p).array - p.array)) / np.max(np.abs(p.array))))
        div = max(div, float(np.max(np.abs(divergence(p).values[2:-2, 2:-2]))))
        phi = rng.standard_normal(grid.shape)
        phi[~grid.interior_mask] = 0.0
        gp = grad(ScalarField(grid, phi, "dirichlet"))
        grad_kill = max(grad_kill, float(np.max(np.abs(leray_project(gp).array)) / np.max(np.abs(gp.array))))
    _check(report, "leray_idempotent", idem, 1e-10)
    _check(report, "leray_annihilates_gradients", grad_kill, 1e-8)
    skew = bh = 0.0
    for _ in range(cfg.samples):
        f, g, w = rand_noslip(), rand_noslip(), rand_noslip()
        skew = max(skew, abs(trilinear_b(f, g, g, skew=not sabotage)) / max(abs(trilinear_b(f, g, w)), 1e-300))
        bh = max(bh, abs(b_hat_pairing(f, f, cfg.alpha, f)) / max(abs(b_hat_pairing(f, g, cfg.alpha, f)), 1e-300))
    _check(report, "trilinear_skew", skew, 1e-12, "b(f,g,g) relative to a generic b(f,g,h)")
    _check(report, "b_hat_self_pairing", bh, 1e-12, "b_hat(u,u;u) relative to b_hat(u,w;u)")
    # resolvent round trip through the elliptic solve
    rt = 0.0
    for _ in range(min(cfg.samples, 5)):
        xi = rng.standard_normal(cfg.N) @ B.xi
        q = S.star_operator(cfg.alpha) @ xi
        back = VorticitySolver(grid, cfg.alpha).stream_coords(q)
        rt = max(rt, float(np.max(np.abs(back - xi)) / np.max(np.abs(xi))))
    _check(report, "vorticity_round_trip", rt, 1e-8)
    # structure of the Galerkin system along a short run
    noise = build_noise_model("bumps", cfg.K, cfg.alpha**2, grid)
    system = GalerkinSystem(B, noise)
    simc = SimConfig(alpha=cfg.alpha, nu=cfg.alpha**2, nu_tilde=cfg.alpha**2, N=cfg.N, dt=1e-3,
                     T=cfg.steps * 1e-3, seed=cfg.seed)
    c0 = rng.standard_normal(cfg.N)
    tr = simulate_path(simc, system, c0, check_structure=True)
    scale = max(system.normV2(c0), 1e-300)
    _check(report, "galerkin_nonlinear_orthogonal", float(np.max(tr.orth_defect[:, 0])) / scale, 1e-12)
    _check(report, "galerkin_noise_orthogonal", float(np.max(tr.orth_defect[:, 1])) / scale, 1e-12)
    _check(report, "midpoint_energy_identity", float(np.max(np.abs(tr.energy_residual))) / scale, 1e-9)
    report["passed"] = all(c["passed"] for c in report["checks"])
    return report


# ---------------------------------------------------------------------------
# inviscid-limit sweep


SWEEP_COLUMNS = ["alpha", "nu", "nu_tilde", "paths", "blown_up", "unreliable",
                 "E_sup_err2", "se_err2", "alpha2_E_sup_grad2", "se_grad2",
                 "alpha6_E_sup_h3s2", "se_h3s2", "E_sup_err2_coarse", "stride"]


def reference_vorticity(grid):
    """Broad centred vortex pair used as the Euler datum of the sweep and energy runs.

    Its wall slip is small and most of its energy sits in scales a 16-mode
    no-slip basis resolves, so the truncation floor of ``||u - u_bar||^2``
    stays well below the alpha-dependent part at the default sizes.
    """
    return vortex_pair(grid, separation=0.4, radius=0.25, strength=6.0, center=(0.5, 0.5))


def reference_flow(cfg: SweepConfig):
    """Slip initial field ``u_bar0`` and its Euler evolution on the sweep grid and save times."""
    grid = make_grid(cfg.n)
    omega0 = reference_vorticity(grid)
    traj = solve_euler(omega0, grid, cfg.T, cfg.dt, cfg.save_stride)
    return velocity_from_vorticity(omega0), traj


def _path_ids(cfg: SweepConfig, ia: int) -> list[int]:
    if cfg.coupling == "shared_paths":
        return list(range(cfg.M))
    return [ia * cfg.M + p for p in range(cfg.M)]


def run_inviscid_sweep(cfg: SweepConfig = SweepConfig()) -> tuple[ResultTable, RunManifest, dict]:
    """Monte Carlo estimate of ``E sup_t ||u^alpha - u_bar||^2`` and the two scaling columns per ``alpha``.

    The supremum is taken over the saved samples (every ``save_stride``
    steps); ``E_sup_err2_coarse`` repeats it on every other sample to show
    the stride sensitivity.  Paths that blow up are excluded and counted; a
    row with more than 10% of them is flagged unreliable.
    """
    grid = make_grid(cfg.n)
    u_bar0, ref = reference_flow(cfg)
    st = stokes_eigensolve(grid, cfg.n_stokes)
    S = stream_space(grid)
    W = grid.weights
    ref_u = np.stack([perp_grad_array(p, grid.h) for p in ref.psi])  # (n_save, 2, nx, ny)
    ref_norm2 = np.einsum("tcxy,xy->t", ref_u**2, W)
    table = ResultTable(list(SWEEP_COLUMNS))
    per_path = {}
    notes = {}
    for ia, alpha in enumerate(cfg.alpha_grid):
        simc = SimConfig.scaled(alpha, cfg.c_nu, cfg.c_nu_tilde, N=cfg.N, dt=cfg.dt, T=cfg.T, scheme=cfg.scheme,
                                seed=cfg.seed, save_stride=cfg.save_stride)
        B = w_basis(st, cfg.N, alpha)
        noise = build_noise_model(cfg.noise_kind, cfg.K, simc.nu_tilde, grid, st)
        system = GalerkinSystem(B, noise)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            u0 = make_initial_family(u_bar0, alpha)
        if caught:
            notes[f"alpha={alpha!r}"] = [str(w.message) for w in caught]
        state = project_initial(u0, B, cfg.projection)
        E = system.fields
        gram_node = np.einsum("icxy,jcxy,xy->ij", E, E, W)
        cross = np.einsum("icxy,tcxy,xy->ti", E, ref_u, W)  # <e_i, u_bar(t_k)>
        err, grads, h3s, coarse, blown = [], [], [], [], 0
        for pid in _path_ids(cfg, ia):
            path = BrownianPath.generate(cfg.seed, pid, noise.K, simc.n_steps, cfg.dt)
            tr = simulate_path(simc, system, state, path)
            if tr.blown_up:
                blown += 1
                continue
            C = tr.states
            d2 = np.einsum("ti,ij,tj->t", C, gram_node, C) - 2 * np.einsum("ti,ti->t", C, cross) + ref_norm2
            err.append(float(np.max(d2)))
            coarse.append(float(np.max(d2[::2])))
            grads.append(float(np.max(tr.grad2)))
            h3s.append(float(np.max(tr.normH3s2)))
        n_ok = len(err)
        m_err, s_err = _stats(err)
        m_g, s_g = _stats(grads)
        m_h, s_h = _stats(h3s)
        per_path[alpha] = {"err": err, "grad": grads, "h3s": h3s}
        table.add(alpha=alpha, nu=simc.nu, nu_tilde=simc.nu_tilde, paths=n_ok, blown_up=blown,
                  unreliable=blown > BLOWUP_LIMIT * cfg.M, E_sup_err2=m_err, se_err2=s_err,
                  alpha2_E_sup_grad2=alpha**2 * m_g, se_grad2=alpha**2 * s_g,
                  alpha6_E_sup_h3s2=alpha**6 * m_h, se_h3s2=alpha**6 * s_h,
                  E_sup_err2_coarse=_stats(coarse)[0], stride=cfg.save_stride)
        log.info("alpha=%g  E sup err^2 = %.5g +- %.2g", alpha, m_err, s_err)
    table.flags = sweep_flags(table, per_path, cfg)
    manifest = RunManifest("sweep", config_dict(cfg), seeds={"seed": cfg.seed},
                           path_counts={repr(a): r for a, r in zip(cfg.alpha_grid, table.column("paths"))},
                           notes=notes)
    return table, manifest, per_path


def sweep_flags(table: ResultTable, per_path: dict, cfg: SweepConfig) -> dict:
    """Trend assertions with their Monte Carlo separations.

    Consecutive rows must decrease by at least two standard errors of the
    difference.  Under shared paths the difference is paired path by path.
    """
    alphas = table.column("alpha")
    m = table.column("E_sup_err2")
    separations = []
    for a, b in zip(alphas, alphas[1:]):
        x, y = np.asarray(per_path[a]["err"]), np.asarray(per_path[b]["err"])
        if cfg.coupling == "shared_paths" and len(x) == len(y) and len(x) > 1:
            d = x - y
            se = float(np.std(d, ddof=1) / math.sqrt(len(d)))
            diff = float(np.mean(d))
        else:
            diff = float(np.mean(x) - np.mean(y)) if len(x) and len(y) else float("nan")
            se = math.hypot(_stats(x)[1], _stats(y)[1])
        separations.append({"from": a, "to": b, "difference": diff, "se": se,
                            "z": diff / se if se > 0 else float("inf") if diff > 0 else 0.0})
    h3 = table.column("alpha6_E_sup_h3s2")
    g2 = table.column("alpha2_E_sup_grad2")
    return {
        "err_decreasing_2se": all(s["difference"] > 0 and s["z"] >= 2 for s in separations),
        "ratio_last_first": m[-1] / m[0] if m and m[0] > 0 else float("nan"),
        "ratio_ok": bool(m) and m[0] > 0 and m[-1] / m[0] <= 0.5,
        "h3_within_factor_10": bool(h3) and max(h3) <= 10 * min(h3),
        "h3_ratio": max(h3) / min(h3) if h3 and min(h3) > 0 else float("inf"),
        "grad_decreasing": all(b < a for a, b in zip(g2, g2[1:])),
        "any_unreliable": any(table.column("unreliable")),
        "separations": separations,
    }


# ---------------------------------------------------------------------------
# energy identity and finite-N remainder


def run_energy_experiment(cfg: EnergyConfig = EnergyConfig()) -> tuple[dict, RunManifest]:
    """Pathwise energy residuals of both schemes and the finite-N remainder study."""
    grid = make_grid(cfg.n)
    st = stokes_eigensolve(grid, cfg.n_stokes)
    simc = SimConfig.scaled(cfg.alpha, cfg.c_nu, cfg.c_nu_tilde, N=cfg.N, dt=cfg.dt, T=cfg.T,
                            seed=cfg.seed, save_stride=cfg.save_stride)
    B = w_basis(st, max(cfg.N, max(cfg.remainder_N)), cfg.alpha)
    noise = build_noise_model(cfg.noise_kind, cfg.K, simc.nu_tilde, grid, st)
    system = GalerkinSystem(B.truncate(cfg.N), noise)
    u_bar0 = velocity_from_vorticity(reference_vorticity(grid))
    state = project_initial(make_initial_family(u_bar0, cfg.alpha), system.basis)
    v0 = system.normV2(state.c)
    mid, ito, ito_half, series = [], [], [], {}
    fine_cfg = replace(simc, scheme="em_ito", dt=cfg.dt / 2, save_stride=2 * cfg.save_stride)
    for p in range(cfg.M):
        fine = BrownianPath.generate(cfg.seed, p, noise.K, 2 * simc.n_steps, cfg.dt / 2)
        coarse = fine.coarsen(2)
        tm = simulate_path(simc, system, state, coarse)
        te = simulate_path(replace(simc, scheme="em_ito"), system, state, coarse)
        tf = simulate_path(fine_cfg, system, state, fine)
        mid.append(float(np.max(np.abs(tm.energy_residual))) / v0)
        ito.append(abs(float(te.energy_residual[-1])) / v0)
        ito_half.append(abs(float(tf.energy_residual[-1])) / v0)
        if p == 0:
            series = {"t": tm.times.tolist(), "midpoint": tm.energy_residual.tolist(),
                      "em_ito": te.energy_residual.tolist(), "em_ito_half": tf.energy_residual.tolist(),
                      "remainder_integral": te.remainder_integral.tolist()}
    # inviscid lane: the identity without dissipation
    inv = replace(simc, nu=0.0, c_nu=0.0)
    t0 = simulate_path(inv, system, state, BrownianPath.generate(cfg.seed, 0, noise.K, inv.n_steps, cfg.dt))
    inviscid = float(np.max(np.abs(t0.energy_residual))) / v0
    rem = remainder_study(B, noise, simc, cfg.remainder_N, cfg.remainder_states, cfg.seed)
    ratio = float(np.mean(ito) / np.mean(ito_half)) if np.mean(ito_half) > 0 else float("inf")
    report = {
        "midpoint_max_relative_residual": max(mid),
        "em_ito_mean_relative_residual": float(np.mean(ito)),
        "em_ito_half_mean_relative_residual": float(np.mean(ito_half)),
        "em_ito_refinement_factor": ratio,
        "inviscid_midpoint_relative_residual": inviscid,
        "remainder": rem,
        "series_path0": series,
        "flags": {"midpoint_ok": max(mid) <= 1e-6, "em_ito_halves": ratio >= 1.3, "inviscid_ok": inviscid <= 1e-6,
                  "remainder_monotone": rem["monotone"], "remainder_reduction_ok": rem["median_reduction"] >= 2.0},
    }
    manifest = RunManifest("energy", config_dict(cfg), seeds={"seed": cfg.seed}, path_counts={"paths": cfg.M})
    return report, manifest


def remainder_study(basis, noise, simc: SimConfig, Ns, n_states: int, seed: int) -> dict:
    """``|r(u)|`` for nested truncations ``N in Ns`` on random states living in the first ``min(Ns)`` modes."""
    Ns = sorted(int(n) for n in Ns)
    rng = np.random.Generator(np.random.Philox(key=np.array([seed, 99], dtype=np.uint64)))
    systems = {N: GalerkinSystem(basis.truncate(N), noise, nonlinear_tensors=False) for N in Ns}
    vals = np.zeros((n_states, len(Ns)))
    for s in range(n_states):
        c = rng.standard_normal(Ns[0]) * np.sqrt(basis.eigenvalues[: Ns[0]])
        for j, N in enumerate(Ns):
            cc = np.zeros(N)
            cc[: Ns[0]] = c
            vals[s, j] = abs(systems[N].remainder(cc, simc))
    monotone = bool(np.all(np.diff(vals, axis=1) <= 1e-12 * vals[:, :1]))
    red = vals[:, 0] / np.maximum(vals[:, -1], 1e-300)
    return {"N": Ns, "abs_remainder": vals.tolist(), "monotone": monotone,
            "median_reduction": float(np.median(red))}


# ---------------------------------------------------------------------------
# boundary-layer corrector


CORRECTOR_COLUMNS = ["alpha", "delta", "v_norm", "grad_v_norm", "alpha2_over_delta"]


def corrector_flow(cfg: CorrectorConfig) -> VectorField:
    grid = make_grid(cfg.n)
    if cfg.flow == "central_vortex":
        return velocity_from_vorticity(central_vortex(grid))
    if cfg.flow == "vortex_pair":
        return velocity_from_vorticity(vortex_pair(grid))
    raise ValueError(f"unknown flow {cfg.flow!r}")


def run_corrector_diagnostics(cfg: CorrectorConfig = CorrectorConfig()) -> tuple[ResultTable, RunManifest]:
    """Kato correctors with ``delta = alpha`` and log-log slopes of their norms."""
    u_bar = corrector_flow(cfg)
    if cfg.scale != 1.0:
        u_bar = VectorField.from_array(u_bar.grid, cfg.scale * u_bar.array)
    grid = u_bar.grid
    table = ResultTable(list(CORRECTOR_COLUMNS))
    skipped = []
    for a in cfg.alpha_grid:
        delta = a
        if delta < 4 * grid.h:
            warnings.warn(f"delta = {delta} below 4h; row skipped", stacklevel=2)
            skipped.append(a)
            continue
        v = kato_corrector(u_bar, delta)
        table.add(alpha=a, delta=delta, v_norm=v.norm(), grad_v_norm=v.grad_norm(), alpha2_over_delta=a**2 / delta)
    d = np.log(table.column("delta"))
    slopes = {}
    if len(d) >= 2:
        slopes["v_norm"] = float(np.polyfit(d, np.log(table.column("v_norm")), 1)[0])
        slopes["grad_v_norm"] = float(np.polyfit(d, np.log(table.column("grad_v_norm")), 1)[0])
    table.flags = {
        "slopes": slopes,
        "v_slope_ok": 0.4 <= slopes.get("v_norm", -1) <= 0.6,
        "grad_slope_ok": -0.6 <= slopes.get("grad_v_norm", 1) <= -0.4,
        "alpha2_over_delta_decreasing": all(b < a for a, b in zip(table.column("alpha2_over_delta"),
                                                                    table.column("alpha2_over_delta")[1:])),
        "skipped": skipped,
    }
    manifest = RunManifest("corrector", config_dict(cfg))
    return table, manifest


# ---------------------------------------------------------------------------
# additive noise


def additive_initial(grid, amplitude: float) -> VectorField:
    """Smooth no-slip test field: ``perp_grad`` of a clamped polynomial-trigonometric stream."""
    X, Y = grid.mesh
    psi = amplitude * (X * (1 - X) * Y * (1 - Y)) ** 2 * (1 + X + 2 * Y) * np.sin(3 * X + 1)
    return VectorField.from_array(grid, perp_grad_array(clamp_array(psi), grid.h), "no-slip")


def _additive_setup(cfg: AdditiveConfig, n: int, N: int):
    grid = make_grid(n)
    st = stokes_eigensolve(grid, max(cfg.n_stokes, N + 8))
    nu_t = cfg.c_nu_tilde * cfg.alpha**2
    noise = build_noise_model("eigen", cfg.K, nu_t, grid, st)
    B = w_basis(st, N, cfg.alpha)
    return grid, GalerkinSystem(B, noise), AdditiveNoiseModel.from_noise(noise)


def run_equivalence_study(cfg: AdditiveConfig = AdditiveConfig(), levels: int = 2, refine_modes: bool = False,
                          path_id: int = 0) -> dict:
    """Cross-formulation discrepancy at the base resolution and under joint ``(h, dt)`` halving.

    All levels share one Brownian path (generated on the finest step and
    summed down).  ``refine_modes`` also doubles ``N`` per level.
    """
    fine_dt = cfg.dt / 2 ** (levels - 1)
    n_fine = int(round(cfg.T / fine_dt))
    fine = BrownianPath.generate(cfg.seed, path_id, cfg.K, n_fine, fine_dt)
    rows = []
    for lev in range(levels):
        n = (cfg.n - 1) * 2**lev + 1
        N = cfg.N * (2**lev if refine_modes else 1)
        dt = cfg.dt / 2**lev
        grid, system, noise = _additive_setup(cfg, n, N)
        simc = SimConfig.scaled(cfg.alpha, cfg.c_nu, cfg.c_nu_tilde, N=N, dt=dt, T=cfg.T, seed=cfg.seed,
                                save_stride=cfg.save_stride * 2**lev)
        path = fine.coarsen(2 ** (levels - 1 - lev)) if lev < levels - 1 else fine
        rep = check_equivalence(simc, system, noise, additive_initial(grid, cfg.amplitude), path)
        rows.append({k: rep[k] for k in ("grid", "N", "dt", "max_relative_discrepancy",
                                         "max_relative_velocity_discrepancy")})
    d = [r["max_relative_discrepancy"] for r in rows]
    factors = [a / b if b > 0 else float("inf") for a, b in zip(d, d[1:])]
    return {"levels": rows, "refinement_factors": factors, "refine_modes": refine_modes,
            "base_ok": d[0] <= 5e-2, "refinement_ok": all(f >= 1.5 for f in factors)}


def run_additive_experiment(cfg: AdditiveConfig = AdditiveConfig()) -> tuple[dict, RunManifest]:
    """Equivalence and refinement, the vorticity energy law over ``M`` paths, and the H3 surrogate fit."""
    equiv = run_equivalence_study(cfg, levels=2)
    grid, system, noise = _additive_setup(cfg, cfg.n, cfg.N)
    simc = SimConfig.scaled(cfg.alpha, cfg.c_nu, cfg.c_nu_tilde, N=cfg.N, dt=cfg.dt, T=cfg.T, seed=cfg.seed,
                            save_stride=cfg.save_stride)
    u0 = additive_initial(grid, cfg.amplitude)
    q0 = initial_vorticity(u0, cfg.alpha)
    solver = VorticitySolver(grid, cfg.alpha)
    ens = [simulate_vorticity_additive(simc, q0, noise, BrownianPath.generate(cfg.seed, 1000 + p, cfg.K,
                                                                              simc.n_steps, cfg.dt), solver=solver)
           for p in range(cfg.M)]
    law = check_vorticity_energy_law(ens, bin_steps=cfg.bin_steps)
    fit = h3_bound_fit(grid, cfg.alpha, 50, cfg.seed)
    report = {"equivalence": equiv, "energy_law": law, "h3_bound": fit,
              "flags": {"equivalence_base_ok": equiv["base_ok"], "equivalence_refinement_ok": equiv["refinement_ok"],
                        "energy_law_ok": law["passed"]}}
    manifest = RunManifest("additive", config_dict(cfg), seeds={"seed": cfg.seed}, path_counts={"paths": cfg.M})
    return report, manifest


def h3_bound_fit(grid, alpha: float, samples: int, seed: int) -> dict:
    """Fit ``C`` in ``|u|_H3 <= C (||q|| / a^2 + (1 + 1 / a^2) ||grad u||)`` over random smooth no-slip fields."""
    from .stokes import norm_H3s

    rng = np.random.Generator(np.random.Philox(key=np.array([seed, 7], dtype=np.uint64)))
    st = stokes_eigensolve(grid, 16)
    S = stream_space(grid)
    ratios = []
    for _ in range(samples):
        c = rng.standard_normal(st.N) / np.sqrt(st.eigenvalues)
        xi = c @ st.xi
        u = VectorField.from_array(grid, S.velocity(xi), "no-slip")
        q = S.star_operator(alpha) @ xi
        ratios.append(norm_H3s(u) / h3_from_vorticity(u, q, alpha))
    return {"samples": samples, "C": float(np.max(ratios)), "median_ratio": float(np.median(ratios))}


# ---------------------------------------------------------------------------
# persistence


def emit_results(table: ResultTable | None, manifest: RunManifest, directory, name: str | None = None,
                 report: dict | None = None) -> dict:
    """Write ``<name>.csv`` and/or ``<name>.json`` plus ``<name>.manifest.json``; return their SHA-256 index."""
    d = Path(directory)
    name = name or manifest.experiment
    index = {}
    if table is not None:
        index[f"{name}.csv"] = write_text(d / f"{name}.csv", table.to_csv())
    if report is not None:
        index[f"{name}.json"] = write_text(d / f"{name}.json", dumps_report(report))
    manifest.outputs = dict(index)
    index[f"{name}.manifest.json"] = write_text(d / f"{name}.manifest.json", manifest.to_json())
    return index


def run_simulation(cfg: SimulateConfig = SimulateConfig()) -> tuple[ResultTable, dict, RunManifest]:
    """One Galerkin path from the reference datum; the table holds the saved diagnostics."""
    grid = make_grid(cfg.n)
    st = cached_stokes_basis(grid, cfg.n_stokes)
    simc = SimConfig.scaled(cfg.alpha, cfg.c_nu, cfg.c_nu_tilde, N=cfg.N, dt=cfg.dt, T=cfg.T, scheme=cfg.scheme,
                            seed=cfg.seed, save_stride=cfg.save_stride)
    B = w_basis(st, cfg.N, cfg.alpha)
    system = GalerkinSystem(B, build_noise_model(cfg.noise_kind, cfg.K, simc.nu_tilde, grid, st))
    u_bar0, _ = reference_flow(SweepConfig(n=cfg.n, T=cfg.dt, dt=cfg.dt))
    state = project_initial(make_initial_family(u_bar0, cfg.alpha), B, norm="V")
    path = BrownianPath.generate(cfg.seed, cfg.path_id, cfg.K, simc.n_steps, cfg.dt)
    tr = simulate_path(simc, system, state, path)
    table = ResultTable(list(TRAJECTORY_COLUMNS))
    for row in zip(tr.times, tr.normV2, tr.normStar2, tr.normH3s2, tr.energy_residual, tr.remainder_integral):
        table.add(**{k: float(v) for k, v in zip(TRAJECTORY_COLUMNS, row)})
    report = {"blown_up": tr.blown_up, "message": tr.message}
    man = RunManifest("simulate", config_dict(cfg), seeds={"seed": cfg.seed, "path_id": cfg.path_id},
                      path_counts={"paths": 1}, notes=dict(report))
    return table, report, man


def run_experiment(kind: str, cfg):
    """Dispatch to one experiment; returns ``(table, report, manifest)``."""
    if kind == "sweep":
        table, manifest, _ = run_inviscid_sweep(cfg)
        return table, {"flags": table.flags}, manifest
    if kind == "corrector":
        table, manifest = run_corrector_diagnostics(cfg)
        return table, {"flags": table.flags}, manifest
    if kind == "energy":
        report, manifest = run_energy_experiment(cfg)
        return None, report, manifest
    if kind == "additive":
        report, manifest = run_additive_experiment(cfg)
        return None, report, manifest
    if kind == "simulate":
        return run_simulation(cfg)
    if kind == "check":
        report = run_invariant_suite(cfg)
        return None, report, RunManifest("check", config_dict(cfg), seeds={"seed": cfg.seed})
    raise ValueError(f"unknown experiment {kind!r}")


def rerun_manifest(manifest: RunManifest | str | Path, directory) -> dict:
    """Regenerate an experiment's outputs from its manifest into ``directory``."""
    if not isinstance(manifest, RunManifest):
        manifest = RunManifest.from_json(Path(manifest).read_text(encoding="utf-8"))
    cls = SECTIONS[manifest.experiment]
    cfg = cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in manifest.config.items()})
    table, report, fresh = run_experiment(manifest.experiment, cfg)
    return emit_results(table, fresh, directory, report=report)
