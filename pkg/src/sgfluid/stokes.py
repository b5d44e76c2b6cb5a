"""Leray projection, Stokes eigenbasis, resolvent and the W-basis, all through stream functions.

Divergence-free no-slip fields are represented by clamped stream functions.
The free unknowns ``xi`` are the node values at distance >= 2h from the
walls.  The extension ``E`` fills the ring next to the wall with ``psi[1] =
psi[2] / 4``, and the velocity is ``u = perp_grad(E xi)``.  On that subspace

* ``||u||^2``        = ``h^2 xi^T E^T (-L) E xi``  (5-point Dirichlet Laplacian ``L``)
* ``||grad u||^2``   = ``h^2 xi^T E^T B E xi``     (13-point ghost-clamped biharmonic ``B``)
* ``curl u``          = ``L E xi`` on interior nodes
* ``curl(u - a^2 lap u)`` = ``R (L - a^2 B) E xi``, sampled at the free nodes only

The ring rows of ``B`` (ghost reflection) are only O(1/h) consistent
pointwise, so pointwise vorticity-type quantities are never sampled there;
the weak forms are unaffected.

and the Stokes operator acts on stream coordinates as ``-M^{-1} K`` with
``M``, ``K`` the two Gram forms above.  Every spectral object (eigenbasis,
resolvent, W-basis, Galerkin coefficients) uses these forms, so the spectral
identities hold to rounding.  The node-stencil norms further down
(:func:`norm_H` and friends) are the grid-level counterparts.  They agree
with the forms to O(h^2).
"""

from __future__ import annotations

import os
import struct
import warnings
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from pathlib import Path

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spl

from .grid import (
    Grid,
    ScalarField,
    VectorField,
    clamp_array,
    curl_array,
    diff,
    grad_norm2_array,
    parse_snapshot,
    perp_grad_array,
    snapshot_bytes,
    vector_laplacian_array,
)

TOL_EIG = 1e-8
SOLVE_TOL = 1e-11
BASIS_MAGIC = b"SGB1"


class SolveError(RuntimeError):
    pass


def _d1_matrix(n: int, h: float) -> sp.csr_matrix:
    D = sp.lil_matrix((n, n))
    for i in range(1, n - 1):
        D[i, i - 1] = -1 / (2 * h)
        D[i, i + 1] = 1 / (2 * h)
    D[0, :3] = np.array([-3.0, 4.0, -1.0]) / (2 * h)
    D[n - 1, n - 3 :] = np.array([1.0, -4.0, 3.0]) / (2 * h)
    return D.tocsr()


def _inner_selector(m: int) -> sp.csr_matrix:
    """Rows ``1 .. m-2`` of the identity: drop the first and last entry."""
    return sp.eye(m, format="csr")[1:-1]


def _extension_1d(n: int) -> sp.csr_matrix:
    """Map values on nodes 2..n-3 to interior nodes 1..n-2 with the clamped ring."""
    m = n - 2
    e = sp.lil_matrix((m, m - 2))
    for k in range(m - 2):
        e[k + 1, k] = 1.0
    e[0, 0] = 0.25
    e[m - 1, m - 3] = 0.25
    return e.tocsr()


class StreamSpace:
    """Sparse stream-function operators of one grid (cached per grid)."""

    def __init__(self, grid: Grid):
        self.grid = grid
        nx, ny, h = grid.nx, grid.ny, grid.h
        self.h = h
        mx, my = nx - 2, ny - 2
        self.n_interior = mx * my
        self.n_free = (nx - 4) * (ny - 4)
        Tx = sp.diags([1.0, -2.0, 1.0], [-1, 0, 1], shape=(mx, mx)) / h**2
        Ty = sp.diags([1.0, -2.0, 1.0], [-1, 0, 1], shape=(my, my)) / h**2
        self.L = (sp.kron(Tx, sp.eye(my)) + sp.kron(sp.eye(mx), Ty)).tocsc()
        bx = np.zeros(mx)
        bx[[0, -1]] += 1
        by = np.zeros(my)
        by[[0, -1]] += 1
        ghost = np.add.outer(bx, by).ravel() * 2 / h**4
        self.B = (self.L @ self.L + sp.diags(ghost)).tocsc()
        Dx1 = _d1_matrix(nx, h)
        Dy1 = _d1_matrix(ny, h)
        self.Dx = sp.kron(Dx1, sp.eye(ny)).tocsr()
        self.Dy = sp.kron(sp.eye(nx), Dy1).tocsr()
        inner = grid.interior_mask.ravel()
        Lw_full = self.Dx @ self.Dx + self.Dy @ self.Dy
        # curl2d(perp_grad(psi)) restricted to Dirichlet-zero psi
        self.Lw = Lw_full.tocsr()[inner][:, inner].tocsc()
        self.E = sp.kron(_extension_1d(nx), _extension_1d(ny)).tocsc()
        sel = sp.eye(nx * ny, format="csr")[:, inner]
        self.embed_matrix = (sel @ self.E).tocsc()  # free -> full grid
        self.U = sp.vstack([-self.Dy @ self.embed_matrix, self.Dx @ self.embed_matrix]).tocsc()
        self.mass = (h**2 * (self.E.T @ (-self.L) @ self.E)).tocsc()
        self.stiff = (h**2 * (self.E.T @ self.B @ self.E)).tocsc()
        self.curl = (self.L @ self.E).tocsc()
        self.free_rows = sp.kron(_inner_selector(nx - 2), _inner_selector(ny - 2)).tocsr()  # interior -> free

    # -- conversions -------------------------------------------------------
    def embed(self, xi: np.ndarray) -> np.ndarray:
        """Free coordinates -> full-grid stream values, shape ``(..., nx, ny)``."""
        xi = np.asarray(xi, dtype=float)
        full = (self.embed_matrix @ xi.reshape(-1, self.n_free).T).T
        return full.reshape(xi.shape[:-1] + self.grid.shape)

    def restrict(self, psi: np.ndarray) -> np.ndarray:
        return np.asarray(psi)[..., 2:-2, 2:-2].reshape(np.shape(psi)[:-2] + (self.n_free,))

    def velocity(self, xi: np.ndarray) -> np.ndarray:
        """Node velocity ``perp_grad(E xi)``, shape ``(..., 2, nx, ny)``."""
        return perp_grad_array(self.embed(xi), self.h)

    def interior(self, a: np.ndarray) -> np.ndarray:
        return np.asarray(a)[..., 1:-1, 1:-1].reshape(np.shape(a)[:-2] + (self.n_interior,))

    def full_from_interior(self, v: np.ndarray) -> np.ndarray:
        out = np.zeros(self.grid.shape)
        out[1:-1, 1:-1] = np.asarray(v).reshape(self.grid.nx - 2, self.grid.ny - 2)
        return out

    # -- forms -------------------------------------------------------------
    def star_operator(self, alpha: float) -> sp.csc_matrix:
        """Free-node values of ``curl(u - alpha^2 lap u)`` as a square matrix on ``xi``."""
        return (self.free_rows @ (self.L - alpha**2 * self.B) @ self.E).tocsc()

    @lru_cache(maxsize=16)
    def lu_star(self, alpha: float):
        """Factorization of :meth:`star_operator` (collocation inverse of ``curl(1 - alpha^2 lap)``)."""
        return spl.splu(self.star_operator(alpha))

    def v_form(self, alpha: float) -> sp.csc_matrix:
        return (self.mass + alpha**2 * self.stiff).tocsc()

    def norms2(self, xi: np.ndarray, alpha: float) -> dict:
        """Squared H, grad, V, star, W and H3-surrogate norms of ``perp_grad(E xi)``."""
        xi = np.asarray(xi, dtype=float)
        h2 = self.h**2
        H = float(xi @ (self.mass @ xi))
        G = float(xi @ (self.stiff @ xi))
        star = h2 * float(np.sum((self.star_operator(alpha) @ xi) ** 2))
        s1 = h2 * float(np.sum((self.star_operator(1.0) @ xi) ** 2))
        V = H + alpha**2 * G
        return {"H": H, "grad": G, "V": V, "star": star, "W": V + star, "H3s": H + G + s1}

    # -- factorizations ----------------------------------------------------
    @cached_property
    def lu_poisson(self):
        return spl.splu(self.L.tocsc())

    @cached_property
    def lu_wide(self):
        return spl.splu(self.Lw)

    @cached_property
    def lu_mass(self):
        return spl.splu(self.mass)

    @lru_cache(maxsize=16)
    def lu_v(self, alpha: float):
        return spl.splu(self.v_form(alpha))


@lru_cache(maxsize=8)
def stream_space(grid: Grid) -> StreamSpace:
    return StreamSpace(grid)


def _checked_solve(lu, A, b, what: str) -> np.ndarray:
    x = lu.solve(b)
    nb = np.linalg.norm(b)
    res = np.linalg.norm(A @ x - b)
    if not np.all(np.isfinite(x)) or (nb > 0 and res > SOLVE_TOL * max(nb, 1e-300) * 1e3):
        raise SolveError(f"{what}: relative residual {res / max(nb, 1e-300):.3e}")
    return x


# ---------------------------------------------------------------------------
# projection, elliptic solves, resolvent


def stream_of(u: VectorField) -> ScalarField:
    """Dirichlet stream function ``psi`` with ``curl2d(perp_grad(psi)) = curl2d(u)``.

    Inverts ``perp_grad`` exactly on fields of the form ``perp_grad(psi)``
    with ``psi`` vanishing on the boundary.
    """
    S = stream_space(u.grid)
    rhs = S.interior(curl_array(u.array, u.grid.h))
    psi = _checked_solve(S.lu_wide, S.Lw, rhs, "stream inversion")
    return ScalarField(u.grid, S.full_from_interior(psi), "dirichlet")


def leray_project(f: VectorField) -> VectorField:
    """Divergence-free part ``perp_grad(psi)`` with ``psi`` solving the matched Poisson problem.

    The Laplacian used is ``curl2d o perp_grad`` itself, which makes the
    projection exactly idempotent and exactly annihilates ``grad(p)``.
    """
    psi = stream_of(f)
    return VectorField.from_array(f.grid, perp_grad_array(psi.values, f.grid.h))


def _clamped_solve(grid: Grid, q_int: np.ndarray, alpha: float) -> np.ndarray:
    """Free coordinates of the clamped solution of ``lap phi - alpha^2 bilap phi = q``."""
    S = stream_space(grid)
    rhs = -S.h**2 * (S.E.T @ q_int)
    return _checked_solve(S.lu_v(float(alpha)), S.v_form(float(alpha)), rhs, "clamped elliptic solve")


def elliptic_K_stream(q: ScalarField, alpha: float) -> ScalarField:
    """Stream function of :func:`elliptic_K`."""
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    S = stream_space(q.grid)
    q_int = S.interior(q.values)
    if alpha == 0:
        phi = _checked_solve(S.lu_poisson, S.L, q_int, "Dirichlet Poisson solve")
        return ScalarField(q.grid, S.full_from_interior(phi), "dirichlet")
    xi = _clamped_solve(q.grid, q_int, alpha)
    return ScalarField(q.grid, S.embed(xi), "clamped")


def elliptic_K(q: ScalarField, alpha: float) -> VectorField:
    """Velocity ``perp_grad(phi)`` with ``lap phi - alpha^2 bilap phi = q``, ``phi`` clamped.

    For ``alpha > 0`` the problem is posed on the clamped subspace in weak
    form, ``-(M + alpha^2 K) xi = h^2 E^T q``, whose matrix is symmetric
    positive definite.  ``alpha = 0`` falls back to the Dirichlet Poisson
    problem ``L phi = q`` and the result then only has zero normal trace.
    """
    phi = elliptic_K_stream(q, alpha)
    a = perp_grad_array(phi.values, q.grid.h)
    tag = "no-slip" if phi.bc_tag == "clamped" and not np.any(a[:, ~q.grid.interior_mask]) else "free"
    return VectorField.from_array(q.grid, a, tag)


def resolvent_solve(f: VectorField, alpha: float) -> VectorField:
    """``(I - alpha^2 A)^{-1} P f`` computed as ``elliptic_K(curl2d(f), alpha)``."""
    if alpha <= 0:
        raise ValueError("resolvent_solve needs alpha > 0")
    return elliptic_K(ScalarField(f.grid, curl_array(f.array, f.grid.h)), alpha)


def resolvent_stream(xi: np.ndarray, alpha: float, grid: Grid) -> np.ndarray:
    """Resolvent in stream coordinates: solve ``(mass + alpha^2 stiff) r = mass xi``.

    This is ``(I - alpha^2 A)^{-1}`` of the discrete Stokes operator
    ``A = -mass^{-1} stiff`` exactly, so on eigenmodes it reduces to the
    multiplier ``1 / (1 + alpha^2 lambda)``.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    S = stream_space(grid)
    return S.lu_v(float(alpha)).solve(S.mass @ np.asarray(xi, dtype=float))


def stokes_apply(xi: np.ndarray, grid: Grid) -> np.ndarray:
    """Discrete Stokes operator ``A xi = -mass^{-1} stiff xi`` in stream coordinates."""
    S = stream_space(grid)
    return -S.lu_mass.solve(S.stiff @ np.asarray(xi, dtype=float))


# ---------------------------------------------------------------------------
# eigenbases


@dataclass(frozen=True)
class StokesEigenbasis:
    """Smallest Stokes eigenpairs in stream coordinates, H-orthonormal.

    ``xi[i]`` holds the free coordinates of mode ``i``; ``clusters`` lists
    index groups whose eigenvalues coincide to relative 1e-6 (square
    symmetry produces such pairs).
    """

    grid: Grid
    eigenvalues: np.ndarray
    xi: np.ndarray
    clusters: tuple = ()

    @property
    def N(self) -> int:
        return len(self.eigenvalues)

    @property
    def space(self) -> StreamSpace:
        return stream_space(self.grid)

    def stream(self, i: int) -> ScalarField:
        return ScalarField(self.grid, self.space.embed(self.xi[i]), "clamped")

    def velocity(self, i: int) -> VectorField:
        return VectorField.from_array(self.grid, self.space.velocity(self.xi[i]), "no-slip")

    def gram(self) -> np.ndarray:
        return self.xi @ (self.space.mass @ self.xi.T)

    def residuals(self) -> np.ndarray:
        """``||P(lap e_i) + lambda_i e_i||_H`` for every mode."""
        S = self.space
        out = []
        for lam, x in zip(self.eigenvalues, self.xi):
            r = S.stiff @ x - lam * (S.mass @ x)
            out.append(np.sqrt(max(float(r @ S.lu_mass.solve(r)), 0.0)))
        return np.array(out)


def _find_clusters(vals: np.ndarray, rtol: float = 1e-6) -> tuple:
    groups, cur = [], [0]
    for i in range(1, len(vals)):
        if abs(vals[i] - vals[i - 1]) <= rtol * abs(vals[i]):
            cur.append(i)
        else:
            if len(cur) > 1:
                groups.append(tuple(cur))
            cur = [i]
    if len(cur) > 1:
        groups.append(tuple(cur))
    return tuple(groups)


def stokes_pencil(grid: Grid) -> tuple[sp.csc_matrix, sp.csc_matrix]:
    """Stiffness and mass matrices of the clamped stream-function pencil."""
    S = stream_space(grid)
    return S.stiff, S.mass


def stokes_eigensolve(grid: Grid, N: int, extra: int = 6, maxiter: int | None = None) -> StokesEigenbasis:
    """Smallest ``N`` eigenpairs of ``<lap psi, lap phi> = lam <grad psi, grad phi>``, clamped psi.

    Shift-invert Lanczos about zero (the pencil is SPD, so zero lies below
    the spectrum) followed by a Rayleigh-Ritz pass that makes the returned
    modes mass-orthonormal to rounding, including inside degenerate pairs.
    """
    if N < 1:
        raise ValueError("N must be positive")
    S = stream_space(grid)
    k = min(N + extra, S.n_free - 2)
    if k < N:
        raise ValueError("grid too coarse for the requested number of modes")
    # fixed start vector: ARPACK's default draws a new one per call, which breaks byte-identical reruns
    v0 = np.random.Generator(np.random.Philox(key=np.array([grid.nx, grid.ny], dtype=np.uint64))).random(S.n_free)
    try:
        _, vecs = spl.eigsh(S.stiff, k=k, M=S.mass, sigma=0.0, which="LM", tol=1e-13, maxiter=maxiter, v0=v0)
    except spl.ArpackNoConvergence as exc:
        raise SolveError(f"eigensolver did not converge: {exc}") from exc
    Ks = vecs.T @ (S.stiff @ vecs)
    Ms = vecs.T @ (S.mass @ vecs)
    vals, C = sla.eigh(0.5 * (Ks + Ks.T), 0.5 * (Ms + Ms.T))
    X = (vecs @ C).T[:N]
    vals = vals[:N]
    # fix the sign of each mode for reproducibility
    for i in range(N):
        j = np.argmax(np.abs(X[i]))
        if X[i, j] < 0:
            X[i] = -X[i]
    return StokesEigenbasis(grid, vals, X, _find_clusters(vals))


@dataclass(frozen=True)
class WEigenbasis:
    """Eigenfields of the W-versus-V pencil, W-orthonormal.

    ``coeffs`` expresses the modes in the Stokes modes they were built from;
    ``xi`` holds their free stream coordinates.
    """

    grid: Grid
    alpha: float
    eigenvalues: np.ndarray
    xi: np.ndarray
    coeffs: np.ndarray | None = None
    condition: float = float("nan")
    clusters: tuple = ()

    @property
    def N(self) -> int:
        return len(self.eigenvalues)

    @property
    def space(self) -> StreamSpace:
        return stream_space(self.grid)

    def stream(self, i: int) -> ScalarField:
        return ScalarField(self.grid, self.space.embed(self.xi[i]), "clamped")

    def velocity(self, i: int) -> VectorField:
        return VectorField.from_array(self.grid, self.space.velocity(self.xi[i]), "no-slip")

    def gram(self, kind: str) -> np.ndarray:
        """Gram matrix of the modes in the named form ('H', 'grad', 'V', 'star', 'W', 'H3s')."""
        S, X, a = self.space, self.xi, self.alpha
        h2 = S.h**2
        if kind == "H":
            return X @ (S.mass @ X.T)
        if kind == "grad":
            return X @ (S.stiff @ X.T)
        if kind == "V":
            return X @ (S.v_form(a) @ X.T)
        if kind in ("star", "W", "H3s"):
            C = (S.star_operator(a if kind != "H3s" else 1.0) @ X.T)
            G = h2 * C.T @ C
            if kind == "W":
                return G + X @ (S.v_form(a) @ X.T)
            if kind == "H3s":
                return G + X @ ((S.mass + S.stiff) @ X.T)
            return G
        raise ValueError(f"unknown form {kind!r}")

    def truncate(self, N: int) -> "WEigenbasis":
        if N > self.N:
            raise ValueError("cannot extend a basis by truncation")
        c = None if self.coeffs is None else self.coeffs[:, :N]
        return WEigenbasis(self.grid, self.alpha, self.eigenvalues[:N], self.xi[:N], c, self.condition,
                           _find_clusters(self.eigenvalues[:N]))


def w_basis(stokes: StokesEigenbasis, N: int, alpha: float) -> WEigenbasis:
    """W-orthonormal eigenfields of ``K_W c = lam K_V c`` over the span of the Stokes modes."""
    M = stokes.N
    if N > M - 4:
        raise ValueError(f"need N <= M - 4 for spectral headroom (N={N}, M={M})")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    S = stokes.space
    X = stokes.xi
    KV = X @ (S.v_form(alpha) @ X.T)
    C = S.star_operator(alpha) @ X.T
    KW = KV + S.h**2 * (C.T @ C)
    KV = 0.5 * (KV + KV.T)
    KW = 0.5 * (KW + KW.T)
    cond = float(np.linalg.cond(KV))
    if not np.isfinite(cond) or cond > 1e12:
        raise SolveError(f"ill-conditioned V-Gram matrix (condition number {cond:.3e})")
    lam, Cv = sla.eigh(KW, KV)
    Cw = Cv / np.sqrt(lam)  # W-orthonormal columns
    Cw = Cw[:, :N]
    for i in range(N):
        j = np.argmax(np.abs(Cw[:, i]))
        if Cw[j, i] < 0:
            Cw[:, i] = -Cw[:, i]
    return WEigenbasis(stokes.grid, float(alpha), lam[:N], (X.T @ Cw).T, Cw, cond, _find_clusters(lam[:N]))


# ---------------------------------------------------------------------------
# grid-level norms of node fields


def curl_v_array(u: np.ndarray, h: float, alpha: float) -> np.ndarray:
    """``curl(u - alpha^2 lap u)`` with node stencils, for arrays ``(..., 2, nx, ny)``."""
    return curl_array(u - alpha**2 * vector_laplacian_array(u, h), h)


def norm_H(u: VectorField) -> float:
    w = u.grid.weights
    return float(np.sqrt(np.sum(w * (u.x.values**2 + u.y.values**2))))


def grad_norm(u: VectorField) -> float:
    return float(np.sqrt(grad_norm2_array(u.array, u.grid.h, u.grid.weights)))


def norm_V(u: VectorField, alpha: float) -> float:
    return float(np.sqrt(norm_H(u) ** 2 + alpha**2 * grad_norm(u) ** 2))


def free_weights(grid: Grid) -> np.ndarray:
    """Trapezoid weights restricted to nodes at distance >= 2h from the walls."""
    w = np.zeros(grid.shape)
    w[2:-2, 2:-2] = grid.weights[2:-2, 2:-2]
    return w


def norm_star(u: VectorField, alpha: float) -> float:
    """``||curl(u - alpha^2 lap u)||`` over the nodes at distance >= 2h from the walls.

    Closer to the wall the one-sided stencils of the third derivatives are
    not consistent, and including them makes the norm diverge under
    refinement.
    """
    q = curl_v_array(u.array, u.grid.h, alpha)
    return float(np.sqrt(np.sum(free_weights(u.grid) * q**2)))


def norm_W(u: VectorField, alpha: float) -> float:
    return float(np.sqrt(norm_V(u, alpha) ** 2 + norm_star(u, alpha) ** 2))


def norm_H3s(u: VectorField) -> float:
    """Surrogate ``(||u||^2 + ||grad u||^2 + ||curl(u - lap u)||^2)^{1/2}``."""
    return float(np.sqrt(norm_H(u) ** 2 + grad_norm(u) ** 2 + norm_star(u, 1.0) ** 2))


# ---------------------------------------------------------------------------
# basis cache


def cache_dir() -> Path:
    return Path(os.environ.get("SGF_CACHE_DIR", Path.home() / ".cache" / "sgfluid"))


def save_basis(path, basis) -> None:
    """Write a basis: magic, nx, ny, N (uint32 LE), alpha (float64), eigenvalues, mode snapshots."""
    alpha = float(getattr(basis, "alpha", 0.0))
    g = basis.grid
    parts = [BASIS_MAGIC, struct.pack("<IIId", g.nx, g.ny, basis.N, alpha)]
    parts.append(np.ascontiguousarray(basis.eigenvalues, dtype="<f8").tobytes())
    for i in range(basis.N):
        parts.append(snapshot_bytes(basis.stream(i)))
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_bytes(b"".join(parts))


def load_basis(path):
    data = Path(path).read_bytes()
    if data[:4] != BASIS_MAGIC:
        raise ValueError(f"{path}: not a basis cache (bad magic)")
    nx, ny, N, alpha = struct.unpack_from("<IIId", data, 4)
    off = 4 + struct.calcsize("<IIId")
    vals = np.frombuffer(data[off : off + 8 * N], dtype="<f8").astype(float)
    off += 8 * N
    grid = Grid(nx, ny)
    S = stream_space(grid)
    xi = np.empty((N, S.n_free))
    for i in range(N):
        fld, off = parse_snapshot(data, off)
        xi[i] = S.restrict(fld.values)
    if alpha == 0.0:
        return StokesEigenbasis(grid, vals, xi, _find_clusters(vals))
    return WEigenbasis(grid, alpha, vals, xi, None, float("nan"), _find_clusters(vals))


def cached_stokes_basis(grid: Grid, N: int, directory=None) -> StokesEigenbasis:
    """Load the Stokes basis from the cache directory, building and storing it if absent."""
    d = Path(directory) if directory is not None else cache_dir()
    path = d / f"stokes_{grid.nx}x{grid.ny}_N{N}.sgb"
    if path.exists():
        try:
            b = load_basis(path)
            if isinstance(b, StokesEigenbasis) and b.N == N and b.grid == grid:
                return b
        except (ValueError, struct.error):
            warnings.warn(f"ignoring unreadable basis cache {path}")
    b = stokes_eigensolve(grid, N)
    try:
        save_basis(path, b)
    except OSError as exc:
        warnings.warn(f"could not write basis cache {path}: {exc}")
    return b
