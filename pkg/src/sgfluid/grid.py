"""Fields on a uniform node grid over the unit square and their finite-difference calculus.

Every first derivative is taken with one shared operator ``D``: second-order
central differences at interior nodes and second-order one-sided differences
at the boundary.  Because the x- and y-versions of ``D`` act on different
array axes they commute exactly, which makes ``divergence(perp_grad(.))`` and
``curl2d(grad(.))`` vanish to rounding.

Arrays are indexed ``values[i, j]`` with ``i`` along x and ``j`` along y.

A clamped stream function vanishes on the boundary and has zero one-sided
normal derivative there.  In terms of node values this means ``psi[1] =
psi[2] / 4`` next to each wall; :func:`clamp` enforces it.  With that trace
``perp_grad`` returns a field that is exactly zero on boundary nodes.  The
5-point Laplacian and the 13-point biharmonic read a clamped field through
ghost reflection (``psi[-1] = psi[1]``).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

BC_TAGS = ("dirichlet", "clamped", "free")
VECTOR_TAGS = ("free", "no-slip")
_TAG_CODE = {"free": 0, "dirichlet": 1, "clamped": 2}
_CODE_TAG = {v: k for k, v in _TAG_CODE.items()}
SNAPSHOT_MAGIC = b"SGF1"


@dataclass(frozen=True)
class Grid:
    """Uniform node grid with spacing ``h = 1/(nx - 1)``.

    The domain is ``[0, 1] x [0, (ny - 1) h]``, the unit square when
    ``nx == ny``.
    """

    nx: int
    ny: int

    def __post_init__(self):
        if int(self.nx) != self.nx or int(self.ny) != self.ny:
            raise TypeError("node counts must be integers")
        if self.nx < 9 or self.ny < 9:
            raise ValueError(f"grid too small: need nx, ny >= 9, got ({self.nx}, {self.ny})")

    @property
    def h(self) -> float:
        return 1.0 / (self.nx - 1)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def domain(self) -> tuple[float, float]:
        """Side lengths ``(Lx, Ly)``."""
        return (1.0, (self.ny - 1) * self.h)

    @cached_property
    def x(self) -> np.ndarray:
        return np.arange(self.nx) * self.h

    @cached_property
    def y(self) -> np.ndarray:
        return np.arange(self.ny) * self.h

    @cached_property
    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.y, indexing="ij")

    @cached_property
    def interior_mask(self) -> np.ndarray:
        m = np.zeros(self.shape, dtype=bool)
        m[1:-1, 1:-1] = True
        return m

    @cached_property
    def boundary_distance(self) -> np.ndarray:
        X, Y = self.mesh
        lx, ly = self.domain
        d = np.minimum(np.minimum(X, lx - X), np.minimum(Y, ly - Y))
        d[~self.interior_mask] = 0.0
        return d

    @cached_property
    def weights(self) -> np.ndarray:
        """Trapezoid weights; boundary nodes get half, corners a quarter."""
        wx = np.full(self.nx, self.h)
        wy = np.full(self.ny, self.h)
        wx[[0, -1]] *= 0.5
        wy[[0, -1]] *= 0.5
        return np.outer(wx, wy)

    @property
    def n_boundary(self) -> int:
        return int((~self.interior_mask).sum())


def make_grid(nx: int, ny: int | None = None) -> Grid:
    """Build a grid; ``ny`` defaults to ``nx``."""
    return Grid(nx, nx if ny is None else ny)


@dataclass(frozen=True)
class ScalarField:
    grid: Grid
    values: np.ndarray
    bc_tag: str = "free"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ValueError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        if self.bc_tag not in BC_TAGS:
            raise ValueError(f"unknown bc_tag {self.bc_tag!r}")
        if self.bc_tag != "free" and np.any(v[~self.grid.interior_mask] != 0.0):
            raise ValueError(f"{self.bc_tag} field must vanish on boundary nodes")
        object.__setattr__(self, "values", v)

    def __add__(self, other):
        return ScalarField(self.grid, self.values + _vals(other), _join(self, other))

    def __sub__(self, other):
        return ScalarField(self.grid, self.values - _vals(other), _join(self, other))

    def __mul__(self, a: float):
        return ScalarField(self.grid, a * self.values, self.bc_tag)

    __rmul__ = __mul__


@dataclass(frozen=True)
class VectorField:
    x: ScalarField
    y: ScalarField
    bc_tag: str = "free"

    def __post_init__(self):
        if self.x.grid != self.y.grid:
            raise ValueError("components live on different grids")
        if self.bc_tag not in VECTOR_TAGS:
            raise ValueError(f"unknown vector bc_tag {self.bc_tag!r}")
        if self.bc_tag == "no-slip":
            b = ~self.grid.interior_mask
            if np.any(self.x.values[b] != 0.0) or np.any(self.y.values[b] != 0.0):
                raise ValueError("no-slip field must vanish on boundary nodes")

    @property
    def grid(self) -> Grid:
        return self.x.grid

    @property
    def array(self) -> np.ndarray:
        """Stacked components, shape ``(2, nx, ny)``."""
        return np.stack([self.x.values, self.y.values])

    @classmethod
    def from_array(cls, grid: Grid, a: np.ndarray, bc_tag: str = "free") -> "VectorField":
        a = np.asarray(a, dtype=float).reshape((2,) + grid.shape)
        return cls(ScalarField(grid, a[0]), ScalarField(grid, a[1]), bc_tag)

    def __add__(self, other: "VectorField"):
        tag = "no-slip" if self.bc_tag == other.bc_tag == "no-slip" else "free"
        return VectorField.from_array(self.grid, self.array + other.array, tag)

    def __sub__(self, other: "VectorField"):
        tag = "no-slip" if self.bc_tag == other.bc_tag == "no-slip" else "free"
        return VectorField.from_array(self.grid, self.array - other.array, tag)

    def __mul__(self, a: float):
        return VectorField.from_array(self.grid, a * self.array, self.bc_tag)

    __rmul__ = __mul__


def _vals(f):
    return f.values if isinstance(f, ScalarField) else f


def _join(a, b):
    if isinstance(b, ScalarField) and a.bc_tag == b.bc_tag:
        return a.bc_tag
    return "free"


def scalar_from_function(grid: Grid, fn, bc_tag: str = "free") -> ScalarField:
    X, Y = grid.mesh
    return ScalarField(grid, np.broadcast_to(fn(X, Y), grid.shape).astype(float), bc_tag)


def vector_from_function(grid: Grid, fx, fy, bc_tag: str = "free") -> VectorField:
    X, Y = grid.mesh
    ax = np.broadcast_to(fx(X, Y), grid.shape).astype(float)
    ay = np.broadcast_to(fy(X, Y), grid.shape).astype(float)
    return VectorField(ScalarField(grid, ax), ScalarField(grid, ay), bc_tag)


def zero_vector(grid: Grid) -> VectorField:
    return VectorField.from_array(grid, np.zeros((2,) + grid.shape), "no-slip")


# ---------------------------------------------------------------------------
# array-level stencils (operate on the last two axes)


def diff(a: np.ndarray, axis: int, h: float) -> np.ndarray:
    """First derivative along ``axis`` (-2 for x, -1 for y)."""
    a = np.moveaxis(np.asarray(a, dtype=float), axis, 0)
    out = np.empty_like(a)
    out[1:-1] = (a[2:] - a[:-2]) / (2 * h)
    out[0] = (-3 * a[0] + 4 * a[1] - a[2]) / (2 * h)
    out[-1] = (3 * a[-1] - 4 * a[-2] + a[-3]) / (2 * h)
    return np.moveaxis(out, 0, axis)


def diff2(a: np.ndarray, axis: int, h: float, ghost: bool = False) -> np.ndarray:
    """Compact second derivative along ``axis``.

    Boundary rows use ghost reflection when ``ghost`` is set, otherwise the
    second-order one-sided formula.
    """
    a = np.moveaxis(np.asarray(a, dtype=float), axis, 0)
    out = np.empty_like(a)
    out[1:-1] = (a[2:] - 2 * a[1:-1] + a[:-2]) / h**2
    if ghost:
        out[0] = 2 * (a[1] - a[0]) / h**2
        out[-1] = 2 * (a[-2] - a[-1]) / h**2
    else:
        out[0] = (2 * a[0] - 5 * a[1] + 4 * a[2] - a[3]) / h**2
        out[-1] = (2 * a[-1] - 5 * a[-2] + 4 * a[-3] - a[-4]) / h**2
    return np.moveaxis(out, 0, axis)


def lap_array(a: np.ndarray, h: float, ghost: bool = False) -> np.ndarray:
    return diff2(a, -2, h, ghost) + diff2(a, -1, h, ghost)


def vector_laplacian_array(u: np.ndarray, h: float) -> np.ndarray:
    """Componentwise 5-point Laplacian with one-sided boundary rows."""
    return lap_array(u, h)


def curl_array(u: np.ndarray, h: float) -> np.ndarray:
    return diff(u[..., 1, :, :], -2, h) - diff(u[..., 0, :, :], -1, h)


def perp_grad_array(psi: np.ndarray, h: float) -> np.ndarray:
    return np.stack([-diff(psi, -1, h), diff(psi, -2, h)], axis=-3)


def grad_norm2_array(u: np.ndarray, h: float, w: np.ndarray) -> float:
    """Trapezoid value of the squared gradient norm of a (2, nx, ny) field."""
    return float(sum(np.sum(w * diff(u[c], ax, h) ** 2) for c in (0, 1) for ax in (-2, -1)))


def clamp_array(psi: np.ndarray) -> np.ndarray:
    """Impose the clamped trace: zero boundary values and zero one-sided normal slope."""
    p = np.array(psi, dtype=float)
    for axis in (-2, -1):
        p = np.moveaxis(p, axis, 0)
        p[0] = 0.0
        p[-1] = 0.0
        p[1] = p[2] / 4
        p[-2] = p[-3] / 4
        p = np.moveaxis(p, 0, axis)
    return p


# ---------------------------------------------------------------------------
# field-level operations


def grad(phi: ScalarField) -> VectorField:
    h = phi.grid.h
    return VectorField(
        ScalarField(phi.grid, diff(phi.values, -2, h)),
        ScalarField(phi.grid, diff(phi.values, -1, h)),
    )


def divergence(u: VectorField) -> ScalarField:
    h = u.grid.h
    return ScalarField(u.grid, diff(u.x.values, -2, h) + diff(u.y.values, -1, h))


def curl2d(u: VectorField) -> ScalarField:
    return ScalarField(u.grid, curl_array(u.array, u.grid.h))


def perp_grad(phi: ScalarField) -> VectorField:
    """Rotated gradient ``(-d_y phi, d_x phi)``.

    The result is tagged no-slip when ``phi`` carries the clamped trace of
    :func:`clamp`, for which the boundary values come out exactly zero.
    """
    a = perp_grad_array(phi.values, phi.grid.h)
    if phi.bc_tag == "clamped" and not np.any(a[:, ~phi.grid.interior_mask]):
        return VectorField.from_array(phi.grid, a, "no-slip")
    return VectorField.from_array(phi.grid, a)


def clamp(phi: ScalarField) -> ScalarField:
    return ScalarField(phi.grid, clamp_array(phi.values), "clamped")


def laplacian(phi: ScalarField) -> ScalarField:
    """5-point Laplacian; clamped fields use ghost reflection on boundary rows."""
    return ScalarField(phi.grid, lap_array(phi.values, phi.grid.h, ghost=phi.bc_tag == "clamped"))


def vector_laplacian(u: VectorField) -> VectorField:
    return VectorField.from_array(u.grid, vector_laplacian_array(u.array, u.grid.h))


def biharmonic(phi: ScalarField) -> ScalarField:
    """13-point biharmonic of a clamped field, evaluated on interior nodes.

    Boundary entries of the result are set to zero; the stencil would need a
    second ghost layer there.
    """
    if phi.bc_tag != "clamped":
        raise ValueError("biharmonic is defined for clamped fields only")
    h = phi.grid.h
    inner = lap_array(phi.values, h, ghost=True)
    out = np.zeros(phi.grid.shape)
    c = inner
    out[1:-1, 1:-1] = (
        c[2:, 1:-1] + c[:-2, 1:-1] + c[1:-1, 2:] + c[1:-1, :-2] - 4 * c[1:-1, 1:-1]
    ) / h**2
    return ScalarField(phi.grid, out)


def l2_inner(f, g) -> float:
    """Trapezoid inner product of two scalar or two vector fields."""
    if f.grid != g.grid:
        raise ValueError("fields live on different grids")
    w = f.grid.weights
    if isinstance(f, VectorField) and isinstance(g, VectorField):
        return float(np.sum(w * (f.x.values * g.x.values + f.y.values * g.y.values)))
    if isinstance(f, ScalarField) and isinstance(g, ScalarField):
        return float(np.sum(w * f.values * g.values))
    raise TypeError("l2_inner needs two scalar or two vector fields")


# ---------------------------------------------------------------------------
# snapshot format


def write_snapshot(path, field: ScalarField) -> None:
    """Binary snapshot: magic, nx, ny (uint32 LE), tag byte, row-major float64 LE."""
    g = field.grid
    header = SNAPSHOT_MAGIC + struct.pack("<IIB", g.nx, g.ny, _TAG_CODE[field.bc_tag])
    Path(path).write_bytes(header + np.ascontiguousarray(field.values, dtype="<f8").tobytes())


def snapshot_bytes(field: ScalarField) -> bytes:
    g = field.grid
    header = SNAPSHOT_MAGIC + struct.pack("<IIB", g.nx, g.ny, _TAG_CODE[field.bc_tag])
    return header + np.ascontiguousarray(field.values, dtype="<f8").tobytes()


def parse_snapshot(data: bytes, offset: int = 0) -> tuple[ScalarField, int]:
    """Decode one snapshot starting at ``offset``; returns the field and the next offset."""
    if data[offset : offset + 4] != SNAPSHOT_MAGIC:
        raise ValueError("not a field snapshot (bad magic)")
    nx, ny, code = struct.unpack_from("<IIB", data, offset + 4)
    start = offset + 13
    end = start + 8 * nx * ny
    vals = np.frombuffer(data[start:end], dtype="<f8").reshape(nx, ny).astype(float)
    return ScalarField(Grid(nx, ny), vals, _CODE_TAG[code]), end


def read_snapshot(path) -> ScalarField:
    field, _ = parse_snapshot(Path(path).read_bytes())
    return field
