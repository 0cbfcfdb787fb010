"""Model parameters, cell-centered tensor grids, grid functions and the
canonical initial data / scaling maps shared by every other module.

All types are immutable value objects; every operation returns a new object.
Grids are cell-centered (nodes at lo + (i + 1/2)h) so the coordinate
hyperplanes {x = 0} and {y = 0} never host a node, which keeps the singular
canonical datum finite on the grid.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator

__all__ = [
    "ModelParams",
    "Point",
    "Axis",
    "Grid",
    "GridFunction",
    "ScalingMap",
    "make_singular_datum",
    "make_gaussian_datum",
    "make_indicator_datum",
    "make_gauge_datum",
    "dilate",
    "apply_scaling",
    "rotate",
    "save_npz",
    "load_npz",
    "write_csv",
    "read_csv",
]


@dataclass(frozen=True)
class ModelParams:
    """Dimensions and nonlinearity exponent of u_t = D_G u + |u|^(rho-1) u.

    Q = N + 2k is the homogeneous dimension of the Grushin operator
    D_G = (Delta_x + |x|^2 Delta_y)/2 and p_critical = Q(rho-1)/2 the
    scale-invariant Marcinkiewicz index.
    """

    N: int
    k: int
    rho: float

    def __post_init__(self):
        if not (isinstance(self.N, (int, np.integer)) and self.N >= 1):
            raise ValueError(f"N must be a positive integer, got {self.N}")
        if not (isinstance(self.k, (int, np.integer)) and self.k >= 1):
            raise ValueError(f"k must be a positive integer, got {self.k}")
        if not self.rho > 1.0:
            raise ValueError(f"rho must exceed 1, got {self.rho}")
        if self.p_critical <= 1.0:
            raise ValueError(
                f"critical index Q(rho-1)/2 = {self.p_critical} <= 1; "
                "pick larger N, k or rho"
            )

    @property
    def Q(self) -> int:
        return self.N + 2 * self.k

    @property
    def p_critical(self) -> float:
        return 0.5 * self.Q * (self.rho - 1.0)


@dataclass(frozen=True)
class Point:
    """A point (x, y) in R^N x R^k."""

    x: tuple
    y: tuple

    def __post_init__(self):
        x = tuple(float(v) for v in np.atleast_1d(self.x))
        y = tuple(float(v) for v in np.atleast_1d(self.y))
        if not all(np.isfinite(x)) or not all(np.isfinite(y)):
            raise ValueError("point coordinates must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)


@dataclass(frozen=True)
class Axis:
    """One cell-centered axis: `count` cells on [lo, hi]."""

    lo: float
    hi: float
    count: int

    def __post_init__(self):
        if self.count < 2:
            raise ValueError(f"axis needs at least 2 cells, got {self.count}")
        if not self.hi > self.lo:
            raise ValueError(f"axis needs hi > lo, got [{self.lo}, {self.hi}]")

    @property
    def spacing(self) -> float:
        return (self.hi - self.lo) / self.count

    @property
    def nodes(self) -> np.ndarray:
        h = self.spacing
        return self.lo + (np.arange(self.count) + 0.5) * h

    @property
    def symmetric(self) -> bool:
        return self.lo == -self.hi


def _as_axes(spec) -> tuple:
    out = []
    for a in spec:
        if isinstance(a, Axis):
            out.append(a)
        else:
            lo, hi, n = a
            out.append(Axis(float(lo), float(hi), int(n)))
    return tuple(out)


@dataclass(frozen=True)
class Grid:
    """Tensor-product cell-centered grid over a box in R^N x R^k.

    The first ``len(x_axes)`` array dimensions are x-directions, the rest
    y-directions; ``cell_volume`` is the product of the spacings.
    """

    x_axes: tuple
    y_axes: tuple

    def __post_init__(self):
        object.__setattr__(self, "x_axes", _as_axes(self.x_axes))
        object.__setattr__(self, "y_axes", _as_axes(self.y_axes))
        if not self.x_axes or not self.y_axes:
            raise ValueError("grid needs at least one x-axis and one y-axis")

    @property
    def axes(self) -> tuple:
        return self.x_axes + self.y_axes

    @property
    def N(self) -> int:
        return len(self.x_axes)

    @property
    def k(self) -> int:
        return len(self.y_axes)

    @property
    def shape(self) -> tuple:
        return tuple(a.count for a in self.axes)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def cell_volume(self) -> float:
        return float(np.prod([a.spacing for a in self.axes]))

    def nodes(self) -> list:
        """Per-axis node arrays, x-axes first."""
        return [a.nodes for a in self.axes]

    def meshgrid(self) -> list:
        return np.meshgrid(*self.nodes(), indexing="ij")

    def radial(self) -> tuple:
        """(|x|, |y|) fields on the grid, broadcast to full shape."""
        mesh = self.meshgrid()
        n = self.N
        rx = np.sqrt(sum(m * m for m in mesh[:n]))
        ry = np.sqrt(sum(m * m for m in mesh[n:]))
        return rx, ry

    def contains_axis_nodes(self) -> bool:
        """True if some node sits exactly on {|x|=0} or {|y|=0}."""
        x_zero = all(np.any(a.nodes == 0.0) for a in self.x_axes)
        y_zero = all(np.any(a.nodes == 0.0) for a in self.y_axes)
        return x_zero or y_zero

    def fingerprint(self) -> tuple:
        return tuple((a.lo, a.hi, a.count) for a in self.axes) + (self.N,)


def square_grid(extent: float, n: int, N: int = 1, k: int = 1,
                y_extent: float | None = None, ny: int | None = None) -> Grid:
    """Symmetric box [-extent, extent] per x-axis (y_extent for y-axes)."""
    ye = extent if y_extent is None else y_extent
    ny = n if ny is None else ny
    return Grid(
        x_axes=tuple(Axis(-extent, extent, n) for _ in range(N)),
        y_axes=tuple(Axis(-ye, ye, ny) for _ in range(k)),
    )


@dataclass(frozen=True)
class GridFunction:
    """Real values sampled at the nodes of a Grid."""

    grid: Grid
    values: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ValueError(
                f"value shape {v.shape} does not match grid shape {self.grid.shape}"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function values must be finite")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    # -- basic functionals ------------------------------------------------

    def mass(self) -> float:
        return float(self.values.sum() * self.grid.cell_volume)

    def l1(self) -> float:
        return float(np.abs(self.values).sum() * self.grid.cell_volume)

    def max_abs(self) -> float:
        return float(np.abs(self.values).max())

    def inner(self, other: "GridFunction") -> float:
        if self.grid.shape != other.grid.shape:
            raise ValueError("grids differ")
        return float((self.values * other.values).sum() * self.grid.cell_volume)

    def with_values(self, values: np.ndarray, **meta) -> "GridFunction":
        return GridFunction(self.grid, values, meta={**self.meta, **meta})

    def interpolator(self) -> RegularGridInterpolator:
        return RegularGridInterpolator(
            tuple(self.grid.nodes()), self.values,
            method="linear", bounds_error=False, fill_value=0.0,
        )


@dataclass(frozen=True)
class ScalingMap:
    """Parabolic rescaling u -> lambda^{2/(rho-1)} u(lambda x, lambda^2 y, lambda^2 t)."""

    lam: float
    rho: float

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if not self.rho > 1:
            raise ValueError("rho must exceed 1")

    @property
    def amplitude(self) -> float:
        return self.lam ** (2.0 / (self.rho - 1.0))


# -- canonical data ---------------------------------------------------------


def make_singular_datum(params: ModelParams, epsilon: float, grid: Grid) -> GridFunction:
    """Anisotropically homogeneous singular datum
    eps * |x|^{-1/(rho-1)} * |y|^{-1/(2(rho-1))}.

    Satisfies datum(lam x, lam^2 y) = lam^{-2/(rho-1)} datum(x, y) pointwise,
    so the induced mild solution is self-similar.  Requires a grid with no
    node on {|x|=0} or {|y|=0} (cell-centered symmetric grids qualify).
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if grid.N != params.N or grid.k != params.k:
        raise ValueError("grid dimensions do not match params")
    if grid.contains_axis_nodes():
        raise ValueError("grid places nodes on the singular axes |x|=0 / |y|=0")
    ax = 1.0 / (params.rho - 1.0)
    ay = 0.5 / (params.rho - 1.0)
    rx, ry = grid.radial()
    vals = epsilon * rx ** (-ax) * ry ** (-ay)
    return GridFunction(grid, vals, meta={"datum": "singular", "epsilon": epsilon})


def make_gauge_datum(params: ModelParams, epsilon: float, grid: Grid,
                     p: float | None = None) -> GridFunction:
    """Grushin-gauge power datum eps * (|x|^4 + 4|y|^2)^{-Q/(4p)}.

    Lies on the weak-L^p boundary (distribution function ~ s^{-p}); the
    default p is the critical index, for which the datum is homogeneous of
    degree -2/(rho-1).  Singular at the origin only.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    p = params.p_critical if p is None else float(p)
    rx, ry = grid.radial()
    gauge4 = rx**4 + 4.0 * ry**2
    if np.any(gauge4 == 0.0):
        raise ValueError("grid places a node at the origin")
    vals = epsilon * gauge4 ** (-params.Q / (4.0 * p))
    return GridFunction(grid, vals, meta={"datum": "gauge", "epsilon": epsilon, "p": p})


def make_gaussian_datum(grid: Grid, amplitude: float = 1.0,
                        sigma_x: float = 1.0, sigma_y: float = 1.0,
                        center: tuple | None = None) -> GridFunction:
    """Separable Gaussian bump exp(-|x-cx|^2/(2 sx^2) - |y-cy|^2/(2 sy^2))."""
    mesh = grid.meshgrid()
    n = grid.N
    if center is None:
        center = (0.0,) * (grid.N + grid.k)
    q = np.zeros(grid.shape)
    for i, m in enumerate(mesh):
        s = sigma_x if i < n else sigma_y
        q = q + (m - center[i]) ** 2 / (2.0 * s * s)
    return GridFunction(grid, amplitude * np.exp(-q), meta={"datum": "gaussian"})


def make_indicator_datum(grid: Grid, half_widths, amplitude: float = 1.0) -> GridFunction:
    """amplitude * 1_{|x_i| <= a_i, |y_j| <= b_j} with box half-widths."""
    mesh = grid.meshgrid()
    inside = np.ones(grid.shape, dtype=bool)
    for m, a in zip(mesh, half_widths):
        inside &= np.abs(m) <= a
    return GridFunction(grid, amplitude * inside.astype(float), meta={"datum": "indicator"})


# -- dilation / rotation ----------------------------------------------------


def dilate(u: GridFunction, lam: float, amplitude_power: float = 0.0) -> GridFunction:
    """lam^amplitude_power * u(lam x, lam^2 y), resampled multilinearly.

    Query points outside the grid box evaluate to 0 and set the
    ``out_of_box`` metadata flag.
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    g = u.grid
    pts = g.meshgrid()
    n = g.N
    mapped = [pts[i] * (lam if i < n else lam * lam) for i in range(len(pts))]
    flat = np.stack([m.ravel() for m in mapped], axis=-1)
    out_of_box = False
    for i, a in enumerate(g.axes):
        lo, hi = a.nodes[0], a.nodes[-1]
        col = flat[:, i]
        if col.min() < lo or col.max() > hi:
            out_of_box = True
            break
    vals = u.interpolator()(flat).reshape(g.shape)
    vals = lam**amplitude_power * vals
    return GridFunction(g, vals, meta={**u.meta, "out_of_box": out_of_box, "lam": lam})


def apply_scaling(u: GridFunction, s: ScalingMap, t: float | None = None) -> GridFunction:
    """Spatial part of the parabolic scaling map applied to one state.

    ``u`` must be the solution state at time lam^2 t; the result approximates
    u_lam(.,.,t) = lam^{2/(rho-1)} u(lam x, lam^2 y, lam^2 t).
    """
    out = dilate(u, s.lam, amplitude_power=2.0 / (s.rho - 1.0))
    if t is not None:
        out.meta["source_time"] = s.lam**2 * t
    return out


def _signed_permutation(T: np.ndarray, tol: float = 1e-12):
    """Return (perm, signs) if T is a signed permutation matrix, else None."""
    n = T.shape[0]
    perm = np.full(n, -1, dtype=int)
    signs = np.zeros(n)
    for i in range(n):
        row = T[i]
        j = int(np.argmax(np.abs(row)))
        if abs(abs(row[j]) - 1.0) > tol:
            return None
        if np.any(np.abs(np.delete(row, j)) > tol):
            return None
        perm[i] = j
        signs[i] = np.sign(row[j])
    if len(set(perm.tolist())) != n:
        return None
    return perm, signs


def _check_orthogonal(T: np.ndarray, name: str, tol: float = 1e-12):
    T = np.asarray(T, dtype=float)
    if T.ndim != 2 or T.shape[0] != T.shape[1]:
        raise ValueError(f"{name} must be square")
    if abs(abs(np.linalg.det(T)) - 1.0) > tol or \
            np.max(np.abs(T @ T.T - np.eye(T.shape[0]))) > 100 * tol:
        raise ValueError(f"{name} is not orthogonal")
    return T


def rotate(u: GridFunction, T1, T2) -> GridFunction:
    """u o T for T = (T1, T2) orthogonal on the x- and y-blocks.

    Signed permutation matrices act exactly (pure index manipulation,
    bitwise); anything else resamples by multilinear interpolation.
    """
    g = u.grid
    T1 = _check_orthogonal(np.atleast_2d(T1), "T1")
    T2 = _check_orthogonal(np.atleast_2d(T2), "T2")
    if T1.shape[0] != g.N or T2.shape[0] != g.k:
        raise ValueError("rotation blocks do not match grid dimensions")

    sp1 = _signed_permutation(T1)
    sp2 = _signed_permutation(T2)
    if sp1 is not None and sp2 is not None:
        perm = np.concatenate([sp1[0], g.N + sp2[0]])
        signs = np.concatenate([sp1[1], sp2[1]])
        axes = g.axes
        for i in range(len(axes)):
            src = axes[perm[i]]
            dst = axes[i]
            ok = (src.count == dst.count and src.spacing == dst.spacing)
            if signs[i] > 0:
                ok = ok and (src.lo == dst.lo and src.hi == dst.hi)
            else:
                ok = ok and (src.lo == -dst.hi and src.hi == -dst.lo)
            if not ok:
                sp1 = None  # grid not compatible: fall through to resampling
                break
    if sp1 is not None and sp2 is not None:
        # (u o T)(index p) = u[T applied to node p]; with cell-centered
        # symmetric axes a sign flip is a reversal of that axis.
        vals = np.transpose(u.values, axes=tuple(perm))
        slicer = tuple(slice(None, None, -1) if s < 0 else slice(None) for s in signs)
        vals = vals[slicer]
        return GridFunction(g, vals.copy(), meta={**u.meta, "rotation": "exact"})

    mesh = g.meshgrid()
    stacked = np.stack([m.ravel() for m in mesh], axis=-1)
    xs = stacked[:, : g.N] @ T1.T
    ys = stacked[:, g.N:] @ T2.T
    pts = np.concatenate([xs, ys], axis=1)
    vals = u.interpolator()(pts).reshape(g.shape)
    return GridFunction(g, vals, meta={**u.meta, "rotation": "resampled"})


# -- serialization ----------------------------------------------------------


def save_npz(path, u: GridFunction) -> None:
    """Self-describing binary container (NumPy .npz)."""
    ax = np.array([(a.lo, a.hi, a.count) for a in u.grid.axes])
    np.savez(path, values=u.values, axes=ax, n_x_axes=np.array([u.grid.N]),
             meta=np.frombuffer(json.dumps(u.meta, sort_keys=True).encode(), dtype=np.uint8))


def load_npz(path) -> GridFunction:
    with np.load(path) as data:
        ax = data["axes"]
        nx = int(data["n_x_axes"][0])
        axes = [Axis(float(lo), float(hi), int(n)) for lo, hi, n in ax]
        grid = Grid(x_axes=tuple(axes[:nx]), y_axes=tuple(axes[nx:]))
        meta = {}
        if "meta" in data:
            meta = json.loads(bytes(data["meta"]).decode())
        return GridFunction(grid, data["values"], meta=meta)


def write_csv(path_or_buf, u: GridFunction, config_echo: dict | None = None) -> None:
    """CSV dump: columns x1..xN, y1..yk, value; row-major over the grid.

    Leading '#' comment lines carry the grid spec (and an optional config
    echo) so the file round-trips through read_csv.
    """
    g = u.grid
    close = False
    if isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__"):
        buf = open(path_or_buf, "w")
        close = True
    else:
        buf = path_or_buf
    try:
        spec = {
            "x_axes": [(a.lo, a.hi, a.count) for a in g.x_axes],
            "y_axes": [(a.lo, a.hi, a.count) for a in g.y_axes],
        }
        buf.write("# grid: " + json.dumps(spec, sort_keys=True) + "\n")
        if config_echo:
            buf.write("# config: " + json.dumps(config_echo, sort_keys=True) + "\n")
        cols = [f"x{i+1}" for i in range(g.N)] + [f"y{j+1}" for j in range(g.k)]
        buf.write(",".join(cols + ["value"]) + "\n")
        mesh = g.meshgrid()
        coords = np.stack([m.ravel() for m in mesh], axis=-1)
        vals = u.values.ravel()
        for row, v in zip(coords, vals):
            buf.write(",".join(repr(float(c)) for c in row) + f",{v!r}\n")
    finally:
        if close:
            buf.close()


def read_csv(path_or_buf) -> GridFunction:
    close = False
    if isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__"):
        buf = open(path_or_buf)
        close = True
    else:
        buf = path_or_buf
    try:
        grid_spec = None
        header = None
        rows = []
        for line in buf:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if line.startswith("# grid:"):
                    grid_spec = json.loads(line[len("# grid:"):])
                continue
            if header is None:
                header = line.split(",")
                continue
            rows.append([float(v) for v in line.split(",")])
    finally:
        if close:
            buf.close()
    if header is None:
        raise ValueError("empty CSV")
    data = np.asarray(rows)
    coords, vals = data[:, :-1], data[:, -1]
    if grid_spec is not None:
        grid = Grid(
            x_axes=tuple(Axis(lo, hi, int(n)) for lo, hi, n in grid_spec["x_axes"]),
            y_axes=tuple(Axis(lo, hi, int(n)) for lo, hi, n in grid_spec["y_axes"]),
        )
    else:
        # infer tensor axes from the coordinate columns (x-count from header)
        n_x = sum(1 for c in header[:-1] if c.startswith("x"))
        axes = []
        for j in range(data.shape[1] - 1):
            nodes = np.unique(coords[:, j])
            h = nodes[1] - nodes[0]
            axes.append(Axis(nodes[0] - h / 2, nodes[-1] + h / 2, len(nodes)))
        grid = Grid(x_axes=tuple(axes[:n_x]), y_axes=tuple(axes[n_x:]))
    return GridFunction(grid, vals.reshape(grid.shape))


def csv_string(u: GridFunction, config_echo: dict | None = None) -> str:
    buf = io.StringIO()
    write_csv(buf, u, config_echo=config_echo)
    return buf.getvalue()
