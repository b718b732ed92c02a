"""Structured vertex-centered grid, discrete fields and difference stencils.

Nodes sit at the vertices of a uniform rectangular mesh: nx x ny nodes,
spacings dx = lx / (nx - 1), dy = ly / (ny - 1).  Scalar fields are stored
as (ny, nx) arrays; the flat node index is j * nx + i with i the x index.
The coupled state vector packs [u1, u2, h, a] blocks of length N = nx * ny.

First/second difference matrices carry rows only at interior nodes (zero
rows at boundary nodes); Dirichlet or Neumann closures are applied by the
assembly routines.  The centered first-difference pair (d_x, d_y) and its
negative transpose form an exact summation-by-parts pair for velocity
fields that vanish on the boundary, which the conservation and energy
identities of the solver rely on.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .params import InvalidStateError, RheologyParams
from .rheology import StrainRate


@dataclass(frozen=True)
class Grid:
    """Uniform vertex grid on [0, lx] x [0, ly]."""

    nx: int
    ny: int
    lx: float = 1.0
    ly: float = 1.0

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3:
            raise InvalidStateError("grid needs nx, ny >= 3")
        if not (self.lx > 0.0 and self.ly > 0.0):
            raise InvalidStateError("grid extents must be positive")

    @property
    def dx(self) -> float:
        return self.lx / (self.nx - 1)

    @property
    def dy(self) -> float:
        return self.ly / (self.ny - 1)

    @property
    def n_nodes(self) -> int:
        return self.nx * self.ny

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    def coords(self):
        """Meshgrid (X, Y), each (ny, nx)."""
        x = np.linspace(0.0, self.lx, self.nx)
        y = np.linspace(0.0, self.ly, self.ny)
        return np.meshgrid(x, y)

    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros((self.ny, self.nx), dtype=bool)
        mask[0, :] = mask[-1, :] = True
        mask[:, 0] = mask[:, -1] = True
        return mask

    def interior_mask(self) -> np.ndarray:
        return ~self.boundary_mask()


def _d1_interior(n: int, h: float) -> sp.csr_matrix:
    """Centered first difference on a line, rows only at interior points."""
    rows = np.arange(1, n - 1)
    data = np.concatenate([np.full(n - 2, -0.5 / h), np.full(n - 2, 0.5 / h)])
    ij = (np.concatenate([rows, rows]), np.concatenate([rows - 1, rows + 1]))
    return sp.csr_matrix((data, ij), shape=(n, n))


def _d2_interior(n: int, h: float) -> sp.csr_matrix:
    """Three-point second difference on a line, rows only at interior points.

    Weights derive from a single rounded value so row sums vanish exactly.
    """
    w = 1.0 / h**2
    rows = np.arange(1, n - 1)
    data = np.concatenate([
        np.full(n - 2, w), np.full(n - 2, -2.0 * w), np.full(n - 2, w),
    ])
    ij = (np.concatenate([rows, rows, rows]),
          np.concatenate([rows - 1, rows, rows + 1]))
    return sp.csr_matrix((data, ij), shape=(n, n))


def _neumann_1d(n: int, h: float) -> sp.csr_matrix:
    """Symmetric reflected form of -d^2/dx^2 (graph Laplacian of the path).

    Weights derive from a single rounded value so row and column sums vanish
    exactly in floating point.
    """
    w = 1.0 / h**2
    main = np.full(n, 2.0 * w)
    main[0] = main[-1] = w
    off = np.full(n - 1, -w)
    return sp.diags([off, main, off], offsets=(-1, 0, 1), format="csr")


@lru_cache(maxsize=32)
def diff_ops(grid: Grid) -> dict:
    """Difference matrices for a grid, cached.

    Keys: dx, dy (centered first), dxx, dyy (second), dxy (4-point cross,
    rows at full-interior nodes), neumann_x, neumann_y (symmetric reflected
    1D pieces in 2D kron form).
    """
    ix = sp.identity(grid.nx, format="csr")
    iy = sp.identity(grid.ny, format="csr")
    d_x = sp.kron(iy, _d1_interior(grid.nx, grid.dx), format="csr")
    d_y = sp.kron(_d1_interior(grid.ny, grid.dy), ix, format="csr")
    d_xx = sp.kron(iy, _d2_interior(grid.nx, grid.dx), format="csr")
    d_yy = sp.kron(_d2_interior(grid.ny, grid.dy), ix, format="csr")
    d_xy = (d_x @ d_y).tocsr()
    neu_x = sp.kron(iy, _neumann_1d(grid.nx, grid.dx), format="csr")
    neu_y = sp.kron(_neumann_1d(grid.ny, grid.dy), ix, format="csr")
    return {
        "dx": d_x, "dy": d_y, "dxx": d_xx, "dyy": d_yy, "dxy": d_xy,
        "neumann_x": neu_x, "neumann_y": neu_y,
    }


@dataclass
class FieldSet:
    """Discrete state v = (u, h, a) on the nodes of a grid.

    u = (u1, u2) satisfies homogeneous Dirichlet conditions (zero on every
    boundary node); h and a carry discrete Neumann conditions through the
    reflected stencils of the assembled operators.  Validity requires
    h >= kappa and a in [0, 1] up to a clamping slack.
    """

    grid: Grid
    u1: np.ndarray
    u2: np.ndarray
    h: np.ndarray
    a: np.ndarray

    @classmethod
    def constant(cls, grid: Grid, h_star: float, a_star: float) -> "FieldSet":
        shape = (grid.ny, grid.nx)
        return cls(grid,
                   np.zeros(shape), np.zeros(shape),
                   np.full(shape, float(h_star)), np.full(shape, float(a_star)))

    @classmethod
    def from_vector(cls, grid: Grid, vec: np.ndarray) -> "FieldSet":
        n = grid.n_nodes
        shape = (grid.ny, grid.nx)
        return cls(grid,
                   vec[0:n].reshape(shape).copy(),
                   vec[n:2 * n].reshape(shape).copy(),
                   vec[2 * n:3 * n].reshape(shape).copy(),
                   vec[3 * n:4 * n].reshape(shape).copy())

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.u1.ravel(), self.u2.ravel(),
                               self.h.ravel(), self.a.ravel()])

    def copy(self) -> "FieldSet":
        return FieldSet(self.grid, self.u1.copy(), self.u2.copy(),
                        self.h.copy(), self.a.copy())

    def validate(self, params: RheologyParams, slack: float = 1e-10) -> "FieldSet":
        """Check invariants; clamp a within slack; raise InvalidStateError else.

        Returns self (possibly with a clamped in place) for chaining.
        """
        shape = (self.grid.ny, self.grid.nx)
        for name in ("u1", "u2", "h", "a"):
            arr = getattr(self, name)
            if arr.shape != shape:
                raise InvalidStateError(f"{name} has shape {arr.shape}, want {shape}")
            if not np.all(np.isfinite(arr)):
                raise InvalidStateError(f"{name} contains non-finite values")
        bnd = self.grid.boundary_mask()
        if np.any(self.u1[bnd] != 0.0) or np.any(self.u2[bnd] != 0.0):
            worst = max(np.max(np.abs(self.u1[bnd])), np.max(np.abs(self.u2[bnd])))
            raise InvalidStateError(
                f"velocity must vanish on the boundary, max |u| there = {worst!r}")
        if np.any(self.h < params.kappa):
            raise InvalidStateError(
                f"thickness fell below kappa = {params.kappa!r}: "
                f"min h = {self.h.min()!r}")
        if np.any(self.a < -slack) or np.any(self.a > 1.0 + slack):
            raise InvalidStateError(
                f"compactness left [0, 1] beyond slack {slack!r}: "
                f"range [{self.a.min()!r}, {self.a.max()!r}]")
        np.clip(self.a, 0.0, 1.0, out=self.a)
        return self


def strain_rate_field(fields: FieldSet) -> StrainRate:
    """Symmetric velocity gradient on all nodes.

    Centered second-order differences in the interior, one-sided
    second-order at boundary nodes.
    """
    g = fields.grid
    du1_dx = np.gradient(fields.u1, g.dx, axis=1, edge_order=2)
    du1_dy = np.gradient(fields.u1, g.dy, axis=0, edge_order=2)
    du2_dx = np.gradient(fields.u2, g.dx, axis=1, edge_order=2)
    du2_dy = np.gradient(fields.u2, g.dy, axis=0, edge_order=2)
    return StrainRate(e11=du1_dx, e12=0.5 * (du1_dy + du2_dx), e22=du2_dy)
