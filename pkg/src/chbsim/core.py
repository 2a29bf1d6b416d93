"""Cell-centered grid, field containers and quadrature.

Scalar unknowns (phi, mu, sigma, p) live at cell centers of a uniform
rectangular grid; velocities live on the staggered faces (MAC layout).
Array index [i, j] maps to (x, y) with x = (i + 1/2) hx, y = (j + 1/2) hy.
Everything here is plain value data; functions are pure and deterministic
(fixed-order numpy reductions), which is what makes bit-identical reruns
possible further up the stack.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Grid:
    Lx: float  # domain size in x, > 0
    Ly: float  # domain size in y, > 0
    nx: int    # cells in x, >= 2
    ny: int    # cells in y, >= 2

    @property
    def hx(self) -> float:
        return self.Lx / self.nx

    @property
    def hy(self) -> float:
        return self.Ly / self.ny

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    @property
    def area(self) -> float:
        return self.Lx * self.Ly

    @property
    def perimeter(self) -> float:
        return 2.0 * (self.Lx + self.Ly)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Meshgrid (indexing='ij') of cell-center coordinates, shape (nx, ny)."""
        x = (np.arange(self.nx) + 0.5) * self.hx
        y = (np.arange(self.ny) + 0.5) * self.hy
        return np.meshgrid(x, y, indexing="ij")

    def xface_coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Coordinates of vertical faces (u locations), shape (nx+1, ny)."""
        x = np.arange(self.nx + 1) * self.hx
        y = (np.arange(self.ny) + 0.5) * self.hy
        return np.meshgrid(x, y, indexing="ij")

    def yface_coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Coordinates of horizontal faces (w locations), shape (nx, ny+1)."""
        x = (np.arange(self.nx) + 0.5) * self.hx
        y = np.arange(self.ny + 1) * self.hy
        return np.meshgrid(x, y, indexing="ij")


def make_grid(Lx: float, Ly: float, nx: int, ny: int) -> Grid:
    if not (Lx > 0.0 and Ly > 0.0):
        raise ValueError(f"domain lengths must be positive, got Lx={Lx}, Ly={Ly}")
    if nx < 4 or ny < 4:
        raise ValueError(f"need at least 4 cells per direction, got nx={nx}, ny={ny}")
    return Grid(float(Lx), float(Ly), int(nx), int(ny))


@dataclass
class FaceField:
    """Staggered vector field: u on vertical faces, w on horizontal faces."""

    u: np.ndarray  # shape (nx+1, ny)
    w: np.ndarray  # shape (nx, ny+1)

    @classmethod
    def zeros(cls, grid: Grid) -> "FaceField":
        return cls(np.zeros((grid.nx + 1, grid.ny)), np.zeros((grid.nx, grid.ny + 1)))

    def copy(self) -> "FaceField":
        return FaceField(self.u.copy(), self.w.copy())

    def all_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.w)))


@dataclass
class State:
    """Full solver state at one time level. All cell arrays share shape (nx, ny)."""

    t: float
    phi: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    p: np.ndarray
    v: FaceField

    def copy(self) -> "State":
        return State(self.t, self.phi.copy(), self.mu.copy(), self.sigma.copy(),
                     self.p.copy(), self.v.copy())

    def all_finite(self) -> bool:
        ok = all(np.all(np.isfinite(f)) for f in (self.phi, self.mu, self.sigma, self.p))
        return bool(ok) and self.v.all_finite()


def state_zeros(grid: Grid, t: float = 0.0) -> State:
    z = lambda: np.zeros(grid.shape)  # noqa: E731
    return State(t, z(), z(), z(), z(), FaceField.zeros(grid))


@dataclass
class EdgeTraces:
    """Values sampled along the four walls at edge-cell midpoints."""

    left: np.ndarray    # shape (ny,), wall x = 0
    right: np.ndarray   # shape (ny,), wall x = Lx
    bottom: np.ndarray  # shape (nx,), wall y = 0
    top: np.ndarray     # shape (nx,), wall y = Ly

    @classmethod
    def from_constants(cls, left: float, right: float, bottom: float, top: float,
                       grid: Grid) -> "EdgeTraces":
        return cls(np.full(grid.ny, float(left)), np.full(grid.ny, float(right)),
                   np.full(grid.nx, float(bottom)), np.full(grid.nx, float(top)))


def integrate_cell(values: np.ndarray, grid: Grid) -> float:
    """Midpoint-rule integral of a cell field over the domain."""
    return float(np.sum(values)) * grid.cell_area


def integrate_boundary(traces: EdgeTraces, grid: Grid) -> float:
    """Midpoint-rule integral of wall traces over the boundary."""
    lr = (float(np.sum(traces.left)) + float(np.sum(traces.right))) * grid.hy
    bt = (float(np.sum(traces.bottom)) + float(np.sum(traces.top))) * grid.hx
    return lr + bt


def extrapolate_to_walls(field: np.ndarray, grid: Grid) -> EdgeTraces:
    """Wall traces by linear extrapolation from the two nearest cell centers.

    The wall sits half a cell outside the first center, so the second-order
    trace is 1.5*f[0] - 0.5*f[1] (and mirrored on the other walls).
    """
    if grid.nx < 2 or grid.ny < 2:
        raise ValueError("trace extrapolation needs at least two cells per direction")
    return EdgeTraces(
        left=1.5 * field[0, :] - 0.5 * field[1, :],
        right=1.5 * field[-1, :] - 0.5 * field[-2, :],
        bottom=1.5 * field[:, 0] - 0.5 * field[:, 1],
        top=1.5 * field[:, -1] - 0.5 * field[:, -2],
    )


def face_to_center(v: FaceField) -> tuple[np.ndarray, np.ndarray]:
    """Average staggered velocity components to cell centers."""
    vx = 0.5 * (v.u[:-1, :] + v.u[1:, :])
    vy = 0.5 * (v.w[:, :-1] + v.w[:, 1:])
    return vx, vy
