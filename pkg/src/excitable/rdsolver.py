"""Explicit finite-difference integration of the diffusively coupled kinetics.

Forward Euler in time, 3-point (1D) or 5-point (2D) Laplacian in space, with
the lattice spacing tied to the time step by ``dt * max(D) / dx**2 = 1/6``.
Boundaries are zero flux: mirror ghosts at the ends of a 1D interval and, on
the 2D disk, inactive neighbours simply do not contribute to the Laplacian.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .kinetics import KineticParams, PhasePoint, cartesian_field

DIFFUSION_NUMBER = 1.0 / 6.0


class BlowUpError(FloatingPointError):
    def __init__(self, site, time):
        self.site = site
        self.time = time
        super().__init__(f"non-finite concentration at site {site} at t={time:g}")


@dataclass(frozen=True, eq=False)
class GridSpec:
    dimension: int
    n_sites: int
    dt: float
    d_x: float
    d_y: float
    dx: float
    mask: np.ndarray | None = field(default=None, repr=False)

    @property
    def length(self) -> float:
        return self.n_sites * self.dx

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n_sites,) * self.dimension

    @property
    def center(self):
        """Default perturbation centre: site N//2 in 1D, the disk centre in 2D."""
        if self.dimension == 1:
            return self.n_sites // 2
        c = (self.n_sites - 1) / 2
        return (c, c)

    @property
    def section_row(self) -> int:
        return self.n_sites // 2

    @property
    def active(self) -> np.ndarray:
        if self.mask is None:
            return np.ones(self.shape, dtype=bool)
        return self.mask

    @property
    def n_active(self) -> int:
        return int(np.count_nonzero(self.active))

    def diffusion_numbers(self) -> tuple[float, float]:
        s = self.dt / self.dx**2
        return self.d_x * s, self.d_y * s

    def same_as(self, other: "GridSpec") -> bool:
        return (self.dimension, self.n_sites, self.dt, self.d_x, self.d_y, self.dx) == (
            other.dimension, other.n_sites, other.dt, other.d_x, other.d_y, other.dx)


def disk_mask(n_sites: int) -> np.ndarray:
    """Sites of an N x N lattice inside the inscribed circle of radius N/2."""
    i = np.arange(n_sites) - (n_sites - 1) / 2
    return (i[:, None] ** 2 + i[None, :] ** 2) <= (n_sites / 2) ** 2


def make_grid(dimension: int, n_sites: int, dt: float, d_x: float, d_y: float | None = None,
              strict: bool = False) -> GridSpec:
    if d_y is None:
        d_y = d_x
    if dimension not in (1, 2):
        raise ValueError(f"dimension must be 1 or 2, got {dimension!r}")
    if n_sites < 3:
        raise ValueError(f"need at least 3 sites per axis, got {n_sites!r}")
    if not (dt > 0 and d_x > 0 and d_y > 0):
        raise ValueError("dt and diffusion coefficients must be positive")
    if strict and d_x != d_y:
        raise ValueError(f"strict mode requires D_X == D_Y, got {d_x!r} != {d_y!r}")
    dx = math.sqrt(dt * max(d_x, d_y) / DIFFUSION_NUMBER)
    mask = disk_mask(n_sites) if dimension == 2 else None
    return GridSpec(dimension, n_sites, dt, d_x, d_y, dx, mask)


@dataclass
class FieldPair:
    x: np.ndarray
    y: np.ndarray
    grid: GridSpec
    time: float = 0.0
    steps: int = 0

    def copy(self) -> "FieldPair":
        return FieldPair(self.x.copy(), self.y.copy(), self.grid, self.time, self.steps)


@dataclass(frozen=True)
class InitialCondition:
    """Uniform ``background`` with a block at ``perturbation`` around ``center``.

    ``radius`` counts lattice sites: in 1D the block is ``|i - c| <= radius``
    (width 2*radius + 1), in 2D the Euclidean disk of that radius.  ``None``
    leaves the field uniform.
    """

    background: PhasePoint
    perturbation: PhasePoint
    radius: int | None = 0
    center: object = None


def apply_initial(grid: GridSpec, ic: InitialCondition) -> FieldPair:
    active = grid.active
    x = np.where(active, ic.background.x, 0.0)
    y = np.where(active, ic.background.y, 0.0)
    if ic.radius is not None:
        if ic.radius < 0:
            raise ValueError(f"perturbation radius must be >= 0, got {ic.radius!r}")
        center = grid.center if ic.center is None else ic.center
        if grid.dimension == 1:
            c = float(center)
            if not 0 <= c <= grid.n_sites - 1:
                raise ValueError(f"perturbation centre {center!r} outside the lattice")
            dist = np.abs(np.arange(grid.n_sites) - c)
        else:
            ci, cj = (float(v) for v in center)
            inside = 0 <= ci <= grid.n_sites - 1 and 0 <= cj <= grid.n_sites - 1
            if not inside or not grid.mask[int(round(ci)), int(round(cj))]:
                raise ValueError(f"perturbation centre {center!r} outside the disk")
            idx = np.arange(grid.n_sites)
            dist = np.hypot(idx[:, None] - ci, idx[None, :] - cj)
        # radius 0 still marks the site(s) nearest the centre
        sel = active & (dist <= max(ic.radius, float(dist[active].min())) + 1e-9)
        x[sel] = ic.perturbation.x
        y[sel] = ic.perturbation.y
    return FieldPair(x, y, grid)


def ghost_padded(u: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Copy of ``u`` with one layer of boundary values around it.

    1D ends get mirror ghosts ``u[-1] = u[1]``; the 2D lattice is padded with
    zeros, which the masked stencil never reads into active sites.
    """
    if grid.dimension == 1:
        return np.concatenate((u[1:2], u, u[-2:-1]))
    return np.pad(u, 1)


class Stepper:
    """Forward Euler update that reads only the pre-step snapshot.

    ``workers > 1`` splits the rows among threads; every element is computed
    by the same arithmetic either way, so results are bitwise identical.
    """

    def __init__(self, grid: GridSpec, k: KineticParams, workers: int = 1):
        self.grid = grid
        self.k = k
        self.workers = max(1, int(workers))
        self.cx, self.cy = grid.diffusion_numbers()
        n = grid.n_sites
        if grid.dimension == 2:
            mp = np.pad(grid.mask, 1).astype(float)
            self.count = mp[:-2, 1:-1] + mp[2:, 1:-1] + mp[1:-1, :-2] + mp[1:-1, 2:]
            self.active = grid.mask.astype(float)
        chunk = -(-n // self.workers)
        self.slices = [slice(lo, min(lo + chunk, n)) for lo in range(0, n, chunk)]
        self._pool = ThreadPoolExecutor(self.workers) if self.workers > 1 else None

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def _laplacian(self, up, u, s):
        lo, hi = s.start, s.stop
        if self.grid.dimension == 1:
            return (up[lo:hi] + up[lo + 2:hi + 2]) - 2.0 * u[lo:hi]
        return ((up[lo:hi, 1:-1] + up[lo + 2:hi + 2, 1:-1])
                + (up[lo + 1:hi + 1, :-2] + up[lo + 1:hi + 1, 2:])) - self.count[s] * u[s]

    def _update(self, x, y, xp, yp, out_x, out_y, s):
        fx, fy = cartesian_field(x[s], y[s], self.k)
        dt = self.grid.dt
        nx = x[s] + dt * fx + self.cx * self._laplacian(xp, x, s)
        ny = y[s] + dt * fy + self.cy * self._laplacian(yp, y, s)
        if self.grid.dimension == 2:
            nx *= self.active[s]
            ny *= self.active[s]
        out_x[s] = nx
        out_y[s] = ny

    def __call__(self, fields: FieldPair) -> FieldPair:
        x, y = fields.x, fields.y
        xp = ghost_padded(x, self.grid)
        yp = ghost_padded(y, self.grid)
        out_x = np.empty_like(x)
        out_y = np.empty_like(y)
        # overflow is reported below as BlowUpError, not as a numpy warning
        with np.errstate(over="ignore", invalid="ignore"):
            if self._pool is None:
                for s in self.slices:
                    self._update(x, y, xp, yp, out_x, out_y, s)
            else:
                list(self._pool.map(lambda s: self._update(x, y, xp, yp, out_x, out_y, s),
                                    self.slices))
        steps = fields.steps + 1
        time = steps * self.grid.dt
        if not math.isfinite(out_x.sum() + out_y.sum()):
            bad = np.argwhere(~(np.isfinite(out_x) & np.isfinite(out_y)))[0]
            raise BlowUpError(tuple(int(v) for v in bad), time)
        return FieldPair(out_x, out_y, self.grid, time, steps)


def step(fields: FieldPair, k: KineticParams, workers: int = 1) -> FieldPair:
    stepper = Stepper(fields.grid, k, workers)
    try:
        return stepper(fields)
    finally:
        stepper.close()


@dataclass
class SpaceTimeRecord:
    """Frames of X (and Y) sampled every ``sample_stride`` steps, frame 0 included.

    In 2D with ``section_only`` the frames hold only lattice row
    ``grid.section_row``; ``final`` always keeps the full last state.
    """

    grid: GridSpec
    params: KineticParams
    initial: InitialCondition
    sample_stride: int
    times: np.ndarray
    x_frames: np.ndarray
    y_frames: np.ndarray | None
    final: FieldPair
    section_only: bool = False

    @property
    def n_frames(self) -> int:
        return len(self.times)

    @property
    def background_x(self) -> float:
        return self.initial.background.x

    def profile(self, frame: int) -> np.ndarray:
        """1D profile of X for ``frame``: the lattice in 1D, the centre section in 2D."""
        if self.grid.dimension == 1:
            return self.x_frames[frame]
        return cross_section(self, frame)


def run(grid: GridSpec, k: KineticParams, ic: InitialCondition, t_end: float,
        sample_stride: int = 100, workers: int = 1, record_y: bool = True,
        section_only: bool = False) -> SpaceTimeRecord:
    if not t_end > 0:
        raise ValueError(f"t_end must be positive, got {t_end!r}")
    if sample_stride < 1:
        raise ValueError("sample_stride must be >= 1")
    n_steps = int(round(t_end / grid.dt))
    fields = apply_initial(grid, ic)
    row = grid.section_row

    def snap(u):
        return u[row].copy() if (section_only and grid.dimension == 2) else u.copy()

    times, xs, ys = [0.0], [snap(fields.x)], [snap(fields.y)] if record_y else None
    stepper = Stepper(grid, k, workers)
    try:
        for n in range(1, n_steps + 1):
            fields = stepper(fields)
            if n % sample_stride == 0:
                times.append(n * grid.dt)
                xs.append(snap(fields.x))
                if record_y:
                    ys.append(snap(fields.y))
    finally:
        stepper.close()
    return SpaceTimeRecord(
        grid=grid, params=k, initial=ic, sample_stride=sample_stride,
        times=np.array(times), x_frames=np.stack(xs),
        y_frames=np.stack(ys) if record_y else None, final=fields,
        section_only=section_only and grid.dimension == 2,
    )


def cross_section(record: SpaceTimeRecord, frame: int) -> np.ndarray:
    """X along the lattice row through the disk centre, inactive sites dropped."""
    if record.grid.dimension != 2:
        raise ValueError("cross sections exist only for 2D records")
    if not -record.n_frames <= frame < record.n_frames:
        raise IndexError(f"frame {frame} out of range")
    row = record.grid.section_row
    keep = record.grid.mask[row]
    data = record.x_frames[frame]
    if not record.section_only:
        data = data[row]
    return data[keep]
