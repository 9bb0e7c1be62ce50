"""Local two-variable kinetics with a Hopf and a saddle-node homoclinic bifurcation.

The model is the Hopf normal form in polar coordinates with a phase dependent
rotation rate::

    dr/dt     = r (nu + a r^2)
    dtheta/dt = beta + (b + alpha f(theta)) r^2

For ``a < 0`` and ``nu > 0`` the circle ``r = r0 = sqrt(-nu/a)`` is invariant.
Lowering ``alpha`` through ``alpha_S`` creates a saddle/node pair on that circle
and the oscillator becomes excitable; the stable manifold of the saddle is the
excitability threshold.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy import optimize

TWO_PI = 2.0 * math.pi

# below this radius the angle is undefined and the phase term is dropped
ORIGIN_EPS = 1e-12


@dataclass(frozen=True)
class PhaseModulation:
    """Non-negative 2*pi periodic function multiplying ``alpha`` in the phase equation."""

    name: str
    f: Callable
    df: Callable

    def at_xy(self, x, y, r2):
        """Evaluate f at the polar angle of (x, y); ``r2`` is x^2 + y^2."""
        theta = np.mod(np.arctan2(y, x), TWO_PI)
        return self.f(theta)

    def extrema(self, n: int = 4096) -> tuple[float, float]:
        """Return (min f, max f) over the circle."""
        theta = np.arange(n) * (TWO_PI / n)
        vals = np.asarray(self.f(theta), dtype=float)
        h = TWO_PI / n
        out = []
        for sign, i in ((1.0, int(np.argmin(vals))), (-1.0, int(np.argmax(vals)))):
            res = optimize.minimize_scalar(
                lambda t: sign * float(self.f(t)),
                bounds=(theta[i] - h, theta[i] + h),
                method="bounded",
                options={"xatol": 1e-12},
            )
            # keep whichever of the refined and grid values is more extreme
            out.append(sign * min(res.fun, sign * vals[i]))
        return out[0], out[1]


def _sin2_half(theta):
    return np.sin(0.5 * theta) ** 2


def _sin2_half_deriv(theta):
    return 0.5 * np.sin(theta)


@dataclass(frozen=True)
class Sin2Half(PhaseModulation):
    """f(theta) = sin^2(theta/2), written in Cartesian form as (1 - X/r)/2."""

    name: str = "sin2_half"
    f: Callable = _sin2_half
    df: Callable = _sin2_half_deriv

    def at_xy(self, x, y, r2):
        if np.ndim(x) == 0:
            r = math.sqrt(r2)
            if r < ORIGIN_EPS:
                return 0.0
            return 0.5 * (1.0 - x / r)
        r = np.sqrt(r2)
        small = r < ORIGIN_EPS
        q = np.divide(x, r, out=np.ones_like(r), where=~small)
        return 0.5 * (1.0 - q)

    def extrema(self, n: int = 4096) -> tuple[float, float]:
        return 0.0, 1.0


SIN2_HALF = Sin2Half()

MODULATIONS = {SIN2_HALF.name: SIN2_HALF}


@dataclass(frozen=True)
class KineticParams:
    a: float
    b: float
    nu: float
    beta: float
    alpha: float
    modulation: PhaseModulation = field(default=SIN2_HALF, compare=False)

    def __post_init__(self):
        for name in ("a", "b", "nu", "beta", "alpha"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"kinetic parameter {name} must be finite, got {v!r}")
        if not self.a < 0:
            raise ValueError(f"cubic coefficient a must be negative, got {self.a!r}")

    def replace(self, **changes) -> "KineticParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class PhasePoint:
    x: float
    y: float

    @classmethod
    def from_polar(cls, r: float, theta: float) -> "PhasePoint":
        return cls(r * math.cos(theta), r * math.sin(theta))

    @property
    def r(self) -> float:
        return math.hypot(self.x, self.y)

    @property
    def theta(self) -> float:
        """Polar angle in [0, 2*pi)."""
        t = math.atan2(self.y, self.x) % TWO_PI
        return 0.0 if t == TWO_PI else t

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y])


class FixedPointKind(str, enum.Enum):
    UNSTABLE_FOCUS = "UnstableFocus"
    STABLE_FOCUS = "StableFocus"
    SADDLE = "SaddlePoint"
    STABLE_NODE = "StableNode"
    SEMISTABLE = "Semistable"


class Regime(str, enum.Enum):
    STABLE_FOCUS = "StableFocusRegime"
    LIMIT_CYCLE = "LimitCycleRegime"
    SNH = "SNHBifurcation"
    EXCITABLE = "ExcitableRegime"
    HOPF = "HopfBifurcation"
    BOGDANOV_TAKENS = "BogdanovTakensSingular"


@dataclass(frozen=True)
class FixedPointReport:
    """One equilibrium with its linearisation.

    For points on the invariant circle ``eigenvectors`` are given in the polar
    (e_r, e_theta) coordinate frame, ordered as the eigenvalues; ``theta`` is the
    circle angle.  The origin carries no eigenvectors.
    """

    location: PhasePoint
    eigenvalues: tuple[complex, complex]
    kind: FixedPointKind
    eigenvectors: tuple[np.ndarray, np.ndarray] | None = None
    theta: float | None = None


SEMISTABLE_TOL = 1e-9
BIFURCATION_TOL = 1e-12


def polar_field(r, theta, k: KineticParams):
    """Right-hand side (dr/dt, dtheta/dt) of the polar system."""
    r2 = r * r
    return r * (k.nu + k.a * r2), k.beta + (k.b + k.alpha * k.modulation.f(theta)) * r2


def cartesian_field(x, y, k: KineticParams):
    """Right-hand side (dX/dt, dY/dt) in Cartesian coordinates.

    Works on scalars and on numpy arrays of any shape. At the origin the phase
    term is dropped; it is multiplied by r^2 there anyway.
    """
    r2 = x * x + y * y
    g = k.b + k.alpha * k.modulation.at_xy(x, y, r2)
    dx = k.nu * x - k.beta * y + r2 * (k.a * x - g * y)
    dy = k.beta * x + k.nu * y + r2 * (k.a * y + g * x)
    return dx, dy


def limit_cycle_radius(k: KineticParams) -> float:
    if not k.nu > 0:
        raise ValueError(f"no invariant circle for nu={k.nu!r}; need nu > 0")
    return math.sqrt(-k.nu / k.a)


def _rotation_offset(k: KineticParams) -> float:
    # value alpha*f(theta) must take on the circle for an equilibrium
    r0sq = -k.nu / k.a
    return -(k.beta + k.b * r0sq) / r0sq


def snh_alpha(k: KineticParams, branch: str = "max") -> float:
    """Value of alpha at which equilibria first appear on the invariant circle.

    ``branch="max"`` divides by the maximum of f (the only branch for
    sin^2(theta/2)); ``branch="min"`` divides by its minimum, which is the
    relevant edge when f has a single minimum.
    """
    limit_cycle_radius(k)
    fmin, fmax = k.modulation.extrema()
    denom = {"max": fmax, "min": fmin}[branch]
    if denom == 0:
        raise ValueError(f"{branch} of the phase modulation is zero; alpha_S undefined")
    return _rotation_offset(k) / denom


def circle_residual(theta, k: KineticParams):
    """Angular velocity on the invariant circle; zero at circle equilibria."""
    r0sq = -k.nu / k.a
    return k.beta + (k.b + k.alpha * k.modulation.f(theta)) * r0sq


def _circle_dist(t1: float, t2: float) -> float:
    d = abs(t1 - t2) % TWO_PI
    return min(d, TWO_PI - d)


def circle_fixed_points(
    k: KineticParams,
    n_grid: int = 4096,
    xtol: float = 1e-12,
    tangency_tol: float = SEMISTABLE_TOL,
) -> list[float]:
    """Angles in [0, 2*pi) of the equilibria on r = r0, sorted.

    Sign changes of the residual on a uniform grid are bisected to ``xtol``.
    A residual extremum within ``tangency_tol`` of zero is a tangency and is
    reported once, replacing any bisection roots next to it.
    """
    limit_cycle_radius(k)
    h = TWO_PI / n_grid
    theta = np.arange(n_grid) * h
    g = np.asarray(circle_residual(theta, k), dtype=float)
    g_next = np.roll(g, -1)

    def resid(t):
        return float(circle_residual(t, k))

    roots = [float(t) for t in theta[g == 0.0]]
    for i in np.nonzero((g * g_next < 0.0))[0]:
        root = optimize.bisect(resid, theta[i], theta[i] + h, xtol=xtol)
        roots.append(root % TWO_PI)

    # tangencies sit at local extrema of the residual
    g_prev = np.roll(g, 1)
    is_ext = ((g >= g_prev) & (g >= g_next)) | ((g <= g_prev) & (g <= g_next))
    scale = max(1.0, float(np.max(np.abs(g))))
    for i in np.nonzero(is_ext & (np.abs(g) < 1e-2 * scale))[0]:
        sign = 1.0 if g[i] >= max(g_prev[i], g_next[i]) else -1.0
        res = optimize.minimize_scalar(
            lambda t: -sign * resid(t),
            bounds=(theta[i] - h, theta[i] + h),
            method="bounded",
            options={"xatol": 1e-10},
        )
        t_ext = float(res.x) % TWO_PI
        if abs(resid(t_ext)) < tangency_tol:
            roots = [t for t in roots if _circle_dist(t, t_ext) > 2 * h]
            roots.append(t_ext)

    roots.sort()
    merged: list[float] = []
    for t in roots:
        if not merged or _circle_dist(t, merged[-1]) > 10 * xtol:
            merged.append(t)
    if len(merged) > 1 and _circle_dist(merged[0], merged[-1]) <= 10 * xtol:
        merged.pop()
    return merged


def _classify_real(lam_r: float, lam_t: float) -> FixedPointKind:
    if abs(lam_t) < SEMISTABLE_TOL or abs(lam_r) < SEMISTABLE_TOL:
        return FixedPointKind.SEMISTABLE
    if lam_r < 0 and lam_t < 0:
        return FixedPointKind.STABLE_NODE
    if lam_r * lam_t < 0:
        return FixedPointKind.SADDLE
    raise ValueError(f"unstable node ({lam_r}, {lam_t}) cannot occur on the invariant circle")


def circle_jacobian(k: KineticParams, theta: float, tol: float = 1e-8) -> FixedPointReport:
    """Linearisation of the polar system at the circle equilibrium (r0, theta).

    The Jacobian is lower triangular, so its eigenvalues are the radial rate
    -2*nu and the angular rate -alpha*nu*f'(theta)/a.  The class follows the
    sign of the angular rate.
    """
    resid = float(circle_residual(theta, k))
    if abs(resid) > tol:
        raise ValueError(f"theta={theta!r} is not a circle equilibrium (residual {resid:.3e})")
    r0 = limit_cycle_radius(k)
    f = float(k.modulation.f(theta))
    fp = float(k.modulation.df(theta))
    lam_r = -2.0 * k.nu
    lam_t = -k.alpha * k.nu * fp / k.a
    e_r = np.array([lam_r - lam_t, 2.0 * r0 * (k.b + k.alpha * f)])
    e_t = np.array([0.0, 1.0])
    return FixedPointReport(
        location=PhasePoint.from_polar(r0, theta),
        eigenvalues=(complex(lam_r), complex(lam_t)),
        kind=_classify_real(lam_r, lam_t),
        eigenvectors=(e_r, e_t),
        theta=theta,
    )


def polar_to_cartesian_vector(theta: float, r: float, v) -> np.ndarray:
    """Map a tangent vector (dr, dtheta) at angle ``theta``, radius ``r`` to (dX, dY)."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([v[0] * c - r * v[1] * s, v[0] * s + r * v[1] * c])


def manifold_angle(k: KineticParams) -> float:
    """Angle a_sc = arctan(r0*nu/beta) between the threshold and the circle at alpha_S."""
    r0 = limit_cycle_radius(k)
    if k.beta == 0:
        return math.pi / 2
    return math.atan(r0 * k.nu / k.beta)


def origin_report(k: KineticParams) -> FixedPointReport:
    lam = complex(k.nu, k.beta)
    kind = FixedPointKind.UNSTABLE_FOCUS if k.nu > 0 else FixedPointKind.STABLE_FOCUS
    return FixedPointReport(PhasePoint(0.0, 0.0), (lam, lam.conjugate()), kind)


def all_fixed_points(k: KineticParams) -> list[FixedPointReport]:
    reports = [origin_report(k)]
    if k.nu > 0:
        reports += [circle_jacobian(k, t) for t in circle_fixed_points(k)]
    return reports


def find_fixed_point(k: KineticParams, kind: FixedPointKind) -> FixedPointReport:
    """First equilibrium of the given class; ValueError when there is none."""
    for rep in all_fixed_points(k):
        if rep.kind is kind:
            return rep
    raise ValueError(f"no {kind.value} for {k}")


def classify_regime(k: KineticParams) -> Regime:
    if abs(k.nu) <= BIFURCATION_TOL:
        if abs(k.beta) <= BIFURCATION_TOL:
            return Regime.BOGDANOV_TAKENS
        return Regime.HOPF
    if k.nu < 0:
        return Regime.STABLE_FOCUS
    if abs(k.alpha - snh_alpha(k)) <= BIFURCATION_TOL:
        return Regime.SNH
    fmin, fmax = k.modulation.extrema()
    lo, hi = sorted((k.alpha * fmin, k.alpha * fmax))
    if lo <= _rotation_offset(k) <= hi:
        return Regime.EXCITABLE
    return Regime.LIMIT_CYCLE


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    xy: np.ndarray

    def path_length(self) -> float:
        return float(np.sum(np.hypot(*np.diff(self.xy, axis=0).T)))

    @property
    def r(self) -> np.ndarray:
        return np.hypot(self.xy[:, 0], self.xy[:, 1])


def _rk4(fun, x, y, h):
    k1x, k1y = fun(x, y)
    k2x, k2y = fun(x + 0.5 * h * k1x, y + 0.5 * h * k1y)
    k3x, k3y = fun(x + 0.5 * h * k2x, y + 0.5 * h * k2y)
    k4x, k4y = fun(x + h * k3x, y + h * k3y)
    return (x + h / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x),
            y + h / 6.0 * (k1y + 2 * k2y + 2 * k3y + k4y))


def integrate_trajectory(
    p0: PhasePoint, k: KineticParams, t_end: float, dt: float = 1e-3
) -> Trajectory:
    """Fixed-step RK4 on the Cartesian field, sampled at every step."""
    if not (dt > 0 and t_end > 0):
        raise ValueError("dt and t_end must be positive")
    n = int(round(t_end / dt))
    out = np.empty((n + 1, 2))
    x, y = float(p0.x), float(p0.y)
    out[0] = x, y

    def fun(u, v):
        return cartesian_field(u, v, k)

    for i in range(1, n + 1):
        x, y = _rk4(fun, x, y, dt)
        if not (math.isfinite(x) and math.isfinite(y)):
            raise FloatingPointError(f"trajectory diverged at t={i * dt:g}")
        out[i] = x, y
    return Trajectory(np.arange(n + 1) * dt, out)


@dataclass(frozen=True)
class ThresholdManifold:
    """Both branches of the threshold, each starting next to ``anchor``."""

    anchor: FixedPointReport
    inner: np.ndarray
    outer: np.ndarray


def stable_direction(report: FixedPointReport, k: KineticParams) -> np.ndarray:
    """Unit Cartesian vector along the radial-rate eigenvector of a circle point."""
    r0 = limit_cycle_radius(k)
    v = polar_to_cartesian_vector(report.theta, r0, report.eigenvectors[0])
    return v / np.linalg.norm(v)


def _trace_branch(seed, k, arclength, ds, r_min, r_max, max_steps):
    def backward_unit(u, v):
        fx, fy = cartesian_field(u, v, k)
        n = math.hypot(fx, fy)
        return -fx / n, -fy / n

    x, y = seed
    pts = [(x, y)]
    s = 0.0
    for _ in range(max_steps):
        x, y = _rk4(backward_unit, x, y, ds)
        pts.append((x, y))
        s += ds
        r = math.hypot(x, y)
        if r < r_min or r > r_max or s >= arclength:
            break
    return np.array(pts)


def trace_threshold(
    k: KineticParams,
    arclength: float = 20.0,
    ds: float = 1e-3,
    offset: float = 1e-6,
    r_min: float = 1e-3,
    r_max: float | None = None,
    max_steps: int = 10**6,
) -> ThresholdManifold:
    """Stable manifold of the saddle (or semistable point) by backward integration.

    The field is normalised so each RK4 step advances ``ds`` in arclength.  The
    inner branch stops once it reaches ``r_min`` around the focus; the outer one
    once it leaves ``r_max`` (default 3*r0).
    """
    regime = classify_regime(k)
    if regime not in (Regime.SNH, Regime.EXCITABLE):
        raise ValueError(f"no threshold in regime {regime.value}")
    anchors = [
        rep for rep in all_fixed_points(k)
        if rep.kind in (FixedPointKind.SADDLE, FixedPointKind.SEMISTABLE)
    ]
    if not anchors:
        raise ValueError("no saddle or semistable point on the circle")
    anchor = anchors[0]
    r0 = limit_cycle_radius(k)
    if r_max is None:
        r_max = 3.0 * r0
    p = anchor.location.as_array()
    e = stable_direction(anchor, k)
    branches = [
        _trace_branch(p + sgn * offset * e, k, arclength, ds, r_min, r_max, max_steps)
        for sgn in (1.0, -1.0)
    ]
    # the inner seed is the one closer to the origin
    branches.sort(key=lambda b: np.hypot(*b[0]))
    return ThresholdManifold(anchor, branches[0], branches[1])


def winding_number(points: np.ndarray) -> float:
    """Signed number of turns a polyline makes around the origin."""
    ang = np.unwrap(np.arctan2(points[:, 1], points[:, 0]))
    return float((ang[-1] - ang[0]) / TWO_PI)


def ray_crossings(points: np.ndarray, angle: float = 0.0) -> int:
    """Number of times a polyline crosses the ray from the origin at ``angle``."""
    ang = np.unwrap(np.arctan2(points[:, 1], points[:, 0])) - angle
    turns = np.floor(ang / TWO_PI)
    return int(np.count_nonzero(np.diff(turns)))
