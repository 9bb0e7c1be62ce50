import math

import numpy as np
import pytest

from excitable.kinetics import FixedPointKind, KineticParams, PhasePoint, cartesian_field, find_fixed_point
from excitable.rdsolver import (
    BlowUpError, FieldPair, InitialCondition, Stepper, apply_initial, cross_section, disk_mask,
    ghost_padded, make_grid, run, step,
)

K_TRAIN = KineticParams(-1.0, 1.0, 1.0, 0.5, -1.5)
K_NODE = KineticParams(-1.0, 1.0, 1.0, 1.0, -2.1)
ORIGIN = PhasePoint(0.0, 0.0)
SEMI = PhasePoint(-1.0, 0.0)


def reference_step(x, y, k, dt, dx, d, mask=None):
    """Site-by-site forward Euler with explicit neighbour loops."""
    nx, ny = np.zeros_like(x), np.zeros_like(y)
    coef = d * dt / dx**2
    if x.ndim == 1:
        n = len(x)
        for i in range(n):
            lo = x[1] if i == 0 else x[i - 1]
            hi = x[n - 2] if i == n - 1 else x[i + 1]
            lo_y = y[1] if i == 0 else y[i - 1]
            hi_y = y[n - 2] if i == n - 1 else y[i + 1]
            fx, fy = cartesian_field(x[i], y[i], k)
            nx[i] = x[i] + dt * fx + coef * (lo + hi - 2 * x[i])
            ny[i] = y[i] + dt * fy + coef * (lo_y + hi_y - 2 * y[i])
        return nx, ny
    n = x.shape[0]
    for i in range(n):
        for j in range(n):
            if not mask[i, j]:
                continue
            lap_x = lap_y = 0.0
            for di, dj in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                p, q = i + di, j + dj
                if 0 <= p < n and 0 <= q < n and mask[p, q]:
                    lap_x += x[p, q] - x[i, j]
                    lap_y += y[p, q] - y[i, j]
            fx, fy = cartesian_field(x[i, j], y[i, j], k)
            nx[i, j] = x[i, j] + dt * fx + coef * lap_x
            ny[i, j] = y[i, j] + dt * fy + coef * lap_y
    return nx, ny


# -- grid ---------------------------------------------------------------

def test_grid_spacing_and_length():
    g = make_grid(1, 2000, 0.01, 2e-5)
    assert g.dx == pytest.approx(1.0954e-3, abs=5e-8)
    assert abs(g.dx / math.sqrt(6 * 0.01 * 2e-5) - 1) < 1e-12
    assert g.length == pytest.approx(2.1909, abs=5e-5)
    assert g.diffusion_numbers()[0] == pytest.approx(1 / 6, rel=1e-12)


def test_grid_spacing_scales_with_root_of_step():
    coarse = make_grid(1, 100, 0.01, 2e-5)
    fine = make_grid(1, 100, 0.0025, 2e-5)
    assert fine.dx == pytest.approx(coarse.dx / 2, rel=1e-12)


def test_grid_unequal_diffusion():
    g = make_grid(1, 10, 0.01, 1e-5, 3e-5)
    assert g.dx == pytest.approx(math.sqrt(6 * 0.01 * 3e-5), rel=1e-12)
    with pytest.raises(ValueError, match="strict"):
        make_grid(1, 10, 0.01, 1e-5, 3e-5, strict=True)


@pytest.mark.parametrize("args", [(3, 10, 0.01, 1e-5), (1, 2, 0.01, 1e-5),
                                  (1, 10, 0.0, 1e-5), (1, 10, 0.01, -1.0)])
def test_grid_rejects_bad_inputs(args):
    with pytest.raises(ValueError):
        make_grid(*args)


@pytest.mark.parametrize("n", [9, 10, 50])
def test_disk_mask_geometry(n):
    m = disk_mask(n)
    i = np.arange(n) - (n - 1) / 2
    inside = i[:, None] ** 2 + i[None, :] ** 2 <= (n / 2) ** 2
    assert np.array_equal(m, inside)
    assert np.array_equal(m, m.T) and np.array_equal(m, m[::-1])


# -- initial conditions -------------------------------------------------

def test_radius_zero_marks_one_site():
    g = make_grid(1, 101, 0.01, 2e-5)
    f = apply_initial(g, InitialCondition(ORIGIN, SEMI, 0))
    assert np.count_nonzero(f.x) == 1 and f.x[50] == -1.0


def test_radius_eighty_marks_161_sites():
    g = make_grid(1, 2000, 0.01, 2e-5)
    f = apply_initial(g, InitialCondition(SEMI, ORIGIN, 80))
    assert np.count_nonzero(f.x == 0.0) == 161
    assert np.all(f.x[920:1081] == 0.0)


def test_radius_covering_domain_is_uniform():
    g = make_grid(1, 50, 0.01, 2e-5)
    f = apply_initial(g, InitialCondition(ORIGIN, SEMI, 50))
    assert np.all(f.x == -1.0)


def test_no_perturbation():
    g = make_grid(1, 50, 0.01, 2e-5)
    f = apply_initial(g, InitialCondition(SEMI, ORIGIN, None))
    assert np.all(f.x == -1.0)


def test_initial_rejects_centre_outside():
    g1 = make_grid(1, 50, 0.01, 2e-5)
    with pytest.raises(ValueError):
        apply_initial(g1, InitialCondition(ORIGIN, SEMI, 1, center=60))
    g2 = make_grid(2, 21, 0.01, 2e-5)
    with pytest.raises(ValueError):
        apply_initial(g2, InitialCondition(ORIGIN, SEMI, 1, center=(0, 0)))


def test_initial_2d_euclidean_disk():
    g = make_grid(2, 41, 0.01, 2e-5)
    f = apply_initial(g, InitialCondition(ORIGIN, SEMI, 5))
    i = np.arange(41) - 20
    expected = (i[:, None] ** 2 + i[None, :] ** 2) <= 25
    assert np.array_equal(f.x == -1.0, expected)
    assert np.all(f.x[~g.mask] == 0)


# -- stepping -----------------------------------------------------------

@pytest.mark.parametrize("dim", [1, 2])
def test_step_matches_loop_reference(dim):
    n = 23 if dim == 2 else 40
    g = make_grid(dim, n, 0.01, 2e-5)
    rng = np.random.default_rng(3)
    x = rng.uniform(-1, 1, g.shape) * g.active
    y = rng.uniform(-1, 1, g.shape) * g.active
    out = step(FieldPair(x, y, g), K_TRAIN)
    rx, ry = reference_step(x, y, K_TRAIN, g.dt, g.dx, 2e-5, g.mask)
    assert np.max(np.abs(out.x - rx)) < 1e-14
    assert np.max(np.abs(out.y - ry)) < 1e-14
    assert out.time == pytest.approx(0.01) and out.steps == 1


def test_ghosts_mirror_the_first_interior_site():
    u = np.arange(6.0)
    up = ghost_padded(u, make_grid(1, 6, 0.01, 2e-5))
    assert up[0] == u[1] and up[-1] == u[-2]


@pytest.mark.parametrize("kind", ["origin", FixedPointKind.STABLE_NODE, FixedPointKind.SADDLE])
@pytest.mark.parametrize("dim", [1, 2])
def test_uniform_fixed_point_is_steady(kind, dim):
    p = ORIGIN if kind == "origin" else find_fixed_point(K_NODE, kind).location
    g = make_grid(dim, 31, 0.01, 2e-5)
    f = apply_initial(g, InitialCondition(p, p, None))
    stepper = Stepper(g, K_NODE)
    x0, y0 = f.x.copy(), f.y.copy()
    for _ in range(200):
        prev = f
        f = stepper(f)
        assert np.max(np.abs(f.x - prev.x)) < 1e-13
    assert np.max(np.abs(f.x - x0)) + np.max(np.abs(f.y - y0)) < 1e-9


def test_synchronised_oscillation_stays_uniform():
    g = make_grid(1, 64, 0.01, 2e-5)
    k = KineticParams(-1, 1, 1, 0.5, -1.0)
    f = apply_initial(g, InitialCondition(PhasePoint(0.3, 0.1), ORIGIN, None))
    stepper = Stepper(g, k)
    for _ in range(500):
        f = stepper(f)
    assert np.ptp(f.x) == 0.0 and np.ptp(f.y) == 0.0
    assert abs(f.x[0] - 0.3) > 1e-2  # it did move


def test_blow_up_is_reported_with_site_and_time():
    g = make_grid(1, 11, 1.0, 2e-5)
    x = np.zeros(11)
    x[4] = 50.0
    with pytest.raises(BlowUpError) as info:
        f = FieldPair(x, np.zeros(11), g)
        for _ in range(20):
            f = step(f, K_TRAIN)
    assert info.value.site == (4,)
    assert info.value.time > 0


# -- runs ---------------------------------------------------------------

def test_run_records_frames():
    g = make_grid(1, 200, 0.01, 2e-5)
    rec = run(g, K_TRAIN, InitialCondition(ORIGIN, SEMI, 2), 5.0, sample_stride=50)
    assert rec.n_frames == 11
    assert np.all(np.diff(rec.times) > 0) and rec.times[0] == 0
    assert rec.x_frames.shape == (11, 200)
    assert rec.final.steps == 500
    np.testing.assert_array_equal(rec.x_frames[-1], rec.final.x)


def test_run_rejects_bad_arguments():
    g = make_grid(1, 20, 0.01, 2e-5)
    ic = InitialCondition(ORIGIN, SEMI, 2)
    with pytest.raises(ValueError):
        run(g, K_TRAIN, ic, 0.0)
    with pytest.raises(ValueError):
        run(g, K_TRAIN, ic, 1.0, sample_stride=0)


def test_odd_lattice_stays_mirror_symmetric():
    g = make_grid(1, 401, 0.01, 2e-5)
    rec = run(g, K_TRAIN, InitialCondition(ORIGIN, SEMI, 3), 20.0, sample_stride=100)
    assert np.max(np.abs(rec.x_frames - rec.x_frames[:, ::-1])) < 1e-12
    assert np.max(np.abs(rec.x_frames[-1])) > 0.5


def test_zero_flux_boundary_every_step():
    g = make_grid(1, 120, 0.01, 2e-5)
    k = KineticParams(-1, 1, 1, 0.0, -1.0)
    f = apply_initial(g, InitialCondition(ORIGIN, SEMI, 2))
    stepper = Stepper(g, k)
    for _ in range(1500):
        f = stepper(f)
        up = ghost_padded(f.x, g)
        assert up[0] - up[2] == 0.0 and up[-1] - up[-3] == 0.0
    assert abs(f.x[0]) > 0.5  # the front reached the boundary


def test_masked_laplacian_conserves_mass():
    g = make_grid(2, 31, 0.01, 2e-5)
    rng = np.random.default_rng(0)
    u = rng.normal(size=g.shape) * g.mask
    st = Stepper(g, K_TRAIN)
    lap = st._laplacian(ghost_padded(u, g), u, slice(0, g.n_sites))
    assert abs(lap[g.mask].sum()) < 1e-11
    out = st(FieldPair(u, u.copy(), g))
    assert np.all(out.x[~g.mask] == 0) and np.all(out.y[~g.mask] == 0)


@pytest.mark.parametrize("dim,n", [(1, 500), (2, 61)])
def test_workers_give_bitwise_identical_records(dim, n):
    g = make_grid(dim, n, 0.01, 2e-5)
    ic = InitialCondition(ORIGIN, SEMI, 3)
    a = run(g, K_TRAIN, ic, 3.0, sample_stride=30, workers=1)
    b = run(g, K_TRAIN, ic, 3.0, sample_stride=30, workers=4)
    assert a.x_frames.tobytes() == b.x_frames.tobytes()
    assert a.y_frames.tobytes() == b.y_frames.tobytes()


def test_train_stays_inside_bound():
    g = make_grid(1, 600, 0.01, 2e-5)
    rec = run(g, K_TRAIN, InitialCondition(ORIGIN, SEMI, 2), 30.0, sample_stride=20)
    assert np.max(np.hypot(rec.x_frames, rec.y_frames)) <= 1.5


# -- 2D sections --------------------------------------------------------

def test_cross_section():
    g = make_grid(2, 41, 0.01, 2e-5)
    ic = InitialCondition(SEMI, SEMI, None)
    full = run(g, K_TRAIN, ic, 0.05, sample_stride=1)
    sec = run(g, K_TRAIN, ic, 0.05, sample_stride=1, section_only=True)
    prof = cross_section(full, -1)
    assert len(prof) == int(g.mask[g.section_row].sum())
    assert np.all(prof == prof[0])
    np.testing.assert_array_equal(prof, cross_section(sec, -1))
    with pytest.raises(IndexError):
        cross_section(full, 99)


def test_cross_section_rejects_1d():
    g = make_grid(1, 20, 0.01, 2e-5)
    rec = run(g, K_TRAIN, InitialCondition(ORIGIN, SEMI, 1), 0.02, sample_stride=1)
    with pytest.raises(ValueError):
        cross_section(rec, 0)


def test_2d_ring_is_left_right_symmetric():
    g = make_grid(2, 81, 0.01, 2e-5)
    rec = run(g, K_TRAIN, InitialCondition(ORIGIN, SEMI, 3), 4.0, sample_stride=100)
    prof = rec.profile(-1)
    assert np.max(np.abs(prof - prof[::-1])) < 1e-12
    assert np.max(np.abs(rec.final.x - rec.final.x.T)) < 1e-12
