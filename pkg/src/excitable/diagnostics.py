"""Measurements on space-time records: maxima, wavelengths, pulses, fronts."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.signal import find_peaks

from .kinetics import PhasePoint, limit_cycle_radius
from .rdsolver import SpaceTimeRecord

CV_THRESHOLD = 0.05
# default margin is this fraction of the profile: 100 sites on a 2000-site lattice
MARGIN_FRACTION = 0.05
FLOOR_FRACTION = 0.1


class InsufficientMaximaError(ValueError):
    pass


class NoFrontError(ValueError):
    pass


@dataclass(frozen=True)
class MaximaSet:
    time: float | None
    index: np.ndarray
    position: np.ndarray
    amplitude: np.ndarray

    def __len__(self):
        return len(self.index)

    def gaps(self) -> np.ndarray:
        return np.diff(self.position)


@dataclass
class WaveMetrics:
    wavelength_sites: float | None = None
    wavelength: float | None = None
    cv: float | None = None
    periodic: bool | None = None
    n_gaps: int = 0
    pulse_count: int | None = None
    pulse_count_total: int | None = None
    front_position: float | None = None
    front_speed: float | None = None

    @property
    def wave_number(self) -> float | None:
        return None if not self.wavelength else 1.0 / self.wavelength

    def as_row(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class LawFit:
    c: float
    d: float
    rms: float
    n: int

    def predict(self, beta):
        return self.c + self.d / np.asarray(beta, dtype=float)


@dataclass(frozen=True)
class FrontTrack:
    times: np.ndarray
    positions: np.ndarray
    speed: float
    dx: float

    @property
    def speed_physical(self) -> float:
        return self.speed * self.dx


def default_floor(record: SpaceTimeRecord) -> float:
    return FLOOR_FRACTION * limit_cycle_radius(record.params)


def _background_x(background) -> float:
    return background.x if isinstance(background, PhasePoint) else float(background)


def find_maxima(profile, floor: float = 0.0, background=0.0, time=None) -> MaximaSet:
    """Interior strict local maxima of ``profile`` rising more than ``floor`` above background.

    Flat tops are reported at their midpoint; single-site peaks are refined by
    the vertex of the parabola through the peak and its two neighbours.
    """
    x = np.asarray(profile, dtype=float)
    if x.size < 3:
        raise ValueError("profile needs at least 3 samples")
    level = _background_x(background) + floor
    idx, props = find_peaks(x, plateau_size=1)
    keep = x[idx] > level
    idx = idx[keep]
    left = props["left_edges"][keep]
    right = props["right_edges"][keep]
    pos = idx.astype(float)
    single = left == right
    i = idx[single]
    y0, y1, y2 = x[i - 1], x[i], x[i + 1]
    curv = y0 - 2.0 * y1 + y2
    pos[single] = i + 0.5 * (y0 - y2) / curv
    pos[~single] = 0.5 * (left[~single] + right[~single])
    return MaximaSet(time, idx, pos, x[idx])


def count_pulses(profile, background=0.0, floor: float = 0.1) -> int:
    """Number of excursions of |X - background| above ``floor``.

    An excursion ends only once the deviation drops below ``floor / 2``.
    """
    dev = np.abs(np.asarray(profile, dtype=float) - _background_x(background))
    n = 0
    inside = False
    for v in dev:
        if not inside and v > floor:
            n += 1
            inside = True
        elif inside and v < 0.5 * floor:
            inside = False
    return n


def _center_index(record: SpaceTimeRecord, profile_len: int) -> int:
    if record.grid.dimension == 1:
        return record.grid.center
    return profile_len // 2


def front_index(profile, background, threshold: float, start: int = 0) -> int | None:
    """Outermost site at or beyond ``start`` deviating more than ``threshold``."""
    dev = np.abs(np.asarray(profile[start:], dtype=float) - _background_x(background))
    hits = np.nonzero(dev > threshold)[0]
    if hits.size == 0:
        return None
    return start + int(hits[-1])


def window_frames(record: SpaceTimeRecord, window=None) -> np.ndarray:
    """Frame indices inside the time ``window``; default the final quarter of frames."""
    if window is None:
        first = int(np.floor(0.75 * (record.n_frames - 1)))
        return np.arange(first, record.n_frames)
    lo, hi = window
    return np.nonzero((record.times >= lo) & (record.times <= hi))[0]


def default_margin(profile_len: int) -> int:
    return int(round(MARGIN_FRACTION * profile_len))


def wavelength(record: SpaceTimeRecord, window=None, region=None, floor: float | None = None,
               cv_threshold: float = CV_THRESHOLD, margin: int | None = None) -> WaveMetrics:
    """Mean spacing of consecutive maxima, pooled over the frames of ``window``.

    ``region`` is a (first, last) site range of the profile.  By default each
    frame uses the half lattice right of the centre, from ``margin`` sites past
    the centre to ``margin`` sites before the front (or the boundary), which
    leaves out the source, the collision zone at the centre and the edge.
    ``margin`` defaults to 5% of the profile length.
    """
    if floor is None:
        floor = default_floor(record)
    frames = window_frames(record, window)
    if frames.size == 0:
        raise ValueError("no frames in the measurement window")
    bg = record.background_x
    gaps = []
    enough = False
    for f in frames:
        prof = record.profile(int(f))
        if region is None:
            c = _center_index(record, len(prof))
            if margin is None:
                margin = default_margin(len(prof))
            lo = c + margin
            hi = len(prof) - 1 - margin
            front = front_index(prof, bg, floor, start=c)
            if front is not None:
                hi = min(hi, front - margin)
        else:
            lo, hi = region
        m = find_maxima(prof, floor, bg, record.times[f])
        pos = m.position[(m.position >= lo) & (m.position <= hi)]
        if pos.size >= 3:
            enough = True
        gaps.extend(np.diff(pos))
    if not enough:
        raise InsufficientMaximaError("fewer than 3 maxima in every frame of the window")
    g = np.asarray(gaps)
    mean = float(g.mean())
    cv = float(g.std() / mean)
    return WaveMetrics(
        wavelength_sites=mean,
        wavelength=mean * record.grid.dx,
        cv=cv,
        periodic=cv < cv_threshold,
        n_gaps=int(g.size),
    )


def fit_wavelength_law(pairs) -> LawFit:
    """Least-squares fit of wavelength = c + d / beta."""
    arr = np.asarray(pairs, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or len(arr) < 4:
        raise ValueError("need at least 4 (beta, wavelength) pairs")
    beta, lam = arr[:, 0], arr[:, 1]
    if np.any(beta == 0) or not (np.all(beta > 0) or np.all(beta < 0)):
        raise ValueError("beta values must be non-zero and share one sign")
    design = np.column_stack([np.ones_like(beta), 1.0 / beta])
    (c, d), *_ = np.linalg.lstsq(design, lam, rcond=None)
    rms = float(np.sqrt(np.mean((design @ [c, d] - lam) ** 2)))
    return LawFit(float(c), float(d), rms, len(arr))


def front_tracker(record: SpaceTimeRecord, threshold: float | None = None) -> FrontTrack:
    """Distance (in sites) of the right-hand front from the centre, frame by frame.

    Speed is the least-squares slope over the second half of the record.
    """
    if threshold is None:
        threshold = default_floor(record)
    bg = record.background_x
    pos = np.full(record.n_frames, np.nan)
    for f in range(record.n_frames):
        prof = record.profile(f)
        c = _center_index(record, len(prof))
        i = front_index(prof, bg, threshold, start=c)
        if i is not None:
            pos[f] = i - c
    if np.isnan(pos[-1]):
        raise NoFrontError("no front in the final frame")
    half = np.arange(record.n_frames) >= record.n_frames // 2
    sel = half & ~np.isnan(pos)
    if np.count_nonzero(sel) >= 2:
        speed = float(np.polyfit(record.times[sel], pos[sel], 1)[0])
    else:
        speed = float("nan")
    return FrontTrack(record.times.copy(), pos, speed, record.grid.dx)


def summarize(record: SpaceTimeRecord, floor: float | None = None,
              cv_threshold: float = CV_THRESHOLD, margin: int | None = None) -> WaveMetrics:
    """All metrics that apply to ``record``; inapplicable ones stay None.

    ``pulse_count`` counts excursions on one side of the centre in the final
    frame, ``pulse_count_total`` over the whole profile.
    """
    if floor is None:
        floor = default_floor(record)
    try:
        metrics = wavelength(record, floor=floor, cv_threshold=cv_threshold, margin=margin)
    except InsufficientMaximaError:
        metrics = WaveMetrics()
    prof = record.profile(-1)
    c = _center_index(record, len(prof))
    bg = record.background_x
    metrics.pulse_count = count_pulses(prof[c:], bg, floor)
    metrics.pulse_count_total = count_pulses(prof, bg, floor)
    try:
        track = front_tracker(record, floor)
        metrics.front_position = float(track.positions[-1])
        metrics.front_speed = track.speed
    except NoFrontError:
        pass
    return metrics
