"""Analytics for error time series: scale split, spectra, fits and regimes."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .spectral import SpectralField, VelocityField, h_norm

ERROR_COLUMNS = ("t", "err_H2", "err_V2", "err_Pm2", "err_Qm2", "energy_v", "enstrophy_v")
EXPONENTIAL = "exponential"
SUPER_EXPONENTIAL = "super_exponential"
FLOOR = "floor"
EPS = np.finfo(float).eps


@dataclass
class ErrorSeries:
    """Sampled synchronisation error w = v - u of an assimilated run."""

    times: list = field(default_factory=list)
    err_H2: list = field(default_factory=list)
    err_V2: list = field(default_factory=list)
    err_Pm2: list = field(default_factory=list)
    err_Qm2: list = field(default_factory=list)
    energy_v: list = field(default_factory=list)
    enstrophy_v: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.times)

    def append(self, t, err_H2, err_V2, err_Pm2, err_Qm2, energy_v, enstrophy_v) -> None:
        for name, value in zip(ERROR_COLUMNS, (t, err_H2, err_V2, err_Pm2, err_Qm2, energy_v, enstrophy_v)):
            getattr(self, "times" if name == "t" else name).append(float(value))

    def array(self, key: str) -> np.ndarray:
        return np.asarray(self.times if key == "t" else getattr(self, key), dtype=float)

    def to_csv(self, path) -> None:
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(ERROR_COLUMNS)
            cols = [self.times] + [getattr(self, c) for c in ERROR_COLUMNS[1:]]
            for row in zip(*cols):
                w.writerow([f"{x:.17g}" for x in row])

    @classmethod
    def from_csv(cls, path) -> "ErrorSeries":
        out = cls()
        with open(Path(path), newline="") as fh:
            reader = csv.DictReader(fh)
            missing = [c for c in ERROR_COLUMNS if c not in (reader.fieldnames or [])]
            if missing:
                raise ValueError(f"{path}: missing columns {missing}")
            for lineno, row in enumerate(reader, start=2):
                try:
                    out.append(*(float(row[c]) for c in ERROR_COLUMNS))
                except (TypeError, ValueError) as exc:
                    raise ValueError(f"{path}:{lineno}: malformed row") from exc
        return out


def _as_velocity(w) -> list:
    return [w.u1, w.u2] if isinstance(w, VelocityField) else [w]


def scale_split(w, m: int) -> tuple[float, float]:
    """Split ||w||_H^2 into the parts carried by modes with |k| <= m and |k| > m."""
    comps = _as_velocity(w)
    g = comps[0].grid
    low = g.ksq_index <= m * m
    p = sum(g.weights * np.abs(c.coeffs) ** 2 for c in comps) * g.L**2
    return float(p[low].sum()), float(p[~low].sum())


def shell_spectrum(f) -> np.ndarray:
    """Energy per integer shell s <= |k| < s+1 (index units); sums to ||f||_H^2."""
    comps = _as_velocity(f)
    g = comps[0].grid
    p = sum(g.weights * np.abs(c.coeffs) ** 2 for c in comps) * g.L**2
    shells = np.floor(g.kmag_index + 1e-9).astype(int)
    return np.bincount(shells.ravel(), weights=p.ravel())


def spectrum_to_csv(spectrum: np.ndarray, path) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["shell", "energy"])
        for s, e in enumerate(spectrum):
            w.writerow([s, f"{e:.17g}"])


class ExpFit(NamedTuple):
    rate: float
    intercept: float
    max_abs_residual: float
    max_log_residual: float


def _series_arrays(series, key: str = "err_H2") -> tuple[np.ndarray, np.ndarray]:
    if isinstance(series, ErrorSeries):
        return series.array("t"), series.array(key)
    t, y = series
    return np.asarray(t, dtype=float), np.asarray(y, dtype=float)


def fit_exponential(series, t_lo: float = -np.inf, t_hi: float = np.inf, key: str = "err_H2") -> ExpFit:
    """Least-squares fit of log(err) = intercept + rate * t on ``[t_lo, t_hi]``.

    ``series`` is an :class:`ErrorSeries` or a ``(times, values)`` pair.
    The linear-scale residual is ``max |err - exp(intercept + rate t)|``
    and the log residual is the same in log space.
    """
    t, y = _series_arrays(series, key)
    sel = (t >= t_lo) & (t <= t_hi)
    t, y = t[sel], y[sel]
    if t.size < 3:
        raise ValueError(f"fit window [{t_lo}, {t_hi}] holds {t.size} samples, need at least 3")
    if not (y > 0).all():
        raise ValueError("exponential fit needs strictly positive errors in the window")
    ly = np.log(y)
    tc = t - t.mean()
    rate = float((tc * (ly - ly.mean())).sum() / (tc * tc).sum())
    intercept = float(ly.mean() - rate * t.mean())
    model = intercept + rate * t
    return ExpFit(rate, intercept, float(np.abs(y - np.exp(model)).max()), float(np.abs(ly - model).max()))


@dataclass
class Segment:
    t_start: float
    t_end: float
    kind: str
    rate: float
    residual: float


@dataclass
class RegimeReport:
    segments: list

    @property
    def kinds(self) -> list:
        return [s.kind for s in self.segments]

    @property
    def has_interior_super_exponential(self) -> bool:
        """True when a super-exponential segment sits between two other segments."""
        k = self.kinds
        return any(k[i] == SUPER_EXPONENTIAL and k[i - 1] != SUPER_EXPONENTIAL and k[i + 1] != SUPER_EXPONENTIAL
                   for i in range(1, len(k) - 1))

    def to_csv(self, path) -> None:
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t_start", "t_end", "kind", "rate", "residual"])
            for s in self.segments:
                w.writerow([f"{s.t_start:.17g}", f"{s.t_end:.17g}", s.kind, f"{s.rate:.17g}", f"{s.residual:.17g}"])

    @classmethod
    def from_csv(cls, path) -> "RegimeReport":
        with open(Path(path), newline="") as fh:
            return cls([Segment(float(r["t_start"]), float(r["t_end"]), r["kind"], float(r["rate"]), float(r["residual"]))
                        for r in csv.DictReader(fh)])


def _moving_average(x: np.ndarray, width: int) -> np.ndarray:
    if width <= 1:
        return x.copy()
    pad = width // 2
    xp = np.pad(x, (pad, width - 1 - pad), mode="edge")
    c = np.cumsum(np.concatenate([[0.0], xp]))
    return (c[width:] - c[:-width]) / width


def detect_regimes(series, window: float | None = None, curvature_tol: float = 0.15, flat_tol: float = 0.05,
                   floor: float | None = None, key: str = "err_H2") -> RegimeReport:
    """Segment a decaying error series into exponential, super-exponential and floor parts.

    Slope and curvature of ``y = log(err)`` come from centred differences,
    each smoothed by a moving average over ``window`` time units. A sample
    is classed as

    * ``floor`` if ``err < floor`` (default ``100 eps^2 err[0]``) or if the
      smoothed slope magnitude is below ``flat_tol`` times the series' median
      slope magnitude (or is zero for a constant series);
    * ``super_exponential`` if the log error is bending down, i.e.
      ``-y'' * window / |y'| > curvature_tol``: the decay rate grows by more
      than that fraction across one window;
    * ``exponential`` otherwise.

    Runs shorter than one window are absorbed into the preceding run, and
    each resulting segment gets its own exponential fit.
    """
    t, err = _series_arrays(series, key)
    if t.size < 3:
        raise ValueError("need at least 3 samples")
    dt = float(np.median(np.diff(t)))
    if window is None:
        window = (t[-1] - t[0]) / 10.0
    width = max(1, int(round(window / dt)))
    if t.size < 3 * width:
        raise ValueError(f"series of {t.size} samples is shorter than three windows of {width}")
    if floor is None:
        floor = 100.0 * EPS**2 * err[0]
    tiny = np.finfo(float).tiny
    y = np.log(np.maximum(err, tiny))
    slope = _moving_average(np.gradient(y, t), width)
    curv = _moving_average(np.gradient(np.gradient(y, t), t), width)
    scale = float(np.median(np.abs(slope)))
    labels = np.full(t.size, EXPONENTIAL, dtype=object)
    bend = np.zeros_like(slope)
    moving = np.abs(slope) > 0
    bend[moving] = -curv[moving] * window / np.abs(slope[moving])
    labels[bend > curvature_tol] = SUPER_EXPONENTIAL
    flat = np.abs(slope) <= flat_tol * scale if scale > 0 else np.ones(t.size, bool)
    labels[flat | (err < floor)] = FLOOR

    runs = _runs(labels)
    merged: list = []
    for kind, lo, hi in runs:
        if merged and (hi - lo < width or merged[-1][0] == kind):
            merged[-1] = (merged[-1][0], merged[-1][1], hi)
        else:
            merged.append((kind, lo, hi))
    # a short leading run may still stand alone; fold it forward
    if len(merged) > 1 and merged[0][2] - merged[0][1] < width:
        k, _, hi = merged[1]
        merged[1] = (k, 0, hi)
        merged.pop(0)
    final: list = []
    for kind, lo, hi in merged:
        if final and final[-1][0] == kind:
            final[-1] = (kind, final[-1][1], hi)
        else:
            final.append((kind, lo, hi))

    segments = []
    for i, (kind, lo, hi) in enumerate(final):
        stop = hi if i == len(final) - 1 else hi + 1  # share the boundary sample
        ts, es = t[lo:stop], np.maximum(err[lo:stop], tiny)
        if ts.size >= 3:
            fit = fit_exponential((ts, es))
            rate, resid = fit.rate, fit.max_log_residual
        else:
            rate, resid = 0.0, 0.0
        segments.append(Segment(float(t[lo]), float(t[stop - 1]), kind, rate, resid))
    return RegimeReport(segments)


def _runs(labels: np.ndarray) -> list:
    out = []
    start = 0
    for i in range(1, labels.size + 1):
        if i == labels.size or labels[i] != labels[start]:
            out.append((labels[start], start, i))
            start = i
    return out


def segment_mean(series: ErrorSeries, segment: Segment, numerator: str = "err_Qm2", denominator: str = "err_H2") -> float:
    """Mean of ``numerator / denominator`` over the samples of ``segment``."""
    t = series.array("t")
    sel = (t >= segment.t_start) & (t <= segment.t_end)
    num, den = series.array(numerator)[sel], series.array(denominator)[sel]
    ok = den > 0
    if not ok.any():
        raise ValueError("segment holds no samples with a positive denominator")
    return float(np.mean(num[ok] / den[ok]))


def time_to_threshold(series, threshold: float, key: str = "err_H2") -> float:
    """First sample time at which the error falls to ``threshold`` or below; inf if never."""
    t, y = _series_arrays(series, key)
    hit = np.nonzero(y <= threshold)[0]
    return float(t[hit[0]]) if hit.size else float("inf")


@dataclass
class EnvelopeReport:
    within: np.ndarray
    first_violation: float | None
    certified: bool

    @property
    def violations(self) -> int:
        return int((~self.within).sum())

    @property
    def label(self) -> str:
        return "certified" if self.certified else "observational"


def envelope_compare(series, envelope, certified: bool, key: str = "err_H2", rtol: float = 1e-12) -> EnvelopeReport:
    """Compare a measured error series against a theoretical envelope.

    ``envelope`` is either a callable of time or an array of bound values
    at the sample times. The report is labelled observational when the
    theory's sufficient conditions were not certified for the run.
    """
    t, y = _series_arrays(series, key)
    bound = np.asarray(envelope(t) if callable(envelope) else envelope, dtype=float)
    if bound.shape != y.shape:
        raise ValueError("envelope and series lengths differ")
    within = y <= bound * (1.0 + rtol)
    bad = np.nonzero(~within)[0]
    return EnvelopeReport(within, float(t[bad[0]]) if bad.size else None, bool(certified))
