"""Observation operators I_h and an empirical harness for their axioms.

Two linear interpolants are provided:

* ``fourier_projection``: keep modes with index magnitude ``|k| <= m``
  (a disc in index space), ``h = L/m``.
* ``volume_average``: replace the field by its mean over each of
  ``cells x cells`` square cells of side ``h = L/cells``, piecewise constant
  on the sample grid.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .spectral import Grid, SpectralField, VelocityField, h_norm, inner, laplacian, random_field, v_norm

FOURIER = "fourier_projection"
VOLUME = "volume_average"
KINDS = (FOURIER, VOLUME)

# Poincare constant of Q_m: |k| > m  =>  |kappa|^2 > (2 pi m / L)^2 = (2 pi / h)^2
FOURIER_C0 = 1.0 / (2.0 * np.pi) ** 2


@dataclass(frozen=True)
class InterpolantSpec:
    kind: str
    m: int | None = None  # fourier cutoff, index units
    cells: int | None = None  # volume cells per side
    L: float = 2.0 * np.pi
    alpha: float = 1.0
    c0: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown interpolant kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == FOURIER:
            if self.m is None or self.m < 1:
                raise ValueError("fourier_projection needs a cutoff m >= 1")
            if self.c0 is None:
                object.__setattr__(self, "c0", FOURIER_C0)
        elif self.cells is None or self.cells < 1:
            raise ValueError("volume_average needs a positive cell count")
        if self.c0 is not None and not self.c0 > 0:
            raise ValueError("c0 must be positive")

    @classmethod
    def fourier(cls, m: int, L: float = 2.0 * np.pi) -> "InterpolantSpec":
        return cls(FOURIER, m=m, L=L)

    @classmethod
    def volume(cls, h: float, L: float = 2.0 * np.pi, c0: float | None = None) -> "InterpolantSpec":
        cells = L / h
        if abs(cells - round(cells)) > 1e-9 * cells:
            raise ValueError(f"cell size h={h} must divide L={L} into an integer count")
        return cls(VOLUME, cells=int(round(cells)), L=L, c0=c0)

    @property
    def h(self) -> float:
        return self.L / (self.m if self.kind == FOURIER else self.cells)

    @property
    def split_m(self) -> int:
        """Index cutoff used for the P_m / Q_m error split."""
        return self.m if self.kind == FOURIER else self.cells


def _apply_scalar(spec: InterpolantSpec, f: SpectralField) -> SpectralField:
    g = f.grid
    if abs(g.L - spec.L) > 1e-12 * spec.L:
        raise ValueError(f"interpolant built for L={spec.L} applied on grid with L={g.L}")
    if spec.kind == FOURIER:
        return SpectralField(g, np.where(g.ksq_index <= spec.m**2, f.coeffs, 0.0))
    return SpectralField.from_physical(g, _cell_average(f.to_physical(), spec.cells))


def _cell_average(x: np.ndarray, cells: int) -> np.ndarray:
    n = x.shape[0]
    if n % cells:
        raise ValueError(f"{cells} cells per side do not tile a grid of {n} points")
    b = n // cells
    means = x.reshape(cells, b, cells, b).mean(axis=(1, 3))
    return np.repeat(np.repeat(means, b, axis=0), b, axis=1)


def apply(spec: InterpolantSpec, field):
    """Apply I_h to a scalar or (componentwise) to a velocity field."""
    if isinstance(field, VelocityField):
        return VelocityField(_apply_scalar(spec, field.u1), _apply_scalar(spec, field.u2))
    return _apply_scalar(spec, field)


def observed_mask(spec: InterpolantSpec, grid: Grid) -> np.ndarray:
    """Boolean mask of the modes retained by a Fourier projection."""
    if spec.kind != FOURIER:
        raise ValueError("only Fourier projections have a mode mask")
    return grid.ksq_index <= spec.m**2


@dataclass
class AxiomResult:
    axiom: str
    trials: int
    worst_ratio: float
    passed: bool
    asserted: bool = True


@dataclass
class AxiomReport:
    kind: str
    results: list
    measured_c0: float

    def __getitem__(self, axiom: str) -> AxiomResult:
        for r in self.results:
            if r.axiom == axiom:
                return r
        raise KeyError(axiom)

    @property
    def all_passed(self) -> bool:
        return all(r.passed for r in self.results if r.asserted)

    def to_csv(self, path) -> None:
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["axiom", "trials", "worst_ratio", "pass"])
            for r in self.results:
                w.writerow([r.axiom, r.trials, f"{r.worst_ratio:.17g}", "true" if r.passed else "false"])


def check_axioms(spec: InterpolantSpec, grid: Grid, trials: int = 100, tolerance: float = 1e-12, seed: int = 0) -> AxiomReport:
    """Search for counterexamples to the interpolant axioms on random fields.

    A pass only means no counterexample was found in ``trials`` draws.
    Each ratio is normalised so that values above ``tolerance`` (or above
    ``1 + tolerance`` for the two bounds) violate the axiom:

    * approximation       ||phi - I phi||^2 / (c0 h^2 ||grad phi||^2)
    * mean_free           |mean(I phi)| / ||phi||
    * idempotent          ||I(I phi) - I phi|| / ||phi||
    * symmetric           |(I phi, psi) - (phi, I psi)| / (||phi|| ||psi||)
    * nonnegative         -(I phi, phi) / ||phi||^2
    * bounded             ||I phi|| / (alpha ||phi||)
    * stokes_nonnegative  -(I phi, A phi) / (||phi|| ||A phi||)

    For volume averaging stokes_nonnegative is reported but not asserted.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    worst = {k: -np.inf for k in ("approximation", "mean_free", "idempotent", "symmetric", "nonnegative", "bounded", "stokes_nonnegative")}
    c0_seen = 0.0
    h = spec.h
    for _ in range(trials):
        slope = rng.uniform(0.0, 4.0)
        phi = random_field(grid, rng, slope=slope)
        psi = random_field(grid, rng, slope=rng.uniform(0.0, 4.0))
        Iphi = apply(spec, phi)
        Ipsi = apply(spec, psi)
        nphi = h_norm(phi)
        resid2 = h_norm(phi - Iphi) ** 2
        grad2 = v_norm(phi) ** 2
        c0_seen = max(c0_seen, resid2 / (h**2 * grad2))
        worst["approximation"] = max(worst["approximation"], resid2 / (spec.c0 * h**2 * grad2)) if spec.c0 else np.inf
        if spec.kind == VOLUME:
            mean = abs(_cell_average(phi.to_physical(), spec.cells).mean()) * grid.L
        else:
            mean = abs(Iphi.coeffs[0, 0]) * grid.L
        worst["mean_free"] = max(worst["mean_free"], mean / nphi)
        worst["idempotent"] = max(worst["idempotent"], h_norm(apply(spec, Iphi) - Iphi) / nphi)
        worst["symmetric"] = max(worst["symmetric"], abs(inner(Iphi, psi) - inner(phi, Ipsi)) / (nphi * h_norm(psi)))
        worst["nonnegative"] = max(worst["nonnegative"], -inner(Iphi, phi) / nphi**2)
        worst["bounded"] = max(worst["bounded"], h_norm(Iphi) / (spec.alpha * nphi))
        Aphi = -laplacian(phi)
        worst["stokes_nonnegative"] = max(worst["stokes_nonnegative"], -inner(Iphi, Aphi) / (nphi * h_norm(Aphi)))
    results = []
    for axiom, ratio in worst.items():
        bound = 1.0 + tolerance if axiom in ("approximation", "bounded") else tolerance
        asserted = not (axiom == "stokes_nonnegative" and spec.kind == VOLUME)
        results.append(AxiomResult(axiom, trials, float(ratio), bool(ratio <= bound), asserted))
    return AxiomReport(spec.kind, results, float(c0_seen))


def with_measured_c0(spec: InterpolantSpec, grid: Grid, trials: int = 50, seed: int = 0, margin: float = 1.0) -> InterpolantSpec:
    """Return ``spec`` with ``c0`` set from an empirical axiom sweep if it is unset."""
    if spec.c0 is not None:
        return spec
    report = check_axioms(replace(spec, c0=1.0), grid, trials=trials, seed=seed)
    return replace(spec, c0=report.measured_c0 * margin)


def interp_operator_bound(spec: InterpolantSpec, field, lambda1: float) -> float:
    """Ratio ||I_h phi|| / ((sqrt(c0) h + lambda1^{-1/2}) ||phi||_V); at most 1."""
    if spec.c0 is None:
        raise ValueError("interpolant constant c0 is unset; measure it with check_axioms first")
    denom = (np.sqrt(spec.c0) * spec.h + lambda1**-0.5) * v_norm(field)
    if denom == 0.0:
        raise ValueError("ratio undefined for the zero field")
    return h_norm(apply(spec, field)) / denom
