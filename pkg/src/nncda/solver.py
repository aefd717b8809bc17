"""Reference 2D Navier-Stokes solver in vorticity / stream-function form.

The prognostic variable is the vorticity ``omega = lap(psi)``; velocity is
``u = grad_perp(psi) = (-psi_y, psi_x)``. Each step applies integrating-factor
Euler: viscosity is integrated exactly per mode, the dealiased advection
term (Basdevant form), forcing and any extra tendency are explicit.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.fft as sfft

from . import kernels
from .spectral import Grid, SpectralField, VelocityField, a_norm, h_norm, v_norm

DEFAULT_DT = 3.1250e-4
BLOWUP_FACTOR = 1e8


class BlowUpError(RuntimeError):
    """Raised when the integration produces nonfinite or runaway values."""


def curl_to_velocity_norm(curl_f: SpectralField) -> float:
    """H norm of the divergence-free field whose curl is ``curl_f``."""
    g = curl_f.grid
    p = g.weights * g.inv_ksq * (curl_f.coeffs.real**2 + curl_f.coeffs.imag**2)
    return float(np.sqrt(p.sum())) * g.L


def grashof(forcing, nu: float, lambda1: float) -> float:
    """Grashof number ||f||_H / (lambda1 nu^2) for time-independent forcing.

    ``forcing`` is either a :class:`VelocityField` or a :class:`SpectralField`
    holding the curl of the forcing.
    """
    if isinstance(forcing, VelocityField):
        norm = h_norm(forcing)
    else:
        norm = curl_to_velocity_norm(forcing)
    return norm / (lambda1 * nu**2)


@dataclass
class PhysicalParams:
    nu: float
    forcing: SpectralField  # curl of the body force

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError(f"viscosity must be positive, got {self.nu}")

    @property
    def grid(self) -> Grid:
        return self.forcing.grid

    @property
    def grashof(self) -> float:
        return grashof(self.forcing, self.nu, self.grid.lambda1)


@dataclass
class SolverState:
    psi: SpectralField
    t: float = 0.0

    @property
    def omega(self) -> SpectralField:
        g = self.psi.grid
        return SpectralField(g, -g.ksq * self.psi.coeffs)


@dataclass
class EnergySeries:
    times: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    enstrophy: list = field(default_factory=list)

    def append(self, t: float, psi: SpectralField) -> None:
        self.times.append(t)
        self.energy.append(0.5 * v_norm(psi) ** 2)
        self.enstrophy.append(0.5 * a_norm(psi) ** 2)

    def to_csv(self, path) -> None:
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "energy", "enstrophy"])
            for row in zip(self.times, self.energy, self.enstrophy):
                w.writerow([f"{x:.17g}" for x in row])

    @classmethod
    def from_csv(cls, path) -> "EnergySeries":
        out = cls()
        with open(Path(path), newline="") as fh:
            for row in csv.DictReader(fh):
                out.times.append(float(row["t"]))
                out.energy.append(float(row["energy"]))
                out.enstrophy.append(float(row["enstrophy"]))
        return out


def make_forcing(grid: Grid, seed: int, k_min: int, k_max: int, target_G: float, nu: float) -> SpectralField:
    """Random time-independent forcing curl on the shell k_min^2 <= |k|^2 <= k_max^2.

    Real and imaginary parts are standard normals drawn from PCG64(seed) in
    C order over the half spectrum; the ``k2 = 0`` column is completed from
    its ``k1 > 0`` half by conjugation. The field is then scaled so that the
    velocity-level forcing has Grashof number ``target_G``.
    """
    if not 0 < k_min < k_max or 3 * k_max >= grid.n:
        raise ValueError(f"forcing band must satisfy 0 < k_min < k_max < n/3, got ({k_min}, {k_max}) for n={grid.n}")
    kk = grid.ksq_index
    shell = (kk >= k_min**2) & (kk <= k_max**2)
    if not shell.any():
        raise ValueError(f"forcing shell [{k_min}, {k_max}] contains no lattice points")
    rng = np.random.Generator(np.random.PCG64(seed))
    re = rng.standard_normal(grid.shape)
    im = rng.standard_normal(grid.shape)
    c = np.where(shell, re + 1j * im, 0.0)
    n = grid.n
    col = c[:, 0]
    pos = np.arange(1, n // 2)
    col[n - pos] = np.conj(col[pos])
    col[0] = 0.0
    f = SpectralField(grid, c)
    g0 = grashof(f, nu, grid.lambda1)
    if target_G == 0:
        return SpectralField.zeros(grid)
    return SpectralField(grid, c * (target_G / g0))


class Stepper:
    """Preallocated integrating-factor Euler stepper on raw half-spectrum arrays.

    ``advance`` consumes the current vorticity coefficients and returns the
    new vorticity and stream function. Buffers are reused between calls, so
    returned arrays are only valid until the next call unless copied.
    """

    def __init__(self, grid: Grid, nu: float, dt: float, forcing: SpectralField | None = None, backend: str | None = None):
        if not dt > 0:
            raise ValueError(f"time step must be positive, got {dt}")
        self.grid = grid
        self.nu = nu
        self.dt = dt
        self.k = kernels if backend is None else kernels.backend(backend)
        g = grid
        self.k1 = np.ascontiguousarray(g.k1[:, 0], dtype=np.float64)
        self.k2 = np.ascontiguousarray(g.k2[0, :], dtype=np.float64)
        self.kdiff = np.ascontiguousarray(g.k1**2 - g.k2**2)
        self.kprod = np.ascontiguousarray(g.k1 * g.k2)
        self.mask = np.ascontiguousarray(g.dealias_mask, dtype=np.uint8)
        self.decay = np.exp(-nu * g.ksq * dt)
        self.inv_ksq = np.ascontiguousarray(g.inv_ksq)
        self.forcing = (
            np.zeros(g.shape, np.complex128) if forcing is None else np.ascontiguousarray(forcing.coeffs)
        )
        shape = g.shape
        self._uh = np.empty(shape, np.complex128)
        self._vh = np.empty(shape, np.complex128)
        self._a = np.empty((g.n, g.n))
        self._b = np.empty((g.n, g.n))
        self._nl = np.empty(shape, np.complex128)
        self._omega = [np.empty(shape, np.complex128), np.empty(shape, np.complex128)]
        self._psi = [np.empty(shape, np.complex128), np.empty(shape, np.complex128)]
        self._flip = 0

    def tendency(self, psi: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        """Dealiased advection tendency -J(psi, omega) of the vorticity."""
        n = self.grid.n
        k = self.k
        k.spectral_velocity(psi, self.k1, self.k2, self._uh, self._vh)
        u = sfft.irfft2(self._uh, s=(n, n), norm="forward")
        v = sfft.irfft2(self._vh, s=(n, n), norm="forward")
        k.basdevant_products(u, v, self._a, self._b)
        ah = sfft.rfft2(self._a, norm="forward")
        bh = sfft.rfft2(self._b, norm="forward")
        out = self._nl if out is None else out
        k.assemble_tendency(ah, bh, self.kdiff, self.kprod, self.mask, out)
        return out

    def advance(self, omega: np.ndarray, psi: np.ndarray, extra: np.ndarray | None = None):
        nl = self.tendency(psi)
        i = self._flip = 1 - self._flip
        w_out, p_out = self._omega[i], self._psi[i]
        self.k.if_euler_update(omega, nl, self.forcing, extra, self.decay, self.dt, self.inv_ksq, self.mask, w_out, p_out)
        return w_out, p_out


def nonlinear_tendency(psi: SpectralField) -> SpectralField:
    """Explicit advection tendency of the vorticity, -u.grad(omega), dealiased.

    Uses the Basdevant rearrangement
    ``u.grad(omega) = (d_xx - d_yy)(u v) + d_xy(v^2 - u^2)``,
    which needs two inverse and two forward transforms.
    """
    st = Stepper(psi.grid, 1.0, 1.0)
    out = st.tendency(np.ascontiguousarray(psi.coeffs)).copy()
    return SpectralField(psi.grid, out)


def _check_finite(omega: np.ndarray, t: float) -> None:
    if not np.isfinite(omega).all():
        raise BlowUpError(f"nonfinite vorticity coefficients at t={t:.6g}")


def energy_ceiling(params: PhysicalParams, psi0: SpectralField | None = None) -> float:
    """Energy level beyond which a trajectory is declared blown up."""
    G, nu = params.grashof, params.nu
    base = 0.5 * 2.0 * G**2 * nu**2
    if psi0 is not None:
        base = max(base, 0.5 * v_norm(psi0) ** 2)
    return BLOWUP_FACTOR * max(base, 1e-300)


def step_if_euler(state: SolverState, params: PhysicalParams, dt: float, extra_tendency: SpectralField | None = None, stepper: Stepper | None = None) -> SolverState:
    """Advance one integrating-factor Euler step.

    Each vorticity mode becomes ``exp(-nu |k|^2 dt) (omega + dt (N + f + extra))``.
    """
    st = stepper or Stepper(state.psi.grid, params.nu, dt, params.forcing)
    psi = np.ascontiguousarray(state.psi.coeffs)
    omega = -state.psi.grid.ksq * psi
    extra = None if extra_tendency is None else np.ascontiguousarray(extra_tendency.coeffs)
    w, p = st.advance(omega, psi, extra)
    t = state.t + dt
    _check_finite(w, t)
    return SolverState(SpectralField(state.psi.grid, p.copy()), t)


def spinup(params: PhysicalParams, t_end: float, dt: float, sample_every: int = 100, psi0: SpectralField | None = None, t0: float = 0.0, backend: str | None = None) -> tuple[SolverState, EnergySeries]:
    """Integrate from ``psi0`` (zero by default) to ``t0 + t_end``.

    Energy 1/2||u||_H^2 and enstrophy 1/2||u||_V^2 are recorded at the start
    and every ``sample_every`` steps.
    """
    grid = params.grid
    psi = SpectralField.zeros(grid) if psi0 is None else psi0
    series = EnergySeries()
    series.append(t0, psi)
    nsteps = int(round(t_end / dt)) if t_end > 0 else 0
    if nsteps == 0:
        return SolverState(psi.copy(), t0), series
    st = Stepper(grid, params.nu, dt, params.forcing, backend=backend)
    ceiling = energy_ceiling(params, psi)
    p = np.ascontiguousarray(psi.coeffs).copy()
    w = -grid.ksq * p
    for i in range(1, nsteps + 1):
        w, p = st.advance(w, p)
        if i % sample_every == 0 or i == nsteps:
            t = t0 + i * dt
            _check_finite(w, t)
            f = SpectralField(grid, p.copy())
            series.append(t, f)
            if series.energy[-1] > ceiling:
                raise BlowUpError(f"energy {series.energy[-1]:.3e} exceeds ceiling {ceiling:.3e} at t={t:.6g}")
    return SolverState(SpectralField(grid, p.copy()), t0 + nsteps * dt), series
