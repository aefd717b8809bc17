"""Feedback-control terms and the assimilated (nudged) time loop.

The assimilated velocity v obeys the Navier-Stokes equations plus the
control term

    mu * W(d) + beta * d,    d = I_h(u) - I_h(v),

where ``W`` is the identity (linear mode), ``N(d) = d ||d||^{-gamma}``
(nonlinear mode) or the capped variant that equals the identity once
``||d|| >= 1``. Gains carry different units: ``mu`` has units
length^{2 gamma} / time^{1 + gamma}, ``beta`` has units 1/time.

The control term is formed at the velocity level and enters the vorticity
equation through its curl, which discards any gradient part, so the Leray
projection is implicit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import interpolants
from .diagnostics import ErrorSeries, scale_split
from .interpolants import InterpolantSpec
from .solver import BlowUpError, PhysicalParams, SolverState, Stepper, energy_ceiling
from .spectral import SpectralField, VelocityField, a_norm, curl, grad_perp, h_norm, v_norm

MODES = ("linear", "nonlinear", "capped")
NORM_FLOOR = 1e-300


@dataclass(frozen=True)
class NudgingConfig:
    mu: float
    beta: float
    gamma: float
    mode: str
    interpolant: InterpolantSpec

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown nudging mode {self.mode!r}; expected one of {MODES}")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")
        if self.mu < 0 or self.beta < 0:
            raise ValueError("nudging gains must be nonnegative")

    @property
    def total_gain(self) -> float:
        return self.mu + self.beta


def _weight(norm: float, gamma: float, capped: bool) -> float:
    """Scalar s such that W(phi) = s * phi for a field of norm ``norm``."""
    if norm < NORM_FLOOR:
        return 0.0
    if capped and norm >= 1.0:
        return 1.0
    return norm ** (-gamma)


def _check_gamma(gamma: float) -> None:
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"gamma must lie in [0, 1), got {gamma}")


def nonlinear_weight(phi, gamma: float):
    """N(phi) = phi ||phi||_H^{-gamma}, with N(0) = 0."""
    _check_gamma(gamma)
    return phi * _weight(h_norm(phi), gamma, capped=False)


def capped_weight(phi, gamma: float):
    """Identity for ||phi||_H >= 1, N(phi) below that."""
    _check_gamma(gamma)
    return phi * _weight(h_norm(phi), gamma, capped=True)


def control_gain(norm: float, config: NudgingConfig) -> float:
    """Scalar g with control term ``g * d`` for an observed error of norm ``norm``.

    Linear mode uses the single gain ``mu + beta``, so the nonlinear mode
    at ``gamma = 0`` reproduces it bit for bit.
    """
    if config.mode == "linear":
        return config.mu + config.beta
    s = _weight(norm, config.gamma, capped=config.mode == "capped")
    return config.mu * s + config.beta


def nudge_tendency(u_obs_interp, v, config: NudgingConfig):
    """Control term for observations ``I_h(u)`` and current state ``v``.

    Both arguments are velocity (or scalar) fields on the same grid; the
    return value has the same type.
    """
    Iv = interpolants.apply(config.interpolant, v)
    d = u_obs_interp - Iv
    return d * control_gain(h_norm(d), config)


@dataclass
class DAResult:
    series: ErrorSeries
    state: SolverState
    config: NudgingConfig


def _record(series: ErrorSeries, t: float, psi_u: np.ndarray, psi_v: np.ndarray, grid, m: int) -> None:
    w = SpectralField(grid, psi_v - psi_u)
    pv = SpectralField(grid, psi_v)
    pm, qm = scale_split(grad_perp(w), m)
    series.append(t, v_norm(w) ** 2, a_norm(w) ** 2, pm, qm, 0.5 * v_norm(pv) ** 2, 0.5 * a_norm(pv) ** 2)


def run_da_ensemble(
    reference: SolverState,
    params: PhysicalParams,
    configs: Sequence[NudgingConfig],
    dt: float,
    t_end: float,
    v0: SolverState | None = None,
    observe_every: int = 1,
    sample_every: int = 100,
    callback: Callable | None = None,
    callback_every: int = 0,
    backend: str | None = None,
) -> tuple[list[DAResult], SolverState]:
    """Co-evolve one reference trajectory with one assimilated run per config.

    Observations ``I_h(u)`` are snapshot every ``observe_every`` steps and
    held between snapshots. Error statistics are sampled at the start and
    every ``sample_every`` steps. If given, ``callback(step, t, psi_u, psi_vs)``
    is called every ``callback_every`` steps with copies of the states.

    Returns the per-config results and the final reference state.
    """
    grid = reference.psi.grid
    if params.grid != grid:
        raise ValueError("reference state and physical parameters live on different grids")
    if v0 is not None and v0.psi.grid != grid:
        raise ValueError("assimilated initial state and reference live on different grids")
    if observe_every < 1 or sample_every < 1:
        raise ValueError("observe_every and sample_every must be >= 1")
    for cfg in configs:
        if abs(cfg.interpolant.L - grid.L) > 1e-12 * grid.L:
            raise ValueError(f"interpolant domain L={cfg.interpolant.L} does not match grid L={grid.L}")

    t0 = reference.t
    nsteps = int(round(t_end / dt)) if t_end > 0 else 0
    pu = np.ascontiguousarray(reference.psi.coeffs).copy()
    wu = -grid.ksq * pu
    start_v = np.zeros(grid.shape, np.complex128) if v0 is None else np.ascontiguousarray(v0.psi.coeffs)
    pvs = [start_v.copy() for _ in configs]
    wvs = [-grid.ksq * p for p in pvs]
    st_u = Stepper(grid, params.nu, dt, params.forcing, backend=backend)
    st_v = [Stepper(grid, params.nu, dt, params.forcing, backend=backend) for _ in configs]
    ceiling = energy_ceiling(params, reference.psi)
    series = [ErrorSeries() for _ in configs]
    for s, cfg, pv in zip(series, configs, pvs):
        _record(s, t0, pu, pv, grid, cfg.interpolant.split_m)

    specs = list(dict.fromkeys(cfg.interpolant for cfg in configs))
    obs: dict = {}
    obs_step = 0
    for step in range(nsteps):
        if step % observe_every == 0:
            u_vel = grad_perp(SpectralField(grid, pu))
            obs = {spec: interpolants.apply(spec, u_vel) for spec in specs}
            obs_step = step
        assert step - obs_step < observe_every, "stale observation snapshot"
        for i, cfg in enumerate(configs):
            v_vel = grad_perp(SpectralField(grid, pvs[i]))
            extra = curl(nudge_tendency(obs[cfg.interpolant], v_vel, cfg)).coeffs
            wvs[i], pvs[i] = st_v[i].advance(wvs[i], pvs[i], np.ascontiguousarray(extra))
        wu, pu = st_u.advance(wu, pu)
        done = step + 1
        t = t0 + done * dt
        if done % sample_every == 0 or done == nsteps:
            for arr in [wu, *wvs]:
                if not np.isfinite(arr).all():
                    raise BlowUpError(f"nonfinite vorticity coefficients at t={t:.6g}")
            for s, cfg, pv in zip(series, configs, pvs):
                _record(s, t, pu, pv, grid, cfg.interpolant.split_m)
                if s.energy_v[-1] > ceiling:
                    raise BlowUpError(f"assimilated energy {s.energy_v[-1]:.3e} exceeds ceiling at t={t:.6g}")
        if callback is not None and callback_every and done % callback_every == 0:
            callback(done, t, pu.copy(), [p.copy() for p in pvs])

    t_final = t0 + nsteps * dt
    results = [DAResult(s, SolverState(SpectralField(grid, pv.copy()), t_final), cfg)
               for s, cfg, pv in zip(series, configs, pvs)]
    return results, SolverState(SpectralField(grid, pu.copy()), t_final)


def run_da(reference: SolverState, v0: SolverState | None, params: PhysicalParams, config: NudgingConfig,
           dt: float, t_end: float, observe_every: int = 1, sample_every: int = 100) -> DAResult:
    """Single assimilated run against a co-evolved reference trajectory."""
    results, _ = run_da_ensemble(reference, params, [config], dt, t_end, v0=v0,
                                 observe_every=observe_every, sample_every=sample_every)
    return results[0]
