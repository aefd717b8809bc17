"""Closed-form bounds and admissibility thresholds for nonlinear nudging.

Everything here is a pure function of nondimensional parameters. The
constant ``c`` of the Ladyzhenskaya / Brezis-Gallouet type inequalities is
not known numerically; it is an input (default 1) and every certificate
produced with it is conditional on that choice.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


class CertificationError(ValueError):
    """Raised when a requested bound cannot be certified for the given parameters."""


@dataclass(frozen=True)
class TheoryConstants:
    """Inputs shared by the threshold and switch-time formulas.

    Attributes:
        c: inequality constant, user supplied.
        c0: interpolant approximation constant.
        alpha: interpolant operator bound.
        lambda1: smallest Stokes eigenvalue, (2 pi / L)^2.
        nu: viscosity.
        G: Grashof number.
        gamma: nonlinear exponent in (0, 1).
        mu: nonlinear gain.
        beta: linear gain.
        h: observation resolution.
        T: averaging window used by the switch-time estimates.
        L: domain side, used by the resolution bound of the V theorem.
    """

    c: float = 1.0
    c0: float = 1.0 / (4.0 * np.pi**2)
    alpha: float = 1.0
    lambda1: float = 1.0
    nu: float = 1.0
    G: float = 1.0
    gamma: float = 0.5
    mu: float = 1.0
    beta: float = 1.0
    h: float = 1.0
    T: float | None = None
    L: float = 1.0

    def __post_init__(self):
        for name in ("c", "c0", "alpha", "lambda1", "nu", "h", "L"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("G", "mu", "beta"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative, got {getattr(self, name)}")
        _check_gamma(self.gamma)
        if self.T is not None and not self.T > 0:
            raise ValueError("averaging window T must be positive")

    @property
    def window(self) -> float:
        """Averaging window; defaults to 2/(nu lambda1)."""
        return 2.0 / (self.nu * self.lambda1) if self.T is None else self.T


def _check_gamma(gamma: float) -> None:
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")


class AbsorbingBall(NamedTuple):
    H2: float
    V2_integral: float
    V2: float
    A2_integral: float
    A2: float


def absorbing_ball(G: float, nu: float, lambda1: float, T: float, c: float = 1.0) -> AbsorbingBall:
    """Large-time bounds on the reference solution for time-independent forcing.

    Returns bounds on ||u||_H^2, the window integral of ||u||_V^2, ||u||_V^2,
    the window integral of ||Au||_H^2, and ||Au||_H^2.
    """
    if G < 0 or nu <= 0 or lambda1 <= 0 or T <= 0:
        raise ValueError("absorbing_ball needs G >= 0 and positive nu, lambda1, T")
    g2 = G * G
    return AbsorbingBall(
        H2=2.0 * g2 * nu**2,
        V2_integral=2.0 * (1.0 + T * lambda1 * nu) * g2 * nu,
        V2=2.0 * lambda1 * g2 * nu**2,
        A2_integral=2.0 * (1.0 + T * lambda1 * nu) * lambda1 * g2 * nu,
        A2=lambda1**2 * nu**2 * c * (1.0 + G) ** 4,
    )


def _bracket(gamma: float) -> float:
    r = (2.0 - gamma) / 2.0
    return r ** ((2.0 - gamma) / gamma) - r ** (2.0 / gamma)


def constant_a(gamma: float, lambda1: float) -> float:
    """Resolution constant of the H-norm theorem, in its product form."""
    _check_gamma(gamma)
    return (2.0 - gamma) ** (1.0 - gamma / 2.0) * gamma ** (gamma / 2.0) * lambda1 ** ((1.0 - gamma) / 2.0) * 2.0 ** (gamma / 2.0 - 2.0)


def constant_a_difference_form(gamma: float, lambda1: float, lambda_power: float | None = None) -> float:
    """The same constant written through the bracket ``r^{(2-g)/g} - r^{2/g}``, r = (2-g)/2.

    ``lambda_power`` defaults to ``(1-gamma)/2`` (H theorem).
    """
    _check_gamma(gamma)
    p = (1.0 - gamma) / 2.0 if lambda_power is None else lambda_power
    return _bracket(gamma) ** (gamma / 2.0) * lambda1**p * 2.0 ** (gamma / 2.0 - 1.0)


def constant_a_V(gamma: float, lambda1: float) -> float:
    """Resolution constant of the V-norm theorem; differs only in the lambda1 power."""
    return constant_a_difference_form(gamma, lambda1, (1.0 - 2.0 * gamma) / 2.0)


def small_h_delta(a: float, gamma: float, eps: float) -> float:
    """Largest delta from the critical-point recipe with min_x a x^2 - delta x^{2-gamma} >= -eps."""
    _check_gamma(gamma)
    if not (a > 0 and eps > 0):
        raise ValueError("a and eps must be positive")
    return min(a / 2.0, a ** ((2.0 - gamma) / 2.0) * (eps / _bracket(gamma)) ** (gamma / 2.0))


class OracleResult(NamedTuple):
    min_f: float
    argmin: float
    x0: float

    def certifies(self, eps: float) -> bool:
        return self.min_f >= -eps * (1.0 + 1e-9)


def critical_point(a: float, gamma: float, delta: float) -> float:
    return ((2.0 - gamma) * delta / (2.0 * a)) ** (1.0 / gamma)


def small_h_oracle(a: float, gamma: float, delta: float, eps: float, x_max: float | None = None,
                   samples: int = 1_000_000) -> OracleResult:
    """Brute-force minimum of f(x) = a x^2 - delta x^{2-gamma} on [0, x_max].

    The grid is uniform and the analytic interior critical point is added,
    so the sampled minimum is an upper bound on the true minimum that is
    tight when x0 lies in range. ``x_max`` defaults to ``4 x0``.
    """
    _check_gamma(gamma)
    if samples < 100_000:
        raise ValueError("oracle needs at least 1e5 samples")
    x0 = critical_point(a, gamma, delta)
    if x_max is None:
        x_max = 4.0 * x0 if x0 > 0 else 1.0
    if delta > 0 and x_max < 2.0 * x0:
        raise ValueError("x_max must cover at least twice the critical point")
    x = np.linspace(0.0, x_max, int(samples))
    if 0 < x0 <= x_max:
        x = np.append(x, x0)
    f = a * x * x - delta * x ** (2.0 - gamma)
    i = int(np.argmin(f))
    return OracleResult(float(f[i]), float(x[i]), x0)


class HThresholds(NamedTuple):
    mu_min: float
    beta_min: float
    h_max: float
    R_H: float
    h_mu: float  # sqrt(nu / (2 mu c0)), strict
    h_beta: float  # sqrt(nu / (beta c0)), strict
    h_eps: float  # resolution needed to reach eps


class VThresholds(NamedTuple):
    mu_min: float
    beta_min: float
    h_max: float
    J: float
    R_V: float
    h_domain: float  # strict
    h_mu: float  # sqrt(nu / (mu c0)), strict
    h_eps: float


def _safe_sqrt_ratio(num: float, den: float) -> float:
    return float(np.sqrt(num / den)) if den > 0 else float("inf")


def thresholds_H(k: TheoryConstants, eps: float = 1e-10) -> HThresholds:
    """Gain and resolution conditions of the H-norm convergence theorem."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    base = k.c**2 * k.lambda1 * k.G**2 * k.nu
    ag = k.alpha**k.gamma
    mu_min = max(5.0 * base, ag * base, ag / k.gamma)
    a = constant_a(k.gamma, k.lambda1)
    h_eps = a * ag * (eps / 2.0) ** (k.gamma / 2.0) * k.nu ** (1.0 - k.gamma / 2.0) / (k.mu * np.sqrt(k.c0)) if k.mu > 0 else float("inf")
    h_mu = _safe_sqrt_ratio(k.nu, 2.0 * k.mu * k.c0)
    h_beta = _safe_sqrt_ratio(k.nu, k.beta * k.c0)
    return HThresholds(mu_min, base, min(h_eps, h_mu, h_beta), regime_ceiling_H(k.mu, k.alpha, k.gamma), h_mu, h_beta, h_eps)


def regime_ceiling_H(mu: float, alpha: float, gamma: float) -> float:
    """min{exp(-alpha^g/(g mu)), (mu alpha^-g / (mu alpha^-g + 1))^{1/g}}."""
    _check_gamma(gamma)
    if not mu > 0:
        return 0.0
    eta = mu * alpha ** (-gamma)
    return min(np.exp(-alpha**gamma / (gamma * mu)), (eta / (eta + 1.0)) ** (1.0 / gamma))


def regime_ceiling_lambda(gain: float, gamma: float, lambda1: float) -> float:
    """min{exp(-1/(g gain l1^{g/2})), (gain l1^{g/2} / (gain l1^{g/2} + 1))^{1/g}}."""
    _check_gamma(gamma)
    if not gain > 0:
        return 0.0
    q = gain * lambda1 ** (gamma / 2.0)
    return min(np.exp(-1.0 / (gamma * q)), (q / (q + 1.0)) ** (1.0 / gamma))


def constant_J(c: float, G: float) -> float:
    return 2.0 * c * np.log(2.0 * c**1.5) + 4.0 * c * np.log(1.0 + G)


def thresholds_V(k: TheoryConstants, eps: float = 1e-10) -> VThresholds:
    """Gain and resolution conditions of the V-norm convergence theorem."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    J = constant_J(k.c, k.G)
    beta_min = 3.0 * k.lambda1 * k.nu * J * k.G
    mu_min = max(
        (np.sqrt(k.c0) + k.lambda1**-0.5) ** k.gamma * k.c * k.lambda1**2 * k.nu**2 * (1.0 + k.G) ** 4,
        1.0 / (k.gamma * k.lambda1 ** (k.gamma / 2.0)),
        beta_min,
    )
    a = constant_a_V(k.gamma, k.lambda1)
    h_eps = a * (eps / 2.0) ** (k.gamma / 2.0) * k.nu ** (1.0 - k.gamma / 2.0) / (k.mu * np.sqrt(k.c0)) if k.mu > 0 else float("inf")
    h_mu = _safe_sqrt_ratio(k.nu, k.mu * k.c0)
    R_V = regime_ceiling_lambda(k.mu, k.gamma, k.lambda1)
    return VThresholds(mu_min, beta_min, min(k.L, h_mu, h_eps), J, R_V, k.L, h_mu, h_eps)


def _envelope(t, t0: float, rate: float, w0: float):
    if not 0 < w0:
        raise ValueError("initial error must be positive")
    b = -(rate - 1.0) * np.log(w0) / rate
    if not b > 0:
        raise CertificationError(
            f"envelope coefficient b={b:.3g} is not positive: the initial error is outside the super-exponential window")
    A = np.exp(-1.0 / rate)
    return A * np.exp(-b * np.exp(rate * (np.asarray(t, dtype=float) - t0)))


def envelope_H(t, t0: float, mu: float, alpha: float, gamma: float, w0_H2: float):
    """Double-exponential bound on ||w(t)||_H^2 starting from ``w0_H2`` at ``t0``."""
    _check_gamma(gamma)
    return _envelope(t, t0, mu * alpha ** (-gamma) * gamma, w0_H2)


def envelope_V(t, t0: float, mu: float, gamma: float, lambda1: float, w0_V2: float):
    """Double-exponential bound on ||w(t)||_V^2 starting from ``w0_V2`` at ``t0``."""
    _check_gamma(gamma)
    return _envelope(t, t0, mu * gamma * lambda1 ** (gamma / 2.0), w0_V2)


def estimate_M(G: float, nu: float, lambda1: float, beta: float, alpha: float, v_H2: float) -> float:
    """Triangle-inequality estimate of a bound M on ||f + beta P I_h(w)||_H^2."""
    f2 = (G * lambda1 * nu**2) ** 2
    return 2.0 * f2 + 2.0 * beta**2 * alpha**2 * (2.0 * G**2 * nu**2 + v_H2)


def rhs_H(k: TheoryConstants, t_a: float, v0_H2: float, M: float) -> float:
    """A priori bound on ||v(t_a)||_H^2 for the linearly nudged run."""
    d = k.nu * k.lambda1 * t_a
    return np.exp(-d) * v0_H2 + M / (k.beta * k.nu * k.lambda1) * (-np.expm1(-d))


def log_rhs_V(k: TheoryConstants, v0_H2: float, v0_V2: float, M: float) -> float:
    """Logarithm of the a priori bound on ||v(t_a)||_V^2 (the bound itself overflows easily)."""
    T, nu = k.window, k.nu
    expo = 54.0 * k.c**4 / nu**3 * (v0_H2 / nu + T * M / (nu * k.beta)) ** 2 * (v0_V2 / nu + M / (k.beta * nu * k.lambda1)) ** 2
    return expo + np.log(v0_V2 + 4.0 * T * M / nu)


def switch_denominator_H(k: TheoryConstants) -> float:
    T = k.window
    return k.beta / 2.0 - (k.c**2 / (T * k.nu)) * (2.0 * (1.0 + k.lambda1 * k.nu * T) * k.nu * k.G**2)


def switch_time_H(k: TheoryConstants, t_a: float, v0_H2: float = 0.0, rhs: float | None = None,
                  M: float | None = None, R: float | None = None) -> float:
    """Earliest certified time at which the nonlinear term may be switched on (H norm).

    ``rhs`` bounds ||v(t_a)||_H^2; if omitted it is built from ``v0_H2`` and
    ``M`` (estimated when not given). ``R`` is the regime ceiling; it
    defaults to the linear-gain form ``regime_ceiling_lambda(beta, ...)``.
    """
    T = k.window
    if not T > 1.0 / (k.nu * k.lambda1):
        raise ValueError("averaging window must exceed 1/(nu lambda1)")
    D = switch_denominator_H(k)
    if not D > 0:
        raise CertificationError(f"beta too small to certify: decay-rate denominator {D:.3g} <= 0")
    if R is None:
        R = regime_ceiling_lambda(k.beta, k.gamma, k.lambda1)
    if rhs is None:
        if M is None:
            M = estimate_M(k.G, k.nu, k.lambda1, k.beta, k.alpha, v0_H2)
        rhs = rhs_H(k, t_a, v0_H2, M)
    log_arg = 2.0 * np.log(R) - 1.0 - k.beta * T - np.log(2.0 * (2.0 * k.nu**2 * k.G**2 + rhs))
    return float(t_a - log_arg / D)


def switch_time_V(k: TheoryConstants, t_a: float, v0_H2: float = 0.0, v0_V2: float = 0.0,
                  log_rhs: float | None = None, M: float | None = None, R: float | None = None) -> float:
    """V-norm analogue of :func:`switch_time_H`; ``log_rhs`` is the log of the bound on ||v(t_a)||_V^2."""
    T = k.window
    if not T >= k.lambda1 * k.nu:
        raise ValueError("averaging window must be at least lambda1 nu")
    J = constant_J(k.c, k.G)
    if not J * k.G > 0:
        raise CertificationError("decay rate 5GJ/6 is not positive")
    if R is None:
        R = regime_ceiling_lambda(k.beta, k.gamma, k.lambda1)
    if log_rhs is None:
        if M is None:
            M = estimate_M(k.G, k.nu, k.lambda1, k.beta, k.alpha, v0_H2)
        log_rhs = log_rhs_V(k, v0_H2, v0_V2, M)
    log_den = np.log(2.0) + np.logaddexp(np.log(2.0 * k.lambda1 * k.nu**2 * k.G**2) if k.G > 0 else -np.inf, log_rhs)
    log_arg = 2.0 * np.log(R) - (1.0 + k.beta * T) - log_den
    return float(t_a - 6.0 / (5.0 * k.G * J) * log_arg)
