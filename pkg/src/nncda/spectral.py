"""Periodic 2D spectral substrate: grids, Fourier fields, operators, norms.

Fields are real-valued and mean-free on the square ``[0, L)^2``. They are
stored as half-spectrum Fourier-series coefficients (the ``rfft2`` layout,
shape ``(n, n // 2 + 1)``) normalised so that

    f(x, y) = sum_k c_k exp(i (k1 x + k2 y) 2 pi / L),

i.e. ``c = rfft2(f) / n**2``. Axis 0 carries the first wavenumber component
(``fftfreq`` order), axis 1 the non-negative second component. The missing
half of the spectrum is implied by ``c(-k) = conj(c(k))``.

Norms follow Plancherel on the physical domain of area ``L**2``:
``||f||_H^2 = L^2 sum_k |c_k|^2`` with the sum taken over the full lattice.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.fft as sfft

__all__ = [
    "Grid",
    "SpectralField",
    "VelocityField",
    "make_grid",
    "transform_roundtrip",
    "inner",
    "h_norm",
    "v_norm",
    "a_norm",
    "grad_perp",
    "curl",
    "laplacian",
    "inv_laplacian",
    "dealias",
    "random_field",
    "write_checkpoint",
    "read_checkpoint",
    "CHECKPOINT_MAGIC",
]

CHECKPOINT_MAGIC = b"NNCDA1\0"


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid with its wavenumber lattice.

    Only ``n`` and ``L`` take part in equality; every array attribute is
    derived from them.
    """

    n: int
    L: float
    k1_index: np.ndarray = field(init=False, repr=False, compare=False)
    k2_index: np.ndarray = field(init=False, repr=False, compare=False)
    k1: np.ndarray = field(init=False, repr=False, compare=False)
    k2: np.ndarray = field(init=False, repr=False, compare=False)
    ksq: np.ndarray = field(init=False, repr=False, compare=False)
    ksq_index: np.ndarray = field(init=False, repr=False, compare=False)
    dealias_mask: np.ndarray = field(init=False, repr=False, compare=False)
    weights: np.ndarray = field(init=False, repr=False, compare=False)
    lambda1: float = field(init=False, compare=False)

    def __post_init__(self):
        n = self.n
        if int(n) != n or n < 8 or n % 2:
            raise ValueError(f"grid size must be an even integer >= 8, got {n!r}")
        if not self.L > 0:
            raise ValueError(f"domain length must be positive, got {self.L!r}")
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "L", float(self.L))
        scale = 2.0 * np.pi / self.L
        k1i = np.fft.fftfreq(n, 1.0 / n).round().astype(np.int64)[:, None]
        k2i = np.arange(n // 2 + 1, dtype=np.int64)[None, :]
        k1i_b, k2i_b = np.broadcast_arrays(k1i, k2i)
        kk = (k1i_b**2 + k2i_b**2).astype(np.int64)
        mask = (3 * np.abs(k1i_b) <= n) & (3 * np.abs(k2i_b) <= n)
        w = np.full(kk.shape, 2.0)
        w[:, 0] = 1.0
        w[:, -1] = 1.0
        for name, value in (
            ("k1_index", k1i_b.copy()),
            ("k2_index", k2i_b.copy()),
            ("k1", k1i_b * scale),
            ("k2", k2i_b * scale),
            ("ksq", kk * scale**2),
            ("ksq_index", kk),
            ("dealias_mask", mask),
            ("weights", w),
            ("lambda1", scale**2),
        ):
            if isinstance(value, np.ndarray):
                value.setflags(write=False)
            object.__setattr__(self, name, value)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n // 2 + 1)

    @property
    def kmag_index(self) -> np.ndarray:
        """Wavenumber magnitude in index units, sqrt(k1^2 + k2^2)."""
        return np.sqrt(self.ksq_index)

    @property
    def inv_ksq(self) -> np.ndarray:
        """1/|k|^2 with the mean mode mapped to zero."""
        with np.errstate(divide="ignore"):
            out = np.where(self.ksq_index > 0, 1.0 / np.where(self.ksq > 0, self.ksq, 1.0), 0.0)
        return out

    @property
    def d1(self) -> np.ndarray:
        """First-derivative wavenumber along axis 0, zero on the Nyquist row.

        An odd derivative of the Nyquist mode vanishes at every grid point,
        so dropping it keeps derivatives of real fields real.
        """
        return np.where(2 * np.abs(self.k1_index) == self.n, 0.0, self.k1)

    @property
    def d2(self) -> np.ndarray:
        """First-derivative wavenumber along axis 1, zero on the Nyquist column."""
        return np.where(2 * self.k2_index == self.n, 0.0, self.k2)

    def coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        x = np.arange(self.n) * (self.L / self.n)
        return np.meshgrid(x, x, indexing="ij")

    def full_index(self) -> tuple[np.ndarray, np.ndarray]:
        """Integer wavenumbers of the full ``n x n`` lattice in FFT order."""
        k = np.fft.fftfreq(self.n, 1.0 / self.n).round().astype(np.int64)
        return np.meshgrid(k, k, indexing="ij")


def make_grid(n: int, L: float) -> Grid:
    return Grid(n, L)


class SpectralField:
    """Mean-free real scalar field held as half-spectrum coefficients."""

    __slots__ = ("grid", "coeffs")

    def __init__(self, grid: Grid, coeffs: np.ndarray):
        coeffs = np.asarray(coeffs, dtype=np.complex128)
        if coeffs.shape != grid.shape:
            raise ValueError(f"coefficient shape {coeffs.shape} does not match grid {grid.shape}")
        if coeffs[0, 0] != 0:
            raise ValueError("field is not mean-free: k = (0, 0) coefficient must be zero")
        self.grid = grid
        self.coeffs = coeffs

    @classmethod
    def zeros(cls, grid: Grid) -> "SpectralField":
        return cls(grid, np.zeros(grid.shape, dtype=np.complex128))

    @classmethod
    def from_physical(cls, grid: Grid, values: np.ndarray) -> "SpectralField":
        """Transform physical samples; the spatial mean is projected out."""
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (grid.n, grid.n):
            raise ValueError(f"expected samples of shape {(grid.n, grid.n)}, got {values.shape}")
        c = sfft.rfft2(values) / grid.n**2
        c[0, 0] = 0.0
        return cls(grid, c)

    @classmethod
    def from_full(cls, grid: Grid, full: np.ndarray, rtol: float = 1e-12) -> "SpectralField":
        """Build from a full ``n x n`` coefficient array, checking reality."""
        full = np.asarray(full, dtype=np.complex128)
        if full.shape != (grid.n, grid.n):
            raise ValueError(f"expected full coefficients of shape {(grid.n, grid.n)}")
        mirrored = np.conj(np.roll(full[::-1, ::-1], 1, axis=(0, 1)))
        scale = max(np.max(np.abs(full)), 1e-300)
        if np.max(np.abs(full - mirrored)) > rtol * scale:
            raise ValueError("coefficients violate the reality condition c(-k) = conj(c(k))")
        return cls(grid, full[:, : grid.n // 2 + 1].copy())

    @classmethod
    def single_mode(cls, grid: Grid, k1: int, k2: int, amplitude: complex = 1.0) -> "SpectralField":
        """Real field ``amplitude e^{ik.x} + c.c.`` built from one lattice mode."""
        full = np.zeros((grid.n, grid.n), dtype=np.complex128)
        full[k1 % grid.n, k2 % grid.n] += amplitude
        full[-k1 % grid.n, -k2 % grid.n] += np.conj(amplitude)
        return cls.from_full(grid, full)

    def to_physical(self) -> np.ndarray:
        return sfft.irfft2(self.coeffs * self.grid.n**2, s=(self.grid.n, self.grid.n))

    def full_coeffs(self) -> np.ndarray:
        """Expand to the full ``n x n`` lattice via conjugate symmetry."""
        n = self.grid.n
        full = np.empty((n, n), dtype=np.complex128)
        h = n // 2 + 1
        full[:, :h] = self.coeffs
        # columns h .. n-1 hold k2 < 0: c(k1, k2) = conj(c(-k1, -k2))
        rows = (-np.arange(n)) % n
        cols = n - np.arange(h, n)
        full[:, h:] = np.conj(self.coeffs[rows][:, cols])
        return full

    def copy(self) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs.copy())

    def _check(self, other: "SpectralField") -> None:
        if self.grid != other.grid:
            raise ValueError("fields live on different grids")

    def __add__(self, other: "SpectralField") -> "SpectralField":
        self._check(other)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        self._check(other)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.grid, -self.coeffs)

    def __repr__(self) -> str:
        return f"SpectralField(n={self.grid.n}, L={self.grid.L:g})"


class VelocityField:
    """Pair of mean-free scalar components (u1, u2)."""

    __slots__ = ("u1", "u2")

    def __init__(self, u1: SpectralField, u2: SpectralField):
        u1._check(u2)
        self.u1 = u1
        self.u2 = u2

    @property
    def grid(self) -> Grid:
        return self.u1.grid

    @classmethod
    def zeros(cls, grid: Grid) -> "VelocityField":
        return cls(SpectralField.zeros(grid), SpectralField.zeros(grid))

    def divergence(self) -> SpectralField:
        g = self.grid
        return SpectralField(g, 1j * (g.d1 * self.u1.coeffs + g.d2 * self.u2.coeffs))

    def copy(self) -> "VelocityField":
        return VelocityField(self.u1.copy(), self.u2.copy())

    def __add__(self, other: "VelocityField") -> "VelocityField":
        return VelocityField(self.u1 + other.u1, self.u2 + other.u2)

    def __sub__(self, other: "VelocityField") -> "VelocityField":
        return VelocityField(self.u1 - other.u1, self.u2 - other.u2)

    def __mul__(self, scalar: float) -> "VelocityField":
        return VelocityField(self.u1 * scalar, self.u2 * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "VelocityField":
        return VelocityField(-self.u1, -self.u2)


def _components(f):
    return (f.u1, f.u2) if isinstance(f, VelocityField) else (f,)


def _weighted_sum(field: SpectralField, multiplier=None) -> float:
    g = field.grid
    p = g.weights * (field.coeffs.real**2 + field.coeffs.imag**2)
    if multiplier is not None:
        p = p * multiplier
    return float(p.sum()) * g.L**2


def transform_roundtrip(field: SpectralField) -> SpectralField:
    return SpectralField.from_physical(field.grid, field.to_physical())


def inner(f, g) -> float:
    """H (L^2) inner product of two scalar or two velocity fields."""
    total = 0.0
    for a, b in zip(_components(f), _components(g)):
        a._check(b)
        prod = a.grid.weights * (a.coeffs * np.conj(b.coeffs)).real
        total += float(prod.sum()) * a.grid.L**2
    return total


def h_norm(f) -> float:
    return float(np.sqrt(sum(_weighted_sum(c) for c in _components(f))))


def v_norm(f) -> float:
    return float(np.sqrt(sum(_weighted_sum(c, c.grid.ksq) for c in _components(f))))


def a_norm(f) -> float:
    return float(np.sqrt(sum(_weighted_sum(c, c.grid.ksq**2) for c in _components(f))))


def grad_perp(psi: SpectralField) -> VelocityField:
    """Velocity u = (-d psi/dy, d psi/dx) from a stream function.

    Nyquist modes have no first derivative on the grid, so ``h_norm`` of the
    result equals ``v_norm(psi)`` exactly only for fields without them
    (every dealiased field).
    """
    g = psi.grid
    return VelocityField(
        SpectralField(g, -1j * g.d2 * psi.coeffs),
        SpectralField(g, 1j * g.d1 * psi.coeffs),
    )


def curl(u: VelocityField) -> SpectralField:
    """Scalar vorticity d u2/dx - d u1/dy."""
    g = u.grid
    return SpectralField(g, 1j * (g.d1 * u.u2.coeffs - g.d2 * u.u1.coeffs))


def laplacian(f: SpectralField) -> SpectralField:
    return SpectralField(f.grid, -f.grid.ksq * f.coeffs)


def inv_laplacian(f: SpectralField) -> SpectralField:
    return SpectralField(f.grid, -f.grid.inv_ksq * f.coeffs)


def dealias(f):
    if isinstance(f, VelocityField):
        return VelocityField(dealias(f.u1), dealias(f.u2))
    return SpectralField(f.grid, np.where(f.grid.dealias_mask, f.coeffs, 0.0))


def random_field(grid: Grid, rng: np.random.Generator, slope: float = 0.0, dealiased: bool = False) -> SpectralField:
    """Random real mean-free field with coefficients ~ N(0,1) * |k|^(-slope)."""
    c = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    if slope:
        c *= np.where(grid.ksq_index > 0, np.maximum(grid.ksq_index, 1) ** (-slope / 2.0), 0.0)
    c[0, 0] = 0.0
    # one physical roundtrip enforces self-conjugacy of the k2 = 0 and Nyquist columns
    f = transform_roundtrip(SpectralField(grid, c))
    return dealias(f) if dealiased else f


def write_checkpoint(path, psi: SpectralField, t: float) -> None:
    """Write ``psi`` at time ``t`` in the little-endian NNCDA1 layout."""
    g = psi.grid
    full = np.ascontiguousarray(psi.full_coeffs(), dtype="<c16")
    with open(Path(path), "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<Idd", g.n, g.L, float(t)))
        fh.write(full.tobytes(order="C"))


def read_checkpoint(path) -> tuple[SpectralField, float]:
    data = Path(path).read_bytes()
    m = len(CHECKPOINT_MAGIC)
    if data[:m] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not an NNCDA1 checkpoint")
    n, L, t = struct.unpack_from("<Idd", data, m)
    off = m + struct.calcsize("<Idd")
    expected = off + 16 * n * n
    if len(data) != expected:
        raise ValueError(f"{path}: truncated checkpoint ({len(data)} bytes, expected {expected})")
    full = np.frombuffer(data, dtype="<c16", offset=off, count=n * n).reshape(n, n)
    grid = Grid(n, L)
    return SpectralField(grid, full[:, : n // 2 + 1].astype(np.complex128)), t
