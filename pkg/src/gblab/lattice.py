"""Discrete frequency lattices on the 2*pi*lam torus and the transforms between
physical samples, spatial spectra, and space-time spectra.

Conventions: the lattice Z/lam carries the normalized counting measure
(1/lam)*sum, the forward transform is (2*pi)^(-1/2) * integral of e^{-ikx},
and tau-integrals are dtau-weighted sums on a uniform symmetric grid.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi
SQRT_TWO_PI = math.sqrt(TWO_PI)


class LatticeError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class FrequencyLattice:
    """Frequencies j/lam for integer |j| <= half_modes, spacing exactly 1/lam."""

    lam: float
    K: float
    half_modes: int

    @property
    def modes(self) -> int:
        return 2 * self.half_modes + 1

    @property
    def j(self) -> np.ndarray:
        """Integer indices -half_modes..half_modes (ascending)."""
        return np.arange(-self.half_modes, self.half_modes + 1)

    @property
    def k(self) -> np.ndarray:
        """Frequencies j/lam (ascending, 0 is always present)."""
        return self.j / self.lam

    @property
    def circumference(self) -> float:
        return TWO_PI * self.lam

    def index_of(self, freq: float) -> int:
        """Array index of a lattice frequency; rejects off-lattice values."""
        j = round(freq * self.lam)
        if abs(j - freq * self.lam) > 1e-9 * max(1.0, abs(j)):
            raise LatticeError(f"{freq} is not a lattice frequency for lam={self.lam}")
        if abs(j) > self.half_modes:
            raise LatticeError(f"frequency {freq} beyond truncation K={self.K}")
        return j + self.half_modes

    def same_grid(self, other: "FrequencyLattice") -> bool:
        return (
            self.lam == other.lam
            and self.K == other.K
            and self.half_modes == other.half_modes
        )


def make_lattice(lam: float, K: float) -> FrequencyLattice:
    if not (np.isfinite(lam) and np.isfinite(K)):
        raise LatticeError("lam and K must be finite")
    if lam < 1.0:
        raise LatticeError("lam must be >= 1")
    if K <= 0.0:
        raise LatticeError("K must be > 0")
    return FrequencyLattice(lam=float(lam), K=float(K), half_modes=int(math.ceil(K * lam)))


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Fourier coefficients of one spatial function, truncated to the lattice."""

    lattice: FrequencyLattice
    coeff: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeff, dtype=np.complex128)
        if c.shape != (self.lattice.modes,):
            raise LatticeError(
                f"coeff shape {c.shape} does not match lattice modes {self.lattice.modes}"
            )
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "coeff", c)

    def l2_norm(self) -> float:
        """L2(T_lam) norm via Plancherel with the 1/lam counting measure."""
        return float(np.sqrt(np.sum(np.abs(self.coeff) ** 2) / self.lattice.lam))


def zero_field(lattice: FrequencyLattice) -> SpectralField:
    return SpectralField(lattice, np.zeros(lattice.modes, dtype=np.complex128))


def field_from_modes(lattice: FrequencyLattice, modes: dict) -> SpectralField:
    """Field with prescribed coefficients, e.g. {1.0: 1.0, -0.5: 2j}."""
    c = np.zeros(lattice.modes, dtype=np.complex128)
    for freq, val in modes.items():
        c[lattice.index_of(freq)] = val
    return SpectralField(lattice, c)


def x_grid(lattice: FrequencyLattice, n: int) -> np.ndarray:
    """Uniform sample grid on [0, 2*pi*lam)."""
    return np.arange(n) * (lattice.circumference / n)


def forward_transform(samples: np.ndarray, lattice: FrequencyLattice) -> SpectralField:
    """Fourier coefficients (2*pi)^(-1/2) * integral e^{-ikx} phi(x) dx of sampled phi.

    Exact for inputs band-limited to the lattice; sample count must be at least
    the mode count so the discrete transform is alias-free.
    """
    samples = np.asarray(samples)
    n = samples.shape[-1]
    if n < lattice.modes:
        raise LatticeError(f"need >= {lattice.modes} samples, got {n}")
    X = np.fft.fft(samples, axis=-1)
    J = lattice.half_modes
    neg = X[..., n - J:]
    pos = X[..., : J + 1]
    coeff = np.concatenate([neg, pos], axis=-1) * (SQRT_TWO_PI * lattice.lam / n)
    if samples.ndim == 1:
        return SpectralField(lattice, coeff)
    return coeff


def inverse_transform(field: SpectralField, n: int | None = None) -> np.ndarray:
    """Physical samples on the uniform grid of [0, 2*pi*lam)."""
    lattice = field.lattice
    if n is None:
        n = lattice.modes
    if n < lattice.modes:
        raise LatticeError(f"need >= {lattice.modes} samples, got {n}")
    J = lattice.half_modes
    spec = np.zeros(n, dtype=np.complex128)
    spec[: J + 1] = field.coeff[J:]
    spec[n - J:] = field.coeff[:J]
    return np.fft.ifft(spec) * (n / (SQRT_TWO_PI * lattice.lam))


@dataclass(frozen=True, eq=False)
class SpacetimeSpectrum:
    """Space-time Fourier data u~(tau, k) on a uniform symmetric tau grid."""

    lattice: FrequencyLattice
    tau: np.ndarray
    coeff: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.tau, dtype=np.float64)
        c = np.asarray(self.coeff, dtype=np.complex128)
        if t.ndim != 1 or t.size < 2:
            raise LatticeError("tau grid must be 1-d with >= 2 points")
        d = np.diff(t)
        if not np.allclose(d, d[0], rtol=1e-9, atol=1e-12 * abs(d[0])):
            raise LatticeError("tau grid must be uniform")
        if c.shape != (t.size, self.lattice.modes):
            raise LatticeError(f"coeff shape {c.shape} != (n_tau, modes)")
        t = t.copy()
        c = c.copy()
        t.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "tau", t)
        object.__setattr__(self, "coeff", c)

    @property
    def dtau(self) -> float:
        return float(self.tau[1] - self.tau[0])

    def with_coeff(self, coeff: np.ndarray) -> "SpacetimeSpectrum":
        return SpacetimeSpectrum(self.lattice, self.tau, coeff)

    def l2_norm(self) -> float:
        """l2_k L2_tau norm with the lattice measure and dtau weights."""
        w = np.sum(np.abs(self.coeff) ** 2) * self.dtau / self.lattice.lam
        return float(np.sqrt(w))


def make_tau_grid(tau_max: float, dtau: float) -> np.ndarray:
    """Symmetric uniform grid covering [-tau_max, tau_max]."""
    n = int(math.ceil(tau_max / dtau))
    return np.arange(-n, n + 1) * dtau


def default_tau_max(K: float) -> float:
    """Covers modulations up to <k>^2 with headroom (tau ~ 8 K^2)."""
    return 8.0 * K * K


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Time-indexed spectral fields on one lattice and a uniform time grid."""

    lattice: FrequencyLattice
    t: np.ndarray
    coeff: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=np.float64)
        c = np.asarray(self.coeff, dtype=np.complex128)
        if t.ndim != 1 or t.size < 2:
            raise LatticeError("time grid must be 1-d with >= 2 points")
        d = np.diff(t)
        if not np.allclose(d, d[0], rtol=1e-9, atol=1e-12 * max(abs(d[0]), 1e-300)):
            raise LatticeError("time grid must be uniform")
        if c.shape != (t.size, self.lattice.modes):
            raise LatticeError(f"coeff shape {c.shape} != (n_t, modes)")
        t.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "coeff", c)

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    def field_at(self, i: int) -> SpectralField:
        return SpectralField(self.lattice, self.coeff[i])

    def index_of_time(self, time: float) -> int:
        i = int(round((time - self.t[0]) / self.dt))
        if i < 0 or i >= self.t.size or abs(self.t[i] - time) > 1e-9 * max(1.0, abs(time)):
            raise LatticeError(f"t={time} is not on the trajectory grid")
        return i


def time_transform(traj: Trajectory, window, tau_grid: np.ndarray) -> SpacetimeSpectrum:
    """Windowed time transform u~(tau,k) = (2*pi)^(-1/2) * dt * sum_m e^{-i tau t_m} w(t_m) u(t_m,k).

    The window must be supported inside the trajectory's time grid, otherwise the
    discrete integral silently truncates mass.
    """
    w = np.asarray([window(t) for t in traj.t], dtype=np.float64)
    if abs(w[0]) > 1e-12 or abs(w[-1]) > 1e-12:
        raise LatticeError("window support exceeds the time grid")
    tau_grid = np.asarray(tau_grid, dtype=np.float64)
    weighted = traj.coeff * w[:, None]
    kernel = np.exp(-1j * np.outer(tau_grid, traj.t))
    coeff = kernel @ weighted * (traj.dt / SQRT_TWO_PI)
    return SpacetimeSpectrum(traj.lattice, tau_grid, coeff)


# Binary spectrum dump: little-endian header (lam f64, K f64, mode count u64,
# tau/time row count u64 or 0), then interleaved (re, im) f64 row-major (tau, k).
_HEADER = struct.Struct("<ddQQ")


def dump_spectrum(obj, path) -> None:
    if isinstance(obj, SpectralField):
        rows, data = 0, obj.coeff[None, :]
    elif isinstance(obj, SpacetimeSpectrum):
        rows, data = obj.tau.size, obj.coeff
    elif isinstance(obj, Trajectory):
        rows, data = obj.t.size, obj.coeff
    else:
        raise LatticeError(f"cannot dump object of type {type(obj).__name__}")
    lattice = obj.lattice
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(lattice.lam, lattice.K, lattice.modes, rows))
        fh.write(np.ascontiguousarray(data, dtype="<c16").tobytes())


def load_spectrum(path):
    """Returns (lattice, rows, coeff): rows == 0 means a single spatial field."""
    with open(path, "rb") as fh:
        lam, K, modes, rows = _HEADER.unpack(fh.read(_HEADER.size))
        raw = fh.read()
    lattice = make_lattice(lam, K)
    if lattice.modes != modes:
        raise LatticeError(f"mode count {modes} inconsistent with lam={lam}, K={K}")
    n_rows = max(int(rows), 1)
    coeff = np.frombuffer(raw, dtype="<c16").reshape(n_rows, int(modes)).astype(np.complex128)
    return lattice, int(rows), coeff


def load_field(path) -> SpectralField:
    lattice, rows, coeff = load_spectrum(path)
    if rows != 0:
        raise LatticeError("dump holds a space-time object, not a single field")
    return SpectralField(lattice, coeff[0])


def load_spacetime(path, tau_max: float) -> SpacetimeSpectrum:
    """Rebuild a space-time spectrum; the dump header does not carry the tau
    range, so it must be supplied (usually from the run manifest)."""
    lattice, rows, coeff = load_spectrum(path)
    if rows == 0:
        raise LatticeError("dump holds a single field, not a space-time object")
    if rows % 2 == 0:
        raise LatticeError("expected an odd symmetric tau grid")
    half = (rows - 1) // 2
    tau = np.arange(-half, half + 1) * (tau_max / half)
    return SpacetimeSpectrum(lattice, tau, coeff)
