"""Pseudospectral machinery for the rescaled quadratic Schrodinger problem:
free propagator, dealiased nonlinearity, Duhamel quadrature in the interaction
picture, Picard fixed-point iteration, a fourth-order reference integrator,
and the dual-path second-iterate operator used by the inflation experiments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lattice import (
    FrequencyLattice,
    LatticeError,
    SpectralField,
    Trajectory,
)
from .reduction import omega_multiplier

SQRT_TWO_PI = math.sqrt(2.0 * math.pi)


class PicardDivergenceError(RuntimeError):
    """Fixed-point iteration failed to contract; carries the ratio history."""

    def __init__(self, ratios):
        super().__init__(f"iteration diverged, contraction ratios {ratios}")
        self.ratios = list(ratios)


class InternalConsistencyError(RuntimeError):
    """Two independent evaluation paths disagreed beyond tolerance."""


def bump_psi(t):
    """Smooth cutoff: 1 on [-1,1], exp(1 - 1/(1-(|t|-1)^2)) on 1<|t|<2, 0 outside."""
    t = np.asarray(t, dtype=np.float64)
    a = np.abs(t)
    out = np.zeros_like(a)
    out[a <= 1.0] = 1.0
    edge = (a > 1.0) & (a < 2.0)
    x = a[edge] - 1.0
    out[edge] = np.exp(1.0 - 1.0 / (1.0 - x * x))
    if np.ndim(t) == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class SolverConfig:
    lam: float
    s: float
    T: float = 1.0
    dt: float = 1e-2
    K: float = 64.0
    max_picard: int = 40
    contraction_tol: float = 1e-10
    dealias: float = 2.0
    t_min: float = 0.0
    include_linear: bool = True
    include_quadratic: bool = True
    divergence_patience: int = 3

    def __post_init__(self):
        if self.dealias < 1.5:
            raise ValueError("dealias factor must be >= 1.5")
        n = (self.T - self.t_min) / self.dt
        if abs(n - round(n)) > 1e-9:
            raise ValueError("dt must divide the solve interval")
        if not (self.t_min <= 0.0 <= self.T):
            raise ValueError("the solve interval must contain t = 0")


def time_grid(cfg: SolverConfig) -> np.ndarray:
    n = int(round((cfg.T - cfg.t_min) / cfg.dt))
    return cfg.t_min + np.arange(n + 1) * cfg.dt


def free_evolve(u0: SpectralField, t: float) -> SpectralField:
    """Schrodinger group: mode k picks up the phase e^{-i k^2 t}."""
    k = u0.lattice.k
    return SpectralField(u0.lattice, u0.coeff * np.exp(-1j * k * k * t))


def free_trajectory(u0: SpectralField, t: np.ndarray) -> Trajectory:
    k2 = u0.lattice.k ** 2
    coeff = np.exp(-1j * np.outer(np.asarray(t), k2)) * u0.coeff[None, :]
    return Trajectory(u0.lattice, np.asarray(t, dtype=np.float64), coeff)


def _pad_size(modes: int, dealias: float) -> int:
    need = max(int(math.ceil(dealias * modes)), 2 * modes - 1)
    n = 1
    while n < need:
        n *= 2
    return n


def _to_physical(rows: np.ndarray, lattice: FrequencyLattice, n_pad: int) -> np.ndarray:
    J = lattice.half_modes
    spec = np.zeros(rows.shape[:-1] + (n_pad,), dtype=np.complex128)
    spec[..., : J + 1] = rows[..., J:]
    spec[..., n_pad - J:] = rows[..., :J]
    return np.fft.ifft(spec, axis=-1) * (n_pad / (SQRT_TWO_PI * lattice.lam))


def _to_spectral(phys: np.ndarray, lattice: FrequencyLattice, n_pad: int) -> np.ndarray:
    J = lattice.half_modes
    X = np.fft.fft(phys, axis=-1) * (SQRT_TWO_PI * lattice.lam / n_pad)
    return np.concatenate([X[..., n_pad - J:], X[..., : J + 1]], axis=-1)


def nonlinearity_rows(
    rows: np.ndarray,
    lattice: FrequencyLattice,
    lam: float,
    dealias: float = 2.0,
    include_linear: bool = True,
    include_quadratic: bool = True,
    chunk: int = 256,
) -> np.ndarray:
    """Vectorized right-hand side over stacked spectra (rows x modes)."""
    rows = np.atleast_2d(rows)
    out = np.zeros_like(rows)
    if include_linear:
        # (u - conj u) on the spectral side: u_hat(k) - conj(u_hat(-k))
        out += (rows - np.conj(rows[:, ::-1])) / (2.0 * lam * lam)
    if include_quadratic:
        m = omega_multiplier(lattice, lam)
        n_pad = _pad_size(lattice.modes, dealias)
        for lo in range(0, rows.shape[0], chunk):
            sl = slice(lo, min(lo + chunk, rows.shape[0]))
            w = rows[sl] + np.conj(rows[sl, ::-1])  # spectrum of u + conj(u)
            phys = _to_physical(w, lattice, n_pad)
            sq = _to_spectral(phys * phys, lattice, n_pad)
            out[sl] -= 0.25 * m[None, :] * sq
    return out


def nonlinearity(
    u: SpectralField,
    lam: float,
    dealias: float = 2.0,
    include_linear: bool = True,
    include_quadratic: bool = True,
) -> SpectralField:
    """F(u) = (1/2) lam^-2 (u - conj u) - (1/4) omega^2 (u + conj u)^2."""
    if u.lattice.lam != lam:
        raise LatticeError("lam does not match the field's lattice")
    rows = nonlinearity_rows(
        u.coeff[None, :], u.lattice, lam, dealias, include_linear, include_quadratic
    )
    return SpectralField(u.lattice, rows[0])


def simpson_weights(n_points: int, h: float) -> np.ndarray:
    """Composite Simpson weights; odd trailing interval handled by the 3/8 rule."""
    if n_points < 2:
        return np.zeros(max(n_points, 1))
    if n_points == 2:
        return np.array([0.5, 0.5]) * h
    w = np.zeros(n_points)
    intervals = n_points - 1
    if intervals % 2 == 0:
        w[0] = w[-1] = 1.0
        w[1:-1:2] = 4.0
        w[2:-2:2] = 2.0
        return w * (h / 3.0)
    if n_points == 4:
        return np.array([1.0, 3.0, 3.0, 1.0]) * (3.0 * h / 8.0)
    w[: n_points - 3] = simpson_weights(n_points - 3, h)[: n_points - 3]
    w[n_points - 4:] += np.array([1.0, 3.0, 3.0, 1.0]) * (3.0 * h / 8.0)
    return w


def duhamel(F: Trajectory, t: float) -> SpectralField:
    """integral_0^t of e^{i(t-t') dxx} F(t') dt', evaluated in the interaction
    picture so the quadrature never sees the stiff k^2 phases directly."""
    i0 = F.index_of_time(0.0)
    i1 = F.index_of_time(t)
    lo, hi = min(i0, i1), max(i0, i1)
    sign = 1.0 if i1 >= i0 else -1.0
    k2 = F.lattice.k ** 2
    ts = F.t[lo : hi + 1]
    rows = F.coeff[lo : hi + 1] * np.exp(1j * np.outer(ts, k2))
    w = simpson_weights(ts.size, F.dt)
    integral = sign * (w @ rows)
    return SpectralField(F.lattice, np.exp(-1j * k2 * t) * integral)


def _cumulative_simpson(G: np.ndarray, h: float) -> np.ndarray:
    """Prefix integrals I[m] = int_{t_0}^{t_m} G dt, fourth-order consistent.

    Even prefixes use composite Simpson pairs; odd prefixes add the 3-point
    Newton-Cotes correction for the trailing interval.
    """
    n = G.shape[0]
    I = np.zeros_like(G)
    if n < 2:
        return I
    if n == 2:
        I[1] = 0.5 * h * (G[0] + G[1])
        return I
    pair = (h / 3.0) * (G[:-2:2] + 4.0 * G[1:-1:2] + G[2::2])
    even = np.cumsum(pair, axis=0)
    I[2::2] = even
    # last interval through the quadratic on (m-2, m-1, m)
    start = I[0:-1:2][: G[1::2].shape[0]]
    I[1::2] = start + (h / 12.0) * (
        -G[2::2][: G[1::2].shape[0]] + 8.0 * G[1::2] + 5.0 * G[0:-1:2][: G[1::2].shape[0]]
    )
    return I


def duhamel_all(F: Trajectory) -> np.ndarray:
    """integral_0^{t_m} e^{i(t_m - t') dxx} F(t') dt' for every grid time."""
    i0 = F.index_of_time(0.0)
    k2 = F.lattice.k ** 2
    phases = np.exp(1j * np.outer(F.t, k2))
    G = F.coeff * phases
    out = np.zeros_like(G)
    fwd = _cumulative_simpson(G[i0:], F.dt)
    out[i0:] = fwd
    if i0 > 0:
        bwd = _cumulative_simpson(G[i0::-1], F.dt)
        out[:i0] = -bwd[:0:-1]
    return np.conj(phases) * out


def integral_residual(traj: Trajectory, u0: SpectralField, cfg: SolverConfig) -> float:
    """Sup-in-time H^s defect of the discrete integral equation."""
    F_rows = nonlinearity_rows(
        traj.coeff, traj.lattice, cfg.lam, cfg.dealias, cfg.include_linear, cfg.include_quadratic
    )
    duh = duhamel_all(Trajectory(traj.lattice, traj.t, F_rows))
    free = free_trajectory(u0, traj.t).coeff
    defect = traj.coeff - (free - 1j * duh)
    w = (1.0 + traj.lattice.k ** 2) ** cfg.s
    norms = np.sqrt(np.sum(w[None, :] * np.abs(defect) ** 2, axis=1) / cfg.lam)
    return float(norms.max())


@dataclass(frozen=True)
class PicardReport:
    iterations: int
    converged: bool
    ratios: list
    diff_history: list
    residual: float


@dataclass(frozen=True)
class PicardResult:
    trajectory: Trajectory
    iterates: list
    report: PicardReport


def picard_solve(u0: SpectralField, cfg: SolverConfig) -> PicardResult:
    """Fixed-point iteration u -> free(u0) - i Duhamel(F(u)) on the grid of cfg.

    Raises PicardDivergenceError after cfg.divergence_patience consecutive
    non-contracting steps; large data is expected to do this.

    Memory discipline: on big grids the loop holds one persistent phase array
    and recycles the iterate buffers instead of building trajectories per step.
    """
    if u0.lattice.lam < cfg.lam:
        raise LatticeError("data lattice must be at least as fine as cfg.lam")
    t = time_grid(cfg)
    lattice = u0.lattice
    i0 = int(np.argmin(np.abs(t)))
    k2 = lattice.k ** 2
    phases = np.exp(1j * np.outer(t, k2))  # e^{+i k^2 t}, held across iterations
    w_s = (1.0 + k2) ** cfg.s

    def sup_hs(rows):
        return float(np.sqrt(np.sum(w_s[None, :] * np.abs(rows) ** 2, axis=1) / cfg.lam).max())

    def prefix_integrals(G):
        out = np.zeros_like(G)
        out[i0:] = _cumulative_simpson(G[i0:], cfg.dt)
        if i0 > 0:
            bwd = _cumulative_simpson(G[i0::-1], cfg.dt)
            out[:i0] = -bwd[:0:-1]
        return out

    current = np.conj(phases) * u0.coeff[None, :]
    scale = max(sup_hs(current), 1e-300)
    iterates = []
    ratios: list = []
    diffs: list = []
    bad_streak = 0
    converged = False
    for _ in range(cfg.max_picard):
        G = nonlinearity_rows(
            current, lattice, cfg.lam, cfg.dealias, cfg.include_linear, cfg.include_quadratic
        )
        G *= phases  # interaction picture
        new = prefix_integrals(G)
        del G
        new *= -1j
        new += u0.coeff[None, :]
        new *= np.conj(phases)  # back from the interaction picture
        current -= new
        d = sup_hs(current)
        diffs.append(d)
        if not np.isfinite(d):
            raise PicardDivergenceError(ratios + [float("inf")])
        if len(diffs) >= 2 and diffs[-2] > 0:
            r = diffs[-1] / diffs[-2]
            ratios.append(r)
            bad_streak = bad_streak + 1 if r >= 1.0 else 0
            if bad_streak >= cfg.divergence_patience:
                raise PicardDivergenceError(ratios)
        if len(iterates) < 2:
            iterates.append(Trajectory(lattice, t, new.copy()))
        current = new
        if d <= cfg.contraction_tol * scale:
            converged = True
            break
    del phases
    traj = Trajectory(lattice, t, current)
    residual = integral_residual(traj, u0, cfg)
    report = PicardReport(
        iterations=len(diffs),
        converged=converged,
        ratios=ratios,
        diff_history=diffs,
        residual=residual,
    )
    return PicardResult(trajectory=traj, iterates=iterates, report=report)


class StepSizeRejection(RuntimeError):
    """Reference integrator's local error estimate exceeded its budget."""


def reference_solve(u0: SpectralField, cfg: SolverConfig, local_error_cap: float = 1e-8) -> Trajectory:
    """Classical RK4 in the interaction picture (an exponential integrator:
    the stiff phases are handled exactly, the remainder is smooth).

    Every step is checked by step doubling; a local estimate above the cap
    raises StepSizeRejection rather than returning polluted output.
    """
    if u0.lattice.lam < cfg.lam:
        raise LatticeError("data lattice must be at least as fine as cfg.lam")
    t = time_grid(cfg)
    lattice = u0.lattice
    k2 = lattice.k ** 2

    def rhs(time, v):
        # v is the interaction-picture variable e^{-it dxx} u
        u = v * np.exp(-1j * k2 * time)
        F = nonlinearity_rows(
            u[None, :], lattice, cfg.lam, cfg.dealias, cfg.include_linear, cfg.include_quadratic
        )[0]
        return -1j * F * np.exp(1j * k2 * time)

    def rk4_step(time, v, h):
        k1 = rhs(time, v)
        k2_ = rhs(time + 0.5 * h, v + 0.5 * h * k1)
        k3 = rhs(time + 0.5 * h, v + 0.5 * h * k2_)
        k4 = rhs(time + h, v + h * k3)
        return v + (h / 6.0) * (k1 + 2.0 * k2_ + 2.0 * k3 + k4)

    i0 = int(np.argmin(np.abs(t)))
    coeff = np.zeros((t.size, lattice.modes), dtype=np.complex128)
    for direction in (+1, -1):
        v = u0.coeff.astype(np.complex128)
        idx = range(i0, t.size - 1) if direction > 0 else range(i0, 0, -1)
        for i in idx:
            j = i + direction
            h = t[j] - t[i]
            full = rk4_step(t[i], v, h)
            half = rk4_step(t[i] + 0.5 * h, rk4_step(t[i], v, 0.5 * h), 0.5 * h)
            err = float(np.abs(full - half).max())
            if err > local_error_cap * max(1.0, float(np.abs(v).max())):
                raise StepSizeRejection(
                    f"local error {err:.3e} at t={t[i]:.6g}; reduce dt"
                )
            v = half
            coeff[j] = v * np.exp(-1j * k2 * t[j])
    coeff[i0] = u0.coeff
    return Trajectory(lattice, t, coeff)


def phase_integral(theta: np.ndarray, t0: float) -> np.ndarray:
    """integral_0^{t0} e^{i theta t} dt = t0 e^{i theta t0/2} sinc(theta t0 / 2pi)."""
    x = np.asarray(theta, dtype=np.float64) * t0
    return t0 * np.exp(0.5j * x) * np.sinc(x / (2.0 * math.pi))


def _a2_closed_form(phi: SpectralField, t0: float, lam: float) -> np.ndarray:
    """Per-mode closed form of the second iterate of u*conj(u) forcing."""
    lattice = phi.lattice
    J = lattice.half_modes
    k = lattice.k
    m = omega_multiplier(lattice, lam)
    c = phi.coeff
    out = np.zeros(lattice.modes, dtype=np.complex128)
    for idx in range(lattice.modes):
        j = idx - J
        # pairs (k1, k1 - k) both on the lattice
        lo = max(-J, -J + j)
        hi = min(J, J + j)
        if lo > hi:
            continue
        k1 = np.arange(lo, hi + 1) / lattice.lam
        a = c[lo + J : hi + J + 1]
        b = np.conj(c[lo - j + J : hi - j + J + 1])
        theta = 2.0 * k[idx] * (k[idx] - k1)
        out[idx] = np.sum(a * b * phase_integral(theta, t0))
    out *= 0.5j * m * np.exp(-1j * k * k * t0) / (lattice.lam * SQRT_TWO_PI)
    return out


def _support_theta_max(phi: SpectralField) -> float:
    """Largest |2k(k-k1)| over interactions the input can actually populate."""
    lattice = phi.lattice
    occ = np.abs(phi.coeff) > 1e-14 * max(float(np.abs(phi.coeff).max()), 1e-300)
    if not occ.any():
        return 1.0
    j_occ = lattice.j[occ]
    kmax_out = (j_occ.max() - j_occ.min()) / lattice.lam  # u*conj(u) support width
    kmax_out = min(abs(kmax_out), lattice.K + 1.0 / lattice.lam)
    k1max = np.abs(j_occ).max() / lattice.lam
    return max(2.0 * kmax_out * (kmax_out + k1max), 1.0)


def _a2_quadrature(phi: SpectralField, t0: float, lam: float, chunk: int = 512) -> np.ndarray:
    """Independent path: free trajectory, dealiased physical products, Simpson."""
    lattice = phi.lattice
    theta_max = _support_theta_max(phi)
    # Simpson's relative error per phase component is (theta dt)^4 / 180;
    # theta dt <= 0.03 keeps the worst component near 4.5e-9, under the 1e-8
    # cross-check tolerance.
    n_t = int(math.ceil(abs(t0) * theta_max / 0.03))
    n_t = max(n_t, 64)
    if n_t % 2 == 1:
        n_t += 1
    ts = np.linspace(0.0, t0, n_t + 1)
    h = ts[1] - ts[0]
    w = simpson_weights(ts.size, abs(h))
    k = lattice.k
    k2 = k * k
    m = omega_multiplier(lattice, lam)
    n_pad = _pad_size(lattice.modes, 2.0)
    acc = np.zeros(lattice.modes, dtype=np.complex128)
    for lo in range(0, ts.size, chunk):
        sl = slice(lo, min(lo + chunk, ts.size))
        tt = ts[sl]
        rows = np.exp(-1j * np.outer(tt, k2)) * phi.coeff[None, :]
        phys = _to_physical(rows, lattice, n_pad)
        prod = _to_spectral(phys * np.conj(phys), lattice, n_pad)
        acc += (w[sl, None] * np.exp(1j * np.outer(tt, k2)) * prod).sum(axis=0)
    sign = 1.0 if t0 >= 0 else -1.0
    return 0.5j * m * np.exp(-1j * k2 * t0) * sign * acc


def a2_iterate(
    phi: SpectralField, t0: float, lam: float, rtol: float = 1e-8
) -> SpectralField:
    """Second Picard iterate of the u*conj(u) channel at time t0.

    Evaluated through two independent routes (closed-form phase sums and
    trajectory quadrature) which must agree to rtol in relative l2.
    """
    if phi.lattice.lam < lam:
        raise LatticeError("the field's lattice must be at least lam-fine")
    if t0 <= 0:
        raise LatticeError("t0 must be positive")
    closed = _a2_closed_form(phi, t0, lam)
    quad = _a2_quadrature(phi, t0, lam)
    scale = float(np.linalg.norm(closed))
    if scale > 0:
        rel = float(np.linalg.norm(closed - quad)) / scale
        if rel > rtol:
            raise InternalConsistencyError(
                f"second-iterate paths disagree: rel l2 error {rel:.3e} > {rtol:.1e}"
            )
    return SpectralField(phi.lattice, closed)
