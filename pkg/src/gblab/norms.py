"""Sobolev, dispersive, and Besov-type norms on lattice spectra, plus the
modulation/frequency projections and dyadic shell decompositions they use.

Region conventions (fixed so the pieces form a genuine partition): the "at
most comparable" comparisons in region predicates are implemented as <= with
constant 1, and "much greater" as > 4x.  Any fixed constants give equivalent
norms; determinism across runs is what matters here.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .lattice import SpacetimeSpectrum, SpectralField, Trajectory

MUCH_GREATER = 4.0


def _bracket(x: np.ndarray) -> np.ndarray:
    """Japanese bracket <x> = (1 + x^2)^(1/2)."""
    return np.sqrt(1.0 + np.asarray(x, dtype=np.float64) ** 2)


def h_norm(phi: SpectralField, s: float) -> float:
    """Sobolev norm ((1/lam) sum_k <k>^(2s) |phi_hat(k)|^2)^(1/2)."""
    w = _bracket(phi.lattice.k) ** (2.0 * s)
    return float(np.sqrt(np.sum(w * np.abs(phi.coeff) ** 2) / phi.lattice.lam))


def _grids(u: SpacetimeSpectrum):
    k = u.lattice.k
    mod = _bracket(u.tau[:, None] + (k * k)[None, :])
    return k, mod


def xsb_norm(u: SpacetimeSpectrum, s: float, b: float) -> float:
    """Weighted l2_k L2_tau norm with weights <k>^s <tau+k^2>^b."""
    k, mod = _grids(u)
    w = _bracket(k)[None, :] ** (2.0 * s) * mod ** (2.0 * b)
    total = np.sum(w * np.abs(u.coeff) ** 2) * u.dtau / u.lattice.lam
    return float(np.sqrt(total))


def ys_norm(u: SpacetimeSpectrum, s: float) -> float:
    """l2_k L1_tau norm with <k>^s weight; controls sup-in-time Sobolev norms."""
    k = u.lattice.k
    l1 = np.sum(np.abs(u.coeff), axis=0) * u.dtau
    w = _bracket(k) ** (2.0 * s)
    return float(np.sqrt(np.sum(w * l1**2) / u.lattice.lam))


@dataclass(frozen=True)
class RegionPredicate:
    """Comparison region in (tau, k): a*<tau+k^2> vs thresholds built from
    <k>, <k>^2, dyadic shells, and |k| bands.  Conjunctions compose with &."""

    description: str
    _terms: tuple = field(default_factory=tuple)

    def mask(self, u: SpacetimeSpectrum) -> np.ndarray:
        k = u.lattice.k
        mod = _bracket(u.tau[:, None] + (k * k)[None, :])
        out = np.ones(mod.shape, dtype=bool)
        for kind, lo, hi in self._terms:
            if kind == "mod_shell":
                if lo is not None:
                    out &= mod >= lo
                out &= mod < hi
                continue
            if kind == "mod_vs_one":
                ref = np.ones_like(mod)
            elif kind == "mod_vs_k":
                ref = np.broadcast_to(_bracket(k)[None, :], mod.shape)
            elif kind == "mod_vs_k2":
                ref = np.broadcast_to((_bracket(k) ** 2)[None, :], mod.shape)
            elif kind == "absk":
                ref = None
            else:
                raise ValueError(kind)
            if kind == "absk":
                v = np.broadcast_to(np.abs(k)[None, :], mod.shape)
                out &= (v >= lo) & (v < hi)
            else:
                r = mod / ref
                if lo is not None:
                    out &= r > lo
                if hi is not None:
                    out &= r <= hi
        return out

    def __and__(self, other: "RegionPredicate") -> "RegionPredicate":
        return RegionPredicate(
            description=f"({self.description}) and ({other.description})",
            _terms=self._terms + other._terms,
        )


def mod_le_k() -> RegionPredicate:
    return RegionPredicate("<tau+k^2> <= <k>", (("mod_vs_k", None, 1.0),))


def mod_gt_k() -> RegionPredicate:
    return RegionPredicate("<tau+k^2> > <k>", (("mod_vs_k", 1.0, None),))


def mod_le_k2() -> RegionPredicate:
    return RegionPredicate("<tau+k^2> <= <k>^2", (("mod_vs_k2", None, 1.0),))


def mod_gt_k2() -> RegionPredicate:
    return RegionPredicate("<tau+k^2> > <k>^2", (("mod_vs_k2", 1.0, None),))


def mod_much_gt_k2() -> RegionPredicate:
    return RegionPredicate(
        f"<tau+k^2> > {MUCH_GREATER:g}<k>^2", (("mod_vs_k2", MUCH_GREATER, None),)
    )


def mod_shell(M: float) -> RegionPredicate:
    """Dyadic shell <tau+k^2> in [M, 2M); M=1 takes everything below 2."""
    lo = None if M <= 1 else float(M)
    return RegionPredicate(
        f"<tau+k^2> ~ {M:g}", (("mod_shell", lo, 2.0 * M),)
    )


def k_band(lo: float, hi: float) -> RegionPredicate:
    return RegionPredicate(f"|k| in [{lo:g},{hi:g})", (("absk", lo, hi),))


def everything() -> RegionPredicate:
    return RegionPredicate("all", ())


def project(u: SpacetimeSpectrum, predicate: RegionPredicate) -> SpacetimeSpectrum:
    """Zero all cells outside the region; idempotent by construction."""
    return u.with_coeff(np.where(predicate.mask(u), u.coeff, 0.0))


def dyadic_shells(u: SpacetimeSpectrum, m_max: float | None = None):
    """[(M, projection onto <tau+k^2> ~ M)] for M = 1, 2, 4, ... up to m_max."""
    if m_max is None:
        m_max = grid_mod_cap(u)
    shells = []
    M = 1.0
    while M <= m_max:
        shells.append((M, project(u, mod_shell(M))))
        M *= 2.0
    return shells


def grid_mod_cap(u: SpacetimeSpectrum) -> float:
    """Smallest dyadic M whose shell family covers every grid cell."""
    k = u.lattice.k
    top = float(_bracket(np.abs(u.tau).max() + k.max() ** 2))
    return 2.0 ** math.ceil(math.log2(max(top, 1.0)))


@dataclass(frozen=True)
class NormSpec:
    """Serializable description of one norm evaluation (for reports/CLI)."""

    family: str  # Hs | Xsb | Ys | Ws | Besov
    s: float
    b: float | None = None
    m_max: float | None = None

    def __post_init__(self):
        if self.family not in ("Hs", "Xsb", "Ys", "Ws", "Besov"):
            raise ValueError(f"unknown norm family {self.family}")
        if self.m_max is not None:
            m = self.m_max
            if m < 1 or 2 ** round(math.log2(m)) != m:
                raise ValueError("m_max must be a power of 2 >= 1")


def ws_norm(u: SpacetimeSpectrum, s: float, m_max: float | None = None) -> float:
    """Glued modulation norm: strong (X^{s,1}) at low modulation, a derivative
    gain (X^{s+1,0}) at high modulation, L1-in-tau control at very high
    modulation, and at s = -1/2 an l1 sum over dyadic modulation shells.

    Single pass over the grid; equivalent to projecting with the region
    predicates and summing the corresponding component norms.
    """
    if not (-0.5 <= s <= -0.25):
        raise ValueError("ws_norm requires -1/2 <= s <= -1/4")
    k = u.lattice.k
    brk = _bracket(k)
    mod = _bracket(u.tau[:, None] + (k * k)[None, :])
    a2 = np.abs(u.coeff) ** 2
    meas = u.dtau / u.lattice.lam
    mask_low = mod <= brk[None, :]
    wk_s = brk ** (2.0 * s)
    x_low = math.sqrt(float(np.sum((a2 * mod**2)[mask_low] * np.broadcast_to(wk_s[None, :], a2.shape)[mask_low])) * meas)
    mask_very = mod > MUCH_GREATER * (brk**2)[None, :]
    l1 = np.sum(np.abs(u.coeff) * mask_very, axis=0) * u.dtau
    y_very = math.sqrt(float(np.sum(wk_s * l1**2)) / u.lattice.lam)
    if s > -0.5:
        wk_s1 = brk ** (2.0 * (s + 1.0))
        x_high = math.sqrt(
            float(np.sum((a2 * ~mask_low) * wk_s1[None, :])) * meas
        )
        return x_low + x_high + y_very
    mask_tail = mod > (brk**2)[None, :]
    mask_mid = ~mask_low & ~mask_tail
    x_mid = math.sqrt(float(np.sum((a2 * mask_mid) * brk[None, :])) * meas)
    # dyadic shells [M, 2M) on the tail, l1 in M up to the cap
    if m_max is None:
        m_max = grid_mod_cap(u)
    tail_w = (a2 * brk[None, :])[mask_tail]
    if tail_w.size:
        midx = np.floor(np.log2(mod[mask_tail])).astype(np.int64)
        keep = midx <= math.floor(math.log2(m_max))
        sums = np.bincount(midx[keep], weights=tail_w[keep])
        shell_sum = float(np.sum(np.sqrt(sums * meas)))
    else:
        shell_sum = 0.0
    return x_low + x_mid + shell_sum + y_very


# Littlewood-Paley bumps reuse the solver's smooth cutoff so the whole
# artifact shares one concrete bump function.
def _psi(x):
    from .solver import bump_psi

    return bump_psi(x)


def lp_bump(j: int, x: np.ndarray) -> np.ndarray:
    """p_0 = psi, p_j = psi(2^-j x) - psi(2^-(j-1) x): smooth dyadic partition."""
    x = np.asarray(x, dtype=np.float64)
    if j == 0:
        return _psi(x)
    return _psi(x / 2.0**j) - _psi(x / 2.0 ** (j - 1))


def _lp_levels(values: np.ndarray) -> int:
    top = float(np.abs(values).max()) if values.size else 1.0
    return max(1, math.ceil(math.log2(max(top, 1.0))) + 2)


def besov_norm(u: SpacetimeSpectrum, s: float, b: float) -> float:
    """l1-in-blocks Besov norm: sum_j sum_q 2^(sj) 2^(bq) ||p_j(k) p_q(tau) u~||_L2."""
    k = u.lattice.k
    tau = u.tau
    jmax = _lp_levels(k)
    qmax = _lp_levels(tau)
    total = 0.0
    abs2 = np.abs(u.coeff) ** 2
    meas = u.dtau / u.lattice.lam
    pj = [lp_bump(j, k) for j in range(jmax + 1)]
    pq = [lp_bump(q, tau) for q in range(qmax + 1)]
    for j in range(jmax + 1):
        wj = pj[j] ** 2
        if not wj.any():
            continue
        for q in range(qmax + 1):
            wq = pq[q] ** 2
            if not wq.any():
                continue
            block = np.sqrt(np.sum(wq[:, None] * wj[None, :] * abs2) * meas)
            total += 2.0 ** (s * j) * 2.0 ** (b * q) * block
    return float(total)


def besov_1d(values: np.ndarray, grid: np.ndarray, sigma: float, measure: float) -> float:
    """1-d Besov B^sigma_{2,1} norm of spectral data on a uniform grid."""
    levels = _lp_levels(grid)
    abs2 = np.abs(values) ** 2
    total = 0.0
    for j in range(levels + 1):
        w = lp_bump(j, grid) ** 2
        total += 2.0 ** (sigma * j) * math.sqrt(float(np.sum(w * abs2) * measure))
    return total


def difference_norm(f: Trajectory, s: float, b: float) -> float:
    """Besov norm via time differences: per spatial block, the L2 norm plus the
    integral of |r|^(-b) ||f_j(t+r) - f_j(t)||_L2 dr/|r| on a geometric r-grid.

    The r-integral is truncated to [dt, 4T] and discretized with ratio 2^(1/4);
    the trajectory is treated as zero outside its grid.
    """
    if not (0.0 < b < 1.0):
        raise ValueError("difference form needs 0 < b < 1")
    k = f.lattice.k
    dt = f.dt
    T = float(f.t[-1] - f.t[0])
    jmax = _lp_levels(k)
    meas_x = 1.0 / f.lattice.lam
    total = 0.0
    # geometric shift grid, snapped to whole steps, deduplicated
    shifts = []
    r = dt
    while r <= 4.0 * T:
        m = max(1, int(round(r / dt)))
        if not shifts or shifts[-1][0] != m:
            shifts.append((m, r))
        r *= 2.0 ** 0.25
    for j in range(jmax + 1):
        pj = lp_bump(j, k)
        if not pj.any():
            continue
        fj = f.coeff * pj[None, :]
        l2 = math.sqrt(float(np.sum(np.abs(fj) ** 2) * dt * meas_x))
        diff_part = 0.0
        prev_edge = dt * 2.0 ** (-0.125)
        for m, r_nom in shifts:
            edge = r_nom * 2.0 ** 0.125
            # exact integral of r^(-1-b) over the geometric cell
            weight = (prev_edge ** (-b) - edge ** (-b)) / b
            prev_edge = edge
            if m >= fj.shape[0]:
                dn2 = 2.0 * float(np.sum(np.abs(fj) ** 2))
            else:
                # f_j vanishes off the grid: overlap + two uncovered stubs
                dn2 = float(
                    np.sum(np.abs(fj[m:] - fj[:-m]) ** 2)
                    + np.sum(np.abs(fj[-m:]) ** 2)
                    + np.sum(np.abs(fj[:m]) ** 2)
                )
            dn = math.sqrt(dn2 * dt * meas_x)
            diff_part += 2.0 * weight * dn  # both signs of r
        total += 2.0 ** (s * j) * (l2 + diff_part)
    return float(total)


def norm_report(u: SpacetimeSpectrum, spec: NormSpec) -> dict:
    """JSON-ready record {family, s, b, lambda, value, shells}."""
    shells = []
    if spec.family == "Hs":
        raise ValueError("Hs norms act on spatial fields; use h_norm")
    if spec.family == "Xsb":
        value = xsb_norm(u, spec.s, spec.b if spec.b is not None else 0.0)
    elif spec.family == "Ys":
        value = ys_norm(u, spec.s)
    elif spec.family == "Ws":
        value = ws_norm(u, spec.s, spec.m_max)
        shells = [
            {"M": M, "value": piece.l2_norm()}
            for M, piece in dyadic_shells(project(u, mod_gt_k2()), spec.m_max)
        ]
    elif spec.family == "Besov":
        value = besov_norm(u, spec.s, spec.b if spec.b is not None else 0.5)
    else:
        raise ValueError(spec.family)
    return {
        "family": spec.family,
        "s": spec.s,
        "b": spec.b,
        "lambda": u.lattice.lam,
        "value": value,
        "shells": shells,
    }


def norm_report_json(u: SpacetimeSpectrum, spec: NormSpec) -> str:
    return json.dumps(norm_report(u, spec), sort_keys=True)
