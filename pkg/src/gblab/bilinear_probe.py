"""Empirical probes of the key bilinear estimate: the smoothed bilinear image
with its three conjugation patterns, the interaction-region classifier, ratio
sweeps against the predicted lambda-loss factors, and the L4/dispersive-norm
ratio probe."""

from __future__ import annotations

import json
import math
import zlib
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .lattice import (
    LatticeError,
    SpacetimeSpectrum,
    make_lattice,
    make_tau_grid,
)
from .norms import ws_norm, xsb_norm
from .reduction import omega_multiplier
from .resonance import ResonancePoint

TWO_PI = 2.0 * math.pi

KINDS = ("u vbar", "u v", "ubar vbar")

LOW_CUT = 2.0  # |k| at or below this counts as the low-frequency region
MUCH = 4.0  # ratio implementing "much smaller/larger"
_SPARSE_LIMIT = 64


def _populated(coeff: np.ndarray):
    scale = float(np.abs(coeff).max())
    if scale == 0.0:
        return np.empty((0, 2), dtype=np.int64), 0.0
    idx = np.argwhere(np.abs(coeff) > 1e-15 * scale)
    return idx, scale


def _center_slice(full: np.ndarray, n_tau: int, modes: int) -> np.ndarray:
    half_t = (n_tau - 1) // 2
    half_k = (modes - 1) // 2
    c_t, c_k = n_tau - 1, modes - 1
    return full[c_t - half_t : c_t + half_t + 1, c_k - half_k : c_k + half_k + 1]


def _sparse_convolve(sparse: np.ndarray, dense: np.ndarray, idx) -> np.ndarray:
    """Convolution truncated to the centered window, accumulating shifted
    slices of the dense factor; allocates only the output array."""
    n_tau, modes = dense.shape
    half_t, half_k = (n_tau - 1) // 2, (modes - 1) // 2
    win_t0 = n_tau - 1 - half_t  # global index of the output's first row
    win_k0 = modes - 1 - half_k
    out = np.zeros((n_tau, modes), dtype=np.complex128)
    for it, ik in idx:
        a = sparse[it, ik]
        r0 = win_t0 - it
        rr0, rr1 = max(r0, 0), min(r0 + n_tau, n_tau)
        if rr0 >= rr1:
            continue
        c0 = win_k0 - ik
        cc0, cc1 = max(c0, 0), min(c0 + modes, modes)
        if cc0 >= cc1:
            continue
        out[rr0 - r0 : rr0 - r0 + (rr1 - rr0), cc0 - c0 : cc0 - c0 + (cc1 - cc0)] += (
            a * dense[rr0:rr1, cc0:cc1]
        )
    return out


def _convolve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Plain 2-d convolution, truncated back to the common centered grid."""
    idx_a, _ = _populated(a)
    idx_b, _ = _populated(b)
    n_tau, modes = a.shape
    if min(idx_a.shape[0], idx_b.shape[0]) <= _SPARSE_LIMIT:
        if idx_a.shape[0] <= idx_b.shape[0]:
            return _sparse_convolve(a, b, idx_a)
        return _sparse_convolve(b, a, idx_b)
    full = fftconvolve(a, b, mode="full")
    return _center_slice(full, n_tau, modes)


def bilinear_image(
    u: SpacetimeSpectrum, v: SpacetimeSpectrum, kind: str
) -> SpacetimeSpectrum:
    """Space-time convolution with the kind's conjugation pattern, then the
    smoothing multiplier m(k) and the inverse modulation weight <tau+k^2>^-1."""
    if kind not in KINDS:
        raise LatticeError(f"unknown bilinear kind {kind}")
    if not u.lattice.same_grid(v.lattice) or u.tau.shape != v.tau.shape:
        raise LatticeError("bilinear image needs matching grids")
    if abs(u.dtau - v.dtau) > 1e-12 * u.dtau:
        raise LatticeError("bilinear image needs matching tau spacings")
    scale = u.dtau / (TWO_PI * u.lattice.lam)
    if kind == "u v":
        raw = _convolve(u.coeff, v.coeff)
    elif kind == "ubar vbar":
        raw = np.conj(_convolve(u.coeff, v.coeff))[::-1, ::-1]
    else:
        # cross term: sum over x of u[x] conj(v[x - d]) = conv(u, flip(conj v))
        raw = _convolve(u.coeff, np.conj(v.coeff)[::-1, ::-1])
    raw = raw * scale
    m = omega_multiplier(u.lattice)
    mod = np.sqrt(1.0 + (u.tau[:, None] + (u.lattice.k ** 2)[None, :]) ** 2)
    return u.with_coeff(raw * m[None, :] / mod)


def region_classify(p: ResonancePoint, kind: str = "u vbar") -> tuple[int, str]:
    """Interaction region 0..4 from the frequency geometry (partition of k != 0,
    ties toward the lower index), with a modulation-balance subtag."""
    if kind not in KINDS:
        raise LatticeError(f"unknown bilinear kind {kind}")
    k, k1 = p.k, p.k1
    if k == 0.0:
        raise LatticeError("regions partition the output frequencies k != 0")
    d = k1 - k
    if min(abs(k1), abs(d)) <= LOW_CUT:
        return 0, ""
    if abs(k) <= 1.0:
        region = 4
    elif MUCH * abs(k) < min(abs(k1), abs(d)):
        region = 3
    elif abs(k1) <= abs(d):
        region = 1
    else:
        region = 2
    if kind == "ubar vbar":
        mu = abs(-p.tau1 + k1 * k1)
    else:
        mu = abs(p.tau1 + k1 * k1)
    if kind == "u v":
        mv = abs((p.tau - p.tau1) + (k - k1) ** 2)
    else:
        mv = abs((p.tau1 - p.tau) + (k1 - k) ** 2)
    if region == 1:
        tag = "11" if mv >= abs(d) else ("12" if mu >= abs(k1) else "13")
    elif region == 2:
        tag = "21" if mu >= abs(k1) else ("22" if mv >= abs(d) else "23")
    elif region == 3:
        tag = "31" if mu >= abs(k1) else ("32" if mv >= abs(d) else "33")
    else:
        N = abs(k)
        if mu >= abs(k1):
            tag = "41"
        elif mu >= N * abs(k1):
            tag = "41p"
        elif mv >= abs(d):
            tag = "42"
        elif mv >= N * abs(d):
            tag = "42p"
        else:
            tag = "43"
    return region, tag


def bilinear_image_in_region(
    u: SpacetimeSpectrum, v: SpacetimeSpectrum, kind: str, region: int
) -> SpacetimeSpectrum:
    """Bilinear image with the input-pair sum restricted to one interaction
    region (frequency geometry only; regions partition the output k != 0).

    Direct per-pair evaluation, intended for small grids and reassembly
    checks; the unrestricted operator is the fast path.
    """
    if kind not in KINDS:
        raise LatticeError(f"unknown bilinear kind {kind}")
    n_tau, modes = u.coeff.shape
    half_t = (n_tau - 1) // 2
    J = u.lattice.half_modes
    lam = u.lattice.lam
    out = np.zeros_like(u.coeff)
    for jk in range(modes):
        k = (jk - J) / lam
        if k == 0.0:
            continue
        for j1 in range(modes):
            k1 = (j1 - J) / lam
            r, _ = region_classify(ResonancePoint(0.0, k, 0.0, k1), kind)
            if r != region:
                continue
            if kind == "u v":
                j2 = (jk - J) - (j1 - J) + J
            else:
                j2 = (j1 - J) - (jk - J) + J
            if not (0 <= j2 < modes):
                continue
            if kind == "ubar vbar":
                ju = -(j1 - J) + J
                if not (0 <= ju < modes):
                    continue
                a = np.conj(u.coeff[::-1, ju])
            else:
                a = u.coeff[:, j1]
            for it in range(n_tau):
                d = it - half_t
                s = 0.0 + 0.0j
                for i1 in range(n_tau):
                    if kind == "u v":
                        i2 = d - (i1 - half_t) + half_t
                    else:
                        i2 = (i1 - half_t) - d + half_t
                    if 0 <= i2 < n_tau:
                        b = v.coeff[i2, j2]
                        if kind != "u v":
                            b = np.conj(b)
                        s += a[i1] * b
                out[it, jk] += s
    out *= u.dtau / (TWO_PI * lam)
    m = omega_multiplier(u.lattice)
    mod = np.sqrt(1.0 + (u.tau[:, None] + (u.lattice.k ** 2)[None, :]) ** 2)
    return u.with_coeff(out * m[None, :] / mod)


def loss_factor(s: float, lam: float) -> float:
    """Predicted worst-kind loss: lam^(-2s-1/2) below s=-1/4, sqrt(log) at -1/4."""
    if not (-0.5 <= s <= -0.25):
        raise ValueError("loss factor defined for -1/2 <= s <= -1/4")
    if s == -0.25:
        return math.sqrt(math.log(1.0 + lam))
    return lam ** (-2.0 * s - 0.5)


def _probe_grids(lam: float, generator: str):
    if generator == "adversarial-omega4":
        n1 = max(8.0, 0.625 * lam)
        K = n1 + 2.0
        tau_max = n1 * n1 + 4.0 * n1 + 50.0
        dtau = max(0.25, tau_max / 1600.0)
    else:
        n1 = 8.0
        K = 4.0
        tau_max = 60.0
        dtau = 0.5
    lattice = make_lattice(lam, K)
    tau = make_tau_grid(tau_max, dtau)
    return lattice, tau, n1


def _cluster(lattice, tau, center_k, rng, n_cells=3, amp=1.0):
    """A few unit cells hugging the dispersive curve near center_k."""
    coeff = np.zeros((tau.size, lattice.modes), dtype=np.complex128)
    j0 = round(center_k * lattice.lam)
    for step in range(n_cells):
        j = j0 + step
        if abs(j) > lattice.half_modes:
            continue
        k = j / lattice.lam
        i_tau = int(np.argmin(np.abs(tau + k * k)))
        phase = rng.uniform(0.0, TWO_PI)
        coeff[i_tau, j + lattice.half_modes] = amp * np.exp(1j * phase)
    return SpacetimeSpectrum(lattice, tau, coeff)


def _dense_random(lattice, tau, rng, n_bumps=6):
    """Random smooth continuum profile (sum of Gaussian bumps hugging the
    dispersive curve) sampled on the lattice: refining lambda then converges
    to a fixed function, so norm ratios admit a lambda -> infinity limit."""
    k = lattice.k
    coeff = np.zeros((tau.size, lattice.modes), dtype=np.complex128)
    for _ in range(n_bumps):
        kc = rng.uniform(-2.5, 2.5)
        tc = -kc * kc + rng.uniform(-5.0, 5.0)
        sk = rng.uniform(0.4, 1.5)
        st = rng.uniform(0.8, 4.0)
        amp = (rng.standard_normal() + 1j * rng.standard_normal()) / math.sqrt(2)
        gk = np.exp(-((k - kc) ** 2) / (2 * sk * sk))
        gt = np.exp(-((tau - tc) ** 2) / (2 * st * st))
        coeff += amp * np.outer(gt, gk)
    return SpacetimeSpectrum(lattice, tau, coeff)


def generate_pair(kind: str, generator: str, lam: float, rng):
    """Input pair for one probe trial; adversarial clusters are placed so the
    kind's product lands in the low-frequency band [1/lam, 1]."""
    lattice, tau, n1 = _probe_grids(lam, generator)
    if generator == "random":
        return _dense_random(lattice, tau, rng), _dense_random(lattice, tau, rng)
    if generator == "adversarial-omega4":
        u = _cluster(lattice, tau, n1, rng)
        v_center = n1 if kind == "u vbar" else -n1
        v = _cluster(lattice, tau, v_center + 1.0 / lam, rng)
        return u, v
    raise LatticeError(f"unknown generator {generator}")


def per_region_pairs(lam: float, rng):
    """Cluster geometries steering the product into each nontrivial region."""
    lattice = make_lattice(lam, 40.0)
    tau = make_tau_grid(1800.0, 2.0)
    n = 24.0
    geometries = {
        1: (3.0, 3.0 - n),        # small k1, |k1-k| ~ |k| ~ n
        2: (n, -3.0),             # |k1| ~ |k|, small difference frequency
        3: (n, n - 6.0),          # output at 6: 1 << |k| << n
        4: (n, n - 0.5),          # output inside [1/lam, 1]
    }
    out = {}
    for region, (cu, cv) in geometries.items():
        u = _cluster(lattice, tau, cu, rng)
        v = _cluster(lattice, tau, cv, rng)
        out[region] = (u, v)
    return out


@dataclass(frozen=True)
class ProbeReport:
    kind: str
    generator: str
    s: float
    lam: float
    ratios: list
    max_ratio: float
    skipped: int
    seed: int

    def to_json(self) -> str:
        return json.dumps(
            {
                "kind": self.kind,
                "generator": self.generator,
                "s": self.s,
                "lambda": self.lam,
                "ratios": self.ratios,
                "max_ratio": self.max_ratio,
                "skipped": self.skipped,
                "seed": self.seed,
            },
            sort_keys=True,
        )


def ratio_probe(
    s: float,
    lam: float,
    kind: str,
    generator: str = "random",
    n_trials: int = 6,
    seed: int = 2024,
) -> ProbeReport:
    """Ratio ||image||_W / (||u||_W ||v||_W) over seeded trials."""
    tag = zlib.crc32(f"{kind}|{generator}|{s}|{lam}".encode())
    rng = np.random.default_rng(seed + tag)
    ratios = []
    skipped = 0
    for _ in range(n_trials):
        if generator == "per-region":
            pairs = list(per_region_pairs(lam, rng).values())
        else:
            pairs = [generate_pair(kind, generator, lam, rng)]
        for u, v in pairs:
            nu, nv = ws_norm(u, s), ws_norm(v, s)
            if nu == 0.0 or nv == 0.0:
                skipped += 1
                continue
            img = bilinear_image(u, v, kind)
            ratios.append(ws_norm(img, s) / (nu * nv))
    return ProbeReport(
        kind=kind,
        generator=generator,
        s=s,
        lam=lam,
        ratios=ratios,
        max_ratio=max(ratios) if ratios else float("nan"),
        skipped=skipped,
        seed=seed,
    )


def fitted_slope(lams, values) -> float:
    """Least-squares slope of log(value) against log(lam)."""
    x = np.log(np.asarray(lams, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    x = x - x.mean()
    return float(np.sum(x * (y - y.mean())) / np.sum(x * x))


def slope_sweep(
    kind: str,
    s: float,
    lams=(4.0, 16.0, 64.0),
    generator: str = "adversarial-omega4",
    n_trials: int = 4,
    seed: int = 2024,
) -> dict:
    """Max-ratio per lambda and the fitted log-log slope, JSON-ready."""
    reports = [
        ratio_probe(s, lam, kind, generator=generator, n_trials=n_trials, seed=seed)
        for lam in lams
    ]
    maxes = [r.max_ratio for r in reports]
    return {
        "kind": kind,
        "generator": generator,
        "s": s,
        "lambdas": list(lams),
        "max_ratios": maxes,
        "slope": fitted_slope(lams, maxes),
        "seed": seed,
        "ratios": [r.ratios for r in reports],
    }


def physical_samples(u: SpacetimeSpectrum, oversample: int = 4):
    """Physical-space samples on the dual (t, x) grid, t covering one period
    2*pi/dtau; the factor-4 oversampling makes |u|^4 quadrature alias-free."""
    n_tau, modes = u.coeff.shape
    n_t = oversample * n_tau
    n_x = oversample * modes
    spec = np.zeros((n_t, n_x), dtype=np.complex128)
    half_t = (n_tau - 1) // 2
    J = u.lattice.half_modes
    # place (tau, k) data on the padded FFT grid
    rows = np.concatenate([u.coeff[half_t:], np.zeros((n_t - n_tau, modes)), u.coeff[:half_t]])
    spec[:, : J + 1] = rows[:, J:]
    spec[:, n_x - J :] = rows[:, :J]
    phys = np.fft.ifft2(spec)
    # measure factors: dtau sum over tau and 1/lam sum over k, one 1/sqrt(2pi) each
    phys *= (n_t * u.dtau / math.sqrt(TWO_PI)) * (n_x / (math.sqrt(TWO_PI) * u.lattice.lam))
    dt = TWO_PI / (n_t * u.dtau)
    dx = u.lattice.circumference / n_x
    return phys, dt, dx


def l4_ratio(u: SpacetimeSpectrum) -> float:
    """||u||_{L4_{t,x}} / ||u||_{X^{0,3/8}} via grid quadrature of the inverse
    transform over one time period."""
    denom = xsb_norm(u, 0.0, 0.375)
    if denom == 0.0:
        return float("nan")
    phys, dt, dx = physical_samples(u)
    l4 = (np.sum(np.abs(phys) ** 4) * dt * dx) ** 0.25
    return float(l4 / denom)
