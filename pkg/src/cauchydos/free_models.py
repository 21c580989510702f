"""Clean (disorder-free) reference operators and their exact smoothed spectra.

Three families are covered:

* hypercubic lattice adjacency on Z^d, local spectral measure at the origin;
* the infinite (K+1)-regular tree, whose root measure is the Kesten-McKay law,
  together with its depth-truncated finite counterpart;
* the 1-d negative Laplacian, through its integrated density of states.

The lattice route works in the time domain: the diagonal free amplitude is
<delta_0, exp(itH0) delta_0> = J_0(2t)^d, so the Cauchy-smoothed density is
the Fourier-cosine integral

    p(E) = (1/pi) * int_0^inf exp(-lam t) cos(E t) J_0(2t)^d dt,

which converges for complex E throughout the strip |Im E| < lam.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad

from .errors import OutsideStripError
from .measures import CauchyKernel, EnergyGrid, GridDensity, window_tail_mass

__all__ = [
    "BetheFreeModel",
    "ContinuumFreeModel",
    "LatticeFreeModel",
    "bessel_j",
    "bessel_j_sequence",
    "bethe_dos_curve",
    "bethe_dos_smoothed",
    "continuum_free_ids",
    "continuum_ids_smoothed",
    "kesten_mckay_density",
    "lattice_dos_curve",
    "lattice_dos_smoothed",
    "lattice_free_charfn",
    "lattice_offdiag_charfn",
    "truncated_tree_mean_stieltjes",
    "truncated_tree_root_stieltjes",
]

QUAD_ABS_TOL = 1e-10
TRUNCATION_EPS = 1e-14


@dataclass(frozen=True)
class LatticeFreeModel:
    """Adjacency operator of Z^d; spectrum [-2d, 2d]."""

    d: int

    def __post_init__(self):
        if not (isinstance(self.d, int) and self.d >= 1):
            raise ValueError("lattice dimension must be an integer >= 1")


@dataclass(frozen=True)
class BetheFreeModel:
    """Adjacency operator of the infinite (K+1)-regular tree; spectrum [-2 sqrt K, 2 sqrt K]."""

    K: int

    def __post_init__(self):
        if not (isinstance(self.K, int) and self.K >= 2):
            raise ValueError("branching number K must be an integer >= 2")

    @property
    def band_edge(self) -> float:
        return 2.0 * math.sqrt(self.K)


@dataclass(frozen=True)
class ContinuumFreeModel:
    """The 1-d negative Laplacian -d^2/dx^2; free IDS sqrt(max(E,0))/pi."""


# ---------------------------------------------------------------------------
# Bessel functions of the first kind, integer order.
#
# Three regimes: ascending power series for small argument, Miller backward
# recurrence with sum normalization for moderate argument, and the Hankel
# large-argument asymptotic expansion where it converges below the target.
# Absolute accuracy ~1e-13 on |x| <= 100, n <= 200.
# ---------------------------------------------------------------------------

_SERIES_CUT = 12.0
_ASYMPTOTIC_CUT = 3000.0


def _bessel_series(n: int, x: float) -> float:
    # J_n(x) = sum_k (-1)^k (x/2)^(n+2k) / (k! (n+k)!), x >= 0
    if x == 0.0:
        return 1.0 if n == 0 else 0.0
    log_t0 = n * math.log(x / 2.0) - math.lgamma(n + 1.0)
    if log_t0 < -745.0:
        return 0.0
    term = math.exp(log_t0)
    total = term
    q = -0.25 * x * x
    for k in range(1, 400):
        term *= q / (k * (n + k))
        total += term
        # pure relative cutoff: totals can be arbitrarily tiny for large order
        if abs(term) < 1e-18 * abs(total):
            break
    return total


def _bessel_asymptotic(n: int, x: float) -> float:
    # Hankel expansion: J_n(x) ~ sqrt(2/(pi x)) (P cos chi - Q sin chi),
    # chi = x - (n/2 + 1/4) pi; valid when the terms decay fast (x >> n^2).
    mu = 4.0 * n * n
    p_sum, q_sum = 1.0, 0.0
    term = 1.0
    eight_x = 8.0 * x
    for k in range(1, 30):
        term *= (mu - (2 * k - 1) ** 2) / (k * eight_x)
        if k % 2 == 1:
            q_sum += term if (k // 2) % 2 == 0 else -term
        else:
            p_sum += term if (k // 2) % 2 == 0 else -term
        if abs(term) < 1e-17:
            break
    chi = x - (0.5 * n + 0.25) * math.pi
    return math.sqrt(2.0 / (math.pi * x)) * (p_sum * math.cos(chi) - q_sum * math.sin(chi))


def bessel_j_sequence(nmax: int, x: float) -> np.ndarray:
    """J_0(x), ..., J_nmax(x) for x >= 0 by one downward Miller sweep.

    Normalized with J_0 + 2 sum_k J_{2k} = 1; rescaled on the fly to avoid
    overflow of the unnormalized recurrence.
    """
    if nmax < 0:
        raise ValueError("nmax must be >= 0")
    if x < 0:
        raise ValueError("bessel_j_sequence requires x >= 0")
    out = np.zeros(nmax + 1)
    if x == 0.0:
        out[0] = 1.0
        return out
    top = max(nmax, int(math.ceil(x)))
    start = top + 1 + int(math.ceil(math.sqrt(40.0 * top)))
    if start % 2:
        start += 1
    fp = 0.0
    f = 1e-300
    even_sum = 0.0
    for m in range(start, 0, -1):
        fm = (2.0 * m / x) * f - fp
        fp, f = f, fm
        idx = m - 1
        if idx <= nmax:
            out[idx] = fm
        if idx > 0 and idx % 2 == 0:
            even_sum += 2.0 * fm
        if abs(f) > 1e250:
            f *= 1e-250
            fp *= 1e-250
            even_sum *= 1e-250
            out *= 1e-250
    norm = f + even_sum  # f now holds the unnormalized J_0
    return out / norm


def bessel_j(n: int, x: float) -> float:
    """Bessel function of the first kind J_n(x), integer order n >= 0."""
    if not (isinstance(n, (int, np.integer)) and n >= 0):
        raise ValueError("order n must be a nonnegative integer")
    x = float(x)
    sign = 1.0
    if x < 0:
        x = -x
        if n % 2 == 1:
            sign = -1.0
    if x <= _SERIES_CUT:
        return sign * _bessel_series(int(n), x)
    if x > _ASYMPTOTIC_CUT and n <= 0.2 * math.sqrt(x):
        return sign * _bessel_asymptotic(int(n), x)
    return sign * float(bessel_j_sequence(int(n), x)[n])


def _j0_series_vec(x: np.ndarray) -> np.ndarray:
    q = -0.25 * np.square(x)
    term = np.ones_like(x)
    total = np.ones_like(x)
    for k in range(1, 60):
        term = term * q / (k * k)
        total += term
    return total


def _j0_miller_vec(x: np.ndarray) -> np.ndarray:
    top = int(math.ceil(float(x.max())))
    start = top + 1 + int(math.ceil(math.sqrt(40.0 * top)))
    if start % 2:
        start += 1
    fp = np.zeros_like(x)
    f = np.full_like(x, 1e-300)
    even_sum = np.zeros_like(x)
    for m in range(start, 0, -1):
        fm = (2.0 * m / x) * f - fp
        fp, f = f, fm
        idx = m - 1
        if idx > 0 and idx % 2 == 0:
            even_sum += 2.0 * fm
        if m % 16 == 0:
            big = np.abs(f) > 1e200
            if big.any():
                scale = np.where(big, 1e-200, 1.0)
                f = f * scale
                fp = fp * scale
                even_sum = even_sum * scale
    return f / (f + even_sum)


def _j0_vec(x: np.ndarray) -> np.ndarray:
    """Vectorized J_0 for the grid-curve quadratures (series / batched Miller)."""
    x = np.abs(np.asarray(x, dtype=float))
    out = np.empty_like(x)
    small = x <= _SERIES_CUT
    if small.any():
        out[small] = _j0_series_vec(x[small])
    if (~small).any():
        out[~small] = _j0_miller_vec(x[~small])
    return out


# ---------------------------------------------------------------------------
# Lattice free amplitudes and smoothed density of states.
# ---------------------------------------------------------------------------


def lattice_free_charfn(model: LatticeFreeModel, t: float) -> float:
    """Diagonal free amplitude <delta_0, exp(itH0) delta_0> = J_0(2t)^d."""
    return bessel_j(0, 2.0 * t) ** model.d


def lattice_offdiag_charfn(model: LatticeFreeModel, x, t: float) -> complex:
    """Off-diagonal free amplitude <delta_0, exp(itH0) delta_x> on Z^d.

    Factorizes over axes as prod_j i^{x_j} J_{x_j}(2t); negative offsets are
    handled through J_{-m}(y) = (-1)^m J_m(y).
    """
    x = np.atleast_1d(np.asarray(x, dtype=int))
    if x.size != model.d:
        raise ValueError(f"offset has {x.size} components, model dimension is {model.d}")
    amp = 1.0 + 0.0j
    for m in x:
        a = abs(int(m))
        # i^(-a) J_(-a) = i^a J_a, so only the magnitude of the offset enters
        amp *= (1j ** a) * bessel_j(a, 2.0 * t)
    return amp


def _strip_margin(kernel: CauchyKernel, energy) -> float:
    y = abs(complex(energy).imag)
    if y >= kernel.lam:
        raise OutsideStripError(
            f"|Im E| = {y} is outside the strip of width lambda = {kernel.lam}"
        )
    return kernel.lam - y


def lattice_dos_smoothed(model: LatticeFreeModel, kernel: CauchyKernel, energy):
    """Cauchy-smoothed lattice density of states at a single (possibly complex) energy.

    Evaluates (1/pi) int_0^T exp(-lam t) cos(E t) J_0(2t)^d dt by adaptive
    quadrature, T chosen so the discarded tail is below 1e-14. Complex E is
    accepted for |Im E| < lam and raises OutsideStripError otherwise.
    """
    margin = _strip_margin(kernel, energy)
    tmax = -math.log(TRUNCATION_EPS) / margin
    lam, d = kernel.lam, model.d
    z = complex(energy)

    if z.imag == 0.0:
        e = z.real

        def integrand(t):
            return math.exp(-lam * t) * math.cos(e * t) * bessel_j(0, 2.0 * t) ** d

        val, _ = quad(integrand, 0.0, tmax, epsabs=QUAD_ABS_TOL, epsrel=1e-12, limit=400)
        return val / math.pi

    def integrand_re(t):
        return (math.exp(-lam * t) * bessel_j(0, 2.0 * t) ** d) * (np.cos(z * t)).real

    def integrand_im(t):
        return (math.exp(-lam * t) * bessel_j(0, 2.0 * t) ** d) * (np.cos(z * t)).imag

    re, _ = quad(integrand_re, 0.0, tmax, epsabs=QUAD_ABS_TOL, epsrel=1e-12, limit=400)
    im, _ = quad(integrand_im, 0.0, tmax, epsabs=QUAD_ABS_TOL, epsrel=1e-12, limit=400)
    return complex(re, im) / math.pi


@lru_cache(maxsize=8)
def _gl_nodes(order: int = 16):
    nodes, weights = np.polynomial.legendre.leggauss(order)
    return nodes, weights


def _time_panels(tmax: float, max_freq: float):
    """Shared Gauss-Legendre nodes on [0, tmax], panel width tied to the fastest oscillation."""
    width = min(0.5, 8.0 / max(max_freq, 1.0))
    n_panels = int(math.ceil(tmax / width))
    edges = np.linspace(0.0, tmax, n_panels + 1)
    nodes, weights = _gl_nodes()
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    t = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
    w = (half[:, None] * weights[None, :]).ravel()
    return t, w


def lattice_dos_curve(model: LatticeFreeModel, kernel: CauchyKernel, grid: EnergyGrid) -> GridDensity:
    """Smoothed lattice DOS on a whole grid, one shared-node quadrature.

    The t-nodes (and the J_0(2t)^d samples on them) are reused for every grid
    energy, so the cost is one Bessel sweep plus a dense cosine contraction.
    """
    lam, d = kernel.lam, model.d
    energies = grid.points
    tmax = -math.log(TRUNCATION_EPS) / lam
    max_freq = max(abs(grid.e_min), abs(grid.e_max)) + 2.0 * d
    t, w = _time_panels(tmax, max_freq)
    f = np.exp(-lam * t) * _j0_vec(2.0 * t) ** d * w
    values = np.cos(np.multiply.outer(energies, t)) @ f / np.pi
    half = max(abs(grid.e_min), abs(grid.e_max))
    meta = {"window_tail_mass": window_tail_mass(kernel, half)}
    return GridDensity(grid.e_min, grid.e_max, grid.step, values, None, meta)


# ---------------------------------------------------------------------------
# Bethe lattice: Kesten-McKay law, smoothed curves, truncated-tree transforms.
# ---------------------------------------------------------------------------


def kesten_mckay_density(model: BetheFreeModel, energy):
    """Root spectral density of the infinite (K+1)-regular tree.

    rho(E) = (K+1) sqrt(4K - E^2) / (2 pi ((K+1)^2 - E^2)) on |E| <= 2 sqrt K.
    """
    K = model.K
    e = np.asarray(energy, dtype=float)
    inside = 4.0 * K - np.square(e)
    if e.ndim == 0:
        if inside <= 0:
            return 0.0
        return float((K + 1) * np.sqrt(inside) / (2.0 * np.pi * ((K + 1) ** 2 - e * e)))
    out = np.zeros_like(inside)
    band = inside > 0  # the (K+1)^2 - E^2 pole sits outside the band
    out[band] = ((K + 1) * np.sqrt(inside[band])
                 / (2.0 * np.pi * ((K + 1) ** 2 - np.square(e[band]))))
    return out


def bethe_dos_smoothed(model: BetheFreeModel, kernel: CauchyKernel, energy: float) -> float:
    """Cauchy-smoothed Kesten-McKay density by adaptive quadrature over the band.

    Substituting x = 2 sqrt(K) sin(theta) removes the square-root edges, so the
    integrand is smooth on [-pi/2, pi/2].
    """
    K, lam, e = model.K, kernel.lam, float(energy)
    r = model.band_edge

    def integrand(theta):
        x = r * math.sin(theta)
        co = r * math.cos(theta)
        rho_dx = (K + 1) * co * co / (2.0 * math.pi * ((K + 1) ** 2 - x * x))
        return rho_dx * (lam / math.pi) / (lam * lam + (e - x) ** 2)

    # for small lam the kernel is a narrow spike at sin(theta) = E/r
    points = [math.asin(e / r)] if abs(e) < r else None
    val, _ = quad(integrand, -math.pi / 2, math.pi / 2, points=points,
                  epsabs=QUAD_ABS_TOL, epsrel=1e-12, limit=300)
    return val


def bethe_dos_curve(model: BetheFreeModel, kernel: CauchyKernel, grid: EnergyGrid) -> GridDensity:
    """Smoothed Kesten-McKay density on a grid via shared Gauss-Legendre panels."""
    K, lam = model.K, kernel.lam
    r = model.band_edge
    nodes, weights = _gl_nodes()
    # panel width must resolve the Lorentzian spike (width ~ lam in theta)
    n_panels = max(40, int(math.ceil(math.pi / (2.0 * min(lam, 1.0)))))
    edges = np.linspace(-math.pi / 2, math.pi / 2, n_panels + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    theta = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
    w = (half[:, None] * weights[None, :]).ravel()
    x = r * np.sin(theta)
    co = r * np.cos(theta)
    rho_dx = (K + 1) * co * co / (2.0 * np.pi * ((K + 1) ** 2 - x * x)) * w
    energies = grid.points
    poisson = (lam / np.pi) / (lam * lam + np.square(energies[:, None] - x[None, :]))
    half = max(abs(grid.e_min), abs(grid.e_max))
    meta = {"window_tail_mass": window_tail_mass(kernel, half)}
    return GridDensity(grid.e_min, grid.e_max, grid.step, poisson @ rho_dx, None, meta)


def truncated_tree_root_stieltjes(K: int, depth: int, z):
    """Stieltjes transform at the root of the depth-truncated (K+1)-regular tree.

    Continued fraction built leaves-up: s_0 = -1/z, s_h = 1/(-z - K s_{h-1}),
    root value 1/(-z - (K+1) s_{depth-1}). Valid for Im z > 0.
    """
    z = np.asarray(z, dtype=complex)
    if np.any(z.imag <= 0):
        raise ValueError("truncated_tree_root_stieltjes requires Im z > 0")
    if depth == 0:
        return -1.0 / z
    s = -1.0 / z
    for _ in range(1, depth):
        s = 1.0 / (-z - K * s)
    return 1.0 / (-z - (K + 1) * s)


def truncated_tree_mean_stieltjes(K: int, depth: int, z):
    """Vertex-averaged Stieltjes transform of the depth-truncated tree.

    Uses the two-pass recursion: downward subtree transforms s_h as above, then
    uplink transforms r_l toward the leaves; every vertex of a level shares one
    diagonal value, so the average is an O(depth) scalar computation.
    """
    z = np.asarray(z, dtype=complex)
    if np.any(z.imag <= 0):
        raise ValueError("truncated_tree_mean_stieltjes requires Im z > 0")
    if depth == 0:
        return -1.0 / z
    s = [-1.0 / z]  # s[h]: subtree of height h
    for _ in range(1, depth):
        s.append(1.0 / (-z - K * s[-1]))
    counts = [1] + [(K + 1) * K ** (l - 1) for l in range(1, depth + 1)]
    total = counts[0] / (-z - (K + 1) * s[depth - 1])
    r = 1.0 / (-z - K * s[depth - 1])  # uplink seen from a level-1 vertex
    for level in range(1, depth):
        below = s[depth - level - 1]
        total = total + counts[level] / (-z - K * below - r)
        r = 1.0 / (-z - (K - 1) * below - r)
    total = total + counts[depth] / (-z - r)
    return total / sum(counts)


# ---------------------------------------------------------------------------
# 1-d continuum Laplacian: free and smoothed integrated density of states.
# ---------------------------------------------------------------------------


def continuum_free_ids(model: ContinuumFreeModel, energy):
    """Free IDS of -d^2/dx^2 per unit length: sqrt(max(E, 0)) / pi."""
    e = np.asarray(energy, dtype=float)
    out = np.sqrt(np.clip(e, 0.0, None)) / np.pi
    return float(out) if out.ndim == 0 else out


def continuum_ids_smoothed(model: ContinuumFreeModel, kernel: CauchyKernel, energy: float) -> float:
    """Cauchy-smoothed free IDS at one energy.

    The heavy tail is tamed by E' = E - lam tan(theta), which maps the
    convolution to (1/pi) int_{-pi/2}^{pi/2} N0(E - lam tan theta) d(theta);
    the integrand has a square-root kink where the argument crosses zero, so
    the quadrature interval is split there.
    """
    lam, e = kernel.lam, float(energy)

    def integrand(theta):
        arg = e - lam * math.tan(theta)
        return math.sqrt(arg) / math.pi if arg > 0 else 0.0

    points = []
    # kink: tan(theta) = E / lam
    kink = math.atan2(e, lam)
    if -math.pi / 2 < kink < math.pi / 2:
        points.append(kink)
    val, _ = quad(integrand, -math.pi / 2, math.pi / 2, points=points or None,
                  epsabs=QUAD_ABS_TOL, epsrel=1e-12, limit=200)
    return val / math.pi
