"""Eigensolution, local spectral measures, time evolution, and disorder averaging.

Two independent experimental routes are provided: an energy-domain one built
on dense eigendecomposition (or, for large trees, on the exact leaf-to-root
Green recursion), and a time-domain one built on Chebyshev expansion of
exp(itH). A bug in either is caught by disagreement with the exact curves.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .ensemble import (
    BumpFamily,
    SymmetricOperator,
    TreeSpec,
    build_operator,
    draw_sample,
    site_count,
    tree_level_sizes,
)
from .errors import CapExceededError, EnclosureError, SolverError
from .free_models import bessel_j_sequence
from .measures import CauchyKernel, EnergyGrid, StepIDS, WeightedSpectrum

__all__ = [
    "DENSE_CAP",
    "EigenDecomposition",
    "McEstimate",
    "charfn_mc",
    "chebyshev_evolve",
    "dos_mc",
    "eig_sym",
    "eigvals_sym",
    "empirical_ids",
    "ids_mc",
    "local_spectral_measure",
    "worker_count",
]

DENSE_CAP = 4096


def worker_count() -> int:
    """Thread count for sample-level parallelism, from CAUCHYDOS_THREADS (default 1)."""
    try:
        return max(1, int(os.environ.get("CAUCHYDOS_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class EigenDecomposition:
    """Ascending eigenvalues with orthonormal eigenvectors as matrix columns."""

    values: np.ndarray
    vectors: np.ndarray


def eig_sym(op: SymmetricOperator, cap: int = DENSE_CAP) -> EigenDecomposition:
    """Dense symmetric eigendecomposition (LAPACK), capped at ``cap``."""
    if op.n > cap:
        raise CapExceededError(f"dense eigensolve of n={op.n} exceeds cap {cap}")
    try:
        values, vectors = np.linalg.eigh(op.to_dense())
    except np.linalg.LinAlgError as exc:
        digest = hash(op.vals.tobytes())
        raise SolverError(f"eigensolver failed to converge (matrix hash {digest:#x})") from exc
    return EigenDecomposition(values, vectors)


def eigvals_sym(op: SymmetricOperator, cap: int = DENSE_CAP) -> np.ndarray:
    """Eigenvalues only; cheaper when no spectral weights are needed."""
    if op.n > cap:
        raise CapExceededError(f"dense eigensolve of n={op.n} exceeds cap {cap}")
    try:
        return np.linalg.eigvalsh(op.to_dense())
    except np.linalg.LinAlgError as exc:
        digest = hash(op.vals.tobytes())
        raise SolverError(f"eigensolver failed to converge (matrix hash {digest:#x})") from exc


def local_spectral_measure(eig: EigenDecomposition, site_phi: int, site_psi: int) -> WeightedSpectrum:
    """Point measure at the eigenvalues with weights v_i(phi) * v_i(psi).

    The diagonal case (phi == psi) is a probability measure by completeness.
    """
    n = eig.values.size
    if not (0 <= site_phi < n and 0 <= site_psi < n):
        raise IndexError(f"site indices ({site_phi}, {site_psi}) out of range for n={n}")
    weights = eig.vectors[site_phi, :] * eig.vectors[site_psi, :]
    return WeightedSpectrum(eig.values, weights)


def empirical_ids(eig, volume: float) -> StepIDS:
    """Eigenvalue-counting IDS: jump 1/volume at each eigenvalue, capped at 1."""
    if not (volume > 0):
        raise ValueError("volume must be positive")
    values = eig.values if isinstance(eig, EigenDecomposition) else np.asarray(eig, dtype=float)
    values = np.sort(values)
    cumulative = np.minimum(np.arange(1, values.size + 1) / volume, 1.0)
    return StepIDS(values, cumulative)


# ---------------------------------------------------------------------------
# Chebyshev time evolution.
# ---------------------------------------------------------------------------


def _enclosure(op: SymmetricOperator) -> tuple[float, float]:
    lo, hi = op.gershgorin_interval()
    center = 0.5 * (hi + lo)
    radius = 0.5 * (hi - lo) + 1e-9
    return radius, center


def chebyshev_evolve(op: SymmetricOperator, v: np.ndarray, t: float,
                     bound: tuple[float, float] | None = None) -> np.ndarray:
    """Apply exp(itH) to ``v`` by Chebyshev-Bessel expansion.

    With the spectrum enclosed in [b-a, b+a],

        exp(itH) = exp(ibt) * sum_n (2 - delta_n0) (i sgn t)^n J_n(a|t|) T_n((H-b)/a),

    truncated at the first n > a|t| + 40 with |J_n(a|t|)| < 1e-15. Norm drift
    beyond 1e-6 signals a violated enclosure and raises EnclosureError.
    """
    v = np.asarray(v, dtype=complex)
    if v.shape != (op.n,):
        raise ValueError(f"vector length {v.size} does not match operator size {op.n}")
    if t == 0.0:
        return v.copy()
    a, b = bound if bound is not None else _enclosure(op)
    x = a * abs(t)
    n_hard = int(math.ceil(x + 40))
    # the Bessel tail turns over within ~x^(1/3) orders past n = x, so give the
    # cutoff search enough room before falling back to the full window
    n_max = n_hard + 60 + int(math.ceil(14.0 * x ** (1.0 / 3.0)))
    coeffs = bessel_j_sequence(n_max, x)
    n_cut = n_max
    for n in range(n_hard + 1, n_max + 1):
        if abs(coeffs[n]) < 1e-15:
            n_cut = n
            break
    csr = op.to_csr()
    inv_a = 1.0 / a
    shift = b * inv_a
    unit = 1j if t > 0 else -1j
    t_prev = v
    t_cur = csr.dot(v) * inv_a - shift * v
    out = coeffs[0] * t_prev + (2.0 * unit * coeffs[1]) * t_cur
    phase_n = unit
    for n in range(2, n_cut + 1):
        phase_n = phase_n * unit
        t_next = 2.0 * (csr.dot(t_cur) * inv_a - shift * t_cur) - t_prev
        t_prev, t_cur = t_cur, t_next
        c = coeffs[n]
        if c != 0.0:
            out += (2.0 * phase_n * c) * t_cur
    out *= np.exp(1j * b * t)
    norm_in = np.linalg.norm(v)
    drift = abs(np.linalg.norm(out) - norm_in)
    if drift > 1e-6 * max(norm_in, 1.0):
        raise EnclosureError(
            f"norm drift {drift:.3e} after evolving t={t}; spectral enclosure violated"
        )
    return out


# ---------------------------------------------------------------------------
# Monte Carlo estimators.
# ---------------------------------------------------------------------------


@dataclass
class McEstimate:
    """Pointwise sample mean and standard error of a disorder average."""

    x: np.ndarray
    mean: np.ndarray
    std_error: np.ndarray | None
    n_samples: int
    master_seed: int

    def to_csv(self, path) -> None:
        """Write ``x,mean,mean_im,std_error,n_samples`` rows (SE omitted for 1 sample)."""
        fmt = "%.12g"
        mean_im = self.mean.imag if np.iscomplexobj(self.mean) else np.zeros_like(self.x)
        mean_re = self.mean.real if np.iscomplexobj(self.mean) else self.mean
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            if self.std_error is None:
                fh.write("x,mean,mean_im,n_samples\n")
                for xi, mr, mi in zip(self.x, mean_re, mean_im):
                    fh.write(f"{fmt % xi},{fmt % mr},{fmt % mi},{self.n_samples}\n")
            else:
                fh.write("x,mean,mean_im,std_error,n_samples\n")
                for xi, mr, mi, se in zip(self.x, mean_re, mean_im, self.std_error):
                    fh.write(f"{fmt % xi},{fmt % mr},{fmt % mi},{fmt % se},{self.n_samples}\n")


def _run_samples(per_sample, n_samples: int, workers: int | None):
    """Evaluate per_sample(i) for i in range(n_samples) into index order.

    Results are reduced in index order afterwards, so the outcome is
    bit-identical no matter how many workers ran or how they were scheduled.
    Failures are re-raised annotated with the offending sample index.
    """

    def guarded(i):
        try:
            return per_sample(i)
        except Exception as exc:
            try:
                raise type(exc)(f"[sample {i}] {exc}") from exc
            except TypeError:
                raise RuntimeError(f"[sample {i}] {exc}") from exc

    workers = worker_count() if workers is None else max(1, workers)
    results = [None] * n_samples
    if workers == 1 or n_samples == 1:
        for i in range(n_samples):
            results[i] = guarded(i)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for i, res in enumerate(pool.map(guarded, range(n_samples))):
                results[i] = res
    return np.array(results)


def _reduce(x: np.ndarray, curves: np.ndarray, n_samples: int, master_seed: int) -> McEstimate:
    mean = curves.mean(axis=0)
    if n_samples >= 2:
        if np.iscomplexobj(curves):
            var = curves.real.var(axis=0, ddof=1) + curves.imag.var(axis=0, ddof=1)
        else:
            var = curves.var(axis=0, ddof=1)
        se = np.sqrt(var / n_samples)
    else:
        se = None
    return McEstimate(x, mean, se, n_samples, master_seed)


def _operator_dim(model_spec) -> int:
    """Matrix dimension (mesh count for continuum, site count otherwise)."""
    if isinstance(model_spec, BumpFamily):
        return model_spec.n_mesh
    return site_count(model_spec)


def _broadened_from_values(values: np.ndarray, energies: np.ndarray, eta: float,
                           weights: np.ndarray | None = None) -> np.ndarray:
    """sum_i w_i * psi_eta(E - E_i), with w_i = 1/n when weights is None."""
    poisson = (eta / np.pi) / (eta * eta + np.square(energies[:, None] - values[None, :]))
    if weights is None:
        return poisson.sum(axis=1) / values.size
    return poisson @ weights


def _tree_green_diagonals(spec: TreeSpec, omegas: np.ndarray, z: np.ndarray,
                          mode: str) -> np.ndarray:
    """Broadened local density on the truncated tree by leaf-to-root recursion.

    mode="site" returns (1/pi) Im G_00 (root); mode="trace" the vertex average.
    Identical to the dense-eigendecomposition route by the Poisson-kernel
    identity, but O(N) per energy, so depth 14 stays tractable.
    """
    sizes = tree_level_sizes(spec)
    offsets = np.concatenate(([0], np.cumsum(sizes)))
    depth = spec.depth
    K = spec.K
    if depth == 0:
        g = 1.0 / (omegas[0] - z)
        return g.imag / np.pi
    down = [None] * (depth + 1)
    g = 1.0 / (omegas[offsets[depth]:offsets[depth + 1]][:, None] - z[None, :])
    down[depth] = g
    for level in range(depth - 1, 0, -1):
        om = omegas[offsets[level]:offsets[level + 1]]
        child_sum = down[level + 1].reshape(sizes[level], K, -1).sum(axis=1)
        down[level] = 1.0 / (om[:, None] - z[None, :] - child_sum)
    root_sum = down[1].sum(axis=0)
    g_root = 1.0 / (omegas[0] - z - root_sum)
    if mode == "site":
        return g_root.imag / np.pi
    total = g_root.copy()
    up = 1.0 / (omegas[0] - z[None, :] - (root_sum[None, :] - down[1]))
    for level in range(1, depth):
        om = omegas[offsets[level]:offsets[level + 1]]
        children = down[level + 1].reshape(sizes[level], K, -1)
        child_sum = children.sum(axis=1)
        g_level = 1.0 / (om[:, None] - z[None, :] - child_sum - up)
        total += g_level.sum(axis=0)
        up = (1.0 / (om[:, None, None] - z[None, None, :]
                     - (child_sum[:, None, :] - children) - up[:, None, :]))
        up = up.reshape(sizes[level + 1], -1)
    om = omegas[offsets[depth]:offsets[depth + 1]]
    g_leaf = 1.0 / (om[:, None] - z[None, :] - up)
    total += g_leaf.sum(axis=0)
    return total.imag / np.pi / spec.n_vertices


_TREE_CHUNK = 48


def dos_mc(model_spec, kernel: CauchyKernel | None, grid: EnergyGrid, n_samples: int,
           master_seed: int, broaden: float, estimator: str = "trace",
           workers: int | None = None, cap: int = DENSE_CAP) -> McEstimate:
    """Disorder-averaged broadened local density of states on a grid.

    Per sample the spectrum is broadened with the Cauchy kernel of scale
    ``broaden``; the expectation then equals the exact free curve smoothed at
    scale lam + broaden. estimator="trace" averages the local measure over all
    sites (unbiased for translation-invariant boxes, far lower variance);
    "site" uses the single-site measure at the origin/root. Trees larger than
    the dense cap are handled by the exact Green recursion instead.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if not (broaden > 0):
        raise ValueError("broaden must be > 0 for density estimates; "
                         "use ids_mc for raw IDS accumulation")
    if estimator not in ("trace", "site"):
        raise ValueError(f"unknown estimator {estimator!r}")
    energies = grid.points
    n_sites = site_count(model_spec)
    dim = _operator_dim(model_spec)
    tree_route = isinstance(model_spec, TreeSpec) and dim > cap
    if dim > cap and not tree_route:
        raise CapExceededError(
            f"dense eigensolve of n={dim} exceeds cap {cap}; use the charfn route"
        )

    if tree_route:
        z = energies + 1j * broaden

        def per_sample(i):
            omegas = draw_sample(kernel, n_sites, master_seed, i).omegas
            out = np.empty(energies.size)
            for start in range(0, energies.size, _TREE_CHUNK):
                sl = slice(start, min(start + _TREE_CHUNK, energies.size))
                out[sl] = _tree_green_diagonals(model_spec, omegas, z[sl], estimator)
            return out

    elif estimator == "trace":

        def per_sample(i):
            sample = draw_sample(kernel, n_sites, master_seed, i)
            values = eigvals_sym(build_operator(model_spec, sample), cap=cap)
            return _broadened_from_values(values, energies, broaden)

    else:

        def per_sample(i):
            sample = draw_sample(kernel, n_sites, master_seed, i)
            eig = eig_sym(build_operator(model_spec, sample), cap=cap)
            meas = local_spectral_measure(eig, 0, 0)
            return _broadened_from_values(meas.points, energies, broaden,
                                          weights=meas.weights.real)

    curves = _run_samples(per_sample, n_samples, workers)
    return _reduce(energies, curves, n_samples, master_seed)


def ids_mc(model_spec, kernel: CauchyKernel | None, e_points: np.ndarray, n_samples: int,
           master_seed: int, volume: float | None = None, workers: int | None = None,
           cap: int = DENSE_CAP) -> McEstimate:
    """Disorder-averaged eigenvalue-counting IDS evaluated at fixed energies.

    ``volume`` defaults to the physical box size: bump count for continuum
    meshes, site count for lattices.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    e_points = np.asarray(e_points, dtype=float)
    n_sites = site_count(model_spec)
    if _operator_dim(model_spec) > cap:
        raise CapExceededError(
            f"dense eigensolve of n={_operator_dim(model_spec)} exceeds cap {cap}; "
            "use the charfn route"
        )
    if volume is None:
        volume = float(model_spec.length if isinstance(model_spec, BumpFamily) else n_sites)

    def per_sample(i):
        sample = draw_sample(kernel, n_sites, master_seed, i)
        values = eigvals_sym(build_operator(model_spec, sample), cap=cap)
        return empirical_ids(values, volume).at(e_points)

    curves = _run_samples(per_sample, n_samples, workers)
    return _reduce(e_points, curves, n_samples, master_seed)


def charfn_mc(model_spec, kernel: CauchyKernel | None, t_grid: EnergyGrid, n_samples: int,
              master_seed: int, phi_site: int = 0, psi_site: int = 0,
              workers: int | None = None) -> McEstimate:
    """Disorder average of <phi, exp(itH) psi> on a uniform t-grid.

    Each sample is evolved by chained Chebyshev steps with its own Gershgorin
    enclosure; the t=0 entry is <phi, psi> exactly, with zero variance.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    times = t_grid.points
    n_sites = site_count(model_spec)
    dim = _operator_dim(model_spec)
    if not (0 <= phi_site < dim and 0 <= psi_site < dim):
        raise IndexError(f"phi/psi sites out of range for n={dim}")
    steps = np.diff(times)

    def per_sample(i):
        sample = draw_sample(kernel, n_sites, master_seed, i)
        op = build_operator(model_spec, sample)
        bound = _enclosure(op)
        v = np.zeros(dim, dtype=complex)
        v[psi_site] = 1.0
        out = np.empty(times.size, dtype=complex)
        if times[0] != 0.0:
            v = chebyshev_evolve(op, v, float(times[0]), bound)
        out[0] = v[phi_site]
        for j, dt in enumerate(steps, start=1):
            v = chebyshev_evolve(op, v, float(dt), bound)
            out[j] = v[phi_site]
        return out

    curves = _run_samples(per_sample, n_samples, workers)
    return _reduce(times, curves, n_samples, master_seed)
