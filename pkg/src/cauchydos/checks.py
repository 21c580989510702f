"""Named, reproducible pass/fail checks bundling the exact and Monte Carlo routes.

Each check compares an independently computed exact curve against a sampled
estimate (or against a second exact route) and reduces the outcome to a few
metrics with frozen thresholds. A report passes if and only if every metric
with a threshold stays at or below it.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import free_models as fm
from .ensemble import BumpFamily, LatticeBoxSpec, TreeSpec, build_continuum
from .errors import OutsideStripError
from .measures import CauchyKernel, EnergyGrid, grid_convolve
from .spectra import charfn_mc, dos_mc, eigvals_sym, empirical_ids, ids_mc

__all__ = [
    "CHECK_NAMES",
    "CheckReport",
    "check_analytic_strip",
    "check_bethe_dos",
    "check_charfn_identity",
    "check_continuum_ids",
    "check_dos_identity",
    "check_semigroup",
    "run_check",
]

_SE_FLOOR = 1e-15


@dataclass
class CheckReport:
    """Outcome of one named check: metrics, thresholds, and the derived pass flag."""

    name: str
    parameters: dict
    metrics: dict
    thresholds: dict
    passed: bool
    seed: int | None
    runtime_seconds: float = field(default=0.0, compare=False)

    def to_json_dict(self) -> dict:
        """Deterministic serialization; wall time is deliberately excluded."""
        return {
            "name": self.name,
            "parameters": self.parameters,
            "metrics": self.metrics,
            "thresholds": self.thresholds,
            "passed": self.passed,
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True) + "\n"

    def table_row(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        worst = max(
            (self.metrics[k] / self.thresholds[k] if self.thresholds[k] > 0 else math.inf)
            for k in self.thresholds
        ) if self.thresholds else 0.0
        return (f"{self.name:<16} {status}  worst metric/threshold = {worst:.3g}  "
                f"({self.runtime_seconds:.1f} s)")


def _decide(metrics: dict, thresholds: dict) -> bool:
    return all(metrics[k] <= thresholds[k] for k in thresholds)


def _finish(name, parameters, metrics, thresholds, seed, t0,
            threshold_override: float | None) -> CheckReport:
    if threshold_override is not None:
        thresholds = {k: threshold_override for k in thresholds}
    metrics = {k: float(v) for k, v in metrics.items()}
    thresholds = {k: float(v) for k, v in thresholds.items()}
    return CheckReport(
        name=name,
        parameters=parameters,
        metrics=metrics,
        thresholds=thresholds,
        passed=_decide(metrics, thresholds),
        seed=seed,
        runtime_seconds=time.perf_counter() - t0,
    )


def check_semigroup(lam1: float = 0.5, lam2: float = 0.5, d: int = 1,
                    threshold_override: float | None = None) -> CheckReport:
    """Convolving the lam1-smoothed lattice curve with the lam2 kernel must
    reproduce the (lam1+lam2)-smoothed curve; both routes are deterministic."""
    t0 = time.perf_counter()
    model = fm.LatticeFreeModel(d)
    wide = EnergyGrid(-60.0, 60.0, 0.01)
    curve1 = fm.lattice_dos_curve(model, CauchyKernel(lam1), wide)
    convolved = grid_convolve(curve1, CauchyKernel(lam2))
    direct = fm.lattice_dos_curve(model, CauchyKernel(lam1 + lam2), wide)
    window = np.abs(wide.points) <= 8.0 + 1e-12
    sup = float(np.max(np.abs(convolved.values[window] - direct.values[window])))
    return _finish(
        "semigroup",
        {"lam1": lam1, "lam2": lam2, "d": d, "window": 8.0},
        {"sup_dist": sup},
        {"sup_dist": 1e-4},
        None,
        t0,
        threshold_override,
    )


def check_charfn_identity(d: int = 1, lam: float = 1.0, side: int = 512,
                          n_samples: int = 400, t_max: float = 6.0, t_step: float = 0.1,
                          seed: int = 0, psi_offset: int = 0, workers: int | None = None,
                          threshold_override: float | None = None) -> CheckReport:
    """Time domain: the sampled <phi, exp(itH) psi> average must match
    exp(-lam|t|) times the free amplitude, pointwise within max(0.03, 4 SE)."""
    t0 = time.perf_counter()
    spec = LatticeBoxSpec(d, side, "periodic")
    grid = EnergyGrid(0.0, t_max, t_step)
    est = charfn_mc(spec, CauchyKernel(lam), grid, n_samples, seed,
                    phi_site=0, psi_site=psi_offset % spec.n_sites, workers=workers)
    model = fm.LatticeFreeModel(d)
    times = grid.points
    if psi_offset == 0:
        free = np.array([fm.lattice_free_charfn(model, t) for t in times]).astype(complex)
    else:
        offset = np.zeros(d, dtype=int)
        offset[0] = psi_offset
        free = np.array([fm.lattice_offdiag_charfn(model, offset, t) for t in times])
    exact = np.exp(-lam * np.abs(times)) * free
    dev = np.abs(est.mean - exact)
    se = np.maximum(est.std_error, _SE_FLOOR)
    allowed = np.maximum(0.03, 4.0 * se)
    metrics = {
        "excess_ratio": float(np.max(dev / allowed)),
        "max_abs_dev": float(np.max(dev)),
        "max_z": float(np.max(dev / se)),
    }
    return _finish(
        "charfn",
        {"d": d, "lam": lam, "side": side, "n_samples": n_samples,
         "t_max": t_max, "t_step": t_step, "psi_offset": psi_offset},
        metrics,
        {"excess_ratio": 1.0},
        seed,
        t0,
        threshold_override,
    )


def check_dos_identity(d: int = 1, lam: float = 1.0, eta: float = 0.1, side: int = 2000,
                       n_samples: int = 200, grid: EnergyGrid = EnergyGrid(-6.0, 6.0, 0.02),
                       seed: int = 0, estimator: str = "trace", workers: int | None = None,
                       max_z: float = 4.0, sup_tol: float = 0.005,
                       threshold_override: float | None = None) -> CheckReport:
    """Energy domain: the eta-broadened sampled DOS must match the exact curve
    smoothed at lam + eta, pointwise |z| <= 4 and sup distance below tolerance."""
    t0 = time.perf_counter()
    spec = LatticeBoxSpec(d, side, "periodic")
    est = dos_mc(spec, CauchyKernel(lam), grid, n_samples, seed, eta,
                 estimator=estimator, workers=workers)
    exact = fm.lattice_dos_curve(fm.LatticeFreeModel(d), CauchyKernel(lam + eta), grid)
    dev = np.abs(est.mean - exact.values)
    se = np.maximum(est.std_error, _SE_FLOOR)
    z = dev / se
    metrics = {
        "sup_dist": float(np.max(dev)),
        "max_z": float(np.max(z)),
        "z_p95": float(np.percentile(z, 95.0)),
    }
    return _finish(
        "dos",
        {"d": d, "lam": lam, "eta": eta, "side": side, "n_samples": n_samples,
         "grid": [grid.e_min, grid.e_max, grid.step], "estimator": estimator},
        metrics,
        {"sup_dist": sup_tol, "max_z": max_z, "z_p95": 2.5},
        seed,
        t0,
        threshold_override,
    )


def check_bethe_dos(K: int = 2, lam: float = 1.0, eta: float = 0.1, depth: int = 14,
                    n_samples: int = 100, grid: EnergyGrid = EnergyGrid(-2.9, 2.9, 0.02),
                    seed: int = 0, workers: int | None = None,
                    threshold_override: float | None = None) -> CheckReport:
    """Truncated tree: the sampled broadened DOS must match the smeared
    Kesten-McKay law once the exactly known finite-depth bias is subtracted.

    The bias is the difference between the depth-truncated two-pass
    continued-fraction curve and the infinite-tree curve, both at lam + eta.
    """
    t0 = time.perf_counter()
    spec = TreeSpec(K, depth)
    est = dos_mc(spec, CauchyKernel(lam), grid, n_samples, seed, eta,
                 estimator="trace", workers=workers)
    z = grid.points + 1j * (lam + eta)
    truncated = fm.truncated_tree_mean_stieltjes(K, depth, z).imag / np.pi
    km = fm.bethe_dos_curve(fm.BetheFreeModel(K), CauchyKernel(lam + eta), grid)
    bias = truncated - km.values
    dev = np.abs(est.mean - km.values - bias)
    se = np.maximum(est.std_error, _SE_FLOOR)
    metrics = {
        "sup_corrected": float(np.max(dev)),
        "max_z": float(np.max(dev / se)),
        "bias_sup": float(np.max(np.abs(bias))),
    }
    return _finish(
        "bethe",
        {"K": K, "lam": lam, "eta": eta, "depth": depth, "n_samples": n_samples,
         "grid": [grid.e_min, grid.e_max, grid.step]},
        metrics,
        {"sup_corrected": 0.01},
        seed,
        t0,
        threshold_override,
    )


def check_analytic_strip(d: int = 1, lam: float = 1.0, heights=(0.25, 0.5, -0.5),
                         e_points=(-3.0, -1.0, 0.0, 1.5, 3.0), fd_step: float = 1e-4,
                         threshold_override: float | None = None) -> CheckReport:
    """Complex energies inside |Im z| < lam: central-difference Cauchy-Riemann
    residuals of the smoothed-DOS evaluator must vanish to 1e-5, and
    evaluation on or beyond the strip boundary must raise."""
    t0 = time.perf_counter()
    model = fm.LatticeFreeModel(d)
    kernel = CauchyKernel(lam)
    h = fd_step
    worst = 0.0
    for y in heights:
        for e in e_points:
            z = complex(e, y)
            fxp = fm.lattice_dos_smoothed(model, kernel, z + h)
            fxm = fm.lattice_dos_smoothed(model, kernel, z - h)
            fyp = fm.lattice_dos_smoothed(model, kernel, z + 1j * h)
            fym = fm.lattice_dos_smoothed(model, kernel, z - 1j * h)
            df_dx = (fxp - fxm) / (2 * h)
            df_dy = (fyp - fym) / (2 * h)
            res = abs(df_dx.real - df_dy.imag) + abs(df_dx.imag + df_dy.real)
            worst = max(worst, res)
    raises_ok = 0.0
    for bad in (1.05 * lam, -1.05 * lam, lam):
        try:
            fm.lattice_dos_smoothed(model, kernel, complex(0.0, bad))
            raises_ok = 1.0
        except OutsideStripError:
            pass
    metrics = {"max_cr_residual": worst, "outside_strip_misses": raises_ok}
    return _finish(
        "strip",
        {"d": d, "lam": lam, "heights": list(heights), "e_points": list(e_points),
         "fd_step": fd_step},
        metrics,
        {"max_cr_residual": 1e-5, "outside_strip_misses": 0.5},
        None,
        t0,
        threshold_override,
    )


def check_continuum_ids(lam: float = 0.2, box: int = 200, h: float = 0.05,
                        n_samples: int = 100, e_grid: EnergyGrid = EnergyGrid(0.0, 4.0, 0.05),
                        seed: int = 0, workers: int | None = None,
                        threshold_override: float | None = None) -> CheckReport:
    """Continuum: the sample-averaged eigenvalue-counting IDS must match the
    Cauchy-smoothed free IDS, and the disorder-off control must match the
    free square-root law on [0.5, 4]."""
    t0 = time.perf_counter()
    bumps = BumpFamily(box, h)
    e_points = e_grid.points
    est = ids_mc(bumps, CauchyKernel(lam), e_points, n_samples, seed, workers=workers)
    model = fm.ContinuumFreeModel()
    kernel = CauchyKernel(lam)
    exact = np.array([fm.continuum_ids_smoothed(model, kernel, e) for e in e_points])
    sup = float(np.max(np.abs(est.mean - exact)))
    free_vals = eigvals_sym(build_continuum(bumps, None))
    free_pts = np.arange(0.5, 4.0 + 1e-9, 0.05)
    free_emp = empirical_ids(free_vals, float(box)).at(free_pts)
    free_sup = float(np.max(np.abs(free_emp - fm.continuum_free_ids(model, free_pts))))
    metrics = {"sup_dist": sup, "free_sup_dist": free_sup}
    return _finish(
        "continuum-ids",
        {"lam": lam, "box": box, "h": h, "n_samples": n_samples,
         "e_grid": [e_grid.e_min, e_grid.e_max, e_grid.step]},
        metrics,
        {"sup_dist": 0.02, "free_sup_dist": 0.01},
        seed,
        t0,
        threshold_override,
    )


CHECK_NAMES = ("semigroup", "strip", "charfn", "dos", "bethe", "continuum-ids")


def run_check(name: str, seed: int = 0, workers: int | None = None,
              threshold_override: float | None = None) -> CheckReport:
    """Run one named check at its default (acceptance-scale) parameters."""
    if name == "semigroup":
        return check_semigroup(threshold_override=threshold_override)
    if name == "strip":
        return check_analytic_strip(threshold_override=threshold_override)
    if name == "charfn":
        return check_charfn_identity(seed=seed, workers=workers,
                                     threshold_override=threshold_override)
    if name == "dos":
        return check_dos_identity(seed=seed, workers=workers,
                                  threshold_override=threshold_override)
    if name == "bethe":
        return check_bethe_dos(seed=seed, workers=workers,
                               threshold_override=threshold_override)
    if name == "continuum-ids":
        return check_continuum_ids(seed=seed, workers=workers,
                                   threshold_override=threshold_override)
    raise KeyError(f"unknown check {name!r}; known: {', '.join(CHECK_NAMES)}")
