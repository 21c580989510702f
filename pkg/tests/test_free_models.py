import math

import numpy as np
import pytest
from scipy.integrate import quad

from cauchydos.errors import OutsideStripError
from cauchydos.free_models import (
    BetheFreeModel,
    ContinuumFreeModel,
    LatticeFreeModel,
    bessel_j,
    bessel_j_sequence,
    bethe_dos_curve,
    bethe_dos_smoothed,
    continuum_free_ids,
    continuum_ids_smoothed,
    kesten_mckay_density,
    lattice_dos_curve,
    lattice_dos_smoothed,
    lattice_free_charfn,
    lattice_offdiag_charfn,
    truncated_tree_mean_stieltjes,
    truncated_tree_root_stieltjes,
)
from cauchydos.measures import CauchyKernel, EnergyGrid

J0_FIRST_ZERO = 2.404825557695773

# frozen against an independent high-precision series evaluation (mpmath, 40 digits)
BESSEL_ORACLE = {
    (0, 1.0): 0.76519768655796655,
    (1, 1.0): 0.44005058574493352,
    (0, 4.0): -0.39714980986384737,
    (0, 2.0): 0.22389077914123567,
    (5, 0.9): 0.00014865802167459598,
    (2, 7.3): -0.26559491188343688,
    (10, 40.5): 0.12656702528995299,
    (0, 99.5): -0.019543066407440784,
    (37, 25.0): 3.5561707400457492e-05,
    (200, 100.0): 2.0594424939411679e-41,
    (0, 1500.25): -0.012400451715742773,
    (3, 5000.5): 0.011189140292646451,
}


def test_bessel_small_order_values():
    assert bessel_j(0, 0.0) == 1.0
    assert bessel_j(1, 0.0) == 0.0
    assert abs(bessel_j(0, J0_FIRST_ZERO)) < 1e-12


def test_bessel_against_high_precision_oracle():
    for (n, x), expected in BESSEL_ORACLE.items():
        assert bessel_j(n, x) == pytest.approx(expected, abs=1e-12), (n, x)


def test_bessel_negative_argument_parity():
    assert bessel_j(2, -7.3) == bessel_j(2, 7.3)
    assert bessel_j(1, -1.0) == -bessel_j(1, 1.0)


def test_bessel_rejects_negative_order():
    with pytest.raises(ValueError):
        bessel_j(-1, 1.0)


def test_bessel_recurrence_relative_residual():
    worst = 0.0
    for x in np.arange(0.1, 50.0, 1.7):
        seq = [bessel_j(n, float(x)) for n in range(52)]
        for n in range(1, 51):
            lhs = seq[n - 1] + seq[n + 1]
            rhs = (2.0 * n / x) * seq[n]
            scale = max(abs(seq[n - 1]), abs(rhs), 1e-300)
            worst = max(worst, abs(lhs - rhs) / scale)
    assert worst < 1e-10


def test_bessel_sequence_matches_scalar():
    for x in (0.0, 0.4, 3.0, 15.0, 80.0):
        seq = bessel_j_sequence(12, x)
        direct = [bessel_j(n, x) for n in range(13)]
        assert np.allclose(seq, direct, atol=1e-13)


def test_lattice_free_charfn_values():
    assert lattice_free_charfn(LatticeFreeModel(3), 0.0) == 1.0
    assert lattice_free_charfn(LatticeFreeModel(2), 0.5) == pytest.approx(
        0.58552749951366402, abs=1e-12)
    assert abs(lattice_free_charfn(LatticeFreeModel(1), J0_FIRST_ZERO / 2.0)) < 1e-12


def test_lattice_offdiag_reduces_to_diagonal():
    m = LatticeFreeModel(2)
    for t in (0.0, 0.7, 2.3):
        assert lattice_offdiag_charfn(m, [0, 0], t) == pytest.approx(
            lattice_free_charfn(m, t), abs=1e-13)


def test_lattice_offdiag_values():
    m = LatticeFreeModel(1)
    assert lattice_offdiag_charfn(m, [1], 0.0) == 0.0
    val = lattice_offdiag_charfn(m, [1], 0.5)
    assert val == pytest.approx(1j * 0.44005058574493352, abs=1e-12)
    # negative offsets give the same amplitude on the symmetric lattice
    assert lattice_offdiag_charfn(m, [-1], 0.5) == pytest.approx(val, abs=1e-14)
    with pytest.raises(ValueError):
        lattice_offdiag_charfn(m, [1, 2], 0.5)


def test_lattice_offdiag_matches_ring_eigendecomposition():
    # wrap-around is negligible for t << L / (2 * speed)
    from cauchydos.ensemble import LatticeBoxSpec, build_lattice
    from cauchydos.spectra import eig_sym

    L = 64
    eig = eig_sym(build_lattice(LatticeBoxSpec(1, L, "periodic"), None))
    m = LatticeFreeModel(1)
    for x, t in ((0, 1.5), (1, 1.5), (3, 2.5)):
        amp = np.sum(np.exp(1j * t * eig.values) * eig.vectors[0, :] * eig.vectors[x, :])
        assert lattice_offdiag_charfn(m, [x], t) == pytest.approx(amp, abs=1e-10)


def test_lattice_dos_closed_forms():
    m = LatticeFreeModel(1)
    assert lattice_dos_smoothed(m, CauchyKernel(1.0), 0.0) == pytest.approx(
        1.0 / (math.pi * math.sqrt(5.0)), abs=1e-10)
    assert lattice_dos_smoothed(m, CauchyKernel(0.5), 0.0) == pytest.approx(
        1.0 / (math.pi * math.sqrt(4.25)), abs=1e-10)


def test_lattice_dos_regression_constants():
    # frozen from 30-digit quadrature of the defining integral
    assert lattice_dos_smoothed(LatticeFreeModel(1), CauchyKernel(1.0), 2.0) == pytest.approx(
        0.123559836172875, abs=1e-9)
    assert lattice_dos_smoothed(LatticeFreeModel(2), CauchyKernel(1.0), 0.0) == pytest.approx(
        0.139100768708961, abs=1e-9)
    assert lattice_dos_smoothed(LatticeFreeModel(3), CauchyKernel(1.0), 0.0) == pytest.approx(
        0.114414320188398, abs=1e-9)


def test_lattice_dos_even():
    m = LatticeFreeModel(2)
    k = CauchyKernel(0.7)
    for e in (0.5, 1.7, 3.2):
        assert lattice_dos_smoothed(m, k, e) == pytest.approx(
            lattice_dos_smoothed(m, k, -e), abs=1e-11)


def test_lattice_dos_outside_strip_raises():
    m = LatticeFreeModel(1)
    k = CauchyKernel(1.0)
    for y in (1.0, 1.05, -1.2):
        with pytest.raises(OutsideStripError):
            lattice_dos_smoothed(m, k, 0.5 + 1j * y)


def test_lattice_dos_complex_real_axis_consistency():
    m = LatticeFreeModel(1)
    k = CauchyKernel(1.0)
    real = lattice_dos_smoothed(m, k, 1.3)
    cplx = lattice_dos_smoothed(m, k, 1.3 + 0.4j)
    assert abs(lattice_dos_smoothed(m, k, complex(1.3, 0.0)) - real) < 1e-11
    # Schwarz reflection: real on the real axis forces p(conj z) = conj p(z)
    assert lattice_dos_smoothed(m, k, 1.3 - 0.4j) == pytest.approx(np.conj(cplx), abs=1e-10)


def test_lattice_dos_curve_matches_scalar():
    m = LatticeFreeModel(1)
    k = CauchyKernel(1.0)
    grid = EnergyGrid(-6.0, 6.0, 0.75)
    curve = lattice_dos_curve(m, k, grid)
    scal = np.array([lattice_dos_smoothed(m, k, e) for e in grid.points])
    assert np.max(np.abs(curve.values - scal)) < 1e-10


def test_lattice_dos_curve_mass_with_declared_tail():
    for d in (1, 2):
        lam = 1.0
        half = 2 * d + 60 * lam
        grid = EnergyGrid(-half, half, 0.02)
        curve = lattice_dos_curve(LatticeFreeModel(d), CauchyKernel(lam), grid)
        mass = curve.trapezoid_mass() + curve.meta["window_tail_mass"]
        assert abs(mass - 1.0) < 2e-3


def test_kesten_mckay_values_and_support():
    b = BetheFreeModel(2)
    assert kesten_mckay_density(b, 0.0) == pytest.approx(math.sqrt(2) / (3 * math.pi),
                                                         abs=1e-12)
    assert kesten_mckay_density(b, 3.0) == 0.0
    assert kesten_mckay_density(b, 2.0 * math.sqrt(2) + 1e-9) == 0.0


def test_kesten_mckay_normalizes():
    for K in (2, 3):
        b = BetheFreeModel(K)
        r = b.band_edge
        total, _ = quad(lambda e: kesten_mckay_density(b, e), -r, r, limit=300)
        assert total == pytest.approx(1.0, abs=1e-8)


def test_bethe_smoothed_resolvent_oracle():
    # independent route: m(z) = 1/(-z - (K+1) s) with K s^2 + z s + 1 = 0, Im s > 0
    def resolvent_value(K, lam, e):
        z = complex(e, lam)
        s = (-z + np.sqrt(z * z - 4 * K)) / (2 * K)
        if s.imag <= 0:
            s = (-z - np.sqrt(z * z - 4 * K)) / (2 * K)
        return (1.0 / (-z - (K + 1) * s)).imag / math.pi

    for K, lam, e in ((2, 1.0, 0.0), (2, 0.6, 1.3), (3, 0.8, -2.0)):
        assert bethe_dos_smoothed(BetheFreeModel(K), CauchyKernel(lam), e) == pytest.approx(
            resolvent_value(K, lam, e), abs=1e-9)
    assert bethe_dos_smoothed(BetheFreeModel(2), CauchyKernel(1.0), 0.0) == pytest.approx(
        2.0 / (5.0 * math.pi), abs=1e-10)


def test_bethe_smoothed_small_lambda_recovers_kesten_mckay():
    b = BetheFreeModel(2)
    for e in (0.0, 0.7, -1.4):
        assert bethe_dos_smoothed(b, CauchyKernel(1e-3), e) == pytest.approx(
            kesten_mckay_density(b, e), abs=1e-2)


def test_bethe_smoothed_even():
    b = BetheFreeModel(2)
    k = CauchyKernel(0.9)
    for e in (0.4, 1.9, 2.7):
        assert bethe_dos_smoothed(b, k, e) == pytest.approx(bethe_dos_smoothed(b, k, -e),
                                                            abs=1e-10)


def test_bethe_curve_matches_scalar():
    b = BetheFreeModel(2)
    k = CauchyKernel(1.1)
    grid = EnergyGrid(-2.9, 2.9, 0.29)
    curve = bethe_dos_curve(b, k, grid)
    scal = np.array([bethe_dos_smoothed(b, k, e) for e in grid.points])
    assert np.max(np.abs(curve.values - scal)) < 1e-9


def test_truncated_tree_transforms_match_dense_eigensolve():
    from cauchydos.ensemble import TreeSpec, build_tree
    from cauchydos.spectra import eig_sym, local_spectral_measure

    K, depth = 2, 5
    spec = TreeSpec(K, depth)
    eig = eig_sym(build_tree(spec, None))
    z = np.array([0.3 + 0.5j, -1.2 + 0.25j, 2.0 + 1.0j])
    meas = local_spectral_measure(eig, 0, 0)
    root_direct = np.array([np.sum(meas.weights / (meas.points - zz)) for zz in z])
    assert np.max(np.abs(truncated_tree_root_stieltjes(K, depth, z) - root_direct)) < 1e-12
    mean_direct = np.array(
        [np.mean(1.0 / (eig.values - zz)) for zz in z])
    # mean over the diagonal equals the eigenvalue average by the trace
    assert np.max(np.abs(truncated_tree_mean_stieltjes(K, depth, z) - mean_direct)) < 1e-12


def test_truncated_tree_requires_upper_half_plane():
    with pytest.raises(ValueError):
        truncated_tree_root_stieltjes(2, 3, 1.0 + 0j)
    with pytest.raises(ValueError):
        truncated_tree_mean_stieltjes(2, 3, np.array([1j, -1j]))


def test_truncated_tree_converges_to_kesten_mckay():
    b = BetheFreeModel(2)
    k = CauchyKernel(1.0)
    z = 0.5 + 1j * k.lam
    deep = truncated_tree_root_stieltjes(2, 28, z).imag / math.pi
    assert deep == pytest.approx(bethe_dos_smoothed(b, k, 0.5), abs=1e-3)


def test_depth_fourteen_free_root_close_to_kesten_mckay():
    # finite-depth boundary bias at the root, broadened at 0.5, is below 0.01
    # on the interior window |E| <= 2.5
    grid = EnergyGrid(-2.5, 2.5, 0.02)
    z = grid.points + 0.5j
    root = truncated_tree_root_stieltjes(2, 14, z).imag / math.pi
    km = bethe_dos_curve(BetheFreeModel(2), CauchyKernel(0.5), grid).values
    assert np.max(np.abs(root - km)) <= 0.01


def test_continuum_free_ids_values():
    m = ContinuumFreeModel()
    assert continuum_free_ids(m, 0.0) == 0.0
    assert continuum_free_ids(m, -3.0) == 0.0
    assert continuum_free_ids(m, 1.0) == pytest.approx(1.0 / math.pi, abs=1e-15)
    assert continuum_free_ids(m, 4.0) == pytest.approx(2.0 / math.pi, abs=1e-15)


def test_continuum_ids_smoothed_regression():
    # frozen from two independent 30-digit quadratures (tan substitution and
    # direct heavy-tail integral)
    m = ContinuumFreeModel()
    assert continuum_ids_smoothed(m, CauchyKernel(0.2), 1.0) == pytest.approx(
        0.31988194865360675, abs=1e-9)


def test_continuum_ids_smoothed_limits():
    m = ContinuumFreeModel()
    assert continuum_ids_smoothed(m, CauchyKernel(1e-4), 1.0) == pytest.approx(
        1.0 / math.pi, abs=1e-3)
    vals = [continuum_ids_smoothed(m, CauchyKernel(0.3), e) for e in (-1.0, -3.0, -8.0)]
    assert vals[0] > vals[1] > vals[2]
    assert vals[2] < 0.02
