import numpy as np
import pytest

from thzdoa.array_model import ArrayConfig, CouplingModel, SectorPlan, steering_vector
from thzdoa.estimator import (
    EstimationError,
    Mode,
    NullSpectrum,
    SpectrumGrid,
    angle_grid,
    decompose,
    diagonal_sums,
    estimate_coupling,
    estimate_doa,
    find_peaks,
    noise_subspace,
    null_spectrum_direct,
    rmse,
    sample_covariance,
    spectrum,
)
from thzdoa.numerics import eig_hermitian
from thzdoa.scene import corrupted_steering_matrix

from conftest import make_snapshots


def test_covariance_examples():
    np.testing.assert_array_equal(sample_covariance(np.zeros((3, 5))), np.zeros((3, 3)))
    y = np.array([[1.0 + 1j], [2.0], [-1j]])
    R = sample_covariance(y)
    np.testing.assert_allclose(R, y @ y.conj().T)
    assert np.linalg.matrix_rank(R) == 1


def test_covariance_psd():
    rng = np.random.default_rng(0)
    Y = rng.standard_normal((6, 9)) + 1j * rng.standard_normal((6, 9))
    R = sample_covariance(Y)
    np.testing.assert_array_equal(R, R.conj().T)
    assert eig_hermitian(R).eigenvalues.min() >= -1e-12


def test_noise_subspace_identity_projector():
    Un = noise_subspace(np.eye(5), 1)
    P = np.eye(5) - Un @ Un.conj().T
    assert np.linalg.matrix_rank(P, tol=1e-10) == 1


def test_noise_subspace_rank_one():
    a = steering_vector(8, 0.37)
    Un = noise_subspace(np.outer(a, a.conj()), 1)
    assert np.abs(Un.conj().T @ a).max() < 1e-10


def test_noise_subspace_diagonal():
    Un = noise_subspace(np.diag([5.0, 3.0, 1.0, 1.0]), 2)
    P = Un @ Un.conj().T
    np.testing.assert_allclose(P, np.diag([0, 0, 1, 1]), atol=1e-14)
    with pytest.raises(ValueError):
        noise_subspace(np.eye(3), 3)


def test_diagonal_sums_trig_identity():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((7, 7)) + 1j * rng.standard_normal((7, 7))
    Q = X @ X.conj().T
    q = diagonal_sums(Q)
    for x in (-0.9, 0.13, 0.5):
        a = steering_vector(7, x)
        z = np.exp(1j * np.pi * x)
        fast = 2 * np.real(np.polyval(q[::-1], z)) - q[0].real
        assert fast == pytest.approx(np.vdot(a, Q @ a).real, rel=1e-12)


@pytest.mark.parametrize("mode", list(Mode))
def test_fast_spectrum_matches_direct(desk_cfg, mode):
    snaps = make_snapshots(desk_cfg, [-23.0, 41.5], seed=9, snr_db=5.0)
    dec = decompose(snaps.Y, 2)
    sc = snaps.scene
    ns = NullSpectrum(desk_cfg, dec, snaps.combiner, mode, sc.sectors)
    ns.set_coupling(sc.coupling)
    ang = np.deg2rad([-89.0, -23.0, -1.0, 30.0, 41.5, 88.0])
    direct = null_spectrum_direct(desk_cfg, dec, snaps.combiner, mode, ang, sc.coupling, sc.sectors)
    np.testing.assert_allclose(ns.denominators(ang), direct, rtol=1e-8, atol=1e-12)


def test_modes_coincide_on_top_subcarrier(desk_cfg):
    snaps = make_snapshots(desk_cfg, [15.0], seed=2, snr_db=10.0, coupled=False)
    dec = decompose(snaps.Y, 1)
    grid = angle_grid(0.5)
    ident = CouplingModel.identity(6, 16, 5)
    ref = spectrum(desk_cfg, dec, snaps.combiner, Mode.PLAIN, grid).per_subcarrier[-1]
    for mode in Mode:
        got = spectrum(desk_cfg, dec, snaps.combiner, mode, grid, ident, SectorPlan.uniform(6))
        np.testing.assert_allclose(got.per_subcarrier[-1], ref, rtol=1e-9)


def test_noiseless_peak_dominates(desk_cfg, noiseless_pair):
    sc = noiseless_pair.scene
    dec = decompose(noiseless_pair.Y, 2)
    grid = angle_grid(0.02)
    spec = spectrum(desk_cfg, dec, noiseless_pair.combiner, Mode.CREAM, grid, sc.coupling, sc.sectors)
    at_truth = spectrum(desk_cfg, dec, noiseless_pair.combiner, Mode.CREAM, sc.angles, sc.coupling,
                        sc.sectors).total
    assert np.all(at_truth > 1e8 * np.median(spec.total))
    assert np.all(np.isfinite(spec.per_subcarrier)) and np.all(spec.per_subcarrier >= 0)


def test_plain_per_subcarrier_bias(split_cfg):
    snaps = make_snapshots(split_cfg, [60.0], seed=0, coupled=False)
    dec = decompose(snaps.Y, 1)
    grid = angle_grid(0.02)
    spec = spectrum(split_cfg, dec, snaps.combiner, Mode.PLAIN, grid)
    step = np.deg2rad(0.02)
    for m in range(11):
        peak = grid[np.argmax(spec.per_subcarrier[m])]
        expected = np.arcsin(split_cfg.eta[m] * np.sin(np.deg2rad(60.0)))
        assert abs(peak - expected) <= step


def test_find_peaks_bumps():
    grid = np.deg2rad(np.arange(-90, 90.01, 0.1))
    deg = np.rad2deg(grid)
    p = np.exp(-((deg + 10) / 2) ** 2) + np.exp(-((deg - 25) / 2) ** 2) + 1e-3
    got = np.rad2deg(find_peaks(p, 2, angles=grid))
    np.testing.assert_allclose(got, [-10, 25], atol=0.1)


def test_find_peaks_monotone_plus_bump():
    grid = np.deg2rad(np.arange(-90, 90.01, 0.1))
    deg = np.rad2deg(grid)
    p = 0.001 * (deg + 90) + np.exp(-((deg - 33.3) / 1.5) ** 2)
    # the monotone ramp ends at the right boundary, which is lower than the bump
    got = np.rad2deg(find_peaks(p, 1, angles=grid))
    np.testing.assert_allclose(got, [33.3], atol=0.1)


def test_find_peaks_too_few_maxima():
    grid = np.linspace(-1, 1, 101)
    with pytest.raises(EstimationError):
        find_peaks(-grid**2, 2, angles=grid)
    assert len(find_peaks(-grid**2, 2, angles=grid, strict=False)) == 2
    with pytest.raises(ValueError):
        find_peaks(np.ones(4), 2, angles=np.arange(4.0))


def test_find_peaks_noiseless_two_targets(desk_cfg, noiseless_pair):
    sc = noiseless_pair.scene
    dec = decompose(noiseless_pair.Y, 2)
    spec = spectrum(desk_cfg, dec, noiseless_pair.combiner, Mode.CREAM, angle_grid(0.02), sc.coupling,
                    sc.sectors)
    assert isinstance(spec, SpectrumGrid)
    got = np.rad2deg(find_peaks(spec, 2))
    np.testing.assert_allclose(got, np.rad2deg(sc.angles), atol=0.01)


def test_coupling_recovery_noiseless(desk_cfg, noiseless_pair):
    sc = noiseless_pair.scene
    dec = decompose(noiseless_pair.Y, 2)
    for m in (1, 8, 16):
        truth = sc.true_coefficients(m)
        for k in range(2):
            c = estimate_coupling(desk_cfg, dec, noiseless_pair.combiner, sc.spatial[k], m, 5)
            assert c[0] == 1.0
            np.testing.assert_allclose(c, truth[k], rtol=1e-6)


def test_coupling_free_recovery(desk_cfg):
    snaps = make_snapshots(desk_cfg, [-5.0, 50.0], seed=12, coupled=False)
    dec = decompose(snaps.Y, 2)
    for k in range(2):
        c = estimate_coupling(desk_cfg, dec, snaps.combiner, snaps.scene.spatial[k], 3, 5)
        assert c[0] == 1.0
        assert np.abs(c[1:]).max() < 1e-6


def test_coupling_scale_invariant(desk_cfg):
    snaps = make_snapshots(desk_cfg, [-30.0, 20.0], seed=13, snr_db=5.0)
    th = snaps.scene.spatial[0]
    c1 = estimate_coupling(desk_cfg, decompose(snaps.Y, 2), snaps.combiner, th, 4, 5)
    c2 = estimate_coupling(desk_cfg, decompose(37.5 * snaps.Y, 2), snaps.combiner, th, 4, 5)
    np.testing.assert_allclose(c1, c2, rtol=1e-8)


def test_orthogonality_identity(desk_cfg, noiseless_pair):
    dec = decompose(noiseless_pair.Y, 2)
    WH = noiseless_pair.combiner.conj().T
    for m in range(1, 17):
        D = corrupted_steering_matrix(desk_cfg, noiseless_pair.scene, m)
        r = dec.noise(m).conj().T @ (WH @ D)
        assert np.all(np.sum(np.abs(r) ** 2, axis=0) < 1e-18 * 64)


def test_cream_noiseless_recovers_truth(desk_cfg, noiseless_pair):
    # the alternation contracts linearly; a tight tolerance reaches the fixed point
    res = estimate_doa(noiseless_pair.Y, noiseless_pair.combiner, desk_cfg, 2, Mode.CREAM,
                       sectors=noiseless_pair.scene.sectors, eps=1e-8)
    assert res.converged
    np.testing.assert_allclose(res.degrees, np.rad2deg(noiseless_pair.scene.angles), atol=1e-4)
    assert res.coupling.shape == (16, 2, 5)
    assert np.all(res.coupling[..., 0] == 1)
    np.testing.assert_allclose(res.beam_split, np.outer(desk_cfg.eta - 1, res.spatial))
    # objective is non-increasing along the alternation
    assert np.all(np.diff(res.objective) <= 1e-9)


def test_corruption_free_converges_immediately(desk_cfg):
    snaps = make_snapshots(desk_cfg, [-12.0, 47.0], seed=21, coupled=False)
    ident = SectorPlan.uniform(6)
    snaps_cfg = ArrayConfig(64, 8, 300e9, 0.0, 16)  # zero bandwidth: no beam-split either
    from thzdoa.scene import Scene, make_plan, synth_snapshots

    rng = np.random.default_rng(3)
    scene = Scene(snaps.scene.angles, snaps.scene.betas, CouplingModel.identity(6, 16, 5), ident)
    plan = make_plan(snaps_cfg, 100, None, rng)
    clean = synth_snapshots(snaps_cfg, scene, plan, rng)
    res = estimate_doa(clean.Y, plan.combiner, snaps_cfg, 2, Mode.CREAM, sectors=ident)
    assert res.converged and res.iterations == 2
    assert abs(np.sum(np.abs(np.diff(np.sin(res.trace), axis=0)))) <= 1e-4


def test_iteration_cap(desk_cfg):
    snaps = make_snapshots(desk_cfg, [-40.0, 10.0], seed=4, snr_db=0.0)
    res = estimate_doa(snaps.Y, snaps.combiner, desk_cfg, 2, Mode.CREAM, eps=1e-4, max_iter=50)
    assert res.iterations <= 50
    res = estimate_doa(snaps.Y, snaps.combiner, desk_cfg, 2, Mode.CREAM, eps=1e-300, max_iter=3)
    assert res.iterations == 3 and not res.converged


def test_cream_snr20_accuracy(desk_cfg):
    snaps = make_snapshots(desk_cfg, [-35.0, 22.0], seed=31, snr_db=20.0)
    res = estimate_doa(snaps.Y, snaps.combiner, desk_cfg, 2, Mode.CREAM, sectors=snaps.scene.sectors)
    assert res.converged
    assert np.abs(res.degrees - [-35.0, 22.0]).max() < 0.05


def test_single_pass_modes(desk_cfg):
    snaps = make_snapshots(desk_cfg, [-35.0, 22.0], seed=31, snr_db=20.0)
    for mode in (Mode.PLAIN, Mode.BSC):
        res = estimate_doa(snaps.Y, snaps.combiner, desk_cfg, 2, mode)
        assert res.iterations == 1 and res.converged and res.coupling is None


def test_rmse_examples():
    assert rmse([[0.1, 0.2]], [[0.2, 0.1]]) == 0.0
    assert rmse(np.deg2rad([[12.0]]), np.deg2rad([[10.0]])) == pytest.approx(2.0)
    assert rmse(np.deg2rad([[3.0], [-4.0]]), [[0.0], [0.0]]) == pytest.approx(np.sqrt(12.5))
    with pytest.raises(ValueError):
        rmse([[0.1, 0.2]], [[0.1]])


def test_angle_grid_cardinality():
    assert angle_grid(0.02).size == 9001
    assert angle_grid(0.7).size == int(np.ceil(180 / 0.7)) + 1
    g = angle_grid(0.5)
    assert g[0] == -np.pi / 2 and g[-1] == np.pi / 2
