"""Subspace DoA estimation with beam-split and mutual-coupling calibration.

Four spectrum variants share one evaluator:

====== ============ =================
mode   split-aware  coupling-corrected
====== ============ =================
PLAIN  no           no
BSC    yes          no
MCC    no           yes
CREAM  yes          yes
====== ============ =================

The coupling-corrected variants alternate between a DoA search with the
current sector coupling estimates and a closed-form, per-subcarrier coupling
solve at the new DoAs.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.optimize import minimize_scalar

from .array_model import ArrayConfig, CouplingModel, SectorPlan, selection_transform, steering_vector
from .numerics import HermEig, NumericalError, banded_toeplitz, eig_hermitian, solve_regularized

DENOM_FLOOR = 1e-30


class EstimationError(RuntimeError):
    pass


class Mode(str, enum.Enum):
    PLAIN = "PLAIN"
    BSC = "BSC"
    MCC = "MCC"
    CREAM = "CREAM"

    @property
    def split_aware(self) -> bool:
        return self in (Mode.BSC, Mode.CREAM)

    @property
    def coupling_aware(self) -> bool:
        return self in (Mode.MCC, Mode.CREAM)


# --------------------------------------------------------------------------
# covariance and subspaces


def sample_covariance(Y) -> np.ndarray:
    """``(1/T) Y Y^H``, symmetrized. Works on a single ``N x T`` block or a stack."""
    Y = np.asarray(Y)
    T = Y.shape[-1]
    R = Y @ np.swapaxes(Y, -1, -2).conj() / T
    return 0.5 * (R + np.swapaxes(R, -1, -2).conj())


def noise_subspace(R, n_targets: int) -> np.ndarray:
    """Eigenvectors of the ``N - K`` smallest eigenvalues of ``R``."""
    N = R.shape[0]
    if not 0 <= n_targets < N:
        raise ValueError(f"need 0 <= K < N, got K={n_targets}, N={N}")
    return eig_hermitian(R).eigenvectors[:, n_targets:]


@dataclass
class SubspaceDecomposition:
    """Per-subcarrier covariances and their eigenpairs."""

    covariance: np.ndarray
    eigs: list[HermEig]
    n_targets: int

    @property
    def n_subcarriers(self) -> int:
        return len(self.eigs)

    def noise(self, m: int) -> np.ndarray:
        return self.eigs[m - 1].eigenvectors[:, self.n_targets:]

    def signal(self, m: int) -> np.ndarray:
        return self.eigs[m - 1].eigenvectors[:, :self.n_targets]

    def noise_projector(self, m: int) -> np.ndarray:
        U = self.noise(m)
        return U @ U.conj().T


def decompose(Y, n_targets: int) -> SubspaceDecomposition:
    """Covariance and eigendecomposition for each subcarrier block of ``Y`` ``(M, N, T)``."""
    Y = np.asarray(Y)
    N = Y.shape[1]
    if not 0 < n_targets < N:
        raise ValueError(f"need 0 < K < N, got K={n_targets}, N={N}")
    R = sample_covariance(Y)
    return SubspaceDecomposition(R, [eig_hermitian(Rm) for Rm in R], n_targets)


# --------------------------------------------------------------------------
# spectra


def angle_grid(step_deg: float = 0.02) -> np.ndarray:
    """Physical-angle grid in radians over ``[-90, 90]`` degrees, both ends included."""
    if step_deg <= 0:
        raise ValueError("grid step must be positive")
    n = int(np.ceil(180.0 / step_deg - 1e-9)) + 1
    return np.deg2rad(np.linspace(-90.0, 90.0, n))


@dataclass
class SpectrumGrid:
    angles: np.ndarray
    per_subcarrier: np.ndarray
    mode: Mode

    @property
    def total(self) -> np.ndarray:
        return self.per_subcarrier.sum(axis=0)

    @property
    def degrees(self) -> np.ndarray:
        return np.rad2deg(self.angles)


_LAG_CACHE: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}


def _lag_index(n: int):
    if n not in _LAG_CACHE:
        i, j = np.triu_indices(n)
        _LAG_CACHE[n] = (i, j, j - i)
    return _LAG_CACHE[n]


def diagonal_sums(Q) -> np.ndarray:
    """Sums along the upper diagonals of ``Q`` (stacked on leading axes).

    For Hermitian ``Q`` and ``a_n = exp(j pi n x)``,
    ``a^H Q a = 2 Re(sum_l q_l z^l) - q_0`` with ``z = exp(j pi x)``.
    """
    Q = np.asarray(Q)
    n = Q.shape[-1]
    i, j, lag = _lag_index(n)
    vals = Q[..., i, j]
    out = np.zeros(Q.shape[:-2] + (n,), dtype=np.complex128)
    np.add.at(np.moveaxis(out, -1, 0), lag, np.moveaxis(vals, -1, 0))
    return out


class NullSpectrum:
    """Evaluates the MUSIC denominators ``e^H U_N U_N^H e`` for one mode.

    ``e_m(theta) = W^H C a(x)`` with ``x = eta_m theta`` for split-aware
    modes and ``x = theta`` otherwise; ``C`` is the coupling of the sector
    containing ``theta``.
    """

    def __init__(self, cfg: ArrayConfig, decomp: SubspaceDecomposition, combiner, mode: Mode,
                 sectors: SectorPlan | None = None):
        self.cfg = cfg
        self.mode = Mode(mode)
        self.sectors = sectors or SectorPlan.uniform(1)
        M = cfg.n_subcarriers
        if decomp.n_subcarriers != M:
            raise ValueError(
                f"decomposition covers {decomp.n_subcarriers} subcarriers, config has {M}"
            )
        W = np.asarray(combiner)
        self.combiner = W
        # W U_N U_N^H W^H per subcarrier, independent of the calibration state
        self.noise_forms = np.stack(
            [W @ decomp.noise_projector(m) @ W.conj().T for m in range(1, M + 1)]
        )
        self.eta = cfg.eta if self.mode.split_aware else np.ones(M)
        self.set_coupling(None)

    def set_coupling(self, coupling: CouplingModel | None) -> None:
        S, M, N = self.sectors.n_sectors, self.cfg.n_subcarriers, self.cfg.n_antennas
        if coupling is None or not self.mode.coupling_aware:
            q = diagonal_sums(self.noise_forms)
            self.lags = np.broadcast_to(q, (S,) + q.shape)
            return
        if coupling.n_sectors != S or coupling.n_subcarriers != M:
            raise ValueError("coupling model does not match sector plan and subcarrier count")
        lags = np.empty((S, M, N), dtype=np.complex128)
        for s in range(S):
            for m in range(M):
                C = banded_toeplitz(coupling.coeffs[s, m], N)
                lags[s, m] = diagonal_sums(C.conj().T @ self.noise_forms[m] @ C)
        self.lags = lags

    def denominators(self, angles) -> np.ndarray:
        """Denominators for physical ``angles`` (radians), shape ``(M, G)``."""
        angles = np.atleast_1d(np.asarray(angles, dtype=float))
        theta = np.sin(angles)
        out = np.empty((self.cfg.n_subcarriers, angles.size))
        sec = self.sectors.sector_of(angles)
        for s in np.unique(sec):
            idx = np.flatnonzero(sec == s)
            z = np.exp(1j * np.pi * np.outer(self.eta, theta[idx]))
            q = self.lags[s]
            poly = npoly.polyval(z, q.T[:, :, None], tensor=False)
            out[:, idx] = 2.0 * poly.real - q[:, :1].real
        return out

    def spectrum(self, angles) -> np.ndarray:
        return 1.0 / np.maximum(self.denominators(angles), DENOM_FLOOR)


def null_spectrum_direct(cfg: ArrayConfig, decomp: SubspaceDecomposition, combiner, mode: Mode,
                         angles, coupling: CouplingModel | None = None,
                         sectors: SectorPlan | None = None) -> np.ndarray:
    """Brute-force denominators ``||U_N^H W^H C a||^2``; slow reference route."""
    mode = Mode(mode)
    sectors = sectors or SectorPlan.uniform(1)
    angles = np.atleast_1d(np.asarray(angles, dtype=float))
    N, M = cfg.n_antennas, cfg.n_subcarriers
    WH = np.asarray(combiner).conj().T
    sec = sectors.sector_of(angles)
    out = np.empty((M, angles.size))
    for m in range(1, M + 1):
        eta = cfg.eta[m - 1] if mode.split_aware else 1.0
        A = steering_vector(N, eta * np.sin(angles))
        Un = decomp.noise(m)
        for g in range(angles.size):
            e = A[:, g]
            if mode.coupling_aware and coupling is not None:
                e = banded_toeplitz(coupling.coeffs[sec[g], m - 1], N) @ e
            r = Un.conj().T @ (WH @ e)
            out[m - 1, g] = np.vdot(r, r).real
    return out


def spectrum(cfg: ArrayConfig, decomp: SubspaceDecomposition, combiner, mode: Mode,
             grid=None, coupling: CouplingModel | None = None,
             sectors: SectorPlan | None = None) -> SpectrumGrid:
    """Per-subcarrier MUSIC spectra of the given mode over a physical-angle grid."""
    grid = angle_grid() if grid is None else np.asarray(grid, dtype=float)
    ns = NullSpectrum(cfg, decomp, combiner, mode, sectors)
    ns.set_coupling(coupling)
    return SpectrumGrid(grid, ns.spectrum(grid), Mode(mode))


# --------------------------------------------------------------------------
# peaks


def _local_maxima(p: np.ndarray) -> np.ndarray:
    left = np.concatenate(([-np.inf], p[:-1]))
    right = np.concatenate((p[1:], [-np.inf]))
    return np.flatnonzero((p > left) & (p > right))


def _parabolic(angles: np.ndarray, y: np.ndarray, i: int) -> float:
    if i == 0 or i == len(y) - 1:
        return float(angles[i])
    y0, y1, y2 = y[i - 1], y[i], y[i + 1]
    den = y0 - 2 * y1 + y2
    if not np.isfinite(den) or den >= 0:
        return float(angles[i])
    off = 0.5 * (y0 - y2) / den
    h = angles[i + 1] - angles[i]
    return float(angles[i] + np.clip(off, -0.5, 0.5) * h)


def peak_indices(values: np.ndarray, n_peaks: int, strict: bool = True) -> np.ndarray:
    """Grid indices of the ``n_peaks`` largest local maxima, by descending height.

    End points count as maxima when they exceed their single neighbour. With
    ``strict=False`` missing peaks are filled with the largest remaining samples.
    """
    p = np.asarray(values)
    if p.size < 2 * n_peaks + 1:
        raise ValueError(f"grid of {p.size} points too small for {n_peaks} peaks")
    cand = _local_maxima(p)
    cand = cand[np.argsort(-p[cand], kind="stable")]
    if cand.size >= n_peaks:
        return cand[:n_peaks]
    if strict:
        raise EstimationError(f"found {cand.size} local maxima, need {n_peaks}")
    rest = np.setdiff1d(np.argsort(-p, kind="stable"), cand, assume_unique=True)
    rest = rest[np.argsort(-p[rest], kind="stable")]
    return np.concatenate((cand, rest[: n_peaks - cand.size]))


def find_peaks(spec: SpectrumGrid | np.ndarray, n_peaks: int, angles=None,
               strict: bool = True) -> np.ndarray:
    """Angles of the ``n_peaks`` highest spectrum peaks, sorted ascending.

    Each grid maximum is refined by a 3-point parabola through the
    log-spectrum. ``spec`` is a :class:`SpectrumGrid` (its summed spectrum
    is used) or a raw 1-D array with matching ``angles``.
    """
    if isinstance(spec, SpectrumGrid):
        values, angles = spec.total, spec.angles
    else:
        values = np.asarray(spec, dtype=float)
        if angles is None:
            raise ValueError("angles are required with a raw spectrum")
        angles = np.asarray(angles, dtype=float)
    idx = peak_indices(values, n_peaks, strict=strict)
    logp = np.log(np.maximum(values, np.finfo(float).tiny))
    return np.sort([_parabolic(angles, logp, i) for i in idx])


def polish_peak(ns: NullSpectrum, angle: float, half_width: float) -> float:
    """Maximize the summed spectrum within ``angle +/- half_width`` (radians)."""
    lo = max(angle - half_width, -np.pi / 2)
    hi = min(angle + half_width, np.pi / 2)
    if hi <= lo:
        return angle
    res = minimize_scalar(lambda x: -ns.spectrum(x).sum(), bounds=(lo, hi),
                          method="bounded", options={"xatol": 1e-10})
    best = float(res.x)
    # keep the grid/parabola estimate if the search wandered to a worse point
    if ns.spectrum(best).sum() < ns.spectrum(angle).sum():
        return angle
    return best


# --------------------------------------------------------------------------
# coupling


def coupling_system(cfg: ArrayConfig, noise_form: np.ndarray, theta: float, m: int,
                    band_size: int, split_aware: bool = True) -> np.ndarray:
    """``Sigma = T^H (W U_N U_N^H W^H) T`` for spatial angle ``theta`` at subcarrier ``m``."""
    eta = cfg.eta[m - 1] if split_aware else 1.0
    a = steering_vector(cfg.n_antennas, eta * theta)
    T = selection_transform(a, band_size)
    sigma = T.conj().T @ noise_form @ T
    return 0.5 * (sigma + sigma.conj().T)


def estimate_coupling(cfg: ArrayConfig, decomp: SubspaceDecomposition, combiner, theta: float,
                      m: int, band_size: int, split_aware: bool = True,
                      noise_form: np.ndarray | None = None) -> np.ndarray:
    """Closed-form coupling coefficients for one target and subcarrier.

    Minimizes ``c^H Sigma c`` subject to ``c[0] = 1``:
    ``c = Sigma^{-1} v / (v^T Sigma^{-1} v)`` with ``v = e_0``.

    Args:
        theta: spatial angle of the target.
        m: 1-based subcarrier index.
        band_size: number of coefficients ``L``.
        split_aware: build the linearization from the split steering vector.
        noise_form: precomputed ``W U_N U_N^H W^H``; derived from ``decomp`` if omitted.
    """
    if noise_form is None:
        W = np.asarray(combiner)
        noise_form = W @ decomp.noise_projector(m) @ W.conj().T
    sigma = coupling_system(cfg, noise_form, theta, m, band_size, split_aware)
    v = np.zeros(band_size, dtype=np.complex128)
    v[0] = 1.0
    try:
        x = solve_regularized(sigma, v)
    except NumericalError as exc:
        raise NumericalError(f"coupling system singular at subcarrier {m}, angle {theta:.6f}") from exc
    c = x / x[0]
    c[0] = 1.0
    return c


# --------------------------------------------------------------------------
# alternating calibration


@dataclass
class CalibrationResult:
    """Output of :func:`cream_music` (and of the single-pass baselines).

    ``angles`` are physical radians sorted ascending; ``beam_split`` is
    ``(M, K)`` in spatial units; ``coupling`` is ``(M, K, L)``.
    """

    angles: np.ndarray
    beam_split: np.ndarray
    coupling: np.ndarray | None
    sector_coupling: CouplingModel | None
    trace: list = field(default_factory=list)
    objective: list = field(default_factory=list)
    converged: bool = False
    iterations: int = 0
    fallback: bool = False
    spectrum: SpectrumGrid | None = None

    @property
    def degrees(self) -> np.ndarray:
        return np.rad2deg(self.angles)

    @property
    def spatial(self) -> np.ndarray:
        return np.sin(self.angles)


def estimate_doa(Y, combiner, cfg: ArrayConfig, n_targets: int, mode: Mode = Mode.CREAM,
                 sectors: SectorPlan | None = None, band_size: int = 5, eps: float = 1e-4,
                 max_iter: int = 50, grid=None, polish: bool = True,
                 decomp: SubspaceDecomposition | None = None) -> CalibrationResult:
    """Run one of the four estimators on per-subcarrier snapshots ``Y`` ``(M, N, T)``.

    PLAIN and BSC are single-pass. MCC and CREAM alternate: the summed
    spectrum (with the current sector coupling) gives the DoAs, the coupling
    of every (subcarrier, target) is then re-solved in closed form and stored
    in the sector containing that target. Iteration stops when the summed
    absolute change of the spatial DoAs is at most ``eps``.
    """
    mode = Mode(mode)
    sectors = sectors or SectorPlan.uniform(6)
    grid = angle_grid() if grid is None else np.asarray(grid, dtype=float)
    decomp = decompose(Y, n_targets) if decomp is None else decomp
    M, K, L = cfg.n_subcarriers, n_targets, band_size
    step = float(np.max(np.diff(grid)))

    ns = NullSpectrum(cfg, decomp, combiner, mode, sectors)
    sector_c = CouplingModel.identity(sectors.n_sectors, M, L) if mode.coupling_aware else None

    result = CalibrationResult(np.zeros(K), np.zeros((M, K)), None, sector_c)
    prev = None
    for it in range(1, max_iter + 1):
        ns.set_coupling(sector_c)
        spec = SpectrumGrid(grid, ns.spectrum(grid), mode)
        total = spec.total
        try:
            idx = peak_indices(total, K, strict=True)
        except EstimationError:
            idx = peak_indices(total, K, strict=False)
            result.fallback = True
        logp = np.log(np.maximum(total, np.finfo(float).tiny))
        est = np.array([_parabolic(grid, logp, i) for i in idx])
        if polish:
            est = np.array([polish_peak(ns, a, step) for a in est])
        heights = ns.spectrum(est).sum(axis=0)
        order = np.argsort(est)
        est, heights = est[order], heights[order]
        theta = np.sin(est)
        result.angles = est
        result.beam_split = np.outer(cfg.eta - 1.0, theta)
        result.trace.append(est.copy())
        result.spectrum = spec
        result.iterations = it

        if not mode.coupling_aware:
            result.converged = True
            break

        coeffs = np.empty((M, K, L), dtype=np.complex128)
        obj = 0.0
        for m in range(1, M + 1):
            for k in range(K):
                c = estimate_coupling(cfg, decomp, combiner, theta[k], m, L,
                                      split_aware=mode.split_aware,
                                      noise_form=ns.noise_forms[m - 1])
                coeffs[m - 1, k] = c
                sigma = coupling_system(cfg, ns.noise_forms[m - 1], theta[k], m, L, mode.split_aware)
                obj += float(np.vdot(c, sigma @ c).real)
        result.coupling = coeffs
        result.objective.append(obj)

        new = sector_c.coeffs.copy()
        sec = sectors.sector_of(est)
        for s in np.unique(sec):
            members = np.flatnonzero(sec == s)
            k = members[np.argmax(heights[members])]
            new[s] = coeffs[:, k]
        sector_c = CouplingModel(new)
        result.sector_coupling = sector_c

        if prev is not None and np.sum(np.abs(theta - prev)) <= eps:
            result.converged = True
            break
        prev = theta
    return result


def cream_music(Y, combiner, cfg: ArrayConfig, n_targets: int, **kwargs) -> CalibrationResult:
    """Joint DoA, beam-split and coupling estimation (both corrections on)."""
    return estimate_doa(Y, combiner, cfg, n_targets, mode=Mode.CREAM, **kwargs)


def rmse(estimates, truths) -> float:
    """RMSE in degrees over trials; inputs are physical radians, ``(J, K)`` or ``(K,)``.

    Estimates and truths are paired by ascending order within each trial.
    """
    est = np.atleast_2d(np.asarray(estimates, dtype=float))
    tru = np.atleast_2d(np.asarray(truths, dtype=float))
    if est.shape != tru.shape:
        raise ValueError(f"estimate shape {est.shape} does not match truth shape {tru.shape}")
    if est.size == 0:
        raise ValueError("no estimates")
    err = np.sort(est, axis=1) - np.sort(tru, axis=1)
    return float(np.rad2deg(np.sqrt(np.mean(err**2))))
