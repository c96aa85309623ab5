"""Echo synthesis for a subarrayed wideband ULA radar.

Each subcarrier observation is ``Y_m = W^H D_m diag(beta) D_m^T X_m + W^H N_m``
where ``D_m`` stacks the beam-split and coupling-corrupted steering vectors of
the targets and ``W`` is the block-diagonal analog combiner that tiles the
array over ``N / N_RF`` time slots.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .array_model import (
    ArrayConfig,
    CouplingModel,
    SectorPlan,
    steering_split,
)
from .numerics import banded_toeplitz

# coupling magnitude profiles |c_1..c_4| for two reference directions
COUPLING_MAGNITUDES = (
    (0.85, 0.8, 0.4, 0.2),
    (0.9, 0.75, 0.45, 0.25),
)


@dataclass
class Scene:
    """Point targets with their coupling environment.

    Attributes:
        angles: physical target angles in radians, shape (K,).
        betas: complex reflection coefficients, shape (K,).
        coupling: coefficients per sector and subcarrier.
        sectors: partition used to look up each target's coupling sector.
    """

    angles: np.ndarray
    betas: np.ndarray
    coupling: CouplingModel
    sectors: SectorPlan
    seed: int | None = None

    def __post_init__(self):
        self.angles = np.atleast_1d(np.asarray(self.angles, dtype=float))
        self.betas = np.atleast_1d(np.asarray(self.betas, dtype=np.complex128))
        if self.angles.size < 1:
            raise ValueError("a scene needs at least one target")
        if self.angles.shape != self.betas.shape:
            raise ValueError("angles and reflection coefficients differ in length")
        if np.any(np.abs(self.angles) > np.pi / 2):
            raise ValueError("target angles must lie in [-pi/2, pi/2]")
        if self.coupling.n_sectors != self.sectors.n_sectors:
            raise ValueError(
                f"coupling has {self.coupling.n_sectors} sectors, plan has {self.sectors.n_sectors}"
            )

    @property
    def n_targets(self) -> int:
        return self.angles.size

    @property
    def spatial(self) -> np.ndarray:
        return np.sin(self.angles)

    def target_sectors(self) -> np.ndarray:
        return self.sectors.sector_of(self.angles)

    def true_coefficients(self, m: int) -> np.ndarray:
        """Coefficient vectors ``(K, L)`` applied to each target at subcarrier ``m``."""
        return self.coupling.coeffs[self.target_sectors(), m - 1]


@dataclass
class AcquisitionPlan:
    n_snapshots: int
    power: float
    noise_var: float
    blocks: np.ndarray
    combiner: np.ndarray

    @property
    def n_slots(self) -> int:
        return self.blocks.shape[0]


@dataclass
class SnapshotSet:
    """Per-subcarrier observations ``Y`` of shape ``(M, N, T)``."""

    Y: np.ndarray
    plan: AcquisitionPlan
    scene: Scene

    @property
    def combiner(self) -> np.ndarray:
        return self.plan.combiner


def normalized_power(cfg: ArrayConfig) -> float:
    """Radar power giving ``P_r / (M N^2) = 1``."""
    return float(cfg.n_subcarriers * cfg.n_antennas**2)


def snr_to_noise(snr_db: float, rho: float = 1.0) -> float:
    """Noise variance for ``SNR = 10 log10(rho / sigma^2)``."""
    return rho * 10.0 ** (-snr_db / 10.0)


def complex_normal(rng: np.random.Generator, shape, var: float) -> np.ndarray:
    scale = np.sqrt(var / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def gen_probing(cfg: ArrayConfig, n_snapshots: int, power: float, rng: np.random.Generator) -> np.ndarray:
    """Probing block ``X_m`` with ``E[X X^H] = power * T / (M N) * I``."""
    var = power / (cfg.n_subcarriers * cfg.n_antennas)
    return complex_normal(rng, (cfg.n_antennas, n_snapshots), var)


def gen_combiner(cfg: ArrayConfig, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Random-phase subarray combiner.

    Returns the ``J`` blocks ``(J, N_RF, N_RF)`` and the assembled ``N x N``
    block-diagonal matrix. Entries are ``exp(j psi) / sqrt(N)`` with
    ``psi ~ U[-1, 1]``.
    """
    N, R = cfg.n_antennas, cfg.n_rf
    if N % R:
        raise ValueError(f"n_antennas={N} is not divisible by n_rf={R}")
    J = N // R
    psi = rng.uniform(-1.0, 1.0, size=(J, R, R))
    blocks = np.exp(1j * psi) / np.sqrt(N)
    W = np.zeros((N, N), dtype=np.complex128)
    for j in range(J):
        W[j * R:(j + 1) * R, j * R:(j + 1) * R] = blocks[j]
    return blocks, W


def make_plan(cfg: ArrayConfig, n_snapshots: int, snr_db: float | None, rng: np.random.Generator,
              power: float | None = None) -> AcquisitionPlan:
    """Acquisition plan with a fresh combiner; ``snr_db=None`` means noiseless."""
    power = normalized_power(cfg) if power is None else power
    rho = power / (cfg.n_subcarriers * cfg.n_antennas**2)
    noise_var = 0.0 if snr_db is None else snr_to_noise(snr_db, rho)
    blocks, W = gen_combiner(cfg, rng)
    return AcquisitionPlan(n_snapshots, power, noise_var, blocks, W)


def corrupted_steering_matrix(cfg: ArrayConfig, scene: Scene, m: int) -> np.ndarray:
    """``D_m``: one corrupted steering vector per target, shape ``(N, K)``."""
    N = cfg.n_antennas
    A = steering_split(cfg, scene.spatial, m)
    C = scene.true_coefficients(m)
    D = np.empty_like(A)
    for k in range(scene.n_targets):
        D[:, k] = banded_toeplitz(C[k], N) @ A[:, k]
    return D


def synth_snapshots(cfg: ArrayConfig, scene: Scene, plan: AcquisitionPlan,
                    rng: np.random.Generator) -> SnapshotSet:
    N, M, T = cfg.n_antennas, cfg.n_subcarriers, plan.n_snapshots
    WH = plan.combiner.conj().T
    Y = np.empty((M, N, T), dtype=np.complex128)
    for m in range(1, M + 1):
        D = corrupted_steering_matrix(cfg, scene, m)
        X = gen_probing(cfg, T, plan.power, rng)
        Y[m - 1] = WH @ (D * scene.betas) @ (D.T @ X)
        if plan.noise_var > 0:
            Y[m - 1] += WH @ complex_normal(rng, (N, T), plan.noise_var)
    return SnapshotSet(Y, plan, scene)


def random_coupling(n_sectors: int, n_subcarriers: int, rng: np.random.Generator,
                    magnitudes=COUPLING_MAGNITUDES) -> CouplingModel:
    """Coupling with fixed magnitude profiles and uniform random phases.

    Sector ``s`` takes profile ``s % len(magnitudes)``; every (sector,
    subcarrier, lag) draws its own phase from ``U[-pi, pi]``.
    """
    mags = np.asarray(magnitudes, dtype=float)
    L = mags.shape[1] + 1
    prof = mags[np.arange(n_sectors) % mags.shape[0]]
    phases = rng.uniform(-np.pi, np.pi, size=(n_sectors, n_subcarriers, L - 1))
    c = np.ones((n_sectors, n_subcarriers, L), dtype=np.complex128)
    c[..., 1:] = prof[:, None, :] * np.exp(1j * phases)
    return CouplingModel(c)


def random_angles(n_targets: int, rng: np.random.Generator, low: float = -np.pi / 2,
                  high: float = np.pi / 2, min_separation: float = 0.0,
                  max_draws: int = 10_000) -> np.ndarray:
    """Uniform physical angles, redrawn until pairwise gaps exceed ``min_separation``."""
    for _ in range(max_draws):
        ang = np.sort(rng.uniform(low, high, size=n_targets))
        if n_targets < 2 or np.min(np.diff(ang)) >= min_separation:
            return ang
    raise ValueError("could not place targets with the requested separation")


def random_betas(n_targets: int, rng: np.random.Generator) -> np.ndarray:
    return np.exp(1j * rng.uniform(-np.pi, np.pi, size=n_targets))
