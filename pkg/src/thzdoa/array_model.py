"""ULA geometry, subcarrier grid, steering vectors, beam-split and mutual coupling.

All angles are handled in the spatial (sine) domain, ``theta = sin(phys)``.
Element spacing is half a wavelength at the highest subcarrier, so the
nominal phase progression is ``pi * theta`` per element.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numerics import DimensionError, banded_toeplitz

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class ArrayConfig:
    """Uniform linear array with a hybrid front end and ``M`` subcarriers.

    Frequencies are in Hz.
    """

    n_antennas: int
    n_rf: int
    carrier_freq: float
    bandwidth: float
    n_subcarriers: int
    wave_speed: float = SPEED_OF_LIGHT

    def __post_init__(self):
        if self.n_antennas < 1 or self.n_rf < 1 or self.n_subcarriers < 1:
            raise ValueError("array sizes must be positive")
        if self.n_antennas % self.n_rf:
            raise ValueError(
                f"n_antennas={self.n_antennas} is not divisible by n_rf={self.n_rf}"
            )
        if self.carrier_freq <= 0 or self.bandwidth < 0:
            raise ValueError("carrier frequency must be positive and bandwidth non-negative")
        if self.subcarrier_freqs.min() <= 0:
            raise ValueError("bandwidth too large: lowest subcarrier frequency is not positive")

    @property
    def subcarrier_freqs(self) -> np.ndarray:
        M = self.n_subcarriers
        m = np.arange(1, M + 1)
        return self.carrier_freq + (self.bandwidth / M) * (m - 1 - (M - 1) / 2)

    @property
    def f_max(self) -> float:
        return float(self.subcarrier_freqs[-1])

    @property
    def spacing(self) -> float:
        return self.wave_speed / (2 * self.f_max)

    @property
    def eta(self) -> np.ndarray:
        """Frequency ratios ``f_m / f_M``; the last entry is exactly 1."""
        f = self.subcarrier_freqs
        out = f / f[-1]
        out[-1] = 1.0
        return out

    @property
    def n_slots(self) -> int:
        return self.n_antennas // self.n_rf

    def check_subcarrier(self, m: int) -> None:
        if not 1 <= m <= self.n_subcarriers:
            raise IndexError(f"subcarrier index {m} outside 1..{self.n_subcarriers}")


@dataclass(frozen=True)
class Direction:
    """A far-field direction; ``physical`` in radians, ``spatial = sin(physical)``."""

    physical: float

    def __post_init__(self):
        if not -np.pi / 2 <= self.physical <= np.pi / 2:
            raise ValueError(f"physical angle {self.physical} outside [-pi/2, pi/2]")

    @classmethod
    def from_degrees(cls, deg: float) -> "Direction":
        return cls(float(np.deg2rad(deg)))

    @property
    def spatial(self) -> float:
        return float(np.sin(self.physical))

    @property
    def degrees(self) -> float:
        return float(np.rad2deg(self.physical))


def _spatial(direction) -> float | np.ndarray:
    if isinstance(direction, Direction):
        return direction.spatial
    return np.asarray(direction, dtype=float)


def steering_vector(n_antennas: int, theta) -> np.ndarray:
    """Unit-modulus ULA response ``exp(j pi n theta)``, n = 0..N-1.

    ``theta`` may be an array of spatial angles; the result then has shape
    ``(N, len(theta))``.
    """
    theta = np.asarray(theta, dtype=float)
    n = np.arange(n_antennas)
    return np.exp(1j * np.pi * np.multiply.outer(n, theta))


def steering_nominal(cfg: ArrayConfig, direction) -> np.ndarray:
    return steering_vector(cfg.n_antennas, _spatial(direction))


def steering_split(cfg: ArrayConfig, direction, m: int) -> np.ndarray:
    """Beam-split steering vector at subcarrier ``m`` (1-based): the nominal
    response evaluated at ``eta_m * theta``."""
    cfg.check_subcarrier(m)
    return steering_vector(cfg.n_antennas, cfg.eta[m - 1] * _spatial(direction))


def beam_split_of(cfg: ArrayConfig, direction, m: int):
    """Spatial-angle offset ``(eta_m - 1) * theta`` at subcarrier ``m``."""
    cfg.check_subcarrier(m)
    return (cfg.eta[m - 1] - 1.0) * _spatial(direction)


def beam_split_operator(cfg: ArrayConfig, direction, m: int) -> np.ndarray:
    """Diagonal of the operator mapping the nominal to the split steering vector."""
    delta = beam_split_of(cfg, direction, m)
    return np.exp(1j * np.pi * np.arange(cfg.n_antennas) * delta)


def array_gain(cfg: ArrayConfig, theta: float, theta_bar, m: int):
    """Normalized gain at subcarrier ``m`` of a beam steered to ``theta_bar``
    for a source at ``theta``.

    Uses the Dirichlet-kernel closed form; the removable singularity at
    ``f_M theta_bar = f_m theta`` evaluates to 1. ``theta_bar`` may be an array.
    """
    cfg.check_subcarrier(m)
    N = cfg.n_antennas
    f_m = cfg.subcarrier_freqs[m - 1]
    mu = cfg.spacing * (cfg.f_max * np.asarray(theta_bar, dtype=float) - f_m * theta) / cfg.wave_speed
    num = np.sin(np.pi * N * mu)
    den = N * np.sin(np.pi * mu)
    at_peak = np.isclose(np.sin(np.pi * mu), 0.0, rtol=0.0, atol=1e-15)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(at_peak, 1.0, num / np.where(at_peak, 1.0, den))
    gain = np.abs(ratio) ** 2
    return float(gain) if gain.ndim == 0 else gain


@dataclass
class CouplingModel:
    """Sector- and subcarrier-dependent banded Toeplitz coupling coefficients.

    ``coeffs`` has shape ``(S, M, L)`` with ``coeffs[..., 0] == 1``.
    """

    coeffs: np.ndarray
    band_size: int = field(init=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if c.ndim != 3:
            raise DimensionError(f"coupling coefficients need shape (S, M, L), got {c.shape}")
        if not np.all(c[..., 0] == 1):
            raise ValueError("the first coupling coefficient must be exactly 1")
        self.coeffs = c
        self.band_size = c.shape[2]

    @property
    def n_sectors(self) -> int:
        return self.coeffs.shape[0]

    @property
    def n_subcarriers(self) -> int:
        return self.coeffs.shape[1]

    @classmethod
    def identity(cls, n_sectors: int, n_subcarriers: int, band_size: int = 1) -> "CouplingModel":
        c = np.zeros((n_sectors, n_subcarriers, band_size), dtype=np.complex128)
        c[..., 0] = 1.0
        return cls(c)


def coupling_matrix(model: CouplingModel, s: int, m: int, n_antennas: int) -> np.ndarray:
    """Coupling matrix of sector ``s`` (0-based) at subcarrier ``m`` (1-based)."""
    return banded_toeplitz(model.coeffs[s, m - 1], n_antennas)


def steering_corrupted(cfg: ArrayConfig, model: CouplingModel, direction, m: int, s: int) -> np.ndarray:
    """Steering vector distorted by both beam-split and coupling sector ``s``."""
    C = coupling_matrix(model, s, m, cfg.n_antennas)
    return C @ steering_split(cfg, direction, m)


def selection_transform(a, L: int) -> np.ndarray:
    """Linearize the coupling product in its coefficients.

    Returns ``T`` (``N x L``) whose column ``l`` is ``S_l a``, with ``S_l``
    the 0/1 mask of lag ``l`` in a symmetric banded Toeplitz matrix. Then
    ``T @ c == banded_toeplitz(c, N) @ a`` for every ``c`` of length ``L``.
    ``a`` may also be a stack ``(N, G)``, giving ``(G, N, L)``.
    """
    a = np.asarray(a, dtype=np.complex128)
    N = a.shape[0]
    if L < 1 or L > N:
        raise DimensionError(f"band size {L} invalid for {N} antennas")
    T = np.zeros((L,) + a.shape, dtype=np.complex128)
    T[0] = a
    for lag in range(1, L):
        T[lag, :-lag] += a[lag:]
        T[lag, lag:] += a[:-lag]
    return np.moveaxis(T, 0, -1) if a.ndim == 1 else np.moveaxis(T, (0, 1, 2), (2, 1, 0))


@dataclass(frozen=True)
class SectorPlan:
    """Partition of ``[-pi/2, pi/2]`` (physical radians) into angular sectors.

    ``edges`` holds ``S + 1`` increasing boundaries. Sectors are half-open
    ``[e_s, e_{s+1})`` except the last, which also includes ``pi/2``.
    """

    edges: tuple

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=float)
        if e.ndim != 1 or e.size < 2 or np.any(np.diff(e) <= 0):
            raise ValueError("sector edges must be strictly increasing with at least two entries")
        if not (np.isclose(e[0], -np.pi / 2) and np.isclose(e[-1], np.pi / 2)):
            raise ValueError("sector edges must span [-pi/2, pi/2]")

    @classmethod
    def uniform(cls, n_sectors: int) -> "SectorPlan":
        if n_sectors < 1:
            raise ValueError("need at least one sector")
        return cls(tuple(np.linspace(-np.pi / 2, np.pi / 2, n_sectors + 1)))

    @property
    def n_sectors(self) -> int:
        return len(self.edges) - 1

    def sector_of(self, angles):
        """Sector index of physical angle(s) in radians."""
        inner = np.asarray(self.edges[1:-1])
        return np.searchsorted(inner, angles, side="right")
