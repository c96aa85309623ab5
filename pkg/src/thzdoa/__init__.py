"""Wideband THz ULA direction finding with beam-split and mutual-coupling calibration."""

__version__ = "0.1.0"

from .array_model import (  # noqa: E402
    ArrayConfig,
    CouplingModel,
    Direction,
    SectorPlan,
    array_gain,
    beam_split_of,
    beam_split_operator,
    coupling_matrix,
    selection_transform,
    steering_corrupted,
    steering_nominal,
    steering_split,
)
from .estimator import (  # noqa: E402
    CalibrationResult,
    Mode,
    SpectrumGrid,
    SubspaceDecomposition,
    angle_grid,
    cream_music,
    decompose,
    estimate_coupling,
    estimate_doa,
    find_peaks,
    noise_subspace,
    rmse,
    sample_covariance,
    spectrum,
)
from .numerics import HermEig, banded_toeplitz, eig_hermitian, solve_regularized  # noqa: E402
from .scene import Scene, gen_combiner, gen_probing, make_plan, snr_to_noise, synth_snapshots  # noqa: E402
