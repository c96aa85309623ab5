"""Experiment driver: JSON configs, Monte-Carlo RMSE sweeps, spectrum and gain dumps.

Every run returns a :class:`ResultTable` which serializes to CSV with a
``#``-prefixed header recording the tool version, config hash and seed.
"""
from __future__ import annotations

import copy
import csv
import hashlib
import io
import json
import os
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources

import jsonschema
import numpy as np

from . import __version__
from .array_model import ArrayConfig, CouplingModel, SectorPlan, array_gain
from .estimator import Mode, angle_grid, decompose, estimate_doa, find_peaks, rmse, spectrum
from .scene import (
    COUPLING_MAGNITUDES,
    Scene,
    make_plan,
    random_angles,
    random_betas,
    random_coupling,
    synth_snapshots,
)


class ConfigError(ValueError):
    """Invalid experiment config; ``path`` is a JSON-pointer-like location."""

    def __init__(self, message: str, path: str = "$"):
        super().__init__(message)
        self.path = path


_POS_INT = {"type": "integer", "minimum": 1}
_POS_NUM = {"type": "number", "exclusiveMinimum": 0}
_MAGS = {
    "type": "array",
    "minItems": 1,
    "items": {"type": "array", "minItems": 1, "items": {"type": "number", "minimum": 0}},
}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "array": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_antennas": _POS_INT,
                "n_rf": _POS_INT,
                "carrier_ghz": _POS_NUM,
                "bandwidth_ghz": {"type": "number", "minimum": 0},
                "n_subcarriers": _POS_INT,
            },
        },
        "scene": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_targets": _POS_INT,
                "angles_deg": {
                    "oneOf": [
                        {"const": "random"},
                        {"type": "array", "minItems": 1,
                         "items": {"type": "number", "minimum": -90, "maximum": 90}},
                    ]
                },
                "min_separation_deg": {"type": "number", "minimum": 0},
                "betas": {"enum": ["random-phase", "unit"]},
                "band_size": _POS_INT,
                "coupling": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["kind"],
                    "properties": {
                        "kind": {"enum": ["none", "random-phase", "fixed"]},
                        "magnitudes": _MAGS,
                        "phases_deg": _MAGS | {"items": {"type": "array", "items": {"type": "number"}}},
                    },
                },
            },
        },
        "acquisition": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_snapshots": _POS_INT,
                "power": {"oneOf": [{"const": "normalized"}, _POS_NUM]},
            },
        },
        "estimator": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "modes": {"type": "array", "minItems": 1, "uniqueItems": True,
                          "items": {"enum": [m.value for m in Mode]}},
                "grid_step_deg": _POS_NUM,
                "eps": _POS_NUM,
                "max_iter": _POS_INT,
                "n_sectors": _POS_INT,
                "polish": {"type": "boolean"},
            },
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "snr_db": {"type": "array", "minItems": 1, "items": {"type": "number"}},
                "trials": _POS_INT,
                "seed": {"type": "integer", "minimum": 0},
            },
        },
        "spectra": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "snr_db": {"type": ["number", "null"]},
                "modes": {"type": "array", "minItems": 1, "uniqueItems": True,
                          "items": {"enum": [m.value for m in Mode]}},
            },
        },
        "gain": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "theta_deg": {"type": "number", "minimum": -90, "maximum": 90},
                "subcarrier": _POS_INT,
                "step": _POS_NUM,
            },
        },
    },
}

DEFAULTS = {
    "name": "desk",
    "array": {"n_antennas": 64, "n_rf": 8, "carrier_ghz": 300.0, "bandwidth_ghz": 30.0,
              "n_subcarriers": 16},
    "scene": {
        "n_targets": 2,
        "angles_deg": "random",
        "min_separation_deg": 0.0,
        "betas": "random-phase",
        "band_size": 5,
        "coupling": {"kind": "random-phase", "magnitudes": [list(p) for p in COUPLING_MAGNITUDES]},
    },
    "acquisition": {"n_snapshots": 100, "power": "normalized"},
    "estimator": {"modes": ["PLAIN", "BSC", "MCC", "CREAM"], "grid_step_deg": 0.02, "eps": 1e-4,
                  "max_iter": 50, "n_sectors": 6, "polish": True},
    "sweep": {"snr_db": [0.0, 10.0, 20.0], "trials": 50, "seed": 2024},
    "spectra": {"snr_db": None, "modes": ["PLAIN", "CREAM"]},
    "gain": {"theta_deg": 60.0, "subcarrier": 1, "step": 1e-4},
}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "coupling":
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _json_path(err: jsonschema.ValidationError) -> str:
    path = "$"
    for p in err.absolute_path:
        path += f"[{p}]" if isinstance(p, int) else f".{p}"
    return path


def validate_config(raw: dict) -> dict:
    """Validate ``raw`` against the schema and fill defaults.

    Raises:
        ConfigError: with the offending field path.
    """
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    errors = sorted(jsonschema.Draft202012Validator(SCHEMA).iter_errors(raw),
                    key=lambda e: [str(p) for p in e.absolute_path])
    if errors:
        err = errors[0]
        raise ConfigError(err.message, _json_path(err))
    cfg = _merge(DEFAULTS, raw)

    arr = cfg["array"]
    if arr["n_antennas"] % arr["n_rf"]:
        raise ConfigError("n_antennas must be divisible by n_rf", "$.array.n_rf")
    sc = cfg["scene"]
    if sc["angles_deg"] != "random" and len(sc["angles_deg"]) != sc["n_targets"]:
        raise ConfigError("angles_deg length must equal n_targets", "$.scene.angles_deg")
    if sc["n_targets"] >= arr["n_antennas"]:
        raise ConfigError("n_targets must be below n_antennas", "$.scene.n_targets")
    if sc["band_size"] > arr["n_antennas"]:
        raise ConfigError("band_size exceeds n_antennas", "$.scene.band_size")
    coup = sc["coupling"]
    if coup["kind"] != "none":
        mags = coup.get("magnitudes")
        if mags is None:
            raise ConfigError("coupling magnitudes are required", "$.scene.coupling.magnitudes")
        if any(len(row) != sc["band_size"] - 1 for row in mags):
            raise ConfigError("each magnitude profile needs band_size - 1 entries",
                              "$.scene.coupling.magnitudes")
        if coup["kind"] == "fixed":
            ph = coup.get("phases_deg")
            if ph is None or len(ph) != len(mags) or any(len(a) != len(b) for a, b in zip(ph, mags)):
                raise ConfigError("fixed coupling needs phases_deg shaped like magnitudes",
                                  "$.scene.coupling.phases_deg")
    try:
        array_config(cfg)
    except ValueError as exc:
        raise ConfigError(str(exc), "$.array") from exc
    return cfg


def load_config(path: str | os.PathLike) -> dict:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from exc
    return validate_config(raw)


def load_profile(name: str) -> dict:
    """A shipped profile: ``desk``, ``full`` or ``split60``."""
    text = resources.files("thzdoa").joinpath("profiles", f"{name}.json").read_text()
    return validate_config(json.loads(text))


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def array_config(cfg: dict) -> ArrayConfig:
    a = cfg["array"]
    return ArrayConfig(a["n_antennas"], a["n_rf"], a["carrier_ghz"] * 1e9,
                       a["bandwidth_ghz"] * 1e9, a["n_subcarriers"])


def _power(cfg: dict, arr: ArrayConfig) -> float | None:
    p = cfg["acquisition"]["power"]
    return None if p == "normalized" else float(p)


def _coupling(cfg: dict, arr: ArrayConfig, rng: np.random.Generator) -> CouplingModel:
    sc = cfg["scene"]
    S, M, L = cfg["estimator"]["n_sectors"], arr.n_subcarriers, sc["band_size"]
    coup = sc["coupling"]
    if coup["kind"] == "none":
        return CouplingModel.identity(S, M, L)
    if coup["kind"] == "random-phase":
        return random_coupling(S, M, rng, magnitudes=coup["magnitudes"])
    mags = np.asarray(coup["magnitudes"], dtype=float)
    ph = np.deg2rad(np.asarray(coup["phases_deg"], dtype=float))
    prof = (mags * np.exp(1j * ph))[np.arange(S) % mags.shape[0]]
    c = np.ones((S, M, L), dtype=np.complex128)
    c[..., 1:] = prof[:, None, :]
    return CouplingModel(c)


def draw_scene(cfg: dict, arr: ArrayConfig, rng: np.random.Generator) -> Scene:
    """Targets, reflection coefficients and coupling for one trial."""
    sc = cfg["scene"]
    K = sc["n_targets"]
    sectors = SectorPlan.uniform(cfg["estimator"]["n_sectors"])
    if sc["angles_deg"] == "random":
        angles = random_angles(K, rng, min_separation=np.deg2rad(sc["min_separation_deg"]))
    else:
        angles = np.deg2rad(np.sort(np.asarray(sc["angles_deg"], dtype=float)))
    betas = random_betas(K, rng) if sc["betas"] == "random-phase" else np.ones(K, dtype=complex)
    return Scene(angles, betas, _coupling(cfg, arr, rng), sectors)


def trial_rng(seed: int, mode: str, snr_index: int, trial: int) -> np.random.Generator:
    """Independent stream per (seed, mode, SNR point, trial)."""
    return np.random.default_rng([seed, zlib.crc32(mode.encode()), snr_index, trial])


@dataclass
class TrialOutcome:
    estimate: np.ndarray
    truth: np.ndarray
    converged: bool
    iterations: int


def run_trial(cfg: dict, mode: Mode, snr_db: float | None, rng: np.random.Generator) -> TrialOutcome:
    arr = array_config(cfg)
    est_cfg = cfg["estimator"]
    scene = draw_scene(cfg, arr, rng)
    plan = make_plan(arr, cfg["acquisition"]["n_snapshots"], snr_db, rng, power=_power(cfg, arr))
    snaps = synth_snapshots(arr, scene, plan, rng)
    res = estimate_doa(
        snaps.Y, plan.combiner, arr, scene.n_targets, mode=mode,
        sectors=scene.sectors, band_size=cfg["scene"]["band_size"], eps=est_cfg["eps"],
        max_iter=est_cfg["max_iter"], grid=angle_grid(est_cfg["grid_step_deg"]),
        polish=est_cfg["polish"],
    )
    return TrialOutcome(res.angles, scene.angles, res.converged, res.iterations)


# --------------------------------------------------------------------------
# tables

COLUMNS = {
    "sweep": (("mode", str), ("snr_db", float), ("rmse_deg", float), ("trials", int),
              ("failures", int), ("converged_frac", float), ("mean_iter", float)),
    "sweep+timing": (("mode", str), ("snr_db", float), ("rmse_deg", float), ("trials", int),
                     ("failures", int), ("converged_frac", float), ("mean_iter", float),
                     ("wall_s", float)),
    "spectra": (("mode", str), ("subcarrier", int), ("theta_deg", float), ("value", float)),
    "gain": (("subcarrier", int), ("theta_bar", float), ("gain", float)),
}


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass
class ResultTable:
    """Fixed-column result rows plus ordered ``#`` header metadata.

    ``rows`` hold Python scalars. In a spectra table, rows with
    ``subcarrier == 0`` carry the spectrum summed over subcarriers.
    """

    kind: str
    rows: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def columns(self) -> tuple[str, ...]:
        return tuple(name for name, _ in COLUMNS[self.kind])

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# kind: {self.kind}\n")
        for k, v in self.meta.items():
            buf.write(f"# {k}: {v}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([_fmt(v) for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ResultTable":
        meta: dict[str, str] = {}
        body = []
        for line in text.splitlines():
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition(": ")
                meta[key] = val
            elif line:
                body.append(line)
        kind = meta.pop("kind")
        types = [t for _, t in COLUMNS[kind]]
        reader = csv.reader(body)
        header = next(reader)
        if tuple(header) != tuple(n for n, _ in COLUMNS[kind]):
            raise ValueError(f"unexpected columns {header} for table kind {kind}")
        rows = [tuple(t(v) for t, v in zip(types, rec)) for rec in reader]
        return cls(kind, rows, meta)


def _meta(cfg: dict, seed: int | None, **extra) -> dict:
    out = {"tool": f"thzdoa {__version__}", "config": cfg.get("name", ""),
           "config_hash": config_hash(cfg)}
    if seed is not None:
        out["seed"] = seed
    out.update(extra)
    return out


def _workers(threads: int) -> int:
    return (os.cpu_count() or 1) if threads == 0 else max(1, threads)


def run_sweep(cfg: dict, seed: int | None = None, threads: int = 1, timing: bool = False,
              progress=None) -> ResultTable:
    """RMSE versus SNR for every configured mode.

    Args:
        cfg: validated config.
        seed: overrides ``sweep.seed``.
        threads: worker threads for the trials (0 = all cores).
        timing: add a wall-clock column (makes output run-dependent).
        progress: optional callback ``(mode, snr_db)`` invoked per finished cell.
    """
    seed = cfg["sweep"]["seed"] if seed is None else seed
    trials = cfg["sweep"]["trials"]
    table = ResultTable("sweep+timing" if timing else "sweep", meta=_meta(cfg, seed))

    def one(args):
        mode, snr_index, snr, t = args
        try:
            return run_trial(cfg, mode, snr, trial_rng(seed, mode.value, snr_index, t))
        except (ArithmeticError, RuntimeError, ValueError):
            return None

    with ThreadPoolExecutor(max_workers=_workers(threads)) as pool:
        for si, snr in enumerate(cfg["sweep"]["snr_db"]):
            for name in cfg["estimator"]["modes"]:
                mode = Mode(name)
                t0 = time.perf_counter()
                outs = list(pool.map(one, [(mode, si, snr, t) for t in range(trials)]))
                ok = [o for o in outs if o is not None]
                if ok:
                    err = rmse([o.estimate for o in ok], [o.truth for o in ok])
                    conv = float(np.mean([o.converged for o in ok]))
                    iters = float(np.mean([o.iterations for o in ok]))
                else:
                    err = conv = iters = float("nan")
                row = [mode.value, float(snr), err, len(ok), trials - len(ok), conv, iters]
                if timing:
                    row.append(round(time.perf_counter() - t0, 3))
                table.rows.append(tuple(row))
                if progress is not None:
                    progress(mode.value, snr)
    return table


def run_spectra(cfg: dict, snr_db: float | None = None, seed: int | None = None,
                use_config_snr: bool = True) -> ResultTable:
    """Per-subcarrier spectra of one scenario, plus each mode's summed spectrum.

    Coupling-aware modes are run to convergence first; their spectra use the
    final coupling estimates. ``snr_db=None`` with ``use_config_snr`` takes
    ``spectra.snr_db`` (itself ``None`` for noiseless data).
    """
    seed = cfg["sweep"]["seed"] if seed is None else seed
    if snr_db is None and use_config_snr:
        snr_db = cfg["spectra"]["snr_db"]
    arr = array_config(cfg)
    rng = np.random.default_rng([seed, 0])
    scene = draw_scene(cfg, arr, rng)
    plan = make_plan(arr, cfg["acquisition"]["n_snapshots"], snr_db, rng, power=_power(cfg, arr))
    snaps = synth_snapshots(arr, scene, plan, rng)
    est = cfg["estimator"]
    grid = angle_grid(est["grid_step_deg"])
    decomp = decompose(snaps.Y, scene.n_targets)
    table = ResultTable("spectra", meta=_meta(
        cfg, seed, snr_db="noiseless" if snr_db is None else snr_db,
        true_deg=" ".join(repr(float(a)) for a in np.rad2deg(scene.angles))))
    deg = np.rad2deg(grid)
    for name in cfg["spectra"]["modes"]:
        mode = Mode(name)
        coupling = None
        if mode.coupling_aware:
            res = estimate_doa(snaps.Y, plan.combiner, arr, scene.n_targets, mode=mode,
                               sectors=scene.sectors, band_size=cfg["scene"]["band_size"],
                               eps=est["eps"], max_iter=est["max_iter"], grid=grid,
                               polish=est["polish"], decomp=decomp)
            coupling = res.sector_coupling
        spec = spectrum(arr, decomp, plan.combiner, mode, grid, coupling, scene.sectors)
        for m in range(arr.n_subcarriers):
            table.rows.extend((mode.value, m + 1, float(d), float(v))
                              for d, v in zip(deg, spec.per_subcarrier[m]))
        table.rows.extend((mode.value, 0, float(d), float(v)) for d, v in zip(deg, spec.total))
    return table


def spectra_peaks(table: ResultTable, mode: str, n_peaks: int = 1) -> dict[int, np.ndarray]:
    """Peak angles (degrees) per subcarrier column of a spectra table; key 0 is the sum."""
    out: dict[int, np.ndarray] = {}
    rows = [r for r in table.rows if r[0] == mode]
    for m in sorted({r[1] for r in rows}):
        sel = [r for r in rows if r[1] == m]
        ang = np.array([r[2] for r in sel])
        val = np.array([r[3] for r in sel])
        out[m] = find_peaks(val, n_peaks, angles=ang)
    return out


def run_gain(cfg: dict, theta_deg: float | None = None, m: int | None = None,
             step: float | None = None) -> ResultTable:
    """Array gain over a spatial ``theta_bar`` grid on ``[-1, 1]``."""
    g = cfg["gain"]
    theta_deg = g["theta_deg"] if theta_deg is None else theta_deg
    m = g["subcarrier"] if m is None else m
    step = g["step"] if step is None else step
    arr = array_config(cfg)
    arr.check_subcarrier(m)
    theta = float(np.sin(np.deg2rad(theta_deg)))
    n = int(round(2.0 / step)) + 1
    tb = np.linspace(-1.0, 1.0, n)
    gain = array_gain(arr, theta, tb, m)
    argmax = float(arr.eta[m - 1] * theta)
    table = ResultTable("gain", meta=_meta(cfg, None, theta_deg=theta_deg,
                                           analytic_argmax=repr(argmax)))
    table.rows.extend((m, float(t), float(v)) for t, v in zip(tb, gain))
    return table
