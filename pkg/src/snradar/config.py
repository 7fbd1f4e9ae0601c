"""Experiment configuration: dataclasses, JSON (de)serialisation, profiles.

The JSON config file mirrors the dataclass field names section by
section; any omitted field keeps its default.  Two built-in profiles:

* ``desk``  -- B = 10 MHz, T = 100 us, T_p = 10 us, L = 50 (N = 1000,
  M = 200 at the default one-fifth compression); sweeps finish in minutes.
* ``paper`` -- B = 100 MHz, same timing, L = 100 (N = 10000, M = 2000).
"""

import json
from dataclasses import asdict, dataclass, field, replace

from .scene import RadarParams

PROFILES = ("desk", "paper")


@dataclass(frozen=True)
class SceneSpec:
    """Random-scene parameters, or an explicit target list."""

    num_targets: int = 10
    delay_range_s: tuple = (0.0, 10e-6)
    doppler_range_hz: tuple = (-5e3, 5e3)
    gain_range: tuple = (0.1, 1.0)
    min_delay_sep_cells: float = 2.0
    min_doppler_sep_cells: float = 2.0
    # explicit targets as (delay_s, doppler_hz, gain_re, gain_im) rows; wins
    # over the random parameters when set
    targets: tuple | None = None


@dataclass(frozen=True)
class PursuitSettings:
    """Pursuit knobs in cell units; ``max_atoms=None`` derives a per-trial cap."""

    max_atoms: int | None = None
    residual_stop_ratio: float = 1e-3
    refine_max_iter: int = 50
    refine_step_tol_cells: float = 1e-6
    grid_step_cells: float = 1.0


@dataclass(frozen=True)
class EstimatorSettings:
    method: str = "esprit"  # esprit | esprit-fb | dft
    model_order: int | None = None  # None: use the scene's group count
    merge_tol_cells: float = 0.1
    subarray_len: int | None = None  # esprit-fb only
    pursuit: PursuitSettings = field(default_factory=PursuitSettings)


@dataclass(frozen=True)
class SweepSettings:
    snr_db: tuple = (-20.0, -10.0, 0.0, 10.0, 20.0)
    trials: int = 50
    noiseless: bool = False
    fixed_scene: bool = False
    compute_crb: bool = True


@dataclass(frozen=True)
class ExperimentConfig:
    radar: RadarParams
    scene: SceneSpec = field(default_factory=SceneSpec)
    estimator: EstimatorSettings = field(default_factory=EstimatorSettings)
    sweep: SweepSettings = field(default_factory=SweepSettings)
    compression_ratio: float = 5.0
    num_measurements: int | None = None
    seed: int = 0

    @property
    def measurement_rows(self) -> int:
        if self.num_measurements is not None:
            return self.num_measurements
        return int(round(self.radar.nyq_count / self.compression_ratio))


def desk_params() -> RadarParams:
    return RadarParams(
        bandwidth_hz=10e6, pulse_width_s=10e-6, pri_s=100e-6, num_pulses=50
    )


def paper_params() -> RadarParams:
    return RadarParams(
        bandwidth_hz=100e6, pulse_width_s=10e-6, pri_s=100e-6, num_pulses=100
    )


def default_config(profile: str = "desk") -> ExperimentConfig:
    if profile == "desk":
        return ExperimentConfig(radar=desk_params())
    if profile == "paper":
        return ExperimentConfig(radar=paper_params())
    raise ValueError(f"unknown profile {profile!r}; expected one of {PROFILES}")


def config_to_dict(cfg: ExperimentConfig) -> dict:
    out = asdict(cfg)
    out["radar"] = asdict(cfg.radar)
    return out


def _tuple_or_none(value):
    if value is None:
        return None
    return tuple(tuple(v) if isinstance(v, (list, tuple)) else v for v in value)


def config_from_dict(data: dict, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Build a config from a (possibly partial) dict, overriding ``base``."""
    cfg = base if base is not None else default_config()
    if "radar" in data:
        cfg = replace(cfg, radar=RadarParams(**data["radar"]))
    if "scene" in data:
        fields = dict(data["scene"])
        for key in ("delay_range_s", "doppler_range_hz", "gain_range"):
            if key in fields:
                fields[key] = tuple(fields[key])
        if "targets" in fields:
            fields["targets"] = _tuple_or_none(fields["targets"])
        cfg = replace(cfg, scene=replace(cfg.scene, **fields))
    if "estimator" in data:
        fields = dict(data["estimator"])
        if "pursuit" in fields:
            fields["pursuit"] = replace(cfg.estimator.pursuit, **fields["pursuit"])
        cfg = replace(cfg, estimator=replace(cfg.estimator, **fields))
    if "sweep" in data:
        fields = dict(data["sweep"])
        if "snr_db" in fields:
            fields["snr_db"] = tuple(fields["snr_db"])
        cfg = replace(cfg, sweep=replace(cfg.sweep, **fields))
    for key in ("compression_ratio", "num_measurements", "seed"):
        if key in data:
            cfg = replace(cfg, **{key: data[key]})
    return cfg


def load_config(path, base: ExperimentConfig | None = None) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return config_from_dict(json.load(fh), base=base)


def save_config(cfg: ExperimentConfig, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config_to_dict(cfg), fh, indent=2)
        fh.write("\n")
