"""Flat ``key=value`` pipeline configuration with section prefixes.

Sections: ``fom.*`` (solver and snapshot window), ``pod.*`` (basis size),
``rom.*`` (stepper, relaxation, filter sweeps), ``uq.*`` (viscosity model and
grid levels), ``out.*`` (output directory). Environment variables override
file values: ``EFRROM_FOM_N_NODES=129`` maps to ``fom.n_nodes``.
"""

import os
from dataclasses import dataclass, field, fields

from efrrom.errors import ConfigError
from efrrom.rom import FilterSpec
from efrrom.uq import RandomViscosityModel, smolyak_grid

ENV_PREFIX = "EFRROM_"


def _parse_bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _parse_floats(text):
    return tuple(float(v) for v in text.split(",") if v.strip())


def _parse_ints(text):
    return tuple(int(v) for v in text.split(",") if v.strip())


def _parse_strings(text):
    return tuple(v.strip() for v in text.split(",") if v.strip())


def _parse_chi(text):
    if text.strip().lower() == "dt":
        return None
    return float(text)


def _parse_rank(text):
    if text.strip().lower() == "full":
        return "full"
    return int(text)


@dataclass
class PipelineConfig:
    # full-order solver
    fom_n_nodes: int = 257
    fom_dt: float = 2.0e-3
    fom_t_final: float = 3.0
    fom_snapshot_start: float = 0.5
    fom_snapshot_stride: int = 25
    # basis
    pod_r: object = 4                        # mode count or "full"
    # reduced runs
    rom_chi: object = None                   # None selects chi = dt
    rom_filters: tuple = ("none", "df", "hodf_v1", "hodf_v2")
    rom_delta_sweep: tuple = (5e-3, 6e-3, 7e-3, 7.5e-3, 8e-3, 1e-2, 2e-2)
    rom_delta_sweep_hodf2: tuple = (1e-7, 1.5e-7, 2e-7, 1e-6, 1e-5, 1e-3, 5e-3, 1e-2, 2e-2)
    rom_m_sweep: tuple = (2, 3, 4)
    rom_horizon_factor: float = 2.0
    rom_fom_benchmark: bool = True
    # uncertainty model
    uq_model: str = "constant1d"
    uq_nu0: float = 2.0e-3
    uq_train_level: int = 3
    uq_online_level: int = 6
    uq_seed: int = 20260810
    uq_mc_samples: int = 200
    # output
    out_dir: str = "out"

    def validate(self):
        if self.fom_n_nodes < 3:
            raise ConfigError("fom.n_nodes must be >= 3")
        if self.fom_dt <= 0.0:
            raise ConfigError("fom.dt must be positive")
        if self.fom_t_final <= 0.0:
            raise ConfigError("fom.t_final must be positive")
        if not 0.0 <= self.fom_snapshot_start < self.fom_t_final:
            raise ConfigError("snapshot window must lie within [0, t_final]")
        if self.fom_snapshot_stride < 1:
            raise ConfigError("fom.snapshot_stride must be >= 1")
        if self.pod_r != "full" and (not isinstance(self.pod_r, int) or self.pod_r < 1):
            raise ConfigError("pod.r must be a positive integer or 'full'")
        if self.rom_chi is not None and not 0.0 <= float(self.rom_chi) <= 1.0:
            raise ConfigError("rom.chi must lie in [0, 1] (or 'dt')")
        for kind in self.rom_filters:
            if kind not in ("none", "df", "hodf_v1", "hodf_v2"):
                raise ConfigError(f"unknown filter kind {kind!r} in rom.filters")
        if any(d < 0 for d in self.rom_delta_sweep + self.rom_delta_sweep_hodf2):
            raise ConfigError("filter radii must be >= 0")
        if any(m < 1 for m in self.rom_m_sweep):
            raise ConfigError("filter orders must be >= 1")
        if self.rom_horizon_factor < 1.0:
            raise ConfigError("rom.horizon_factor must be >= 1")
        if self.uq_model not in ("constant1d", "kl5d"):
            raise ConfigError(f"unknown viscosity model {self.uq_model!r}")
        if self.uq_nu0 <= 0.0:
            raise ConfigError("uq.nu0 must be positive")
        if self.uq_train_level < 0 or self.uq_online_level < 0:
            raise ConfigError("grid levels must be >= 0")
        # training must not oversample the online grid (nested rules make the
        # training nodes a subset of the online nodes)
        if self.uq_train_level > self.uq_online_level:
            raise ConfigError("uq.train_level must not exceed uq.online_level")
        if self.uq_mc_samples < 1:
            raise ConfigError("uq.mc_samples must be >= 1")
        return self

    # --- derived quantities -------------------------------------------------

    def model(self):
        return RandomViscosityModel(variant=self.uq_model, nu0=self.uq_nu0)

    def training_grid(self):
        return smolyak_grid(self.model().dim, self.uq_train_level)

    def online_grid(self):
        return smolyak_grid(self.model().dim, self.uq_online_level)

    def rom_start_time(self):
        """Window midpoint snapped onto the time-step lattice."""
        mid = 0.5 * (self.fom_snapshot_start + self.fom_t_final)
        return round(mid / self.fom_dt) * self.fom_dt

    def rom_window_steps(self):
        """Steps from the reduced start time to the snapshot window end."""
        return int(round((self.fom_t_final - self.rom_start_time()) / self.fom_dt))

    def rom_total_steps(self):
        """Steps over the full (extrapolated) reporting horizon."""
        return int(round(self.rom_window_steps() * self.rom_horizon_factor))

    def filter_specs(self):
        """Cross product of the configured filter variants and sweeps."""
        specs = []
        for kind in self.rom_filters:
            if kind == "none":
                specs.append(FilterSpec())
            elif kind == "df":
                specs.extend(FilterSpec(kind="df", delta=d) for d in self.rom_delta_sweep)
            elif kind == "hodf_v1":
                specs.extend(
                    FilterSpec(kind="hodf_v1", delta=d, m=m)
                    for d in self.rom_delta_sweep
                    for m in self.rom_m_sweep
                )
            else:
                specs.extend(
                    FilterSpec(kind="hodf_v2", delta=d, m=m)
                    for d in self.rom_delta_sweep_hodf2
                    for m in self.rom_m_sweep
                )
        return specs


_PARSERS = {
    "fom.n_nodes": ("fom_n_nodes", int),
    "fom.dt": ("fom_dt", float),
    "fom.t_final": ("fom_t_final", float),
    "fom.snapshot_start": ("fom_snapshot_start", float),
    "fom.snapshot_stride": ("fom_snapshot_stride", int),
    "pod.r": ("pod_r", _parse_rank),
    "rom.chi": ("rom_chi", _parse_chi),
    "rom.filters": ("rom_filters", _parse_strings),
    "rom.delta_sweep": ("rom_delta_sweep", _parse_floats),
    "rom.delta_sweep_hodf2": ("rom_delta_sweep_hodf2", _parse_floats),
    "rom.m_sweep": ("rom_m_sweep", _parse_ints),
    "rom.horizon_factor": ("rom_horizon_factor", float),
    "rom.fom_benchmark": ("rom_fom_benchmark", _parse_bool),
    "uq.model": ("uq_model", str),
    "uq.nu0": ("uq_nu0", float),
    "uq.train_level": ("uq_train_level", int),
    "uq.online_level": ("uq_online_level", int),
    "uq.seed": ("uq_seed", int),
    "uq.mc_samples": ("uq_mc_samples", int),
    "out.dir": ("out_dir", str),
}


def load_config(path=None, overrides=None, environ=None):
    """Build a validated configuration from defaults, file, env and overrides."""
    cfg = PipelineConfig()
    if path is not None:
        from efrrom import matio

        try:
            mapping = matio.read_keyvalues(path)
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        _apply(cfg, mapping, f"config file {path}")
    env_pairs = {}
    environ = os.environ if environ is None else environ
    for key, (attr, _) in _PARSERS.items():
        env_name = ENV_PREFIX + key.replace(".", "_").upper()
        if env_name in environ:
            env_pairs[key] = environ[env_name]
    _apply(cfg, env_pairs, "environment")
    _apply(cfg, overrides or {}, "overrides")
    return cfg.validate()


def _apply(cfg, mapping, origin):
    for key, raw in mapping.items():
        if key not in _PARSERS:
            raise ConfigError(f"unknown configuration key {key!r} in {origin}")
        attr, parser = _PARSERS[key]
        try:
            value = parser(raw) if isinstance(raw, str) else raw
        except (ValueError, ConfigError) as exc:
            raise ConfigError(f"bad value for {key} in {origin}: {exc}") from exc
        setattr(cfg, attr, value)


def dump_config(cfg):
    """Render the configuration back to key=value lines (for artifacts)."""
    reverse = {attr: key for key, (attr, _) in _PARSERS.items()}
    lines = []
    for f in fields(cfg):
        key = reverse[f.name]
        value = getattr(cfg, f.name)
        if value is None:
            value = "dt"
        elif isinstance(value, tuple):
            value = ",".join(str(v) for v in value)
        lines.append(f"{key}={value}")
    return "\n".join(lines) + "\n"
