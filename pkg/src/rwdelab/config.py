"""Flat key=value experiment configuration.

One environment family per experiment; every key is validated against the
documented schema and errors name the offending key.  Configurations
round-trip through text unchanged (sorted keys), which the runner relies
on for provenance hashes.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Dict

from .envs.boolean import BooleanConfig, RadiusLaw
from .envs.renewal import InterarrivalLaw, RenewalConfig
from .lattice import UsageError
from .walk import JumpKernel, kernel_by_name


class ConfigError(ValueError):
    """Invalid or missing configuration key; message names the key."""


# key -> (type tag, required-for, documentation)
SCHEMA = {
    "env.family": ("str", "always", "renewal | boolean"),
    "env.d": ("int", None, "spatial dimension (default 1)"),
    "seed": ("int", None, "master seed (default 0, overridable by --seed)"),
    "boolean.lambda": ("float", "boolean", "Poisson intensity per unit volume"),
    "boolean.beta": ("float", "boolean", "radius tail exponent (> d+1)"),
    "boolean.rho0": ("float", "boolean", "radius scale of the Pareto law"),
    "boolean.rho_max": ("float", "boolean", "hard radius cap (thinned tail reported)"),
    "boolean.trunc_s": ("int", "boolean", "window radius of the regeneration field"),
    "boolean.deterministic_rho": ("float", None, "use a fixed radius instead of Pareto"),
    "renewal.mu": ("str", "renewal", "geometric:q | delta:k | uniform:a:b | pmf:p0,p1,..."),
    "renewal.trunc_s": ("int", "renewal", "window radius of the regeneration field"),
    "renewal.K0": ("int", None, "initial backward depth (default 32)"),
    "renewal.K_max": ("int", None, "backward depth cap (default 65536)"),
    "renewal.horizon": ("int", None, "stopping-time scan horizon (default 100000)"),
    "renewal.moment_order": ("float", None, "declared finite moment 1+delta (default 6)"),
    "kernel.name": ("str", "always", "state_drift | lazy_srw"),
    "kernel.kappa": ("float", None, "ellipticity floor of state_drift (default 0.1)"),
    "kernel.R": ("int", None, "walk range / cone slope (default 1)"),
    "experiment.n": ("int", None, "sample or block count"),
    "experiment.t_final": ("int", None, "direct-run length"),
    "experiment.n_runs": ("int", None, "direct-run count"),
    "experiment.k_min": ("int", None, "smallest ladder scale index"),
    "experiment.k_max": ("int", None, "largest ladder scale index"),
    "experiment.k": ("int", None, "single scale index (qk, akh)"),
    "experiment.J": ("int", None, "fall-on-trap threat blocks"),
    "experiment.H": ("int", None, "threat horizon"),
    "experiment.n_walks": ("int", None, "walks per fixed realization"),
    "experiment.n_realizations": ("int", None, "fixed realizations"),
    "experiment.n_pairs": ("int", None, "battery pair count"),
    "experiment.n_per_pair": ("int", None, "samples per battery pair"),
    "experiment.level": ("float", None, "test level (default 0.05)"),
    "experiment.alpha": ("float", None, "decay exponent for guides/checks"),
    "experiment.slope_max": ("float", None, "pass threshold for fitted slopes"),
    "experiment.band_lo": ("float", None, "battery band lower edge (default 0.02)"),
    "experiment.band_hi": ("float", None, "battery band upper edge (default 0.08)"),
    "experiment.min_passed": ("int", None, "minimum passing pairs (decouple)"),
    "experiment.traps": ("str", None, "explicit traps x:t;x:t (mj)"),
    "experiment.n_instances": ("int", None, "random instances (mj)"),
    "experiment.max_censored_fraction": ("float", None, "blocks check threshold"),
    "experiment.reference_speed": ("float", None, "speed for standardized residuals"),
    "experiment.positive_control": ("int", None, "run the rmp positive control (0/1)"),
}

_PARSERS = {"int": int, "float": float, "str": str}


@dataclass
class ExperimentConfig:
    values: Dict[str, str] = field(default_factory=dict)

    @staticmethod
    def from_text(text: str) -> "ExperimentConfig":
        values: Dict[str, str] = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
            key, val = (part.strip() for part in line.split("=", 1))
            if key not in SCHEMA:
                raise ConfigError(f"unknown key {key!r} (line {lineno})")
            if key in values:
                raise ConfigError(f"duplicate key {key!r} (line {lineno})")
            values[key] = val
        cfg = ExperimentConfig(values)
        cfg.validate()
        return cfg

    @staticmethod
    def from_file(path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return ExperimentConfig.from_text(fh.read())

    def to_text(self) -> str:
        return "".join(f"{k} = {self.values[k]}\n" for k in sorted(self.values))

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:16]

    def validate(self) -> None:
        family = self.values.get("env.family")
        if family is None:
            raise ConfigError("missing required key 'env.family'")
        if family not in ("renewal", "boolean"):
            raise ConfigError(f"env.family must be renewal or boolean, got {family!r}")
        if "kernel.name" not in self.values:
            raise ConfigError("missing required key 'kernel.name'")
        for key, (kind, required, _) in SCHEMA.items():
            if required == family and key not in self.values:
                raise ConfigError(f"missing required key {key!r} for family {family}")
            if key in self.values:
                try:
                    _PARSERS[kind](self.values[key])
                except ValueError as err:
                    raise ConfigError(f"key {key!r}: {err}") from err
        # eager construction catches range errors with the key context
        try:
            self.env_config()
            self.kernel()
        except (UsageError, ConfigError) as err:
            raise ConfigError(str(err)) from err

    # typed accessors ------------------------------------------------------

    def get(self, key: str, default=None):
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}")
        if key not in self.values:
            if default is None:
                raise ConfigError(f"missing required key {key!r}")
            return default
        return _PARSERS[SCHEMA[key][0]](self.values[key])

    def has(self, key: str) -> bool:
        return key in self.values

    @property
    def family(self) -> str:
        return self.values["env.family"]

    def seed(self) -> int:
        return self.get("seed", 0)

    def kernel(self) -> JumpKernel:
        return kernel_by_name(self.get("kernel.name"), self.get("kernel.kappa", 0.1))

    def env_config(self):
        d = self.get("env.d", 1)
        slope = self.get("kernel.R", 1)
        if self.family == "renewal":
            return RenewalConfig(
                mu=self._mu(),
                d=d,
                cone_slope=slope,
                trunc_s=self.get("renewal.trunc_s"),
                k0=self.get("renewal.K0", 32),
                k_max=self.get("renewal.K_max", 1 << 16),
                horizon=self.get("renewal.horizon", 100_000),
            )
        if self.has("boolean.deterministic_rho"):
            law = RadiusLaw.deterministic(self.get("boolean.deterministic_rho"))
        else:
            law = RadiusLaw.pareto(self.get("boolean.rho0"), self.get("boolean.beta"))
        return BooleanConfig(
            d=d,
            cone_slope=slope,
            lam=self.get("boolean.lambda"),
            radius_law=law,
            trunc_s=self.get("boolean.trunc_s"),
            rho_max=self.get("boolean.rho_max"),
        )

    def _mu(self) -> InterarrivalLaw:
        spec = self.get("renewal.mu")
        moment = self.get("renewal.moment_order", 6.0)
        parts = spec.split(":")
        try:
            if parts[0] == "geometric":
                return InterarrivalLaw.geometric(float(parts[1]), moment_order=moment)
            if parts[0] == "delta":
                return InterarrivalLaw.delta(int(parts[1]))
            if parts[0] == "uniform":
                return InterarrivalLaw.uniform_range(int(parts[1]), int(parts[2]))
            if parts[0] == "pmf":
                return InterarrivalLaw.from_pmf(
                    [float(v) for v in parts[1].split(",")], moment_order=moment)
        except (IndexError, ValueError) as err:
            raise ConfigError(f"key 'renewal.mu': cannot parse {spec!r}: {err}") from err
        raise ConfigError(f"key 'renewal.mu': unknown law {parts[0]!r}")


def schema_help() -> str:
    lines = ["configuration keys (key = value, '#' comments):"]
    for key, (kind, required, doc) in SCHEMA.items():
        req = f" [required for {required}]" if required else ""
        lines.append(f"  {key} ({kind}){req}: {doc}")
    return "\n".join(lines)
