"""Run configuration shared by the solver, the sampling lab and the CLI."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Mapping

import tomli


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    epsilon: float = 1e-4
    omega: float = 705.0
    alpha_base: float = 10.0
    alpha_per_load: float = 0.01
    k_der: int = 1
    ramp_fraction: float = 0.30
    polygon_facets: int = 8
    max_iterations: int = 200
    master_nominal_pf: bool = True
    scenario_cap: int = 20
    seed: int = 0
    # None keeps the bounds written in the case file
    uncertainty_level: float | None = None
    uncertainty_levels: tuple[float, ...] = (0.0, 0.10, 0.25)
    # penalty growth when the cut loop stalls with a positive slack
    omega_growth: float = 10.0
    omega_max: float = 1e9
    gap_tolerance: float = 1e-7
    lp_backend: str = "auto"
    mip_gap: float = 1e-9
    node_limit: int = 1_000_000
    workers: int = 1
    fixed_topology: bool = False
    open_switches: tuple[str, ...] = ()
    n_samples: int = 10_000
    der_window: float = 0.30
    sample_epsilon: float = 1e-6
    check_duals: bool = False

    def __post_init__(self):
        positive = ("epsilon", "omega", "alpha_base", "ramp_fraction", "max_iterations", "scenario_cap",
                    "omega_growth", "omega_max", "gap_tolerance", "node_limit", "workers", "n_samples",
                    "der_window", "sample_epsilon")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)!r}")
        if self.alpha_per_load < 0:
            raise ConfigError("alpha_per_load must be non-negative")
        if self.k_der < 1:
            raise ConfigError("k_der must be at least 1")
        if self.polygon_facets < 4:
            raise ConfigError("polygon_facets must be at least 4")
        if not 0 < self.ramp_fraction <= 1 or not 0 < self.der_window <= 1:
            raise ConfigError("ramp_fraction and der_window must lie in (0, 1]")
        if self.uncertainty_level is not None and not 0 <= self.uncertainty_level < 1:
            raise ConfigError("uncertainty_level must lie in [0, 1)")
        for lv in self.uncertainty_levels:
            if not 0 <= lv < 1:
                raise ConfigError(f"uncertainty level {lv} outside [0, 1)")
        if self.omega_growth <= 1:
            raise ConfigError("omega_growth must exceed 1")
        if self.lp_backend not in ("simplex", "highs", "auto"):
            raise ConfigError(f"unknown lp_backend {self.lp_backend!r}")

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict[str, Any]:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out


_TUPLE_FIELDS = {"uncertainty_levels", "open_switches"}


def config_from_mapping(data: Mapping[str, Any], base: RunConfig | None = None) -> RunConfig:
    base = base or RunConfig()
    known = {f.name: f for f in fields(RunConfig)}
    changes = {}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"unknown configuration key {key!r}")
        if key in _TUPLE_FIELDS:
            value = tuple(value)
        changes[key] = value
    try:
        return base.replace(**changes)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path | None, overrides: Mapping[str, Any] | None = None) -> RunConfig:
    """Read a TOML file (flat keys, or a ``[run]`` table) and apply overrides."""
    data: dict[str, Any] = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                raw = tomli.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML in {path}: {exc}") from exc
        data.update(raw.get("run", raw))
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return config_from_mapping(data)


def render_toml(cfg: RunConfig) -> str:
    lines = ["[run]"]
    for key, value in cfg.as_dict().items():
        if value is None:
            lines.append(f"# {key} = (unset)")
        elif isinstance(value, bool):
            lines.append(f"{key} = {'true' if value else 'false'}")
        elif isinstance(value, str):
            lines.append(f'{key} = "{value}"')
        elif isinstance(value, list):
            inner = ", ".join(f'"{v}"' if isinstance(v, str) else repr(v) for v in value)
            lines.append(f"{key} = [{inner}]")
        else:
            lines.append(f"{key} = {value!r}")
    return "\n".join(lines) + "\n"

