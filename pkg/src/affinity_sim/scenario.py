"""Scenario configuration files (YAML) and their round trip to ``Scenario`` objects."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import yaml

from .estimation import ExplorationSchedule
from .model import RateMatrix
from .policies import PolicyKind
from .sim import EngineConfig, PolicySpec
from .workloads import ArrivalSpec, ServiceSpec


class ConfigError(ValueError):
    pass


@dataclass
class PolicyEntry:
    kind: str
    exponent: float = 1.01
    explore: bool = True
    initial_estimates: list[list[float]] | None = None


@dataclass
class Scenario:
    name: str
    rates: list[list[float]]
    proportions: list[float]
    lambdas: list[float]
    policies: list[PolicyEntry]
    arrival_kind: str = "poisson"
    arrival_cap: int | None = None
    service_kind: str = "lognormal"
    sigma: float = 0.25
    s_max: int = 10_000
    horizon: int = 200_000
    warmup: int = 20_000
    replications: int = 5
    seed: int = 0
    sample_interval: int = 100
    invariant_checks: bool = True
    explore_c: float = 0.5
    explore_offset: int = 1
    init_low: float = 0.1
    init_high: float = 1.0
    note: str = ""

    def __post_init__(self):
        try:
            B = RateMatrix(self.rates)
            if len(self.proportions) != B.n_types:
                raise ConfigError("proportions must have one entry per task type")
            if any(p < 0 for p in self.proportions) or abs(sum(self.proportions) - 1.0) > 1e-12:
                raise ConfigError("proportions must be non-negative and sum to 1")
            if not self.lambdas or any(x < 0 for x in self.lambdas):
                raise ConfigError("lambdas must be a non-empty list of non-negative rates")
            if not self.policies:
                raise ConfigError("at least one policy is required")
            for p in self.policies:
                kind = PolicyKind(p.kind)
                if kind in (PolicyKind.CMU_RULE, PolicyKind.BLIND_CMU_RULE) and p.exponent <= 1:
                    raise ConfigError(f"{kind.value}: cost exponent must exceed 1")
            if not 0 < self.init_low < self.init_high:
                raise ConfigError("estimate init range needs 0 < low < high")
            if self.replications < 1:
                raise ConfigError("replications must be >= 1")
            service = self.service_spec()
            for a in {x for row in B.tolist() for x in row}:
                service.check_rate(a)
            self.arrival_spec(max(self.lambdas))
            self.engine_config()
            self.exploration()
        except ConfigError:
            raise
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc

    def rate_matrix(self) -> RateMatrix:
        return RateMatrix(self.rates)

    def arrival_spec(self, lam: float) -> ArrivalSpec:
        return ArrivalSpec(tuple(lam * p for p in self.proportions), self.arrival_kind, self.arrival_cap)

    def service_spec(self) -> ServiceSpec:
        return ServiceSpec(self.service_kind, self.sigma, self.s_max)

    def engine_config(self) -> EngineConfig:
        return EngineConfig(horizon=self.horizon, warmup=self.warmup, seed=self.seed,
                            invariant_checks=self.invariant_checks, sample_interval=self.sample_interval)

    def exploration(self) -> ExplorationSchedule:
        return ExplorationSchedule(self.explore_c, self.explore_offset)

    def policy_specs(self) -> list[PolicySpec]:
        out = []
        for p in self.policies:
            sched = self.exploration()
            if not p.explore:
                sched = ExplorationSchedule(sched.c, sched.t_offset, enabled=False)
            out.append(PolicySpec(PolicyKind(p.kind), p.exponent, sched, self.init_low,
                                  self.init_high, p.initial_estimates))
        return out

    # serialisation

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "note": self.note,
            "system": {"rates": self.rates, "proportions": self.proportions},
            "lambdas": self.lambdas,
            "policies": [
                {k: v for k, v in asdict(p).items() if v is not None} for p in self.policies
            ],
            "arrivals": {"kind": self.arrival_kind, "cap": self.arrival_cap},
            "service": {"kind": self.service_kind, "sigma": self.sigma, "s_max": self.s_max},
            "engine": {
                "horizon": self.horizon,
                "warmup": self.warmup,
                "replications": self.replications,
                "seed": self.seed,
                "sample_interval": self.sample_interval,
                "invariant_checks": self.invariant_checks,
            },
            "exploration": {"c": self.explore_c, "t_offset": self.explore_offset},
            "estimates": {"low": self.init_low, "high": self.init_high},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        if not isinstance(d, dict):
            raise ConfigError("config must be a mapping")
        try:
            system = d["system"]
            kw = dict(
                name=str(d.get("name", "scenario")),
                note=str(d.get("note", "")),
                rates=[[float(x) for x in row] for row in system["rates"]],
                proportions=[float(x) for x in system["proportions"]],
                lambdas=[float(x) for x in d["lambdas"]],
                policies=[PolicyEntry(**p) for p in d["policies"]],
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed config: {exc!r}") from exc
        sections = {
            "arrivals": {"kind": "arrival_kind", "cap": "arrival_cap"},
            "service": {"kind": "service_kind", "sigma": "sigma", "s_max": "s_max"},
            "engine": {k: k for k in ("horizon", "warmup", "replications", "seed",
                                      "sample_interval", "invariant_checks")},
            "exploration": {"c": "explore_c", "t_offset": "explore_offset"},
            "estimates": {"low": "init_low", "high": "init_high"},
        }
        for section, keys in sections.items():
            body = d.get(section) or {}
            unknown = set(body) - set(keys)
            if unknown:
                raise ConfigError(f"unknown keys in [{section}]: {sorted(unknown)}")
            for key, attr in keys.items():
                if key in body:
                    kw[attr] = body[key]
        return cls(**kw)

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=None)

    @classmethod
    def loads(cls, text: str) -> "Scenario":
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse config: {exc}") from exc
        return cls.from_dict(data)


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    return Scenario.loads(text)


def builtin_config(name: str) -> Path:
    """Path of a config shipped in ``affinity_sim/data``."""
    return Path(str(resources.files("affinity_sim") / "data" / f"{name}.yaml"))
