"""Experiment configuration: plant geometry, latency tables, hierarchies, costs.

Stored as JSON.  Every field has a default, so a config file only needs the
values it changes.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Union

from .contracts import DEFAULT_HIERARCHY, DEFAULT_LATENCY, Contract, LatencyFn, default_contracts
from .hierarchy import Level, RmNode, default_managers
from .plant import ConfigError, PlantConfig

CONFIG_VERSION = 1


@dataclass(frozen=True)
class CostModel:
    message_ms: float = 1.0
    decision_ms: float = 0.5


@dataclass(frozen=True)
class HarnessConfig:
    plant: PlantConfig = field(default_factory=PlantConfig)
    latency: Mapping = field(default_factory=lambda: dict(DEFAULT_LATENCY))
    hierarchy: Mapping = field(default_factory=lambda: dict(DEFAULT_HIERARCHY))
    managers: Mapping = field(default_factory=default_managers)
    cost: CostModel = field(default_factory=CostModel)

    def contracts(self) -> dict[str, Contract]:
        return default_contracts(self.latency)

    def as_dict(self) -> dict:
        return {
            "version": CONFIG_VERSION,
            "plant": self.plant.as_dict(),
            "latency": {name: fn.as_dict() for name, fn in sorted(self.latency.items())},
            "hierarchy": {p: list(cs) for p, cs in sorted(self.hierarchy.items())},
            "managers": [
                {"id": n.id, "level": n.level.value, "parent": n.parent,
                 "children": list(n.children), "contracts": list(n.contracts), "host": n.host}
                for n in self.managers.values()
            ],
            "cost": {"message_ms": self.cost.message_ms, "decision_ms": self.cost.decision_ms},
        }

    def digest(self) -> str:
        blob = json.dumps(self.as_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, data: Mapping) -> "HarnessConfig":
        version = data.get("version", CONFIG_VERSION)
        if version != CONFIG_VERSION:
            raise ConfigError(f"unsupported config version {version}")
        kwargs = {}
        if "plant" in data:
            kwargs["plant"] = PlantConfig.from_dict(data["plant"])
        latency = dict(DEFAULT_LATENCY)
        for name, table in data.get("latency", {}).items():
            try:
                latency[name] = LatencyFn.from_mapping(name, table)
            except (ValueError, KeyError) as exc:
                raise ConfigError(str(exc)) from None
        kwargs["latency"] = latency
        if "hierarchy" in data:
            kwargs["hierarchy"] = {p: tuple(cs) for p, cs in data["hierarchy"].items()}
        if "managers" in data:
            try:
                kwargs["managers"] = {
                    m["id"]: RmNode(m["id"], Level(m["level"]), m.get("parent"),
                                    tuple(m.get("children", ())), tuple(m.get("contracts", ())),
                                    m.get("host", ""))
                    for m in data["managers"]
                }
            except (KeyError, ValueError) as exc:
                raise ConfigError(f"bad manager entry: {exc}") from None
        if "cost" in data:
            kwargs["cost"] = CostModel(**data["cost"])
        return cls(**kwargs)


def load_config(path: Optional[Union[str, Path]]) -> HarnessConfig:
    if path is None:
        return HarnessConfig()
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return HarnessConfig.from_dict(data)


def dump_config(config: HarnessConfig, path: Union[str, Path]):
    Path(path).write_text(json.dumps(config.as_dict(), indent=2) + "\n")
