"""Fault scenario scripts."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Union

from .contracts import SpeedLevel
from .plant import Injection, LatencyInflation, PlantError, Slip

SCRIPT_VERSION = 1

# canonical injections under the default configuration
SCENARIO_INJECTIONS: dict[int, tuple] = {
    1: (LatencyInflation("CP", 250),),
    2: (LatencyInflation("BS", 250),),
    3: (LatencyInflation("CP", 250), LatencyInflation("BS", 250)),
    4: (LatencyInflation("BS", 1550),),
    5: (Slip(3),),
    6: (LatencyInflation("BS", 1550), Slip(3)),
}

CANONICAL_ORDER = (1, 2, 3, 1, 2, 3, 4, 5, 6)


class ScriptError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioEntry:
    scenario_type: Optional[int] = None
    injections: tuple = ()
    colour: str = "W"
    speed: Optional[SpeedLevel] = None  # None: the script's reset speed
    label: str = ""

    def __post_init__(self):
        if self.scenario_type is not None and self.scenario_type not in SCENARIO_INJECTIONS:
            raise ScriptError(f"scenario type must be 1..6, got {self.scenario_type}")
        if self.speed is not None:
            object.__setattr__(self, "speed", SpeedLevel.parse(self.speed))
        object.__setattr__(self, "injections", tuple(self.injections))
        if not self.label:
            name = f"type{self.scenario_type}" if self.scenario_type else "custom"
            object.__setattr__(self, "label", name)

    def expanded(self) -> tuple:
        if self.injections:
            return self.injections
        if self.scenario_type is not None:
            return SCENARIO_INJECTIONS[self.scenario_type]
        return ()


@dataclass(frozen=True)
class ScenarioScript:
    entries: tuple
    reset_speed: SpeedLevel = SpeedLevel.S1

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        object.__setattr__(self, "reset_speed", SpeedLevel.parse(self.reset_speed))

    def as_dict(self) -> dict:
        return {
            "version": SCRIPT_VERSION,
            "reset_speed": self.reset_speed.value,
            "entries": [_entry_dict(e) for e in self.entries],
        }

    def digest(self) -> str:
        blob = json.dumps(self.as_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, data: Mapping) -> "ScenarioScript":
        if data.get("version", SCRIPT_VERSION) != SCRIPT_VERSION:
            raise ScriptError(f"unsupported script version {data.get('version')}")
        entries = []
        for raw in data.get("entries", ()):
            try:
                entries.append(ScenarioEntry(
                    scenario_type=raw.get("type"),
                    injections=tuple(injection_from_dict(i) for i in raw.get("injections", ())),
                    colour=raw.get("colour", "W"),
                    speed=raw.get("speed"),
                    label=raw.get("label", ""),
                ))
            except (PlantError, ValueError, KeyError, TypeError) as exc:
                raise ScriptError(f"bad scenario entry {raw}: {exc}") from None
        return cls(tuple(entries), data.get("reset_speed", "S1"))


def canonical_script() -> ScenarioScript:
    """Types 1-3 twice, types 4-6 once; one white token each."""
    return ScenarioScript(tuple(ScenarioEntry(k) for k in CANONICAL_ORDER))


def injection_to_dict(inj: Injection) -> dict:
    if isinstance(inj, LatencyInflation):
        return {"kind": "latency", "component": inj.component, "ms": inj.ms,
                "absolute": inj.absolute}
    return {"kind": "slip", "steps": inj.steps, "after": inj.after}


def injection_from_dict(data: Mapping) -> Injection:
    kind = data.get("kind")
    if kind == "latency":
        return LatencyInflation(data["component"], data["ms"], data.get("absolute", True))
    if kind == "slip":
        return Slip(data["steps"], data.get("after", "CP"))
    raise ScriptError(f"unknown injection kind {kind!r}")


def _entry_dict(entry: ScenarioEntry) -> dict:
    out: dict = {"label": entry.label}
    if entry.scenario_type is not None:
        out["type"] = entry.scenario_type
    if entry.injections:
        out["injections"] = [injection_to_dict(i) for i in entry.injections]
    out["colour"] = entry.colour
    if entry.speed is not None:
        out["speed"] = entry.speed.value
    return out


def load_script(spec: Optional[Union[str, Path]]) -> ScenarioScript:
    if spec is None or str(spec) == "canonical":
        return canonical_script()
    try:
        return ScenarioScript.from_dict(json.loads(Path(spec).read_text()))
    except json.JSONDecodeError as exc:
        raise ScriptError(f"{spec}: {exc}") from None
