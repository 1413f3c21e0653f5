"""Run scenario scripts through the plant, observers and manager hierarchy."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .baselines import DecisionModel, run_centralized, run_decentralized
from .config import CostModel, HarnessConfig
from .contracts import ContractError, HierarchyReport, validate_hierarchy
from .hierarchy import Action, Decision, Level, PlanBin2, ResilienceHierarchy, check_managers
from .observers import Event, Observer, compile_observer
from .plant import ConfigError, Plant
from .scenarios import ScenarioScript

ARCHITECTURES = ("hierarchical", "centralized", "decentralized")
ACCOUNTING = ("scenario-origin", "physical")


class ComparisonError(ValueError):
    pass


def recovery_time(messages: int, decisions: int, cost: CostModel = CostModel()) -> float:
    if messages < 0 or decisions < 0:
        raise ValueError("counts must be non-negative")
    return messages * cost.message_ms + decisions * cost.decision_ms


def observer_view(events: Iterable[Event]) -> list[Event]:
    """Events as the component observers see them.

    Component latencies are measured from the moment CP starts on the token,
    so the LS1 edge is delivered at the CP activation marker rather than at
    placement.
    """
    out = []
    for e in events:
        if e.signal == "LS1":
            continue
        if e.signal == "CP_ACT":
            e = Event(e.t, "LS1", True, e.token, e.seq)
        out.append(e)
    return out


def validate_config(config: HarnessConfig) -> HierarchyReport:
    check_managers(config.managers)
    return validate_hierarchy(config.hierarchy, config.contracts(), plant=config.plant,
                              latency=config.latency)


# --------------------------------------------------------------------------
# simulation


@dataclass
class EntryResult:
    index: int
    label: str
    scenario_type: Optional[int]
    token: int
    faults: list
    messages: list
    decisions: list
    bin: str
    speed_after: str
    handover: bool


@dataclass
class Simulation:
    config: HarnessConfig
    script: ScenarioScript
    plant: Plant
    hierarchy: ResilienceHierarchy
    entries: list = field(default_factory=list)

    @property
    def faults(self) -> list:
        return self.hierarchy.faults


class _Runner:
    def __init__(self, config: HarnessConfig, script: ScenarioScript):
        self.config = config
        self.script = script
        self.plant = Plant(config.plant)
        contracts = config.contracts()
        self.hierarchy = ResilienceHierarchy(config.managers, contracts, self.plant.speed)
        self.observers: dict[str, list[Observer]] = {}
        for node in config.managers.values():
            if node.level is Level.LEAF:
                self.observers[node.id] = [
                    compile_observer(contracts[c], offset=config.plant.offset,
                                     speed=self.plant.speed)
                    for c in node.contracts
                ]
        self.hierarchy.on_update(self._deliver_update)
        self.sc = 0
        self.ls2_step: dict[int, int] = {}
        self.awaiting_ls2: set[int] = set()

    def _deliver_update(self, node_id: str, update):
        for obs in self.observers.get(node_id, ()):
            obs.set_param(update.param, update.value, update.t)

    def _schedule_bin2(self, token: int):
        cfg = self.config.plant
        at = self.ls2_step[token] + (cfg.ejector_pos[1] - cfg.ls2_pos)
        self.plant.schedule_ejection(token, 2, at)

    def pump(self, events: Iterable[Event]):
        for event in observer_view(events):
            if event.signal == "SC":
                self.sc = event.value
            elif event.signal == "LS2":
                self.ls2_step[event.token] = self.sc
            for leaf, observers in self.observers.items():
                for obs in observers:
                    for outcome in obs.observe(event):
                        for action in self.hierarchy.on_outcome(leaf, outcome):
                            if isinstance(action, PlanBin2):
                                self.awaiting_ls2.add(action.token)
            for token in sorted(self.awaiting_ls2 & set(self.ls2_step)):
                self.awaiting_ls2.discard(token)
                self._schedule_bin2(token)

    def set_speed(self, speed):
        """Out-of-protocol speed change, effective from the next step."""
        if self.plant.speed is speed:
            return
        self.plant.set_speed(speed)
        self.pump(self.plant.advance_to_boundary())
        self.hierarchy.reset_speed(speed)
        for observers in self.observers.values():
            for obs in observers:
                obs.set_param("M_S", speed, self.plant.clock)

    def run_entry(self, index: int, entry) -> EntryResult:
        self.set_speed(entry.speed or self.script.reset_speed)
        if self.plant.clock != self.plant.last_step_t:
            self.pump(self.plant.advance_to_boundary())
        n_msg = len(self.hierarchy.messages)
        n_dec = len(self.hierarchy.decisions)
        n_fault = len(self.hierarchy.faults)
        for injection in entry.expanded():
            self.plant.inject(injection)
        token = self.plant.place_token(entry.colour)
        while self.plant.busy(token):
            self.pump(self.plant.advance(self.plant.next_time()))
        outcome = self.plant.bin_outcome(token)
        tok = self.plant.tokens[token]
        decision = self.hierarchy.root_decide(token, outcome, tok.intended_bin, self.plant.clock)
        if decision is not None and decision.action is Action.SET_SPEED:
            self.plant.set_speed(decision.speed)
            self.pump(self.plant.advance_to_boundary())
        return EntryResult(
            index=index,
            label=entry.label,
            scenario_type=entry.scenario_type,
            token=token,
            faults=self.hierarchy.faults[n_fault:],
            messages=self.hierarchy.messages[n_msg:],
            decisions=self.hierarchy.decisions[n_dec:],
            bin=str(outcome),
            speed_after=self.hierarchy.speed.value,
            handover=decision is not None and decision.action is Action.HANDOVER,
        )


def simulate(config: HarnessConfig, script: ScenarioScript) -> Simulation:
    """Execute ``script`` entry by entry; each token finishes before the next is placed."""
    runner = _Runner(config, script)
    sim = Simulation(config, script, runner.plant, runner.hierarchy)
    for i, entry in enumerate(script.entries):
        sim.entries.append(runner.run_entry(i, entry))
    return sim


# --------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class ScenarioResult:
    index: int
    label: str
    scenario_type: Optional[int]
    token: int
    faults: int
    messages: int
    decisions: int
    bin: str
    speed_after: str
    handover: bool


@dataclass(frozen=True)
class Divergence:
    """A figure that differs under an alternative counting rule."""

    quantity: str
    value: float
    alternative: float
    basis: str


@dataclass(frozen=True)
class RunReport:
    architecture: str
    accounting: str
    decision_model: Optional[str]
    fault_count: int
    messages: int
    decisions: int
    recovery_time_ms: float
    message_ms: float
    decision_ms: float
    bins: tuple  # ((bin, count), ...) plus ("RanOff", n)
    handovers: int
    config_digest: str
    script_digest: str
    scenarios: tuple = ()
    divergences: tuple = ()


def _entry_metrics(entry: EntryResult, arch: str, accounting: str, model: DecisionModel,
                   hierarchy: ResilienceHierarchy) -> tuple[int, int]:
    if arch == "hierarchical":
        return hierarchy.message_count(accounting, entry.messages), len(entry.decisions)
    if arch == "centralized":
        m = run_centralized(entry.faults)
    else:
        m = run_decentralized(entry.faults, model, len(entry.decisions))
    return m.messages, m.decisions


def run_experiment(config: HarnessConfig, script: ScenarioScript,
                   arch: str = "hierarchical", accounting: str = "scenario-origin",
                   decision_model: DecisionModel = DecisionModel.MIRROR_HIERARCHICAL,
                   simulation: Optional[Simulation] = None) -> RunReport:
    if arch not in ARCHITECTURES:
        raise ValueError(f"unknown architecture {arch!r}")
    if accounting not in ACCOUNTING:
        raise ValueError(f"unknown accounting mode {accounting!r}")
    model = DecisionModel(decision_model)
    report = validate_config(config)
    if not report.ok:
        raise ConfigError("invalid configuration: " + "; ".join(report.failures()))
    sim = simulation or simulate(config, script)
    faults = sim.faults

    if arch == "hierarchical":
        messages = sim.hierarchy.message_count(accounting)
        decisions = len(sim.hierarchy.decisions)
    elif arch == "centralized":
        m = run_centralized(faults)
        messages, decisions = m.messages, m.decisions
    else:
        m = run_decentralized(faults, model, len(sim.hierarchy.decisions))
        messages, decisions = m.messages, m.decisions

    scenarios = []
    for entry in sim.entries:
        msgs, decs = _entry_metrics(entry, arch, accounting, model, sim.hierarchy)
        scenarios.append(ScenarioResult(entry.index, entry.label, entry.scenario_type,
                                        entry.token, len(entry.faults), msgs, decs, entry.bin,
                                        entry.speed_after, entry.handover))

    cost = config.cost
    divergences = []
    if arch == "hierarchical" and accounting == "physical":
        origin = sim.hierarchy.message_count("scenario-origin")
        if origin != messages:
            divergences.append(Divergence("messages", messages, origin,
                                          "scenario-origin accounting"))
            divergences.append(Divergence("recovery_time_ms",
                                          recovery_time(messages, decisions, cost),
                                          recovery_time(origin, decisions, cost),
                                          "scenario-origin accounting"))
    if arch == "decentralized":
        other = (DecisionModel.TWO_PER_FAULT if model is DecisionModel.MIRROR_HIERARCHICAL
                 else DecisionModel.MIRROR_HIERARCHICAL)
        alt = run_decentralized(faults, other, len(sim.hierarchy.decisions))
        if alt.decisions != decisions:
            divergences.append(Divergence("decisions", decisions, alt.decisions,
                                          f"{other.value} decision model"))
            divergences.append(Divergence("recovery_time_ms",
                                          recovery_time(messages, decisions, cost),
                                          recovery_time(alt.messages, alt.decisions, cost),
                                          f"{other.value} decision model"))

    bins = tuple((f"bin{b}", len(ids)) for b, ids in sorted(sim.plant.bins.items())) + (
        ("RanOff", len(sim.plant.ran_off)),)
    return RunReport(
        architecture=arch,
        accounting=accounting,
        decision_model=model.value if arch == "decentralized" else None,
        fault_count=len(faults),
        messages=messages,
        decisions=decisions,
        recovery_time_ms=recovery_time(messages, decisions, cost),
        message_ms=cost.message_ms,
        decision_ms=cost.decision_ms,
        bins=bins,
        handovers=sum(1 for d in sim.hierarchy.decisions if d.action is Action.HANDOVER),
        config_digest=config.digest(),
        script_digest=script.digest(),
        scenarios=tuple(scenarios),
        divergences=tuple(divergences),
    )


# --------------------------------------------------------------------------
# comparison


def saving_pct(reference: float, baseline: float) -> int:
    """Integer percent saving, halves rounded up."""
    if baseline == 0:
        return 0
    return math.floor((1 - reference / baseline) * 100 + 0.5)


@dataclass(frozen=True)
class Saving:
    baseline: str
    messages: int
    baseline_messages: int
    message_saving_pct: int
    time_ms: float
    baseline_time_ms: float
    time_saving_pct: int


@dataclass(frozen=True)
class Comparison:
    reference: str
    savings: tuple

    def lines(self) -> list[str]:
        return [
            f"{self.reference} vs {s.baseline}: messages {s.messages}/{s.baseline_messages} "
            f"({s.message_saving_pct}% saved), time {s.time_ms}/{s.baseline_time_ms} ms "
            f"({s.time_saving_pct}% saved)"
            for s in self.savings
        ]


def compare(reports: Sequence[RunReport]) -> Comparison:
    """Savings of the hierarchical run (or the first report) against the others."""
    if len(reports) < 2:
        raise ComparisonError("need at least two reports")
    digests = {(r.config_digest, r.script_digest) for r in reports}
    if len(digests) != 1:
        raise ComparisonError("reports come from different configs or scripts")
    ref = next((r for r in reports if r.architecture == "hierarchical"), reports[0])
    others = list(reports)
    others.remove(ref)
    savings = tuple(
        Saving(r.architecture, ref.messages, r.messages, saving_pct(ref.messages, r.messages),
               ref.recovery_time_ms, r.recovery_time_ms,
               saving_pct(ref.recovery_time_ms, r.recovery_time_ms))
        for r in others
    )
    return Comparison(ref.architecture, savings)
