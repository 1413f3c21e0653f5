"""Three-level resilience-manager hierarchy.

Leaf managers own the component contracts and forward violations, L1
absorbs latency overruns within its slack, and the root degrades the belt
speed.  Only two message kinds travel between managers: fault reports
(child to parent) and parameter updates (root downwards).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Mapping, Optional, Sequence, Union

from .contracts import ClauseMode, Contract, LatencyFn, SpeedLevel
from .observers import ObserverOutcome
from .plant import BinOutcome


class RoutingError(ValueError):
    pass


class AuthorityError(ValueError):
    pass


class SequencingError(ValueError):
    pass


class Level(enum.Enum):
    LEAF = "Leaf"
    L1 = "L1"
    ROOT = "Root"


@dataclass(frozen=True)
class RmNode:
    id: str
    level: Level
    parent: Optional[str] = None
    children: tuple = ()
    contracts: tuple = ()
    host: str = ""


def default_managers() -> dict[str, RmNode]:
    nodes = [
        RmNode("CP", Level.LEAF, "LM", (), ("C_CP",), "CP"),
        RmNode("BS", Level.LEAF, "LM", (), ("C_BS",), "BS"),
        RmNode("EC", Level.LEAF, "MC", (), ("C_EC",), "EC"),
        RmNode("LM", Level.L1, "MC", ("CP", "BS"), ("C_LM",), "BS"),
        RmNode("MC", Level.ROOT, None, ("LM", "EC"), ("C_MC",), "MC"),
    ]
    return {n.id: n for n in nodes}


def check_managers(nodes: Mapping[str, RmNode]) -> str:
    """Return the root id; raise if the managers do not form a tree."""
    roots = [n.id for n in nodes.values() if n.parent is None]
    if len(roots) != 1 or nodes[roots[0]].level is not Level.ROOT:
        raise RoutingError(f"need exactly one root manager, found {roots}")
    for node in nodes.values():
        if node.parent is not None:
            if node.parent not in nodes or node.id not in nodes[node.parent].children:
                raise RoutingError(f"{node.id}: parent link to {node.parent} is not mutual")
        for child in node.children:
            if child not in nodes or nodes[child].parent != node.id:
                raise RoutingError(f"{node.id}: child {child} does not name it as parent")
    seen, stack = set(), [roots[0]]
    while stack:
        nid = stack.pop()
        if nid in seen:
            raise RoutingError(f"cycle through {nid}")
        seen.add(nid)
        stack.extend(nodes[nid].children)
    if seen != set(nodes):
        raise RoutingError(f"unreachable managers {sorted(set(nodes) - seen)}")
    return roots[0]


class FaultClass(enum.Enum):
    LATENCY = "Latency"
    JITTER = "Jitter"


@dataclass(frozen=True)
class FaultReport:
    sender: str
    contract: str
    fault_class: FaultClass
    token: Optional[int]
    t: float
    observed_latency: Optional[float] = None
    violation_amount: Optional[float] = None


@dataclass(frozen=True)
class ParameterUpdate:
    value: SpeedLevel
    t: float
    param: str = "M_S"


@dataclass(frozen=True)
class Message:
    t: float
    sender: str
    receiver: str
    payload: Union[FaultReport, ParameterUpdate]
    # leaf report whose fault was forwarded upward by L1
    superseded: bool = False

    @property
    def kind(self) -> str:
        return type(self.payload).__name__


class Action(enum.Enum):
    NO_ACTION = "NoAction"
    ABSORB = "Absorb"
    ESCALATE = "Escalate"
    SET_SPEED = "SetSpeed"
    HANDOVER = "HandOverToSystemControl"


@dataclass(frozen=True)
class Decision:
    maker: str
    t: float
    action: Action
    speed: Optional[SpeedLevel] = None
    token: Optional[int] = None

    def __str__(self):
        if self.action is Action.SET_SPEED:
            return f"SetSpeed({self.speed.value})"
        return self.action.value


@dataclass(frozen=True)
class PlanBin2:
    """EC local recovery: eject the token into bin 2 once LS2 is seen."""

    token: Optional[int]


# --------------------------------------------------------------------------
# policies


def _fault_class(contract: Contract) -> FaultClass:
    if any(c.mode is ClauseMode.BICONDITIONAL for c in contract.guarantee):
        return FaultClass.JITTER
    return FaultClass.LATENCY


def leaf_on_violation(node: RmNode, outcome: ObserverOutcome,
                      contracts: Mapping[str, Contract]) -> tuple[list[Message], list]:
    """Leaves have no recovery of their own: report upward with C_L attached."""
    if outcome.contract not in node.contracts:
        raise RoutingError(f"{node.id} does not own {outcome.contract}")
    if not outcome.violated:
        return [], []
    cls = _fault_class(contracts[outcome.contract])
    report = FaultReport(node.id, outcome.contract, cls, outcome.token, outcome.t,
                         observed_latency=outcome.observed_latency)
    actions = [PlanBin2(outcome.token)] if cls is FaultClass.JITTER else []
    return [Message(outcome.t, node.id, node.parent, report)], actions


def _deadline(node: RmNode, contracts: Mapping[str, Contract]) -> LatencyFn:
    for name in node.contracts:
        fns = contracts[name].deadlines()
        if fns:
            return fns[0]
    raise RoutingError(f"{node.id} has no latency-bounded contract")


def l1_evaluate(node: RmNode, reports: Sequence[FaultReport], *, speed: SpeedLevel,
                managers: Mapping[str, RmNode], contracts: Mapping[str, Contract]
                ) -> list[tuple[Decision, Optional[Message]]]:
    """One decision per report, each using every actual latency received so far.

    Non-reporting children are charged their worst-case bound.  Returns a
    (decision, escalation) pair per report; escalation is None on absorb.
    """
    budget = _deadline(node, contracts)(speed)
    actual: dict[str, Optional[float]] = {}
    results = []
    for report in reports:
        if report.sender not in node.children:
            raise RoutingError(f"{report.sender} is not a child of {node.id}")
        actual[report.sender] = report.observed_latency
        total = 0.0
        for child in node.children:
            if child in actual:
                total += math.inf if actual[child] is None else actual[child]
            else:
                total += _deadline(managers[child], contracts)(speed)
        if total <= budget:
            results.append((Decision(node.id, report.t, Action.ABSORB, token=report.token), None))
            continue
        violation = None if math.isinf(total) else total - budget
        up = FaultReport(node.id, node.contracts[0], FaultClass.LATENCY, report.token, report.t,
                         violation_amount=violation)
        results.append((Decision(node.id, report.t, Action.ESCALATE, token=report.token),
                        Message(report.t, node.id, node.parent, up)))
    return results


def select_degraded_speed(violation_ms: Optional[float], current: SpeedLevel,
                          f_lm: LatencyFn) -> Optional[SpeedLevel]:
    """Least-degraded slower speed whose budget covers the violation, else None.

    An unknown violation (component never answered) asks for the slowest speed.
    """
    slower = SpeedLevel.parse(current).slower()
    if violation_ms is None:
        return slower[-1] if slower else None
    need = f_lm(current) + violation_ms
    return next((s for s in slower if f_lm(s) >= need), None)


def propagate_update(update: ParameterUpdate, issuer: RmNode,
                     managers: Mapping[str, RmNode],
                     contracts: Mapping[str, Contract]) -> list[Message]:
    """One message per lower-level manager whose contracts use the parameter."""
    if issuer.level is not Level.ROOT:
        raise AuthorityError(f"{issuer.id} is not the root and cannot update parameters")
    out = []
    queue = list(issuer.children)
    while queue:
        node = managers[queue.pop(0)]
        queue.extend(node.children)
        if any(update.param in contracts[c].params for c in node.contracts):
            out.append(Message(update.t, issuer.id, node.id, update))
    return out


def l2_decide(node: RmNode, reports: Sequence[FaultReport], outcome: BinOutcome, *,
              correct_bin: int, speed: SpeedLevel, managers: Mapping[str, RmNode],
              contracts: Mapping[str, Contract], t: float
              ) -> tuple[Decision, list[Message]]:
    """Root decision for one token once its bin outcome is known.

    Precedence: token in the correct bin, then jitter (slowest speed), then
    latency (degrade just enough, or hand over to system control).
    """
    if not outcome.terminal:
        raise SequencingError("root decides only after the token's bin outcome is known")
    if not reports:
        raise ValueError("no reports to decide on")
    for r in reports:
        if r.sender not in node.children:
            raise RoutingError(f"{r.sender} is not a child of {node.id}")
    token = reports[0].token
    if outcome == BinOutcome("Binned", correct_bin):
        return Decision(node.id, t, Action.NO_ACTION, token=token), []
    if any(r.fault_class is FaultClass.JITTER for r in reports):
        target = SpeedLevel.S3
    else:
        amounts = [r.violation_amount for r in reports]
        violation = None if None in amounts else max(amounts)
        target = select_degraded_speed(violation, speed, _deadline(node, contracts))
        if target is None:
            return Decision(node.id, t, Action.HANDOVER, token=token), []
    update = ParameterUpdate(target, t)
    return (Decision(node.id, t, Action.SET_SPEED, target, token),
            propagate_update(update, node, managers, contracts))


# --------------------------------------------------------------------------
# runtime


class ResilienceHierarchy:
    """Message-driven runtime for a manager tree; logs every message and decision."""

    def __init__(self, managers: Mapping[str, RmNode], contracts: Mapping[str, Contract],
                 speed: SpeedLevel = SpeedLevel.S1):
        self.managers = dict(managers)
        self.root = check_managers(self.managers)
        self.contracts = contracts
        self.speed = SpeedLevel.parse(speed)
        self.messages: list[Message] = []
        self.decisions: list[Decision] = []
        self.faults: list[FaultReport] = []
        self._l1_reports: dict[tuple, list[FaultReport]] = {}
        self._l1_msg_index: dict[tuple, list[int]] = {}
        self._root_reports: dict = {}
        self._reported: set = set()
        self._listeners: list[Callable[[str, ParameterUpdate], None]] = []

    def on_update(self, listener: Callable[[str, ParameterUpdate], None]):
        self._listeners.append(listener)

    def owner_of(self, contract: str) -> RmNode:
        for node in self.managers.values():
            if node.level is Level.LEAF and contract in node.contracts:
                return node
        raise RoutingError(f"no leaf owns {contract}")

    def on_outcome(self, leaf_id: str, outcome: ObserverOutcome) -> list:
        """Handle an observer verdict at a leaf; returns local recovery actions."""
        node = self.managers[leaf_id]
        messages, actions = leaf_on_violation(node, outcome, self.contracts)
        if not messages:
            return []
        key = (leaf_id, outcome.contract, outcome.token)
        if messages[0].payload.fault_class is FaultClass.JITTER:
            # one report per token, however many ways the biconditional fails
            if key in self._reported:
                return []
        self._reported.add(key)
        self.faults.append(messages[0].payload)
        for msg in messages:
            self._send(msg)
        return actions

    def _send(self, msg: Message):
        self.messages.append(msg)
        index = len(self.messages) - 1
        receiver = self.managers[msg.receiver]
        if not isinstance(msg.payload, FaultReport):
            return
        if receiver.level is Level.L1:
            key = (receiver.id, msg.payload.token)
            reports = self._l1_reports.setdefault(key, [])
            reports.append(msg.payload)
            self._l1_msg_index.setdefault(key, []).append(index)
            decision, escalation = l1_evaluate(receiver, reports, speed=self.speed,
                                               managers=self.managers,
                                               contracts=self.contracts)[-1]
            self.decisions.append(decision)
            if escalation is not None:
                self.messages[index] = replace(msg, superseded=True)
                self._send(escalation)
        elif receiver.level is Level.ROOT:
            self._root_reports.setdefault(msg.payload.token, []).append(msg.payload)

    def has_root_reports(self, token) -> bool:
        return bool(self._root_reports.get(token))

    def root_decide(self, token, outcome: BinOutcome, correct_bin: int, t: float
                    ) -> Optional[Decision]:
        """Batch every root-level report for ``token`` into one decision."""
        reports = self._root_reports.pop(token, [])
        if not reports:
            return None
        root = self.managers[self.root]
        decision, updates = l2_decide(root, reports, outcome, correct_bin=correct_bin,
                                      speed=self.speed, managers=self.managers,
                                      contracts=self.contracts, t=t)
        self.decisions.append(decision)
        if decision.action is Action.SET_SPEED:
            self.speed = decision.speed
        for msg in updates:
            self.messages.append(msg)
            for listener in self._listeners:
                listener(msg.receiver, msg.payload)
        return decision

    def reset_speed(self, speed: SpeedLevel):
        """Out-of-protocol restore between scenarios; sends nothing."""
        self.speed = SpeedLevel.parse(speed)

    def message_count(self, accounting: str = "scenario-origin",
                      messages: Optional[Iterable[Message]] = None) -> int:
        msgs = self.messages if messages is None else messages
        if accounting == "physical":
            return sum(1 for _ in msgs)
        if accounting == "scenario-origin":
            return sum(1 for m in msgs if not m.superseded)
        raise ValueError(f"unknown accounting mode {accounting!r}")
