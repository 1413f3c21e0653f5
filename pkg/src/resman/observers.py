"""Runtime observers compiled from contracts.

An observer consumes a time-ordered event trace and emits one outcome per
clause activation.  Bounded-response clauses are keyed by token and record
the actual latency (C_L) from trigger to obligation.  Biconditional clauses
are checked at belt-step granularity.

:func:`offline_check` recomputes the same outcomes from the whole trace in
batch form and is used as the oracle for :class:`Observer`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Iterable, Optional, Sequence

from .contracts import (
    SIGNALS,
    ClauseMode,
    Contract,
    ContractError,
    GuaranteeClause,
    SignalKind,
    SpeedLevel,
    eval_predicate,
    signals_of,
)

GLOBAL_SIGNALS = frozenset({"SC"})
# trace records that are not contract signals
MARKERS = frozenset({"EXIT", "CP_ACT", "M_S", "EJECT"})


class TraceError(ValueError):
    pass


class CompileError(ContractError):
    pass


@dataclass(frozen=True)
class Event:
    t: float
    signal: str
    value: Any = True
    token: Optional[int] = None
    seq: int = 0


class Verdict(enum.Enum):
    SATISFIED = "Satisfied"
    VIOLATED = "Violated"
    PENDING = "Pending"


class ViolationKind(enum.Enum):
    DEADLINE_EXCEEDED = "DeadlineExceeded"
    MISSING_TRIGGER = "MissingTrigger"
    UNEXPECTED_TRIGGER = "UnexpectedTrigger"


@dataclass(frozen=True)
class ObserverOutcome:
    contract: str
    verdict: Verdict
    t: float
    token: Optional[int] = None
    observed_latency: Optional[float] = None
    violation_kind: Optional[ViolationKind] = None
    excess: Optional[float] = None
    clause: int = 0
    trigger_t: Optional[float] = None

    @property
    def violated(self) -> bool:
        return self.verdict is Verdict.VIOLATED

    def sort_key(self):
        return (self.t, -1 if self.token is None else self.token, self.clause,
                -1 if self.trigger_t is None else self.trigger_t, self.verdict.value,
                self.violation_kind.value if self.violation_kind else "")


def sort_outcomes(outcomes: Iterable[ObserverOutcome]) -> list[ObserverOutcome]:
    return sorted(outcomes, key=ObserverOutcome.sort_key)


def _token_default(name: str):
    kind = SIGNALS[name].kind
    if kind is SignalKind.EDGE:
        return False
    if kind is SignalKind.COUNT:
        return 0
    return None


def _token_scoped(names: Iterable[str]) -> list[str]:
    return [n for n in names if n in SIGNALS and n not in GLOBAL_SIGNALS
            and SIGNALS[n].kind is not SignalKind.PARAM]


def _bound_names(clause: GuaranteeClause) -> frozenset[str]:
    """Token signals the obligation needs before it can be judged."""
    return frozenset(n for n in _token_scoped(signals_of(clause.obligation))
                     if SIGNALS[n].kind is not SignalKind.EDGE)


@dataclass
class _Activation:
    trigger_t: float
    bound: float


@dataclass
class _TokenState:
    store: dict
    received: set = field(default_factory=set)
    level: dict = field(default_factory=dict)  # clause -> trigger level without edges
    armed: dict = field(default_factory=dict)  # clause -> list[_Activation]
    o_held: dict = field(default_factory=dict)  # clause -> obligation held in this step
    t_seen: dict = field(default_factory=dict)  # clause -> trigger seen in this step


class Observer:
    """Incremental monitor for one contract."""

    def __init__(self, contract: Contract, *, offset: int = 20,
                 speed: SpeedLevel = SpeedLevel.S1):
        self.contract = contract
        self.offset = offset
        self.params = {"M_S": SpeedLevel.parse(speed)}
        self.clock = float("-inf")
        self.sc = 0
        self._tokens: dict[Any, _TokenState] = {}
        self._departed: set = set()
        self._names = sorted(_token_scoped(contract.signals()))

    # parameters -----------------------------------------------------------

    def set_param(self, name: str, value, t: Optional[float] = None):
        """Update a contract parameter; applies to activations from now on."""
        if t is not None:
            self._tick(t)
        self.params[name] = SpeedLevel.parse(value) if name == "M_S" else value

    @property
    def speed(self) -> SpeedLevel:
        return self.params["M_S"]

    def pending(self, token=None) -> int:
        """Number of armed, unresolved activations (for one token or all)."""
        states = [self._tokens[token]] if token is not None and token in self._tokens else (
            [] if token is not None else list(self._tokens.values()))
        return sum(len(a) for st in states for a in st.armed.values())

    # event processing -----------------------------------------------------

    def _tick(self, t: float):
        if t < self.clock:
            raise TraceError(f"event at t={t} arrives after t={self.clock}")
        self.clock = t

    def _state(self, token) -> _TokenState:
        st = self._tokens.get(token)
        if st is None:
            st = _TokenState({n: _token_default(n) for n in self._names})
            for i, clause in enumerate(self.contract.guarantee):
                st.level[i] = False
                st.armed[i] = []
                st.o_held[i] = False
                st.t_seen[i] = False
            self._tokens[token] = st
        return st

    def _env(self, st: _TokenState, edge: Optional[str] = None) -> dict:
        env = dict(st.store)
        if edge is not None:
            env[edge] = True
        env["SC"] = self.sc
        env["Offset"] = self.offset
        env.update(self.params)
        return env

    def _obligation(self, clause: GuaranteeClause, st: _TokenState, env: dict) -> bool:
        if clause.mode is ClauseMode.BICONDITIONAL and not _bound_names(clause) <= st.received:
            return False
        return eval_predicate(clause.obligation, env)

    def _outcome(self, i: int, token, t: float, verdict: Verdict, **kw) -> ObserverOutcome:
        return ObserverOutcome(self.contract.name, verdict, t, token, clause=i, **kw)

    def _update_token(self, token, st: _TokenState, t: float, edge: Optional[str],
                      step_boundary: bool) -> list[ObserverOutcome]:
        out: list[ObserverOutcome] = []
        env = self._env(st, edge)
        level_env = self._env(st)
        for i, clause in enumerate(self.contract.guarantee):
            if clause.mode is ClauseMode.BICONDITIONAL:
                if step_boundary:
                    if st.o_held[i] and not st.t_seen[i]:
                        out.append(self._outcome(i, token, t, Verdict.VIOLATED,
                                                 violation_kind=ViolationKind.MISSING_TRIGGER))
                    st.o_held[i] = st.t_seen[i] = False
                holds = self._obligation(clause, st, env)
                if edge is not None and eval_predicate(clause.trigger, env):
                    st.t_seen[i] = True
                    if holds:
                        out.append(self._outcome(i, token, t, Verdict.SATISFIED))
                    else:
                        out.append(self._outcome(i, token, t, Verdict.VIOLATED,
                                                 violation_kind=ViolationKind.UNEXPECTED_TRIGGER))
                st.o_held[i] = st.o_held[i] or holds
                continue
            if eval_predicate(clause.trigger, env) and not st.level[i]:
                st.armed[i].append(_Activation(t, clause.deadline(self.speed)))
            st.level[i] = eval_predicate(clause.trigger, level_env)
            if st.armed[i] and eval_predicate(clause.obligation, env):
                for act in st.armed[i]:
                    latency = t - act.trigger_t
                    if latency <= act.bound:
                        out.append(self._outcome(i, token, t, Verdict.SATISFIED,
                                                 observed_latency=latency, trigger_t=act.trigger_t))
                    else:
                        out.append(self._outcome(
                            i, token, t, Verdict.VIOLATED, observed_latency=latency,
                            violation_kind=ViolationKind.DEADLINE_EXCEEDED,
                            excess=latency - act.bound, trigger_t=act.trigger_t))
                st.armed[i] = []
        return out

    def _depart(self, token, t: float) -> list[ObserverOutcome]:
        st = self._tokens.pop(token, None)
        self._departed.add(token)
        out = []
        if st is None:
            return out
        for i, acts in st.armed.items():
            for act in acts:
                out.append(self._outcome(i, token, t, Verdict.VIOLATED,
                                         violation_kind=ViolationKind.DEADLINE_EXCEEDED,
                                         trigger_t=act.trigger_t))
        return out

    def observe(self, item) -> list[ObserverOutcome]:
        """Feed one :class:`Event` or advance the clock to a bare time value."""
        if not isinstance(item, Event):
            self._tick(float(item))
            return []
        self._tick(item.t)
        if item.signal == "EXIT":
            return self._depart(item.token, item.t)
        if item.signal in MARKERS:
            return []
        if item.signal not in SIGNALS:
            raise TraceError(f"unknown signal {item.signal!r}")
        out: list[ObserverOutcome] = []
        if item.signal in GLOBAL_SIGNALS:
            self.sc = item.value
            for token, st in list(self._tokens.items()):
                out += self._update_token(token, st, item.t, None, step_boundary=True)
            return out
        if item.token in self._departed:
            return out
        st = self._state(item.token)
        edge = None
        if SIGNALS[item.signal].kind is SignalKind.EDGE:
            edge = item.signal
        elif item.signal in st.store:
            st.store[item.signal] = item.value
            st.received.add(item.signal)
        return self._update_token(item.token, st, item.t, edge, step_boundary=False)

    def finish(self, t: Optional[float] = None) -> list[ObserverOutcome]:
        """Close the trace: unresolved activations become Violated or Pending."""
        end = self.clock if t is None else t
        self._tick(end)
        out = []
        for token, st in self._tokens.items():
            for i, acts in st.armed.items():
                for act in acts:
                    if end > act.trigger_t + act.bound:
                        out.append(self._outcome(i, token, end, Verdict.VIOLATED,
                                                 violation_kind=ViolationKind.DEADLINE_EXCEEDED,
                                                 trigger_t=act.trigger_t))
                    else:
                        out.append(self._outcome(i, token, end, Verdict.PENDING,
                                                 trigger_t=act.trigger_t))
                acts.clear()
        return out


def compile_observer(contract: Contract, *, offset: int = 20,
                     speed: SpeedLevel = SpeedLevel.S1) -> Observer:
    for name in contract.signals():
        if name not in SIGNALS:
            raise CompileError(f"{contract.name}: unknown signal {name}")
    for clause in contract.guarantee:
        if clause.mode is ClauseMode.BICONDITIONAL:
            if not all(SIGNALS[n].kind is SignalKind.EDGE for n in signals_of(clause.trigger)):
                raise CompileError(f"{contract.name}: biconditional trigger must be edge-driven")
    return Observer(contract, offset=offset, speed=speed)


def observe(obs: Observer, item) -> list[ObserverOutcome]:
    return obs.observe(item)


def replay(obs: Observer, trace: Sequence[Event],
           param_history: Sequence[tuple[float, SpeedLevel]] = (),
           end: Optional[float] = None) -> list[ObserverOutcome]:
    """Drive ``obs`` over a trace; parameter updates at t apply before events at t."""
    updates = sorted(param_history, key=lambda p: p[0])
    out: list[ObserverOutcome] = []
    k = 0
    for event in trace:
        while k < len(updates) and updates[k][0] <= event.t:
            obs.set_param("M_S", updates[k][1], updates[k][0])
            k += 1
        out += obs.observe(event)
    if end is not None:
        for t, value in updates[k:]:
            if t <= end:
                obs.set_param("M_S", value, t)
        out += obs.finish(end)
    return out


# --------------------------------------------------------------------------
# batch oracle


def offline_check(contract: Contract, trace: Sequence[Event],
                  param_history: Sequence[tuple[float, SpeedLevel]] = (), *,
                  offset: int = 20, speed: SpeedLevel = SpeedLevel.S1,
                  end: Optional[float] = None) -> list[ObserverOutcome]:
    """Evaluate every clause of ``contract`` over the complete trace.

    Works from whole-trace scans (signal value at an index is the last write
    before it) rather than a running state machine.  Returns outcomes in
    canonical order; ``end`` closes the trace like :meth:`Observer.finish`.
    """
    for a, b in zip(trace, trace[1:]):
        if b.t < a.t:
            raise TraceError(f"trace not time ordered at t={b.t}")
    history = sorted(param_history, key=lambda p: p[0])
    initial = SpeedLevel.parse(speed)

    def speed_at(t: float) -> SpeedLevel:
        current = initial
        for ts, value in history:
            if ts <= t:
                current = SpeedLevel.parse(value)
        return current

    names = sorted(_token_scoped(contract.signals()))
    relevant = [e for e in trace if e.signal not in MARKERS or e.signal == "EXIT"]
    tokens: list = []
    for e in relevant:
        if e.signal not in GLOBAL_SIGNALS and e.token not in tokens:
            tokens.append(e.token)

    def value_at(i: int, token, name: str):
        for e in reversed(relevant[:i + 1]):
            if e.signal == name and (name in GLOBAL_SIGNALS or e.token == token):
                return e.value, True
        return (0 if name in GLOBAL_SIGNALS else _token_default(name)), False

    def env_at(i: int, token, with_edge: bool) -> dict:
        env = {n: value_at(i, token, n)[0] for n in names}
        for n in names:
            if SIGNALS[n].kind is SignalKind.EDGE:
                env[n] = False
        e = relevant[i]
        if with_edge and e.token == token and e.signal in env and \
                SIGNALS[e.signal].kind is SignalKind.EDGE:
            env[e.signal] = True
        env["SC"] = value_at(i, token, "SC")[0]
        env["Offset"] = offset
        env["M_S"] = speed_at(e.t)
        return env

    outcomes: list[ObserverOutcome] = []
    for token in tokens:
        first = next(i for i, e in enumerate(relevant)
                     if e.signal not in GLOBAL_SIGNALS and e.token == token)
        exit_at = next((i for i, e in enumerate(relevant)
                        if e.signal == "EXIT" and e.token == token and i >= first), None)
        stop = exit_at if exit_at is not None else len(relevant)
        span = [i for i in range(first, stop)
                if relevant[i].signal in GLOBAL_SIGNALS or relevant[i].token == token]

        for ci, clause in enumerate(contract.guarantee):
            def mk(t, verdict, **kw):
                return ObserverOutcome(contract.name, verdict, t, token, clause=ci, **kw)

            if clause.mode is ClauseMode.BICONDITIONAL:
                need = _bound_names(clause)

                def o_holds(i):
                    if not all(value_at(i, token, n)[1] for n in need):
                        return False
                    return eval_predicate(clause.obligation, env_at(i, token, True))

                windows: list[list[int]] = [[]]
                closers: list[Optional[int]] = []
                for i in span:
                    if relevant[i].signal in GLOBAL_SIGNALS:
                        closers.append(i)
                        windows.append([])
                    windows[-1].append(i)
                closers.append(None)
                for window, closer in zip(windows, closers):
                    fired = [i for i in window
                             if relevant[i].token == token
                             and SIGNALS[relevant[i].signal].kind is SignalKind.EDGE
                             and eval_predicate(clause.trigger, env_at(i, token, True))]
                    for i in fired:
                        if o_holds(i):
                            outcomes.append(mk(relevant[i].t, Verdict.SATISFIED))
                        else:
                            outcomes.append(mk(relevant[i].t, Verdict.VIOLATED,
                                               violation_kind=ViolationKind.UNEXPECTED_TRIGGER))
                    if closer is not None and not fired and any(o_holds(i) for i in window):
                        outcomes.append(mk(relevant[closer].t, Verdict.VIOLATED,
                                           violation_kind=ViolationKind.MISSING_TRIGGER))
                continue

            previous_level = False
            for pos, i in enumerate(span):
                fires = eval_predicate(clause.trigger, env_at(i, token, True)) and not previous_level
                previous_level = eval_predicate(clause.trigger, env_at(i, token, False))
                if not fires:
                    continue
                t0 = relevant[i].t
                bound = clause.deadline(speed_at(t0))
                met = next((j for j in span[pos:]
                            if eval_predicate(clause.obligation, env_at(j, token, True))), None)
                if met is not None:
                    latency = relevant[met].t - t0
                    if latency <= bound:
                        outcomes.append(mk(relevant[met].t, Verdict.SATISFIED,
                                           observed_latency=latency, trigger_t=t0))
                    else:
                        outcomes.append(mk(relevant[met].t, Verdict.VIOLATED,
                                           observed_latency=latency,
                                           violation_kind=ViolationKind.DEADLINE_EXCEEDED,
                                           excess=latency - bound, trigger_t=t0))
                elif exit_at is not None:
                    outcomes.append(mk(relevant[exit_at].t, Verdict.VIOLATED,
                                       violation_kind=ViolationKind.DEADLINE_EXCEEDED,
                                       trigger_t=t0))
                elif end is not None:
                    if end > t0 + bound:
                        outcomes.append(mk(end, Verdict.VIOLATED,
                                           violation_kind=ViolationKind.DEADLINE_EXCEEDED,
                                           trigger_t=t0))
                    else:
                        outcomes.append(mk(end, Verdict.PENDING, trigger_t=t0))
    return sort_outcomes(outcomes)
