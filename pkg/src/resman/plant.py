"""Deterministic discrete-event model of the sorting line.

The belt advances one step per ``step_period(M_S)``; the pulse counter SC
counts those steps.  Positions are measured in steps after LS1.  CP and BS
are modelled as jobs with completion times, EC as a per-token ejection plan
that fires at a step count and succeeds only if the token is physically at
the ejector.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Mapping, Optional, Union

from .contracts import SPEEDS, SpeedLevel
from .observers import Event


class ConfigError(ValueError):
    pass


class PlantError(ValueError):
    pass


def _speed_table(table: Mapping) -> dict:
    return {SpeedLevel.parse(k): v for k, v in table.items()}


@dataclass(frozen=True)
class PlantConfig:
    step_period: Mapping = field(default_factory=lambda: {
        SpeedLevel.S1: 50, SpeedLevel.S2: 100, SpeedLevel.S3: 200})
    cp_pos: int = 5
    ls2_pos: int = 25
    ejector_pos: tuple = (35, 40, 45)
    belt_end: int = 60
    cp_ms: float = 150
    bs_ms: float = 150
    initial_speed: SpeedLevel = SpeedLevel.S1

    def __post_init__(self):
        object.__setattr__(self, "step_period", _speed_table(self.step_period))
        object.__setattr__(self, "ejector_pos", tuple(self.ejector_pos))
        object.__setattr__(self, "initial_speed", SpeedLevel.parse(self.initial_speed))
        problems = self.problems()
        if problems:
            raise ConfigError("; ".join(problems))

    @property
    def offset(self) -> int:
        return self.ls2_pos - self.cp_pos

    def problems(self) -> list[str]:
        out = []
        if set(self.step_period) != set(SPEEDS):
            out.append("step_period needs exactly S1, S2, S3")
            return out
        periods = [self.step_period[s] for s in SPEEDS]
        if not all(p > 0 for p in periods) or not periods[0] < periods[1] < periods[2]:
            out.append(f"step_period must be positive and strictly increasing S1->S3: {periods}")
        if len(self.ejector_pos) != 3:
            out.append("need three ejector positions")
            return out
        chain = (self.cp_pos, self.ls2_pos, *self.ejector_pos, self.belt_end)
        if not 0 < chain[0] or any(a >= b for a, b in zip(chain, chain[1:])):
            out.append(f"need 0 < cp_pos < ls2_pos < ejectors < belt_end, got {chain}")
        if self.cp_ms < 0 or self.bs_ms < 0:
            out.append("nominal latencies must be non-negative")
        return out

    def as_dict(self) -> dict:
        return {
            "step_period": {s.value: self.step_period[s] for s in SPEEDS},
            "cp_pos": self.cp_pos,
            "ls2_pos": self.ls2_pos,
            "ejector_pos": list(self.ejector_pos),
            "belt_end": self.belt_end,
            "cp_ms": self.cp_ms,
            "bs_ms": self.bs_ms,
            "initial_speed": self.initial_speed.value,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "PlantConfig":
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


# --------------------------------------------------------------------------
# injections


@dataclass(frozen=True)
class LatencyInflation:
    """Slow down CP or BS for one token; ``absolute`` replaces the nominal latency."""

    component: str
    ms: float
    absolute: bool = True

    def __post_init__(self):
        if self.component not in ("CP", "BS"):
            raise PlantError(f"latency can only be injected into CP or BS, not {self.component}")


@dataclass(frozen=True)
class Slip:
    """Belt slip of ``steps`` (negative to catch up) once the token passes ``after``."""

    steps: int
    after: str = "CP"

    def __post_init__(self):
        if self.after not in ("CP", "LS2"):
            raise PlantError(f"slip landmark must be CP or LS2, not {self.after}")


Injection = Union[LatencyInflation, Slip]


@dataclass(frozen=True)
class BinOutcome:
    kind: str  # Binned, RanOff, Pending
    bin: Optional[int] = None

    @property
    def terminal(self) -> bool:
        return self.kind != "Pending"

    def __str__(self):
        return f"Binned({self.bin})" if self.kind == "Binned" else self.kind


PENDING = BinOutcome("Pending")
RAN_OFF = BinOutcome("RanOff")

ROUTING = {"W": 1}


@dataclass
class Token:
    id: int
    colour: str
    placed_t: float
    slip_steps: int = 0
    position: int = 0
    status: BinOutcome = PENDING
    belt_steps: int = 0
    stall: int = 0
    on_belt: bool = False
    cp_active: bool = False
    ls2_seen: bool = False
    sc_cp: Optional[int] = None
    cp_done_t: Optional[float] = None
    e_bs: Optional[int] = None
    sc_bs: Optional[int] = None
    bs_done_t: Optional[float] = None
    plan: Optional[tuple] = None  # (bin, step)
    ec_override: bool = False
    latency: dict = field(default_factory=dict)
    slips: list = field(default_factory=list)

    @property
    def intended_bin(self) -> int:
        return self.e_bs if self.e_bs is not None else ROUTING[self.colour]


_JOB, _STEP, _PLACE = 0, 1, 2


class Plant:
    """Mutable simulation state; one writer at a time."""

    def __init__(self, config: Optional[PlantConfig] = None):
        self.config = config or PlantConfig()
        self.clock: float = 0
        self.sc = 0
        self.speed = self.config.initial_speed
        self._pending_speed: Optional[SpeedLevel] = None
        self.last_step_t: float = 0
        self.next_step_t: float = self.config.step_period[self.speed]
        self.tokens: dict[int, Token] = {}
        self.bins: dict[int, list[int]] = {1: [], 2: [], 3: []}
        self.ran_off: list[int] = []
        self.log: list[Event] = []
        self._queue: list = []
        self._qseq = 0
        self._next_token = 1
        self._injections: list[Injection] = []

    # ------------------------------------------------------------------ api

    def place_token(self, colour: str = "W", t: Optional[float] = None) -> int:
        t = self.clock if t is None else t
        if t < self.clock:
            raise PlantError(f"cannot place a token at t={t}, clock is already {self.clock}")
        if colour not in ROUTING:
            raise PlantError(f"no routing for colour {colour!r}")
        token = Token(self._next_token, colour, t)
        self._next_token += 1
        for inj in self._injections:
            self._apply(token, inj)
        self._injections.clear()
        self.tokens[token.id] = token
        self._push(t, _PLACE, ("place", token.id))
        return token.id

    def inject(self, injection: Injection, token: Optional[int] = None) -> str:
        """Attach an injection to ``token`` or, if None, to the next placed token."""
        if token is None:
            self._injections.append(injection)
            return "queued for next token"
        if token not in self.tokens:
            raise PlantError(f"unknown token {token}")
        self._apply(self.tokens[token], injection)
        return f"applied to token {token}"

    def set_speed(self, new: SpeedLevel) -> str:
        """Takes effect at the next step boundary; the last request wins."""
        self._pending_speed = SpeedLevel.parse(new)
        return f"{self._pending_speed.value} from t={self.next_step_t}"

    def bin_outcome(self, token: int) -> BinOutcome:
        if token not in self.tokens:
            raise PlantError(f"unknown token {token}")
        return self.tokens[token].status

    def schedule_ejection(self, token: int, bin_no: int, at_step: int):
        """EC recovery: fire ejector ``bin_no`` for ``token`` at pulse count ``at_step``."""
        tok = self.tokens[token]
        tok.plan = (bin_no, at_step)
        tok.ec_override = True

    def busy(self, token: int) -> bool:
        """True while the token is on the belt or a CP/BS job for it is outstanding."""
        tok = self.tokens[token]
        if not tok.status.terminal:
            return True
        return any(item[3][1] == token for item in self._queue if item[3][0] != "place")

    def next_time(self) -> float:
        t = self.next_step_t
        if self._queue:
            t = min(t, self._queue[0][0])
        return max(t, self.clock)

    def advance(self, until: float) -> list[Event]:
        """Run the simulation up to and including time ``until``."""
        if until < self.clock:
            raise PlantError(f"cannot advance backwards to {until} from {self.clock}")
        out: list[Event] = []
        while True:
            job_t = self._queue[0][0] if self._queue else float("inf")
            if min(job_t, self.next_step_t) > until:
                break
            if job_t < self.next_step_t or (job_t == self.next_step_t and self._queue[0][1] < _STEP):
                t, _, _, payload = heapq.heappop(self._queue)
                self.clock = t
                out += self._run_job(t, payload)
            else:
                t = self.next_step_t
                self.clock = t
                out += self._step(t)
        self.clock = until
        return out

    def advance_to_boundary(self) -> list[Event]:
        return self.advance(self.next_step_t)

    # ------------------------------------------------------------ internals

    def _push(self, t: float, prio: int, payload: tuple):
        self._qseq += 1
        heapq.heappush(self._queue, (t, prio, self._qseq, payload))

    def _emit(self, out: list, t: float, signal: str, value=True, token=None):
        event = Event(t, signal, value, token, len(self.log))
        self.log.append(event)
        out.append(event)

    def _apply(self, token: Token, inj: Injection):
        if isinstance(inj, LatencyInflation):
            nominal = self.config.cp_ms if inj.component == "CP" else self.config.bs_ms
            token.latency[inj.component] = inj.ms if inj.absolute else nominal + inj.ms
        else:
            token.slips.append(inj)

    def _latency(self, token: Token, component: str) -> float:
        nominal = self.config.cp_ms if component == "CP" else self.config.bs_ms
        return token.latency.get(component, nominal)

    def _slip(self, token: Token, landmark: str):
        for s in token.slips:
            if s.after != landmark:
                continue
            if s.steps >= 0:
                token.stall += s.steps
            else:
                catch_up = -s.steps
                from_stall = min(catch_up, token.stall)
                token.stall -= from_stall
                lag = token.belt_steps - token.position
                token.position += min(catch_up - from_stall, lag)
            token.slip_steps = token.belt_steps - token.position + token.stall

    def _run_job(self, t: float, payload: tuple) -> list[Event]:
        out: list[Event] = []
        kind, tid = payload
        tok = self.tokens[tid]
        if kind == "place":
            tok.on_belt = True
            self._emit(out, t, "LS1", True, tid)
        elif kind == "cp":
            tok.cp_done_t = t
            self._emit(out, t, "SC_CP", tok.sc_cp, tid)
            self._emit(out, t, "CV_CP", tok.colour, tid)
            self._push(t + self._latency(tok, "BS"), _JOB, ("bs", tid))
        elif kind == "bs":
            e = ROUTING[tok.colour]
            tok.e_bs = e
            tok.sc_bs = tok.sc_cp + (self.config.ejector_pos[e - 1] - self.config.cp_pos)
            tok.bs_done_t = t
            self._emit(out, t, "E_BS", f"E{e}", tid)
            self._emit(out, t, "SC_BS", tok.sc_bs, tid)
            if not tok.ec_override and tok.sc_bs > self.sc:
                tok.plan = (e, tok.sc_bs)
        return out

    def _step(self, t: float) -> list[Event]:
        out: list[Event] = []
        if self._pending_speed is not None:
            self.speed = self._pending_speed
            self._pending_speed = None
            self._emit(out, t, "M_S", self.speed.value)
        self.last_step_t = t
        self.next_step_t = t + self.config.step_period[self.speed]
        self.sc += 1
        self._emit(out, t, "SC", self.sc)
        cfg = self.config
        for tok in sorted((x for x in self.tokens.values() if x.on_belt), key=lambda x: x.id):
            tok.belt_steps += 1
            if tok.stall > 0:
                tok.stall -= 1
            else:
                tok.position += 1
            if not tok.cp_active and tok.position >= cfg.cp_pos:
                tok.cp_active = True
                tok.sc_cp = self.sc
                self._emit(out, t, "CP_ACT", self.sc, tok.id)
                self._push(t + self._latency(tok, "CP"), _JOB, ("cp", tok.id))
                self._slip(tok, "CP")
            if not tok.ls2_seen and tok.position >= cfg.ls2_pos:
                tok.ls2_seen = True
                self._emit(out, t, "LS2", True, tok.id)
                self._slip(tok, "LS2")
            if tok.plan is not None and tok.plan[1] == self.sc:
                bin_no = tok.plan[0]
                tok.plan = None
                self._emit(out, t, "EJECT", bin_no, tok.id)
                if tok.position == cfg.ejector_pos[bin_no - 1]:
                    tok.on_belt = False
                    tok.status = BinOutcome("Binned", bin_no)
                    self.bins[bin_no].append(tok.id)
                    self._emit(out, t, f"B{bin_no}", True, tok.id)
                    self._emit(out, t, "EXIT", f"B{bin_no}", tok.id)
                    continue
            if tok.position >= cfg.belt_end:
                tok.on_belt = False
                tok.status = RAN_OFF
                self.ran_off.append(tok.id)
                self._emit(out, t, "EXIT", "RUNOFF", tok.id)
        return out


def init_plant(config: Optional[PlantConfig] = None) -> Plant:
    return Plant(config)
