"""Parametric assume-guarantee contracts for the sorting line.

Contracts are plain immutable data.  Predicates are small Boolean expression
trees over the plant signal registry; implication between predicates is
decided by enumerating the finite environment space (edge atoms, enum
domains, the three motor speeds).  Step-count comparisons such as
``SC == SC_CP + Offset`` are treated as opaque Boolean atoms while enumerating.
"""

from __future__ import annotations

import enum
import functools
import itertools
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Iterator, Mapping, Optional, Sequence, Union


class ContractError(ValueError):
    """Malformed predicate, contract or hierarchy."""


class UnboundVariable(ContractError):
    def __init__(self, name: str):
        super().__init__(f"variable {name!r} is not bound in the environment")
        self.name = name


class CompositionError(ContractError):
    pass


class HierarchyError(ContractError):
    pass


# --------------------------------------------------------------------------
# speeds and latency tables


@functools.total_ordering
class SpeedLevel(enum.Enum):
    """Motor speed of the belt.  Ordered by belt speed: S1 > S2 > S3."""

    S1 = "S1"
    S2 = "S2"
    S3 = "S3"

    @property
    def rank(self) -> int:
        """0 for the fastest speed, 2 for the slowest."""
        return _SPEED_ORDER.index(self)

    def __lt__(self, other):
        if not isinstance(other, SpeedLevel):
            return NotImplemented
        return self.rank > other.rank

    def slower(self) -> tuple["SpeedLevel", ...]:
        """Speeds strictly slower than this one, least degraded first."""
        return _SPEED_ORDER[self.rank + 1:]

    @classmethod
    def parse(cls, value: Union[str, "SpeedLevel"]) -> "SpeedLevel":
        return value if isinstance(value, SpeedLevel) else cls(value)


_SPEED_ORDER = (SpeedLevel.S1, SpeedLevel.S2, SpeedLevel.S3)
SPEEDS = _SPEED_ORDER


@dataclass(frozen=True)
class LatencyFn:
    """Total map from motor speed to a latency bound in ms."""

    name: str
    bounds: tuple  # (S1, S2, S3)

    def __post_init__(self):
        bounds = tuple(self.bounds)
        if len(bounds) != 3:
            raise ContractError(f"{self.name}: need one bound per speed, got {bounds}")
        if any(b < 0 for b in bounds):
            raise ContractError(f"{self.name}: negative bound in {bounds}")
        if not bounds[0] <= bounds[1] <= bounds[2]:
            raise ContractError(f"{self.name}: bounds must not decrease as the belt slows: {bounds}")
        object.__setattr__(self, "bounds", bounds)

    @classmethod
    def from_mapping(cls, name: str, table: Mapping) -> "LatencyFn":
        parsed = {SpeedLevel.parse(k): v for k, v in table.items()}
        missing = [s.value for s in SPEEDS if s not in parsed]
        if missing:
            raise ContractError(f"{name}: no bound for {', '.join(missing)}")
        return cls(name, tuple(parsed[s] for s in SPEEDS))

    def __call__(self, speed: SpeedLevel) -> float:
        return self.bounds[SpeedLevel.parse(speed).rank]

    def __add__(self, other: "LatencyFn") -> "LatencyFn":
        return LatencyFn(f"{self.name}+{other.name}",
                         tuple(a + b for a, b in zip(self.bounds, other.bounds)))

    def scaled(self, factor: float) -> "LatencyFn":
        return LatencyFn(self.name, tuple(b * factor for b in self.bounds))

    def as_dict(self) -> dict:
        return {s.value: b for s, b in zip(SPEEDS, self.bounds)}


def latency_bound(fn: LatencyFn, speed: SpeedLevel) -> float:
    return fn(speed)


# --------------------------------------------------------------------------
# signal registry


class SignalKind(enum.Enum):
    EDGE = "edge"
    COUNT = "count"
    ENUM = "enum"
    PARAM = "param"


@dataclass(frozen=True)
class SignalDecl:
    name: str
    kind: SignalKind
    domain: tuple = ()


SIGNALS: dict[str, SignalDecl] = {
    d.name: d
    for d in (
        SignalDecl("LS1", SignalKind.EDGE, (False, True)),
        SignalDecl("LS2", SignalKind.EDGE, (False, True)),
        SignalDecl("B1", SignalKind.EDGE, (False, True)),
        SignalDecl("B2", SignalKind.EDGE, (False, True)),
        SignalDecl("SC", SignalKind.COUNT),
        SignalDecl("SC_CP", SignalKind.COUNT),
        SignalDecl("SC_BS", SignalKind.COUNT),
        SignalDecl("CV_CP", SignalKind.ENUM, ("W", "N", None)),
        SignalDecl("E_BS", SignalKind.ENUM, ("E1", "E2", "E3", None)),
        SignalDecl("M_S", SignalKind.PARAM, SPEEDS),
    )
}

# plant constants usable as step offsets; never enumerated
CONSTANTS = frozenset({"Offset"})


def _decl(name: str) -> SignalDecl:
    try:
        return SIGNALS[name]
    except KeyError:
        raise ContractError(f"unknown signal {name!r}") from None


# --------------------------------------------------------------------------
# predicates


@dataclass(frozen=True)
class Sig:
    name: str

    def __post_init__(self):
        _decl(self.name)

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Lit:
    value: Any

    def __str__(self):
        if self.value is None:
            return "null"
        if isinstance(self.value, SpeedLevel):
            return self.value.value
        return str(self.value)


@dataclass(frozen=True)
class Shifted:
    """``signal + offset`` where offset is an int or a named plant constant."""

    signal: str
    offset: Union[str, int]

    def __post_init__(self):
        if _decl(self.signal).kind is not SignalKind.COUNT:
            raise ContractError(f"{self.signal} is not a step count")
        if isinstance(self.offset, str) and self.offset not in CONSTANTS:
            raise ContractError(f"unknown constant {self.offset!r}")

    def __str__(self):
        return f"{self.signal}+{self.offset}"


Term = Union[Sig, Lit, Shifted]


class _Logic:
    def __and__(self, other):
        return And((self, other))

    def __or__(self, other):
        return Or((self, other))

    def __invert__(self):
        return Not(self)

    def __rshift__(self, other):
        return Implies(self, other)


@dataclass(frozen=True)
class TrueP(_Logic):
    def __str__(self):
        return "True"


TRUE = TrueP()


@dataclass(frozen=True)
class RisingEdge(_Logic):
    signal: str

    def __post_init__(self):
        if _decl(self.signal).kind is not SignalKind.EDGE:
            raise ContractError(f"{self.signal} has no rising edge")

    def __str__(self):
        return f"↑{self.signal}"


def _check_comparison(lhs: Term, rhs: Term):
    for a, b in ((lhs, rhs), (rhs, lhs)):
        if isinstance(a, Sig) and isinstance(b, Lit):
            decl = _decl(a.name)
            if decl.kind in (SignalKind.ENUM, SignalKind.PARAM):
                value = b.value
                if decl.kind is SignalKind.PARAM and isinstance(value, str):
                    value = SpeedLevel.parse(value)
                if value not in decl.domain:
                    raise ContractError(f"{b} is not in the domain of {a.name}")
            elif decl.kind is SignalKind.EDGE:
                raise ContractError(f"edge signal {a.name} cannot be compared")


@dataclass(frozen=True)
class Eq(_Logic):
    lhs: Term
    rhs: Term

    def __post_init__(self):
        _check_comparison(self.lhs, self.rhs)

    def __str__(self):
        return f"({self.lhs}=={self.rhs})"


@dataclass(frozen=True)
class Neq(_Logic):
    lhs: Term
    rhs: Term

    def __post_init__(self):
        _check_comparison(self.lhs, self.rhs)

    def __str__(self):
        return f"({self.lhs}!={self.rhs})"


@dataclass(frozen=True)
class And(_Logic):
    args: tuple

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))

    def __str__(self):
        return "(" + " ∧ ".join(map(str, self.args)) + ")"


@dataclass(frozen=True)
class Or(_Logic):
    args: tuple

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))

    def __str__(self):
        return "(" + " ∨ ".join(map(str, self.args)) + ")"


@dataclass(frozen=True)
class Not(_Logic):
    arg: Any

    def __str__(self):
        return f"¬{self.arg}"


@dataclass(frozen=True)
class Implies(_Logic):
    lhs: Any
    rhs: Any

    def __str__(self):
        return f"({self.lhs} ⇒ {self.rhs})"


@dataclass(frozen=True)
class Iff(_Logic):
    lhs: Any
    rhs: Any

    def __str__(self):
        return f"({self.lhs} ⇔ {self.rhs})"


Predicate = Union[TrueP, RisingEdge, Eq, Neq, And, Or, Not, Implies, Iff]
_ATOMS = (TrueP, RisingEdge, Eq, Neq)


def conj(*preds) -> Predicate:
    preds = [p for p in preds if p != TRUE]
    if not preds:
        return TRUE
    return preds[0] if len(preds) == 1 else And(tuple(preds))


def _term_names(term: Term) -> set[str]:
    if isinstance(term, Sig):
        return {term.name}
    if isinstance(term, Shifted):
        return {term.signal}
    return set()


def _children(pred) -> tuple:
    if isinstance(pred, (And, Or)):
        return pred.args
    if isinstance(pred, Not):
        return (pred.arg,)
    if isinstance(pred, (Implies, Iff)):
        return (pred.lhs, pred.rhs)
    return ()


def atoms(pred) -> Iterator:
    if isinstance(pred, _ATOMS):
        yield pred
        return
    for child in _children(pred):
        yield from atoms(child)


def signals_of(pred) -> frozenset[str]:
    """Signal and parameter names referenced by ``pred`` (constants excluded)."""
    names: set[str] = set()
    for atom in atoms(pred):
        if isinstance(atom, RisingEdge):
            names.add(atom.signal)
        elif isinstance(atom, (Eq, Neq)):
            names |= _term_names(atom.lhs) | _term_names(atom.rhs)
    return frozenset(names)


def _evaluate(pred, atom_value: Callable[[Any], bool]) -> bool:
    if isinstance(pred, _ATOMS):
        return atom_value(pred)
    if isinstance(pred, And):
        return all(_evaluate(p, atom_value) for p in pred.args)
    if isinstance(pred, Or):
        return any(_evaluate(p, atom_value) for p in pred.args)
    if isinstance(pred, Not):
        return not _evaluate(pred.arg, atom_value)
    if isinstance(pred, Implies):
        return (not _evaluate(pred.lhs, atom_value)) or _evaluate(pred.rhs, atom_value)
    if isinstance(pred, Iff):
        return _evaluate(pred.lhs, atom_value) == _evaluate(pred.rhs, atom_value)
    raise ContractError(f"not a predicate: {pred!r}")


def _lookup(env: Mapping, name: str):
    try:
        return env[name]
    except KeyError:
        raise UnboundVariable(name) from None


def _term_value(term: Term, env: Mapping):
    if isinstance(term, Lit):
        return term.value
    if isinstance(term, Sig):
        return _lookup(env, term.name)
    base = _lookup(env, term.signal)
    offset = _lookup(env, term.offset) if isinstance(term.offset, str) else term.offset
    return base + offset


def _normalise(value):
    return value.value if isinstance(value, SpeedLevel) else value


def eval_predicate(pred: Predicate, env: Mapping[str, Any]) -> bool:
    """Evaluate ``pred`` under a concrete assignment of signals and parameters.

    Edge signals map to ``True`` when their rising edge occurs.  Raises
    :class:`UnboundVariable` when a referenced name is missing from ``env``.
    """

    def atom_value(atom) -> bool:
        if isinstance(atom, TrueP):
            return True
        if isinstance(atom, RisingEdge):
            return bool(_lookup(env, atom.signal))
        same = _normalise(_term_value(atom.lhs, env)) == _normalise(_term_value(atom.rhs, env))
        return same if isinstance(atom, Eq) else not same

    return _evaluate(pred, atom_value)


# --------------------------------------------------------------------------
# enumeration-based reasoning


def _enumerable(atom) -> bool:
    terms = (atom.lhs, atom.rhs)
    if any(isinstance(t, Shifted) for t in terms):
        return False
    return all(
        isinstance(t, Lit) or SIGNALS[t.name].kind in (SignalKind.ENUM, SignalKind.PARAM)
        for t in terms
    )


def _opaque_key(atom) -> str:
    sides = sorted((str(atom.lhs), str(atom.rhs)))
    return f"{sides[0]}=={sides[1]}"


def _variables(preds: Iterable) -> dict[str, tuple]:
    space: dict[str, tuple] = {}
    for pred in preds:
        for atom in atoms(pred):
            if isinstance(atom, RisingEdge):
                space[f"↑{atom.signal}"] = (False, True)
            elif isinstance(atom, (Eq, Neq)):
                if _enumerable(atom):
                    for t in (atom.lhs, atom.rhs):
                        if isinstance(t, Sig):
                            space[t.name] = SIGNALS[t.name].domain
                else:
                    space[_opaque_key(atom)] = (False, True)
    return dict(sorted(space.items()))


def environments(*preds) -> Iterator[dict]:
    """All abstract environments over the variables of ``preds``."""
    space = _variables(preds)
    names = list(space)
    for values in itertools.product(*(space[n] for n in names)):
        yield dict(zip(names, values))


def holds_in(pred, abstract_env: Mapping[str, Any]) -> bool:
    """Evaluate ``pred`` in an environment produced by :func:`environments`."""

    def atom_value(atom) -> bool:
        if isinstance(atom, TrueP):
            return True
        if isinstance(atom, RisingEdge):
            return abstract_env[f"↑{atom.signal}"]
        if _enumerable(atom):
            same = _normalise(_term_value(atom.lhs, abstract_env)) == _normalise(
                _term_value(atom.rhs, abstract_env))
        else:
            same = abstract_env[_opaque_key(atom)]
        return same if isinstance(atom, Eq) else not same

    return _evaluate(pred, atom_value)


def counterexamples(antecedent, consequent) -> list[dict]:
    """Environments where ``antecedent`` holds and ``consequent`` does not."""
    return [env for env in environments(antecedent, consequent)
            if holds_in(antecedent, env) and not holds_in(consequent, env)]


def implies(p, q) -> bool:
    return not any(holds_in(p, env) and not holds_in(q, env) for env in environments(p, q))


def equivalent(p, q) -> bool:
    return implies(p, q) and implies(q, p)


def satisfiable(p) -> bool:
    return any(holds_in(p, env) for env in environments(p))


def tautology(p) -> bool:
    return all(holds_in(p, env) for env in environments(p))


# --------------------------------------------------------------------------
# contracts


class ClauseMode(enum.Enum):
    BOUNDED_RESPONSE = "BoundedResponse"
    BICONDITIONAL = "Biconditional"


@dataclass(frozen=True)
class GuaranteeClause:
    trigger: Predicate
    obligation: Predicate
    deadline: Optional[LatencyFn] = None
    mode: ClauseMode = ClauseMode.BOUNDED_RESPONSE

    def __post_init__(self):
        if self.mode is ClauseMode.BOUNDED_RESPONSE and self.deadline is None:
            raise ContractError("bounded-response clause needs a deadline")
        if self.mode is ClauseMode.BICONDITIONAL and self.deadline is not None:
            raise ContractError("biconditional clause takes no deadline")

    def formula(self) -> Predicate:
        """The clause with its timing erased."""
        if self.mode is ClauseMode.BICONDITIONAL:
            return Iff(self.trigger, self.obligation)
        return Implies(self.trigger, self.obligation)

    def signals(self) -> frozenset[str]:
        return signals_of(self.trigger) | signals_of(self.obligation)

    def __str__(self):
        if self.mode is ClauseMode.BICONDITIONAL:
            return f"{self.trigger} ⇔ {self.obligation}"
        return f"{self.trigger} ⇒ {self.obligation} within {self.deadline.name}(M_S)"


def _frozen(values) -> frozenset:
    return frozenset(values or ())


@dataclass(frozen=True)
class Contract:
    name: str
    inputs: frozenset = frozenset()
    outputs: frozenset = frozenset()
    params: frozenset = frozenset()
    assumptions: Predicate = TRUE
    guarantee: tuple = ()
    # connected signals hidden by composition
    internal: frozenset = field(default=frozenset(), compare=False)

    def __post_init__(self):
        for attr in ("inputs", "outputs", "params", "internal"):
            object.__setattr__(self, attr, _frozen(getattr(self, attr)))
        object.__setattr__(self, "guarantee", tuple(self.guarantee))
        for name in self.inputs | self.outputs | self.params:
            _decl(name)
        if self.inputs & self.outputs:
            raise ContractError(f"{self.name}: {sorted(self.inputs & self.outputs)} "
                                "are both inputs and outputs")
        allowed = self.inputs | self.outputs | self.params | self.internal
        stray = self.signals() - allowed
        if stray:
            raise ContractError(f"{self.name}: references undeclared {sorted(stray)}")

    def signals(self) -> frozenset[str]:
        names = set(signals_of(self.assumptions))
        for clause in self.guarantee:
            names |= clause.signals()
        return frozenset(names)

    def guarantee_formula(self) -> Predicate:
        return conj(*(c.formula() for c in self.guarantee))

    def deadlines(self) -> tuple[LatencyFn, ...]:
        return tuple(c.deadline for c in self.guarantee if c.deadline is not None)


# --------------------------------------------------------------------------
# refinement


@dataclass(frozen=True)
class ClauseCounterexample:
    """Why a clause of the abstract contract is not met by the refinement."""

    super_clause: GuaranteeClause
    sub_clause: Optional[GuaranteeClause] = None
    speed: Optional[SpeedLevel] = None
    sub_bound: Optional[float] = None
    super_bound: Optional[float] = None
    environment: Optional[dict] = None

    def describe(self) -> str:
        if self.speed is not None:
            return (f"at {self.speed.value}: deadline {self.sub_bound} > {self.super_bound} "
                    f"for [{self.super_clause}]")
        if self.environment is not None:
            return f"unmatched [{self.super_clause}] in environment {self.environment}"
        return f"unmatched [{self.super_clause}]"


@dataclass(frozen=True)
class RefinementReport:
    assumption_counterexamples: tuple = ()
    guarantee_counterexamples: tuple = ()

    @property
    def holds(self) -> bool:
        return not self.assumption_counterexamples and not self.guarantee_counterexamples


def _logic_match(sub: GuaranteeClause, sup: GuaranteeClause) -> bool:
    if sub.mode is not sup.mode or not equivalent(sub.trigger, sup.trigger):
        return False
    if sup.mode is ClauseMode.BICONDITIONAL:
        return equivalent(sub.obligation, sup.obligation)
    return implies(sub.obligation, sup.obligation)


def _deadline_misses(sub: GuaranteeClause, sup: GuaranteeClause) -> list[ClauseCounterexample]:
    if sup.mode is ClauseMode.BICONDITIONAL:
        return []
    return [ClauseCounterexample(sup, sub, s, sub.deadline(s), sup.deadline(s))
            for s in SPEEDS if sub.deadline(s) > sup.deadline(s)]


def check_refinement(sub: Contract, sup: Contract) -> RefinementReport:
    """Does ``sub`` refine ``sup``?  Weaker assumptions, stronger guarantees."""
    assumption_cex = tuple(counterexamples(sup.assumptions, sub.assumptions))
    guarantee_cex: list[ClauseCounterexample] = []
    for s_clause in sup.guarantee:
        candidates = [c for c in sub.guarantee if _logic_match(c, s_clause)]
        if not candidates:
            env = None
            for c in sub.guarantee:
                if c.mode is s_clause.mode and equivalent(c.trigger, s_clause.trigger):
                    found = counterexamples(c.obligation, s_clause.obligation)
                    env = found[0] if found else None
                    break
            guarantee_cex.append(ClauseCounterexample(s_clause, environment=env))
            continue
        misses = [_deadline_misses(c, s_clause) for c in candidates]
        if all(misses):
            guarantee_cex.extend(misses[0])
    return RefinementReport(assumption_cex, tuple(guarantee_cex))


# --------------------------------------------------------------------------
# composition


def _chains(a: GuaranteeClause, b: GuaranteeClause, connected: frozenset) -> bool:
    if ClauseMode.BICONDITIONAL in (a.mode, b.mode):
        return False
    produced = signals_of(a.obligation)
    return (bool(produced) and produced == signals_of(b.trigger) and produced <= connected
            and implies(a.obligation, b.trigger))


def _fuse(clauses1: Sequence, clauses2: Sequence, out1_in2: frozenset, out2_in1: frozenset):
    pool1, pool2 = list(clauses1), list(clauses2)
    fused = []
    for src, dst, connected in ((pool1, pool2, out1_in2), (pool2, pool1, out2_in1)):
        for a in list(src):
            b = next((b for b in dst if _chains(a, b, connected)), None)
            if b is None or a not in src:
                continue
            src.remove(a)
            dst.remove(b)
            fused.append(GuaranteeClause(a.trigger, b.obligation, a.deadline + b.deadline))
    return fused + pool1 + pool2


def _stronger(a1, a2):
    if implies(a1, a2):
        return a1
    if implies(a2, a1):
        return a2
    return And((a1, a2))


def compose(c1: Contract, c2: Contract) -> Contract:
    """Parallel composition ``c1 ⊗ c2`` with connected signals hidden."""
    clash = c1.outputs & c2.outputs
    if clash:
        raise CompositionError(f"{c1.name} and {c2.name} both drive {sorted(clash)}")
    out1_in2 = c1.outputs & c2.inputs
    out2_in1 = c2.outputs & c1.inputs
    connected = out1_in2 | out2_in1
    clauses = _fuse(c1.guarantee, c2.guarantee, out1_in2, out2_in1)

    g1, g2 = c1.guarantee_formula(), c2.guarantee_formula()
    independent = not (signals_of(g1) & signals_of(c2.assumptions)) and not (
        signals_of(g2) & signals_of(c1.assumptions))
    if independent:
        assumptions = _stronger(c1.assumptions, c2.assumptions)
    else:
        assumptions = And((Implies(g1, c2.assumptions), Implies(g2, c1.assumptions)))
        if tautology(assumptions):
            assumptions = TRUE
    if not satisfiable(assumptions):
        raise CompositionError(f"assumptions of {c1.name} ⊗ {c2.name} are unsatisfiable")

    return Contract(
        name=f"{c1.name}*{c2.name}",
        inputs=(c1.inputs | c2.inputs) - connected,
        outputs=(c1.outputs | c2.outputs) - connected,
        params=c1.params | c2.params,
        assumptions=assumptions,
        guarantee=tuple(clauses),
        internal=connected | c1.internal | c2.internal,
    )


# --------------------------------------------------------------------------
# hierarchy validation


@dataclass(frozen=True)
class NodeCheck:
    name: str
    children: tuple
    composition: Optional[Contract]
    refinement: Optional[RefinementReport]

    @property
    def ok(self) -> bool:
        return self.refinement is None or self.refinement.holds


@dataclass(frozen=True)
class TimingCheck:
    speed: SpeedLevel
    components: float  # f_CP + f_BS
    subsystem: float  # f_LM
    travel: float  # Offset x step period

    @property
    def ok(self) -> bool:
        return self.components < self.subsystem < self.travel


@dataclass(frozen=True)
class HierarchyReport:
    root: str
    nodes: tuple
    timing: tuple = ()

    @property
    def ok(self) -> bool:
        return all(n.ok for n in self.nodes) and all(t.ok for t in self.timing)

    def failures(self) -> list[str]:
        lines = []
        for node in self.nodes:
            if not node.ok:
                for cex in node.refinement.guarantee_counterexamples:
                    lines.append(f"{node.name}: {cex.describe()}")
                for env in node.refinement.assumption_counterexamples:
                    lines.append(f"{node.name}: assumption counterexample {env}")
        for t in self.timing:
            if not t.ok:
                lines.append(f"timing at {t.speed.value}: need {t.components} < {t.subsystem} "
                             f"< {t.travel}")
        return lines


def _tree_root(spec: Mapping[str, Sequence[str]]) -> str:
    parent_of: dict[str, str] = {}
    for parent, children in spec.items():
        for child in children:
            if child in parent_of:
                raise HierarchyError(f"{child} has two parents: {parent_of[child]}, {parent}")
            parent_of[child] = parent
    nodes = set(spec) | set(parent_of)
    roots = sorted(nodes - set(parent_of))
    if len(roots) != 1:
        raise HierarchyError(f"hierarchy must have exactly one root, found {roots or 'none'}")
    seen = set()
    stack = [roots[0]]
    while stack:
        node = stack.pop()
        if node in seen:
            raise HierarchyError(f"cycle through {node}")
        seen.add(node)
        stack.extend(spec.get(node, ()))
    if seen != nodes:
        raise HierarchyError(f"cyclic or disconnected nodes: {sorted(nodes - seen)}")
    return roots[0]


def check_timing(latency: Mapping[str, LatencyFn], offset: int,
                 step_period: Mapping[SpeedLevel, float]) -> tuple[TimingCheck, ...]:
    """f_CP(s) + f_BS(s) < f_LM(s) < Offset * step_period(s) for every speed."""
    return tuple(
        TimingCheck(s, latency["f_CP"](s) + latency["f_BS"](s), latency["f_LM"](s),
                    offset * step_period[s])
        for s in SPEEDS
    )


def validate_hierarchy(spec: Mapping[str, Sequence[str]], contracts: Mapping[str, Contract],
                       plant=None, latency: Optional[Mapping[str, LatencyFn]] = None
                       ) -> HierarchyReport:
    """Check that every parent is refined by the composition of its children.

    ``spec`` maps a parent contract name to its children.  When ``plant`` (any
    object with ``offset`` and ``step_period``) and ``latency`` are given, the
    slack/travel-time ordering is checked as well.
    """
    root = _tree_root(spec)
    for name in set(spec) | {c for cs in spec.values() for c in cs}:
        if name not in contracts:
            raise HierarchyError(f"contract {name} is not defined")
    checks = []
    order = [root]
    for name in order:
        children = tuple(spec.get(name, ()))
        order.extend(children)
        if not children:
            checks.append(NodeCheck(name, (), None, None))
            continue
        composition = functools.reduce(compose, (contracts[c] for c in children))
        checks.append(NodeCheck(name, children, composition,
                                check_refinement(composition, contracts[name])))
    timing = ()
    if plant is not None and latency is not None:
        timing = check_timing(latency, plant.offset, plant.step_period)
    return HierarchyReport(root, tuple(checks), timing)


# --------------------------------------------------------------------------
# the sorting-line contracts

DEFAULT_LATENCY = {
    "f_CP": LatencyFn("f_CP", (200, 400, 800)),
    "f_BS": LatencyFn("f_BS", (200, 400, 800)),
    "f_LM": LatencyFn("f_LM", (600, 1800, 3600)),
}

DEFAULT_HIERARCHY = {"C_MC": ("C_LM", "C_EC"), "C_LM": ("C_CP", "C_BS")}

SPEED_DOMAIN = Or(tuple(Eq(Sig("M_S"), Lit(s)) for s in SPEEDS))


def _produced(count: str, value: str) -> Predicate:
    return And((Neq(Sig(count), Lit(0)), Neq(Sig(value), Lit(None))))


def default_contracts(latency: Optional[Mapping[str, LatencyFn]] = None) -> dict[str, Contract]:
    lat = {**DEFAULT_LATENCY, **(latency or {})}
    cp_out = And((Neq(Sig("SC_CP"), Lit(0)), Neq(Sig("CV_CP"), Lit(None))))
    bs_in = And((Neq(Sig("CV_CP"), Lit(None)), Neq(Sig("SC_CP"), Lit(0))))
    bs_out = _produced("SC_BS", "E_BS")
    lm_clause = GuaranteeClause(RisingEdge("LS1"), bs_out, lat["f_LM"])
    ec_clause = GuaranteeClause(RisingEdge("LS2"), Eq(Sig("SC"), Shifted("SC_CP", "Offset")),
                                mode=ClauseMode.BICONDITIONAL)
    contracts = [
        Contract("C_CP", {"LS1"}, {"SC_CP", "CV_CP"}, {"M_S"}, SPEED_DOMAIN,
                 (GuaranteeClause(RisingEdge("LS1"), cp_out, lat["f_CP"]),)),
        Contract("C_BS", {"SC_CP", "CV_CP"}, {"E_BS", "SC_BS"}, {"M_S"}, SPEED_DOMAIN,
                 (GuaranteeClause(bs_in, bs_out, lat["f_BS"]),)),
        Contract("C_LM", {"LS1"}, {"E_BS", "SC_BS"}, {"M_S"}, SPEED_DOMAIN, (lm_clause,)),
        Contract("C_EC", {"SC", "SC_CP", "LS2"}, (), (), TRUE, (ec_clause,)),
        Contract("C_MC", {"SC", "SC_CP", "LS1", "LS2"}, {"E_BS", "SC_BS"}, {"M_S"},
                 SPEED_DOMAIN, (lm_clause, ec_clause)),
    ]
    return {c.name: c for c in contracts}
