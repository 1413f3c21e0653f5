import itertools
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from resman.contracts import (
    DEFAULT_HIERARCHY, DEFAULT_LATENCY, SPEED_DOMAIN, SPEEDS, TRUE, And, ClauseMode,
    CompositionError, Contract, ContractError, Eq, GuaranteeClause, HierarchyError, Iff,
    Implies, LatencyFn, Lit, Neq, Not, Or, RisingEdge, Shifted, Sig, SpeedLevel,
    UnboundVariable, check_refinement, compose, default_contracts, environments,
    eval_predicate, holds_in, implies, latency_bound, satisfiable, tautology,
    validate_hierarchy,
)
from resman.plant import PlantConfig

S1, S2, S3 = SPEEDS


def with_f_lm(s1):
    lat = dict(DEFAULT_LATENCY)
    lat["f_LM"] = LatencyFn("f_LM", (s1, 1800, 3600))
    return lat


class TestSpeedAndLatency:
    def test_order(self):
        assert S1 > S2 > S3
        assert sorted([S3, S1, S2]) == [S3, S2, S1]
        assert S1.slower() == (S2, S3)
        assert S3.slower() == ()

    def test_parse(self):
        assert SpeedLevel.parse("S2") is S2
        with pytest.raises(ValueError):
            SpeedLevel.parse("S4")

    def test_default_bounds(self):
        assert latency_bound(DEFAULT_LATENCY["f_CP"], S1) == 200
        assert latency_bound(DEFAULT_LATENCY["f_LM"], S3) == 3600

    def test_rejects_speedups(self):
        with pytest.raises(ContractError):
            LatencyFn("f", (300, 200, 400))

    def test_sum_is_pointwise(self):
        total = DEFAULT_LATENCY["f_CP"] + DEFAULT_LATENCY["f_BS"]
        assert [total(s) for s in SPEEDS] == [400, 800, 1600]
        assert total.name == "f_CP+f_BS"

    @given(st.lists(st.floats(0, 1e6, allow_nan=False), min_size=3, max_size=3))
    def test_monotone_by_construction(self, raw):
        fn = LatencyFn("f", tuple(sorted(raw)))
        assert fn(S1) <= fn(S2) <= fn(S3)


class TestEvaluation:
    def test_true(self):
        assert eval_predicate(TRUE, {})

    def test_speed_domain(self):
        assert eval_predicate(SPEED_DOMAIN, {"M_S": S2})
        assert eval_predicate(SPEED_DOMAIN, {"M_S": "S3"})

    def test_one_conjunct_false(self):
        p = And((Neq(Sig("CV_CP"), Lit(None)), Neq(Sig("SC_CP"), Lit(0))))
        assert not eval_predicate(p, {"CV_CP": None, "SC_CP": 7})
        assert eval_predicate(p, {"CV_CP": "W", "SC_CP": 7})

    def test_iff_is_bidirectional(self):
        p = Iff(RisingEdge("LS2"), Eq(Sig("SC"), Shifted("SC_CP", "Offset")))
        env = {"SC_CP": 5, "Offset": 20}
        assert eval_predicate(p, {**env, "LS2": True, "SC": 25})
        assert eval_predicate(p, {**env, "LS2": False, "SC": 24})
        assert not eval_predicate(p, {**env, "LS2": True, "SC": 24})
        assert not eval_predicate(p, {**env, "LS2": False, "SC": 25})

    def test_unbound_names_the_variable(self):
        with pytest.raises(UnboundVariable, match="SC_CP"):
            eval_predicate(Neq(Sig("SC_CP"), Lit(0)), {})

    def test_unknown_signal_and_literal(self):
        with pytest.raises(ContractError):
            Sig("LS9")
        with pytest.raises(ContractError):
            Eq(Sig("E_BS"), Lit("E7"))

    def test_operators(self):
        a, b = RisingEdge("LS1"), RisingEdge("LS2")
        assert (a & b) == And((a, b))
        assert (a | b) == Or((a, b))
        assert ~a == Not(a)
        assert (a >> b) == Implies(a, b)


# a small grammar of predicates over enumerable and opaque atoms
_atoms = st.sampled_from([
    RisingEdge("LS1"), RisingEdge("LS2"),
    Eq(Sig("CV_CP"), Lit("W")), Neq(Sig("CV_CP"), Lit(None)),
    Eq(Sig("E_BS"), Lit("E1")), Eq(Sig("M_S"), Lit(S2)),
    Neq(Sig("SC_CP"), Lit(0)), Eq(Sig("SC"), Shifted("SC_CP", "Offset")),
])
predicates = st.recursive(
    _atoms,
    lambda inner: st.one_of(
        st.tuples(inner, inner).map(And), st.tuples(inner, inner).map(Or),
        inner.map(Not), st.builds(Implies, inner, inner), st.builds(Iff, inner, inner)),
    max_leaves=6,
)


def truth_table_implies(p, q):
    return all(not holds_in(p, env) or holds_in(q, env) for env in environments(p, q))


class TestEnumeration:
    @given(predicates, predicates)
    def test_implication_matches_truth_table(self, p, q):
        assert implies(p, q) == truth_table_implies(p, q)

    @given(predicates)
    def test_excluded_middle(self, p):
        assert tautology(Or((p, Not(p))))
        assert not satisfiable(And((p, Not(p))))

    @given(predicates)
    def test_abstract_agrees_with_concrete(self, p):
        # every abstract environment whose opaque atoms are realisable by a
        # concrete assignment evaluates the same way
        for env in itertools.islice(environments(p), 64):
            concrete = {"LS1": env.get("↑LS1", False), "LS2": env.get("↑LS2", False),
                        "CV_CP": env.get("CV_CP", None), "E_BS": env.get("E_BS", None),
                        "M_S": env.get("M_S", S1), "Offset": 20}
            concrete["SC_CP"] = 5 if env.get("0==SC_CP", False) is False else 0
            sc_eq = env.get("SC==SC_CP+Offset", False)
            concrete["SC"] = concrete["SC_CP"] + 20 if sc_eq else concrete["SC_CP"] + 19
            assert eval_predicate(p, concrete) == holds_in(p, env)

    def test_neq_is_negated_opaque_atom(self):
        assert implies(Eq(Sig("SC_CP"), Lit(0)), Not(Neq(Sig("SC_CP"), Lit(0))))

    def test_speed_domain_is_tautology(self):
        assert tautology(SPEED_DOMAIN)


class TestRefinement:
    def test_reflexive_on_registry(self, contracts):
        for c in contracts.values():
            assert check_refinement(c, c).holds, c.name

    def test_transitive_on_registry(self, contracts):
        pool = list(contracts.values()) + [compose(contracts["C_CP"], contracts["C_BS"])]
        for a, b, c in itertools.product(pool, repeat=3):
            if check_refinement(a, b).holds and check_refinement(b, c).holds:
                assert check_refinement(a, c).holds, (a.name, b.name, c.name)

    def test_cp_bs_refines_lm(self, contracts):
        assert check_refinement(compose(contracts["C_CP"], contracts["C_BS"]),
                                contracts["C_LM"]).holds

    def test_tight_f_lm_fails_at_s1(self):
        c = default_contracts(with_f_lm(350))
        report = check_refinement(compose(c["C_CP"], c["C_BS"]), c["C_LM"])
        assert not report.holds
        (cex,) = report.guarantee_counterexamples
        assert (cex.speed, cex.sub_bound, cex.super_bound) == (S1, 400, 350)
        assert "400 > 350" in cex.describe()

    def test_weaker_obligation_does_not_refine(self, contracts):
        lm = contracts["C_LM"]
        clause = replace(lm.guarantee[0], obligation=Neq(Sig("SC_BS"), Lit(0)))
        weak = replace(lm, name="weak", guarantee=(clause,))
        assert not check_refinement(weak, lm).holds
        assert check_refinement(lm, weak).holds

    def test_stronger_assumption_does_not_refine(self, contracts):
        lm = contracts["C_LM"]
        picky = replace(lm, name="picky", assumptions=Eq(Sig("M_S"), Lit(S1)))
        report = check_refinement(picky, lm)
        assert not report.holds and report.assumption_counterexamples

    @settings(max_examples=50)
    @given(st.floats(0.01, 100, allow_nan=False), st.integers(100, 1000))
    def test_scaling_deadlines_preserves_verdict(self, k, f_lm_s1):
        base = default_contracts(with_f_lm(f_lm_s1))
        scaled = default_contracts({n: fn.scaled(k) for n, fn in with_f_lm(f_lm_s1).items()})
        verdict = lambda c: check_refinement(compose(c["C_CP"], c["C_BS"]), c["C_LM"]).holds  # noqa: E731
        assert verdict(base) == verdict(scaled) == (f_lm_s1 >= 400)


class TestComposition:
    def test_cp_bs_interface(self, contracts):
        c = compose(contracts["C_CP"], contracts["C_BS"])
        assert c.inputs == {"LS1"}
        assert c.outputs == {"E_BS", "SC_BS"}
        assert not ({"SC_CP", "CV_CP"} & (c.inputs | c.outputs))
        (clause,) = c.guarantee
        assert clause.trigger == RisingEdge("LS1")
        assert clause.obligation == contracts["C_LM"].guarantee[0].obligation
        assert [clause.deadline(s) for s in SPEEDS] == [400, 800, 1600]

    def test_lm_ec_matches_mc(self, contracts):
        c = compose(contracts["C_LM"], contracts["C_EC"])
        assert check_refinement(c, contracts["C_MC"]).holds
        assert {cl.mode for cl in c.guarantee} == {ClauseMode.BOUNDED_RESPONSE,
                                                   ClauseMode.BICONDITIONAL}

    def test_identical_assumptions_kept(self, contracts):
        c = compose(contracts["C_CP"], contracts["C_BS"])
        assert c.assumptions == SPEED_DOMAIN

    def test_overlapping_outputs(self, contracts):
        with pytest.raises(CompositionError):
            compose(contracts["C_BS"], contracts["C_LM"])

    def test_unsatisfiable_assumptions(self):
        a = Contract("A", {"LS1"}, (), {"M_S"}, Eq(Sig("M_S"), Lit(S1)))
        b = Contract("B", {"LS2"}, (), {"M_S"}, Eq(Sig("M_S"), Lit(S2)))
        with pytest.raises(CompositionError, match="unsatisfiable"):
            compose(a, b)

    def test_dependent_assumptions(self):
        # B assumes what A guarantees; the composite need not assume it
        g = GuaranteeClause(RisingEdge("LS1"), Eq(Sig("CV_CP"), Lit("W")), DEFAULT_LATENCY["f_CP"])
        a = Contract("A", {"LS1"}, {"CV_CP"}, {"M_S"}, SPEED_DOMAIN, (g,))
        b = Contract("B", {"CV_CP", "LS1"}, (), (), Implies(RisingEdge("LS1"), Eq(Sig("CV_CP"), Lit("W"))))
        c = compose(a, b)
        assert tautology(c.assumptions)

    @pytest.mark.parametrize("pair", [("C_CP", "C_BS"), ("C_LM", "C_EC"), ("C_CP", "C_EC")])
    def test_symmetric(self, contracts, pair):
        ab = compose(contracts[pair[0]], contracts[pair[1]])
        ba = compose(contracts[pair[1]], contracts[pair[0]])
        assert (ab.inputs, ab.outputs, ab.params) == (ba.inputs, ba.outputs, ba.params)
        assert implies(ab.assumptions, ba.assumptions) and implies(ba.assumptions, ab.assumptions)
        assert set(ab.guarantee) == set(ba.guarantee)


class TestHierarchy:
    def test_default_passes(self, contracts):
        report = validate_hierarchy(DEFAULT_HIERARCHY, contracts, PlantConfig(), DEFAULT_LATENCY)
        assert report.ok and report.root == "C_MC"
        assert [t.ok for t in report.timing] == [True] * 3

    def test_single_node(self, contracts):
        assert validate_hierarchy({"C_CP": ()}, contracts).ok

    def test_tight_f_lm(self):
        lat = with_f_lm(350)
        report = validate_hierarchy(DEFAULT_HIERARCHY, default_contracts(lat), PlantConfig(), lat)
        assert not report.ok
        failed = {n.name for n in report.nodes if not n.ok}
        assert failed == {"C_LM"}
        assert any("400 > 350" in line for line in report.failures())

    def test_cycle_and_missing(self, contracts):
        with pytest.raises(HierarchyError):
            validate_hierarchy({"C_MC": ("C_LM",), "C_LM": ("C_MC",)}, contracts)
        with pytest.raises(HierarchyError):
            validate_hierarchy({"C_MC": ("C_XX",)}, contracts)
        with pytest.raises(HierarchyError):
            validate_hierarchy({"C_MC": ("C_LM",), "C_BS": ("C_LM",)}, contracts)

    def test_timing_needs_travel_slack(self, contracts):
        # a belt too fast for the subsystem budget
        plant = PlantConfig(step_period={"S1": 20, "S2": 100, "S3": 200})
        report = validate_hierarchy(DEFAULT_HIERARCHY, contracts, plant, DEFAULT_LATENCY)
        assert [t.ok for t in report.timing] == [False, True, True]
