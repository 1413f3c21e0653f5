import pytest
from hypothesis import given
from hypothesis import strategies as st

from resman.contracts import DEFAULT_LATENCY, SPEEDS
from resman.hierarchy import (
    Action, AuthorityError, FaultClass, FaultReport, Level, ParameterUpdate, PlanBin2,
    ResilienceHierarchy, RmNode, RoutingError, SequencingError, check_managers,
    default_managers, l1_evaluate, l2_decide, leaf_on_violation, propagate_update,
    select_degraded_speed,
)
from resman.observers import ObserverOutcome, Verdict, ViolationKind
from resman.plant import RAN_OFF, BinOutcome

S1, S2, S3 = SPEEDS
F_LM = DEFAULT_LATENCY["f_LM"]
MANAGERS = default_managers()


def late(contract, latency, token=1, t=0.0):
    return ObserverOutcome(contract, Verdict.VIOLATED, t, token, latency,
                           ViolationKind.DEADLINE_EXCEEDED, None)


def latency_report(sender, c_l, token=1):
    return FaultReport(sender, f"C_{sender}", FaultClass.LATENCY, token, 0.0, observed_latency=c_l)


def l2(reports, outcome, speed=S1, contracts=None):
    return l2_decide(MANAGERS["MC"], reports, outcome, correct_bin=1, speed=speed,
                     managers=MANAGERS, contracts=contracts, t=0.0)


class TestTopology:
    def test_default_tree(self):
        assert check_managers(MANAGERS) == "MC"
        assert MANAGERS["LM"].children == ("CP", "BS")
        assert MANAGERS["EC"].parent == "MC"
        assert MANAGERS["LM"].host == "BS"

    def test_rejects_two_roots(self):
        bad = dict(MANAGERS, X=RmNode("X", Level.ROOT))
        with pytest.raises(RoutingError):
            check_managers(bad)

    def test_rejects_one_sided_link(self):
        bad = dict(MANAGERS, CP=RmNode("CP", Level.LEAF, "MC", (), ("C_CP",)))
        with pytest.raises(RoutingError):
            check_managers(bad)


class TestLeaf:
    def test_cp_reports_to_l1(self, contracts):
        msgs, actions = leaf_on_violation(MANAGERS["CP"], late("C_CP", 250), contracts)
        (m,) = msgs
        assert (m.sender, m.receiver, m.kind) == ("CP", "LM", "FaultReport")
        assert m.payload.fault_class is FaultClass.LATENCY
        assert m.payload.observed_latency == 250
        assert actions == []

    def test_ec_reports_to_root_and_plans_bin_2(self, contracts):
        o = ObserverOutcome("C_EC", Verdict.VIOLATED, 0, 7,
                            violation_kind=ViolationKind.UNEXPECTED_TRIGGER)
        msgs, actions = leaf_on_violation(MANAGERS["EC"], o, contracts)
        assert [(m.receiver, m.payload.fault_class) for m in msgs] == [("MC", FaultClass.JITTER)]
        assert actions == [PlanBin2(7)]

    def test_satisfied_is_silent(self, contracts):
        o = ObserverOutcome("C_CP", Verdict.SATISFIED, 150, 1, 150)
        assert leaf_on_violation(MANAGERS["CP"], o, contracts) == ([], [])

    def test_foreign_contract(self, contracts):
        with pytest.raises(RoutingError):
            leaf_on_violation(MANAGERS["CP"], late("C_BS", 250), contracts)


class TestL1:
    def evaluate(self, reports, contracts, speed=S1):
        return l1_evaluate(MANAGERS["LM"], reports, speed=speed, managers=MANAGERS,
                           contracts=contracts)

    def test_absorbs_within_slack(self, contracts):
        ((d, up),) = self.evaluate([latency_report("CP", 250)], contracts)
        assert d.action is Action.ABSORB and up is None

    def test_two_reports_two_decisions(self, contracts):
        out = self.evaluate([latency_report("CP", 250), latency_report("BS", 250)], contracts)
        assert [d.action for d, _ in out] == [Action.ABSORB, Action.ABSORB]
        assert all(up is None for _, up in out)

    def test_escalates_with_violation(self, contracts):
        ((d, up),) = self.evaluate([latency_report("BS", 1550)], contracts)
        assert d.action is Action.ESCALATE
        assert (up.sender, up.receiver) == ("LM", "MC")
        assert up.payload.violation_amount == 1150

    def test_second_report_sees_both_actuals(self, contracts):
        out = self.evaluate([latency_report("CP", 350), latency_report("BS", 300)], contracts)
        # 350 + 200 fits; 350 + 300 does not
        assert [d.action for d, _ in out] == [Action.ABSORB, Action.ESCALATE]
        assert out[1][1].payload.violation_amount == 50

    def test_non_child(self, contracts):
        with pytest.raises(RoutingError):
            self.evaluate([latency_report("EC", 10)], contracts)


class TestRoot:
    def test_select_speed(self):
        assert select_degraded_speed(1150, S1, F_LM) is S2
        assert select_degraded_speed(2000, S1, F_LM) is S3
        assert select_degraded_speed(500, S3, F_LM) is None
        assert select_degraded_speed(None, S1, F_LM) is S3

    def test_jitter_goes_to_s3(self, contracts):
        jitter = FaultReport("EC", "C_EC", FaultClass.JITTER, 1, 0.0)
        d, msgs = l2([jitter], BinOutcome("Binned", 2), contracts=contracts)
        assert (d.action, d.speed) == (Action.SET_SPEED, S3)
        assert sorted(m.receiver for m in msgs) == ["BS", "CP", "LM"]

    def test_latency_selects_s2(self, contracts):
        up = FaultReport("LM", "C_LM", FaultClass.LATENCY, 1, 0.0, violation_amount=1150)
        d, msgs = l2([up], RAN_OFF, contracts=contracts)
        assert (d.action, d.speed, len(msgs)) == (Action.SET_SPEED, S2, 3)

    def test_correct_bin_overrides(self, contracts):
        up = FaultReport("LM", "C_LM", FaultClass.LATENCY, 1, 0.0, violation_amount=1150)
        d, msgs = l2([up], BinOutcome("Binned", 1), contracts=contracts)
        assert d.action is Action.NO_ACTION and msgs == []

    def test_hand_over(self, contracts):
        up = FaultReport("LM", "C_LM", FaultClass.LATENCY, 1, 0.0, violation_amount=500)
        d, msgs = l2([up], RAN_OFF, speed=S3, contracts=contracts)
        assert d.action is Action.HANDOVER and msgs == []

    def test_needs_terminal_outcome(self, contracts):
        up = FaultReport("LM", "C_LM", FaultClass.LATENCY, 1, 0.0, violation_amount=500)
        with pytest.raises(SequencingError):
            l2([up], BinOutcome("Pending"), contracts=contracts)

    def test_update_fan_out(self, contracts):
        msgs = propagate_update(ParameterUpdate(S1, 0.0), MANAGERS["MC"], MANAGERS, contracts)
        assert sorted(m.receiver for m in msgs) == ["BS", "CP", "LM"]
        assert all(m.kind == "ParameterUpdate" for m in msgs)
        with pytest.raises(AuthorityError):
            propagate_update(ParameterUpdate(S2, 0.0), MANAGERS["LM"], MANAGERS, contracts)

    def test_fan_out_follows_parameters(self, contracts):
        from dataclasses import replace
        ec = replace(contracts["C_EC"], params=frozenset({"M_S"}))
        msgs = propagate_update(ParameterUpdate(S2, 0.0), MANAGERS["MC"], MANAGERS,
                                {**contracts, "C_EC": ec})
        assert sorted(m.receiver for m in msgs) == ["BS", "CP", "EC", "LM"]


@given(st.lists(st.sampled_from(["jitter", "lat"]), min_size=1, max_size=3).filter(
    lambda kinds: "jitter" in kinds),
       st.integers(0, 5000), st.sampled_from([RAN_OFF, BinOutcome("Binned", 2)]))
def test_jitter_precedence(contracts, kinds, violation, outcome):
    reports = [FaultReport("EC", "C_EC", FaultClass.JITTER, 1, 0.0) if k == "jitter" else
               FaultReport("LM", "C_LM", FaultClass.LATENCY, 1, 0.0, violation_amount=violation)
               for k in kinds]
    d, _ = l2(reports, outcome, contracts=contracts)
    assert d.speed is S3


class TestRuntime:
    def test_absorbed_token_never_reaches_root(self, contracts):
        h = ResilienceHierarchy(MANAGERS, contracts)
        h.on_outcome("CP", late("C_CP", 250))
        assert not h.has_root_reports(1)
        assert [m.receiver for m in h.messages] == ["LM"]
        assert h.root_decide(1, BinOutcome("Binned", 1), 1, 1000) is None

    def test_escalation_supersedes_leaf_report(self, contracts):
        h = ResilienceHierarchy(MANAGERS, contracts)
        h.on_outcome("BS", late("C_BS", 1550))
        assert [(m.sender, m.receiver, m.superseded) for m in h.messages] == [
            ("BS", "LM", True), ("LM", "MC", False)]
        assert h.message_count("scenario-origin") == 1
        assert h.message_count("physical") == 2
        d = h.root_decide(1, RAN_OFF, 1, 2000)
        assert d.speed is S2 and h.speed is S2
        assert h.message_count("scenario-origin") == 4

    def test_jitter_reported_once_per_token(self, contracts):
        h = ResilienceHierarchy(MANAGERS, contracts)
        for kind in (ViolationKind.MISSING_TRIGGER, ViolationKind.UNEXPECTED_TRIGGER):
            h.on_outcome("EC", ObserverOutcome("C_EC", Verdict.VIOLATED, 0, 1,
                                               violation_kind=kind))
        assert len(h.messages) == 1 and len(h.faults) == 1

    def test_listeners_receive_updates(self, contracts):
        h = ResilienceHierarchy(MANAGERS, contracts)
        got = []
        h.on_update(lambda node, upd: got.append((node, upd.value)))
        h.on_outcome("EC", ObserverOutcome("C_EC", Verdict.VIOLATED, 0, 1,
                                           violation_kind=ViolationKind.MISSING_TRIGGER))
        h.root_decide(1, BinOutcome("Binned", 2), 1, 10)
        assert sorted(got) == [("BS", S3), ("CP", S3), ("LM", S3)]

    def test_bad_accounting_mode(self, contracts):
        with pytest.raises(ValueError):
            ResilienceHierarchy(MANAGERS, contracts).message_count("wire")


class TestCanonicalRun:
    def test_message_directions(self, canonical_sim):
        managers = canonical_sim.hierarchy.managers
        for m in canonical_sim.hierarchy.messages:
            if m.kind == "FaultReport":
                assert managers[m.sender].parent == m.receiver
            else:
                assert m.sender == "MC" and managers[m.receiver].parent is not None

    def test_decision_decomposition(self, canonical_sim):
        per_entry = [len(e.decisions) for e in canonical_sim.entries]
        assert per_entry == [1, 1, 2, 1, 1, 2, 2, 1, 2]
        assert sum(per_entry) == 13

    def test_speed_only_degrades_within_entry(self, canonical_sim):
        for e in canonical_sim.entries:
            speeds = [S1] + [d.speed for d in e.decisions if d.action is Action.SET_SPEED]
            assert speeds == sorted(speeds, reverse=True)
