from hypothesis import given
from hypothesis import strategies as st

from resman.baselines import DecisionModel, run_centralized, run_decentralized
from resman.harness import recovery_time


def test_centralized_canonical(canonical_sim):
    m = run_centralized(canonical_sim.faults)
    assert (m.messages, m.decisions) == (48, 12)
    assert recovery_time(m.messages, m.decisions) == 54


def test_decentralized_models(canonical_sim):
    faults = canonical_sim.faults
    mirror = run_decentralized(faults, DecisionModel.MIRROR_HIERARCHICAL, 13)
    two = run_decentralized(faults, DecisionModel.TWO_PER_FAULT)
    assert (mirror.messages, mirror.decisions) == (108, 13)
    assert (two.messages, two.decisions) == (108, 24)
    assert recovery_time(mirror.messages, mirror.decisions) == 114.5
    assert recovery_time(two.messages, two.decisions) == 120


def test_edges():
    assert run_centralized([]) == run_decentralized([], "TwoPerFault")
    one = run_centralized(["f"])
    assert (one.messages, one.decisions) == (4, 1)


@given(st.integers(0, 500))
def test_linear_in_faults(n):
    faults = [object()] * n
    assert run_centralized(faults).messages == 4 * n
    assert run_decentralized(faults, DecisionModel.TWO_PER_FAULT).messages == 9 * n


def test_fault_list_untouched(canonical_sim):
    before = list(canonical_sim.faults)
    run_centralized(canonical_sim.faults)
    run_decentralized(canonical_sim.faults, DecisionModel.TWO_PER_FAULT)
    assert canonical_sim.faults == before
