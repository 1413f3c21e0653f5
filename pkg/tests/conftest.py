import random
import sys

import pytest

from resman.config import HarnessConfig
from resman.contracts import SPEEDS, default_contracts
from resman.harness import observer_view, simulate
from resman.plant import LatencyInflation, Plant, Slip
from resman.scenarios import canonical_script


def drain(plant, token):
    events = []
    while plant.busy(token):
        events += plant.advance(plant.next_time())
    return events


def random_plant_trace(rng: random.Random):
    """A plant run with random speeds, latencies, slips and token spacing.

    Returns (observer-view trace, M_S history, end time or None).  Some runs
    stop with tokens still in flight so the end-of-trace path is exercised.
    """
    plant = Plant()
    for _ in range(rng.randint(1, 4)):
        if rng.random() < 0.5:
            plant.set_speed(rng.choice(SPEEDS))
        if rng.random() < 0.6:
            plant.inject(LatencyInflation("CP", rng.choice(
                [0, rng.uniform(0, 1500), 50 * rng.randint(1, 30)])))
        if rng.random() < 0.6:
            plant.inject(LatencyInflation("BS", rng.choice(
                [0, rng.uniform(0, 3000), 50 * rng.randint(1, 60)])))
        if rng.random() < 0.4:
            plant.inject(Slip(rng.randint(-2, 5), rng.choice(["CP", "LS2"])))
        token = plant.place_token("W", plant.clock + rng.choice([0, 0, 25 * rng.randint(0, 40)]))
        if rng.random() < 0.5:
            drain(plant, token)
        else:
            for _ in range(rng.randint(0, 30)):
                plant.advance(plant.next_time())
    end = None
    if rng.random() < 0.7:
        for token in list(plant.tokens):
            drain(plant, token)
    else:
        end = plant.clock
    trace = observer_view(plant.log)
    history = [(e.t, e.value) for e in trace if e.signal == "M_S"]
    return trace, history, end


def outcome_key(o):
    return (o.contract, o.clause, o.token, o.t, o.verdict, o.violation_kind,
            o.observed_latency, o.excess)


@pytest.fixture(scope="session")
def contracts():
    return default_contracts()


@pytest.fixture(scope="session")
def canonical_sim():
    return simulate(HarnessConfig(), canonical_script())


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(module.RESULTS):
        terminalreporter.write_line(module.RESULTS[n])
