"""Centralised and decentralised reference architectures.

Both consume the fault list extracted from a plant run and only count
messages and decisions; they never act on the plant.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Sequence

CENTRAL_MESSAGES_PER_FAULT = 4  # 1 report + 1 response to each of CP, BS, EC
DECENTRAL_MESSAGES_PER_FAULT = 9  # report, proposals, chosen solution; 3 messages each


class DecisionModel(enum.Enum):
    MIRROR_HIERARCHICAL = "MirrorHierarchical"
    TWO_PER_FAULT = "TwoPerFault"


@dataclass(frozen=True)
class ArchMetrics:
    messages: int
    decisions: int


def run_centralized(faults: Sequence) -> ArchMetrics:
    return ArchMetrics(CENTRAL_MESSAGES_PER_FAULT * len(faults), len(faults))


def run_decentralized(faults: Sequence,
                      decision_model: DecisionModel = DecisionModel.MIRROR_HIERARCHICAL,
                      hierarchical_decisions: Optional[int] = None) -> ArchMetrics:
    """Nine messages per fault.

    ``MirrorHierarchical`` reuses the decision-event count of the hierarchical
    run over the same faults; ``TwoPerFault`` charges two decisions per fault.
    """
    model = DecisionModel(decision_model)
    if model is DecisionModel.TWO_PER_FAULT:
        decisions = 2 * len(faults)
    else:
        if hierarchical_decisions is None:
            raise ValueError("MirrorHierarchical needs the hierarchical decision count")
        decisions = hierarchical_decisions
    return ArchMetrics(DECENTRAL_MESSAGES_PER_FAULT * len(faults), decisions)
