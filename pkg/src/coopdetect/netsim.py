"""Simulated backhaul: one-hop delivery with failure injection and accounting.

Messages move between APs once per synchronized round.  A failure plan can
crash APs (permanently, from a given round), take links down over a round
window, or drop individual messages at random.  An AP that misses a
neighbor's message keeps using the last value it received; that rule lives
in the solver, which simply does not update its stale copy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidConfig, UnknownEdge


def _norm_edge(edge) -> tuple[int, int]:
    a, b = int(edge[0]), int(edge[1])
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True)
class FailurePlan:
    """Crash and loss schedule for one run.

    ``ap_failures`` holds (ap_id, from_round) pairs: the AP stops computing
    and transmitting at every round >= from_round, but its last estimates
    stay usable by neighbors.  ``link_failures`` holds (edge, from_round,
    to_round) with inclusive bounds; edges are undirected.  ``drop_prob``
    drops each remaining message independently.
    """

    ap_failures: tuple[tuple[int, int], ...] = ()
    link_failures: tuple[tuple[tuple[int, int], int, int], ...] = ()
    drop_prob: float = 0.0

    def __post_init__(self):
        # drop_prob == 1 is allowed: it degenerates cooperation entirely,
        # which is a useful ablation.
        if not 0.0 <= self.drop_prob <= 1.0:
            raise InvalidConfig(f"drop_prob must be in [0, 1], got {self.drop_prob}")

    @classmethod
    def from_dict(cls, d: dict) -> "FailurePlan":
        return cls(
            ap_failures=tuple((int(a), int(r)) for a, r in d.get("ap_failures", ())),
            link_failures=tuple(
                (_norm_edge(e), int(r0), int(r1))
                for e, r0, r1 in d.get("link_failures", ())
            ),
            drop_prob=float(d.get("drop_prob", 0.0)),
        )

    def to_dict(self) -> dict:
        return {
            "ap_failures": [list(x) for x in self.ap_failures],
            "link_failures": [[list(e), r0, r1] for e, r0, r1 in self.link_failures],
            "drop_prob": self.drop_prob,
        }

    def validate(self, neighbors, num_rounds: int) -> None:
        """Check all referenced APs/edges exist and rounds lie in [1, T]."""
        problems = []
        b = len(neighbors)
        for ap, rnd in self.ap_failures:
            if not 0 <= ap < b:
                problems.append(f"ap_failures references unknown AP {ap}")
            if not 1 <= rnd <= num_rounds:
                problems.append(f"ap_failures round {rnd} outside [1, {num_rounds}]")
        for edge, r0, r1 in self.link_failures:
            i, j = _norm_edge(edge)
            if not (0 <= i < b and 0 <= j < b and j in neighbors[i]):
                problems.append(f"link_failures references unknown edge {edge}")
            if not (1 <= r0 <= r1 <= num_rounds):
                problems.append(f"link_failures window [{r0}, {r1}] outside [1, {num_rounds}]")
        if problems:
            raise InvalidConfig("; ".join(problems))

    def ap_down(self, ap: int, rnd: int) -> bool:
        return any(a == ap and rnd >= r for a, r in self.ap_failures)

    def link_down(self, edge, rnd: int) -> bool:
        e = _norm_edge(edge)
        return any(_norm_edge(fe) == e and r0 <= rnd <= r1 for fe, r0, r1 in self.link_failures)


EMPTY_PLAN = FailurePlan()


@dataclass
class CommLedger:
    """Per-round message accounting; delivered + dropped == attempted."""

    rounds: list = field(default_factory=list)
    sent_by_ap: dict = field(default_factory=dict)
    received_by_ap: dict = field(default_factory=dict)

    def record_round(self, rnd: int, attempted: int, delivered: int,
                     scalars: int) -> None:
        self.rounds.append(
            {
                "round": rnd,
                "attempted": attempted,
                "delivered": delivered,
                "dropped": attempted - delivered,
                "scalars_delivered": scalars,
            }
        )

    def credit(self, src: int, dst: int) -> None:
        self.sent_by_ap[src] = self.sent_by_ap.get(src, 0) + 1
        self.received_by_ap[dst] = self.received_by_ap.get(dst, 0) + 1

    @property
    def total_messages(self) -> int:
        return sum(r["delivered"] for r in self.rounds)

    @property
    def total_dropped(self) -> int:
        return sum(r["dropped"] for r in self.rounds)

    @property
    def total_scalars(self) -> int:
        return sum(r["scalars_delivered"] for r in self.rounds)

    def to_dict(self) -> dict:
        return {
            "rounds": self.rounds,
            "sent_by_ap": {str(k): v for k, v in sorted(self.sent_by_ap.items())},
            "received_by_ap": {str(k): v for k, v in sorted(self.received_by_ap.items())},
            "total_messages": self.total_messages,
            "total_dropped": self.total_dropped,
            "total_scalars": self.total_scalars,
        }


def deliver_round(
    messages: dict,
    plan: FailurePlan,
    rnd: int,
    rng: np.random.Generator,
    neighbors,
    ledger: CommLedger | None = None,
) -> dict:
    """Deliver one round of messages, applying the failure plan.

    ``messages`` maps directed edges (src, dst) to payload vectors.  Drops
    happen for crashed endpoints, failed links, and with ``drop_prob``
    otherwise; the random stream is only consumed when drop_prob > 0, so
    failure-free runs are bit-identical with and without a plan.

    Raises UnknownEdge for a directed edge not present in the adjacency.
    """
    delivered = {}
    scalars = 0
    for (src, dst) in sorted(messages):
        if dst not in neighbors[src]:
            raise UnknownEdge(f"({src}, {dst}) is not a backhaul edge")
    for (src, dst) in sorted(messages):
        payload = messages[(src, dst)]
        if plan.ap_down(src, rnd) or plan.ap_down(dst, rnd):
            continue
        if plan.link_down((src, dst), rnd):
            continue
        if plan.drop_prob > 0.0 and rng.random() < plan.drop_prob:
            continue
        delivered[(src, dst)] = payload
        scalars += int(np.size(payload))
        if ledger is not None:
            ledger.credit(src, dst)
    if ledger is not None:
        ledger.record_round(rnd, attempted=len(messages), delivered=len(delivered),
                            scalars=scalars)
    return delivered
