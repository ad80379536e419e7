"""Approximate-time matching of messages across topics.

Deterministic policy: wait until every topic has at least one queued
message; take the largest head stamp as the pivot; per topic select the
queued message nearest the pivot (ties to the earlier one). If the
selected stamps span at most slop_ns, emit them as a set and discard
everything at or before each selection; otherwise drop the single oldest
head among all queues and retry. Pivot times of successive sets strictly
increase (a candidate whose pivot does not advance past the last emitted
pivot, possible when stamps repeat, is treated as a failed match) and no
message is ever emitted twice.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .bus import DEFAULT_QUEUE_CAPACITY


@dataclass
class SyncPolicy:
    topics: list
    slop_ns: int = 0
    queue_capacity: int = DEFAULT_QUEUE_CAPACITY

    def __post_init__(self):
        if len(self.topics) < 2:
            raise ValueError("synchronizer needs at least two topics")
        if self.slop_ns < 0 or self.queue_capacity < 1:
            raise ValueError("slop_ns must be >= 0 and queue_capacity >= 1")


@dataclass
class ApproximateTimeSync:
    policy: SyncPolicy
    queues: dict = field(init=False)

    def __post_init__(self):
        self.queues = {t: deque() for t in self.policy.topics}
        self.last_pivot = -1

    def push(self, topic: str, msg) -> list:
        """Queue one message and return every set that becomes emittable."""
        q = self.queues[topic]
        if len(q) >= self.policy.queue_capacity:
            q.popleft()
        q.append(msg)
        out = []
        while True:
            got = self.step()
            if got is None:
                return out
            out.append(got)

    def step(self):
        """One round of the matching policy; returns {topic: msg} or None."""
        while True:
            if any(not q for q in self.queues.values()):
                return None
            pivot = max(q[0].header.stamp_ns for q in self.queues.values())
            selected = {}
            for t in self.policy.topics:
                selected[t] = min(
                    self.queues[t],
                    key=lambda m: (abs(m.header.stamp_ns - pivot), m.header.stamp_ns),
                )
            stamps = [m.header.stamp_ns for m in selected.values()]
            pivot_out = max(stamps)
            if max(stamps) - min(stamps) <= self.policy.slop_ns and pivot_out > self.last_pivot:
                for t, chosen in selected.items():
                    q = self.queues[t]
                    limit = chosen.header.stamp_ns
                    while q and q[0].header.stamp_ns <= limit:
                        q.popleft()
                self.last_pivot = pivot_out
                return selected
            # no match: drop the oldest head (ties go to topic order)
            oldest = min(
                self.policy.topics, key=lambda t: self.queues[t][0].header.stamp_ns
            )
            self.queues[oldest].popleft()
