"""Evaluation metrics accumulated from engine telemetry.

Five headline metrics per (scheme, gamma, mode) cell: high-relevance ratio
(HRR), mean per-message semantic value, low-relevance ratio (LRR), budget
usage, and semantic efficiency (SE), plus the semantic model's mean estimation
error and the per-variable transmission multiplicity.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from .relevance import RelevanceFunction

if TYPE_CHECKING:  # telemetry is produced by the engine; no runtime import cycle
    from .engine import Telemetry

SV_AGGREGATIONS = ("max", "mean")


@dataclass(frozen=True)
class MetricsRecord:
    hrr: float | None
    mean_sv: float | None
    lrr: float | None
    usage: float | None
    se: float | None
    mean_eps: float | None
    tx_multiplicity: float | None
    messages: int
    variables: int
    slots: int


@dataclass(slots=True)
class MetricsAccumulator:
    """Additive sufficient statistics for one telemetry stream.

    Merging two accumulators equals accumulating the concatenated stream, so
    shards of one episode can be processed independently and combined.
    """

    s_min: float
    sv_aggregation: str = "max"
    messages: int = 0
    variables: int = 0
    sv_total: float = 0.0
    low_count: int = 0
    usage_sum: float = 0.0
    eps_sum: float = 0.0
    eps_count: int = 0
    hrr_sum: float = 0.0
    hrr_count: int = 0
    slots_counted: int = 0
    tx_events: int = 0
    tx_seen_mask: int = field(default=0, repr=False)

    def __post_init__(self) -> None:
        if self.sv_aggregation not in SV_AGGREGATIONS:
            raise ValueError(f"unknown sv_aggregation {self.sv_aggregation!r}")

    def record_transmission(self, t: Telemetry) -> None:
        """Fold one message into the totals.

        Per-variable semantic value aggregates the per-receiver true values
        (zeroed when redundant for that receiver); a variable counts as
        low-relevance only when its true value sits below s_min for every
        intended receiver, regardless of redundancy.
        """
        self.messages += 1
        n = len(t.variables)
        self.variables += n
        self.tx_events += n
        self.usage_sum += n / t.gamma
        if t.eps is not None:
            self.eps_sum += t.eps
            self.eps_count += 1
        use_mean = self.sv_aggregation == "mean"
        for k, values, redundant in zip(t.variables, t.true_values, t.redundant):
            self.tx_seen_mask |= 1 << k
            total = 0.0
            best = 0.0
            low = True
            for w, red in zip(values, redundant):
                s = 0.0 if red else w
                total += s
                if s > best:
                    best = s
                if w >= self.s_min:
                    low = False
            self.sv_total += total / len(values) if use_mean else best
            if low:
                self.low_count += 1

    def record_awareness_snapshot(self, known_mask: int, rel: RelevanceFunction) -> None:
        """One HRR sample: fraction of the vehicle's own high-relevance objects
        currently known to it.  Vehicles with no high-relevance objects are
        skipped rather than counted as zero."""
        high = len(rel.high_ids)
        if high == 0:
            return
        self.hrr_sum += (known_mask & rel.high_mask).bit_count() / high
        self.hrr_count += 1

    def merge(self, other: MetricsAccumulator) -> MetricsAccumulator:
        """Combine two shards of the same stream (associative, commutative)."""
        if other.s_min != self.s_min or other.sv_aggregation != self.sv_aggregation:
            raise ValueError("cannot merge accumulators with different settings")
        out = MetricsAccumulator(s_min=self.s_min, sv_aggregation=self.sv_aggregation)
        out.messages = self.messages + other.messages
        out.variables = self.variables + other.variables
        out.sv_total = self.sv_total + other.sv_total
        out.low_count = self.low_count + other.low_count
        out.usage_sum = self.usage_sum + other.usage_sum
        out.eps_sum = self.eps_sum + other.eps_sum
        out.eps_count = self.eps_count + other.eps_count
        out.hrr_sum = self.hrr_sum + other.hrr_sum
        out.hrr_count = self.hrr_count + other.hrr_count
        out.slots_counted = self.slots_counted + other.slots_counted
        out.tx_events = self.tx_events + other.tx_events
        out.tx_seen_mask = self.tx_seen_mask | other.tx_seen_mask
        return out

    def finalize(self) -> MetricsRecord:
        """Reduce the totals to the reported metrics; absent data stays None
        (serialized as empty cells, never fabricated zeros)."""
        if self.messages == 0:
            return MetricsRecord(None, None, None, None, None, None, None, 0, 0, self.slots_counted)
        distinct = self.tx_seen_mask.bit_count()
        return MetricsRecord(
            hrr=self.hrr_sum / self.hrr_count if self.hrr_count else None,
            mean_sv=self.sv_total / self.messages,
            lrr=self.low_count / self.variables if self.variables else None,
            usage=self.usage_sum / self.messages,
            se=self.sv_total / self.variables if self.variables else None,
            mean_eps=self.eps_sum / self.eps_count if self.eps_count else None,
            tx_multiplicity=self.tx_events / distinct if distinct else None,
            messages=self.messages,
            variables=self.variables,
            slots=self.slots_counted,
        )
