"""Time-slotted round-robin communication loop.

Each slot one vehicle transmits: it refreshes its local perception snapshot,
the active scheme picks at most gamma variables, and the message reaches every
other vehicle over an error-free channel.  A receiver keeps one entry per
sender; entries expire after one full communication cycle (N slots), which
under round-robin coincides with the sender's next transmission.

Known sets are mirrored as integer bitmasks over object ids (K is small), so
unions, intersections and counts in the per-slot path are single int ops.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .metrics import MetricsAccumulator, MetricsRecord
from .relevance import RelevanceFunction, RelevanceParams, build_relevance_functions
from .scenario import (
    MobilityMode,
    SceneConfig,
    Scenario,
    advance_mobility,
    detection_probability_vector,
    place_objects,
    sample_hits,
    spawn_vehicles,
)
from .schemes import (
    EstimationModel,
    SchemeKind,
    SelectionContext,
    estimate_receiver_known,
    estimation_error,
    select_baseline,
    select_ideal_semantic,
    select_irc,
    select_rm,
    select_semantic,
)


class Mode(Enum):
    UNICAST = "unicast"
    BROADCAST = "broadcast"


@dataclass(slots=True)
class V2XEntry:
    ids: tuple[int, ...]
    mask: int
    slot: int


@dataclass(frozen=True)
class Message:
    sender: int
    sender_position: tuple[float, float]
    sender_speed: float
    variables: frozenset[int]
    slot: int


@dataclass(slots=True)
class Telemetry:
    """Everything the metrics need about one transmitted message.

    `variables` holds the selected ids in ascending order; `true_values` and
    `redundant` are parallel per-variable rows, one entry per intended
    receiver (in `receivers` order).  Redundancy is evaluated against the
    receiver's known set immediately before the message was applied.  `eps`
    is populated only when selection actually used the estimation model.
    """

    message: Message
    scheme: SchemeKind
    receivers: tuple[int, ...]
    gamma: int
    variables: tuple[int, ...]
    true_values: list[tuple[float, ...]]
    redundant: list[tuple[bool, ...]]
    eps: float | None

    @property
    def slot(self) -> int:
        return self.message.slot

    @property
    def transmitter(self) -> int:
        return self.message.sender


@dataclass(slots=True)
class KnowledgeBase:
    """One vehicle's knowledge: its own snapshot plus per-sender V2X entries."""

    owner: int
    local_ids: frozenset[int] = frozenset()
    local_mask: int = 0
    local_slot: int = -1
    v2x_entries: dict[int, V2XEntry] = field(default_factory=dict)

    def known_set(self, current_slot: int, n_vehicles: int) -> set[int]:
        """Local snapshot united with every still-valid V2X entry."""
        out = set(self.local_ids)
        for entry in self.v2x_entries.values():
            if current_slot - entry.slot < n_vehicles:
                out.update(entry.ids)
        return out

    def known_mask(self, current_slot: int, n_vehicles: int) -> int:
        mask = self.local_mask
        for entry in self.v2x_entries.values():
            if current_slot - entry.slot < n_vehicles:
                mask |= entry.mask
        return mask


def expire_entries(kb: KnowledgeBase, current_slot: int, n_vehicles: int) -> KnowledgeBase:
    """Drop every V2X entry at least one full communication cycle old.

    Mutates and returns `kb`.  Round-robin replaces a sender's entry exactly
    every N slots, so expiry matters at the start of the sender's own slot
    (before its new message lands) and for senders that emitted nothing.
    """
    stale = [s for s, e in kb.v2x_entries.items() if current_slot - e.slot >= n_vehicles]
    for s in stale:
        del kb.v2x_entries[s]
    return kb


@dataclass(slots=True)
class SimState:
    slot: int
    scenario: Scenario
    relevance: list[RelevanceFunction]
    knowledge: list[KnowledgeBase]
    channel_history: dict[int, V2XEntry]
    scheme: SchemeKind
    gamma: int
    mode: Mode
    estimation: EstimationModel
    s_min: float
    # Hot-loop caches: per-vehicle detection probabilities (static positions),
    # value vectors as plain lists, and per-transmitter receiver structures.
    _probs: list[np.ndarray] = field(default_factory=list, repr=False)
    _values: list[list[float]] = field(default_factory=list, repr=False)
    _receivers: list[tuple[int, ...]] = field(default_factory=list, repr=False)
    _recv_values: list[dict[int, list[float]]] = field(default_factory=list, repr=False)

    def validate(self) -> None:
        n = len(self.scenario.vehicles)
        if self.mode is Mode.UNICAST and n != 2:
            raise ValueError("unicast requires exactly 2 vehicles")
        if self.mode is Mode.BROADCAST and n < 3:
            raise ValueError("broadcast requires at least 3 vehicles")
        if self.gamma < 1:
            raise ValueError("gamma must be >= 1")


def new_sim_state(
    scenario: Scenario,
    relevance: list[RelevanceFunction],
    scheme: SchemeKind,
    gamma: int,
    mode: Mode,
    estimation: EstimationModel,
    s_min: float,
) -> SimState:
    n = len(scenario.vehicles)
    # Dense object ids double as bit positions and value-vector indices.
    assert all(o.id == i for i, o in enumerate(scenario.objects))
    values = [list(r.values) for r in relevance]
    receivers = [tuple(r for r in range(n) if r != t) for t in range(n)]
    state = SimState(
        slot=0,
        scenario=scenario,
        relevance=relevance,
        knowledge=[KnowledgeBase(owner=v.id) for v in scenario.vehicles],
        channel_history={},
        scheme=scheme,
        gamma=gamma,
        mode=mode,
        estimation=estimation,
        s_min=s_min,
        _probs=[
            detection_probability_vector(v.position, scenario.objects, v.perception_coeffs)
            for v in scenario.vehicles
        ],
        _values=values,
        _receivers=receivers,
        _recv_values=[{r: values[r] for r in recv} for recv in receivers],
    )
    state.validate()
    return state


def _mask_of(ids: list[int] | tuple[int, ...]) -> int:
    mask = 0
    for k in ids:
        mask |= 1 << k
    return mask


def run_slot(state: SimState, rng: np.random.Generator) -> tuple[SimState, Telemetry]:
    """Advance one slot: expiry, local refresh, selection, delivery, telemetry.

    The returned state is the same object advanced in place; the telemetry
    captures the emitted message plus per-receiver true values and redundancy
    flags evaluated against receiver knowledge before delivery.
    """
    t = state.slot
    n = len(state.scenario.vehicles)
    tx = t % n
    kbs = state.knowledge

    # Round-robin refreshes every sender's entry each cycle, so the only entry
    # that can reach age N at slot t belongs to the current transmitter; all
    # accessors re-check validity anyway, this just frees the bookkeeping.
    stale = state.channel_history.get(tx)
    if stale is not None and t - stale.slot >= n:
        del state.channel_history[tx]
        for r in range(n):
            if r != tx:
                kbs[r].v2x_entries.pop(tx, None)

    if state.scenario.config.mobility_mode is MobilityMode.CONSTANT_VELOCITY:
        state.scenario = advance_mobility(state.scenario, 1)
        v = state.scenario.vehicles[tx]
        state._probs[tx] = detection_probability_vector(
            v.position, state.scenario.objects, v.perception_coeffs
        )

    local_ids = sample_hits(state._probs[tx], rng)
    kb_tx = kbs[tx]
    kb_tx.local_ids = frozenset(local_ids)
    kb_tx.local_mask = _mask_of(local_ids)
    kb_tx.local_slot = t

    receivers = state._receivers[tx]
    est_known = estimate_receiver_known(
        [(e.ids, e.slot) for e in state.channel_history.values()], t, n
    )
    ctx = SelectionContext(
        transmitter=tx,
        local_set=set(local_ids),
        known_set_size=kb_tx.known_mask(t, n).bit_count(),
        estimated_receiver_known=est_known,
        receivers=receivers,
        gamma=state.gamma,
        s_min=state.s_min,
        receiver_values=state._recv_values[tx],
    )

    eps = None
    if state.scheme is SchemeKind.BASELINE:
        selected = select_baseline(ctx, rng)
    elif state.scheme is SchemeKind.IRC:
        selected = select_irc(ctx, rng)
    elif state.scheme is SchemeKind.RM:
        selected = select_rm(ctx, rng)
    elif state.scheme is SchemeKind.SEMANTIC:
        selected = select_semantic(ctx, state.estimation, rng)
        eps = estimation_error(ctx.known_set_size, state.estimation)
    else:
        ctx.true_receiver_known = {r: kbs[r].known_set(t, n) for r in receivers}
        selected = select_ideal_semantic(ctx)

    sel = sorted(selected)
    assert len(sel) <= state.gamma and selected <= ctx.local_set

    # Redundancy ground truth: receiver knowledge immediately before delivery.
    known_before = [kbs[r].known_mask(t, n) for r in receivers]
    recv_values = [state._values[r] for r in receivers]
    true_values = []
    redundant = []
    for k in sel:
        true_values.append(tuple([v[k] for v in recv_values]))
        redundant.append(tuple([mask >> k & 1 == 1 for mask in known_before]))

    entry = V2XEntry(ids=tuple(sel), mask=_mask_of(sel), slot=t)
    for r in receivers:
        kbs[r].v2x_entries[tx] = entry
    state.channel_history[tx] = entry

    vehicle = state.scenario.vehicles[tx]
    telemetry = Telemetry(
        message=Message(
            sender=tx,
            sender_position=vehicle.position,
            sender_speed=vehicle.speed,
            variables=frozenset(sel),
            slot=t,
        ),
        scheme=state.scheme,
        receivers=receivers,
        gamma=state.gamma,
        variables=entry.ids,
        true_values=true_values,
        redundant=redundant,
        eps=eps,
    )
    state.slot = t + 1
    return state, telemetry


@dataclass(frozen=True)
class EpisodeConfig:
    scene: SceneConfig
    relevance: RelevanceParams
    estimation: EstimationModel
    scheme: SchemeKind
    gamma: int
    mode: Mode
    slots: int
    sv_aggregation: str = "max"


def run_episode_accumulator(config: EpisodeConfig, rng: np.random.Generator) -> MetricsAccumulator:
    """Build one scenario, run the slot loop, accumulate metrics.

    The first N slots are warm-up — every vehicle transmits once so estimated
    redundancy and expiry reach steady state — and contribute no samples.
    """
    n = config.scene.vehicle_count
    if config.slots < 2 * n:
        raise ValueError("episode needs at least two full communication cycles")
    scenario = Scenario(
        config=config.scene,
        objects=place_objects(config.scene, rng),
        vehicles=spawn_vehicles(config.scene, rng),
    )
    relevance = build_relevance_functions(scenario, config.relevance, rng)
    state = new_sim_state(
        scenario, relevance, config.scheme, config.gamma, config.mode,
        config.estimation, config.relevance.s_min,
    )
    acc = MetricsAccumulator(s_min=config.relevance.s_min, sv_aggregation=config.sv_aggregation)
    record_tx = acc.record_transmission
    record_hrr = acc.record_awareness_snapshot
    for t in range(config.slots):
        state, telemetry = run_slot(state, rng)
        if t < n:
            continue
        record_tx(telemetry)
        for kb, rel in zip(state.knowledge, relevance):
            record_hrr(kb.known_mask(t, n), rel)
        acc.slots_counted += 1
    return acc


def run_episode(config: EpisodeConfig, rng: np.random.Generator) -> MetricsRecord:
    """One independent replication, reduced to its metrics record."""
    return run_episode_accumulator(config, rng).finalize()
