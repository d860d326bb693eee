"""The five message-content selection schemes behind one contract.

Baseline, IRC and RM are content-agnostic (they never look at semantic
values); Semantic ranks candidates by noisy estimated values; IdealSemantic
ranks by true values with perfect receiver-state knowledge.  All selectors
return a subset of the transmitter's local snapshot with at most `gamma`
elements.
"""
from __future__ import annotations

import itertools
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from enum import Enum

import numpy as np

# Logistic estimation-error coefficients: eps(c) = 1 / (1 + a4 * exp(-a5 * (c - a6)))
DEFAULT_ESTIMATION_COEFFS = (1.0, -0.5, 26.0)


class SchemeKind(Enum):
    BASELINE = "Baseline"
    IRC = "IRC"
    RM = "RM"
    SEMANTIC = "Semantic"
    IDEAL_SEMANTIC = "IdealSemantic"


# Stable per-scheme index used for seed derivation and row ordering.
SCHEME_INDEX = {kind: i for i, kind in enumerate(SchemeKind)}


@dataclass(frozen=True)
class EstimationModel:
    coeffs: tuple[float, float, float] = DEFAULT_ESTIMATION_COEFFS
    value_range_width: float = 1.0  # max(w) - min(w) of the nominal value range

    def validate(self) -> None:
        if self.value_range_width <= 0:
            raise ValueError("value_range_width must be positive")


@dataclass(slots=True)
class SelectionContext:
    """Read-only snapshot of everything a selector may consult.

    `estimated_receiver_known` is the shared channel-derived estimate of what
    receivers already hold; `true_receiver_known` is the per-receiver ground
    truth and is only populated for the ideal scheme.  `receiver_values` maps
    receiver id to that receiver's true semantic-value vector.
    """

    transmitter: int
    local_set: set[int]
    known_set_size: int
    estimated_receiver_known: set[int]
    receivers: tuple[int, ...]
    gamma: int
    s_min: float
    receiver_values: dict[int, Sequence[float]]
    true_receiver_known: dict[int, set[int]] | None = None

    def validate(self) -> None:
        if self.gamma < 1:
            raise ValueError("gamma must be >= 1")
        if not self.receivers:
            raise ValueError("receivers must be nonempty")
        if self.transmitter in self.receivers:
            raise ValueError("transmitter cannot be its own receiver")


def estimation_error(known_count: int, model: EstimationModel) -> float:
    """Estimation error of the semantic model given the transmitter's known-set size.

    Strictly decreasing in `known_count` for the default coefficients: the more
    context a vehicle has gathered, the better it guesses others' relevance.
    """
    a4, a5, a6 = model.coeffs
    return 1.0 / (1.0 + a4 * math.exp(-a5 * (known_count - a6)))


def sample_estimated_value(
    true_w: float,
    eps: float,
    model: EstimationModel,
    rng: np.random.Generator,
) -> float:
    """Noisy value estimate: uniform on an interval of width eps * range centred
    on the true value.

    The interval is deliberately not clamped to the value range, so estimates of
    a zero-value variable straddle zero and land below the relevance threshold
    about half the time.  Downstream code only ever compares estimates against
    s_min, so out-of-range samples are harmless.  With eps = 0 the estimate is
    exact.
    """
    delta = model.value_range_width * eps
    return true_w + (rng.random() - 0.5) * delta


def estimate_receiver_known(
    channel_history: Iterable[tuple[Iterable[int], int]],
    current_slot: int,
    n_vehicles: int,
) -> set[int]:
    """Union of every variable id recently heard on the channel.

    `channel_history` holds each sender's latest (variable ids, transmit slot)
    pair; entries older than one full communication cycle are ignored.  The
    estimate covers all senders including the caller and deliberately excludes
    receiver-local detections nobody has transmitted — that blind spot is what
    separates the semantic scheme from its ideal variant.
    """
    out: set[int] = set()
    for ids, slot in channel_history:
        if current_slot - slot < n_vehicles:
            out.update(ids)
    return out


def _random_subset(items: Sequence[int], size: int, rng: np.random.Generator) -> set[int]:
    # Uniform subset via a permutation prefix; operating on a sorted sequence
    # keeps the draw independent of set iteration order.
    idx = rng.permutation(len(items))[:size]
    return {items[i] for i in idx.tolist()}


def select_baseline(ctx: SelectionContext, rng: np.random.Generator) -> set[int]:
    """Everything local if it fits, otherwise a uniformly random budget-sized subset."""
    if len(ctx.local_set) <= ctx.gamma:
        return set(ctx.local_set)
    return _random_subset(sorted(ctx.local_set), ctx.gamma, rng)


def select_irc(ctx: SelectionContext, rng: np.random.Generator) -> set[int]:
    """Drop estimated-redundant variables (in random order) only while over budget.

    Removing one redundant variable at a time until the budget fits is
    distributionally the same as dropping a uniform random excess-sized subset
    of the redundant ones, which is what we do.  If the message is still too
    large once every redundant variable is gone, fall back to a random
    budget-sized subset of the non-redundant remainder.
    """
    local = ctx.local_set
    if len(local) <= ctx.gamma:
        return set(local)
    redundant = sorted(local & ctx.estimated_receiver_known)
    keep = local - ctx.estimated_receiver_known
    excess = len(local) - ctx.gamma
    if excess <= len(redundant):
        dropped = _random_subset(redundant, excess, rng)
        return set(local) - dropped
    return _random_subset(sorted(keep), ctx.gamma, rng)


def select_rm(ctx: SelectionContext, rng: np.random.Generator) -> set[int]:
    """Send only non-redundant variables, randomly thinned to the budget."""
    candidate = ctx.local_set - ctx.estimated_receiver_known
    if len(candidate) <= ctx.gamma:
        return candidate
    return _random_subset(sorted(candidate), ctx.gamma, rng)


def _top_by_score(scored: list[tuple[float, int]], gamma: int) -> set[int]:
    # Rank descending by score, ties to the lower object id.
    scored.sort(key=lambda t: (-t[0], t[1]))
    return {k for _, k in scored[:gamma]}


def select_semantic(
    ctx: SelectionContext,
    model: EstimationModel,
    rng: np.random.Generator,
) -> set[int]:
    """Rank local variables by noisy estimated semantic value (Semantic scheme).

    Estimated-redundant variables score zero outright; every other (variable,
    receiver) pair gets one fresh noisy estimate, and a variable's score is its
    best estimate over the intended receivers.  Variables at or below s_min are
    filtered out before the budget cut.
    """
    eps = estimation_error(ctx.known_set_size, model)
    delta = model.value_range_width * eps
    est_known = ctx.estimated_receiver_known
    fresh = [k for k in sorted(ctx.local_set) if k not in est_known]
    if not fresh:
        return set()
    values = [ctx.receiver_values[r] for r in ctx.receivers]
    # One uniform draw per (variable, receiver) pair, consumed in (k, r) order;
    # matches repeated sample_estimated_value calls on the same stream.
    u = rng.random(len(fresh) * len(values)).tolist()
    scored = []
    i = 0
    for k in fresh:
        best = -math.inf
        for w in values:
            est = w[k] + (u[i] - 0.5) * delta
            i += 1
            if est > best:
                best = est
        if best > ctx.s_min:
            scored.append((best, k))
    return _top_by_score(scored, ctx.gamma)


def select_ideal_semantic(ctx: SelectionContext) -> set[int]:
    """Rank by true semantic value with perfect receiver knowledge (upper bound).

    A variable already known to a receiver is worthless to that receiver; the
    score is the best true value over the intended receivers.  Deterministic:
    no estimation noise, ties broken by object id.
    """
    if ctx.true_receiver_known is None:
        raise ValueError("ideal selection needs true receiver knowledge")
    scored = []
    for k in sorted(ctx.local_set):
        best = 0.0
        for r in ctx.receivers:
            if k not in ctx.true_receiver_known[r]:
                w = ctx.receiver_values[r][k]
                if w > best:
                    best = w
        if best > ctx.s_min:
            scored.append((best, k))
    return _top_by_score(scored, ctx.gamma)


def exhaustive_best_selection(
    scores: Mapping[int, float],
    gamma: int,
    s_min: float,
) -> set[int]:
    """Reference selector: enumerate every subset within budget and keep the one
    with the highest total score, breaking ties toward the lexicographically
    smallest id tuple.

    Exponential in the candidate count — only usable on tiny instances, which
    is the point: it is an independent cross-check for the greedy top-gamma
    rule used by the ideal scheme.
    """
    eligible = sorted(k for k, s in scores.items() if s > s_min)
    best_total = 0.0
    best: tuple[int, ...] = ()
    for r in range(0, min(gamma, len(eligible)) + 1):
        for combo in itertools.combinations(eligible, r):
            total = sum(scores[k] for k in combo)
            if total > best_total or (total == best_total and combo < best):
                best_total = total
                best = combo
    return set(best)


def random_selection_instance(
    rng: np.random.Generator,
    max_local: int = 10,
    max_gamma: int = 4,
) -> SelectionContext:
    """Random small context for cross-checking the ideal selector.

    Values are drawn on a coarse 1/64 grid so equal scores (and therefore
    tie-breaks) actually occur, and sums stay exact in binary floating point.
    """
    universe = 30
    n_receivers = int(rng.integers(1, 4))
    receivers = tuple(range(1, 1 + n_receivers))
    n_local = int(rng.integers(0, max_local + 1))
    local = set(rng.choice(universe, size=n_local, replace=False).tolist())
    values: dict[int, Sequence[float]] = {}
    known: dict[int, set[int]] = {}
    for r in receivers:
        values[r] = (rng.integers(0, 65, universe) / 64.0).tolist()
        n_known = int(rng.integers(0, universe // 2))
        known[r] = set(rng.choice(universe, size=n_known, replace=False).tolist())
    return SelectionContext(
        transmitter=0,
        local_set=local,
        known_set_size=n_local,
        estimated_receiver_known=set(),
        receivers=receivers,
        gamma=int(rng.integers(1, max_gamma + 1)),
        s_min=0.05,
        receiver_values=values,
        true_receiver_known=known,
    )


def oracle_mismatch_count(instances: int, seed: int) -> int:
    """Compare greedy ideal selection against exhaustive enumeration.

    Scores are recomputed here from scratch (max over receivers of the true
    value, zero if known) so the reference path shares no selection code with
    the scheme under test.  Returns the number of differing instances.
    """
    rng = np.random.default_rng(seed)
    mismatches = 0
    for _ in range(instances):
        ctx = random_selection_instance(rng)
        scores = {}
        for k in ctx.local_set:
            assert ctx.true_receiver_known is not None
            scores[k] = max(
                0.0 if k in ctx.true_receiver_known[r] else ctx.receiver_values[r][k]
                for r in ctx.receivers
            )
        if select_ideal_semantic(ctx) != exhaustive_best_selection(scores, ctx.gamma, ctx.s_min):
            mismatches += 1
    return mismatches
