"""Probabilistic bisimulation: coarsest partitions, quotients, equivalence
decisions, and machine checks of the two model-shrinking abstractions
(channel grouping and capacity-counter elimination) on concrete instances.

All comparisons use exact rational masses; floating arithmetic never enters a
bisimulation decision.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .mdp import Distribution, Mdp
from .models import (AbstractionPreconditionError, Channel, ModelParams,
                     ParameterError, build_composed, expand_channels,
                     lt_linear_profile)
from .solver import solve_reach


class NotBisimulationError(ValueError):
    """A supplied partition fails the bisimulation conditions."""

    def __init__(self, message, counterexample=None):
        super().__init__(message)
        self.counterexample = counterexample


@dataclass(frozen=True)
class Partition:
    """An equivalence-class decomposition of a state set."""

    block_of: tuple[int, ...]
    blocks: tuple[tuple[int, ...], ...]

    @property
    def num_blocks(self) -> int:
        return len(self.blocks)

    def same_block(self, s: int, t: int) -> bool:
        return self.block_of[s] == self.block_of[t]


def _signature(row, block_of):
    """Canonical per-state refinement key: action -> block-mass vector."""
    sig = []
    for action in sorted(row):
        acc: dict[int, Fraction] = {}
        for t, w in row[action].items():
            b = block_of[t]
            acc[b] = acc.get(b, Fraction(0)) + w
        sig.append((action, tuple(sorted(acc.items()))))
    return tuple(sig)


def _refine(labels: Sequence[frozenset], rows) -> Partition:
    """Signature-based partition refinement from the label-split partition.

    Deterministic: block ids are assigned by sorting the (old block,
    signature) keys, so the result does not depend on state ordering.
    """
    n = len(labels)
    label_keys = sorted({tuple(sorted(lab)) for lab in labels})
    key_id = {k: i for i, k in enumerate(label_keys)}
    block_of = [key_id[tuple(sorted(lab))] for lab in labels]
    num = len(label_keys)
    while True:
        keys = [(block_of[s], _signature(rows[s], block_of)) for s in range(n)]
        distinct = sorted(set(keys))
        if len(distinct) == num:
            break
        new_id = {k: i for i, k in enumerate(distinct)}
        block_of = [new_id[k] for k in keys]
        num = len(distinct)
    blocks: list[list[int]] = [[] for _ in range(num)]
    for s, b in enumerate(block_of):
        blocks[b].append(s)
    return Partition(tuple(block_of), tuple(tuple(b) for b in blocks))


def coarsest_bisimulation(m: Mdp) -> Partition:
    """The coarsest probabilistic bisimulation of a single MDP."""
    return _refine(m.labels, m.transitions)


def quotient(m: Mdp, partition: Partition) -> Mdp:
    """Collapse an MDP along a bisimulation partition.

    Refuses partitions that are not bisimulations, naming a pair of states
    that disagree. Quotient states are valuations of a single ``block``
    variable.
    """
    for block in partition.blocks:
        rep = block[0]
        rep_sig = _signature(m.transitions[rep], partition.block_of)
        for s in block[1:]:
            if m.labels[s] != m.labels[rep]:
                raise NotBisimulationError(
                    f"states {rep} and {s} share a block but not labels",
                    counterexample=(rep, s))
            if _signature(m.transitions[s], partition.block_of) != rep_sig:
                raise NotBisimulationError(
                    f"states {rep} and {s} share a block but have different "
                    f"block-level transition masses",
                    counterexample=(rep, s))
    states = [(b,) for b in range(partition.num_blocks)]
    transitions = []
    labels = []
    for block in partition.blocks:
        rep = block[0]
        row = {
            action: dist.remap(lambda t: partition.block_of[t])
            for action, dist in m.transitions[rep].items()
        }
        transitions.append(row)
        labels.append(m.labels[rep])
    initial = m.initial.remap(lambda s: partition.block_of[s])
    return Mdp(("block",), states, transitions, initial, labels, ap=m.ap)


@dataclass
class BisimResult:
    """Outcome of a cross-model bisimilarity decision."""

    equivalent: bool
    reason: str
    blocks: int
    partition: Partition | None = None
    offset: int = 0

    def __bool__(self) -> bool:
        return self.equivalent


def _union_view(m1: Mdp, m2: Mdp):
    offset = len(m1.states)
    labels = list(m1.labels) + list(m2.labels)
    rows = list(m1.transitions)
    for row in m2.transitions:
        rows.append({action: dist.remap(lambda t: t + offset)
                     for action, dist in row.items()})
    return labels, rows, offset


def bisimilar(m1: Mdp, m2: Mdp) -> BisimResult:
    """Decide whether two MDPs are probabilistically bisimilar.

    Computes the coarsest bisimulation of the disjoint union and then checks
    that both initial distributions give every block the same mass.
    """
    if m1.ap != m2.ap:
        return BisimResult(False, f"proposition alphabets differ: "
                                  f"{sorted(m1.ap)} vs {sorted(m2.ap)}", 0)
    labels, rows, offset = _union_view(m1, m2)
    part = _refine(labels, rows)
    mass1: dict[int, Fraction] = {}
    mass2: dict[int, Fraction] = {}
    for s, w in m1.initial.items():
        b = part.block_of[s]
        mass1[b] = mass1.get(b, Fraction(0)) + w
    for s, w in m2.initial.items():
        b = part.block_of[s + offset]
        mass2[b] = mass2.get(b, Fraction(0)) + w
    for b in set(mass1) | set(mass2):
        w1 = mass1.get(b, Fraction(0))
        w2 = mass2.get(b, Fraction(0))
        if w1 != w2:
            return BisimResult(
                False,
                f"initial mass differs on block {b}: {w1} vs {w2}",
                part.num_blocks, part, offset)
    return BisimResult(True, "", part.num_blocks, part, offset)


def witness_contained(part: Partition, keys: Sequence) -> tuple[bool, tuple[int, int] | None]:
    """Is the equivalence induced by equal witness keys inside the partition?

    Returns the first offending state pair when it is not.
    """
    seen: dict = {}
    for s, key in enumerate(keys):
        prev = seen.get(key)
        if prev is None:
            seen[key] = s
        elif part.block_of[prev] != part.block_of[s]:
            return False, (prev, s)
    return True, None


@dataclass
class AbstractionReport:
    """Machine-checked verdict for one abstraction instance."""

    claim: str
    equivalent: bool
    bisimilar: bool
    witness_contained: bool
    reason: str
    blocks: int
    states: tuple[int, int]
    transitions: tuple[int, int]
    probes: dict
    counterexample: tuple[int, int] | None = None

    def to_dict(self) -> dict:
        return {
            "claim": self.claim,
            "equivalent": self.equivalent,
            "bisimilar": self.bisimilar,
            "witness_contained": self.witness_contained,
            "reason": self.reason,
            "blocks": self.blocks,
            "states": list(self.states),
            "transitions": list(self.transitions),
            "probes": self.probes,
            "counterexample": list(self.counterexample) if self.counterexample else None,
        }


def _probe(model: Mdp) -> dict:
    res = solve_reach(model, "hacked")
    return {"pmin": res.pmin, "pmax": res.pmax}


def _channel_params(f: Distribution, channels: Sequence[Channel], n: int,
                    k1: int, k2: int, x, c: int) -> ModelParams:
    p, a = expand_channels(f, channels)
    return ModelParams(n=n, m=len(p), c=c, k1=k1, k2=k2, a=a, x=x, p=p)


def verify_channel_cutoff(f: Distribution, small: Sequence[Channel],
                          big: Sequence[Channel], *, n: int, k1: int, k2: int,
                          x=None, c: int | None = None) -> AbstractionReport:
    """Check that grouping servers into channels is behaviour-preserving.

    Builds the interception-attack composition once with one server per
    channel and once with the expanded server lists, decides bisimilarity,
    and additionally checks that the expected witness relation (equal shared
    variables, channel-mapped recipient, per-channel occupancy sums) sits
    inside the computed bisimulation. Requires c >= n so capacity never
    interferes with grouping.
    """
    if len(small) != len(big):
        raise ParameterError("channel lists must have equal length")
    for ch in small:
        if ch.size != 1:
            raise ParameterError("the reference system must have one server per channel")
    c = n if c is None else c
    if c < n:
        raise AbstractionPreconditionError(
            f"channel grouping needs c >= n, got c={c} n={n}")
    x = tuple(x) if x is not None else lt_linear_profile(k1, k2, n)

    params_small = _channel_params(f, small, n, k1, k2, x, c)
    params_big = _channel_params(f, big, n, k1, k2, x, c)
    m_small = build_composed(params_small, "slice")
    m_big = build_composed(params_big, "slice")
    res = bisimilar(m_small, m_big)

    # channel index of each server in the expanded system; channel 0 = none
    channel_of = [0]
    for idx, ch in enumerate(big, start=1):
        channel_of.extend([idx] * ch.size)

    def key_small(vals: dict) -> tuple:
        sums = tuple(vals[f"ctr_c_{i}"] for i in range(1, len(small) + 1))
        return (vals["pc_c"], vals["ctr_c"], vals["pc_a"], vals["ctr_a"],
                vals["s_c"], sums)

    def key_big(vals: dict) -> tuple:
        sums = [0] * len(big)
        for j in range(1, params_big.m + 1):
            sums[channel_of[j] - 1] += vals[f"ctr_c_{j}"]
        return (vals["pc_c"], vals["ctr_c"], vals["pc_a"], vals["ctr_a"],
                channel_of[vals["s_c"]], tuple(sums))

    keys = [key_small(m_small.valuation(s)) for s in range(len(m_small.states))]
    keys += [key_big(m_big.valuation(s)) for s in range(len(m_big.states))]
    contained, pair = (witness_contained(res.partition, keys)
                       if res.partition is not None else (False, None))

    return AbstractionReport(
        claim="channel-cutoff",
        equivalent=res.equivalent and contained,
        bisimilar=res.equivalent,
        witness_contained=contained,
        reason=res.reason,
        blocks=res.blocks,
        states=(m_small.state_count, m_big.state_count),
        transitions=(m_small.transition_count, m_big.transition_count),
        probes={"small": _probe(m_small), "big": _probe(m_big)},
        counterexample=pair,
    )


def verify_capacity_abstraction(params: ModelParams) -> AbstractionReport:
    """Check that dropping per-provider occupancy counters is behaviour-preserving.

    Builds the provider-attack composition with the full client and with the
    counter-free client, decides bisimilarity, and checks that agreement on
    all remaining variables sits inside the computed bisimulation. Refuses
    c < n, where the abstraction is unsound.
    """
    if params.c < params.n:
        raise AbstractionPreconditionError(
            f"capacity abstraction needs c >= n, got c={params.c} n={params.n}")
    m_full = build_composed(params, "provider", reduced=False)
    m_red = build_composed(params, "provider", reduced=True)
    res = bisimilar(m_full, m_red)

    shared = tuple(m_red.variables)

    def key(model: Mdp, s: int) -> tuple:
        vals = model.valuation(s)
        return tuple(vals[v] for v in shared)

    keys = [key(m_full, s) for s in range(len(m_full.states))]
    keys += [key(m_red, s) for s in range(len(m_red.states))]
    contained, pair = (witness_contained(res.partition, keys)
                       if res.partition is not None else (False, None))

    return AbstractionReport(
        claim="capacity-abstraction",
        equivalent=res.equivalent and contained,
        bisimilar=res.equivalent,
        witness_contained=contained,
        reason=res.reason,
        blocks=res.blocks,
        states=(m_full.state_count, m_red.state_count),
        transitions=(m_full.transition_count, m_red.transition_count),
        probes={"full": _probe(m_full), "reduced": _probe(m_red)},
        counterexample=pair,
    )
