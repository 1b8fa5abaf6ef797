"""Shared test utilities: hand-built MDPs, independent exploration oracles,
and small random model generators.

The exploration oracles here interpret the client/intruder semantics directly
on plain tuples, sharing no code with the template engine they check.
"""

from __future__ import annotations

import random
from fractions import Fraction

from dispersal_mc import Distribution, Mdp, ModelParams


def make_mdp(transitions, labels=None, initial=0, ap=None, num_states=None):
    """Build an MDP over integer states from a nested dict.

    ``transitions[s][action]`` maps target states to masses. ``labels`` maps
    state to an iterable of propositions. ``initial`` is a state index or a
    {state: mass} dict.
    """
    n = num_states
    if n is None:
        n = 0
        for s, row in transitions.items():
            n = max(n, s + 1)
            for dist in row.values():
                for t in dist:
                    n = max(n, t + 1)
        if labels:
            n = max(n, max(labels) + 1)
    states = [(i,) for i in range(n)]
    rows = []
    for s in range(n):
        row = transitions.get(s, {})
        rows.append({action: Distribution({t: Fraction(w) for t, w in dist.items()})
                     for action, dist in row.items()})
    labs = [frozenset(labels.get(s, ())) if labels else frozenset() for s in range(n)]
    init = Distribution({initial: Fraction(1)}) if isinstance(initial, int) \
        else Distribution({s: Fraction(w) for s, w in initial.items()})
    return Mdp(("s",), states, rows, init, labs, ap=ap)


def explore_client_states(n, m, c, p):
    """Reachable client states by direct rule-based search.

    State = (pc, picked server, sent count, per-server counts); mirrors the
    intended client behaviour without touching the template machinery.
    """
    positive = [w > 0 for w in p]
    init = (0, 0, 0, (0,) * m)
    seen = {init}
    stack = [init]
    while stack:
        pc, s, ctr, counts = stack.pop()
        if pc == 0 and ctr < n:
            succs = [(1, i, ctr, counts) for i in range(1, m + 1) if positive[i - 1]]
        elif pc == 0 and ctr == n:
            succs = [(2, 0, ctr, counts)]
        elif pc == 1:
            if counts[s - 1] < c:
                bumped = counts[:s - 1] + (counts[s - 1] + 1,) + counts[s:]
                succs = [(0, 0, ctr + 1, bumped)]
            else:
                succs = [(0, 0, ctr, counts)]
        else:
            succs = []
        for t in succs:
            if t not in seen:
                seen.add(t)
                stack.append(t)
    return seen


_WEIGHT_PATTERNS = (
    (Fraction(1),),
    (Fraction(1, 2), Fraction(1, 2)),
    (Fraction(1, 3), Fraction(2, 3)),
    (Fraction(1, 4), Fraction(3, 4)),
    (Fraction(1, 2), Fraction(1, 4), Fraction(1, 4)),
)


def random_mdp(rng: random.Random, max_states=5, actions=("a", "b"), props=("g",)):
    """A small random valid MDP with exact rational distributions."""
    n = rng.randint(1, max_states)
    transitions = {}
    for s in range(n):
        row = {}
        for action in actions:
            if rng.random() < 0.6:
                weights = rng.choice(_WEIGHT_PATTERNS)
                targets = rng.sample(range(n), k=min(len(weights), n))
                dist = {}
                for t, w in zip(targets, weights):
                    dist[t] = dist.get(t, Fraction(0)) + w
                leftover = 1 - sum(dist.values())
                if leftover:
                    t = rng.randrange(n)
                    dist[t] = dist.get(t, Fraction(0)) + leftover
                row[action] = dist
        transitions[s] = row
    labels = {s: tuple(p for p in props if rng.random() < 0.4) for s in range(n)}
    return make_mdp(transitions, labels=labels, num_states=n, ap=props)


def random_params(rng: random.Random, max_n=6, max_m=3) -> ModelParams:
    """A random valid parameter vector with small exact probabilities."""
    n = rng.randint(1, max_n)
    m = rng.randint(1, max_m)
    c = rng.choice([n, max(1, -(-n // m)), rng.randint(max(1, -(-n // m)), n)])
    k1 = rng.randint(1, n)
    k2 = rng.randint(k1, n)
    a = tuple(Fraction(rng.randint(0, 10), 10) for _ in range(m))
    x = []
    for j in range(k1, n + 1):
        if j < k2:
            lo = x[-1] if x else Fraction(1, 10)
            step_room = [q for q in (Fraction(i, 10) for i in range(1, 10)) if q >= lo]
            x.append(rng.choice(step_room))
        else:
            x.append(Fraction(1))
    skew = rng.random() < 0.3
    if skew and m > 1:
        p = [Fraction(2, m + 1)] + [Fraction(1, (m + 1) * (m - 1)) * 1 for _ in range(m - 1)]
        total = sum(p)
        p = tuple(q / total for q in p)
    else:
        p = tuple(Fraction(1, m) for _ in range(m))
    return ModelParams(n=n, m=m, c=c, k1=k1, k2=k2, a=a, x=tuple(x), p=p)


def all_set_partitions(items):
    """Every partition of a list, as tuples of tuples (exponential; keep small)."""
    items = list(items)
    if not items:
        yield ()
        return
    head, rest = items[0], items[1:]
    for sub in all_set_partitions(rest):
        for i in range(len(sub)):
            yield sub[:i] + ((head,) + sub[i],) + sub[i + 1:]
        yield ((head,),) + sub


def block_masses(m: Mdp, s: int, block_of):
    """Per-action block-mass vectors of one state under a candidate partition."""
    out = {}
    for action, dist in m.transitions[s].items():
        acc = {}
        for t, w in dist.items():
            b = block_of[t]
            acc[b] = acc.get(b, Fraction(0)) + w
        out[action] = acc
    return out


def is_bisimulation_partition(m: Mdp, blocks) -> bool:
    """Check the defining conditions of a probabilistic bisimulation."""
    block_of = {}
    for i, block in enumerate(blocks):
        for s in block:
            block_of[s] = i
    for block in blocks:
        rep = block[0]
        rep_sig = block_masses(m, rep, block_of)
        for s in block[1:]:
            if m.labels[s] != m.labels[rep]:
                return False
            if block_masses(m, s, block_of) != rep_sig:
                return False
    return True


def coarsest_by_bruteforce(m: Mdp):
    """The coarsest bisimulation by exhaustive search over all partitions.

    Only usable for a handful of states. Also asserts the expected structure:
    every bisimulation partition refines the returned one.
    """
    candidates = [blocks for blocks in all_set_partitions(range(len(m.states)))
                  if is_bisimulation_partition(m, blocks)]
    best = min(candidates, key=len)
    best_of = {}
    for i, block in enumerate(best):
        for s in block:
            best_of[s] = i
    for blocks in candidates:
        for block in blocks:
            assert len({best_of[s] for s in block}) == 1, \
                "coarsest bisimulation is not unique"
    return best
