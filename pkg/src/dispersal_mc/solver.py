"""Min/max reachability probabilities for explicit MDPs.

Two engines share the same qualitative graph precomputation: a floating-point
value iteration (Gauss-Seidel sweeps) and an exact rational policy-iteration
solver backed by sparse Gaussian elimination. The qualitative sets pin states
with probability exactly 0 or 1 before any numerics run, which avoids the
fixpoint pitfalls around end components.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

from .mdp import Mdp


class QueryError(ValueError):
    """Malformed reachability query (e.g. unknown proposition)."""


class SolverError(RuntimeError):
    """Numeric solve failed; carries the last residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ExactCapError(RuntimeError):
    """The model exceeds the configured size cap of the exact solver."""


DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 10 ** 6
EXACT_STATE_CAP = 20_000


@dataclass
class ReachResult:
    """Solved reachability query: both directions plus solver bookkeeping."""

    pmin: float
    pmax: float
    iterations: int
    residual: float
    mode: str


def target_states(m: Mdp, target: str) -> frozenset[int]:
    if target not in m.ap:
        raise QueryError(f"proposition {target!r} is not in the model's alphabet")
    return frozenset(m.states_with(target))


def _predecessors(m: Mdp) -> list[list[tuple[int, str]]]:
    pred: list[list[tuple[int, str]]] = [[] for _ in m.states]
    for s, row in enumerate(m.transitions):
        for action, dist in row.items():
            for t in dist.support:
                pred[t].append((s, action))
    return pred


def _backward_reach(m: Mdp, sources: Iterable[int], pred,
                    blocked: frozenset[int] = frozenset()) -> set[int]:
    """States with a path to ``sources`` whose interior avoids ``blocked``."""
    seen = set(sources)
    stack = list(seen)
    while stack:
        t = stack.pop()
        for s, _ in pred[t]:
            if s not in seen and s not in blocked:
                seen.add(s)
                stack.append(s)
    return seen


def _prob0_max(m: Mdp, targets: frozenset[int], pred) -> frozenset[int]:
    """States from which no scheduler reaches the target with positive probability."""
    can_reach = _backward_reach(m, targets, pred)
    return frozenset(range(len(m.states))) - can_reach


def _prob1_max(m: Mdp, targets: frozenset[int], pred) -> frozenset[int]:
    """States where some scheduler reaches the target almost surely.

    Classic nested fixpoint: the outer loop shrinks a candidate set X, the
    inner loop grows, inside X, the set of states that can step toward the
    target without ever risking a fall out of X. The inner fixpoint runs as a
    predecessor worklist.
    """
    supports = [{action: dist.support for action, dist in row.items()}
                for row in m.transitions]
    x = set(range(len(m.states)))
    while True:
        in_y = [False] * len(m.states)
        for t in targets:
            in_y[t] = True
        worklist = list(targets)
        count = len(targets)
        while worklist:
            t = worklist.pop()
            for s, action in pred[t]:
                if in_y[s] or s not in x:
                    continue
                if all(u in x for u in supports[s][action]):
                    in_y[s] = True
                    count += 1
                    worklist.append(s)
        if count == len(x):
            return frozenset(s for s in x)
        x = {s for s in x if in_y[s]}


def _prob0_min(m: Mdp, targets: frozenset[int], pred) -> frozenset[int]:
    """States where some scheduler avoids the target forever.

    Greatest fixpoint: a state stays while it is not a target and either has
    no choices at all or has a choice whose entire support stays. Removal
    cascades run over a predecessor worklist with per-choice counters of
    successors already outside the set.
    """
    n = len(m.states)
    removed = [False] * n
    for t in targets:
        removed[t] = True
    out_count: dict[tuple[int, str], int] = {}
    safe_choices = [0] * n
    for s, row in enumerate(m.transitions):
        for action, dist in row.items():
            cnt = sum(1 for u in dist.support if removed[u])
            out_count[(s, action)] = cnt
            if cnt == 0:
                safe_choices[s] += 1
    worklist = []
    for s, row in enumerate(m.transitions):
        if not removed[s] and row and safe_choices[s] == 0:
            removed[s] = True
            worklist.append(s)
    while worklist:
        t = worklist.pop()
        for s, action in pred[t]:
            if removed[s]:
                continue
            key = (s, action)
            out_count[key] += 1
            if out_count[key] == 1:
                safe_choices[s] -= 1
                if safe_choices[s] == 0 and m.transitions[s]:
                    removed[s] = True
                    worklist.append(s)
    return frozenset(s for s in range(n) if not removed[s])


def _prob1_min(m: Mdp, targets: frozenset[int], pred,
               prob0min: frozenset[int]) -> frozenset[int]:
    """States where every scheduler reaches the target almost surely.

    The complement is exactly the set with a target-free path into the region
    where some scheduler avoids the target forever.
    """
    bad = _backward_reach(m, prob0min, pred, blocked=targets)
    return frozenset(range(len(m.states))) - frozenset(bad)


def qualitative_sets(m: Mdp, target: str, direction: str) -> tuple[frozenset[int], frozenset[int]]:
    """Graph-only (Prob0, Prob1) sets for one optimization direction."""
    targets = target_states(m, target)
    pred = _predecessors(m)
    if direction == "max":
        return _prob0_max(m, targets, pred), _prob1_max(m, targets, pred)
    if direction == "min":
        p0 = _prob0_min(m, targets, pred)
        return p0, _prob1_min(m, targets, pred, p0)
    raise QueryError(f"direction must be 'min' or 'max', got {direction!r}")


def _float_rows(m: Mdp, unknown: set[int]):
    rows = {}
    for s in unknown:
        rows[s] = [dist.floats() for dist in m.transitions[s].values()]
    return rows


def _value_iteration(m: Mdp, target: str, direction: str,
                     tol: float, max_iter: int) -> tuple[list[float], int, float]:
    prob0, prob1 = qualitative_sets(m, target, direction)
    n = len(m.states)
    v = [0.0] * n
    for s in prob1:
        v[s] = 1.0
    unknown = set(range(n)) - prob0 - prob1
    if not unknown:
        return v, 0, 0.0
    rows = _float_rows(m, unknown)
    # Later-discovered states sit closer to absorption in the built models,
    # so sweeping in reverse discovery order propagates values in few passes.
    order = sorted(unknown, reverse=True)
    best_of = max if direction == "max" else min
    residual = 0.0
    for sweep in range(1, max_iter + 1):
        residual = 0.0
        for s in order:
            new = best_of(
                sum(p * v[t] for t, p in entries)
                for entries in rows[s]
            )
            if __debug__ and new < v[s] - 1e-12:
                raise AssertionError("value iteration iterate decreased from below")
            delta = new - v[s]
            if delta > residual:
                residual = delta
            v[s] = new
        if residual < tol:
            return v, sweep, residual
    raise SolverError(
        f"value iteration did not converge within {max_iter} sweeps", residual=residual)


def _weighted_initial(m: Mdp, values) -> float:
    return float(sum(float(w) * values[s] for s, w in m.initial.items()))


def pmin_reach(m: Mdp, target: str, *, tol: float = DEFAULT_TOL,
               max_iter: int = DEFAULT_MAX_ITER) -> float:
    """Minimum probability, over all schedulers, of eventually hitting the target."""
    v, _, _ = _value_iteration(m, target, "min", tol, max_iter)
    return _weighted_initial(m, v)


def pmax_reach(m: Mdp, target: str, *, tol: float = DEFAULT_TOL,
               max_iter: int = DEFAULT_MAX_ITER) -> float:
    """Maximum probability, over all schedulers, of eventually hitting the target."""
    v, _, _ = _value_iteration(m, target, "max", tol, max_iter)
    return _weighted_initial(m, v)


def solve_reach(m: Mdp, target: str, *, tol: float = DEFAULT_TOL,
                max_iter: int = DEFAULT_MAX_ITER) -> ReachResult:
    """Both directions at once, with iteration/residual bookkeeping."""
    vmin, it_min, r_min = _value_iteration(m, target, "min", tol, max_iter)
    vmax, it_max, r_max = _value_iteration(m, target, "max", tol, max_iter)
    return ReachResult(
        pmin=_weighted_initial(m, vmin),
        pmax=_weighted_initial(m, vmax),
        iterations=it_min + it_max,
        residual=max(r_min, r_max),
        mode="vi",
    )


def check_pctl_interval(m: Mdp, a, b, target: str, *, exact: bool = False) -> bool:
    """Does the probability of eventually hitting the target lie in [a, b]
    under every scheduler?

    Holds iff a <= pmin and pmax <= b.
    """
    a, b = Fraction(a), Fraction(b)
    if not 0 <= a <= b <= 1:
        raise QueryError(f"need 0 <= a <= b <= 1, got [{a}, {b}]")
    if exact:
        return (a <= exact_reach(m, target, "min")
                and exact_reach(m, target, "max") <= b)
    res = solve_reach(m, target)
    return float(a) <= res.pmin and res.pmax <= float(b)


# --- exact rational engine ---------------------------------------------------


def _solve_linear(order: list[int], rows: dict[int, dict[int, Fraction]],
                  rhs: dict[int, Fraction]) -> dict[int, Fraction]:
    """Solve x = A x + b by sparse elimination in the given variable order.

    Each ``rows[s]`` maps successor variables to their coefficients. The
    elimination order should roughly follow reverse topological order to keep
    fill-in small; correctness does not depend on it.
    """
    pred: dict[int, set[int]] = {s: set() for s in order}
    for s, row in rows.items():
        for t in row:
            if t in pred:
                pred[t].add(s)
    solved: dict[int, tuple[dict[int, Fraction], Fraction]] = {}
    remaining = set(order)
    for s in order:
        row = rows.pop(s)
        b = rhs.pop(s)
        diag = row.pop(s, Fraction(0))
        if diag == 1:
            raise SolverError("singular reachability system (probability-1 self loop)")
        if diag:
            scale = 1 / (1 - diag)
            row = {t: c * scale for t, c in row.items()}
            b *= scale
        solved[s] = (row, b)
        remaining.discard(s)
        for p in list(pred[s]):
            if p not in remaining:
                continue
            prow = rows[p]
            coef = prow.pop(s, None)
            if coef is None:
                continue
            for t, c in row.items():
                cur = prow.get(t)
                nxt = coef * c if cur is None else cur + coef * c
                if nxt == 0:
                    prow.pop(t, None)
                else:
                    prow[t] = nxt
                    if t in pred:
                        pred[t].add(p)
            rhs[p] = rhs[p] + coef * b
    values: dict[int, Fraction] = {}
    for s in reversed(order):
        row, b = solved[s]
        values[s] = b + sum((c * values[t] for t, c in row.items()), Fraction(0))
    return values


def _evaluate_policy(m: Mdp, policy: dict[int, str], unknown: list[int],
                     ones: frozenset[int], pred_cache) -> dict[int, Fraction]:
    """Exact hitting probabilities of the Markov chain induced by a policy."""
    unknown_set = set(unknown)
    # Which unknown states still reach a probability-one state under this policy?
    chain_pred: dict[int, list[int]] = {}
    touches_one: list[int] = []
    for s in unknown:
        dist = m.transitions[s][policy[s]]
        hit = False
        for t in dist.support:
            if t in unknown_set:
                chain_pred.setdefault(t, []).append(s)
            elif t in ones:
                hit = True
        if hit:
            touches_one.append(s)
    alive: set[int] = set()
    stack = list(touches_one)
    while stack:
        s = stack.pop()
        if s in alive:
            continue
        alive.add(s)
        for p in chain_pred.get(s, ()):
            if p not in alive:
                stack.append(p)
    values = {s: Fraction(0) for s in unknown}
    if not alive:
        return values
    rows: dict[int, dict[int, Fraction]] = {}
    rhs: dict[int, Fraction] = {}
    for s in alive:
        dist = m.transitions[s][policy[s]]
        row: dict[int, Fraction] = {}
        b = Fraction(0)
        for t, w in dist.items():
            if t in alive:
                row[t] = row.get(t, Fraction(0)) + w
            elif t in ones:
                b += w
        rows[s] = row
        rhs[s] = b
    order = sorted(alive, reverse=True)
    values.update(_solve_linear(order, rows, rhs))
    return values


def exact_reach(m: Mdp, target: str, direction: str, *,
                cap: int = EXACT_STATE_CAP) -> Fraction:
    """Exact rational min/max reachability via policy iteration.

    Each round solves the linear hitting system of the current policy's chain
    with exact Gaussian elimination, then switches a state's action only on a
    strict improvement; termination at a fixpoint is guaranteed because the
    qualitative sets have already removed every end component that could trap
    value.
    """
    if direction not in ("min", "max"):
        raise QueryError(f"direction must be 'min' or 'max', got {direction!r}")
    if len(m.states) > cap:
        raise ExactCapError(
            f"model has {len(m.states)} states, above the exact-solver cap {cap}")
    prob0, prob1 = qualitative_sets(m, target, direction)
    unknown = [s for s in range(len(m.states)) if s not in prob0 and s not in prob1]
    pinned: dict[int, Fraction] = {}
    for s in prob0:
        pinned[s] = Fraction(0)
    for s in prob1:
        pinned[s] = Fraction(1)
    if not unknown:
        return sum((w * pinned[s] for s, w in m.initial.items()), Fraction(0))

    policy = {s: next(iter(m.transitions[s])) for s in unknown}
    better = (lambda q, cur: q > cur) if direction == "max" else (lambda q, cur: q < cur)
    for _ in range(10_000):
        values = _evaluate_policy(m, policy, unknown, prob1, None)
        full = dict(pinned)
        full.update(values)
        changed = False
        for s in unknown:
            current = None
            chosen = policy[s]
            for action, dist in m.transitions[s].items():
                q = sum((w * full[t] for t, w in dist.items()), Fraction(0))
                if action == chosen:
                    current = q
            for action, dist in m.transitions[s].items():
                if action == chosen:
                    continue
                q = sum((w * full[t] for t, w in dist.items()), Fraction(0))
                if better(q, current):
                    policy[s] = action
                    current = q
                    changed = True
        if not changed:
            return sum((w * full[s] for s, w in m.initial.items()), Fraction(0))
    raise SolverError("policy iteration failed to reach a fixpoint")
