"""Privileged task knowledge: goal verification and shortest-path distance to the goal.

The distance oracle runs breadth-first search over the product of the screen graph
and the reachable variable bindings, using :func:`transition_actions` as the move set.
"""

from __future__ import annotations

import math
from collections import deque

from .apps import AppGraph, AppRegistry, default_registry, swipe_for
from .types import Action, Back, ScreenState, Tap, TaskSpec, TypeText, instruction_tokens

UNREACHABLE = math.inf

# Exploration cap per task; the shipped apps stay far below it.
MAX_STATES = 200_000


def verify_outcome(state: ScreenState, task: TaskSpec) -> int:
    """1 iff the task's goal predicate holds on ``state``."""
    return int(state.app_id == task.app_id and task.goal.holds(state))


def transition_actions(state: ScreenState, task: TaskSpec, app: AppGraph | None = None) -> list[Action]:
    """Canonical move set: tap each enabled widget's centre, type each instruction token
    into each text field, back, and any swipe the screen declares."""
    actions: list[Action] = []
    for w in state.widgets:
        if w.enabled:
            actions.append(Tap(*w.center))
    tokens = instruction_tokens(task.instruction)
    for w in state.widgets:
        if w.enabled and w.kind == "text_field":
            actions.extend(TypeText(w.widget_id, tok) for tok in tokens)
    actions.append(Back())
    if app is not None:
        actions.extend(swipe_for(d, state.screen_dims) for d in app.swipe_directions(state.screen_id))
    return actions


def _successors(app: AppGraph, state: ScreenState, task: TaskSpec):
    for action in transition_actions(state, task, app):
        nxt, invalid = app.transition(state, action)
        if invalid is None:
            yield action, nxt


class TaskOracle:
    """Distance-to-goal table over every state reachable from the task's reset state.

    States are keyed by screen plus the variables that can matter: those the goal
    tests and those any transition guard reads. Widget geometry never depends on
    variables, so two states with equal keys have identical futures and the
    projection is exact while keeping unrelated variables from multiplying the
    search space.
    """

    def __init__(self, app: AppGraph, task: TaskSpec):
        self.app = app
        self.task = task
        guarded = {k for trs in app.transitions.values() for tr in trs for k, _ in tr.when}
        self.relevant = tuple(sorted(guarded | {k for k, _ in task.goal.vars}))
        self.dist: dict[tuple, float] = {}
        self._explore(app.initial_state(task.init_seed))

    def key(self, state: ScreenState) -> tuple:
        b = dict(state.var_bindings)
        return (state.screen_id,) + tuple(b.get(k) for k in self.relevant)

    def _explore(self, root: ScreenState) -> None:
        root_key = self.key(root)
        seen = {root_key: root}
        order = [root_key]
        preds: dict[tuple, list[tuple]] = {}
        queue = deque([root])
        while queue:
            s = queue.popleft()
            sk = self.key(s)
            for _, nxt in _successors(self.app, s, self.task):
                nk = self.key(nxt)
                preds.setdefault(nk, []).append(sk)
                if nk not in seen:
                    if len(seen) >= MAX_STATES:
                        raise RuntimeError(f"state space of {self.task.task_id} exceeds {MAX_STATES}")
                    seen[nk] = nxt
                    order.append(nk)
                    queue.append(nxt)
        dist = {k: 0 for k in order if verify_outcome(seen[k], self.task)}
        queue = deque(dist)
        while queue:
            k = queue.popleft()
            for p in preds.get(k, ()):
                if p not in dist:
                    dist[p] = dist[k] + 1
                    queue.append(p)
        for k in order:
            self.dist.setdefault(k, UNREACHABLE)
        self.dist.update(dist)

    def distance(self, state: ScreenState) -> float:
        k = self.key(state)
        d = self.dist.get(k)
        if d is None:
            self._explore(state)
            d = self.dist[k]
        return d

    def next_action(self, state: ScreenState) -> Action | None:
        """First move of a shortest path (None when already at the goal or unreachable)."""
        d = self.distance(state)
        if d == 0 or d == UNREACHABLE:
            return None
        for action, nxt in _successors(self.app, state, self.task):
            if self.distance(nxt) == d - 1:
                return action
        raise AssertionError("distance table inconsistent")


def task_oracle(task: TaskSpec, registry: AppRegistry | None = None) -> TaskOracle:
    registry = registry or default_registry()
    cache = registry._oracles
    oracle = cache.get(task)
    if oracle is None:
        oracle = cache[task] = TaskOracle(registry.get(task.app_id), task)
    return oracle


def oracle_distance(state: ScreenState, task: TaskSpec, registry: AppRegistry | None = None) -> float:
    """Minimal number of actions from ``state`` to any goal state, or UNREACHABLE."""
    if state.app_id != task.app_id:
        return UNREACHABLE
    return task_oracle(task, registry).distance(state)


def shortest_path(state: ScreenState, task: TaskSpec, registry: AppRegistry | None = None) -> list[Action] | None:
    oracle = task_oracle(task, registry)
    if oracle.distance(state) == UNREACHABLE:
        return None
    path: list[Action] = []
    while (action := oracle.next_action(state)) is not None:
        path.append(action)
        state, _ = oracle.app.transition(state, action)
    return path
