"""Supervisor synthesis for plants with forcible events.

A specification is a sub-automaton of the plant induced by a set of legal
states.  A legal state is *bad* when some uncontrollable event exits the legal
set and no forcible event offers an escape that stays legal; iterating bad
state removal (with trimming) yields the largest sub-automaton whose language
can be enforced by a supervisor that disables controllable events and, where
needed, fires forcible events to preempt uncontrollable ones.

A conventional synthesis (controllability only, forcible structure ignored)
is also provided, together with the event-attribute rewrite that lets the
two-state grid component models be pushed through it: trip events become
controllable because a forcible shed/redispatch can preempt them, while
restore and line-loading-change events stay uncontrollable.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .automata import (
    Automaton,
    EventTable,
    EventString,
    active_events,
    restrict,
    run,
    step,
)

__all__ = [
    "SpecificationAutomaton",
    "SupervisorRealization",
    "ControlPattern",
    "LookaheadNode",
    "LookaheadTree",
    "build_specification_from_states",
    "find_bad_states",
    "check_f_controllable",
    "supremal_f_controllable",
    "supremal_controllable",
    "control_policy",
    "is_admissible",
    "modified_attributes",
    "build_lookahead_tree",
    "tree_pattern",
]


@dataclass(frozen=True)
class SpecificationAutomaton:
    """Plant plus the sub-automaton induced by its legal states.

    ``spec`` is the plant restricted to ``legal_states`` and trimmed to the
    reachable part; its initial state must equal the plant's.
    """

    plant: Automaton
    spec: Automaton
    legal_states: frozenset[str]

    def __post_init__(self) -> None:
        if self.plant.is_empty():
            raise ValueError("plant must be non-empty")
        if not self.spec.is_empty():
            if self.spec.label(self.spec.initial) != self.plant.label(self.plant.initial):
                raise ValueError("spec initial state differs from plant initial state")
        for lab in self.spec.state_labels:
            if not self.plant.has_state(lab):
                raise ValueError(f"spec state {lab!r} is not a plant state")


def build_specification_from_states(
    plant: Automaton, legal: Iterable[str], name: str | None = None
) -> SpecificationAutomaton:
    """Restrict ``plant`` to the legal state labels and trim."""
    legal_set = frozenset(legal)
    spec = restrict(plant, legal_set, name=name or plant.name + ".spec")
    return SpecificationAutomaton(plant, spec, legal_set)


def find_bad_states(sa: SpecificationAutomaton) -> set[str]:
    """States with an uncontrollable exit from the legal set and no forcible escape.

    The transition function is evaluated in the current spec restriction: a
    forcible escape must be defined in the plant *and* land on a current spec
    state.  Exits into plant states that were never legal and exits into
    states already removed from the spec are treated alike.
    """
    plant, spec = sa.plant, sa.spec
    if spec.is_empty():
        return set()
    table = plant.table
    in_spec = set(spec.state_labels)
    bad: set[str] = set()
    for lab in spec.state_labels:
        pq = plant.state_id(lab)
        exit_found = False
        for e in plant.active_ids(pq):
            if table.controllable(e):
                continue
            if plant.label(plant.step_id(pq, e)) not in in_spec:
                exit_found = True
                break
        if not exit_found:
            continue
        escape = False
        for e in plant.active_ids(pq):
            if table.forcible(e) and plant.label(plant.step_id(pq, e)) in in_spec:
                escape = True
                break
        if not escape:
            bad.add(lab)
    return bad


def check_f_controllable(
    sa: SpecificationAutomaton,
) -> tuple[bool, tuple[EventString, str] | None]:
    """Decide controllability-with-forcing of the spec language.

    For every reachable spec state and every event defined in the plant but
    not in the spec, either the event is controllable or some forcible event
    defined at that state stays inside the spec.  Returns (True, None) or
    (False, (witness string to the state, offending event)).
    """
    plant, spec = sa.plant, sa.spec
    if spec.is_empty():
        return True, None
    table = plant.table
    in_spec = set(spec.state_labels)
    # shortest access string per spec state, BFS order for determinism
    access: dict[int, EventString] = {spec.initial: ()}
    order = [spec.initial]
    i = 0
    while i < len(order):
        q = order[i]
        i += 1
        for e in spec.active_ids(q):
            t = spec.step_id(q, e)
            if t not in access:
                access[t] = access[q] + (e,)
                order.append(t)
    for q in order:
        lab = spec.label(q)
        pq = plant.state_id(lab)
        escape = any(
            table.forcible(e) and plant.label(plant.step_id(pq, e)) in in_spec
            for e in plant.active_ids(pq)
        )
        for e in plant.active_ids(pq):
            if table.controllable(e):
                continue
            if plant.label(plant.step_id(pq, e)) in in_spec:
                continue
            if not escape:
                return False, (access[q], e)
    return True, None


@dataclass(frozen=True)
class SupervisorRealization:
    """Trimmed realization plus the removal trace from synthesis.

    ``removed_states`` records (state label, reason); the reason is the
    witnessing uncontrollable event for bad states and 'unreachable' for
    states dropped by trimming.
    """

    plant: Automaton
    realization: Automaton
    removed_states: tuple[tuple[str, str], ...] = ()

    @property
    def is_empty(self) -> bool:
        return self.realization.is_empty()


def _synthesize(sa: SpecificationAutomaton, use_forcible: bool, name_suffix: str) -> SupervisorRealization:
    plant = sa.plant
    table = plant.table
    current = sa.spec
    removed: list[tuple[str, str]] = []
    while not current.is_empty():
        in_spec = set(current.state_labels)
        bad: list[tuple[str, str]] = []
        for lab in current.state_labels:
            pq = plant.state_id(lab)
            witness = None
            for e in plant.active_ids(pq):
                if table.controllable(e):
                    continue
                if plant.label(plant.step_id(pq, e)) not in in_spec:
                    witness = e
                    break
            if witness is None:
                continue
            if use_forcible and any(
                table.forcible(e) and plant.label(plant.step_id(pq, e)) in in_spec
                for e in plant.active_ids(pq)
            ):
                continue
            bad.append((lab, witness))
        if not bad:
            break
        removed.extend(bad)
        keep = in_spec - {lab for lab, _ in bad}
        before = keep
        current = restrict(plant, keep, name=current.name)
        removed.extend((lab, "unreachable") for lab in sorted(before - set(current.state_labels)))
    realization = Automaton(
        sa.spec.name + name_suffix,
        current.table,
        current.alphabet,
        current.state_labels,
        {(s, e): d for s, e, d in current.transitions_items()},
        current.initial,
    )
    return SupervisorRealization(plant, realization, tuple(removed))


def supremal_f_controllable(sa: SpecificationAutomaton) -> SupervisorRealization:
    """Largest sub-automaton of the spec enforceable with forcible preemption.

    Iterated bad-state removal with trimming; an empty realization means no
    supervisor can keep the plant inside the spec (the empty language).  A
    spec that already passes check_f_controllable comes back unchanged.
    """
    return _synthesize(sa, use_forcible=True, name_suffix="+f")


def supremal_controllable(sa: SpecificationAutomaton) -> SupervisorRealization:
    """Conventional synthesis: forcible structure ignored entirely."""
    return _synthesize(sa, use_forcible=False, name_suffix="+c")


@dataclass(frozen=True)
class ControlPattern:
    """Per-state control decision: events enabled, and those to be forced."""

    enabled: frozenset[str]
    forced: frozenset[str]

    def __post_init__(self) -> None:
        if not self.forced <= self.enabled:
            raise ValueError("forced events must be enabled")


def control_policy(sup: SupervisorRealization, current: str) -> ControlPattern:
    """State-feedback pattern of the realization at ``current``.

    Enabled events are the realization's active events.  Forcing is marked
    needed only when some active uncontrollable plant event at the matching
    plant state leaves the realization; the forced set is then every enabled
    forcible event (the runtime picks the lexicographically least).
    """
    real, plant = sup.realization, sup.plant
    if real.is_empty():
        raise ValueError("empty realization has no control pattern")
    table = plant.table
    enabled = active_events(real, current)
    pq = plant.state_id(current)
    in_real = real.has_state
    threat = any(
        not table.controllable(e) and not in_real(plant.label(plant.step_id(pq, e)))
        for e in plant.active_ids(pq)
    )
    forced = (
        frozenset(e for e in enabled if table.forcible(e)) if threat else frozenset()
    )
    return ControlPattern(enabled=frozenset(enabled), forced=forced)


def is_admissible(pattern: ControlPattern, plant_active: Iterable[str], table: EventTable) -> bool:
    """Control admissibility: every disabled active event is controllable, or
    some forcible event is both enabled-for-forcing and active."""
    act = frozenset(plant_active)
    disabled = act - pattern.enabled
    if all(table.controllable(e) for e in disabled):
        return True
    return bool(pattern.forced & act)


_GRID_EVENT_RE = re.compile(r"^([abcefgkuh])(\d+)$")
# trip letters -> treated controllable under the rewrite; change letters keep
# their controllable+forcible attributes; the rest stay uncontrollable.
_TRIP_LETTERS = frozenset("eka")
_CHANGE_LETTERS = frozenset("fb")


def modified_attributes(table: EventTable) -> EventTable:
    """Rewrite grid-component event attributes for conventional synthesis.

    Trip events (e/k/a) are marked controllable on the grounds that a
    forcible shed or redispatch can preempt them; shed/redispatch events
    (f/b) stay controllable and forcible; restores and line loading changes
    (g/h/c/u) stay uncontrollable.  Labels outside that pattern raise.
    """
    out = EventTable()
    for lab in sorted(table.labels):
        m = _GRID_EVENT_RE.match(lab)
        if m is None:
            raise ValueError(f"unknown label pattern {lab!r}")
        letter = m.group(1)
        if letter in _TRIP_LETTERS:
            out.add(lab, controllable=True, forcible=False)
        elif letter in _CHANGE_LETTERS:
            out.add(lab, controllable=True, forcible=True)
        else:
            out.add(lab, controllable=False, forcible=False)
    return out


def grid_attribute_alphabet(table: EventTable) -> bool:
    """True when every label matches the grid component event pattern."""
    return all(_GRID_EVENT_RE.match(lab) for lab in table.labels)


# ---- limited lookahead ----------------------------------------------------


@dataclass
class LookaheadNode:
    """One unrolled plant state; pending marks the depth horizon."""

    state: str
    depth: int
    parent: int | None
    via: str | None
    pending: bool
    children: dict[str, int] = field(default_factory=dict)


@dataclass
class LookaheadTree:
    root: int
    depth: int
    nodes: list[LookaheadNode]
    # per-node verdict after pruning: True = usable ("good")
    good: list[bool] = field(default_factory=list)


def build_lookahead_tree(
    plant: Automaton,
    q: str,
    m: int,
    legal: Callable[[str], bool] | None = None,
) -> LookaheadTree:
    """Unroll the plant ``m`` steps from ``q`` and prune bad nodes.

    Depth-``m`` nodes are pending and treated as illegal (the conservative
    attitude), so the pattern extracted from the tree never exceeds the
    offline policy.  ``legal`` defaults to every state legal.  A node is bad
    when its state is illegal, it is pending, or some uncontrollable child is
    bad with no forcible child that is good.
    """
    if m < 1:
        raise ValueError("lookahead depth must be >= 1")
    if legal is None:
        legal = lambda lab: True  # noqa: E731 - trivial default predicate
    nodes: list[LookaheadNode] = [LookaheadNode(q, 0, None, None, pending=False)]
    order = [0]
    i = 0
    while i < len(order):
        nid = order[i]
        i += 1
        node = nodes[nid]
        if node.depth >= m or not legal(node.state):
            continue
        for e in plant.active_ids(plant.state_id(node.state)):
            child_state = step(plant, node.state, e)
            cid = len(nodes)
            nodes.append(
                LookaheadNode(child_state, node.depth + 1, nid, e, pending=node.depth + 1 >= m)
            )
            node.children[e] = cid
            order.append(cid)
    table = plant.table
    good = [False] * len(nodes)
    for nid in reversed(order):  # children are evaluated before parents
        node = nodes[nid]
        if not legal(node.state) or node.pending:
            continue
        threat = any(
            not table.controllable(e) and not good[cid] for e, cid in node.children.items()
        )
        if threat and not any(
            table.forcible(e) and good[cid] for e, cid in node.children.items()
        ):
            continue
        good[nid] = True
    return LookaheadTree(root=0, depth=m, nodes=nodes, good=good)


def tree_pattern(tree: LookaheadTree, table: EventTable) -> ControlPattern:
    """Control pattern at the tree root after pruning.

    An event is enabled when its child node survived pruning; forcing is
    marked when an uncontrollable child was pruned or illegal.  A bad root
    yields the empty pattern (no safe continuation is known within the
    horizon).
    """
    root = tree.nodes[tree.root]
    if not tree.good[tree.root]:
        return ControlPattern(frozenset(), frozenset())
    enabled = frozenset(e for e, cid in root.children.items() if tree.good[cid])
    threat = any(
        not table.controllable(e) and not tree.good[cid] for e, cid in root.children.items()
    )
    forced = frozenset(e for e in enabled if table.forcible(e)) if threat else frozenset()
    return ControlPattern(enabled=enabled, forced=forced)
