"""Per-node sub-systems, modular supervisor synthesis, and their conjunction.

Each grid object (generator, load, line) is a two-state component; the
sub-system of node j composes the components at the node, at its direct
neighbors, and every line incident to any of those buses.  A supervisor is
synthesized per node and the runtime control decision is the conjunction of
all member patterns: an event runs only if every member whose alphabet
contains it agrees.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .automata import (
    Automaton,
    ComponentKind,
    EventString,
    EventTable,
    active_events,
    build_component,
    compose_all,
    language_upto,
    project,
    project_automaton,
    run,
    step,
    write_automaton,
)
from .grid import GridCase, build_adjacency
from .supervisory import (
    ControlPattern,
    SpecificationAutomaton,
    SupervisorRealization,
    build_specification_from_states,
    control_policy,
    grid_attribute_alphabet,
    modified_attributes,
    supremal_controllable,
    supremal_f_controllable,
)


class ModularError(ValueError):
    """Malformed sub-system or a member losing track of its projection."""


# ---- grid objects as components ---------------------------------------------


def _component_table(members: Iterable[ComponentKind]) -> EventTable:
    table = EventTable()
    for c in members:
        build_component(c, table)
    return table


@dataclass(frozen=True)
class ComponentRegistry:
    """Two-state components for every grid object, with stable numbering.

    Loads are numbered in bus order (buses with demand), generators in row
    order, lines in branch order; numbering ignores service status so event
    labels stay stable across a run.
    """

    gens: tuple[tuple[ComponentKind, int], ...]  # (component, generator row)
    loads: tuple[tuple[ComponentKind, int], ...]  # (component, bus id)
    lines: tuple[tuple[ComponentKind, int], ...]  # (component, branch id)

    @classmethod
    def from_case(cls, case: GridCase) -> "ComponentRegistry":
        loads = tuple(
            (ComponentKind("load", i + 1), int(bus))
            for i, bus in enumerate(b for b in case.bus_ids if case.loads[case.bus_index[int(b)]] > 0)
        )
        gens = tuple((ComponentKind("generator", g + 1), g) for g in range(case.n_gen))
        lines = tuple((ComponentKind("line", k + 1), k + 1) for k in range(case.n_branch))
        return cls(gens=gens, loads=loads, lines=lines)

    def all_components(self) -> tuple[ComponentKind, ...]:
        return tuple(c for c, _ in self.gens + self.loads + self.lines)

    def full_table(self) -> EventTable:
        return _component_table(self.all_components())

    def load_component(self, bus: int) -> ComponentKind | None:
        for c, b in self.loads:
            if b == bus:
                return c
        return None

    def load_bus(self, component: ComponentKind) -> int:
        for c, b in self.loads:
            if c == component:
                return b
        raise ModularError(f"unknown load component {component.tag}")

    def gen_components_at(self, bus: int, case: GridCase) -> tuple[tuple[ComponentKind, int], ...]:
        return tuple((c, g) for c, g in self.gens if int(case.gen_bus[g]) == bus)

    def line_component(self, branch_id: int) -> ComponentKind:
        return self.lines[branch_id - 1][0]

    def line_trip_event(self, branch_id: int) -> str:
        return self.line_component(branch_id).trip_event

    def owner_of(self, event: str) -> tuple[ComponentKind, int]:
        """(component, grid object id) owning an event label."""
        for group in (self.gens, self.loads, self.lines):
            for c, obj in group:
                if event in c.events:
                    return c, obj
        raise ModularError(f"no component owns event {event!r}")


# ---- sub-system construction -------------------------------------------------


@dataclass(frozen=True)
class SubsystemSpec:
    """Component membership of one node's sub-system.

    Own components live at the node (plus lines incident to it); neighbor
    components live one line away.  A line incident to two member buses is
    listed once.
    """

    node: int
    neighbor_buses: tuple[int, ...]
    own_components: tuple[ComponentKind, ...]
    neighbor_components: tuple[ComponentKind, ...]

    def __post_init__(self) -> None:
        tags = [c.tag for c in self.members]
        if len(set(tags)) != len(tags):
            raise ModularError("component listed twice in one sub-system")

    @property
    def members(self) -> tuple[ComponentKind, ...]:
        return tuple(sorted(self.own_components + self.neighbor_components, key=lambda c: c.tag))

    @property
    def alphabet(self) -> frozenset[str]:
        return frozenset(e for c in self.members for e in c.events)


def subsystem_members(
    case: GridCase, node: int, registry: ComponentRegistry | None = None
) -> SubsystemSpec:
    """Membership only; composing the automaton is build_subsystem's job."""
    if node not in case.bus_index:
        raise ModularError(f"unknown node {node}")
    reg = registry or ComponentRegistry.from_case(case)
    adj = build_adjacency(case)
    neighbors = sorted({other for _, other in adj[node]})
    member_buses = [node] + neighbors

    own: list[ComponentKind] = [c for c, _ in reg.gen_components_at(node, case)]
    own_load = reg.load_component(node)
    if own_load is not None:
        own.append(own_load)
    seen_lines: set[int] = set()
    for bid, _ in adj[node]:
        if bid not in seen_lines:
            seen_lines.add(bid)
            own.append(reg.line_component(bid))

    nbr: list[ComponentKind] = []
    for b in neighbors:
        nbr.extend(c for c, _ in reg.gen_components_at(b, case))
        d = reg.load_component(b)
        if d is not None:
            nbr.append(d)
    for b in member_buses:
        for bid, _ in adj[b]:
            if bid not in seen_lines:
                seen_lines.add(bid)
                nbr.append(reg.line_component(bid))
    return SubsystemSpec(
        node=node,
        neighbor_buses=tuple(neighbors),
        own_components=tuple(own),
        neighbor_components=tuple(nbr),
    )


def build_subsystem(
    case: GridCase,
    node: int,
    registry: ComponentRegistry | None = None,
    max_states: int | None = None,
) -> tuple[SubsystemSpec, Automaton]:
    """Compose the node's component automata into the sub-system plant."""
    spec = subsystem_members(case, node, registry)
    members = spec.members
    if max_states is not None and 2 ** len(members) > max_states:
        raise ModularError(
            f"sub-system of node {node} has {len(members)} components "
            f"(2^{len(members)} states > bound {max_states})"
        )
    table = _component_table(members)
    plant = compose_all([build_component(c, table) for c in members])
    return spec, Automaton(
        f"P{node}", plant.table, plant.alphabet, plant.state_labels,
        {(s, e): t for s, e, t in plant.transitions_items()}, plant.initial,
    )


# ---- specifications and synthesis --------------------------------------------


def all_tripped(label: str) -> bool:
    """Default illegality: every component segment of the label is Tripped."""
    return all(seg.endswith("T") for seg in label.split("|"))


def build_specification(
    plant_j: Automaton, illegal: Callable[[str], bool] | None = None
) -> SpecificationAutomaton:
    """Plant minus the states satisfying the illegality predicate, trimmed."""
    pred = illegal or all_tripped
    if plant_j.is_empty():
        raise ModularError("empty plant has no specification")
    if pred(plant_j.label(plant_j.initial)):
        raise ModularError("initial state is illegal")
    legal = [lab for lab in plant_j.state_labels if not pred(lab)]
    return build_specification_from_states(plant_j, legal)


def _retable(a: Automaton, table: EventTable) -> Automaton:
    return Automaton(
        a.name, table, a.alphabet, a.state_labels,
        {(s, e): t for s, e, t in a.transitions_items()}, a.initial,
    )


@dataclass
class ModularSupervisor:
    """One node's synthesized supervisor with incremental runtime tracking.

    ``current`` always equals run(realization, project(observed, alphabet));
    observing a projected event with no defined transition means the member
    lost track and raises.
    """

    node: int
    plant: Automaton
    spec: SpecificationAutomaton
    realization: SupervisorRealization
    method: str = "pipeline"
    subsystem: SubsystemSpec | None = None
    current: str = field(init=False)

    def __post_init__(self) -> None:
        if self.realization.is_empty:
            raise ModularError(f"node {self.node}: synthesis left an empty realization")
        self.current = self.realization.realization.label(self.realization.realization.initial)

    @property
    def alphabet(self) -> frozenset[str]:
        return self.plant.alphabet

    @property
    def table(self) -> EventTable:
        return self.plant.table

    # snapshot protocol shared with LazyNodeSupervisor
    def initial_snapshot(self) -> str:
        real = self.realization.realization
        return real.label(real.initial)

    def advance(self, snap: str, event: str) -> str:
        if event not in self.alphabet:
            return snap
        nxt = step(self.realization.realization, snap, event)
        if nxt is None:
            raise ModularError(
                f"node {self.node}: cannot follow {event!r} from state {snap!r}"
            )
        return nxt

    def pattern_from(self, snap: str) -> ControlPattern:
        return control_policy(self.realization, snap)

    def plant_active_from(self, snap: str) -> frozenset[str]:
        return active_events(self.plant, snap)

    # runtime wrappers
    def reset(self) -> None:
        self.current = self.initial_snapshot()

    def observe(self, event: str) -> str:
        self.current = self.advance(self.current, event)
        return self.current

    def pattern(self) -> ControlPattern:
        return self.pattern_from(self.current)

    def follow(self, observed: str | Sequence[str]) -> str | None:
        return run(self.realization.realization, project(observed, self.alphabet))


def synthesize_modular(
    plant_j: Automaton,
    spec_j: SpecificationAutomaton,
    node: int = 0,
    subsystem: SubsystemSpec | None = None,
    method: str = "auto",
) -> ModularSupervisor:
    """Synthesize one node supervisor.

    method='pipeline' rewrites grid event attributes (trips become
    controllable because a forcible shed or redispatch can preempt them) and
    runs conventional controllability-only synthesis; method='forcible' runs
    synthesis directly against the forcible-escape bad-state rule.  'auto'
    picks pipeline exactly when the alphabet follows the grid component
    labelling.  The two disagree whenever a threatened state has no shed or
    redispatch defined; the pipeline is the default because it is the one a
    grid controller deploys, with admissibility checked downstream.
    """
    if method == "auto":
        method = "pipeline" if grid_attribute_alphabet(plant_j.table) else "forcible"
    if method == "pipeline":
        mtable = modified_attributes(plant_j.table)
        sa2 = SpecificationAutomaton(
            _retable(plant_j, mtable), _retable(spec_j.spec, mtable), spec_j.legal_states
        )
        real2 = supremal_controllable(sa2)
        realization = SupervisorRealization(
            plant=plant_j,
            realization=_retable(real2.realization, plant_j.table),
            removed_states=real2.removed_states,
        )
    elif method == "forcible":
        realization = supremal_f_controllable(spec_j)
    else:
        raise ModularError(f"unknown synthesis method {method!r}")
    return ModularSupervisor(
        node=node, plant=plant_j, spec=spec_j, realization=realization,
        method=method, subsystem=subsystem,
    )


@dataclass
class LazyNodeSupervisor:
    """Pattern-equivalent stand-in for a node whose product would be too large.

    On grid sub-systems the pipeline realization keeps every legal state: the
    single illegal state (all members tripped) is entered only by trip
    events, which the attribute rewrite makes controllable, so conventional
    synthesis removes nothing.  The control pattern therefore depends only on
    each member's Normal/Tripped flag, tracked directly instead of composing
    a 2^n automaton.  Snapshots are frozensets of tripped member tags.
    """

    node: int
    subsystem: SubsystemSpec
    table: EventTable = field(default_factory=EventTable)
    method: str = "pipeline"
    tripped: set[str] = field(default_factory=set)

    def __post_init__(self) -> None:
        members = self.subsystem.members
        if len(self.table) == 0:
            self.table = _component_table(members)
        self._by_tag = {c.tag: c for c in members}
        self._owner = {e: c for c in members for e in c.events}

    @property
    def alphabet(self) -> frozenset[str]:
        return self.subsystem.alphabet

    def initial_snapshot(self) -> frozenset[str]:
        return frozenset()

    def advance(self, snap: frozenset[str], event: str) -> frozenset[str]:
        c = self._owner.get(event)
        if c is None:
            return snap
        tripped = c.tag in snap
        if event == c.trip_event:
            if tripped or len(snap) + 1 == len(self._by_tag):
                # second trip of one member, or the move into all-tripped:
                # neither transition exists in the realization
                raise ModularError(
                    f"node {self.node}: cannot follow {event!r} from {sorted(snap)}"
                )
            return snap | {c.tag}
        if event == c.restore_event:
            if not tripped:
                raise ModularError(
                    f"node {self.node}: cannot follow {event!r} from {sorted(snap)}"
                )
            return snap - {c.tag}
        if tripped:  # change events self-loop on Normal only
            raise ModularError(
                f"node {self.node}: cannot follow {event!r} from {sorted(snap)}"
            )
        return snap

    def _normal(self, snap: frozenset[str]) -> list[ComponentKind]:
        return [c for tag, c in self._by_tag.items() if tag not in snap]

    def pattern_from(self, snap: frozenset[str]) -> ControlPattern:
        normal = self._normal(snap)
        enabled: set[str] = set()
        for tag, c in self._by_tag.items():
            if tag in snap:
                enabled.add(c.restore_event)
            else:
                enabled.add(c.trip_event)
                enabled.add(c.change_event)
        threat = len(normal) == 1
        if threat:
            enabled.discard(normal[0].trip_event)
        forced = (
            frozenset(e for e in enabled if self.table.forcible(e)) if threat else frozenset()
        )
        return ControlPattern(enabled=frozenset(enabled), forced=forced)

    def plant_active_from(self, snap: frozenset[str]) -> frozenset[str]:
        out: set[str] = set()
        for tag, c in self._by_tag.items():
            if tag in snap:
                out.add(c.restore_event)
            else:
                out.add(c.trip_event)
                out.add(c.change_event)
        return frozenset(out)

    def reset(self) -> None:
        self.tripped.clear()

    def observe(self, event: str) -> frozenset[str]:
        snap = self.advance(frozenset(self.tripped), event)
        self.tripped = set(snap)
        return snap

    def pattern(self) -> ControlPattern:
        return self.pattern_from(frozenset(self.tripped))

    def follow(self, observed: str | Sequence[str]) -> frozenset[str] | None:
        snap = self.initial_snapshot()
        try:
            for e in project(observed, self.alphabet):
                snap = self.advance(snap, e)
        except ModularError:
            return None
        return snap


NodeSupervisor = ModularSupervisor | LazyNodeSupervisor


# ---- conjunction ---------------------------------------------------------------


@dataclass
class ConjunctionController:
    """Runtime conjunction of node supervisors over a shared global alphabet.

    An event is enabled when every member whose alphabet contains it enables
    it; members without the event never veto.  The forced set is the union of
    member forced sets, kept only where the conjunction itself still enables
    the event.
    """

    members: list[NodeSupervisor]
    global_alphabet: frozenset[str]
    table: EventTable

    def __post_init__(self) -> None:
        covered = frozenset().union(*(m.alphabet for m in self.members)) if self.members else frozenset()
        self.uncovered = self.global_alphabet - covered

    def by_node(self, node: int) -> NodeSupervisor:
        for m in self.members:
            if m.node == node:
                return m
        raise ModularError(f"no member for node {node}")

    def reset(self) -> None:
        for m in self.members:
            m.reset()

    def observe(self, event: str) -> None:
        for m in self.members:
            if event in m.alphabet:
                m.observe(event)

    def snapshot(self) -> tuple:
        return tuple(
            m.current if isinstance(m, ModularSupervisor) else frozenset(m.tripped)
            for m in self.members
        )

    def restore(self, snap: tuple) -> None:
        for m, s in zip(self.members, snap):
            if isinstance(m, ModularSupervisor):
                m.current = s
            else:
                m.tripped = set(s)

    def pattern_from(self, snap: tuple) -> ControlPattern:
        enabled = set(self.global_alphabet)
        forced_union: set[str] = set()
        for m, s in zip(self.members, snap):
            p = m.pattern_from(s)
            enabled -= m.alphabet - p.enabled
            forced_union |= p.forced
        forced = frozenset(forced_union & enabled)
        return ControlPattern(enabled=frozenset(enabled), forced=forced)

    def pattern(self) -> ControlPattern:
        return self.pattern_from(self.snapshot())

    def advance(self, snap: tuple, event: str) -> tuple:
        return tuple(
            m.advance(s, event) if event in m.alphabet else s
            for m, s in zip(self.members, snap)
        )


def conjunction(c: ConjunctionController, observed: str | Sequence[str]) -> ControlPattern:
    """Control pattern after the observed global string, without mutating c."""
    snap = tuple(m.initial_snapshot() for m in c.members)
    for e in project(observed, c.global_alphabet):
        snap = c.advance(snap, e)
    return c.pattern_from(snap)


def build_node_supervisors(
    case: GridCase,
    nodes: Sequence[int] | None = None,
    max_states: int = 2**12,
    method: str = "auto",
    registry: ComponentRegistry | None = None,
) -> ConjunctionController:
    """One supervisor per node; exponential sub-systems fall back to the lazy form.

    Default nodes are all buses, which makes the member alphabets jointly
    cover every component event of the grid.  The lazy form computes the same
    patterns as the materialized pipeline realization, so the bound trades
    memory for introspection only.
    """
    reg = registry or ComponentRegistry.from_case(case)
    want_all = nodes is None
    node_list = [int(b) for b in case.bus_ids] if want_all else [int(n) for n in nodes]
    members: list[NodeSupervisor] = []
    for node in node_list:
        try:
            sub, plant = build_subsystem(case, node, reg, max_states=max_states)
        except ModularError:
            sub = subsystem_members(case, node, reg)
            members.append(LazyNodeSupervisor(node=node, subsystem=sub))
            continue
        sa = build_specification(plant)
        members.append(synthesize_modular(plant, sa, node=node, subsystem=sub, method=method))
    table = reg.full_table()
    ctrl = ConjunctionController(members=members, global_alphabet=table.labels, table=table)
    if want_all and ctrl.uncovered:
        raise ModularError(f"events not covered by any member: {sorted(ctrl.uncovered)}")
    return ctrl


# ---- bounded verification -------------------------------------------------------


def closed_loop_language(
    c: ConjunctionController, plant: Automaton, bound: int
) -> set[EventString]:
    """Strings of length <= bound the plant can run under the conjunction.

    Recursive unrolling: an event extends a string when the plant defines it
    and no member vetoes it.  Forcing never adds strings here; it only
    narrows what a physical run would pick among the enabled events.
    """
    if bound < 0:
        raise ModularError("bound must be >= 0")
    out: set[EventString] = {()}
    if plant.is_empty():
        return out
    start = tuple(m.initial_snapshot() for m in c.members)
    frontier: list[tuple[EventString, int, tuple]] = [((), plant.initial, start)]
    for _ in range(bound):
        nxt: list[tuple[EventString, int, tuple]] = []
        for s, q, snap in frontier:
            pat = c.pattern_from(snap)
            for e in plant.active_ids(q):
                if e in c.global_alphabet and e not in pat.enabled:
                    continue
                t = s + (e,)
                out.add(t)
                nxt.append((t, plant.step_id(q, e), c.advance(snap, e)))
        frontier = nxt
        if not frontier:
            break
    return out


def check_forced_consistency(
    c: ConjunctionController, plant: Automaton, bound: int
) -> tuple[bool, tuple[tuple[EventString, str, int], ...]]:
    """Every member-forced event must itself survive the conjunction.

    Walks the closed loop up to ``bound`` and reports (string, event, node)
    for each forced event that the plant or another member refuses.
    """
    violations: list[tuple[EventString, str, int]] = []
    if plant.is_empty():
        return True, ()
    start = tuple(m.initial_snapshot() for m in c.members)
    frontier: list[tuple[EventString, int, tuple]] = [((), plant.initial, start)]
    for depth in range(bound + 1):
        nxt: list[tuple[EventString, int, tuple]] = []
        for s, q, snap in frontier:
            pat = c.pattern_from(snap)
            allowed = {
                e for e in plant.active_ids(q)
                if e not in c.global_alphabet or e in pat.enabled
            }
            for m, ms in zip(c.members, snap):
                for e in sorted(m.pattern_from(ms).forced):
                    if e not in allowed:
                        violations.append((s, e, m.node))
            if depth < bound:
                for e in sorted(allowed):
                    nxt.append((s + (e,), plant.step_id(q, e), c.advance(snap, e)))
        frontier = nxt
        if not frontier:
            break
    return not violations, tuple(violations)


def check_conditional_decomposability(
    spec_automata: Sequence[Automaton],
    alphabets: Sequence[Iterable[str]] | None = None,
    bound: int = 8,
) -> bool:
    """Bounded test of K = (projection onto alphabet 1) || ... || (alphabet n).

    K is the composition of the given automata (a single automaton is K
    itself).  Projections are built exactly by subset construction, so the
    bound limits only the compared string length.
    """
    if not spec_automata:
        raise ModularError("need at least one specification automaton")
    k = compose_all(list(spec_automata)) if len(spec_automata) > 1 else spec_automata[0]
    alphas = [frozenset(a) for a in alphabets] if alphabets is not None else [
        a.alphabet for a in spec_automata
    ]
    if len(alphas) <= 1:
        return True
    projections = [project_automaton(k, alpha) for alpha in alphas]
    composed = compose_all(projections)
    return language_upto(composed, bound) == language_upto(k, bound)


def _member_leaks(m: NodeSupervisor, bound: int) -> bool:
    """Reachable member state where a threat has no forcible answer.

    A threat is an active uncontrollable plant event the realization does not
    define; with an empty forced set nothing preempts it, the plant can leave
    the realization, and the member language exceeds its synthesis target.
    """
    table = m.table if isinstance(m, ModularSupervisor) else m.table
    snap0 = m.initial_snapshot()
    seen = {snap0}
    frontier = [snap0]
    for _ in range(bound + 1):
        nxt = []
        for snap in frontier:
            pat = m.pattern_from(snap)
            escapes = m.plant_active_from(snap) - pat.enabled
            if any(not table.controllable(e) for e in escapes) and not pat.forced:
                return True
            for e in sorted(pat.enabled):
                t = m.advance(snap, e)
                if t not in seen:
                    seen.add(t)
                    nxt.append(t)
        frontier = nxt
        if not frontier:
            break
    return False


def verify_safety(
    c: ConjunctionController,
    plant: Automaton,
    global_spec: Automaton | SpecificationAutomaton,
    bound: int,
) -> bool:
    """Closed loop inside the global spec, and every member leak-free.

    The member clause checks that forcible preemption actually covers each
    threatened state up to ``bound`` steps, which is what makes the member
    language equal its realization language.
    """
    spec_auto = global_spec.spec if isinstance(global_spec, SpecificationAutomaton) else global_spec
    for s in closed_loop_language(c, plant, bound):
        if run(spec_auto, s) is None:
            return False
    return all(not _member_leaks(m, bound) for m in c.members)


# ---- controller bundle export ----------------------------------------------------


def save_controller_bundle(c: ConjunctionController, out_dir: str | Path) -> Path:
    """One realization file per materialized node plus a manifest.

    Lazy members carry no state graph; the manifest records their component
    membership instead.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest: list[dict] = []
    for m in c.members:
        entry: dict = {
            "node": m.node,
            "alphabet": sorted(m.alphabet),
        }
        if m.subsystem is not None:
            entry["members"] = [comp.tag for comp in m.subsystem.members]
            entry["neighbor_buses"] = list(m.subsystem.neighbor_buses)
        if isinstance(m, ModularSupervisor):
            entry["kind"] = "materialized"
            entry["method"] = m.method
            entry["states"] = m.realization.realization.n_states
            fname = f"node_{m.node:03d}.aut"
            write_automaton(m.realization.realization, out / fname, m.realization.removed_states)
            entry["file"] = fname
        else:
            entry["kind"] = "lazy"
            entry["method"] = m.method
        manifest.append(entry)
    path = out / "manifest.json"
    path.write_text(
        json.dumps({"nodes": manifest}, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return path


# ---- worked two-node fixture -------------------------------------------------------


def demo_two_node_case() -> GridCase:
    """Two buses joined by three parallel lines: one generator, one load."""
    return GridCase(
        name="two_node",
        base_mva=100.0,
        bus_ids=np.array([1, 2]),
        loads=np.array([0.0, 60.0]),
        gen_bus=np.array([1]),
        gen_p=np.array([60.0]),
        gen_pmax=np.array([100.0]),
        gen_pmin=np.array([0.0]),
        gen_status=np.array([True]),
        br_from=np.array([1, 1, 1]),
        br_to=np.array([2, 2, 2]),
        br_x=np.array([0.1, 0.1, 0.1]),
        br_rating=np.array([40.0, 40.0, 40.0]),
        br_status=np.array([True, True, True]),
    )
