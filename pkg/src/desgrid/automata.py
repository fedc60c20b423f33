"""Finite automata over attributed event alphabets.

Plants, specifications and supervisors are all partial deterministic automata
sharing one event table that records, per event label, whether the event is
controllable (a supervisor may disable it) and forcible (a supervisor may fire
it to preempt uncontrollable events).  Languages are prefix closed; there is no
marking.  States are stored by dense integer id with a separate label table so
composite labels stay cheap to carry around.
"""

from __future__ import annotations

import io
import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

__all__ = [
    "EventTable",
    "Automaton",
    "ComponentKind",
    "build_component",
    "parallel_compose",
    "compose_all",
    "active_events",
    "run",
    "step",
    "project",
    "language_upto",
    "restrict",
    "is_sub_automaton",
    "read_automaton",
    "write_automaton",
    "dumps_automaton",
    "AutomatonFormatError",
]

# A string over the alphabet is a tuple of event labels.  Public helpers also
# accept a single space-delimited str for convenience.
EventString = tuple[str, ...]

_LABEL_RE = re.compile(r"^\S+$")


def _as_string(s: str | Sequence[str]) -> EventString:
    if isinstance(s, str):
        return tuple(s.split())
    return tuple(s)


class EventTable:
    """Registry of event labels with (controllable, forcible) attributes."""

    def __init__(self) -> None:
        self._entries: dict[str, tuple[bool, bool]] = {}

    def add(self, label: str, controllable: bool, forcible: bool) -> None:
        if not label or not _LABEL_RE.match(label):
            raise ValueError(f"bad event label {label!r}")
        if label in self._entries:
            have = self._entries[label]
            if have != (controllable, forcible):
                raise ValueError(f"event {label!r} re-registered with different attributes")
            return
        self._entries[label] = (bool(controllable), bool(forcible))

    def controllable(self, label: str) -> bool:
        return self._entries[label][0]

    def forcible(self, label: str) -> bool:
        return self._entries[label][1]

    def __contains__(self, label: str) -> bool:
        return label in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[str]:
        return iter(self._entries)

    @property
    def labels(self) -> frozenset[str]:
        return frozenset(self._entries)

    def controllable_set(self, within: Iterable[str] | None = None) -> frozenset[str]:
        pool = self._entries if within is None else within
        return frozenset(e for e in pool if self._entries[e][0])

    def uncontrollable_set(self, within: Iterable[str] | None = None) -> frozenset[str]:
        pool = self._entries if within is None else within
        return frozenset(e for e in pool if not self._entries[e][0])

    def forcible_set(self, within: Iterable[str] | None = None) -> frozenset[str]:
        pool = self._entries if within is None else within
        return frozenset(e for e in pool if self._entries[e][1])

    def attributes(self, label: str) -> tuple[bool, bool]:
        return self._entries[label]

    def copy(self) -> "EventTable":
        t = EventTable()
        t._entries = dict(self._entries)
        return t


class Automaton:
    """Partial deterministic automaton; prefix-closed generated language.

    States are dense ids 0..n-1 with unique labels.  ``initial`` is None only
    for the empty automaton (zero states, empty language).  Instances are
    immutable by convention: all operations return new automata.
    """

    def __init__(
        self,
        name: str,
        table: EventTable,
        alphabet: Iterable[str],
        states: Sequence[str],
        transitions: dict[tuple[int, str], int],
        initial: int | None,
    ) -> None:
        self.name = name
        self.table = table
        self.alphabet = frozenset(alphabet)
        for e in self.alphabet:
            if e not in table:
                raise ValueError(f"alphabet event {e!r} not in event table")
        self._labels = tuple(states)
        if len(set(self._labels)) != len(self._labels):
            raise ValueError("duplicate state labels")
        self._index = {lab: i for i, lab in enumerate(self._labels)}
        self._delta = dict(transitions)
        for (src, ev), dst in self._delta.items():
            if not (0 <= src < len(self._labels) and 0 <= dst < len(self._labels)):
                raise ValueError("transition references unknown state id")
            if ev not in self.alphabet:
                raise ValueError(f"transition event {ev!r} outside alphabet")
        if initial is None:
            if self._labels:
                raise ValueError("non-empty automaton needs an initial state")
        elif not (0 <= initial < len(self._labels)):
            raise ValueError("initial state id out of range")
        self.initial = initial
        act: list[list[str]] = [[] for _ in self._labels]
        for (src, ev) in self._delta:
            act[src].append(ev)
        self._active = tuple(tuple(sorted(a)) for a in act)

    # -- basic queries ------------------------------------------------------

    @property
    def n_states(self) -> int:
        return len(self._labels)

    @property
    def state_labels(self) -> tuple[str, ...]:
        return self._labels

    def state_id(self, label: str) -> int:
        return self._index[label]

    def label(self, state: int) -> str:
        return self._labels[state]

    def has_state(self, label: str) -> bool:
        return label in self._index

    def step_id(self, state: int, event: str) -> int | None:
        return self._delta.get((state, event))

    def active_ids(self, state: int) -> tuple[str, ...]:
        return self._active[state]

    def transitions_items(self) -> Iterator[tuple[int, str, int]]:
        for (src, ev), dst in self._delta.items():
            yield src, ev, dst

    @property
    def n_transitions(self) -> int:
        return len(self._delta)

    def is_empty(self) -> bool:
        return self.initial is None

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"Automaton({self.name!r}, states={self.n_states}, transitions={self.n_transitions})"


@dataclass(frozen=True)
class ComponentKind:
    """A grid component modelled as a two-state automaton (Normal/Tripped).

    kind is one of generator/load/line; index is the 1-based component number.
    Label width is two digits, growing as needed past 99.
    """

    kind: str
    index: int

    _PREFIX = {"generator": "G", "load": "D", "line": "L"}
    # (trip, change, restore) event letter per kind
    _EVENTS = {"generator": ("a", "b", "c"), "load": ("e", "f", "g"), "line": ("k", "u", "h")}

    def __post_init__(self) -> None:
        if self.kind not in self._PREFIX:
            raise ValueError(f"unknown component kind {self.kind!r}")
        if self.index < 1:
            raise ValueError("component index must be >= 1")

    @property
    def tag(self) -> str:
        return f"{self._PREFIX[self.kind]}{self.index:02d}"

    @property
    def normal_label(self) -> str:
        return self.tag + "N"

    @property
    def tripped_label(self) -> str:
        return self.tag + "T"

    @property
    def trip_event(self) -> str:
        return f"{self._EVENTS[self.kind][0]}{self.index}"

    @property
    def change_event(self) -> str:
        return f"{self._EVENTS[self.kind][1]}{self.index}"

    @property
    def restore_event(self) -> str:
        return f"{self._EVENTS[self.kind][2]}{self.index}"

    @property
    def events(self) -> tuple[str, str, str]:
        return (self.trip_event, self.change_event, self.restore_event)


def build_component(kind: ComponentKind, table: EventTable | None = None) -> Automaton:
    """Two-state component automaton; registers its events in ``table``.

    Trip maps Normal->Tripped and restore maps back; the change event
    self-loops on Normal (a tripped component cannot be adjusted).  Trip and
    restore are uncontrollable and unforcible; load/generator change events
    are controllable and forcible, line loading changes are neither.
    """
    if table is None:
        table = EventTable()
    changeable = kind.kind in ("load", "generator")
    table.add(kind.trip_event, controllable=False, forcible=False)
    table.add(kind.change_event, controllable=changeable, forcible=changeable)
    table.add(kind.restore_event, controllable=False, forcible=False)
    states = (kind.normal_label, kind.tripped_label)
    delta = {
        (0, kind.trip_event): 1,
        (0, kind.change_event): 0,
        (1, kind.restore_event): 0,
    }
    return Automaton(kind.tag, table, kind.events, states, delta, initial=0)


# ---- composition --------------------------------------------------------


def parallel_compose(a: Automaton, b: Automaton) -> Automaton:
    """Synchronous product: shared events synchronize, private ones interleave.

    Only states reachable from the joint initial state are kept.  Composite
    labels are the operands' labels joined with '|', in operand order.
    """
    if a.table is not b.table:
        # A shared table keeps attribute lookups unambiguous for the result.
        for e in a.alphabet | b.alphabet:
            ta = a.table.attributes(e) if e in a.table else None
            tb = b.table.attributes(e) if e in b.table else None
            if ta is not None and tb is not None and ta != tb:
                raise ValueError(f"event {e!r} has conflicting attributes across tables")
    table = a.table if a.table is b.table else _merge_tables(a.table, b.table)
    if a.is_empty() or b.is_empty():
        return Automaton(f"{a.name}|{b.name}", table, a.alphabet | b.alphabet, (), {}, None)
    shared = a.alphabet & b.alphabet
    labels: list[str] = []
    index: dict[tuple[int, int], int] = {}
    delta: dict[tuple[int, str], int] = {}

    def intern(pair: tuple[int, int]) -> int:
        sid = index.get(pair)
        if sid is None:
            sid = len(labels)
            index[pair] = sid
            labels.append(a.label(pair[0]) + "|" + b.label(pair[1]))
        return sid

    start = (a.initial, b.initial)
    intern(start)
    frontier = [start]
    while frontier:
        qa, qb = frontier.pop()
        src = index[(qa, qb)]
        moves: list[tuple[str, tuple[int, int]]] = []
        for e in a.active_ids(qa):
            if e in shared:
                tb = b.step_id(qb, e)
                if tb is not None:
                    moves.append((e, (a.step_id(qa, e), tb)))
            else:
                moves.append((e, (a.step_id(qa, e), qb)))
        for e in b.active_ids(qb):
            if e not in a.alphabet:
                moves.append((e, (qa, b.step_id(qb, e))))
        for e, tgt in moves:
            known = tgt in index
            dst = intern(tgt)
            delta[(src, e)] = dst
            if not known:
                frontier.append(tgt)
    return Automaton(
        f"{a.name}|{b.name}", table, a.alphabet | b.alphabet, tuple(labels), delta, 0
    )


def _merge_tables(ta: EventTable, tb: EventTable) -> EventTable:
    t = ta.copy()
    for e in tb:
        c, f = tb.attributes(e)
        t.add(e, c, f)
    return t


def compose_all(automata: Sequence[Automaton]) -> Automaton:
    """Left fold of parallel_compose; state labels follow input order."""
    if not automata:
        raise ValueError("compose_all needs at least one automaton")
    acc = automata[0]
    for nxt in automata[1:]:
        acc = parallel_compose(acc, nxt)
    return acc


# ---- language operations -------------------------------------------------


def active_events(a: Automaton, state: str | int) -> frozenset[str]:
    """Events with a defined transition at ``state``."""
    sid = a.state_id(state) if isinstance(state, str) else state
    return frozenset(a.active_ids(sid))


def step(a: Automaton, state: str | int, event: str) -> str | None:
    """One-step successor label, or None when undefined."""
    sid = a.state_id(state) if isinstance(state, str) else state
    dst = a.step_id(sid, event)
    return None if dst is None else a.label(dst)


def run(a: Automaton, s: str | Sequence[str]) -> str | None:
    """State label reached by the event string ``s``, or None if undefined.

    ``s`` may be a space-delimited str or a sequence of event labels; the
    empty string yields the initial state.  A defined run is exactly
    membership of ``s`` in the generated language.
    """
    if a.is_empty():
        return None
    q = a.initial
    for e in _as_string(s):
        q = a.step_id(q, e)
        if q is None:
            return None
    return a.label(q)


def project(s: str | Sequence[str], alphabet: Iterable[str]) -> EventString:
    """Natural projection: erase events outside ``alphabet``, keep order."""
    keep = frozenset(alphabet)
    return tuple(e for e in _as_string(s) if e in keep)


def language_upto(a: Automaton, n: int) -> set[EventString]:
    """All generated strings of length <= n (empty set for the empty automaton)."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if a.is_empty():
        return set()
    out: set[EventString] = {()}
    frontier: list[tuple[EventString, int]] = [((), a.initial)]
    for _ in range(n):
        nxt: list[tuple[EventString, int]] = []
        for s, q in frontier:
            for e in a.active_ids(q):
                t = s + (e,)
                out.add(t)
                nxt.append((t, a.step_id(q, e)))
        frontier = nxt
        if not frontier:
            break
    return out


def project_automaton(a: Automaton, alphabet: Iterable[str], name: str | None = None) -> Automaton:
    """Deterministic automaton generating the projection of L(a) onto ``alphabet``.

    Subset construction with closure under the erased events; exact at any
    string length, unlike projecting a bounded string enumeration.  State
    labels are the sorted member labels in braces.
    """
    keep = frozenset(alphabet) & a.alphabet
    name = name if name is not None else a.name + ".proj"
    if a.is_empty():
        return Automaton(name, a.table, keep, (), {}, None)

    def closure(states: frozenset[int]) -> frozenset[int]:
        stack = list(states)
        seen = set(states)
        while stack:
            q = stack.pop()
            for e in a.active_ids(q):
                if e in keep:
                    continue
                t = a.step_id(q, e)
                if t not in seen:
                    seen.add(t)
                    stack.append(t)
        return frozenset(seen)

    def label_of(states: frozenset[int]) -> str:
        return "{" + ",".join(sorted(a.label(q) for q in states)) + "}"

    init = closure(frozenset({a.initial}))
    order: list[frozenset[int]] = [init]
    index: dict[frozenset[int], int] = {init: 0}
    labels: list[str] = [label_of(init)]
    delta: dict[tuple[int, str], int] = {}
    i = 0
    while i < len(order):
        ss = order[i]
        sid = index[ss]
        i += 1
        succ: dict[str, set[int]] = {}
        for q in ss:
            for e in a.active_ids(q):
                if e in keep:
                    succ.setdefault(e, set()).add(a.step_id(q, e))
        for e in sorted(succ):
            ts = closure(frozenset(succ[e]))
            if ts not in index:
                index[ts] = len(labels)
                labels.append(label_of(ts))
                order.append(ts)
            delta[(sid, e)] = index[ts]
    return Automaton(name, a.table, keep, labels, delta, 0)


def restrict(a: Automaton, keep: Iterable[str], name: str | None = None) -> Automaton:
    """Sub-automaton on the state labels in ``keep``, trimmed to the reachable part.

    Transitions survive only when both endpoints are kept.  If the initial
    state is not kept the result is the empty automaton.
    """
    keep_ids = {a.state_id(lab) for lab in keep if a.has_state(lab)}
    name = name if name is not None else a.name
    if a.initial is None or a.initial not in keep_ids:
        return Automaton(name, a.table, a.alphabet, (), {}, None)
    reach: list[int] = [a.initial]
    seen = {a.initial}
    i = 0
    while i < len(reach):
        q = reach[i]
        i += 1
        for e in a.active_ids(q):
            t = a.step_id(q, e)
            if t in keep_ids and t not in seen:
                seen.add(t)
                reach.append(t)
    order = sorted(seen)
    remap = {old: new for new, old in enumerate(order)}
    labels = tuple(a.label(q) for q in order)
    delta = {
        (remap[q], e): remap[t]
        for q in order
        for e in a.active_ids(q)
        if (t := a.step_id(q, e)) in seen
    }
    return Automaton(name, a.table, a.alphabet, labels, delta, remap[a.initial])


def is_sub_automaton(sub: Automaton, sup: Automaton) -> bool:
    """True when every state/transition of ``sub`` exists in ``sup`` (by label)."""
    if sub.is_empty():
        return True
    if sup.is_empty():
        return False
    if sub.label(sub.initial) != sup.label(sup.initial):
        return False
    for lab in sub.state_labels:
        if not sup.has_state(lab):
            return False
    for src, ev, dst in sub.transitions_items():
        got = step(sup, sub.label(src), ev)
        if got != sub.label(dst):
            return False
    return True


# ---- text format ---------------------------------------------------------
#
# automaton NAME
# events:
# LABEL controllable|uncontrollable forcible|unforcible
# states:
# LABEL [initial]
# transitions:
# SRC EVENT DST
#
# Events, states and transitions are each written in lexicographic order, so
# writing is canonical and read->write round-trips byte-identically.


class AutomatonFormatError(ValueError):
    """Raised with a line number when the text form cannot be parsed."""

    def __init__(self, lineno: int, message: str) -> None:
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


def dumps_automaton(a: Automaton, removed: Sequence[tuple[str, str]] | None = None) -> str:
    """Canonical text form; ``removed`` appends the realization trailer."""
    out = io.StringIO()
    out.write(f"automaton {a.name}\n")
    out.write("events:\n")
    for e in sorted(a.alphabet):
        c, frc = a.table.attributes(e)
        out.write(
            f"{e} {'controllable' if c else 'uncontrollable'}"
            f" {'forcible' if frc else 'unforcible'}\n"
        )
    out.write("states:\n")
    init = a.label(a.initial) if a.initial is not None else None
    for lab in sorted(a.state_labels):
        out.write(f"{lab} initial\n" if lab == init else f"{lab}\n")
    out.write("transitions:\n")
    rows = sorted((a.label(s), e, a.label(d)) for s, e, d in a.transitions_items())
    for src, ev, dst in rows:
        out.write(f"{src} {ev} {dst}\n")
    if removed is not None:
        out.write("removed:\n")
        for lab, reason in sorted(removed):
            out.write(f"{lab} {reason}\n")
    return out.getvalue()


def write_automaton(a: Automaton, f, removed: Sequence[tuple[str, str]] | None = None) -> None:
    """Write the canonical text form to a path or text file object."""
    text = dumps_automaton(a, removed)
    if hasattr(f, "write"):
        f.write(text)
    else:
        with open(f, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def read_automaton(
    f, table: EventTable | None = None
) -> tuple[Automaton, list[tuple[str, str]]]:
    """Parse the text form; returns (automaton, removed-trailer rows).

    Events are registered into ``table`` (a fresh one when None).  Raises
    AutomatonFormatError with a 1-based line number on malformed input.
    """
    if hasattr(f, "read"):
        text = f.read()
    else:
        with open(f, "r", encoding="utf-8") as fh:
            text = fh.read()
    if table is None:
        table = EventTable()
    lines = text.splitlines()
    if not lines:
        raise AutomatonFormatError(1, "empty file")
    head = lines[0].split()
    if len(head) != 2 or head[0] != "automaton":
        raise AutomatonFormatError(1, "expected 'automaton NAME' header")
    name = head[1]
    section = None
    alphabet: list[str] = []
    states: list[str] = []
    initial_label: str | None = None
    trans: list[tuple[str, str, str]] = []
    removed: list[tuple[str, str]] = []
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line:
            continue
        if line in ("events:", "states:", "transitions:", "removed:"):
            section = line[:-1]
            continue
        parts = line.split()
        if section == "events":
            if len(parts) != 3:
                raise AutomatonFormatError(lineno, "event rows need 'LABEL ctrl force'")
            lab, ctrl, frc = parts
            if ctrl not in ("controllable", "uncontrollable"):
                raise AutomatonFormatError(lineno, f"bad controllability {ctrl!r}")
            if frc not in ("forcible", "unforcible"):
                raise AutomatonFormatError(lineno, f"bad forcibility {frc!r}")
            try:
                table.add(lab, ctrl == "controllable", frc == "forcible")
            except ValueError as exc:
                raise AutomatonFormatError(lineno, str(exc)) from exc
            alphabet.append(lab)
        elif section == "states":
            if len(parts) == 2 and parts[1] == "initial":
                if initial_label is not None:
                    raise AutomatonFormatError(lineno, "two initial states")
                initial_label = parts[0]
            elif len(parts) != 1:
                raise AutomatonFormatError(lineno, "state rows are 'LABEL [initial]'")
            states.append(parts[0])
        elif section == "transitions":
            if len(parts) != 3:
                raise AutomatonFormatError(lineno, "transition rows are 'SRC EVENT DST'")
            trans.append((parts[0], parts[1], parts[2]))
        elif section == "removed":
            if len(parts) != 2:
                raise AutomatonFormatError(lineno, "removed rows are 'STATE REASON'")
            removed.append((parts[0], parts[1]))
        else:
            raise AutomatonFormatError(lineno, "content before any section header")
    if states and initial_label is None:
        raise AutomatonFormatError(len(lines), "no initial state marked")
    index = {lab: i for i, lab in enumerate(states)}
    if len(index) != len(states):
        raise AutomatonFormatError(len(lines), "duplicate state label")
    delta: dict[tuple[int, str], int] = {}
    for src, ev, dst in trans:
        if src not in index or dst not in index:
            raise AutomatonFormatError(len(lines), f"transition references unknown state {src!r}/{dst!r}")
        if ev not in set(alphabet):
            raise AutomatonFormatError(len(lines), f"transition event {ev!r} not declared")
        key = (index[src], ev)
        if key in delta and delta[key] != index[dst]:
            raise AutomatonFormatError(len(lines), f"nondeterministic on {ev!r} at {src!r}")
        delta[key] = index[dst]
    auto = Automaton(
        name,
        table,
        alphabet,
        tuple(states),
        delta,
        index[initial_label] if initial_label is not None else None,
    )
    return auto, removed
