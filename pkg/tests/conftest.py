"""Shared fixtures and random-model builders for the test suite."""
from __future__ import annotations

import numpy as np
import pytest

from desgrid.automata import Automaton, EventTable
from desgrid.grid import GridCase, load_case
from desgrid.modular import build_node_supervisors, demo_two_node_case


def random_automaton(
    rng: np.random.Generator,
    max_states: int = 5,
    max_events: int = 4,
    density: float = 0.55,
    table: EventTable | None = None,
    name: str = "rand",
) -> Automaton:
    """Small random partial deterministic automaton, reachable from state 0."""
    n_states = int(rng.integers(2, max_states + 1))
    n_events = int(rng.integers(2, max_events + 1))
    labels = [f"e{i}" for i in range(n_events)]
    if table is None:
        table = EventTable()
        for lab in labels:
            table.add(
                lab,
                controllable=bool(rng.integers(0, 2)),
                forcible=bool(rng.integers(0, 2)),
            )
    states = [f"{name}{i}" for i in range(n_states)]
    delta: dict[tuple[int, str], int] = {}
    for q in range(n_states):
        for e in labels:
            if rng.random() < density:
                delta[(q, e)] = int(rng.integers(0, n_states))
    return Automaton(name, table, labels, states, delta, 0)


def random_acyclic_automaton(
    rng: np.random.Generator,
    max_states: int = 6,
    max_events: int = 3,
    density: float = 0.6,
    name: str = "dag",
) -> Automaton:
    """Random automaton whose transitions only move to higher state ids."""
    n_states = int(rng.integers(2, max_states + 1))
    n_events = int(rng.integers(2, max_events + 1))
    labels = [f"e{i}" for i in range(n_events)]
    table = EventTable()
    for lab in labels:
        table.add(
            lab,
            controllable=bool(rng.integers(0, 2)),
            forcible=bool(rng.integers(0, 2)),
        )
    states = [f"{name}{i}" for i in range(n_states)]
    delta: dict[tuple[int, str], int] = {}
    for q in range(n_states - 1):
        for e in labels:
            if rng.random() < density:
                delta[(q, e)] = int(rng.integers(q + 1, n_states))
    return Automaton(name, table, labels, states, delta, 0)


def triangle_case() -> GridCase:
    """3-bus fixture: 90 MW from bus 1 to bus 3 over equal reactances."""
    return GridCase(
        name="triangle",
        base_mva=100.0,
        bus_ids=np.array([1, 2, 3]),
        loads=np.array([0.0, 0.0, 90.0]),
        gen_bus=np.array([1]),
        gen_p=np.array([90.0]),
        gen_pmax=np.array([200.0]),
        gen_pmin=np.array([0.0]),
        gen_status=np.array([True]),
        br_from=np.array([1, 1, 2]),
        br_to=np.array([2, 3, 3]),
        br_x=np.array([0.1, 0.1, 0.1]),
        br_rating=np.array([100.0, 100.0, 100.0]),
        br_status=np.array([True, True, True]),
    )


@pytest.fixture(scope="session")
def two_node():
    return demo_two_node_case()


@pytest.fixture(scope="session")
def case30():
    return load_case("case30")


@pytest.fixture(scope="session")
def case118():
    return load_case("case118")


@pytest.fixture(scope="session")
def case300():
    return load_case("case300")


@pytest.fixture(scope="session")
def case30_controllers(case30):
    return build_node_supervisors(case30)
