"""Node subsystems, synthesis pipeline, conjunction, safety verification."""
from __future__ import annotations

import json

import numpy as np
import pytest

from desgrid.automata import compose_all, language_upto, project, read_automaton, run
from desgrid.modular import (
    ComponentRegistry,
    ConjunctionController,
    LazyNodeSupervisor,
    ModularError,
    ModularSupervisor,
    build_node_supervisors,
    build_specification,
    build_subsystem,
    check_conditional_decomposability,
    check_forced_consistency,
    closed_loop_language,
    conjunction,
    demo_two_node_case,
    save_controller_bundle,
    subsystem_members,
    synthesize_modular,
    verify_safety,
)
from batteries import run_modular_battery


# ----------------------------------------------------------- demo fixture
def test_demo_case_shape(two_node):
    assert two_node.n_bus == 2
    assert two_node.n_gen == 1
    assert two_node.n_branch == 3
    assert two_node.total_load() == 60.0


def test_registry_tags_and_events(two_node):
    reg = ComponentRegistry.from_case(two_node)
    tags = sorted(c.tag for c in reg.all_components())
    assert tags == ["D01", "G01", "L01", "L02", "L03"]
    assert reg.line_trip_event(2) == "k2"
    demand = reg.load_component(2)
    assert demand is not None and reg.load_bus(demand) == 2
    assert reg.load_component(1) is None  # bus 1 carries no load
    comp, obj = reg.owner_of("k3")
    assert comp.tag == "L03" and obj == 3


def test_subsystem_members_cover_both_nodes(two_node):
    s1 = subsystem_members(two_node, 1)
    s2 = subsystem_members(two_node, 2)
    assert sorted(c.tag for c in s1.members) == ["D01", "G01", "L01", "L02", "L03"]
    assert sorted(c.tag for c in s2.members) == ["D01", "G01", "L01", "L02", "L03"]
    assert s1.neighbor_buses == (2,)


def test_two_node_plant_and_spec_counts(two_node):
    sub, plant = build_subsystem(two_node, 1)
    assert plant.n_states == 32
    sa = build_specification(plant)
    assert sa.spec.n_states == 31
    missing = set(plant.state_labels) - set(sa.spec.state_labels)
    assert missing == {"D01T|G01T|L01T|L02T|L03T"}


def test_pipeline_synthesis_removes_nothing(two_node):
    sub, plant = build_subsystem(two_node, 1)
    sa = build_specification(plant)
    sup = synthesize_modular(plant, sa, node=1, subsystem=sub)  # auto -> pipeline
    assert sup.method == "pipeline"
    assert sup.realization.realization.n_states == 31
    assert sup.realization.removed_states == ()


def test_forcible_synthesis_prunes_line_only_states(two_node):
    sub, plant = build_subsystem(two_node, 1)
    sa = build_specification(plant)
    sup = synthesize_modular(plant, sa, node=1, subsystem=sub, method="forcible")
    assert sup.realization.realization.n_states == 24
    removed = {lab for lab, _ in sup.realization.removed_states}
    assert "D01T|G01T|L01T|L02T|L03N" in removed
    assert len(removed) == 7
    # the pruned states are exactly those whose only normal members are lines:
    # no shed or redispatch remains to answer the final line trip
    for lab in removed:
        normals = [part for part in lab.split("|") if part.endswith("N")]
        assert normals and all(part.startswith("L") for part in normals)


def test_pipeline_vs_forcible_disagree_on_grid_subsystems(two_node):
    # the two methods differ exactly on the 7 line-only-normal states, so
    # equivalence of the attribute-rewrite shortcut fails on this plant
    sub, plant = build_subsystem(two_node, 1)
    sa = build_specification(plant)
    pipe = synthesize_modular(plant, sa, node=1, subsystem=sub, method="pipeline")
    strict = synthesize_modular(plant, sa, node=1, subsystem=sub, method="forcible")
    pipe_lang = language_upto(pipe.realization.realization, 5)
    strict_lang = language_upto(strict.realization.realization, 5)
    assert strict_lang < pipe_lang
    # strict synthesis refuses to enter the state where only line 3 is
    # normal: its trip cannot be preempted once shed and redispatch are gone
    witness = ("a1", "e1", "k1", "k2")
    assert witness in pipe_lang and witness not in strict_lang


def test_member_tracking_and_loss_of_track(two_node):
    sub, plant = build_subsystem(two_node, 1)
    sa = build_specification(plant)
    sup = synthesize_modular(plant, sa, node=1, subsystem=sub)
    sup.reset()
    sup.observe("k1")
    sup.observe("a1")
    assert sup.current == "D01N|G01T|L01T|L02N|L03N"
    assert sup.follow(("k1", "a1")) == sup.current
    sup.observe("k2")
    sup.observe("e1")
    with pytest.raises(ModularError):
        sup.observe("k3")  # would enter the all-tripped state


# ----------------------------------------------------------- conjunction
def test_conjunction_enabled_is_intersection(two_node):
    ctrl = build_node_supervisors(two_node)
    assert ctrl.uncovered == frozenset()
    ctrl.reset()
    pat0 = ctrl.pattern()
    assert "k1" in pat0.enabled and "f1" in pat0.enabled
    assert pat0.forced == frozenset()
    # drive to a threatened configuration: every member sees one normal left
    for e in ("a1", "e1", "k1", "k2"):
        ctrl.observe(e)
    pat = ctrl.pattern()
    assert "k3" not in pat.enabled  # both nodes veto the final line trip
    assert pat.forced == frozenset()  # nothing forcible is active any more
    stateless = conjunction(ctrl, ("a1", "e1", "k1", "k2"))
    assert stateless == pat


def test_conjunction_coverage_guard(two_node):
    ctrl = build_node_supervisors(two_node, nodes=[1])
    sub, plant = build_subsystem(two_node, 1)
    bogus = ConjunctionController(
        members=list(ctrl.members),
        global_alphabet=plant.alphabet | {"z9"},
        table=plant.table,
    )
    assert bogus.uncovered == {"z9"}


def test_forced_events_survive_conjunction(two_node):
    ctrl = build_node_supervisors(two_node)
    sub, plant = build_subsystem(two_node, 1)
    ok, violations = check_forced_consistency(ctrl, plant, bound=4)
    assert ok, violations


# ------------------------------------------------------------ closed loop
def test_closed_loop_contained_in_spec(two_node):
    ctrl = build_node_supervisors(two_node)
    sub, plant = build_subsystem(two_node, 1)
    sa = build_specification(plant)
    lang = closed_loop_language(ctrl, plant, 4)
    assert () in lang
    for s in lang:
        assert run(sa.spec, s) is not None
    assert ("a1", "e1", "k1", "k2") in lang
    assert ("a1", "e1", "k1", "k2", "k3") not in closed_loop_language(ctrl, plant, 5)


def test_verify_safety_strict_members_pass(two_node):
    strict = build_node_supervisors(two_node, method="forcible")
    sub, plant = build_subsystem(two_node, 1)
    sa = build_specification(plant)
    assert verify_safety(strict, plant, sa, bound=4)


def test_verify_safety_pipeline_members_leak(two_node):
    # pipeline members assume trips are preemptable even when no shed or
    # redispatch is left; the leak check must expose that assumption
    pipe = build_node_supervisors(two_node, method="pipeline")
    sub, plant = build_subsystem(two_node, 1)
    sa = build_specification(plant)
    assert not verify_safety(pipe, plant, sa, bound=6)


def test_conditional_decomposability_of_member_specs(two_node):
    sub1, plant1 = build_subsystem(two_node, 1)
    sa1 = build_specification(plant1)
    # a single automaton projected onto its own alphabet is itself
    assert check_conditional_decomposability([sa1.spec], bound=4)
    # splitting into component alphabets loses the all-tripped coupling:
    # each projection allows its own components to trip freely, and their
    # composition readmits the joint all-tripped string
    gen_events = {"a1", "b1", "c1"}
    rest = set(plant1.alphabet) - gen_events
    assert not check_conditional_decomposability(
        [sa1.spec], alphabets=[gen_events, rest], bound=6
    )
    with pytest.raises(ModularError):
        check_conditional_decomposability([])


# ------------------------------------------------------------ battery
def test_closed_loop_matches_composed_realizations_battery():
    checked, skipped = run_modular_battery(30, seed=17)
    assert checked == 30
    assert skipped < 30


# ------------------------------------------------------------ lazy form
def test_lazy_supervisor_matches_materialized_patterns(case30):
    reg = ComponentRegistry.from_case(case30)
    rng = np.random.Generator(np.random.PCG64(404))
    for node in (5, 11, 26):  # 9, 3 and 4 member components
        sub, plant = build_subsystem(case30, node, reg)
        sa = build_specification(plant)
        mat = synthesize_modular(plant, sa, node=node, subsystem=sub)
        lazy = LazyNodeSupervisor(node=node, subsystem=sub)
        assert lazy.alphabet == mat.alphabet
        mat.reset()
        lazy.reset()
        assert mat.pattern() == lazy.pattern()
        for _ in range(120):
            pat = mat.pattern()
            choices = sorted(pat.enabled)
            if not choices:
                break
            e = choices[int(rng.integers(0, len(choices)))]
            mat.observe(e)
            lazy.observe(e)
            assert mat.pattern() == lazy.pattern(), f"node {node} diverged on {e}"


def test_lazy_rejects_exiting_events(two_node):
    sub, _ = build_subsystem(two_node, 1)
    lazy = LazyNodeSupervisor(node=1, subsystem=sub)
    lazy.reset()
    for e in ("a1", "e1", "k1", "k2"):
        lazy.observe(e)
    with pytest.raises(ModularError):
        lazy.observe("k3")
    lazy.reset()
    with pytest.raises(ModularError):
        lazy.observe("g1")  # restoring a load that never tripped


# ------------------------------------------------------------ bundle
def test_save_controller_bundle_round_trip(tmp_path, two_node):
    ctrl = build_node_supervisors(two_node)
    manifest_path = save_controller_bundle(ctrl, tmp_path)
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    assert len(manifest["nodes"]) == 2
    for entry in manifest["nodes"]:
        assert entry["kind"] == "materialized"
        a, removed = read_automaton(tmp_path / entry["file"])
        assert a.n_states == entry["states"] == 31
        assert sorted(a.alphabet) == entry["alphabet"]


def test_bundle_lists_lazy_members(tmp_path, two_node):
    ctrl = build_node_supervisors(two_node, max_states=8)
    manifest_path = save_controller_bundle(ctrl, tmp_path)
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    for entry in manifest["nodes"]:
        assert entry["kind"] == "lazy"
        assert "file" not in entry
        assert entry["members"]


def test_build_node_supervisors_lazy_fallback(two_node):
    ctrl = build_node_supervisors(two_node, max_states=8)  # force the fallback
    assert all(isinstance(m, LazyNodeSupervisor) for m in ctrl.members)
    mat = build_node_supervisors(two_node)
    assert all(isinstance(m, ModularSupervisor) for m in mat.members)
    # both forms produce the same conjunction pattern along a shared string
    for s in [(), ("k1",), ("a1", "k1"), ("a1", "e1", "k1", "k2")]:
        assert conjunction(ctrl, s) == conjunction(mat, s)
