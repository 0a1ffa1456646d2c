"""Tests for agent validation, models, dependencies, and update operators."""

import random

import pytest

from agentlog.agents import (
    AgentSpec,
    AgentState,
    EnvChange,
    agent_model,
    dependency,
    message_payload,
    update_env,
    update_input,
    validate_agent,
)
from agentlog.logic import Clause, GroundProgram, Literal, atom, stable_models_bruteforce

a, b, c, d, e, f = (atom(x) for x in "abcdef")


def clause(head, *body):
    return Clause(head, tuple(Literal(x) for x in body))


def agent1():
    idb = GroundProgram.of([clause(a, b, c), clause(f, a)], [c, b])
    return AgentSpec("A1", idb, frozenset([c]), frozenset([b]), AgentState(frozenset([c])))


def agent2():
    idb = GroundProgram.of([clause(b, a, d), clause(b, e)], [d, e, a])
    return AgentSpec("A2", idb, frozenset([d, e]), frozenset([a]), AgentState(frozenset([d, e])))


def test_validate_wellformed_agents():
    assert validate_agent(agent1()) == []
    assert validate_agent(agent2()) == []


def test_validate_hin_hbe_overlap():
    spec = AgentSpec("X", GroundProgram.of([], [a]), frozenset([a]), frozenset([a]))
    assert any("overlap" in v for v in validate_agent(spec))


def test_validate_input_atom_as_head():
    spec = AgentSpec("X", GroundProgram.of([Clause(b)]), frozenset(), frozenset([b]))
    assert any("heads" in v for v in validate_agent(spec))


def test_validate_cyclic_idb():
    spec = AgentSpec("X", GroundProgram.of([clause(a, b), clause(b, a)]))
    assert any("acyclic" in v for v in validate_agent(spec))


def test_agent_model_demo_states():
    assert agent_model(agent2(), AgentState(frozenset([d, e]))) == {b, d, e}
    assert agent_model(agent1(), AgentState(frozenset([c]), frozenset([b]))) == {a, b, c, f}


def test_agent_model_empty_state():
    idb = GroundProgram.of([clause(a, b)], [b])
    spec = AgentSpec("X", idb, frozenset(), frozenset([b]))
    assert agent_model(spec, AgentState()) == frozenset()


def test_dependency_both_directions():
    a1, a2 = agent1(), agent2()
    assert dependency(a1, a2) == {b}
    assert dependency(a2, a1) == {a}


def test_dependency_unrelated_agents():
    x = AgentSpec("X", GroundProgram.of([Clause(a)]))
    y = AgentSpec("Y", GroundProgram.of([Clause(b)]))
    assert dependency(x, y) == frozenset()


def test_message_payload():
    assert message_payload(frozenset([b, d, e]), frozenset([b])) == {b}
    assert message_payload(frozenset(), frozenset([b])) == frozenset()


def test_update_input_basic():
    sp = atom("sp", "A2", "A2", 0)
    dep = frozenset(atom("sp", "A2", y, dd) for y in ("A2", "A5") for dd in range(3))
    assert update_input(frozenset(), dep, frozenset([sp])) == {sp}


def test_update_input_noop():
    assert update_input(frozenset([a]), frozenset(), frozenset()) == {a}


def test_update_input_retracts_stale_claims():
    # A4 right before point 7 of the divergence run: the fresh claim set
    # from A1 replaces the whole sp(A1,_,_) slice.
    sp = lambda *args: atom("sp", *args)
    indb = frozenset([sp("A5", "A5", 0)])
    dep = frozenset(sp("A1", y, dd) for y in ("A1", "A2", "A3", "A5") for dd in range(21))
    payload = frozenset([sp("A1", "A1", 0), sp("A1", "A5", 2)])
    assert update_input(indb, dep, payload) == {
        sp("A5", "A5", 0),
        sp("A1", "A1", 0),
        sp("A1", "A5", 2),
    }


def test_update_input_rejects_foreign_payload():
    with pytest.raises(ValueError):
        update_input(frozenset(), frozenset([a]), frozenset([b]))


def test_update_input_idempotent():
    rng = random.Random(7)
    pool = [atom(f"x{i}") for i in range(8)]
    for _ in range(50):
        indb = frozenset(x for x in pool if rng.random() < 0.5)
        dep = frozenset(x for x in pool if rng.random() < 0.5)
        payload = frozenset(x for x in dep if rng.random() < 0.5)
        once = update_input(indb, dep, payload)
        assert update_input(once, dep, payload) == once


def test_update_env_demo():
    assert update_env(frozenset([d, e]), EnvChange(frozenset(), frozenset([e])), frozenset([d, e])) == {d}


def test_update_env_ignores_unsensed_change():
    change = EnvChange(frozenset([a]), frozenset([b]))
    assert update_env(frozenset([c]), change, frozenset([c])) == {c}


def test_update_env_link_failure():
    l12, l14 = atom("link", "A1", "A2"), atom("link", "A1", "A4")
    change = EnvChange(frozenset(), frozenset([l12]))
    assert update_env(frozenset([l12, l14]), change, frozenset([l12, l14])) == {l14}


def test_update_env_senses_exactly_the_change():
    rng = random.Random(11)
    pool = [atom(f"x{i}") for i in range(8)]
    for _ in range(50):
        hbe = frozenset(x for x in pool if rng.random() < 0.6)
        edb = frozenset(x for x in hbe if rng.random() < 0.5)
        t = frozenset(x for x in pool if rng.random() < 0.3)
        fset = frozenset(x for x in pool if x not in t and rng.random() < 0.3)
        change = EnvChange(t, fset)
        new = update_env(edb, change, hbe)
        assert new <= hbe
        assert new & change.touched & hbe == t & hbe


def test_env_change_rejects_overlap():
    with pytest.raises(ValueError):
        EnvChange(frozenset([a]), frozenset([a]))


def test_agent_model_matches_bruteforce():
    for spec, state in (
        (agent1(), AgentState(frozenset([c]), frozenset([b]))),
        (agent2(), AgentState(frozenset([d]), frozenset([a]))),
    ):
        program = spec.idb.with_facts(state.edb | state.indb)
        models = stable_models_bruteforce(program)
        assert models == [agent_model(spec, state)]
