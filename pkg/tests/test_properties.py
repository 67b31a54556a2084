"""Invariants checked over generated models and configurations."""

import networkx as nx
import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from gcps.analysis import ratio_series
from gcps.dsl import ParseError, parse_model, serialize_model
from gcps.engine import BACKENDS, Halted, Mode, RunSpec, make_rng, propensities, run
from gcps.engine.compiled import activations, compile_model
from gcps.engine.core import step_maximally_parallel_detailed
from gcps.model import (
    PopulationProtocol,
    RuleNotApplicable,
    Transition,
    applicable_rules,
    apply_rule,
    gcps_to_pp,
    pp_to_gcps,
)
from gcps.odelimit import derive_odes, odes_to_gcps, validate_population_ode
from gcps.stategraph import StateSpaceTooLarge, build_state_graph, terminal_sccs

from strategies import closed_models, configurations, open_models, population_odes

ALL_MODES = list(Mode)


@st.composite
def model_and_state(draw, models=open_models()):
    m = draw(models)
    return m, draw(configurations(m.n_cells))


@given(model_and_state())
def test_applicable_iff_apply_succeeds(ms):
    m, u = ms
    ok = []
    for r in range(len(m.rules)):
        try:
            v = apply_rule(m, u, r)
        except RuleNotApplicable:
            continue
        ok.append(r)
        assert all(n >= 0 for n in v.token_counts())
    assert ok == applicable_rules(m, u)


@given(model_and_state())
def test_propensity_zero_iff_inapplicable(ms):
    m, u = ms
    a = propensities(m, u)
    app = set(applicable_rules(m, u))
    for r, rule in enumerate(m.rules):
        h = a[r] / rule.constant
        assert (h > 0) == (r in app)


@given(model_and_state(closed_models()))
def test_closed_rules_conserve_tokens(ms):
    m, u = ms
    for r in applicable_rules(m, u):
        assert apply_rule(m, u, r).total() == u.total()


@given(closed_models(max_tokens=30), st.sampled_from(ALL_MODES), st.integers(0, 2**32))
def test_closed_runs_conserve_tokens(m, mode, seed):
    steps = 20 if mode is Mode.MAXIMALLY_PARALLEL else 300
    t = run(m, None, RunSpec(mode, max_steps=steps, seed=seed))
    totals = t.cell_counts().sum(axis=1)
    assert (totals == m.initial.total()).all()
    assert (t.states >= 0).all()


@given(open_models(), st.sampled_from([Mode.FS_CONCENTRATION_DIRECT,
                                       Mode.FS_CONCENTRATION_FIRST_REACTION]),
       st.integers(0, 2**32))
def test_ssa_times_increase_and_events_replay(m, mode, seed):
    t = run(m, None, RunSpec(mode, max_steps=200, seed=seed))
    assert (np.diff(t.times) > 0).all()
    delta = compile_model(m).delta
    for row in range(1, len(t)):
        assert (t.states[row] - t.states[row - 1] == delta[t.rules[row]]).all()


@pytest.mark.skipif("cython" not in BACKENDS, reason="compiled kernel not built")
@given(open_models(), st.sampled_from([m for m in ALL_MODES if m is not Mode.MAXIMALLY_PARALLEL]),
       st.integers(0, 2**32), st.sampled_from(["all", 3, "final"]))
def test_backends_agree(m, mode, seed, record):
    spec = RunSpec(mode, max_steps=500, seed=seed, record=record)
    assert run(m, None, spec, backend="python") == run(m, None, spec, backend="cython")


@given(model_and_state(closed_models(max_tokens=30)), st.integers(0, 2**32))
def test_maximally_parallel_is_non_extensible(ms, seed):
    m, u = ms
    cm = compile_model(m)
    try:
        _, fired = step_maximally_parallel_detailed(m, u, make_rng(seed))
    except Halted:
        assert applicable_rules(m, u) == []
        return
    left = cm.to_vector(u)
    for r in fired:
        for s in cm.src[r]:
            if s >= 0:
                left[s] -= 1
    assert (left >= 0).all()
    assert all(activations(int(s0), int(s1), left) == 0 for s0, s1 in cm.src)


@given(open_models())
def test_serialize_round_trip(m):
    text = serialize_model(m)
    again = parse_model(text)
    assert again == m
    assert serialize_model(again) == text


@given(st.lists(st.sampled_from([
    "@alphabet tok", "@cells 2", "@output 1", "rule (tok,1)(tok,2) -> (tok,2)(tok,1)",
    "rule (tok,9)(tok,1) -> (tok,1)(tok,1)", "@init 1: tok=x", "garbage", "", "# note",
    "@env nope", "rule (tok,1)(tok,1) -> (tok,1)", "@cells two"]), max_size=8))
def test_parse_errors_have_line_numbers(lines):
    text = "\n".join(lines)
    try:
        parse_model(text)
    except ParseError as exc:
        assert 1 <= exc.line <= max(1, len(lines))
        assert str(exc).startswith(f"line {exc.line}")


@given(st.integers(1, 4), st.data())
def test_protocol_round_trip(n, data):
    states = tuple(f"s{q}" for q in range(n))
    state = st.sampled_from(states)
    delta = tuple(Transition(data.draw(state), data.draw(state), data.draw(state),
                             data.draw(state), data.draw(st.sampled_from([0.5, 1.0, 2.0])))
                  for _ in range(data.draw(st.integers(0, 6))))
    p = PopulationProtocol(states, states, {s: s for s in states}, {s: 1 for s in states}, delta)
    population = {s: data.draw(st.integers(0, 5)) for s in states}
    assume(sum(population.values()) >= 2)
    m, u = pp_to_gcps(p, population)
    assert u.total() == sum(population.values())
    back = gcps_to_pp(m)
    assert back.delta == p.delta


@given(closed_models())
def test_closed_derivation_conserves_total(m):
    s = derive_odes(m)
    check = validate_population_ode(s)
    assert check.conserves_total and check.total_derivative == {}
    pairs = [(r.i, r.j) for r in m.rules]
    if len(set(pairs)) == len(pairs):
        assert check.valid
    y = np.arange(1.0, m.n_cells + 1)
    assert abs(s.rhs(y).sum()) <= 1e-9 * max(1.0, np.abs(s.rhs(y)).max())


@given(population_odes())
def test_synthesis_round_trip(s):
    assert derive_odes(odes_to_gcps(s)) == s


@given(closed_models(max_cells=3, max_tokens=8))
def test_state_graph_invariants(m):
    try:
        g = build_state_graph(m, max_nodes=2000)
    except StateSpaceTooLarge:
        return
    assert {sum(g.cell_counts(v)) for v in range(g.n_nodes)} == {m.initial.total()}
    for v in g.halting_nodes():
        assert applicable_rules(m, g.configuration(v)) == []
    scc = terminal_sccs(g)
    cond = nx.DiGraph(list(scc.condensation_edges))
    assert nx.is_directed_acyclic_graph(cond)
    leaving = {a for a, _ in scc.condensation_edges}
    assert scc.terminal == [c not in leaving for c in range(len(scc.components))]


@given(st.lists(st.tuples(st.integers(0, 50), st.integers(0, 50)), min_size=1, max_size=20))
def test_ratio_in_unit_interval(rows):
    r = ratio_series(np.array(rows), [1], [1, 2])
    ok = r.values[~r.flagged]
    assert ((ok >= 0) & (ok <= 1)).all()
    assert (r.flagged == (np.array(rows).sum(axis=1) == 0)).all()


@given(model_and_state(), st.integers(0, 2**32))
def test_runs_are_deterministic(ms, seed):
    m, u = ms
    spec = RunSpec(Mode.FS_EQUIPROBABLE, max_steps=100, seed=seed)
    assert run(m, u, spec) == run(m, u, spec)

