import itertools

import pytest

from btt import (
    Engine,
    EngineError,
    NodeKind,
    ReturnState,
    Scenario,
    TickError,
    control_step,
    parallel_step,
    render_memory_dump,
    render_trace_event,
    state_key,
)
from util import EXAMPLES, expand_path, expand_text

S, F, R, E = (ReturnState.SUCCESS, ReturnState.FAILURE,
              ReturnState.RUNNING, ReturnState.EMPTY)
ALL = (S, F, R, E)

SERIAL_KINDS = (NodeKind.SEQUENCE, NodeKind.SELECTOR, NodeKind.SKIPPER)
CONTINUE = {NodeKind.SEQUENCE: S, NodeKind.SELECTOR: F, NodeKind.SKIPPER: E}


def control_oracle(kind, results):
    """Independent statement of the continue-set rule: scan the full list,
    return the first result outside the set plus how many were consumed."""
    cont = CONTINUE[kind]
    for i, r in enumerate(results):
        if r != cont:
            return r, i + 1
    return cont, len(results)


def parallel_oracle(results):
    for state in (F, R, S):
        if any(r == state for r in results):
            return state
    return E


class CountingIter:
    def __init__(self, items):
        self.items = iter(items)
        self.consumed = 0

    def __iter__(self):
        return self

    def __next__(self):
        value = next(self.items)
        self.consumed += 1
        return value


def test_control_step_matches_oracle_exhaustively():
    for kind in SERIAL_KINDS:
        for k in (1, 2, 3):
            for results in itertools.product(ALL, repeat=k):
                want, want_consumed = control_oracle(kind, results)
                supplier = CountingIter(results)
                assert control_step(kind, supplier) is want
                assert supplier.consumed == want_consumed  # lazy short-circuit


def test_control_step_spec_rows():
    assert control_step(NodeKind.SEQUENCE, iter([S, S, S])) is S
    assert control_step(NodeKind.SKIPPER, iter([E, F])) is F


def test_parallel_step_matches_rule_order_oracle():
    for k in (1, 2, 3):
        for results in itertools.product(ALL, repeat=k):
            assert parallel_step(list(results)) is parallel_oracle(results)
    assert parallel_step([S, R]) is R
    assert parallel_step([E, E]) is E


# --- engine construction -------------------------------------------------

def latch_tree():
    return expand_path(EXAMPLES / "latch.yaml")


def test_init_seeds_state_keys():
    eng = Engine(latch_tree())
    state_keys = [k for k in eng.memory if k.startswith("__STATE__/")]
    assert sorted(state_keys) == sorted(
        state_key(n.name) for n in eng.tree.nodes)
    assert all(eng.memory[k] is E for k in state_keys)
    assert eng.tick_count == 0


def test_scenario_seeds_memory():
    eng = Engine(latch_tree(), scenario=Scenario(memory={"battery": 42}))
    assert eng.memory["battery"] == 42


def test_scenario_seed_may_override_state_keys():
    eng = Engine(latch_tree(), scenario=Scenario(memory={state_key("goto"): S}))
    assert eng.memory[state_key("goto")] is S


def test_unknown_scenario_action():
    with pytest.raises(EngineError) as exc:
        Engine(latch_tree(), scenario=Scenario(actions={"ghost": (S,)}))
    assert exc.value.code == "UNKNOWN_SCENARIO_ACTION"
    # naming a non-action node is also rejected
    with pytest.raises(EngineError):
        Engine(latch_tree(), scenario=Scenario(actions={"example/saved": (S,)}))


# --- ticking -------------------------------------------------------------

def test_single_action_tick():
    eng = Engine(expand_text("root: a\nnodes:\n  a: {type: action}\n"))
    result, events = eng.tick()
    assert result is S
    assert [(e.tick, e.node, e.result) for e in events] == [(1, "a", S)]


def test_latch_first_tick_event_order():
    # hand-simulated: guard EMPTY, child RUNNING, root RUNNING, in
    # completion order with the root last
    eng = Engine(latch_tree(), scenario=Scenario(actions={"goto": (R,)}))
    result, events = eng.tick()
    assert result is R
    assert [(e.node, e.result) for e in events] == [
        ("example/saved", E), ("goto", R), ("example", R)]


def test_latch_remembers_and_stops_ticking_child():
    eng = Engine(latch_tree(), scenario=Scenario(actions={"goto": (R, R, S)}))
    roots = [eng.tick()[0] for _ in range(5)]
    assert roots == [R, R, S, S, S]
    goto_events = [e for e in eng.trace if e.node == "goto"]
    assert len(goto_events) == 3
    assert eng.memory[state_key("goto")] is S


def test_condition_defaults():
    eng = Engine(expand_text("root: c\nnodes:\n  c: {type: condition, if: '1 < 2'}\n"))
    assert eng.tick()[0] is S
    assert eng.memory[state_key("c")] is S


def test_action_script_and_result():
    eng = Engine(expand_text(
        "root: a\nnodes:\n  a: {type: action, script: ['x := 1'], result: 'RUNNING'}\n"))
    assert eng.tick()[0] is R
    assert eng.memory["x"] == 1


def test_scenario_replaces_script_entirely():
    eng = Engine(
        expand_text("root: a\nnodes:\n  a: {type: action, script: ['x := 1']}\n"),
        scenario=Scenario(actions={"a": (F,)}),
    )
    assert eng.tick()[0] is F
    assert "x" not in eng.memory


def test_scenario_cursor_last_entry_repeats():
    eng = Engine(expand_text("root: a\nnodes:\n  a: {type: action}\n"),
                 scenario=Scenario(actions={"a": (R, S)}))
    assert [eng.tick()[0] for _ in range(4)] == [R, S, S, S]


def test_short_circuit_children_not_ticked():
    text = """
root: main
nodes:
  main:
    type: sequence
    children: [first, second]
  first: {type: action, result: "FAILURE"}
  second: {type: action}
"""
    eng = Engine(expand_text(text))
    result, events = eng.tick()
    assert result is F
    assert [e.node for e in events] == ["first", "main"]
    assert eng.memory[state_key("second")] is E  # untouched


def test_parallel_ticks_all_children():
    text = """
root: main
nodes:
  main:
    type: parallel
    children: [first, second]
  first: {type: action, result: "FAILURE"}
  second: {type: action}
"""
    eng = Engine(expand_text(text))
    result, events = eng.tick()
    assert result is F
    assert [e.node for e in events] == ["first", "second", "main"]


def test_runtime_error_names_node_and_tick():
    eng = Engine(expand_text(
        "root: c\nnodes:\n  c: {type: condition, if: 'missing == 1'}\n"))
    with pytest.raises(TickError) as exc:
        eng.tick()
    err = exc.value
    assert err.code == "RUNTIME_ERROR"
    assert err.node == "c"
    assert err.tick == 1
    assert "UNDEFINED_VARIABLE" in str(err)
    # the tick aborted: no state write for the failing node
    assert eng.memory[state_key("c")] is E
    assert eng.trace == []


def test_determinism():
    def run():
        eng = Engine(latch_tree(), scenario=Scenario(actions={"goto": (R, S)}))
        for _ in range(4):
            eng.tick()
        return ([render_trace_event(e) for e in eng.trace],
                render_memory_dump(eng.memory))

    assert run() == run()


def test_state_bookkeeping_matches_trace():
    eng = Engine(latch_tree(), scenario=Scenario(actions={"goto": (R, R, S)}))
    for _ in range(5):
        eng.tick()
    last = {}
    for e in eng.trace:
        last[e.node] = e.result
    for nd in eng.tree.nodes:
        expected = last.get(nd.name, E)
        assert eng.memory[state_key(nd.name)] is expected


def test_reset_tree_over_shared_memory_reenables_child():
    eng = Engine(latch_tree(), scenario=Scenario(actions={"goto": (S,)}))
    eng.tick()
    eng.tick()
    assert [e.node for e in eng.trace].count("goto") == 1  # latched

    reset_tree = expand_text(
        "root: unlatch\nnodes:\n  unlatch: {type: reset, args: {targets: [goto]}}\n")
    resetter = Engine(reset_tree, memory=eng.memory)
    assert resetter.tick()[0] is S
    assert eng.memory[state_key("goto")] is E

    eng.tick()
    assert [e.node for e in eng.trace].count("goto") == 2  # ticked again


def test_render_formats():
    from btt import TraceEvent

    assert render_trace_event(TraceEvent(3, "a/b", R)) == "3\ta/b\tRUNNING"
    dump = render_memory_dump({"b": 2, "a": True, "c": "x", "d": S})
    assert dump == "a = true\nb = 2\nc = x\nd = SUCCESS"
