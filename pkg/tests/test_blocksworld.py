import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from planver import blocksworld as bw
from planver.fixtures import load_reference_plan


def all_table_state(n):
    return bw.state_from_stacks([[b] for b in bw.block_names(n)])


# ---------------------------------------------------------------------------
# grounding
# ---------------------------------------------------------------------------

def test_ground_all_one_block():
    actions = bw.ground_all_actions(["b1"])
    assert {a.text() for a in actions} == {"(pickup b1)", "(putdown b1)"}


@pytest.mark.parametrize("n,expected", [(1, 2), (3, 18), (4, 32)])
def test_ground_all_counts(n, expected):
    actions = bw.ground_all_actions(bw.block_names(n))
    assert len(actions) == expected
    assert len(set(actions)) == expected
    # closed-form confirmed by enumeration
    assert expected == 2 * n + 2 * n * (n - 1)


def test_ground_all_args_distinct():
    for a in bw.ground_all_actions(bw.block_names(4)):
        if a.name in ("stack", "unstack"):
            assert a.args[0] != a.args[1]


# ---------------------------------------------------------------------------
# applicability and application
# ---------------------------------------------------------------------------

def test_fixture_transition1_applicable():
    tr = load_reference_plan()[0]
    state = bw.parse_state(tr.state_text)
    assert bw.is_applicable(state, bw.parse_action("(unstack b1 b4)"))


def test_pickup_requires_empty_arm():
    state = bw.state_from_stacks([["b1"], ["b3"]], holding="b2")
    assert not bw.is_applicable(state, bw.parse_action("(pickup b1)"))


def test_all_table_applicable_set():
    state = all_table_state(3)
    texts = {a.text() for a in bw.applicable_actions(state)}
    assert texts == {"(pickup b1)", "(pickup b2)", "(pickup b3)"}


def test_holding_applicable_set():
    state = bw.state_from_stacks([["b2"], ["b3"]], holding="b1")
    texts = {a.text() for a in bw.applicable_actions(state)}
    assert texts == {"(putdown b1)", "(stack b1 b2)", "(stack b1 b3)"}


def test_applicable_matches_bruteforce_on_fixture_state():
    state = bw.parse_state(load_reference_plan()[0].state_text)
    brute = {a for a in bw.ground_all_actions(state.universe)
             if all(p in state.props for p in bw.preconditions(a))}
    assert set(bw.applicable_actions(state)) == brute
    assert bw.GroundedAction("unstack", ("b1", "b4")) in brute


def test_apply_matches_fixture_transitions():
    plan = load_reference_plan()
    for tr in plan[:2]:
        state = bw.parse_state(tr.state_text)
        nxt = bw.apply_action(state, bw.parse_action(tr.action_text))
        assert bw.serialize_state(nxt) == tr.next_state_text


def test_pickup_putdown_inverse():
    state = all_table_state(3)
    there = bw.apply_action(state, bw.parse_action("(pickup b1)"))
    back = bw.apply_action(there, bw.parse_action("(putdown b1)"))
    assert back.props == state.props


def test_apply_raises_on_inapplicable():
    state = all_table_state(2)
    with pytest.raises(bw.InapplicableAction):
        bw.apply_action(state, bw.parse_action("(putdown b1)"))


def test_is_goal():
    plan = load_reference_plan()
    goal = bw.parse_state(plan[0].goal_text)
    assert bw.is_goal(goal, goal)
    last = bw.parse_state(plan[-1].next_state_text)
    assert bw.is_goal(last, goal)
    smaller = bw.State(frozenset(list(goal.props)[1:]), goal.universe)
    assert not bw.is_goal(smaller, goal)


# ---------------------------------------------------------------------------
# serialization / parsing
# ---------------------------------------------------------------------------

def test_goal_serialization_exact():
    goal = bw.parse_state(load_reference_plan()[0].goal_text)
    assert bw.serialize_state(goal) == (
        "(arm-empty)\n(clear b1)\n(clear b2)\n(on b1 b3)\n(on b3 b4)\n"
        "(on-table b2)\n(on-table b4)")


def test_empty_state_serializes_empty():
    assert bw.serialize_state(bw.State(frozenset(), frozenset())) == ""


def test_serialization_is_sorted_and_roundtrips_fixture():
    plan = load_reference_plan()
    texts = {tr.goal_text for tr in plan}
    texts |= {tr.state_text for tr in plan}
    texts |= {tr.next_state_text for tr in plan}
    for text in texts:
        lines = text.split("\n")
        assert all(a <= b for a, b in zip(lines, lines[1:]))
        assert bw.serialize_state(bw.parse_state(text)) == text


def test_on_sorts_before_on_table():
    state = bw.parse_state("(on-table b2)\n(on b1 b3)")
    assert bw.serialize_state(state).startswith("(on b1 b3)")


def test_parse_action():
    action = bw.parse_action("(unstack b1 b4)")
    assert action == bw.GroundedAction("unstack", ("b1", "b4"))
    assert bw.serialize_action(action) == "(unstack b1 b4)"


def test_parse_action_arity():
    with pytest.raises(bw.ArityError):
        bw.parse_action("(pickup)")
    with pytest.raises(bw.ArityError):
        bw.parse_action("(pickup b1 b2)")


def test_parse_action_rejects_duplicate_args():
    with pytest.raises(bw.ParseError):
        bw.parse_action("(stack b1 b1)")


def test_parse_state_set_semantics():
    state = bw.parse_state("(clear b1)\n(clear b1)")
    assert state.props == frozenset({bw.prop("clear", "b1")})


def test_parse_errors_carry_offsets():
    with pytest.raises(bw.ParseError) as err:
        bw.parse_state("(arm-empty)\njunk")
    assert err.value.offset == 12
    with pytest.raises(bw.ParseError):
        bw.parse_state("(teleport b1)")
    with pytest.raises(bw.ParseError):
        bw.parse_state("(clear blockA)")
    with pytest.raises(bw.ParseError):
        bw.parse_state("(clear b1")


def test_parse_state_accepts_inconsistent():
    state = bw.parse_state("(holding b1)\n(arm-empty)\n(on-table b1)")
    assert not state.is_consistent()
    assert any("arm" in v for v in state.consistency_violations())


# ---------------------------------------------------------------------------
# random states
# ---------------------------------------------------------------------------

def test_single_block_state_is_unique():
    for seed in range(5):
        state = bw.random_initial_state(1, np.random.default_rng(seed))
        assert bw.serialize_state(state) == "(arm-empty)\n(clear b1)\n(on-table b1)"


def test_random_states_are_consistent():
    rng = np.random.default_rng(7)
    for _ in range(200):
        n = int(rng.integers(1, 9))
        state = bw.random_initial_state(n, rng)
        assert state.consistency_violations() == []
        assert len(state.universe) == n


def enumerate_arm_empty_states(n):
    """Brute-force oracle: every way to cut every permutation into stacks."""
    blocks = bw.block_names(n)
    seen = {}
    for perm in itertools.permutations(blocks):
        for cuts in itertools.product([False, True], repeat=n - 1):
            stacks, cur = [], [perm[0]]
            for block, cut in zip(perm[1:], cuts):
                if cut:
                    stacks.append(cur)
                    cur = [block]
                else:
                    cur.append(block)
            stacks.append(cur)
            state = bw.state_from_stacks(stacks)
            seen[bw.serialize_state(state)] = state
    return seen


def test_three_block_configuration_coverage():
    oracle = enumerate_arm_empty_states(3)
    assert len(oracle) == 13
    rng = np.random.default_rng(123)
    sampled = {bw.serialize_state(bw.random_initial_state(3, rng))
               for _ in range(10_000)}
    assert sampled == set(oracle)


def test_random_state_deterministic_given_seed():
    a = bw.random_initial_state(6, np.random.default_rng(42))
    b = bw.random_initial_state(6, np.random.default_rng(42))
    assert a.props == b.props


# ---------------------------------------------------------------------------
# invariant fuzz (the larger budget lives in the acceptance suite)
# ---------------------------------------------------------------------------

@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(1, 6),
       steps=st.integers(1, 30))
def test_apply_preserves_consistency(seed, n, steps):
    rng = np.random.default_rng(seed)
    state = bw.random_initial_state(n, rng)
    for _ in range(steps):
        actions = bw.applicable_actions(state)
        if not actions:
            break
        state = bw.apply_action(state, actions[int(rng.integers(len(actions)))])
        assert state.consistency_violations() == []


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(2, 5))
def test_inapplicable_actions_always_raise(seed, n):
    rng = np.random.default_rng(seed)
    state = bw.random_initial_state(n, rng)
    for action in bw.ground_all_actions(state.universe):
        if bw.is_applicable(state, action):
            bw.apply_action(state, action)
        else:
            with pytest.raises(bw.InapplicableAction):
                bw.apply_action(state, action)
