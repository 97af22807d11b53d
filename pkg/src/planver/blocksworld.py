"""Ground-truth Blocksworld: propositions, states, grounded actions, and the
canonical text format shared by every pipeline stage.

A state is a set of grounded propositions over a block universe. Four action
schemas (pickup, putdown, stack, unstack) move blocks between the table, the
tops of stacks, and a one-block gripper arm. Applying an action removes its
delete effects and adds its add effects; nothing else changes.

Canonical text: each proposition renders as ``(symbol arg1 arg2)``, one per
line, sorted by byte-wise lexicographic order of the rendered line. Note that
space sorts before ``-``, so ``(on b1 b3)`` precedes ``(on-table b2)``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, NamedTuple, Optional

import numpy as np

PREDICATES = {
    "arm-empty": 0,
    "clear": 1,
    "holding": 1,
    "on": 2,
    "on-table": 1,
}

ACTIONS = {
    "pickup": 1,
    "putdown": 1,
    "stack": 2,
    "unstack": 2,
}

_BLOCK_RE = re.compile(r"b[1-9][0-9]*$")


class ParseError(ValueError):
    """Malformed state/action text. Carries the byte offset of the fault."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class ArityError(ParseError):
    """Right symbol, wrong number of arguments."""


class InapplicableAction(Exception):
    """apply() was called on an action whose preconditions do not hold."""

    def __init__(self, action: "GroundedAction", missing: tuple["Proposition", ...]):
        super().__init__(
            f"{action.text()} inapplicable; missing "
            + " ".join(p.text() for p in missing)
        )
        self.action = action
        self.missing = missing


class Proposition(NamedTuple):
    symbol: str
    args: tuple[str, ...]

    def text(self) -> str:
        if self.args:
            return "({} {})".format(self.symbol, " ".join(self.args))
        return f"({self.symbol})"


def prop(symbol: str, *args: str) -> Proposition:
    return Proposition(symbol, tuple(args))


class GroundedAction(NamedTuple):
    name: str
    args: tuple[str, ...]

    def text(self) -> str:
        return "({} {})".format(self.name, " ".join(self.args))


@dataclass(frozen=True)
class State:
    """Immutable proposition set over a block universe.

    Parsed model output is representable even when physically impossible;
    use consistency_violations() to tell the two apart.
    """

    props: frozenset
    universe: frozenset

    def text(self) -> str:
        return serialize_state(self)

    def is_consistent(self) -> bool:
        return not self.consistency_violations()

    def consistency_violations(self) -> list[str]:
        """Check the physical-state invariants; empty list means consistent."""
        faults = []
        holding = [p.args[0] for p in self.props if p.symbol == "holding"]
        arm_empty = prop("arm-empty") in self.props
        if arm_empty == bool(holding) or len(holding) > 1:
            faults.append(
                f"arm: arm-empty={arm_empty} holding={sorted(holding)}"
            )
        on_pairs = [p.args for p in self.props if p.symbol == "on"]
        under = {}
        for x, y in on_pairs:
            if y in under:
                faults.append(f"two blocks on {y}")
            under[y] = x
        for b in sorted(self.universe):
            places = (
                [("table",)] * (prop("on-table", b) in self.props)
                + [("on", y) for x, y in on_pairs if x == b]
                + [("held",)] * (b in holding)
            )
            if len(places) != 1:
                faults.append(f"{b} occupies {len(places)} places")
            has_cover = b in under
            clear = prop("clear", b) in self.props
            if clear != (not has_cover and b not in holding):
                faults.append(f"clear({b}) wrong")
        # on-relation must be acyclic
        above = {y: x for x, y in on_pairs}
        for start in above:
            seen = set()
            cur = start
            while cur in above:
                if cur in seen:
                    faults.append(f"cycle through {start}")
                    break
                seen.add(cur)
                cur = above[cur]
        for p in self.props:
            for a in p.args:
                if a not in self.universe:
                    faults.append(f"{p.text()} references unknown block {a}")
        return faults


@dataclass(frozen=True)
class PlanningInstance:
    initial: State
    goal: State

    @property
    def universe(self) -> frozenset:
        return self.initial.universe


def make_state(props: Iterable[Proposition], universe: Iterable[str]) -> State:
    return State(frozenset(props), frozenset(universe))


# ---------------------------------------------------------------------------
# Action semantics
# ---------------------------------------------------------------------------

def preconditions(action: GroundedAction) -> tuple[Proposition, ...]:
    a = action.args
    if action.name == "pickup":
        return (prop("on-table", a[0]), prop("clear", a[0]), prop("arm-empty"))
    if action.name == "putdown":
        return (prop("holding", a[0]),)
    if action.name == "stack":
        return (prop("holding", a[0]), prop("clear", a[1]))
    if action.name == "unstack":
        return (prop("on", a[0], a[1]), prop("clear", a[0]), prop("arm-empty"))
    raise ValueError(f"unknown action schema {action.name}")


def add_effects(action: GroundedAction) -> tuple[Proposition, ...]:
    a = action.args
    if action.name == "pickup":
        return (prop("holding", a[0]),)
    if action.name == "putdown":
        return (prop("on-table", a[0]), prop("clear", a[0]), prop("arm-empty"))
    if action.name == "stack":
        return (prop("on", a[0], a[1]), prop("clear", a[0]), prop("arm-empty"))
    if action.name == "unstack":
        return (prop("holding", a[0]), prop("clear", a[1]))
    raise ValueError(f"unknown action schema {action.name}")


def delete_effects(action: GroundedAction) -> tuple[Proposition, ...]:
    a = action.args
    if action.name == "pickup":
        return (prop("on-table", a[0]), prop("clear", a[0]), prop("arm-empty"))
    if action.name == "putdown":
        return (prop("holding", a[0]),)
    if action.name == "stack":
        return (prop("holding", a[0]), prop("clear", a[1]))
    if action.name == "unstack":
        return (prop("on", a[0], a[1]), prop("clear", a[0]), prop("arm-empty"))
    raise ValueError(f"unknown action schema {action.name}")


@lru_cache(maxsize=64)
def _ground_all(universe: tuple[str, ...]) -> tuple[GroundedAction, ...]:
    blocks = sorted(universe)
    out = []
    for x in blocks:
        out.append(GroundedAction("pickup", (x,)))
        out.append(GroundedAction("putdown", (x,)))
    for x in blocks:
        for y in blocks:
            if x != y:
                out.append(GroundedAction("stack", (x, y)))
                out.append(GroundedAction("unstack", (x, y)))
    return tuple(out)


def ground_all_actions(universe: Iterable[str]) -> tuple[GroundedAction, ...]:
    """All legal groundings: 2n pickup/putdown plus 2n(n-1) stack/unstack."""
    return _ground_all(tuple(sorted(universe)))


def is_applicable(state: State, action: GroundedAction) -> bool:
    return all(p in state.props for p in preconditions(action))


def apply_action(state: State, action: GroundedAction) -> State:
    missing = tuple(p for p in preconditions(action) if p not in state.props)
    if missing:
        raise InapplicableAction(action, missing)
    props = (state.props - frozenset(delete_effects(action))) | frozenset(
        add_effects(action)
    )
    return State(props, state.universe)


def applicable_actions(state: State) -> list[GroundedAction]:
    return [a for a in ground_all_actions(state.universe) if is_applicable(state, a)]


def is_goal(state: State, goal: State) -> bool:
    return state.props == goal.props


# ---------------------------------------------------------------------------
# Canonical text
# ---------------------------------------------------------------------------

def serialize_state(state: State) -> str:
    return "\n".join(sorted(p.text() for p in state.props))


def serialize_action(action: GroundedAction) -> str:
    return action.text()


def _scan_groups(text: str):
    """Yield (offset, [parts]) for every parenthesized group in text."""
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c != "(":
            raise ParseError(f"expected '(' but found {c!r}", i)
        close = text.find(")", i + 1)
        if close < 0:
            raise ParseError("unclosed '('", i)
        inner = text[i + 1 : close]
        if "(" in inner:
            raise ParseError("nested '('", i + 1 + inner.index("("))
        parts = inner.split()
        if not parts:
            raise ParseError("empty group", i)
        yield i, parts
        i = close + 1


def _check_block_args(parts: list[str], offset: int) -> tuple[str, ...]:
    for a in parts[1:]:
        if not _BLOCK_RE.match(a):
            raise ParseError(f"bad block identifier {a!r}", offset)
    return tuple(parts[1:])


def parse_state(text: str, universe: Optional[Iterable[str]] = None) -> State:
    """Parse a newline/space separated proposition list.

    Does not require physical consistency: generated states must stay
    representable so hallucination can be measured. Universe defaults to the
    blocks mentioned in the text.
    """
    props = set()
    blocks = set()
    for offset, parts in _scan_groups(text):
        symbol = parts[0]
        if symbol not in PREDICATES:
            raise ParseError(f"unknown predicate {symbol!r}", offset)
        args = _check_block_args(parts, offset)
        if len(args) != PREDICATES[symbol]:
            raise ArityError(
                f"{symbol} takes {PREDICATES[symbol]} argument(s), got {len(args)}",
                offset,
            )
        props.add(Proposition(symbol, args))
        blocks.update(args)
    return State(frozenset(props), frozenset(universe) if universe is not None else frozenset(blocks))


def parse_action(text: str) -> GroundedAction:
    groups = list(_scan_groups(text))
    if len(groups) != 1:
        raise ParseError(f"expected exactly one action, got {len(groups)}", 0)
    offset, parts = groups[0]
    name = parts[0]
    if name not in ACTIONS:
        raise ParseError(f"unknown action {name!r}", offset)
    args = _check_block_args(parts, offset)
    if len(args) != ACTIONS[name]:
        raise ArityError(
            f"{name} takes {ACTIONS[name]} argument(s), got {len(args)}", offset
        )
    if len(args) == 2 and args[0] == args[1]:
        raise ParseError(f"{name} requires two distinct blocks", offset)
    return GroundedAction(name, args)


# ---------------------------------------------------------------------------
# Random instances
# ---------------------------------------------------------------------------

def block_names(num_blocks: int) -> list[str]:
    return [f"b{i}" for i in range(1, num_blocks + 1)]


def random_initial_state(num_blocks: int, rng: np.random.Generator) -> State:
    """Arm-empty state built by inserting blocks one at a time in a random
    order, each placed uniformly among the table and the tops of the existing
    stacks. Every configuration is reachable; the distribution over them is
    not uniform."""
    if num_blocks < 1:
        raise ValueError("num_blocks must be >= 1")
    names = block_names(num_blocks)
    order = rng.permutation(num_blocks)
    stacks: list[list[str]] = []
    for i in order:
        choice = int(rng.integers(0, len(stacks) + 1))
        if choice == 0:
            stacks.append([names[i]])
        else:
            stacks[choice - 1].append(names[i])
    return state_from_stacks(stacks, holding=None)


def state_from_stacks(stacks: list[list[str]], holding: Optional[str] = None) -> State:
    """Build a consistent state from bottom-to-top stack listings."""
    props = set()
    blocks = set([holding] if holding else [])
    for stack in stacks:
        props.add(prop("on-table", stack[0]))
        for below, above in zip(stack, stack[1:]):
            props.add(prop("on", above, below))
        props.add(prop("clear", stack[-1]))
        blocks.update(stack)
    if holding is None:
        props.add(prop("arm-empty"))
    else:
        props.add(prop("holding", holding))
    return State(frozenset(props), frozenset(blocks))
