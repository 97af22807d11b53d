"""Bundled 40-transition reference plan used as a golden replay fixture.

The plan is a known-good rollout stored in the standard transition-block
format. Replaying it end to end pins down the action semantics and the
canonical serialization at byte level: every ACTION must be applicable and
every NEXT STATE must match the simulator's output exactly.
"""

from __future__ import annotations

import re
from importlib import resources

from . import blocksworld as bw
from .dataset import Transition

_FIXTURE = "data/reference_plan.txt"
_SECTIONS = ("GOAL:", "STATE:", "ACTION:", "NEXT STATE:")


class FixtureMismatch(Exception):
    def __init__(self, transition: int, detail: str):
        super().__init__(f"transition {transition}: {detail}")
        self.transition = transition


def load_reference_plan() -> list[Transition]:
    text = (resources.files(__package__) / _FIXTURE).read_text(encoding="utf-8")
    blocks = re.split(r"^TRANSITION \d+\n", text, flags=re.M)[1:]
    plan = []
    for block in blocks:
        fields = {}
        current = None
        for line in block.split("\n"):
            if line in _SECTIONS:
                current = line
                fields[current] = []
            elif line and current:
                fields[current].append(line)
        plan.append(Transition(
            goal_text="\n".join(fields["GOAL:"]),
            state_text="\n".join(fields["STATE:"]),
            action_text="\n".join(fields["ACTION:"]),
            next_state_text="\n".join(fields["NEXT STATE:"]),
        ))
    return plan


def replay_transition(num: int, tr: Transition) -> None:
    """Check one transition; raises FixtureMismatch on any divergence."""
    try:
        state = bw.parse_state(tr.state_text)
        action = bw.parse_action(tr.action_text)
    except bw.ParseError as exc:
        raise FixtureMismatch(num, f"unparseable: {exc}")
    if bw.serialize_state(state) != tr.state_text:
        raise FixtureMismatch(num, "STATE is not in canonical form")
    if not bw.is_applicable(state, action):
        raise FixtureMismatch(num, f"{tr.action_text} not applicable")
    got = bw.serialize_state(bw.apply_action(state, action))
    if got != tr.next_state_text:
        raise FixtureMismatch(
            num, f"NEXT STATE mismatch:\nexpected:\n{tr.next_state_text}\ngot:\n{got}")


def replay_reference_plan(plan: list[Transition] | None = None) -> int:
    """Replay the whole plan; returns the number of verified transitions."""
    if plan is None:
        plan = load_reference_plan()
    goal = plan[0].goal_text
    expected_state = plan[0].state_text
    for num, tr in enumerate(plan, start=1):
        if tr.goal_text != goal:
            raise FixtureMismatch(num, "GOAL changed mid-plan")
        if tr.state_text != expected_state:
            raise FixtureMismatch(num, "STATE does not chain from previous "
                                       "NEXT STATE")
        replay_transition(num, tr)
        expected_state = tr.next_state_text
    if expected_state != goal:
        raise FixtureMismatch(len(plan), "plan does not end at the goal")
    return len(plan)
