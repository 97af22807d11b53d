"""Offline corpora: random-exploring trajectories, generator transitions,
verifier positives/negatives, held-out test instances, and JSONL record IO.

Every random choice derives from (master seed, stream id, instance index), so
corpus content is identical no matter how the work is split across workers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from . import blocksworld as bw

# stream ids keep the train / validation / test / negative-sampling rngs disjoint
STREAM_TRAIN = 0
STREAM_VAL = 1
STREAM_TEST = 2
STREAM_VERIFIER_TRAIN = 5
STREAM_VERIFIER_VAL = 6


@dataclass(frozen=True)
class DataProfile:
    train_states: int
    val_states: int
    min_blocks: int
    max_blocks: int
    max_len: int
    test_count: int
    test_max_len: int


DATA_PROFILES = {
    # trains on CPU within the hour
    "desk": DataProfile(train_states=2000, val_states=200, min_blocks=3,
                        max_blocks=5, max_len=20, test_count=200,
                        test_max_len=30),
    # corpus shape of the original experiments (documented reference; the
    # matching compute budget is out of reach here)
    "paper": DataProfile(train_states=10000, val_states=6000, min_blocks=3,
                         max_blocks=8, max_len=20, test_count=200,
                         test_max_len=30),
    # smoke-test scale
    "mini": DataProfile(train_states=60, val_states=12, min_blocks=3,
                        max_blocks=4, max_len=12, test_count=8,
                        test_max_len=16),
}


class DecodeError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"{message} (line {line})")
        self.line = line


class EmptyActionPool(ValueError):
    """No eligible negative action exists for a verifier positive."""


@dataclass
class Trajectory:
    steps: list  # [(State, GroundedAction), ...]
    final: bw.State  # doubles as the goal

    def states(self) -> list:
        return [s for s, _ in self.steps] + [self.final]

    def __len__(self) -> int:
        return len(self.steps)

    def to_record(self) -> dict:
        return {
            "state_texts": [s.text() for s in self.states()],
            "action_texts": [a.text() for _, a in self.steps],
        }

    @classmethod
    def from_record(cls, rec: dict) -> "Trajectory":
        states = [bw.parse_state(t) for t in rec["state_texts"]]
        actions = [bw.parse_action(t) for t in rec["action_texts"]]
        return cls(list(zip(states[:-1], actions)), states[-1])


@dataclass
class Transition:
    goal_text: str
    state_text: str
    action_text: str
    next_state_text: str

    def to_record(self) -> dict:
        return {
            "goal_text": self.goal_text,
            "state_text": self.state_text,
            "action_text": self.action_text,
            "next_state_text": self.next_state_text,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "Transition":
        return cls(rec["goal_text"], rec["state_text"], rec["action_text"],
                   rec["next_state_text"])


@dataclass
class VerifierExample:
    state_text: str
    action_text: str
    label: str  # "valid" | "invalid"

    def to_record(self) -> dict:
        return {"state_text": self.state_text, "action_text": self.action_text,
                "label": self.label}

    @classmethod
    def from_record(cls, rec: dict) -> "VerifierExample":
        return cls(rec["state_text"], rec["action_text"], rec["label"])


@dataclass
class TestInstance:
    initial: bw.State
    goal: bw.State
    source_length: int

    def to_record(self) -> dict:
        return {
            "initial_text": self.initial.text(),
            "goal_text": self.goal.text(),
            "source_length": self.source_length,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "TestInstance":
        return cls(
            bw.parse_state(rec["initial_text"]),
            bw.parse_state(rec["goal_text"]),
            int(rec["source_length"]),
        )


def derived_rng(master_seed: int, stream: int, index: int) -> np.random.Generator:
    return np.random.default_rng([master_seed, stream, index])


# ---------------------------------------------------------------------------
# Trajectory exploration
# ---------------------------------------------------------------------------

def explore_trajectory(initial: bw.State, max_len: int,
                       rng: np.random.Generator) -> Trajectory:
    """Random walk that only takes actions leading to an unvisited state.

    Stops at max_len steps or when every applicable action revisits a state.
    May return a zero-step trajectory; callers discard those.
    """
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    visited = {initial.text()}
    steps = []
    state = initial
    while len(steps) < max_len:
        fresh = []
        for action in bw.applicable_actions(state):
            nxt = bw.apply_action(state, action)
            if nxt.text() not in visited:
                fresh.append((action, nxt))
        if not fresh:
            break
        action, nxt = fresh[int(rng.integers(0, len(fresh)))]
        steps.append((state, action))
        visited.add(nxt.text())
        state = nxt
    return Trajectory(steps, state)


def random_trajectory(master_seed: int, stream: int, index: int,
                      min_blocks: int, max_blocks: int,
                      max_len: int) -> Trajectory:
    """One seeded trajectory; retries the same rng until it has >= 1 step."""
    rng = derived_rng(master_seed, stream, index)
    while True:
        n = int(rng.integers(min_blocks, max_blocks + 1))
        traj = explore_trajectory(bw.random_initial_state(n, rng), max_len, rng)
        if len(traj) >= 1:
            return traj


def build_generator_corpus(trajectories: Iterable[Trajectory]) -> list[Transition]:
    """One transition per step, goal-conditioned on the trajectory's end state."""
    out = []
    for traj in trajectories:
        goal_text = traj.final.text()
        states = traj.states()
        for i, (state, action) in enumerate(traj.steps):
            out.append(Transition(
                goal_text=goal_text,
                state_text=state.text(),
                action_text=action.text(),
                next_state_text=states[i + 1].text(),
            ))
    return out


# ---------------------------------------------------------------------------
# Verifier corpus
# ---------------------------------------------------------------------------

def build_verifier_corpus(transitions: list[Transition],
                          negatives_per_positive: int = 1,
                          mode: str = "global",
                          rng: Optional[np.random.Generator] = None,
                          oracle_filter: bool = False) -> list[VerifierExample]:
    """Positive (state, action) pairs plus randomly drawn negative actions.

    Negatives are weak labels: a drawn action may actually be applicable.
    mode="global" draws from every distinct action text in the corpus;
    mode="instance-restricted" only from actions whose blocks all occur in
    the state. oracle_filter drops the accidentally-applicable negatives.
    """
    if not transitions:
        raise ValueError("transitions must be nonempty")
    if mode not in ("global", "instance-restricted"):
        raise ValueError(f"unknown mode {mode!r}")
    if rng is None:
        rng = np.random.default_rng(0)
    pool = sorted({t.action_text for t in transitions})
    pool_blocks = [frozenset(bw.parse_action(a).args) for a in pool]
    out = []
    for t in transitions:
        out.append(VerifierExample(t.state_text, t.action_text, "valid"))
        if mode == "global":
            eligible = [a for a in pool if a != t.action_text]
        else:
            universe = bw.parse_state(t.state_text).universe
            eligible = [a for a, blocks in zip(pool, pool_blocks)
                        if blocks <= universe and a != t.action_text]
        if not eligible:
            raise EmptyActionPool(
                f"no negative action available for state of {t.action_text}")
        state = bw.parse_state(t.state_text) if oracle_filter else None
        for _ in range(negatives_per_positive):
            neg = eligible[int(rng.integers(0, len(eligible)))]
            if oracle_filter:
                tries = 0
                while bw.is_applicable(state, bw.parse_action(neg)):
                    neg = eligible[int(rng.integers(0, len(eligible)))]
                    tries += 1
                    if tries > 200:
                        raise EmptyActionPool(
                            "could not draw an inapplicable negative")
            out.append(VerifierExample(t.state_text, neg, "invalid"))
    return out


def measure_label_noise(examples: list[VerifierExample]) -> float:
    """Fraction of "invalid"-labeled examples that are actually applicable."""
    bad = total = 0
    for ex in examples:
        if ex.label != "invalid":
            continue
        total += 1
        state = bw.parse_state(ex.state_text)
        if bw.is_applicable(state, bw.parse_action(ex.action_text)):
            bad += 1
    return bad / total if total else 0.0


# ---------------------------------------------------------------------------
# Test instances
# ---------------------------------------------------------------------------

def build_test_instance(master_seed: int, index: int, max_len: int,
                        min_blocks: int, max_blocks: int) -> TestInstance:
    """One seeded instance whose goal is drawn from the tail of a random walk.

    For a length-L walk the goal is state j for j uniform in
    {floor(L/2)+1, ..., L} (1-based, counting states after the initial one),
    so a non-trivial number of actions is needed. Walks with L < 2 are
    discarded and redrawn.
    """
    rng = derived_rng(master_seed, STREAM_TEST, index)
    while True:
        n = int(rng.integers(min_blocks, max_blocks + 1))
        traj = explore_trajectory(bw.random_initial_state(n, rng), max_len, rng)
        if len(traj) >= 2:
            break
    L = len(traj)
    j = int(rng.integers(L // 2 + 1, L + 1))
    return TestInstance(traj.steps[0][0], traj.states()[j], L)


def build_test_set(count: int, max_len: int, master_seed: int,
                   min_blocks: int, max_blocks: int) -> list[TestInstance]:
    if count < 1:
        raise ValueError("count must be >= 1")
    return [build_test_instance(master_seed, i, max_len, min_blocks, max_blocks)
            for i in range(count)]


# ---------------------------------------------------------------------------
# Record files (JSON lines)
# ---------------------------------------------------------------------------

def write_records(path, records: Iterable) -> int:
    """One JSON object per line; returns the number of lines written."""
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            obj = rec.to_record() if hasattr(rec, "to_record") else rec
            fh.write(json.dumps(obj, sort_keys=True) + "\n")
            n += 1
    return n


def read_records(path, record_cls=None) -> list:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DecodeError(f"bad JSON: {exc.msg}", lineno) from exc
            try:
                out.append(record_cls.from_record(obj) if record_cls else obj)
            except (KeyError, TypeError, ValueError) as exc:
                raise DecodeError(f"bad record: {exc}", lineno) from exc
    return out
