"""Nucleus sampling, transition generation, and the two planning loops:
up-to-k independent rollouts without gating, and the verifier-gated variant
that restarts from the initial state whenever a transition is rejected.

Each rollout attempt draws its randomness from a seed derived from
(instance seed, attempt index), so a k=8 run's rollouts are exactly the
first eight rollouts of a k=25 run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import blocksworld as bw
from .model import DecodeSession, TransformerLM, VerifierModel, classify
from .vocab import Vocabulary, build_prompt, ContextOverflow, MARKERS

GREEDY_TEMPERATURE = 1e-9  # below the 1e-6 cutoff: plain argmax

TERM_GOAL = "goal-matched"
TERM_LENGTH = "length-exceeded"
TERM_REJECT = "verifier-rejected"
TERM_PARSE = "parse-failed"


class GenerationParseError(ValueError):
    """The sampled completion does not decode to (action, next state)."""


@dataclass(frozen=True)
class SamplingParams:
    temperature: float = 1.0
    top_p: float = 0.99
    max_completion_tokens: int = 160

    def __post_init__(self):
        if not (math.isfinite(self.temperature) and self.temperature > 0):
            raise ValueError(f"temperature must be finite positive, "
                             f"got {self.temperature}")
        if not 0 < self.top_p <= 1:
            raise ValueError(f"top_p must be in (0, 1], got {self.top_p}")
        if self.max_completion_tokens < 1:
            raise ValueError("max_completion_tokens must be >= 1")


@dataclass(frozen=True)
class InferenceConfig:
    k: int = 25
    l_max: int = 40
    sampling: SamplingParams = field(default_factory=SamplingParams)
    verifier_threshold: float = 0.5

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.l_max < 1:
            raise ValueError(f"l_max must be >= 1, got {self.l_max}")


@dataclass
class PlanAttempt:
    transitions: list  # [(action_text, generated next_state_text), ...]
    termination: str   # one of the TERM_* constants

    def actions(self) -> list[str]:
        return [a for a, _ in self.transitions]


@dataclass
class PlanResult:
    plan: list[str] | None
    attempts_used: int
    attempts: list[PlanAttempt]

    def first_goal_attempt(self) -> int | None:
        """1-based index of the first goal-matched rollout, if any."""
        for i, att in enumerate(self.attempts, start=1):
            if att.termination == TERM_GOAL:
                return i
        return None


# ---------------------------------------------------------------------------
# Token sampling
# ---------------------------------------------------------------------------

def sample_token(logits, params: SamplingParams, rng: np.random.Generator) -> int:
    """Temperature-scaled nucleus sampling. The retained support is the
    smallest descending-probability prefix with cumulative mass >= top_p
    (inclusive rule), renormalized before the draw."""
    z = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise ValueError("logits must be finite")
    if params.temperature < 1e-6:
        return int(np.argmax(z))
    z = z / params.temperature
    z -= z.max()
    probs = np.exp(z)
    probs /= probs.sum()
    order = np.argsort(-probs, kind="stable")
    csum = np.cumsum(probs[order])
    cut = min(int(np.searchsorted(csum, params.top_p)) + 1, len(order))
    support = order[:cut]
    kept = probs[support]
    kept /= kept.sum()
    return int(support[rng.choice(cut, p=kept)])


# ---------------------------------------------------------------------------
# Transition generation
# ---------------------------------------------------------------------------

def _split_completion(vocab: Vocabulary, text: str):
    """Split decoded completion text at its section markers."""
    lines = text.split("\n")
    if not lines or lines[0] != "ACTION:":
        raise GenerationParseError(f"completion does not start with ACTION:: "
                                   f"{text[:80]!r}")
    try:
        ns_idx = lines.index("NEXT STATE:")
    except ValueError:
        raise GenerationParseError("completion has no NEXT STATE: section")
    for i, line in enumerate(lines[1:], start=1):
        if line in MARKERS and i != ns_idx:
            raise GenerationParseError(f"unexpected section marker {line!r}")
    action_text = "\n".join(l for l in lines[1:ns_idx] if l)
    next_state_text = "\n".join(l for l in lines[ns_idx + 1 :] if l)
    return action_text, next_state_text


def generate_transition(model: TransformerLM, vocab: Vocabulary,
                        goal_text: str, state_text: str,
                        params: SamplingParams,
                        rng: np.random.Generator) -> tuple[str, str]:
    """Sample (action_text, next_state_text) for a goal/state prompt.

    The generated next state is returned verbatim (it may disagree with the
    simulator; hallucination is measured downstream, never corrected here).
    """
    prompt = build_prompt(vocab, goal_text, state_text)
    if len(prompt) + params.max_completion_tokens > model.cfg.context:
        raise ContextOverflow(
            f"prompt {len(prompt)} + budget {params.max_completion_tokens} "
            f"> context {model.cfg.context}")
    session = DecodeSession(model, prompt)
    out: list[int] = []
    logits = session.logits
    for _ in range(params.max_completion_tokens):
        tok = sample_token(logits.numpy(), params, rng)
        if tok == vocab.eos_id:
            break
        out.append(tok)
        logits = session.append(tok)
    else:
        raise GenerationParseError("token budget exhausted before EOS")
    action_text, next_state_text = _split_completion(vocab, vocab.detokenize(out))
    try:
        bw.parse_action(action_text)
        bw.parse_state(next_state_text)
    except bw.ParseError as exc:
        raise GenerationParseError(str(exc)) from exc
    return action_text, next_state_text


def make_generator_fn(model: TransformerLM, vocab: Vocabulary,
                      params: SamplingParams):
    """Bind model and sampling params into gen_fn(goal, state, rng)."""

    def gen_fn(goal_text: str, state_text: str, rng: np.random.Generator):
        return generate_transition(model, vocab, goal_text, state_text,
                                   params, rng)

    return gen_fn


# ---------------------------------------------------------------------------
# Gates
# ---------------------------------------------------------------------------

def oracle_gate(state_text: str, action_text: str, next_state_text: str) -> bool:
    """Ground-truth transition validity: the action must be applicable and
    the generated next state must be exactly the simulator's successor.
    Diagnostic upper bound for the learned verifier."""
    try:
        state = bw.parse_state(state_text)
        action = bw.parse_action(action_text)
    except bw.ParseError:
        return False
    if not bw.is_applicable(state, action):
        return False
    return bw.serialize_state(bw.apply_action(state, action)) == next_state_text


def make_learned_gate(verifier: VerifierModel, vocab: Vocabulary,
                      threshold: float = 0.5):
    """Gate that accepts when classify(state, action) >= threshold."""

    def gate(state_text: str, action_text: str, next_state_text: str) -> bool:
        return classify(verifier, vocab, state_text, action_text) >= threshold

    return gate


def verifier_gate(verifier_or_oracle, state_text: str, action_text: str,
                  threshold: float = 0.5, *, vocab: Vocabulary | None = None,
                  next_state_text: str = "") -> bool:
    """Single-call form: pass "oracle" for ground truth (which also checks
    the generated next state), or a VerifierModel plus its vocabulary."""
    if verifier_or_oracle == "oracle":
        return oracle_gate(state_text, action_text, next_state_text)
    return classify(verifier_or_oracle, vocab, state_text, action_text) >= threshold


# ---------------------------------------------------------------------------
# Planning loops
# ---------------------------------------------------------------------------

def _attempt_rng(seed_seq: np.random.SeedSequence, attempt: int):
    child = np.random.SeedSequence(entropy=seed_seq.entropy,
                                   spawn_key=seed_seq.spawn_key + (attempt,))
    return np.random.default_rng(child)


def _rollout(gen_fn, goal_text: str, initial_text: str, l_max: int,
             rng: np.random.Generator, gate_fn=None) -> PlanAttempt:
    if initial_text == goal_text:
        return PlanAttempt([], TERM_GOAL)
    transitions = []
    state = initial_text
    while len(transitions) < l_max:
        try:
            action, nxt = gen_fn(goal_text, state, rng)
        except GenerationParseError:
            return PlanAttempt(transitions, TERM_PARSE)
        transitions.append((action, nxt))
        if gate_fn is not None and not gate_fn(state, action, nxt):
            return PlanAttempt(transitions, TERM_REJECT)
        if nxt == goal_text:
            return PlanAttempt(transitions, TERM_GOAL)
        state = nxt
    return PlanAttempt(transitions, TERM_LENGTH)


def _plan_at_k(gen_fn, initial_text, goal_text, cfg: InferenceConfig,
               seed_seq, gate_fn=None) -> PlanResult:
    attempts = []
    for i in range(cfg.k):
        rng = _attempt_rng(seed_seq, i)
        att = _rollout(gen_fn, goal_text, initial_text, cfg.l_max, rng, gate_fn)
        attempts.append(att)
        if att.termination == TERM_GOAL:
            return PlanResult(att.actions(), i + 1, attempts)
    return PlanResult(None, cfg.k, attempts)


def plan_generator_at_k(gen_fn, initial_text: str, goal_text: str,
                        cfg: InferenceConfig,
                        seed_seq: np.random.SeedSequence) -> PlanResult:
    """Up to k independent rollouts; propose the first one whose generated
    state text equals the goal text."""
    return _plan_at_k(gen_fn, initial_text, goal_text, cfg, seed_seq)


def plan_generator_verifier_at_k(gen_fn, gate_fn, initial_text: str,
                                 goal_text: str, cfg: InferenceConfig,
                                 seed_seq: np.random.SeedSequence) -> PlanResult:
    """Like plan_generator_at_k, but every transition must pass the gate;
    a rejection aborts the rollout and a fresh attempt restarts from the
    initial state, consuming one of the k attempts."""
    return _plan_at_k(gen_fn, initial_text, goal_text, cfg, seed_seq, gate_fn)
