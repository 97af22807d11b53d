"""Generator and verifier training: next-token loss masked to the completion,
binary cross-entropy on the classification head, Adam with linear warmup and
cosine decay, and line-delimited loss logs.

Determinism contract: equal (seed, config, corpus) gives bitwise-equal loss
logs and final weights on the same machine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict, replace

import numpy as np
import torch
import torch.nn.functional as F

from .dataset import Transition, VerifierExample
from .model import (ModelConfig, TransformerLM, VerifierModel,
                    init_generator_model, init_verifier_model)
from .vocab import Vocabulary, build_prompt, build_completion, \
    build_verifier_input, ContextOverflow


class DivergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 32
    epochs: int = 3
    lr: float = 3e-4
    warmup_steps: int = 50
    seed: int = 0
    context: int = 512
    grad_clip: float = 1.0
    full_sequence_loss: bool = False

    def __post_init__(self):
        if self.batch_size < 1 or self.epochs < 0 or self.lr <= 0:
            raise ValueError("batch_size, epochs, lr must be positive")
        if self.warmup_steps < 0:
            raise ValueError("warmup_steps must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)


TRAIN_PROFILES = {
    # from-scratch rates; cosine decay after linear warmup
    "desk-generator": TrainConfig(batch_size=32, epochs=3, lr=3e-4, warmup_steps=50),
    "desk-verifier": TrainConfig(batch_size=64, epochs=1, lr=1e-4, warmup_steps=20),
    # reference finetuning hyperparameters, preserved as named profiles
    "paper-generator": TrainConfig(batch_size=16, epochs=20, lr=5e-6, warmup_steps=50),
    "paper-verifier": TrainConfig(batch_size=8, epochs=1, lr=5e-6, warmup_steps=20),
}


# ---------------------------------------------------------------------------
# Encoding
# ---------------------------------------------------------------------------

def encode_lm_example(vocab: Vocabulary, tr: Transition, context: int):
    """(token ids, prompt length) for one transition; loss starts after the
    prompt."""
    prompt = build_prompt(vocab, tr.goal_text, tr.state_text)
    completion = build_completion(vocab, tr.action_text, tr.next_state_text)
    ids = prompt + completion
    if len(ids) > context:
        raise ContextOverflow(f"transition needs {len(ids)} tokens > {context}")
    return ids, len(prompt)


def encode_verifier_example(vocab: Vocabulary, ex: VerifierExample, context: int):
    ids = build_verifier_input(vocab, ex.state_text, ex.action_text)
    if len(ids) > context:
        raise ContextOverflow(f"example needs {len(ids)} tokens > {context}")
    return ids, 1.0 if ex.label == "valid" else 0.0


def _pad_batch(seqs: list[list[int]], pad_id: int) -> torch.Tensor:
    width = max(len(s) for s in seqs)
    out = torch.full((len(seqs), width), pad_id, dtype=torch.long)
    for i, s in enumerate(seqs):
        out[i, : len(s)] = torch.tensor(s, dtype=torch.long)
    return out


def lm_batch_tensors(encoded: list, pad_id: int, full_sequence: bool = False):
    """ids [B,T], plus a boolean mask over next-token targets covering the
    completion (or everything after the first token when full_sequence)."""
    ids = _pad_batch([e[0] for e in encoded], pad_id)
    B, T = ids.shape
    mask = torch.zeros(B, T - 1, dtype=torch.bool)
    for i, (seq, prompt_len) in enumerate(encoded):
        start = 1 if full_sequence else prompt_len
        mask[i, start - 1 : len(seq) - 1] = True
    return ids, mask


def lm_loss(model: TransformerLM, ids: torch.Tensor, mask: torch.Tensor):
    """Mean cross-entropy over masked target positions; also returns the
    masked next-token accuracy."""
    if not mask.any():
        raise ValueError("loss mask is empty: nothing to train on")
    logits = model(ids)[:, :-1]
    targets = ids[:, 1:]
    flat = logits.reshape(-1, logits.shape[-1])[mask.reshape(-1)]
    tgt = targets.reshape(-1)[mask.reshape(-1)]
    loss = F.cross_entropy(flat, tgt)
    acc = (flat.argmax(dim=-1) == tgt).float().mean()
    return loss, acc


def verifier_batch_tensors(encoded: list, pad_id: int):
    ids = _pad_batch([e[0] for e in encoded], pad_id)
    last = torch.tensor([len(e[0]) - 1 for e in encoded], dtype=torch.long)
    labels = torch.tensor([e[1] for e in encoded], dtype=torch.float)
    return ids, last, labels


def verifier_loss(model: VerifierModel, ids, last, labels):
    logits = model(ids, last)
    loss = F.binary_cross_entropy_with_logits(logits, labels)
    acc = ((logits > 0) == (labels > 0.5)).float().mean()
    return loss, acc


# ---------------------------------------------------------------------------
# Schedules and the shared loop
# ---------------------------------------------------------------------------

def lr_at(step: int, total_steps: int, cfg: TrainConfig) -> float:
    """Linear warmup to cfg.lr, then cosine decay to zero."""
    if cfg.warmup_steps and step < cfg.warmup_steps:
        return cfg.lr * (step + 1) / cfg.warmup_steps
    if total_steps <= cfg.warmup_steps:
        return cfg.lr
    progress = (step - cfg.warmup_steps) / (total_steps - cfg.warmup_steps)
    return cfg.lr * 0.5 * (1.0 + math.cos(math.pi * min(progress, 1.0)))


def _run_training(model, encoded, val_encoded, cfg: TrainConfig,
                  batch_loss_fn, pad_id: int):
    """Shuffled minibatch loop shared by both objectives.

    batch_loss_fn(model, batch_encoded) -> (loss, accuracy). Returns the
    log: one record per step (split "train") and one per epoch (split "val").
    """
    n = len(encoded)
    steps_per_epoch = (n + cfg.batch_size - 1) // cfg.batch_size
    total_steps = steps_per_epoch * cfg.epochs
    if cfg.warmup_steps > total_steps and cfg.epochs > 0:
        raise ValueError(
            f"warmup_steps {cfg.warmup_steps} exceeds total steps {total_steps}")
    log = []
    if cfg.epochs == 0:
        return log
    opt = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    shuffle_rng = np.random.default_rng([cfg.seed, 1])
    step = 0
    for epoch in range(cfg.epochs):
        model.train()
        perm = shuffle_rng.permutation(n)
        for b in range(steps_per_epoch):
            batch = [encoded[i] for i in perm[b * cfg.batch_size : (b + 1) * cfg.batch_size]]
            lr = lr_at(step, total_steps, cfg)
            for group in opt.param_groups:
                group["lr"] = lr
            loss, acc = batch_loss_fn(model, batch)
            if not torch.isfinite(loss):
                raise DivergenceError(f"non-finite loss at step {step}")
            opt.zero_grad()
            loss.backward()
            if cfg.grad_clip:
                torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.grad_clip)
            opt.step()
            log.append({"step": step, "split": "train",
                        "loss": float(loss.item()), "accuracy": float(acc.item())})
            step += 1
        if val_encoded:
            vloss, vacc = evaluate_batches(model, val_encoded, cfg.batch_size,
                                           batch_loss_fn)
            log.append({"step": step, "split": "val",
                        "loss": vloss, "accuracy": vacc})
    return log


def evaluate_batches(model, encoded, batch_size, batch_loss_fn):
    """Example-weighted mean loss/accuracy over a dataset."""
    model.eval()
    tot_loss = tot_acc = tot_n = 0.0
    with torch.no_grad():
        for b in range(0, len(encoded), batch_size):
            batch = encoded[b : b + batch_size]
            loss, acc = batch_loss_fn(model, batch)
            tot_loss += loss.item() * len(batch)
            tot_acc += acc.item() * len(batch)
            tot_n += len(batch)
    return tot_loss / tot_n, tot_acc / tot_n


# ---------------------------------------------------------------------------
# Entry points
# ---------------------------------------------------------------------------

def train_generator(transitions: list[Transition],
                    val_transitions: list[Transition],
                    vocab: Vocabulary, model_cfg: ModelConfig,
                    cfg: TrainConfig):
    """Returns (model, log). epochs=0 returns the seeded init unchanged."""
    if not transitions:
        raise ValueError("corpus is empty")
    model = init_generator_model(model_cfg, len(vocab), seed=cfg.seed)
    encoded = [encode_lm_example(vocab, t, cfg.context) for t in transitions]
    val_encoded = [encode_lm_example(vocab, t, cfg.context)
                   for t in val_transitions]

    def batch_loss(m, batch):
        ids, mask = lm_batch_tensors(batch, vocab.pad_id, cfg.full_sequence_loss)
        return lm_loss(m, ids, mask)

    log = _run_training(model, encoded, val_encoded, cfg, batch_loss,
                        vocab.pad_id)
    model.eval()
    return model, log


def train_verifier(init: str, examples: list[VerifierExample],
                   val_examples: list[VerifierExample], vocab: Vocabulary,
                   model_cfg: ModelConfig, cfg: TrainConfig,
                   generator: TransformerLM | None = None):
    """init="from_generator" copies the trained generator backbone;
    init="fresh" starts from random weights."""
    labels = {e.label for e in examples}
    if labels != {"valid", "invalid"}:
        raise ValueError(f"corpus must contain both labels, got {sorted(labels)}")
    if init == "from_generator":
        if generator is None:
            raise ValueError("init='from_generator' needs a generator model")
        model = init_verifier_model(model_cfg, len(vocab), seed=cfg.seed,
                                    backbone=generator)
    elif init == "fresh":
        model = init_verifier_model(model_cfg, len(vocab), seed=cfg.seed)
    else:
        raise ValueError(f"unknown init {init!r}")
    encoded = [encode_verifier_example(vocab, e, cfg.context) for e in examples]
    val_encoded = [encode_verifier_example(vocab, e, cfg.context)
                   for e in val_examples]

    def batch_loss(m, batch):
        ids, last, lab = verifier_batch_tensors(batch, vocab.pad_id)
        return verifier_loss(m, ids, last, lab)

    log = _run_training(model, encoded, val_encoded, cfg, batch_loss,
                        vocab.pad_id)
    model.eval()
    return model, log
