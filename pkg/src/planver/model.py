"""Decoder-only transformer backbone, the verifier's classification head,
and the incremental decoding session used during generation.

Pre-norm blocks, learned positional embeddings, GELU feed-forward, untied
output projection. All weights are initialized from an explicit seeded
generator so two runs with the same seed build bitwise-identical models.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import torch
import torch.nn as nn
import torch.nn.functional as F

from .vocab import Vocabulary, build_verifier_input, ContextOverflow


class ShapeMismatch(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    n_layers: int = 4
    n_heads: int = 4
    d_model: int = 128
    context: int = 512

    def __post_init__(self):
        if self.d_model % self.n_heads:
            raise ValueError("d_model must be divisible by n_heads")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


MODEL_PROFILES = {
    # trains on CPU in minutes
    "desk": ModelConfig(n_layers=4, n_heads=4, d_model=128, context=512),
    # geometry of the original finetuned model, kept for reference only
    "paper-gpt2": ModelConfig(n_layers=12, n_heads=12, d_model=768, context=1024),
    # small enough for finite-difference gradient checking
    "tiny": ModelConfig(n_layers=2, n_heads=2, d_model=16, context=64),
}


class CausalBlock(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.n_heads = cfg.n_heads
        self.d_head = cfg.d_model // cfg.n_heads
        self.ln1 = nn.LayerNorm(cfg.d_model)
        self.attn_qkv = nn.Linear(cfg.d_model, 3 * cfg.d_model)
        self.attn_proj = nn.Linear(cfg.d_model, cfg.d_model)
        self.ln2 = nn.LayerNorm(cfg.d_model)
        self.mlp_fc1 = nn.Linear(cfg.d_model, 4 * cfg.d_model)
        self.mlp_fc2 = nn.Linear(4 * cfg.d_model, cfg.d_model)

    def _split_heads(self, t: torch.Tensor) -> torch.Tensor:
        B, S, _ = t.shape
        return t.view(B, S, self.n_heads, self.d_head).transpose(1, 2)

    def _qkv(self, xn: torch.Tensor):
        q, k, v = self.attn_qkv(xn).chunk(3, dim=-1)
        return self._split_heads(q), self._split_heads(k), self._split_heads(v)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        q, k, v = self._qkv(self.ln1(x))
        y = F.scaled_dot_product_attention(q, k, v, is_causal=x.shape[1] > 1)
        B, S, D = x.shape
        x = x + self.attn_proj(y.transpose(1, 2).reshape(B, S, D))
        return x + self.mlp_fc2(F.gelu(self.mlp_fc1(self.ln2(x))))

    def forward_collect(self, x: torch.Tensor):
        """Full causal pass that also returns this block's (k, v)."""
        q, k, v = self._qkv(self.ln1(x))
        y = F.scaled_dot_product_attention(q, k, v, is_causal=x.shape[1] > 1)
        B, S, D = x.shape
        x = x + self.attn_proj(y.transpose(1, 2).reshape(B, S, D))
        return x + self.mlp_fc2(F.gelu(self.mlp_fc1(self.ln2(x)))), k, v

    def step(self, x: torch.Tensor, kbuf: torch.Tensor, vbuf: torch.Tensor,
             used: int) -> torch.Tensor:
        """One-token pass; appends this token's k/v into the cache buffers."""
        q, k, v = self._qkv(self.ln1(x))
        kbuf[:, :, used : used + 1] = k
        vbuf[:, :, used : used + 1] = v
        att = (q @ kbuf[:, :, : used + 1].transpose(-1, -2)) / math.sqrt(self.d_head)
        y = torch.softmax(att, dim=-1) @ vbuf[:, :, : used + 1]
        B, S, D = x.shape
        x = x + self.attn_proj(y.transpose(1, 2).reshape(B, S, D))
        return x + self.mlp_fc2(F.gelu(self.mlp_fc1(self.ln2(x))))

    def attention_probs(self, x: torch.Tensor) -> torch.Tensor:
        """Causal attention matrix for diagnostics, [B, H, S, S]."""
        q, k, v = self._qkv(self.ln1(x))
        att = (q @ k.transpose(-1, -2)) / math.sqrt(self.d_head)
        S = x.shape[1]
        mask = torch.triu(torch.ones(S, S, dtype=torch.bool, device=x.device), 1)
        return torch.softmax(att.masked_fill(mask, float("-inf")), dim=-1)


class TransformerLM(nn.Module):
    def __init__(self, cfg: ModelConfig, vocab_size: int):
        super().__init__()
        self.cfg = cfg
        self.vocab_size = vocab_size
        self.tok_emb = nn.Embedding(vocab_size, cfg.d_model)
        self.pos_emb = nn.Embedding(cfg.context, cfg.d_model)
        self.blocks = nn.ModuleList(CausalBlock(cfg) for _ in range(cfg.n_layers))
        self.ln_f = nn.LayerNorm(cfg.d_model)
        self.lm_head = nn.Linear(cfg.d_model, vocab_size, bias=False)

    def _embed(self, ids: torch.Tensor) -> torch.Tensor:
        if ids.dim() != 2:
            raise ShapeMismatch(f"expected [batch, seq], got {tuple(ids.shape)}")
        T = ids.shape[1]
        if T > self.cfg.context:
            raise ShapeMismatch(f"sequence length {T} > context {self.cfg.context}")
        pos = torch.arange(T, device=ids.device)
        return self.tok_emb(ids) + self.pos_emb(pos)

    def hidden(self, ids: torch.Tensor) -> torch.Tensor:
        x = self._embed(ids)
        for block in self.blocks:
            x = block(x)
        return self.ln_f(x)

    def forward(self, ids: torch.Tensor) -> torch.Tensor:
        return self.lm_head(self.hidden(ids))

    def attention_maps(self, ids: torch.Tensor) -> list[torch.Tensor]:
        x = self._embed(ids)
        maps = []
        for block in self.blocks:
            maps.append(block.attention_probs(x))
            x = block(x)
        return maps


class VerifierModel(nn.Module):
    """Backbone plus a 2-layer perceptron over the final token's embedding."""

    def __init__(self, cfg: ModelConfig, vocab_size: int):
        super().__init__()
        self.backbone = TransformerLM(cfg, vocab_size)
        self.head_fc1 = nn.Linear(cfg.d_model, cfg.d_model)
        self.head_fc2 = nn.Linear(cfg.d_model, 1)

    def forward(self, ids: torch.Tensor, last_pos: torch.Tensor) -> torch.Tensor:
        """Validity logits, one per row; last_pos indexes each row's final
        content token (trailing PAD is ignored by construction)."""
        h = self.backbone.hidden(ids)
        rows = torch.arange(ids.shape[0], device=ids.device)
        pooled = h[rows, last_pos]
        return self.head_fc2(F.gelu(self.head_fc1(pooled))).squeeze(-1)


# ---------------------------------------------------------------------------
# Seeded initialization
# ---------------------------------------------------------------------------

def _init_params(module: nn.Module, gen: torch.Generator, init_std: float = 0.02):
    with torch.no_grad():
        for m in module.modules():
            if isinstance(m, nn.Linear):
                m.weight.normal_(0.0, init_std, generator=gen)
                if m.bias is not None:
                    m.bias.zero_()
            elif isinstance(m, nn.Embedding):
                m.weight.normal_(0.0, init_std, generator=gen)
            elif isinstance(m, nn.LayerNorm):
                m.weight.fill_(1.0)
                m.bias.zero_()


def init_generator_model(cfg: ModelConfig, vocab_size: int, seed: int) -> TransformerLM:
    model = TransformerLM(cfg, vocab_size)
    gen = torch.Generator().manual_seed(seed)
    _init_params(model, gen)
    return model


def init_verifier_model(cfg: ModelConfig, vocab_size: int, seed: int,
                        backbone: TransformerLM | None = None) -> VerifierModel:
    """Fresh verifier; the final head layer starts at zero so an untrained
    verifier scores exactly 0.5. backbone weights are copied when given."""
    model = VerifierModel(cfg, vocab_size)
    gen = torch.Generator().manual_seed(seed)
    _init_params(model, gen)
    with torch.no_grad():
        model.head_fc2.weight.zero_()
        model.head_fc2.bias.zero_()
    if backbone is not None:
        model.backbone.load_state_dict(backbone.state_dict())
    return model


# ---------------------------------------------------------------------------
# Inference helpers
# ---------------------------------------------------------------------------

class DecodeSession:
    """Single-sequence incremental decoding with a preallocated KV cache."""

    def __init__(self, model: TransformerLM, prompt_ids: list[int]):
        if not prompt_ids:
            raise ShapeMismatch("empty prompt")
        if len(prompt_ids) > model.cfg.context:
            raise ContextOverflow(
                f"prompt length {len(prompt_ids)} > context {model.cfg.context}")
        self.model = model
        cfg = model.cfg
        p = next(model.parameters())
        self.kbuf = [
            torch.zeros(1, cfg.n_heads, cfg.context, cfg.d_model // cfg.n_heads,
                        dtype=p.dtype)
            for _ in range(cfg.n_layers)
        ]
        self.vbuf = [torch.zeros_like(k) for k in self.kbuf]
        self.used = 0
        with torch.no_grad():
            ids = torch.tensor([prompt_ids], dtype=torch.long)
            x = model._embed(ids)
            for i, block in enumerate(model.blocks):
                x, k, v = block.forward_collect(x)
                self.kbuf[i][:, :, : k.shape[2]] = k
                self.vbuf[i][:, :, : v.shape[2]] = v
            self.used = len(prompt_ids)
            self._last_logits = model.lm_head(model.ln_f(x[:, -1:]))[0, -1]

    @property
    def logits(self) -> torch.Tensor:
        """Next-token logits at the current position."""
        return self._last_logits

    def append(self, token_id: int) -> torch.Tensor:
        if self.used >= self.model.cfg.context:
            raise ContextOverflow(f"context {self.model.cfg.context} exhausted")
        with torch.no_grad():
            ids = torch.tensor([[token_id]], dtype=torch.long)
            pos = torch.tensor([self.used], dtype=torch.long)
            x = self.model.tok_emb(ids) + self.model.pos_emb(pos)
            for i, block in enumerate(self.model.blocks):
                x = block.step(x, self.kbuf[i], self.vbuf[i], self.used)
            self.used += 1
            self._last_logits = self.model.lm_head(self.model.ln_f(x))[0, -1]
        return self._last_logits


def classify(verifier: VerifierModel, vocab: Vocabulary, state_text: str,
             action_text: str) -> float:
    """Probability that the action is valid in the state."""
    ids = build_verifier_input(vocab, state_text, action_text)
    if len(ids) > verifier.backbone.cfg.context:
        raise ContextOverflow(
            f"verifier input {len(ids)} > context {verifier.backbone.cfg.context}")
    with torch.no_grad():
        batch = torch.tensor([ids], dtype=torch.long)
        last = torch.tensor([len(ids) - 1], dtype=torch.long)
        logit = verifier(batch, last)[0]
        return torch.sigmoid(logit).item()
