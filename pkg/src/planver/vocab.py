"""Symbol-level vocabulary and the prompt/completion layout.

The closed vocabulary covers parens, predicate and action names, block names
up to a configured maximum, the four section markers, a section separator
(rendered as a blank line), PAD and EOS. Every canonical state or action
text tokenizes with zero unknowns, and detokenize(tokenize(t)) == t.
"""

from __future__ import annotations

import re

from . import blocksworld as bw

PAD_TOKEN = "<pad>"
EOS_TOKEN = "<eos>"
SEP_TOKEN = "<sep>"
MARKERS = ("GOAL:", "STATE:", "ACTION:", "NEXT STATE:")

# longest-match alternation: "NEXT STATE:" must beat "STATE:"
_LEX_RE = re.compile(r"NEXT STATE:|GOAL:|STATE:|ACTION:|[()]|[^\s()]+")


class UnknownSymbol(ValueError):
    def __init__(self, lexeme: str):
        super().__init__(f"unknown symbol {lexeme!r}")
        self.lexeme = lexeme


class ContextOverflow(ValueError):
    """Token sequence does not fit the model's context window."""


class Vocabulary:
    def __init__(self, max_blocks: int = 8):
        tokens = [PAD_TOKEN, EOS_TOKEN, SEP_TOKEN]
        tokens += list(MARKERS)
        tokens += ["(", ")"]
        tokens += sorted(bw.PREDICATES)
        tokens += sorted(bw.ACTIONS)
        tokens += bw.block_names(max_blocks)
        self.tokens = tokens
        self.ids = {t: i for i, t in enumerate(tokens)}
        self.max_blocks = max_blocks

    @classmethod
    def from_tokens(cls, tokens: list[str]) -> "Vocabulary":
        vocab = cls.__new__(cls)
        vocab.tokens = list(tokens)
        vocab.ids = {t: i for i, t in enumerate(tokens)}
        vocab.max_blocks = sum(1 for t in tokens if re.fullmatch(r"b\d+", t))
        return vocab

    def __len__(self) -> int:
        return len(self.tokens)

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.tokens == other.tokens

    @property
    def pad_id(self) -> int:
        return self.ids[PAD_TOKEN]

    @property
    def eos_id(self) -> int:
        return self.ids[EOS_TOKEN]

    @property
    def sep_id(self) -> int:
        return self.ids[SEP_TOKEN]

    def marker_id(self, marker: str) -> int:
        return self.ids[marker]

    def tokenize(self, text: str) -> list[int]:
        """Whitespace-normalizing lexer; inserts the separator before each
        section marker after the first lexeme."""
        ids = []
        for m in _LEX_RE.finditer(text):
            lex = m.group(0)
            if lex in MARKERS and ids:
                ids.append(self.sep_id)
            tok_id = self.ids.get(lex)
            if tok_id is None:
                raise UnknownSymbol(lex)
            ids.append(tok_id)
        return ids

    def detokenize(self, ids: list[int]) -> str:
        """Render ids back to canonical layout: one proposition per line,
        markers on their own line, separators as blank lines. Skips PAD,
        stops at the first EOS."""
        lines: list[str] = []
        line = ""
        for i in ids:
            tok = self.tokens[i]
            if tok == PAD_TOKEN:
                continue
            if tok == EOS_TOKEN:
                break
            if tok == SEP_TOKEN:
                if line:
                    lines.append(line)
                    line = ""
                lines.append("")
            elif tok in MARKERS:
                if line:
                    lines.append(line)
                    line = ""
                lines.append(tok)
            elif tok == "(":
                if line:
                    lines.append(line)
                line = "("
            elif tok == ")":
                line += ")"
                lines.append(line)
                line = ""
            else:
                if not line:
                    line = tok
                elif line.endswith("("):
                    line += tok
                else:
                    line += " " + tok
        if line:
            lines.append(line)
        return "\n".join(lines)


def build_prompt(vocab: Vocabulary, goal_text: str, state_text: str) -> list[int]:
    """GOAL: and STATE: sections, ending at the separator before ACTION:."""
    ids = vocab.tokenize(f"GOAL:\n{goal_text}\n\nSTATE:\n{state_text}")
    ids.append(vocab.sep_id)
    return ids


def build_completion(vocab: Vocabulary, action_text: str,
                     next_state_text: str) -> list[int]:
    """ACTION: and NEXT STATE: sections terminated by EOS."""
    ids = vocab.tokenize(f"ACTION:\n{action_text}\n\nNEXT STATE:\n{next_state_text}")
    ids.append(vocab.eos_id)
    return ids


def build_verifier_input(vocab: Vocabulary, state_text: str,
                         action_text: str) -> list[int]:
    """STATE: and ACTION: sections terminated by EOS; the classification
    head reads the contextual embedding at the final (EOS) position."""
    ids = vocab.tokenize(f"STATE:\n{state_text}\n\nACTION:\n{action_text}")
    ids.append(vocab.eos_id)
    return ids


def transition_block(goal_text: str, state_text: str, action_text: str,
                     next_state_text: str) -> str:
    """The human-readable four-section layout used in plan dumps."""
    return (f"GOAL:\n{goal_text}\n\nSTATE:\n{state_text}\n\n"
            f"ACTION:\n{action_text}\n\nNEXT STATE:\n{next_state_text}")
