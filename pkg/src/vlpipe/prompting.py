"""Conversation template rendering with video placeholder tokens.

The wire format interleaves instruction text with 256 patch placeholders
and T frame placeholders:

    ### <system message>
    ### Human: <instruction> <p_1> ... <p_256> <f_1> ... <f_T>
    ### Assistant: <reply>
    ...
    ### Assistant:

Placeholders appear only in the first Human turn; a bare "### Assistant:"
terminator is appended when the record ends on a Human turn (generation
mode).  At embedding time the 256 + T placeholder positions are filled by
the projected video rows in order: patch rows into p-slots, per-frame
global rows into f-slots.  A single image is a video with T = 1.

Lines are LF-separated with no trailing whitespace; turn contents must be
non-empty and must not start a line with "### ", which keeps rendering
injective and re-parsable.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Sequence

from .errors import CapacityError, ParseError
from .features import N_PATCHES

HUMAN = "Human"
ASSISTANT = "Assistant"
SEQUENCE_BUDGET = 2048


@dataclass
class PromptRecord:
    """System message plus alternating (speaker, content) turns for T frames."""

    system_message: str
    turns: list[tuple[str, str]]
    t: int = 1

    def __post_init__(self):
        if self.t < 1:
            raise ValueError(f"t must be >= 1, got {self.t}")
        if not self.turns:
            raise ValueError("turns must be non-empty")
        for i, (speaker, content) in enumerate(self.turns):
            expected = HUMAN if i % 2 == 0 else ASSISTANT
            if speaker != expected:
                raise ValueError(
                    f"turn {i} must be {expected}, got {speaker!r}: speakers "
                    f"alternate starting with {HUMAN}"
                )
            if not content:
                raise ValueError(f"turn {i} has empty content")
        for text in [self.system_message] + [c for _, c in self.turns]:
            for line in text.split("\n"):
                if line.startswith("### "):
                    raise ValueError("content lines must not start with '### '")


def _placeholder_block(t: int) -> str:
    patches = " ".join(f"<p_{i}>" for i in range(1, N_PATCHES + 1))
    frames = " ".join(f"<f_{j}>" for j in range(1, t + 1))
    return patches + " " + frames


def render_prompt(
    record: PromptRecord,
    tokenizer: Callable[[str], Sequence[str]] | None = None,
    budget: int = SEQUENCE_BUDGET,
) -> str:
    """Render a record to the wire format.

    When a tokenizer is supplied the rendered text is counted against the
    sequence budget and a CapacityError is raised if it does not fit.
    """
    lines = ["### " + record.system_message]
    for i, (speaker, content) in enumerate(record.turns):
        if i == 0:
            lines.append(f"### {HUMAN}: {content} {_placeholder_block(record.t)}")
        else:
            lines.append(f"### {speaker}: {content}")
    if record.turns[-1][0] == HUMAN:
        lines.append(f"### {ASSISTANT}:")
    rendered = "\n".join(lines)
    if tokenizer is not None:
        report = token_budget_check(rendered, tokenizer, budget)
        if not report.within:
            raise CapacityError(
                f"rendered prompt is {report.count} tokens, budget {report.budget}"
            )
    return rendered


_PLACEHOLDER_SUFFIX = re.compile(
    r"^(?P<content>.*?) (?P<patches><p_1> (?:<p_\d+> )*<p_256>)"
    r" (?P<frames><f_1>(?: <f_\d+>)*)$",
    re.DOTALL,
)


def parse_prompt(text: str) -> PromptRecord:
    """Recover (system, turns, T) from rendered text; inverse of render_prompt."""
    lines = text.split("\n")
    if not lines or not lines[0].startswith("### "):
        raise ParseError("prompt must start with a '### ' system line")
    system_parts = [lines[0][4:]]
    turns: list[tuple[str, str]] = []
    t = None
    in_system = True
    for line in lines[1:]:
        if line == f"### {ASSISTANT}:":
            break  # generation terminator
        human_prefix = f"### {HUMAN}: "
        assistant_prefix = f"### {ASSISTANT}: "
        if line.startswith(human_prefix):
            in_system = False
            turns.append((HUMAN, line[len(human_prefix):]))
        elif line.startswith(assistant_prefix):
            in_system = False
            turns.append((ASSISTANT, line[len(assistant_prefix):]))
        elif in_system:
            system_parts.append(line)
        elif turns:
            speaker, content = turns[-1]
            turns[-1] = (speaker, content + "\n" + line)
        else:
            raise ParseError(f"unattached line: {line!r}")
    if not turns:
        raise ParseError("no turns found")
    match = _PLACEHOLDER_SUFFIX.match(turns[0][1])
    if not match:
        raise ParseError("first Human turn is missing the placeholder block")
    patch_count = match.group("patches").count("<p_")
    if patch_count != N_PATCHES:
        raise ParseError(f"expected {N_PATCHES} patch placeholders, found {patch_count}")
    t = match.group("frames").count("<f_")
    turns[0] = (HUMAN, match.group("content"))
    return PromptRecord(system_message="\n".join(system_parts), turns=turns, t=t)


@dataclass
class TokenBudgetReport:
    count: int
    budget: int
    within: bool


def token_budget_check(
    rendered: str,
    tokenizer: Callable[[str], Sequence[str]],
    budget: int = SEQUENCE_BUDGET,
) -> TokenBudgetReport:
    """Count tokens under the supplied tokenizer and compare to the budget."""
    if budget <= 0:
        raise ValueError(f"budget must be > 0, got {budget}")
    count = len(tokenizer(rendered))
    return TokenBudgetReport(count=count, budget=budget, within=count <= budget)


def whitespace_tokenizer(text: str) -> list[str]:
    return text.split()


def char_tokenizer(text: str) -> list[str]:
    return list(text)
