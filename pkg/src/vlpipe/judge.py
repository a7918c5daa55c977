"""Chat-model-as-judge protocol for question answering.

A judge receives (question, correct answer, predicted answer), replies with
a brace-delimited mapping carrying a yes/no correctness call and a 0-5
score, and corpus metrics aggregate the verdicts into an accuracy and a
mean score.  The templates ask for an integer score but real judges emit
reals (the canonical example reply is itself 4.8), so the parser accepts
both and clamps into [0, 5].

Besides the plain correctness prompt there are five aspect-focused prompt
builders (correctness, detail orientation, contextual understanding,
temporal understanding, consistency).  The aspect wording is authored for
this repository, not taken from any upstream protocol; see README.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import ParseError
from .jsonish import find_brace_spans, parse_mapping

QA_JUDGE_SYSTEM = (
    "You are an intelligent chatbot designed for evaluating the correctness "
    "of generative outputs for question-answer pairs.\n"
    "Your task is to compare the predicted answer with the correct answer "
    "and determine if they match meaningfully. Here is how you can "
    "accomplish the task:\n"
    "------\n"
    "## INSTRUCTIONS:\n"
    "- Focus on the meaningful match between the predicted answer and the "
    "correct answer.\n"
    "- Consider synonyms or paraphrases as valid matches.\n"
    "- Evaluate the correctness of the prediction compared to the answer."
)

QA_JUDGE_USER_TEMPLATE = (
    "Please evaluate the following video-based question-answer pair:\n"
    "\n"
    "Question: {question}\n"
    "Correct Answer: {answer}\n"
    "Predicted Answer: {pred}\n"
    "\n"
    "Provide your evaluation only as a yes/no and score where the score is "
    "an integer value between 0 and 5, with 5 indicating the highest "
    "meaningful match.\n"
    "Please generate the response in the form of a Python dictionary string "
    "with keys 'pred' and 'score', where value of 'pred' is a string of "
    "'yes' or 'no' and value of 'score' is in INTEGER, not STRING.\n"
    "DO NOT PROVIDE ANY OTHER OUTPUT TEXT OR EXPLANATION. Only provide the "
    "Python dictionary string.\n"
    "For example, your response should look like this: "
    "{'pred': 'yes', 'score': 4.8}."
)

ASPECTS = ("COR", "DO", "CU", "TU", "CON")

_ASPECT_NAMES = {
    "COR": "correctness",
    "DO": "detail orientation",
    "CU": "contextual understanding",
    "TU": "temporal understanding",
    "CON": "consistency",
}

# Aspect-specific instruction sentences; authored here, not an upstream text.
_ASPECT_GUIDANCE = {
    "COR": "- Check that the predicted answer does not contradict the video "
           "content reflected in the correct answer.",
    "DO": "- Reward predictions that cover the specific objects, attributes, "
          "and actions present in the correct answer.",
    "CU": "- Check that the predicted answer stays consistent with the overall "
          "scene and context of the video.",
    "TU": "- Check that the order and timing of events in the predicted answer "
          "agree with the correct answer.",
    "CON": "- Check that the predicted answer does not contradict itself and "
           "remains stable across its statements.",
}

ASPECT_SYSTEM_TEMPLATE = (
    "You are an intelligent chatbot designed for evaluating the {aspect} of "
    "generative outputs for video-based question-answer pairs.\n"
    "Your task is to compare the predicted answer with the correct answer "
    "and rate the {aspect} of the prediction. Here is how you can accomplish "
    "the task:\n"
    "------\n"
    "## INSTRUCTIONS:\n"
    "{guidance}\n"
    "- Consider synonyms or paraphrases as valid matches.\n"
    "- Evaluate the {aspect} of the prediction compared to the answer."
)

ASPECT_USER_TEMPLATE = (
    "Please evaluate the following video-based question-answer pair for "
    "{aspect}:\n"
    "\n"
    "Question: {question}\n"
    "Correct Answer: {answer}\n"
    "Predicted Answer: {pred}\n"
    "\n"
    "Provide your evaluation only as a yes/no and score where the score is "
    "an integer value between 0 and 5, with 5 indicating the highest level "
    "of {aspect}.\n"
    "Please generate the response in the form of a Python dictionary string "
    "with keys 'pred' and 'score', where value of 'pred' is a string of "
    "'yes' or 'no' and value of 'score' is in INTEGER, not STRING.\n"
    "DO NOT PROVIDE ANY OTHER OUTPUT TEXT OR EXPLANATION. Only provide the "
    "Python dictionary string.\n"
    "For example, your response should look like this: "
    "{'pred': 'yes', 'score': 4.8}."
)

_FIELD_PATTERN = re.compile(r"\{(question|answer|pred|aspect|guidance)\}")


def _fill(template: str, values: dict[str, str]) -> str:
    # single pass: substituted text is never rescanned, braces in inputs stay
    return _FIELD_PATTERN.sub(lambda m: values[m.group(1)], template)


def build_qa_judge_prompt(question: str, answer: str, pred: str) -> tuple[str, str]:
    """(system, user) for the yes/no + score correctness judgement."""
    if not question or not answer or not pred:
        raise ValueError("question, answer, and pred must be non-empty")
    user = _fill(QA_JUDGE_USER_TEMPLATE, {"question": question, "answer": answer, "pred": pred})
    return QA_JUDGE_SYSTEM, user


def build_aspect_prompt(
    aspect: str, question: str, answer: str, pred: str
) -> tuple[str, str]:
    """(system, user) scoring one aspect; same scaffold, aspect wording swapped in."""
    if aspect not in ASPECTS:
        raise ValueError(f"unknown aspect {aspect!r}, expected one of {ASPECTS}")
    if not question or not answer or not pred:
        raise ValueError("question, answer, and pred must be non-empty")
    name = _ASPECT_NAMES[aspect]
    system = _fill(ASPECT_SYSTEM_TEMPLATE, {"aspect": name, "guidance": _ASPECT_GUIDANCE[aspect]})
    user = _fill(
        ASPECT_USER_TEMPLATE,
        {"aspect": name, "question": question, "answer": answer, "pred": pred},
    )
    return system, user


@dataclass
class JudgeVerdict:
    pred: str
    score: float

    def __post_init__(self):
        if self.pred not in ("yes", "no"):
            raise ValueError(f"pred must be yes/no, got {self.pred!r}")
        if not 0.0 <= self.score <= 5.0:
            raise ValueError(f"score must lie in [0, 5], got {self.score}")


def render_verdict(verdict: JudgeVerdict) -> str:
    """Canonical reply form, e.g. {'pred': 'yes', 'score': 4.8}."""
    return f"{{'pred': '{verdict.pred}', 'score': {verdict.score!r}}}"


def parse_verdict(raw: str) -> JudgeVerdict:
    """Parse a judge reply: exactly one mapping with pred and score keys.

    Tolerates surrounding prose, single or double quotes, and integer, real,
    or numeric-string scores; scores are clamped into [0, 5].
    """
    if not raw:
        raise ValueError("raw verdict must be non-empty")
    spans = find_brace_spans(raw)
    if len(spans) != 1:
        raise ParseError(
            f"expected exactly one brace-delimited mapping, found {len(spans)}: {raw[:80]!r}"
        )
    mapping = parse_mapping(spans[0])
    if "pred" not in mapping or "score" not in mapping:
        raise ParseError(f"mapping lacks pred/score keys: {spans[0][:80]!r}")
    pred = str(mapping["pred"]).strip().lower()
    if pred not in ("yes", "no"):
        raise ParseError(f"pred must be yes/no, got {mapping['pred']!r}")
    score = mapping["score"]
    if isinstance(score, bool) or not isinstance(score, (int, float, str)):
        raise ParseError(f"score must be numeric, got {score!r}")
    try:
        value = float(score)
    except ValueError:
        raise ParseError(f"score must be numeric, got {score!r}")
    if value != value:  # NaN
        raise ParseError("score is not a number")
    return JudgeVerdict(pred=pred, score=min(5.0, max(0.0, value)))


@dataclass
class EvalMetrics:
    n: int
    accuracy: float
    mean_score: float

    def to_json(self) -> dict:
        return {"n": self.n, "accuracy": self.accuracy, "mean_score": self.mean_score}


def aggregate_qa(verdicts: list[JudgeVerdict]) -> EvalMetrics:
    """Accuracy = fraction judged yes; mean score over all verdicts."""
    if not verdicts:
        raise ValueError("verdicts must be non-empty")
    yes = sum(1 for v in verdicts if v.pred == "yes")
    total = sum(v.score for v in verdicts)
    n = len(verdicts)
    return EvalMetrics(n=n, accuracy=yes / n, mean_score=total / n)


def judge_item(client, question: str, answer: str, pred: str) -> JudgeVerdict:
    """One round trip: build the prompt, call the client, parse the verdict."""
    system, user = build_qa_judge_prompt(question, answer, pred)
    reply = client.complete(
        [{"role": "system", "content": system}, {"role": "user", "content": user}]
    )
    return parse_verdict(reply)
