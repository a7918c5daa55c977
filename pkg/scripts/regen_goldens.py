#!/usr/bin/env python3
"""Regenerate the golden files under tests/goldens/.

Run after any deliberate template change, then review the diff; the test
suite asserts byte-identity against these files.
"""

import json
from pathlib import Path

from vlpipe import dataset, judge, prompting

GOLDEN_DIR = Path(__file__).resolve().parents[1] / "tests" / "goldens"

DEMO_TITLE = "A Dog Learns to Skateboard"
DEMO_CAPTION = (
    "A young dog pushes a skateboard across a quiet park, hops on with all "
    "four paws, and rides it down a gentle slope while people watch."
)
DEMO_QUESTION = "What is the man doing in the video?"
DEMO_ANSWER = "He is repairing a bicycle wheel in his garage."
DEMO_PRED = "A man fixes the wheel of a bike indoors."


def write(name: str, text: str) -> None:
    (GOLDEN_DIR / name).write_bytes(text.encode("utf-8"))
    print(f"wrote {name}")


def main() -> None:
    GOLDEN_DIR.mkdir(parents=True, exist_ok=True)

    record = prompting.PromptRecord(system_message="S", turns=[(prompting.HUMAN, "Q")], t=1)
    write("prompt_generation.txt", prompting.render_prompt(record))

    record = prompting.PromptRecord(
        system_message="You are an intelligent assistant that can understand videos.",
        turns=[
            (prompting.HUMAN, "What is happening in the video?"),
            (prompting.ASSISTANT, "A cat bats a ball of yarn across a wooden floor."),
            (prompting.HUMAN, "Is the cat playful?"),
            (prompting.ASSISTANT, "Yes, it pounces and rolls while chasing the yarn."),
        ],
        t=3,
    )
    write("prompt_training.txt", prompting.render_prompt(record))

    write("instruct_detail_system.txt", dataset.DETAIL_DESCRIPTION_SYSTEM)
    write("instruct_conversation_system.txt", dataset.CONVERSATION_SYSTEM)
    write("instruct_reasoning_system.txt", dataset.COMPLEX_REASONING_SYSTEM)

    for kind, name in [
        ("detail_description", "req_instruct_detail.json"),
        ("conversation", "req_instruct_conversation.json"),
        ("complex_reasoning", "req_instruct_reasoning.json"),
    ]:
        request = dataset.make_instruct_request(kind, DEMO_TITLE, DEMO_CAPTION)
        write(name, json.dumps(request.to_messages(), indent=2, ensure_ascii=False) + "\n")

    write("judge_system.txt", judge.QA_JUDGE_SYSTEM)
    write("judge_user_template.txt", judge.QA_JUDGE_USER_TEMPLATE)
    system, user = judge.build_qa_judge_prompt(DEMO_QUESTION, DEMO_ANSWER, DEMO_PRED)
    assert system == judge.QA_JUDGE_SYSTEM
    write("judge_user_rendered.txt", user)

    aspects = {}
    for aspect in judge.ASPECTS:
        system, user = judge.build_aspect_prompt(aspect, DEMO_QUESTION, DEMO_ANSWER, DEMO_PRED)
        aspects[aspect] = {"system": system, "user": user}
    write("aspect_prompts.json", json.dumps(aspects, indent=2, ensure_ascii=False) + "\n")


if __name__ == "__main__":
    main()
