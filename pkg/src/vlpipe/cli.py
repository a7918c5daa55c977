"""Command-line entry point.

Commands: build-alignment, gen-instruct, train-toy, eval-qa, demo-forward.
Exit codes: 0 success, 1 domain error, 2 usage error.  Diagnostics go to
stderr; data goes to files or stdout.  Option precedence is flags > JSON
config file (--config) > built-in defaults, and every command is
deterministic given its flags and seed.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import assembly, dataset, errors, features, judge, params_io, prompting, temporal, trainer
from .client import HttpChatClient, client_from_endpoint
from .ndjson import dump_ndjson, load_ndjson

DEFAULT_SEED = 0

_DEFAULTS = {
    "seed": DEFAULT_SEED,
    "threshold": 5,
    "cap": 100,
    "variant": "v1",
    "frames": 3,
    "dim": 4,
    "dim_llm": 8,
    "examples": 4,
    "stage2_lr": trainer.STAGE2_LR,
    "model": "gpt-3.5-turbo",
    "jobs": 1,
}


def _resolve(args: argparse.Namespace, config: dict, name: str):
    value = getattr(args, name, None)
    if value is not None:
        return value
    if name in config:
        return config[name]
    return _DEFAULTS.get(name)


def _load_config(args: argparse.Namespace) -> dict:
    path = getattr(args, "config", None)
    if not path:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        loaded = json.load(fh)
    if not isinstance(loaded, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    return loaded


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vlpipe",
        description="Video-language pipeline: dataset building, toy training, judging.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON config file; flags take precedence")
        p.add_argument("--seed", type=int)

    p = sub.add_parser("build-alignment", help="filter a caption corpus into alignment records")
    add_common(p)
    p.add_argument("--corpus", required=True, help="ndjson with id, video, caption")
    p.add_argument("--threshold", type=int, help="keep phrases seen in > threshold captions")
    p.add_argument("--cap", type=int, help="max captions contributed per phrase")
    p.add_argument("--out", required=True, help="output ndjson of alignment records")

    p = sub.add_parser("gen-instruct", help="build instruction records via a chat endpoint")
    add_common(p)
    p.add_argument("--kind", required=True, choices=dataset.INSTRUCT_KINDS)
    p.add_argument("--in", dest="infile", required=True,
                   help="ndjson with id, video, title, caption (optional v_id, source)")
    p.add_argument("--out", required=True, help="output ndjson of instruction records")
    p.add_argument("--endpoint", required=True,
                   help="chat endpoint URL, or file://PATH to replay recorded responses")
    p.add_argument("--model")

    p = sub.add_parser("train-toy", help="run the two-stage recipe on synthetic data")
    add_common(p)
    p.add_argument("--variant", choices=temporal.VARIANTS)
    p.add_argument("--examples", type=int)
    p.add_argument("--frames", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--dim-llm", dest="dim_llm", type=int)
    p.add_argument("--stage2-lr", dest="stage2_lr", type=float)
    p.add_argument("--out", required=True, help="training report JSON")
    p.add_argument("--checkpoint", help="optional final-parameter file")

    p = sub.add_parser("eval-qa", help="judge predictions and aggregate metrics")
    add_common(p)
    p.add_argument("--in", dest="infile", required=True,
                   help="ndjson with question, answer, prediction")
    p.add_argument("--out", required=True, help="output ndjson of verdicts")
    p.add_argument("--summary", help="write the summary JSON here instead of stdout")
    p.add_argument("--endpoint", required=True,
                   help="chat endpoint URL, or file://PATH to replay recorded responses")
    p.add_argument("--model")
    p.add_argument("--jobs", type=int, help="concurrent judge requests (HTTP only)")

    p = sub.add_parser("demo-forward", help="print token-sequence shapes for a synthetic video")
    add_common(p)
    p.add_argument("--variant", choices=temporal.VARIANTS)
    p.add_argument("--frames", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--dim-llm", dest="dim_llm", type=int)

    return parser


def _cmd_build_alignment(args, config) -> int:
    seed = _resolve(args, config, "seed")
    threshold = _resolve(args, config, "threshold")
    cap = _resolve(args, config, "cap")
    rows = load_ndjson(args.corpus)
    corpus = [
        dataset.CaptionEntry(id=str(r["id"]), video_path=str(r["video"]), caption=str(r["caption"]))
        for r in rows
    ]
    candidates = dataset.build_candidate_set(corpus, threshold=threshold)
    selected = dataset.select_alignment_captions(candidates, cap=cap, seed=seed)
    by_id = {e.id: e for e in corpus}
    records = []
    for i, cid in enumerate(selected):
        record = dataset.make_alignment_record(by_id[cid], seed=seed + i)
        records.append(record.to_json())
    dump_ndjson(args.out, records)
    print(
        f"{len(corpus)} captions -> {len(candidates)} candidate phrases -> "
        f"{len(records)} records",
        file=sys.stderr,
    )
    return 0


def _cmd_gen_instruct(args, config) -> int:
    seed = _resolve(args, config, "seed")
    client = client_from_endpoint(args.endpoint, model=_resolve(args, config, "model"))
    rows = load_ndjson(args.infile)
    records = []
    failures = []
    for i, row in enumerate(rows):
        request = dataset.make_instruct_request(args.kind, str(row["title"]), str(row["caption"]))
        reply = client.complete(request.to_messages())
        try:
            parsed = dataset.parse_instruct_response(args.kind, reply)
        except errors.ParseError as exc:
            failures.append((row.get("id", i), str(exc)))
            continue
        record = dataset.build_instruct_record(
            record_id=str(row["id"]),
            video=str(row["video"]),
            parsed=parsed,
            v_id=str(row["v_id"]) if "v_id" in row else None,
            source=str(row.get("source", "local")),
            seed=seed + i,
        )
        records.append(record.to_json())
    for rid, message in failures:
        print(f"skipped {rid}: {message}", file=sys.stderr)
    if not records:
        raise errors.ParseError("no instruction records could be generated")
    dump_ndjson(args.out, records)
    print(f"{len(records)} records written, {len(failures)} skipped", file=sys.stderr)
    return 0


def _cmd_train_toy(args, config) -> int:
    seed = _resolve(args, config, "seed")
    variant = _resolve(args, config, "variant")
    toy_data = trainer.synthetic_toy_dataset(
        n_examples=_resolve(args, config, "examples"),
        dim=_resolve(args, config, "dim"),
        t=_resolve(args, config, "frames"),
        seed=seed,
    )
    stages = [
        trainer.build_stage_config(1),
        trainer.build_stage_config(2, stage2_lr=_resolve(args, config, "stage2_lr")),
    ]
    report, model = trainer.train_toy(
        variant, toy_data, stages, seed=seed, dim_llm=_resolve(args, config, "dim_llm")
    )
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(report.to_json(), fh, indent=2)
        fh.write("\n")
    if args.checkpoint:
        params_io.save_params(args.checkpoint, model.to_arrays())
    print(
        f"{variant}: {len(report.losses)} steps, loss {report.losses[0]:.4f} -> "
        f"{report.final_loss:.4f}",
        file=sys.stderr,
    )
    return 0


def _cmd_eval_qa(args, config) -> int:
    client = client_from_endpoint(args.endpoint, model=_resolve(args, config, "model"))
    jobs = _resolve(args, config, "jobs")
    if not isinstance(client, HttpChatClient):
        jobs = 1  # replayed responses must pair with requests in order
    rows = load_ndjson(args.infile)
    items = [(str(r["question"]), str(r["answer"]), str(r["prediction"])) for r in rows]

    def run_one(item):
        question, answer, prediction = item
        return judge.judge_item(client, question, answer, prediction)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            verdicts = list(pool.map(run_one, items))
    else:
        verdicts = [run_one(item) for item in items]

    dump_ndjson(args.out, [{"pred": v.pred, "score": v.score} for v in verdicts])
    metrics = judge.aggregate_qa(verdicts)
    summary = json.dumps(metrics.to_json())
    if args.summary:
        with open(args.summary, "w", encoding="utf-8") as fh:
            fh.write(summary + "\n")
    else:
        print(summary)
    print(f"judged {metrics.n} items", file=sys.stderr)
    return 0


def _cmd_demo_forward(args, config) -> int:
    seed = _resolve(args, config, "seed")
    t = _resolve(args, config, "frames")
    dim = _resolve(args, config, "dim")
    dim_llm = _resolve(args, config, "dim_llm")
    variant = _resolve(args, config, "variant")

    rng = np.random.default_rng(seed)
    buffers = [rng.integers(0, 256, size=(8, 8, 3), dtype=np.uint8) for _ in range(t)]
    source = features.VideoSource(frame_count=t, native_fps=1.0, frames=buffers)
    encoder = features.MockEncoder(feature_dim=dim, seed=seed)
    video = features.encode_frames(source, list(range(t)), encoder)

    params = temporal.init_temporal_params(variant, dim, max_t=max(t, 8), seed=seed)
    aggregated = temporal.aggregate(variant, video, params)
    sequence = assembly.assemble_video_tokens(aggregated, video)
    projected = assembly.project_tokens(sequence, assembly.init_projection(dim, dim_llm, seed=seed))

    print(f"tokens: {sequence.tokens.shape[0]} x {sequence.tokens.shape[1]}")
    print(f"projected: {projected.shape[0]} x {projected.shape[1]}")
    record = prompting.PromptRecord(
        system_message="You are a helpful video assistant.",
        turns=[(prompting.HUMAN, "Describe the video.")],
        t=t,
    )
    rendered = prompting.render_prompt(record)
    report = prompting.token_budget_check(rendered, prompting.whitespace_tokenizer)
    print(f"prompt tokens: {report.count} (budget {report.budget})")
    return 0


_COMMANDS = {
    "build-alignment": _cmd_build_alignment,
    "gen-instruct": _cmd_gen_instruct,
    "train-toy": _cmd_train_toy,
    "eval-qa": _cmd_eval_qa,
    "demo-forward": _cmd_demo_forward,
}


def run(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        config = _load_config(args)
        return _COMMANDS[args.command](args, config)
    except (
        ValueError,
        KeyError,
        OSError,
        errors.CapacityError,
        errors.ContractViolation,
        errors.NumericalFailure,
        errors.ParseError,
        RuntimeError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
