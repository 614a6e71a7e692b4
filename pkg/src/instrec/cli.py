"""Command-line surface over the engine.

All machine-readable output (JSON, CSV) goes to stdout; diagnostics go to
stderr. Exit codes: 1 usage, 2 I/O, 3 backend, 4 invariant violation.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Any, Sequence

from . import evaluation, pipeline as pipeline_mod, prompts
from .backend import HttpBackend, MockBackend, MockScript, ModelBackend
from .embedding import HashedBagEmbedder
from .exceptions import (
    BackendUnreachable,
    EngineError,
    IOFailure,
    MalformedResponse,
    NoScriptMatch,
    PipelineStageError,
    ScorerFailure,
)
from .templates import RetrievalConfig, TemplateLibrary, load_distillation_log
from .tokenizer import build_vocabulary, tokenize_library
from .trie import build_trie
from .types import Trigger

_BACKEND_ERRORS = (BackendUnreachable, NoScriptMatch, MalformedResponse, ScorerFailure)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # noqa: D102 - argparse hook
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="instrec", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-trie", help="build vocabulary and trie, write a debug dump")
    p.add_argument("--instructions", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("recommend", help="recommend instructions for one trigger")
    p.add_argument("--trigger", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--backend", choices=["mock", "http"], default=None)
    p.add_argument("--mock-script", default=None)
    p.add_argument("--endpoint", default=None)

    tmpl = sub.add_parser("template", help="template library maintenance")
    tmpl_sub = tmpl.add_subparsers(dest="template_command", required=True)

    p = tmpl_sub.add_parser("add", help="insert one template through the novelty gate")
    p.add_argument("--library", required=True)
    p.add_argument("--template", required=True)
    p.add_argument("--config", default=None)

    p = tmpl_sub.add_parser("list", help="print the template library")
    p.add_argument("--library", required=True)

    p = tmpl_sub.add_parser("distill", help="cluster logged traces into new templates")
    p.add_argument("--library", required=True)
    p.add_argument("--log", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--min-cluster", type=int, default=2)
    p.add_argument("--mock-script", default=None)
    p.add_argument("--backend", choices=["mock", "http"], default=None)
    p.add_argument("--endpoint", default=None)

    p = sub.add_parser("construct-dataset", help="teacher-forced reasoning dataset")
    p.add_argument("--pairs", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--backend", choices=["mock", "http"], default=None)
    p.add_argument("--mock-script", default=None)
    p.add_argument("--endpoint", default=None)

    p = sub.add_parser("eval", help="metrics over a test set, optionally a threshold sweep")
    p.add_argument("--testset", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--sweep-deltas", default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--backend", choices=["mock", "http"], default=None)
    p.add_argument("--mock-script", default=None)
    p.add_argument("--endpoint", default=None)

    return parser


def _read_json(path: str) -> Any:
    with open(path, encoding="utf-8") as f:
        return json.load(f)


def _load_config(path: str | None) -> dict[str, Any]:
    if path is None:
        return {"_dir": "."}
    config = _read_json(path)
    config["_dir"] = os.path.dirname(os.path.abspath(path))
    return config


def _config_path(config: dict[str, Any], key: str) -> str | None:
    """Config-relative path resolution so runs reproduce from any cwd."""
    value = config.get(key)
    if value is None:
        return None
    return os.path.join(config["_dir"], value)


def _retrieval_config(config: dict[str, Any]) -> RetrievalConfig:
    return RetrievalConfig(
        delta=float(config.get("delta", 0.6)),
        novelty_delta=float(config.get("novelty_delta", 0.5)),
    )


def _load_instructions(path: str):
    entries = [(item["id"], item["surface"]) for item in _read_json(path)]
    vocab = build_vocabulary([surface for _, surface in entries])
    return tokenize_library(entries, vocab), vocab


def _make_backend(
    args: argparse.Namespace, config: dict[str, Any], vocab_size: int | None
) -> ModelBackend:
    kind = args.backend or config.get("backend", "mock")
    if kind == "mock":
        script_path = args.mock_script or _config_path(config, "mock_script")
        if script_path is None:
            raise UsageError("mock backend needs --mock-script or config mock_script")
        return MockBackend(MockScript.load(script_path), vocab_size=vocab_size)
    endpoint = args.endpoint or config.get("endpoint")
    if endpoint is None:
        raise UsageError("http backend needs --endpoint or config endpoint")
    return HttpBackend(endpoint, vocab_size=vocab_size)


def _load_templates(config: dict[str, Any], embedder: HashedBagEmbedder) -> TemplateLibrary:
    path = _config_path(config, "templates")
    log_path = _config_path(config, "distillation_log")
    if path is None or not os.path.exists(path):
        return TemplateLibrary(embedder, log_path=log_path)
    return TemplateLibrary.load(path, embedder, log_path=log_path)


def _make_pipeline(
    args: argparse.Namespace, config: dict[str, Any]
) -> pipeline_mod.RecommendationPipeline:
    instructions_path = _config_path(config, "instructions")
    if instructions_path is None:
        raise UsageError("config must name an instructions file")
    instructions, vocab = _load_instructions(instructions_path)
    backend = _make_backend(args, config, vocab.size)
    templates = _load_templates(config, HashedBagEmbedder())
    return pipeline_mod.RecommendationPipeline(instructions, vocab, backend, templates)


def _emit(payload: Any) -> None:
    sys.stdout.write(json.dumps(payload, indent=2, ensure_ascii=False) + "\n")


# --- command handlers ---------------------------------------------------------


def _cmd_build_trie(args: argparse.Namespace) -> int:
    instructions, vocab = _load_instructions(args.instructions)
    trie = build_trie(instructions, vocab)
    dump = {"vocabulary": vocab.to_dict(), "trie": trie.to_debug_dict(vocab)}
    with open(args.out, "w", encoding="utf-8") as f:
        json.dump(dump, f, indent=2, sort_keys=True)
        f.write("\n")
    _emit(
        {
            "instructions": trie.instruction_count,
            "vocab_size": vocab.size,
            "generation": trie.generation,
            "out": args.out,
        }
    )
    return 0


def _resolve_k(args: argparse.Namespace, config: dict[str, Any]) -> int:
    k = args.k if args.k is not None else int(config.get("k", 3))
    if not 1 <= k <= 3:
        raise UsageError(f"--k must lie in 1..3, got {k}")
    return k


def _cmd_recommend(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    pipe = _make_pipeline(args, config)
    trigger = Trigger.from_dict(_read_json(args.trigger))
    result = pipe.infer(trigger, _retrieval_config(config), k=_resolve_k(args, config))
    _emit(result.to_dict())
    return 0


def _cmd_template_add(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    embedder = HashedBagEmbedder()
    if os.path.exists(args.library):
        library = TemplateLibrary.load(args.library, embedder)
    else:
        print(f"library {args.library} not found, starting empty", file=sys.stderr)
        library = TemplateLibrary(embedder)
    fields = _read_json(args.template)
    candidate = library.build_template(
        id=fields["id"],
        name=fields["name"],
        tags=fields["tags"],
        scenarios=fields["scenarios"],
        steps=fields["steps"],
    )
    before = len(library)
    outcome = library.add_if_novel(candidate, _retrieval_config(config))
    library.save(args.library)
    _emit(
        {
            "template_id": candidate.id,
            "verdict": "added" if outcome.added else "rejected",
            "max_similarity": outcome.max_similarity,
            "before": before,
            "after": len(library),
        }
    )
    return 0


def _cmd_template_list(args: argparse.Namespace) -> int:
    library = TemplateLibrary.load(args.library, HashedBagEmbedder())
    _emit([t.to_dict() for t in library.templates()])
    return 0


def _cmd_template_distill(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    embedder = HashedBagEmbedder()
    if os.path.exists(args.library):
        library = TemplateLibrary.load(args.library, embedder)
    else:
        print(f"library {args.library} not found, starting empty", file=sys.stderr)
        library = TemplateLibrary(embedder)
    backend = _make_backend(args, config, vocab_size=None)
    log = load_distillation_log(args.log)
    cfg = _retrieval_config(config)
    before = len(library)
    candidates = library.distill_candidates(log, backend, args.min_cluster)
    verdicts = []
    for candidate in candidates:
        outcome = library.add_if_novel(candidate, cfg)
        verdicts.append(
            {
                "template": candidate.to_dict(),
                "verdict": "added" if outcome.added else "rejected",
                "max_similarity": outcome.max_similarity,
            }
        )
    library.save(args.library)
    _emit(
        {
            "log_entries": len(log),
            "candidates": verdicts,
            "before": before,
            "after": len(library),
        }
    )
    return 0


def _cmd_construct_dataset(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    pipe = _make_pipeline(args, config)
    samples = []
    skipped = []
    with open(args.pairs, encoding="utf-8") as f:
        pairs = [json.loads(line) for line in f if line.strip()]
    for index, pair in enumerate(pairs):
        trigger = Trigger.from_dict(pair["trigger"])
        gold = pipe.instructions.get(pair["gold"])
        if gold is None:
            skipped.append({"index": index, "reason": f"unknown gold {pair['gold']!r}"})
            continue
        construction = prompts.construction_prompt(trigger)
        try:
            trace = pipe.construct_reasoning_sample(construction, trigger, gold)
        except _BACKEND_ERRORS:
            raise
        except EngineError as exc:
            skipped.append({"index": index, "reason": str(exc)})
            continue
        samples.append((trigger, gold, trace))
    report = pipeline_mod.export_sft_dataset(samples, args.out)
    skipped.extend({"index": i, "reason": r} for i, r in report.skipped)
    _emit({"written": report.written, "skipped": skipped, "out": args.out})
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    pipe = _make_pipeline(args, config)
    testset = evaluation.load_eval_samples(args.testset)
    k = _resolve_k(args, config)
    if args.sweep_deltas is not None:
        deltas = [float(x) for x in args.sweep_deltas.split(",") if x.strip()]
        if not deltas:
            raise UsageError("--sweep-deltas needs at least one value")
        rows = evaluation.delta_sweep(
            pipe,
            testset,
            deltas,
            k=k,
            novelty_delta=float(config.get("novelty_delta", 0.5)),
        )
        sys.stdout.write(evaluation.sweep_to_csv(rows))
        for row in rows:
            for trigger_id, message in row.errors:
                print(f"delta={row.delta} sample={trigger_id}: {message}", file=sys.stderr)
        return 0
    cfg = _retrieval_config(config)
    predictions, golds = [], []
    for sample in testset:
        result = pipe.infer(sample.trigger, cfg, k=k)
        predictions.append(list(result.instructions))
        golds.append(sample.gold)
    report = evaluation.compute_metrics(
        predictions, golds, k_values=(1, 3), library=set(pipe.instructions)
    )
    _emit(report.to_dict())
    return 0


_HANDLERS = {
    "build-trie": _cmd_build_trie,
    "recommend": _cmd_recommend,
    "construct-dataset": _cmd_construct_dataset,
    "eval": _cmd_eval,
}


def _classify(exc: Exception) -> int:
    if isinstance(exc, PipelineStageError) and exc.__cause__ is not None:
        inner = exc.__cause__
        if isinstance(inner, Exception):
            return _classify(inner)
    if isinstance(exc, _BACKEND_ERRORS):
        return 3
    if isinstance(exc, (IOFailure, OSError, json.JSONDecodeError, KeyError)):
        return 2
    return 4


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "template":
            handler = {
                "add": _cmd_template_add,
                "list": _cmd_template_list,
                "distill": _cmd_template_distill,
            }[args.template_command]
        else:
            handler = _HANDLERS[args.command]
        return handler(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (EngineError, OSError, json.JSONDecodeError, ValueError, KeyError) as exc:
        code = _classify(exc)
        print(f"error: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
