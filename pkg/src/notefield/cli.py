"""Command-line entry points: train, sample, reharmonize, evaluate, serve.

Exit codes: 0 success, 1 usage error, 2 domain error.  Errors go to stderr
as single-line JSON objects with "error" and "message" keys.
"""

from __future__ import annotations

import argparse
import json
import sys
from collections import Counter
from pathlib import Path

from . import evaluator, harmonizer, sampler, trainer
from .corpus import load_corpus, split_by_mode
from .errors import ConfigError, NotefieldError, ParseError
from .model import Topology, load_model, save_model
from .sampler import SamplerConfig, constraints_from_doc


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _load_training_config(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    return doc, trainer.config_from_doc(doc)


def _cmd_train(args) -> int:
    corpus = load_corpus(args.corpus)
    doc, config = _load_training_config(args.config)
    mode = doc.get("mode")
    if mode is not None:
        if mode not in ("major", "minor"):
            raise ConfigError(f"mode must be major or minor, got {mode!r}")
        major, minor = split_by_mode(corpus)
        corpus = major if mode == "major" else minor
    topology = Topology(n=corpus.voices, K=doc["K"], L=doc["L"],
                        alphabets=corpus.alphabets,
                        rhythm=doc.get("bins_per_cycle"))
    model = trainer.fit(corpus, topology, config)
    save_model(model, args.out)
    print(json.dumps({
        "model": str(args.out),
        "parameters": len(model.params) + len(model.position_fields or {}),
        "iterations": model.metadata["iterations"],
        "converged": model.metadata["converged"],
        "objective": model.metadata["objective"],
    }))
    return 0


def _piece_mode(model) -> str:
    mode = model.metadata.get("mode")
    return mode if mode in ("major", "minor") else "major"


def _cmd_sample(args) -> int:
    if args.length < 1:
        raise UsageError("--length must be at least 1")
    if args.steps is not None and args.steps < 1:
        raise UsageError("--steps must be at least 1")
    model = load_model(args.model)
    constraints = None
    if args.constraints:
        with open(args.constraints) as fh:
            constraints = constraints_from_doc(json.load(fh))
    config = SamplerConfig(total_steps=args.steps, burn_in=args.burn_in,
                           thinning=args.thinning, seed=args.seed)
    result = sampler.run(model, args.length, constraints, config)
    piece = {"id": f"generated-{result.metadata['seed']}", "mode": _piece_mode(model),
             "original_key": 0, "grid": result.grid}
    if model.topology.rhythm is not None:
        piece["beats_per_bar"] = model.topology.rhythm
    with open(args.out, "w") as fh:
        json.dump({"voices": model.topology.n, "pieces": [piece]}, fh, indent=1)
        fh.write("\n")
    print(json.dumps({"out": str(args.out), "seed": result.metadata["seed"],
                      "total_steps": result.metadata["total_steps"],
                      "acceptance_rate": result.metadata["acceptance_rate"]}))
    return 0


def _load_model_dir(model_dir) -> dict:
    """Models keyed by mode; non-model JSON files in the directory are skipped."""
    models = {}
    paths = sorted(Path(model_dir).glob("*.json"))
    if not paths:
        raise ParseError(f"no model files in {model_dir}")
    for path in paths:
        try:
            model = load_model(path)
        except NotefieldError:
            continue
        mode = model.metadata.get("mode")
        if mode in ("major", "minor") and mode not in models:
            models[mode] = model
    if not models:
        raise ParseError(f"no loadable models with a mode tag in {model_dir}")
    return models


def _cmd_reharmonize(args) -> int:
    models = _load_model_dir(args.model_dir)
    melody_corpus = load_corpus(args.melody)
    if melody_corpus.voices != 1 or len(melody_corpus.pieces) != 1:
        raise ParseError("melody file must hold exactly one 1-voice piece")
    melody = melody_corpus.pieces[0].grid[0]
    track = None
    if args.keys:
        with open(args.keys) as fh:
            track = harmonizer.keytrack_from_doc(json.load(fh))
    constraints = None
    if args.constraints:
        with open(args.constraints) as fh:
            constraints = constraints_from_doc(json.load(fh))
    config = SamplerConfig(total_steps=args.steps, seed=args.seed)
    result = harmonizer.reharmonize(melody, models, target_voice=args.voice,
                                    track=track, constraints=constraints, config=config)
    mode = Counter(m for _, m in result.key_track).most_common(1)[0][0]
    n = next(iter(models.values())).topology.n
    piece = {"id": f"reharmonized-{result.metadata['seed']}", "mode": mode,
             "original_key": 0, "grid": result.grid}
    out = Path(args.out)
    with open(out, "w") as fh:
        json.dump({"voices": n, "pieces": [piece]}, fh, indent=1)
        fh.write("\n")
    keys_path = out.with_suffix(".keys.json")
    with open(keys_path, "w") as fh:
        json.dump(harmonizer.keytrack_to_doc(result.key_track), fh)
        fh.write("\n")
    print(json.dumps({"out": str(out), "keys": str(keys_path),
                      "seed": result.metadata["seed"],
                      "acceptance_rate": result.metadata["acceptance_rate"]}))
    return 0


def _union_topology(corpora, K: int, L: int) -> Topology:
    from .symbols import symbol_sort_key
    voices = corpora[0].voices
    merged = [set() for _ in range(voices)]
    for corpus in corpora:
        for v in range(voices):
            merged[v].update(corpus.alphabets[v])
    alphabets = [sorted(s, key=symbol_sort_key) for s in merged]
    return Topology(n=voices, K=K, L=L, alphabets=alphabets)


def _cmd_evaluate(args) -> int:
    generated = load_corpus(args.generated)
    train_corpus = load_corpus(args.train_corpus)
    test_corpus = load_corpus(args.test_corpus) if args.test_corpus else None
    report_dir = Path(args.report_dir)
    report_dir.mkdir(parents=True, exist_ok=True)

    corpora = [generated, train_corpus] + ([test_corpus] if test_corpus else [])
    topology = _union_topology(corpora, args.scope_k, args.scope_l)
    table = evaluator.pair_statistics_table(generated, train_corpus, topology)
    evaluator.write_pair_stats_csv(report_dir / "pair_stats.csv", table)

    rows = []
    for kind, classify in (("chords", evaluator.classify_chords),
                           ("quads", evaluator.classify_quads)):
        for variant, distinct in (("token", False), ("distinct", True)):
            rows.append((kind, variant,
                         classify(generated, train_corpus, test_corpus, distinct=distinct)))
    evaluator.write_taxonomy_csv(report_dir / "taxonomy.csv", rows)

    summary = {
        "overall_correlation": table.overall_correlation,
        "chords": dict(zip(("cited", "discovered", "invented"), rows[0][2].fractions)),
        "quads": dict(zip(("cited", "discovered", "invented"), rows[2][2].fractions)),
    }
    if test_corpus is not None:
        restitution, discovery = evaluator.restitution_discovery(
            generated, train_corpus, test_corpus)
        evaluator.write_restitution_csv(
            report_dir / "restitution_discovery.csv",
            [(float("nan"), "-", restitution, discovery)])
        summary.update(restitution=restitution, discovery=discovery)
    print(json.dumps(summary))
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app
    app = create_app(args.model_dir, queue_size=args.queue_size, step_cap=args.step_cap)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="notefield",
                     description="Pairwise maximum-entropy models of multi-voice music")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("train", help="fit a model on a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("sample", help="generate a piece from a model")
    p.add_argument("--model", required=True)
    p.add_argument("--length", type=int, required=True)
    p.add_argument("--steps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--burn-in", type=int, dest="burn_in")
    p.add_argument("--thinning", type=int)
    p.add_argument("--constraints")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("reharmonize", help="harmonize a melody with per-key models")
    p.add_argument("--model-dir", required=True, dest="model_dir")
    p.add_argument("--melody", required=True)
    p.add_argument("--keys")
    p.add_argument("--voice", type=int, default=0)
    p.add_argument("--steps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--constraints")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_reharmonize)

    p = sub.add_parser("evaluate", help="compare generated output against corpora")
    p.add_argument("--generated", required=True)
    p.add_argument("--train-corpus", required=True, dest="train_corpus")
    p.add_argument("--test-corpus", dest="test_corpus")
    p.add_argument("--scope-k", type=int, default=4, dest="scope_k")
    p.add_argument("--scope-l", type=int, default=2, dest="scope_l")
    p.add_argument("--report-dir", required=True, dest="report_dir")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--port", type=int, required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--model-dir", required=True, dest="model_dir")
    p.add_argument("--queue-size", type=int, default=4, dest="queue_size")
    p.add_argument("--step-cap", type=int, dest="step_cap")
    p.set_defaults(func=_cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "func", None):
            raise UsageError("a subcommand is required")
        return args.func(args)
    except UsageError as exc:
        print(json.dumps({"error": "usage", "message": str(exc)}), file=sys.stderr)
        return 1
    except NotefieldError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
