import os
import sys
import json
import logging
import argparse
from typing import Dict, List, Optional

from mcp.server.fastmcp import FastMCP

from .audit import AuditLogger
from .config import Settings
from .corpus import DEFAULT_MIN_KEEP_COUNT, build_vocabulary, prepare_corpus
from .errors import ForgeError
from .evaluator import compare_reports, evaluate, format_comparison, format_report, load_questions
from .fetch import DATASETS, fetch_dataset
from .lfw_weights import export_weight_curve, write_weight_curve_csv
from .model_io import convert, load_model
from .recipes import RecipeLoader
from .resources import register_resources
from .runner import ExperimentRunner, train_to_path
from .tools import register_tools, resolve_lfw_params
from .trainer import TrainConfig
from .window_scheduler import WindowStrategy

logger = logging.getLogger(__name__)

LFW_CHOICES = ["none", "eq3", "eq4", "eq5", "eq6"]


def build_server(settings: Settings) -> FastMCP:
    mcp = FastMCP("embedding-forge")
    try:
        audit = AuditLogger(settings.audit_log)
        loader = RecipeLoader(settings.recipes_dir)
        runner = ExperimentRunner(audit=audit, workers=settings.threads)

        register_tools(mcp, settings, audit, loader, runner)
        register_resources(mcp, loader)
    except Exception as e:
        logger.error(f"Failed to initialize server components: {e}")

        @mcp.tool()
        def status() -> str:
            return f"Server failed to initialize: {str(e)}. Please check the EMBEDDING_FORGE_* settings."
    return mcp


def _parse_params(pairs: Optional[List[str]]) -> Dict[str, float]:
    params = {}
    for pair in pairs or []:
        name, sep, value = pair.partition("=")
        if not sep:
            raise ValueError(f"--param expects NAME=VALUE, got {pair!r}")
        params[name.strip()] = float(value)
    return params


def cmd_train(args, settings: Settings, audit: AuditLogger) -> int:
    config = TrainConfig(
        model=args.model,
        dim=args.dim,
        window=args.window,
        window_strategy=args.window_strategy,
        epochs=args.epochs,
        edws_phases=args.edws_phases,
        lfw=args.lfw,
        negatives=args.negatives,
        learning_rate=args.lr,
        subsample=args.subsample,
        workers=args.threads or settings.threads,
        seed=args.seed,
        lfw_lr_scale=args.lfw_lr_scale,
    )
    artifacts = prepare_corpus(args.input, args.min_count)
    if args.vocab_out:
        artifacts.vocabulary.save(args.vocab_out)
    trained = train_to_path(artifacts, config, args.output, args.format, audit)
    print(f"Saved {config.model.value} model ({len(trained.words)} x {config.dim}) to {args.output} "
          f"in {trained.seconds:.1f}s")
    if trained.lfw_params is not None:
        print("LFW parameters: " + ", ".join(f"{k}={v:.6g}" for k, v in trained.lfw_params.as_dict().items()))
    return 0


def cmd_eval(args, settings: Settings, audit: AuditLogger) -> int:
    model = load_model(args.model)
    report = evaluate(model, load_questions(args.questions), batch_size=args.batch_size)
    audit.log_evaluation(args.model, report.total.correct, report.total.total, report.skipped)
    print(format_report(report, args.format))
    return 0


def cmd_convert(args, settings: Settings, audit: AuditLogger) -> int:
    model = convert(args.in_path, args.out, args.format)
    print(f"Converted {args.in_path} -> {args.out} ({args.format}, {model.vocab_size} x {model.dim})")
    return 0


def cmd_vocab(args, settings: Settings, audit: AuditLogger) -> int:
    vocabulary = build_vocabulary(args.input, args.min_count)
    if args.output:
        vocabulary.save(args.output)
    print(f"{len(vocabulary)} words kept (count >= {args.min_count}) covering {vocabulary.total_tokens} tokens")
    return 0


def cmd_curve(args, settings: Settings, audit: AuditLogger) -> int:
    params = resolve_lfw_params(args.formula or "", args.model or "", _parse_params(args.param))
    points = export_weight_curve(params.formula, params, args.window)
    if args.output:
        write_weight_curve_csv(points, args.output)
        print(f"Wrote {len(points)} points for {params.formula.cli_name} to {args.output}")
    else:
        for p in points:
            side = f"\t{p.side}" if p.side else ""
            print(f"{p.distance}\t{p.weight:.6f}{side}")
    return 0


def cmd_compare(args, settings: Settings, audit: AuditLogger) -> int:
    questions = load_questions(args.questions)
    baseline = evaluate(load_model(args.baseline), questions)
    candidate = evaluate(load_model(args.candidate), questions)
    deltas = compare_reports(baseline, candidate)
    if args.format == "json":
        print(json.dumps([
            {"category": d.name, "baseline": d.baseline.accuracy, "candidate": d.candidate.accuracy,
             "absolute": d.absolute, "relative": d.relative}
            for d in deltas
        ], indent=2))
    else:
        print(format_comparison(deltas))
    return 0


def cmd_fetch(args, settings: Settings, audit: AuditLogger) -> int:
    path = fetch_dataset(args.name, args.dest or settings.data_dir, audit)
    print(path)
    return 0


def cmd_recipe(args, settings: Settings, audit: AuditLogger) -> int:
    loader = RecipeLoader(args.recipes_dir or settings.recipes_dir)
    if args.action == "list":
        for recipe in loader.discover_recipes():
            print(f"{recipe.name}: {recipe.description}")
        return 0
    if args.action == "show":
        print(loader.read_document(loader.get(args.name).name))
        return 0

    if not args.input or not args.output_dir:
        raise ValueError("recipe run needs --input and --output-dir")
    recipe = loader.get(args.name)
    runner = ExperimentRunner(audit=audit, min_keep_count=args.min_count,
                              workers=args.threads or settings.threads)
    questions = args.questions or os.path.join(settings.data_dir, "questions-words.txt")
    result = runner.run(recipe, args.input, questions, args.output_dir, args.seeds)
    with open(os.path.join(args.output_dir, "results.json"), "w", encoding="utf-8") as f:
        json.dump(result.to_dict(), f, indent=2)

    for arm in result.arms:
        print(f"{arm.arm:<16} seed {arm.seed}: {arm.total_correct}/{arm.report.total.total} "
              f"({arm.report.total.accuracy:.2%}) in {arm.seconds:.0f}s")
    for outcome in result.outcomes:
        label = "soft" if outcome.expectation.soft else "hard"
        print(f"[{'PASS' if outcome.passed else 'FAIL'}] ({label}) {outcome.expectation}: "
              f"{len(outcome.passing_seeds)}/{len(outcome.passing_seeds) + len(outcome.failing_seeds)} seeds")
    for arm, ratio in result.overhead.items():
        print(f"wall-clock {arm} / baseline: {ratio:.2f}x")
    return 0 if result.passed else 1


def cmd_serve(args, settings: Settings, audit: AuditLogger) -> int:
    build_server(settings).run()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="embedding-forge",
                                     description="CBOW/LFW and Skip-gram/EDWS word embeddings.")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="Train a model and save it with a .yaml sidecar.")
    p.add_argument("--input", required=True, help="Whitespace-separated corpus (e.g. text8).")
    p.add_argument("--output", required=True)
    p.add_argument("--model", choices=["cbow", "skipgram"], default="cbow")
    p.add_argument("--lfw", choices=LFW_CHOICES, default="none")
    p.add_argument("--window-strategy", choices=[s.value for s in WindowStrategy], default=None,
                   help="Default: fixed for cbow, random for skipgram.")
    p.add_argument("--window", type=int, default=15)
    p.add_argument("--epochs", type=int, default=6)
    p.add_argument("--edws-phases", type=int, default=3)
    p.add_argument("--dim", type=int, default=128)
    p.add_argument("--negatives", type=int, default=5)
    p.add_argument("--lr", type=float, default=None, help="Default: 0.05 cbow, 0.025 skipgram.")
    p.add_argument("--lfw-lr-scale", type=float, default=0.1)
    p.add_argument("--subsample", type=float, default=None, help="Threshold t, e.g. 1e-5. Off by default.")
    p.add_argument("--threads", type=int, default=0)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--min-count", type=int, default=DEFAULT_MIN_KEEP_COUNT)
    p.add_argument("--format", choices=["bin", "text"], default="bin")
    p.add_argument("--vocab-out", default=None)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("eval", help="3CosAdd analogy accuracy per category.")
    p.add_argument("--model", required=True)
    p.add_argument("--questions", required=True)
    p.add_argument("--format", choices=["table", "csv", "json"], default="table")
    p.add_argument("--batch-size", type=int, default=256)
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("convert", help="Convert between text and binary formats.")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=["text", "bin"], required=True)
    p.set_defaults(handler=cmd_convert)

    p = sub.add_parser("vocab", help="Build and optionally save the vocabulary.")
    p.add_argument("--input", required=True)
    p.add_argument("--output", default=None)
    p.add_argument("--min-count", type=int, default=DEFAULT_MIN_KEEP_COUNT)
    p.set_defaults(handler=cmd_vocab)

    p = sub.add_parser("curve", help="Export the normalized LFW weight per distance.")
    p.add_argument("--formula", choices=LFW_CHOICES[1:], default=None)
    p.add_argument("--model", default=None, help="Read formula and learned parameters from this model's sidecar.")
    p.add_argument("--param", action="append", metavar="NAME=VALUE")
    p.add_argument("--window", type=int, default=15)
    p.add_argument("--output", default=None, help="CSV path; prints to stdout when omitted.")
    p.set_defaults(handler=cmd_curve)

    p = sub.add_parser("compare", help="Per-category accuracy deltas between two models.")
    p.add_argument("--baseline", required=True)
    p.add_argument("--candidate", required=True)
    p.add_argument("--questions", required=True)
    p.add_argument("--format", choices=["table", "json"], default="table")
    p.set_defaults(handler=cmd_compare)

    p = sub.add_parser("fetch", help="Download text8 or the analogy question file.")
    p.add_argument("name", choices=sorted(DATASETS))
    p.add_argument("--dest", default=None)
    p.set_defaults(handler=cmd_fetch)

    p = sub.add_parser("recipe", help="List, show or run experiment recipes.")
    p.add_argument("action", choices=["list", "show", "run"])
    p.add_argument("name", nargs="?")
    p.add_argument("--input", default=None)
    p.add_argument("--questions", default=None)
    p.add_argument("--output-dir", default=None)
    p.add_argument("--seeds", type=int, nargs="+", default=None)
    p.add_argument("--threads", type=int, default=0)
    p.add_argument("--min-count", type=int, default=DEFAULT_MIN_KEEP_COUNT)
    p.add_argument("--recipes-dir", default=None)
    p.set_defaults(handler=cmd_recipe)

    p = sub.add_parser("serve", help="Run the MCP tool server on stdio.")
    p.set_defaults(handler=cmd_serve)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    settings = Settings.from_env()
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "recipe" and args.action in ("show", "run") and not args.name:
        parser.error(f"recipe {args.action} needs a recipe name")

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else getattr(logging, settings.log_level, logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    audit = AuditLogger(settings.audit_log)
    try:
        return args.handler(args, settings, audit)
    except (ForgeError, ValueError, KeyError, OSError) as e:
        logger.debug("Command failed", exc_info=True)
        print(f"Error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
