"""
Polyglot SRL Toolkit - Command-Line Entry Point

Subcommands:
    stats        training-data statistics of a CoNLL 2009 file
    embed        prepare (reduce and optionally align) word embeddings
    train        train a tagger from a key-value run configuration
    predict      label a CoNLL 2009 file with a trained checkpoint
    score        evaluate predictions against gold annotations
    analyze      compare evaluation reports

Exit codes: 0 on success, 1 on a toolkit or validation error, 2 on a usage
error. Logs go to stderr; tables requested without an output path go to
stdout.
"""

import argparse
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

from dotenv import dotenv_values

from app.config.logging_config import configure_logging
from app.config.settings import get_settings
from app.exceptions import SRLToolkitError
from app.models.conll_models import gold_predictions
from app.models.pydantic_models import RunConfig, RunManifest
from app.repositories.checkpoint_repository import CheckpointRepository
from app.repositories.conll_repository import ConllRepository
from app.repositories.embedding_repository import EmbeddingRepository
from app.repositories.report_repository import ReportRepository, file_digest
from app.services.corpus_service import CorpusService, extract_instances, stats_table
from app.services.embedding_service import EmbeddingService
from app.services.prediction_service import PredictionService
from app.services.scoring_service import ScoringService, format_summary
from app.services.training_service import TrainingService

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1


def _now() -> datetime:
    return datetime.now(timezone.utc)


def _plain(value: Any) -> Any:
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, (list, tuple)):
        return [_plain(item) for item in value]
    return value


def _manifest(command: str,
              args: argparse.Namespace,
              inputs: Iterable[Path],
              outputs: Sequence[Path],
              started_at: datetime,
              seed: Optional[int] = None,
              config: Optional[Dict[str, Any]] = None,
              notes: Optional[Dict[str, Any]] = None) -> RunManifest:
    settings = get_settings()
    echo = {key: _plain(value) for key, value in vars(args).items() if key != "handler"}
    if config:
        echo.update(config)
    return RunManifest(
        command=command,
        config=echo,
        input_digests={str(path): file_digest(path) for path in inputs},
        seed=seed,
        toolkit_version=settings.version,
        started_at=started_at,
        finished_at=_now(),
        outputs=[str(path) for path in outputs],
        notes=notes or {},
    )


def _resolve_args(args: argparse.Namespace, *names: str) -> None:
    """Resolve the named path arguments against the configured data directory."""
    resolve = get_settings().resolve_path
    for name in names:
        value = getattr(args, name)
        if value is None:
            continue
        if isinstance(value, list):
            value = [
                [resolve(item) for item in entry] if isinstance(entry, list) else resolve(entry) for entry in value
            ]
        else:
            value = resolve(value)
        setattr(args, name, value)


# Command handlers

def cmd_stats(args: argparse.Namespace) -> int:
    _resolve_args(args, "file", "output")
    service = CorpusService()
    stats = service.file_stats({args.lang: args.file})
    if args.output:
        service.save_stats(args.output, stats)
    else:
        sys.stdout.write(stats_table(stats).to_csv(lineterminator="\n"))

    if args.check:
        mismatches = service.check(stats)
        for mismatch in mismatches.get(args.lang, ()):
            sys.stderr.write(f"{args.lang}: {mismatch}\n")
        if mismatches:
            return EXIT_ERROR
    return EXIT_OK


def cmd_embed_prepare(args: argparse.Namespace) -> int:
    started_at = _now()
    _resolve_args(args, "vectors", "align_to", "dict", "output")
    if args.align_to is not None and args.dict is None:
        raise SRLToolkitError("--align-to requires --dict")
    if args.dict is not None and args.align_to is None:
        raise SRLToolkitError("--dict requires --align-to")

    service = EmbeddingService()
    table, projection = service.prepare(args.vectors, args.pca, pivot_path=args.align_to, dictionary_path=args.dict)
    inputs = [args.vectors]
    notes: Dict[str, Any] = {}
    if projection is not None:
        mean_correlation = float(projection.correlations.mean())
        notes = {"mean_canonical_correlation": mean_correlation, "dictionary_pairs": projection.n_pairs}
        sys.stdout.write(f"mean canonical correlation: {mean_correlation:.4f} over {projection.n_pairs} pairs\n")
        inputs += [args.align_to, args.dict]

    output = service.save(args.output, table)
    ReportRepository().save_manifest(
        output, _manifest("embed prepare", args, inputs, [output], started_at, notes=notes)
    )
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    started_at = _now()
    _resolve_args(args, "config")
    if not args.config.is_file():
        raise SRLToolkitError(f"run configuration {args.config} does not exist")
    values = dotenv_values(args.config)
    if args.seed is not None:
        values["seed"] = str(args.seed)
    run_config = RunConfig.from_key_values(values)
    if args.output_dir is not None:
        run_config = run_config.model_copy(update={"output_dir": args.output_dir})

    service = TrainingService()
    outputs = service.run(run_config)

    resolve = service.settings.resolve_path
    languages = run_config.model.languages
    inputs: List[Path] = [args.config]
    for files in (run_config.train_files, run_config.dev_files, run_config.embedding_files):
        inputs.extend(resolve(path) for language, path in sorted(files.items()) if language in languages)
    manifest = _manifest(
        "train", args, inputs, list(outputs.values()), started_at,
        seed=run_config.training.seed,
        config={"run": run_config.model_dump(mode="json")},
    )
    ReportRepository().save_manifest(outputs["checkpoint"], manifest)
    sys.stdout.write(f"checkpoint: {outputs['checkpoint']}\n")
    return EXIT_OK


def cmd_predict(args: argparse.Namespace) -> int:
    started_at = _now()
    _resolve_args(args, "checkpoint", "input", "output", "embeddings")
    checkpoint = CheckpointRepository().load(args.checkpoint)
    language = args.lang or checkpoint.config.primary_language
    if args.embeddings is not None:
        embedding_path = Path(args.embeddings)
    elif language in checkpoint.embedding_files:
        embedding_path = Path(checkpoint.embedding_files[language])
    else:
        raise SRLToolkitError(f"checkpoint records no embeddings for '{language}'; pass --embeddings")
    embeddings = {language: EmbeddingRepository().read_vectors(embedding_path)}

    corpus = ConllRepository().read(args.input, language)
    service = PredictionService.from_checkpoint(checkpoint, embeddings, n_jobs=args.n_jobs)
    predicted = service.predict_corpus(corpus, language=language)
    output = ConllRepository().write(args.output, predicted, gold_predictions(extract_instances(predicted)))
    ReportRepository().save_manifest(
        output, _manifest("predict", args, [args.checkpoint, args.input, embedding_path], [output], started_at)
    )
    return EXIT_OK


def cmd_score(args: argparse.Namespace) -> int:
    started_at = _now()
    _resolve_args(args, "gold", "pred", "output_dir")
    service = ScoringService()
    report = service.score_files(args.gold, args.pred, args.lang)
    outputs = service.write_report(args.output_dir, report)
    service.report_repository.save_manifest(
        outputs[0], _manifest("score", args, [args.gold, args.pred], outputs, started_at)
    )
    sys.stdout.write(format_summary(report))
    return EXIT_OK


def cmd_analyze(args: argparse.Namespace) -> int:
    started_at = _now()
    _resolve_args(args, "reports", "stats", "output_dir")
    service = ScoringService()
    summary, outputs = service.analyze([tuple(pair) for pair in args.reports], args.output_dir, args.stats)
    inputs = [path for pair in args.reports for path in pair] + list(args.stats or ())
    service.report_repository.save_manifest(outputs[-1], _manifest("analyze", args, inputs, outputs, started_at))
    sys.stdout.write(summary.to_csv(index=False, float_format="%.2f", lineterminator="\n"))
    return EXIT_OK


# Parser

def build_parser() -> argparse.ArgumentParser:
    settings = get_settings()
    parser = argparse.ArgumentParser(prog="polysrl", description=settings.app_name)
    parser.add_argument("--log-level", default=None, help="Override the configured log level")
    commands = parser.add_subparsers(dest="command", required=True)

    stats = commands.add_parser("stats", help="Sentence and predicate counts of a CoNLL 2009 file")
    stats.add_argument("file", type=Path)
    stats.add_argument("--lang", required=True, help="ISO 639-3 language code")
    stats.add_argument("--check", action="store_true", help="Compare against official training-set counts")
    stats.add_argument("--output", type=Path, default=None, help="CSV path (default: stdout)")
    stats.set_defaults(handler=cmd_stats)

    embed = commands.add_parser("embed", help="Embedding preparation")
    embed_commands = embed.add_subparsers(dest="embed_command", required=True)
    prepare = embed_commands.add_parser("prepare", help="PCA-reduce and optionally align vectors to a pivot")
    prepare.add_argument("--vectors", type=Path, required=True)
    prepare.add_argument("--pca", type=int, default=None, help=f"Target dimension (default {settings.pca_dimension})")
    prepare.add_argument("--align-to", type=Path, default=None, help="Pivot-language vectors")
    prepare.add_argument("--dict", type=Path, default=None, help="Bilingual dictionary (foreign TAB pivot)")
    prepare.add_argument("--output", type=Path, required=True, help=".joblib artifact or .txt/.vec text file")
    prepare.set_defaults(handler=cmd_embed_prepare)

    train = commands.add_parser("train", help="Train a tagger")
    train.add_argument("--config", type=Path, required=True, help="Key-value run configuration")
    train.add_argument("--seed", type=int, default=None, help="Override the configured seed")
    train.add_argument("--output-dir", type=Path, default=None)
    train.set_defaults(handler=cmd_train)

    predict = commands.add_parser("predict", help="Label a CoNLL 2009 file")
    predict.add_argument("--checkpoint", type=Path, required=True)
    predict.add_argument("--input", type=Path, required=True)
    predict.add_argument("--output", type=Path, required=True)
    predict.add_argument("--lang", default=None, help="Language head to use (default: the model's first language)")
    predict.add_argument("--embeddings", type=Path, default=None, help="Override the recorded embedding file")
    predict.add_argument("--n-jobs", type=int, default=1)
    predict.set_defaults(handler=cmd_predict)

    score_parser = commands.add_parser("score", help="Semantic F1 of predictions against gold")
    score_parser.add_argument("--gold", type=Path, required=True)
    score_parser.add_argument("--pred", type=Path, required=True)
    score_parser.add_argument("--lang", required=True)
    score_parser.add_argument("--output-dir", type=Path, required=True)
    score_parser.set_defaults(handler=cmd_score)

    analyze = commands.add_parser("analyze", help="F1 differences between evaluation reports")
    analyze.add_argument("--reports", nargs=2, type=Path, action="append", required=True,
                         metavar=("BASELINE", "COMPARED"),
                         help="Report pair; repeat for several languages")
    analyze.add_argument("--stats", nargs="+", type=Path, default=None, help="stats CSVs for ordering the summary")
    analyze.add_argument("--output-dir", type=Path, required=True)
    analyze.set_defaults(handler=cmd_analyze)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run one command.

    Args:
        argv: Arguments without the program name (default: ``sys.argv[1:]``)

    Returns:
        int: Process exit code
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(level=args.log_level)
    try:
        return args.handler(args)
    except ValueError as e:
        logger.error(f"{args.command} failed: {e}")
        sys.stderr.write(f"error: {_one_line(e)}\n")
        return EXIT_ERROR
    except OSError as e:
        logger.error(f"{args.command} failed: {e}")
        sys.stderr.write(f"error: {e}\n")
        return EXIT_ERROR


def _one_line(error: Exception) -> str:
    return " ".join(str(error).split())


if __name__ == "__main__":
    sys.exit(main())
