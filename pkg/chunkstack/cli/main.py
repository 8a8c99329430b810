"""
chunkstack command line.

stdout carries machine-readable output only (config echoes, JSON report lines,
prediction rows); logs go to stderr.
"""

import json
import logging
import sys
from typing import Any, Callable, Dict, List, Optional

import click

from chunkstack import __version__
from chunkstack.baselines.bow import BowConfig, bow_baseline
from chunkstack.baselines.truncation import truncation_baseline
from chunkstack.cli.config_file import resolve_train_config
from chunkstack.cli.error_handling import CommandFailed, command_errors
from chunkstack.cli.manifest import RunManifest, emit_manifest, file_hash
from chunkstack.data.corpus import label_count, load_corpus, load_texts
from chunkstack.data.synth import SignalKind, SynthSpec, write_synth
from chunkstack.evaluation.report import evaluate
from chunkstack.model.config import AggregatorKind, ModelProfile, WordPool
from chunkstack.model.hierarchical import HierarchicalClassifier
from chunkstack.pipeline.gradcheck import model_grad_check
from chunkstack.text.chunker import TruncateSide
from chunkstack.text.tokenizer import Vocabulary, build_vocab
from chunkstack.training.checkpoint import load_model, save_model
from chunkstack.training.config import PRESETS, Schedule, TrainConfig, TrainMode
from chunkstack.training.trainer import train as train_model

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
LOG_DATEFMT = "%Y-%m-%d %H:%M:%S"


def configure_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, level.upper()),
        format=LOG_FORMAT,
        datefmt=LOG_DATEFMT,
        handlers=[logging.StreamHandler(sys.stderr)],
        force=True,
    )


def _choices(enum: Any) -> click.Choice:
    return click.Choice([member.value for member in enum])


# One flag per TrainConfig field; None means "not given" so lower layers win.
TRAIN_OPTIONS: List[Callable] = [
    click.option("--preset", type=click.Choice(sorted(PRESETS)), help="Start from a preset."),
    click.option(
        "--config",
        "config_path",
        type=click.Path(exists=True, dir_okay=False),
        help="key=value file layered over the preset.",
    ),
    click.option("--lr", type=float),
    click.option("--batch-size", type=int),
    click.option("--grad-accum-steps", type=int),
    click.option("--epochs", type=int),
    click.option("--warmup-steps", type=int),
    click.option("--max-steps", type=int),
    click.option("--schedule", type=_choices(Schedule)),
    click.option("--mode", type=_choices(TrainMode)),
    click.option("--seed", type=int),
    click.option("--dtype", type=click.Choice(["f32", "f64"])),
    click.option("--word-pool", type=_choices(WordPool)),
    click.option("--aggregator", type=_choices(AggregatorKind)),
    click.option("--balance/--no-balance", default=None),
    click.option("--dropout", type=float),
    click.option("--cache-features/--no-cache-features", default=None),
    click.option("--profile", type=_choices(ModelProfile)),
    click.option("--content-len", type=int, help="Content tokens per chunk (default 202)."),
    click.option("--max-chunks", type=int, help="Chunks kept per document (default 32)."),
    click.option("--cls-in-content-len/--cls-outside-content-len", default=None),
    click.option("--truncate-side", type=_choices(TruncateSide)),
    click.option("--init-std", type=float),
    click.option("--key-dim", type=int),
]


def train_options(fn: Callable) -> Callable:
    for option in reversed(TRAIN_OPTIONS):
        fn = option(fn)
    return fn


def _train_config(preset: Optional[str], config_path: Optional[str], flags: Dict[str, Any]) -> TrainConfig:
    fields = {k: v for k, v in flags.items() if k in TrainConfig.model_fields}
    return resolve_train_config(preset, config_path, fields)


def format_setting(value) -> str:
    """Echo form of one config value: ``none`` for unset, exponents without zero padding (3e-5)."""
    if value is None:
        return "none"
    if isinstance(value, float):
        mantissa, sep, exponent = repr(value).partition("e")
        return f"{mantissa}e{int(exponent)}" if sep else mantissa
    return str(value)


def echo_config(cfg: TrainConfig) -> None:
    for key, value in cfg.model_dump(mode="json").items():
        click.echo(f"{key}={format_setting(value)}")


def _load_vocab_and_model(checkpoint: str, vocab_path: str):
    model, metadata = load_model(checkpoint)
    expected = metadata.get("vocab_hash")
    if expected is not None and expected != file_hash(vocab_path):
        raise ValueError(f"{vocab_path} is not the vocabulary {checkpoint} was trained with")
    return HierarchicalClassifier(model, Vocabulary.load(vocab_path)), metadata


@click.group()
@click.option(
    "--log-level",
    type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
    default="INFO",
    show_default=True,
)
@click.version_option(__version__, prog_name="chunkstack")
def cli(log_level: str) -> None:
    """Hierarchical transformer classifier for long documents."""
    configure_logging(log_level)


@cli.command("vocab-build")
@click.option(
    "--corpus",
    "corpora",
    multiple=True,
    required=True,
    type=click.Path(exists=True, dir_okay=False),
    help="JSON-lines corpus; repeatable.",
)
@click.option("--size", type=int, required=True, help="Target vocabulary size, reserved tokens included.")
@click.option("--output", required=True, type=click.Path(dir_okay=False))
@command_errors("vocab-build")
def vocab_build(corpora: List[str], size: int, output: str) -> None:
    """Build a whole-word vocabulary from the most frequent corpus words."""
    texts = [text for path in corpora for _, text in load_texts(path)]
    vocab = build_vocab(texts, size)
    vocab.save(output)
    logger.info(f"Saved {len(vocab)}-token vocabulary to {output}")
    emit_manifest(
        RunManifest.for_run("vocab-build", {"size": size}, inputs=corpora, outputs=[output]),
        output=output,
    )


@cli.command()
@click.option("--output", required=True, type=click.Path(file_okay=False), help="Output directory.")
@click.option("--n-docs", type=int)
@click.option("--n-test-docs", type=int)
@click.option("--vocab-size", type=int)
@click.option("--doc-len-mean", type=int)
@click.option("--doc-len-jitter", type=int)
@click.option("--n-class", type=int)
@click.option("--signal", "signal_kind", type=_choices(SignalKind))
@click.option("--signal-offset", "signal_offset_tokens", type=int)
@click.option("--content-len", type=int)
@click.option("--plant-in-first-chunk/--plant-anywhere", default=None)
@click.option("--seed", type=int)
@command_errors("synth")
def synth(output: str, **fields: Any) -> None:
    """Generate a synthetic train/test corpus pair."""
    spec = SynthSpec(**{k: v for k, v in fields.items() if v is not None})
    paths = write_synth(spec, output)
    for name, path in paths.items():
        click.echo(f"{name}={path}")
    emit_manifest(
        RunManifest.for_run(
            "synth", spec.model_dump(mode="json"), outputs=list(paths.values()), seed=spec.seed
        ),
        output=output,
    )


@cli.command("train")
@click.option("--corpus", type=click.Path(exists=True, dir_okay=False))
@click.option("--vocab", "vocab_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--output", type=click.Path(dir_okay=False), help="Checkpoint path.")
@click.option("--n-class", type=int, help="Defaults to the largest label + 1.")
@click.option("--dry-run", is_flag=True, help="Echo the resolved config and stop.")
@train_options
@command_errors("train")
def train_command(
    corpus: Optional[str],
    vocab_path: Optional[str],
    output: Optional[str],
    n_class: Optional[int],
    dry_run: bool,
    preset: Optional[str],
    config_path: Optional[str],
    **flags: Any,
) -> None:
    """Train a hierarchical model and write a checkpoint."""
    cfg = _train_config(preset, config_path, flags)
    echo_config(cfg)
    if dry_run:
        return
    missing = [name for name, value in (("--corpus", corpus), ("--vocab", vocab_path), ("--output", output)) if not value]
    if missing:
        raise click.UsageError(f"Missing option(s): {', '.join(missing)}")
    records = load_corpus(corpus, n_class)
    vocab = Vocabulary.load(vocab_path)
    n_class = label_count(records) if n_class is None else n_class
    model_config = cfg.to_model_config(len(vocab), n_class)
    result = train_model(records, vocab, model_config, cfg)
    save_model(
        output,
        result.model,
        extra={"train_config": cfg.model_dump(mode="json"), "vocab_hash": file_hash(vocab_path)},
    )
    click.echo(f"steps={len(result.logs)}")
    click.echo(f"final_loss={result.final_loss:.6f}")
    click.echo(f"checkpoint={output}")
    emit_manifest(
        RunManifest.for_run(
            "train",
            cfg.model_dump(mode="json"),
            inputs=[corpus, vocab_path],
            outputs=[output],
            seed=cfg.seed,
        ),
        output=output,
    )


@cli.command("eval")
@click.option("--checkpoint", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--vocab", "vocab_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--corpus", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--format", "fmt", type=click.Choice(["json", "text"]), default="json", show_default=True)
@click.option("--manifest", "manifest_path", type=click.Path(dir_okay=False))
@command_errors("eval")
def eval_command(checkpoint: str, vocab_path: str, corpus: str, fmt: str, manifest_path: Optional[str]) -> None:
    """Score a checkpoint on a labeled corpus; prints one JSON line."""
    classifier, _ = _load_vocab_and_model(checkpoint, vocab_path)
    report = evaluate(classifier, load_corpus(corpus, classifier.n_class))
    click.echo(report.to_json_line() if fmt == "json" else report.to_text())
    emit_manifest(
        RunManifest.for_run("eval", {"format": fmt}, inputs=[checkpoint, vocab_path, corpus]),
        manifest_path=manifest_path,
    )


@cli.command()
@click.option("--checkpoint", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--vocab", "vocab_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--corpus", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--manifest", "manifest_path", type=click.Path(dir_okay=False))
@command_errors("predict")
def predict(checkpoint: str, vocab_path: str, corpus: str, manifest_path: Optional[str]) -> None:
    """Print "id<TAB>label<TAB>probabilities" per document."""
    classifier, _ = _load_vocab_and_model(checkpoint, vocab_path)
    pairs = load_texts(corpus)
    probs = classifier.predict_proba([text for _, text in pairs])
    for (doc_id, _), row in zip(pairs, probs):
        click.echo(f"{doc_id}\t{int(row.argmax())}\t{','.join(f'{p:.6f}' for p in row)}")
    emit_manifest(
        RunManifest.for_run("predict", {}, inputs=[checkpoint, vocab_path, corpus]),
        manifest_path=manifest_path,
    )


@cli.command()
@click.option("--dtype", type=click.Choice(["f32", "f64"]), default="f64", show_default=True)
@click.option("--tiny/--no-tiny", default=True, show_default=True, help="Use the tiny geometry.")
@click.option("--aggregator", type=_choices(AggregatorKind), default=AggregatorKind.TRANSFORMER.value)
@click.option("--word-pool", type=_choices(WordPool), default=WordPool.CLS.value)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--tol", type=float, default=1e-4, show_default=True)
@click.option("--manifest", "manifest_path", type=click.Path(dir_okay=False))
@command_errors("gradcheck")
def gradcheck(
    dtype: str, tiny: bool, aggregator: str, word_pool: str, seed: int, tol: float, manifest_path: Optional[str]
) -> None:
    """Compare analytic gradients of the full model with central differences."""
    if not tiny:
        raise click.UsageError("Gradient checks run on the tiny geometry only; pass --tiny")
    report = model_grad_check(
        seed=seed, aggregator=AggregatorKind(aggregator), word_pool=WordPool(word_pool), dtype=dtype, tol=tol
    )
    click.echo(
        json.dumps(
            {
                "max_rel_err": report.max_rel_err,
                "passed": report.passed,
                "n_scalars": report.n_scalars,
                "tol": report.tol,
            }
        )
    )
    emit_manifest(
        RunManifest.for_run(
            "gradcheck",
            {"dtype": dtype, "aggregator": aggregator, "word_pool": word_pool, "tol": tol},
            seed=seed,
        ),
        manifest_path=manifest_path,
    )
    if not report.passed:
        worst = report.worst(1)[0]
        raise CommandFailed(
            "Gradient check failed",
            f"max relative error {report.max_rel_err:.3e} > {tol:.1e} in {worst.name}",
            "gradcheck",
        )


@cli.command()
@click.option("--kind", type=click.Choice(["truncation", "bow"]), required=True)
@click.option("--train", "train_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--test", "test_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--vocab", "vocab_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--n-class", type=int)
@click.option("--bow-lr", type=float)
@click.option("--bow-l2", type=float)
@click.option("--bow-steps", type=int)
@click.option("--manifest", "manifest_path", type=click.Path(dir_okay=False))
@train_options
@command_errors("baseline")
def baseline(
    kind: str,
    train_path: str,
    test_path: str,
    vocab_path: str,
    n_class: Optional[int],
    bow_lr: Optional[float],
    bow_l2: Optional[float],
    bow_steps: Optional[int],
    manifest_path: Optional[str],
    preset: Optional[str],
    config_path: Optional[str],
    **flags: Any,
) -> None:
    """Train and score the truncation or bag-of-words baseline; prints one JSON line."""
    train_records = load_corpus(train_path, n_class)
    test_records = load_corpus(test_path, n_class)
    vocab = Vocabulary.load(vocab_path)
    n_class = max(label_count(train_records), label_count(test_records)) if n_class is None else n_class
    if kind == "truncation":
        cfg = _train_config(preset, config_path, flags)
        report = truncation_baseline(train_records, test_records, vocab, cfg, n_class)
        settings = cfg.model_dump(mode="json")
    else:
        bow_settings = {"lr": bow_lr, "l2": bow_l2, "steps": bow_steps, "seed": flags.get("seed")}
        bow_cfg = BowConfig(**{k: v for k, v in bow_settings.items() if v is not None})
        report = bow_baseline(train_records, test_records, vocab, bow_cfg, n_class)
        settings = bow_cfg.model_dump(mode="json")
    click.echo(report.to_json_line())
    emit_manifest(
        RunManifest.for_run(f"baseline-{kind}", settings, inputs=[train_path, test_path, vocab_path]),
        manifest_path=manifest_path,
    )


def main() -> None:
    cli(prog_name="chunkstack")


if __name__ == "__main__":
    main()
