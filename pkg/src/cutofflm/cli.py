"""Command-line entry points for the full pipeline."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import tokenizer as tok
from .corpus.documents import CutoffSpec, read_documents
from .corpus.partition import partition_by_cutoff
from .corpus.shards import MANIFEST_NAME, ShardManifest, ShardSet, shard_tokens, verify_partition
from .curation.classify import EndpointClassifier, RuleBasedClassifier, filter_dataset
from .curation.finance import build_finance_prompts, generate_teacher_examples
from .curation.mix import assemble_year_mix
from .curation.types import load_examples, load_finance_records, load_mix, save_examples
from .endpoint import ChatEndpointClient
from .model.config import ModelConfig, param_count
from .training.checkpoint import load_checkpoint, save_checkpoint
from .training.finetune import finetune as run_finetune
from .training.pretrain import pretrain as run_pretrain
from .training.schedule import TrainSchedule


@click.group()
def main() -> None:
    """Train, verify, and serve language models with strict temporal cutoffs."""


def _load_docs(path: str):
    docs, stats = read_documents(path)
    if stats.records_rejected:
        click.echo(f"rejected {stats.records_rejected} malformed records", err=True)
    return docs


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--cutoff-year", required=True, type=int)
@click.option("--budget-tokens", type=int, default=None)
@click.option("--tokenizer", "tokenizer_path", required=True, type=click.Path(exists=True))
@click.option("--shard-size", type=int, default=65536, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
def partition(input_path, cutoff_year, budget_tokens, tokenizer_path, shard_size, out_dir):
    """Filter documents at the cutoff and emit verified token shards."""
    artifact = tok.load(tokenizer_path)
    spec = CutoffSpec(cutoff_year)
    docs = _load_docs(input_path)
    kept, report = partition_by_cutoff(docs, spec)
    shard_set = shard_tokens(
        kept, artifact, shard_size, spec, out_dir, budget_tokens=budget_tokens, report=report
    )
    click.echo(
        f"kept {report.docs_kept}/{report.docs_seen} documents, "
        f"emitted {report.tokens_emitted} tokens in {len(shard_set.manifest.shards)} shard(s)"
    )
    click.echo(f"manifest: {Path(out_dir) / MANIFEST_NAME}")


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--tokenizer", "tokenizer_path", type=click.Path(exists=True), default=None)
def verify(manifest_path, input_path, tokenizer_path):
    """Audit shards for temporal violations and corruption."""
    manifest = ShardManifest.load(manifest_path)
    shard_set = ShardSet(manifest=manifest, root=Path(manifest_path).parent)
    artifact = tok.load(tokenizer_path) if tokenizer_path else None
    docs = _load_docs(input_path)
    report = verify_partition(shard_set, docs, CutoffSpec(manifest.cutoff_year), artifact)
    for doc_id, ts in report.violations:
        click.echo(f"VIOLATION {doc_id} dated {ts}")
    for issue in report.corruptions:
        click.echo(f"CORRUPTION {issue}")
    if report.valid:
        click.echo(f"OK: {report.docs_kept} documents, {report.tokens_emitted} tokens")
    else:
        sys.exit(1)


@main.group(name="tokenizer")
def tokenizer_group() -> None:
    """Tokenizer training and inspection."""


@tokenizer_group.command(name="train")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--vocab-size", type=int, default=32000, show_default=True)
@click.option("--cutoff-year", required=True, type=int)
@click.option("--out", "out_path", required=True, type=click.Path())
def tokenizer_train(input_path, vocab_size, cutoff_year, out_path):
    """Train a byte-fallback BPE tokenizer on cutoff-filtered documents."""
    path = Path(input_path)
    files = sorted(path.glob("*.jsonl")) if path.is_dir() else [path]
    texts: list[str] = []
    spec = CutoffSpec(cutoff_year)
    for f in files:
        for doc in _load_docs(str(f)):
            if not spec.admits(doc):
                raise click.ClickException(
                    f"document {doc.id!r} dated {doc.timestamp} breaches cutoff {cutoff_year}; "
                    "tokenizer training data must respect the cutoff"
                )
            texts.append(doc.text)
    artifact = tok.train_bpe(texts, vocab_size, cutoff_year)
    tok.save(artifact, out_path)
    click.echo(
        f"trained {artifact.vocab_len}-token vocabulary "
        f"({len(artifact.merges)} merges), fingerprint {artifact.fingerprint[:12]}"
    )


def _read_train_config(path: str) -> tuple[ModelConfig, dict]:
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    return ModelConfig.from_dict(raw["model"]), raw.get("schedule", {})


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--tokenizer", "tokenizer_path", required=True, type=click.Path(exists=True))
@click.option("--steps", type=int, required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--checkpoint-interval", type=int, default=None)
@click.option("--out", "out_dir", required=True, type=click.Path())
def train(manifest_path, config_path, tokenizer_path, steps, seed, checkpoint_interval, out_dir):
    """Pretrain a model on a shard manifest."""
    config, sched_overrides = _read_train_config(config_path)
    schedule = TrainSchedule(**{**sched_overrides, "total_steps": steps})
    manifest = ShardManifest.load(manifest_path)
    shard_set = ShardSet(manifest=manifest, root=Path(manifest_path).parent)
    artifact = tok.load(tokenizer_path)
    counts = param_count(config)
    click.echo(
        f"model: {counts.total_params / 1e6:.1f}M params "
        f"({counts.non_embedding_params / 1e6:.1f}M non-embedding)"
    )
    checkpoints, trace = run_pretrain(
        config, shard_set, artifact, schedule, seed,
        out_dir=out_dir, checkpoint_interval=checkpoint_interval,
    )
    final = trace.losses[-1] if trace.entries else float("nan")
    click.echo(f"finished {steps} steps, final loss {final:.4f}; wrote {out_dir}/base.pt")


@main.command(name="finetune")
@click.option("--base", "base_path", required=True, type=click.Path(exists=True))
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--tokenizer", "tokenizer_path", required=True, type=click.Path(exists=True))
@click.option("--epochs", type=int, default=3, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--peak-lr", type=float, default=2e-4, show_default=True)
@click.option("--batch-size", type=int, default=8, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
def finetune_cmd(base_path, data_path, tokenizer_path, epochs, seed, peak_lr, batch_size, out_path):
    """Instruction-tune a base checkpoint on a yearly mix file."""
    base = load_checkpoint(base_path)
    artifact = tok.load(tokenizer_path)
    examples, header = load_mix(data_path)
    schedule = TrainSchedule(
        peak_lr=peak_lr, total_steps=1, batch_size_sequences=batch_size, warmup_fraction=0.10
    )
    tuned, trace = run_finetune(
        base, examples, header["cutoff_year"], artifact, schedule, seed,
        epochs=epochs, out_path=out_path,
    )
    click.echo(
        f"tuned on {len(examples)} examples for {epochs} epochs "
        f"({trace.entries[-1]['step']} steps); wrote {out_path}"
    )


@main.group()
def curate() -> None:
    """Instruction-data curation."""


@curate.command(name="filter")
@click.option("--in", "input_path", required=True, type=click.Path(exists=True))
@click.option("--classifier", type=click.Choice(["rule", "endpoint"]), default="rule")
@click.option("--endpoint-url", default=None)
@click.option("--endpoint-model", default=None)
@click.option("--kept", "kept_path", required=True, type=click.Path())
@click.option("--removed", "removed_path", type=click.Path(), default=None)
@click.option("--report", "report_path", required=True, type=click.Path())
def curate_filter(input_path, classifier, endpoint_url, endpoint_model, kept_path, removed_path, report_path):
    """Remove time-sensitive examples from a general-domain dataset."""
    dataset = load_examples(input_path)
    if classifier == "rule":
        clf = RuleBasedClassifier()
    else:
        if not endpoint_url or not endpoint_model:
            raise click.ClickException("--endpoint-url and --endpoint-model required")
        clf = EndpointClassifier(ChatEndpointClient(endpoint_url, endpoint_model))
    kept, removed, report = filter_dataset(dataset, clf, dataset_name=Path(input_path).stem)
    save_examples(kept, kept_path)
    if removed_path:
        save_examples(removed, removed_path)
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(report.to_json(), fh, indent=2)
    click.echo(
        f"{report.dataset}: {report.before} -> {report.after} "
        f"(removal rate {report.removal_rate_percent})"
    )


@curate.command(name="finance")
@click.option("--records", "records_path", required=True, type=click.Path(exists=True))
@click.option("--year", type=int, required=True)
@click.option("--target", type=int, default=6000, show_default=True)
@click.option("--teacher-url", default=None)
@click.option("--teacher-model", default=None)
@click.option("--out", "out_path", required=True, type=click.Path())
def curate_finance(records_path, year, target, teacher_url, teacher_model, out_path):
    """Build month-balanced finance prompts; with a teacher, generate examples."""
    records = load_finance_records(records_path)
    prompts = build_finance_prompts(records, year, per_year_target=target)
    if teacher_url and teacher_model:
        teacher = ChatEndpointClient(teacher_url, teacher_model)
        examples, dropped = generate_teacher_examples(prompts, teacher)
        save_examples(examples, out_path)
        click.echo(f"wrote {len(examples)} teacher examples ({dropped} dropped)")
    else:
        with open(out_path, "w", encoding="utf-8") as fh:
            for p in prompts:
                fh.write(json.dumps({
                    "kind": p.kind, "entity": p.entity,
                    "as_of": p.as_of.isoformat(), "user_text": p.user_text,
                }, ensure_ascii=False) + "\n")
        click.echo(f"wrote {len(prompts)} prompts for {year}")


@curate.command(name="mix")
@click.option("--year", type=int, required=True)
@click.option("--general", "general_path", required=True, type=click.Path(exists=True))
@click.option("--specific", "specific_path", required=True, type=click.Path(exists=True))
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
def curate_mix(year, general_path, specific_path, seed, out_path):
    """Assemble one year's instruction mix with the leakage guard."""
    general = load_examples(general_path)
    specific = load_examples(specific_path)
    mixed = assemble_year_mix(general, specific, year, seed, out_path=out_path)
    click.echo(f"mixed {len(mixed)} examples (cutoff {year}) -> {out_path}")


@main.command()
@click.option("--ckpt", "ckpt_path", required=True, type=click.Path(exists=True))
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--tokenizer", "tokenizer_path", required=True, type=click.Path(exists=True))
@click.option("--per-quarter", type=int, default=25, show_default=True)
@click.option("--plot/--no-plot", default=False)
@click.option("--out", "out_dir", required=True, type=click.Path())
def probe(ckpt_path, corpus_path, tokenizer_path, per_quarter, plot, out_dir):
    """Quarterly relative perplexity plus detected knowledge cutoff."""
    from .probe.breakpoint import detect_cutoff
    from .probe.series import relative_series

    checkpoint = load_checkpoint(ckpt_path)
    artifact = tok.load(tokenizer_path)
    docs = _load_docs(corpus_path)
    model = checkpoint.build_model()
    series = relative_series(
        model, artifact, docs, per_quarter, cutoff_year=checkpoint.cutoff_year
    )
    estimate = detect_cutoff(series)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    series.save(out / "series.json")
    with open(out / "cutoff_estimate.json", "w", encoding="utf-8") as fh:
        json.dump(estimate.to_json(), fh, indent=2)
    if estimate.degenerate:
        click.echo("series is flat; no reversal detected")
    else:
        click.echo(
            f"breakpoint at {estimate.breakpoint_label} "
            f"(slopes {estimate.pre_slope:+.4f} -> {estimate.post_slope:+.4f}, "
            f"gap {estimate.relative_gap:+.3f})"
        )
    if plot:
        _plot_series(series, estimate, out / "series.png")
        click.echo(f"plot: {out / 'series.png'}")


def _plot_series(series, estimate, path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    points = series.present_points()
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    fig, ax = plt.subplots(figsize=(9, 4))
    ax.plot(xs, ys, marker="o", lw=1)
    if estimate.breakpoint_index is not None:
        ax.axvline(estimate.breakpoint_index, color="red", ls="--",
                   label=f"breakpoint {estimate.breakpoint_label}")
        ax.legend()
    ticks = [x for x in xs if x % 4 == 0]
    ax.set_xticks(ticks)
    ax.set_xticklabels([f"{t // 4}" for t in ticks], rotation=45)
    ax.set_xlabel("quarter")
    ax.set_ylabel("relative perplexity")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


@main.group(name="eval")
def eval_group() -> None:
    """Benchmark scoring."""


@eval_group.command(name="mcq")
@click.option("--ckpt", "ckpt_path", required=True, type=click.Path(exists=True))
@click.option("--task", "task_path", required=True, type=click.Path(exists=True))
@click.option("--tokenizer", "tokenizer_path", required=True, type=click.Path(exists=True))
@click.option("--shots", type=click.Choice(["0", "5"]), default="0")
@click.option("--out", "out_path", type=click.Path(), default=None)
def eval_mcq(ckpt_path, task_path, tokenizer_path, shots, out_path):
    """Length-normalized log-likelihood multiple choice."""
    from .evals.mcq import load_mcq_task, run_task

    checkpoint = load_checkpoint(ckpt_path)
    artifact = tok.load(tokenizer_path)
    items = load_mcq_task(task_path)
    result = run_task(checkpoint.build_model(), artifact, items, shots=int(shots))
    if result.error_count:
        click.echo(f"warning: {result.error_count} item(s) errored", err=True)
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            for record in result.records:
                fh.write(json.dumps(record) + "\n")
    click.echo(f"accuracy: {result.accuracy:.4f} over {len(items)} items ({shots}-shot)")


@eval_group.command(name="ifeval")
@click.option("--ckpt", "ckpt_path", required=True, type=click.Path(exists=True))
@click.option("--task", "task_path", required=True, type=click.Path(exists=True))
@click.option("--tokenizer", "tokenizer_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", type=click.Path(), default=None)
def eval_ifeval(ckpt_path, task_path, tokenizer_path, out_path):
    """Prompt-level strict accuracy on verifiable constraints."""
    from .evals.constraints import load_constraint_task, run_instruction_task

    checkpoint = load_checkpoint(ckpt_path)
    artifact = tok.load(tokenizer_path)
    items = load_constraint_task(task_path)
    accuracy, records = run_instruction_task(checkpoint.build_model(), artifact, items)
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            for record in records:
                fh.write(json.dumps(record) + "\n")
    click.echo(f"prompt-level strict accuracy: {accuracy:.4f} over {len(items)} items")


@main.command()
@click.option("--registry", "registry_path", required=True, type=click.Path(exists=True))
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
def serve(registry_path, port, host):
    """Serve registered models over HTTP."""
    import uvicorn

    from .server.app import create_app
    from .server.registry import ModelRegistry

    registry = ModelRegistry.from_registry_file(registry_path)
    for entry in registry.list_entries():
        click.echo(f"loaded {entry.model_id} (cutoff {entry.cutoff_year}, {entry.stage})")
    uvicorn.run(create_app(registry), host=host, port=port)


if __name__ == "__main__":
    main()
