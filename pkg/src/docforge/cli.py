"""Command-line entry points wrapping the library modules.

Exit codes: 1 usage, 2 bad input, 3 provider failure, 4 internal error.
All output with mock providers and fixed seeds is byte-reproducible.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click

from .agreement import agreement_report, load_rating_matrices
from .corpus import ingest, render_table, run_experiment, runs_payload
from .deid import RemoteDetector, RuleDetector, deidentify
from .errors import (
    AllCasesFailed,
    DetectorUnavailable,
    DocforgeError,
    DuplicateId,
    EmbeddingError,
    EmptyReferences,
    ExhaustedRetries,
    GatewayTimeout,
    GenerationFailed,
    MissingCells,
    NoPairableValues,
    PipelineError,
    PlanningFailed,
    ProviderError,
    SpanOutOfRange,
    Unreadable,
    ZeroVarianceRater,
)
from .gateway import Gateway, MockScript, ProviderConfig
from .judge import JudgeCase, run_geval
from .memory import MemoryIndex
from .metrics import mean_reports, score_pair
from .model import DocumentSpec, GenerationConfig, Mode, validate_spec
from .planner import approve_plan, generate_plan
from .engine import run_pipeline

EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_PROVIDER = 3
EXIT_INTERNAL = 4

MODE_NAMES = {
    "full": Mode.FULL_WRAPPER,
    "long": Mode.LONG_PROMPT_ONLY,
    "retrieval": Mode.RETRIEVAL_ONLY,
    "structure": Mode.STRUCTURE_ONLY,
}

_INPUT_ERRORS = (
    Unreadable,
    DuplicateId,
    MissingCells,
    NoPairableValues,
    ZeroVarianceRater,
    EmptyReferences,
    SpanOutOfRange,
)
_PROVIDER_ERRORS = (
    ProviderError,
    GatewayTimeout,
    ExhaustedRetries,
    PlanningFailed,
    GenerationFailed,
    PipelineError,
    DetectorUnavailable,
    AllCasesFailed,
    EmbeddingError,
)

# built-in deterministic script so commands work without a provider file
DEMO_SCRIPT = MockScript(
    rules=(
        (
            "numbered list",
            "1. Introduction\n2. Definitions\n3. Obligations\n"
            "4. Term and Termination\n5. General Provisions",
        ),
        ('titled "', "Standard provisions apply to this part.\nSUMMARY: covers {{hash}}."),
        ("Write part", "Continuing provisions for this part.\nSUMMARY: part {{hash}}."),
    ),
    default_template="General drafted text.\nSUMMARY: general summary {{hash}}.",
)


def _load_gateway(provider_path) -> Gateway:
    if provider_path is None:
        return Gateway(ProviderConfig(kind="mock", script=DEMO_SCRIPT))
    return Gateway(ProviderConfig.from_file(provider_path))


def _read_json(path):
    with open(path, "r", encoding="utf-8") as handle:
        return json.load(handle)


def _read_jsonl(path):
    rows = []
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}: line {line_no}: {exc}")
    return rows


def _emit_records(rows):
    for row in rows:
        click.echo(json.dumps(row, sort_keys=True))


def _fmt(value, places=4):
    if value is None:
        return "-"
    return f"{value:.{places}f}"


format_option = click.option(
    "--format", "fmt", type=click.Choice(["table", "records"]), default="table",
    show_default=True, help="Plain table or one JSON record per line.",
)


@click.group()
def cli():
    """Structured long-document drafting toolkit."""


@cli.command("plan")
@click.option("--title", required=True)
@click.option("--description", required=True)
@click.option("--category", default="")
@click.option("--provider", type=click.Path(dir_okay=False), default=None)
@click.option("--seed", type=int, default=0, show_default=True)
def plan_cmd(title, description, category, provider, seed):
    """Draft the numbered section plan for a document."""
    gateway = _load_gateway(provider)
    spec = DocumentSpec(id="cli-plan", title=title, description=description,
                        category=category)
    config = GenerationConfig(seed=seed)
    result = generate_plan(spec, gateway, config)
    for index, text in enumerate(result.texts, start=1):
        click.echo(f"{index}. {text}")


@cli.command("generate")
@click.option("--spec", "spec_path", required=True,
              type=click.Path(dir_okay=False))
@click.option("--mode", "mode_name", type=click.Choice(sorted(MODE_NAMES)),
              default="full", show_default=True)
@click.option("--auto-approve", is_flag=True,
              help="Approve the generated plan without review.")
@click.option("--provider", type=click.Path(dir_okay=False), default=None)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--top-k", type=int, default=3, show_default=True)
@click.option("--budget", type=int, default=4500, show_default=True,
              help="Context token budget per section.")
@click.option("--polish/--no-polish", default=False, show_default=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=".",
              show_default=True)
def generate_cmd(spec_path, mode_name, auto_approve, provider, seed, top_k,
                 budget, polish, out_dir):
    """Generate a full draft; writes draft.json and trace.json."""
    payload = _read_json(spec_path)
    spec = DocumentSpec.from_payload(payload)
    violations = validate_spec(spec)
    if violations:
        raise ValueError(f"invalid spec: {'; '.join(violations)}")
    mode = MODE_NAMES[mode_name]
    config = GenerationConfig(mode=mode, top_k=top_k, context_token_budget=budget,
                              llm_polish=polish, seed=seed)
    gateway = _load_gateway(provider)
    plan = None
    if mode.uses_plan:
        if not auto_approve:
            raise click.UsageError(
                "this mode needs an approved plan; pass --auto-approve "
                "(interactive review lives in the web UI)"
            )
        plan = approve_plan(generate_plan(spec, gateway, config))
    trace: list = []
    draft = run_pipeline(spec, plan, gateway, MemoryIndex(), config,
                         trace_sink=trace)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "draft.json").write_text(
        json.dumps(draft.to_payload(), sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )
    (out / "trace.json").write_text(
        json.dumps(trace, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    click.echo(draft.assembled_text)


@cli.command("deid")
@click.option("--in", "in_path", required=True,
              type=click.Path(dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--detector", "detector_url", default=None,
              help="Remote detector endpoint; rule-based when omitted.")
@click.option("--min-len", type=int, default=3, show_default=True)
def deid_cmd(in_path, out_path, detector_url, min_len):
    """Redact entities from a text file and report what was replaced."""
    text = Path(in_path).read_text(encoding="utf-8")
    detector = RemoteDetector(detector_url) if detector_url else RuleDetector()
    redacted, report = deidentify(text, detector, min_len=min_len)
    Path(out_path).write_text(redacted, encoding="utf-8")
    click.echo(json.dumps(report.to_payload(), sort_keys=True))


@cli.command("eval")
@click.option("--pairs", "pairs_path", required=True,
              type=click.Path(dir_okay=False))
@format_option
def eval_cmd(pairs_path, fmt):
    """Score candidate/reference pairs with the lexical metrics."""
    rows = _read_jsonl(pairs_path)
    if not rows:
        raise ValueError(f"{pairs_path}: no pairs")
    reports = []
    out_rows = []
    for index, row in enumerate(rows):
        if "candidate" not in row or "reference" not in row:
            raise ValueError(f"pair {index}: needs candidate and reference")
        report = score_pair(str(row["candidate"]), str(row["reference"]))
        reports.append(report)
        out_rows.append(
            {
                "id": str(row.get("id", index)),
                "rouge_l_f1": report.rouge_l["f1"],
                "bleu": report.bleu,
                "meteor": report.meteor,
            }
        )
    means = mean_reports(reports)
    mean_row = {"id": "mean", **means}
    if fmt == "records":
        _emit_records(out_rows + [mean_row])
        return
    header = f"{'id':<16} {'rouge_l_f1':>10} {'bleu':>10} {'meteor':>10}"
    click.echo(header)
    click.echo("-" * len(header))
    for row in out_rows + [mean_row]:
        click.echo(
            f"{row['id']:<16} {_fmt(row['rouge_l_f1']):>10} "
            f"{_fmt(row['bleu']):>10} {_fmt(row['meteor']):>10}"
        )


@cli.command("judge")
@click.option("--cases", "cases_path", required=True,
              type=click.Path(dir_okay=False))
@click.option("--provider", required=True,
              type=click.Path(dir_okay=False))
@click.option("--samples", type=int, default=1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@format_option
def judge_cmd(cases_path, provider, samples, seed, fmt):
    """Run the LLM judge over prepared cases."""
    rows = _read_jsonl(cases_path)
    try:
        cases = [
            JudgeCase(
                doc_des=str(row["doc_des"]),
                actual_document=str(row["actual_document"]),
                generated_document=str(row["generated_document"]),
            )
            for row in rows
        ]
    except KeyError as exc:
        raise ValueError(f"case is missing field {exc}")
    gateway = _load_gateway(provider)
    result = run_geval(cases, gateway, samples=samples, seed=seed)
    if fmt == "records":
        _emit_records(result["scores"])
        click.echo(json.dumps(
            {"failed": result["failed"], "mean": result["mean"],
             "scored": result["scored"]},
            sort_keys=True,
        ))
        return
    header = f"{'case':<6} {'score':>6} {'parse':<8} error"
    click.echo(header)
    click.echo("-" * len(header))
    for entry in result["scores"]:
        score = "-" if entry["score"] is None else f"{entry['score']:g}"
        click.echo(
            f"{entry['index']:<6} {score:>6} {entry['parse'] or '-':<8} "
            f"{entry['error'] or ''}".rstrip()
        )
    click.echo(f"mean {result['mean']:.4f} over {result['scored']} case(s)")


@cli.command("iaa")
@click.option("--ratings", "ratings_path", required=True,
              type=click.Path(dir_okay=False))
@format_option
def iaa_cmd(ratings_path, fmt):
    """Inter-annotator agreement per (model, criterion)."""
    matrices = load_rating_matrices(ratings_path)
    report = agreement_report(matrices)
    if fmt == "records":
        for row in report["rows"]:
            click.echo(json.dumps(row, sort_keys=True))
        return
    header = (
        f"{'model':<12} {'criterion':<18} {'fleiss':>8} {'cohen':>8} "
        f"{'icc':>8} {'alpha':>8} {'pearson':>8}"
    )
    click.echo(header)
    click.echo("-" * len(header))
    for row in report["rows"]:
        click.echo(
            f"{row['model_id']:<12} {row['criterion']:<18} "
            f"{_fmt(row['fleiss_kappa']):>8} {_fmt(row['cohens_kappa']):>8} "
            f"{_fmt(row['icc_2_1']):>8} {_fmt(row['krippendorff_alpha']):>8} "
            f"{_fmt(row['pearson_r']):>8}"
        )


@cli.command("experiment")
@click.option("--corpus", "corpus_path", required=True,
              type=click.Path(dir_okay=False))
@click.option("--configs", "configs_path", required=True,
              type=click.Path(dir_okay=False))
@click.option("--provider", type=click.Path(dir_okay=False), default=None)
@click.option("--judge-provider", type=click.Path(dir_okay=False),
              default=None)
@format_option
def experiment_cmd(corpus_path, configs_path, provider, judge_provider, fmt):
    """Run every config against every corpus record and aggregate."""
    records, errors = ingest(corpus_path)
    for entry in errors:
        click.echo(f"skipping line {entry['line']}: {entry['error']}", err=True)
    if not records:
        raise ValueError(f"{corpus_path}: no usable records")
    config_payloads = _read_json(configs_path)
    if not isinstance(config_payloads, list) or not config_payloads:
        raise ValueError(f"{configs_path}: expected a non-empty list of configs")
    configs = [GenerationConfig.from_payload(p) for p in config_payloads]
    gateway = _load_gateway(provider)
    judge_gateway = _load_gateway(judge_provider) if judge_provider else None
    runs = run_experiment(records, configs, gateway, judge_gateway)
    if fmt == "records":
        click.echo(json.dumps(runs_payload(runs), sort_keys=True))
        return
    click.echo(render_table(runs))


@cli.command("serve")
@click.option("--config", "config_path", type=click.Path(dir_okay=False),
              default=None, help="Service config file; flags override its fields.")
@click.option("--provider", type=click.Path(dir_okay=False), default=None)
@click.option("--judge-provider", type=click.Path(dir_okay=False),
              default=None)
@click.option("--host", default=None)
@click.option("--port", type=int, default=None)
@click.option("--data-dir", type=click.Path(file_okay=False), default=None)
@click.option("--sync", "sync_mode", flag_value=True, default=None,
              help="Run planning and generation inline with each request.")
def serve_cmd(config_path, provider, judge_provider, host, port, data_dir, sync_mode):
    """Start the HTTP service."""
    import uvicorn

    from .service import JobService, create_app

    file_cfg = _read_json(config_path) if config_path else {}
    if not isinstance(file_cfg, dict):
        raise ValueError(f"{config_path}: expected an object")

    def pick(flag, key, env, default):
        if flag is not None:
            return flag
        if key in file_cfg:
            return file_cfg[key]
        return os.environ.get(env, default)

    provider = pick(provider, "provider", "DOCFORGE_PROVIDER_CONFIG", None)
    judge_provider = pick(judge_provider, "judge_provider", "DOCFORGE_JUDGE_CONFIG", None)
    data_dir = pick(data_dir, "data_dir", "DOCFORGE_DATA_DIR", None)
    addr = os.environ.get("DOCFORGE_ADDR", "")
    env_host, _, env_port = addr.partition(":")
    if host is None:
        host = file_cfg.get("host") or env_host or "127.0.0.1"
    if port is None:
        port = int(file_cfg.get("port", env_port or 8337))
    sync = bool(file_cfg.get("sync", False)) if sync_mode is None else True
    service = JobService(
        gateway=_load_gateway(provider) if provider else Gateway(
            ProviderConfig(kind="mock", script=DEMO_SCRIPT)
        ),
        judge_gateway=_load_gateway(judge_provider) if judge_provider else None,
        data_dir=data_dir,
        sync=sync,
    )
    # the bearer token never lives in a config file
    app = create_app(service, auth_token=os.environ.get("DOCFORGE_API_TOKEN"))
    click.echo(f"listening on {host}:{port}", err=True)
    uvicorn.run(app, host=host, port=port, log_level="warning")


def run(argv=None) -> int:
    """Dispatch and fold every failure into the documented exit codes."""
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return EXIT_USAGE
    except click.Abort:
        return EXIT_USAGE
    except _PROVIDER_ERRORS as exc:
        click.echo(f"provider error: {exc}", err=True)
        return EXIT_PROVIDER
    except _INPUT_ERRORS as exc:
        click.echo(f"input error: {exc}", err=True)
        return EXIT_INPUT
    except (ValueError, KeyError, OSError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        click.echo(f"input error: {exc}", err=True)
        return EXIT_INPUT
    except DocforgeError as exc:
        click.echo(f"internal error: {type(exc).__name__}: {exc}", err=True)
        return EXIT_INTERNAL
    except Exception as exc:  # last resort; never a traceback for operators
        click.echo(f"internal error: {type(exc).__name__}: {exc}", err=True)
        return EXIT_INTERNAL


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
