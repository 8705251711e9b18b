"""
volcal CLI
Batch entry point: price quotes, calibrate models, evaluate in/out-of-sample
errors, run Monte-Carlo and mixture oracles, chart evaluation documents and
run the multi-dataset benchmark.

Structured documents are always written under --output-dir; stdout carries
either a text table or the same structured document (--format structured).
Logs go to stderr.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any, NoReturn

import click
import pandas as pd
import structlog
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, ValidationError

from src.calibration.calibrator import (
    CalibrationConfig,
    CalibrationResult,
    calibrate,
    read_calibration,
    write_calibration,
)
from src.config import Settings
from src.errors import InputValidationError, VolcalError
from src.evaluation.benchmark import render_benchmark, run_benchmark, write_benchmark
from src.evaluation.charts import slugify, write_charts
from src.evaluation.report import (
    evaluate_dataset,
    read_evaluation,
    render_comparison_table,
    render_error_table,
    render_worst_counts,
    write_evaluation,
)
from src.market_data.loader import read_quotes_file, split_in_out
from src.observability.logs import configure_logging
from src.observability.metrics import dump_metrics, track_stage
from src.oracle.monte_carlo import McConfig, mc_bs_call, mc_heston_calls
from src.pricing.black_scholes import bs_call
from src.pricing.engine import intrinsic_bounds, load_params, price_dataset
from src.pricing.heston import heston_call
from src.pricing.models import BsParams, HestonParams, ModelKind, MsvParams, params_to_dict
from src.pricing.msv import DEFAULT_ORDER, msv_call, msv_mixture_oracle
from src.scripts.quote_generator import main as generate_command
from src.streams import SEED_MAX

logger = structlog.get_logger()

MODEL_CHOICE = click.Choice([m.value for m in ModelKind])
ORDER_CHOICE = click.Choice(["2", "3", "4"])
BOUND_SLACK = {ModelKind.BS: 1e-8, ModelKind.HESTON: 1e-8, ModelKind.MSV: 1e-6}
EXISTING_FILE = click.Path(exists=True, dir_okay=False, path_type=Path)


@dataclass
class RunContext:
    """Resolved global options shared by every subcommand."""

    seed: int
    output_dir: Path
    fmt: str
    workers: int

    def output(self, name: str) -> Path:
        self.output_dir.mkdir(parents=True, exist_ok=True)
        return self.output_dir / name


# ─── Output Documents ─────────────────────────────────────────

class PricedQuote(BaseModel):
    model_config = ConfigDict(frozen=True)

    quote_id: str
    price: float
    lower_bound: float
    upper_bound: float
    within_bounds: bool


class PriceDocument(BaseModel):
    model_config = ConfigDict(frozen=True)

    model: ModelKind
    params: dict[str, float]
    dataset_label: str
    order: int | None = None
    rows: list[PricedQuote]


class SimulationRow(BaseModel):
    """Closed form against an oracle. stderr is Monte-Carlo only; nodes and mean_rate are mixture only."""

    model_config = ConfigDict(frozen=True)

    strike: float
    reference: float
    estimate: float
    stderr: float | None = None
    delta: float
    passed: bool
    nodes: int | None = None
    mean_rate: float | None = None


class SimulationDocument(BaseModel):
    model_config = ConfigDict(frozen=True)

    model: ModelKind
    params: dict[str, float]
    spot: float
    rate: float
    tau: float
    method: str
    settings: dict[str, Any]
    rows: list[SimulationRow]


def _fail(message: str, code: int) -> NoReturn:
    logger.error("Command failed", error=message, exit_code=code)
    click.echo(f"Error: {message}", err=True)
    raise click.exceptions.Exit(code)


class VolcalGroup(click.Group):
    """Maps volcal exceptions to their exit codes."""

    def invoke(self, ctx: click.Context) -> Any:
        try:
            return super().invoke(ctx)
        except VolcalError as e:
            _fail(str(e), e.exit_code)
        except ValidationError as e:
            _fail(f"invalid input: {e.errors()[0]['msg']}", InputValidationError.exit_code)
        except UnicodeDecodeError as e:
            _fail(f"input is not UTF-8 text: {e}", InputValidationError.exit_code)
        except OSError as e:
            _fail(f"I/O error: {e}", InputValidationError.exit_code)


def _echo(run: RunContext, document: BaseModel, text: str) -> None:
    click.echo(document.model_dump_json(indent=2) + "\n" if run.fmt == "structured" else text, nl=False)


def _emit(run: RunContext, document: BaseModel, text: str, path: Path) -> None:
    path.write_text(document.model_dump_json(indent=2) + "\n", encoding="utf-8")
    _echo(run, document, text)


# ─── Group ────────────────────────────────────────────────────

@click.group(cls=VolcalGroup)
@click.option("--seed", type=click.IntRange(0, SEED_MAX), default=None, help="Global 64-bit seed")
@click.option("--output-dir", type=click.Path(file_okay=False, path_type=Path), default=None)
@click.option("--format", "fmt", type=click.Choice(["text", "structured"]), default="text", show_default=True)
@click.option("--log-level", type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False))
@click.option("--log-format", type=click.Choice(["json", "console"]), default=None)
@click.option("--metrics-textfile", type=click.Path(dir_okay=False, path_type=Path), default=None)
@click.option("--workers", type=click.IntRange(min=1), default=None, help="Threads for starts and path blocks")
@click.pass_context
def cli(
    ctx: click.Context,
    seed: int | None,
    output_dir: Path | None,
    fmt: str,
    log_level: str | None,
    log_format: str | None,
    metrics_textfile: Path | None,
    workers: int | None,
) -> None:
    """volcal - option pricing model calibration and comparison."""
    settings = Settings()
    configure_logging(level=log_level or settings.log_level, fmt=log_format or settings.log_format)
    ctx.obj = RunContext(
        seed=settings.seed if seed is None else seed,
        output_dir=output_dir or settings.output_dir,
        fmt=fmt,
        workers=workers or settings.workers,
    )
    if metrics_textfile is not None:
        ctx.call_on_close(lambda: dump_metrics(metrics_textfile))


cli.add_command(generate_command, name="generate")


# ─── price ────────────────────────────────────────────────────

@cli.command()
@click.option("--model", "model_name", required=True, type=MODEL_CHOICE)
@click.option("--params", "params_file", required=True, type=EXISTING_FILE)
@click.option("--quotes", "quotes_file", required=True, type=EXISTING_FILE)
@click.option("--order", type=ORDER_CHOICE, default=str(DEFAULT_ORDER), show_default=True, help="MSV expansion order")
@click.pass_obj
def price(run: RunContext, model_name: str, params_file: Path, quotes_file: Path, order: str) -> None:
    """Price every quote of a file with one model."""
    model = ModelKind(model_name)
    with track_stage("price"):
        params = load_params(params_file, model)
        ds = read_quotes_file(quotes_file)
        prices = price_dataset(model, params, ds, order=int(order))

    rows = []
    for quote, value in zip(ds.quotes, prices):
        lower, upper = intrinsic_bounds(quote)
        slack = BOUND_SLACK[model] * quote.spot
        rows.append(
            PricedQuote(
                quote_id=quote.quote_id,
                price=float(value),
                lower_bound=lower,
                upper_bound=upper,
                within_bounds=bool(lower - slack <= value <= upper + slack),
            )
        )
    document = PriceDocument(
        model=model,
        params=params_to_dict(params),
        dataset_label=ds.label,
        order=int(order) if model is ModelKind.MSV else None,
        rows=rows,
    )
    frame = pd.DataFrame.from_records([r.model_dump() for r in rows])
    _emit(run, document, frame.to_string(index=False) + "\n", run.output(f"prices_{model.value}.json"))


# ─── calibrate ────────────────────────────────────────────────

@cli.command("calibrate")
@click.option("--model", "model_name", required=True, type=MODEL_CHOICE)
@click.option("--quotes", "quotes_file", required=True, type=EXISTING_FILE)
@click.option("--no-split", is_flag=True, help="Fit on every quote instead of the in-sample half")
@click.option("--starts", default=3, show_default=True, type=click.IntRange(min=1))
@click.option("--max-evals", default=2000, show_default=True, type=click.IntRange(min=100))
@click.option("--tolerance", default=1e-12, show_default=True, type=click.FloatRange(min=0, min_open=True))
@click.option("--order", type=ORDER_CHOICE, default=str(DEFAULT_ORDER), show_default=True)
@click.option("--loss", "loss_kind", type=click.Choice(["sse", "rmse"]), default="sse", show_default=True)
@click.option("--feller-penalty", default=0.0, show_default=True, type=click.FloatRange(min=0))
@click.pass_obj
def calibrate_cmd(
    run: RunContext,
    model_name: str,
    quotes_file: Path,
    no_split: bool,
    starts: int,
    max_evals: int,
    tolerance: float,
    order: str,
    loss_kind: str,
    feller_penalty: float,
) -> None:
    """Calibrate one model on the in-sample half of a quotes file."""
    cfg = CalibrationConfig(
        model=ModelKind(model_name),
        loss_kind=loss_kind,  # type: ignore[arg-type]
        max_evals=max_evals,
        n_starts=starts,
        tolerance=tolerance,
        seed=run.seed,
        feller_penalty_weight=feller_penalty,
        order=int(order),  # type: ignore[arg-type]
        workers=run.workers,
    )
    ds = read_quotes_file(quotes_file)
    target = ds if no_split else split_in_out(ds)[0]
    with track_stage("calibrate"):
        result = calibrate(target, cfg)

    path = write_calibration(result, run.output(f"calibration_{cfg.model.value}.json"))
    text = "\n".join(
        [
            f"model: {result.model.value}",
            f"dataset: {result.dataset_label} ({len(target)} quotes)",
            *(f"{name}: {value:.6g}" for name, value in result.params.items()),
            f"loss: {result.loss:.6g}",
            f"n_evals: {result.n_evals}",
            f"start_index: {result.start_index}",
            f"converged: {result.converged}",
            f"elapsed_seconds: {result.elapsed_seconds:.3f}",
        ]
    )
    click.echo(result.model_dump_json(indent=2) if run.fmt == "structured" else text)
    logger.info("Calibration written", path=str(path))


# ─── evaluate ─────────────────────────────────────────────────

@cli.command()
@click.option("--quotes", "quotes_file", required=True, type=EXISTING_FILE)
@click.option("--bs", "bs_file", required=True, type=EXISTING_FILE)
@click.option("--heston", "heston_file", required=True, type=EXISTING_FILE)
@click.option("--msv", "msv_file", required=True, type=EXISTING_FILE)
@click.option("--allow-leak", is_flag=True, help="Flag, rather than reject, calibrations not fitted in-sample")
@click.pass_obj
def evaluate(
    run: RunContext,
    quotes_file: Path,
    bs_file: Path,
    heston_file: Path,
    msv_file: Path,
    allow_leak: bool,
) -> None:
    """In/out-of-sample errors, BS-vs-SV comparisons and worst-value counts."""
    ds = read_quotes_file(quotes_file)
    calibrations: dict[ModelKind, CalibrationResult] = {
        ModelKind.BS: read_calibration(bs_file),
        ModelKind.HESTON: read_calibration(heston_file),
        ModelKind.MSV: read_calibration(msv_file),
    }
    with track_stage("evaluate"):
        doc = evaluate_dataset(ds, calibrations, strict=not allow_leak)

    text = "\n".join(
        [
            render_error_table(doc.report),
            render_worst_counts(doc.worst_counts),
            render_comparison_table(doc.comparisons),
        ]
    )
    write_evaluation(doc, run.output(f"evaluation_{slugify(ds.label)}.json"))
    _echo(run, doc, text)


# ─── simulate ─────────────────────────────────────────────────

@cli.command()
@click.option("--model", "model_name", required=True, type=MODEL_CHOICE)
@click.option("--params", "params_file", required=True, type=EXISTING_FILE)
@click.option("--spot", default=100.0, show_default=True, type=click.FloatRange(min=0, min_open=True))
@click.option("--strike", "strikes", multiple=True, type=click.FloatRange(min=0, min_open=True), help="Repeatable")
@click.option("--rate", default=0.01, show_default=True)
@click.option("--tau", default=0.5, show_default=True, type=click.FloatRange(min=0, min_open=True))
@click.option("--paths", default=200_000, show_default=True, type=click.IntRange(min=2))
@click.option("--steps", default=250, show_default=True, type=click.IntRange(min=1))
@click.option("--antithetic/--no-antithetic", default=True, show_default=True)
@click.option("--order", type=ORDER_CHOICE, default=str(DEFAULT_ORDER), show_default=True)
@click.pass_obj
def simulate(
    run: RunContext,
    model_name: str,
    params_file: Path,
    spot: float,
    strikes: tuple[float, ...],
    rate: float,
    tau: float,
    paths: int,
    steps: int,
    antithetic: bool,
    order: str,
) -> None:
    """Compare closed-form prices with the Monte-Carlo (BS, Heston) or mixture (MSV) oracle."""
    model = ModelKind(model_name)
    params = load_params(params_file, model)
    strikes = strikes or (spot,)

    with track_stage("simulate"):
        if model is ModelKind.MSV:
            assert isinstance(params, MsvParams)
            method = "gauss-hermite mixture"
            settings: dict[str, Any] = {"order": int(order)}
            rows = []
            for K in strikes:
                taylor = msv_call(params, spot, K, rate, tau, order=int(order))
                oracle = msv_mixture_oracle(params, spot, K, rate, tau)
                delta = taylor.price - oracle.price
                rows.append(
                    SimulationRow(
                        strike=K,
                        reference=taylor.price,
                        estimate=oracle.price,
                        delta=delta,
                        passed=abs(delta) <= 1e-3 * max(oracle.price, 1e-12),
                        nodes=int(oracle.diagnostics["nodes"]),
                        mean_rate=float(oracle.diagnostics["mean_rate"]),
                    )
                )
        else:
            cfg = McConfig(n_paths=paths, n_steps=steps, seed=run.seed, antithetic=antithetic, workers=run.workers)
            method = "monte-carlo"
            settings = cfg.model_dump(exclude={"workers"})
            if model is ModelKind.HESTON:
                assert isinstance(params, HestonParams)
                estimates = mc_heston_calls(params, spot, list(strikes), rate, tau, cfg)
                references = [heston_call(params, spot, K, rate, tau).price for K in strikes]
            else:
                assert isinstance(params, BsParams)
                estimates = [mc_bs_call(params.sigma, spot, K, rate, tau, cfg) for K in strikes]
                references = [float(bs_call(spot, K, rate, tau, params.sigma)) for K in strikes]
            rows = [
                SimulationRow(
                    strike=K,
                    reference=ref,
                    estimate=est.price,
                    stderr=est.stderr,
                    delta=est.price - ref,
                    passed=est.within(ref),
                )
                for K, ref, est in zip(strikes, references, estimates)
            ]

    document = SimulationDocument(
        model=model,
        params=params_to_dict(params),
        spot=spot,
        rate=rate,
        tau=tau,
        method=method,
        settings=settings,
        rows=rows,
    )
    frame = pd.DataFrame.from_records(
        [{**r.model_dump(), "result": "PASS" if r.passed else "FAIL"} for r in rows]
    ).drop(columns=["passed"]).dropna(axis=1, how="all")
    text = f"{model.value} vs {method}\n" + frame.to_string(index=False) + "\n"
    _emit(run, document, text, run.output(f"simulation_{model.value}.json"))


# ─── report ───────────────────────────────────────────────────

@cli.command()
@click.argument("eval_files", nargs=-1, type=EXISTING_FILE)
@click.pass_obj
def report(run: RunContext, eval_files: tuple[Path, ...]) -> None:
    """Write price and error SVG charts for evaluation documents."""
    if not eval_files:
        logger.warning("No evaluation files given; nothing to chart")
        return
    docs = [read_evaluation(path) for path in eval_files]
    with track_stage("report"):
        written = write_charts(docs, run.output_dir)
    for path in written:
        click.echo(str(path))


# ─── benchmark ────────────────────────────────────────────────

@cli.command()
@click.argument("quotes_files", nargs=-1, required=True, type=EXISTING_FILE)
@click.option("--starts", default=3, show_default=True, type=click.IntRange(min=1))
@click.option("--max-evals", default=2000, show_default=True, type=click.IntRange(min=100))
@click.option("--tolerance", default=1e-12, show_default=True, type=click.FloatRange(min=0, min_open=True))
@click.option("--order", type=ORDER_CHOICE, default=str(DEFAULT_ORDER), show_default=True)
@click.pass_obj
def benchmark(
    run: RunContext,
    quotes_files: tuple[Path, ...],
    starts: int,
    max_evals: int,
    tolerance: float,
    order: str,
) -> None:
    """Calibrate and evaluate all three models over several quote files."""
    datasets = [read_quotes_file(path) for path in quotes_files]
    base = CalibrationConfig(
        model=ModelKind.BS,
        max_evals=max_evals,
        n_starts=starts,
        tolerance=tolerance,
        seed=run.seed,
        order=int(order),  # type: ignore[arg-type]
        workers=run.workers,
    )
    with track_stage("benchmark"):
        summary = run_benchmark(datasets, base)
    write_benchmark(summary, run.output("benchmark.json"))
    _echo(run, summary, render_benchmark(summary))


def main() -> None:
    load_dotenv()
    cli()


if __name__ == "__main__":
    main()
