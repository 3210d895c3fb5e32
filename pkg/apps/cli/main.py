import json
import logging
import os
from collections.abc import Iterator
from contextlib import contextmanager
from pathlib import Path
from typing import Any, List, Optional

import numpy as np
import typer
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from apps.cli.manifest import RunManifest
from pause_intensity import __version__
from pause_intensity.errors import DomainError, PauseIntensityError
from pause_intensity.loss_distribution import (
    GammaParams,
    ks_statistic,
    loss_density,
    sample_loss_rates,
    throughput_density,
)
from pause_intensity.pause_statistics import (
    BufferThresholds,
    DurationDistribution,
    SegmentConfig,
    first_passage_monte_carlo,
    pause_duration_distribution,
    play_duration_distribution,
    total_variation,
)
from pause_intensity.pi_model import critical_points, frequency_peak, model_sweep
from pause_intensity.simulator import SimConfig, SimMode, run_session, sweep_loss, write_sweep_csv
from pause_intensity.subjective_corr import (
    correlation_table,
    load_dataset,
    merge_datasets,
    write_correlation_csv,
)
from pause_intensity.tcp_model import LinkConstraints, TcpParams, reno_throughput_timeout
from pause_intensity.trace_metrics import compute_metrics, ingest_trace, serialize_trace
from shared.utils import (
    ConfigError,
    ConfigManager,
    Timer,
    ensure_directory,
    save_json_config,
    setup_logging,
    write_csv,
)

app = typer.Typer(
    name="pause-intensity",
    help="Pause Intensity model, simulator and subjective-correlation toolkit",
    add_completion=False,
)
console = Console()
err_console = Console(stderr=True)
logger = logging.getLogger("pause-intensity")

DEFAULT_LOSS_GRID = "0.005:0.005:0.12"
COMMON_KEYS = {"seed", "out_dir", "log_level"}
TCP_DEFAULTS: dict[str, Any] = {
    "rtt": 0.128,
    "timeout": 0.128,
    "rounds_per_window_increment": 2,
    "packet_size": 1500.0,
    "bandwidth": 125_000.0,
    "advertised_window": 20.0,
}
BUFFER_DEFAULTS: dict[str, Any] = {
    "playout_rate": 100_000.0,
    "q_min": 1_500.0,
    "q_max": 200_000.0,
}
GAMMA_DEFAULTS: dict[str, Any] = {
    "gamma_shape": 2.8,
    "gamma_scale": 0.7,
    "rescale_divisor": 100.0,
}
MODEL_SWEEP_HEADER = (
    "loss",
    "throughput",
    "avg_pause_duration",
    "avg_play_duration",
    "period",
    "pause_frequency",
    "pause_intensity",
    "period_sensitivity",
    "region",
)

ConfigOption = typer.Option(None, "--config", "-c", help="Flat JSON file of option values")
SeedOption = typer.Option(None, "--seed", help="Random seed (default 0)")
LogLevelOption = typer.Option(None, "--log-level", help="Logging level (default WARNING)")
RttOption = typer.Option(None, "--rtt", help="Round-trip time in seconds")
TimeoutOption = typer.Option(None, "--timeout", help="Retransmission timeout T0 in seconds")
RoundsOption = typer.Option(
    None, "--rounds-per-window-increment", "-b", help="Rounds per window increment b"
)
PacketSizeOption = typer.Option(None, "--packet-size", help="Packet size in bytes")
BandwidthOption = typer.Option(None, "--bandwidth", help="Bottleneck bandwidth in bytes/second")
WindowOption = typer.Option(None, "--advertised-window", help="Advertised window in packets")
PlayoutOption = typer.Option(None, "--playout-rate", help="Playout rate in bytes/second")
QMinOption = typer.Option(None, "--q-min", help="Pause threshold in bytes")
QMaxOption = typer.Option(None, "--q-max", help="Resume threshold in bytes")
LossGridOption = typer.Option(
    None, "--loss-grid", help=f"Loss grid start:step:stop (default {DEFAULT_LOSS_GRID})"
)


@contextmanager
def _cli_errors() -> Iterator[None]:
    """Report library errors in red and map them to exit codes."""
    try:
        yield
    except (DomainError, FileNotFoundError, json.JSONDecodeError, ConfigError) as exc:
        err_console.print(f"Error: {exc}", style="red", markup=False, soft_wrap=True)
        raise typer.Exit(code=2)
    except PauseIntensityError as exc:
        err_console.print(f"Error: {exc}", style="red", markup=False, soft_wrap=True)
        raise typer.Exit(code=1)


def _resolve(
    config: Optional[Path],
    defaults: dict[str, Any],
    flags: dict[str, Any],
) -> dict[str, Any]:
    """Resolve every key of ``defaults`` with flag > config file > default precedence."""
    manager = ConfigManager.from_file(config, known_keys=set(defaults) | COMMON_KEYS)
    return {key: manager.resolve(key, flags.get(key), default) for key, default in defaults.items()}


def _start(values: dict[str, Any], out_dir_default: str) -> tuple[Path, int]:
    setup_logging(str(values.pop("log_level")))
    seed = int(values.pop("seed"))
    out_dir = ensure_directory(values.pop("out_dir") or out_dir_default)
    return out_dir, seed


def _common_defaults() -> dict[str, Any]:
    return {"seed": 0, "out_dir": None, "log_level": os.environ.get("LOG_LEVEL", "WARNING")}


def parse_loss_grid(text: str) -> list[float]:
    """
    Expand ``start:step:stop`` into loss rates, both ends included.

    Raises:
        DomainError: If the text is malformed or the range is empty
    """
    parts = str(text).split(":")
    if len(parts) != 3:
        raise DomainError(f"loss grid must be start:step:stop, got {text!r}")
    try:
        start, step, stop = (float(part) for part in parts)
    except ValueError:
        raise DomainError(f"loss grid must be start:step:stop, got {text!r}")
    if not step > 0 or stop < start:
        raise DomainError(f"loss grid needs step > 0 and stop >= start, got {text!r}")
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 12) for i in range(count)]


def _tcp(values: dict[str, Any]) -> tuple[TcpParams, LinkConstraints]:
    params = TcpParams(
        rtt=float(values["rtt"]),
        timeout=float(values["timeout"]),
        rounds_per_window_increment=int(values["rounds_per_window_increment"]),
        packet_size=float(values["packet_size"]),
    )
    caps = LinkConstraints(
        bottleneck_bandwidth=float(values["bandwidth"]),
        advertised_window=float(values["advertised_window"]),
    )
    return params, caps


def _buffer(values: dict[str, Any]) -> BufferThresholds:
    return BufferThresholds(q_min=float(values["q_min"]), q_max=float(values["q_max"]))


def _finish(manifest: RunManifest, out_dir: Path, outputs: list[Path], timer: Timer) -> None:
    for path in outputs:
        manifest.add_output(path)
    manifest.write(out_dir)
    logger.info("%s finished in %.2f s, outputs in %s", manifest.command, timer.elapsed_time, out_dir)


@app.command()
def model(
    playout_rate: Optional[float] = PlayoutOption,
    q_min: Optional[float] = QMinOption,
    q_max: Optional[float] = QMaxOption,
    rtt: Optional[float] = RttOption,
    timeout: Optional[float] = TimeoutOption,
    rounds_per_window_increment: Optional[int] = RoundsOption,
    packet_size: Optional[float] = PacketSizeOption,
    bandwidth: Optional[float] = BandwidthOption,
    advertised_window: Optional[float] = WindowOption,
    loss_grid: Optional[str] = LossGridOption,
    seed: Optional[int] = SeedOption,
    out_dir: Optional[Path] = typer.Option(None, "--out-dir", "-o", help="Output directory"),
    config: Optional[Path] = ConfigOption,
    log_level: Optional[str] = LogLevelOption,
) -> None:
    """
    Sweep the closed-form model over loss rates and report the critical points.
    """
    with _cli_errors(), Timer() as timer:
        values = _resolve(
            config,
            {**TCP_DEFAULTS, **BUFFER_DEFAULTS, "loss_grid": DEFAULT_LOSS_GRID, **_common_defaults()},
            locals(),
        )
        out_dir, seed = _start(values, "results/model")
        params, caps = _tcp(values)
        buf = _buffer(values)
        playout = float(values["playout_rate"])
        losses = parse_loss_grid(values["loss_grid"])

        cp = critical_points(params, caps, playout)
        rows = model_sweep(params, caps, playout, buf.fluctuation_area, losses)
        peak_eta, peak_freq = frequency_peak(playout, buf.fluctuation_area)

        sweep_path = write_csv(
            out_dir / "model_sweep.csv",
            MODEL_SWEEP_HEADER,
            (
                (
                    row.loss,
                    row.throughput,
                    row.metrics.avg_pause_duration,
                    row.metrics.avg_play_duration,
                    row.metrics.period,
                    row.metrics.pause_frequency,
                    row.metrics.pause_intensity,
                    row.metrics.period_sensitivity,
                    row.region.value,
                )
                for row in rows
            ),
        )
        summary = {
            "p0": cp.p0,
            "p1": cp.p1,
            "always_pause": cp.always_pause,
            "caps_bind": cp.caps_bind,
            "capped_max_throughput": cp.capped_max_throughput,
            "frequency_peak_throughput": peak_eta,
            "frequency_peak_value": peak_freq,
            "playout_rate": playout,
            "fluctuation_area": buf.fluctuation_area,
        }
        summary_path = out_dir / "summary.json"
        save_json_config(summary, summary_path)

        console.print(
            Panel(
                f"p0 = {cp.p0:.6f}   p1 = {cp.p1:.6f}\n"
                f"{len(rows)} loss rates written to {sweep_path}",
                title="Pause Intensity model",
                border_style="blue",
            )
        )
        _finish(RunManifest("model", values, seed), out_dir, [sweep_path, summary_path], timer)


@app.command()
def simulate(
    playout_rate: Optional[float] = PlayoutOption,
    q_min: Optional[float] = QMinOption,
    q_max: Optional[float] = QMaxOption,
    rtt: Optional[float] = RttOption,
    timeout: Optional[float] = TimeoutOption,
    rounds_per_window_increment: Optional[int] = RoundsOption,
    packet_size: Optional[float] = PacketSizeOption,
    bandwidth: Optional[float] = BandwidthOption,
    advertised_window: Optional[float] = WindowOption,
    loss_grid: Optional[str] = LossGridOption,
    loss_rate: Optional[float] = typer.Option(
        None, "--loss-rate", help="Nominal loss rate of the emitted trace (default 0.035)"
    ),
    step: Optional[float] = typer.Option(None, "--step", help="Segment length in seconds"),
    session_length: Optional[float] = typer.Option(
        None, "--session-length", help="Session length in seconds (default 10000)"
    ),
    mode: Optional[SimMode] = typer.Option(None, "--mode", help="deterministic or stochastic"),
    runs: Optional[int] = typer.Option(None, "--runs", help="Runs per loss rate (default 10)"),
    seed: Optional[int] = SeedOption,
    out_dir: Optional[Path] = typer.Option(None, "--out-dir", "-o", help="Output directory"),
    config: Optional[Path] = ConfigOption,
    log_level: Optional[str] = LogLevelOption,
) -> None:
    """
    Simulate the playout buffer over a loss sweep next to the model curves.
    """
    with _cli_errors(), Timer() as timer:
        values = _resolve(
            config,
            {
                **TCP_DEFAULTS,
                **BUFFER_DEFAULTS,
                "loss_grid": DEFAULT_LOSS_GRID,
                "loss_rate": 0.035,
                "step": 0.1,
                "session_length": 10_000.0,
                "mode": SimMode.DETERMINISTIC.value,
                "runs": 10,
                **_common_defaults(),
            },
            locals(),
        )
        try:
            values["mode"] = SimMode(values["mode"]).value
        except ValueError:
            modes = ", ".join(m.value for m in SimMode)
            raise ConfigError(f"mode must be one of {modes}, got {values['mode']!r}")
        out_dir, seed = _start(values, "results/simulate")
        params, caps = _tcp(values)
        cfg = SimConfig(
            tcp=params,
            caps=caps,
            buffer=_buffer(values),
            playout_rate=float(values["playout_rate"]),
            step=float(values["step"]),
            session_length=float(values["session_length"]),
            mode=SimMode(values["mode"]),
            loss_rate=float(values["loss_rate"]),
            seed=seed,
        )
        losses = parse_loss_grid(values["loss_grid"])

        trace, result = run_session(cfg)
        trace_path = serialize_trace(trace, out_dir / "trace.csv")
        rows = sweep_loss(cfg, losses, int(values["runs"]))
        sweep_path = write_sweep_csv(rows, out_dir / "sweep.csv")

        table = Table(title="Model vs simulation")
        for column in ("loss", "model PI", "sim PI", "model f", "sim f"):
            table.add_column(column, justify="right")
        for row in rows:
            table.add_row(
                f"{row.loss:.3f}",
                f"{row.model_pi:.4f}",
                f"{row.sim.pause_intensity:.4f} ± {row.sim.std_pause_intensity:.4f}",
                f"{row.model_freq:.4f}",
                f"{row.sim.pause_frequency:.4f}",
            )
        console.print(table)
        console.print(f"Trace at loss {cfg.loss_rate}: PI = {result.pause_intensity:.4f}")
        _finish(RunManifest("simulate", values, seed), out_dir, [trace_path, sweep_path], timer)


@app.command()
def correlate(
    builtin: Optional[List[str]] = typer.Option(
        None, "--builtin", help="Bundled dataset: table3 or table5 (repeatable)"
    ),
    dataset: Optional[List[Path]] = typer.Option(
        None, "--dataset", help="External dataset CSV (repeatable)"
    ),
    method: Optional[str] = typer.Option(None, "--method", help="pearson or spearman"),
    seed: Optional[int] = SeedOption,
    out_dir: Optional[Path] = typer.Option(None, "--out-dir", "-o", help="Output directory"),
    config: Optional[Path] = ConfigOption,
    log_level: Optional[str] = LogLevelOption,
) -> None:
    """
    Correlate MOS with pause frequency, pause duration and PI per content group.
    """
    with _cli_errors(), Timer() as timer:
        values = _resolve(
            config,
            {"builtin": None, "dataset": None, "method": "pearson", **_common_defaults()},
            {
                "builtin": builtin or None,
                "dataset": [str(p) for p in dataset] if dataset else None,
                "method": method,
                "seed": seed,
                "out_dir": out_dir,
                "log_level": log_level,
            },
        )
        out_dir, seed = _start(values, "results/correlate")
        sources = list(values["builtin"] or []) + list(values["dataset"] or [])
        if not sources:
            sources = ["table3", "table5"]
        values["builtin"] = values["builtin"] or []
        values["dataset"] = values["dataset"] or []

        merged = merge_datasets(*(load_dataset(source) for source in sources))
        rows = correlation_table(merged, values["method"])
        path = write_correlation_csv(rows, out_dir / "correlation.csv")

        table = Table(title=f"{values['method'].capitalize()} correlation with MOS")
        for column in ("content", "frequency", "duration", "PI"):
            table.add_column(column, justify="right")
        for row in rows:
            table.add_row(
                row.content, f"{row.r_frequency:.3f}", f"{row.r_duration:.3f}", f"{row.r_pi:.3f}"
            )
        console.print(table)
        _finish(RunManifest("correlate", values, seed), out_dir, [path], timer)


@app.command()
def analyze(
    trace: Path = typer.Argument(..., help="Trace CSV with time_s,event rows"),
    window_start: Optional[float] = typer.Option(None, "--window-start", help="Window start (s)"),
    window_end: Optional[float] = typer.Option(None, "--window-end", help="Window end (s)"),
    seed: Optional[int] = SeedOption,
    out_dir: Optional[Path] = typer.Option(None, "--out-dir", "-o", help="Output directory"),
    config: Optional[Path] = ConfigOption,
    log_level: Optional[str] = LogLevelOption,
) -> None:
    """
    Measure pause metrics of a trace file and print them as JSON.
    """
    with _cli_errors(), Timer() as timer:
        values = _resolve(
            config,
            {"window_start": None, "window_end": None, **_common_defaults()},
            locals(),
        )
        out_dir, seed = _start(values, "results/analyze")
        start, end = values["window_start"], values["window_end"]
        if (start is None) != (end is None):
            raise DomainError("--window-start and --window-end must be given together")
        bounds = [v for v in (start, end) if v is not None]
        if any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in bounds):
            raise ConfigError(f"window bounds must be numbers, got {start!r} and {end!r}")
        window = None if start is None else (float(start), float(end))

        metrics = compute_metrics(ingest_trace(trace), window)
        document = metrics.as_dict()
        metrics_path = out_dir / "metrics.json"
        save_json_config(document, metrics_path)
        typer.echo(json.dumps(document, indent=2))

        values["trace"] = str(trace)
        _finish(RunManifest("analyze", values, seed), out_dir, [metrics_path], timer)


def _with_monte_carlo(
    path: Path, analytic: DurationDistribution, mc: DurationDistribution
) -> Path:
    mc_by_key = dict(zip(np.round(mc.durations, 9).tolist(), mc.probabilities.tolist()))
    rows = (
        (float(d), float(p), float(mc_by_key.get(round(float(d), 9), 0.0)))
        for d, p in zip(analytic.durations, analytic.probabilities)
    )
    return write_csv(path, ("duration_s", "probability", "mc_probability"), rows)


@app.command()
def distributions(
    gamma_shape: Optional[float] = typer.Option(None, "--gamma-shape", help="Gamma shape k"),
    gamma_scale: Optional[float] = typer.Option(None, "--gamma-scale", help="Gamma scale theta"),
    rescale_divisor: Optional[float] = typer.Option(
        None, "--rescale-divisor", help="Divisor turning the Gamma variate into a loss rate"
    ),
    playout_rate: Optional[float] = PlayoutOption,
    q_min: Optional[float] = QMinOption,
    q_max: Optional[float] = QMaxOption,
    rtt: Optional[float] = RttOption,
    timeout: Optional[float] = TimeoutOption,
    rounds_per_window_increment: Optional[int] = RoundsOption,
    packet_size: Optional[float] = PacketSizeOption,
    segment_length: Optional[float] = typer.Option(
        None, "--segment-length", help="Segment length in seconds (default 0.1)"
    ),
    max_segments: Optional[int] = typer.Option(
        None, "--max-segments", help="Largest segment count (default 2000)"
    ),
    grid_points: Optional[int] = typer.Option(
        None, "--grid-points", help="Density grid size (default 2048)"
    ),
    mc_check: Optional[bool] = typer.Option(
        None, "--mc-check/--no-mc-check", help="Compare against Monte Carlo oracles"
    ),
    trials: Optional[int] = typer.Option(
        None, "--trials", help="Monte Carlo first-passage trials (default 100000)"
    ),
    seed: Optional[int] = SeedOption,
    out_dir: Optional[Path] = typer.Option(None, "--out-dir", "-o", help="Output directory"),
    config: Optional[Path] = ConfigOption,
    log_level: Optional[str] = LogLevelOption,
) -> None:
    """
    Write the loss and throughput densities and the pause/play duration pmfs.
    """
    with _cli_errors(), Timer() as timer:
        values = _resolve(
            config,
            {
                **GAMMA_DEFAULTS,
                **{k: TCP_DEFAULTS[k] for k in ("rtt", "timeout", "rounds_per_window_increment", "packet_size")},
                **BUFFER_DEFAULTS,
                "segment_length": 0.1,
                "max_segments": 2000,
                "grid_points": 2048,
                "mc_check": False,
                "trials": 100_000,
                **_common_defaults(),
            },
            locals(),
        )
        out_dir, seed = _start(values, "results/distributions")
        gamma = GammaParams(
            shape=float(values["gamma_shape"]),
            scale=float(values["gamma_scale"]),
            rescale_divisor=float(values["rescale_divisor"]),
        )
        params = TcpParams(
            rtt=float(values["rtt"]),
            timeout=float(values["timeout"]),
            rounds_per_window_increment=int(values["rounds_per_window_increment"]),
            packet_size=float(values["packet_size"]),
        )
        buf = _buffer(values)
        seg = SegmentConfig(float(values["segment_length"]), int(values["max_segments"]))
        playout = float(values["playout_rate"])
        n_points = int(values["grid_points"])

        loss_curve = loss_density(gamma, n_points)
        th = throughput_density(gamma, params, n_points, loss_curve=loss_curve)
        pause = pause_duration_distribution(th, buf, seg)
        play = play_duration_distribution(th, buf, seg, playout)

        outputs = [
            loss_curve.to_csv(out_dir / "loss_pdf.csv"),
            th.to_csv(out_dir / "throughput_pdf.csv"),
        ]
        if values["mc_check"]:
            trials = int(values["trials"])
            pause_mc = first_passage_monte_carlo(th, buf.fluctuation_area, seg, 0.0, trials, seed)
            play_mc = first_passage_monte_carlo(
                th, buf.fluctuation_area, seg, playout, trials, seed + 1
            )
            samples = np.asarray(
                reno_throughput_timeout(sample_loss_rates(gamma, seed + 2, 5000), params)
            )
            outputs.append(_with_monte_carlo(out_dir / "pause_duration_pmf.csv", pause, pause_mc))
            outputs.append(_with_monte_carlo(out_dir / "play_duration_pmf.csv", play, play_mc))
            stats_doc = {
                "ks_throughput": ks_statistic(samples, th),
                "tv_pause": total_variation(pause, pause_mc),
                "tv_play": total_variation(play, play_mc),
                "pause_mean": pause.mean,
                "pause_mc_mean": pause_mc.mean,
                "play_mean": play.mean,
                "play_mc_mean": play_mc.mean,
            }
            stats_path = out_dir / "mc_check.json"
            save_json_config(stats_doc, stats_path)
            outputs.append(stats_path)
            console.print(
                Panel(
                    "\n".join(f"{key}: {value:.4f}" for key, value in stats_doc.items()),
                    title="Monte Carlo check",
                    border_style="green",
                )
            )
        else:
            outputs.append(pause.to_csv(out_dir / "pause_duration_pmf.csv"))
            outputs.append(play.to_csv(out_dir / "play_duration_pmf.csv"))

        console.print(
            Panel(
                f"throughput mean {th.mean:.1f} B/s, std {th.std:.1f} B/s\n"
                f"pause mean {pause.mean:.3f} s (mode {pause.mode:.1f} s), "
                f"play mean {play.mean:.3f} s (mode {play.mode:.1f} s)",
                title="Duration distributions",
                border_style="blue",
            )
        )
        _finish(RunManifest("distributions", values, seed), out_dir, outputs, timer)


@app.command()
def version() -> None:
    """
    Show the current version.
    """
    console.print(f"[bold blue]pause-intensity v{__version__}[/bold blue]")


if __name__ == "__main__":
    app()
