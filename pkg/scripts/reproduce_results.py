#!/usr/bin/env python3
"""
Regenerate the correlation table and the model-vs-simulation sweep.

Writes ``correlation.csv``, ``sweep.csv`` and ``critical_points.json`` to the
output directory (default ``results/reproduce``) using the validation setup.
"""

import sys
from pathlib import Path

# Add the project root to the Python path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from pause_intensity.pi_model import critical_points
from pause_intensity.simulator import SimConfig, sweep_loss, write_sweep_csv
from pause_intensity.subjective_corr import (
    correlation_table,
    load_dataset,
    merge_datasets,
    write_correlation_csv,
)
from shared.utils import (
    Timer,
    ensure_directory,
    get_file_hash,
    save_json_config,
    setup_logging,
)

LOSS_GRID = [round(0.005 * i, 3) for i in range(1, 25)]


def main(out_dir: str = "results/reproduce", runs_per_point: int = 10) -> None:
    """Main function regenerating the published comparisons."""
    logger = setup_logging(level="INFO")
    logger.info("Reproducing correlation table and loss sweep")

    with Timer() as timer:
        target = ensure_directory(out_dir)

        dataset = merge_datasets(load_dataset("table3"), load_dataset("table5"))
        rows = correlation_table(dataset)
        correlation_path = write_correlation_csv(rows, target / "correlation.csv")
        for row in rows:
            logger.info(
                f"{row.content}: r_frequency={row.r_frequency:.3f} "
                f"r_duration={row.r_duration:.3f} r_pi={row.r_pi:.3f}"
            )

        cfg = SimConfig()
        cp = critical_points(cfg.tcp, cfg.caps, cfg.playout_rate)
        save_json_config({"p0": cp.p0, "p1": cp.p1}, target / "critical_points.json")
        logger.info(f"Critical points: p0={cp.p0:.5f}, p1={cp.p1:.5f}")

        sweep = sweep_loss(cfg, LOSS_GRID, runs_per_point)
        sweep_path = write_sweep_csv(sweep, target / "sweep.csv")

        for path in (correlation_path, sweep_path):
            logger.info(f"{path.name} (SHA256): {get_file_hash(path)}")

    logger.info(f"Script completed in {timer.elapsed_time:.3f} seconds")


if __name__ == "__main__":
    main()
