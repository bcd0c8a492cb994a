"""
Prometheus gauges describing the last experiment batch.

They live on their own registry and are written next to the CSV output in the
node exporter textfile format, so a textfile collector can pick them up.
"""
import logging
from pathlib import Path

from prometheus_client import CollectorRegistry, Gauge, write_to_textfile


log = logging.getLogger(__name__)

REGISTRY = CollectorRegistry()


CELLS_COMPLETED = Gauge(
    "glm_mp_cells_completed",
    "Number of (solver, snr, seed) cells that ran to completion",
    registry=REGISTRY,
)

CELLS_DIVERGED = Gauge(
    "glm_mp_cells_diverged",
    "Number of cells that stopped on a solver error",
    registry=REGISTRY,
)

FINAL_MSE = Gauge(
    "glm_mp_final_mse",
    "Median over seeds of the last recorded MSE",
    ["solver", "snr_db"],
    registry=REGISTRY,
)

CELL_WALL_TIME = Gauge(
    "glm_mp_cell_wall_time",
    "Wall time spent in a single cell",
    ["solver", "snr_db", "seed"],
    unit="seconds",
    registry=REGISTRY,
)


def reset() -> None:
    CELLS_COMPLETED.set(0)
    CELLS_DIVERGED.set(0)
    FINAL_MSE.clear()
    CELL_WALL_TIME.clear()


def write_metrics(output_dir: Path) -> Path:
    path = Path(output_dir) / "metrics.prom"
    write_to_textfile(str(path), REGISTRY)
    log.debug("wrote metrics to %s", path)
    return path
