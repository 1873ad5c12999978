import csv
import logging
import os
from typing import Any, List, Union

from rshelab.errors import ConfigError
from rshelab.experiments.report import Cell, ExperimentReport

logger = logging.getLogger(__name__)

PathLike = Union[str, "os.PathLike[str]"]


def format_cell(value: Cell) -> str:
    """Floats with 17 significant digits, integers and strings verbatim."""
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def write_csv(report: ExperimentReport, path: PathLike) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(report.columns)
        for row in report.rows:
            writer.writerow([format_cell(v) for v in row])


def write_report_json(report: ExperimentReport, path: PathLike) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(report.to_json())


def _numeric_columns(report: ExperimentReport) -> List[int]:
    return [
        i
        for i in range(1, len(report.columns))
        if report.rows and all(isinstance(row[i], (int, float)) for row in report.rows)
    ]


def write_svg(report: ExperimentReport, path: PathLike) -> bool:
    """Line plot of every numeric column against the first; False if not plottable."""
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError as e:
        raise ConfigError(
            "--svg needs matplotlib; install the 'plots' extra "
            "(pip install rshelab[plots])"
        ) from e

    if not report.rows or not isinstance(report.rows[0][0], (int, float)):
        logger.info("%s: first column is not numeric, no plot written", report.name)
        return False
    x: List[Any] = [row[0] for row in report.rows]
    matplotlib.rcParams["svg.hashsalt"] = report.name
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    try:
        for i in _numeric_columns(report):
            ax.plot(x, [row[i] for row in report.rows], label=report.columns[i])
        ax.set_xlabel(report.columns[0])
        ax.set_title(report.name)
        if len(report.columns) <= 12:
            ax.legend(fontsize="small")
        fig.savefig(path, format="svg", metadata={"Date": None})
    finally:
        plt.close(fig)
    return True


def write_artifacts(
    report: ExperimentReport, out_dir: PathLike, svg: bool = False
) -> List[str]:
    """Write ``<name>.csv``, ``<name>.report.json`` and optionally ``<name>.svg``."""
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as e:
        raise ConfigError(
            f"output.dir {os.fspath(out_dir)!r} is not writable: {e}"
        ) from e
    base = os.path.join(os.fspath(out_dir), report.name)
    written = [base + ".csv", base + ".report.json"]
    write_csv(report, written[0])
    write_report_json(report, written[1])
    if svg and write_svg(report, base + ".svg"):
        written.append(base + ".svg")
    for path in written:
        logger.info("wrote %s", path)
    return written
