"""
Reporting service - writes sweep tables as CSV and SVG plots.
"""
import csv
import io
import logging
import os
from collections import defaultdict
from typing import Dict, List, Optional, Tuple

import aiofiles
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from src.models.config import SweepKind
from src.models.sweep import CSV_COLUMNS, SweepRow, SweepTable
from src.services.audit_service import AuditService

logger = logging.getLogger(__name__)

CSV_NAME = "rates.csv"
PLOT_NAME = "rates.svg"

AXIS_LABELS = {"r": "relay position r", "N": "number of relays N", "theta": "path loss exponent θ"}


class ReportingService:
    """
    Output files of a sweep.

    The CSV is the canonical result; the SVG plot is derived from the
    same rows, one line per protocol and schedule.
    """

    def __init__(self, audit_service: Optional[AuditService] = None):
        """
        Initialize reporting service.

        Args:
            audit_service: Run ledger for written files
        """
        self.audit_service = audit_service

    async def emit_outputs(self, table: SweepTable, out_dir: str, plot: bool = False) -> List[str]:
        """
        Write rates.csv and, if requested, rates.svg into out_dir.

        Args:
            table: Sweep rows in grid order
            out_dir: Output directory, created if missing
            plot: Also write the SVG plot

        Returns:
            Paths of the written files
        """
        if not table.rows:
            raise ValueError("Cannot write outputs of an empty sweep table")
        try:
            os.makedirs(out_dir, exist_ok=True)
        except OSError as e:
            raise ValueError(f"Output directory {out_dir} is not writable: {e.strerror or e}")

        written = [await self.write_csv(table, os.path.join(out_dir, CSV_NAME))]
        if plot:
            written.append(self.write_plot(table, os.path.join(out_dir, PLOT_NAME)))

        if self.audit_service:
            for path in written:
                await self.audit_service.log_output_written(path, os.path.splitext(path)[1].lstrip("."))
        return written

    async def write_csv(self, table: SweepTable, path: str) -> str:
        buffer = io.StringIO()
        writer = csv.DictWriter(buffer, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in table.rows:
            writer.writerow(row.to_csv())
        try:
            async with aiofiles.open(path, mode="w", encoding="utf-8", newline="") as f:
                await f.write(buffer.getvalue())
        except OSError as e:
            raise ValueError(f"Cannot write {path}: {e.strerror or e}")
        logger.info(f"Wrote {len(table.rows)} rows to {path}")
        return path

    async def read_csv(self, path: str) -> List[SweepRow]:
        """Parse a CSV written by write_csv."""
        async with aiofiles.open(path, mode="r", encoding="utf-8", newline="") as f:
            text = await f.read()
        reader = csv.DictReader(io.StringIO(text))
        if reader.fieldnames != CSV_COLUMNS:
            raise ValueError(f"Unexpected CSV header in {path}: {reader.fieldnames}")
        return [SweepRow.from_csv(record) for record in reader]

    def series_of(self, table: SweepTable) -> Dict[str, List[Tuple[float, float]]]:
        """Plot series: label -> (x, rate) points, failed rows skipped."""
        series: Dict[str, List[Tuple[float, float]]] = defaultdict(list)
        variable = table.swept_variable
        for row in table.rows:
            if row.failed:
                continue
            label = row.series
            if table.kind == SweepKind.PATH_LOSS:
                label = f"{label}, N={row.n_relays}"
            x = {"r": row.r, "N": float(row.n_relays), "theta": row.theta}[variable]
            series[label].append((x, row.rate_bpcu))
        return dict(series)

    def write_plot(self, table: SweepTable, path: str) -> str:
        series = self.series_of(table)
        fig, ax = plt.subplots(figsize=(7.0, 4.5))
        try:
            for label, points in series.items():
                xs, ys = zip(*points)
                ax.plot(xs, ys, marker="o", markersize=3, label=label)
            ax.set_xlabel(AXIS_LABELS[table.swept_variable])
            ax.set_ylabel("rate [bpcu]")
            ax.grid(True, alpha=0.3)
            if series:
                ax.legend(fontsize="small")
            fig.tight_layout()
            # labels stay <text> elements
            with plt.rc_context({"svg.fonttype": "none"}):
                fig.savefig(path, format="svg", metadata={"Date": None})
        except OSError as e:
            raise ValueError(f"Cannot write {path}: {e.strerror or e}")
        finally:
            plt.close(fig)
        logger.info(f"Wrote plot with {len(series)} series to {path}")
        return path
