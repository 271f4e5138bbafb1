"""
Reporting Service

CSV writers and readers for vehicle traces, controller decisions, network
events and delivery metrics, the JSON run report, and a dependency-free SVG
bar chart of a metrics column.
"""

import csv
import math
from contextlib import contextmanager
from pathlib import Path
from typing import IO, Iterator, List, Sequence, Tuple, Union
from xml.sax.saxutils import escape

from pydantic import BaseModel

from vanetsim.config import LOG_LEVEL, SIM_LOG_FILE
from vanetsim.exceptions import OutputError, PlotError
from vanetsim.logger import setup_logger
from vanetsim.schemas import NetMetrics
from vanetsim.services.adaptive import Decision
from vanetsim.services.vanet import NetEvent, NetEventKind
from vanetsim.services.xmlio import fmt

logger = setup_logger(__name__, level=LOG_LEVEL, log_file=SIM_LOG_FILE)

PathLike = Union[str, Path]

TRACE_HEADER = ["t", "vehicle_id", "edge", "lane", "pos", "speed"]
CONTROLLER_HEADER = ["t", "tl_id", "loads", "green_splits"]
EVENTS_HEADER = ["t", "event", "packet_src", "packet_seq", "node", "detail"]
METRICS_HEADER = ["nodes", "sent", "received", "pdf", "avg_pkts_s", "avg_bits_s"]
PLOT_COLUMNS = ("pdf", "avg_pkts_s")

TraceRow = Tuple[float, str, str, str, float, float]


@contextmanager
def _open_output(path: PathLike) -> Iterator[IO[str]]:
    """Open a result file for writing, creating its directory; OS errors become OutputError."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        handle = path.open("w", newline="", encoding="utf-8")
    except OSError as exc:
        raise OutputError(str(path), exc.strerror or str(exc)) from exc
    try:
        with handle:
            yield handle
    except OSError as exc:
        raise OutputError(str(path), exc.strerror or str(exc)) from exc


def _read_rows(path: PathLike, header: Sequence[str]) -> List[dict]:
    with Path(path).open(newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None or list(reader.fieldnames) != list(header):
            raise ValueError(f"{path}: expected header {','.join(header)}, got {reader.fieldnames}")
        return list(reader)


# ============================================================
# TRACE
# ============================================================


class TraceWriter:
    """Streams per-step vehicle rows to a trace CSV; usable as a co-simulation trace sink."""

    def __init__(self, path: PathLike):
        self.path = Path(path)
        self._handle = None
        self._writer = None
        self.rows = 0

    def __enter__(self) -> "TraceWriter":
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._handle = self.path.open("w", newline="", encoding="utf-8")
        except OSError as exc:
            raise OutputError(str(self.path), exc.strerror or str(exc)) from exc
        self._writer = csv.writer(self._handle)
        self._writer.writerow(TRACE_HEADER)
        return self

    def __call__(self, rows: Sequence[TraceRow]) -> None:
        try:
            for t, vid, edge, lane, pos, speed in rows:
                self._writer.writerow([fmt(t), vid, edge, lane, fmt(pos), fmt(speed)])
        except OSError as exc:
            raise OutputError(str(self.path), exc.strerror or str(exc)) from exc
        self.rows += len(rows)

    def __exit__(self, *exc_info) -> None:
        if self._handle is not None:
            self._handle.close()


def read_trace_csv(path: PathLike) -> List[TraceRow]:
    return [
        (float(r["t"]), r["vehicle_id"], r["edge"], r["lane"], float(r["pos"]), float(r["speed"]))
        for r in _read_rows(path, TRACE_HEADER)
    ]


# ============================================================
# CONTROLLER DECISIONS
# ============================================================


def write_controller_csv(decisions: Sequence[Decision], path: PathLike) -> Path:
    with _open_output(path) as handle:
        writer = csv.writer(handle)
        writer.writerow(CONTROLLER_HEADER)
        for d in decisions:
            writer.writerow(
                [fmt(d.t), d.tl_id, ";".join(fmt(x) for x in d.loads), ";".join(str(g) for g in d.greens)]
            )
    return Path(path)


def read_controller_csv(path: PathLike) -> List[Decision]:
    decisions = []
    for r in _read_rows(path, CONTROLLER_HEADER):
        loads = [float(x) for x in r["loads"].split(";") if x]
        greens = [int(x) for x in r["green_splits"].split(";") if x]
        decisions.append(Decision(float(r["t"]), r["tl_id"], loads, greens))
    return decisions


# ============================================================
# NETWORK EVENTS AND METRICS
# ============================================================


def write_events_csv(events: Sequence[NetEvent], path: PathLike) -> Path:
    with _open_output(path) as handle:
        writer = csv.writer(handle)
        writer.writerow(EVENTS_HEADER)
        for e in events:
            writer.writerow([fmt(e.t), e.event.value, e.packet_src, e.packet_seq, e.node, e.detail])
    return Path(path)


def read_events_csv(path: PathLike) -> List[NetEvent]:
    return [
        NetEvent(
            float(r["t"]),
            NetEventKind(r["event"]),
            r["packet_src"],
            int(r["packet_seq"]),
            r["node"],
            r["detail"],
        )
        for r in _read_rows(path, EVENTS_HEADER)
    ]


def write_metrics_csv(rows: Sequence[Tuple[int, NetMetrics]], path: PathLike) -> Path:
    """Write one ``nodes,sent,received,pdf,avg_pkts_s,avg_bits_s`` row per run."""
    with _open_output(path) as handle:
        writer = csv.writer(handle)
        writer.writerow(METRICS_HEADER)
        for nodes, m in rows:
            writer.writerow(
                [nodes, m.sent, m.received, fmt(m.pdf), fmt(m.avg_packets_per_s), fmt(m.avg_bits_per_s)]
            )
    return Path(path)


def read_metrics_csv(path: PathLike) -> List[Tuple[int, NetMetrics]]:
    """
    Read a metrics CSV back into (nodes, metrics) pairs.

    Raises:
        PlotError: Missing file, wrong header, no rows or a non-numeric cell
    """
    try:
        records = _read_rows(path, METRICS_HEADER)
    except OSError as exc:
        raise PlotError(f"cannot read '{path}': {exc.strerror or exc}") from exc
    except ValueError as exc:
        raise PlotError(str(exc)) from exc
    if not records:
        raise PlotError(f"{path}: metrics CSV has no rows")

    rows = []
    for line, r in enumerate(records, start=2):
        try:
            metrics = NetMetrics(
                sent=int(r["sent"]),
                received=int(r["received"]),
                pdf=float(r["pdf"]),
                avg_packets_per_s=float(r["avg_pkts_s"]),
                avg_bits_per_s=float(r["avg_bits_s"]),
            )
            rows.append((int(r["nodes"]), metrics))
        except (TypeError, ValueError) as exc:
            raise PlotError(f"{path}:{line}: non-numeric or invalid value ({exc})") from exc
    return rows


def write_report(report: BaseModel, path: PathLike) -> Path:
    with _open_output(path) as handle:
        handle.write(report.model_dump_json(indent=2))
        handle.write("\n")
    return Path(path)


# ============================================================
# SVG BAR CHART
# ============================================================

_WIDTH = 640
_HEIGHT = 400
_MARGIN_LEFT = 70
_MARGIN_RIGHT = 20
_MARGIN_TOP = 40
_MARGIN_BOTTOM = 50


def _nice_ceiling(value: float) -> float:
    if value <= 0:
        return 1.0
    magnitude = 10 ** math.floor(math.log10(value))
    for step in (1, 2, 2.5, 5, 10):
        if step * magnitude >= value:
            return step * magnitude
    return 10 * magnitude


def _label(column: str, value: float) -> str:
    if column == "pdf":
        return f"{value * 100:.2f}%"
    return f"{value:.2f}"


def render_bar_chart(rows: Sequence[Tuple[int, NetMetrics]], column: str) -> str:
    """
    Render one bar per metrics row, labelled by node count and annotated with its value.

    Raises:
        PlotError: Unknown column or no rows
    """
    if column not in PLOT_COLUMNS:
        raise PlotError(f"cannot plot column '{column}', expected one of {', '.join(PLOT_COLUMNS)}")
    if not rows:
        raise PlotError("nothing to plot")

    values = [m.pdf if column == "pdf" else m.avg_packets_per_s for _, m in rows]
    top = 1.0 if column == "pdf" else _nice_ceiling(max(values))
    plot_w = _WIDTH - _MARGIN_LEFT - _MARGIN_RIGHT
    plot_h = _HEIGHT - _MARGIN_TOP - _MARGIN_BOTTOM
    slot = plot_w / len(rows)
    bar_w = slot * 0.6
    base_y = _MARGIN_TOP + plot_h

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect x="0" y="0" width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        f'<line x1="{_MARGIN_LEFT}" y1="{base_y}" x2="{_WIDTH - _MARGIN_RIGHT}" y2="{base_y}" stroke="black"/>',
        f'<line x1="{_MARGIN_LEFT}" y1="{_MARGIN_TOP}" x2="{_MARGIN_LEFT}" y2="{base_y}" stroke="black"/>',
    ]
    for tick in range(5):
        value = top * tick / 4
        y = base_y - plot_h * tick / 4
        out.append(
            f'<text x="{_MARGIN_LEFT - 6}" y="{y:.2f}" font-size="11" text-anchor="end" '
            f'dominant-baseline="middle">{escape(_label(column, value))}</text>'
        )
    out.append(
        f'<text x="16" y="{_MARGIN_TOP + plot_h / 2:.2f}" font-size="13" text-anchor="middle" '
        f'transform="rotate(-90 16 {_MARGIN_TOP + plot_h / 2:.2f})">{escape(column)}</text>'
    )
    out.append(
        f'<text x="{_MARGIN_LEFT + plot_w / 2:.2f}" y="{_HEIGHT - 10}" font-size="13" '
        f'text-anchor="middle">nodes</text>'
    )

    for i, ((nodes, _), value) in enumerate(zip(rows, values)):
        height = plot_h * min(value / top, 1.0) if top > 0 else 0.0
        x = _MARGIN_LEFT + i * slot + (slot - bar_w) / 2
        y = base_y - height
        out.append(
            f'<rect class="bar" x="{x:.2f}" y="{y:.2f}" width="{bar_w:.2f}" height="{height:.2f}" '
            f'fill="steelblue"/>'
        )
        out.append(
            f'<text x="{x + bar_w / 2:.2f}" y="{y - 4:.2f}" font-size="11" '
            f'text-anchor="middle">{escape(_label(column, value))}</text>'
        )
        out.append(
            f'<text x="{x + bar_w / 2:.2f}" y="{base_y + 16}" font-size="11" '
            f'text-anchor="middle">{nodes}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def plot(metrics_path: PathLike, out_path: PathLike, column: str = "pdf") -> Path:
    """
    Read a metrics CSV and write its bar chart as SVG.

    Raises:
        PlotError: Empty or invalid CSV, unknown column
        OutputError: If the SVG cannot be written
    """
    rows = read_metrics_csv(metrics_path)
    svg = render_bar_chart(rows, column)
    with _open_output(out_path) as handle:
        handle.write(svg)
    logger.info(f"Plotted {len(rows)} bar(s) of '{column}' to {out_path}")
    return Path(out_path)
