"""
Report emission: text (3 decimals), csv and json (full precision), plus the
resultant-vector and per-unit weight files for plotting the two
counterfactual arms.

Nothing emitted here carries a timestamp, so equal inputs give byte-equal
files.
"""

import io
import logging
from pathlib import Path
from typing import Optional, Union

import pandas as pd

from src.analysis import AnalysisReport
from src.utils import DomainError

logger = logging.getLogger(__name__)

REPORT_FORMATS = ("text", "csv", "json")
RESULT_COLUMNS = [
    "scheme", "tau", "se_tau", "tau_lo", "tau_hi", "xi", "se_xi", "xi_lo", "xi_hi",
    "tau_minutes", "se_tau_minutes", "level", "n_total", "n_used", "n_dropped",
]
VECTOR_COLUMNS = ["scheme", "arm", "alpha", "beta", "mu", "rho"]
UNIT_COLUMNS = ["scheme", "arm", "angle", "weight"]


def _text(report: AnalysisReport) -> str:
    lines = [
        f"rows: {report.n_total} read, {report.n_used} used, {report.n_dropped} dropped",
    ]
    for reason, count in sorted(report.dropped_reasons.items()):
        lines.append(f"  {reason}: {count}")
    lines.append(f"design: {', '.join(report.design_columns)}")
    lines.append(
        f"propensity: {report.propensity_iterations} Newton iterations, "
        f"log-likelihood {report.propensity_log_likelihood:.3f}"
    )
    pct = f"{100 * report.level:g}%"
    for r in report.results:
        lines.append("")
        lines.append(f"[{r.scheme.value}]")
        lines.append(
            f"  ADTE tau = {r.tau:.3f} rad (se {r.se_tau:.3f}), {pct} CI [{r.tau_lo:.3f}, {r.tau_hi:.3f}]"
        )
        if r.tau_minutes is not None:
            lines.append(f"           = {r.tau_minutes:.3f} min (se {r.se_tau_minutes:.3f})")
        lines.append(
            f"  ALTE xi  = {r.xi:.3f} (se {r.se_xi:.3f}), {pct} CI [{r.xi_lo:.3f}, {r.xi_hi:.3f}]"
        )
    lines.append("")
    lines.append("resultant vectors:")
    for v in report.vectors:
        lines.append(
            f"  {v.scheme.value:<6}{v.arm:<8} alpha={v.alpha:.3f} beta={v.beta:.3f} "
            f"mu={v.mu:.3f} rho={v.rho:.3f}"
        )
    return "\n".join(lines) + "\n"


def results_frame(report: AnalysisReport) -> pd.DataFrame:
    return pd.DataFrame(
        [
            {
                **r.model_dump(mode="json"),
                "level": report.level,
                "n_total": report.n_total,
                "n_used": report.n_used,
                "n_dropped": report.n_dropped,
            }
            for r in report.results
        ],
        columns=RESULT_COLUMNS,
    )


def vectors_frame(report: AnalysisReport) -> pd.DataFrame:
    return pd.DataFrame([v.model_dump(mode="json") for v in report.vectors], columns=VECTOR_COLUMNS)


def units_frame(report: AnalysisReport) -> pd.DataFrame:
    return pd.DataFrame([u.model_dump(mode="json") for u in report.units], columns=UNIT_COLUMNS)


def render_report(report: AnalysisReport, fmt: str = "text") -> str:
    if fmt == "text":
        return _text(report)
    if fmt == "csv":
        buffer = io.StringIO()
        results_frame(report).to_csv(buffer, index=False, lineterminator="\n")
        return buffer.getvalue()
    if fmt == "json":
        return report.model_dump_json(indent=2) + "\n"
    raise DomainError(f"unknown report format {fmt!r}; expected one of {REPORT_FORMATS}")


def emit_report(
    report: AnalysisReport,
    fmt: str = "text",
    path: Optional[Union[str, Path]] = None,
    stream: Optional[io.TextIOBase] = None,
) -> str:
    """Render and write to `path`, else to `stream` when given; returns the text"""
    text = render_report(report, fmt)
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
        logger.info(f"wrote {fmt} report to {path}")
    elif stream is not None:
        stream.write(text)
    return text


def emit_vectors(
    report: AnalysisReport,
    vectors_path: Union[str, Path],
    weights_path: Optional[Union[str, Path]] = None,
) -> None:
    """Per-arm resultant vectors, and optionally the per-unit (angle, weight) records"""
    vectors_frame(report).to_csv(vectors_path, index=False, lineterminator="\n")
    logger.info(f"wrote resultant vectors to {vectors_path}")
    if weights_path is not None:
        units_frame(report).to_csv(weights_path, index=False, lineterminator="\n")
        logger.info(f"wrote {len(report.units)} unit weights to {weights_path}")
