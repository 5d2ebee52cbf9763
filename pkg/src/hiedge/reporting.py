"""Machine-readable report emission: JSON and CSV with a stable field order
and floats rounded to 6 significant digits (idempotent on re-emission)."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

from .costs import EvalReport
from .gate import Policy
from .optimize import OptimizeResult, StrategyChoice
from .wire import BenchStats

EVAL_CSV_COLUMNS = ("mode", "thresholds", "accuracy", "latency_ms", "energy_mj",
                    "eta_off", "feasible")


def round6(x: float) -> float:
    return float(f"{x:.6g}")


def fmt6(x: float) -> str:
    return f"{x:.6g}"


def thresholds_str(thresholds: tuple[float, ...]) -> str:
    return ";".join(fmt6(t) for t in thresholds)


def report_to_dict(report: EvalReport) -> dict[str, Any]:
    return {
        "mode": report.mode.value,
        "thresholds": [round6(t) for t in report.thresholds],
        "accuracy": round6(report.accuracy),
        "avg_latency_ms": round6(report.avg_latency_ms),
        "avg_energy_mj": round6(report.avg_energy_mj),
        "eta_off": round6(report.eta_off),
        "eta_exit": [round6(f) for f in report.eta_exit],
        "eta_fn": round6(report.eta_fn),
        "lr_confusion": {
            "tp": report.lr_confusion.tp,
            "fp": report.lr_confusion.fp,
            "fn": report.lr_confusion.fn,
            "tn": report.lr_confusion.tn,
        },
        "num_samples": report.num_samples,
    }


def _eval_csv_row(policy: Policy, report: EvalReport, feasible: bool | None) -> str:
    cells = [
        policy.mode.value,
        thresholds_str(policy.thresholds),
        fmt6(report.accuracy),
        fmt6(report.avg_latency_ms),
        fmt6(report.avg_energy_mj),
        fmt6(report.eta_off),
        "" if feasible is None else str(feasible).lower(),
    ]
    return ",".join(cells)


def eval_report_json(report: EvalReport) -> str:
    return json.dumps(report_to_dict(report), indent=2)


def eval_report_csv(report: EvalReport, feasible: bool | None = None) -> str:
    policy = Policy(mode=report.mode, thresholds=report.thresholds)
    return "\n".join([",".join(EVAL_CSV_COLUMNS),
                      _eval_csv_row(policy, report, feasible)]) + "\n"


def optimize_result_json(result: OptimizeResult) -> str:
    return json.dumps({
        "feasible": result.feasible,
        "policy": {"mode": result.policy.mode.value,
                   "thresholds": [round6(t) for t in result.policy.thresholds]},
        "report": report_to_dict(result.report),
    }, indent=2)


def optimize_result_csv(result: OptimizeResult) -> str:
    return "\n".join([",".join(EVAL_CSV_COLUMNS),
                      _eval_csv_row(result.policy, result.report, result.feasible)]) + "\n"


def frontier_json(frontier: list[tuple[Policy, EvalReport]]) -> str:
    return json.dumps([
        {"policy": {"mode": p.mode.value, "thresholds": [round6(t) for t in p.thresholds]},
         "report": report_to_dict(r)}
        for p, r in frontier
    ], indent=2)


def frontier_csv(frontier: list[tuple[Policy, EvalReport]]) -> str:
    lines = [",".join(EVAL_CSV_COLUMNS)]
    lines += [_eval_csv_row(p, r, None) for p, r in frontier]
    return "\n".join(lines) + "\n"


COMPARE_CSV_COLUMNS = ("fixed",) + EVAL_CSV_COLUMNS


def compare_table_json(table: list[StrategyChoice]) -> str:
    rows = []
    for choice in table:
        row: dict[str, Any] = {"fixed": choice.fixed, "feasible": choice.feasible}
        if choice.feasible:
            row["mode"] = choice.mode.value
            row["thresholds"] = [round6(t) for t in choice.policy.thresholds]
            row["report"] = report_to_dict(choice.report)
        rows.append(row)
    return json.dumps(rows, indent=2)


def compare_table_csv(table: list[StrategyChoice]) -> str:
    lines = [",".join(COMPARE_CSV_COLUMNS)]
    for choice in table:
        if choice.feasible:
            lines.append(choice.fixed + "," +
                         _eval_csv_row(choice.policy, choice.report, True))
        else:
            lines.append(f"{choice.fixed},none,,,,,,false")
    return "\n".join(lines) + "\n"


def bench_stats_json(stats: BenchStats) -> str:
    return json.dumps({
        "mean_rtt_ms": round6(stats.mean_rtt_ms),
        "stddev_ms": round6(stats.stddev_ms),
        "min_ms": round6(stats.min_ms),
        "max_ms": round6(stats.max_ms),
        "p50_ms": round6(stats.p50_ms),
        "p99_ms": round6(stats.p99_ms),
        "count": stats.count,
    }, indent=2)


def bench_rtts_csv(stats: BenchStats) -> str:
    lines = ["rep,rtt_ms"]
    lines += [f"{i},{fmt6(rtt)}" for i, rtt in enumerate(stats.rtts_ms)]
    return "\n".join(lines) + "\n"


def write_text(text: str, path: str | Path) -> None:
    Path(path).write_text(text, encoding="utf-8", newline="\n")
