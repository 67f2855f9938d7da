"""Report rendering: experiment results to JSON, CSV tables, and plain text.

Table layouts follow the reference report: one offline-error table, one
steady-state table (AER/TER/INS), and one transition table per group
(T_OFFSET/T_ONSET/T_TRANSITION/INS/TCE/PNM), with classifier rows and
"mean, sd" column pairs in the CSVs.
"""

from __future__ import annotations

import json
import os
import tempfile

from .errors import FormatError
from .metrics import STEADY_METRIC_NAMES, TRANSITION_METRIC_NAMES, Stat
from .pipeline import ExperimentResult
from .stream import TRANSITION_GROUPS

RESULT_VERSION = 1

_TRANSITION_HEADERS = {
    "t_offset": "T_OFFSET(ms)",
    "t_onset": "T_ONSET(ms)",
    "t_transition": "T_TRANSITION(ms)",
    "ins": "INS(%)",
    "tce": "TCE(%)",
    "pnm": "PNM(%)",
}
_STEADY_HEADERS = {"aer": "AER(%)", "ter": "TER(%)", "ins": "INS(%)"}


def _stat_dict(stat: Stat) -> dict:
    return {"mean": stat.mean, "sd": stat.sd, "n": stat.n}


def result_to_dict(result: ExperimentResult) -> dict:
    return {
        "version": RESULT_VERSION,
        "config": result.config,
        "provenance": result.provenance,
        "offline": {k: _stat_dict(v) for k, v in result.offline.items()},
        "offline_per_subject": {
            k: {str(s): v for s, v in d.items()}
            for k, d in result.offline_per_subject.items()
        },
        "steady": {
            k: {m: _stat_dict(st) for m, st in row.items()}
            for k, row in result.steady.items()
        },
        "transition": {
            g: {
                k: {m: _stat_dict(st) for m, st in row.items()}
                for k, row in rows.items()
            }
            for g, rows in result.transition.items()
        },
        "statistics": result.statistics,
    }


def result_to_json(result: ExperimentResult) -> str:
    return json.dumps(result_to_dict(result), sort_keys=True, indent=2) + "\n"


def load_result_dict(path) -> dict:
    with open(path) as fh:
        d = json.load(fh)
    if not isinstance(d, dict) or d.get("version") != RESULT_VERSION:
        raise FormatError(f"{path}: not a version-{RESULT_VERSION} result file")
    return d


def _csv_cell(value) -> str:
    return repr(float(value))


def offline_table(d: dict):
    headers = ["classifier", "ter_mean", "ter_sd"]
    rows = [
        [kind.upper(), _csv_cell(stat["mean"]), _csv_cell(stat["sd"])]
        for kind, stat in sorted(d["offline"].items())
    ]
    return headers, rows


def steady_table(d: dict):
    headers = ["classifier"]
    for name in STEADY_METRIC_NAMES:
        headers += [f"{name}_mean", f"{name}_sd"]
    rows = []
    for kind, row in sorted(d["steady"].items()):
        cells = [kind.upper()]
        for name in STEADY_METRIC_NAMES:
            cells += [_csv_cell(row[name]["mean"]), _csv_cell(row[name]["sd"])]
        rows.append(cells)
    return headers, rows


def transition_group_table(d: dict, group: str):
    headers = ["classifier"]
    for name in TRANSITION_METRIC_NAMES:
        headers += [f"{name}_mean", f"{name}_sd"]
    rows = []
    for kind, row in sorted(d["transition"].get(group, {}).items()):
        cells = [kind.upper()]
        for name in TRANSITION_METRIC_NAMES:
            cells += [_csv_cell(row[name]["mean"]), _csv_cell(row[name]["sd"])]
        rows.append(cells)
    return headers, rows


def all_tables(d: dict) -> dict:
    """Every CSV table of a result dict, keyed by file stem."""
    tables = {"offline": offline_table(d), "steady": steady_table(d)}
    for group in TRANSITION_GROUPS:
        tables[f"transitions_{group}"] = transition_group_table(d, group)
    return tables


def table_to_csv(headers, rows) -> str:
    lines = [",".join(headers)]
    lines += [",".join(str(c) for c in row) for row in rows]
    return "\n".join(lines) + "\n"


def _fmt_cell(mean, sd):
    return f"{mean:8.1f} +/- {sd:6.1f}"


def render_text_tables(d: dict) -> str:
    """Plain-text summary, one table per metric family."""
    out = []

    def emit(title, metric_names, header_map, rows_dict):
        out.append(title)
        cols = [header_map[m] for m in metric_names]
        out.append(
            f"  {'classifier':<12}" + "".join(f"{c:>22}" for c in cols)
        )
        for kind, row in sorted(rows_dict.items()):
            cells = "".join(
                f"{_fmt_cell(row[m]['mean'], row[m]['sd']):>22}"
                for m in metric_names
            )
            out.append(f"  {kind.upper():<12}{cells}")
        out.append("")

    out.append("Offline training error")
    out.append(f"  {'classifier':<12}{'TER(%)':>22}")
    for kind, stat in sorted(d["offline"].items()):
        out.append(f"  {kind.upper():<12}{_fmt_cell(stat['mean'], stat['sd']):>22}")
    out.append("")
    emit("Steady-state metrics", STEADY_METRIC_NAMES, _STEADY_HEADERS, d["steady"])
    for group in TRANSITION_GROUPS:
        rows = d["transition"].get(group, {})
        if rows:
            emit(
                f"Transition metrics ({group})",
                TRANSITION_METRIC_NAMES,
                _TRANSITION_HEADERS,
                rows,
            )
    return "\n".join(out)


def write_text_atomic(path, text: str) -> None:
    """Write-then-rename so failures never leave partial files."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-emgtrans-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_report_files(result_dict: dict, out_dir) -> list[str]:
    """Render the JSON result and every CSV table into out_dir atomically.

    All content is rendered before anything is renamed into place, so a
    failure leaves no partial report behind.  Returns the written paths.
    """
    os.makedirs(out_dir, exist_ok=True)
    payload = {
        "result.json": json.dumps(result_dict, sort_keys=True, indent=2) + "\n"
    }
    for stem, (headers, rows) in all_tables(result_dict).items():
        payload[f"{stem}.csv"] = table_to_csv(headers, rows)
    staged = []
    try:
        for name, text in payload.items():
            fd, tmp = tempfile.mkstemp(dir=out_dir, prefix=".tmp-emgtrans-")
            with os.fdopen(fd, "w") as fh:
                fh.write(text)
            staged.append((tmp, os.path.join(out_dir, name)))
    except BaseException:
        for tmp, _ in staged:
            if os.path.exists(tmp):
                os.unlink(tmp)
        raise
    written = []
    for tmp, final in staged:
        os.replace(tmp, final)
        written.append(final)
    return written
