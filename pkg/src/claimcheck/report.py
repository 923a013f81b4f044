"""Per-application report documents: canonical JSON and reviewer HTML.

JSON bytes are a pure function of the report content so report trees can
be golden-tested and hash-compared across runs; the generation timestamp
is deliberately kept out of the serialized body and only shown in HTML.
"""

from __future__ import annotations

import html
import json
from dataclasses import dataclass, field

from .ingest import UnsupportedNotice
from .rules import STATUS_LABELS, CheckOutcome, CheckStatus, ReportKind


@dataclass
class ReportDocument:
    app_id: str
    kind: ReportKind
    outcomes: list[CheckOutcome]
    unsupported_notices: list[UnsupportedNotice] = field(default_factory=list)
    catalog_version: str = "0"
    generated_at: str | None = None  # display only, never serialized to JSON

    def status_counts(self) -> dict[str, int]:
        counts = {status.value: 0 for status in CheckStatus}
        for outcome in self.outcomes:
            counts[outcome.status.value] += 1
        return counts


def _outcome_dict(outcome: CheckOutcome) -> dict:
    def side(evidence) -> dict:
        return {
            "source": evidence.source,
            "state": evidence.state,
            "rendered": evidence.rendered,
            "detail": evidence.detail,
        }

    return {
        "check_id": outcome.check_id,
        "description": outcome.description,
        "status": outcome.status.value,
        "label": STATUS_LABELS[outcome.status],
        "message": outcome.message,
        "lhs": side(outcome.lhs),
        "rhs": side(outcome.rhs),
    }


def report_dict(report: ReportDocument) -> dict:
    return {
        "app_id": report.app_id,
        "kind": report.kind.value,
        "catalog_version": report.catalog_version,
        "outcomes": [_outcome_dict(o) for o in report.outcomes],
        "unsupported": [
            {"path": n.path, "reason": n.reason, "message": n.message, "slot": n.slot.value}
            for n in report.unsupported_notices
        ],
        "status_counts": report.status_counts(),
    }


def canonical_json_bytes(payload: object) -> bytes:
    return json.dumps(payload, sort_keys=True, ensure_ascii=False,
                      separators=(",", ":")).encode("utf-8") + b"\n"


def render_json(report: ReportDocument) -> bytes:
    """Canonical serialization: sorted keys, outcome order preserved,
    byte-identical across reruns of the same inputs."""
    return canonical_json_bytes(report_dict(report))


_REPORT_TITLES = {
    ReportKind.ELIGIBILITY: "Eligibility Report",
    ReportKind.COMMON_CORE: "Common Core Report",
    ReportKind.TYPOLOGY: "Typology Report",
}

_STYLE = """
body { font-family: Arial, Helvetica, sans-serif; margin: 2em; color: #222; }
h1 { font-size: 1.4em; } h2 { font-size: 1.1em; margin-top: 1.5em; }
table { border-collapse: collapse; width: 100%; }
th, td { border: 1px solid #bbb; padding: 6px 10px; text-align: left; vertical-align: top; }
th { background: #f0f0f0; }
tr.manual { background: #ffe0e0; }
tr.unsupported { background: #fff3d6; }
.badge { font-weight: bold; padding: 2px 6px; border-radius: 4px; white-space: nowrap; }
.badge.auto_verified { background: #d9f2d9; color: #1e6b1e; }
.badge.manual_check { background: #c62828; color: #fff; }
.badge.not_applicable { background: #eee; color: #666; }
.badge.unsupported { background: #e8a13a; color: #fff; }
.banner { background: #d9f2d9; color: #1e6b1e; padding: 10px 14px;
          border-radius: 4px; margin-bottom: 1em; font-weight: bold; }
.src { color: #777; font-size: 0.85em; }
footer { margin-top: 2em; color: #888; font-size: 0.8em; }
"""


def _evidence_cell(evidence) -> str:
    value = evidence.rendered if evidence.rendered is not None else f"({evidence.state})"
    parts = [html.escape(value), f'<div class="src">{html.escape(evidence.source)}</div>']
    if evidence.detail:
        parts.append(f'<div class="src">{html.escape(evidence.detail)}</div>')
    return "".join(parts)


def render_html(report: ReportDocument) -> bytes:
    """Self-contained reviewer page; manual checks highlighted in red."""
    rows = []
    for outcome in report.outcomes:
        css = ""
        if outcome.status is CheckStatus.MANUAL_CHECK:
            css = ' class="manual"'
        elif outcome.status is CheckStatus.UNSUPPORTED:
            css = ' class="unsupported"'
        rows.append(
            f"<tr{css}>"
            f"<td>{html.escape(outcome.description)}</td>"
            f'<td><span class="badge {outcome.status.value}">'
            f"{html.escape(STATUS_LABELS[outcome.status])}</span></td>"
            f"<td>{_evidence_cell(outcome.lhs)}</td>"
            f"<td>{_evidence_cell(outcome.rhs)}</td>"
            f"<td>{html.escape(outcome.message)}</td>"
            "</tr>"
        )

    counts = report.status_counts()
    actionable = sum(v for k, v in counts.items() if k != CheckStatus.NOT_APPLICABLE.value)
    banner = ""
    if report.outcomes and counts[CheckStatus.AUTO_VERIFIED.value] == actionable:
        banner = '<div class="banner">No verification needed for this report.</div>'

    notices = ""
    if report.unsupported_notices:
        items = "".join(
            f"<li><b>{html.escape(n.path)}</b> [{html.escape(n.reason)}]: "
            f"{html.escape(n.message)}</li>"
            for n in report.unsupported_notices
        )
        notices = f"<h2>Unsupported files</h2><ul>{items}</ul>"

    generated = ""
    if report.generated_at:
        generated = f" &middot; generated {html.escape(report.generated_at)}"

    page = f"""<!DOCTYPE html>
<html lang="en">
<head>
<meta charset="utf-8">
<title>{html.escape(_REPORT_TITLES[report.kind])} - {html.escape(report.app_id)}</title>
<style>{_STYLE}</style>
</head>
<body>
<h1>{html.escape(_REPORT_TITLES[report.kind])} &mdash; application {html.escape(report.app_id)}</h1>
{banner}
<table>
<thead><tr><th>Verification</th><th>Status</th><th>Declared / left</th>
<th>Extracted / right</th><th>Notes</th></tr></thead>
<tbody>
{"".join(rows)}
</tbody>
</table>
{notices}
<footer>catalog version {html.escape(report.catalog_version)}{generated}</footer>
</body>
</html>
"""
    return page.encode("utf-8")
