"""Proof reports as deterministic JSON documents."""
from __future__ import annotations

import json
import math
from pathlib import Path


def _clean(x):
    # JSON has no infinities; spell them out so reports stay parseable
    if isinstance(x, float) and not math.isfinite(x):
        return "inf" if x > 0 else ("-inf" if x < 0 else "nan")
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    return x


def report_json(report: dict, **extra) -> str:
    doc = _clean({**report, **extra})
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def write_report(report: dict, path, **extra) -> None:
    Path(path).write_text(report_json(report, **extra))


def summary_lines(report: dict) -> list[str]:
    """Short human-readable digest of a report."""
    out = [f"goal {report.get('goal')}: {report['status']} "
           f"(delta={report['delta']:g}, eps={report['eps']:g}, {report['queries']} icp queries)"]
    for c in report.get("certificates", []):
        bits = [c["name"], c["kind"]]
        if c.get("level") is not None:
            bits.append(f"level={c['level']:.6g}")
        if "refine" in c:
            bits.append(f"synthesis={c['refine']}")
        if c["kind"] == "discrete":
            bits.append("certificate" if c["certificate"] else "no certificate")
        out.append("  " + " ".join(bits))
    for o in report.get("open", []):
        w = f" witness={o['witness']}" if "witness" in o else ""
        out.append(f"  {o['status']}: {o['reason']}{w}")
    return out
