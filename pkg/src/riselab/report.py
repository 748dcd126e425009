"""CSV, JSON and SVG artifacts of a run."""

from __future__ import annotations

import csv
import io
import json
import os

import numpy as np

from .rearrange import StepFunction

CSV_HEADER = ("scenario", "seed", "check", "max_violation", "tolerance", "pass")


class ArtifactError(OSError):
    pass


def _fmt(x: float) -> str:
    return repr(float(x))


def csv_text(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow([r["scenario"], int(r["seed"]), r["check"], _fmt(r["max_violation"]),
                    _fmt(r["tolerance"]), "true" if r["pass"] else "false"])
    return buf.getvalue()


def parse_csv(text: str) -> list[dict]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise ValueError("not a riselab report: header mismatch")
    return [
        {"scenario": s, "seed": int(seed), "check": c, "max_violation": float(mv),
         "tolerance": float(tol), "pass": p == "true"}
        for s, seed, c, mv, tol, p in rows[1:]
    ]


def _write(path: str, text: str) -> str:
    try:
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise ArtifactError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def emit_csv(records, path: str) -> str:
    return _write(path, csv_text(records))


def emit_json(obj, path: str) -> str:
    return _write(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def emit_table(rows, header, path: str) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) if isinstance(x, float) else x for x in row])
    return _write(path, buf.getvalue())


def _svg(fig, path: str) -> str:
    import matplotlib.pyplot as plt

    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return _write(path, buf.getvalue())


def _figure():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "riselab"
    return plt.subplots(figsize=(6, 4))


def emit_svg(curves: dict, path: str, title: str = "") -> str:
    """Step functions on ``(0, V]`` drawn as right-closed plateaus."""
    fig, ax = _figure()
    for label, f in curves.items():
        if not isinstance(f, StepFunction):
            raise TypeError(f"{label}: expected a StepFunction")
        xs = np.repeat(f.breakpoints, 2)[1:-1]
        ys = np.repeat(f.values, 2)
        ax.plot(xs, ys, label=label)
    ax.set_xlim(0.0, max(f.V for f in curves.values()) if curves else 1.0)
    ax.set_xlabel("s")
    ax.set_ylabel("value")
    if title:
        ax.set_title(title)
    if curves:
        ax.legend()
    return _svg(fig, path)


def emit_refinement_svg(grids, deviations: dict, path: str, title: str = "") -> str:
    """Deviation against grid size on log-log axes, one line per seed."""
    fig, ax = _figure()
    for seed, devs in deviations.items():
        ax.loglog(grids, np.maximum(devs, 1e-16), marker="o", label=f"seed {seed}")
    ax.set_xlabel("m")
    ax.set_ylabel("sup deviation")
    if title:
        ax.set_title(title)
    if len(deviations) <= 10:
        ax.legend()
    return _svg(fig, path)


def write_report(report, out_dir: str | None = None, svg: bool | None = None) -> list[str]:
    """All artifacts of ``report`` under ``out_dir``; returns the written paths."""
    cfg = report.config
    out = out_dir or cfg.out
    stem = os.path.join(out, cfg.scenario)
    paths = [emit_csv(report.records, stem + ".csv"), emit_json(report.stamp(), stem + ".json")]
    if cfg.scenario == "metric-table":
        rows = [(s, name, val) for s, ex in sorted(report.extras.items()) for name, val in ex["metrics"]]
        paths.append(emit_table(rows, ("seed", "metric", "value"), stem + "-values.csv"))
    if cfg.scenario == "conservation":
        rows = [(s, g, d) for s, ex in sorted(report.extras.items()) for g, d in zip(ex["grids"], ex["deviations"])]
        paths.append(emit_table(rows, ("seed", "m", "deviation"), stem + "-refinement.csv"))
    if svg if svg is not None else cfg.svg:
        if cfg.scenario == "conservation" and report.extras:
            first = report.extras[min(report.extras)]
            devs = {s: ex["deviations"] for s, ex in sorted(report.extras.items())}
            paths.append(emit_refinement_svg(first["grids"], devs, stem + ".svg", "conservation refinement"))
        for s, ex in sorted(report.extras.items()):
            if "profiles" in ex:
                paths.append(emit_svg(ex["profiles"], f"{stem}-seed{s}.svg", f"{cfg.scenario}, seed {s}"))
    return paths
