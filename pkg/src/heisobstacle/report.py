"""Writing reports to an output directory.

Every table goes to a CSV whose name is fixed by the report type, floats are
written with ``repr`` so reruns give byte-identical files, and a plain-text
manifest records the command, the configuration and library versions.
"""

from __future__ import annotations

import csv
import platform
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy

MANIFEST_NAME = "manifest.txt"
SUMMARY_NAME = "summary.txt"


@dataclass
class Table:
    name: str
    header: list[str]
    rows: list[list]


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_table(path: Path, table: Table) -> Path:
    try:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(table.header)
            for row in table.rows:
                if len(row) != len(table.header):
                    raise ValueError(f"{table.name}: row {row!r} does not match header {table.header}")
                wr.writerow([_cell(v) for v in row])
    except OSError as exc:
        raise OSError(f"could not write {path}: {exc.strerror or exc}") from exc
    return path


def versions() -> dict:
    from . import __version__
    return {"heisobstacle": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__}


def write_text(path: Path, text: str) -> Path:
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"could not write {path}: {exc.strerror or exc}") from exc
    return path


def emit_report(tables: list[Table], out_dir: str | Path, *, command: str = "",
                config_text: str = "", seed: int | None = None,
                summary: str | None = None, files=()) -> list[Path]:
    """Write each table to ``<out_dir>/<name>`` plus the manifest; returns the paths written.

    ``files`` are paths already written by the caller (field CSVs, histories);
    they are only listed in the manifest.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"could not create output directory {out}: {exc.strerror or exc}") from exc
    names = [t.name for t in tables]
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate report names: {names}")
    paths = [Path(f) for f in files] + [write_table(out / t.name, t) for t in tables]
    if summary is not None:
        paths.append(write_text(out / SUMMARY_NAME, summary))
    lines = [f"command: {command}", f"seed: {'' if seed is None else seed}"]
    lines += [f"version {k}: {v}" for k, v in versions().items()]
    lines += [f"file: {p.name}" for p in paths]
    lines += ["", "[config]", config_text.rstrip("\n")]
    paths.append(write_text(out / MANIFEST_NAME, "\n".join(lines) + "\n"))
    return paths
