"""Solution and class files, and table rendering.

Solution CSV layout (UTF-8, LF)::

    # flagein solutions v1
    # n=4
    # trials=... seed=... (solver parameters, when known)
    l_1_2,l_1_3,...,l_4_5,scalar_curvature,volume_factor,h_invariant,einstein_constant,residual_norm
    1.00000,1.31177,...

Coefficients are written with ``rounding_decimals`` decimals (default 5),
derived quantities with 8, the residual in ``%.3e``. An empty
``einstein_constant`` field means the row is not Einstein within tolerance.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .classify import IsometryClass, canonical_form
from .curvature import EINSTEIN_TOLERANCE, Metric, curvature_summary
from .flag_model import FlagManifold
from .solver import RawSolution, SolverConfig

FORMAT_VERSION = 1
SOLUTIONS_MAGIC = "# flagein solutions v1"
CLASSES_MAGIC = "# flagein classes v1"
DERIVED_COLUMNS = ["scalar_curvature", "volume_factor", "h_invariant", "einstein_constant", "residual_norm"]
DEFAULT_DECIMALS = 5


class FormatError(ValueError):
    """Malformed solution or class file."""


def _fmt_derived(v: float) -> str:
    return f"{v:.8f}"


def _fmt_resid(v: float) -> str:
    return f"{v:.3e}"


@dataclass(frozen=True)
class SolutionRecord:
    n: int
    lam: tuple[float, ...]
    scalar_curvature: float
    volume_factor: float
    h_invariant: float
    einstein_constant: Optional[float]
    residual_norm: float

    @property
    def x(self) -> np.ndarray:
        """Gauge vector (coefficients after root (1,2))."""
        return np.array(self.lam[1:])

    def metric(self) -> Metric:
        return Metric(self.n, np.array(self.lam))

    def quantized(self, decimals: int = DEFAULT_DECIMALS) -> "SolutionRecord":
        """The record exactly as it reads back from a file."""
        return SolutionRecord(
            n=self.n,
            lam=tuple(float(f"{v:.{decimals}f}") for v in self.lam),
            scalar_curvature=float(_fmt_derived(self.scalar_curvature)),
            volume_factor=float(_fmt_derived(self.volume_factor)),
            h_invariant=float(_fmt_derived(self.h_invariant)),
            einstein_constant=None if self.einstein_constant is None else float(_fmt_derived(self.einstein_constant)),
            residual_norm=float(_fmt_resid(self.residual_norm)),
        )


def record_from_solution(sol: RawSolution, n: int, decimals: int = DEFAULT_DECIMALS) -> SolutionRecord:
    """Build a record: coefficients from the rounded point, curvature
    quantities from the converged (unrounded) point."""
    exact = sol.unrounded if sol.unrounded is not None else sol.x
    summ = curvature_summary(Metric.from_gauge(n, exact))
    return SolutionRecord(
        n=n,
        lam=(1.0, *map(float, sol.x)),
        scalar_curvature=summ.scalar_curvature,
        volume_factor=summ.volume_factor,
        h_invariant=summ.h_invariant,
        einstein_constant=summ.einstein_constant,
        residual_norm=sol.residual_norm,
    ).quantized(decimals)


def record_from_metric(metric: Metric, residual_norm: float = 0.0, decimals: int = DEFAULT_DECIMALS) -> SolutionRecord:
    m = metric.normalized()
    summ = curvature_summary(m)
    return SolutionRecord(
        n=m.n,
        lam=tuple(map(float, m.lam)),
        scalar_curvature=summ.scalar_curvature,
        volume_factor=summ.volume_factor,
        h_invariant=summ.h_invariant,
        einstein_constant=summ.einstein_constant,
        residual_norm=residual_norm,
    ).quantized(decimals)


# ---- writing -------------------------------------------------------------


def _check_records(records: Sequence[SolutionRecord], n: Optional[int]) -> int:
    ns = {r.n for r in records}
    if n is not None:
        ns.add(n)
    if len(ns) > 1:
        raise ValueError(f"records mix ranks {sorted(ns)}")
    if not ns:
        raise ValueError("cannot infer n from an empty record list; pass n=")
    return ns.pop()


def _meta_lines(n: int, meta: Optional[dict]) -> list[str]:
    lines = [f"# n={n}"]
    if meta:
        lines.append("# " + " ".join(f"{k}={_meta_value(v)}" for k, v in meta.items()))
    return lines


def _meta_value(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v).replace(" ", "_")


def _row(rec: SolutionRecord, decimals: int) -> list[str]:
    cells = [f"{v:.{decimals}f}" for v in rec.lam]
    cells += [_fmt_derived(rec.scalar_curvature), _fmt_derived(rec.volume_factor), _fmt_derived(rec.h_invariant)]
    cells.append("" if rec.einstein_constant is None else _fmt_derived(rec.einstein_constant))
    cells.append(_fmt_resid(rec.residual_norm))
    return cells


def _record_json(rec: SolutionRecord) -> dict:
    return {
        "lam": list(rec.lam),
        "scalar_curvature": rec.scalar_curvature,
        "volume_factor": rec.volume_factor,
        "h_invariant": rec.h_invariant,
        "einstein_constant": rec.einstein_constant,
        "residual_norm": rec.residual_norm,
    }


def _write_text(path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def write_solutions(
    records: Sequence[SolutionRecord],
    path,
    format: str = "csv",
    n: Optional[int] = None,
    meta: Optional[dict] = None,
    decimals: int = DEFAULT_DECIMALS,
) -> None:
    """Write records as CSV or JSON. ``meta`` is echoed into the header."""
    n = _check_records(records, n)
    fm = FlagManifold(n)
    if format == "csv":
        lines = [SOLUTIONS_MAGIC, *_meta_lines(n, meta), ",".join(fm.column_names() + DERIVED_COLUMNS)]
        lines += [",".join(_row(r, decimals)) for r in records]
        _write_text(path, "\n".join(lines) + "\n")
    elif format == "json":
        doc = {
            "format": "flagein-solutions",
            "version": FORMAT_VERSION,
            "n": n,
            "decimals": decimals,
            "meta": meta or {},
            "columns": fm.column_names() + DERIVED_COLUMNS,
            "records": [_record_json(r.quantized(decimals)) for r in records],
        }
        _write_text(path, json.dumps(doc, indent=1) + "\n")
    else:
        raise ValueError(f"unknown format {format!r}; use csv or json")


def solution_meta(config: SolverConfig) -> dict:
    return config.echo()


# ---- reading -------------------------------------------------------------


@dataclass
class SolutionFile:
    n: int
    meta: dict
    records: list[SolutionRecord]
    decimals: int = DEFAULT_DECIMALS


def _parse_float(cell: str, lineno: int, col: str) -> float:
    try:
        v = float(cell)
    except ValueError:
        raise FormatError(f"line {lineno}: column {col}: cannot parse {cell!r} as a number") from None
    if not math.isfinite(v):
        raise FormatError(f"line {lineno}: column {col}: value {cell!r} is not finite")
    return v


def _parse_meta(line: str, meta: dict) -> None:
    for tok in line[1:].split():
        if "=" in tok:
            k, v = tok.split("=", 1)
            meta[k] = v


def _decimal_comma_hint(line: str) -> bool:
    return any(sep in line for sep in (";", "&", "\t"))


def _parse_record(cells: list[str], n: int, lineno: int, cols: list[str]) -> SolutionRecord:
    N = len(cols) - len(DERIVED_COLUMNS)
    lam = tuple(_parse_float(c, lineno, cols[i]) for i, c in enumerate(cells[:N]))
    for i, v in enumerate(lam):
        if v <= 0:
            raise FormatError(f"line {lineno}: column {cols[i]}: coefficient {v!r} must be positive")
    if lam[0] != 1.0:
        raise FormatError(f"line {lineno}: column {cols[0]} must be 1 (lambda_12 gauge), got {lam[0]!r}")
    s, v, h = (_parse_float(cells[N + k], lineno, cols[N + k]) for k in range(3))
    kc = cells[N + 3].strip()
    k = None if kc == "" else _parse_float(kc, lineno, cols[N + 3])
    r = _parse_float(cells[N + 4], lineno, cols[N + 4])
    return SolutionRecord(n=n, lam=lam, scalar_curvature=s, volume_factor=v, h_invariant=h, einstein_constant=k, residual_norm=r)


def _read_csv(lines: list[str], magic: str, extra: list[str]):
    if not lines or lines[0].rstrip("\r") != magic:
        raise FormatError(f"line 1: expected header {magic!r}")
    meta: dict = {}
    n = None
    lineno = 1
    body_start = None
    for idx in range(1, len(lines)):
        line = lines[idx]
        lineno = idx + 1
        if line.startswith("#"):
            _parse_meta(line, meta)
            continue
        body_start = idx
        break
    if "n" not in meta:
        raise FormatError("missing '# n=<rank>' header line")
    try:
        n = int(meta.pop("n"))
        fm = FlagManifold(n)
    except ValueError as exc:
        raise FormatError(f"bad rank in header: {exc}") from None
    cols = extra + fm.column_names() + DERIVED_COLUMNS
    if body_start is None:
        raise FormatError("missing column header row")
    header = lines[body_start].rstrip("\r").split(",")
    if header != cols:
        raise FormatError(f"line {body_start + 1}: column header does not match n={n}: expected {','.join(cols)}")
    rows = []
    for idx in range(body_start + 1, len(lines)):
        line = lines[idx].rstrip("\r")
        lineno = idx + 1
        if not line.strip():
            continue
        if _decimal_comma_hint(line):
            raise FormatError(
                f"line {lineno}: found ';', '&' or tab separators; files must use ',' as the delimiter and '.' "
                "as the decimal point (convert decimal commas, e.g. '1,31177' -> '1.31177')"
            )
        cells = line.split(",")
        if len(cells) != len(cols):
            hint = " (decimal commas? use '.' as the decimal point)" if len(cells) > len(cols) else ""
            raise FormatError(f"line {lineno}: expected {len(cols)} columns, found {len(cells)}{hint}")
        rows.append((lineno, cells))
    return n, meta, cols, rows


def _decimals_from(meta: dict) -> int:
    try:
        return int(meta.get("rounding_decimals", DEFAULT_DECIMALS))
    except ValueError:
        raise FormatError(f"bad rounding_decimals in header: {meta['rounding_decimals']!r}") from None


def read_solution_file(path) -> SolutionFile:
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        return _read_json(text)
    n, meta, cols, rows = _read_csv(text.split("\n"), SOLUTIONS_MAGIC, [])
    records = [_parse_record(cells, n, lineno, cols) for lineno, cells in rows]
    return SolutionFile(n=n, meta=meta, records=records, decimals=_decimals_from(meta))


def _read_json(text: str) -> SolutionFile:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"line {exc.lineno}: invalid JSON: {exc.msg}") from None
    if doc.get("format") != "flagein-solutions" or doc.get("version") != FORMAT_VERSION:
        raise FormatError("not a flagein solutions JSON document (version 1)")
    n = int(doc["n"])
    N = FlagManifold(n).N
    records = []
    for k, r in enumerate(doc["records"]):
        lam = tuple(float(v) for v in r["lam"])
        if len(lam) != N or any(v <= 0 for v in lam) or lam[0] != 1.0:
            raise FormatError(f"record {k}: coefficients must be {N} positive values with lambda_12 = 1")
        records.append(
            SolutionRecord(
                n=n,
                lam=lam,
                scalar_curvature=float(r["scalar_curvature"]),
                volume_factor=float(r["volume_factor"]),
                h_invariant=float(r["h_invariant"]),
                einstein_constant=None if r["einstein_constant"] is None else float(r["einstein_constant"]),
                residual_norm=float(r["residual_norm"]),
            )
        )
    return SolutionFile(n=n, meta=dict(doc.get("meta", {})), records=records, decimals=int(doc.get("decimals", DEFAULT_DECIMALS)))


def read_solutions(path) -> list[SolutionRecord]:
    """Inverse of :func:`write_solutions` (CSV or JSON, detected from content)."""
    return read_solution_file(path).records


# ---- class files ---------------------------------------------------------


def write_classes(
    classes: Sequence[IsometryClass],
    records: Sequence[SolutionRecord],
    path,
    n: Optional[int] = None,
    decimals: int = DEFAULT_DECIMALS,
) -> None:
    """One row per member: ``class_id,kaehler_einstein`` then the solution columns.

    Each class's H value is kept at full precision in a ``# h_<id>=`` header line.
    """
    n = _check_records(records, n)
    fm = FlagManifold(n)
    lines = [CLASSES_MAGIC, f"# n={n}", f"# classes={len(classes)}"]
    lines += [f"# h_{cid}={cls.h_value!r}" for cid, cls in enumerate(classes, start=1)]
    lines.append(",".join(["class_id", "kaehler_einstein"] + fm.column_names() + DERIVED_COLUMNS))
    for cid, cls in enumerate(classes, start=1):
        for m in _ordered_members(cls, records):
            lines.append(",".join([str(cid), "1" if cls.is_kaehler_einstein else "0"] + _row(records[m], decimals)))
    _write_text(path, "\n".join(lines) + "\n")


def _class_h(meta: dict, cid: int, row_values: list[float]) -> float:
    key = f"h_{cid}"
    if key in meta:
        try:
            return float(meta[key])
        except ValueError:
            raise FormatError(f"bad {key} in header: {meta[key]!r}") from None
    return float(np.mean(row_values))


def is_class_file(path) -> bool:
    with open(path, encoding="utf-8") as fh:
        return fh.readline().rstrip("\r\n") == CLASSES_MAGIC


def read_classes(path) -> tuple[list[IsometryClass], list[SolutionRecord]]:
    """Classes and their member records, in file order."""
    text = Path(path).read_text(encoding="utf-8")
    n, meta, cols, rows = _read_csv(text.split("\n"), CLASSES_MAGIC, ["class_id", "kaehler_einstein"])
    records = []
    groups: dict[int, list[int]] = {}
    ke: dict[int, bool] = {}
    for lineno, cells in rows:
        try:
            cid = int(cells[0])
        except ValueError:
            raise FormatError(f"line {lineno}: class_id {cells[0]!r} is not an integer") from None
        if cells[1] not in ("0", "1"):
            raise FormatError(f"line {lineno}: kaehler_einstein must be 0 or 1")
        records.append(_parse_record(cells[2:], n, lineno, cols[2:]))
        groups.setdefault(cid, []).append(len(records) - 1)
        ke[cid] = cells[1] == "1"
    classes = []
    for cid in sorted(groups):
        members = groups[cid]
        canon = canonical_form(np.array(records[members[0]].lam), n)
        classes.append(
            IsometryClass(
                canonical=canon,
                members=tuple(members),
                h_value=_class_h(meta, cid, [records[i].h_invariant for i in members]),
                s_value=curvature_summary(Metric(n, canon)).scalar_curvature,
                is_kaehler_einstein=ke[cid],
            )
        )
    return classes, records


# ---- rendering -----------------------------------------------------------


def _ordered_members(cls: IsometryClass, records: Sequence[SolutionRecord]) -> list[int]:
    return sorted(cls.members, key=lambda i: (records[i].scalar_curvature, records[i].lam))


def _fmt_lam(v: float) -> str:
    s = f"{v:.5f}".rstrip("0").rstrip(".")
    return s or "0"


def _fmt_table(v: float) -> str:
    return f"{v:.10g}"


def render_table(classes: Sequence[IsometryClass], records: Sequence[SolutionRecord], format: str = "markdown", n: Optional[int] = None) -> str:
    """Per-class blocks of member coefficients with S, V^(1/d) and H, classes by ascending H."""
    if n is None:
        n = records[0].n if records else None
    lam_cols = FlagManifold(n).column_names() if n else ["l_i_j"]
    order = sorted(range(len(classes)), key=lambda c: classes[c].h_value)
    if format == "markdown":
        head = ["| " + " | ".join(lam_cols + ["S", "V^(1/d)", "H"]) + " |", "|" + "---|" * (len(lam_cols) + 3)]
        if not classes:
            return "\n".join(head) + "\n"
        out = []
        for k, c in enumerate(order, start=1):
            cls = classes[c]
            tag = ", Kaehler-Einstein" if cls.is_kaehler_einstein else ""
            out.append(f"### Class {k}: H = {_fmt_table(cls.h_value)} ({cls.size} metrics{tag})")
            out.append("")
            out.extend(head)
            for m in _ordered_members(cls, records):
                r = records[m]
                cells = [_fmt_lam(v) for v in r.lam] + [_fmt_table(r.scalar_curvature), _fmt_table(r.volume_factor), _fmt_table(r.h_invariant)]
                out.append("| " + " | ".join(cells) + " |")
            out.append("")
        return "\n".join(out)
    if format == "csv":
        out = [",".join(["class"] + lam_cols + ["scalar_curvature", "volume_factor", "h_invariant"])]
        for k, c in enumerate(order, start=1):
            for m in _ordered_members(classes[c], records):
                r = records[m]
                out.append(",".join([str(k)] + [_fmt_lam(v) for v in r.lam] + [_fmt_table(r.scalar_curvature), _fmt_table(r.volume_factor), _fmt_table(r.h_invariant)]))
        return "\n".join(out) + "\n"
    raise ValueError(f"unknown table format {format!r}; use markdown or csv")


# ---- golden data ---------------------------------------------------------


def golden_path(name: str = "su5_table.csv") -> Path:
    return Path(str(resources.files("flagein") / "data" / name))


def load_golden(name: str = "su5_table.csv") -> list[SolutionRecord]:
    """The reference SU(5)/T^4 table (396 rows, 5-decimal coefficients)."""
    return read_solutions(golden_path(name))


def einstein_check(record: SolutionRecord, tolerance: float = EINSTEIN_TOLERANCE) -> float:
    """Max deviation of the Ricci components from their mean at the stored point."""
    return curvature_summary(record.metric(), tolerance).max_ricci_deviation
