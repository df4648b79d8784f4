"""Readers and writers for the dataset, score, annotation and pair files.

Dataset records are either CSV rows ``sample_id,rating_1,...,rating_N``
(ragged, optional header) or JSONL objects ``{"sample_id", "ratings"}``.
Parse problems are collected for the whole file and raised together.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import re
from pathlib import Path
from typing import Iterable, Optional, Sequence

from latentmos.errors import InputError
from latentmos.metrics import PreferenceAnnotation, PreferencePair, Vote
from latentmos.ratings import DEFAULT_SCALE_MAX, RatingSet

DEFAULT_DIGITS = 12

_INT_RE = re.compile(r"^[+-]?\d+$")


class DataFileError(InputError):
    """One or more records in a data file could not be parsed."""

    def __init__(self, path, problems: Sequence[tuple[int, str]]):
        self.path = str(path)
        self.problems = list(problems)
        lines = "\n".join(f"  line {n}: {msg}" for n, msg in self.problems)
        super().__init__(f"{self.path}: {len(self.problems)} bad record(s)\n{lines}")


def fmt_num(x: Optional[float], digits: int = DEFAULT_DIGITS) -> str:
    """Fixed-precision text for a number; ``None``/NaN become an empty cell."""
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return f"{x:.{digits}g}"


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return "sha256:" + h.hexdigest()


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def _csv_rows(text: str) -> list[tuple[int, list[str]]]:
    """Non-blank CSV rows with 1-based line numbers, trailing empty cells dropped."""
    rows = []
    reader = csv.reader(io.StringIO(text))
    for row in reader:
        cells = [c.strip() for c in row]
        while cells and cells[-1] == "":
            cells.pop()
        if cells:
            rows.append((reader.line_num, cells))
    return rows


def _looks_like_jsonl(path: Path, text: str) -> bool:
    if path.suffix.lower() in (".jsonl", ".json", ".ndjson"):
        return True
    if path.suffix.lower() == ".csv":
        return False
    return text.lstrip().startswith("{")


def read_dataset(path, scale_max: int = DEFAULT_SCALE_MAX) -> list[RatingSet]:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if _looks_like_jsonl(path, text):
        records, problems = _parse_jsonl(text, scale_max)
    else:
        records, problems = _parse_csv_dataset(text, scale_max)
    seen: dict[str, int] = {}
    for lineno, rs in records:
        if rs.sample_id in seen:
            problems.append((lineno, f"duplicate sample_id {rs.sample_id!r} (first on line {seen[rs.sample_id]})"))
        else:
            seen[rs.sample_id] = lineno
    if problems:
        raise DataFileError(path, sorted(problems))
    if not records:
        raise DataFileError(path, [(0, "no records")])
    return [rs for _, rs in records]


def _parse_csv_dataset(text: str, scale_max: int):
    records, problems = [], []
    rows = _csv_rows(text)
    if rows and len(rows[0][1]) >= 2 and not _is_number(rows[0][1][1]):
        rows = rows[1:]
    for lineno, cells in rows:
        sid, fields = cells[0], cells[1:]
        bad = [f for f in fields if not _INT_RE.match(f)]
        if bad:
            problems.append((lineno, f"{sid}: non-integer rating(s) {bad}"))
            continue
        try:
            records.append((lineno, RatingSet(sid, tuple(int(f) for f in fields), scale_max)))
        except InputError as exc:
            problems.append((lineno, str(exc)))
    return records, problems


def _parse_jsonl(text: str, scale_max: int):
    records, problems = [], []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            problems.append((lineno, f"invalid JSON: {exc.msg}"))
            continue
        if not isinstance(obj, dict) or "sample_id" not in obj or "ratings" not in obj:
            problems.append((lineno, "expected an object with 'sample_id' and 'ratings'"))
            continue
        sid, ratings = obj["sample_id"], obj["ratings"]
        if not isinstance(sid, str):
            problems.append((lineno, f"sample_id must be a string, got {sid!r}"))
            continue
        if not isinstance(ratings, list):
            problems.append((lineno, f"{sid}: 'ratings' must be a list"))
            continue
        try:
            records.append((lineno, RatingSet(sid, tuple(ratings), scale_max)))
        except InputError as exc:
            problems.append((lineno, str(exc)))
    return records, problems


def write_dataset(path, rating_sets: Iterable[RatingSet], fmt: str = "csv") -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if fmt == "jsonl":
            for rs in rating_sets:
                fh.write(json.dumps({"sample_id": rs.sample_id, "ratings": list(rs.ratings)}) + "\n")
        elif fmt == "csv":
            writer = csv.writer(fh, lineterminator="\n")
            for rs in rating_sets:
                writer.writerow([rs.sample_id, *rs.ratings])
        else:
            raise ValueError(f"unknown dataset format {fmt!r}")


def read_scores(path, column: Optional[str] = None) -> dict[str, float]:
    """Scores keyed by sample id, in file order.

    With a header the ``score`` column is used, falling back to
    ``representative`` so aggregate output can serve as a reference file.
    """
    path = Path(path)
    rows = _csv_rows(path.read_text(encoding="utf-8"))
    idx = 1
    if rows and len(rows[0][1]) >= 2 and not _is_number(rows[0][1][1]):
        header = [h.lower() for h in rows[0][1]]
        wanted = [column] if column else ["score", "representative"]
        for name in wanted:
            if name in header:
                idx = header.index(name)
                break
        else:
            if column:
                raise DataFileError(path, [(rows[0][0], f"no column named {column!r}")])
        rows = rows[1:]
    scores: dict[str, float] = {}
    problems = []
    for lineno, cells in rows:
        if len(cells) <= idx:
            problems.append((lineno, "missing score"))
            continue
        sid = cells[0]
        try:
            value = float(cells[idx])
        except ValueError:
            problems.append((lineno, f"{sid}: score {cells[idx]!r} is not a number"))
            continue
        if not math.isfinite(value):
            problems.append((lineno, f"{sid}: non-finite score"))
        elif sid in scores:
            problems.append((lineno, f"duplicate sample_id {sid!r}"))
        else:
            scores[sid] = value
    if problems:
        raise DataFileError(path, problems)
    return scores


def read_annotations(path) -> list[PreferenceAnnotation]:
    path = Path(path)
    rows = _csv_rows(path.read_text(encoding="utf-8"))
    if rows and rows[0][1][0].lower() == "pair_id":
        rows = rows[1:]
    out, problems = [], []
    for lineno, cells in rows:
        if len(cells) < 4:
            problems.append((lineno, "expected pair_id,id_a,id_b,vote_1[,vote_2,...]"))
            continue
        try:
            votes = tuple(Vote.parse(v) for v in cells[3:])
            out.append(PreferenceAnnotation(cells[0], cells[1], cells[2], votes))
        except InputError as exc:
            problems.append((lineno, str(exc)))
    if problems:
        raise DataFileError(path, problems)
    return out


def read_pairs(path) -> list[PreferencePair]:
    path = Path(path)
    rows = _csv_rows(path.read_text(encoding="utf-8"))
    if rows and rows[0][1][0].lower() == "id_a":
        rows = rows[1:]
    out, problems = [], []
    for lineno, cells in rows:
        if len(cells) != 3:
            problems.append((lineno, "expected id_a,id_b,label"))
            continue
        try:
            out.append(PreferencePair(*cells))
        except InputError as exc:
            problems.append((lineno, str(exc)))
    if problems:
        raise DataFileError(path, problems)
    return out


def write_pairs(path, pairs: Iterable[PreferencePair]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id_a", "id_b", "label"])
        for p in pairs:
            writer.writerow([p.id_a, p.id_b, p.label])
