"""Reading and writing profiles, transcripts, label snapshots and curve tables.

File formats (schema version 1):

* Profile (YAML)::

      schema_version: 1
      name: demo              # optional
      description: ...        # optional
      questions:
        - {id: q0, p0: 0.5, p_con: 0.9, p_cri: 0.3}
        - {id: easy, p0: 0.9, p_con: 0.95, p_cri: 0.5, count: 100}

  ``count`` (default 1) expands an entry into ``count`` questions with ids
  ``<id>-0 .. <id>-<count-1>``.

* Transcript (JSON Lines): an optional header ``{"schema_version": 1}``
  followed by one record per line,
  ``{"question_id": "q0", "sample": 0, "round": 0, "correct": true}``.

* Label snapshots (JSON Lines), one question per line:
  ``{"question_id": "q0", "correct_label": 0, "prior": [...], "transition": [[...], ...]}``.

* Curves (CSV): header ``round,<name>,<name>_se,...``, one row per round,
  numbers at 6 significant digits; a missing stderr is an empty cell.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
from pathlib import Path

import numpy as np
import yaml

from .errors import GapError, ParseError, ValidationError, WriteError
from .estimation import LabelSnapshot
from .simulator import Transcript
from .theory import AccuracyCurve, DatasetProfile, QuestionProfile

SCHEMA_VERSION = 1
PROB_FIELDS = ("p0", "p_con", "p_cri")


def fmt(x):
    """Fixed 6-significant-digit rendering used by every table and report."""
    return f"{x:.6g}"


def _write_text(path, text):
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise WriteError(path, exc) from exc


def _read_text(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read file: {exc}", path=path) from exc


def _is_prob(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and 0.0 <= v <= 1.0


# -- profiles ---------------------------------------------------------------


def parse_profiles(text, path=None):
    """Parse and validate a profile document, collecting every violation."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ParseError(str(getattr(exc, "problem", exc)), path=path, line=line) from exc
    if not isinstance(doc, dict):
        raise ParseError("top level must be a mapping", path=path)
    problems = []
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        problems.append(f"schema_version must be {SCHEMA_VERSION}, got {version!r}")
    entries = doc.get("questions")
    if not isinstance(entries, list) or not entries:
        problems.append("questions must be a non-empty list")
        entries = []
    ids, questions = [], []
    for k, entry in enumerate(entries):
        where = f"questions[{k}]"
        if not isinstance(entry, dict):
            problems.append(f"{where}: entry must be a mapping")
            continue
        qid = entry.get("id")
        if not isinstance(qid, (str, int)) or isinstance(qid, bool) or str(qid) == "":
            problems.append(f"{where}.id: missing or not a string")
            qid = None
        unknown = set(entry) - {"id", "count", *PROB_FIELDS}
        if unknown:
            problems.append(f"{where}: unknown field(s) {sorted(unknown)}")
        ok = True
        for name in PROB_FIELDS:
            if name not in entry:
                problems.append(f"{where}.{name}: missing")
                ok = False
            elif not _is_prob(entry[name]):
                problems.append(f"{where}.{name}: {entry[name]!r} is not a probability in [0, 1]")
                ok = False
        count = entry.get("count", 1)
        if not isinstance(count, int) or isinstance(count, bool) or count < 1:
            problems.append(f"{where}.count: must be a positive integer, got {count!r}")
            ok = False
        if qid is None or not ok:
            continue
        profile = QuestionProfile(*(float(entry[n]) for n in PROB_FIELDS))
        if "count" in entry:
            ids.extend(f"{qid}-{j}" for j in range(count))
            questions.extend([profile] * count)
        else:
            ids.append(str(qid))
            questions.append(profile)
    seen, dupes = set(), []
    for qid in ids:
        if qid in seen:
            dupes.append(qid)
        seen.add(qid)
    if dupes:
        problems.append(f"duplicate question id(s): {sorted(set(dupes))}")
    if problems:
        raise ValidationError(problems, path=path)
    return DatasetProfile(tuple(questions), tuple(ids))


def load_profiles(path):
    return parse_profiles(_read_text(path), path=path)


def dump_profiles(dataset, name=None, description=None):
    doc = {"schema_version": SCHEMA_VERSION}
    if name is not None:
        doc["name"] = name
    if description is not None:
        doc["description"] = description
    doc["questions"] = [
        {"id": qid, "p0": q.p0, "p_con": q.p_con, "p_cri": q.p_cri}
        for qid, q in zip(dataset.ids, dataset.questions)
    ]
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=None)


def save_profiles(dataset, path, name=None, description=None):
    _write_text(path, dump_profiles(dataset, name, description))


# -- transcripts ------------------------------------------------------------


def _int_field(record, name, lineno, path):
    v = record.get(name)
    if not isinstance(v, int) or isinstance(v, bool) or v < 0:
        raise ParseError(f"expected a nonnegative integer, got {v!r}", path, lineno, name)
    return v


def iter_transcript_records(lines, path=None):
    """Yield ``(lineno, question_id, sample, round, correct)`` from JSON Lines."""
    for lineno, raw in enumerate(lines, start=1):
        raw = raw.strip()
        if not raw:
            continue
        try:
            record = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, path, lineno) from exc
        if not isinstance(record, dict):
            raise ParseError("record must be a JSON object", path, lineno)
        if "schema_version" in record and "question_id" not in record:
            if record["schema_version"] != SCHEMA_VERSION:
                raise ParseError(
                    f"unsupported schema_version {record['schema_version']!r}",
                    path, lineno, "schema_version",
                )
            continue
        qid = record.get("question_id")
        if not isinstance(qid, (str, int)) or isinstance(qid, bool):
            raise ParseError(f"expected a string, got {qid!r}", path, lineno, "question_id")
        correct = record.get("correct")
        if not isinstance(correct, bool):
            raise ParseError(f"expected true/false, got {correct!r}", path, lineno, "correct")
        yield (
            lineno,
            str(qid),
            _int_field(record, "sample", lineno, path),
            _int_field(record, "round", lineno, path),
            correct,
        )


def parse_transcript(lines, path=None):
    """Assemble a dense Transcript; question order is first appearance."""
    order = {}
    cells = {}
    max_sample = max_round = -1
    for lineno, qid, sample, rnd, correct in iter_transcript_records(lines, path):
        order.setdefault(qid, len(order))
        key = (order[qid], sample, rnd)
        if key in cells:
            raise ValidationError(
                [f"line {lineno}: duplicate record ({qid!r}, sample {sample}, round {rnd})"],
                path=path,
            )
        cells[key] = correct
        max_sample = max(max_sample, sample)
        max_round = max(max_round, rnd)
    if not order:
        raise ParseError("transcript contains no records", path)
    ids = list(order)
    shape = (len(ids), max_sample + 1, max_round + 1)
    if len(cells) != shape[0] * shape[1] * shape[2]:
        for i in range(shape[0]):
            for m in range(shape[1]):
                for t in range(shape[2]):
                    if (i, m, t) not in cells:
                        raise GapError(ids[i], m, t, path)
    correctness = np.zeros(shape, dtype=bool)
    idx = np.array(list(cells.keys()), dtype=np.int64)
    correctness[idx[:, 0], idx[:, 1], idx[:, 2]] = np.fromiter(cells.values(), dtype=bool)
    return Transcript(correctness, tuple(ids))


def load_transcript(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_transcript(fh, path)
    except OSError as exc:
        raise ParseError(f"cannot read file: {exc}", path=path) from exc


def dump_transcript(transcript):
    out = io.StringIO()
    out.write(json.dumps({"schema_version": SCHEMA_VERSION}) + "\n")
    c = transcript.correctness
    for i, qid in enumerate(transcript.question_ids):
        qjson = json.dumps(qid)
        for m in range(c.shape[1]):
            for t in range(c.shape[2]):
                out.write(
                    f'{{"question_id": {qjson}, "sample": {m}, "round": {t}, '
                    f'"correct": {"true" if c[i, m, t] else "false"}}}\n'
                )
    return out.getvalue()


def save_transcript(transcript, path):
    _write_text(path, dump_transcript(transcript))


# -- label snapshots --------------------------------------------------------


def load_snapshots(path):
    """Read ``(question_ids, snapshots)`` from a JSON Lines snapshot file."""
    ids, snaps, problems = [], [], []
    text = _read_text(path)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            record = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, path, lineno) from exc
        if not isinstance(record, dict):
            raise ParseError("record must be a JSON object", path, lineno)
        missing = [f for f in ("correct_label", "prior", "transition") if f not in record]
        if missing:
            problems.append(f"line {lineno}: missing field(s) {missing}")
            continue
        try:
            snaps.append(
                LabelSnapshot(record["correct_label"], record["prior"], record["transition"])
            )
        except (ValueError, TypeError) as exc:
            problems.append(f"line {lineno}: {exc}")
            continue
        ids.append(str(record.get("question_id", f"q{len(ids)}")))
    if len(set(ids)) != len(ids):
        problems.append("duplicate question ids")
    if problems:
        raise ValidationError(problems, path=path)
    if not snaps:
        raise ParseError("snapshot file contains no records", path)
    return tuple(ids), snaps


# -- curves -----------------------------------------------------------------


def dump_curves(curves):
    """CSV text for ``curves``: a mapping or sequence of (name, AccuracyCurve)."""
    items = list(curves.items()) if isinstance(curves, dict) else list(curves)
    lengths = {len(c) for _, c in items}
    if len(lengths) > 1:
        raise ValueError(f"curves differ in length: {sorted(lengths)}")
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    header = ["round"]
    for name, _ in items:
        header += [name, f"{name}_se"]
    writer.writerow(header)
    for t in range(lengths.pop() if lengths else 0):
        row = [str(t)]
        for _, c in items:
            row.append(fmt(c.values[t]))
            row.append("" if c.stderr is None else fmt(c.stderr[t]))
        writer.writerow(row)
    return out.getvalue()


def save_curves(curves, path):
    _write_text(path, dump_curves(curves))


def save_table(header, rows, path):
    """Write a generic CSV table; floats are rendered at 6 significant digits."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(
            ["" if v is None else fmt(v) if isinstance(v, float) else v for v in row]
        )
    _write_text(path, out.getvalue())


def load_curves(path):
    """Read a curve table back as an ordered dict of name -> AccuracyCurve."""
    text = _read_text(path)
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or not rows[0] or rows[0][0] != "round":
        raise ParseError("curve table must start with a 'round' header column", path, 1)
    header = rows[0]
    names = [h for h in header[1:] if not h.endswith("_se")]
    columns = {h: [] for h in header[1:]}
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} columns, got {len(row)}", path, lineno)
        if row[0] != str(lineno - 2):
            raise ParseError(f"rounds must count up from 0, got {row[0]!r}", path, lineno, "round")
        for h, cell in zip(header[1:], row[1:]):
            try:
                columns[h].append(float(cell) if cell != "" else math.nan)
            except ValueError:
                raise ParseError(f"not a number: {cell!r}", path, lineno, h) from None
    curves = {}
    for name in names:
        values = columns[name]
        se = columns.get(f"{name}_se")
        if se is not None and any(math.isnan(v) for v in se):
            se = None
        if not values:
            continue
        try:
            curves[name] = AccuracyCurve(values, se)
        except ValueError as exc:
            raise ValidationError([f"column {name!r}: {exc}"], path=path) from exc
    return curves


def write_json(obj, path):
    _write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def ensure_dir(path):
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise WriteError(path, exc) from exc
    return Path(path)
