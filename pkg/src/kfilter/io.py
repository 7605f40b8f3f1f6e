"""File formats: word text files, alphabet JSON, polyline CSV with a JSON sidecar."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Iterable

import numpy as np

from .motion import Polyline
from .words import Alphabet, Token, Word


# words: one per line, whitespace-separated labels; blank line = empty word,
# lines starting with '#' are comments

def format_words(words: Iterable[Word], header: str | None = None) -> str:
    head = "".join(f"# {line}\n" for line in header.splitlines()) if header else ""
    return head + "".join(str(w) + "\n" for w in words)


def parse_words(text: str, alphabet: Alphabet) -> list[Word]:
    return [alphabet.word(line.split()) for line in text.splitlines() if not line.startswith("#")]


def write_words(path, words: Iterable[Word], header: str | None = None):
    Path(path).write_text(format_words(words, header))


def read_words(path, alphabet: Alphabet) -> list[Word]:
    return parse_words(Path(path).read_text(), alphabet)


# alphabets

def alphabet_to_dict(a: Alphabet) -> dict:
    d = {
        "name": a.name,
        "labels": [t.label for t in a.tokens],
        "inverse": [t.inverse_id for t in a.tokens],
    }
    if a.realized:
        d["matrices"] = [np.asarray(m).tolist() for m in a.matrices]
    return d


def alphabet_from_dict(d: dict) -> Alphabet:
    labels, inv = d["labels"], d.get("inverse") or [None] * len(d["labels"])
    tokens = tuple(Token(i, lab, inv[i]) for i, lab in enumerate(labels))
    mats = d.get("matrices")
    return Alphabet(d["name"], tokens, tuple(np.asarray(m, dtype=float) for m in mats) if mats else None)


def write_alphabet(path, a: Alphabet):
    Path(path).write_text(json.dumps(alphabet_to_dict(a), indent=1, sort_keys=True) + "\n")


def read_alphabet(path) -> Alphabet:
    return alphabet_from_dict(json.loads(Path(path).read_text()))


# polylines: CSV "t,x0,x1,..." plus "<name>.json" sidecar holding the closed flag;
# leading lines starting with '#' are comments

def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".json")


def format_polyline(p: Polyline, header: str | None = None) -> str:
    buf = io.StringIO()
    if header:
        buf.write("".join(f"# {line}\n" for line in header.splitlines()))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t"] + [f"x{i}" for i in range(p.dim)])
    times = p.times if p.times is not None else np.arange(len(p), dtype=float)
    for t, row in zip(times, p.points):
        w.writerow([repr(float(t))] + [repr(float(x)) for x in row])
    return buf.getvalue()


def parse_polyline(text: str, closed: bool = False, has_times: bool = True) -> Polyline:
    lines = [line for line in text.splitlines() if not line.startswith("#")]
    rows = list(csv.reader(lines))
    if not rows:
        raise ValueError("empty polyline file")
    header, body = rows[0], [r for r in rows[1:] if r]
    if not header or header[0] != "t" or len(header) < 2:
        raise ValueError("polyline CSV needs a header 't,x0,...'")
    if not body:
        raise ValueError("polyline has no points")
    data = np.array(body, dtype=float)
    if data.shape[1] != len(header):
        raise ValueError("ragged polyline CSV")
    return Polyline(data[:, 1:], data[:, 0] if has_times else None, closed)


def write_polyline(path, p: Polyline, meta: dict | None = None, header: str | None = None):
    Path(path).write_text(format_polyline(p, header))
    side = {"closed": p.closed, "has_times": p.times is not None}
    side.update(meta or {})
    sidecar_path(path).write_text(json.dumps(side, indent=1, sort_keys=True) + "\n")


def read_polyline(path) -> Polyline:
    side = sidecar_path(path)
    meta = json.loads(side.read_text()) if side.exists() else {}
    return parse_polyline(Path(path).read_text(), bool(meta.get("closed", False)),
                          bool(meta.get("has_times", True)))
