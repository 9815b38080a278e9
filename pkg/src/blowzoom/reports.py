"""
File formats: measure and tree JSON, finite event systems, and the CSV/JSON
reports written by the command runners.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .limsup import EventSeq, FiniteProbSpace
from .measures import AtomicMeasure, DomainError
from .trees import TreeMeasure

log = logging.getLogger(__name__)

__all__ = [
    "Column",
    "parse_number",
    "parse_word",
    "load_measure",
    "save_measure",
    "measure_to_dict",
    "load_tree",
    "save_tree",
    "tree_to_dict",
    "load_events",
    "write_json",
    "write_csv",
    "format_value",
]

Number = Union[float, Fraction]
# (name, description) pairs; the description lands in the provenance line
Column = Tuple[str, str]


# --------------------------- helpers ---------------------------


def parse_number(value: Any) -> Number:
    """JSON numbers become floats; "p/q" strings become exact Fractions."""
    if isinstance(value, bool):
        raise DomainError(f"expected a number, got {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return value
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as e:
            raise DomainError(f"not a rational literal: {value!r}") from e
    raise DomainError(f"expected a number, got {value!r}")


def _number_out(value: Number) -> Union[int, float, str]:
    if isinstance(value, Fraction):
        return value.numerator if value.denominator == 1 else str(value)
    return float(value)


def _read_json(path: Path) -> Any:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise DomainError(f"input file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise DomainError(f"{path} is not valid JSON: {e}") from e


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Fraction):
        return _number_out(obj)
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    return obj


# --------------------------- measures ---------------------------


def measure_to_dict(mu: AtomicMeasure) -> Dict[str, Any]:
    return {"dim": mu.dim, "atoms": [{"x": x, "w": w} for x, w in mu.atoms()]}


def load_measure(path: Path) -> AtomicMeasure:
    data = _read_json(path)
    if not isinstance(data, dict) or "dim" not in data:
        raise DomainError(f"{path}: a measure file needs 'dim' and 'atoms'")
    dim = int(data["dim"])
    atoms = data.get("atoms") or []
    if not atoms:
        return AtomicMeasure.zero(dim)
    points = []
    weights = []
    for i, atom in enumerate(atoms):
        x = atom.get("x") if isinstance(atom, dict) else None
        if not isinstance(x, list) or len(x) != dim:
            raise DomainError(f"{path}: atom {i} needs an 'x' list of length {dim}")
        points.append([float(c) for c in x])
        weights.append(float(parse_number(atom.get("w"))))
    mu = AtomicMeasure(np.array(points, dtype=float), np.array(weights, dtype=float))
    log.debug("Loaded %r from %s", mu, path)
    return mu


def save_measure(mu: AtomicMeasure, path: Path) -> None:
    write_json(path, measure_to_dict(mu))


# --------------------------- trees ---------------------------


def _word_key(word: Sequence[int], b: int) -> str:
    if b <= 9:
        return "".join(str(s) for s in word)
    return ",".join(str(s) for s in word)


def parse_word(key: str, b: int) -> Tuple[int, ...]:
    key = key.strip()
    try:
        if "," in key or b > 9:
            return tuple(int(s) for s in key.split(","))
        return tuple(int(s) for s in key)
    except ValueError as e:
        raise DomainError(f"bad tree word {key!r}") from e

def tree_to_dict(mu: TreeMeasure) -> Dict[str, Any]:
    return {
        "alphabet": mu.b,
        "depth": mu.n,
        "weights": {_word_key(u, mu.b): _number_out(w) for u, w in mu.weights.items()},
    }


def load_tree(path: Path) -> TreeMeasure:
    data = _read_json(path)
    if not isinstance(data, dict) or "alphabet" not in data or "depth" not in data:
        raise DomainError(f"{path}: a tree file needs 'alphabet', 'depth', 'weights'")
    b = int(data["alphabet"])
    raw = data.get("weights") or {}
    weights = {parse_word(k, b): parse_number(v) for k, v in raw.items()}
    # all-integer or "p/q" input stays exact
    if not all(isinstance(w, Fraction) for w in weights.values()):
        weights = {u: float(w) for u, w in weights.items()}
    return TreeMeasure(b, int(data["depth"]), weights)


def save_tree(mu: TreeMeasure, path: Path) -> None:
    write_json(path, tree_to_dict(mu))


# --------------------------- event systems ---------------------------


def load_events(path: Path) -> Tuple[FiniteProbSpace, EventSeq]:
    """{"probs": [...], "events": [[outcome, ...], ...], "labels": optional}."""
    data = _read_json(path)
    if not isinstance(data, dict) or "probs" not in data or "events" not in data:
        raise DomainError(f"{path}: an event file needs 'probs' and 'events'")
    probs: List[Number] = [parse_number(p) for p in data["probs"]]
    if not all(isinstance(p, Fraction) for p in probs):
        probs = [float(p) for p in probs]
    labels = data.get("labels") or list(range(len(probs)))
    space = FiniteProbSpace(tuple(labels), tuple(probs))
    seq = EventSeq.of(data["events"])
    seq.check(space)
    return space, seq


# --------------------------- writers ---------------------------


def write_json(path: Path, obj: Any) -> None:
    """
    Atomically write JSON:
      1) write to temp file in same dir
      2) flush to disk
      3) replace target with os.replace
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    data = json.dumps(_jsonable(obj), ensure_ascii=False, indent=2)
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(data + "\n")
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)
    log.info("Wrote %s", path)


def format_value(value: Any, precision: int = 12) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, Fraction):
        return f"{float(value):.{precision}g}"
    if isinstance(value, (float, np.floating)):
        # '.' separator regardless of locale
        return f"{float(value):.{precision}g}"
    return str(value)


def write_csv(
    path: Path,
    columns: Sequence[Column],
    rows: Iterable[Sequence[Any]],
    *,
    title: str,
    seed: Optional[int] = None,
    precision: int = 12,
) -> None:
    """
    One '#' provenance line (title, seed, column descriptions), the header row,
    then the data. Contains no timestamps so equal inputs give equal bytes.
    """
    described = "; ".join(f"{name}: {desc}" for name, desc in columns)
    seed_part = f" seed={seed}" if seed is not None else ""
    buf = io.StringIO()
    buf.write(f"# {title}{seed_part} | {described}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([name for name, _ in columns])
    count = 0
    for row in rows:
        if len(row) != len(columns):
            raise ValueError(
                f"row {count} has {len(row)} cells, expected {len(columns)}"
            )
        writer.writerow([format_value(v, precision) for v in row])
        count += 1
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)
    log.info("Wrote %d row(s) to %s", count, path)
