import json
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from blowzoom.measures import AtomicMeasure, DomainError
from blowzoom.reports import (
    format_value,
    load_events,
    load_measure,
    load_tree,
    parse_number,
    parse_word,
    save_measure,
    save_tree,
    write_csv,
    write_json,
)
from blowzoom.trees import TreeMeasure, uniform


def _dump(path: Path, obj) -> Path:
    path.write_text(json.dumps(obj), encoding="utf-8")
    return path


# --------------------------- numbers and words ---------------------------


def test_parse_number():
    assert parse_number(3) == Fraction(3)
    assert parse_number(0.25) == 0.25
    assert parse_number(" 1/3 ") == Fraction(1, 3)
    for bad in ("one", "1/0", True, None):
        with pytest.raises(DomainError):
            parse_number(bad)


def test_parse_word():
    assert parse_word("121", 2) == (1, 2, 1)
    assert parse_word("10,2,11", 12) == (10, 2, 11)
    assert parse_word("1,2", 3) == (1, 2)
    with pytest.raises(DomainError):
        parse_word("1x", 2)


def test_format_value():
    assert format_value(None) == ""
    assert format_value(True) == "true"
    assert format_value(np.int64(7)) == "7"
    assert format_value(Fraction(1, 3), 4) == "0.3333"
    assert format_value(np.float64(2.5e-7), 3) == "2.5e-07"
    assert format_value("best") == "best"


# --------------------------- measures ---------------------------


def test_measure_file(tmp_path):
    path = _dump(
        tmp_path / "mu.json",
        {"dim": 2, "atoms": [{"x": [0, 1], "w": "1/4"}, {"x": [0.5, 0], "w": 2}]},
    )
    mu = load_measure(path)
    assert mu.dim == 2 and mu.size == 2
    assert mu.total == pytest.approx(2.25)


def test_saved_measure_reloads(tmp_path):
    mu = AtomicMeasure(np.array([[0.0], [1.5]]), [0.5, 2.0])
    save_measure(mu, tmp_path / "out" / "mu.json")
    assert load_measure(tmp_path / "out" / "mu.json").same_as(mu)
    assert not (tmp_path / "out" / "mu.json.tmp").exists()


def test_empty_atom_list_is_the_zero_measure(tmp_path):
    mu = load_measure(_dump(tmp_path / "z.json", {"dim": 1, "atoms": []}))
    assert mu.is_zero() and mu.dim == 1


@pytest.mark.parametrize(
    "payload",
    [
        {"atoms": []},
        {"dim": 2, "atoms": [{"x": [0.0], "w": 1}]},
        {"dim": 1, "atoms": [{"x": [0.0], "w": "heavy"}]},
        [1, 2, 3],
    ],
)
def test_malformed_measure_files(tmp_path, payload):
    with pytest.raises(DomainError):
        load_measure(_dump(tmp_path / "bad.json", payload))


def test_missing_and_broken_files(tmp_path):
    with pytest.raises(DomainError, match="not found"):
        load_measure(tmp_path / "nope.json")
    (tmp_path / "broken.json").write_text("{", encoding="utf-8")
    with pytest.raises(DomainError, match="not valid JSON"):
        load_measure(tmp_path / "broken.json")


# --------------------------- trees ---------------------------


def test_rational_tree_weights_stay_exact(tmp_path):
    path = _dump(
        tmp_path / "t.json",
        {"alphabet": 2, "depth": 2, "weights": {"11": "1/3", "12": "1/6", "21": "1/2"}},
    )
    mu = load_tree(path)
    assert mu.exact
    assert mu.weights[(2, 1)] == Fraction(1, 2)


def test_float_tree_weights(tmp_path):
    data = {"alphabet": 2, "depth": 1, "weights": {"1": 0.25, "2": 0.75}}
    path = _dump(tmp_path / "t.json", data)
    mu = load_tree(path)
    assert not mu.exact
    assert mu.weights == {(1,): 0.25, (2,): 0.75}


def test_saved_tree_reloads(tmp_path):
    save_tree(uniform(3, 2), tmp_path / "u.json")
    data = json.loads((tmp_path / "u.json").read_text(encoding="utf-8"))
    assert data["weights"]["23"] == "1/9"
    assert load_tree(tmp_path / "u.json") == uniform(3, 2)


def test_large_alphabets_use_commas(tmp_path):
    mu = TreeMeasure(10, 1, {(10,): Fraction(1, 2), (1,): Fraction(1, 2)})
    save_tree(mu, tmp_path / "big.json")
    data = json.loads((tmp_path / "big.json").read_text(encoding="utf-8"))
    assert set(data["weights"]) == {"1", "10"}
    assert load_tree(tmp_path / "big.json") == mu


# --------------------------- events ---------------------------


def test_event_file(tmp_path):
    path = _dump(
        tmp_path / "ev.json",
        {"probs": ["1/4"] * 4, "events": [[0, 1], [1, 2]], "labels": list("abcd")},
    )
    space, seq = load_events(path)
    assert space.labels == ("a", "b", "c", "d")
    assert space.probs == (Fraction(1, 4),) * 4
    assert len(seq) == 2


def test_event_file_rejects_unknown_outcomes(tmp_path):
    path = _dump(tmp_path / "ev.json", {"probs": [0.5, 0.5], "events": [[0, 2]]})
    with pytest.raises(DomainError):
        load_events(path)


# --------------------------- writers ---------------------------


def test_csv_layout(tmp_path):
    path = tmp_path / "rows.csv"
    write_csv(
        path,
        [("k", "generation"), ("distance", "F_1"), ("ok", "passed")],
        [[1, 0.5, True], [2, Fraction(1, 3), False]],
        title="convergence",
        seed=9,
        precision=4,
    )
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "# convergence seed=9 | k: generation; distance: F_1; ok: passed"
    assert lines[1:] == ["k,distance,ok", "1,0.5,true", "2,0.3333,false"]


def test_csv_is_deterministic(tmp_path):
    cols = [("x", "value")]
    write_csv(tmp_path / "a.csv", cols, [[1.0], [2.0]], title="t")
    write_csv(tmp_path / "b.csv", cols, [[1.0], [2.0]], title="t")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_csv_row_width_is_checked(tmp_path):
    with pytest.raises(ValueError):
        write_csv(tmp_path / "bad.csv", [("x", "value")], [[1, 2]], title="t")


def test_json_writer_converts_numeric_types(tmp_path):
    path = tmp_path / "nested" / "r.json"
    write_json(path, {"f": Fraction(3, 4), "n": np.int64(2), "a": np.arange(2), 1: "k"})
    assert json.loads(path.read_text(encoding="utf-8")) == {
        "f": "3/4",
        "n": 2,
        "a": [0, 1],
        "1": "k",
    }
