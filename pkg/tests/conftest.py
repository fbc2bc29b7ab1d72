from __future__ import annotations

import pytest

import _datagen as datagen
from clustem.tabular import Column, Table


@pytest.fixture(scope="session")
def adult_paths(tmp_path_factory):
    """Desk-scale Adult-schema fixture: 5000 training rows, 1500 test rows,
    and a word-vector file covering the QI vocabulary."""
    root = tmp_path_factory.mktemp("adult")
    train = root / "train.csv"
    test = root / "test.csv"
    vectors = root / "vectors.txt"
    datagen.write_csv(str(train), datagen.make_rows(5000, seed=11))
    datagen.write_csv(str(test), datagen.make_rows(1500, seed=12))
    datagen.write_word_vectors(str(vectors))
    return {"train": str(train), "test": str(test), "vectors": str(vectors)}


def make_table(**columns: tuple[str, list[str]]) -> Table:
    """Table from name=(kind, values) keyword pairs, preserving order."""
    return Table([Column(name, kind, list(values)) for name, (kind, values) in columns.items()])


@pytest.fixture
def toy_table() -> Table:
    return make_table(
        q=("nominal", ["a", "a", "b", "b", "c"]),
        s=("nominal", ["x", "y", "x", "y", "x"]),
    )
