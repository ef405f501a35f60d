import numpy as np
import pytest

from cycauc.rng import RngStream


def test_same_path_same_sequence():
    a = RngStream(99).child("stage", 2, "client", 5).generator().uniform(size=10)
    b = RngStream(99).child("stage", 2, "client", 5).generator().uniform(size=10)
    assert np.array_equal(a, b)


def test_generator_restarts_from_path_state():
    stream = RngStream(7).child("x")
    first = stream.generator().uniform(size=4)
    second = stream.generator().uniform(size=4)
    assert np.array_equal(first, second)


def test_distinct_paths_differ():
    base = RngStream(3)
    draws = {
        name: base.child(*parts).generator().uniform(size=6).tobytes()
        for name, parts in {
            "a": ("stage", 1),
            "b": ("stage", 2),
            "c": ("epoch", 1),
            "d": ("stage", 1, "client", 0),
        }.items()
    }
    assert len(set(draws.values())) == len(draws)


def test_distinct_masters_differ():
    a = RngStream(1).child("x").generator().uniform(size=6)
    b = RngStream(2).child("x").generator().uniform(size=6)
    assert not np.array_equal(a, b)


def test_rejects_out_of_range_ints():
    with pytest.raises(ValueError):
        RngStream(0).child(-1)
    with pytest.raises(ValueError):
        RngStream(0).child(2**32)


def test_rejects_bad_types():
    with pytest.raises(TypeError):
        RngStream(0).child(1.5)
