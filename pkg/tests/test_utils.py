import math

import numpy as np
import pytest

from udmdi_qkd.utils import build_grid, chunked, derive_seed, format_float


def test_grid_from_range_includes_stop():
    assert build_grid(start=0.0, stop=1.0, step=0.25) == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert build_grid(start=0.0, stop=8.0, step=0.05)[-1] == 8.0
    assert len(build_grid(start=0.0, stop=30.0, step=0.1)) == 301


def test_explicit_values_take_precedence():
    assert build_grid(values=[3, 1.5], start=0.0, stop=1.0, step=0.5) == [3.0, 1.5]


def test_incomplete_range_is_empty():
    assert build_grid(start=0.0, stop=1.0) == []
    with pytest.raises(ValueError):
        build_grid(start=0.0, stop=1.0, step=0.0)


def test_float_formatting():
    assert format_float(None) == ""
    assert format_float(5.0) == "5"
    assert format_float(1 / 3) == "0.3333333333"
    assert format_float(math.inf) == "inf"
    assert format_float(-math.inf) == "-inf"


def test_seed_streams_depend_only_on_master_and_index():
    a = np.random.default_rng(derive_seed(7, 3)).normal(size=4)
    b = np.random.default_rng(derive_seed(7, 3)).normal(size=4)
    c = np.random.default_rng(derive_seed(7, 4)).normal(size=4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_chunking_covers_the_range_in_order():
    blocks = chunked(10, 4)
    assert [list(b) for b in blocks] == [[0, 1, 2, 3], [4, 5, 6, 7], [8, 9]]
    assert chunked(0, 4) == []
