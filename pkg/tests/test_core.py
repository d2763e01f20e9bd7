"""Vector validation, stream derivation, and the progress measure."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from commopt.core import StreamContext, as_vector, derive_stream, prog


# -- as_vector ---------------------------------------------------------------


def test_as_vector_accepts_lists():
    x = as_vector([1, 2, 3])
    assert x.dtype == np.float64
    assert x.flags.c_contiguous
    assert x.tolist() == [1.0, 2.0, 3.0]


def test_as_vector_length_check():
    as_vector([1.0, 2.0], d=2)
    with pytest.raises(ValueError):
        as_vector([1.0, 2.0], d=3)


@pytest.mark.parametrize("bad", [[], [[1.0, 2.0]], [1.0, np.nan], [1.0, np.inf]])
def test_as_vector_rejects(bad):
    with pytest.raises(ValueError):
        as_vector(bad)


# -- streams -----------------------------------------------------------------


def test_stream_reproducible():
    a = derive_stream(42, (0, 3, 7, "grad")).normal(8)
    b = derive_stream(42, (0, 3, 7, "grad")).normal(8)
    assert np.array_equal(a, b)


@pytest.mark.parametrize(
    "path_b",
    [
        (1, 3, 7, "grad"),
        (0, 4, 7, "grad"),
        (0, 3, 8, "grad"),
        (0, 3, 7, "mask"),
    ],
)
def test_stream_distinct_paths_differ(path_b):
    a = derive_stream(42, (0, 3, 7, "grad")).normal(8)
    b = derive_stream(42, path_b).normal(8)
    assert not np.array_equal(a, b)


def test_stream_distinct_seeds_differ():
    a = derive_stream(42, (0, 3, 7, "grad")).normal(8)
    b = derive_stream(43, (0, 3, 7, "grad")).normal(8)
    assert not np.array_equal(a, b)


def test_shared_purpose_erases_worker():
    a = derive_stream(42, (0, 3, 7, "shared-mask")).uniform(8)
    b = derive_stream(42, (0, 9, 7, "shared-mask")).uniform(8)
    assert np.array_equal(a, b)
    # but a private purpose keeps workers apart
    c = derive_stream(42, (0, 3, 7, "mask")).uniform(8)
    d = derive_stream(42, (0, 9, 7, "mask")).uniform(8)
    assert not np.array_equal(c, d)


def test_stream_context_composition():
    ctx = StreamContext(42, trial=5, scope="neolithic")
    a = ctx.worker(3, "oracle").normal(4)
    b = derive_stream(42, (5, 3, 0, "oracle/neolithic")).normal(4)
    assert np.array_equal(a, b)


def test_stream_context_shared():
    ctx = StreamContext(42, trial=5, scope="neolithic")
    a = ctx.shared(17, "shared-sparsifier").uniform(4)
    b = derive_stream(42, (5, -1, 17, "shared-sparsifier/neolithic")).uniform(4)
    assert np.array_equal(a, b)
    with pytest.raises(ValueError):
        ctx.shared(17, "sparsifier")


def test_stream_context_child_scopes_differ():
    ctx = StreamContext(42, trial=0, scope="run")
    a = ctx.worker(0, "oracle").normal(4)
    b = ctx.child("stage1").worker(0, "oracle").normal(4)
    assert not np.array_equal(a, b)


# -- prog --------------------------------------------------------------------


def test_prog_examples():
    assert prog([0.0, 0.0, 0.0]) == 0
    assert prog([1.0, 0.0, 2.5, 0.0]) == 3
    assert prog([0.0, 1e-300]) == 2  # exact nonzero test, no tolerance
    assert prog([5e-324]) == 1  # smallest subnormal still counts
    assert prog([-0.0, 0.0]) == 0  # signed zero is still zero


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=20))
def test_prog_bounds_and_zero_padding(xs):
    x = np.array(xs, dtype=np.float64)
    p = prog(x)
    assert 0 <= p <= x.size
    assert prog(np.concatenate([x, [0.0]])) == p
    if p:
        assert x[p - 1] != 0.0
        assert np.all(x[p:] == 0.0)
