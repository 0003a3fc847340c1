import numpy as np
import pytest
from hypothesis import given, strategies as st

from adacgd.datasets import (
    Example,
    LibsvmParseError,
    SyntheticSpec,
    build_problem,
    format_example,
    make_synthetic,
    parse_libsvm,
    partition,
    to_dense,
)


def test_parse_basic_line():
    examples, dim = parse_libsvm("+1 1:0.5 3:2\n", expected_dim=3)
    assert dim == 3
    assert examples[0].label == 1
    dense, labels = to_dense(examples, dim)
    assert np.array_equal(dense[0], [0.5, 0.0, 2.0])
    assert labels[0] == 1.0


def test_parse_label_variants_and_featureless():
    examples, dim = parse_libsvm("-1\n0 2:1\n1 1:3\n+1\n")
    assert [e.label for e in examples] == [-1, -1, 1, 1]
    assert dim == 2


def test_parse_skips_blanks_and_comments():
    text = "\n# full comment line\n+1 1:1 # trailing comment\n\n-1 2:0.5\n"
    examples, dim = parse_libsvm(text)
    assert len(examples) == 2
    assert dim == 2


def test_parse_errors_name_line_numbers():
    with pytest.raises(LibsvmParseError) as err:
        parse_libsvm("abc 1:1\n")
    assert err.value.line_number == 1
    with pytest.raises(LibsvmParseError) as err:
        parse_libsvm("+1 1:1\n-1 2:oops\n")
    assert err.value.line_number == 2
    with pytest.raises(LibsvmParseError) as err:
        parse_libsvm("+1 3:1 2:1\n")
    assert err.value.line_number == 1
    with pytest.raises(LibsvmParseError):
        parse_libsvm("+1 1:1 1:2\n")
    with pytest.raises(LibsvmParseError):
        parse_libsvm("+1 0:1\n")
    with pytest.raises(LibsvmParseError):
        parse_libsvm("+1 1\n")


def test_expected_dim_only_grows():
    _, dim = parse_libsvm("+1 1:1 5:2\n", expected_dim=3)
    assert dim == 5
    _, dim = parse_libsvm("+1 1:1\n", expected_dim=7)
    assert dim == 7


def test_bytes_input_accepted():
    examples, dim = parse_libsvm(b"+1 2:1.5\n")
    assert examples[0].features == ((2, 1.5),)


def test_example_round_trip_exact():
    e = Example(1, ((1, 0.1), (3, -2.7182818284590455), (9, 1e-300)))
    parsed, _ = parse_libsvm(format_example(e))
    assert parsed[0] == e


features_strategy = st.lists(
    st.tuples(st.integers(1, 40), st.floats(min_value=-1e12, max_value=1e12)),
    max_size=8,
    unique_by=lambda t: t[0],
).map(lambda feats: tuple(sorted(feats)))


@given(st.sampled_from([-1, 1]), features_strategy)
def test_round_trip_property(label, feats):
    e = Example(label, feats)
    parsed, _ = parse_libsvm(format_example(e))
    assert parsed[0] == e


def test_partition_sizes_and_remainder():
    part = partition(list(range(10)), 3, seed=0)
    assert [len(s) for s in part.shards] == [4, 3, 3]
    part = partition(list(range(20)), 20, seed=0)
    assert all(len(s) == 1 for s in part.shards)


def test_partition_deterministic():
    a = partition(list(range(12)), 4, seed=5)
    b = partition(list(range(12)), 4, seed=5)
    assert a == b
    c = partition(list(range(12)), 4, seed=6)
    assert a != c


def test_partition_rejects_bad_counts():
    with pytest.raises(ValueError):
        partition(list(range(3)), 4, seed=0)
    with pytest.raises(ValueError):
        partition(list(range(3)), 0, seed=0)


@given(st.integers(1, 60), st.integers(1, 12), st.integers(0, 1000))
def test_partition_is_a_partition(count, n, seed):
    if n > count:
        n = count
    part = partition(list(range(count)), n, seed)
    seen = [i for shard in part.shards for i in shard]
    assert sorted(seen) == list(range(count))
    sizes = [len(s) for s in part.shards]
    assert max(sizes) - min(sizes) <= 1
    assert sizes == sorted(sizes, reverse=True)


def test_build_problem_shapes():
    examples = make_synthetic(SyntheticSpec(25, 6, 2))
    p = build_problem(examples, 4, 0.1, 1)
    assert p.n_clients == 4
    assert p.dim == 6
    assert sum(s.size for s in p.shards) == 25


def test_synthetic_deterministic_and_balanced():
    spec = SyntheticSpec(200, 10, 7)
    a = make_synthetic(spec)
    b = make_synthetic(spec)
    assert a == b
    labels = np.array([e.label for e in a])
    assert 20 < (labels == 1).sum() < 180  # both classes present


def test_synthetic_conditioning_scales_features():
    spec = SyntheticSpec(500, 10, 3, cond=100.0)
    dense, _ = to_dense(make_synthetic(spec), 10)
    col_norms = np.linalg.norm(dense, axis=0)
    assert col_norms[0] / col_norms[-1] > 30.0


def test_max_abs_scaling_flag():
    examples, dim = parse_libsvm("+1 1:10 2:1\n-1 1:-20 2:0.5\n")
    p = build_problem(examples, 1, 0.0, 0, dim=dim, scale_features=True)
    assert np.abs(p.shards[0].features).max() <= 1.0
