import numpy as np
from hypothesis import given, settings, strategies as st

from urnlab.classes import decompose, is_block_lower_triangular, permuted_matrix
from urnlab.model import build_model, support_closure, zoo


def closure_classes(R):
    """Reference partition from the boolean reachability matrix."""
    reach = support_closure(R)
    mutual = reach & reach.T
    return {tuple(np.flatnonzero(row)) for row in mutual}


def test_cyclic_single_class():
    d = decompose(zoo("cyclic(3)"))
    assert d.classes == ((0, 1, 2),)
    assert d.types == (1,)
    assert (d.a, d.b, d.c) == (1, 0, 0)


def test_polya_two_dominant():
    d = decompose(zoo("polya"))
    assert d.classes == ((0,), (1,))
    assert d.types == (1, 1)


def test_three_types():
    # colour 3 feeds colour 2, colour 1 is isolated
    m = build_model([[2, 0, 0], [0, 2, 1], [0, 0, 1]], [1, 1, 1])
    d = decompose(m)
    assert d.classes == ((0,), (1,), (2,))
    assert d.types == (1, 2, 3)
    assert [d.block_label(i) for i in range(3)] == ["T1", "Q1", "P1"]
    assert d.ordering.tolist() == [0, 2, 1]
    assert d.dominant_colours() == [0, 1]
    assert is_block_lower_triangular(m, d)


def test_type3_topological_order():
    # 4 -> 3 -> 2 (dominant); type-3 classes listed upstream first
    R = np.array([[3, 0, 0, 0],
                  [0, 3, 1, 0],
                  [0, 0, 2, 1],
                  [0, 0, 0, 2]])
    d = decompose(build_model(R, [1, 1, 1, 1]))
    t3 = [cls for cls, t in zip(d.classes, d.types) if t == 3]
    assert t3 == [(3,), (2,)]
    assert d.leads_to[d.classes.index((3,)), d.classes.index((1,))]


def test_table_is_one_based():
    rows = decompose(zoo("polya")).table()
    assert rows[0]["colours"] == [1] and rows[0]["block"] == "T1"


@st.composite
def urn_matrices(draw):
    q = draw(st.integers(2, 7))
    r = draw(st.integers(1, 5))
    mask = draw(st.lists(st.booleans(), min_size=q * q, max_size=q * q))
    R = np.zeros((q, q), dtype=np.int64)
    for j in range(q):
        rows = [i for i in range(q) if i != j and mask[i * q + j]]
        budget = r
        for i in rows:
            w = draw(st.integers(0, budget))
            R[i, j] = w
            budget -= w
        R[j, j] = budget
    return R


@settings(max_examples=300, deadline=None)
@given(urn_matrices())
def test_partition_matches_reachability(R):
    m = build_model(R, np.ones(R.shape[0], dtype=int))
    d = decompose(m)
    assert set(d.classes) == closure_classes(R)
    assert sorted(c for cls in d.classes for c in cls) == list(range(R.shape[0]))
    assert is_block_lower_triangular(m, d)
    # dominant classes lead nowhere else; type 2 is entered, type 1 is not
    for i, t in enumerate(d.types):
        others = np.delete(d.leads_to[i], i)
        entered = np.delete(d.leads_to[:, i], i)
        if t in (1, 2):
            assert not others.any()
            assert entered.any() == (t == 2)
        else:
            assert others.any()
    # canonical order: type 1, then 2, then 3
    assert list(d.types) == sorted(d.types, key=lambda t: {1: 0, 2: 1, 3: 2}[t])
    Rp = permuted_matrix(m, d)
    assert sorted(Rp.ravel().tolist()) == sorted(R.ravel().tolist())
