import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rbp import BoundingBox, ContractError, Domain, Partition, covers, restrict, volume
from rbp.partition import clip_intervals, domain_from_points
from rbp.sampler import RbpParams, sample_partition

UNIT = Domain((1.0, 1.0))


def box(starts, lens, end_atom=None, L=(1.0, 1.0)):
    sa = tuple(s == 0 for s in starts)
    if end_atom is None:
        end_atom = tuple(abs(s + l - Ld) < 1e-12 for s, l, Ld in zip(starts, lens, L))
    return BoundingBox(starts, lens, sa, end_atom)


def test_full_box_covers_everything(rng):
    b = BoundingBox.full(UNIT)
    for x in rng.random((50, 2)):
        assert covers(b, x)
    assert covers(b, (1.0, 1.0)) and covers(b, (0.0, 0.0))


def test_covers_closed_lower_endpoint():
    b = box((0.3, 0.4), (0.2, 0.1))
    assert covers(b, (0.3, 0.4))
    assert covers(b, (0.5, 0.5))
    assert not covers(b, (0.29, 0.45))


def test_covers_against_interval_oracle(rng):
    for _ in range(200):
        s = rng.random(2) * 0.9 + 0.01
        l = rng.random(2) * (1 - s)
        b = box(tuple(s), tuple(l), end_atom=(False, False))
        x = rng.random(2)
        oracle = all(s[d] <= x[d] <= s[d] + l[d] for d in range(2))
        assert covers(b, x) == oracle
        assert bool(Partition(UNIT, 1.0, 2.0, [b], [0.5]).coverage(x[None])[0, 0]) == oracle


def test_volume_examples():
    assert volume(BoundingBox.full(UNIT)) == 1.0
    assert volume(box((0.2, 0.3), (0.0, 0.5))) == 0.0
    assert volume(box((0.1, 0.1), (0.5, 0.25))) == 0.125


def test_box_flag_contract():
    with pytest.raises(ContractError):
        BoundingBox((0.0,), (0.5,), (False,), (False,))
    with pytest.raises(ContractError):
        BoundingBox((0.2,), (0.5,), (True,), (False,))
    with pytest.raises(ContractError):
        BoundingBox((0.2,), (-0.1,), (False,), (False,))


def test_partition_cost_budget():
    with pytest.raises(ContractError):
        Partition(UNIT, 1.0, 2.0, [BoundingBox.full(UNIT)] * 2, [0.7, 0.7])


def test_restrict_identity(rng):
    for _ in range(20):
        p = sample_partition(RbpParams(2.0, 2.0), UNIT, rng)
        q = restrict(p, UNIT)
        assert q == p
        assert q.costs == p.costs


def test_restrict_drops_outside_box():
    Y = Domain((2.0, 2.0))
    inside = box((0.2, 0.2), (0.5, 0.5), L=(2, 2))
    outside = box((1.5, 0.2), (0.3, 0.5), L=(2, 2))
    p = Partition(Y, 2.0, 2.0, [inside, outside], [0.3, 0.4])
    q = restrict(p, Domain((1.0, 1.0)))
    assert q.K == 1
    assert q.boxes[0].starts == inside.starts
    # the dropped box's gap is absorbed by nothing after it; survivor keeps its time
    assert q.costs == (0.3,)


def test_restrict_clips_end():
    Y, X = Domain((2.0,)), Domain((1.0,))
    b = BoundingBox((0.5,), (1.0,), (False,), (False,))
    q = restrict(Partition(Y, 1.0, 2.0, [b], [0.5]), X)
    assert q.boxes[0].starts == (0.5,)
    assert q.boxes[0].lens == (0.5,)
    assert q.boxes[0].end_atom == (True,)
    assert q.boxes[0].start_atom == (False,)


def test_restrict_clips_start_to_atom():
    Y, X = Domain((2.0,)), Domain((1.0,), (1.0,))
    b = BoundingBox((0.5,), (1.0,), (False,), (False,))
    q = restrict(Partition(Y, 1.0, 2.0, [b], [0.5]), X)
    assert q.boxes[0].starts == (0.0,)
    assert q.boxes[0].start_atom == (True,)
    assert q.boxes[0].lens == pytest.approx((0.5,))


def test_restrict_merges_dropped_gaps():
    Y = Domain((2.0,))
    a = BoundingBox((1.5,), (0.2,), (False,), (False,))
    b = BoundingBox((0.1,), (0.2,), (False,), (False,))
    p = Partition(Y, 1.0, 2.0, [a, b], [0.25, 0.25])
    q = restrict(p, Domain((1.0,)))
    assert q.K == 1
    assert q.costs == (0.5,)
    assert q.times[-1] == p.times[-1]


def test_restrict_outside_domain_rejected():
    with pytest.raises(ContractError):
        restrict(Partition(UNIT, 1.0, 2.0), Domain((1.0, 1.0), (0.5, 0.5)))


def test_clip_keeps_unclipped_lengths_bitwise(rng):
    s = rng.random((100, 1)) * 0.3 + 0.2
    l = rng.random((100, 1)) * 0.3
    keep, ns, nl, nsa, nea = clip_intervals(s, l, s + l, np.array([0.1]), np.array([0.9]))
    assert keep.all() and not nsa.any() and not nea.any()
    assert np.array_equal(nl, l)


def test_insert_remove_roundtrip():
    p = Partition(UNIT, 1.0, 2.0, [BoundingBox.full(UNIT)] * 2, [0.2, 0.3])
    q, k = p.insert(box((0.1, 0.1), (0.2, 0.2)), 0.35)
    assert k == 1
    assert q.costs == pytest.approx((0.2, 0.15, 0.15))
    r = q.remove(k)
    assert r.costs == pytest.approx(p.costs)
    assert r.boxes == p.boxes


def test_json_roundtrip_exact(rng):
    for _ in range(10):
        p = sample_partition(RbpParams(3.0, 0.99), Domain((1.0, 2.5), (-1.0, 0.25)), rng)
        q = Partition.from_json(p.to_json())
        assert q == p
        d = json.loads(p.to_json())
        assert set(d) == {"tau", "lambda", "domain", "boxes"}
        if p.K:
            assert set(d["boxes"][0]) == {"start", "len", "cost", "start_atom", "end_atom"}


def test_domain_from_points():
    d = domain_from_points([[1.0, 5.0], [3.0, 5.0]], margin=0.1)
    assert d.lengths == pytest.approx((2.4, 1.2))
    assert d.origin == pytest.approx((0.8, 4.9))


# property tests ------------------------------------------------------------

GRID = st.integers(min_value=0, max_value=8).map(lambda i: i / 8)


@st.composite
def nested_windows(draw):
    a = draw(GRID)
    b = draw(GRID.filter(lambda v: v > a))
    c = draw(st.floats(a, b))
    d = draw(st.floats(c, b))
    return a, b, c, d


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), w=nested_windows())
def test_restrict_idempotent_and_composes(seed, w):
    a, b, c, dd = w
    p = sample_partition(RbpParams(2.0, 2.0), Domain((1.0,)), np.random.default_rng(seed))
    X = Domain((b - a,), (a,))
    once = restrict(p, X)
    assert restrict(once, X) == once
    if dd > c:
        Z = Domain((dd - c,), (c,))
        direct = restrict(p, Z)
        two = restrict(once, Z)
        assert direct.K == two.K
        np.testing.assert_allclose(direct.starts, two.starts, atol=1e-12)
        np.testing.assert_allclose(direct.lens, two.lens, atol=1e-12)
        np.testing.assert_array_equal(direct.ends >= dd - c - 1e-12, two.ends >= dd - c - 1e-12)
        np.testing.assert_allclose(direct.costs, two.costs, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), w=nested_windows())
def test_restriction_never_grows(seed, w):
    a, b, _, _ = w
    p = sample_partition(RbpParams(2.0, 1.0), Domain((1.0,)), np.random.default_rng(seed))
    q = restrict(p, Domain((b - a,), (a,)))
    assert q.K <= p.K
    assert q.volumes().sum() <= p.volumes().sum() + 1e-12
    assert sum(q.costs) <= sum(p.costs) + 1e-12
    assert np.all(q.lens >= 0) and np.all(q.ends <= b - a + 1e-12)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_sampled_partitions_satisfy_invariants(seed):
    dom = Domain((1.0, 0.5))
    p = sample_partition(RbpParams(1.5, 3.0), dom, np.random.default_rng(seed))
    assert sum(p.costs) <= 1.5 + 1e-12
    for b in p.boxes:
        for d in range(2):
            assert b.start_atom[d] == (b.starts[d] == 0.0)
            assert b.starts[d] + b.lens[d] <= dom.lengths[d] + 1e-12
    np.testing.assert_allclose(p.volumes(), [volume(b) for b in p.boxes])
