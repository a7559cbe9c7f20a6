import numpy as np
import pytest

from csekit.grid import (
    NullHypothesis,
    Platten,
    Tile,
    assign_config,
    build_platten,
    refine,
    split_on_hypotheses,
    vertices,
)


def test_vertices_lexicographic_order():
    t = Tile([0.0, 1.0], [0.5, 0.25], ())
    np.testing.assert_array_equal(
        vertices(t), [[-0.5, 0.75], [-0.5, 1.25], [0.5, 0.75], [0.5, 1.25]]
    )
    with pytest.raises(ValueError):
        vertices(Tile(np.zeros(21), np.ones(21), ()))


def test_tile_validation_and_zero_width():
    with pytest.raises(ValueError):
        Tile([0.0], [-0.1], ())
    with pytest.raises(ValueError):
        Tile([0.0], [0.1], (), sim_point=[np.inf])
    with pytest.raises(ValueError):
        Tile([0.0], [0.1], (), sim_count=0)
    point = Tile([0.3], [0.0], ())
    assert point.volume == 0.0 and point.contains([0.3])
    np.testing.assert_array_equal(vertices(point), [[0.3], [0.3]])


def test_assign_config():
    hyps = (NullHypothesis(0, 0.0, "<="), NullHypothesis(1, 1.0, ">="))
    assert assign_config([-1.0, 1.0], [0.0, 2.0], hyps) == (True, True)
    assert assign_config([0.0, 0.0], [1.0, 1.0], hyps) == (False, False)
    with pytest.raises(ValueError):
        assign_config([-1.0, 0.0], [1.0, 0.5], hyps)
    with pytest.raises(ValueError):
        NullHypothesis(0, 0.0, "<")


def test_build_platten_clips_to_null_and_splits():
    hyp = (NullHypothesis(0, 0.0),)
    p = build_platten([-1.0], [0.5], [3], hyp, sim_count=10)
    # cells [-1,-0.5], [-0.5,0], [0,0.5]; the last lies in the alternative
    assert len(p) == 2 and all(t.config == (True,) for t in p)
    p2 = build_platten([-1.0], [1.0], [3], hyp)
    assert [float(t.upper[0]) for t in p2] == pytest.approx([-1 / 3, 0.0])
    assert p.total_sims == 20


def test_build_platten_without_hypotheses_keeps_all():
    p = build_platten([-1.0, -1.0], [0.0, 1.0], [2, 4])
    assert len(p) == 8 and all(t.config == () for t in p)
    assert sum(t.volume for t in p) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        build_platten([0.0], [0.0], [2])
    with pytest.raises(ValueError):
        build_platten([0.0], [1.0], [0])


def test_two_hypothesis_union_of_nulls():
    hyps = (NullHypothesis(0, 0.0), NullHypothesis(1, 0.0))
    p = build_platten([-1.0, -1.0], [1.0, 1.0], [3, 3], hyps)
    configs = {t.config for t in p}
    assert (False, False) not in configs
    assert sum(t.volume for t in p) == pytest.approx(3.0)  # 4 minus the alternative quadrant
    for t in p:
        assert t.config == assign_config(t.lower, t.upper, hyps)


def test_split_recenters_children():
    t = Tile([0.0], [1.0], (), sim_point=[0.7], sim_count=5)
    kids = split_on_hypotheses(t, (NullHypothesis(0, 0.5),))
    assert len(kids) == 2
    for k in kids:
        np.testing.assert_array_equal(k.sim_point, k.center)
        assert k.sim_count == 5


def test_refine_budget_order_and_growth():
    p = build_platten([-1.0], [0.0], [4], sim_count=10)
    out = refine(p, [0.1, 0.5, 0.5, 0.0], budget=2, sim_growth=1.5)
    assert len(out) == 6
    uppers = [float(t.upper[0]) for t in out]
    assert uppers == pytest.approx([-0.75, -0.625, -0.5, -0.375, -0.25, 0.0])
    assert [t.sim_count for t in out] == [10, 15, 15, 15, 15, 10]
    assert sum(t.volume for t in out) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        refine(p, [1.0], 1)


def test_refine_widest_axis():
    p = Platten([Tile([0.0, 0.0], [0.1, 0.4], ())])
    out = refine(p, [1.0], 1)
    assert {float(t.half_widths[1]) for t in out} == {0.2}


def test_platten_round_trip_and_containing():
    hyp = (NullHypothesis(0, 0.0),)
    p = build_platten([-1.0, 0.0], [0.0, 1.0], [2, 2], hyp, sim_count=7)
    q = Platten.from_dict(p.to_dict())
    assert q.to_dict() == p.to_dict()
    assert p.containing([-0.5, 0.5]) == [0, 1, 2, 3]
    assert p.containing([5.0, 5.0]) == []
    assert p.with_sim_count(3).total_sims == 12
