import csv
import io
import math

import numpy as np
import pytest

from hcpfactor.costmodel import (
    CSV_COLUMNS,
    calls_at_depth,
    default_blocks,
    mlcaqr_cost,
    mlcaqr_detailed_bound,
    mlcalu_cost,
    onelevel_cost,
    predict,
    sweep,
    write_csv,
)
from hcpfactor.platform import load_platform, make_platform
from hcpfactor.schedule import BlockSchedule

N_EXA = 2 ** 20


@pytest.fixture(scope="module")
def exascale():
    return load_platform("exascale")


def test_default_blocks_examples(exascale):
    assert default_blocks(4096, make_platform([(4, 4)])).blocks == (64,)
    assert default_blocks(96, make_platform([(1, 1), (1, 1)])).blocks == (96, 96)
    sched = default_blocks(N_EXA, exascale)
    sched.check(N_EXA, exascale.depth)
    assert all(hi % lo == 0 for lo, hi in zip(sched.blocks, sched.blocks[1:]))


def test_calls_at_depth():
    p = make_platform([(2, 2)] * 3)
    assert calls_at_depth(2, p) == 2.0
    assert calls_at_depth(3, p) == 1.0
    assert calls_at_depth(1, make_platform([(1, 2), (2, 2)])) == 0.0
    with pytest.raises(ValueError):
        calls_at_depth(4, p)


def test_flop_leading_terms(exascale):
    p = make_platform([(4, 4), (8, 8)])
    lu = mlcalu_cost(4096, p)
    assert lu.flops >= 2 * 4096 ** 3 / (3 * 1024)
    assert 2 * 4096 ** 3 / (3 * 1024) == pytest.approx(44739242.67, abs=0.01)
    assert mlcaqr_cost(N_EXA, exascale).flops == 4294967296.0


def test_single_level_falls_back():
    p = make_platform([(4, 4)])
    for algo, one in (("mlcaqr", "caqr"), ("mlcalu", "calu")):
        assert predict(algo, 512, p).cost == onelevel_cost(one, 512, p).cost


def test_words_at_least_bound(exascale):
    for algo in ("mlcaqr", "mlcalu"):
        rep = predict(algo, N_EXA, exascale)
        assert all(r >= 1.0 for r in rep.bound_ratios), rep.bound_ratios
        cap = math.prod(math.log2(exascale.nodes(j)) ** 2 for j in range(1, exascale.depth + 1))
        assert all(r <= cap for r in rep.bound_ratios)


def test_ccr_and_speedup(exascale):
    ml = mlcaqr_cost(N_EXA, exascale)
    flat = onelevel_cost("caqr", N_EXA, exascale)
    assert ml.ccr <= flat.ccr
    assert flat.total_time / ml.total_time > 1.0
    assert mlcalu_cost(N_EXA, exascale).total_time < onelevel_cost("calu", N_EXA, exascale).total_time


def test_ccr_falls_with_n():
    p = make_platform([(4, 4), (8, 8)])
    ccrs = [mlcaqr_cost(n, p).ccr for n in (1024, 4096, 16384)]
    assert ccrs[0] > ccrs[1] > ccrs[2]


def test_detailed_bound_dominates_closed_form():
    # flops and top-level words of the recursive bound are never below the closed form
    rng = np.random.default_rng(5)
    for _ in range(10):
        depth = int(rng.integers(2, 4))
        grids = [(int(2 ** rng.integers(1, 3)),) * 2 for _ in range(depth)]
        p = make_platform(grids)
        n = 2 ** int(rng.integers(10, 15))
        rep = mlcaqr_cost(n, p)
        assert rep.detailed.flops >= rep.flops
        assert rep.detailed.words[-1] >= rep.words[-1]


def test_detailed_bound_needs_two_levels():
    with pytest.raises(ValueError):
        mlcaqr_detailed_bound(64, make_platform([(2, 2)]), BlockSchedule((8,)))


def test_predict_unknown():
    with pytest.raises(ValueError):
        predict("qr", 64, make_platform([(2, 2)]))


def test_share_bandwidth(exascale):
    shared = onelevel_cost("caqr", N_EXA, exascale)
    alone = onelevel_cost("caqr", N_EXA, exascale, share_bandwidth=False)
    assert shared.total_time > alone.total_time
    assert shared.words == alone.words


def test_sweep_and_csv(exascale):
    reports = sweep("mlcaqr", exascale, [2 ** 18, 2 ** 20], top_nodes=[1024, 4096])
    assert [(r.n, r.platform.nodes(exascale.depth)) for r in reports] == [
        (2 ** 18, 1024), (2 ** 18, 4096), (2 ** 20, 1024), (2 ** 20, 4096)]
    rows = list(csv.DictReader(io.StringIO(write_csv(reports))))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert len(rows) == 4 * exascale.depth
    assert {r["schema_version"] for r in rows} == {"1"}
    buf = io.StringIO()
    write_csv(reports[:1], buf)
    assert buf.getvalue().count("\n") == 1 + exascale.depth


def test_report_nonnegative(exascale):
    for algo in ("caqr", "calu", "mlcaqr", "mlcalu"):
        rep = predict(algo, 4096, exascale)
        assert rep.flops >= 0 and rep.total_time >= 0
        assert all(w >= 0 for w in rep.words) and all(s >= 0 for s in rep.messages)
        assert rep.ccr == pytest.approx(sum(rep.level_times) / rep.cost.flop_time)
