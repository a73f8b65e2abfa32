import math
import random
from collections import Counter
from functools import lru_cache
from types import SimpleNamespace

import numpy as np
import pytest

from digame.game_core import EdgeOwner, GameConfig, new_game
from digame.strategies import (
    BREAKERS, BoxGameState, DangerTable, StrategyKind, alive_boxes, box_game_play, breaker_box_move,
    breaker_maxdegree_move, breaker_random_move, breaker_turn, danger, maker_degree_move,
    play_degree_phase, water_fill,
)

M, B = EdgeOwner.MAKER, EdgeOwner.BREAKER


def force(st, player, edges):
    """Claim ``edges`` for ``player`` regardless of whose turn it is (fixture building only)."""
    for e in edges:
        st.to_move = player
        st.breaker_claimed_this_turn = 0
        st.claim(player, e)
    st.to_move = M


def test_danger_formula():
    fake = SimpleNamespace(n=5, b=3, dB_out=[10, 0, 0, 0, 0], dM_out=[2, 0, 0, 0, 0], dB_in=[0] * 5, dM_in=[0] * 5)
    assert danger(fake, 0) == -2


def test_danger_fresh_and_recount():
    st = new_game(GameConfig(n=8, b=2))
    assert all(danger(st, v) == 0 for v in range(16))
    rng = random.Random(1)
    for _ in range(30):
        st.claim(st.to_move, st.random_unclaimed(rng, 1)[0])
    own = st.board()
    for v in range(8):
        dB = int((own[v] == B).sum())
        dM = int((own[v] == M).sum())
        assert danger(st, v) == dB - 4 * dM
        dB = int((own[:, v] == B).sum())
        dM = int((own[:, v] == M).sum())
        assert danger(st, 8 + v) == dB - 4 * dM


def test_fresh_move_uniform_from_a0():
    n, trials = 5, 4000
    counts = Counter()
    for s in range(trials):
        st = new_game(GameConfig(n=n, b=1))
        table = DangerTable(st, K=2)
        e = maker_degree_move(st, random.Random(s), table)
        assert e.src == 0
        counts[e.dst] += 1
    p = 1 / (n - 1)
    sigma = math.sqrt(trials * p * (1 - p))
    assert set(counts) == {1, 2, 3, 4}
    assert all(abs(c - trials * p) <= 4 * sigma for c in counts.values())


def test_unique_argmax_vertex():
    st = new_game(GameConfig(n=10, b=2))
    force(st, B, [(3, w) for w in (0, 1, 2, 4, 5, 6)] + [(7, 8)])
    table = DangerTable(st, K=3)
    assert table.argmax() == 3
    assert maker_degree_move(st, random.Random(0), table).src == 3


def brute_argmax(st, K):
    n = st.n
    best = None
    for v in range(2 * n):
        dm = st.dM_out[v] if v < n else st.dM_in[v - n]
        if dm >= K:
            continue
        if best is None or danger(st, v) > danger(st, best):
            best = v
    return best


@pytest.mark.parametrize("seed", range(15))
def test_argmax_matches_bruteforce(seed):
    rng = random.Random(seed)
    st = new_game(GameConfig(n=6, b=2))
    K = 2
    table = DangerTable(st, K)
    for _ in range(8):
        if table.unfinished == 0 or st.is_exhausted():
            break
        assert table.argmax() == brute_argmax(st, K)
        assert table.values == table.recompute()
        try:
            st.claim(M, maker_degree_move(st, rng, table))
        except Exception:
            break
        if not st.is_exhausted():
            breaker_turn(st, rng, breaker_random_move)


def test_box_move_three_vertices():
    st = new_game(GameConfig(n=3, b=2))
    st.claim(M, (0, 1))
    assert alive_boxes(st) == [(1, 2), (2, 2)]
    got = breaker_box_move(st, random.Random(0))
    assert sorted(got) == [(1, 0), (1, 2)]
    st.claim_many(B, got)
    assert st.dM_out[1] == 0 and not st.unclaimed_out(1)


def test_box_move_smallest_first():
    st = new_game(GameConfig(n=10, b=5))
    force(st, M, [(v, 0 if v != 0 else 1) for v in range(3, 10)])
    force(st, B, [(0, w) for w in (1, 2, 3, 4, 5)] + [(1, 2), (1, 3)])
    assert sorted(alive_boxes(st)) == [(0, 4), (1, 7), (2, 9)]
    got = breaker_box_move(st, random.Random(2))
    srcs = Counter(e.src for e in got)
    assert srcs == {0: 4, 1: 1}
    assert len(set(got)) == 5


def test_box_move_falls_back_to_random():
    st = new_game(GameConfig(n=4, b=3))
    force(st, M, [(v, (v + 1) % 4) for v in range(4)])
    assert alive_boxes(st) == []
    got = breaker_box_move(st, random.Random(0))
    assert len(got) == 3 and len(set(got)) == 3
    assert all(st.owner[i * 4 + j] == 0 for i, j in got)


def test_random_move_distinct_and_short_turn():
    st = new_game(GameConfig(n=3, b=2))
    st.claim(M, (0, 1))
    got = breaker_random_move(st, random.Random(5))
    assert len(got) == 2 and len(set(got)) == 2
    st2 = new_game(GameConfig(n=3, b=5))
    force(st2, B, [(0, 1), (0, 2), (1, 0), (1, 2), (2, 0)])
    assert st2.unclaimed_count == 1
    st2.to_move = B
    assert breaker_random_move(st2, random.Random(0)) == [(2, 1)]


def test_maxdegree_targets_top_vertex():
    st = new_game(GameConfig(n=8, b=3))
    force(st, M, [(4, 0), (4, 1), (4, 2), (5, 6)])
    got = breaker_maxdegree_move(st, random.Random(0))
    assert all(e.src == 4 for e in got)
    force(st, B, got)
    # a_4's star now has one free edge left; the rest spill to the next vertex
    got = breaker_maxdegree_move(st, random.Random(0))
    assert sum(e.src == 4 for e in got) == 1
    assert len(set(got)) == 3


@pytest.mark.parametrize("kind", list(BREAKERS))
def test_degree_phase_reaches_K(kind):
    n, b, K = 60, 2, 6
    st = new_game(GameConfig(n=n, b=b, K=K), record_history=False)
    res, table = play_degree_phase(st, random.Random(11), BREAKERS[kind], K)
    assert res.completed and res.rounds <= 2 * K * n
    assert min(st.dM_out + st.dM_in) >= K
    assert res.danger_increase_on_maker_move == 0
    assert table not in st.watchers
    assert res.max_breaker_degree_unfinished <= res.max_breaker_degree
    assert st.check_consistency() == []


def test_degree_phase_fails_under_flood():
    st = new_game(GameConfig(n=12, b=11, K=3), record_history=False)
    res, _ = play_degree_phase(st, random.Random(0), breaker_box_move, 3)
    assert not res.completed and res.error


def test_strategy_parse():
    assert StrategyKind.parse("breaker_box") == StrategyKind.BREAKER_BOX
    assert StrategyKind.parse("BreakerMaxDegree") == StrategyKind.BREAKER_MAX_DEGREE
    with pytest.raises(ValueError):
        StrategyKind.parse("nope")


# -- box game ------------------------------------------------------------------------------

def water_fill_slow(loads, alive, units):
    loads = list(loads)
    inc = [0] * len(loads)
    for _ in range(units):
        idx = [i for i in range(len(loads)) if alive[i]]
        i = min(idx, key=lambda k: (loads[k] + inc[k], k))
        inc[i] += 1
    return inc


@pytest.mark.parametrize("seed", range(40))
def test_water_fill_matches_unit_greedy(seed):
    rng = random.Random(seed)
    k = rng.randint(1, 8)
    loads = np.array([rng.randint(0, 6) for _ in range(k)], dtype=np.int64)
    alive = np.array([rng.random() < 0.8 for _ in range(k)])
    alive[rng.randrange(k)] = True
    units = rng.randint(0, 20)
    assert water_fill(loads, alive, units).tolist() == water_fill_slow(loads, alive, units)


def compositions(total, k):
    if k == 0:
        if total == 0:
            yield ()
        return
    for x in range(total + 1):
        for rest in compositions(total - x, k - 1):
            yield (x,) + rest


def breaker_can_win(n_boxes, size, b):
    """Exhaustive game tree: can any Breaker strategy beat the most-attacked opponent?"""

    @lru_cache(None)
    def win(loads, alive):
        idx = [i for i in range(n_boxes) if alive[i]]
        if not idx:
            return False
        for alloc in compositions(b, len(idx)):
            new = list(loads)
            for i, x in zip(idx, alloc):
                new[i] += x
            if any(new[i] >= size for i in idx):
                return True
            j = max(idx, key=lambda i: (new[i], -i))
            rest = list(alive)
            rest[j] = False
            if win(tuple(new), tuple(rest)):
                return True
        return False

    return win((0,) * n_boxes, (True,) * n_boxes)


def test_box_game_small_cases():
    assert box_game_play(1, 1, 1).winner == "Breaker"
    assert not breaker_can_win(2, 3, 1)
    assert box_game_play(2, 3, 1).winner == "Maker"


def test_balanced_attacker_is_optimal_on_small_boards():
    for nb in range(1, 5):
        for size in range(1, 6):
            for b in range(1, 4):
                assert (box_game_play(nb, size, b).winner == "Breaker") == breaker_can_win(nb, size, b), (nb, size, b)


def test_box_game_breaker_above_threshold():
    b = math.ceil(1.5 * 200 / math.log(200))
    assert box_game_play(200, 200, b).winner == "Breaker"


def test_box_game_monotone_in_b():
    winners = [box_game_play(60, 60, b).winner for b in range(1, 40)]
    flips = [i for i in range(1, len(winners)) if winners[i] != winners[i - 1]]
    assert len(flips) == 1 and winners[0] == "Maker" and winners[-1] == "Breaker"


def test_box_state_fresh():
    st = BoxGameState.fresh(3, 5)
    assert st.loads.tolist() == [0, 0, 0] and st.alive.all()
