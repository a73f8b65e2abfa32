import math
import random
from collections import Counter

import pytest

from digame import hamilton as hm
from digame.game_core import EdgeOwner, GameConfig, new_game
from digame.strategies import breaker_random_move, play_degree_phase
from digame.verify import ubar_snapshots


def fixed_state(n, alpha, out_lists, in_sets=None, P=(0,), C=(), **kw):
    in_sets = in_sets if in_sets is not None else [[] for _ in range(n)]
    lists = hm.FixedOutLists(out_lists)
    st = hm.PathCycleState(n, alpha, in_sets, lists, **kw)
    st.place(P, C)
    return st


def lists_with(n, **entries):
    out = [[] for _ in range(n)]
    for k, v in entries.items():
        out[int(k[1:])] = v
    return out


# -- model ----------------------------------------------------------------------------------

def test_model_sizes():
    cfg = hm.ModelConfig(n=10, alpha=0.2, K=3, seed=1)
    rng = random.Random(1)
    lists, in_sets, st = hm.model_init(cfg, rng)
    adv = lists.adversary
    for v in range(10):
        A = adv.members("A", v)
        B = adv.members("B", v)
        assert len(A) == len(B) == 8 and v not in A and v not in B
        assert len(in_sets[v]) == len(set(in_sets[v])) == 3
        assert set(in_sets[v]) <= set(A)


@pytest.mark.parametrize("mode", hm.ADVERSARY_MODES)
def test_adversary_modes_sizes(mode):
    adv = hm.Adversary(20, 17, mode, random.Random(0))
    for v in range(20):
        for side in "AB":
            assert len(adv.members(side, v)) == 17


def test_model_deterministic():
    def draw():
        cfg = hm.ModelConfig(n=40, alpha=0.1, K=4, seed=5)
        lists, in_sets, st = hm.model_init(cfg, random.Random(5))
        seq = [lists.reveal(v % 40) for v in range(100)]
        return in_sets, seq

    assert draw() == draw()


def test_reveals_distinct_capped_and_inside_candidates():
    adv = hm.Adversary(30, 27, "uniform", random.Random(2))
    lists = hm.LazyOutLists(adv, 5, random.Random(3))
    for v in range(30):
        got = [lists.reveal(v) for _ in range(7)]
        assert got[5:] == [None, None]
        assert len(set(got[:5])) == 5
        assert all(adv.contains("B", v, w) for w in got[:5])
        assert lists.pointer(v) == 5


def test_first_reveal_uniform_over_candidates():
    # block mode fixes B(0) = {2, ..., 9}, so every trial samples the same 8-set
    n, trials = 10, 10_000
    adv = hm.Adversary(n, 8, "block", random.Random(0))
    members = adv.members("B", 0)
    assert len(members) == 8
    rng = random.Random(7)
    counts = Counter()
    for _ in range(trials):
        lists = hm.LazyOutLists(adv, 3, rng)
        counts[lists.reveal(0)] += 1
    assert set(counts) == set(members)
    p = 1 / 8
    sigma = math.sqrt(trials * p * (1 - p))
    assert all(abs(c - trials * p) <= 3 * sigma for c in counts.values())


def test_model_k_too_large():
    with pytest.raises(ValueError):
        hm.ModelConfig(n=10, alpha=0.2, K=9).validate()


# -- main-phase steps -------------------------------------------------------------------------

def test_case1_extends_path():
    st = fixed_state(10, 0.2, lists_with(10, v2=[5]), P=[0, 1, 2])
    assert st.u_size == 7 and st.two_an == 4
    out = st.step()
    assert out.case == "1" and st.P == [0, 1, 2, 5] and st.u_size == 6


def test_case2a_merges_cycle():
    st = fixed_state(10, 0.2, lists_with(10, v3=[6]), P=[0, 1, 2, 3], C=[4, 5, 6, 7, 8])
    assert st.u_size == 1
    out = st.step()
    assert out.case == "2a"
    assert st.C == [] and st.P == [0, 1, 2, 3, 6, 7, 8, 4, 5]
    assert st.invariant_errors() == []


def twelve(in10, in11, reveals):
    in_sets = [[] for _ in range(12)]
    in_sets[10], in_sets[11] = in10, in11
    return fixed_state(12, 0.1, lists_with(12, v9=reveals), in_sets=in_sets, P=list(range(10)))


def test_scripted_skip_adv_2b():
    st = twelve([5], [6], [0, 8, 3])
    assert st.ubar == {5, 6} == hm.ubar_star(st)
    assert st.step().case == "SKIP"           # y = s_P
    assert st.step().case == "ADV"            # y = 8 is too close to f_P
    out = st.step()                           # y = 3, x = 2 not in U-bar-star
    assert out.case == "2b"
    assert st.P == [0, 1, 2] and st.C == [3, 4, 5, 6, 7, 8, 9]
    assert st.u_size == 2 and st.t == 3
    assert st.invariant_errors() == []


def test_scripted_2c():
    st = twelve([2], [6], [3])
    out = st.step()
    assert out.case == "2c"
    assert st.P == [0, 1, 2, 10] and st.C == [3, 4, 5, 6, 7, 8, 9]
    assert st.U == {11}
    assert st.ubar == hm.ubar_star(st) == {6}
    assert st.stats.x_counts == [1]


def test_scripted_case_counts_and_trace():
    trace = []
    st = twelve([2], [6], [0, 3])
    st.trace = trace
    st.step()
    st.step()
    assert trace == ["1 9 0 SKIP 2 0 10", "2 9 3 2c 1 7 4"]


# -- endgame -------------------------------------------------------------------------------------

def test_endgame_close():
    st = fixed_state(5, 0.1, lists_with(5, v4=[0]), P=[0, 1, 2, 3, 4])
    out = st.advance()
    assert out.case == "END-CLOSE" and out.done and st.cycle == [0, 1, 2, 3, 4]


def test_endgame_merge_gives_single_path():
    st = fixed_state(6, 0.1, lists_with(6, v2=[4]), P=[0, 1, 2], C=[3, 4, 5])
    out = st.advance()
    assert out.case == "END-MERGE" and st.C == [] and st.P == [0, 1, 2, 4, 5, 3]


def test_scripted_endgame_trace():
    trace = []
    out = lists_with(8, v4=[6], v5=[3], v2=[5], v7=[0])
    st = fixed_state(8, 0.1, out, P=[0, 1, 2, 3, 4], C=[5, 6, 7], trace=trace)
    res = hm.run_builder(st)
    assert res.success and res.cycle == [0, 1, 2, 5, 3, 4, 6, 7]
    assert [ln.split()[3] for ln in trace] == ["END-MERGE", "END-ROT", "END-MERGE", "END-CLOSE"]
    # placed hops plus revealed ones
    edges = {(0, 1), (1, 2), (2, 3), (3, 4), (5, 6), (6, 7), (7, 5), (4, 6), (5, 3), (2, 5), (7, 0)}
    assert hm.validate_hamilton_cycle(res.cycle, 8, lambda v, w: (v, w) in edges) == []


def test_endgame_close_via_in():
    in_sets = [[] for _ in range(4)]
    in_sets[0] = [3]
    st = fixed_state(4, 0.1, lists_with(4, v3=[1]), in_sets=in_sets, P=[0, 1, 2, 3])
    assert st.advance().case == "END-CLOSE"
    st2 = fixed_state(4, 0.1, lists_with(4, v3=[1]), in_sets=in_sets, P=[0, 1, 2, 3], close_via_in=False)
    assert st2.advance().case != "END-CLOSE"


# -- U-bar-star --------------------------------------------------------------------------------

def test_ubar_empty_u():
    st = fixed_state(4, 0.1, [[] for _ in range(4)], in_sets=[[1], [2], [3], [0]], P=[0, 1, 2, 3])
    assert st.ubar == set() == hm.ubar_star(st)


def test_ubar_single_u():
    in_sets = [[] for _ in range(7)]
    in_sets[6] = [3, 5]
    st = fixed_state(7, 0.1, [[] for _ in range(7)], in_sets=in_sets, P=[0, 1, 2, 3, 4, 5])
    assert st.ubar == {3, 5} == hm.ubar_star(st)


def test_ubar_incremental_random_snapshots():
    agree, total = ubar_snapshots(60, seed=4)
    assert agree == total


# -- integrated mode and driver ------------------------------------------------------------------

def cycle_game(n):
    st = new_game(GameConfig(n=n, b=1, alpha=0.01))
    for v in range(n):
        st.to_move = EdgeOwner.MAKER
        st.claim(EdgeOwner.MAKER, (v, (v + 1) % n))
    return st


def test_cycle_graph_is_walked():
    game = cycle_game(20)
    _, _, st = hm.from_maker_graph(game, 1)
    res = hm.run_builder(st)
    assert res.cycle == list(range(20))
    assert res.stats.total == 20


def test_from_maker_graph_needs_degree():
    with pytest.raises(hm.DegreePhaseIncomplete):
        hm.from_maker_graph(cycle_game(6), 2)


def test_post_degree_phase_lists():
    n, K = 200, 6
    game = new_game(GameConfig(n=n, b=2, K=K))
    res, _ = play_degree_phase(game, random.Random(1), breaker_random_move, K)
    assert res.completed
    lists, in_sets, st = hm.from_maker_graph(game, K, alpha=0.1)
    assert all(len(lists.lists[v]) == game.dM_out[v] >= K for v in range(n))
    order = [[] for _ in range(n)]
    for player, (i, j) in game.history:
        if player == EdgeOwner.MAKER:
            order[i].append(j)
    assert lists.lists == order


def test_small_k_mostly_exhausts():
    fails = 0
    for s in range(30):
        _, _, st = hm.model_init(hm.ModelConfig(n=50, alpha=0.1, K=1, seed=s), random.Random(s))
        fails += hm.run_builder(st).reason == "ListExhausted"
    assert fails >= 27


@pytest.mark.parametrize("seed", range(3))
def test_model_build_with_monitor(seed):
    cfg = hm.ModelConfig(n=400, alpha=0.1, seed=seed)
    lists, _, st = hm.model_init(cfg, random.Random(seed), monitor=True)
    res = hm.run_builder(st)
    assert st.stats.invariant_violations == 0, st.stats.first_violation
    assert all(len(r) <= cfg.k for r in lists.revealed)
    if res.success:
        assert hm.validate_hamilton_cycle(res.cycle, 400, st.has_edge) == []


def test_budget_exceeded():
    _, _, st = hm.model_init(hm.ModelConfig(n=100, alpha=0.1, seed=0), random.Random(0))
    res = hm.run_builder(st, budget=10)
    assert res.reason == "BudgetExceeded" and res.stats.total == 10


def test_validator_catches_errors():
    edges = {(0, 1), (1, 2), (2, 0)}
    has = lambda v, w: (v, w) in edges
    assert hm.validate_hamilton_cycle([0, 1, 2], 3, has) == []
    assert hm.validate_hamilton_cycle([0, 1, 1], 3, has)
    assert hm.validate_hamilton_cycle([0, 2, 1], 3, has)


# -- CPstar -----------------------------------------------------------------------------------------

def test_cpstar_cases():
    n, theta = 1000, 5.0
    cut = n / (theta * math.log(n))
    stats = hm.TrialStats(snapshots=[(math.ceil(cut), n // 10)])
    rep = hm.cpstar_check(stats, n, theta, relax=1.0)
    assert rep.violations == 0 and rep.large_regime == (0, 1)
    stats = hm.TrialStats(snapshots=[(1, 0)])
    rep = hm.cpstar_check(stats, n, theta, relax=1.0)
    assert rep.small_regime == (1, 1)
    with pytest.raises(ValueError):
        hm.cpstar_check(stats, n, theta, relax=0)
