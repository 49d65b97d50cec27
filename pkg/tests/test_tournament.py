import numpy as np
import pytest

from postln_lens.arena.game import GameState, replay
from postln_lens.arena.tournament import GameRecord, GameResultSet, choose_move, play_game, round_robin, stage_player
from postln_lens.errors import FormatError, InputError
from postln_lens.model import ModelConfig, PolicyDistribution, init_model


@pytest.fixture(scope="module")
def small():
    return init_model(ModelConfig(layers=2, d_model=16, heads=2, ffn_dim=16, seed=3))


def test_counts_and_colours(small):
    r = round_robin(small, [-1, 1], 4, opening_plies=6, seed=1)
    assert len(r.games) == 4 and r.participants == ["input", "full"]
    assert sum(g.white_id == "input" for g in r.games) == 2
    r3 = round_robin(small, [-1, 0, 1], 2, opening_plies=4, seed=1)
    assert len(r3.games) == 6


def test_deterministic_given_seed(small):
    a = round_robin(small, [-1, 1], 2, opening_plies=8, seed=5)
    b = round_robin(small, [-1, 1], 2, opening_plies=8, seed=5)
    assert a.games == b.games


def test_temperature_zero_games_identical(small):
    r = round_robin(small, [0, 1], 4, opening_plies=10, temperature=0.0, seed=2)
    assert r.games[0] == r.games[2] and r.games[1] == r.games[3]


def test_self_play_colour_swap(small):
    p = stage_player(small, 0)
    rng = np.random.default_rng(0)
    a = play_game(p, p, rng, temperature=0.0)
    b = play_game(p, p, rng, temperature=0.0)
    assert a == b


def test_replay_reproduces_outcome(small):
    r = round_robin(small, [-1, 1], 2, opening_plies=10, seed=9)
    for g in r.games:
        assert replay(g.moves).outcome == g.outcome


def test_choose_move():
    legal = np.zeros((64, 64), bool)
    legal[0, [1, 8, 9]] = True
    probs = np.zeros((64, 64))
    probs[0, [1, 8, 9]] = [0.2, 0.5, 0.3]
    pol = PolicyDistribution(probs, legal)
    assert choose_move(pol, np.random.default_rng(0), 0.0) == 8
    rng = np.random.default_rng(1)
    draws = [choose_move(pol, rng, 1.0) for _ in range(4000)]
    freq = np.array([draws.count(m) for m in (1, 8, 9)]) / 4000
    assert np.abs(freq - [0.2, 0.5, 0.3]).max() < 0.03
    sharp = [choose_move(pol, rng, 0.05) for _ in range(200)]
    assert sharp.count(8) > 190


def test_result_csv_roundtrip():
    rs = GameResultSet(["a", "b"], [GameRecord("a", "b", "white_win"), GameRecord("b", "a", "draw")])
    back = GameResultSet.from_csv(rs.to_csv())
    assert rs.to_csv() == "white_id,black_id,outcome\na,b,1-0\nb,a,1/2\n"
    assert [(g.white_id, g.black_id, g.outcome) for g in back.games] == [("a", "b", "white_win"), ("b", "a", "draw")]
    with pytest.raises(FormatError):
        GameResultSet.from_csv("w,b,o\n")
    with pytest.raises(FormatError):
        GameResultSet.from_csv("white_id,black_id,outcome\na,b,2-0\n")
    with pytest.raises(InputError):
        GameResultSet(["a"], [GameRecord("a", "z", "draw")])


def test_round_robin_errors(small):
    with pytest.raises(InputError):
        round_robin(small, [0], 2)
    with pytest.raises(InputError):
        round_robin(small, [0, 0], 2)
    with pytest.raises(InputError):
        round_robin(small, [0, 5], 2)
    assert GameState.initial().outcome == "ongoing"
