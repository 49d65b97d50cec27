import numpy as np
import pytest

from postln_lens.arena.encoding import state_input
from postln_lens.arena.game import ONGOING, GameState, apply_move, legal_moves, move_list
from postln_lens.model import PRELN, ModelConfig, SmolgenConfig, init_model


def random_states(count, seed, max_plies=40):
    """Non-terminal states reached by uniform random play from the start."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        s = GameState.initial()
        for _ in range(int(rng.integers(0, max_plies + 1))):
            moves = move_list(s)
            nxt = apply_move(s, moves[int(rng.integers(len(moves)))])
            if nxt.outcome != ONGOING:
                break
            s = nxt
        out.append(s)
    return out


def model_inputs(w, states):
    return [(state_input(w, s), legal_moves(s)) for s in states]


def random_config(rng, norm_style="postln_deepnorm", smolgen_ok=True):
    heads = int(rng.choice([1, 2, 4]))
    return ModelConfig(
        layers=int(rng.integers(1, 5)),
        d_model=heads * int(rng.choice([2, 4, 8])),
        heads=heads,
        ffn_dim=int(rng.choice([4, 16, 24])),
        norm_style=norm_style,
        smolgen=SmolgenConfig(4, 16) if smolgen_ok and rng.random() < 0.3 else None,
        seed=int(rng.integers(0, 2**31)),
    )


@pytest.fixture(scope="session")
def toy():
    return init_model(ModelConfig(seed=0))


@pytest.fixture(scope="session")
def toy_preln():
    return init_model(ModelConfig(seed=0, norm_style=PRELN))


@pytest.fixture(scope="session")
def states():
    return random_states(6, seed=123)
