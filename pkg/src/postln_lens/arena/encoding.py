"""Board -> model input: four binary planes per square plus the movement positional encoding."""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from ..model import PolicyDistribution, WeightSet, prepare_input
from ..lens import lens_policy
from .game import BLACK, NEIGHBOURS, GameState, legal_moves

N_PLANES = 4


@lru_cache(maxsize=1)
def movement_posenc() -> np.ndarray:
    """(i, j) = 1 when a runner could step from i to j on an empty board, -1 on the diagonal."""
    pe = np.zeros((64, 64))
    for i in range(64):
        pe[i, list(NEIGHBOURS[i])] = 1.0
    np.fill_diagonal(pe, -1.0)
    pe.flags.writeable = False
    return pe


def encode_planes(s: GameState) -> np.ndarray:
    """Planes: own runners, enemy runners, side to move (all ones when black moves), constant ones."""
    b = np.asarray(s.board)
    planes = np.zeros((64, N_PLANES), dtype=bool)
    planes[:, 0] = b == s.side_to_move
    planes[:, 1] = (b != 0) & (b != s.side_to_move)
    planes[:, 2] = s.side_to_move == BLACK
    planes[:, 3] = True
    return planes


def state_input(w: WeightSet, s: GameState) -> np.ndarray:
    return prepare_input(encode_planes(s), movement_posenc(), w)


def stage_policy(w: WeightSet, s: GameState, stage: int, mode: str = "default") -> PolicyDistribution:
    return lens_policy(w, state_input(w, s), legal_moves(s), stage, mode)
