"""Round-robin play between lens stages."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Sequence

import numpy as np

from ..errors import FormatError, InputError
from ..lens import stage_label
from ..model import PolicyDistribution, WeightSet
from .encoding import stage_policy
from .game import BLACK_WIN, DRAW, ONGOING, WHITE_WIN, GameState, apply_move

Policy = Callable[[GameState], PolicyDistribution]

OUTCOME_CODES = {WHITE_WIN: "1-0", BLACK_WIN: "0-1", DRAW: "1/2"}
CODE_OUTCOMES = {v: k for k, v in OUTCOME_CODES.items()}


@dataclass(frozen=True)
class GameRecord:
    white_id: str
    black_id: str
    outcome: str                      # white_win / black_win / draw
    moves: tuple[int, ...] = ()


@dataclass
class GameResultSet:
    participants: list[str]
    games: list[GameRecord] = field(default_factory=list)

    def __post_init__(self):
        known = set(self.participants)
        for g in self.games:
            if g.white_id not in known or g.black_id not in known:
                raise InputError(f"game between unregistered participants {g.white_id!r}, {g.black_id!r}")
            if g.outcome not in OUTCOME_CODES:
                raise InputError(f"bad outcome {g.outcome!r}")

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["white_id", "black_id", "outcome"])
        for g in self.games:
            wr.writerow([g.white_id, g.black_id, OUTCOME_CODES[g.outcome]])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "GameResultSet":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or [c.strip() for c in rows[0]] != ["white_id", "black_id", "outcome"]:
            raise FormatError("results CSV must start with header white_id,black_id,outcome")
        games, seen = [], []
        for i, row in enumerate(rows[1:], 2):
            if not row:
                continue
            if len(row) != 3 or row[2].strip() not in CODE_OUTCOMES:
                raise FormatError(f"results CSV line {i}: {row!r}")
            w, b = row[0].strip(), row[1].strip()
            for pid in (w, b):
                if pid not in seen:
                    seen.append(pid)
            games.append(GameRecord(w, b, CODE_OUTCOMES[row[2].strip()]))
        return cls(seen, games)


def choose_move(pol: PolicyDistribution, rng: np.random.Generator, temperature: float) -> int:
    """Argmax at temperature 0, else a draw from p^(1/T) over legal moves."""
    if temperature <= 0:
        return pol.argmax()
    idx = np.flatnonzero(pol.legal.reshape(-1))
    p = pol.probs.reshape(-1)[idx]
    with np.errstate(divide="ignore"):
        logits = np.log(p) / temperature
    logits -= logits.max()
    wts = np.exp(logits)
    return int(idx[rng.choice(idx.size, p=wts / wts.sum())])


def play_game(white: Policy, black: Policy, rng: np.random.Generator,
              opening_plies: int = 0, temperature: float = 1.0,
              start: GameState | None = None) -> tuple[str, tuple[int, ...]]:
    s = start if start is not None else GameState.initial()
    moves = []
    while s.outcome == ONGOING:
        pol = (white if s.side_to_move == 1 else black)(s)
        m = choose_move(pol, rng, temperature if s.ply < opening_plies else 0.0)
        moves.append(m)
        s = apply_move(s, m)
    return s.outcome, tuple(moves)


def stage_player(w: WeightSet, stage: int, mode: str = "default") -> Policy:
    return lambda s: stage_policy(w, s, stage, mode)


def round_robin(w: WeightSet, stages: Sequence[int], games_per_pair: int,
                opening_plies: int = 10, temperature: float = 1.0, seed: int = 0,
                mode: str = "default") -> GameResultSet:
    """Each unordered stage pair plays ``games_per_pair`` games, alternating colours.

    Game g of pair (i, j) draws its randomness from the seed sequence
    (seed, i, j, g); the pair's first stage has white in even games.
    """
    if len(stages) < 2:
        raise InputError("round_robin needs at least two stages")
    if len(set(stages)) != len(stages):
        raise InputError("stages must be distinct")
    if games_per_pair < 1:
        raise InputError("games_per_pair must be positive")
    n = w.config.layers
    for k in stages:
        if not -1 <= k <= n - 1:
            raise InputError(f"stage {k} outside [-1, {n - 1}]")
    ids = [stage_label(k, n) for k in stages]
    players = [stage_player(w, k, mode) for k in stages]
    games = []
    for i, j in combinations(range(len(stages)), 2):
        for g in range(games_per_pair):
            a, b = (i, j) if g % 2 == 0 else (j, i)
            rng = np.random.default_rng([seed, i, j, g])
            outcome, moves = play_game(players[a], players[b], rng, opening_plies, temperature)
            games.append(GameRecord(ids[a], ids[b], outcome, moves))
    return GameResultSet(ids, games)
