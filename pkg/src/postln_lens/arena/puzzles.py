"""Forced-win puzzles: generation from random playouts and per-stage evaluation."""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from ..errors import FormatError, InputError
from ..metrics import SolveMatrix
from ..model import WeightSet, forward, policy_head
from ..squares import move_name, parse_move
from .encoding import stage_policy, state_input
from .game import ONGOING, GameState, apply_move, legal_moves, move_list, win_for
from .solver import _Search, minimax_solve

MoveChooser = Callable[[GameState], int]
MAX_PUZZLE_DEPTH = 4


@dataclass(frozen=True)
class Puzzle:
    state: GameState
    pv: tuple[int, ...]
    depth: int                # plies in the principal variation

    def __post_init__(self):
        if self.depth != len(self.pv) or not 1 <= self.depth <= MAX_PUZZLE_DEPTH:
            raise InputError(f"puzzle depth {self.depth} does not fit a pv of {len(self.pv)} plies")

    def to_json(self) -> dict:
        s = self.state
        return {"board": s.board_string(), "stm": s.stm_char, "pv": [move_name(m) for m in self.pv],
                "depth": self.depth, "ply": s.ply, "halfmove": s.halfmove}

    @classmethod
    def from_json(cls, d: dict) -> "Puzzle":
        state = GameState.from_string(d["board"], d["stm"], int(d.get("ply", 0)), int(d.get("halfmove", 0)))
        return cls(state, tuple(parse_move(m) for m in d["pv"]), int(d["depth"]))


def check_pv(p: Puzzle) -> bool:
    """pv is legal from the start state and the mover wins on its last move."""
    s = p.state
    mover = s.side_to_move
    for i, m in enumerate(p.pv):
        if m not in move_list(s):
            return False
        s = apply_move(s, m)
        if s.outcome != ONGOING and i != len(p.pv) - 1:
            return False
    return s.outcome == win_for(mover)


def generate_puzzles(count: int, seed: int, min_plies: int = 2, max_plies: int = 4,
                     max_states: int = 200_000) -> list[Puzzle]:
    """Harvest states whose shortest forced win for the mover lies in [min_plies, max_plies].

    Uniform random playouts from the initial position; duplicates (same board
    and side to move) are skipped.
    """
    if count < 0:
        raise InputError("count must be non-negative")
    rng = np.random.default_rng(seed)
    seen: set = set()
    out: list[Puzzle] = []
    visited = 0
    while len(out) < count:
        s = GameState.initial()
        while s.outcome == ONGOING and len(out) < count:
            visited += 1
            if visited > max_states:
                raise InputError(f"only {len(out)} puzzles found in {max_states} states")
            if s.key not in seen:
                seen.add(s.key)
                res = minimax_solve(s, max_plies)
                if res.win_in is not None and min_plies <= res.win_in <= max_plies:
                    out.append(Puzzle(s, res.pv, res.win_in))
            moves = move_list(s)
            s = apply_move(s, moves[int(rng.integers(len(moves)))])
    return out


def dumps_puzzles(puzzles: Iterable[Puzzle]) -> str:
    return "".join(json.dumps(p.to_json(), separators=(",", ":")) + "\n" for p in puzzles)


def loads_puzzles(text: str) -> list[Puzzle]:
    out = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            out.append(Puzzle.from_json(json.loads(line)))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
            raise FormatError(f"puzzle line {lineno}: {e!r}") from None
    return out


def solve_puzzle(p: Puzzle, choose: MoveChooser) -> bool:
    """Play the mover's side with ``choose``.

    A mover decision is accepted when it matches the pv, or when it is another
    move that still forces a win within the plies left. Once off the pv, the
    defender plays the longest-resisting reply and later mover decisions must
    keep forcing the win.
    """
    search = _Search()
    s = p.state
    mover = s.side_to_move
    line: list[int] | None = list(p.pv)
    left = p.depth
    while True:
        m = choose(s)
        if line is not None and line and m == line[0]:
            line = line[1:]
        else:
            if m not in move_list(s) or not search.move_wins(s, m, left):
                return False
            line = None
        s = apply_move(s, m)
        left -= 1
        if s.outcome == win_for(mover):
            return True
        if s.outcome != ONGOING or left <= 0:
            return False
        if line is not None:
            r, line = line[0], line[1:]
        else:
            r = search.defence(s, left - 1)
        s = apply_move(s, r)
        left -= 1
        if s.outcome != ONGOING:
            return False


def argmax_chooser(policy_fn) -> MoveChooser:
    return lambda s: policy_fn(s).argmax()


def eval_puzzles(w: WeightSet, puzzles: Sequence[Puzzle], stages: Sequence[int],
                 mode: str = "default") -> SolveMatrix:
    n = w.config.layers
    for k in stages:
        if not -1 <= k <= n - 1:
            raise InputError(f"stage {k} outside [-1, {n - 1}]")
    solved = np.zeros((len(puzzles), len(stages)), dtype=bool)
    for j, k in enumerate(stages):
        choose = argmax_chooser(lambda s, k=k: stage_policy(w, s, k, mode))
        for i, p in enumerate(puzzles):
            solved[i, j] = solve_puzzle(p, choose)
    return SolveMatrix(solved, tuple(stages))


def full_model_chooser(w: WeightSet) -> MoveChooser:
    """Argmax of the unablated model, computed without the lens machinery."""
    def choose(s: GameState) -> int:
        return policy_head(forward(w, state_input(w, s)).final_h, w, legal_moves(s)).argmax()
    return choose
