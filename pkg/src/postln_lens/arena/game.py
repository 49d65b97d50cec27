"""Crossing: a 64-square race game whose moves live in the 64x64 source-target space.

White runners start on rank 1 (row 0), black on rank 8 (row 7). A runner steps
one square in any of the eight directions onto an empty or enemy square,
capturing on the latter. A side wins by reaching the opposing back rank or by
capturing every enemy runner. 100 plies without capture, or 400 plies in
total, is a draw.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable

import numpy as np

from ..errors import InputError, RuleError
from ..squares import move_name

EMPTY, WHITE, BLACK = 0, 1, 2
ONGOING, WHITE_WIN, BLACK_WIN, DRAW = "ongoing", "white_win", "black_win", "draw"
CAPTURELESS_LIMIT = 100
PLY_LIMIT = 400
RUNNERS = 8

_CELL_CHARS = {EMPTY: ".", WHITE: "w", BLACK: "b"}
_CHAR_CELLS = {v: k for k, v in _CELL_CHARS.items()}


def _neighbours(sq: int) -> tuple[int, ...]:
    r, f = divmod(sq, 8)
    out = []
    for dr in (-1, 0, 1):
        for df in (-1, 0, 1):
            if (dr or df) and 0 <= r + dr < 8 and 0 <= f + df < 8:
                out.append((r + dr) * 8 + f + df)
    return tuple(sorted(out))


NEIGHBOURS = tuple(_neighbours(sq) for sq in range(64))


def other(side: int) -> int:
    return BLACK if side == WHITE else WHITE


def win_for(side: int) -> str:
    return WHITE_WIN if side == WHITE else BLACK_WIN


@dataclass(frozen=True)
class GameState:
    board: tuple[int, ...]
    side_to_move: int = WHITE
    ply: int = 0
    halfmove: int = 0

    def __post_init__(self):
        if len(self.board) != 64 or any(c not in (EMPTY, WHITE, BLACK) for c in self.board):
            raise InputError("board must hold 64 cells in {empty, white, black}")
        if self.side_to_move not in (WHITE, BLACK):
            raise InputError(f"bad side to move {self.side_to_move!r}")
        if self.ply < 0 or self.halfmove < 0:
            raise InputError("ply counters must be non-negative")
        if self.board.count(WHITE) > RUNNERS or self.board.count(BLACK) > RUNNERS:
            raise InputError("more than 8 runners for one side")

    @classmethod
    def initial(cls) -> "GameState":
        return cls(tuple([WHITE] * 8 + [EMPTY] * 48 + [BLACK] * 8))

    @classmethod
    def from_string(cls, board: str, stm: str = "w", ply: int = 0, halfmove: int = 0) -> "GameState":
        if len(board) != 64 or set(board) - set(_CHAR_CELLS):
            raise InputError("board string must be 64 characters over '.wb'")
        if stm not in ("w", "b"):
            raise InputError(f"side to move must be 'w' or 'b', got {stm!r}")
        return cls(tuple(_CHAR_CELLS[c] for c in board), WHITE if stm == "w" else BLACK, ply, halfmove)

    def board_string(self) -> str:
        return "".join(_CELL_CHARS[c] for c in self.board)

    @property
    def stm_char(self) -> str:
        return "w" if self.side_to_move == WHITE else "b"

    @property
    def key(self) -> tuple:
        return (self.board, self.side_to_move)

    @cached_property
    def outcome(self) -> str:
        b = self.board
        if WHITE in b[56:]:
            return WHITE_WIN
        if BLACK in b[:8]:
            return BLACK_WIN
        if WHITE not in b:
            return BLACK_WIN
        if BLACK not in b:
            return WHITE_WIN
        if self.halfmove >= CAPTURELESS_LIMIT or self.ply >= PLY_LIMIT:
            return DRAW
        return ONGOING

    def __str__(self) -> str:
        rows = [self.board_string()[r * 8:(r + 1) * 8] for r in range(7, -1, -1)]
        return "\n".join(rows) + f"\n{self.stm_char} to move, ply {self.ply}"


def is_terminal(s: GameState) -> str:
    return s.outcome


def move_list(s: GameState) -> list[int]:
    """Legal moves as flat source*64+target indices, ascending; empty when terminal."""
    if s.outcome != ONGOING:
        return []
    b, me = s.board, s.side_to_move
    return [sq * 64 + t for sq in range(64) if b[sq] == me for t in NEIGHBOURS[sq] if b[t] != me]


def legal_moves(s: GameState) -> np.ndarray:
    mask = np.zeros(64 * 64, dtype=bool)
    mask[move_list(s)] = True
    return mask.reshape(64, 64)


def apply_move(s: GameState, move: int) -> GameState:
    src, dst = divmod(int(move), 64)
    if s.outcome != ONGOING:
        raise RuleError(f"game is over ({s.outcome})")
    b = s.board
    if not 0 <= src < 64 or b[src] != s.side_to_move:
        raise RuleError(f"{move_name(move)}: no own runner on the source square")
    if dst not in NEIGHBOURS[src]:
        raise RuleError(f"{move_name(move)}: target is not one step away")
    if b[dst] == s.side_to_move:
        raise RuleError(f"{move_name(move)}: target holds an own runner")
    capture = b[dst] != EMPTY
    nb = list(b)
    nb[dst], nb[src] = nb[src], EMPTY
    return _unchecked(tuple(nb), other(s.side_to_move), s.ply + 1, 0 if capture else s.halfmove + 1)


def _unchecked(board: tuple, side: int, ply: int, halfmove: int) -> GameState:
    # apply_move only produces valid states; skip __post_init__ validation.
    s = object.__new__(GameState)
    object.__setattr__(s, "board", board)
    object.__setattr__(s, "side_to_move", side)
    object.__setattr__(s, "ply", ply)
    object.__setattr__(s, "halfmove", halfmove)
    return s


def replay(moves: Iterable[int], start: GameState | None = None) -> GameState:
    s = start if start is not None else GameState.initial()
    for m in moves:
        s = apply_move(s, m)
    return s
