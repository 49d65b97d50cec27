"""Exhaustive forced-win search for Crossing.

A forced win "within n plies" means the side to move can make the game end in
its favour on one of its own moves, at ply n or earlier, against every defence.
Only odd ply counts can be wins for the mover.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import InputError
from .game import (
    NEIGHBOURS,
    ONGOING,
    WHITE,
    GameState,
    apply_move,
    move_list,
    other,
    win_for,
)

MAX_DEPTH = 6


def immediate_win(s: GameState) -> bool:
    """True when the side to move has a move that wins on the spot."""
    if s.outcome != ONGOING:
        return False
    b, me = s.board, s.side_to_move
    # A runner one row from the far back rank always has a free forward
    # square: an own runner there would already have ended the game.
    row = b[48:56] if me == WHITE else b[8:16]
    if me in row:
        return True
    enemy = other(me)
    if b.count(enemy) == 1:
        e = b.index(enemy)
        return any(b[n] == me for n in NEIGHBOURS[e])
    return False


def could_win_within(s: GameState, n: int) -> bool:
    """Cheap necessary condition for a forced win within ``n`` plies.

    The mover gets (n+1)//2 moves; the defender never loses runners on its own
    moves. So either some runner is that many rows from the far back rank, or
    at most that many enemy runners remain.
    """
    moves = (n + 1) // 2
    b, me = s.board, s.side_to_move
    if b.count(other(me)) <= moves:
        return True
    if me == WHITE:
        return me in b[max(7 - moves, 0) * 8:]
    return me in b[:(moves + 1) * 8]


@dataclass
class _Search:
    cache: dict = field(default_factory=dict)

    def wins_within(self, s: GameState, n: int) -> bool:
        if n < 1 or s.outcome != ONGOING:
            return False
        if immediate_win(s):
            return True
        if n < 3 or not could_win_within(s, n):
            return False
        key = (s.board, s.side_to_move, s.ply, s.halfmove, n)
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        result = any(self.defender_lost(apply_move(s, m), n - 2) for m in move_list(s))
        self.cache[key] = result
        return result

    def defender_lost(self, c: GameState, n: int) -> bool:
        """``c`` has the defender to move: does every reply leave the attacker a win within n?"""
        if c.outcome != ONGOING:
            return False
        if immediate_win(c):
            return False
        replies = [apply_move(c, r) for r in move_list(c)]
        if any(r.outcome != ONGOING for r in replies):
            return False
        return all(self.wins_within(r, n) for r in replies)

    def move_wins(self, s: GameState, m: int, n: int) -> bool:
        c = apply_move(s, m)
        if c.outcome == win_for(s.side_to_move):
            return True
        return n >= 3 and self.defender_lost(c, n - 2)

    def shortest(self, s: GameState, depth: int) -> int | None:
        for n in range(1, depth + 1, 2):
            if self.wins_within(s, n):
                return n
        return None

    def defence(self, c: GameState, depth: int) -> int:
        """Reply that postpones the attacker's win longest (lowest index on ties)."""
        best, best_len = None, -1
        for r in move_list(c):
            after = apply_move(c, r)
            n = self.shortest(after, depth) if after.outcome == ONGOING else None
            length = depth + 1 if n is None else n
            if length > best_len:
                best, best_len = r, length
        return best

    def pv(self, s: GameState, n: int) -> list[int]:
        for m in move_list(s):
            if self.move_wins(s, m, n):
                c = apply_move(s, m)
                if c.outcome != ONGOING:
                    return [m]
                r = self.defence(c, n - 2)
                after = apply_move(c, r)
                return [m, r] + self.pv(after, self.shortest(after, n - 2))
        raise AssertionError("pv requested for a position without a forced win")


@dataclass(frozen=True)
class SolveResult:
    win_in: int | None        # plies, odd; None = no forced win within the depth
    pv: tuple[int, ...] = ()

    @property
    def unknown(self) -> bool:
        return self.win_in is None


def minimax_solve(s: GameState, depth: int) -> SolveResult:
    """Shortest forced win for the side to move within ``depth`` plies, with one principal variation.

    Ties go to the lowest source*64+target move for the attacker; the defender
    picks the reply that delays the loss longest, again lowest index first.
    """
    if not 0 <= depth <= MAX_DEPTH:
        raise InputError(f"depth must be in [0, {MAX_DEPTH}], got {depth}")
    search = _Search()
    n = search.shortest(s, depth)
    if n is None:
        return SolveResult(None)
    return SolveResult(n, tuple(search.pv(s, n)))


def shortest_win(s: GameState, depth: int) -> int | None:
    return _Search().shortest(s, depth)


def move_forces_win(s: GameState, move: int, plies: int) -> bool:
    """Does ``move`` by the side to move force a win within ``plies`` (counting this move)?"""
    return _Search().move_wins(s, move, plies)


def best_defence(c: GameState, plies: int) -> int:
    return _Search().defence(c, plies)
