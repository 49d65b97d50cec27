"""Bayesian Elo with draws and a first-move advantage, fitted by coordinate ascent.

Model, with delta = r_white - r_black and f(x) = 1 / (1 + 10^(-x/400)):

    P(white wins) = f(delta + advantage - draw_elo)
    P(black wins) = f(-delta - advantage - draw_elo)
    P(draw)       = 1 - P(white wins) - P(black wins)

The prior adds ``prior_games`` virtual games scored 50% between every rated
participant and the anchor.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import InputError, NumericError
from .game import BLACK_WIN, DRAW, WHITE_WIN
from .tournament import GameResultSet

C = math.log(10.0) / 400.0


def f(x):
    x = np.asarray(x)
    if x.dtype != np.longdouble:
        x = x.astype(np.float64)
    return 1.0 / (1.0 + np.power(10.0, -x / 400.0))


@dataclass
class EloEstimate:
    ratings: dict[str, float]
    plus: dict[str, float]
    minus: dict[str, float]
    draw_elo: float
    advantage: float
    anchor_id: str
    anchor_value: float
    prior_games: float
    log_posterior: list[float] = field(default_factory=list)   # one entry per sweep, plus the start
    sweeps: int = 0


@dataclass
class _Counts:
    white: np.ndarray     # participant index of white, per (white, black) cell
    black: np.ndarray
    wins: np.ndarray      # white wins
    losses: np.ndarray
    draws: np.ndarray


def _aggregate(results: GameResultSet, index: dict[str, int]) -> _Counts:
    cells: dict[tuple[int, int], list[int]] = {}
    for g in results.games:
        c = cells.setdefault((index[g.white_id], index[g.black_id]), [0, 0, 0])
        c[{WHITE_WIN: 0, BLACK_WIN: 1, DRAW: 2}[g.outcome]] += 1
    keys = sorted(cells)
    arr = np.array([cells[k] for k in keys], dtype=np.float64).reshape(-1, 3)
    return _Counts(np.array([k[0] for k in keys], dtype=int), np.array([k[1] for k in keys], dtype=int),
                   arr[:, 0], arr[:, 1], arr[:, 2])


class _Posterior:
    def __init__(self, counts: _Counts, n: int, anchor: int, prior_games: float,
                 draw_elo: float, advantage: float):
        self.c, self.n, self.anchor = counts, n, anchor
        self.prior, self.draw_elo, self.adv = prior_games, draw_elo, advantage

    def _game_terms(self, delta):
        a = delta + self.adv - self.draw_elo
        b = -delta - self.adv - self.draw_elo
        fa, fb = f(a), f(b)
        pd = 1.0 - fa - fb
        return fa, fb, pd

    def value(self, x: np.ndarray) -> float:
        """Log posterior, summed in extended precision so tiny Newton gains stay visible."""
        c = self.c
        xl = np.asarray(x, dtype=np.longdouble)
        delta = xl[c.white] - xl[c.black]
        fa, fb, pd = self._game_terms(delta)
        with np.errstate(divide="ignore", invalid="ignore"):
            ll = (np.where(c.wins > 0, c.wins * np.log(fa), 0.0).sum()
                  + np.where(c.losses > 0, c.losses * np.log(fb), 0.0).sum()
                  + np.where(c.draws > 0, c.draws * np.log(pd), 0.0).sum())
        if self.prior > 0:
            d = np.delete(xl - xl[self.anchor], self.anchor)
            ll += np.longdouble(0.5 * self.prior) * np.sum(np.log(f(d)) + np.log(f(-d)))
        return ll

    def derivs(self, x: np.ndarray, i: int) -> tuple[float, float]:
        """First and second derivative of the log posterior in coordinate i."""
        c = self.c
        g = h = 0.0
        for side, sign in ((c.white, 1.0), (c.black, -1.0)):
            sel = side == i
            if not sel.any():
                continue
            delta = x[c.white[sel]] - x[c.black[sel]]
            fa, fb, pd = self._game_terms(delta)
            w, l, dr = c.wins[sel], c.losses[sel], c.draws[sel]
            da = C * fa * (1 - fa)              # f'(a)
            db = C * fb * (1 - fb)
            dda = C * da * (1 - 2 * fa)          # f''(a)
            ddb = C * db * (1 - 2 * fb)
            dpd = -da + db
            ddpd = -dda - ddb
            with np.errstate(divide="ignore", invalid="ignore"):
                draw_g = np.where(dr > 0, dr * dpd / pd, 0.0)
                draw_h = np.where(dr > 0, dr * (ddpd / pd - (dpd / pd) ** 2), 0.0)
            gd = w * C * (1 - fa) - l * C * (1 - fb) + draw_g
            hd = -w * C * da - l * C * db + draw_h
            g += sign * float(gd.sum())       # d delta / d x_i = sign
            h += float(hd.sum())              # sign^2 = 1
        if self.prior > 0 and i != self.anchor:
            d = x[i] - x[self.anchor]
            fd, fm = float(f(d)), float(f(-d))
            g += 0.5 * self.prior * C * (fm - fd)
            h += -self.prior * C * C * fd * (1 - fd)
        return g, h

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return np.array([0.0 if i == self.anchor else self.derivs(x, i)[0] for i in range(self.n)])


def fit_elo(results: GameResultSet, prior_games: float = 0.5, anchor: tuple[str, float] | None = None,
            draw_elo: float = 100.0, advantage: float = 0.0, participants: Sequence[str] | None = None,
            tol: float = 1e-9, max_sweeps: int = 100_000) -> EloEstimate:
    players = list(participants) if participants is not None else list(results.participants)
    index = {p: i for i, p in enumerate(players)}
    played = {g.white_id for g in results.games} | {g.black_id for g in results.games}
    missing = [p for p in players if p not in played]
    if missing:
        raise InputError(f"participants without games: {missing}")
    if not players:
        raise InputError("no participants")
    unknown = played - set(index)
    if unknown:
        raise InputError(f"games reference unknown participants: {sorted(unknown)}")
    anchor_id, anchor_value = anchor if anchor is not None else (players[0], 0.0)
    if anchor_id not in index:
        raise InputError(f"anchor {anchor_id!r} is not a participant")
    if prior_games < 0:
        raise InputError("prior_games must be non-negative")
    if draw_elo < 0:
        raise InputError("draw_elo must be non-negative")
    if draw_elo == 0 and any(g.outcome == DRAW for g in results.games):
        raise InputError("draws have zero probability when draw_elo is 0")

    a = index[anchor_id]
    post = _Posterior(_aggregate(results, index), len(players), a, prior_games, draw_elo, advantage)
    x = np.zeros(len(players))
    trace = [float(post.value(x))]
    sweeps = 0
    while np.linalg.norm(post.gradient(x)) > tol:
        if sweeps >= max_sweeps:
            raise NumericError(f"Elo fit did not converge in {max_sweeps} sweeps")
        sweeps += 1
        for i in range(len(players)):
            if i != a:
                _newton_coordinate(post, x, i)
        trace.append(float(post.value(x)))

    ratings, plus, minus = {}, {}, {}
    for p, i in index.items():
        ratings[p] = float(x[i] - x[a]) + anchor_value
        if i == a:
            plus[p] = minus[p] = 0.0
        else:
            h = post.derivs(x, i)[1]
            plus[p] = minus[p] = 1.96 / math.sqrt(-h) if h < 0 else math.inf
    return EloEstimate(ratings, plus, minus, draw_elo, advantage, anchor_id, anchor_value,
                       prior_games, trace, sweeps)


def _newton_coordinate(post: _Posterior, x: np.ndarray, i: int, iters: int = 50) -> None:
    """Maximise the concave posterior along coordinate i; never lowers its value."""
    current = post.value(x)
    for _ in range(iters):
        g, h = post.derivs(x, i)
        if abs(g) <= 1e-13:
            return
        step = -g / h if h < 0 else math.copysign(100.0, g)
        step = max(-400.0, min(400.0, step))
        old = x[i]
        while True:
            x[i] = old + step
            val = post.value(x)
            if val >= current:
                break
            # Below the resolution of val: a step that stops short of the 1-D
            # maximum (gradient keeps its sign) is still an ascent by concavity.
            if post.derivs(x, i)[0] * g > 0:
                break
            step *= 0.5
            if abs(step) < 1e-12:
                x[i] = old
                return
        if x[i] == old:
            return
        current = val


# ---------------------------------------------------------------- rating table

TABLE_HEADER = ["Rank", "Model", "Elo", "+", "-", "Games", "Score%", "Draws%"]


def rating_rows(est: EloEstimate, results: GameResultSet) -> list[list]:
    stats = {p: [0, 0.0, 0] for p in est.ratings}   # games, points, draws
    for g in results.games:
        for pid, won in ((g.white_id, g.outcome == WHITE_WIN), (g.black_id, g.outcome == BLACK_WIN)):
            st = stats[pid]
            st[0] += 1
            st[1] += 1.0 if won else 0.5 if g.outcome == DRAW else 0.0
            st[2] += g.outcome == DRAW
    order = sorted(est.ratings, key=lambda p: (-est.ratings[p], p))
    rows = []
    for rank, p in enumerate(order, 1):
        games, pts, draws = stats[p]
        rows.append([rank, p, round(est.ratings[p]), round(est.plus[p]), round(est.minus[p]), games,
                     round(100.0 * pts / games), round(100.0 * draws / games)])
    return rows


def rating_table_csv(est: EloEstimate, results: GameResultSet) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(TABLE_HEADER)
    wr.writerows(rating_rows(est, results))
    return buf.getvalue()
