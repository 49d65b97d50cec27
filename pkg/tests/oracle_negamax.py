"""Independent Crossing rules and plain negamax, written apart from the package for cross-checking.

Boards are 64-character strings over ".wb", square index = rank*8 + file.
"""

STEPS = [(dr, df) for dr in (-1, 0, 1) for df in (-1, 0, 1) if dr or df]


def result(board, ply, halfmove):
    """'w', 'b', 'draw' or None."""
    if "w" in board[56:64]:
        return "w"
    if "b" in board[0:8]:
        return "b"
    if "w" not in board:
        return "b"
    if "b" not in board:
        return "w"
    if halfmove >= 100 or ply >= 400:
        return "draw"
    return None


def moves(board, side):
    out = []
    for sq, c in enumerate(board):
        if c != side:
            continue
        r, f = divmod(sq, 8)
        for dr, df in STEPS:
            rr, ff = r + dr, f + df
            if 0 <= rr < 8 and 0 <= ff < 8 and board[rr * 8 + ff] != side:
                out.append(sq * 64 + rr * 8 + ff)
    return sorted(out)


def play(board, side, ply, halfmove, move):
    src, dst = divmod(move, 64)
    cells = list(board)
    captured = cells[dst] != "."
    cells[dst] = side
    cells[src] = "."
    return "".join(cells), ("b" if side == "w" else "w"), ply + 1, 0 if captured else halfmove + 1


def wins_within(board, side, ply, halfmove, n):
    """Can ``side`` (to move) force a win on one of its own moves within n plies?"""
    if n < 1 or result(board, ply, halfmove) is not None:
        return False
    for m in moves(board, side):
        b2, s2, p2, h2 = play(board, side, ply, halfmove, m)
        res = result(b2, p2, h2)
        if res == side:
            return True
        if res is not None or n < 3:
            continue
        ok = True
        for r in moves(b2, s2):
            b3, s3, p3, h3 = play(b2, s2, p2, h2, r)
            if result(b3, p3, h3) is not None or not wins_within(b3, s3, p3, h3, n - 2):
                ok = False
                break
        if ok:
            return True
    return False


def shortest(board, side, ply, halfmove, depth):
    for n in range(1, depth + 1, 2):
        if wins_within(board, side, ply, halfmove, n):
            return n
    return None


def move_wins(board, side, ply, halfmove, move, n):
    b2, s2, p2, h2 = play(board, side, ply, halfmove, move)
    res = result(b2, p2, h2)
    if res == side:
        return True
    if res is not None or n < 3:
        return False
    for r in moves(b2, s2):
        b3, s3, p3, h3 = play(b2, s2, p2, h2, r)
        if result(b3, p3, h3) is not None or not wins_within(b3, s3, p3, h3, n - 2):
            return False
    return True
