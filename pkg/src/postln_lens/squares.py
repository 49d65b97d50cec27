"""Square and move naming: index = rank*8 + file, "a1" = 0, "h8" = 63; move index = source*64 + target."""
from __future__ import annotations

from .errors import InputError

FILES = "abcdefgh"


def square_name(sq: int) -> str:
    return f"{FILES[sq % 8]}{sq // 8 + 1}"


def parse_square(name: str) -> int:
    if len(name) != 2 or name[0] not in FILES or name[1] not in "12345678":
        raise InputError(f"bad square {name!r}")
    return (int(name[1]) - 1) * 8 + FILES.index(name[0])


def move_name(move: int) -> str:
    return square_name(move // 64) + square_name(move % 64)


def parse_move(text: str) -> int:
    if len(text) != 4:
        raise InputError(f"bad move {text!r}")
    return parse_square(text[:2]) * 64 + parse_square(text[2:])
