"""Toy board game, puzzle oracle, tournaments and Elo."""
from .elo import EloEstimate, fit_elo, rating_table_csv
from .encoding import encode_planes, movement_posenc, stage_policy, state_input
from .game import GameState, apply_move, is_terminal, legal_moves, move_list
from .puzzles import Puzzle, eval_puzzles, generate_puzzles
from .solver import SolveResult, minimax_solve
from .tournament import GameRecord, GameResultSet, round_robin

__all__ = [
    "EloEstimate", "fit_elo", "rating_table_csv",
    "encode_planes", "movement_posenc", "stage_policy", "state_input",
    "GameState", "apply_move", "is_terminal", "legal_moves", "move_list",
    "Puzzle", "eval_puzzles", "generate_puzzles",
    "SolveResult", "minimax_solve",
    "GameRecord", "GameResultSet", "round_robin",
]
