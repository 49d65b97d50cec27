"""Per-stage policies from zero-ablation forward passes.

Stage ``k`` keeps the sublayers of layers ``0..k`` and zeroes every later
sublayer output (with its bias path). The later layer norms and the DeepNorm
residual scale still run, with statistics recomputed on the truncated stream.
Stage -1 is the prepared input embedding; stage N-1 is the full model.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, FormatError, InputError, LensError
from .linalg import layer_norm
from .model import (
    TOKENS,
    AblationSpec,
    PolicyDistribution,
    WeightSet,
    forward,
    policy_head,
)
from .squares import move_name, parse_move

MODES = ("default", "keep_beta")


def normalize_mode(mode: str) -> str:
    m = mode.replace("-", "_")
    if m in ("default_beta_ablated", "lens_default"):
        m = "default"
    if m == "lens_keep_beta":
        m = "keep_beta"
    if m not in MODES:
        raise InputError(f"unknown lens mode {mode!r}; expected one of {MODES}")
    return m


def stage_label(k: int, n_layers: int) -> str:
    if k == -1:
        return "input"
    if k == n_layers - 1:
        return "full"
    return f"L{k}"


def lens_ablation(w: WeightSet, k: int, mode: str = "default") -> AblationSpec:
    n = w.config.layers
    if not -1 <= k <= n - 1:
        raise InputError(f"stage {k} outside [-1, {n - 1}]")
    return AblationSpec.lens(n, k, keep_beta=normalize_mode(mode) == "keep_beta")


def lens_policy(w: WeightSet, h0: np.ndarray, legal: np.ndarray, k: int,
                mode: str = "default") -> PolicyDistribution:
    trace = forward(w, h0, lens_ablation(w, k, mode))
    return policy_head(trace.final_h, w, legal, stage=k)


def preln_lens_direct(w: WeightSet, h0: np.ndarray, legal: np.ndarray, k: int) -> PolicyDistribution:
    """Classic Pre-LN lens: final layer norm and policy head applied to the stream after layer k."""
    cfg = w.config
    if cfg.is_postln:
        raise ConfigError("preln_lens_direct needs a Pre-LN model")
    if not -1 <= k <= cfg.layers - 1:
        raise InputError(f"stage {k} outside [-1, {cfg.layers - 1}]")
    trace = forward(w, h0)
    final_h, _ = layer_norm(trace.hidden(k), w.final_ln)
    return policy_head(final_h, w, legal, stage=k)


@dataclass
class LensReport:
    n_layers: int
    mode: str
    position_ids: list
    policies: list[list[PolicyDistribution]]
    # per position, per layer: mean token L2 norm of the full model's FFN output
    mlp_norms: list[list[float]] = field(default_factory=list)

    @property
    def stages(self) -> list[int]:
        return list(range(-1, self.n_layers))

    @property
    def full_stage(self) -> int:
        return self.n_layers - 1

    def __len__(self) -> int:
        return len(self.policies)


def lens_sweep(w: WeightSet, positions: Sequence[tuple[np.ndarray, np.ndarray]],
               mode: str = "default", position_ids: Sequence | None = None) -> LensReport:
    """Run every stage for every ``(h0, legal)`` pair."""
    from .metrics import mlp_output_norm

    mode = normalize_mode(mode)
    if not positions:
        raise InputError("lens_sweep needs at least one position")
    ids = list(position_ids) if position_ids is not None else list(range(len(positions)))
    if len(ids) != len(positions):
        raise InputError("position_ids and positions differ in length")
    n = w.config.layers
    policies, norms = [], []
    for i, (h0, legal) in enumerate(positions):
        try:
            policies.append([lens_policy(w, h0, legal, k, mode) for k in range(-1, n)])
            full = forward(w, h0)
            norms.append([mlp_output_norm(full, l) for l in range(n)])
        except LensError as e:
            raise type(e)(f"position {ids[i]}: {e}") from e
    return LensReport(n, mode, ids, policies, norms)


# ---------------------------------------------------------------- JSON lines

def report_records(report: LensReport) -> Iterable[dict]:
    for pid, row, norms in zip(report.position_ids, report.policies,
                               report.mlp_norms or [None] * len(report)):
        for pol in row:
            idx = np.flatnonzero(pol.legal.reshape(-1))
            yield {
                "position_id": pid,
                "stage": pol.stage,
                "label": stage_label(pol.stage, report.n_layers),
                "is_full": pol.stage == report.full_stage,
                "n_layers": report.n_layers,
                "mode": report.mode,
                "legal": [move_name(int(m)) for m in idx],
                "probs": pol.probs.reshape(-1)[idx].tolist(),
                "mlp_norm": None if norms is None or pol.stage < 0 else norms[pol.stage],
            }


def dumps_report(report: LensReport) -> str:
    return "".join(json.dumps(r, separators=(",", ":")) + "\n" for r in report_records(report))


def loads_report(text: str) -> LensReport:
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            rows.append(json.loads(line))
        except json.JSONDecodeError as e:
            raise FormatError(f"report line {lineno}: {e}") from None
    if not rows:
        raise InputError("empty lens report")
    try:
        n = int(rows[0]["n_layers"])
        mode = rows[0]["mode"]
        order: list = []
        by_pos: dict = {}
        for r in rows:
            pid = r["position_id"]
            key = json.dumps(pid)
            if key not in by_pos:
                by_pos[key] = {}
                order.append(pid)
            legal = np.zeros(TOKENS * TOKENS, dtype=bool)
            probs = np.zeros(TOKENS * TOKENS)
            idx = [parse_move(m) for m in r["legal"]]
            legal[idx] = True
            probs[idx] = r["probs"]
            by_pos[key][int(r["stage"])] = (
                PolicyDistribution(probs.reshape(TOKENS, TOKENS), legal.reshape(TOKENS, TOKENS), int(r["stage"])),
                r.get("mlp_norm"),
            )
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"malformed lens report record: {e!r}") from None
    policies, norms = [], []
    for pid in order:
        stages = by_pos[json.dumps(pid)]
        if sorted(stages) != list(range(-1, n)):
            raise FormatError(f"position {pid}: stages {sorted(stages)} do not cover -1..{n - 1}")
        policies.append([stages[k][0] for k in range(-1, n)])
        norms.append([stages[k][1] for k in range(0, n)])
    return LensReport(n, mode, order, policies, norms)
