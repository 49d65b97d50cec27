"""Layer-wise policy metrics, solve-dynamics bookkeeping and percentile bands."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InputError
from .model import ActivationTrace

BANDS = (5, 25, 50, 75, 95)


def _distribution(p, name: str) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64).reshape(-1)
    if (p < 0).any():
        raise InputError(f"{name} has negative entries")
    return p


def _kl_to_mixture(p: np.ndarray, q: np.ndarray) -> float:
    # KL(p || (p+q)/2) with 0 * log 0 := 0; the ratio form stays finite for subnormal p
    nz = p > 0
    return float(np.sum(p[nz] * np.log(2.0 * p[nz] / (p[nz] + q[nz]))))


def js_divergence(p, q) -> float:
    """Jensen-Shannon divergence in nats, in [0, ln 2]."""
    p, q = _distribution(p, "p"), _distribution(q, "q")
    if p.shape != q.shape:
        raise InputError(f"support sizes differ: {p.shape} vs {q.shape}")
    jsd = 0.5 * _kl_to_mixture(p, q) + 0.5 * _kl_to_mixture(q, p)
    return min(max(jsd, 0.0), np.log(2.0))


def entropy(p) -> float:
    p = _distribution(p, "p")
    nz = p[p > 0]
    return max(float(-np.sum(nz * np.log(nz))), 0.0)


def top_move_probability(layer_p, final_p) -> float:
    """Layer probability of the final model's top move (lowest index wins ties)."""
    layer_p = np.asarray(layer_p, dtype=np.float64).reshape(-1)
    final_p = np.asarray(final_p, dtype=np.float64).reshape(-1)
    return float(layer_p[int(np.argmax(final_p))])


def kendall_tau_b(x, y) -> float:
    """Tie-corrected Kendall rank correlation; NaN when either side is constant."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise InputError("kendall_tau_b needs two equal-length vectors")
    if x.size < 2:
        return float("nan")
    iu = np.triu_indices(x.size, k=1)
    dx = np.sign(x[:, None] - x[None, :])[iu]
    dy = np.sign(y[:, None] - y[None, :])[iu]
    s = float(np.sum(dx * dy))
    n_x = float(np.count_nonzero(dx))     # pairs not tied in x
    n_y = float(np.count_nonzero(dy))
    if n_x == 0 or n_y == 0:
        return float("nan")
    return max(-1.0, min(1.0, s / np.sqrt(n_x * n_y)))


def top_k_indices(scores, k: int) -> np.ndarray:
    """Indices ranked within the top ``k`` (stable: lower index first on ties)."""
    scores = np.asarray(scores, dtype=np.float64)
    return np.argsort(-scores, kind="stable")[:k]


def kendall_tau(x, y, filter: str = "all", k: int = 5, union=None) -> float:
    """tau-b over all items, or over the union of top-k items.

    ``union`` overrides the gathered index set (the report level passes the
    top-k union across all stages of a position). Fewer than two items gives NaN.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if filter == "all":
        idx = np.arange(x.size)
    elif filter == "top_k_union":
        idx = np.asarray(sorted(set(top_k_indices(x, k)) | set(top_k_indices(y, k)))
                         if union is None else sorted(union), dtype=int)
    else:
        raise InputError(f"unknown kendall filter {filter!r}")
    if idx.size < 2:
        return float("nan")
    return kendall_tau_b(x[idx], y[idx])


def mlp_output_norm(trace: ActivationTrace, layer: int) -> float:
    """Mean over tokens of the L2 norm of the layer's raw FFN output."""
    if not 0 <= layer < trace.config.layers:
        raise InputError(f"layer {layer} outside [0, {trace.config.layers - 1}]")
    raw = trace.record(layer, "ffn").raw
    return float(np.linalg.norm(raw, axis=1).mean())


# ---------------------------------------------------------------- solve dynamics

@dataclass(frozen=True, eq=False)
class SolveMatrix:
    solved: np.ndarray               # (puzzles, stages) bool
    stages: tuple[int, ...]

    def __post_init__(self):
        s = np.asarray(self.solved, dtype=bool)
        if s.ndim != 2 or s.shape[1] != len(self.stages):
            raise InputError(f"solve matrix shape {s.shape} does not match {len(self.stages)} stages")
        object.__setattr__(self, "solved", s)


def solve_dynamics(m: SolveMatrix | np.ndarray) -> dict[str, np.ndarray]:
    s = np.asarray(m.solved if isinstance(m, SolveMatrix) else m, dtype=bool)
    if s.size == 0:
        raise InputError("empty solve matrix")
    ever = np.logical_or.accumulate(s, axis=1)
    stays = np.logical_and.accumulate(s[:, ::-1], axis=1)[:, ::-1]
    before = np.concatenate([np.zeros((s.shape[0], 1), bool), ever[:, :-1]], axis=1)
    return {
        "current": s.mean(axis=0),
        "cumulative": ever.mean(axis=0),
        "converged": stays.mean(axis=0),
        "first": (s & ~before).mean(axis=0),
    }


# ---------------------------------------------------------------- bands

@dataclass
class MetricSeries:
    name: str
    stages: list[int]
    values: list[np.ndarray]         # per stage, per position (NaN = undefined)
    bands: np.ndarray                # (stages, 5): p5, p25, p50, p75, p95; NaN rows for empty stages
    counts: list[int]

    def band(self, pct: int) -> np.ndarray:
        return self.bands[:, BANDS.index(pct)]

    @property
    def empty_stages(self) -> list[int]:
        return [s for s, n in zip(self.stages, self.counts) if n == 0]


def percentile_bands(values_per_stage: Sequence[Sequence[float]], stages: Sequence[int] | None = None,
                     name: str = "") -> MetricSeries:
    stages = list(stages) if stages is not None else list(range(-1, len(values_per_stage) - 1))
    if len(stages) != len(values_per_stage):
        raise InputError("stages and values differ in length")
    vals, rows, counts = [], [], []
    for v in values_per_stage:
        v = np.asarray(v, dtype=np.float64).reshape(-1)
        vals.append(v)
        ok = v[np.isfinite(v)]
        counts.append(int(ok.size))
        rows.append(np.percentile(ok, BANDS) if ok.size else np.full(len(BANDS), np.nan))
    return MetricSeries(name, stages, vals, np.asarray(rows).reshape(len(stages), len(BANDS)), counts)


# ---------------------------------------------------------------- report level

METRIC_NAMES = ("jsd", "entropy", "top_move_prob", "kendall_all", "kendall_topk", "mlp_norm")


def report_metrics(report, top_k: int = 5) -> dict[str, MetricSeries]:
    """Every metric for a :class:`~postln_lens.lens.LensReport`, banded per stage."""
    stages = report.stages
    per = {name: [[] for _ in stages] for name in METRIC_NAMES}
    for p_i, row in enumerate(report.policies):
        final = row[-1].legal_probs()
        layer_probs = [pol.legal_probs() for pol in row]
        union = set()
        for lp in layer_probs:
            union |= set(top_k_indices(lp, top_k).tolist())
        norms = report.mlp_norms[p_i] if report.mlp_norms else None
        for s_i, lp in enumerate(layer_probs):
            per["jsd"][s_i].append(js_divergence(lp, final))
            per["entropy"][s_i].append(entropy(lp))
            per["top_move_prob"][s_i].append(top_move_probability(lp, final))
            per["kendall_all"][s_i].append(kendall_tau(lp, final, "all"))
            per["kendall_topk"][s_i].append(kendall_tau(lp, final, "top_k_union", union=union))
            stage = stages[s_i]
            norm = None if norms is None or stage < 0 else norms[stage]
            per["mlp_norm"][s_i].append(np.nan if norm is None else norm)
    return {name: percentile_bands(v, stages, name) for name, v in per.items()}
