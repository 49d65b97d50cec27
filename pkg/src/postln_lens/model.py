"""Post-LN/DeepNorm transformer encoder over 64 board tokens, plus a Pre-LN twin.

The forward pass keeps every sublayer output split into its input-dependent
part (``raw``) and its constant bias path (``bias``) so that the residual
stream can later be decomposed term by term.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Mapping

import numpy as np

from .errors import ConfigError
from .linalg import (
    LayerNormParams,
    NormStats,
    _frozen,
    layer_norm,
    mish,
    row_softmax,
    softmax_masked,
    squared_relu,
    swish,
)

TOKENS = 64
POSTLN = "postln_deepnorm"
PRELN = "preln"
NORM_STYLES = (POSTLN, PRELN)


@dataclass(frozen=True)
class SmolgenConfig:
    compress: int = 4
    hidden: int = 32


@dataclass(frozen=True)
class ModelConfig:
    layers: int = 4
    d_model: int = 32
    heads: int = 4
    ffn_dim: int = 48
    planes: int = 4
    norm_style: str = POSTLN
    smolgen: SmolgenConfig | None = None
    seed: int = 0

    def __post_init__(self):
        for name in ("layers", "d_model", "heads", "ffn_dim", "planes"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        if self.d_model % self.heads:
            raise ConfigError(f"d_model={self.d_model} is not divisible by heads={self.heads}")
        if self.norm_style not in NORM_STYLES:
            raise ConfigError(f"norm_style must be one of {NORM_STYLES}, got {self.norm_style!r}")
        if not isinstance(self.seed, (int, np.integer)) or self.seed < 0:
            raise ConfigError(f"seed must be an unsigned integer, got {self.seed!r}")
        if self.smolgen is not None and (self.smolgen.compress < 1 or self.smolgen.hidden < 1):
            raise ConfigError("smolgen sizes must be positive")

    @property
    def head_dim(self) -> int:
        return self.d_model // self.heads

    @property
    def alpha(self) -> float:
        """DeepNorm residual scale (2N)^(1/4); 1 for the Pre-LN twin."""
        if self.norm_style == POSTLN:
            return (2.0 * self.layers) ** 0.25
        return 1.0

    @property
    def is_postln(self) -> bool:
        return self.norm_style == POSTLN

    def to_dict(self) -> dict[str, Any]:
        return {
            "layers": self.layers,
            "d_model": self.d_model,
            "heads": self.heads,
            "head_dim": self.head_dim,
            "ffn_dim": self.ffn_dim,
            "planes": self.planes,
            "norm_style": self.norm_style,
            "smolgen": None if self.smolgen is None else
            {"compress": self.smolgen.compress, "hidden": self.smolgen.hidden},
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ModelConfig":
        d = dict(d)
        head_dim = d.pop("head_dim", None)
        smol = d.pop("smolgen", None)
        unknown = set(d) - {"layers", "d_model", "heads", "ffn_dim", "planes", "norm_style", "seed"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if smol is True:
            smol = SmolgenConfig()
        elif isinstance(smol, Mapping):
            smol = SmolgenConfig(**smol)
        elif smol not in (None, False):
            raise ConfigError(f"bad smolgen entry {smol!r}")
        cfg = cls(smolgen=smol or None, **d)
        if head_dim is not None and head_dim != cfg.head_dim:
            raise ConfigError(f"head_dim={head_dim} but d_model/heads={cfg.head_dim}")
        return cfg


@dataclass(frozen=True, eq=False)
class SmolgenWeights:
    compress: np.ndarray      # d x g, applied per token
    dense1: np.ndarray        # 64g x hidden
    dense1_b: np.ndarray
    dense2: np.ndarray        # hidden x hidden
    dense2_b: np.ndarray
    emit: np.ndarray          # hidden x heads*64*64


@dataclass(frozen=True, eq=False)
class LayerWeights:
    w_q: np.ndarray
    w_k: np.ndarray
    w_v: np.ndarray
    b_v: np.ndarray
    w_o: np.ndarray
    b_o: np.ndarray
    ffn_w1: np.ndarray
    ffn_b1: np.ndarray
    ffn_w2: np.ndarray
    ffn_b2: np.ndarray
    ln1: LayerNormParams      # post-MHA (Post-LN) / pre-MHA (Pre-LN)
    ln2: LayerNormParams      # post-FFN (Post-LN) / pre-FFN (Pre-LN)
    smolgen: SmolgenWeights | None = None


@dataclass(frozen=True, eq=False)
class WeightSet:
    config: ModelConfig
    input_w: np.ndarray       # (P+64) x d
    input_b: np.ndarray
    input_scale: np.ndarray
    input_shift: np.ndarray
    layers: tuple[LayerWeights, ...]
    policy_w: np.ndarray      # d x d shared per-token MLP
    policy_b: np.ndarray
    src_w: np.ndarray
    src_b: np.ndarray
    tgt_w: np.ndarray
    tgt_b: np.ndarray
    final_ln: LayerNormParams | None = None

    def to_params(self) -> dict[str, np.ndarray]:
        out = {
            "input.w": self.input_w, "input.b": self.input_b,
            "input.scale": self.input_scale, "input.shift": self.input_shift,
        }
        for i, lw in enumerate(self.layers):
            p = f"layers.{i}."
            for name in ("w_q", "w_k", "w_v", "b_v", "w_o", "b_o", "ffn_w1", "ffn_b1", "ffn_w2", "ffn_b2"):
                out[p + name] = getattr(lw, name)
            out[p + "ln1.gamma"], out[p + "ln1.beta"] = lw.ln1.gamma, lw.ln1.beta
            out[p + "ln2.gamma"], out[p + "ln2.beta"] = lw.ln2.gamma, lw.ln2.beta
            if lw.smolgen is not None:
                for name in ("compress", "dense1", "dense1_b", "dense2", "dense2_b", "emit"):
                    out[p + "smolgen." + name] = getattr(lw.smolgen, name)
        if self.final_ln is not None:
            out["final_ln.gamma"], out["final_ln.beta"] = self.final_ln.gamma, self.final_ln.beta
        for name in ("policy_w", "policy_b", "src_w", "src_b", "tgt_w", "tgt_b"):
            out["policy." + name.replace("policy_", "")] = getattr(self, name)
        return out

    def with_params(self, updates: Mapping[str, np.ndarray]) -> "WeightSet":
        """Copy with some named arrays replaced (names as in :meth:`to_params`)."""
        params = self.to_params()
        missing = set(updates) - set(params)
        if missing:
            raise ConfigError(f"unknown parameter names: {sorted(missing)}")
        params.update(updates)
        return weights_from_params(self.config, params)


def param_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    d, f, P = cfg.d_model, cfg.ffn_dim, cfg.planes
    shapes: dict[str, tuple[int, ...]] = {
        "input.w": (P + TOKENS, d), "input.b": (d,),
        "input.scale": (d,), "input.shift": (d,),
    }
    for i in range(cfg.layers):
        p = f"layers.{i}."
        shapes.update({
            p + "w_q": (d, d), p + "w_k": (d, d), p + "w_v": (d, d), p + "b_v": (d,),
            p + "w_o": (d, d), p + "b_o": (d,),
            p + "ffn_w1": (d, f), p + "ffn_b1": (f,), p + "ffn_w2": (f, d), p + "ffn_b2": (d,),
            p + "ln1.gamma": (d,), p + "ln1.beta": (d,),
            p + "ln2.gamma": (d,), p + "ln2.beta": (d,),
        })
        if cfg.smolgen is not None:
            g, hid = cfg.smolgen.compress, cfg.smolgen.hidden
            shapes.update({
                p + "smolgen.compress": (d, g),
                p + "smolgen.dense1": (TOKENS * g, hid), p + "smolgen.dense1_b": (hid,),
                p + "smolgen.dense2": (hid, hid), p + "smolgen.dense2_b": (hid,),
                p + "smolgen.emit": (hid, cfg.heads * TOKENS * TOKENS),
            })
    if cfg.norm_style == PRELN:
        shapes["final_ln.gamma"] = (d,)
        shapes["final_ln.beta"] = (d,)
    shapes.update({
        "policy.w": (d, d), "policy.b": (d,),
        "policy.src_w": (d, d), "policy.src_b": (d,),
        "policy.tgt_w": (d, d), "policy.tgt_b": (d,),
    })
    return shapes


def weights_from_params(cfg: ModelConfig, params: Mapping[str, Any]) -> WeightSet:
    shapes = param_shapes(cfg)
    extra = set(params) - set(shapes)
    missing = set(shapes) - set(params)
    if extra or missing:
        raise ConfigError(f"parameter names do not match config (missing={sorted(missing)}, extra={sorted(extra)})")
    arr: dict[str, np.ndarray] = {}
    for name, shape in shapes.items():
        a = _frozen(params[name])
        if a.shape != shape:
            raise ConfigError(f"{name}: expected shape {shape}, got {a.shape}")
        if not np.isfinite(a).all():
            raise ConfigError(f"{name}: non-finite entries")
        arr[name] = a

    layers = []
    for i in range(cfg.layers):
        p = f"layers.{i}."
        smol = None
        if cfg.smolgen is not None:
            smol = SmolgenWeights(**{n: arr[p + "smolgen." + n] for n in
                                     ("compress", "dense1", "dense1_b", "dense2", "dense2_b", "emit")})
        layers.append(LayerWeights(
            **{n: arr[p + n] for n in ("w_q", "w_k", "w_v", "b_v", "w_o", "b_o",
                                       "ffn_w1", "ffn_b1", "ffn_w2", "ffn_b2")},
            ln1=LayerNormParams(arr[p + "ln1.gamma"], arr[p + "ln1.beta"]),
            ln2=LayerNormParams(arr[p + "ln2.gamma"], arr[p + "ln2.beta"]),
            smolgen=smol,
        ))
    final_ln = None
    if cfg.norm_style == PRELN:
        final_ln = LayerNormParams(arr["final_ln.gamma"], arr["final_ln.beta"])
    return WeightSet(
        config=cfg,
        input_w=arr["input.w"], input_b=arr["input.b"],
        input_scale=arr["input.scale"], input_shift=arr["input.shift"],
        layers=tuple(layers),
        policy_w=arr["policy.w"], policy_b=arr["policy.b"],
        src_w=arr["policy.src_w"], src_b=arr["policy.src_b"],
        tgt_w=arr["policy.tgt_w"], tgt_b=arr["policy.tgt_b"],
        final_ln=final_ln,
    )


# Sublayer output projections that DeepNorm shrinks at init.
_DEEPNORM_SCALED = ("w_v", "w_o", "ffn_w1", "ffn_w2")


def init_model(cfg: ModelConfig) -> WeightSet:
    """Seeded random weights. Matrices ~ N(0, 1/sqrt(d_model)); biases and betas ~ N(0, 0.1);
    gammas and the input scale ~ 1 + N(0, 0.1)."""
    rng = np.random.default_rng(cfg.seed)
    std = 1.0 / np.sqrt(cfg.d_model)
    down = (2.0 * cfg.layers) ** -0.25 if cfg.is_postln else 1.0
    params = {}
    for name, shape in param_shapes(cfg).items():
        leaf = name.rsplit(".", 1)[-1]
        if leaf in ("gamma", "scale"):
            a = 1.0 + 0.1 * rng.standard_normal(shape)
        elif len(shape) == 1:
            a = 0.1 * rng.standard_normal(shape)
        else:
            a = std * rng.standard_normal(shape)
            if leaf in _DEEPNORM_SCALED:
                a = a * down
        params[name] = a
    return weights_from_params(cfg, params)


def zero_weights(cfg: ModelConfig) -> WeightSet:
    """All arrays zero except layer-norm gammas and the input scale, which are one."""
    params = {}
    for name, shape in param_shapes(cfg).items():
        leaf = name.rsplit(".", 1)[-1]
        params[name] = np.ones(shape) if leaf in ("gamma", "scale") else np.zeros(shape)
    return weights_from_params(cfg, params)


def prepare_input(planes: np.ndarray, posenc: np.ndarray, w: WeightSet) -> np.ndarray:
    planes = np.asarray(planes)
    posenc = np.asarray(posenc, dtype=np.float64)
    cfg = w.config
    if planes.shape != (TOKENS, cfg.planes):
        raise ConfigError(f"planes must be {(TOKENS, cfg.planes)}, got {planes.shape}")
    if posenc.shape != (TOKENS, TOKENS):
        raise ConfigError(f"posenc must be {(TOKENS, TOKENS)}, got {posenc.shape}")
    if not np.isin(posenc, (-1.0, 0.0, 1.0)).all():
        raise ConfigError("posenc entries must be in {-1, 0, 1}")
    x = np.concatenate([planes.astype(np.float64), posenc], axis=1)
    return w.input_scale * mish(x @ w.input_w + w.input_b) + w.input_shift


# ---------------------------------------------------------------- ablation

FULL = "full"
LENS_DEFAULT = "lens_default"
LENS_KEEP_BETA = "lens_keep_beta"


@dataclass(frozen=True)
class AblationSpec:
    keep_through: int
    zero_mha: tuple[bool, ...]
    zero_ffn: tuple[bool, ...]
    zero_ln_beta: tuple[bool, ...]
    mode: str = FULL

    def __post_init__(self):
        n = len(self.zero_mha)
        if len(self.zero_ffn) != n or len(self.zero_ln_beta) != n:
            raise ConfigError("ablation flag vectors differ in length")
        if not -1 <= self.keep_through <= n - 1:
            raise ConfigError(f"keep_through={self.keep_through} outside [-1, {n - 1}]")
        if self.mode == LENS_DEFAULT:
            expect = tuple(l > self.keep_through for l in range(n))
            if not (self.zero_mha == self.zero_ffn == self.zero_ln_beta == expect):
                raise ConfigError("lens_default must ablate sublayers and LN beta exactly for layers > k")

    @property
    def n_layers(self) -> int:
        return len(self.zero_mha)

    @classmethod
    def full(cls, n_layers: int) -> "AblationSpec":
        off = (False,) * n_layers
        return cls(n_layers - 1, off, off, off, FULL)

    @classmethod
    def lens(cls, n_layers: int, k: int, keep_beta: bool = False) -> "AblationSpec":
        if not -1 <= k <= n_layers - 1:
            raise ConfigError(f"stage {k} outside [-1, {n_layers - 1}]")
        cut = tuple(l > k for l in range(n_layers))
        if keep_beta:
            return cls(k, cut, cut, (False,) * n_layers, LENS_KEEP_BETA)
        return cls(k, cut, cut, cut, LENS_DEFAULT)


# ---------------------------------------------------------------- forward

@dataclass(frozen=True, eq=False)
class SublayerRecord:
    layer: int
    kind: str                 # "mha" or "ffn"
    raw: np.ndarray           # input-dependent sublayer output, no constant bias
    bias: np.ndarray          # constant bias path (length d); zero when ablated
    residual: np.ndarray      # Post-LN: alpha*h + raw + bias before norm; Pre-LN: updated stream
    stats: NormStats          # statistics of this sublayer's layer norm
    out: np.ndarray           # hidden state after the sublayer


@dataclass(frozen=True, eq=False)
class ActivationTrace:
    config: ModelConfig
    ablation: AblationSpec
    h0: np.ndarray
    sublayers: tuple[SublayerRecord, ...]
    final_h: np.ndarray
    logits: np.ndarray        # 64 x 64 unmasked policy logits
    final_stats: NormStats | None = None

    def hidden(self, k: int) -> np.ndarray:
        """Residual-stream state after layer ``k`` (``h0`` for k = -1)."""
        if k == -1:
            return self.h0
        return self.sublayers[2 * k + 1].out

    def record(self, layer: int, kind: str) -> SublayerRecord:
        return self.sublayers[2 * layer + (0 if kind == "mha" else 1)]


def smolgen_logits(x: np.ndarray, sw: SmolgenWeights, cfg: ModelConfig) -> np.ndarray:
    g = (x @ sw.compress).reshape(-1)
    a = swish(g @ sw.dense1 + sw.dense1_b)
    a = swish(a @ sw.dense2 + sw.dense2_b)
    return (a @ sw.emit).reshape(cfg.heads, TOKENS, TOKENS)


def attention(x: np.ndarray, lw: LayerWeights, cfg: ModelConfig) -> tuple[np.ndarray, np.ndarray]:
    """Bidirectional multi-head attention split as (raw, bias).

    Attention rows sum to one, so the value bias passes through unchanged and
    joins the output bias as the constant ``b_v @ W_o + b_o``.
    """
    H, hd = cfg.heads, cfg.head_dim
    q = (x @ lw.w_q).reshape(TOKENS, H, hd).transpose(1, 0, 2)
    k = (x @ lw.w_k).reshape(TOKENS, H, hd).transpose(1, 0, 2)
    v = (x @ lw.w_v).reshape(TOKENS, H, hd).transpose(1, 0, 2)
    scores = q @ k.transpose(0, 2, 1) / np.sqrt(hd)
    if lw.smolgen is not None:
        scores = scores + smolgen_logits(x, lw.smolgen, cfg)
    a = row_softmax(scores)
    o = (a @ v).transpose(1, 0, 2).reshape(TOKENS, cfg.d_model)
    return o @ lw.w_o, lw.b_v @ lw.w_o + lw.b_o


def feed_forward(x: np.ndarray, lw: LayerWeights) -> tuple[np.ndarray, np.ndarray]:
    return squared_relu(x @ lw.ffn_w1 + lw.ffn_b1) @ lw.ffn_w2, lw.ffn_b2


def policy_logits(final_h: np.ndarray, w: WeightSet) -> np.ndarray:
    p = mish(final_h @ w.policy_w + w.policy_b)
    src = p @ w.src_w + w.src_b
    tgt = p @ w.tgt_w + w.tgt_b
    return src @ tgt.T


def forward(w: WeightSet, h0: np.ndarray, ablation: AblationSpec | None = None) -> ActivationTrace:
    cfg = w.config
    h0 = np.asarray(h0, dtype=np.float64)
    if h0.shape != (TOKENS, cfg.d_model):
        raise ConfigError(f"h0 must be {(TOKENS, cfg.d_model)}, got {h0.shape}")
    ab = ablation if ablation is not None else AblationSpec.full(cfg.layers)
    if ab.n_layers != cfg.layers:
        raise ConfigError(f"ablation covers {ab.n_layers} layers, model has {cfg.layers}")
    d = cfg.d_model
    zero_raw, zero_bias = np.zeros((TOKENS, d)), np.zeros(d)
    alpha = cfg.alpha
    h = h0
    records: list[SublayerRecord] = []

    for l, lw in enumerate(w.layers):
        sublayers = (
            ("mha", lambda x: attention(x, lw, cfg), ab.zero_mha[l], lw.ln1),
            ("ffn", lambda x: feed_forward(x, lw), ab.zero_ffn[l], lw.ln2),
        )
        for kind, fn, ablated, ln in sublayers:
            if ab.zero_ln_beta[l]:
                ln = ln.without_beta()
            if cfg.is_postln:
                raw, bias = (zero_raw, zero_bias) if ablated else fn(h)
                resid = alpha * h + raw + bias
                h, stats = layer_norm(resid, ln)
                records.append(SublayerRecord(l, kind, raw, bias, resid, stats, h))
            else:
                x, stats = layer_norm(h, ln)
                raw, bias = (zero_raw, zero_bias) if ablated else fn(x)
                h = h + raw + bias
                records.append(SublayerRecord(l, kind, raw, bias, h, stats, h))

    final_stats = None
    if cfg.is_postln:
        final_h = h
    else:
        final_h, final_stats = layer_norm(h, w.final_ln)
    return ActivationTrace(cfg, ab, h0, tuple(records), final_h, policy_logits(final_h, w), final_stats)


# ---------------------------------------------------------------- policy

@dataclass(frozen=True, eq=False)
class PolicyDistribution:
    probs: np.ndarray         # 64 x 64
    legal: np.ndarray         # 64 x 64 bool
    stage: int | None = None

    def argmax(self) -> int:
        """Flat source*64+target index of the most probable legal move (lowest index on ties)."""
        return int(np.argmax(np.where(self.legal, self.probs, -np.inf)))

    def legal_probs(self) -> np.ndarray:
        return self.probs[self.legal]


def policy_from_logits(logits: np.ndarray, legal: np.ndarray, stage: int | None = None) -> PolicyDistribution:
    legal = np.asarray(legal, dtype=bool)
    if legal.shape != (TOKENS, TOKENS):
        raise ConfigError(f"legal mask must be 64x64, got {legal.shape}")
    probs = softmax_masked(logits, legal)
    probs.flags.writeable = False
    return PolicyDistribution(probs, legal, stage)


def policy_head(final_h: np.ndarray, w: WeightSet, legal: np.ndarray, stage: int | None = None) -> PolicyDistribution:
    return policy_from_logits(policy_logits(final_h, w), legal, stage)
