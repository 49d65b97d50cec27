"""Closed-form decomposition of the Post-LN/DeepNorm encoder output.

Write sublayer j (j = 0..2N-1, MHA then FFN per layer) as

    x_j = s_j * (alpha * x_{j-1} + u_j) + beta_j,   s_j = gamma_j / sigma_j,
    u_j = raw_j + bias_j - mu_j

Unrolling gives

    x_{2N-1} = alpha^{2N} P_0 * h0
             + sum_j alpha^{2N-1-j} P_j * (raw_j + bias_j - mu_j)
             + sum_j alpha^{2N-1-j} P_{j+1} * beta_j,

with suffix products P_j = prod_{j' >= j} s_{j'} taken per token and P_{2N} = 1.
The five returned terms group these summands into input, MHA, FFN, bias and
mean-centering parts. Sublayer and bias sums stop at layer ``upto``; LN betas
of later layers enter only when the trace kept them.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .lens import lens_ablation
from .model import ActivationTrace, WeightSet, forward


@dataclass(frozen=True, eq=False)
class DecompositionTerms:
    i_term: np.ndarray
    z_mha: np.ndarray
    z_ffn: np.ndarray
    b_term: np.ndarray
    m_term: np.ndarray
    upto: int
    alpha: float
    # Per-sublayer scalar-prefix ledgers, index j over the 2N sublayers.
    sublayer_coef: np.ndarray   # (2N, 64, d): alpha^{2N-1-j} * P_j
    beta_coef: np.ndarray       # (2N, 64, d): alpha^{2N-1-j} * P_{j+1}
    mu: np.ndarray              # (2N, 64)
    sigma: np.ndarray           # (2N, 64)

    def reconstruct(self) -> np.ndarray:
        return self.i_term + self.z_mha + self.z_ffn + self.b_term - self.m_term

    def m_summand(self, j: int) -> np.ndarray:
        return self.sublayer_coef[j] * self.mu[j][:, None]

    def norms(self) -> dict[str, float]:
        return {name: float(np.linalg.norm(getattr(self, name)))
                for name in ("i_term", "z_mha", "z_ffn", "b_term", "m_term")}


def decompose(w: WeightSet, trace: ActivationTrace, upto: int) -> DecompositionTerms:
    cfg = w.config
    if not cfg.is_postln:
        raise ConfigError("decomposition applies to Post-LN/DeepNorm models")
    if trace.config != cfg or len(trace.sublayers) != 2 * cfg.layers:
        raise ConfigError("trace was not produced by this weight set")
    ab = trace.ablation
    if ab.keep_through != upto:
        raise ConfigError(f"trace keeps layers through {ab.keep_through}, decomposition asked for {upto}")
    n = cfg.layers
    if any(ab.zero_mha[l] != (l > upto) or ab.zero_ffn[l] != (l > upto) for l in range(n)):
        raise ConfigError("trace ablation does not truncate sublayers exactly after `upto`")

    alpha = cfg.alpha
    S = 2 * n
    lns = [ln for lw in w.layers for ln in (lw.ln1, lw.ln2)]
    gamma = np.stack([ln.gamma for ln in lns])                       # (S, d)
    sigma = np.stack([r.stats.sigma for r in trace.sublayers])        # (S, 64)
    mu = np.stack([r.stats.mu for r in trace.sublayers])              # (S, 64)
    if not (sigma > 0).all():
        raise ConfigError("trace records a non-positive sigma")
    scale = gamma[:, None, :] / sigma[:, :, None]                     # (S, 64, d)

    suffix = np.ones((S + 1,) + scale.shape[1:])
    for j in range(S - 1, -1, -1):
        suffix[j] = scale[j] * suffix[j + 1]
    powers = alpha ** np.arange(S - 1, -1, -1, dtype=np.float64)     # alpha^{2N-1-j}
    sub_coef = powers[:, None, None] * suffix[:S]
    beta_coef = powers[:, None, None] * suffix[1:]

    i_term = alpha ** S * suffix[0] * trace.h0
    z_mha = np.zeros_like(i_term)
    z_ffn = np.zeros_like(i_term)
    b_term = np.zeros_like(i_term)
    m_term = np.zeros_like(i_term)
    for l, lw in enumerate(w.layers):
        jm, jf = 2 * l, 2 * l + 1
        if l <= upto:
            z_mha += sub_coef[jm] * trace.sublayers[jm].raw
            z_ffn += sub_coef[jf] * trace.sublayers[jf].raw
            b_term += sub_coef[jm] * (lw.b_v @ lw.w_o)
            b_term += sub_coef[jm] * lw.b_o
            b_term += sub_coef[jf] * lw.ffn_b2
        if not ab.zero_ln_beta[l]:
            b_term += beta_coef[jm] * lw.ln1.beta
            b_term += beta_coef[jf] * lw.ln2.beta
        m_term += sub_coef[jm] * mu[jm][:, None]
        m_term += sub_coef[jf] * mu[jf][:, None]

    return DecompositionTerms(i_term, z_mha, z_ffn, b_term, m_term, upto, alpha,
                              sub_coef, beta_coef, mu, sigma)


@dataclass(frozen=True)
class IdentityReport:
    upto: int
    mode: str
    max_abs_err: float
    max_rel_err: float
    per_term_norms: dict[str, float]


def identity_error(terms: DecompositionTerms, h: np.ndarray) -> tuple[float, float]:
    """Max absolute entry error, and that error relative to the largest |h| entry."""
    err = float(np.max(np.abs(terms.reconstruct() - h)))
    return err, err / max(float(np.max(np.abs(h))), np.finfo(float).tiny)


def verify_identity(w: WeightSet, h0: np.ndarray, upto: int, mode: str = "default") -> IdentityReport:
    ab = lens_ablation(w, upto, mode)
    trace = forward(w, h0, ab)
    terms = decompose(w, trace, upto)
    abs_err, rel_err = identity_error(terms, trace.final_h)
    return IdentityReport(upto, ab.mode, abs_err, rel_err, terms.norms())
