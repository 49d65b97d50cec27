import numpy as np
import pytest

from postln_lens.arena.encoding import state_input
from postln_lens.arena.game import GameState, legal_moves
from postln_lens.errors import ConfigError, InputError
from postln_lens.lens import (
    dumps_report,
    lens_policy,
    lens_sweep,
    loads_report,
    normalize_mode,
    preln_lens_direct,
    stage_label,
)
from postln_lens.linalg import layer_norm
from postln_lens.metrics import js_divergence
from postln_lens.model import PRELN, ModelConfig, forward, init_model, policy_head, zero_weights

from conftest import model_inputs, random_config, random_states

SEED7_JSD_L0_VS_FULL = 0.1415841249359195


def test_last_stage_is_full_model_bitwise(toy, states):
    n = toy.config.layers
    for mode in ("default", "keep_beta"):
        for h0, legal in model_inputs(toy, states):
            lens = lens_policy(toy, h0, legal, n - 1, mode)
            full = policy_head(forward(toy, h0).final_h, toy, legal)
            assert lens.probs.tobytes() == full.probs.tobytes()


def test_zero_model_all_stages_identical(states):
    w = zero_weights(ModelConfig())
    h0 = np.random.default_rng(0).standard_normal((64, 32))
    legal = legal_moves(states[0])
    ref = lens_policy(w, h0, legal, -1).probs
    for k in range(w.config.layers):
        assert np.array_equal(lens_policy(w, h0, legal, k).probs, ref)


def test_seed7_regression():
    w = init_model(ModelConfig(seed=7))
    s = GameState.initial()
    h0, legal = state_input(w, s), legal_moves(s)
    a = lens_policy(w, h0, legal, 0).legal_probs()
    b = lens_policy(w, h0, legal, w.config.layers - 1).legal_probs()
    jsd = js_divergence(a, b)
    assert jsd > 0
    assert abs(jsd - SEED7_JSD_L0_VS_FULL) <= 1e-12


def test_stage_out_of_range(toy, states):
    h0, legal = model_inputs(toy, states[:1])[0]
    for k in (-2, toy.config.layers):
        with pytest.raises(InputError):
            lens_policy(toy, h0, legal, k)


def test_distributions_valid(toy, states):
    for h0, legal in model_inputs(toy, states):
        for k in range(-1, toy.config.layers):
            p = lens_policy(toy, h0, legal, k).probs
            assert abs(p.sum() - 1) <= 1e-9
            assert (p[~legal] == 0).all()


def test_sweep_counts_and_determinism(toy, states):
    pos = model_inputs(toy, states[:1])
    rep = lens_sweep(toy, pos)
    assert len(rep.policies[0]) == 5 and rep.stages == [-1, 0, 1, 2, 3]
    assert dumps_report(rep) == dumps_report(lens_sweep(toy, pos))


def test_keep_beta_differs(toy, states):
    pos = model_inputs(toy, states[:2])
    a, b = lens_sweep(toy, pos, "default"), lens_sweep(toy, pos, "keep_beta")
    diffs = [not np.array_equal(pa.probs, pb.probs)
             for ra, rb in zip(a.policies, b.policies) for pa, pb in zip(ra, rb)]
    assert any(diffs)
    assert not diffs[toy.config.layers]     # last stage of the first position


def test_sweep_empty_and_error_context(toy, states):
    with pytest.raises(InputError):
        lens_sweep(toy, [])
    h0, legal = model_inputs(toy, states[:1])[0]
    with pytest.raises(InputError, match="position bad"):
        lens_sweep(toy, [(h0, np.zeros((64, 64), bool))], position_ids=["bad"])


def test_report_roundtrip(toy, states):
    rep = lens_sweep(toy, model_inputs(toy, states[:3]), position_ids=["a", "b", "c"])
    text = dumps_report(rep)
    assert len(text.splitlines()) == 3 * 5
    back = loads_report(text)
    assert back.position_ids == ["a", "b", "c"] and back.mode == "default"
    for ra, rb in zip(rep.policies, back.policies):
        for pa, pb in zip(ra, rb):
            assert np.array_equal(pa.legal, pb.legal)
            assert np.array_equal(pa.probs, pb.probs)
    assert dumps_report(back) == text


def test_modes_and_labels():
    assert normalize_mode("keep-beta") == "keep_beta"
    with pytest.raises(InputError):
        normalize_mode("nope")
    assert [stage_label(k, 3) for k in (-1, 0, 1, 2)] == ["input", "L0", "L1", "full"]


def test_preln_direct_examples(toy, toy_preln, states):
    h0, legal = model_inputs(toy_preln, states[:1])[0]
    n = toy_preln.config.layers
    full = policy_head(forward(toy_preln, h0).final_h, toy_preln, legal)
    assert np.abs(preln_lens_direct(toy_preln, h0, legal, n - 1).probs - full.probs).max() <= 1e-12
    with pytest.raises(ConfigError):
        preln_lens_direct(toy, h0, legal, 0)

    one = init_model(ModelConfig(layers=1, norm_style=PRELN, seed=3))
    h0, legal = model_inputs(one, states[:1])[0]
    expect = policy_head(layer_norm(h0, one.final_ln)[0], one, legal)
    assert np.array_equal(preln_lens_direct(one, h0, legal, -1).probs, expect.probs)


def test_preln_equivalence_small_sample():
    rng = np.random.default_rng(5)
    sts = random_states(3, seed=5)
    for _ in range(8):
        w = init_model(random_config(rng, PRELN))
        for h0, legal in model_inputs(w, sts):
            for k in range(-1, w.config.layers):
                gap = np.abs(preln_lens_direct(w, h0, legal, k).probs - lens_policy(w, h0, legal, k).probs).max()
                assert gap <= 1e-10
