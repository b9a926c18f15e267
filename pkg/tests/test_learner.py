"""Actor-critic learner: sampling, targets, and gradient correctness.

The analytic gradients are pinned against central finite differences of the
scalar loss, the one oracle that never lies about backprop.
"""

import numpy as np
import pytest

from evocommons import learner as ln
from evocommons.errors import NumericError


def random_segment(rng, in_dim=8, actions=3, t_len=5):
    return ln.Segment(
        inputs=rng.normal(size=(t_len, in_dim)),
        actions=rng.integers(0, actions, size=t_len),
        logprobs=np.zeros(t_len),
        rewards_e=rng.normal(size=t_len),
        rewards_i=rng.normal(size=t_len),
        values_e=rng.normal(size=t_len),
        values_i=rng.normal(size=t_len),
        bootstrap_e=float(rng.normal()),
        bootstrap_i=float(rng.normal()),
    )


def random_params(rng, in_dim=8, hidden=4, actions=3):
    p = ln.PolicyParams.init(in_dim, hidden, actions, rng)
    # non-zero heads so every loss term has teeth
    p.w_pol = rng.normal(scale=0.5, size=p.w_pol.shape)
    p.b_pol = rng.normal(scale=0.5, size=p.b_pol.shape)
    p.w_ve = rng.normal(scale=0.5, size=p.w_ve.shape)
    p.w_vi = rng.normal(scale=0.5, size=p.w_vi.shape)
    p.b_enc = rng.normal(scale=0.5, size=p.b_enc.shape)
    return p


def fd_gradient(params, segment, ge, gi, adv, hp, h=1e-5):
    """Central finite differences over the flattened parameter vector."""
    flat = params.to_flat()
    grad = np.zeros_like(flat)
    for i in range(flat.size):
        for sign in (+1.0, -1.0):
            bumped = flat.copy()
            bumped[i] += sign * h
            params.set_flat(bumped)
            val = ln.segment_loss(params, segment, ge, gi, adv, hp)
            grad[i] += sign * val / (2.0 * h)
    params.set_flat(flat)
    return grad


class TestAct:
    def test_zero_params_uniform_policy(self):
        params = ln.PolicyParams.zeros(in_dim=6, hidden=4, actions=8)
        x = np.ones(6)
        counts = np.zeros(8)
        rng = np.random.default_rng(0)
        for _ in range(8000):
            a, logp, ve, vi = ln.act(params, x, rng)
            counts[a] += 1
            assert logp == pytest.approx(np.log(1.0 / 8.0))
        assert np.all(np.abs(counts / 8000 - 0.125) < 0.02)

    def test_zero_value_heads_read_zero(self):
        rng = np.random.default_rng(1)
        params = ln.PolicyParams.init(6, 4, 3, rng)
        _, _, ve, vi = ln.act(params, rng.normal(size=6), rng)
        assert ve == 0.0 and vi == 0.0

    def test_deterministic_given_rng_state(self):
        rng_p = np.random.default_rng(2)
        params = random_params(rng_p)
        x = rng_p.normal(size=8)
        out1 = ln.act(params, x, np.random.default_rng(77))
        out2 = ln.act(params, x, np.random.default_rng(77))
        assert out1 == out2

    def test_nonfinite_logits_raise(self):
        params = ln.PolicyParams.zeros(4, 3, 2)
        params.b_pol[0] = np.nan
        with pytest.raises(NumericError):
            ln.act(params, np.ones(4), np.random.default_rng(0))


class TestTargets:
    def _segment(self, re, ri, ve=None, vi=None, be=0.0, bi=0.0):
        t_len = len(re)
        return ln.Segment(
            inputs=np.zeros((t_len, 2)),
            actions=np.zeros(t_len, dtype=int),
            logprobs=np.zeros(t_len),
            rewards_e=np.asarray(re, dtype=float),
            rewards_i=np.asarray(ri, dtype=float),
            values_e=np.zeros(t_len) if ve is None else np.asarray(ve, dtype=float),
            values_i=np.zeros(t_len) if vi is None else np.asarray(vi, dtype=float),
            bootstrap_e=be,
            bootstrap_i=bi,
        )

    def test_single_step(self):
        ge, gi, _ = ln.compute_targets(self._segment([1.0], [0.0]), 0.99)
        assert ge[0] == 1.0 and gi[0] == 0.0

    def test_two_step_discounting(self):
        ge, _, _ = ln.compute_targets(self._segment([0.0, 1.0], [0.0, 0.0]), 0.99)
        assert ge[0] == pytest.approx(0.99)
        assert ge[1] == 1.0

    def test_bootstrap_enters_both_channels(self):
        ge, gi, _ = ln.compute_targets(self._segment([0.0], [0.0], be=2.0, bi=3.0), 0.5)
        assert ge[0] == 1.0 and gi[0] == 1.5

    def test_perfect_values_zero_advantage(self):
        seg = self._segment([1.0, 0.5], [0.2, 0.1])
        ge, gi, _ = ln.compute_targets(seg, 0.9)
        seg.values_e, seg.values_i = ge, gi
        _, _, adv = ln.compute_targets(seg, 0.9)
        assert np.allclose(adv, 0.0)


class TestGradients:
    def test_matches_finite_differences(self):
        rng = np.random.default_rng(1234)
        worst = 0.0
        for _ in range(25):
            params = random_params(rng)
            seg = random_segment(rng)
            hp = ln.Hyperparams(entropy_cost=float(rng.uniform(1e-4, 2e-2)))
            ge, gi, adv = ln.compute_targets(seg, hp.discount)
            _, grads, _ = ln.loss_and_grads(params, seg, ge, gi, adv, hp)
            analytic = np.concatenate([grads[n].ravel() for n in ln.PARAM_FIELDS])
            numeric = fd_gradient(params, seg, ge, gi, adv, hp)
            denom = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-12)
            rel = np.linalg.norm(analytic - numeric) / denom
            worst = max(worst, rel)
        assert worst < 1e-4

    def test_uniform_policy_entropy_value(self):
        params = ln.PolicyParams.zeros(in_dim=4, hidden=3, actions=8)
        seg = ln.Segment(
            inputs=np.ones((1, 4)), actions=np.array([0]), logprobs=np.zeros(1),
            rewards_e=np.zeros(1), rewards_i=np.zeros(1),
            values_e=np.zeros(1), values_i=np.zeros(1),
            bootstrap_e=0.0, bootstrap_i=0.0)
        ge, gi, adv = ln.compute_targets(seg, 0.99)
        _, _, report = ln.loss_and_grads(params, seg, ge, gi, adv, ln.Hyperparams())
        assert report["entropy"] == pytest.approx(np.log(8.0), abs=1e-12)

    def test_zero_advantage_zero_entropy_no_drift(self):
        # advantages zero, value targets met exactly, entropy off -> zero gradient
        rng = np.random.default_rng(5)
        params = random_params(rng)
        seg = random_segment(rng)
        hp = ln.Hyperparams(entropy_cost=0.0)
        _, _, _, _, ve, vi = ln._forward(params, seg.inputs)
        adv = np.zeros(len(seg.actions))
        _, grads, _ = ln.loss_and_grads(params, seg, ve, vi, adv, hp)
        flat = np.concatenate([g.ravel() for g in grads.values()])
        assert np.allclose(flat, 0.0, atol=1e-12)

    def test_entropy_ascent_flattens_logits(self):
        rng = np.random.default_rng(7)
        params = ln.PolicyParams.zeros(in_dim=3, hidden=3, actions=4)
        params.b_pol = np.array([2.0, 0.0, -1.0, 0.5])
        opt = ln.OptState.for_params(params)
        hp = ln.Hyperparams(learning_rate=0.05, entropy_cost=1.0)
        x = np.zeros((1, 3))
        seg = ln.Segment(
            inputs=x, actions=np.array([0]), logprobs=np.zeros(1),
            rewards_e=np.zeros(1), rewards_i=np.zeros(1),
            values_e=np.zeros(1), values_i=np.zeros(1),
            bootstrap_e=0.0, bootstrap_i=0.0)
        spread_before = params.b_pol.max() - params.b_pol.min()
        for _ in range(200):
            ln.update(params, opt, seg, hp)
        spread_after = params.b_pol.max() - params.b_pol.min()
        assert spread_after < spread_before * 0.2

    def test_value_head_separation(self):
        rng = np.random.default_rng(11)
        params = random_params(rng)
        seg = random_segment(rng)
        hp = ln.Hyperparams()
        ge, gi, adv = ln.compute_targets(seg, hp.discount)
        _, _, base = ln.loss_and_grads(params, seg, ge, gi, adv, hp)

        # perturbing intrinsic rewards must not move the extrinsic value loss
        bumped = ln.Segment(**{**seg.__dict__, "rewards_i": seg.rewards_i + 1.0})
        ge2, gi2, adv2 = ln.compute_targets(bumped, hp.discount)
        assert np.array_equal(ge2, ge)
        _, h, _, _, ve, _ = ln._forward(params, seg.inputs)
        loss_e_base = ((ge - ve) ** 2).sum()
        loss_e_bumped = ((ge2 - ve) ** 2).sum()
        assert loss_e_bumped == loss_e_base
        # ... and it must move the intrinsic targets and the advantages
        assert not np.array_equal(gi2, gi)
        assert not np.array_equal(adv2, adv)

        # with u == 0 everywhere, extrinsic perturbations leave V^I alone
        zeroed = ln.Segment(**{**seg.__dict__, "rewards_i": np.zeros_like(seg.rewards_i),
                               "bootstrap_i": 0.0})
        _, gi3, _ = ln.compute_targets(zeroed, hp.discount)
        shifted = ln.Segment(**{**zeroed.__dict__, "rewards_e": zeroed.rewards_e + 5.0})
        _, gi4, _ = ln.compute_targets(shifted, hp.discount)
        assert np.array_equal(gi3, gi4)


class TestUpdate:
    def test_step_opposes_gradient_sign(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            params = random_params(rng)
            opt = ln.OptState.for_params(params)
            seg = random_segment(rng)
            hp = ln.Hyperparams(learning_rate=1e-3)
            ge, gi, adv = ln.compute_targets(seg, hp.discount)
            _, grads, _ = ln.loss_and_grads(params, seg, ge, gi, adv, hp)
            before = params.to_flat()
            ln.update(params, opt, seg, hp)
            delta = params.to_flat() - before
            g = np.concatenate([grads[n].ravel() for n in ln.PARAM_FIELDS])
            moved = np.abs(g) > 1e-12
            assert np.all(np.sign(delta[moved]) == -np.sign(g[moved]))

    def test_nonfinite_loss_skips_update(self):
        rng = np.random.default_rng(4)
        params = random_params(rng)
        opt = ln.OptState.for_params(params)
        seg = random_segment(rng)
        seg.rewards_e[0] = np.nan
        before = params.to_flat()
        report = ln.update(params, opt, seg, ln.Hyperparams())
        assert report["skipped"]
        assert np.array_equal(params.to_flat(), before)

    def test_report_fields(self):
        rng = np.random.default_rng(6)
        params = random_params(rng)
        opt = ln.OptState.for_params(params)
        report = ln.update(params, opt, random_segment(rng), ln.Hyperparams())
        for key in ("loss", "policy_loss", "value_loss_e", "value_loss_i",
                    "entropy", "grad_norm", "skipped"):
            assert key in report
        assert not report["skipped"]


class TestEncoding:
    def test_dimension_formula(self):
        assert ln.encoding_dim(5, 8) == 5 * 5 * 10 + 8 + 2

    def test_one_hot_planes_and_aux(self):
        window = np.array([[0, 1], [2, 3]], dtype=np.int8)
        # encoder accepts any square window; use 2x2 here for readability
        x = ln.encode_observation(window, last_action=1, last_u=0.5, last_re=-1.0,
                                  action_count=4)
        assert x.size == 4 * 10 + 4 + 2
        planes = x[:40].reshape(4, 10)
        assert planes[0, 0] == 1.0 and planes[1, 1] == 1.0
        assert planes[2, 2] == 1.0 and planes[3, 3] == 1.0
        assert planes.sum() == 4.0
        assert x[40 + 1] == 1.0 and x[44] == 0.5 and x[45] == -1.0

    def test_no_last_action(self):
        x = ln.encode_observation(np.zeros((3, 3), dtype=np.int8), None, 0.0, 0.0, 7)
        assert x[90:97].sum() == 0.0

    def test_entropy_cost_sampling_range(self):
        rng = np.random.default_rng(8)
        draws = [ln.sample_entropy_cost(rng) for _ in range(500)]
        assert min(draws) >= 2e-4 and max(draws) <= 0.01
        # log-uniform: median near the geometric mean
        assert np.median(draws) == pytest.approx(np.sqrt(2e-4 * 0.01), rel=0.35)
