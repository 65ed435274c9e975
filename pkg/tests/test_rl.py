import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sentrewrite import nnkit as nn
from sentrewrite.extractor import Critic, EncoderConfig, ExtractorPolicy
from sentrewrite.rl import (
    Episode,
    RLConfig,
    RewardMode,
    StopMode,
    a2c_finetune,
    actor_loss,
    advantage,
    critic_loss,
    joint_parameters,
    returns,
    run_training_episode,
    shaped_rewards,
)
from sentrewrite.rouge import rouge_l_summary
from sentrewrite.textproc import Document

rewards_lists = st.lists(st.floats(-1, 1, allow_nan=False), max_size=8)
NO_BONUS = RLConfig(stop_lambda=0.0)


def _tiny_corpus():
    docs = [Document.from_texts(f"d{i}", ["a b c", "b c d", "e f", f"g{i} h"]) for i in range(3)]
    refs = [Document.from_texts(f"d{i}#ref", ["a b c d", "e f"]) for i in range(3)]
    return list(zip(docs, refs))


def _actor(pairs, seed=0):
    vocab = ExtractorPolicy.build_vocab([d for d, _ in pairs])
    return ExtractorPolicy(EncoderConfig(embed_dim=6, hidden_dim=6), vocab, seed=seed)


class TestShapedRewards:
    def test_oracle_example(self, abc_doc, abc_ref):
        r = shaped_rewards([abc_doc[0], abc_doc[2]], abc_ref, stopped=False)
        np.testing.assert_allclose(r, [2 / 3, 10 / 11 - 2 / 3])
        assert r == pytest.approx([0.6667, 0.2424], abs=1e-4)
        assert sum(r) == pytest.approx(10 / 11)

    def test_stop_bonus_once(self, abc_doc, abc_ref):
        r = shaped_rewards([abc_doc[0], abc_doc[2]], abc_ref, stopped=True)
        assert len(r) == 3 and r[-1] == pytest.approx(0.08 * 10 / 11)
        assert len(shaped_rewards([abc_doc[0]], abc_ref, stopped=False)) == 1

    def test_empty_stop(self, abc_ref):
        assert shaped_rewards([], abc_ref, stopped=True) == [0.0]

    def test_sentence_level(self, abc_doc, abc_ref):
        cfg = RLConfig(reward_mode=RewardMode.SENTENCE_LEVEL)
        r = shaped_rewards([abc_doc[0], abc_doc[2], abc_doc[1]], abc_ref, False, cfg)
        # positional: "a b c" vs "a b c d", "e f" vs "e f", third step has no target
        assert r == pytest.approx([6 / 7, 1.0, 0.0])

    def test_replace_mode(self, abc_doc, abc_ref):
        cfg = RLConfig(stop_mode=StopMode.REPLACE)
        r = shaped_rewards([abc_doc[0], abc_doc[2]], abc_ref, True, cfg)
        assert r[:2] == [0.0, 0.0] and r[2] == pytest.approx(0.08 * 10 / 11)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            RLConfig(gamma=1.5)
        with pytest.raises(ValueError):
            RLConfig(stop_lambda=-1)
        with pytest.raises(ValueError):
            RLConfig(reward_mode="episode")


class TestReturns:
    def test_example(self):
        assert returns([0.5, 0.3], 0.95) == pytest.approx([0.785, 0.3])

    @given(rewards_lists)
    def test_gamma_boundaries(self, r):
        assert returns(r, 0.0) == r
        if r:
            assert returns(r, 1.0)[0] == pytest.approx(sum(r), abs=1e-12)

    @given(rewards_lists, st.floats(0, 1))
    def test_recursion_exact(self, r, g):
        R = returns(r, g)
        for t in range(len(r) - 1):
            assert R[t] == r[t] + g * R[t + 1]

    @settings(max_examples=30)
    @given(st.integers(0, 1000))
    def test_telescoping_on_random_episodes(self, seed):
        doc, ref = _tiny_corpus()[0]
        rng = np.random.default_rng(seed)
        k = int(rng.integers(1, len(doc) + 1))
        picks = [doc[int(i)] for i in rng.permutation(len(doc))[:k]]
        r = returns(shaped_rewards(picks, ref, stopped=True, cfg=NO_BONUS)[:-1], 1.0)
        assert abs(r[0] - rouge_l_summary(picks, ref.sentences).f1) < 1e-12


class TestAdvantageAndLosses:
    def test_advantage(self):
        assert advantage([1.0], [0.4]) == pytest.approx([0.6])
        assert advantage([0.3, 0.2], [0.3, 0.2]) == [0.0, 0.0]
        with pytest.raises(ValueError, match="length mismatch"):
            advantage([1.0], [])

    @given(st.lists(st.floats(-5, 5), min_size=1, max_size=5), st.floats(-3, 3))
    def test_advantage_shift_invariant(self, r, c):
        v = [x / 2 for x in r]
        shifted = advantage([x + c for x in r], [x + c for x in v])
        np.testing.assert_allclose(shifted, advantage(r, v), atol=1e-9)

    def test_critic_loss_values(self):
        assert critic_loss([nn.Tensor(np.array(0.5))], [0.5]).item() == 0.0
        assert critic_loss([nn.Tensor(np.array(0.0))], [1.0]).item() == 1.0
        with pytest.raises(ValueError):
            critic_loss([nn.Tensor(np.array(0.0))], [1.0, 2.0])

    def test_critic_gradient(self):
        vals = [nn.Parameter(np.array(v)) for v in (0.2, -0.5, 1.0)]
        rets = [0.7, 0.1, 0.4]
        nn.backward(critic_loss(vals, rets))
        for v, r in zip(vals, rets):
            assert float(v.grad) == pytest.approx(2 * (v.data - r) / 3, abs=1e-6)

    def test_actor_loss_errors(self):
        with pytest.raises(ValueError):
            actor_loss([], [])
        with pytest.raises(ValueError):
            actor_loss([nn.Tensor(np.array(-1.0))], [])

    def _arm_grad(self, adv):
        logits = nn.Parameter(np.array([0.1, -0.2]))
        nn.backward(actor_loss([nn.getitem(nn.log_softmax(logits), 0)], [adv]))
        return logits.grad

    def test_actor_gradient_sign_and_zero(self):
        np.testing.assert_array_equal(self._arm_grad(0.0), [0.0, 0.0])
        np.testing.assert_allclose(self._arm_grad(-1.0), -self._arm_grad(1.0))

    def test_positive_advantage_raises_probability(self):
        logits = nn.Parameter(np.array([0.1, -0.2]))
        before = nn.softmax(logits).numpy()[0]
        nn.backward(actor_loss([nn.getitem(nn.log_softmax(logits), 0)], [1.0]))
        nn.adam_step({"l": logits}, {}, lr=1e-2)
        assert nn.softmax(logits).numpy()[0] > before

    def test_two_armed_bandit(self):
        logits = nn.Parameter(np.zeros(2))
        opt = nn.Adam({"l": logits})
        rng = nn.make_rng(0)
        for _ in range(500):
            opt.zero_grad()
            arm = int(rng.random() < nn.softmax(logits).numpy()[1])
            adv = 1.0 if arm == 0 else -1.0
            nn.backward(actor_loss([nn.getitem(nn.log_softmax(logits), arm)], [adv]))
            opt.step(5e-2)
        assert nn.softmax(logits).numpy()[0] > 0.99

    def test_advantages_are_constants(self):
        # scaling the returns only rescales the actor gradient
        logits = nn.Parameter(np.array([0.3, 0.0, -0.1]))
        grads = []
        for scale in (1.0, 3.0):
            logits.zero_grad()
            lp = nn.log_softmax(logits)
            nn.backward(actor_loss([nn.getitem(lp, 1)], advantage([0.5 * scale], [0.0])))
            grads.append(logits.grad.copy())
        np.testing.assert_allclose(grads[1], 3.0 * grads[0])


class TestEpisode:
    def test_length_check(self):
        with pytest.raises(ValueError):
            Episode("d", [0, 1], [-0.1, -0.2], [0.1], [0.1])

    def test_training_episode_is_consistent(self):
        pairs = _tiny_corpus()
        actor = _actor(pairs)
        critic = Critic(actor)
        ep, loss = run_training_episode(*pairs[0], actor, critic, lambda s: s, RLConfig(),
                                        nn.make_rng(0))
        assert len(ep.rewards) == len(ep.actions) == len(ep.values)
        assert ep.returns == returns(ep.rewards, 0.95)
        assert loss.data.size == 1


class TestFinetune:
    def test_zero_lr_leaves_parameters_bit_identical(self):
        pairs = _tiny_corpus()
        actor = _actor(pairs)
        before = {k: v.tobytes() for k, v in actor.state_dict().items()}
        critic, hist = a2c_finetune(pairs, actor, cfg=RLConfig(rl_lr=0.0), epochs=1)
        assert {k: v.tobytes() for k, v in actor.state_dict().items()} == before
        assert set(hist[0]) == {"epoch", "mean_return", "mean_len", "stop_rate"}

    def test_critic_shares_encoder_storage(self):
        pairs = _tiny_corpus()
        actor = _actor(pairs)
        critic = Critic(actor)
        joint = joint_parameters(actor, critic)
        assert not any(k.startswith("critic.encoder") for k in joint)
        assert len(joint) == len({id(p) for p in joint.values()})
        np.testing.assert_array_equal(critic.decoder.lstm_wx.data, actor.decoder.lstm_wx.data)

    def test_same_seed_same_run(self):
        runs = []
        for _ in range(2):
            pairs = _tiny_corpus()
            actor = _actor(pairs)
            _, hist = a2c_finetune(pairs, actor, cfg=RLConfig(rl_lr=1e-2), epochs=2, seed=5)
            runs.append((hist, actor.state_dict()["v_m"].tobytes()))
        assert runs[0] == runs[1]

    def test_learns_on_toy_corpus(self):
        pairs = _tiny_corpus()
        actor = _actor(pairs, seed=1)
        _, hist = a2c_finetune(pairs * 4, actor, cfg=RLConfig(rl_lr=1e-2), epochs=15, seed=0)
        assert hist[-1]["mean_return"] > hist[0]["mean_return"]

    def test_empty_corpus(self):
        with pytest.raises(ValueError):
            a2c_finetune([], _actor(_tiny_corpus()))
