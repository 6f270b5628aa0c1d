"""Loss, schedule, optimizer, and training-loop contracts."""

import numpy as np
import pytest

from aste.data import Corpus
from aste.encoder import EncoderConfig
from aste.errors import TrainingDivergedError, ValidationError
from aste.model import TripletModel
from aste.numerics import Tensor
from aste.parser import ParserConfig
from aste.structure import RELATIVE, StructureConfig
from aste.synth import learnable_corpus
from aste.training import (
    LR_GRID,
    AdamW,
    BatchMasks,
    BatchPredictions,
    BatchTargets,
    TrainConfig,
    assemble_batch,
    bucket_batches,
    clip_gradients,
    default_batch_size,
    joint_loss,
    lr_at,
    train,
)

LN3 = 1.0986122886681098
LN4 = 1.3862943611198906


def tiny_encoder_config(adapter_kind=None, vocab=1):
    adapter = StructureConfig(tau=4, kind=adapter_kind) if adapter_kind else StructureConfig()
    return EncoderConfig(vocab_size=vocab, dim=8, heads=2, layers=1, ffn_dim=12,
                         max_len=32, adapter=adapter)


def tiny_parser_config():
    return ParserConfig(tag_hidden=6, pair_hidden=5)


class TestJointLoss:
    def one_hot(self, targets, k):
        out = np.zeros((len(targets), k))
        out[np.arange(len(targets)), targets] = 1.0
        return Tensor(out)

    def test_perfect_predictions_zero_loss(self):
        a = np.array([0, 1, 2])
        r = np.array([0, 0, 1, 3])
        pred = BatchPredictions(self.one_hot(a, 3), self.one_hot(a, 3), self.one_hot(r, 4))
        gold = BatchTargets(a, a, r)
        masks = BatchMasks(np.ones(3, bool), np.ones(4, bool))
        tagging, parsing, total = joint_loss(pred, gold, masks)
        assert abs(total.item()) <= 1e-12

    def test_uniform_predictions(self):
        a = np.array([0, 1])
        r = np.array([2, 3, 0])
        pred = BatchPredictions(
            Tensor(np.full((2, 3), 1 / 3)), Tensor(np.full((2, 3), 1 / 3)),
            Tensor(np.full((3, 4), 0.25)),
        )
        gold = BatchTargets(a, a, r)
        masks = BatchMasks(np.ones(2, bool), np.ones(3, bool))
        tagging, parsing, total = joint_loss(pred, gold, masks)
        assert abs(tagging.item() - 2 * LN3) <= 1e-12
        assert abs(parsing.item() - LN4) <= 1e-12

    def test_total_is_exact_sum(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            raw = rng.random((5, 3)) + 1e-3
            tags = Tensor(raw / raw.sum(axis=1, keepdims=True))
            raw_r = rng.random((7, 4)) + 1e-3
            rels = Tensor(raw_r / raw_r.sum(axis=1, keepdims=True))
            pred = BatchPredictions(tags, tags, rels)
            gold = BatchTargets(
                rng.integers(0, 3, 5), rng.integers(0, 3, 5), rng.integers(0, 4, 7)
            )
            masks = BatchMasks(rng.random(5) < 0.8, rng.random(7) < 0.8)
            if not masks.tokens.any() or not masks.cells.any():
                continue
            tagging, parsing, total = joint_loss(pred, gold, masks)
            assert total.item() == tagging.item() + parsing.item()

    def test_masked_positions_contribute_nothing(self):
        tags = Tensor(np.array([[1.0, 0.0, 0.0], [1e-12, 1.0, 0.0]]))
        rels = Tensor(np.full((1, 4), 0.25))
        pred = BatchPredictions(tags, tags, rels)
        gold = BatchTargets(np.array([0, 2]), np.array([0, 2]), np.array([1]))
        masks = BatchMasks(np.array([True, False]), np.array([True]))
        tagging, _, _ = joint_loss(pred, gold, masks)
        assert abs(tagging.item()) <= 1e-12


class TestSchedule:
    def cfg(self, **kw):
        defaults = dict(base_lr=1e-3, max_epochs=20, warmup_epochs=2.0, patience=5)
        defaults.update(kw)
        return TrainConfig(**defaults)

    def test_zero_at_start(self):
        assert lr_at(0.0, self.cfg()) == 0.0

    def test_half_base_mid_warmup(self):
        assert lr_at(1.0, self.cfg()) == pytest.approx(0.5e-3)

    def test_base_at_warmup_end(self):
        assert lr_at(2.0, self.cfg()) == pytest.approx(1e-3)

    def test_zero_at_end(self):
        assert lr_at(20.0, self.cfg()) == 0.0

    def test_linear_decay(self):
        assert lr_at(11.0, self.cfg()) == pytest.approx(1e-3 * 0.5)

    def test_outside_schedule_rejected(self):
        with pytest.raises(ValidationError):
            lr_at(-0.1, self.cfg())
        with pytest.raises(ValidationError):
            lr_at(21.0, self.cfg())

    def test_grid_reflects_search_space(self):
        assert LR_GRID == (1e-5, 2e-5, 3e-5, 5e-5)

    def test_default_batch_sizes(self):
        assert default_batch_size("none") == 8
        assert default_batch_size("relative") == 6


class TestClipping:
    def make_group(self, grads):
        from aste.numerics import ParamGroup
        g = ParamGroup("encoder")
        for i, grad in enumerate(grads):
            t = g.add(f"p{i}", Tensor(np.zeros_like(grad)))
            t.grad = grad
        return g

    def test_large_norm_scaled_to_max(self):
        g = self.make_group([np.array([3.0, 4.0])])
        pre = clip_gradients([g], 1.0)
        assert pre == pytest.approx(5.0)
        post = np.sqrt(sum(float((p.grad ** 2).sum()) for p in g.tensors.values()))
        assert post <= 1.0 + 1e-9

    def test_small_norm_untouched(self):
        grad = np.array([0.3, 0.4])
        g = self.make_group([grad.copy()])
        clip_gradients([g], 1.0)
        np.testing.assert_array_equal(g["p0"].grad, grad)

    def test_frozen_groups_excluded(self):
        g1 = self.make_group([np.array([30.0, 40.0])])
        g2 = self.make_group([np.array([0.1, 0.1])])
        g2.name = "adapter"
        pre = clip_gradients([g1, g2], 1.0, freeze={"encoder"})
        assert pre == pytest.approx(np.sqrt(0.02))


class TestAdamW:
    def test_group_rate_multiplier(self):
        from aste.numerics import ParamGroup
        enc = ParamGroup("encoder")
        enc.add("w", Tensor(np.ones(3))).grad = np.ones(3)
        par = ParamGroup("parser", lr_multiplier=10.0)
        par.add("w", Tensor(np.ones(3))).grad = np.ones(3)
        opt = AdamW([enc, par])
        opt.step(2e-5)
        assert opt.last_group_lrs["parser"] == pytest.approx(10 * opt.last_group_lrs["encoder"])

    def test_frozen_group_not_updated(self):
        from aste.numerics import ParamGroup
        g = ParamGroup("adapter")
        w = g.add("w", Tensor(np.ones(2)))
        w.grad = np.ones(2)
        AdamW([g]).step(1e-3, freeze={"adapter"})
        np.testing.assert_array_equal(w.data, np.ones(2))

    def test_missing_grad_still_decays(self):
        from aste.numerics import ParamGroup
        g = ParamGroup("encoder")
        w = g.add("w", Tensor(np.full(2, 10.0)))
        AdamW([g], weight_decay=0.01).step(1.0)
        np.testing.assert_allclose(w.data, np.full(2, 10.0) - 0.1)


class TestTrainLoop:
    def run(self, corpus, adapter_kind=None, freeze=frozenset(), seed=0, epochs=3,
            batch_size=4, lr=1e-4, patience=None):
        config = TrainConfig(base_lr=lr, batch_size=batch_size, max_epochs=epochs,
                             patience=patience if patience is not None else epochs,
                             seed=seed)
        return train(corpus, tiny_encoder_config(adapter_kind), tiny_parser_config(),
                     config, freeze=freeze)

    def test_same_seed_identical_losses_and_tsv(self):
        corpus = learnable_corpus(12, seed=3)
        _, h1 = self.run(corpus, seed=5)
        _, h2 = self.run(corpus, seed=5)
        assert [r.total_loss for r in h1.records] == [r.total_loss for r in h2.records]
        assert h1.to_tsv() == h2.to_tsv()

    def test_loss_additivity_recorded_exactly(self):
        corpus = learnable_corpus(10, seed=1)
        _, history = self.run(corpus)
        for record in history.records:
            assert record.total_loss == record.tagging_loss + record.parsing_loss

    def test_patience_halts(self):
        corpus = learnable_corpus(10, seed=2)
        # microscopic rate: dev F1 never improves past its first value
        _, history = self.run(corpus, epochs=20, lr=1e-12, patience=3)
        assert len(history.records) == 1 + 3

    def test_frozen_zero_adapter_matches_bare_model(self):
        corpus = learnable_corpus(12, seed=4)
        _, with_adapter = self.run(corpus, adapter_kind=RELATIVE, freeze={"adapter"}, seed=6)
        _, bare = self.run(corpus, adapter_kind=None, seed=6)
        for r1, r2 in zip(with_adapter.records, bare.records):
            assert abs(r1.total_loss - r2.total_loss) <= 1e-10
            assert r1.dev_f1 == r2.dev_f1

    def test_divergence_aborts_with_diagnostic(self):
        corpus = learnable_corpus(10, seed=7)
        with np.errstate(over="ignore", invalid="ignore"):
            with pytest.raises(TrainingDivergedError, match="epoch"):
                self.run(corpus, epochs=3, lr=1e160)

    def test_empty_split_rejected(self):
        corpus = Corpus(name="x", train=[], dev=[])
        with pytest.raises(ValidationError):
            self.run(corpus)

    def test_best_weights_returned(self):
        corpus = learnable_corpus(16, seed=8)
        model, history = self.run(corpus, epochs=4, lr=5e-4)
        from aste.training import evaluate_model
        best = max(r.dev_f1 for r in history.records)
        assert evaluate_model(model, corpus.dev).f1 == pytest.approx(best)

    def test_history_metadata_records_optimizer(self):
        corpus = learnable_corpus(10, seed=9)
        _, history = self.run(corpus, epochs=1)
        assert "adamw" in history.metadata["optimizer"]
        tsv = history.to_tsv()
        assert tsv.startswith("#")
        assert "epoch\ttagging_loss" in tsv


class TestBatching:
    def test_bucketing_sorts_by_length(self):
        corpus = learnable_corpus(13, seed=11)
        batches = bucket_batches(corpus.train, 4)
        assert sum(len(b) for b in batches) == 13
        lengths = [len(s) for batch in batches for s in batch]
        assert lengths == sorted(lengths)

    def test_assemble_batch_masks_padding(self):
        corpus = learnable_corpus(6, seed=12)
        vocab_sentences = corpus.train
        from aste.data import Vocabulary
        vocab = Vocabulary.build(vocab_sentences)
        config = tiny_encoder_config(vocab=len(vocab))
        model = TripletModel(config, tiny_parser_config(), vocab, seed=0)
        batch = sorted(vocab_sentences, key=len)[:3]
        pred, gold, masks = assemble_batch(model, batch)
        longest = max(len(s) for s in batch)
        assert pred.aspect.shape == (3 * longest, 3)
        assert pred.relations.shape == (3 * longest * longest, 4)
        assert masks.tokens.sum() == sum(len(s) for s in batch)
        assert masks.cells.sum() == sum(len(s) ** 2 for s in batch)


class TestTrainConfigValidation:
    def test_patience_cannot_exceed_epochs(self):
        with pytest.raises(ValidationError):
            TrainConfig(patience=30, max_epochs=20)

    def test_positive_fields(self):
        with pytest.raises(ValidationError):
            TrainConfig(base_lr=0.0)
        with pytest.raises(ValidationError):
            TrainConfig(batch_size=0)
