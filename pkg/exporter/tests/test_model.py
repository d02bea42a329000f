from __future__ import annotations

import numpy as np
import pytest

from xaiexport.model import CLASSES, load_dataset, load_model


@pytest.fixture(scope="module")
def model():
    return load_model("tiny", "s1")


class TestDataset:
    def test_shape_and_labels(self):
        rows = load_dataset()
        assert 40 <= len(rows) <= 200
        assert {r["label"] for r in rows} == set(CLASSES)
        assert len({r["instance_id"] for r in rows}) == len(rows)


class TestModel:
    def test_same_reference_same_weights(self, model):
        again = load_model("tiny", "s1")
        words, ids, _ = model.tokenizer.encode("a great movie")
        assert np.array_equal(model.forward(ids).logits, again.forward(ids).logits)

    def test_seeds_differ(self, model):
        other = load_model("tiny", "s2")
        _, ids, _ = model.tokenizer.encode("a great movie")
        assert not np.allclose(model.forward(ids).logits, other.forward(ids).logits)

    def test_attention_is_row_stochastic(self, model):
        _, ids, _ = model.tokenizer.encode("the plot is clever and the acting is superb")
        out = model.forward(ids)
        t = len(ids)
        assert out.attentions.shape == (2, 2, t, t)
        assert np.allclose(out.attentions.sum(axis=-1), 1.0, atol=1e-12)
        assert (out.attentions >= 0).all()

    def test_probabilities_normalized(self, model):
        _, ids, _ = model.tokenizer.encode("dull characters and a predictable ending")
        out = model.forward(ids)
        assert out.probabilities.shape == (2,)
        assert abs(out.probabilities.sum() - 1.0) < 1e-12

    def test_sentiment_direction_separates_lexicon(self, model):
        # the shipped head should pull known polar words apart
        _, pos_ids, _ = model.tokenizer.encode("great stellar wonderful")
        _, neg_ids, _ = model.tokenizer.encode("terrible boring awful")
        pos_logits = model.forward(pos_ids).logits
        neg_logits = model.forward(neg_ids).logits
        assert pos_logits[1] - pos_logits[0] > neg_logits[1] - neg_logits[0]

    def test_bad_reference_rejected(self):
        with pytest.raises(ValueError):
            load_model("", "s1")
