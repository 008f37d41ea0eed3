"""
Unit tests for the SRL tagger: input assembly, encoder, prediction and loss.
"""

import math

import numpy as np
import pytest

from app.exceptions import ModelError
from app.ml.autodiff import grad_check
from app.ml.models.srl_tagger import NULL_LABEL, ModelParams, SRLTagger, model_languages
from app.models.conll_models import PredicateInstance
from app.models.embedding_models import EmbeddingTable
from app.models.lexicon_models import SenseLexicon
from app.models.pydantic_models import ModelConfig, Variant

WORDS = ["she", "eats", "bread", "today", "now"]
LABELS = {"eng": ["A0", "A1", "A2", "AM-TMP"], "cat": ["arg0-agt", "arg1-pat"]}
LEXICONS = {
    "eng": SenseLexicon(
        language="eng",
        senses={"eat": ("eat.01", "eat.02"), "drink": ("drink.01",)},
        counts={"eat.01": 3, "eat.02": 1, "drink.01": 2},
    ),
    "cat": SenseLexicon(language="cat", senses={"menjar": ("menjar.a2",)}, counts={"menjar.a2": 1}),
}


def make_tagger(variant=Variant.MONO, languages=("eng",), embedding_dim=4, shared_layers=1, hidden_size=3,
                seed=0, lexicons=None, lang_id_dim=2):
    config = ModelConfig(variant=variant, languages=list(languages), shared_layers=shared_layers,
                         hidden_size=hidden_size, lang_id_dim=lang_id_dim, dropout_rate=0.1)
    lexicons = lexicons or LEXICONS
    rng = np.random.default_rng(seed + 1000)
    embeddings = {language: EmbeddingTable(WORDS, rng.normal(size=(len(WORDS), embedding_dim)))
                  for language in languages}
    sense_sets = {language: [] if lexicons[language].identity_mode else lexicons[language].sense_inventory
                  for language in languages}
    params = ModelParams.initialize(config, embedding_dim, LABELS, sense_sets, seed)
    return SRLTagger(config, params, embeddings, {language: lexicons[language] for language in languages})


def make_instance(lemma="eat", sense="eat.01", args=None, language="eng", forms=("she", "eats", "bread"),
                  predicate_index=2):
    return PredicateInstance(
        sentence_ref=0, predicate_index=predicate_index, gold_sense=sense,
        gold_args={1: "A0", 3: "A1"} if args is None else args,
        language=language, lemma=lemma, forms=forms,
    )


def swap_directions(arrays):
    swapped = {}
    for name, value in arrays.items():
        if "/fw/" in name:
            swapped[name.replace("/fw/", "/bw/")] = value
        elif "/bw/" in name:
            swapped[name.replace("/bw/", "/fw/")] = value
        else:
            swapped[name] = value
    return swapped


class TestModelParams:
    """Test cases for parameter layout."""

    def test_head_sizes(self):
        tagger = make_tagger(hidden_size=5)
        arrays = tagger.params.arrays
        assert tagger.params.label_vocab["eng"][0] == NULL_LABEL
        assert arrays["arg/eng/W"].shape == (5, 10)
        assert arrays["sense/eng/W"].shape == (3, 10)
        assert arrays["indicator"].shape == (2, 2)

    def test_polyglot_heads_are_separate(self):
        tagger = make_tagger(Variant.SIMPLE_POLYGLOT, ("cat", "eng"))
        assert tagger.params.label_vocab["cat"] == [NULL_LABEL, "arg0-agt", "arg1-pat"]
        assert "arg/cat/W" in tagger.params.arrays and "arg/eng/W" in tagger.params.arrays
        assert not any(name.startswith("lang_id/") for name in tagger.params.arrays)

    def test_language_specific_stacks(self):
        tagger = make_tagger(Variant.LANG_SPECIFIC_LSTM, ("cat", "eng"), shared_layers=3, hidden_size=3)
        arrays = tagger.params.arrays
        assert arrays["shared/3/fw/W_x"].shape == (12, 12)
        assert arrays["private/cat/2/bw/W_x"].shape == (6, 12)
        assert arrays["lang_id/eng"].shape == (1, 2)

    def test_mono_uses_first_language(self):
        config = ModelConfig(languages=["spa", "eng"])
        assert model_languages(config) == ["spa"]

    def test_identity_language_has_no_sense_head(self):
        lexicons = dict(LEXICONS, ces=SenseLexicon(language="ces", identity_mode=True, senses={"jíst": ("jíst",)},
                                                   counts={"jíst": 1}))
        tagger = make_tagger(languages=("ces",), lexicons=lexicons)
        assert "sense/ces/W" not in tagger.params.arrays
        assert tagger.params.sense_vocab["ces"] == []

    def test_copy_is_independent(self):
        params = make_tagger().params
        clone = params.copy()
        clone.arrays["indicator"][0, 0] += 1.0
        assert clone.arrays["indicator"][0, 0] != params.arrays["indicator"][0, 0]


class TestBuildInput:
    """Test cases for input assembly."""

    def test_mono_shape(self):
        tagger = make_tagger(embedding_dim=100)
        assert tagger.build_input(make_instance()).shape == (3, 102)

    def test_lang_id_shape(self):
        tagger = make_tagger(Variant.LANG_ID, ("cat", "eng"), embedding_dim=100, lang_id_dim=8)
        assert tagger.build_input(make_instance()).shape == (3, 110)

    def test_indicator_rows_differ_only_at_predicate(self):
        tagger = make_tagger()
        inputs = tagger.build_input(make_instance())
        indicator = tagger.params.arrays["indicator"]
        np.testing.assert_array_equal(inputs[0, 4:], indicator[0])
        np.testing.assert_array_equal(inputs[1, 4:], indicator[1])
        np.testing.assert_array_equal(inputs[2, 4:], indicator[0])

    def test_word_vectors_and_oov(self):
        tagger = make_tagger()
        inputs = tagger.build_input(make_instance(forms=("She", "eats", "zzz")))
        table = tagger.embeddings["eng"]
        np.testing.assert_array_equal(inputs[0, :4], table.lookup("she"))
        np.testing.assert_array_equal(inputs[2, :4], table.oov_vector)

    def test_language_vector_on_every_row(self):
        tagger = make_tagger(Variant.LANG_ID, ("cat", "eng"))
        inputs = tagger.build_input(make_instance())
        for row in inputs:
            np.testing.assert_array_equal(row[6:], tagger.params.arrays["lang_id/eng"][0])

    def test_unknown_language(self):
        with pytest.raises(ModelError, match="deu"):
            make_tagger().build_input(make_instance(language="deu"))


class TestEncode:
    """Test cases for the biLSTM encoder."""

    def test_single_token(self):
        tagger = make_tagger(hidden_size=4, shared_layers=2)
        instance = make_instance(forms=("eats",), predicate_index=1, args={})
        assert tagger.encode(tagger.build_input(instance), "eng").shape == (1, 8)

    @pytest.mark.parametrize("variant", list(Variant))
    def test_zero_input_is_a_fixed_point(self, variant):
        languages = ("eng",) if variant is Variant.MONO else ("cat", "eng")
        tagger = make_tagger(variant, languages, shared_layers=3, hidden_size=3)
        width = 4 + 2 + (2 if variant.uses_lang_id else 0)
        np.testing.assert_array_equal(tagger.encode(np.zeros((4, width)), "eng"), np.zeros((4, 6)))

    def test_reversal_swaps_directions(self):
        tagger = make_tagger(hidden_size=3, seed=7)
        inputs = tagger.build_input(make_instance(forms=("she", "eats", "bread", "today"), args={}))
        forward = tagger.encode(inputs, "eng")

        tagger.params = tagger.params.with_arrays(swap_directions(tagger.params.arrays))
        reversed_out = tagger.encode(inputs[::-1], "eng")
        np.testing.assert_allclose(reversed_out[::-1, :3], forward[:, 3:], atol=1e-12)
        np.testing.assert_allclose(reversed_out[::-1, 3:], forward[:, :3], atol=1e-12)

    def test_language_specific_needs_known_language(self):
        tagger = make_tagger(Variant.LANG_SPECIFIC_LSTM, ("cat", "eng"), shared_layers=3)
        with pytest.raises(ModelError):
            tagger.encode(np.zeros((2, 8)), "deu")


class TestPredict:
    """Test cases for prediction."""

    def test_all_null(self):
        tagger = make_tagger()
        tagger.params.arrays["arg/eng/b"][0] = 100.0
        assert tagger.predict(make_instance()).args == {}

    def test_single_valid_sense_ignores_logits(self):
        tagger = make_tagger()
        sense_index = tagger.params.sense_vocab["eng"].index("eat.02")
        tagger.params.arrays["sense/eng/b"][sense_index] = 100.0
        assert tagger.predict(make_instance(lemma="drink", sense="drink.01")).sense == "drink.01"

    def test_sense_masked_to_valid_candidates(self):
        tagger = make_tagger()
        vocab = tagger.params.sense_vocab["eng"]
        tagger.params.arrays["sense/eng/b"][vocab.index("drink.01")] = 100.0
        tagger.params.arrays["sense/eng/b"][vocab.index("eat.02")] = 50.0
        assert tagger.predict(make_instance()).sense == "eat.02"

    def test_sense_is_best_valid_candidate_under_random_logits(self):
        tagger = make_tagger()
        vocab = tagger.params.sense_vocab["eng"]
        valid = LEXICONS["eng"].valid_senses("eat")
        tagger.params.arrays["sense/eng/W"][:] = 0.0
        rng = np.random.default_rng(17)
        for _ in range(1000):
            bias = rng.normal(scale=10.0, size=len(vocab))
            tagger.params.arrays["sense/eng/b"][:] = bias
            expected = max(valid, key=lambda sense: bias[vocab.index(sense)])
            assert tagger.predict(make_instance()).sense == expected

    def test_unseen_lemma_falls_back(self):
        assert make_tagger().predict(make_instance(lemma="run", sense="run.01")).sense == "run.01"

    def test_identity_language(self):
        lexicons = dict(LEXICONS, ces=SenseLexicon(language="ces", identity_mode=True, senses={"jíst": ("jíst",)},
                                                   counts={"jíst": 1}))
        tagger = make_tagger(languages=("ces",), lexicons=lexicons)
        instance = make_instance(lemma="pít", sense="pít", args={}, language="ces")
        assert tagger.predict(instance).sense == "pít"

    @pytest.mark.parametrize("variant", list(Variant))
    @pytest.mark.parametrize("seed", range(5))
    def test_outputs_come_from_language_vocabularies(self, variant, seed):
        languages = ("eng",) if variant is Variant.MONO else ("cat", "eng")
        tagger = make_tagger(variant, languages, shared_layers=3, seed=seed)
        prediction = tagger.predict(make_instance(forms=("she", "eats", "bread", "today", "now")))
        assert prediction.sense in LEXICONS["eng"].valid_senses("eat")
        assert set(prediction.args.values()) <= set(LABELS["eng"])
        assert tagger.predict(make_instance(forms=("she", "eats", "bread", "today", "now"))) == prediction


class TestLoss:
    """Test cases for the multitask loss."""

    def test_uniform_arguments_single_sense(self):
        """Zero argument weights give ln 5 per token; one candidate sense adds nothing."""
        tagger = make_tagger()
        tagger.params.arrays["arg/eng/W"][:] = 0.0
        loss = tagger.loss(make_instance(lemma="drink", sense="drink.01"))
        assert loss == pytest.approx(math.log(5), abs=1e-12)

    def test_two_candidate_senses(self):
        tagger = make_tagger()
        tagger.params.arrays["arg/eng/W"][:] = 0.0
        tagger.params.arrays["sense/eng/W"][:] = 0.0
        assert tagger.loss(make_instance()) == pytest.approx(math.log(5) + math.log(2), abs=1e-12)

    def test_unseen_lemma_has_no_sense_term(self):
        tagger = make_tagger()
        tagger.params.arrays["arg/eng/W"][:] = 0.0
        assert tagger.loss(make_instance(lemma="run", sense="run.01")) == pytest.approx(math.log(5), abs=1e-12)

    def test_non_negative(self):
        for seed in range(5):
            assert make_tagger(seed=seed).loss(make_instance()) >= 0.0

    def test_unknown_gold_label(self):
        with pytest.raises(ModelError, match="label set"):
            make_tagger().loss(make_instance(args={1: "A5"}))

    def test_dropout_changes_loss(self):
        tagger = make_tagger()
        instance = make_instance()
        _, plain = tagger.compute_loss(instance)
        _, dropped = tagger.compute_loss(instance, rng=np.random.default_rng(0))
        _, again = tagger.compute_loss(instance, rng=np.random.default_rng(0))
        assert dropped.item() != plain.item()
        assert dropped.item() == again.item()

    @pytest.mark.parametrize("variant", list(Variant))
    def test_gradient_check(self, variant):
        languages = ("eng",) if variant is Variant.MONO else ("cat", "eng")
        tagger = make_tagger(variant, languages, shared_layers=3, seed=3)
        instance = make_instance(forms=("she", "eats", "bread", "today", "now"), args={1: "A0", 3: "A1", 4: "AM-TMP"})

        def build(arrays):
            return tagger.compute_loss(instance, arrays=arrays)

        assert grad_check(build, tagger.params.arrays, max_elements=3, seed=1) < 1e-4

    @pytest.mark.slow
    @pytest.mark.parametrize("variant", list(Variant))
    @pytest.mark.parametrize("seed", range(20))
    def test_gradient_check_across_seeds(self, variant, seed):
        languages = ("eng",) if variant is Variant.MONO else ("cat", "eng")
        tagger = make_tagger(variant, languages, shared_layers=3, seed=seed)
        instance = make_instance(forms=("she", "eats", "bread", "today", "now"), args={1: "A0", 3: "A1", 4: "AM-TMP"})

        def build(arrays):
            return tagger.compute_loss(instance, arrays=arrays)

        assert grad_check(build, tagger.params.arrays, max_elements=10, seed=seed) < 1e-4

    @pytest.mark.parametrize("variant", list(Variant))
    def test_confident_correct_model_has_zero_loss(self, variant):
        """Heads whose only input is a bias on the gold outputs drive the loss to zero."""
        languages = ("eng",) if variant is Variant.MONO else ("cat", "eng")
        tagger = make_tagger(variant, languages, shared_layers=3)
        arrays = tagger.params.arrays
        arrays["arg/eng/W"][:] = 0.0
        arrays["arg/eng/b"][:] = 0.0
        arrays["arg/eng/b"][tagger.params.label_vocab["eng"].index(NULL_LABEL)] = 50.0
        arrays["sense/eng/W"][:] = 0.0
        arrays["sense/eng/b"][:] = 0.0
        arrays["sense/eng/b"][tagger.params.sense_vocab["eng"].index("eat.02")] = 50.0
        assert tagger.loss(make_instance(sense="eat.02", args={})) < 1e-6

    @pytest.mark.slow
    def test_full_gradient_check(self):
        tagger = make_tagger(shared_layers=2, hidden_size=2, embedding_dim=3)
        instance = make_instance(forms=("she", "eats", "bread", "today", "now"))
        assert grad_check(lambda arrays: tagger.compute_loss(instance, arrays=arrays), tagger.params.arrays) < 1e-4
