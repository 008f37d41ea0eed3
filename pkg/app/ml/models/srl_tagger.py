"""
Polyglot SRL Tagger

Deep bidirectional highway-LSTM tagger with per-language multitask heads:
every token gets an argument label (or NULL) for the marked predicate, and the
predicate itself gets a sense chosen among the senses its lemma was seen with.

Variants:
    MONO               - one language, shared stack only
    SIMPLE_POLYGLOT    - two languages share the stack; heads stay per language
    LANG_ID            - adds a learned language vector to every input row
    LANG_SPECIFIC_LSTM - adds a private 2-layer biLSTM per language whose
                         output joins shared layer 2's output as layer-3 input

Highway layer, per direction:
    r_t   = sigmoid(W_r [x_t; h_t] + b_r)
    out_t = r_t * h_t + (1 - r_t) * (W_c x_t)
"""

import copy
import logging
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from app.exceptions import ModelError
from app.ml.autodiff import Graph, Tensor
from app.models.conll_models import LabeledPrediction, PredicateInstance
from app.models.embedding_models import EmbeddingTable
from app.models.lexicon_models import SenseLexicon
from app.models.pydantic_models import PRIVATE_LAYERS, ModelConfig

logger = logging.getLogger(__name__)

NULL_LABEL = "<null>"
DIRECTIONS = ("fw", "bw")


def model_languages(config: ModelConfig) -> List[str]:
    """Languages with their own heads: the first only for MONO, all otherwise."""
    return list(config.languages) if config.variant.is_polyglot else [config.primary_language]


class ModelParams:
    """
    Trainable arrays of one tagger plus the per-language output vocabularies.

    Array names:
        indicator                          2 x indicator_dim
        lang_id/<L>                        1 x lang_id_dim
        shared/<layer>/<dir>/{W_x,W_h,b,W_r,b_r,W_c}
        private/<L>/<layer>/<dir>/...      (LANG_SPECIFIC_LSTM)
        arg/<L>/{W,b}                      (|labels(L)| + 1) x 2h
        sense/<L>/{W,b}                    |senses(L)| x 2h
    """

    def __init__(self,
                 arrays: Dict[str, np.ndarray],
                 label_vocab: Dict[str, List[str]],
                 sense_vocab: Dict[str, List[str]]):
        self.arrays = {name: np.asarray(value, dtype=np.float64) for name, value in arrays.items()}
        self.label_vocab = {language: list(labels) for language, labels in label_vocab.items()}
        self.sense_vocab = {language: list(senses) for language, senses in sense_vocab.items()}

    @classmethod
    def initialize(cls,
                   config: ModelConfig,
                   embedding_dim: int,
                   label_sets: Mapping[str, Sequence[str]],
                   sense_sets: Mapping[str, Sequence[str]],
                   seed: int) -> "ModelParams":
        """
        Draw initial parameters.

        Weight matrices are Glorot-uniform, biases zero, indicator and
        language vectors N(0, 0.1^2).

        Args:
            config: Architecture
            embedding_dim: Word vector dimension shared by all languages
            label_sets: Argument labels per language (NULL is added)
            sense_sets: Sense vocabulary per language (may be empty)
            seed: Random seed

        Returns:
            ModelParams: Fresh parameters
        """
        rng = np.random.default_rng(seed)
        hidden = config.hidden_size
        input_dim = embedding_dim + config.indicator_dim + (config.lang_id_dim if config.variant.uses_lang_id else 0)
        languages = model_languages(config)
        arrays: Dict[str, np.ndarray] = {}

        def glorot(rows: int, cols: int) -> np.ndarray:
            limit = np.sqrt(6.0 / (rows + cols))
            return rng.uniform(-limit, limit, size=(rows, cols))

        def add_bilstm_layer(prefix: str, in_dim: int) -> None:
            for direction in DIRECTIONS:
                base = f"{prefix}/{direction}"
                arrays[f"{base}/W_x"] = glorot(in_dim, 4 * hidden)
                arrays[f"{base}/W_h"] = glorot(hidden, 4 * hidden)
                arrays[f"{base}/b"] = np.zeros(4 * hidden)
                arrays[f"{base}/W_r"] = glorot(in_dim + hidden, hidden)
                arrays[f"{base}/b_r"] = np.zeros(hidden)
                arrays[f"{base}/W_c"] = glorot(in_dim, hidden)

        arrays["indicator"] = rng.normal(0.0, 0.1, size=(2, config.indicator_dim))
        if config.variant.uses_lang_id:
            for language in languages:
                arrays[f"lang_id/{language}"] = rng.normal(0.0, 0.1, size=(1, config.lang_id_dim))

        for layer in range(1, config.shared_layers + 1):
            if layer == 1:
                in_dim = input_dim
            elif layer == PRIVATE_LAYERS + 1 and config.variant.uses_private_lstm:
                in_dim = 4 * hidden
            else:
                in_dim = 2 * hidden
            add_bilstm_layer(f"shared/{layer}", in_dim)

        if config.variant.uses_private_lstm:
            for language in languages:
                for layer in range(1, PRIVATE_LAYERS + 1):
                    add_bilstm_layer(f"private/{language}/{layer}", input_dim if layer == 1 else 2 * hidden)

        label_vocab: Dict[str, List[str]] = {}
        sense_vocab: Dict[str, List[str]] = {}
        for language in languages:
            labels = [NULL_LABEL] + sorted(set(label_sets.get(language, ())))
            label_vocab[language] = labels
            arrays[f"arg/{language}/W"] = glorot(len(labels), 2 * hidden)
            arrays[f"arg/{language}/b"] = np.zeros(len(labels))
            senses = sorted(set(sense_sets.get(language, ())))
            sense_vocab[language] = senses
            if senses:
                arrays[f"sense/{language}/W"] = glorot(len(senses), 2 * hidden)
                arrays[f"sense/{language}/b"] = np.zeros(len(senses))

        n_values = sum(array.size for array in arrays.values())
        logger.info(f"Initialized {config.variant.value} parameters: {len(arrays)} tensors, {n_values} values")
        return cls(arrays, label_vocab, sense_vocab)

    def copy(self) -> "ModelParams":
        return ModelParams(
            {name: value.copy() for name, value in self.arrays.items()},
            copy.deepcopy(self.label_vocab),
            copy.deepcopy(self.sense_vocab),
        )

    def with_arrays(self, arrays: Dict[str, np.ndarray]) -> "ModelParams":
        """Same vocabularies over different arrays."""
        return ModelParams(arrays, self.label_vocab, self.sense_vocab)

    def __len__(self) -> int:
        return len(self.arrays)


class SRLTagger:
    """
    Forward computation, prediction and loss for one configured tagger.

    Word vectors are frozen constants; only ModelParams arrays are trained.
    A tagger holds no mutable state besides its parameter reference, so
    prediction on a fixed parameter snapshot is safe from several threads.
    """

    def __init__(self,
                 config: ModelConfig,
                 params: ModelParams,
                 embeddings: Mapping[str, EmbeddingTable],
                 lexicons: Mapping[str, SenseLexicon]):
        self.config = config
        self.params = params
        self.embeddings = dict(embeddings)
        self.lexicons = dict(lexicons)
        self.languages = model_languages(config)
        self._label_index = {
            language: {label: index for index, label in enumerate(labels)}
            for language, labels in params.label_vocab.items()
        }
        self._sense_index = {
            language: {sense: index for index, sense in enumerate(senses)}
            for language, senses in params.sense_vocab.items()
        }

    # Input assembly

    def _check_language(self, language: str) -> None:
        if language not in self.languages:
            raise ModelError(f"language '{language}' is not configured for this model ({self.languages})")
        if language not in self.embeddings:
            raise ModelError(f"no embeddings loaded for language '{language}'")

    def input_tensor(self, graph: Graph, instance: PredicateInstance, arrays: Mapping[str, np.ndarray]) -> Tensor:
        """Input rows: word vector, predicate indicator and (optionally) language vector."""
        language = instance.language
        self._check_language(language)
        n = len(instance.forms)
        words = graph.constant(self.embeddings[language].lookup_many(instance.forms))
        is_predicate = [1 if position == instance.predicate_index else 0 for position in range(1, n + 1)]
        parts = [words, graph.gather_rows(graph.param("indicator", arrays["indicator"]), is_predicate)]
        if self.config.variant.uses_lang_id:
            name = f"lang_id/{language}"
            parts.append(graph.gather_rows(graph.param(name, arrays[name]), [0] * n))
        return graph.concat(parts, axis=1)

    def build_input(self, instance: PredicateInstance) -> np.ndarray:
        """
        Input matrix of an instance.

        Returns:
            np.ndarray: n x (embedding_dim + indicator_dim [+ lang_id_dim])
        """
        return self.input_tensor(Graph(), instance, self.params.arrays).data.copy()

    # Encoder

    def _direction(self, graph: Graph, x: Tensor, prefix: str, reverse: bool,
                   arrays: Mapping[str, np.ndarray]) -> Tensor:
        hidden = self.config.hidden_size
        p = {name: graph.param(f"{prefix}/{name}", arrays[f"{prefix}/{name}"])
             for name in ("W_x", "W_h", "b", "W_r", "b_r", "W_c")}
        n = x.shape[0]
        projected = graph.add(graph.matmul(x, p["W_x"]), p["b"])

        h = graph.constant(np.zeros((1, hidden)))
        c = graph.constant(np.zeros((1, hidden)))
        outputs: List[Optional[Tensor]] = [None] * n
        steps = range(n - 1, -1, -1) if reverse else range(n)
        for t in steps:
            z = graph.add(graph.slice(projected, (slice(t, t + 1), slice(None))), graph.matmul(h, p["W_h"]))
            i = graph.sigmoid(graph.slice(z, (slice(None), slice(0, hidden))))
            f = graph.sigmoid(graph.slice(z, (slice(None), slice(hidden, 2 * hidden))))
            o = graph.sigmoid(graph.slice(z, (slice(None), slice(2 * hidden, 3 * hidden))))
            g = graph.tanh(graph.slice(z, (slice(None), slice(3 * hidden, 4 * hidden))))
            c = graph.add(graph.mul(f, c), graph.mul(i, g))
            h = graph.mul(o, graph.tanh(c))
            outputs[t] = h
        states = graph.concat(outputs, axis=0)

        gate = graph.sigmoid(graph.add(graph.matmul(graph.concat([x, states], axis=1), p["W_r"]), p["b_r"]))
        carried = graph.matmul(x, p["W_c"])
        return graph.add(carried, graph.mul(gate, graph.sub(states, carried)))

    def _bilstm_layer(self, graph: Graph, x: Tensor, prefix: str, arrays: Mapping[str, np.ndarray],
                      rng: Optional[np.random.Generator]) -> Tensor:
        forward = self._direction(graph, x, f"{prefix}/fw", False, arrays)
        backward = self._direction(graph, x, f"{prefix}/bw", True, arrays)
        out = graph.concat([forward, backward], axis=1)
        rate = self.config.dropout_rate
        if rng is not None and rate > 0:
            keep = (rng.random(out.shape) >= rate) / (1.0 - rate)
            out = graph.mul(out, graph.constant(keep))
        return out

    def encode_tensor(self, graph: Graph, inputs: Tensor, language: str,
                      arrays: Mapping[str, np.ndarray],
                      rng: Optional[np.random.Generator] = None) -> Tensor:
        """Run the shared stack (and the language's private stack) over input rows."""
        if self.config.variant.uses_private_lstm and language not in self.languages:
            raise ModelError(f"no language-specific LSTM for language '{language}'")
        states = inputs
        for layer in range(1, self.config.shared_layers + 1):
            states = self._bilstm_layer(graph, states, f"shared/{layer}", arrays, rng)
            if layer == PRIVATE_LAYERS and self.config.variant.uses_private_lstm:
                private = inputs
                for private_layer in range(1, PRIVATE_LAYERS + 1):
                    private = self._bilstm_layer(
                        graph, private, f"private/{language}/{private_layer}", arrays, rng
                    )
                states = graph.concat([states, private], axis=1)
        return states

    def encode(self, inputs: np.ndarray, language: str) -> np.ndarray:
        """
        Hidden states of an input matrix, without dropout.

        Returns:
            np.ndarray: n x (2 * hidden_size)
        """
        graph = Graph()
        return self.encode_tensor(graph, graph.constant(inputs), language, self.params.arrays).data.copy()

    # Heads

    def _heads(self, graph: Graph, instance: PredicateInstance, arrays: Mapping[str, np.ndarray],
               rng: Optional[np.random.Generator]) -> Tuple[Tensor, Optional[Tensor]]:
        language = instance.language
        inputs = self.input_tensor(graph, instance, arrays)
        states = self.encode_tensor(graph, inputs, language, arrays, rng)

        arg_w = graph.param(f"arg/{language}/W", arrays[f"arg/{language}/W"])
        arg_b = graph.param(f"arg/{language}/b", arrays[f"arg/{language}/b"])
        arg_logits = graph.add(graph.matmul(states, graph.transpose(arg_w)), arg_b)

        sense_logits = None
        if self.params.sense_vocab.get(language):
            sense_w = graph.param(f"sense/{language}/W", arrays[f"sense/{language}/W"])
            sense_b = graph.param(f"sense/{language}/b", arrays[f"sense/{language}/b"])
            position = instance.predicate_index - 1
            predicate_state = graph.slice(states, (slice(position, position + 1), slice(None)))
            sense_logits = graph.add(graph.matmul(predicate_state, graph.transpose(sense_w)), sense_b)
        return arg_logits, sense_logits

    def _candidate_indices(self, language: str, senses: Sequence[str]) -> List[int]:
        index = self._sense_index.get(language, {})
        return [index[sense] for sense in senses if sense in index]

    def predict(self, instance: PredicateInstance) -> LabeledPrediction:
        """
        Label every token independently and choose the predicate sense.

        The sense is the highest-scoring valid sense of the lemma; an unseen
        lemma gets the lexicon's fallback sense without consulting the head.

        Args:
            instance: Instance to label (gold fields are ignored)

        Returns:
            LabeledPrediction: Sense and non-NULL argument labels
        """
        graph = Graph()
        arg_logits, sense_logits = self._heads(graph, instance, self.params.arrays, rng=None)
        labels = self.params.label_vocab[instance.language]
        best = np.argmax(arg_logits.data, axis=1)
        args = {position + 1: labels[index] for position, index in enumerate(best) if index != 0}
        return LabeledPrediction(sense=self._choose_sense(instance, sense_logits), args=args)

    def _choose_sense(self, instance: PredicateInstance, sense_logits: Optional[Tensor]) -> str:
        lexicon = self.lexicons[instance.language]
        candidates = lexicon.valid_senses(instance.lemma)
        if not candidates:
            return lexicon.fallback_sense(instance.lemma)
        if len(candidates) == 1 or sense_logits is None:
            return candidates[0]
        indices = self._candidate_indices(instance.language, candidates)
        if not indices:
            return candidates[0]
        scores = sense_logits.data[0, indices]
        return self.params.sense_vocab[instance.language][indices[int(np.argmax(scores))]]

    # Training objective

    def compute_loss(self,
                     instance: PredicateInstance,
                     arrays: Optional[Mapping[str, np.ndarray]] = None,
                     rng: Optional[np.random.Generator] = None) -> Tuple[Graph, Tensor]:
        """
        Build the multitask loss graph of one instance.

        The loss is the mean per-token argument cross-entropy (NULL included)
        plus the sense cross-entropy under the softmax masked to the lemma's
        valid senses. The sense term is left out for identity-sense languages
        and for lemmas or senses outside the lexicon.

        Args:
            instance: Instance with gold annotations
            arrays: Parameter values (default: the tagger's parameters)
            rng: Dropout generator; None disables dropout

        Returns:
            Tuple of the graph and its scalar loss node

        Raises:
            ModelError: If a gold label is outside the language's label set
        """
        arrays = self.params.arrays if arrays is None else arrays
        language = instance.language
        graph = Graph()
        arg_logits, sense_logits = self._heads(graph, instance, arrays, rng)

        label_index = self._label_index[language]
        gold = []
        for position in range(1, len(instance.forms) + 1):
            label = instance.gold_args.get(position)
            if label is None:
                gold.append(0)
            elif label in label_index:
                gold.append(label_index[label])
            else:
                raise ModelError(f"gold label '{label}' is not in the {language} label set")
        arg_probs = graph.softmax(arg_logits)
        loss = graph.scale(graph.cross_entropy(arg_probs, gold), 1.0 / len(gold))

        lexicon = self.lexicons[language]
        if sense_logits is not None and not lexicon.identity_mode and lexicon.knows(instance.lemma):
            candidates = self._candidate_indices(language, lexicon.valid_senses(instance.lemma))
            gold_sense = self._sense_index[language].get(instance.gold_sense)
            if gold_sense is not None and gold_sense in candidates:
                mask = np.ones(sense_logits.shape, dtype=bool)
                mask[0, candidates] = False
                sense_probs = graph.masked_softmax(sense_logits, mask)
                loss = graph.add(loss, graph.cross_entropy(sense_probs, [gold_sense]))
        return graph, loss

    def loss(self, instance: PredicateInstance) -> float:
        """Loss value of one instance without dropout."""
        _, loss = self.compute_loss(instance)
        return loss.item()
