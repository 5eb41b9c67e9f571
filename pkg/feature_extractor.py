"""
Module for extracting pairwise relation features.

Every ordered (Text, Hypothesis) node pair is turned into a fixed-layout
numeric vector built from these feature groups, in this order:

    discourse  11  discourse-marker counts (6 Text markers, 5 Hypothesis markers)
    modal      16  modal-verb counts on both sides
    lcp         1  length of the longest common phrase
    entity      1  inner product of the two entity annotations
    ngram      2V  counts of the fitted n-gram vocabulary on both sides
    wordvec    2d  summed word vectors of each side
    negation   2L  negation-marker counts on both sides
    contrast    3  negation/contrast relation indicators

The layout of one model is fixed by its fitted artifacts (n-gram vocabulary,
embedding table, lexicons) and summarized by a fingerprint stored with the
model.
"""
from collections import Counter
from dataclasses import dataclass, field
import difflib
import hashlib
import json
import logging
import string
from typing import Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from corpus_handler import Argument, LabeledPair
from entity_annotator import EntityAnnotation, EntityAnnotator, annotate_entities
from resource_loader import EmbeddingTable

logger = logging.getLogger(__name__)

TEXT_DISCOURSE_MARKERS = ("as", "or", "and", "roughly", "then", "since")
HYPOTHESIS_DISCOURSE_MARKERS = ("therefore", "however", "though", "but", "quite")
MODAL_WORDS = ("can", "could", "may", "might", "must", "will", "would", "should")
DEFAULT_NEGATION_LEXICON = (
    "not", "no", "never", "n't", "can't", "cannot", "won't", "don't", "neither", "nor", "without",
)
NEGATION_WINDOW = 2
DEFAULT_NGRAM_THRESHOLD = 3.0

FEATURE_GROUPS = ("discourse", "modal", "lcp", "entity", "ngram", "wordvec", "negation", "contrast")
SUPPORT_FEATURE_GROUPS = ("discourse", "modal", "lcp", "entity", "ngram", "wordvec")

_EDGE_PUNCTUATION = string.punctuation + "“”‘’"


class FeatureConfigError(ValueError):
    """Raised when a feature layout cannot be built or applied."""


def tokenize(text: str) -> List[str]:
    """
    Split text into lowercased word tokens.

    Splits on whitespace, strips leading and trailing punctuation from each
    piece and drops pieces that become empty; internal apostrophes survive
    ("can't" stays one token).
    """
    tokens = []
    for piece in text.split():
        token = piece.strip(_EDGE_PUNCTUATION).lower()
        if token:
            tokens.append(token)
    return tokens


def _counts(tokens: Sequence[str], words: Sequence[str]) -> List[float]:
    counter = Counter(tokens)
    return [float(counter[word]) for word in words]


def discourse_marker_features(text: Sequence[str], hyp: Sequence[str]) -> List[float]:
    """Counts of the Text discourse markers in Text, then the Hypothesis markers in Hypothesis."""
    return _counts(text, TEXT_DISCOURSE_MARKERS) + _counts(hyp, HYPOTHESIS_DISCOURSE_MARKERS)


def modal_features(text: Sequence[str], hyp: Sequence[str]) -> List[float]:
    """Counts of each modal word in Text, then in Hypothesis."""
    return _counts(text, MODAL_WORDS) + _counts(hyp, MODAL_WORDS)


def longest_common_phrase(text: Sequence[str], hyp: Sequence[str]) -> float:
    """Length in tokens of the longest contiguous token sequence present in both sides."""
    if not text or not hyp:
        return 0.0
    matcher = difflib.SequenceMatcher(None, list(text), list(hyp), autojunk=False)
    return float(matcher.find_longest_match(0, len(text), 0, len(hyp)).size)


def entity_overlap(text_ann: Mapping[str, int], hyp_ann: Mapping[str, int]) -> float:
    """Inner product of two entity-count annotations."""
    return float(sum(count * hyp_ann[key] for key, count in text_ann.items() if key in hyp_ann))


@dataclass(frozen=True)
class NgramVocabulary:
    """
    Unigrams and bigrams selected by their Text/Hypothesis likelihood ratio.

    Bigrams are stored as space-joined strings. Each list is sorted so the
    feature layout is stable.
    """

    text_unigrams: Tuple[str, ...] = ()
    text_bigrams: Tuple[str, ...] = ()
    hyp_unigrams: Tuple[str, ...] = ()
    hyp_bigrams: Tuple[str, ...] = ()
    threshold: float = DEFAULT_NGRAM_THRESHOLD

    @property
    def ngrams(self) -> Tuple[str, ...]:
        return self.text_unigrams + self.text_bigrams + self.hyp_unigrams + self.hyp_bigrams

    @property
    def size(self) -> int:
        return len(self.ngrams)

    @property
    def feature_width(self) -> int:
        return 2 * self.size

    def to_dict(self) -> Dict[str, object]:
        return {
            "text_unigrams": list(self.text_unigrams),
            "text_bigrams": list(self.text_bigrams),
            "hyp_unigrams": list(self.hyp_unigrams),
            "hyp_bigrams": list(self.hyp_bigrams),
            "threshold": self.threshold,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, object]) -> "NgramVocabulary":
        return cls(
            text_unigrams=tuple(data["text_unigrams"]),
            text_bigrams=tuple(data["text_bigrams"]),
            hyp_unigrams=tuple(data["hyp_unigrams"]),
            hyp_bigrams=tuple(data["hyp_bigrams"]),
            threshold=float(data["threshold"]),
        )


def _ngrams(tokens: Sequence[str], order: int) -> List[str]:
    return [" ".join(tokens[i:i + order]) for i in range(len(tokens) - order + 1)]


def fit_ngram_vocab(pairs: Sequence[Tuple[Sequence[str], Sequence[str]]],
                    threshold: float = DEFAULT_NGRAM_THRESHOLD) -> NgramVocabulary:
    """
    Select n-grams whose smoothed Text/Hypothesis likelihood ratio reaches the threshold.

    For each order n in {1, 2}: p(g|side) = (count(g, side) + 1) / (total(side) + V)
    where V is the number of distinct n-grams of that order on either side.
    An n-gram joins the Text list when p(g|Text)/p(g|Hyp) >= threshold and the
    Hypothesis list when the inverse ratio does.

    Args:
        pairs: (Text tokens, Hypothesis tokens) of training edges
        threshold: Likelihood-ratio threshold r > 1

    Returns:
        The fitted NgramVocabulary

    Raises:
        ValueError: If pairs is empty or threshold <= 1
    """
    if not pairs:
        raise ValueError("cannot fit an n-gram vocabulary on empty training input")
    if not threshold > 1:
        raise ValueError(f"n-gram threshold must be greater than 1, got {threshold}")

    selected: Dict[Tuple[str, int], List[str]] = {}
    for order in (1, 2):
        text_counts: Counter = Counter()
        hyp_counts: Counter = Counter()
        for text, hyp in pairs:
            text_counts.update(_ngrams(text, order))
            hyp_counts.update(_ngrams(hyp, order))
        vocabulary_size = len(set(text_counts) | set(hyp_counts))
        text_total = sum(text_counts.values()) + vocabulary_size
        hyp_total = sum(hyp_counts.values()) + vocabulary_size

        text_side, hyp_side = [], []
        for gram in set(text_counts) | set(hyp_counts):
            p_text = (text_counts[gram] + 1) / text_total
            p_hyp = (hyp_counts[gram] + 1) / hyp_total
            if p_text / p_hyp >= threshold:
                text_side.append(gram)
            elif p_hyp / p_text >= threshold:
                hyp_side.append(gram)
        selected[("text", order)] = sorted(text_side)
        selected[("hyp", order)] = sorted(hyp_side)

    vocab = NgramVocabulary(
        text_unigrams=tuple(selected[("text", 1)]),
        text_bigrams=tuple(selected[("text", 2)]),
        hyp_unigrams=tuple(selected[("hyp", 1)]),
        hyp_bigrams=tuple(selected[("hyp", 2)]),
        threshold=threshold,
    )
    logger.info(
        "Fitted n-gram vocabulary: %d unigrams, %d bigrams",
        len(vocab.text_unigrams) + len(vocab.hyp_unigrams),
        len(vocab.text_bigrams) + len(vocab.hyp_bigrams),
    )
    return vocab


def ngram_features(text: Sequence[str], hyp: Sequence[str], vocab: NgramVocabulary) -> List[float]:
    """For each vocabulary n-gram, its count in Text followed by its count in Hypothesis."""
    text_counts = Counter(_ngrams(text, 1)) + Counter(_ngrams(text, 2))
    hyp_counts = Counter(_ngrams(hyp, 1)) + Counter(_ngrams(hyp, 2))
    values = []
    for gram in vocab.ngrams:
        values.append(float(text_counts[gram]))
        values.append(float(hyp_counts[gram]))
    return values


def _embedding_sum(tokens: Sequence[str], table: EmbeddingTable) -> np.ndarray:
    total = np.zeros(table.dimension)
    for token in tokens:
        vector = table.lookup(token)
        if vector is not None:
            total += vector
    return total


def wordvec_features(text: Sequence[str], hyp: Sequence[str], table: EmbeddingTable) -> np.ndarray:
    """Sum of in-vocabulary Text word vectors followed by the same for Hypothesis."""
    return np.concatenate([_embedding_sum(text, table), _embedding_sum(hyp, table)])


def negation_marker_features(text: Sequence[str], hyp: Sequence[str],
                             lexicon: Sequence[str] = DEFAULT_NEGATION_LEXICON) -> List[float]:
    """Counts of each negation-lexicon word in Text, then in Hypothesis."""
    return _counts(text, lexicon) + _counts(hyp, lexicon)


def _negated_tokens(tokens: Sequence[str], lexicon: FrozenSet[str]) -> Tuple[set, set]:
    negated, plain = set(), set()
    for index, token in enumerate(tokens):
        if token in lexicon:
            continue
        window = tokens[max(0, index - NEGATION_WINDOW):index]
        if any(previous in lexicon for previous in window):
            negated.add(token)
        else:
            plain.add(token)
    return negated, plain


def contrast_relation_features(text: Sequence[str], hyp: Sequence[str],
                               antonyms: Mapping[str, FrozenSet[str]],
                               lexicon: Sequence[str] = DEFAULT_NEGATION_LEXICON) -> List[float]:
    """
    Lexical negation/contrast indicators for an ordered pair.

    Returns:
        [number of (Text token, Hypothesis token) antonym pairs,
         1 if exactly one side contains a negation token else 0,
         number of token types negated on one side and present un-negated on the other]
    """
    negation_words = frozenset(lexicon)
    hyp_counts = Counter(hyp)
    antonym_pairs = sum(
        hyp_counts[antonym] for token in text for antonym in antonyms.get(token, ())
    )

    text_negated = any(token in negation_words for token in text)
    hyp_negated = any(token in negation_words for token in hyp)
    parity = 1.0 if text_negated != hyp_negated else 0.0

    text_neg, text_plain = _negated_tokens(text, negation_words)
    hyp_neg, hyp_plain = _negated_tokens(hyp, negation_words)
    negated_overlap = len(text_neg & hyp_plain) + len(hyp_neg & text_plain)

    return [float(antonym_pairs), parity, float(negated_overlap)]


@dataclass
class FeatureArtifacts:
    """
    Fitted and loaded resources that feature groups depend on.

    Attributes:
        vocab: Fitted n-gram vocabulary (ngram group)
        embeddings: Word embedding table (wordvec group)
        annotator: Entity annotator (entity group)
        negation_lexicon: Negation words (negation and contrast groups)
        antonyms: Symmetric antonym map (contrast group); may be empty
    """

    vocab: Optional[NgramVocabulary] = None
    embeddings: Optional[EmbeddingTable] = None
    annotator: Optional[EntityAnnotator] = None
    negation_lexicon: Tuple[str, ...] = DEFAULT_NEGATION_LEXICON
    antonyms: Mapping[str, FrozenSet[str]] = field(default_factory=dict)


@dataclass(frozen=True)
class LayoutEntry:
    name: str
    offset: int
    width: int


@dataclass(frozen=True)
class FeatureLayout:
    """
    Ordered, contiguous placement of the enabled feature groups.

    Attributes:
        entries: (group, offset, width) for every enabled group, in FEATURE_GROUPS order
        fingerprint: Digest of the layout and the artifacts that shape it
    """

    entries: Tuple[LayoutEntry, ...]
    fingerprint: str

    @property
    def width(self) -> int:
        return sum(entry.width for entry in self.entries)

    @property
    def groups(self) -> Tuple[str, ...]:
        return tuple(entry.name for entry in self.entries)

    def slice_of(self, group: str) -> slice:
        for entry in self.entries:
            if entry.name == group:
                return slice(entry.offset, entry.offset + entry.width)
        raise KeyError(group)


def check_groups(groups: Sequence[str]) -> Tuple[str, ...]:
    """
    Validate a feature mask and return it in canonical layout order.

    Raises:
        FeatureConfigError: If the mask is empty or names an unknown group
    """
    unknown = [group for group in groups if group not in FEATURE_GROUPS]
    if unknown:
        raise FeatureConfigError(
            f"Unknown feature group(s) {unknown}. Valid options are: {', '.join(FEATURE_GROUPS)}"
        )
    if not groups:
        raise FeatureConfigError("feature mask must enable at least one group")
    return tuple(group for group in FEATURE_GROUPS if group in groups)


def build_layout(groups: Sequence[str], artifacts: FeatureArtifacts) -> FeatureLayout:
    """
    Place the enabled groups and fingerprint the result.

    Raises:
        FeatureConfigError: If the mask is invalid or an enabled group lacks its artifact
    """
    groups = check_groups(groups)
    fingerprint_data: Dict[str, object] = {"groups": list(groups)}
    widths = {}
    for group in groups:
        if group == "discourse":
            widths[group] = len(TEXT_DISCOURSE_MARKERS) + len(HYPOTHESIS_DISCOURSE_MARKERS)
        elif group == "modal":
            widths[group] = 2 * len(MODAL_WORDS)
        elif group in ("lcp", "entity"):
            widths[group] = 1
        elif group == "ngram":
            if artifacts.vocab is None:
                raise FeatureConfigError("feature group 'ngram' requires a fitted n-gram vocabulary")
            widths[group] = artifacts.vocab.feature_width
            fingerprint_data["ngram"] = artifacts.vocab.to_dict()
        elif group == "wordvec":
            if artifacts.embeddings is None:
                raise FeatureConfigError("feature group 'wordvec' requires an embeddings file")
            widths[group] = 2 * artifacts.embeddings.dimension
            fingerprint_data["wordvec"] = [artifacts.embeddings.dimension, len(artifacts.embeddings)]
        elif group == "negation":
            widths[group] = 2 * len(artifacts.negation_lexicon)
            fingerprint_data["negation"] = list(artifacts.negation_lexicon)
        elif group == "contrast":
            widths[group] = 3
            fingerprint_data["contrast"] = sorted(
                [word, sorted(antonyms)] for word, antonyms in artifacts.antonyms.items()
            )
            fingerprint_data["negation"] = list(artifacts.negation_lexicon)
        if group == "entity" and artifacts.annotator is None:
            raise FeatureConfigError("feature group 'entity' requires an entity annotator")

    entries, offset = [], 0
    for group in groups:
        entries.append(LayoutEntry(group, offset, widths[group]))
        offset += widths[group]

    digest = hashlib.sha256(json.dumps(fingerprint_data, sort_keys=True).encode("utf-8")).hexdigest()
    return FeatureLayout(entries=tuple(entries), fingerprint=digest[:16])


def extract(pair: LabeledPair, arg: Argument, layout: FeatureLayout, artifacts: FeatureArtifacts) -> np.ndarray:
    """
    Build the feature vector of one ordered pair.

    Args:
        pair: The (Text, Hypothesis) pair; its label is ignored
        arg: The argument both nodes belong to
        layout: Layout from build_layout
        artifacts: The artifacts the layout was built from

    Returns:
        A float64 vector of length layout.width

    Raises:
        FeatureConfigError: If an artifact required by an enabled group is missing
    """
    text_node = arg.node(pair.text_node)
    hyp_node = arg.node(pair.hypothesis_node)
    text, hyp = text_node.tokens, hyp_node.tokens

    blocks = []
    for group in layout.groups:
        if group == "discourse":
            blocks.append(discourse_marker_features(text, hyp))
        elif group == "modal":
            blocks.append(modal_features(text, hyp))
        elif group == "lcp":
            blocks.append([longest_common_phrase(text, hyp)])
        elif group == "entity":
            if artifacts.annotator is None:
                raise FeatureConfigError("feature group 'entity' requires an entity annotator")
            text_ann: EntityAnnotation = annotate_entities(text_node, artifacts.annotator)
            hyp_ann: EntityAnnotation = annotate_entities(hyp_node, artifacts.annotator)
            blocks.append([entity_overlap(text_ann, hyp_ann)])
        elif group == "ngram":
            if artifacts.vocab is None:
                raise FeatureConfigError("feature group 'ngram' requires a fitted n-gram vocabulary")
            blocks.append(ngram_features(text, hyp, artifacts.vocab))
        elif group == "wordvec":
            if artifacts.embeddings is None:
                raise FeatureConfigError("feature group 'wordvec' requires an embeddings file")
            blocks.append(wordvec_features(text, hyp, artifacts.embeddings))
        elif group == "negation":
            blocks.append(negation_marker_features(text, hyp, artifacts.negation_lexicon))
        elif group == "contrast":
            blocks.append(contrast_relation_features(text, hyp, artifacts.antonyms, artifacts.negation_lexicon))

    vector = np.concatenate([np.asarray(block, dtype=np.float64) for block in blocks])
    if vector.shape[0] != layout.width:
        raise FeatureConfigError(
            f"feature vector width {vector.shape[0]} does not match layout width {layout.width}; "
            "artifacts differ from the ones the layout was built with"
        )
    return vector


@dataclass
class FeaturePipeline:
    """A layout bound to its artifacts; turns pairs into feature matrices."""

    layout: FeatureLayout
    artifacts: FeatureArtifacts

    @classmethod
    def build(cls, groups: Sequence[str], artifacts: FeatureArtifacts) -> "FeaturePipeline":
        return cls(layout=build_layout(groups, artifacts), artifacts=artifacts)

    @property
    def fingerprint(self) -> str:
        return self.layout.fingerprint

    def extract(self, pair: LabeledPair, arg: Argument) -> np.ndarray:
        return extract(pair, arg, self.layout, self.artifacts)

    def extract_matrix(self, pairs: Sequence[LabeledPair], arguments: Mapping[str, Argument]) -> np.ndarray:
        """Stack the feature vectors of pairs drawn from the given arguments (keyed by id)."""
        if not pairs:
            return np.zeros((0, self.layout.width))
        return np.vstack([self.extract(pair, arguments[pair.argument_id]) for pair in pairs])


def support_pair_tokens(arguments: Sequence[Argument]) -> List[Tuple[Sequence[str], Sequence[str]]]:
    """(Text tokens, Hypothesis tokens) of every gold edge, the input of fit_ngram_vocab."""
    return [
        (arg.node(edge.child).tokens, arg.node(edge.parent).tokens)
        for arg in arguments
        for edge in arg.edges
    ]
