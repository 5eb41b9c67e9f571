"""
Module for annotating propositions with entities.

Entity annotations feed the common-entity feature: each node is mapped to a
bag of entity keys with counts. Three annotators are available:

* OfflineEntityAnnotator: maximal runs of capitalized tokens, no dependencies.
* RemoteEntityAnnotator: an HTTP entity-linking service (TAGME-compatible
  JSON), with an optional fallback to the offline annotator.
* SpacyEntityAnnotator: named entities from a spaCy pipeline.

All annotators cache results per proposition text; the cache is safe under
concurrent lookups and can be persisted to disk so repeated experiments never
re-query a remote service.
"""
from collections import Counter
import json
import logging
import os
from pathlib import Path
import string
import threading
import time
from typing import Any, Dict, Mapping, Optional, Union

# requests is only needed by the remote annotator
try:
    import requests
except ImportError:
    requests = None

from corpus_handler import PropositionNode

logger = logging.getLogger(__name__)

EntityAnnotation = Dict[str, int]

API_KEY_ENV = "ARGSTRUCT_TAGME_KEY"
DEFAULT_ENDPOINT = "https://tagme.d4science.org/tagme/tag"
ANNOTATOR_MODES = ("offline", "remote", "remote-with-fallback", "spacy")

_SENTENCE_END = ".,;:!?"
_EDGE_PUNCTUATION = string.punctuation + "“”‘’"


class AnnotatorError(ValueError):
    """Raised when entity annotation cannot be performed."""


class EntityAnnotator:
    """
    Base class for annotators with a thread-safe per-text cache.

    Subclasses implement _extract(text) returning entity key counts; keys are
    lowercased here so annotations are case-stable.
    """

    name = "base"

    def __init__(self) -> None:
        self._cache: Dict[str, EntityAnnotation] = {}
        self._lock = threading.Lock()

    def annotate(self, text: str) -> EntityAnnotation:
        with self._lock:
            cached = self._cache.get(text)
        if cached is not None:
            return dict(cached)

        counts: Counter = Counter()
        for key, count in self._extract(text).items():
            key = " ".join(key.lower().split())
            if key and count > 0:
                counts[key] += count
        annotation = dict(counts)

        with self._lock:
            self._cache.setdefault(text, annotation)
        return dict(annotation)

    def _extract(self, text: str) -> Mapping[str, int]:
        raise NotImplementedError

    def save_cache(self, path: Union[str, Path]) -> None:
        """Persist the annotation cache as JSON."""
        with self._lock:
            snapshot = {"annotator": self.name, "annotations": dict(self._cache)}
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(snapshot, handle, ensure_ascii=False, sort_keys=True, indent=1)

    def load_cache(self, path: Union[str, Path]) -> int:
        """
        Merge a cache written by save_cache into this annotator.

        Returns:
            The number of cached texts loaded

        Raises:
            AnnotatorError: If the cache was written by a different annotator
        """
        with open(path, "r", encoding="utf-8") as handle:
            snapshot = json.load(handle)
        if snapshot.get("annotator") != self.name:
            raise AnnotatorError(
                f"{path}: cache belongs to annotator {snapshot.get('annotator')!r}, not {self.name!r}"
            )
        annotations = snapshot.get("annotations", {})
        with self._lock:
            for text, annotation in annotations.items():
                self._cache.setdefault(text, {key: int(count) for key, count in annotation.items()})
        return len(annotations)


class OfflineEntityAnnotator(EntityAnnotator):
    """
    Treats maximal runs of capitalized tokens in the raw text as entities.

    A token ending in sentence punctuation closes the current run, so
    "Labor. Labor won." yields two separate "labor" mentions.
    """

    name = "offline"

    def _extract(self, text: str) -> Mapping[str, int]:
        counts: Counter = Counter()
        run = []
        for raw in text.split():
            token = raw.strip(_EDGE_PUNCTUATION)
            if token and token[0].isupper():
                run.append(token)
                if raw.rstrip("\"')”’")[-1:] in _SENTENCE_END:
                    counts[" ".join(run)] += 1
                    run = []
                continue
            if run:
                counts[" ".join(run)] += 1
                run = []
        if run:
            counts[" ".join(run)] += 1
        return counts


class RemoteEntityAnnotator(EntityAnnotator):
    """
    Client for a TAGME-compatible entity-linking service.

    Requests are serialized and spaced by min_interval seconds. On transport
    failure the annotator falls back to offline annotation with a warning,
    unless hard_fail is set.

    Attributes:
        endpoint: Service URL; queried with GET parameters "text", "lang" and
            "gcube-token"
        hard_fail: Raise AnnotatorError instead of falling back
    """

    name = "remote"

    def __init__(self, endpoint: str = DEFAULT_ENDPOINT, api_key: Optional[str] = None,
                 hard_fail: bool = False, min_interval: float = 0.1, timeout: float = 10.0,
                 session: Optional[Any] = None, lang: str = "en") -> None:
        super().__init__()
        if session is None:
            if requests is None:
                raise ImportError(
                    "The requests package is required for remote annotation. "
                    "Install it with: pip install requests"
                )
            session = requests.Session()
        self.endpoint = endpoint
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV, "")
        self.hard_fail = hard_fail
        self.min_interval = min_interval
        self.timeout = timeout
        self.lang = lang
        self._session = session
        self._request_lock = threading.Lock()
        self._last_request = 0.0
        self._fallback = OfflineEntityAnnotator()

    def _extract(self, text: str) -> Mapping[str, int]:
        try:
            payload = self._query(text)
        except Exception as e:
            if self.hard_fail:
                raise AnnotatorError(f"remote annotation failed: {e}")
            logger.warning("Remote annotation failed (%s); using offline annotation", e)
            return self._fallback._extract(text)

        counts: Counter = Counter()
        for annotation in payload.get("annotations", []):
            title = annotation.get("title")
            if title:
                counts[title] += 1
        return counts

    def _query(self, text: str) -> Dict[str, Any]:
        with self._request_lock:
            wait = self.min_interval - (time.monotonic() - self._last_request)
            if wait > 0:
                time.sleep(wait)
            try:
                response = self._session.get(
                    self.endpoint,
                    params={"text": text, "lang": self.lang, "gcube-token": self.api_key},
                    timeout=self.timeout,
                )
            finally:
                self._last_request = time.monotonic()
        response.raise_for_status()
        return response.json()


def load_spacy_model(model_name: str = "en_core_web_sm") -> Any:
    """
    Load a spaCy language model.

    Args:
        model_name: Name of the spaCy model to load

    Returns:
        Loaded spaCy language model

    Raises:
        ImportError: If spaCy is not installed
        ValueError: If the model can't be loaded
    """
    try:
        import spacy
    except ImportError:
        raise ImportError("spaCy is required for the 'spacy' annotator. Install it with: pip install spacy")
    try:
        return spacy.load(model_name)
    except OSError:
        raise ValueError(
            f"Model '{model_name}' not found. You may need to download it using: "
            f"python -m spacy download {model_name}"
        )


class SpacyEntityAnnotator(EntityAnnotator):
    """Uses the named entities recognized by a spaCy pipeline as entity keys."""

    name = "spacy"

    def __init__(self, model: Union[str, Any] = "en_core_web_sm") -> None:
        super().__init__()
        self._nlp = load_spacy_model(model) if isinstance(model, str) else model

    def _extract(self, text: str) -> Mapping[str, int]:
        doc = self._nlp(text)
        return Counter(ent.text for ent in doc.ents)


def annotate_entities(node: PropositionNode, annotator: EntityAnnotator) -> EntityAnnotation:
    """Annotate one proposition; results are cached by the annotator."""
    return annotator.annotate(node.text)


def create_annotator(mode: str = "offline", endpoint: Optional[str] = None,
                     spacy_model: str = "en_core_web_sm") -> EntityAnnotator:
    """
    Build an annotator for a configuration mode.

    Args:
        mode: One of "offline", "remote", "remote-with-fallback", "spacy"
        endpoint: Remote service URL (remote modes only)
        spacy_model: spaCy model name ("spacy" mode only)

    Raises:
        AnnotatorError: If the mode is unknown
    """
    if mode == "offline":
        return OfflineEntityAnnotator()
    if mode in ("remote", "remote-with-fallback"):
        return RemoteEntityAnnotator(endpoint=endpoint or DEFAULT_ENDPOINT, hard_fail=(mode == "remote"))
    if mode == "spacy":
        return SpacyEntityAnnotator(spacy_model)
    raise AnnotatorError(f"Invalid annotator mode '{mode}'. Valid options are: {', '.join(ANNOTATOR_MODES)}")
