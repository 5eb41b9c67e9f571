"""
Tests for the entity_annotator module.
"""
import os
import tempfile
import unittest

import pytest

from corpus_handler import PropositionNode
from entity_annotator import (
    AnnotatorError, OfflineEntityAnnotator, RemoteEntityAnnotator, SpacyEntityAnnotator,
    annotate_entities, create_annotator,
)


class FakeResponse:
    def __init__(self, payload):
        self.payload = payload

    def raise_for_status(self):
        pass

    def json(self):
        return self.payload


class FakeSession:
    """Stands in for requests.Session; records the queried texts."""

    def __init__(self, payload=None, error=None):
        self.payload = payload or {"annotations": []}
        self.error = error
        self.calls = []

    def get(self, url, params=None, timeout=None):
        self.calls.append(params["text"])
        if self.error is not None:
            raise self.error
        return FakeResponse(self.payload)


class TestOfflineAnnotator(unittest.TestCase):
    """Test cases for capitalization-based annotation."""

    def test_capitalized_runs(self):
        """Test that sentence punctuation splits runs of capitalized tokens."""
        node = PropositionNode("n", "Steve Bracks backed Labor. Labor won.")
        self.assertEqual(annotate_entities(node, OfflineEntityAnnotator()), {"steve bracks": 1, "labor": 2})

    def test_lowercase_text(self):
        """Test that all-lowercase text has no entities."""
        self.assertEqual(OfflineEntityAnnotator().annotate("the budget was balanced"), {})

    def test_cache_round_trip(self):
        """Test saving and loading the annotation cache."""
        annotator = OfflineEntityAnnotator()
        annotator.annotate("Labor won in Victoria")
        with tempfile.TemporaryDirectory() as tmpdir:
            path = os.path.join(tmpdir, "entities.json")
            annotator.save_cache(path)
            fresh = OfflineEntityAnnotator()
            self.assertEqual(fresh.load_cache(path), 1)
            self.assertEqual(fresh.annotate("Labor won in Victoria"), {"labor": 1, "victoria": 1})

            remote = RemoteEntityAnnotator(session=FakeSession(), min_interval=0.0)
            with self.assertRaises(AnnotatorError):
                remote.load_cache(path)


class TestRemoteAnnotator(unittest.TestCase):
    """Test cases for the entity-linking client."""

    def test_titles_become_keys(self):
        """Test that linked titles are counted and cached."""
        session = FakeSession({"annotations": [{"title": "Labor Party"}, {"title": "Labor Party"}, {"spot": "x"}]})
        annotator = RemoteEntityAnnotator(session=session, api_key="key", min_interval=0.0)
        self.assertEqual(annotator.annotate("Labor won"), {"labor party": 2})
        annotator.annotate("Labor won")
        self.assertEqual(session.calls, ["Labor won"])

    def test_fallback_on_failure(self):
        """Test that a transport failure falls back to offline annotation with a warning."""
        session = FakeSession(error=ConnectionError("service down"))
        annotator = RemoteEntityAnnotator(session=session, api_key="key", min_interval=0.0)
        with self.assertLogs("entity_annotator", level="WARNING"):
            result = annotator.annotate("Steve Bracks backed Labor.")
        self.assertEqual(result, {"steve bracks": 1, "labor": 1})

    def test_hard_fail(self):
        """Test that hard-fail mode raises instead of falling back."""
        session = FakeSession(error=ConnectionError("service down"))
        annotator = RemoteEntityAnnotator(session=session, hard_fail=True, min_interval=0.0)
        with self.assertRaises(AnnotatorError):
            annotator.annotate("Labor")

    def test_create_annotator(self):
        """Test annotator construction by mode name."""
        self.assertIsInstance(create_annotator("offline"), OfflineEntityAnnotator)
        with self.assertRaises(AnnotatorError):
            create_annotator("wikifier")


class TestSpacyAnnotator(unittest.TestCase):
    """Test cases for the spaCy-backed annotator."""

    @classmethod
    def setUpClass(cls):
        """Load spaCy model once for all tests."""
        spacy = pytest.importorskip("spacy")
        try:
            cls.nlp = spacy.load("en_core_web_sm")
        except OSError:
            pytest.skip("spaCy model 'en_core_web_sm' not available. Skipping tests.")

    def test_named_entities(self):
        """Test that recognized entities are lowercased keys."""
        annotation = SpacyEntityAnnotator(self.nlp).annotate("Barack Obama visited Paris in 2010.")
        self.assertTrue(annotation)
        self.assertTrue(all(key == key.lower() for key in annotation))


if __name__ == "__main__":
    unittest.main()
