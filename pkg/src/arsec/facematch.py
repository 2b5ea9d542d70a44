"""Face identity matching over 128-dim embeddings.

Two routes exist: exhaustive nearest-neighbor thresholding (authoritative) and
a one-vs-rest linear SVM trained over enrolled vectors (fast candidate
proposal at scale). The SVM has no native unknown class, so every candidate is
vetoed by distance-to-nearest-enrolled <= tau; when the two routes disagree the
distance rule wins and the disagreement is counted for inspection.
"""
from __future__ import annotations

import logging
import threading
from dataclasses import dataclass

import numpy as np
from sklearn.svm import LinearSVC

from .errors import InsufficientClasses, StaleModel, UnknownPerson
from .model import FaceEmbedding, MatchResult, check_vector

logger = logging.getLogger(__name__)

DEFAULT_TAU = 0.6


def match_embedding(vector, db: list[FaceEmbedding], tau: float = DEFAULT_TAU) -> MatchResult:
    """Nearest enrolled embedding by Euclidean distance, thresholded at tau.

    Ties break by (distance, enroll_seq, person_id) so the result is total.
    """
    probe = check_vector(vector)
    if not db:
        return MatchResult.miss()
    matrix = np.stack([e.vector for e in db])
    distances = np.linalg.norm(matrix - probe, axis=1)
    best = min(range(len(db)), key=lambda i: (distances[i], db[i].enroll_seq, db[i].person_id))
    best_distance = float(distances[best])
    if best_distance <= tau:
        return MatchResult.hit(db[best].person_id, best_distance)
    return MatchResult.miss(best_distance)


@dataclass
class LinearClassifier:
    """One-vs-rest linear separator set over the enrolled persons."""

    model: LinearSVC
    classes: list[str]
    generation: int


def train_classifier(db: list[FaceEmbedding], generation: int = 0) -> LinearClassifier:
    """Fit a linear SVM over enrolled embeddings, one class per person."""
    persons = sorted({e.person_id for e in db if e.person_id})
    if len(persons) < 2:
        raise InsufficientClasses(f"need >=2 persons, have {len(persons)}")
    X = np.stack([e.vector for e in db if e.person_id])
    y = [e.person_id for e in db if e.person_id]
    model = LinearSVC(dual=False, random_state=0)
    model.fit(X, y)
    return LinearClassifier(model=model, classes=list(model.classes_), generation=generation)


def classify(clf: LinearClassifier, vector, db: list[FaceEmbedding],
             tau: float = DEFAULT_TAU, generation: int | None = None) -> MatchResult:
    """Top-scoring person per the linear model, vetoed by nearest-distance <= tau.

    The reported distance is the probe's distance to the candidate person's
    nearest enrolled embedding (the value the veto used).
    """
    if generation is not None and clf.generation != generation:
        raise StaleModel(f"classifier generation {clf.generation} != store generation {generation}")
    probe = check_vector(vector)
    scores = clf.model.decision_function(probe.reshape(1, -1))[0]
    if len(clf.classes) == 2:
        candidate = clf.classes[1] if scores > 0 else clf.classes[0]
    else:
        candidate = clf.classes[int(np.argmax(scores))]
    own = [e for e in db if e.person_id == candidate]
    if not own:
        return MatchResult.miss()
    distances = np.linalg.norm(np.stack([e.vector for e in own]) - probe, axis=1)
    nearest = float(distances.min())
    if nearest <= tau:
        return MatchResult.hit(candidate, nearest)
    return MatchResult.miss(nearest)


class FaceMatcher:
    """Store-backed matcher: caches enrolled vectors, retrains the SVM lazily.

    match/classify are read-only and callable concurrently; the classifier
    object is immutable once built and swapped atomically on retrain.
    """

    def __init__(self, store, tau: float = DEFAULT_TAU, enroll_cap: int = 20):
        self.store = store
        self.tau = tau
        self.enroll_cap = enroll_cap
        self.disagreements = 0
        self._lock = threading.Lock()
        self._db: list[FaceEmbedding] = []
        self._db_generation = -1
        self._clf: LinearClassifier | None = None

    def _current_db(self) -> list[FaceEmbedding]:
        generation = self.store.generation()
        with self._lock:
            if generation != self._db_generation:
                self._db = self.store.enrolled_embeddings()
                self._db_generation = generation
            return self._db

    def match(self, vector) -> MatchResult:
        return match_embedding(vector, self._current_db(), self.tau)

    def _fresh_classifier(self, db: list[FaceEmbedding]) -> LinearClassifier:
        generation = self._db_generation
        clf = self._clf
        if clf is None or clf.generation != generation:
            clf = train_classifier(db, generation)
            self._clf = clf
        return clf

    def identify(self, vector) -> MatchResult:
        """Match a probe, consulting the SVM when trainable.

        The distance rule is authoritative: the returned result always equals
        match_embedding. SVM disagreements only increment a counter.
        """
        db = self._current_db()
        nn = match_embedding(vector, db, self.tau)
        persons = {e.person_id for e in db}
        if len(persons) >= 2:
            clf = self._fresh_classifier(db)
            svm = classify(clf, vector, db, self.tau, generation=clf.generation)
            if (svm.matched, svm.person_id) != (nn.matched, nn.person_id):
                self.disagreements += 1
                logger.info("svm disagreed with nearest-neighbor: %s vs %s", svm, nn)
        return nn

    def enroll(self, vector, person_id: str, source_media: str | None = None) -> str:
        """Persist and attribute an embedding; the next identify retrains."""
        if not self.store.person_exists(person_id):
            raise UnknownPerson(person_id)
        emb = self.store.enroll_to_person(person_id, vector, source_media, cap=self.enroll_cap)
        return emb.embedding_id
