import math

import numpy as np
import pytest

from arsec.errors import DimensionError, InsufficientClasses, StaleModel, UnknownPerson
from arsec.facematch import FaceMatcher, classify, match_embedding, train_classifier
from arsec.model import FaceEmbedding

from conftest import ts


def brute_force_match(vector, db, tau):
    """Independent oracle: pure-python exhaustive scan with the tie-break rule."""
    best = None
    for emb in db:
        d = math.sqrt(sum((float(a) - float(b)) ** 2 for a, b in zip(emb.vector, vector)))
        key = (d, emb.enroll_seq, emb.person_id)
        if best is None or key < best[0]:
            best = (key, emb)
    if best is None:
        return (False, None)
    (distance, _, _), emb = best
    if distance <= tau:
        return (True, emb.person_id)
    return (False, None)


def make_db(rng, n_persons=50, per_person=5, spread=1.0):
    db = []
    seq = 0
    for p in range(n_persons):
        center = rng.uniform(0.0, spread, 128)
        for _ in range(per_person):
            seq += 1
            db.append(FaceEmbedding(
                embedding_id=f"emb-{seq}",
                vector=center + rng.normal(0, 0.05, 128),
                person_id=f"per-{p:03d}",
                enroll_seq=seq,
            ))
    return db


def separable_db(rng, n_persons=5, per_person=8, sigma=0.02):
    """Clusters with inter-centroid distance >= 3x intra spread."""
    centers = []
    while len(centers) < n_persons:
        c = rng.uniform(0.0, 4.0, 128)
        if all(np.linalg.norm(c - o) >= 3.0 for o in centers):
            centers.append(c)
    db = []
    seq = 0
    for p, center in enumerate(centers):
        for _ in range(per_person):
            seq += 1
            db.append(FaceEmbedding(f"emb-{seq}", center + rng.normal(0, sigma, 128),
                                    person_id=f"per-{p:03d}", enroll_seq=seq))
    return db, centers


def test_exact_vector_matches_at_zero_distance():
    db = make_db(np.random.default_rng(0), n_persons=3, per_person=2)
    result = match_embedding(db[4].vector.copy(), db, tau=0.6)
    assert result.matched and result.person_id == db[4].person_id
    assert result.distance == 0.0


def test_empty_db_is_no_match():
    result = match_embedding(np.zeros(128), [], tau=0.6)
    assert not result.matched and result.distance is None


def test_wrong_dimension_rejected():
    with pytest.raises(DimensionError):
        match_embedding(np.zeros(64), [], tau=0.6)
    with pytest.raises(DimensionError):
        match_embedding(np.full(128, np.nan), [], tau=0.6)


def test_matcher_agrees_with_brute_force_oracle():
    rng = np.random.default_rng(42)
    db = make_db(rng, n_persons=50, per_person=5)
    for _ in range(200):
        probe = rng.uniform(0.0, 1.0, 128)
        got = match_embedding(probe, db, tau=0.6)
        assert (got.matched, got.person_id) == brute_force_match(probe, db, 0.6)


def test_tie_break_prefers_earlier_enrollment():
    shared = np.ones(128)
    db = [
        FaceEmbedding("e2", shared.copy(), person_id="per-b", enroll_seq=2),
        FaceEmbedding("e1", shared.copy(), person_id="per-a", enroll_seq=1),
    ]
    result = match_embedding(shared, db, tau=0.6)
    assert result.person_id == "per-a"


def test_no_match_reports_best_distance_above_tau():
    db = make_db(np.random.default_rng(1), n_persons=2, per_person=1)
    probe = db[0].vector + 10.0
    result = match_embedding(probe, db, tau=0.6)
    assert not result.matched
    assert result.distance is not None and result.distance > 0.6


def test_train_requires_two_persons():
    db = make_db(np.random.default_rng(2), n_persons=1, per_person=3)
    with pytest.raises(InsufficientClasses):
        train_classifier(db)


def test_classifier_agrees_on_separable_clusters():
    rng = np.random.default_rng(3)
    db, centers = separable_db(rng, n_persons=4)
    clf = train_classifier(db)
    for p, center in enumerate(centers):
        for _ in range(25):
            probe = center + rng.normal(0, 0.02, 128)
            got = classify(clf, probe, db, tau=0.6)
            assert (got.matched, got.person_id) == brute_force_match(probe, db, 0.6)
            assert got.matched and got.person_id == f"per-{p:03d}"


def test_classifier_rejects_far_probe():
    rng = np.random.default_rng(4)
    db, _ = separable_db(rng, n_persons=3)
    probe = np.full(128, 50.0)
    result = classify(train_classifier(db), probe, db, tau=0.6)
    assert not result.matched
    assert result.distance > 0.6


def test_classifier_rejection_soundness_random_probes():
    rng = np.random.default_rng(5)
    db, _ = separable_db(rng, n_persons=4)
    clf = train_classifier(db)
    for _ in range(300):
        probe = rng.uniform(-1.0, 5.0, 128)
        result = classify(clf, probe, db, tau=0.6)
        if result.matched:
            assert result.distance <= 0.6


def test_stale_classifier_detected():
    db, _ = separable_db(np.random.default_rng(6), n_persons=2)
    clf = train_classifier(db, generation=1)
    with pytest.raises(StaleModel):
        classify(clf, db[0].vector, db, tau=0.6, generation=2)


def test_retrain_recognizes_third_person():
    rng = np.random.default_rng(7)
    db, centers = separable_db(rng, n_persons=3, per_person=5)
    two_person_db = [e for e in db if e.person_id != "per-002"]
    clf = train_classifier(two_person_db)
    assert "per-002" not in clf.classes
    retrained = train_classifier(db)
    probe = centers[2] + rng.normal(0, 0.02, 128)
    result = classify(retrained, probe, db, tau=0.6)
    assert result.matched and result.person_id == "per-002"


# -- store-backed matcher ------------------------------------------------------


def seed_person(store, name, center, at, shots=3, rng=None):
    rng = rng or np.random.default_rng(0)
    person = store.create_person(name, at)
    for _ in range(shots):
        store.enroll_to_person(person.person_id, center + rng.normal(0, 0.02, 128), None)
    return person


def test_enroll_then_match_same_vector(store):
    matcher = FaceMatcher(store, tau=0.6)
    person = store.create_person("Josh", ts("2024-06-01 09:00:00"))
    vec = np.random.default_rng(8).uniform(0, 1, 128)
    matcher.enroll(vec, person.person_id)
    result = matcher.match(vec)
    assert result.matched and result.person_id == person.person_id
    assert result.distance == 0.0


def test_enroll_unknown_person(store):
    matcher = FaceMatcher(store, tau=0.6)
    with pytest.raises(UnknownPerson):
        matcher.enroll(np.zeros(128), "per-missing")


def test_centroid_probe_matches_after_noisy_enrollments(store):
    rng = np.random.default_rng(9)
    matcher = FaceMatcher(store, tau=0.6)
    person = store.create_person("Josh", ts("2024-06-01 09:00:00"))
    center = rng.uniform(0, 1, 128)
    for _ in range(5):
        matcher.enroll(center + rng.normal(0, 0.05, 128), person.person_id)
    expected = min(
        np.linalg.norm(store.get_embedding(e).vector - center)
        for e in store.get_person(person.person_id).embeddings
    )
    assert expected <= 0.6  # oracle: nearest noisy enrollment stays within tau
    result = matcher.match(center)
    assert result.matched and result.person_id == person.person_id
    assert result.distance == pytest.approx(expected)


def test_monotone_enrollment_never_loses_a_match(store):
    rng = np.random.default_rng(10)
    matcher = FaceMatcher(store, tau=0.6)
    center = rng.uniform(0, 1, 128)
    person = seed_person(store, "Josh", center, ts("2024-06-01 09:00:00"), rng=rng)
    probes = [center + rng.normal(0, 0.02, 128) for _ in range(20)]
    matched_before = [p for p in probes if matcher.match(p).matched]
    before = {id(p): matcher.match(p).distance for p in matched_before}
    matcher.enroll(center + rng.normal(0, 0.02, 128), person.person_id)
    for p in matched_before:
        after = matcher.match(p)
        assert after.matched
        assert after.distance <= before[id(p)] + 1e-12


def test_identify_counts_svm_disagreements_but_returns_nn(store):
    rng = np.random.default_rng(11)
    matcher = FaceMatcher(store, tau=0.6)
    a = seed_person(store, "A", rng.uniform(0, 1, 128) + 0, ts("2024-06-01 09:00:00"), rng=rng)
    seed_person(store, "B", rng.uniform(0, 1, 128) + 4, ts("2024-06-01 09:10:00"), rng=rng)
    vec = store.get_embedding(store.get_person(a.person_id).embeddings[0]).vector
    result = matcher.identify(vec)
    nn = matcher.match(vec)
    assert (result.matched, result.person_id) == (nn.matched, nn.person_id)


def test_synthetic_encoder_passes_the_adapter_conformance_suite():
    from arsec.backends import SyntheticEncoderBackend, run_encoder_conformance

    from conftest import face_bytes

    backend = SyntheticEncoderBackend()
    samples = [face_bytes("a"), face_bytes("b"), b"no face in here"]
    backend.register("a", samples[0])
    backend.register("b", samples[1])
    run_encoder_conformance(backend, samples)


def test_determinism_same_probe_same_result(store):
    rng = np.random.default_rng(12)
    matcher = FaceMatcher(store, tau=0.6)
    seed_person(store, "A", rng.uniform(0, 1, 128), ts("2024-06-01 09:00:00"), rng=rng)
    seed_person(store, "B", rng.uniform(0, 1, 128) + 3, ts("2024-06-01 09:10:00"), rng=rng)
    probe = rng.uniform(0, 1, 128)
    assert matcher.identify(probe) == matcher.identify(probe)
