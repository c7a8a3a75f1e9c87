import numpy as np
import pytest

from insole_load.core import (
    FULL_LADDER_KG,
    FULL_SCALE_RAW,
    PhaseSchedule,
    PipelineConfig,
    RAW_PER_KG,
    validate_session,
)
from insole_load.ingest import extract_labeled_samples, parse_session
from insole_load.synth import (
    InvalidSpec,
    SynthSpec,
    generate_session,
    make_archetype,
    make_corpus,
    write_session,
)


def test_single_load_session_spans_45_seconds():
    rec, truth = generate_session(make_archetype(0), PhaseSchedule(), [2.0])
    assert len(rec) == 900  # 3 phases x 15 s x 20 Hz
    assert int(rec.timestamps_ms[-1]) == 45_000 - 50
    assert truth.load_kg_per_frame.shape == (900,)
    # load is held only during the middle (lift) phase
    assert np.all(truth.load_kg_per_frame[:300] == 0.0)
    assert np.all(truth.load_kg_per_frame[300:600] == 2.0)
    assert np.all(truth.load_kg_per_frame[600:] == 0.0)


def test_generated_sessions_always_validate():
    sigma = 0.01 * FULL_SCALE_RAW
    for subject in range(3):
        spec = make_archetype(subject, noise_sigma_raw=sigma, seed=11 + subject)
        rec, _ = generate_session(spec, PhaseSchedule(), FULL_LADDER_KG)
        assert validate_session(rec) == []


def test_fixed_seed_is_bit_identical():
    spec_a = make_archetype(1, noise_sigma_raw=500.0, seed=99)
    spec_b = make_archetype(1, noise_sigma_raw=500.0, seed=99)
    rec_a, _ = generate_session(spec_a, PhaseSchedule(), [2.0, 2.5])
    rec_b, _ = generate_session(spec_b, PhaseSchedule(), [2.0, 2.5])
    assert np.array_equal(rec_a.channels, rec_b.channels)
    rec_c, _ = generate_session(
        make_archetype(1, noise_sigma_raw=500.0, seed=100), PhaseSchedule(), [2.0, 2.5]
    )
    assert not np.array_equal(rec_a.channels, rec_c.channels)


def test_noise_free_features_equal_planted_response_after_settling(cfg):
    spec = make_archetype(3)
    rec, truth = generate_session(spec, PhaseSchedule(), [2.0])
    ds = extract_labeled_samples(rec, cfg)
    # past mid-window the filter transient is gone to numerical precision
    late = ds.features[150:]
    expected = np.broadcast_to(truth.lift_increments[2.0], late.shape)
    np.testing.assert_allclose(late, expected, atol=0.2)


def test_net_response_is_exactly_one_kg_per_kg():
    for subject in range(5):
        spec = make_archetype(subject)
        np.testing.assert_allclose(
            spec.load_response_raw_per_kg.sum(), RAW_PER_KG, rtol=1e-12
        )


def test_invalid_spec_rejected():
    with pytest.raises(InvalidSpec):
        SynthSpec(body_weight_raw=np.ones(10), load_response_raw_per_kg=np.ones(36))
    spec = SynthSpec(
        body_weight_raw=np.full(36, 100.0),
        load_response_raw_per_kg=np.full(36, -50.0),
    )
    with pytest.raises(InvalidSpec):
        generate_session(spec, PhaseSchedule(), [10.0])
    with pytest.raises(InvalidSpec):
        generate_session(make_archetype(0), PhaseSchedule(), [])


def test_saturating_response_is_bounded_and_monotone():
    spec = make_archetype(0, saturating=True)
    incs = [spec.lift_increment(load) for load in (2.0, 6.0, 10.0)]
    gains = [inc.sum() for inc in incs]
    assert gains[0] < gains[1] < gains[2]
    # saturation keeps per-channel magnitude under the ceiling
    assert np.all(np.abs(incs[2]) <= spec.saturation_raw + 1e-9)


def test_drift_moves_baseline_but_features_stay_calibrated(cfg):
    spec = make_archetype(0, drift_raw_per_s=5.0)
    rec, truth = generate_session(spec, PhaseSchedule(), [4.0])
    ds = extract_labeled_samples(rec, cfg)
    # baseline differencing cancels all but ~15 s of accumulated drift
    err = np.abs(ds.features[150:] - truth.lift_increments[4.0]).max()
    assert err < 5.0 * 20.0  # drift rate x window separation, loose bound


def test_write_session_round_trips_through_ingest(tmp_path):
    spec = make_archetype(2, noise_sigma_raw=200.0, seed=5)
    rec, _ = generate_session(spec, PhaseSchedule(), [2.0, 2.5], subject_id="RT", session_index=2)
    manifest_path = write_session(rec, tmp_path)
    parsed = parse_session(manifest_path)
    assert parsed.subject_id == "RT"
    assert parsed.session_index == 2
    assert parsed.load_ladder == (2.0, 2.5)
    np.testing.assert_array_equal(parsed.timestamps_ms, rec.timestamps_ms)
    np.testing.assert_allclose(parsed.channels, rec.channels, rtol=0, atol=0)


def test_make_corpus_shapes():
    corpus = make_corpus(2, sessions=(1, 2), ladder=[2.0, 2.5], noise_sigma_raw=100.0)
    assert len(corpus) == 4
    subjects = {rec.subject_id for rec, _ in corpus}
    assert subjects == {"S1", "S2"}
    # per-subject response identical across that subject's sessions
    rec1, t1 = corpus[0]
    rec2, t2 = corpus[1]
    np.testing.assert_array_equal(t1.lift_increments[2.0], t2.lift_increments[2.0])
    # noise seeds differ between sessions
    assert not np.array_equal(rec1.channels, rec2.channels)
