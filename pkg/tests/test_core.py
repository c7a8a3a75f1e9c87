import numpy as np
import pytest

from insole_load import PhaseSchedule, PipelineConfig, SessionRecording, validate_session
from insole_load.core import FULL_LADDER_KG, InputError, valid_ladder
from insole_load.synth import generate_session, make_archetype


def make_recording(timestamps, channels, ladder=(2.0,)):
    return SessionRecording(
        subject_id="T",
        session_index=1,
        timestamps_ms=timestamps,
        channels=channels,
        schedule=PhaseSchedule(),
        load_ladder=ladder,
    )


def test_well_formed_synthetic_session_is_valid(clean_session):
    rec, _ = clean_session
    assert validate_session(rec) == []


def test_channel_count_violation():
    rec = make_recording(np.arange(5) * 50, np.ones((5, 35)))
    assert validate_session(rec) == ["ChannelCount@frame 0"]


def test_timestamp_order_violation_from_injected_swap():
    spec = make_archetype(1)
    rec, _ = generate_session(spec, PhaseSchedule(), [2.0])
    t = rec.timestamps_ms.copy()
    k = 137
    t[k], t[k + 1] = t[k + 1], t[k]
    broken = make_recording(t, rec.channels)
    violations = validate_session(broken)
    # Direct-scan oracle: every index whose timestamp fails to increase.
    expected = {i + 1 for i in range(len(t) - 1) if t[i + 1] <= t[i]}
    order_violations = {
        int(v.split("frame ")[1]) for v in violations if v.startswith("TimestampOrder")
    }
    assert order_violations == expected
    assert expected  # the swap must actually break ordering


def test_negative_and_nonfinite_channels_flagged():
    ch = np.ones((4, 36))
    ch[1, 3] = -1.0
    ch[2, 7] = np.nan
    rec = make_recording(np.arange(4) * 50, ch)
    v = validate_session(rec)
    assert "ChannelRange@frame 1" in v
    assert "ChannelRange@frame 2" in v


def test_full_scale_violation():
    ch = np.ones((3, 36))
    ch[2, 0] = 70000.0
    rec = make_recording(np.arange(3) * 50, ch)
    assert validate_session(rec) == ["ChannelRange@frame 2"]


def test_timestamp_jitter_tolerated_up_to_20ms():
    t = np.array([0, 50, 115, 150])  # 65 ms step is within 50 +/- 20
    rec = make_recording(t, np.ones((4, 36)))
    assert validate_session(rec) == []
    t2 = np.array([0, 50, 125, 175])  # 75 ms step exceeds tolerance
    rec2 = make_recording(t2, np.ones((4, 36)))
    assert validate_session(rec2) == ["TimestampJitter@frame 2"]


def test_ladder_rules():
    assert valid_ladder(FULL_LADDER_KG)
    assert valid_ladder([2.0])
    assert not valid_ladder([])
    assert not valid_ladder([2.0, 3.0])  # skips a rung
    assert not valid_ladder([2.2])  # off the half-kg grid
    assert not valid_ladder([2.5, 2.0])  # decreasing
    rec = make_recording(np.arange(3) * 50, np.ones((3, 36)), ladder=(2.0, 3.0))
    assert "LoadLadder" in validate_session(rec)


def test_pipeline_config_validation():
    PipelineConfig().validate()
    with pytest.raises(InputError):
        PipelineConfig(cutoff_hz=10.0).validate()  # at Nyquist
    with pytest.raises(InputError):
        PipelineConfig(cutoff_hz=0.0).validate()
    with pytest.raises(InputError):
        PipelineConfig(trim_quantiles=(0.9, 0.1)).validate()
    with pytest.raises(InputError):
        PipelineConfig(filter_order=4).validate()


def test_channel_order_is_preserved_bit_exactly(clean_session):
    rec, _ = clean_session
    frames = list(rec.frames)
    assert np.array_equal(frames[10].channels, rec.channels[10])
    assert frames[10].timestamp_ms == int(rec.timestamps_ms[10])
