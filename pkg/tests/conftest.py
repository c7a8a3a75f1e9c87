import numpy as np
import pytest

from insole_load import PhaseSchedule, PipelineConfig, make_archetype, generate_session


@pytest.fixture(scope="session")
def clean_session():
    """One noise-free three-load session with its ground truth."""
    spec = make_archetype(0)
    return generate_session(spec, PhaseSchedule(), [2.0, 2.5, 3.0], subject_id="S1")


@pytest.fixture()
def cfg():
    return PipelineConfig()


@pytest.fixture()
def rng():
    # function-scoped: every test sees the same deterministic stream
    # regardless of execution order
    return np.random.default_rng(20260811)
