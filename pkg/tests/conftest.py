import logging

import pytest

from swipeqoe.design import generate_design
from swipeqoe.models import DEFAULT_COEFFICIENTS, predict_proposed

logging.getLogger("swipeqoe.raters").setLevel(logging.ERROR)


@pytest.fixture(scope="session")
def design_stimuli():
    return generate_design()


@pytest.fixture(scope="session")
def design_sessions(design_stimuli):
    return {s.stimulus_id: s.session for s in design_stimuli}


@pytest.fixture(scope="session")
def true_mos(design_stimuli):
    """Ground-truth MOS per stimulus: the default-coefficient model, clamped."""
    return {s.stimulus_id: predict_proposed(s.session, DEFAULT_COEFFICIENTS, clamp=True)
            for s in design_stimuli}
