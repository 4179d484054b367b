import numpy as np
import pytest

from copguide.refpath import ReferencePath


def linear_path(slope=0.2, duration=5.0, rate=100.0, y_slope=0.0):
    t = np.arange(int(round(duration * rate)) + 1) / rate
    return ReferencePath(rate, slope * t, y_slope * t)


@pytest.fixture
def ramp():
    """x_ref(t) = 0.2 t over 5 s at 100 Hz, y_ref = 0."""
    return linear_path()
