import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eqboot.core import (Measurement, NoiseModel, RngStream, Signal, as_stream, check_array,
                         derive_stream, sample_noise)


def test_signal_validates_shape_and_is_read_only():
    s = Signal(np.arange(6.0), (2, 3))
    assert s.n == 6
    assert s.image.shape == (2, 3)
    with pytest.raises(ValueError):
        s.data[0] = 1.0
    with pytest.raises(ValueError):
        Signal(np.arange(5.0), (2, 3))


def test_signal_rejects_nonfinite():
    with pytest.raises(ValueError):
        Signal(np.array([1.0, np.nan]), (1, 2))


def test_signal_from_image_roundtrip():
    img = np.arange(12.0).reshape(3, 4)
    s = Signal.from_image(img)
    assert s.shape == (3, 4)
    np.testing.assert_array_equal(s.image, img)


def test_check_array_unwraps_and_checks_ndim():
    m = Measurement(np.ones(3))
    assert check_array(m).shape == (3,)
    with pytest.raises(ValueError):
        check_array(np.ones((2, 2, 2)))


def test_noise_model_rejects_negative_sigma():
    with pytest.raises(ValueError):
        NoiseModel(-1.0)


def test_same_identity_same_stream():
    a = RngStream(7, (1, 2)).standard_normal(5)
    b = RngStream(7, (1, 2)).standard_normal(5)
    np.testing.assert_array_equal(a, b)


def test_streams_independent_of_creation_order():
    root = RngStream(11)
    first = root.spawn(3).standard_normal(4)
    root.spawn(0).standard_normal(100)
    again = RngStream(11).spawn(3).standard_normal(4)
    np.testing.assert_array_equal(first, again)


def test_distinct_stream_ids_differ():
    a = derive_stream(5, 0).standard_normal(8)
    b = derive_stream(5, 1).standard_normal(8)
    assert not np.array_equal(a, b)
    assert derive_stream(5, 1).stream_id == 1


def test_fresh_rewinds():
    s = RngStream(3, (4,))
    x = s.standard_normal(3)
    np.testing.assert_array_equal(s.fresh().standard_normal(3), x)


def test_as_stream_accepts_int_list_and_stream():
    s = RngStream(9, (1, 2))
    assert as_stream(s) is s
    assert as_stream(9) == RngStream(9)
    assert as_stream([9, 1, 2]) == s
    with pytest.raises(ValueError):
        as_stream(None)
    with pytest.raises(ValueError):
        RngStream(-1)


def test_sample_noise_zero_sigma_consumes_nothing():
    s = RngStream(1)
    mean = np.arange(4.0)
    out = sample_noise(NoiseModel(0.0), mean, s)
    np.testing.assert_array_equal(out, mean)
    np.testing.assert_array_equal(s.standard_normal(2), RngStream(1).standard_normal(2))


def test_sample_noise_wraps_measurement():
    out = sample_noise(NoiseModel(0.5), Measurement(np.zeros(3)), RngStream(2))
    assert isinstance(out, Measurement)
    np.testing.assert_allclose(out.data, 0.5 * RngStream(2).standard_normal(3))


def test_sample_noise_moments():
    # Monte Carlo oracle: sample variance of sigma * N(0, 1)
    z = sample_noise(NoiseModel(0.3), np.zeros(200_000), RngStream(4))
    assert abs(z.mean()) < 0.003
    assert abs(z.var() - 0.09) < 0.09 * 0.02


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32), st.lists(st.integers(0, 1000), max_size=4))
def test_to_list_roundtrip(seed, path):
    s = RngStream(seed, tuple(path))
    assert as_stream(s.to_list()) == s
