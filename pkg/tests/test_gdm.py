import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gradpreserve.exceptions import InvalidImage, ShapeMismatch
from gradpreserve.gdm import (
    BorderPolicy,
    GdmConfig,
    central_differences,
    gdm,
    gdm_residual,
    mean_abs_angle_error,
)

from conftest import horizontal_ramp, vertical_ramp

POLICIES = [BorderPolicy.REPLICATE_EDGE, BorderPolicy.SKIP_BORDER]

# 8-bit pixel grids, the resolution real images arrive in
images_8bit = st.tuples(st.integers(3, 12), st.integers(3, 12)).flatmap(
    lambda shape: arrays(np.int64, shape, elements=st.integers(0, 255))
).map(lambda a: a / 255.0)


@pytest.mark.parametrize("policy", POLICIES)
def test_constant_image_has_zero_differences(policy):
    v, h = central_differences(np.full((4, 4), 0.5), policy)
    assert np.all(v == 0) and np.all(h == 0)


def test_horizontal_ramp_differences():
    v, h = central_differences(horizontal_ramp(5, 6))
    np.testing.assert_allclose(v[1:-1, 1:-1], 0.0)
    np.testing.assert_allclose(h[1:-1, 1:-1], 0.2)


def test_vertical_ramp_differences():
    v, h = central_differences(vertical_ramp(6, 5))
    np.testing.assert_allclose(v[1:-1, 1:-1], 0.2)
    np.testing.assert_allclose(h[1:-1, 1:-1], 0.0)


def test_border_policies():
    img = horizontal_ramp(4, 5)
    _, h_rep = central_differences(img, BorderPolicy.REPLICATE_EDGE)
    _, h_skip = central_differences(img, BorderPolicy.SKIP_BORDER)
    # replicated edge: one-sided difference x[1] - x[0]
    np.testing.assert_allclose(h_rep[:, 0], 0.1)
    np.testing.assert_allclose(h_rep[:, -1], 0.1)
    assert np.all(h_skip[:, 0] == 0) and np.all(h_skip[0, :] == 0)


@pytest.mark.parametrize("bad", [np.zeros((2, 5)), np.zeros((5, 2)), np.zeros(9),
                                 np.full((4, 4), 1.5), np.full((4, 4), np.nan)])
def test_invalid_images_rejected(bad):
    with pytest.raises(InvalidImage):
        central_differences(bad)


def test_gdm_examples():
    assert np.all(gdm(np.full((4, 4), 0.5)) == 0.0)
    np.testing.assert_allclose(gdm(horizontal_ramp(6, 6))[1:-1, 1:-1], 0.0, atol=1e-12)
    expected = math.atan(0.2 / 1e-8)
    assert expected == pytest.approx(1.57079627, abs=1e-8)
    np.testing.assert_allclose(gdm(vertical_ramp(6, 6))[1:-1, 1:-1], expected, atol=1e-9)


def test_gdm_uses_single_argument_arctan():
    # a gradient pointing left and down has the same direction mod pi as right and up
    img = np.array([[0.9, 0.8, 0.7], [0.6, 0.5, 0.4], [0.3, 0.2, 0.1]])
    angle = gdm(img)[1, 1]
    assert angle == pytest.approx(math.atan(-0.6 / (-0.2 + 1e-8)))
    assert 0 < angle < math.pi / 2


def test_exact_minus_epsilon_difference_stays_finite():
    eps = 2.0 ** -20
    img = np.zeros((3, 3))
    img[1, 0] = eps  # horizontal difference at the centre is exactly -eps
    img[2, 1] = 0.5
    angles = gdm(img, GdmConfig(epsilon=eps))
    assert np.all(np.isfinite(angles))
    assert np.all(np.abs(angles) < np.pi / 2)


def test_residual_examples():
    a = np.zeros((3, 4))
    assert gdm_residual(a, a) == 0.0
    b = a.copy()
    b[1, 2] = math.pi / 4
    assert gdm_residual(a, b) == pytest.approx(math.pi / 4)
    assert gdm_residual(np.zeros((3, 3)), np.full((3, 3), 0.1)) == pytest.approx(
        math.sqrt(9 * 0.01))
    assert mean_abs_angle_error(np.zeros((3, 3)), np.full((3, 3), 0.1)) == pytest.approx(0.1)


def test_residual_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        gdm_residual(np.zeros((3, 3)), np.zeros((3, 4)))


def test_config_rejects_nonpositive_epsilon():
    with pytest.raises(ValueError):
        GdmConfig(epsilon=0.0)


@settings(max_examples=200, deadline=None)
@given(images_8bit, st.sampled_from(POLICIES))
def test_angles_strictly_inside_open_interval(img, policy):
    angles = gdm(img, GdmConfig(border_policy=policy))
    assert angles.shape == img.shape
    assert np.all(angles > -np.pi / 2) and np.all(angles < np.pi / 2)


@settings(max_examples=100, deadline=None)
@given(images_8bit, st.integers(0, 255))
def test_adding_a_constant_leaves_gdm_unchanged(img, shift):
    c = shift / 255.0 * (1.0 - img.max())
    np.testing.assert_allclose(gdm(img + c), gdm(img), atol=1e-6)


@settings(max_examples=100, deadline=None)
@given(
    st.integers(3, 12),
    st.integers(3, 30),
    st.floats(0.05, 1.0),
    st.integers(0, 2**32 - 1),
)
def test_scaling_changes_angles_only_through_epsilon(height, width, alpha, seed):
    rng = np.random.default_rng(seed)
    # columns rise by 0.03 so every interior horizontal difference is >= 0.055
    img = 0.03 * np.arange(width) + rng.uniform(0, 0.0025, (height, width))
    _, h = central_differences(img)
    assert np.all(np.abs(h[1:-1, 1:-1]) >= 0.05)
    diff = np.abs(gdm(alpha * img) - gdm(img))[1:-1, 1:-1]
    assert np.all(diff <= 1e-5)


@settings(max_examples=100, deadline=None)
@given(images_8bit)
def test_border_policies_agree_in_interior(img):
    rep = gdm(img, GdmConfig(border_policy=BorderPolicy.REPLICATE_EDGE))
    skip = gdm(img, GdmConfig(border_policy=BorderPolicy.SKIP_BORDER))
    np.testing.assert_array_equal(rep[1:-1, 1:-1], skip[1:-1, 1:-1])
    assert np.all(skip[0] == 0) and np.all(skip[:, -1] == 0)


@settings(max_examples=100, deadline=None)
@given(images_8bit, images_8bit)
def test_residual_zero_iff_equal(a, b):
    ga = gdm(a)
    assert gdm_residual(ga, ga) == 0.0
    if a.shape == b.shape:
        gb = gdm(b)
        assert (gdm_residual(ga, gb) == 0.0) == bool(np.array_equal(ga, gb))
