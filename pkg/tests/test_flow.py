import numpy as np
import pytest

from planedepth.errors import DimensionMismatchError
from planedepth.flow import compose_flow, dense_flow, flow_to, warp_backward


def textured_image(rng, h=64, w=64):
    """Smoothed noise: broad spectrum so coarse-to-fine has something at
    every pyramid level."""
    from scipy import ndimage

    img = rng.uniform(0, 255, size=(h, w))
    return ndimage.gaussian_filter(img, 1.5, mode="wrap") + 0.3 * img


def test_identical_frames_exact_zero():
    rng = np.random.default_rng(0)
    a = textured_image(rng)
    flow = dense_flow(a, a)
    assert np.all(flow == 0.0)


def test_flat_frames_zero():
    a = np.full((40, 40), 128.0)
    flow = dense_flow(a, a.copy())
    assert np.all(flow == 0.0)


def test_integer_shift_recovered():
    rng = np.random.default_rng(1)
    a = textured_image(rng)
    b = np.roll(a, 2, axis=1)  # content moves right by 2 px
    flow = dense_flow(a, b)
    interior = flow[8:-8, 8:-8]
    assert 1.75 <= interior[..., 0].mean() <= 2.25
    assert -0.25 <= interior[..., 1].mean() <= 0.25


def test_vertical_shift_recovered():
    rng = np.random.default_rng(2)
    a = textured_image(rng)
    b = np.roll(a, 1, axis=0)
    flow = dense_flow(a, b)
    interior = flow[8:-8, 8:-8]
    assert abs(interior[..., 1].mean() - 1.0) <= 0.25
    assert abs(interior[..., 0].mean()) <= 0.25


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        dense_flow(np.zeros((4, 4)), np.zeros((4, 5)))


def test_warp_backward_identity():
    rng = np.random.default_rng(3)
    img = rng.random((10, 12))
    assert np.array_equal(warp_backward(img, np.zeros((10, 12, 2))), img)


def test_warp_backward_shift():
    img = np.arange(20.0).reshape(4, 5)
    flow = np.zeros((4, 5, 2))
    flow[..., 0] = 1.0
    warped = warp_backward(img, flow)
    assert np.array_equal(warped[:, :-1], img[:, 1:])


def test_compose_constant_fields():
    f1 = np.full((6, 6, 2), 0.5)
    f2 = np.full((6, 6, 2), 0.25)
    composed = compose_flow(f1, f2)
    interior = composed[1:-1, 1:-1]
    assert np.allclose(interior, 0.75)


def test_flow_to_offset_one_is_dense_flow():
    rng = np.random.default_rng(4)
    frames = [textured_image(rng, 32, 32) for _ in range(3)]
    direct = dense_flow(frames[2], frames[1])
    via, padded = flow_to(frames, 2, 1)
    assert not padded
    assert np.array_equal(via, direct)


def test_flow_to_padding():
    frames = [np.zeros((8, 8)) for _ in range(4)]
    field, padded = flow_to(frames, 2, 5)
    assert padded
    assert np.all(field == 0)
    assert field.shape == (8, 8, 2)


def test_flow_to_static_video_zero():
    rng = np.random.default_rng(5)
    img = textured_image(rng, 32, 32)
    frames = [img.copy() for _ in range(6)]
    field, padded = flow_to(frames, 5, 5)
    assert not padded
    assert np.allclose(field, 0.0, atol=1e-12)


def test_flow_to_composition_on_pan():
    # content moves left 1 px/frame going forward, so the backward flow
    # from frame j to j-3 is +3 px in du
    rng = np.random.default_rng(6)
    base = textured_image(rng, 48, 96)
    frames = [np.roll(base, -t, axis=1) for t in range(6)]
    cache = {}
    field, padded = flow_to(frames, 5, 3, cache=cache)
    assert not padded
    interior = field[10:-10, 10:-10]
    assert abs(interior[..., 0].mean() - 3.0) <= 0.5
    assert abs(interior[..., 1].mean()) <= 0.3
    # consecutive fields were memoized for reuse
    assert set(cache) == {5, 4, 3}
