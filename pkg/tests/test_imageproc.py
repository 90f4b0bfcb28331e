import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from poseprop.core import Point2
from poseprop.errors import ArgumentError
from poseprop.imageproc import (
    Patch,
    WindowFeatures,
    cell_histograms,
    extract_patch,
    hog,
    hog_length,
    rgb_vector,
    window_stack_vector,
)

from helpers import texture


def test_integer_interior_patch_is_crop():
    img = texture(60, 70, color=True)
    p = extract_patch(img, Point2(30, 25), 11)
    assert np.allclose(p.pixels, img[20:31, 25:36] / 255.0, atol=1e-6)


def test_corner_patch_replicates_edges():
    img = texture(60, 70, color=True)
    p = extract_patch(img, Point2(0, 0), 31).pixels
    f = img / 255.0
    # rows/cols above-left of the frame replicate row 0 / column 0
    assert np.allclose(p[:15, 15:], np.broadcast_to(f[0, :16], (15, 16, 3)), atol=1e-6)
    assert np.allclose(p[15:, :15], np.broadcast_to(f[:16, 0][:, None], (16, 15, 3)), atol=1e-6)
    assert np.allclose(p[:15, :15], f[0, 0], atol=1e-6)


def test_half_pixel_centre_averages_neighbour_columns():
    ramp = np.tile(np.arange(40, dtype=np.float32) / 40.0, (30, 1))
    p = extract_patch(ramp, Point2(10.5, 10.0), 5).pixels
    expect = (ramp[0, 8:13] + ramp[0, 9:14]) / 2
    assert np.allclose(p, np.broadcast_to(expect, (5, 5)), atol=1e-6)


def test_even_side_rejected():
    with pytest.raises(ArgumentError):
        extract_patch(np.zeros((20, 20)), Point2(5, 5), 8)


def test_hog_of_constant_patch_is_zero():
    d = hog(np.full((33, 33, 3), 0.4, np.float32))
    assert d.values.shape == (hog_length(33),)
    assert np.all(d.values == 0)


def test_vertical_step_edge_votes_horizontal_gradient_bin():
    img = np.zeros((33, 33), np.float32)
    img[:, 17:] = 1.0
    cells = cell_histograms(img)
    # the gradient points along +x, orientation 0: bin 0 owns the energy
    edge_cells = cells[:, 2]
    assert np.all(edge_cells[:, 0] > 0)
    assert np.allclose(edge_cells[:, 1:], 0)
    assert np.allclose(np.delete(cells, 2, axis=1), 0)


@pytest.mark.parametrize("bins", [4, 18])
def test_rotation_permutes_orientation_bins(bins):
    img = texture(33, 33, seed=4).astype(np.float32) / 255
    a = cell_histograms(img, bins=bins)
    b = cell_histograms(np.rot90(img).copy(), bins=bins)
    # rot90 (counter-clockwise) moves cell (i, j) to (n-1-j, i) and orientation by -90 deg
    n = a.shape[0]
    shift = bins // 2
    for i in range(n):
        for j in range(n):
            assert np.allclose(b[n - 1 - j, i], np.roll(a[i, j], shift), atol=1e-9)


def test_rgb_vector_cases():
    assert np.allclose(rgb_vector(np.full((9, 9, 3), 0.5, np.float32), 3), 0.5)
    img = texture(7, 7, color=True) / 255.0
    assert np.allclose(rgb_vector(img.astype(np.float32), 7), img.ravel(), atol=1e-6)
    cb = np.array([[0.0, 1.0], [1.0, 0.0]], np.float32)[..., None].repeat(3, 2)
    assert np.allclose(rgb_vector(cb, 1), 0.5)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 127), st.integers(0, 95))
def test_window_features_match_patch_stack(x, y):
    img = texture(96, 128, seed=2, color=True)
    wf = WindowFeatures(img)
    got = wf.features([x], [y])[0]
    ref = window_stack_vector(img, Point2(x, y))
    assert np.abs(got - ref).max() < 1e-5
