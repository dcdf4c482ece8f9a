import numpy as np
import pytest

from oracles import dominant_cell_shifts
from rieszmorf.image import DimensionError
from rieszmorf.morf import (
    AnnotationError,
    MorfParams,
    MorPair,
    assemble_descriptor,
    cell_edges,
    downsample_mask,
    extract_morf,
    grid_histogram,
    magnitude_orientation,
    mean_oriented_riesz,
)
from rieszmorf.riesz import QuatPhaseField, TemporalFilterConfig
from rieszmorf.synth import SyntheticSpec, linear_path, render_circle_sequence

CFG = TemporalFilterConfig()


def moving_circle(direction, n=8, step=0.2, size=64, radius=14.0):
    path = linear_path((31.5, 31.5), direction, step, n)
    return render_circle_sequence(SyntheticSpec(size, size, radius, path))


def field(pc, ps):
    return QuatPhaseField(np.asarray(pc, float), np.asarray(ps, float))


# ---- mean_oriented_riesz --------------------------------------------------

def test_mean_of_constant_field(rng):
    c = field(rng.random((5, 6)), rng.random((5, 6)))
    pair = mean_oriented_riesz([c] * 4, 0, 3)
    np.testing.assert_allclose(pair.mean_pc, c.pc, atol=1e-15)
    np.testing.assert_allclose(pair.mean_ps, c.ps, atol=1e-15)
    assert pair.n_frames == 4


def test_single_frame_window(rng):
    seq = [field(rng.random((3, 3)), rng.random((3, 3))) for _ in range(5)]
    pair = mean_oriented_riesz(seq, 2, 2)
    assert np.array_equal(pair.mean_pc, seq[2].pc) and np.array_equal(pair.mean_ps, seq[2].ps)


def test_alternating_fields_cancel(rng):
    v = field(rng.random((4, 4)), rng.random((4, 4)))
    pair = mean_oriented_riesz([v, -v, v, -v, v, -v], 0, 5)
    assert np.max(np.abs(pair.mean_pc)) <= 1e-12 and np.max(np.abs(pair.mean_ps)) <= 1e-12


@pytest.mark.parametrize("f_o,f_a", [(-1, 2), (3, 2), (0, 5)])
def test_bad_window(f_o, f_a):
    seq = [QuatPhaseField.zeros((2, 2))] * 5
    with pytest.raises(AnnotationError):
        mean_oriented_riesz(seq, f_o, f_a)


def test_mean_linearity(rng):
    s1 = [field(rng.standard_normal((4, 5)), rng.standard_normal((4, 5))) for _ in range(6)]
    s2 = [field(rng.standard_normal((4, 5)), rng.standard_normal((4, 5))) for _ in range(6)]
    a, b = 1.7, -0.3
    mix = [field(a * x.pc + b * y.pc, a * x.ps + b * y.ps) for x, y in zip(s1, s2)]
    p1, p2, pm = (mean_oriented_riesz(s, 1, 4) for s in (s1, s2, mix))
    assert np.max(np.abs(pm.mean_pc - (a * p1.mean_pc + b * p2.mean_pc))) <= 1e-12
    assert np.max(np.abs(pm.mean_ps - (a * p1.mean_ps + b * p2.mean_ps))) <= 1e-12


def test_mean_magnitude_bounded_by_frames(rng):
    seq = [field(rng.standard_normal((6, 6)), rng.standard_normal((6, 6))) for _ in range(5)]
    pair = mean_oriented_riesz(seq, 0, 4)
    bound = np.max([f.magnitude() for f in seq], axis=0)
    assert np.all(np.hypot(pair.mean_pc, pair.mean_ps) <= bound + 1e-12)


# ---- magnitude_orientation -------------------------------------------------

def pair_of(pc, ps):
    return MorPair(np.array([[pc]], float), np.array([[ps]], float), 2, 1)


def test_three_four_five():
    phi, theta = magnitude_orientation(pair_of(0.3, 0.4))
    assert abs(phi[0, 0] - 0.5) < 1e-15
    assert abs(theta[0, 0] - 0.9273) < 1e-4


def test_degenerate_orientation():
    phi, theta = magnitude_orientation(pair_of(0.0, 0.0))
    assert phi[0, 0] == 0 and theta[0, 0] == 0


def test_quadrants_distinguished():
    phi_n, theta_n = magnitude_orientation(pair_of(-0.1, 0.0))
    phi_p, theta_p = magnitude_orientation(pair_of(0.1, 0.0))
    assert abs(phi_n[0, 0] - 0.1) < 1e-15 and theta_n[0, 0] == np.pi
    assert theta_p[0, 0] == 0


def test_negative_zero_maps_to_pi():
    _, theta = magnitude_orientation(pair_of(-0.1, -0.0))
    assert theta[0, 0] == np.pi


# ---- grid_histogram -------------------------------------------------------

def test_zero_fields_histogram():
    h = grid_histogram(np.zeros((12, 10)), np.zeros((12, 10)), 5, 4, 3)
    assert h.shape == (60,) and not h.any()


def test_single_pixel_bin():
    phi = np.zeros((8, 8))
    phi[1, 2] = 0.5
    h = grid_histogram(phi, np.zeros((8, 8)), 2, 2, 4)
    expected = np.zeros(16)
    expected[2] = 0.5
    assert np.array_equal(h, expected)


def test_uniform_field_cyclic_shift():
    o = 8
    theta0 = -np.pi + 0.5 * 2 * np.pi / o  # centre of bin 0
    h0 = grid_histogram(np.ones((10, 10)), np.full((10, 10), theta0), 1, 1, o)
    h1 = grid_histogram(np.ones((10, 10)), np.full((10, 10), theta0 + 2 * np.pi / o), 1, 1, o)
    assert h0[0] == 100 and h0.sum() == 100
    assert np.array_equal(np.roll(h0, 1), h1)


def test_bin_edges():
    o = 6
    theta = np.array([[-np.pi, -np.pi + 1e-12, 0.0, np.pi - 1e-12, np.pi]])
    h = grid_histogram(np.ones_like(theta), theta, 1, 1, o)
    assert h[0] == 2 and h[3] == 1 and h[5] == 2


def test_cell_layout_is_row_major(rng):
    phi = np.zeros((6, 9))
    phi[5, 0] = 1.0  # bottom-left cell
    phi[0, 8] = 2.0  # top-right cell
    h = grid_histogram(phi, np.zeros_like(phi), 3, 2, 2).reshape(2, 3, 2)
    assert h[1, 0, 1] == 1.0 and h[0, 2, 1] == 2.0 and h.sum() == 3.0


def test_uneven_cells_cover_every_pixel_once(rng):
    phi = rng.random((13, 17))
    theta = rng.uniform(-np.pi, np.pi, (13, 17))
    h = grid_histogram(phi, theta, 5, 4, 7)
    assert abs(h.sum() - phi.sum()) <= 1e-9
    assert list(cell_edges(13, 4)) == [0, 3, 6, 9, 13]


def test_grid_larger_than_image():
    with pytest.raises(DimensionError):
        grid_histogram(np.zeros((4, 4)), np.zeros((4, 4)), 5, 2, 6)


def test_mask_excludes_pixels(rng):
    phi = rng.random((8, 8))
    theta = rng.uniform(-np.pi, np.pi, (8, 8))
    mask = np.zeros((8, 8), bool)
    mask[:4] = True
    h = grid_histogram(phi, theta, 2, 2, 4, mask)
    assert abs(h.sum() - phi[:4].sum()) < 1e-12
    assert not h[8:].any()  # bottom-row cells are empty
    with pytest.raises(DimensionError):
        grid_histogram(phi, theta, 2, 2, 4, mask[:7])


def test_negated_pair_permutes_by_half(rng):
    o = 6
    pair = MorPair(rng.standard_normal((16, 16)), rng.standard_normal((16, 16)), 2, 3)
    h = grid_histogram(*magnitude_orientation(pair), 4, 4, o).reshape(-1, o)
    hn = grid_histogram(*magnitude_orientation(-pair), 4, 4, o).reshape(-1, o)
    assert np.array_equal(np.roll(h, o // 2, axis=1), hn)


def test_downsample_mask():
    mask = np.zeros((16, 16), bool)
    mask[::2, ::2] = True
    assert downsample_mask(mask, 1).shape == (16, 16)
    assert downsample_mask(mask, 2).shape == (8, 8) and downsample_mask(mask, 2).all()
    assert downsample_mask(np.ones((15, 15)), 3).shape == (4, 4)


# ---- params and extraction -------------------------------------------------

def test_params_validation():
    for bad in (dict(gx=0), dict(o=0), dict(levels=()), dict(levels=(0,)), dict(alpha=0),
                dict(amplify_mode="x")):
        with pytest.raises(ValueError):
            MorfParams(**bad)
    assert MorfParams().length == 384
    assert MorfParams(levels=[3, 2]).levels == (3, 2)


def test_static_sequence_gives_zero_descriptor():
    frames = moving_circle((1, 0), step=0.0)
    d = extract_morf(frames, (0, 7), MorfParams(), CFG)
    assert d.values.shape == (384,) and not d.values.any()
    dn = extract_morf(frames, (0, 7), MorfParams(normalize=True), CFG)
    assert not dn.values.any()


def test_descriptor_lengths():
    frames = moving_circle((1, 0))
    d = extract_morf(frames, (0, 7), MorfParams(levels=(2,)), CFG)
    assert d.values.size == 384
    d2 = extract_morf(frames, (0, 7), MorfParams(levels=(3, 2)), CFG)
    assert d2.values.size == 768
    assert d2.params.levels == (2, 3)
    assert np.array_equal(d2.segment(2), d.values)


def test_opposing_motion_bin_shift():
    o = 6
    params = MorfParams(levels=(2,), o=o)
    right = extract_morf(moving_circle((1, 0)), (0, 7), params, CFG)
    left = extract_morf(moving_circle((-1, 0)), (0, 7), params, CFG)
    shifts = dominant_cell_shifts(right.values, left.values, o)
    assert shifts and all(s == o // 2 for s in shifts)


def test_annotation_object_and_window():
    frames = moving_circle((0, 1), n=10)

    class Ann:
        f_onset, f_apex = 2, 8

    a = extract_morf(frames, Ann(), MorfParams(), CFG)
    b = extract_morf(frames[2:9], (0, 6), MorfParams(), CFG)
    assert np.array_equal(a.values, b.values)
    with pytest.raises(AnnotationError):
        extract_morf(frames, (5, 4), MorfParams(), CFG)
    with pytest.raises(AnnotationError):
        extract_morf(frames, (0, 10), MorfParams(), CFG)


def test_onset_equals_apex_gives_zero():
    d = extract_morf(moving_circle((1, 0)), (3, 3), MorfParams(), CFG)
    assert not d.values.any()


def test_frames_too_small():
    frames = [np.zeros((20, 20))] * 3
    with pytest.raises(DimensionError):
        extract_morf(frames, (0, 2), MorfParams(levels=(4,)), CFG)
    with pytest.raises(DimensionError):
        extract_morf(frames, (0, 2), MorfParams(levels=(5,)), CFG)


def test_mass_conservation_and_normalization():
    frames = moving_circle((1, 1))
    fields = {}
    from rieszmorf.morf import level_pair
    params = MorfParams(levels=(2, 3))
    for lev in (2, 3):
        fields[lev] = magnitude_orientation(level_pair(frames, 0, 7, lev, params, CFG))
    d = assemble_descriptor(fields, params)
    assert np.array_equal(d.values, extract_morf(frames, (0, 7), params, CFG).values)
    for lev in (2, 3):
        assert abs(d.segment(lev).sum() - fields[lev][0].sum()) <= 1e-9
    dn = assemble_descriptor(fields, MorfParams(levels=(2, 3), normalize=True))
    for lev in (2, 3):
        assert abs(np.linalg.norm(dn.segment(lev)) - 1.0) < 1e-12


def test_mask_is_applied_per_level():
    frames = moving_circle((1, 0))
    mask = np.zeros((64, 64), bool)
    mask[:, :32] = True
    params = MorfParams(levels=(2,), gx=2, gy=1, o=4)
    d = extract_morf(frames, (0, 7), params, CFG, mask=mask)
    full = extract_morf(frames, (0, 7), params, CFG)
    assert not d.values[4:].any()
    np.testing.assert_allclose(d.values[:4], full.values[:4], atol=1e-15)


def test_amplification_increases_mass():
    frames = moving_circle((1, 0), step=0.1)
    base = extract_morf(frames, (0, 7), MorfParams(), CFG).values.sum()
    amp = extract_morf(frames, (0, 7), MorfParams(alpha=5.0), CFG).values.sum()
    assert amp > base > 0
