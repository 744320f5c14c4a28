import numpy as np
import pytest

from gsvdlab import gsvd
from gsvdlab.blackbox import BlackBox
from gsvdlab.errors import InvalidInput, OffManifoldDegenerate
from gsvdlab.numerics import pseudoinverse
from gsvdlab.svdnet import NetConfig, SvdNet
from gsvdlab.traversal import (interpolate, membership_null_set, naive_decoder, null_sample, pgm_bytes,
                               projections, read_pgm, split_lifted, strip_bytes)


def test_projections_diag():
    pair = projections(np.array([[2.0, 0.0, 0.0], [0.0, 0.5, 0.0]]))
    np.testing.assert_array_equal(pair.p_row, np.diag([1.0, 1.0, 0.0]))
    np.testing.assert_array_equal(pair.p_null, np.diag([0.0, 0.0, 1.0]))


def test_projections_rank_deficient():
    pair = projections(np.array([[3.0, 0.0, 0.0], [0.0, 0.0, 0.0]]))
    np.testing.assert_allclose(pair.p_row, np.diag([1.0, 0.0, 0.0]), atol=1e-15)


def test_projection_properties(rng):
    s = rng.standard_normal((3, 7))
    pair = projections(s)
    for p in (pair.p_row, pair.p_null):
        np.testing.assert_allclose(p @ p, p, atol=1e-12)
        np.testing.assert_allclose(p, p.T, atol=1e-12)
    np.testing.assert_allclose(pair.p_row + pair.p_null, np.eye(7), atol=1e-15)
    np.testing.assert_allclose(s @ pair.p_null, 0, atol=1e-12)
    z = rng.standard_normal(7)
    zr, zn = split_lifted(pair, z)
    assert abs(zr @ zn) < 1e-12
    np.testing.assert_allclose(zr + zn, z, atol=1e-14)


def test_naive_decoder():
    z = np.array([1.0, 0.6, 0.8])
    np.testing.assert_allclose(naive_decoder(z, 1), np.sqrt(2) * np.array([0.6, 0.8]), atol=1e-15)
    # doubling the leading block changes only the overall scale
    z2 = np.array([2.0, 0.6, 0.8])
    np.testing.assert_allclose(naive_decoder(z2, 1), np.sqrt(5) * np.array([0.6, 0.8]), atol=1e-15)
    np.testing.assert_array_equal(naive_decoder(np.zeros(3), 1), np.zeros(2))
    with pytest.raises(OffManifoldDegenerate):
        naive_decoder(np.array([1.0, 0.0, 0.0]), 1)


def test_naive_decoder_inverts_lift(rng):
    f = BlackBox(lambda x: np.tanh(x[:2]), 3, 2)
    m = gsvd.build(f, [1.0, 1.0], 0.1)
    for x in rng.standard_normal((50, 3)):
        np.testing.assert_allclose(naive_decoder(gsvd.lift(m, f, x)), x, atol=1e-12)


@pytest.fixture
def net():
    return SvdNet.init(6, 3, NetConfig(hidden=(10,)), seed=11)


def test_null_sample_logits_invariant(net):
    kp = pseudoinverse(net.head)
    for seed in range(10):
        _, code = null_sample(net, 1, noise_scale=3.0, seed=seed)
        assert np.linalg.norm(net.head @ code - net.head @ kp @ np.eye(3)[1]) <= 1e-9
        np.testing.assert_allclose(net.head @ code, np.eye(3)[1], atol=1e-9)


def test_null_sample_noise_free_and_scaled(net):
    img, code = null_sample(net, 0, noise_scale=0.0)
    np.testing.assert_allclose(code, pseudoinverse(net.head)[:, 0], atol=1e-15)
    assert img.shape == (6,)
    _, code10 = null_sample(net, 0, noise_scale=0.0, scale_by_on_value=10.0)
    np.testing.assert_allclose(net.head @ code10, [10, 0, 0], atol=1e-9)


def test_null_sample_seeded(net):
    a, _ = null_sample(net, 2, seed=4)
    b, _ = null_sample(net, 2, seed=4)
    c, _ = null_sample(net, 2, seed=5)
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_null_sample_bad_class(net):
    with pytest.raises(InvalidInput):
        null_sample(net, 3)


def test_interpolate_endpoints(net):
    y1, y2 = np.eye(3)[0], np.eye(3)[2]
    imgs = interpolate(net, y1, y2, 5)
    assert len(imgs) == 5
    kp = pseudoinverse(net.head)
    np.testing.assert_allclose(imgs[0], net.decode(kp @ y1)[0], atol=1e-15)
    np.testing.assert_allclose(imgs[-1], net.decode(kp @ y2)[0], atol=1e-15)
    with pytest.raises(InvalidInput):
        interpolate(net, y1, y2, 1)


def test_membership_diag():
    f = BlackBox.linear(np.diag([1.0, 0.0]))
    m = gsvd.build(f, [1.0, 0.0], 0.1)
    x = np.array([1.0, 0.0])
    assert membership_null_set(m, f, x, np.array([1.0, 5.0]), 1e-9)
    assert not membership_null_set(m, f, x, np.array([2.0, 0.0]), 1e-9)


def test_pgm_roundtrip():
    img = np.array([0.0, 0.5, 1.0, 2.0, -1.0, 0.25])
    data = pgm_bytes(img, (2, 3))
    assert data.startswith(b"P5\n3 2\n255\n")
    np.testing.assert_array_equal(read_pgm(data), [[0, 128, 255], [255, 0, 64]])
    strip = read_pgm(strip_bytes([img, img], (2, 3)))
    assert strip.shape == (2, 6)
