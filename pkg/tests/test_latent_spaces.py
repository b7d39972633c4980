import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ii2s.errors import IncompatibleArtifactError, InvalidInputError, StaleCodeError
from ii2s.latent_spaces import (
    PCode,
    PnCode,
    PnPlusCode,
    WCode,
    WPlusCode,
    ZCode,
    broadcast_w,
    center_code,
    leaky_p_to_w,
    leaky_w_to_p,
    load_codes,
    mahalanobis_sq,
    p_to_pn,
    p_to_w,
    pn_to_p,
    pnplus_to_wplus,
    save_codes,
    w_to_p,
    wplus_to_pnplus,
)
from ii2s.stats import WhiteningModel, fit_whitening

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


def correlated_model(dim=3, seed=0):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(dim, dim))
    x = rng.normal(size=(5000, dim)) @ a.T + rng.normal(size=dim)
    return fit_whitening(x)


def test_w_to_p_examples():
    assert np.array_equal(w_to_p(WCode([2.0, 0.0])).values, [2.0, 0.0])
    assert np.array_equal(w_to_p(WCode([-1.0])).values, [-5.0])
    assert np.array_equal(p_to_w(PCode([-5.0])).values, [-1.0])
    assert np.array_equal(p_to_w(PCode([3.5])).values, [3.5])


@given(arrays(np.float64, st.integers(1, 40), elements=finite))
def test_leaky_roundtrip_property(w):
    back = leaky_p_to_w(leaky_w_to_p(w))
    np.testing.assert_allclose(back, w, rtol=1e-12, atol=0)


def test_nonfinite_codes_rejected():
    with pytest.raises(InvalidInputError):
        WCode([1.0, np.nan])
    with pytest.raises(InvalidInputError):
        WPlusCode(np.ones(3))
    with pytest.raises(InvalidInputError):
        ZCode(np.ones((2, 2)))


def test_codes_are_immutable():
    c = WCode(np.ones(4))
    with pytest.raises(ValueError):
        c.values[0] = 2.0


def test_identity_whitening_is_identity():
    m = WhiteningModel.identity(4)
    x = PCode([1.0, -2.0, 3.0, 0.5])
    np.testing.assert_array_equal(p_to_pn(x, m).values, x.values)


def test_center_maps_to_zero():
    m = correlated_model()
    v = p_to_pn(PCode(m.mu), m)
    np.testing.assert_allclose(v.values, 0.0, atol=1e-12)
    np.testing.assert_allclose(pn_to_p(PnCode(np.zeros(3), m.fingerprint), m).values, m.mu)


def test_basis_vector_maps_along_principal_axis():
    m = correlated_model()
    for k in range(3):
        e = np.zeros(3)
        e[k] = 1.0
        x = pn_to_p(PnCode(e, m.fingerprint), m).values
        np.testing.assert_allclose(x, m.mu + np.sqrt(m.singular_values[k]) * m.basis[:, k], rtol=1e-12)


def test_whitened_sample_has_identity_covariance():
    rng = np.random.default_rng(3)
    a = np.array([[2.0, 0.0, 0.0], [1.5, 1.0, 0.0], [-0.5, 0.3, 0.2]])
    x = rng.normal(size=(20000, 3)) @ a.T + 4.0
    m = fit_whitening(x)
    v = np.stack([p_to_pn(PCode(r), m).values for r in x[:4000]])
    full = (x - m.mu) @ m.forward_matrix.T
    np.testing.assert_allclose(v, full[:4000], rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(np.cov(full, rowvar=False), np.eye(3), atol=1e-8)


def test_pn_roundtrip_on_random_vectors(rng):
    m = correlated_model(dim=8)
    v = rng.normal(size=(10_000, 8))
    x = v @ m.inverse_matrix.T + m.mu
    back = (x - m.mu) @ m.forward_matrix.T
    np.testing.assert_allclose(back, v, rtol=1e-5, atol=1e-9)


def test_stale_code_detected():
    m1 = correlated_model(seed=0)
    m2 = correlated_model(seed=1)
    v = p_to_pn(PCode(np.ones(3)), m1)
    with pytest.raises(StaleCodeError):
        pn_to_p(v, m2)
    with pytest.raises(StaleCodeError):
        pnplus_to_wplus(PnPlusCode(np.zeros((2, 3)), fingerprint=m2.fingerprint), m1)


def test_dimension_mismatch():
    m = correlated_model()
    with pytest.raises(InvalidInputError):
        p_to_pn(PCode(np.ones(4)), m)


def test_mahalanobis_diag_example():
    m = WhiteningModel(np.zeros(2), np.eye(2), np.array([4.0, 1.0]))
    v = p_to_pn(PCode([2.0, 1.0]), m)
    assert mahalanobis_sq(v) == pytest.approx(2.0, rel=1e-12)
    assert mahalanobis_sq(center_code(m, 3)) == 0.0


def test_mahalanobis_matches_dense_solve(rng):
    m = correlated_model(dim=6, seed=4)
    for x in rng.normal(size=(50, 6)) * 3:
        d = x - m.mu
        oracle = d @ np.linalg.solve(m.covariance, d)
        assert mahalanobis_sq(p_to_pn(PCode(x), m)) == pytest.approx(oracle, rel=1e-8)


def test_mahalanobis_sign_invariance(rng):
    m = correlated_model(dim=4)
    flipped = WhiteningModel(m.mu, m.basis * np.array([1, -1, 1, -1]), m.singular_values)
    x = PCode(rng.normal(size=4))
    assert mahalanobis_sq(p_to_pn(x, m)) == pytest.approx(mahalanobis_sq(p_to_pn(x, flipped)), rel=1e-12)


def test_plus_codes_are_layerwise(rng):
    m = correlated_model(dim=3)
    w = WPlusCode(rng.normal(size=(5, 3)))
    v = wplus_to_pnplus(w, m)
    for k in range(5):
        single = p_to_pn(w_to_p(WCode(w.values[k])), m)
        np.testing.assert_allclose(v.values[k], single.values, rtol=1e-12)
    assert mahalanobis_sq(v) == pytest.approx(sum(np.sum(r**2) for r in v.values))
    np.testing.assert_allclose(pnplus_to_wplus(v, m).values, w.values, rtol=1e-9, atol=1e-12)

    bumped = v.values.copy()
    bumped[2] += 1.0
    moved = pnplus_to_wplus(PnPlusCode(bumped, fingerprint=m.fingerprint), m).values
    back = pnplus_to_wplus(v, m).values
    changed = np.any(moved != back, axis=1)
    assert changed.tolist() == [False, False, True, False, False]


def test_zero_pnplus_maps_to_mode():
    m = correlated_model()
    w = pnplus_to_wplus(center_code(m, 4), m)
    np.testing.assert_allclose(w.values, np.tile(leaky_p_to_w(m.mu), (4, 1)), rtol=1e-12)


def test_affinity_of_whitening(rng):
    m = correlated_model(dim=5)
    x1, x2 = rng.normal(size=5), rng.normal(size=5)
    a = 0.3
    lhs = p_to_pn(PCode(a * x1 + (1 - a) * x2), m).values
    rhs = a * p_to_pn(PCode(x1), m).values + (1 - a) * p_to_pn(PCode(x2), m).values
    np.testing.assert_allclose(lhs, rhs, rtol=1e-10, atol=1e-12)


def test_broadcast():
    w = WCode([1.0, 2.0])
    assert broadcast_w(w, 1).values.shape == (1, 2)
    b = broadcast_w(w, 18)
    assert b.num_layers == 18 and np.all(b.values == w.values)
    with pytest.raises(InvalidInputError):
        broadcast_w(w, 0)


def test_archive_roundtrip(tmp_path, rng):
    m = correlated_model()
    codes = [PnPlusCode(rng.normal(size=(4, 3)), fingerprint=m.fingerprint) for _ in range(3)]
    path = save_codes(tmp_path / "codes.npz", codes, generator_id="gen123")
    loaded, meta = load_codes(path)
    assert meta["space"] == "P_N+" and meta["count"] == 3 and meta["generator_id"] == "gen123"
    assert all(a == b for a, b in zip(codes, loaded))
    assert np.load(path)["codes"].shape == (3, 4, 3)


def test_archive_is_byte_reproducible(tmp_path):
    codes = [WPlusCode(np.arange(6.0).reshape(2, 3))]
    a = save_codes(tmp_path / "a.npz", codes).read_bytes()
    b = save_codes(tmp_path / "b.npz", codes).read_bytes()
    assert a == b


def test_archive_rejects_mixed_and_foreign(tmp_path):
    with pytest.raises(InvalidInputError):
        save_codes(tmp_path / "x.npz", [WPlusCode(np.ones((2, 3))), WPlusCode(np.ones((3, 3)))])
    m = correlated_model()
    m.save(tmp_path / "model.npz")
    with pytest.raises(IncompatibleArtifactError):
        load_codes(tmp_path / "model.npz")
    (tmp_path / "junk.npz").write_bytes(b"not a zip")
    with pytest.raises(IncompatibleArtifactError):
        load_codes(tmp_path / "junk.npz")


@settings(max_examples=30)
@given(st.integers(1, 6), st.integers(0, 2**31 - 1))
def test_pnplus_roundtrip_property(layers, seed):
    m = correlated_model(dim=3, seed=7)
    w = WPlusCode(np.random.default_rng(seed).normal(size=(layers, 3)) * 2)
    back = pnplus_to_wplus(wplus_to_pnplus(w, m), m).values
    np.testing.assert_allclose(back, w.values, rtol=1e-5, atol=1e-8)
