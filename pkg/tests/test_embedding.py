from __future__ import annotations

import math

import numpy as np
import pytest

from toeplab import asymfit, embedding, kernels, models, specfun
from toeplab.embedding import EmbeddingConfig, TangentVector
from toeplab.errors import ResourceError, ThresholdError, ValidationError
from toeplab.models import PointX, TorusGrauertTube, sphere_point
from toeplab.sampling import halton_points
from toeplab.specfun import BumpFunction

CHI = BumpFunction(1.0, 2.0)
REEB = TorusGrauertTube(2, 0.5, "reeb")
LADDER = [50, 100, 200, 400]
RESCALED = EmbeddingConfig("rescaled", "reeb")
SPHERE = EmbeddingConfig("sphere-normalized", "reeb")
P = PointX([0.4, 1.3], sphere_point(0.5, [math.cos(0.7), math.sin(0.7)]))


@pytest.fixture(scope="module")
def frames():
    return {k: embedding.frame_for(REEB, CHI, k, RESCALED) for k in LADDER}


def decay(series):
    return asymfit.fit_power(series)


def test_config_validation():
    with pytest.raises(ValidationError):
        EmbeddingConfig("weird")
    with pytest.raises(ValidationError):
        embedding.frame_for(TorusGrauertTube(2, 0.5), CHI, 50, RESCALED)
    with pytest.raises(ValidationError):
        embedding.embed_norm_sq(kernels.build_frame(REEB, CHI, 50), RESCALED, P)


def test_tangent_vector_checks():
    with pytest.raises(ValidationError):
        TangentVector(P, [1, 0], P.y)
    with pytest.raises(ValidationError):
        TangentVector(P, [1, 0, 0], [0, 0])
    r = TangentVector.reeb(P, 0.5)
    g = models.geometry_constants(REEB)
    xa, _ = g.xi_at(P)
    assert float(xa @ r.u) == pytest.approx(1.0, abs=1e-15)


def test_norm_is_scaled_diagonal(frames):
    f = frames[100]
    s = embedding.scale_sq(f, RESCALED)
    assert embedding.embed_norm_sq(f, RESCALED, P) == s * kernels.kernel_diag(f, P)
    assert embedding.scale_sq(f, EmbeddingConfig("plain", "reeb")) == 1.0


def test_norm_torus_independent(frames):
    f = frames[200]
    for a in ([1.0, 0.0], [-3.0, 2.5]):
        assert embedding.embed_norm_sq(f, RESCALED, P.translated(a)) == embedding.embed_norm_sq(f, RESCALED, P)
        assert embedding.sphere_defect(f, SPHERE, [P.translated(a)])[0] == embedding.sphere_defect(f, SPHERE, [P])[0]


def test_sphere_normalized_norm_tends_to_one(frames):
    series = [(k, abs(embedding.embed_norm_sq(frames[k], SPHERE, P) - 1.0)) for k in LADDER]
    f = decay(series)
    assert f.exponent <= -0.8 and f.r_squared >= 0.98


def test_differential_zero_vector(frames):
    assert embedding.differential(frames[50], RESCALED, TangentVector(P, [0, 0], [0, 0])) == 0.0


def test_gram_rates(frames):
    t = models.sphere_tangent_frame(P.y)[0]
    reeb = [(k, embedding.differential(frames[k], RESCALED, TangentVector.reeb(P, 0.5))
             / embedding.embed_norm_sq(frames[k], RESCALED, P)) for k in LADDER]
    levi = [(k, embedding.differential(frames[k], RESCALED, TangentVector(P, [0, 0], t))
             / embedding.embed_norm_sq(frames[k], RESCALED, P)) for k in LADDER]
    assert abs(decay(reeb).exponent - 2) <= 0.15
    assert abs(decay(levi).exponent - 1) <= 0.15


def test_differential_pairing_hermitian(frames):
    f = frames[50]
    t = models.sphere_tangent_frame(P.y)[0]
    v1 = TangentVector(P, [0.3, -1.0], 0.7 * t)
    v2 = TangentVector(P, [1.0, 0.2], -0.4 * t)
    a = embedding.differential(f, RESCALED, v1, v2)
    b = embedding.differential(f, RESCALED, v2, v1)
    assert a == pytest.approx(b.conjugate(), rel=1e-13)
    assert embedding.differential(f, RESCALED, v1, v1).real == pytest.approx(
        embedding.differential(f, RESCALED, v1), rel=1e-14)


def test_pullback_structure(frames):
    for k in LADDER:
        om = embedding.pullback_omega(frames[k], RESCALED, P)
        assert np.all(om.b == 0.0)
        dev = embedding.pullback_deviation(frames[k], RESCALED, P)
        assert dev["sphere"] == [0.0]
        assert dev["sign"] == 1.0
        # on this model the pullback equals xi / sigma_P(xi) up to rounding at every k
        assert dev["deviation"] <= 1e-12
        assert embedding.reeb_pairing(om, 0.5) == pytest.approx(1.0, abs=1e-12)


def test_pullback_scaling_invariant(frames):
    f = frames[100]
    a = embedding.pullback_omega(f, RESCALED, P)
    b = embedding.pullback_omega(f, EmbeddingConfig("plain", "reeb"), P)
    assert np.array_equal(a.a, b.a) and np.array_equal(a.b, b.b)


def test_metrics_translation_invariant(frames):
    f = frames[100]
    q = P.translated([2.0, -1.0])
    assert embedding.equivariance_metrics(f, RESCALED, q) == embedding.equivariance_metrics(f, RESCALED, P)
    assert np.array_equal(embedding.pullback_omega(f, RESCALED, q).a, embedding.pullback_omega(f, RESCALED, P).a)


def test_equivariance(frames):
    cp = embedding.moment_constant(REEB, CHI)
    assert cp == pytest.approx(specfun.bump_moment(CHI, 3, squared=True), rel=1e-15)
    rows = []
    for k in LADDER:
        f = frames[k]
        a, b, c = embedding.equivariance_metrics(f, RESCALED, P)
        assert b == kernels.weighted_diag(f, P, 2) * embedding.scale_sq(f, RESCALED) / f.k ** 2
        rows.append((k, a, b, c))
    for idx in (1, 2):
        fit = decay([(r[0], abs(r[idx] - cp)) for r in rows])
        assert fit.exponent <= -0.8 and fit.r_squared >= 0.98
    fit_c = decay([(r[0], r[3]) for r in rows])
    assert fit_c.exponent <= -0.8
    series = embedding.equivariance_series(REEB, CHI, P, [50, 100], RESCALED)
    assert [(r["a"], r["b"], r["c"]) for r in series] == [tuple(r[1:]) for r in rows[:2]]


def test_equivariance_needs_contact_volume():
    f = kernels.build_frame(REEB, CHI, 50, squared=True)
    with pytest.raises(ValidationError):
        embedding.equivariance_metrics(f, RESCALED, P)


def test_injectivity(frames):
    samples = halton_points(2, 0.5, 64, 20240607)
    corr, pair = embedding.injectivity_scan(frames[200], RESCALED, samples)
    assert 0 <= corr <= 0.9
    assert pair[0] < pair[1]
    with pytest.raises(ValidationError):
        embedding.injectivity_scan(frames[50], RESCALED, [samples[0], samples[0], samples[1]])
    with pytest.raises(ValidationError):
        embedding.injectivity_scan(frames[50], RESCALED, samples[:1])


def test_injectivity_matches_kernel_correlation(frames):
    samples = halton_points(2, 0.5, 5, 1)
    f = frames[50]
    corr, (i, j) = embedding.injectivity_scan(f, RESCALED, samples)
    assert corr == pytest.approx(kernels.correlation(f, samples[i], samples[j]), rel=1e-9)
    best = max(kernels.correlation(f, samples[a], samples[b]) for a in range(5) for b in range(a + 1, 5))
    assert corr == pytest.approx(best, rel=1e-9)


def test_sphere_defect(frames):
    samples = halton_points(2, 0.5, 16, 20240607)
    sups = []
    for k in LADDER:
        f = embedding.frame_for(REEB, CHI, k, SPHERE) if k == 50 else frames[k]
        sup, rows = embedding.sphere_defect(f, SPHERE, samples)
        assert sup >= 0 and all(r["value"] >= 0 and r["torus_grad"] == 0.0 for r in rows)
        sups.append((k, sup))
    fit = decay(sups)
    assert fit.exponent <= -0.8 and fit.r_squared >= 0.98
    with pytest.raises(ValidationError):
        embedding.sphere_defect(frames[50], RESCALED, samples)


def test_sphere_defect_gradient_finite_difference():
    f = embedding.frame_for(REEB, CHI, 3, SPHERE)
    y = np.array([0.3, 0.4])
    t = models.sphere_tangent_frame(y)[0]
    h = 1e-6
    norm = lambda yy: math.sqrt(embedding.embed_norm_sq(f, SPHERE, PointX([0, 0], sphere_point(0.5, yy))))
    fd = abs(norm(y + h * t) - norm(y - h * t)) / (2 * h)
    _, rows = embedding.sphere_defect(f, SPHERE, [PointX([0, 0], y)])
    assert rows[0]["sphere_grad"] == pytest.approx(fd, rel=1e-6)


def test_embed_probe_shape(frames):
    probe = embedding.embed_probe(frames[50], RESCALED, P)
    assert set(probe) == {"k", "scaling", "point", "norm_sq", "pullback", "equivariance"}
    assert set(probe["pullback"]) == {"dx", "reeb_pairing"}
    assert set(probe["equivariance"]) == {"a", "b", "c"}


def test_component_export(tmp_path, frames):
    f = frames[50]
    n = embedding.write_components_csv(tmp_path / "c.csv", f, RESCALED, P)
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "mode_m1,mode_m2,re,im" and len(lines) == n + 1 == len(f) + 1
    vals = np.array([[float(v) for v in l.split(",")[2:]] for l in lines[1:]])
    assert (vals ** 2).sum() == pytest.approx(embedding.embed_norm_sq(f, RESCALED, P), rel=1e-12)


def test_component_export_cap(tmp_path, monkeypatch, frames):
    monkeypatch.setattr(embedding, "EXPORT_ROW_CAP", 10)
    with pytest.raises(ResourceError):
        embedding.write_components_csv(tmp_path / "c.csv", frames[50], RESCALED, P)


def test_empty_frame_thresholds():
    f = embedding.frame_for(REEB, BumpFunction(3.0, 3.0001), 1.0, RESCALED)
    assert f.empty
    with pytest.warns(embedding.ThresholdWarning):
        assert embedding.embed_norm_sq(f, RESCALED, P) == 0.0
    with pytest.raises(ThresholdError):
        embedding.pullback_omega(f, RESCALED, P)
