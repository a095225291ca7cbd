import math

import numpy as np
import pytest

from platemorph import (
    GeometryError,
    MidplaneState,
    SurfaceMesh,
    TopologyError,
    TorusPatch,
    TorusSpec,
    UnsupportedTargetError,
    estimate_curvatures,
    export_obj,
    fit_torus,
    flatten_patch,
    import_obj,
    quadratic_preview,
    sample_patch,
    torus_curvatures,
    torus_point,
)

SPEC = TorusSpec(r1=10.0, r2=5.0)


def inner_patch(spec=SPEC, bspan=0.4, pspan=0.4):
    return TorusPatch(
        spec=spec,
        beta_range=((1 - bspan) * math.pi, (1 + bspan) * math.pi),
        psi_range=(-pspan, pspan),
    )


def test_torus_point_substitutions():
    assert np.allclose(torus_point(SPEC, math.pi, 0.0), [10.0, 0.0, 0.0], atol=1e-12)
    assert np.allclose(torus_point(SPEC, 0.0, 0.0), [20.0, 0.0, 0.0])
    assert np.allclose(torus_point(SPEC, math.pi / 2, math.pi / 2), [0.0, 15.0, 5.0],
                       atol=1e-12)


def test_torus_curvatures_substitutions():
    k1, k2, kk = torus_curvatures(SPEC, math.pi / 2)
    assert k1 == pytest.approx(0.0, abs=1e-15)
    assert kk == pytest.approx(0.0, abs=1e-15)
    k1, k2, kk = torus_curvatures(SPEC, math.pi)
    assert k1 == pytest.approx(-0.1)
    assert k2 == pytest.approx(0.2)
    assert kk == pytest.approx(-0.02)


def test_torus_curvature_product_and_peak():
    beta = np.linspace(0.0, 2.0 * math.pi, 100001)
    k1, k2, kk = torus_curvatures(SPEC, beta)
    assert np.max(np.abs(k1 * k2 - kk)) <= 1e-15
    peak = np.argmax(np.abs(k1))
    assert beta[peak] == pytest.approx(math.pi)
    assert abs(k1[peak]) == pytest.approx(1.0 / SPEC.r1, rel=1e-12)


def test_estimate_plane():
    x, y = np.meshgrid(np.linspace(0, 4, 30), np.linspace(0, 3, 30), indexing="ij")
    mesh = SurfaceMesh(vertices=np.stack([x, y, np.zeros_like(x)], axis=-1))
    cf = estimate_curvatures(mesh)
    assert np.max(np.abs(cf.k1)) <= 1e-9
    assert np.max(np.abs(cf.k2)) <= 1e-9
    assert np.max(np.abs(cf.gauss)) <= 1e-9


def test_estimate_cylinder():
    r = 7.0
    th, zz = np.meshgrid(np.linspace(-0.6, 0.6, 200), np.linspace(0, 8, 200),
                         indexing="ij")
    mesh = SurfaceMesh(
        vertices=np.stack([r * np.cos(th), r * np.sin(th), zz], axis=-1)
    )
    cf = estimate_curvatures(mesh)
    kmax = np.maximum(np.abs(cf.k1), np.abs(cf.k2))
    kmin = np.minimum(np.abs(cf.k1), np.abs(cf.k2))
    assert np.max(np.abs(kmax - 1.0 / r)) * r <= 1e-3
    assert np.max(kmin) * r <= 1e-3


def test_estimate_torus_against_analytic():
    patch = inner_patch()
    mesh = sample_patch(patch, 200, 200)
    cf = estimate_curvatures(mesh)
    beta = np.linspace(*patch.beta_range, 200)
    k1a, k2a, _ = torus_curvatures(SPEC, beta)
    # interior only; estimated k1 >= k2 so tubular (positive) is k1 here
    est_circ = cf.k2[1:-1, 1:-1]
    est_tub = cf.k1[1:-1, 1:-1]
    ref = k1a[1:-1][:, None]
    assert np.max(np.abs(est_circ - ref) / np.abs(ref)) <= 1e-3
    assert np.max(np.abs(est_tub - k2a[0])) / k2a[0] <= 1e-3
    assert np.all(cf.gauss[1:-1, 1:-1] < 0)


def test_fit_torus_noiseless_round_trip():
    patch = inner_patch()
    mesh = sample_patch(patch, 80, 80)
    spec, fitted, rms = fit_torus(mesh)
    assert abs(spec.r1 - SPEC.r1) / SPEC.r1 <= 1e-6
    assert abs(spec.r2 - SPEC.r2) / SPEC.r2 <= 1e-6
    assert rms <= 1e-8
    assert fitted.beta_range[0] > math.pi / 2
    assert fitted.beta_range[1] < 3 * math.pi / 2


def test_fit_torus_posed_round_trip():
    rng = np.random.default_rng(2)
    rotvec = rng.normal(size=3)
    from scipy.spatial.transform import Rotation
    rot = Rotation.from_rotvec(rotvec).as_matrix()
    patch = TorusPatch(
        spec=SPEC,
        beta_range=(0.65 * math.pi, 1.35 * math.pi),
        psi_range=(0.3, 1.1),
        orientation=rot,
        center=np.array([3.0, -7.0, 11.0]),
    )
    mesh = sample_patch(patch, 70, 70)
    spec, fitted, rms = fit_torus(mesh)
    assert abs(spec.r1 - SPEC.r1) / SPEC.r1 <= 1e-6
    assert abs(spec.r2 - SPEC.r2) / SPEC.r2 <= 1e-6


def test_fit_torus_rejects_plane():
    x, y = np.meshgrid(np.linspace(0, 5, 25), np.linspace(0, 5, 25), indexing="ij")
    mesh = SurfaceMesh(vertices=np.stack([x, y, np.zeros_like(x)], axis=-1))
    with pytest.raises(UnsupportedTargetError):
        fit_torus(mesh)


def test_fit_torus_rejects_positive_k():
    # sphere octant: K > 0 everywhere
    th, ph = np.meshgrid(np.linspace(0.3, 1.2, 30), np.linspace(0.3, 1.2, 30),
                         indexing="ij")
    r = 10.0
    mesh = SurfaceMesh(vertices=np.stack(
        [r * np.sin(th) * np.cos(ph), r * np.sin(th) * np.sin(ph), r * np.cos(th)],
        axis=-1))
    with pytest.raises(UnsupportedTargetError):
        fit_torus(mesh)


def test_fit_torus_noisy():
    patch = TorusPatch(
        spec=SPEC,
        beta_range=(0.55 * math.pi, 1.45 * math.pi),
        psi_range=(-0.7, 0.7),
    )
    mesh = sample_patch(patch, 12, 12)
    rng = np.random.default_rng(9)
    noisy = SurfaceMesh(vertices=mesh.vertices + rng.normal(0.0, 0.01,
                                                            mesh.vertices.shape))
    spec, fitted, rms = fit_torus(noisy)
    assert rms <= 0.05
    assert abs(spec.r1 - SPEC.r1) / SPEC.r1 <= 0.2
    assert abs(spec.r2 - SPEC.r2) / SPEC.r2 <= 0.2


def _centered_corners(spec, l_ab, l_ad, omega_deg):
    """Corner quad centered on (beta, psi) = (pi, 0), AB at omega in the chart."""
    om = math.radians(omega_deg)
    ab = l_ab * np.array([math.cos(om), math.sin(om)])
    ad = l_ad * np.array([-math.sin(om), math.cos(om)])
    a0 = -(ab + ad) / 2.0
    uv = np.stack([a0, a0 + ab, a0 + ab + ad, a0 + ad])
    psi = uv[:, 0] / spec.r1
    beta = math.pi - uv[:, 1] / spec.r2
    return np.stack([beta, psi], axis=1)


def test_flatten_arc_lengths():
    spec = TorusSpec(r1=50.0, r2=20.0)
    patch = TorusPatch(spec=spec, beta_range=(0.8 * math.pi, 1.2 * math.pi),
                       psi_range=(-0.3, 0.3))
    corners = _centered_corners(spec, 50.0 * 0.2, 8.0, 0.0)
    fl = flatten_patch(patch, corners)
    assert fl.l_ab == pytest.approx(10.0, rel=1e-12)   # r1 * dpsi
    assert fl.l_ad == pytest.approx(8.0, rel=1e-12)
    assert fl.phi == pytest.approx(0.0, abs=1e-12)


def test_flatten_phi_45_when_projections_equal():
    spec = TorusSpec(r1=40.0, r2=15.0)
    patch = TorusPatch(spec=spec, beta_range=(0.7 * math.pi, 1.3 * math.pi),
                       psi_range=(-0.5, 0.5))
    fl = flatten_patch(patch, _centered_corners(spec, 6.0, 5.0, 45.0))
    assert abs(fl.phi) == pytest.approx(45.0, rel=1e-12)
    fl = flatten_patch(patch, _centered_corners(spec, 6.0, 5.0, -45.0))
    assert abs(fl.phi) == pytest.approx(45.0, rel=1e-12)


def test_flatten_arc_length_additivity():
    spec = TorusSpec(r1=50.0, r2=20.0)
    full = spec.r1 * 0.3
    half = spec.r1 * 0.15
    patch = TorusPatch(spec=spec, beta_range=(0.8 * math.pi, 1.2 * math.pi),
                       psi_range=(-0.4, 0.4))
    fl_full = flatten_patch(patch, _centered_corners(spec, full, 5.0, 0.0))
    fl_half = flatten_patch(patch, _centered_corners(spec, half, 5.0, 0.0))
    assert fl_full.l_ab == pytest.approx(2.0 * fl_half.l_ab, rel=1e-14)


def test_flatten_symmetry_violation():
    spec = TorusSpec(r1=50.0, r2=20.0)
    patch = TorusPatch(spec=spec, beta_range=(0.8 * math.pi, 1.2 * math.pi),
                       psi_range=(-0.3, 0.3))
    corners = _centered_corners(spec, 10.0, 8.0, 0.0)
    corners[0, 0] += 0.05   # break z_A = -z_C
    with pytest.raises(GeometryError):
        flatten_patch(patch, corners)


def test_quadratic_preview_flat():
    state = MidplaneState(eps0=np.zeros(3), kappa=np.zeros(3))
    mesh = quadratic_preview(state, 10.0, 6.0, 11, 7)
    assert np.allclose(mesh.vertices[..., 2], 0.0)
    assert mesh.vertices[0, 0, 0] == pytest.approx(-5.0)
    assert mesh.vertices[-1, -1, 1] == pytest.approx(3.0)


def test_quadratic_preview_parabolic_cylinder():
    c = 0.08
    state = MidplaneState(eps0=np.zeros(3), kappa=np.array([c, 0.0, 0.0]))
    mesh = quadratic_preview(state, 10.0, 6.0, 41, 5)
    x = mesh.vertices[:, 0, 0]
    w = mesh.vertices[:, 0, 2]
    d2w = np.diff(w, 2) / np.diff(x)[0] ** 2
    assert np.max(np.abs(d2w + c)) <= 1e-9
    assert np.allclose(mesh.vertices[:, 0, 2], mesh.vertices[:, -1, 2])


def test_quadratic_preview_twist_is_saddle():
    state = MidplaneState(eps0=np.zeros(3), kappa=np.array([0.0, 0.0, 0.3]))
    mesh = quadratic_preview(state, 8.0, 8.0, 41, 41)
    cf = estimate_curvatures(mesh)
    assert cf.gauss[20, 20] < 0


def test_obj_round_trip(tmp_path):
    patch = inner_patch()
    mesh = sample_patch(patch, 9, 7)
    p = tmp_path / "m.obj"
    export_obj(mesh, p)
    back = import_obj(p)
    assert back.nu == 9 and back.nv == 7
    scale = np.max(np.abs(mesh.vertices))
    assert np.max(np.abs(back.vertices - mesh.vertices)) / scale <= 1e-8


def test_obj_quad_count(tmp_path):
    mesh = SurfaceMesh(vertices=np.arange(12, dtype=float).reshape(2, 2, 3))
    p = tmp_path / "q.obj"
    export_obj(mesh, p)
    text = p.read_text()
    assert sum(1 for ln in text.splitlines() if ln.startswith("f ")) == 1


def test_obj_missing_metadata(tmp_path):
    p = tmp_path / "bad.obj"
    p.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\n")
    with pytest.raises(TopologyError):
        import_obj(p)


def test_obj_count_mismatch(tmp_path):
    p = tmp_path / "bad2.obj"
    p.write_text("# grid 2 2\nv 0 0 0\nv 1 0 0\nv 0 1 0\n")
    with pytest.raises(TopologyError):
        import_obj(p)
