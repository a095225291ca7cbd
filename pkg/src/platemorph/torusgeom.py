"""Torus differential geometry for the inverse pipeline.

A doubly curved target with negative Gaussian curvature is superimposed on
the inner region of a torus (hole radius r1, tube radius r2, center distance
rh = r1 + r2).  On that region the circumferential principal curvature is
k1_i = cos(beta) / (rh + r2 cos(beta)) and the tubular one is k2 = 1/r2,
so K = k1_i * k2 < 0 wherever cos(beta) < 0.  Curvature signs follow the
outward torus normal; |k1_i| peaks at 1/r1 on the inner middle circle
(beta = pi).

The 2D chart used for flattening maps the circumferential direction to
u = r1 * psi and the tubular direction to v = -r2 * (beta - pi); (u, v, n)
is right-handed with respect to the outward normal.  The transformation
angle phi is the rotation from the printing x-axis (the A->B chord) to the
circumferential (k1) axis of that chart.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares
from scipy.spatial.transform import Rotation

from .errors import GeometryError, TopologyError, UnsupportedTargetError, ValidationError

__all__ = [
    "TorusSpec", "TorusPatch", "SurfaceMesh", "FlattenedPatch", "CurvatureField",
    "torus_point", "torus_curvatures", "torus_parameters", "sample_patch",
    "estimate_curvatures", "fit_torus", "flatten_patch", "quadratic_preview",
    "export_obj", "import_obj",
]


@dataclass(frozen=True)
class TorusSpec:
    """Torus defined by hole radius r1 and tube radius r2 (mm)."""

    r1: float
    r2: float

    def __post_init__(self):
        if self.r1 <= 0 or self.r2 <= 0:
            raise ValidationError("torus radii must be positive")

    @property
    def rh(self) -> float:
        return self.r1 + self.r2


def _identity_pose():
    return np.eye(3)


def _zero_center():
    return np.zeros(3)


@dataclass(frozen=True)
class TorusPatch:
    """A patch on the inner (negative-K) region of a posed torus.

    orientation/center place the canonical torus (axis z, centered at the
    origin) in world coordinates: X = orientation @ x + center.
    """

    spec: TorusSpec
    beta_range: tuple[float, float]
    psi_range: tuple[float, float]
    orientation: np.ndarray = field(default_factory=_identity_pose)
    center: np.ndarray = field(default_factory=_zero_center)

    def __post_init__(self):
        b0, b1 = self.beta_range
        if not b0 < b1:
            raise ValidationError("beta_range must be increasing")
        eps = 1e-9
        if b0 < math.pi / 2 - eps or b1 > 3 * math.pi / 2 + eps:
            raise ValidationError(
                "beta_range must lie within (pi/2, 3*pi/2): inner torus region"
            )
        p0, p1 = self.psi_range
        if not p0 < p1:
            raise ValidationError("psi_range must be increasing")


@dataclass(frozen=True)
class SurfaceMesh:
    """Structured quad-grid surface: vertices shaped (nu, nv, 3), mm."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 3 or v.shape[2] != 3 or v.shape[0] < 2 or v.shape[1] < 2:
            raise ValidationError("mesh vertices must have shape (nu >= 2, nv >= 2, 3)")
        if not np.all(np.isfinite(v)):
            raise ValidationError("mesh vertices must be finite")
        object.__setattr__(self, "vertices", v)

    @property
    def nu(self) -> int:
        return self.vertices.shape[0]

    @property
    def nv(self) -> int:
        return self.vertices.shape[1]


@dataclass(frozen=True)
class FlattenedPatch:
    """2D flattening of a torus patch into the printing domain."""

    outer: tuple[float, float]      # bbox extents along (k1, k2) axes, mm
    inner: np.ndarray               # corners A,B,C,D in the printing frame, (4,2) mm
    l_ab: float                     # deployed length along printing x, mm
    l_ad: float                     # deployed length along printing y, mm
    phi: float                      # transformation angle, deg in (-90, 90]

    def __post_init__(self):
        if self.l_ab <= 0 or self.l_ad <= 0:
            raise ValidationError("flattened edge lengths must be positive")


def torus_point(spec: TorusSpec, beta, psi) -> np.ndarray:
    """Canonical-pose torus point(s) for tubular angle beta and hole angle psi."""
    beta = np.asarray(beta, dtype=float)
    psi = np.asarray(psi, dtype=float)
    rho = spec.rh + spec.r2 * np.cos(beta)
    return np.stack(
        [rho * np.cos(psi), rho * np.sin(psi), spec.r2 * np.sin(beta) * np.ones_like(psi)],
        axis=-1,
    )


def torus_curvatures(spec: TorusSpec, beta) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Analytic (k1_i, k2, K) at tubular angle beta, outward-normal signs."""
    beta = np.asarray(beta, dtype=float)
    k1_i = np.cos(beta) / (spec.rh + spec.r2 * np.cos(beta))
    k2 = np.full_like(k1_i, 1.0 / spec.r2)
    return k1_i, k2, k1_i * k2


def torus_parameters(patch: TorusPatch, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Map world points near the torus back to (beta, psi), beta in [0, 2*pi)."""
    q = (np.asarray(points, dtype=float) - patch.center) @ patch.orientation
    rho = np.hypot(q[..., 0], q[..., 1])
    beta = np.mod(np.arctan2(q[..., 2], rho - patch.spec.rh), 2.0 * np.pi)
    psi = np.arctan2(q[..., 1], q[..., 0])
    return beta, psi


def sample_patch(patch: TorusPatch, nu: int, nv: int) -> SurfaceMesh:
    """Sample the patch on a regular (beta, psi) grid; beta along axis 0.

    With beta along axis 0 the grid normal (d/di x d/dj) coincides with the
    outward torus normal, so estimated curvature signs match the analytic
    convention.
    """
    beta = np.linspace(patch.beta_range[0], patch.beta_range[1], nu)
    psi = np.linspace(patch.psi_range[0], patch.psi_range[1], nv)
    pts = torus_point(patch.spec, beta[:, None], psi[None, :])
    world = pts @ patch.orientation.T + patch.center
    return SurfaceMesh(vertices=world)


@dataclass(frozen=True)
class CurvatureField:
    """Per-vertex principal curvature estimates on a grid mesh."""

    k1: np.ndarray        # (nu, nv), k1 >= k2
    k2: np.ndarray
    gauss: np.ndarray
    dir1: np.ndarray      # (nu, nv, 3) principal direction of k1
    dir2: np.ndarray
    normal: np.ndarray    # (nu, nv, 3)
    valid: np.ndarray     # (nu, nv) bool; False where the local fit degenerated


def _pad_edge(arr: np.ndarray) -> np.ndarray:
    pad = [(1, 1), (1, 1)] + [(0, 0)] * (arr.ndim - 2)
    return np.pad(arr, pad, mode="edge")


def estimate_curvatures(mesh: SurfaceMesh) -> CurvatureField:
    """Quadric-fit curvature estimation over the 1-ring of each grid vertex.

    Per interior vertex: a local frame from the PCA normal of the 3x3
    neighborhood, a least-squares quadric w(u, v), then the eigenstructure
    of the shape operator I^-1 II.  Boundary vertices copy their nearest
    interior neighbor.  Degenerate neighborhoods are flagged per vertex.
    """
    v = mesh.vertices
    nu, nv = mesh.nu, mesh.nv
    if nu < 3 or nv < 3:
        raise ValidationError("curvature estimation needs at least a 3x3 grid")

    # (M, 9, 3) stencils around interior vertices
    shifts = [v[1 + di:nu - 1 + di, 1 + dj:nv - 1 + dj]
              for di in (-1, 0, 1) for dj in (-1, 0, 1)]
    nbrs = np.stack(shifts, axis=2).reshape(-1, 9, 3)
    p0 = v[1:-1, 1:-1].reshape(-1, 3)
    m = p0.shape[0]

    # grid normal for sign orientation
    du = v[2:, 1:-1] - v[:-2, 1:-1]
    dv = v[1:-1, 2:] - v[1:-1, :-2]
    gn = np.cross(du, dv).reshape(-1, 3)
    gn /= np.maximum(np.linalg.norm(gn, axis=1, keepdims=True), 1e-300)

    # PCA normal of the stencil, oriented along the grid normal
    cen = nbrs - nbrs.mean(axis=1, keepdims=True)
    cov = np.einsum("mki,mkj->mij", cen, cen)
    _, evec = np.linalg.eigh(cov)
    n = evec[:, :, 0]
    flip = np.einsum("mi,mi->m", n, gn) < 0
    n[flip] *= -1.0

    # tangent frame (t1, t2, n)
    e = du.reshape(-1, 3)
    t1 = e - np.einsum("mi,mi->m", e, n)[:, None] * n
    t1 /= np.maximum(np.linalg.norm(t1, axis=1, keepdims=True), 1e-300)
    t2 = np.cross(n, t1)

    d = nbrs - p0[:, None, :]
    uu = np.einsum("mki,mi->mk", d, t1)
    vv = np.einsum("mki,mi->mk", d, t2)
    ww = np.einsum("mki,mi->mk", d, n)

    # scale for conditioning; derivatives are unscaled afterwards
    h = np.maximum(np.linalg.norm(d, axis=2).mean(axis=1), 1e-300)
    us, vs = uu / h[:, None], vv / h[:, None]
    design = np.stack(
        [np.ones_like(us), us, vs, 0.5 * us * us, us * vs, 0.5 * vs * vs], axis=2
    )
    ata = np.einsum("mka,mkb->mab", design, design)
    atb = np.einsum("mka,mk->ma", design, ww)
    ev = np.linalg.eigvalsh(ata)
    valid = ev[:, 0] > 1e-12 * np.maximum(ev[:, -1], 1e-300)
    ata_safe = np.where(valid[:, None, None], ata, np.eye(6))
    coef = np.linalg.solve(ata_safe, atb[..., None])[..., 0]

    fu = coef[:, 1] / h
    fv = coef[:, 2] / h
    fuu = coef[:, 3] / h ** 2
    fuv = coef[:, 4] / h ** 2
    fvv = coef[:, 5] / h ** 2

    ee = 1.0 + fu * fu
    ff = fu * fv
    gg = 1.0 + fv * fv
    wnorm = np.sqrt(1.0 + fu * fu + fv * fv)
    ll, mm_, nn = fuu / wnorm, fuv / wnorm, fvv / wnorm

    det_i = ee * gg - ff * ff
    s11 = (gg * ll - ff * mm_) / det_i
    s12 = (gg * mm_ - ff * nn) / det_i
    s21 = (ee * mm_ - ff * ll) / det_i
    s22 = (ee * nn - ff * mm_) / det_i
    tr = s11 + s22
    det = (ll * nn - mm_ * mm_) / det_i
    disc = np.sqrt(np.maximum(tr * tr - 4.0 * det, 0.0))
    k1 = 0.5 * (tr + disc)
    k2 = 0.5 * (tr - disc)

    # eigenvector of the shape operator for k1, in the (t1, t2) basis
    c1 = np.stack([s12, k1 - s11], axis=1)
    c2 = np.stack([k1 - s22, s21], axis=1)
    use2 = np.linalg.norm(c2, axis=1) > np.linalg.norm(c1, axis=1)
    vec = np.where(use2[:, None], c2, c1)
    norm = np.linalg.norm(vec, axis=1, keepdims=True)
    vec = np.where(norm > 1e-300, vec / np.maximum(norm, 1e-300),
                   np.stack([np.ones(m), np.zeros(m)], axis=1))
    dir1 = vec[:, 0:1] * t1 + vec[:, 1:2] * t2
    dir2 = np.cross(n, dir1)

    sh = (nu - 2, nv - 2)
    return CurvatureField(
        k1=_pad_edge(k1.reshape(sh)),
        k2=_pad_edge(k2.reshape(sh)),
        gauss=_pad_edge((k1 * k2).reshape(sh)),
        dir1=_pad_edge(dir1.reshape(sh + (3,))),
        dir2=_pad_edge(dir2.reshape(sh + (3,))),
        normal=_pad_edge(n.reshape(sh + (3,))),
        valid=_pad_edge(valid.reshape(sh)),
    )


def _fit_circle_3d(points: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """Plane + algebraic circle fit; returns (center, plane normal, radius)."""
    c0 = points.mean(axis=0)
    centered = points - c0
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    normal = vt[2]
    ex, ey = vt[0], vt[1]
    x = centered @ ex
    y = centered @ ey
    a = np.stack([2 * x, 2 * y, np.ones_like(x)], axis=1)
    sol, *_ = np.linalg.lstsq(a, x * x + y * y, rcond=None)
    cx, cy, c = sol
    radius = math.sqrt(max(c + cx * cx + cy * cy, 0.0))
    center = c0 + cx * ex + cy * ey
    return center, normal, radius


def _torus_distance(params: np.ndarray, pts: np.ndarray) -> np.ndarray:
    r1, r2 = params[0], params[1]
    rot = Rotation.from_rotvec(params[2:5]).as_matrix()
    q = (pts - params[5:8]) @ rot
    rho = np.hypot(q[:, 0], q[:, 1])
    return np.sqrt((rho - (r1 + r2)) ** 2 + q[:, 2] ** 2) - r2


def fit_torus(mesh: SurfaceMesh) -> tuple[TorusSpec, TorusPatch, float]:
    """Fit a posed torus to a grid mesh with negative Gaussian curvature.

    Initial radii come from the curvature estimates (the near-constant
    principal field gives r2, the peak circumferential magnitude gives r1);
    the inner middle circle seeds the pose; a least-squares refinement on
    point-to-torus distance polishes everything.  Returns the RMS distance
    residual in mm.
    """
    cf = estimate_curvatures(mesh)
    k1 = cf.k1[1:-1, 1:-1]
    k2 = cf.k2[1:-1, 1:-1]
    gauss = cf.gauss[1:-1, 1:-1]

    pts_all = mesh.vertices.reshape(-1, 3)
    diam = float(np.linalg.norm(pts_all.max(axis=0) - pts_all.min(axis=0)))
    kscale = float(np.median(np.maximum(np.abs(k1), np.abs(k2))))
    if kscale * diam < 1e-6:
        raise UnsupportedTargetError(
            "unsupported target: nonnegative Gaussian curvature (flat surface)"
        )
    neg_frac = float(np.mean(gauss < 0))
    if neg_frac < 0.9 or float(np.median(gauss)) >= 0:
        raise UnsupportedTargetError(
            "unsupported target: nonnegative Gaussian curvature over the patch"
        )

    # the tubular principal curvature is constant over a torus patch
    def rel_spread(f):
        med = np.median(np.abs(f))
        return float(np.median(np.abs(np.abs(f) - med)) / max(med, 1e-300))

    interior = mesh.vertices[1:-1, 1:-1].reshape(-1, 3)
    normals = cf.normal[1:-1, 1:-1].reshape(-1, 3)

    def circle_residual(points, center, axis, radius):
        rel = points - center
        along = rel @ axis
        in_plane = np.linalg.norm(rel - along[:, None] * axis, axis=1) - radius
        return float(np.sqrt(np.mean(in_plane ** 2 + along ** 2)))

    def init_guess(k_tub, k_circ):
        # offsetting each point by r2 along the right normal sign collapses
        # the patch onto the tube-center circle, which seeds axis and Rh
        r2_init = 1.0 / float(np.median(np.abs(k_tub)))
        best_seed = None
        for sgn in (1.0, -1.0):
            cloud = interior + sgn * r2_init * normals
            center0, axis0, rad0 = _fit_circle_3d(cloud)
            resid = circle_residual(cloud, center0, axis0, rad0)
            if best_seed is None or resid < best_seed[0]:
                best_seed = (resid, center0, axis0, rad0)
        _, center0, axis0, rad0 = best_seed
        r1_init = max(rad0 - r2_init, 1.0 / float(np.max(np.abs(k_circ))) * 0.5)
        rot0 = Rotation.align_vectors([axis0], [[0.0, 0.0, 1.0]])[0]
        return np.concatenate([[r1_init, r2_init], rot0.as_rotvec(), center0])

    fit_pts = pts_all
    if fit_pts.shape[0] > 4000:
        stride = int(math.ceil(fit_pts.shape[0] / 4000))
        fit_pts = fit_pts[::stride]
    lb = np.full(8, -np.inf)
    ub = np.full(8, np.inf)
    lb[0] = lb[1] = 1e-9

    # a small near-balanced saddle patch is osculated to second order by two
    # conjugate tori (radii roles swapped); refine both hypotheses, keep best
    best = None
    for k_tub, k_circ in ((k1, k2), (k2, k1)) if rel_spread(k1) <= rel_spread(k2) \
            else ((k2, k1), (k1, k2)):
        res = least_squares(
            _torus_distance, init_guess(k_tub, k_circ), args=(fit_pts,),
            bounds=(lb, ub), xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000,
        )
        if best is None or res.cost < best.cost:
            best = res
    params = best.x
    spec = TorusSpec(r1=float(params[0]), r2=float(params[1]))
    rot = Rotation.from_rotvec(params[2:5]).as_matrix()
    center = params[5:8]

    probe = TorusPatch(spec=spec, beta_range=(0.51 * math.pi, 1.49 * math.pi),
                       psi_range=(-math.pi, math.pi), orientation=rot, center=center)
    beta, psi = torus_parameters(probe, pts_all)
    bmin, bmax = float(beta.min()), float(beta.max())
    if bmin < math.pi / 2 or bmax > 3 * math.pi / 2:
        raise UnsupportedTargetError(
            "fitted patch leaves the inner (negative-K) torus region"
        )
    psic = math.atan2(float(np.mean(np.sin(psi))), float(np.mean(np.cos(psi))))
    psi_u = psic + np.arctan2(np.sin(psi - psic), np.cos(psi - psic))
    patch = TorusPatch(
        spec=spec, beta_range=(bmin, bmax),
        psi_range=(float(psi_u.min()), float(psi_u.max())),
        orientation=rot, center=center,
    )
    rms = float(np.sqrt(np.mean(_torus_distance(params, pts_all) ** 2)))
    return spec, patch, rms


def chart_coords(spec: TorusSpec, beta, psi) -> np.ndarray:
    """Flattening chart: u = r1*psi along k1, v = -r2*(beta - pi) along k2."""
    beta = np.asarray(beta, dtype=float)
    psi = np.asarray(psi, dtype=float)
    return np.stack([spec.r1 * psi, -spec.r2 * (beta - math.pi)], axis=-1)


def flatten_patch(patch: TorusPatch, corners, sym_tol: float = 1e-6) -> FlattenedPatch:
    """Flatten four (beta, psi) corners A, B, C, D into the printing domain.

    AB is the printing x-axis chord.  Corners must satisfy the height
    symmetry z_A = -z_C and z_B = -z_D about the inner middle circle within
    sym_tol * r2.
    """
    c = np.asarray(corners, dtype=float)
    if c.shape != (4, 2):
        raise GeometryError("corners must be four (beta, psi) pairs A, B, C, D")
    spec = patch.spec
    b0, b1 = patch.beta_range
    p0, p1 = patch.psi_range
    slack = 1e-9
    if np.any(c[:, 0] < b0 - slack) or np.any(c[:, 0] > b1 + slack):
        raise GeometryError("corner beta outside the patch")
    if np.any(c[:, 1] < p0 - slack) or np.any(c[:, 1] > p1 + slack):
        raise GeometryError("corner psi outside the patch")

    z = spec.r2 * np.sin(c[:, 0])
    tol = sym_tol * spec.r2
    if abs(z[0] + z[2]) > tol or abs(z[1] + z[3]) > tol:
        raise GeometryError(
            "corner symmetry violated: need z_A = -z_C and z_B = -z_D "
            f"(got z = {z.tolist()})"
        )

    uv = chart_coords(spec, c[:, 0], c[:, 1])
    ab = uv[1] - uv[0]
    ad = uv[3] - uv[0]
    l_ab = float(np.linalg.norm(ab))
    l_ad = float(np.linalg.norm(ad))
    if l_ab <= 0 or l_ad <= 0:
        raise GeometryError("degenerate corner quadrilateral")

    phi = -math.degrees(math.atan2(ab[1], ab[0]))
    if phi <= -90.0:
        phi += 180.0
    elif phi > 90.0:
        phi -= 180.0

    ex = ab / l_ab
    ey = np.array([-ex[1], ex[0]])
    inner = np.stack([(p - uv[0]) @ np.stack([ex, ey], axis=1) for p in uv])
    outer = (
        float(uv[:, 0].max() - uv[:, 0].min()),
        float(uv[:, 1].max() - uv[:, 1].min()),
    )
    return FlattenedPatch(outer=outer, inner=inner, l_ab=l_ab, l_ad=l_ad, phi=phi)


def quadratic_preview(state, a: float, b: float, nu: int, nv: int) -> SurfaceMesh:
    """Small-deflection preview of the deployed midplane over an a x b plate."""
    if a <= 0 or b <= 0:
        raise ValidationError("plate dimensions must be positive")
    if nu < 2 or nv < 2:
        raise ValidationError("preview grid needs nu, nv >= 2")
    ex, ey, gxy = (float(s) for s in state.eps0)
    kx, ky, kxy = (float(s) for s in state.kappa)
    x = np.linspace(-a / 2.0, a / 2.0, nu)[:, None]
    y = np.linspace(-b / 2.0, b / 2.0, nv)[None, :]
    xp = (1.0 + ex) * x + 0.5 * gxy * y
    yp = 0.5 * gxy * x + (1.0 + ey) * y
    w = -0.5 * kx * x * x - 0.5 * ky * y * y - 0.5 * kxy * x * y
    return SurfaceMesh(vertices=np.stack(np.broadcast_arrays(xp, yp, w), axis=-1))


def export_obj(mesh: SurfaceMesh, path) -> None:
    """Write the grid mesh as ASCII OBJ with quad faces and grid metadata."""
    nu, nv = mesh.nu, mesh.nv
    lines = [f"# grid {nu} {nv}"]
    for p in mesh.vertices.reshape(-1, 3):
        lines.append(f"v {p[0]:.9g} {p[1]:.9g} {p[2]:.9g}")
    for i in range(nu - 1):
        for j in range(nv - 1):
            a = i * nv + j + 1
            lines.append(f"f {a} {a + nv} {a + nv + 1} {a + 1}")
    data = ("\n".join(lines) + "\n").encode("utf-8")
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def import_obj(path) -> SurfaceMesh:
    """Read a grid-structured OBJ written by export_obj (or compatible)."""
    nu = nv = None
    verts = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line.startswith("#"):
                parts = line[1:].split()
                if len(parts) == 3 and parts[0] == "grid":
                    nu, nv = int(parts[1]), int(parts[2])
            elif line.startswith("v "):
                parts = line.split()
                if len(parts) != 4:
                    raise TopologyError(f"malformed vertex line: {line!r}")
                try:
                    verts.append([float(x) for x in parts[1:]])
                except ValueError as exc:
                    raise TopologyError(f"malformed vertex line: {line!r}") from exc
    if nu is None:
        raise TopologyError("missing '# grid nu nv' metadata; not a grid mesh")
    if len(verts) != nu * nv:
        raise TopologyError(
            f"vertex count {len(verts)} does not match grid {nu}x{nv}"
        )
    return SurfaceMesh(vertices=np.array(verts).reshape(nu, nv, 3))
