"""End-to-end inverse design: target surface -> print plan.

Pipeline: extract a curvature target (principal curvatures and the
transformation angle of the torus-superimposed surface), search the
(theta1, theta2) design map for angle pairs whose free-recovery curvatures
match it, filter symmetry duplicates and infeasible dimensions, then recover
the flat plate size from the in-plane deployment map.

A surface normal can be oriented either way, so every curvature target is
matched under both global signs; the layer order of the bilayer realizes
whichever sign wins.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import least_squares

from . import designmap, torusgeom
from .errors import (
    GeometryError,
    InfeasibleTargetError,
    OverConstrainedError,
    SingularMapError,
    UnsupportedTargetError,
    ValidationError,
)
from .laminate import MidplaneState, bilayer, free_recovery_state
from .material import MaterialCard, recovery_strains, reduced_stiffness
from .designmap import PrincipalCurvature, curvatures_from_principal, principal_curvatures
from .torusgeom import FlattenedPatch, SurfaceMesh, TorusPatch, TorusSpec

DEFAULT_THRESHOLD_FRAC = 0.05
ANGLE_TOL_DEG = 0.5
REFINE_TOL_DEG = 1e-3


@dataclass(frozen=True)
class TargetSurface:
    """A negative-K design target: analytic torus patch or grid mesh.

    corners: for analytic targets, four (beta, psi) pairs A, B, C, D in
    radians; for mesh targets, four (i, j) grid indices.  A->B is the
    printing x-axis chord in both cases.
    """

    patch: TorusPatch | None = None
    corners: np.ndarray | None = None
    mesh: SurfaceMesh | None = None
    corner_indices: tuple[tuple[int, int], ...] | None = None

    def __post_init__(self):
        analytic = self.patch is not None and self.corners is not None
        meshy = self.mesh is not None
        if analytic == meshy:
            raise ValidationError(
                "target must be either analytic (patch + corners) or a mesh"
            )
        if meshy and self.corner_indices is None:
            nu, nv = self.mesh.nu, self.mesh.nv
            object.__setattr__(
                self, "corner_indices",
                ((0, 0), (nu - 1, 0), (nu - 1, nv - 1), (0, nv - 1)),
            )

    @property
    def is_analytic(self) -> bool:
        return self.patch is not None and self.mesh is None


@dataclass(frozen=True)
class CurvatureTarget:
    """Structural-frame curvature target and its principal-frame source."""

    kx: float
    ky: float
    kxy: float
    pc: PrincipalCurvature

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.kx, self.ky, self.kxy])


@dataclass(frozen=True)
class TargetAnalysis:
    """Everything the pipeline extracts from a target surface."""

    target: CurvatureTarget
    flattened: FlattenedPatch
    patch: TorusPatch
    corners: np.ndarray  # (4, 2) beta/psi radians
    fit_rms: float


@dataclass(frozen=True)
class Candidate:
    """One (theta1, theta2) match of the curvature target."""

    theta1: float
    theta2: float
    residual: float
    state: MidplaneState
    sign: int = 1
    flat_direction: bool = False
    a_mm: float | None = None
    b_mm: float | None = None


@dataclass(frozen=True)
class FilterCriteria:
    l_ab: float
    l_ad: float
    max_a: float | None = None
    max_b: float | None = None
    layers_swappable: bool = False


@dataclass(frozen=True)
class PlanResiduals:
    kappa_per_mm: float
    dims_mm: float


@dataclass(frozen=True)
class PrintPlan:
    """Complete inverse-design output for a single-patch bilayer plate."""

    a: float
    b: float
    theta1: float
    theta2: float
    t1: float
    t2: float
    t_a: float
    t_act: float
    material: str
    residuals: PlanResiduals
    process: dict
    state: MidplaneState
    kappa_sign: int
    patch: TorusPatch
    corners: np.ndarray          # (4, 2) beta/psi radians
    phi: float
    l_ab: float
    l_ad: float

    def to_dict(self) -> dict:
        return {
            "a_mm": self.a,
            "b_mm": self.b,
            "theta1_deg": self.theta1,
            "theta2_deg": self.theta2,
            "t1_mm": self.t1,
            "t2_mm": self.t2,
            "ta_c": self.t_a,
            "t_act_s": self.t_act,
            "material": self.material,
            "residuals": {
                "kappa_per_mm": self.residuals.kappa_per_mm,
                "dims_mm": self.residuals.dims_mm,
            },
            "process": self.process,
            "state": self.state.to_dict(),
            "kappa_sign": self.kappa_sign,
            "target": {
                "r1_mm": self.patch.spec.r1,
                "r2_mm": self.patch.spec.r2,
                "orientation": self.patch.orientation.tolist(),
                "center_mm": self.patch.center.tolist(),
                "beta_range_rad": list(self.patch.beta_range),
                "psi_range_rad": list(self.patch.psi_range),
                "corners_beta_psi_rad": self.corners.tolist(),
                "phi_deg": self.phi,
                "l_ab_mm": self.l_ab,
                "l_ad_mm": self.l_ad,
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PrintPlan":
        tg = d["target"]
        patch = TorusPatch(
            spec=TorusSpec(r1=float(tg["r1_mm"]), r2=float(tg["r2_mm"])),
            beta_range=tuple(tg["beta_range_rad"]),
            psi_range=tuple(tg["psi_range_rad"]),
            orientation=np.array(tg["orientation"], dtype=float),
            center=np.array(tg["center_mm"], dtype=float),
        )
        return cls(
            a=float(d["a_mm"]), b=float(d["b_mm"]),
            theta1=float(d["theta1_deg"]), theta2=float(d["theta2_deg"]),
            t1=float(d["t1_mm"]), t2=float(d["t2_mm"]),
            t_a=float(d["ta_c"]), t_act=float(d["t_act_s"]),
            material=str(d["material"]),
            residuals=PlanResiduals(
                kappa_per_mm=float(d["residuals"]["kappa_per_mm"]),
                dims_mm=float(d["residuals"]["dims_mm"]),
            ),
            process=dict(d["process"]),
            state=MidplaneState.from_dict(d["state"]),
            kappa_sign=int(d["kappa_sign"]),
            patch=patch,
            corners=np.array(tg["corners_beta_psi_rad"], dtype=float),
            phi=float(tg["phi_deg"]),
            l_ab=float(tg["l_ab_mm"]),
            l_ad=float(tg["l_ad_mm"]),
        )


def save_plan(plan: PrintPlan, path) -> None:
    data = (json.dumps(plan.to_dict(), indent=2) + "\n").encode("utf-8")
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def load_plan(path) -> PrintPlan:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"malformed plan file {path}: {exc}") from exc
    try:
        return PrintPlan.from_dict(doc)
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"plan file {path} misses field {exc}") from exc


def analyze_target(target: TargetSurface) -> TargetAnalysis:
    """Fit/flatten the target and derive its structural curvature target."""
    if target.is_analytic:
        patch = target.patch
        corners = np.asarray(target.corners, dtype=float)
        fit_rms = 0.0
    else:
        _, patch, fit_rms = torusgeom.fit_torus(target.mesh)
        pts = np.array([target.mesh.vertices[i, j] for i, j in target.corner_indices])
        beta, psi = torusgeom.torus_parameters(patch, pts)
        # keep psi on the unwrapped branch of the fitted patch
        psic = 0.5 * (patch.psi_range[0] + patch.psi_range[1])
        psi = psic + np.arctan2(np.sin(psi - psic), np.cos(psi - psic))
        corners = np.stack([beta, psi], axis=1)
    flattened = torusgeom.flatten_patch(patch, corners)
    spec = patch.spec
    pc = PrincipalCurvature(k1=-1.0 / spec.r1, k2=1.0 / spec.r2, phi=flattened.phi)
    kx, ky, kxy = curvatures_from_principal(pc)
    return TargetAnalysis(
        target=CurvatureTarget(kx=kx, ky=ky, kxy=kxy, pc=pc),
        flattened=flattened,
        patch=patch,
        corners=corners,
        fit_rms=fit_rms,
    )


def curvature_target(target: TargetSurface) -> CurvatureTarget:
    """Structural-frame curvature target of a surface (Mohr transform)."""
    return analyze_target(target).target


def analytic_target_from_state(state: MidplaneState, l_ab: float, l_ad: float) -> TargetSurface:
    """Build the analytic torus-patch target realizing a forward-solved state.

    The state's negative principal curvature maps to the circumferential
    torus direction (r1) and the positive one to the tubular direction (r2);
    the corner quadrilateral is centered on the inner middle circle.
    """
    kx, ky, kxy = (float(v) for v in state.kappa)
    pc = principal_curvatures(kx, ky, kxy)
    if not pc.k2 < 0 < pc.k1:
        raise UnsupportedTargetError(
            "state curvatures have nonnegative Gaussian curvature; no torus target"
        )
    r1 = -1.0 / pc.k2
    r2 = 1.0 / pc.k1
    phi_t = pc.phi + 90.0
    if phi_t > 90.0:
        phi_t -= 180.0
    omega = math.radians(-phi_t)
    ab = l_ab * np.array([math.cos(omega), math.sin(omega)])
    ad = l_ad * np.array([-math.sin(omega), math.cos(omega)])
    a0 = -(ab + ad) / 2.0
    uv = np.stack([a0, a0 + ab, a0 + ab + ad, a0 + ad])
    psi = uv[:, 0] / r1
    beta = math.pi - uv[:, 1] / r2
    if beta.min() <= math.pi / 2 or beta.max() >= 3 * math.pi / 2:
        raise GeometryError(
            "target extent too large for the inner torus region; shrink l_ab/l_ad"
        )
    margin = 1e-9
    patch = TorusPatch(
        spec=TorusSpec(r1=r1, r2=r2),
        beta_range=(float(beta.min()) - margin, float(beta.max()) + margin),
        psi_range=(float(psi.min()) - margin, float(psi.max()) + margin),
    )
    return TargetSurface(patch=patch, corners=np.stack([beta, psi], axis=1))


def sample_target_quad(patch: TorusPatch, corners: np.ndarray,
                       nu: int, nv: int) -> SurfaceMesh:
    """Sample the corner quadrilateral of a patch as a structured mesh.

    Axis 0 runs A->B (the printing x chord), matching the default corner
    indices of mesh targets.
    """
    corners = np.asarray(corners, dtype=float)
    uv = torusgeom.chart_coords(patch.spec, corners[:, 0], corners[:, 1])
    s = np.linspace(0.0, 1.0, nu)[:, None, None]
    t = np.linspace(0.0, 1.0, nv)[None, :, None]
    pts = (uv[0] * (1 - s) * (1 - t) + uv[1] * s * (1 - t)
           + uv[2] * s * t + uv[3] * (1 - s) * t)
    psi = pts[..., 0] / patch.spec.r1
    beta = math.pi - pts[..., 1] / patch.spec.r2
    xyz = torusgeom.torus_point(patch.spec, beta, psi)
    world = xyz @ patch.orientation.T + patch.center
    return SurfaceMesh(vertices=world)


class _ForwardEvaluator:
    """Fast scalar forward model kappa(theta1, theta2) for the refiner."""

    def __init__(self, material: MaterialCard, t1: float, t2: float, t_a: float):
        from .laminate import transform_recovery, transform_stiffness

        self._q = reduced_stiffness(material.elastic)
        self._eps1, self._eps2, _ = recovery_strains(material, t_a)
        h = t1 + t2
        z0, z1, z2 = -h / 2.0, -h / 2.0 + t1, h / 2.0
        self._w = (
            (z1 - z0, (z1 * z1 - z0 * z0) / 2.0, (z1 ** 3 - z0 ** 3) / 3.0),
            (z2 - z1, (z2 * z2 - z1 * z1) / 2.0, (z2 ** 3 - z1 ** 3) / 3.0),
        )
        self._tq = transform_stiffness
        self._tr = transform_recovery

    def state(self, theta1: float, theta2: float) -> MidplaneState:
        k = np.zeros((6, 6))
        rhs = np.zeros(6)
        for (wa, wb, wd), th in zip(self._w, (theta1, theta2)):
            qb = self._tq(self._q, th)
            al = self._tr(self._eps1, self._eps2, th)
            qa = qb @ al
            k[:3, :3] += wa * qb
            k[:3, 3:] += wb * qb
            k[3:, 3:] += wd * qb
            rhs[:3] += wa * qa
            rhs[3:] += wb * qa
        k[3:, :3] = k[:3, 3:]
        x = np.linalg.solve(k, rhs)
        x = x + np.linalg.solve(k, rhs - k @ x)
        return MidplaneState(eps0=x[:3], kappa=x[3:])


def _golden_min(f, lo: float, hi: float, tol: float) -> float:
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def search_candidates(target: CurvatureTarget, material: MaterialCard,
                      t1: float, t2: float, t_a: float, step: float = 1.0,
                      threshold_frac: float = DEFAULT_THRESHOLD_FRAC) -> list[Candidate]:
    """All refined (theta1, theta2) minima matching the curvature target.

    The design map is scanned under both global curvature signs (surface
    normal ambiguity); grid minima below the candidacy threshold are refined
    by coordinate-wise golden-section descent on the continuous forward
    model, terminating at 1e-3 degrees.
    """
    kt = target.vector
    kt_norm = float(np.linalg.norm(kt))
    threshold = max(threshold_frac * kt_norm, 1e-12)

    grid = designmap.sweep_map(material, t1, t2, t_a, step)
    r_plus = np.linalg.norm(grid.kappa - kt, axis=-1)
    r_minus = np.linalg.norm(grid.kappa + kt, axis=-1)
    r = np.minimum(r_plus, r_minus)

    padded = np.pad(r, 1, mode="constant", constant_values=np.inf)
    is_min = np.ones_like(r, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            is_min &= r <= padded[1 + di:1 + di + r.shape[0], 1 + dj:1 + dj + r.shape[1]]
    # seed generously: near small targets the residual gradient can exceed
    # the threshold between grid nodes; the threshold gates refined residuals
    seeds = np.argwhere(is_min & (r <= 20.0 * threshold))
    if seeds.size == 0:
        raise InfeasibleTargetError(
            f"no angle pair reaches the target curvatures "
            f"(best residual {float(r.min()):.6g} 1/mm, threshold {threshold:.6g})",
            best_residual=float(r.min()),
        )
    if seeds.shape[0] > 16:
        order = np.argsort(r[seeds[:, 0], seeds[:, 1]], kind="stable")
        seeds = seeds[order[:16]]

    fwd = _ForwardEvaluator(material, t1, t2, t_a)

    def objective(th1: float, th2: float) -> float:
        kp = fwd.state(th1, th2).kappa
        return min(float(np.linalg.norm(kp - kt)), float(np.linalg.norm(kp + kt)))

    refined = []
    axis = grid.theta_axis
    for i, j in seeds:
        th1, th2 = float(axis[i]), float(axis[j])
        w = max(step, 1.0)
        for _ in range(100):
            # the forward model is 180-periodic in each angle, so the
            # descent window may cross +-90; results are wrapped below
            new1 = _golden_min(lambda t: objective(t, th2),
                               th1 - w, th1 + w, REFINE_TOL_DEG)
            new2 = _golden_min(lambda t: objective(new1, t),
                               th2 - w, th2 + w, REFINE_TOL_DEG)
            delta = max(abs(new1 - th1), abs(new2 - th2))
            th1, th2 = new1, new2
            if delta < REFINE_TOL_DEG:
                break
            w = max(2.0 * delta, 10.0 * REFINE_TOL_DEG)
        # Gauss-Newton polish: drives exact roots to machine precision so
        # ranking can separate them from merely-close angle pairs
        state = fwd.state(th1, th2)
        sign = 1 if (float(np.linalg.norm(state.kappa - kt))
                     <= float(np.linalg.norm(state.kappa + kt))) else -1
        sol = least_squares(
            lambda th: fwd.state(th[0], th[1]).kappa - sign * kt,
            np.array([th1, th2]),
            xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=100,
        )
        # wrap back into [-90, 90]; round() keeps the +-90 endpoints put
        th1 = float(sol.x[0]) - 180.0 * round(float(sol.x[0]) / 180.0)
        th2 = float(sol.x[1]) - 180.0 * round(float(sol.x[1]) / 180.0)
        state = fwd.state(th1, th2)
        resid_plus = float(np.linalg.norm(state.kappa - kt))
        resid_minus = float(np.linalg.norm(state.kappa + kt))
        sign = 1 if resid_plus <= resid_minus else -1
        resid = min(resid_plus, resid_minus)
        if resid > threshold:
            continue

        # flag directions along which the residual landscape is flat
        flat = False
        probe = max(0.25, 5.0 * REFINE_TOL_DEG)
        flat_tol = max(1e-9, 1e-6 * kt_norm)
        for d1, d2 in ((probe, 0.0), (0.0, probe)):
            lo = objective(max(th1 - d1, -90.0), max(th2 - d2, -90.0))
            hi = objective(min(th1 + d1, 90.0), min(th2 + d2, 90.0))
            if max(lo, hi) - resid < flat_tol:
                flat = True
        refined.append(Candidate(theta1=th1, theta2=th2, residual=resid,
                                 state=state, sign=sign, flat_direction=flat))

    if not refined:
        raise InfeasibleTargetError(
            f"no angle pair reaches the target curvatures after refinement "
            f"(threshold {threshold:.6g} 1/mm)",
            best_residual=float(r.min()),
        )

    # merge refinements that converged to the same point
    refined.sort(key=lambda c: (c.residual, c.theta1, c.theta2))
    kept: list[Candidate] = []
    for cand in refined:
        if all(max(abs(cand.theta1 - k.theta1), abs(cand.theta2 - k.theta2)) > 0.05
               for k in kept):
            kept.append(cand)
    return kept


def _angle_dist(a: float, b: float) -> float:
    """Distance between printing directions, 180-degree periodic."""
    d = abs(a - b) % 180.0
    return min(d, 180.0 - d)


def symmetry_images(pair: tuple[float, float], swappable: bool) -> list[tuple[float, float]]:
    """Angle pairs realizing the same curvature magnitude (up to sign).

    Mirroring both angles always holds.  With equal layer thicknesses the
    map is traceless, so swapping layers and rotating both angles by 90
    degrees are exact sign symmetries too; their compositions give an
    8-element group (angles compare modulo 180).
    """
    base = [pair]
    if swappable:
        base = [pair, (pair[1], pair[0]),
                (pair[0] + 90.0, pair[1] + 90.0),
                (pair[1] + 90.0, pair[0] - 90.0)]
    out = []
    for p in base:
        out.append(p)
        out.append((-p[0], -p[1]))
    return out


def _pair_equivalent(c1: tuple[float, float], c2: tuple[float, float],
                     swappable: bool, tol: float) -> bool:
    return any(
        _angle_dist(c1[0], im[0]) <= tol and _angle_dist(c1[1], im[1]) <= tol
        for im in symmetry_images(c2, swappable)
    )


def initial_dimensions(state: MidplaneState, flattened: FlattenedPatch) -> tuple[float, float]:
    """Flat plate dimensions (a, b) whose deployed edges match the target.

    Deployment acts as the affine map F = [[1+ex, g/2], [g/2, 1+ey]] on the
    flat rectangle; a and b scale the columns of F to the flattened lengths.
    """
    f = deployment_gradient(state)
    if abs(float(np.linalg.det(f))) < 1e-12 or f[0, 0] <= 0 or f[1, 1] <= 0:
        raise SingularMapError("degenerate deployment gradient; cannot invert")
    a = flattened.l_ab / float(np.linalg.norm(f[:, 0]))
    b = flattened.l_ad / float(np.linalg.norm(f[:, 1]))
    return a, b


def deployment_gradient(state: MidplaneState) -> np.ndarray:
    ex, ey, gxy = (float(v) for v in state.eps0)
    return np.array([[1.0 + ex, 0.5 * gxy], [0.5 * gxy, 1.0 + ey]])


def filter_candidates(candidates: list[Candidate], criteria: FilterCriteria) -> list[Candidate]:
    """Deduplicate symmetry-equivalent pairs, drop infeasible dimensions, rank.

    Ranking is by curvature residual with smaller |gamma_xy| as tiebreak.
    """
    if not candidates:
        raise OverConstrainedError("no candidates to filter")

    groups: list[list[Candidate]] = []
    for cand in candidates:
        for grp in groups:
            if _pair_equivalent((cand.theta1, cand.theta2),
                                (grp[0].theta1, grp[0].theta2),
                                criteria.layers_swappable, ANGLE_TOL_DEG):
                grp.append(cand)
                break
        else:
            groups.append([cand])

    reasons = []
    survivors = []
    for grp in groups:
        rep = min(grp, key=lambda c: (not c.theta1 >= c.theta2, -c.theta1, -c.theta2))
        try:
            a, b = initial_dimensions(rep.state, _LengthsOnly(criteria.l_ab, criteria.l_ad))
        except SingularMapError as exc:
            reasons.append(f"({rep.theta1:.3f}, {rep.theta2:.3f}): {exc}")
            continue
        if criteria.max_a is not None and a > criteria.max_a:
            reasons.append(
                f"({rep.theta1:.3f}, {rep.theta2:.3f}): a = {a:.3f} mm exceeds "
                f"max {criteria.max_a} mm"
            )
            continue
        if criteria.max_b is not None and b > criteria.max_b:
            reasons.append(
                f"({rep.theta1:.3f}, {rep.theta2:.3f}): b = {b:.3f} mm exceeds "
                f"max {criteria.max_b} mm"
            )
            continue
        survivors.append(replace(rep, a_mm=a, b_mm=b))

    if not survivors:
        raise OverConstrainedError(
            "all candidates rejected by filtering criteria", reasons=reasons
        )
    # residuals at numerical noise are ties; equal-thickness stacks then have
    # an exact "+90 degrees to both angles, negated curvature" twin, so the
    # un-negated realization is preferred before the shear tiebreak
    survivors.sort(key=lambda c: (max(c.residual, 1e-9), c.sign < 0,
                                  abs(float(c.state.eps0[2])),
                                  -c.theta1, -c.theta2))
    return survivors


class _LengthsOnly:
    """Minimal flattened-lengths carrier for initial_dimensions."""

    def __init__(self, l_ab: float, l_ad: float):
        self.l_ab = l_ab
        self.l_ad = l_ad


@dataclass(frozen=True)
class PlanOptions:
    step: float = 1.0
    threshold_frac: float = DEFAULT_THRESHOLD_FRAC
    max_a: float | None = None
    max_b: float | None = None
    sweep_ratio: tuple[float, ...] = ()
    sweep_ta: tuple[float, ...] = ()


def plan_pipeline(target: TargetSurface, material: MaterialCard,
                  thickness_ratio: float, total_thickness: float, t_a: float,
                  options: PlanOptions | None = None) -> PrintPlan:
    """Full inverse design from target surface to print plan; deterministic."""
    plan, _ = plan_with_candidates(target, material, thickness_ratio,
                                   total_thickness, t_a, options)
    return plan


def plan_with_candidates(target: TargetSurface, material: MaterialCard,
                         thickness_ratio: float, total_thickness: float,
                         t_a: float, options: PlanOptions | None = None,
                         ) -> tuple[PrintPlan, list[Candidate]]:
    """plan_pipeline variant that also returns the winning candidate ranking."""
    options = options or PlanOptions()
    if thickness_ratio <= 0 or total_thickness <= 0:
        raise ValidationError("thickness ratio and total thickness must be positive")
    analysis = analyze_target(target)

    ratios = options.sweep_ratio or (thickness_ratio,)
    tas = options.sweep_ta or (t_a,)
    best = None
    last_err = None
    for ratio in ratios:
        for ta in tas:
            try:
                plan, ranked = _plan_single(analysis, material, ratio,
                                            total_thickness, ta, options)
            except (InfeasibleTargetError, OverConstrainedError) as exc:
                last_err = exc
                continue
            key = (plan.residuals.kappa_per_mm, plan.t_a, ratio)
            if best is None or key < best[0]:
                best = (key, plan, ranked)
    if best is None:
        raise last_err if last_err is not None else InfeasibleTargetError(
            "no feasible plan found"
        )
    return best[1], best[2]


def _plan_single(analysis: TargetAnalysis, material: MaterialCard,
                 ratio: float, total_thickness: float, t_a: float,
                 options: PlanOptions) -> tuple[PrintPlan, list[Candidate]]:
    t2 = total_thickness / (1.0 + ratio)
    t1 = total_thickness - t2
    cands = search_candidates(analysis.target, material, t1, t2, t_a,
                              step=options.step,
                              threshold_frac=options.threshold_frac)
    ranked = filter_candidates(cands, FilterCriteria(
        l_ab=analysis.flattened.l_ab, l_ad=analysis.flattened.l_ad,
        max_a=options.max_a, max_b=options.max_b,
        layers_swappable=abs(t1 - t2) < 1e-12,
    ))
    top = ranked[0]
    f = deployment_gradient(top.state)
    dims_resid = max(
        abs(top.a_mm * float(np.linalg.norm(f[:, 0])) - analysis.flattened.l_ab),
        abs(top.b_mm * float(np.linalg.norm(f[:, 1])) - analysis.flattened.l_ad),
    )
    _, _, t_act = recovery_strains(material, t_a)
    plan = PrintPlan(
        a=top.a_mm, b=top.b_mm,
        theta1=top.theta1, theta2=top.theta2,
        t1=t1, t2=t2, t_a=t_a, t_act=t_act,
        material=material.name,
        residuals=PlanResiduals(kappa_per_mm=top.residual, dims_mm=dims_resid),
        process=material.process.to_dict(),
        state=top.state,
        kappa_sign=top.sign,
        patch=analysis.patch,
        corners=analysis.corners,
        phi=analysis.flattened.phi,
        l_ab=analysis.flattened.l_ab,
        l_ad=analysis.flattened.l_ad,
    )
    return plan, ranked


@dataclass(frozen=True)
class VerificationReport:
    """Round-trip check of a plan against its target."""

    kappa_residual: float
    dims_residual: float
    mode: str
    kappa_tolerance: float
    dims_tolerance: float
    passed: bool
    preview: SurfaceMesh | None = None

    def to_dict(self) -> dict:
        return {
            "residuals": {
                "kappa_per_mm": self.kappa_residual,
                "dims_mm": self.dims_residual,
            },
            "tolerances": {
                "kappa_per_mm": self.kappa_tolerance,
                "dims_mm": self.dims_tolerance,
            },
            "mode": self.mode,
            "passed": self.passed,
        }


def verify_plan(plan: PrintPlan, target: TargetSurface, material: MaterialCard,
                kappa_tolerance: float | None = None,
                dims_tolerance: float | None = None,
                preview_resolution: int = 21) -> VerificationReport:
    """Forward-solve the plan and report residuals against the target."""
    analysis = analyze_target(target)
    layup = bilayer(material, plan.theta1, plan.theta2, plan.t1, plan.t2)
    state = free_recovery_state(layup, plan.t_a)
    kt = analysis.target.vector
    kres = min(float(np.linalg.norm(state.kappa - kt)),
               float(np.linalg.norm(state.kappa + kt)))
    f = deployment_gradient(state)
    dres = max(
        abs(plan.a * float(np.linalg.norm(f[:, 0])) - analysis.flattened.l_ab),
        abs(plan.b * float(np.linalg.norm(f[:, 1])) - analysis.flattened.l_ad),
    )
    kmax = float(np.max(np.abs(state.kappa)))
    mode = designmap.classify_mode(state, max(1e-6, 1e-3 * kmax), 1e-6)
    ktol = kappa_tolerance if kappa_tolerance is not None else max(
        1e-6, DEFAULT_THRESHOLD_FRAC * float(np.linalg.norm(kt))
    )
    dtol = dims_tolerance if dims_tolerance is not None else max(
        1e-6, 1e-6 * max(analysis.flattened.l_ab, analysis.flattened.l_ad)
    )
    preview = sample_target_quad(analysis.patch, analysis.corners,
                                 preview_resolution, preview_resolution)
    return VerificationReport(
        kappa_residual=kres,
        dims_residual=dres,
        mode=mode.value,
        kappa_tolerance=ktol,
        dims_tolerance=dtol,
        passed=kres <= ktol and dres <= dtol,
        preview=preview,
    )


def load_target(path, corner_indices=None) -> TargetSurface:
    """Load a target from an analytic-patch JSON or a grid OBJ mesh."""
    path = os.fspath(path)
    if path.endswith(".json"):
        with open(path, "r", encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"malformed target file {path}: {exc}") from exc
        if doc.get("type") != "torus_patch":
            raise ValidationError("analytic target JSON must have type 'torus_patch'")
        try:
            spec = TorusSpec(r1=float(doc["r1_mm"]), r2=float(doc["r2_mm"]))
            corners = np.array(
                [doc["corners"][k] for k in ("A", "B", "C", "D")], dtype=float
            )
        except KeyError as exc:
            raise ValidationError(f"target file misses field {exc}") from exc
        corners = np.deg2rad(corners)
        margin = 1e-9
        patch = TorusPatch(
            spec=spec,
            beta_range=(float(corners[:, 0].min()) - margin,
                        float(corners[:, 0].max()) + margin),
            psi_range=(float(corners[:, 1].min()) - margin,
                       float(corners[:, 1].max()) + margin),
        )
        return TargetSurface(patch=patch, corners=corners)
    if path.endswith(".obj"):
        mesh = torusgeom.import_obj(path)
        return TargetSurface(mesh=mesh, corner_indices=corner_indices)
    raise ValidationError(f"unsupported target format: {path} (expect .json or .obj)")
