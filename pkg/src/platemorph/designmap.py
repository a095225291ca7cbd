"""Design-space sweep over printing angles, mode maps, and exports.

For a bilayer with fixed thicknesses and activation temperature, every
(theta1, theta2) pair yields a deployed midplane state; the map derives
principal and Gaussian curvature per cell and classifies the cell into one
of the four transformation modes (in-plane axial/shear, bending, twisting).
"""

from __future__ import annotations

import enum
import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .laminate import transform_recovery, transform_stiffness
from .material import MaterialCard, recovery_strains, reduced_stiffness

MAP_FIELDS = ("eps_x", "eps_y", "gamma_xy", "kappa_x", "kappa_y", "kappa_xy", "K", "mode")

CSV_HEADER = (
    "theta1_deg,theta2_deg,eps_x,eps_y,gamma_xy,"
    "kappa_x,kappa_y,kappa_xy,k1,k2,phi_deg,K,mode"
)


@dataclass(frozen=True)
class PrincipalCurvature:
    """Principal curvatures (1/mm) and principal angle (deg in (-90, 90])."""

    k1: float
    k2: float
    phi: float


class ModeLabel(str, enum.Enum):
    IN_PLANE_AXIAL = "InPlaneAxial"
    IN_PLANE_SHEAR = "InPlaneShear"
    BENDING = "Bending"
    TWISTING = "Twisting"


def principal_curvatures(kx: float, ky: float, kxy: float) -> PrincipalCurvature:
    """Mohr's circle of curvature: (kx, ky, kxy) -> (k1 >= k2, phi).

    The engineering twist kxy is twice the tensor component, hence kxy/2 in
    the radius.  At an umbilic point (kx == ky, kxy == 0) phi is 0 by
    convention.
    """
    mean = 0.5 * (kx + ky)
    radius = math.hypot(0.5 * (kx - ky), 0.5 * kxy)
    phi = 0.5 * math.degrees(math.atan2(kxy, kx - ky))
    if phi <= -90.0:
        phi += 180.0
    return PrincipalCurvature(k1=mean + radius, k2=mean - radius, phi=phi)


def curvatures_from_principal(pc: PrincipalCurvature) -> tuple[float, float, float]:
    """Inverse Mohr transform: (k1, k2, phi) -> (kx, ky, kxy)."""
    th = math.radians(pc.phi)
    c, s = math.cos(th), math.sin(th)
    kx = pc.k1 * c * c + pc.k2 * s * s
    ky = pc.k1 * s * s + pc.k2 * c * c
    kxy = 2.0 * (pc.k1 - pc.k2) * s * c
    return kx, ky, kxy


def gaussian_curvature(pc: PrincipalCurvature) -> float:
    """Gaussian curvature K = k1 * k2 (1/mm^2)."""
    return pc.k1 * pc.k2


def classify_mode(state, tol_kappa: float, tol_gamma: float) -> ModeLabel:
    """Label a midplane state; the curvature test takes precedence."""
    if tol_kappa <= 0 or tol_gamma <= 0:
        raise ValidationError("classification tolerances must be positive")
    kx, ky, kxy = state.kappa
    if max(abs(kx), abs(ky), abs(kxy)) <= tol_kappa:
        if abs(state.eps0[2]) > tol_gamma:
            return ModeLabel.IN_PLANE_SHEAR
        return ModeLabel.IN_PLANE_AXIAL
    if abs(kxy) <= tol_kappa:
        return ModeLabel.BENDING
    return ModeLabel.TWISTING


@dataclass(frozen=True)
class DesignMapGrid:
    """Complete (theta1, theta2) sweep result on a uniform symmetric axis."""

    theta_axis: np.ndarray          # (n,) degrees
    t1: float
    t2: float
    t_a: float
    material: str
    eps0: np.ndarray                # (n, n, 3), index [i1, i2]
    kappa: np.ndarray               # (n, n, 3)
    k1: np.ndarray                  # (n, n)
    k2: np.ndarray
    phi: np.ndarray
    gauss: np.ndarray
    mode: np.ndarray                # (n, n) of str
    tol_kappa: float
    tol_gamma: float

    @property
    def n(self) -> int:
        return len(self.theta_axis)


def _axis_from_step(step: float) -> np.ndarray:
    if step <= 0:
        raise ValidationError("step must be positive")
    ratio = 180.0 / step
    if abs(ratio - round(ratio)) > 1e-9:
        raise ValidationError(f"step = {step} deg does not divide 180 exactly")
    n = int(round(ratio)) + 1
    return np.linspace(-90.0, 90.0, n)


def solve_states_batch(material: MaterialCard, theta1, theta2,
                       t1: float, t2: float, t_a: float):
    """Vectorized free-recovery solve for arrays of bilayer angle pairs.

    theta1/theta2 are broadcast-compatible arrays in degrees.  Returns
    (eps0, kappa) with shape broadcast(theta1, theta2) + (3,).  One step of
    iterative refinement matches the scalar solver to machine precision.
    """
    th1 = np.asarray(theta1, dtype=float)
    th2 = np.asarray(theta2, dtype=float)
    shape = np.broadcast_shapes(th1.shape, th2.shape)
    q = reduced_stiffness(material.elastic)
    eps1, eps2, _ = recovery_strains(material, t_a)

    def qbar_of(th_flat):
        return np.stack([transform_stiffness(q, t) for t in th_flat])

    def alpha_of(th_flat):
        return np.stack([transform_recovery(eps1, eps2, t) for t in th_flat])

    # evaluate per unique angle, then gather: sweeps share one small axis
    uniq, inv = np.unique(np.concatenate([np.broadcast_to(th1, shape).ravel(),
                                          np.broadcast_to(th2, shape).ravel()]),
                          return_inverse=True)
    qb_u = qbar_of(uniq)
    al_u = alpha_of(uniq)
    m = int(np.prod(shape)) if shape else 1
    i1, i2 = inv[:m], inv[m:]
    qb1, qb2 = qb_u[i1], qb_u[i2]
    al1, al2 = al_u[i1], al_u[i2]

    h = t1 + t2
    z0, z1, z2 = -h / 2.0, -h / 2.0 + t1, h / 2.0
    wa1, wa2 = z1 - z0, z2 - z1
    wb1, wb2 = (z1 * z1 - z0 * z0) / 2.0, (z2 * z2 - z1 * z1) / 2.0
    wd1, wd2 = (z1 ** 3 - z0 ** 3) / 3.0, (z2 ** 3 - z1 ** 3) / 3.0

    a = wa1 * qb1 + wa2 * qb2
    b = wb1 * qb1 + wb2 * qb2
    d = wd1 * qb1 + wd2 * qb2
    qa1 = np.einsum("nij,nj->ni", qb1, al1)
    qa2 = np.einsum("nij,nj->ni", qb2, al2)
    n_t = wa1 * qa1 + wa2 * qa2
    m_t = wb1 * qa1 + wb2 * qa2

    k = np.empty((m, 6, 6))
    k[:, :3, :3] = a
    k[:, :3, 3:] = b
    k[:, 3:, :3] = b
    k[:, 3:, 3:] = d
    rhs = np.concatenate([n_t, m_t], axis=1)
    x = np.linalg.solve(k, rhs[..., None])[..., 0]
    resid = rhs - np.einsum("nij,nj->ni", k, x)
    x = x + np.linalg.solve(k, resid[..., None])[..., 0]
    eps0 = x[:, :3].reshape(shape + (3,))
    kappa = x[:, 3:].reshape(shape + (3,))
    return eps0, kappa


def sweep_map(material: MaterialCard, t1: float, t2: float, t_a: float,
              step: float = 1.0) -> DesignMapGrid:
    """Evaluate the full (theta1, theta2) design map (Fig.-3-style sweep)."""
    axis = _axis_from_step(step)
    th1 = axis[:, None]
    th2 = axis[None, :]
    eps0, kappa = solve_states_batch(material, th1, th2, t1, t2, t_a)

    kx, ky, kxy = kappa[..., 0], kappa[..., 1], kappa[..., 2]
    mean = 0.5 * (kx + ky)
    radius = np.hypot(0.5 * (kx - ky), 0.5 * kxy)
    k1 = mean + radius
    k2 = mean - radius
    phi = 0.5 * np.degrees(np.arctan2(kxy, kx - ky))
    phi = np.where(phi <= -90.0, phi + 180.0, phi)
    gauss = k1 * k2

    kmax = float(np.max(np.abs(kappa)))
    tol_kappa = max(1e-6, 1e-3 * kmax)
    tol_gamma = 1e-6
    flat = np.max(np.abs(kappa), axis=-1) <= tol_kappa
    shear = np.abs(eps0[..., 2]) > tol_gamma
    bend = np.abs(kxy) <= tol_kappa
    mode = np.where(
        flat,
        np.where(shear, ModeLabel.IN_PLANE_SHEAR.value, ModeLabel.IN_PLANE_AXIAL.value),
        np.where(bend, ModeLabel.BENDING.value, ModeLabel.TWISTING.value),
    )
    return DesignMapGrid(
        theta_axis=axis, t1=t1, t2=t2, t_a=t_a, material=material.name,
        eps0=eps0, kappa=kappa, k1=k1, k2=k2, phi=phi, gauss=gauss,
        mode=mode, tol_kappa=tol_kappa, tol_gamma=tol_gamma,
    )


def _fmt(v: float) -> str:
    return repr(float(v))


def export_map_csv(grid: DesignMapGrid, path) -> None:
    """Write the map as UTF-8 CSV, one row per cell, deterministic bytes."""
    lines = [CSV_HEADER]
    axis = grid.theta_axis
    for i, th1 in enumerate(axis):
        for j, th2 in enumerate(axis):
            e = grid.eps0[i, j]
            kp = grid.kappa[i, j]
            lines.append(",".join([
                _fmt(th1), _fmt(th2),
                _fmt(e[0]), _fmt(e[1]), _fmt(e[2]),
                _fmt(kp[0]), _fmt(kp[1]), _fmt(kp[2]),
                _fmt(grid.k1[i, j]), _fmt(grid.k2[i, j]), _fmt(grid.phi[i, j]),
                _fmt(grid.gauss[i, j]), str(grid.mode[i, j]),
            ]))
    data = ("\n".join(lines) + "\n").encode("utf-8")
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


_MODE_COLORS = {
    ModeLabel.IN_PLANE_AXIAL.value: "#4477aa",
    ModeLabel.IN_PLANE_SHEAR.value: "#aa3377",
    ModeLabel.BENDING.value: "#228833",
    ModeLabel.TWISTING.value: "#ccbb44",
}

_FIELD_LABEL = {
    "eps_x": "midplane strain eps_x",
    "eps_y": "midplane strain eps_y",
    "gamma_xy": "midplane shear gamma_xy",
    "kappa_x": "curvature kappa_x (1/mm)",
    "kappa_y": "curvature kappa_y (1/mm)",
    "kappa_xy": "twist kappa_xy (1/mm)",
    "K": "Gaussian curvature K (1/mm^2)",
    "mode": "transformation mode",
}


def field_values(grid: DesignMapGrid, fld: str) -> np.ndarray:
    if fld == "eps_x":
        return grid.eps0[..., 0]
    if fld == "eps_y":
        return grid.eps0[..., 1]
    if fld == "gamma_xy":
        return grid.eps0[..., 2]
    if fld == "kappa_x":
        return grid.kappa[..., 0]
    if fld == "kappa_y":
        return grid.kappa[..., 1]
    if fld == "kappa_xy":
        return grid.kappa[..., 2]
    if fld == "K":
        return grid.gauss
    if fld == "mode":
        return grid.mode
    raise ValidationError(f"unknown map field {fld!r}; expected one of {MAP_FIELDS}")


def render_map_svg(grid: DesignMapGrid, fld: str, path) -> None:
    """Render one field of the map as a static SVG heatmap.

    Rendering is byte-deterministic: a fixed hash salt and stripped date
    metadata keep reruns identical.
    """
    import matplotlib
    matplotlib.use("svg", force=False)
    import matplotlib.pyplot as plt
    from matplotlib.colors import ListedColormap
    from matplotlib.patches import Patch

    values = field_values(grid, fld)
    with plt.rc_context({"svg.hashsalt": "platemorph"}):
        fig, ax = plt.subplots(figsize=(6.4, 5.2))
        extent = (grid.theta_axis[0], grid.theta_axis[-1],
                  grid.theta_axis[0], grid.theta_axis[-1])
        if fld == "mode":
            order = [m.value for m in ModeLabel]
            codes = np.zeros(values.shape, dtype=int)
            for idx, name in enumerate(order):
                codes[values == name] = idx
            cmap = ListedColormap([_MODE_COLORS[name] for name in order])
            # transpose so theta1 runs along x
            ax.imshow(codes.T, origin="lower", extent=extent, cmap=cmap,
                      vmin=-0.5, vmax=len(order) - 0.5, interpolation="nearest")
            ax.legend(handles=[Patch(color=_MODE_COLORS[n], label=n) for n in order],
                      loc="upper left", fontsize=8, framealpha=0.9)
        else:
            vals = values.astype(float)
            vmax = float(np.max(np.abs(vals)))
            vmax = vmax if vmax > 0 else 1.0
            im = ax.imshow(vals.T, origin="lower", extent=extent, cmap="RdBu_r",
                           vmin=-vmax, vmax=vmax, interpolation="nearest")
            fig.colorbar(im, ax=ax, label=_FIELD_LABEL[fld])
        ax.set_xlabel("theta1 (deg)")
        ax.set_ylabel("theta2 (deg)")
        ax.set_title(_FIELD_LABEL[fld])
        fig.tight_layout()
        tmp = f"{path}.tmp"
        fig.savefig(tmp, format="svg", metadata={"Date": None})
        plt.close(fig)
    os.replace(tmp, path)


def map_summary(grid: DesignMapGrid) -> dict:
    """Extrema locations per field, for the CLI summary output."""
    out = {}
    axis = grid.theta_axis
    for fld in MAP_FIELDS:
        if fld == "mode":
            vals, counts = np.unique(grid.mode, return_counts=True)
            out[fld] = {"counts": {str(v): int(c) for v, c in zip(vals, counts)}}
            continue
        v = field_values(grid, fld)
        imin = np.unravel_index(int(np.argmin(v)), v.shape)
        imax = np.unravel_index(int(np.argmax(v)), v.shape)
        out[fld] = {
            "min": {"value": float(v[imin]), "theta1_deg": float(axis[imin[0]]),
                    "theta2_deg": float(axis[imin[1]])},
            "max": {"value": float(v[imax]), "theta1_deg": float(axis[imax[0]]),
                    "theta2_deg": float(axis[imax[1]])},
        }
    return out
