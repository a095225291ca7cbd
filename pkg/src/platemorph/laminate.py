"""Classical lamination theory for printed bilayer (and n-layer) plates.

The deployed midplane state follows from force/moment balance with the
thermal resultants produced by the constrained anisotropic recovery of each
printed layer:

    [A B] [eps0 ]   [N_T]
    [B D] [kappa] = [M_T]

Conventions: layer 1 is the bottom (first-printed) layer and occupies z < 0;
strain/curvature vectors use engineering shear gamma_xy and engineering twist
kappa_xy = -2 d2w/dxdy; recovery strains enter as thermal strains with the
temperature step normalized to one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SingularSystemError, ValidationError
from .material import MaterialCard, recovery_strains, reduced_stiffness

COND_LIMIT = 1e12


@dataclass(frozen=True)
class LayerSpec:
    """One printed layer: angle (deg, CCW from structural x), thickness (mm)."""

    theta: float
    thickness: float
    material: MaterialCard

    def __post_init__(self):
        if self.thickness <= 0:
            raise ValidationError("layer thickness must be positive")
        if not -90.0 <= self.theta <= 90.0:
            raise ValidationError("printing angle must lie in [-90, 90] degrees")


@dataclass(frozen=True)
class Layup:
    """Ordered bottom-to-top layer stack with midplane at z = 0."""

    layers: tuple[LayerSpec, ...]
    z: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.layers:
            raise ValidationError("layup needs at least one layer")
        t = np.array([ly.thickness for ly in self.layers])
        h = float(t.sum())
        z = np.concatenate([[-h / 2.0], -h / 2.0 + np.cumsum(t)])
        object.__setattr__(self, "z", z)

    @property
    def thickness(self) -> float:
        return float(self.z[-1] - self.z[0])


def bilayer(material: MaterialCard, theta1: float, theta2: float,
            t1: float, t2: float) -> Layup:
    """Convenience constructor for the two-layer plates of this engine."""
    return Layup((LayerSpec(theta1, t1, material), LayerSpec(theta2, t2, material)))


@dataclass(frozen=True)
class ABDMatrices:
    a: np.ndarray  # extension, N/mm
    b: np.ndarray  # coupling, N
    d: np.ndarray  # bending, N*mm

    def block(self) -> np.ndarray:
        """6x6 system matrix [[A, B], [B, D]]."""
        return np.block([[self.a, self.b], [self.b, self.d]])


@dataclass(frozen=True)
class ThermalResultants:
    n_t: np.ndarray  # N/mm
    m_t: np.ndarray  # N


@dataclass(frozen=True)
class MidplaneState:
    """Midplane strains (eps_x0, eps_y0, gamma_xy0) and curvatures (1/mm)."""

    eps0: np.ndarray
    kappa: np.ndarray

    def to_dict(self) -> dict:
        ex, ey, gxy = (float(v) for v in self.eps0)
        kx, ky, kxy = (float(v) for v in self.kappa)
        return {
            "eps_x": ex, "eps_y": ey, "gamma_xy": gxy,
            "kappa_x": kx, "kappa_y": ky, "kappa_xy": kxy,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MidplaneState":
        return cls(
            eps0=np.array([d["eps_x"], d["eps_y"], d["gamma_xy"]], dtype=float),
            kappa=np.array([d["kappa_x"], d["kappa_y"], d["kappa_xy"]], dtype=float),
        )


def transform_stiffness(q: np.ndarray, theta: float) -> np.ndarray:
    """Reduced stiffness rotated from the fiber frame to the structural frame."""
    th = np.deg2rad(theta)
    c, s = np.cos(th), np.sin(th)
    c2, s2 = c * c, s * s
    q11, q12, q22, q66 = q[0, 0], q[0, 1], q[1, 1], q[2, 2]
    qb11 = q11 * c2 * c2 + 2.0 * (q12 + 2.0 * q66) * s2 * c2 + q22 * s2 * s2
    qb22 = q11 * s2 * s2 + 2.0 * (q12 + 2.0 * q66) * s2 * c2 + q22 * c2 * c2
    qb12 = (q11 + q22 - 4.0 * q66) * s2 * c2 + q12 * (s2 * s2 + c2 * c2)
    qb66 = (q11 + q22 - 2.0 * q12 - 2.0 * q66) * s2 * c2 + q66 * (s2 * s2 + c2 * c2)
    qb16 = (q11 - q12 - 2.0 * q66) * s * c2 * c + (q12 - q22 + 2.0 * q66) * s2 * s * c
    qb26 = (q11 - q12 - 2.0 * q66) * s2 * s * c + (q12 - q22 + 2.0 * q66) * s * c2 * c
    return np.array(
        [
            [qb11, qb12, qb16],
            [qb12, qb22, qb26],
            [qb16, qb26, qb66],
        ]
    )


def transform_recovery(eps1: float, eps2: float, theta: float) -> np.ndarray:
    """Recovery strain vector in the structural frame (engineering shear)."""
    th = np.deg2rad(theta)
    c, s = np.cos(th), np.sin(th)
    return np.array(
        [
            eps1 * c * c + eps2 * s * s,
            eps1 * s * s + eps2 * c * c,
            2.0 * (eps1 - eps2) * s * c,
        ]
    )


def _layer_qbars(layup: Layup) -> list[np.ndarray]:
    return [
        transform_stiffness(reduced_stiffness(ly.material.elastic), ly.theta)
        for ly in layup.layers
    ]


def assemble_abd(layup: Layup) -> ABDMatrices:
    """Extension, coupling, and bending stiffness of the stack."""
    a = np.zeros((3, 3))
    b = np.zeros((3, 3))
    d = np.zeros((3, 3))
    z = layup.z
    for k, qb in enumerate(_layer_qbars(layup)):
        z0, z1 = z[k], z[k + 1]
        a += qb * (z1 - z0)
        b += qb * ((z1 * z1 - z0 * z0) / 2.0)
        d += qb * ((z1 ** 3 - z0 ** 3) / 3.0)
    return ABDMatrices(a=a, b=b, d=d)


def thermal_resultants(layup: Layup, t_a: float) -> ThermalResultants:
    """Thermal force and moment resultants from the layers' recovery strains."""
    n_t = np.zeros(3)
    m_t = np.zeros(3)
    z = layup.z
    for k, (ly, qb) in enumerate(zip(layup.layers, _layer_qbars(layup))):
        eps1, eps2, _ = recovery_strains(ly.material, t_a)
        alpha = transform_recovery(eps1, eps2, ly.theta)
        qa = qb @ alpha
        z0, z1 = z[k], z[k + 1]
        n_t += qa * (z1 - z0)
        m_t += qa * ((z1 * z1 - z0 * z0) / 2.0)
    return ThermalResultants(n_t=n_t, m_t=m_t)


def solve_free_recovery(abd: ABDMatrices, th: ThermalResultants) -> MidplaneState:
    """Midplane state of a freely deploying plate (N = M = 0).

    Dense solve with one step of iterative refinement; a condition estimate
    gates the singular-system error.
    """
    k = abd.block()
    cond = np.linalg.cond(k)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularSystemError(
            f"laminate system is numerically singular (cond ~ {cond:.3e})",
            condition=cond,
        )
    rhs = np.concatenate([th.n_t, th.m_t])
    x = np.linalg.solve(k, rhs)
    x = x + np.linalg.solve(k, rhs - k @ x)
    return MidplaneState(eps0=x[:3], kappa=x[3:])


def free_recovery_state(layup: Layup, t_a: float) -> MidplaneState:
    """Assemble and solve in one step."""
    return solve_free_recovery(assemble_abd(layup), thermal_resultants(layup, t_a))


class LaminaStressSampler:
    """Through-thickness in-plane stress of a deployed laminate.

    sigma_k(z) = Qbar_k (eps0 + z*kappa - alpha_k) for z inside layer k.
    """

    def __init__(self, layup: Layup, state: MidplaneState, t_a: float):
        self.layup = layup
        self.state = state
        self._qbars = _layer_qbars(layup)
        self._alphas = []
        for ly in layup.layers:
            eps1, eps2, _ = recovery_strains(ly.material, t_a)
            self._alphas.append(transform_recovery(eps1, eps2, ly.theta))

    def layer_index(self, z: float) -> int:
        zs = self.layup.z
        if z < zs[0] or z > zs[-1]:
            raise ValidationError(
                f"z = {z} outside the laminate [-h/2, h/2] = [{zs[0]}, {zs[-1]}]"
            )
        # interfaces belong to the lower layer except at the very bottom
        k = int(np.searchsorted(zs, z, side="left")) - 1
        return min(max(k, 0), len(self.layup.layers) - 1)

    def __call__(self, z: float) -> np.ndarray:
        k = self.layer_index(z)
        strain = self.state.eps0 + z * self.state.kappa - self._alphas[k]
        return self._qbars[k] @ strain

    def resultants(self) -> tuple[np.ndarray, np.ndarray]:
        """Exact integrals (N, M) of the piecewise-linear stress profile.

        Two-point Gauss per layer is exact for the linear-in-z integrand of N
        and the quadratic integrand of M.
        """
        n = np.zeros(3)
        m = np.zeros(3)
        zs = self.layup.z
        gp = 1.0 / np.sqrt(3.0)
        for k in range(len(self.layup.layers)):
            z0, z1 = zs[k], zs[k + 1]
            mid, half = (z0 + z1) / 2.0, (z1 - z0) / 2.0
            for xi in (-gp, gp):
                z = mid + half * xi
                strain = self.state.eps0 + z * self.state.kappa - self._alphas[k]
                sig = self._qbars[k] @ strain
                n += sig * half
                m += sig * z * half
        return n, m


def lamina_stresses(layup: Layup, state: MidplaneState, t_a: float) -> LaminaStressSampler:
    """Per-layer stress sampler sigma(z) for the given deployed state."""
    return LaminaStressSampler(layup, state, t_a)
