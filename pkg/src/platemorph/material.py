"""Lamina material data: elastic constants and anisotropic recovery strains.

A printed single layer shrinks along the extrusion direction (eps1 < 0) and
expands transversely (eps2 >= 0) once reheated above the glass transition.
The magnitudes depend on the activation temperature and are tabulated per
material card; in between the measured knots we interpolate linearly and we
never extrapolate outside the calibrated range.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import BelowTgError, OutOfRangeError, ValidationError


@dataclass(frozen=True)
class ElasticConstants:
    """Plane-stress elastic constants of a printed lamina (moduli in MPa)."""

    e1: float
    e2: float
    nu12: float
    g12: float

    def __post_init__(self):
        if self.e1 <= 0 or self.e2 <= 0 or self.g12 <= 0:
            raise ValidationError("elastic moduli must be positive")
        nu21 = self.nu12 * self.e2 / self.e1
        if self.nu12 <= 0 or self.nu12 * nu21 >= 1.0:
            raise ValidationError(
                "Poisson ratio violates positive definiteness: "
                f"nu12={self.nu12}, nu12*nu21={self.nu12 * nu21}"
            )

    @property
    def nu21(self) -> float:
        return self.nu12 * self.e2 / self.e1


@dataclass(frozen=True)
class RecoveryPoint:
    """One measured steady-state recovery condition."""

    ta_c: float
    eps1: float
    eps2: float
    t_act_s: float

    def __post_init__(self):
        if not self.eps1 < 0 <= self.eps2:
            raise ValidationError(
                f"recovery strains must satisfy eps1 < 0 <= eps2 "
                f"(got eps1={self.eps1}, eps2={self.eps2})"
            )
        if self.t_act_s <= 0:
            raise ValidationError("activation time must be positive")


@dataclass(frozen=True)
class ProcessRecord:
    """Printing condition under which the recovery table was calibrated."""

    nozzle_speed_mm_s: float
    nozzle_temp_c: float
    layer_height_mm: float
    flow_pct: float

    def to_dict(self) -> dict:
        return {
            "nozzle_speed_mm_s": self.nozzle_speed_mm_s,
            "nozzle_temp_c": self.nozzle_temp_c,
            "layer_height_mm": self.layer_height_mm,
            "flow_pct": self.flow_pct,
        }


@dataclass(frozen=True)
class MaterialCard:
    """Immutable material description: elasticity plus recovery table."""

    name: str
    tg_c: float
    elastic: ElasticConstants
    recovery: tuple[RecoveryPoint, ...]
    process: ProcessRecord

    def __post_init__(self):
        if not self.recovery:
            raise ValidationError("recovery table must not be empty")
        tas = [p.ta_c for p in self.recovery]
        if any(b <= a for a, b in zip(tas, tas[1:])):
            raise ValidationError("recovery table t_a must be strictly increasing")
        for p in self.recovery:
            if p.ta_c <= self.tg_c:
                raise ValidationError(
                    f"recovery point at {p.ta_c} C is not above Tg = {self.tg_c} C"
                )

    @property
    def ta_min(self) -> float:
        return self.recovery[0].ta_c

    @property
    def ta_max(self) -> float:
        return self.recovery[-1].ta_c


def _require_keys(obj: dict, keys: set[str], where: str) -> None:
    missing = keys - obj.keys()
    unknown = obj.keys() - keys
    if missing:
        raise ValidationError(f"{where}: missing fields {sorted(missing)}")
    if unknown:
        raise ValidationError(f"{where}: unknown fields {sorted(unknown)}")


def card_from_dict(doc: dict) -> MaterialCard:
    """Build a validated MaterialCard from a parsed JSON document."""
    if not isinstance(doc, dict):
        raise ValidationError("material card must be a JSON object")
    _require_keys(doc, {"name", "tg_c", "elastic", "recovery", "process"}, "card")
    el = doc["elastic"]
    _require_keys(el, {"e1_mpa", "e2_mpa", "nu12", "g12_mpa"}, "card.elastic")
    pr = doc["process"]
    _require_keys(
        pr,
        {"nozzle_speed_mm_s", "nozzle_temp_c", "layer_height_mm", "flow_pct"},
        "card.process",
    )
    if not isinstance(doc["recovery"], list):
        raise ValidationError("card.recovery must be a list")
    points = []
    for i, rp in enumerate(doc["recovery"]):
        _require_keys(rp, {"ta_c", "eps1", "eps2", "t_act_s"}, f"card.recovery[{i}]")
        points.append(
            RecoveryPoint(
                ta_c=float(rp["ta_c"]),
                eps1=float(rp["eps1"]),
                eps2=float(rp["eps2"]),
                t_act_s=float(rp["t_act_s"]),
            )
        )
    return MaterialCard(
        name=str(doc["name"]),
        tg_c=float(doc["tg_c"]),
        elastic=ElasticConstants(
            e1=float(el["e1_mpa"]),
            e2=float(el["e2_mpa"]),
            nu12=float(el["nu12"]),
            g12=float(el["g12_mpa"]),
        ),
        recovery=tuple(points),
        process=ProcessRecord(
            nozzle_speed_mm_s=float(pr["nozzle_speed_mm_s"]),
            nozzle_temp_c=float(pr["nozzle_temp_c"]),
            layer_height_mm=float(pr["layer_height_mm"]),
            flow_pct=float(pr["flow_pct"]),
        ),
    )


def load_material_card(path) -> MaterialCard:
    """Load and validate a material card JSON file."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"malformed material card {path}: {exc}") from exc
    return card_from_dict(doc)


def recovery_strains(card: MaterialCard, t_a: float) -> tuple[float, float, float]:
    """Interpolated (eps1, eps2, t_act) at activation temperature t_a.

    Piecewise linear between the measured knots; exact at knots.  Raises
    BelowTgError at or below Tg and OutOfRangeError outside the table.
    """
    if t_a <= card.tg_c:
        raise BelowTgError(
            f"t_a = {t_a} C is at or below Tg = {card.tg_c} C; no shape recovery"
        )
    if t_a < card.ta_min or t_a > card.ta_max:
        raise OutOfRangeError(
            f"t_a = {t_a} C outside calibrated range "
            f"[{card.ta_min}, {card.ta_max}] C"
        )
    tas = np.array([p.ta_c for p in card.recovery])
    eps1 = float(np.interp(t_a, tas, [p.eps1 for p in card.recovery]))
    eps2 = float(np.interp(t_a, tas, [p.eps2 for p in card.recovery]))
    t_act = float(np.interp(t_a, tas, [p.t_act_s for p in card.recovery]))
    return eps1, eps2, t_act


def reduced_stiffness(elastic: ElasticConstants) -> np.ndarray:
    """Plane-stress reduced stiffness matrix Q (3x3, MPa) in the fiber frame."""
    nu21 = elastic.nu21
    den = 1.0 - elastic.nu12 * nu21
    if den <= 0:
        raise ValidationError("stiffness not positive definite")
    q11 = elastic.e1 / den
    q22 = elastic.e2 / den
    q12 = elastic.nu12 * q22
    return np.array(
        [
            [q11, q12, 0.0],
            [q12, q22, 0.0],
            [0.0, 0.0, elastic.g12],
        ]
    )
