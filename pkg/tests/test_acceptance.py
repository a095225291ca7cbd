"""End-to-end acceptance checks for the morphing-plate engine.

Each test covers one release criterion and prints a single PASS/FAIL line
(straight to the terminal, bypassing capture) so the suite doubles as a
sign-off checklist.
"""

import math
import sys
import time

import numpy as np
import pytest

from platemorph import (
    BelowTgError,
    MidplaneState,
    ModeLabel,
    SurfaceMesh,
    TargetSurface,
    UnsupportedTargetError,
    analytic_target_from_state,
    assemble_abd,
    bilayer,
    curvatures_from_principal,
    export_map_csv,
    fit_torus,
    free_recovery_state,
    plan_pipeline,
    principal_curvatures,
    recovery_strains,
    render_map_svg,
    sample_patch,
    save_plan,
    solve_free_recovery,
    sweep_map,
    thermal_resultants,
    torus_curvatures,
)
from platemorph.inverse import symmetry_images
from platemorph.torusgeom import TorusPatch, TorusSpec

from conftest import angle_dist, quadrature_abd, quadrature_thermal


def _report(num, desc, ok, detail=""):
    line = f"criterion {num} ({desc}): {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f"  [{detail}]"
    print(line, file=sys.__stderr__)
    assert ok, line


def _random_layup(card, rng, equal_thickness=False):
    a1, a2 = rng.uniform(-90, 90, 2)
    if equal_thickness:
        t1 = t2 = rng.uniform(0.1, 0.8)
    else:
        t1, t2 = rng.uniform(0.1, 0.8, 2)
    ta = float(rng.uniform(card.ta_min, card.ta_max))
    return bilayer(card, float(a1), float(a2), float(t1), float(t2)), ta


def test_criterion_1_equilibrium_residuals(card):
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        lay, ta = _random_layup(card, rng)
        abd = assemble_abd(lay)
        th = thermal_resultants(lay, ta)
        st = solve_free_recovery(abd, th)
        rhs = np.concatenate([th.n_t, th.m_t])
        res = abd.block() @ np.concatenate([st.eps0, st.kappa]) - rhs
        worst = max(worst, float(np.linalg.norm(res) / np.linalg.norm(rhs)))
    elapsed = time.perf_counter() - start
    _report(1, "free-recovery equilibrium residual over 1000 random layups",
            worst <= 1e-9 and elapsed <= 5.0,
            f"worst={worst:.2e}, {elapsed:.2f}s")


def test_criterion_2_quadrature_oracle(card):
    rng = np.random.default_rng(102)
    worst = 0.0
    for _ in range(100):
        lay, ta = _random_layup(card, rng)
        abd = assemble_abd(lay)
        a, b, d = quadrature_abd(lay)
        for got, ref in ((abd.a, a), (abd.b, b), (abd.d, d)):
            scale = np.max(np.abs(ref)) or 1.0
            worst = max(worst, float(np.max(np.abs(got - ref)) / scale))
        th = thermal_resultants(lay, ta)
        n_ref, m_ref = quadrature_thermal(lay, ta)
        scale = max(np.max(np.abs(n_ref)), np.max(np.abs(m_ref)))
        worst = max(worst, float(np.max(np.abs(th.n_t - n_ref)) / scale))
        worst = max(worst, float(np.max(np.abs(th.m_t - m_ref)) / scale))
    _report(2, "laminate stiffness/thermal terms vs z-quadrature, 100 layups",
            worst <= 1e-9, f"worst={worst:.2e}")


def test_criterion_3_design_map_loci(card):
    grid = sweep_map(card, 0.5, 0.5, 85.0, 1.0)
    axis = grid.theta_axis
    checks = []

    axial = {
        (float(axis[i]), float(axis[j]))
        for i, j in np.argwhere(grid.mode == ModeLabel.IN_PLANE_AXIAL.value)
    }
    checks.append(axial == {(0.0, 0.0), (90.0, 90.0), (-90.0, -90.0),
                            (90.0, -90.0), (-90.0, 90.0)})

    diag_kappa = np.abs(np.array([grid.kappa[i, i] for i in range(grid.n)]))
    checks.append(diag_kappa.max() <= grid.tol_kappa)

    diag_gamma = np.abs(np.array([grid.eps0[i, i, 2] for i in range(grid.n)]))
    best = {float(axis[i]) for i in np.flatnonzero(diag_gamma == diag_gamma.max())}
    checks.append(best == {-45.0, 45.0})

    for th1, th2 in ((0.0, 90.0), (90.0, 0.0)):
        i = int(np.where(axis == th1)[0][0])
        j = int(np.where(axis == th2)[0][0])
        kap = grid.kappa[i, j]
        checks.append(abs(kap[2]) <= grid.tol_kappa)
        checks.append(abs(kap[0] + kap[1]) <= grid.tol_kappa)
        checks.append(abs(kap[0]) > 0.1)

    # halving the bottom layer must bend the zero-twist bending locus
    # away from the straight anti-diagonal by at least one grid cell
    grid2 = sweep_map(card, 0.25, 0.5, 85.0, 1.0)
    kxy = grid2.kappa[..., 2]
    deviations = []
    for i, th1 in enumerate(axis):
        if abs(th1) >= 88.0:
            continue
        row = kxy[i]
        for j in range(grid2.n - 1):
            if row[j] == 0.0 or row[j] * row[j + 1] > 0:
                continue
            th2 = axis[j] + (axis[j + 1] - axis[j]) * row[j] / (row[j] - row[j + 1])
            if abs(th2 - th1) < 3.0:
                continue
            anti = 90.0 - th1 if th1 >= 0 else -90.0 - th1
            deviations.append(abs(th2 - anti))
    checks.append(bool(deviations) and max(deviations) >= 1.0)

    _report(3, "design-map mode loci at 1 degree resolution",
            all(checks), f"{sum(checks)}/{len(checks)} sub-checks")


def test_criterion_4_symmetry_suite(card):
    rng = np.random.default_rng(104)
    worst = 0.0
    for _ in range(1000):
        a1, a2 = rng.uniform(-90, 90, 2)
        t1, t2 = rng.uniform(0.1, 0.8, 2)
        ta = float(rng.uniform(card.ta_min, card.ta_max))
        s = free_recovery_state(bilayer(card, a1, a2, t1, t2), ta)

        sw = free_recovery_state(bilayer(card, a2, a1, t2, t1), ta)
        worst = max(worst, float(np.max(np.abs(s.eps0 - sw.eps0))),
                    float(np.max(np.abs(s.kappa + sw.kappa))))

        mi = free_recovery_state(bilayer(card, -a1, -a2, t1, t2), ta)
        flip = np.array([1.0, 1.0, -1.0])
        worst = max(worst, float(np.max(np.abs(s.eps0 - flip * mi.eps0))),
                    float(np.max(np.abs(s.kappa - flip * mi.kappa))))

        d = float(rng.uniform(-45, 45))
        ro = free_recovery_state(
            bilayer(card, _wrap(a1 + d), _wrap(a2 + d), t1, t2), ta
        )
        ref = _rotate_state(s, d)
        worst = max(worst, float(np.max(np.abs(ro.eps0 - ref.eps0))),
                    float(np.max(np.abs(ro.kappa - ref.kappa))))
    _report(4, "layer-swap / mirror / rotation symmetries, 1000 bilayers",
            worst <= 1e-9, f"worst={worst:.2e}")


def _wrap(angle):
    return angle - 180.0 * round((angle - 1e-9) / 180.0) \
        if not -90.0 <= angle <= 90.0 else angle


def _rotate_state(state, delta_deg):
    th = np.deg2rad(delta_deg)
    c, s = np.cos(th), np.sin(th)
    r = np.array([[c, -s], [s, c]])

    def rot(vec):
        t = np.array([[vec[0], vec[2] / 2.0], [vec[2] / 2.0, vec[1]]])
        t2 = r @ t @ r.T
        return np.array([t2[0, 0], t2[1, 1], 2.0 * t2[0, 1]])

    return MidplaneState(eps0=rot(state.eps0), kappa=rot(state.kappa))


def test_criterion_5_principal_curvature_round_trip():
    rng = np.random.default_rng(105)
    k = rng.uniform(-5.0, 5.0, size=(100000, 3))
    worst = 0.0
    ordered = True
    in_branch = True
    for kx, ky, kxy in k:
        pc = principal_curvatures(kx, ky, kxy)
        ordered &= pc.k1 >= pc.k2
        in_branch &= -90.0 < pc.phi <= 90.0
        back = curvatures_from_principal(pc)
        worst = max(worst, float(np.max(np.abs(np.array(back) - (kx, ky, kxy)))))
    _report(5, "Mohr principal decomposition round trip, 1e5 triples",
            worst <= 1e-12 and ordered and in_branch, f"worst={worst:.2e}")


def test_criterion_6_torus_geometry():
    spec = TorusSpec(r1=10.0, r2=5.0)
    patch = TorusPatch(spec=spec, beta_range=(0.6 * math.pi, 1.4 * math.pi),
                       psi_range=(-0.4, 0.4))
    checks = []

    from platemorph import estimate_curvatures
    mesh = sample_patch(patch, 200, 200)
    cf = estimate_curvatures(mesh)
    beta = np.linspace(*patch.beta_range, 200)
    k1a, k2a, _ = torus_curvatures(spec, beta)
    circ_err = np.max(np.abs(cf.k2[1:-1, 1:-1] - k1a[1:-1][:, None])
                      / np.abs(k1a[1:-1][:, None]))
    tub_err = np.max(np.abs(cf.k1[1:-1, 1:-1] - k2a[0])) / k2a[0]
    checks.append(circ_err <= 1e-3 and tub_err <= 1e-3)

    fit_spec, _, rms = fit_torus(sample_patch(patch, 80, 80))
    checks.append(abs(fit_spec.r1 - spec.r1) / spec.r1 <= 1e-6
                  and abs(fit_spec.r2 - spec.r2) / spec.r2 <= 1e-6)

    sweep = np.linspace(0.0, 2.0 * math.pi, 100001)
    k1s, _, _ = torus_curvatures(spec, sweep)
    peak = int(np.argmax(np.abs(k1s)))
    checks.append(abs(sweep[peak] - math.pi) <= 1e-4
                  and abs(abs(k1s[peak]) - 1.0 / spec.r1) <= 1e-12)

    _report(6, "torus curvature field, surface fit, and inner-peak location",
            all(checks), f"{sum(checks)}/{len(checks)} sub-checks")


def test_criterion_7_inverse_round_trip(card):
    rng = np.random.default_rng(107)
    start = time.perf_counter()
    worst_angle = 0.0
    worst_kres = 0.0
    worst_dim = 0.0
    done = 0
    while done < 100:
        a1, a2 = rng.uniform(-90, 90, 2)
        ta = float(rng.uniform(65.0, 85.0))
        st = free_recovery_state(bilayer(card, a1, a2, 0.5, 0.5), ta)
        pc = principal_curvatures(*st.kappa)
        if pc.k2 >= -1e-3 or pc.k1 <= 1e-3:
            continue
        l = 0.4 / max(abs(pc.k1), abs(pc.k2))
        tgt = analytic_target_from_state(st, l, 0.8 * l)
        plan = plan_pipeline(tgt, card, 1.0, 1.0, ta)

        err, image = min(
            ((max(angle_dist(plan.theta1, im[0]), angle_dist(plan.theta2, im[1])), im)
             for im in symmetry_images((float(a1), float(a2)), True)),
            key=lambda t: t[0],
        )
        worst_angle = max(worst_angle, err)
        worst_kres = max(worst_kres, plan.residuals.kappa_per_mm)

        # oracle dimensions: forward-solve at the matched symmetry image
        b1 = _wrap(image[0] - 180.0 * round((image[0] - plan.theta1) / 180.0))
        b2 = _wrap(image[1] - 180.0 * round((image[1] - plan.theta2) / 180.0))
        st_im = free_recovery_state(bilayer(card, b1, b2, 0.5, 0.5), ta)
        from platemorph import initial_dimensions
        a_ref, b_ref = initial_dimensions(st_im, plan)
        worst_dim = max(worst_dim,
                        abs(plan.a - a_ref) / a_ref,
                        abs(plan.b - b_ref) / b_ref)
        done += 1
    elapsed = time.perf_counter() - start
    ok = worst_angle <= 0.5 and worst_kres <= 1e-6 and worst_dim <= 1e-6 \
        and elapsed <= 60.0
    _report(7, "inverse design round trip on 100 deployed bilayer shapes", ok,
            f"angle={worst_angle:.2e}deg, kappa={worst_kres:.2e}/mm, "
            f"dims={worst_dim:.2e}, {elapsed:.1f}s")


def test_criterion_8_gatekeeping(card):
    checks = []

    for call in (
        lambda: recovery_strains(card, 60.2),
        lambda: free_recovery_state(bilayer(card, 0.0, 90.0, 0.5, 0.5), 60.2),
        lambda: sweep_map(card, 0.5, 0.5, 60.2, 30.0),
    ):
        try:
            call()
            checks.append(False)
        except BelowTgError:
            checks.append(True)

    st = free_recovery_state(bilayer(card, 30.0, -60.0, 0.5, 0.5), 85.0)
    pc = principal_curvatures(*st.kappa)
    l = 0.4 / max(abs(pc.k1), abs(pc.k2))
    tgt = analytic_target_from_state(st, l, 0.8 * l)
    try:
        plan_pipeline(tgt, card, 1.0, 1.0, 55.0)
        checks.append(False)
    except BelowTgError:
        checks.append(True)

    # non-saddle targets must be refused outright
    dome = MidplaneState(eps0=np.zeros(3), kappa=np.array([0.1, 0.2, 0.0]))
    try:
        analytic_target_from_state(dome, 1.0, 1.0)
        checks.append(False)
    except UnsupportedTargetError:
        checks.append(True)
    x, y = np.meshgrid(np.linspace(0, 5, 25), np.linspace(0, 4, 25), indexing="ij")
    flat = SurfaceMesh(vertices=np.stack([x, y, np.zeros_like(x)], axis=-1))
    try:
        plan_pipeline(TargetSurface(mesh=flat), card, 1.0, 1.0, 85.0)
        checks.append(False)
    except UnsupportedTargetError:
        checks.append(True)

    _report(8, "activation-temperature and target-curvature gatekeeping",
            all(checks), f"{sum(checks)}/{len(checks)} sub-checks")


def test_criterion_9_performance_and_determinism(card, tmp_path):
    start = time.perf_counter()
    grid = sweep_map(card, 0.5, 0.5, 85.0, 1.0)
    sweep_s = time.perf_counter() - start
    checks = [grid.n == 181 and sweep_s <= 2.0]

    small = sweep_map(card, 0.5, 0.5, 85.0, 15.0)
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    export_map_csv(small, p1)
    export_map_csv(small, p2)
    checks.append(p1.read_bytes() == p2.read_bytes())
    s1, s2 = tmp_path / "a.svg", tmp_path / "b.svg"
    render_map_svg(small, "mode", s1)
    render_map_svg(small, "mode", s2)
    checks.append(s1.read_bytes() == s2.read_bytes())

    st = free_recovery_state(bilayer(card, 25.0, -70.0, 0.5, 0.5), 85.0)
    pc = principal_curvatures(*st.kappa)
    l = 0.4 / max(abs(pc.k1), abs(pc.k2))
    tgt = analytic_target_from_state(st, l, 0.8 * l)
    j1, j2 = tmp_path / "p1.json", tmp_path / "p2.json"
    save_plan(plan_pipeline(tgt, card, 1.0, 1.0, 85.0), j1)
    save_plan(plan_pipeline(tgt, card, 1.0, 1.0, 85.0), j2)
    checks.append(j1.read_bytes() == j2.read_bytes())

    _report(9, "full-resolution sweep speed and byte-stable outputs",
            all(checks), f"sweep={sweep_s:.2f}s, {sum(checks)}/{len(checks)} sub-checks")
