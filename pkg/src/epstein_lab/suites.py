"""Verification suites behind ``epstein-lab verify``.

Each suite turns one block of identities into deterministic residual checks
with stencil-scaled tolerances and, where stated, halve-grid convergence
orders.  Suites return a SuiteReport; ``verify`` exits nonzero unless every
check passes.
"""

from __future__ import annotations

import numpy as np

from . import epstein, foliation as fo, horocone, maps, schouten, weingarten as wg
from .errors import NotElliptic, UnknownSuite
from .grid import (ConformalMetric, OperatorField, ScalarField, SymTensor2Field,
                   disk_chart, flat_metric, fuchsian_disk_metric, poincare_metric,
                   spherical_metric, square_chart, stencil_tolerance, sup_interior,
                   tensor_norm, torus_chart)
from .report import SuiteReport
from .schwarzian import (bbar_tensor, cocycle_residual, cocycle_tensor_residual,
                         nehari_ratio, schwarzian_derivative, schwarzian_tensor,
                         schwarzian_vs_derivative_residual)

ORDER_WINDOW = (1.7, 2.3)


def _order(r_coarse, r_fine):
    if r_fine <= 0:
        return 2.0  # round-off floor: treat as converged
    return float(np.log2(r_coarse / r_fine))


def _smooth_u(chart, seed, amplitude=0.15):
    rng = np.random.default_rng(seed)
    zz = chart.zz()
    u = np.zeros(chart.shape)
    for _ in range(3):
        ax, ay = rng.uniform(0.5, 2.5, size=2)
        ph = rng.uniform(0, 2 * np.pi)
        u += rng.standard_normal() * np.sin(ax * zz.real + ph) * np.cos(ay * zz.imag)
    return ScalarField(chart, amplitude * u / max(np.abs(u).max(), 1e-30))


def suite_schwarzian(cfg):
    rep = SuiteReport("schwarzian", cfg)
    seed = cfg["seed"]
    n = cfg["grid"]

    chart = square_chart(n, 0.4, center=0.2 + 0.1j)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(20):
        f = maps.random_mobius(rng)
        worst = max(worst, schwarzian_derivative(f, chart).abs_sup(1))
    rep.add("mobius-kernel", "vanishing Schwarzian characterizes Mobius maps",
            worst, 1e-10)

    fine = square_chart(2 * n - 1, 0.4, center=0.2 + 0.1j)
    r_c = cocycle_residual(maps.EXP, maps.EXP, chart, via="sampled", depth=3)
    r_f = cocycle_residual(maps.EXP, maps.EXP, fine, via="sampled", depth=3)
    rep.add("cocycle-map", "S(g o f) = f* S(g) + S(f)", r_c,
            stencil_tolerance(chart), convergence_order=_order(r_c, r_f),
            order_window=ORDER_WINDOW)
    rep.add("cocycle-map-closed", "chain-rule route is round-off exact",
            cocycle_residual(maps.EXP, maps.EXP, chart, via="closed", depth=3), 1e-10)

    g = flat_metric(chart)
    gf = flat_metric(fine)
    u_c, v_c = _smooth_u(chart, seed + 1), _smooth_u(chart, seed + 2)
    u_f, v_f = _smooth_u(fine, seed + 1), _smooth_u(fine, seed + 2)
    r_c = cocycle_tensor_residual(g, u_c, v_c)
    r_f = cocycle_tensor_residual(gf, u_f, v_f)
    rep.add("cocycle-tensor", "B(g, e^{2u+2v}g) = B(g, e^{2u}g) + B(e^{2u}g, .)",
            r_c, stencil_tolerance(chart), convergence_order=_order(r_c, r_f),
            order_window=ORDER_WINDOW)

    disk = disk_chart(n, 0.8)
    for name, target in [("hyperbolic", poincare_metric(disk)),
                         ("spherical", spherical_metric(disk))]:
        u = target.flat_log_factor()
        tensor = schwarzian_tensor(flat_metric(disk), u)
        resid = sup_interior(tensor_norm(tensor, target).values, disk, 2)
        rep.add(f"tensor-flat-to-{name}",
                f"flat-to-{name} Schwarzian tensor vanishes",
                resid, stencil_tolerance(disk))

    koebe_chart = disk_chart(n, 0.5)
    rep.add("tensor-vs-derivative",
            "B(flat, f* flat) = Re S(f) for the koebe map",
            schwarzian_vs_derivative_residual(maps.KOEBE, koebe_chart, depth=2),
            stencil_tolerance(koebe_chart))

    nh = disk_chart(cfg.get("nehari_grid", 401), 1.0)
    out = nehari_ratio(maps.KOEBE, nh)
    rep.add("nehari-koebe-extremal", "koebe map attains the univalence bound 3/2",
            abs(out["ratio"] - 1.5), 1e-3)
    out_exp = nehari_ratio(maps.mobius(1, 0.2, 0.1, 1), nh)
    rep.add("nehari-mobius", "Mobius maps have ratio 0",
            out_exp["ratio"], 1e-10)
    return rep


def suite_epstein(cfg):
    rep = SuiteReport("epstein", cfg)
    n, seed = cfg["grid"], cfg["seed"]

    chart = square_chart(max(n // 2, 33), 0.5)
    u0 = 0.3
    h = flat_metric(chart, u0)
    surf = epstein.epstein_surface(h)
    inf = epstein.data_at_infinity(epstein.fundamental_forms(surf))
    expected = np.exp(2 * u0)
    resid = max(sup_interior(inf.istar.t11 - expected, chart, 2),
                sup_interior(inf.istar.t12, chart, 2),
                sup_interior(inf.istar.t22 - expected, chart, 2))
    rep.add("calibration-constant-metric",
            "envelope of e^{2u0}|dz|^2 has first form at infinity e^{2u0}|dz|^2",
            resid, 1e-6)

    gm = epstein.hyperbolic_gauss_map(surf, from_tangents=True)
    resid = sup_interior(np.abs(gm - chart.zz()), chart, 2)
    rep.add("gauss-map-identity", "normal geodesics land at their own chart points",
            resid, 1e-6)

    for r in (0.3, 1.0):
        sr = epstein.epstein_surface(h.conformal(r))
        rep.add(f"equidistance-r{r:g}",
                "scaling the metric by e^{2r} moves the surface distance r",
                epstein.surface_distance_residual(surf, sr, r), 1e-6)

    fchart = square_chart(n, 0.25)
    fh = fuchsian_disk_metric(fchart)
    fd = epstein.fundamental_forms(epstein.epstein_surface(fh))
    rep.add("geodesic-plane", "curvature -2 disk metric envelopes the geodesic plane",
            sup_interior(np.abs(fd.shape.values).max(axis=(-1, -2)), fchart, 3),
            stencil_tolerance(fchart))

    rng = np.random.default_rng(seed)
    small = square_chart(9, 1.0)
    vals = rng.uniform(-0.9, 0.9, size=(9, 9, 2, 2))
    vals = 0.5 * (vals + np.swapaxes(vals, -1, -2))
    lam = np.linalg.eigvalsh(vals)
    vals /= np.maximum(np.abs(lam).max(axis=-1), 1.0)[..., None, None] * 1.01
    B = OperatorField(small, vals)
    back = epstein.b_from_bstar(epstein.shape_at_infinity(B))
    rep.add("dictionary-involution", "B -> B* -> B is the identity on tame spectra",
            float(np.nanmax(np.abs(back.values - B.values))), 1e-12)

    bstar = epstein.shape_at_infinity(B)
    lam_b = B.eigenvalues()
    lam_bs = bstar.eigenvalues()
    tame = np.abs(lam_b).max(axis=-1) < 1.0
    posdef = lam_bs.min(axis=-1) > 0.0
    rep.add("tame-iff-positive", "principal curvatures in (-1,1) iff B* positive",
            float(np.mean(tame != posdef)), 0.0)

    mchart = square_chart(n, 0.3)
    hs = ConformalMetric("flat", _smooth_u(mchart, seed + 3))
    inf_a = epstein.data_at_infinity(epstein.fundamental_forms(
        epstein.epstein_surface(hs)))
    inf_b = epstein.data_at_infinity(epstein.fundamental_forms(
        epstein.epstein_surface(hs.conformal(0.4))))
    rep.add("second-form-scale-invariance",
            "second form at infinity unchanged under constant rescaling",
            (inf_a.iistar - inf_b.iistar).sup(3), stencil_tolerance(mchart))

    cod, gauss = epstein.admissibility_residuals(inf_a)
    fine = square_chart(2 * n - 1, 0.3)
    hf = ConformalMetric("flat", _smooth_u(fine, seed + 3))
    inf_f = epstein.data_at_infinity(epstein.fundamental_forms(
        epstein.epstein_surface(hf)))
    cod_f, gauss_f = epstein.admissibility_residuals(inf_f)
    rep.add("admissibility-codazzi", "second form at infinity is Codazzi",
            cod, stencil_tolerance(mchart) * 10,
            convergence_order=_order(cod, cod_f), order_window=(1.5, 2.5))
    rep.add("admissibility-gauss", "trace of II* balances the curvature of I*",
            gauss, stencil_tolerance(mchart) * 10,
            convergence_order=_order(gauss, gauss_f), order_window=(1.5, 2.5))

    leaf = epstein.equidistant_metric(inf_a, 0.5)
    direct = epstein.fundamental_forms(epstein.epstein_surface(
        hs.conformal(0.5))).first_form
    rep.add("equidistant-leaf-metric",
            "expansion leaf at r matches the surface of e^{2r}h",
            (leaf - direct).sup(3), stencil_tolerance(mchart) * 10)
    return rep


def suite_duality(cfg):
    rep = SuiteReport("duality", cfg)
    n, seed = cfg["grid"], cfg["seed"]

    cases = []
    for name, maker in [("fuchsian", fuchsian_disk_metric),
                        ("umbilic", lambda ch: flat_metric(ch, 0.3)),
                        ("random", None)]:
        pair = []
        for m in (n, 2 * n - 1):
            ch = square_chart(m, 0.2)
            h = (ConformalMetric("flat", _smooth_u(ch, seed + 5))
                 if maker is None else maker(ch))
            inf = epstein.data_at_infinity(epstein.fundamental_forms(
                epstein.epstein_surface(h)))
            cone = horocone.cone_data_for_metric(h)
            pair.append((horocone.duality_check(inf, cone), ch, cone))
        (r1c, r2c), ch, cone = pair[0]
        (r1f, r2f), _, _ = pair[1]
        rep.add(f"first-form-duality-{name}", "cone metric doubles the metric at infinity",
                r1c, stencil_tolerance(ch),
                convergence_order=_order(max(r1c, 1e-16), max(r1f, 1e-16)) if r1c > 1e-12 else None,
                order_window=None)
        rep.add(f"second-form-duality-{name}",
                "cone second form is the sum of second and first forms at infinity",
                r2c, stencil_tolerance(ch), convergence_order=_order(r2c, r2f),
                order_window=ORDER_WINDOW)
        rep.add(f"cone-gauss-{name}", "modified Gauss equation K = 1 - tr B on the cone",
                horocone.cone_gauss_residual(cone), stencil_tolerance(ch) * 10)
        cases.append(name)

    dx = cfg.get("strip_dx", 0.01)
    ny = int(round((np.pi - 1.0) / dx)) + 1
    from .grid import GridChart
    strip = GridChart(nx=41, ny=ny, x0=0.0, y0=0.5, dx=dx, dy=dx)
    out = horocone.schwarzian_at_infinity_check("strip", strip)
    rep.add("schwarzian-at-infinity-strip",
            "traceless second form of the hyperbolic metric equals Re S(phi)",
            out["relative"], 0.01)
    return rep


def suite_conformal_change(cfg):
    rep = SuiteReport("conformal-change", cfg)
    n, seed = cfg["grid"], cfg["seed"]

    pair = []
    for m in (n, 2 * n - 1):
        ch = square_chart(m, 0.3)
        h = ConformalMetric("flat", _smooth_u(ch, seed + 8, 0.1))
        u = _smooth_u(ch, seed + 9, 0.2)
        inf_h = epstein.data_at_infinity(epstein.fundamental_forms(
            epstein.epstein_surface(h)))
        inf_e = epstein.data_at_infinity(epstein.fundamental_forms(
            epstein.epstein_surface(h.conformal(u))))
        resid = (inf_e.iistar - inf_h.iistar - bbar_tensor(h, u)).sup(3)
        pair.append((resid, ch))
    rep.add("conformal-change-second-form",
            "II* shifts by the non-traceless Schwarzian tensor",
            pair[0][0], stencil_tolerance(pair[0][1]),
            convergence_order=_order(pair[0][0], pair[1][0]), order_window=ORDER_WINDOW)

    ch = square_chart(n, 0.3)
    h = ConformalMetric("flat", _smooth_u(ch, seed + 8, 0.1))
    u = _smooth_u(ch, seed + 9, 0.2)
    cone_h = horocone.cone_data_embedded(h)
    cone_e = horocone.cone_data_embedded(h.conformal(u))
    lhs = cone_e.iistar_c - cone_h.iistar_c
    rhs = bbar_tensor(h, u) + (cone_e.istar_c - cone_h.istar_c).scaled(0.5)
    rep.add("conformal-change-cone",
            "cone second form shifts by Bbar + (metric growth)/2",
            (lhs - rhs).sup(2), stencil_tolerance(ch))

    eps = 1e-4
    var = horocone.cone_variation(u, h)
    diff = (horocone.cone_data_embedded(h.conformal(u * eps)).iistar_c
            - horocone.cone_data_embedded(h.conformal(u * (-eps))).iistar_c)
    fd = SymTensor2Field(ch, diff.values / (2 * eps))
    rep.add("cone-variation-quotient",
            "first variation of the cone second form is Hess(du) + du g",
            (fd - var).sup(2), stencil_tolerance(ch) + 10 * eps**2)

    m3 = cfg.get("grid3d", 48)
    hgrid = 1.0 / m3
    axes = np.arange(m3) * hgrid
    zzz, yyy, xxx = np.meshgrid(axes, axes, axes, indexing="ij")
    w3 = 0.10 * np.sin(2 * np.pi * xxx) * np.cos(2 * np.pi * yyy)
    u3 = 0.15 * np.cos(2 * np.pi * (xxx + zzz)) + 0.05 * np.sin(2 * np.pi * yyy)
    resid = schouten.conformal_change_residual3(w3, u3, (hgrid,) * 3)
    rep.add("schouten-conformal-change-3d",
            "expansion coefficient h2 = -Schouten obeys the conformal law",
            resid, 10 * 3 * hgrid**2)

    sch_closed, _ = schouten.schouten_conformal(u3, (hgrid,) * 3)
    sch_oracle = schouten.schouten_fd_oracle(u3, (hgrid,) * 3)
    rep.add("schouten-ricci-oracle",
            "closed-form Schouten matches the FD-Christoffel Ricci assembly",
            float(np.max(np.abs(sch_closed - sch_oracle))), 1e-3)
    return rep


def suite_weingarten(cfg):
    rep = SuiteReport("weingarten", cfg)
    n, seed = cfg["grid"], cfg["seed"]
    rng = np.random.default_rng(seed)

    small = square_chart(7, 1.0)
    worst_det = worst_tr = 0.0
    for _ in range(100):
        vals = rng.uniform(-0.8, 0.8, size=(7, 7, 2, 2))
        vals = 0.5 * (vals + np.swapaxes(vals, -1, -2))
        lam = np.linalg.eigvalsh(vals)
        vals /= np.maximum(np.abs(lam).max(axis=-1), 1.0)[..., None, None] * 1.05
        B = OperatorField(small, vals)
        bstar = epstein.shape_at_infinity(B)
        rd, rt = wg.bstar_transfer_residual(bstar, B)
        worst_det, worst_tr = max(worst_det, rd), max(worst_tr, rt)
    rep.add("transfer-det", "det B from det/tr of B*", worst_det, 1e-12)
    rep.add("transfer-tr", "tr B from det/tr of B*", worst_tr, 1e-12)

    worst = 0.0
    for r in rng.uniform(0.1, 1.5, size=20):
        k = np.tanh(r) ** 2
        val = ((1 - k) * np.exp(-2 * r) - (1 + k)) ** 2 - 4 * k
        worst = max(worst, abs(val))
    rep.add("umbilic-weingarten-identity",
            "((1-k)e^{-2r} - (1+k))^2 = 4k at k = tanh^2 r", worst, 1e-12)

    chart = torus_chart(cfg.get("ma_grid", 96))
    zz = chart.zz()
    noise = 0.01 * (np.sin(2 * np.pi * zz.real) * np.cos(4 * np.pi * zz.imag)
                    + 0.5 * np.cos(2 * np.pi * (zz.real + zz.imag)))
    istar = flat_metric(chart)
    gt = istar.metric_tensor()
    iistar = SymTensor2Field.from_components(
        chart, (1 + noise) * gt.t11, 0 * gt.t12, (1 + noise) * gt.t22)
    P = wg.MAProblem(istar, iistar, wg.WeingartenCoeffs(0, 1, 0))
    sol = wg.ma_newton_solve(P)
    rep.add("newton-minimal-residual", "Monge-Ampere solve of det B* = e^{4u}",
            sol.newton_trace[-1], 1e-10)
    tr = sol.newton_trace
    ratios = [tr[k + 1] / tr[k] ** 2 for k in range(1, len(tr) - 1)
              if tr[k + 1] > 1e-14]
    rep.add("newton-quadratic-decay", "residual decays quadratically near the solution",
            0.0 if not ratios or max(ratios) < 1e3 else max(ratios), 1e3)

    u0 = ScalarField(chart, sol.u.values)
    r_tensor = wg.ma_residual(u0, P)
    r_op = wg.ma_residual_operator_form(u0, P)
    rep.add("tensor-vs-operator-form", "both forms of the equation agree",
            float(np.nanmax(np.abs(r_tensor.values - r_op.values))), 1e-10)

    fchart = square_chart(cfg.get("ma_grid", 96) + 1, 0.4)
    fh = fuchsian_disk_metric(fchart)
    istar_f = ConformalMetric("flat", fh.flat_log_factor())
    qq = 0.02 * (fchart.zz() ** 2 - 0.3 * fchart.zz())
    iistar_f = istar_f.metric_tensor() + SymTensor2Field.from_components(
        fchart, qq.real, -qq.imag, -qq.real)
    Pf = wg.MAProblem(istar_f, iistar_f, wg.WeingartenCoeffs(0, 1, 0))
    solf = wg.ma_newton_solve(Pf)
    geo = wg.verify_solution_geometrically(solf, Pf)
    rep.add("minimal-geometric-closure",
            "rebuilt envelope surface of the solution is minimal",
            geo["weingarten_sup"], 1e-3)

    k = 0.5
    Pk = wg.MAProblem(istar_f, istar_f.metric_tensor(),
                      wg.WeingartenCoeffs(1, 0, -k))
    solk = wg.ma_newton_solve(Pk, u0=0.0)
    uexp = np.arctanh(np.sqrt(k))
    rep.add("constant-ke-solution", "umbilic dictionary solution recovered",
            float(np.nanmin(np.abs(np.array([np.nanmax(np.abs(solk.u.values - uexp)),
                                             np.nanmax(np.abs(solk.u.values + uexp))])))),
            1e-10)
    geo_k = wg.verify_solution_geometrically(solk, Pk)
    rep.add("constant-ke-closure", "rebuilt surface has K_e = k",
            geo_k["weingarten_sup"], 1e-3)

    try:
        wg.ma_newton_solve(wg.MAProblem(istar, iistar, wg.WeingartenCoeffs(1, 0, 2)))
        rep.add("ellipticity-gate", "b^2 - 4ac <= 0 is rejected", 1.0, 0.0)
    except NotElliptic:
        rep.add("ellipticity-gate", "b^2 - 4ac <= 0 is rejected", 0.0, 0.0)

    gt = flat_metric(small).metric_tensor()
    small_inf = epstein.InfinityData(
        small, gt, SymTensor2Field(small, -gt.values),
        OperatorField.identity(small, -1.0), small.included())
    rep.add("cmc1-front", "degenerate front reduces to tr B* + 2 = 0",
            float(np.nanmax(np.abs(wg.cmc1_residual(small_inf).values))), 1e-14)
    return rep


def suite_foliation(cfg):
    rep = SuiteReport("foliation", cfg)

    m = fo.TorusModulus(0.3 + 1.2j)
    f1 = fo.SlopeFoliation(2, 1, 1.0)
    f2 = fo.SlopeFoliation(2, 1, 2.0)
    rep.add("ext-quadratic-scaling", "doubling the weight quadruples extremal length",
            abs(fo.extremal_length(f2, m) - 4 * fo.extremal_length(f1, m)), 1e-14)

    worst, orders = 0.0, []
    for (p, q) in [(1, 0), (0, 1), (1, 1), (1, -1), (2, 1), (1, 2), (3, 1), (2, 3), (3, -2)]:
        for tau in (1j, 2j, 0.3 + 1.2j):
            f = fo.SlopeFoliation(p, q, 1.0)
            mm = fo.TorusModulus(tau)
            r1 = fo.gardiner_residual(f, mm, 0.6 + 0.3j, eps=1e-3)
            r2 = fo.gardiner_residual(f, mm, 0.6 + 0.3j, eps=5e-4)
            worst = max(worst, r1)
            if r1 > 1e-13:
                orders.append(_order(r1, r2))
    rep.add("gardiner-derivative", "energy derivative pairs against -4 Re <Phi, mu>",
            worst, 1e-4, convergence_order=float(np.median(orders)),
            order_window=ORDER_WINDOW)

    chart = torus_chart(cfg.get("grid", 64))
    zz = chart.zz()
    hdot = fo.MetricVariation.from_entries(chart, np.sin(2 * np.pi * zz.real),
                                           np.cos(2 * np.pi * zz.imag))
    qv = np.exp(2j * np.pi * zz)
    rep.add("pairing-identity", "tensor pairing equals 4 Re integral q mu",
            fo.pairing_residual(qv, hdot, 1.0, chart), 1e-12)
    hdot_const = fo.MetricVariation.from_entries(chart, np.ones(chart.shape),
                                                 np.zeros(chart.shape))
    anti = fo.pairing_residual(1.0 + 0j, hdot_const, 1.0, chart, factor=3.9)
    rep.add("pairing-factor-anti-regression", "perturbing the factor 4 breaks the identity",
            0.0 if anti > 1e-4 else 1.0, 0.0)

    # unimodular relabeling: basis (1, tau) -> (1, tau - 1) sends (p, q) to (p + q, q)
    f = fo.SlopeFoliation(1, 2, 1.3)
    tau = 0.4 + 1.1j
    ext1 = fo.extremal_length(f, fo.TorusModulus(tau))
    ext2 = fo.extremal_length(fo.SlopeFoliation(f.p + f.q, f.q, f.weight),
                              fo.TorusModulus(tau - 1.0))
    rep.add("modular-invariance", "extremal length invariant under relabeling",
            abs(ext1 - ext2), 1e-12)

    disk = disk_chart(cfg.get("grid", 64) * 2 + 1, 0.9)
    q_field = schwarzian_derivative(maps.KOEBE, disk)
    cert = fo.nehari_ext_certificate(q_field, poincare_metric(disk))
    rep.add("nehari-extremal-length", "integral |q| bounded by 3/2 hyperbolic area",
            0.0 if cert["passes"] else 1.0, 0.0)
    # on a small disk the hyperbolic area is close to 4x flat, so a synthetic
    # |q| = 10 differential violates the bound
    small = disk_chart(65, 0.3)
    synthetic = type(q_field)(small, 10.0 * np.ones(small.shape, dtype=complex))
    cert_bad = fo.nehari_ext_certificate(synthetic, poincare_metric(small))
    rep.add("nehari-negative-control", "oversized synthetic differential fails",
            0.0 if not cert_bad["passes"] else 1.0, 0.0)
    return rep


SUITES = {
    "schwarzian": suite_schwarzian,
    "epstein": suite_epstein,
    "duality": suite_duality,
    "conformal-change": suite_conformal_change,
    "weingarten": suite_weingarten,
    "foliation": suite_foliation,
}


def run_suite(name, cfg=None):
    """Run one suite (or 'all'); returns a SuiteReport."""
    cfg = dict(cfg or {})
    cfg.setdefault("grid", 61)
    cfg.setdefault("seed", 1234)
    if name == "all":
        rep = SuiteReport("all", cfg)
        for key in sorted(SUITES):
            rep.checks.extend(run_suite(key, cfg).checks)
        return rep
    if name not in SUITES:
        raise UnknownSuite(f"unknown suite {name!r}; have {sorted(SUITES)} and 'all'")
    rep = SUITES[name](cfg)
    if cfg.get("tol_override") is not None:
        rep.checks = [type(c)(c.name, c.anchor, c.residual, float(cfg["tol_override"]),
                              c.convergence_order, c.order_window) for c in rep.checks]
    return rep
