"""Command-line front end.

Exit codes: 0 success, 2 invalid input, 3 numerical failure. Errors are a
single JSON line on stderr and no output file is written. Every float is
written with 17 significant digits.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields, replace

import numpy as np

from . import constants as K
from .core import (CknParams, InvalidInput, NumericalFailure, ProblemParams,
                   aubin_talenti, barenblatt, fmt, make_grid, read_profile_csv,
                   sphere_area)
from .flows import (COLUMNS, FlowConfig, make_datum, normalize_mass, run_free_fd,
                    run_linear, run_rescaled_fp)
from .functionals import (free_diagnostics, gns_stability, heisenberg_check,
                          relative_pair, sandwich_eps)
from .spectra import (hardy_poincare_spectrum, ou_spectrum,
                      sphere_zonal_spectrum)
from .sphere.branches import (ContinuationConfig, constant_branch_bifurcations,
                              is_concave, mu_of_lambda, pick_branch,
                              run_continuation)
from .sphere.cylinder import CylinderSystem
from .sphere.kappa import _cyl_cfg, kappa_detail

POTENTIALS = {
    "harmonic": lambda x: 0.5 * x * x,
    "double_well": lambda x: 0.25 * x ** 4 - 0.5 * x * x,
}

# decimal stand-in for 10/3: the exact critical exponent has no crossing
P_TEN_THIRDS = 3.3333333


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------- output

def to_json(obj):
    """JSON text with floats at 17 significant digits; inf and nan become null."""
    if isinstance(obj, dict):
        return "{" + ", ".join(json.dumps(str(k)) + ": " + to_json(v) for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(to_json(v) for v in obj) + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt(obj) if math.isfinite(obj) else "null"
    if obj is None:
        return "null"
    return json.dumps(str(obj))


def csv_text(header, rows):
    out = [",".join(header)]
    for row in rows:
        out.append(",".join(fmt(x) if isinstance(x, (float, np.floating, int, np.integer))
                            and not isinstance(x, bool) else str(x) for x in row))
    return "\n".join(out) + "\n"


def emit(text, path):
    """Write to `path` atomically, or to stdout when path is None."""
    if path is None:
        sys.stdout.write(text)
        return
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".entroflow-")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def threads():
    raw = os.environ.get("ENTROFLOW_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise InvalidInput(f"ENTROFLOW_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise InvalidInput("ENTROFLOW_THREADS must be >= 1")
    return n


def pmap(fn, items):
    items = list(items)
    n = min(threads(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


def _params(a, need_m=False):
    m, p = a.m, getattr(a, "p", None)
    if need_m and m is None and p is None:
        raise InvalidInput("give --m or --p")
    return ProblemParams(a.d, m=m, p=p, n=getattr(a, "n", None),
                         mass=getattr(a, "mass", None) or 1.0)


# ---------------------------------------------------------------- subcommands

def cmd_constants(a):
    consts = K.ThresholdConstants(**a.constants_overrides)
    consts.validate()
    out = {"d": a.d, "sphere_area": sphere_area(a.d)}
    if a.d >= 3:
        out["S_d"] = K.sobolev_constant(a.d)
    pars = ProblemParams(a.d)
    out["m1"], out["mc"] = pars.m1, pars.mc
    out["p_star"] = pars.p_star
    if a.p is not None:
        ex = K.sphere_exponents(a.d, a.p)
        out["two_sharp"], out["gamma_p"], out["theta"] = ex.two_sharp, ex.gamma_p, ex.theta
        if a.p <= pars.p_star:
            out["C_GNS"] = K.gns_optimal_constant(a.d, a.p)
    if a.m is not None:
        m = a.m
        if max(pars.m1, 0.5) <= m < 1 and m > 0.5:
            out["C0"] = K.renyi_growth_c0(a.d, m, a.mass)
            out["C0_sharp"] = K.renyi_growth_c0_sharp(a.d, m, a.mass)
        if pars.m1 < m < 1:
            eta = 2 * a.d * (m - pars.m1)
            eps = a.eps if a.eps is not None else 0.5 * min(consts.chi * eta, consts.eps0)
            out["T_star"] = K.threshold_time(a.d, m, a.A, a.G, eps, consts)
            out["T_star_inputs"] = {"A": a.A, "G": a.G, "eps": eps,
                                    **{f.name: getattr(consts, f.name) for f in fields(consts)}}
    emit(to_json(out) + "\n", a.out)


def cmd_profile(a):
    grid = make_grid(a.nodes, a.r_max, a.stretch)
    if a.family == "ckn":
        if a.a is None or a.b is None:
            raise InvalidInput("family ckn needs --a and --b")
        prof = aubin_talenti(CknParams(a.d, a.a, a.b), grid, "ckn")
    elif a.family in ("gns", "sobolev"):
        prof = aubin_talenti(ProblemParams(a.d, m=a.m, p=a.p, n=a.n), grid, a.family)
    elif a.family == "barenblatt":
        prof = barenblatt(_params(a, True), grid, a.mass)
    else:
        prof = make_datum(a.family, _params(a, True), grid, a.seed)
    emit(csv_text(["r", "value"], zip(prof.r, prof.values)), a.out)


def _line_datum(a):
    if a.datum is None:
        if a.kind == "heat":
            return lambda x: np.exp(-x * x)
        return lambda x: 1.0 + 0.5 * np.tanh(x)
    prof = read_profile_csv(a.datum)
    r, v = prof.r, prof.values
    # radial profile read as an even function of x
    return lambda x: np.interp(np.abs(x), r, v, right=v[-1])


def cmd_flow(a):
    pars = ProblemParams(a.d, m=a.m, n=a.n) if a.kind in ("fd", "rfd") else None
    cfg_pars = pars or ProblemParams(1)
    cfg = FlowConfig(cfg_pars, a.scheme, a.dt, a.t_end, a.record_every,
                     a.newton_tol, a.newton_max_iter, a.theta, a.target_eps).validate()
    if a.kind in ("fd", "rfd"):
        if a.m is None:
            raise InvalidInput("--m is required for fd and rfd")
        if a.datum is not None:
            u0 = read_profile_csv(a.datum, pars.n)
        else:
            u0 = make_datum(a.datum_kind, pars, make_grid(a.nodes, a.r_max, a.stretch), a.seed)
        if a.kind == "fd":
            res = run_free_fd(u0, cfg)
        else:
            res = run_rescaled_fp(normalize_mass(u0, pars), cfg)
    else:
        pot = POTENTIALS[a.potential] if a.kind == "ou" else None
        res = run_linear(a.kind, _line_datum(a), cfg, pot, a.mesh, a.length)
    emit(csv_text(COLUMNS, (r.row() for r in res.records)), a.out)
    if a.summary is not None:
        emit(to_json({"kind": res.kind, "empirical_T_star": res.empirical_T_star,
                      "fitted_rates": res.fitted_rates, "mass_drift": res.mass_drift(),
                      "clipped": res.clipped}) + "\n", a.summary)


def cmd_spectrum(a):
    if a.operator == "hp":
        if a.m is None:
            raise InvalidInput("--m is required for the hp operator")
        res = hardy_poincare_spectrum(a.d, a.m, a.level, a.mesh or 400, n_eig=a.modes)
    elif a.operator == "ou":
        res = ou_spectrum(POTENTIALS[a.potential], a.modes, a.mesh or 4001)
    else:
        res = sphere_zonal_spectrum(a.d, a.modes, a.mesh or 64, a.even)
    emit(to_json({"eigenvalues": res.eigenvalues, "gap": res.gap,
                  "constraints": res.constraints}) + "\n", a.out)


def _branch(d, p, ell, direction, method, nodes, lam_max, max_steps, signature=True):
    if method == "cylinder":
        cfg = replace(_cyl_cfg(), lam_max=lam_max, max_steps=max_steps, signature=signature)
        sys_ = CylinderSystem(d, p, ell)
        return run_continuation(sys_, direction, cfg, None, "cylinder")
    cfg = ContinuationConfig(nodes=nodes, lam_min=0.0, lam_max=lam_max,
                             max_steps=max_steps, signature=signature)
    from .sphere.branches import continue_branch
    return continue_branch(ell, d, p, direction, cfg)


def _branch_rows(br):
    return [(pt.arclength, pt.lam, pt.mu, pt.signature) for pt in br.points]


def _profile_rows(br):
    sys_ = br.system
    z = sys_.z_nodes()
    rows = []
    for i, st in enumerate(br.states):
        for zz, uu in zip(z, sys_.u_values(st)):
            rows.append((i, zz, uu))
    return rows


def cmd_branch(a):
    br = _branch(a.d, a.p, a.ell, a.direction, a.method, a.nodes, a.lam_max, a.max_steps)
    if len(br.points) < 2:
        raise NumericalFailure(f"branch could not leave the bifurcation point ({br.reason})")
    text = csv_text(["arclength", "lambda", "mu", "signature"], _branch_rows(br))
    prof = None if a.profiles is None else csv_text(["point", "z", "u"], _profile_rows(br))
    emit(text, a.out)
    if prof is not None:
        emit(prof, a.profiles)


def _kappa_task(args):
    d, p, method = args
    res = kappa_detail(d, p, method)
    return p, res.value, res.method, res.attained


def cmd_kappa(a):
    ps = list(a.p)
    if a.p_grid is not None:
        lo, hi, num = a.p_grid
        if num < 1 or num != int(num):
            raise InvalidInput("--p-grid needs an integer count >= 1")
        ps += list(np.linspace(lo, hi, int(num)))
    if not ps:
        raise InvalidInput("give --p or --p-grid")
    rows = pmap(_kappa_task, [(a.d, float(p), a.method) for p in ps])
    emit(csv_text(["p", "kappa_p"], [(p, v) for p, v, _, _ in rows]), a.out)


def cmd_ckn_map(a):
    if a.a_num < 1 or a.b_num < 1:
        raise InvalidInput("sweep counts must be positive")
    rows = []
    ac = (a.d - 2) / 2.0
    for av in np.linspace(a.a_min, a.a_max, a.a_num):
        for bv in np.linspace(a.b_min, a.b_max, a.b_num):
            try:
                ck = CknParams(a.d, float(av), float(bv))
            except InvalidInput:
                continue      # outside the admissible strip
            if not av < ac:
                continue
            v = K.felli_schneider(ck, "critical")
            rows.append((float(av), float(bv), v.region, v.boundary_value, v.margin))
    emit(csv_text(["a", "b", "region", "b_fs", "margin"], rows), a.out)


def cmd_check(a):
    pars = ProblemParams(a.d, m=a.m, p=a.p, n=a.n)
    f = read_profile_csv(a.profile, pars.n)
    out = {"functional": a.functional}
    if a.functional == "free":
        fd = free_diagnostics(f, pars)
        out.update(mass=fd.mass, E=fd.E, I=fd.I, G=fd.G)
    elif a.functional == "relative":
        v = normalize_mass(f, pars)
        F, I, Q = relative_pair(v, pars)
        B = barenblatt(ProblemParams(a.d, m=pars.exponent_m(), n=pars.n), f.grid)
        out.update(F=F, I_rel=I, Q=Q, sandwich_eps=sandwich_eps(v, B))
    elif a.functional == "gns-stability":
        rep = gns_stability(f, pars, normalize=not a.raw)
        out.update(deficit=rep.deficit, deficit_expanded=rep.deficit_expanded,
                   rel_entropy=rep.rel_entropy, fisher_distance=rep.fisher_distance,
                   pck_lower=rep.pck_lower, l1_distance=rep.l1_distance,
                   drift=rep.drift, scale=rep.scale)
    else:
        lhs, rhs = heisenberg_check(f, pars.exponent_p())
        out.update(lhs=lhs, rhs=rhs, holds=bool(lhs <= rhs * (1 + 1e-12)))
    emit(to_json(out) + "\n", a.out)


# ---------------------------------------------------------------- reproduce

def _turning_point(br, tol=1e-6):
    lam = br.lam
    j = int(np.argmin(lam))
    found = 0 < j < len(lam) - 1 and lam[-1] > lam[j] + tol
    return found, float(lam[j]), float(br.mu[j])


def reproduce_fig1(outdir):
    d, p = 3, 3.0
    bif = constant_branch_bifurcations(d, p, 4.0)
    cfg = ContinuationConfig(nodes=64, lam_min=0.0, lam_max=7.0, max_steps=400)
    br = pick_branch(1, d, p, cfg, toward=+1)
    lam_grid = np.round(np.arange(0.5, 6.0 + 1e-9, 0.25), 12)
    mu = mu_of_lambda(d, p, lam_grid, [br])
    emit(csv_text(["arclength", "lambda", "mu", "signature"], _branch_rows(br)),
         os.path.join(outdir, "fig1_branch.csv"))
    emit(csv_text(["lambda", "mu"], zip(lam_grid, mu)), os.path.join(outdir, "fig1_mu.csv"))
    above = lam_grid > bif[0] + 1e-9
    return {"figure": "fig1", "d": d, "p": p, "bifurcation_lambda": bif[0],
            "mu_below_lambda_after_bifurcation": bool(np.all(mu[above] < lam_grid[above])),
            "mu_equals_lambda_before": bool(np.all(mu[~above] == lam_grid[~above])),
            "mu_concave": is_concave(lam_grid, mu),
            "caveat": "mu is the minimum over computed branches; global minimality is not certified"}


def reproduce_fig2(outdir):
    d, p = 5, P_TEN_THIRDS
    bif = constant_branch_bifurcations(d, p, 13.0)
    b1 = _branch(d, p, 1, 1, "gauss", 128, 40.0, 200, signature=False)
    b2 = _branch(d, p, 2, 1, "cylinder", 0, 40.0, 600, signature=False)
    emit(csv_text(["arclength", "lambda", "mu", "signature"], _branch_rows(b1)),
         os.path.join(outdir, "fig2_branch_l1.csv"))
    emit(csv_text(["arclength", "lambda", "mu", "signature"], _branch_rows(b2)),
         os.path.join(outdir, "fig2_branch_l2.csv"))
    found, lam_t, mu_t = _turning_point(b2)
    kap = kappa_detail(d, p)
    return {"figure": "fig2", "d": d, "p": p, "bifurcation_points": bif,
            "turning_point_found": found, "turning_point_lambda": lam_t,
            "turning_point_mu": mu_t, "kappa_p": kap.value, "kappa_method": kap.method,
            "branch_l2_stop": b2.reason,
            "caveat": ("p = 3.3333333 stands for 10/3; at the exact critical exponent the "
                       "antipodal branch concentrates without a crossing. The antipodal "
                       "branch is expected, not proved, to realize the infimum")}


FIG3_GRID = (1.0, 1.5, 2.5, 3.0, 3.2, 3.3, P_TEN_THIRDS)


def reproduce_fig3(outdir):
    d = 5
    rows = pmap(_kappa_task, [(d, p, "auto") for p in FIG3_GRID])
    emit(csv_text(["p", "kappa_p"], [(p, v) for p, v, _, _ in rows]),
         os.path.join(outdir, "fig3_kappa.csv"))
    lim = kappa_detail(d, 10.0 / 3.0)
    vals = {p: v for p, v, _, _ in rows}
    return {"figure": "fig3", "d": d, "p_grid": list(FIG3_GRID),
            "kappa": [v for _, v, _, _ in rows], "methods": [m for _, _, m, _ in rows],
            "kappa_10_3": vals[P_TEN_THIRDS], "conjectured_limit": 2 ** (2.0 / d) * d,
            "critical_upper_bound": lim.value,
            "caveat": ("kappa_10_3 is computed at p = 3.3333333; the exact critical exponent "
                       "only admits the concentrating limit, reported as critical_upper_bound")}


def cmd_reproduce(a):
    os.makedirs(a.out_dir, exist_ok=True)
    fn = {"fig1": reproduce_fig1, "fig2": reproduce_fig2, "fig3": reproduce_fig3}[a.figure]
    summary = fn(a.out_dir)
    emit(to_json(summary) + "\n", os.path.join(a.out_dir, f"{a.figure}_summary.json"))
    sys.stdout.write(to_json(summary) + "\n")


# ---------------------------------------------------------------- parser

def build_parser():
    ap = _Parser(prog="entroflow", description="Entropy methods, flows and sphere branches.")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def add(name, fn, helptext):
        sp = sub.add_parser(name, help=helptext)
        sp.set_defaults(func=fn)
        sp.add_argument("--config", help="JSON file whose keys override flags")
        sp.add_argument("--seed", type=int, default=0)
        return sp

    sp = add("constants", cmd_constants, "closed-form constants as JSON")
    sp.add_argument("--d", type=int, required=True)
    sp.add_argument("--p", type=float)
    sp.add_argument("--m", type=float)
    sp.add_argument("--mass", type=float, default=1.0)
    sp.add_argument("--A", type=float, default=1.0)
    sp.add_argument("--G", type=float, default=1.0)
    sp.add_argument("--eps", type=float)
    sp.add_argument("--out")

    sp = add("profile", cmd_profile, "write a radial profile CSV")
    sp.add_argument("--family", default="barenblatt",
                    choices=["barenblatt", "gns", "sobolev", "ckn", "bump", "ring", "compact", "random"])
    sp.add_argument("--d", type=int, required=True)
    sp.add_argument("--m", type=float)
    sp.add_argument("--p", type=float)
    sp.add_argument("--n", type=float)
    sp.add_argument("--a", type=float)
    sp.add_argument("--b", type=float)
    sp.add_argument("--mass", type=float)
    sp.add_argument("--nodes", type=int, default=2001)
    sp.add_argument("--r-max", type=float, default=20.0)
    sp.add_argument("--stretch", type=float, default=1.0)
    sp.add_argument("--out")

    sp = add("flow", cmd_flow, "run a flow and write the diagnostics CSV")
    sp.add_argument("--kind", required=True, choices=["fd", "rfd", "heat", "ou"])
    sp.add_argument("--d", type=int, default=1)
    sp.add_argument("--m", type=float)
    sp.add_argument("--n", type=float)
    sp.add_argument("--dt", type=float, default=1e-3)
    sp.add_argument("--t-end", type=float, default=1.0)
    sp.add_argument("--scheme", default="implicit_euler", choices=["implicit_euler", "theta_method"])
    sp.add_argument("--theta", type=float, default=0.5)
    sp.add_argument("--record-every", type=int, default=1)
    sp.add_argument("--newton-tol", type=float, default=1e-12)
    sp.add_argument("--newton-max-iter", type=int, default=40)
    sp.add_argument("--target-eps", type=float, default=0.1)
    sp.add_argument("--datum", help="profile CSV (r,value)")
    sp.add_argument("--datum-kind", default="bump",
                    choices=["barenblatt", "bump", "ring", "compact", "random"])
    sp.add_argument("--nodes", type=int, default=2001)
    sp.add_argument("--r-max", type=float, default=20.0)
    sp.add_argument("--stretch", type=float, default=1.0)
    sp.add_argument("--potential", default="harmonic", choices=sorted(POTENTIALS))
    sp.add_argument("--mesh", type=int, default=2001)
    sp.add_argument("--length", type=float, default=200.0)
    sp.add_argument("--out")
    sp.add_argument("--summary", help="optional JSON with rates and T_star")

    sp = add("spectrum", cmd_spectrum, "eigenvalues of a linearized operator")
    sp.add_argument("--operator", required=True, choices=["hp", "ou", "sphere"])
    sp.add_argument("--d", type=int, default=1)
    sp.add_argument("--m", type=float)
    sp.add_argument("--level", type=int, default=0)
    sp.add_argument("--mesh", type=int)
    sp.add_argument("--modes", type=int, default=5)
    sp.add_argument("--even", action="store_true", help="antipodal subspace (sphere)")
    sp.add_argument("--potential", default="harmonic", choices=sorted(POTENTIALS))
    sp.add_argument("--out")

    sp = add("branch", cmd_branch, "continue a bifurcating zonal branch")
    sp.add_argument("--d", type=int, required=True)
    sp.add_argument("--p", type=float, required=True)
    sp.add_argument("--ell", type=int, default=1, choices=[1, 2])
    sp.add_argument("--direction", type=int, default=1, choices=[1, -1])
    sp.add_argument("--method", default="gauss", choices=["gauss", "cylinder"])
    sp.add_argument("--nodes", type=int, default=64)
    sp.add_argument("--lam-max", type=float, default=40.0)
    sp.add_argument("--max-steps", type=int, default=800)
    sp.add_argument("--out")
    sp.add_argument("--profiles", help="optional CSV point,z,u of every branch state")

    sp = add("kappa", cmd_kappa, "optimal antipodal constant over a p-grid")
    sp.add_argument("--d", type=int, required=True)
    sp.add_argument("--p", type=float, nargs="*", default=[])
    sp.add_argument("--p-grid", type=float, nargs=3, metavar=("LO", "HI", "NUM"))
    sp.add_argument("--method", default="auto", choices=["auto", "gauss", "cylinder"])
    sp.add_argument("--out")

    sp = add("ckn-map", cmd_ckn_map, "symmetry regions over an (a, b) sweep")
    sp.add_argument("--d", type=int, default=3)
    sp.add_argument("--a-min", type=float, default=-2.0)
    sp.add_argument("--a-max", type=float, default=0.4)
    sp.add_argument("--a-num", type=int, default=25)
    sp.add_argument("--b-min", type=float, default=-2.0)
    sp.add_argument("--b-max", type=float, default=1.4)
    sp.add_argument("--b-num", type=int, default=35)
    sp.add_argument("--out")

    sp = add("check", cmd_check, "evaluate a functional on a profile CSV")
    sp.add_argument("--functional", required=True,
                    choices=["free", "relative", "gns-stability", "heisenberg"])
    sp.add_argument("--profile", required=True)
    sp.add_argument("--d", type=int, required=True)
    sp.add_argument("--m", type=float)
    sp.add_argument("--p", type=float)
    sp.add_argument("--n", type=float)
    sp.add_argument("--raw", action="store_true", help="gns-stability without normalization")
    sp.add_argument("--out")

    sp = add("reproduce", cmd_reproduce, "canned figure data")
    sp.add_argument("figure", choices=["fig1", "fig2", "fig3"])
    sp.add_argument("--out-dir", default=".")
    return ap


def apply_config(a, parser):
    """Overlay a JSON config on the parsed flags; unknown keys abort."""
    a.constants_overrides = {}
    if a.config is None:
        return a
    try:
        with open(a.config) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidInput(f"cannot read config {a.config}: {exc}") from None
    if not isinstance(raw, dict):
        raise InvalidInput("config must be a JSON object")
    known = set(vars(a)) - {"func", "config", "constants_overrides"}
    for key, val in raw.items():
        k = key.replace("-", "_")
        if k == "command":
            if val != a.command:
                raise InvalidInput(f"config is for {val!r}, not {a.command!r}")
        elif k == "output_path":
            if "out" in known:
                a.out = val
            elif "out_dir" in known:
                a.out_dir = val
            else:
                raise InvalidInput(f"{a.command} has no output path")
        elif k == "constants_overrides":
            if not isinstance(val, dict):
                raise InvalidInput("constants_overrides must be an object")
            names = {f.name for f in fields(K.ThresholdConstants)}
            bad = set(val) - names
            if bad:
                raise InvalidInput(f"unknown constants_overrides keys: {sorted(bad)}")
            a.constants_overrides = {kk: float(vv) for kk, vv in val.items()}
        elif k in known:
            setattr(a, k, val)
        else:
            raise InvalidInput(f"unknown config key {key!r} for {a.command}")
    return a


def _fail(kind, msg, code):
    sys.stderr.write(json.dumps({"error": kind, "message": " ".join(str(msg).split())}) + "\n")
    return code


def main(argv=None):
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
        apply_config(a, parser)
        a.func(a)
    except UsageError as exc:
        return _fail("usage", exc, 2)
    except InvalidInput as exc:
        return _fail("invalid_input", exc, 2)
    except (NumericalFailure, np.linalg.LinAlgError) as exc:
        return _fail("numerical_failure", exc, 3)
    except (OSError, TypeError, ValueError, KeyError) as exc:
        return _fail("invalid_input", exc, 2)
    except FloatingPointError as exc:
        return _fail("numerical_failure", exc, 3)
    return 0


if __name__ == "__main__":
    sys.exit(main())
