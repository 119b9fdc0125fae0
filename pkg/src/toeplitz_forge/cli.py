"""Experiment runner: reproducible sweeps with CSV/JSON artifacts.

Every subcommand writes ``<out>/<name>.csv`` (fixed header, deterministic
body) and ``<out>/<name>.json`` (schema-versioned summary; the only place
timestamps appear).  Exit codes: 0 success, 1 check failure, 2 config
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import datetime
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import combinatorics as cb
from . import covariant_calculus as cc
from . import function_spaces as fs
from . import geometry as geo
from . import quantization_spectral as qs
from . import stationary_phase as sp
from .series import PowerSeries

SCHEMA_VERSION = "1.0"


# ---------------------------------------------------------------------------
# artifacts


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if x is None:
        return ""
    return str(x)


def _write_csv(out_dir: str, name: str, header, rows) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"{name}.csv")
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(cell) for cell in row) + "\n")
    return path


def _write_summary(out_dir: str, name: str, command: str, settings: dict, payload: dict, passed: bool) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"{name}.json")
    doc = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "settings": {k: _fmt(v) if not isinstance(v, (list, dict)) else v for k, v in settings.items()},
        "generated_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "passed": bool(passed),
    }
    doc.update(payload)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _settings(args, keys) -> dict:
    return {k: getattr(args, k) for k in keys}


# ---------------------------------------------------------------------------
# config files and argument plumbing


def _config_error(message: str) -> "SystemExit":
    print(f"config error: {message}", file=sys.stderr)
    return SystemExit(2)


def _load_config(path: str) -> dict:
    values = {}
    try:
        with open(path) as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise _config_error(f"{path}:{lineno}: expected 'key = value', got {line!r}")
                key, _, value = line.partition("=")
                values[key.strip().replace("-", "_")] = value.strip()
    except OSError as exc:
        raise _config_error(f"cannot read {path}: {exc.strerror}")
    return values


def _apply_config(args: argparse.Namespace, sub: argparse.ArgumentParser, argv) -> None:
    if not args.config:
        return
    values = _load_config(args.config)
    actions = {a.dest: a for a in sub._actions if a.dest != "help"}
    for dest, raw in values.items():
        action = actions.get(dest)
        if action is None:
            raise _config_error(f"unknown key {dest!r} for this subcommand")
        if any(opt in argv for opt in action.option_strings):
            continue  # explicit flags beat config values
        caster = action.type or str
        try:
            setattr(args, dest, caster(raw))
        except (TypeError, ValueError) as exc:
            raise _config_error(f"bad value for {dest!r}: {exc}")


def _parse_n_list(text: str):
    try:
        ns = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ValueError(f"N-list must be comma-separated integers, got {text!r}")
    if not ns:
        raise ValueError("N-list is empty")
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError("N-list must be strictly increasing")
    if ns[0] < 1:
        raise ValueError("levels must be positive")
    return ns


def _geometry(name: str):
    alias = {"plane": "bargmann"}
    try:
        return geo.model_by_name(alias.get(name, name))
    except (KeyError, ValueError):
        raise ValueError(f"unknown geometry {name!r}; expected plane or sphere")


def _parse_poly(text: str, compact: bool) -> dict:
    """poly:<e1,e2,e3=coeff;...> (sphere) or poly:<p,q=coeff;...> (plane)."""
    body = text[len("poly:"):]
    arity = 3 if compact else 2
    terms = {}
    for chunk in body.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        expo, _, coeff = chunk.partition("=")
        if not coeff:
            raise ValueError(f"polynomial term {chunk!r} needs '=coeff'")
        try:
            key = tuple(int(e) for e in expo.split(","))
            val = complex(coeff) if ("j" in coeff) else float(coeff)
        except ValueError:
            raise ValueError(f"cannot parse polynomial term {chunk!r}")
        if len(key) != arity or any(e < 0 for e in key):
            raise ValueError(f"exponents {key} need {arity} nonnegative entries")
        terms[key] = val
    if not terms:
        raise ValueError(f"no terms in polynomial spec {text!r}")
    return terms


_NAMED_SPHERE = {
    "one": {(0, 0, 0): 1.0},
    "x1": {(1, 0, 0): 1.0},
    "x2": {(0, 1, 0): 1.0},
    "x3": {(0, 0, 1): 1.0},
}


def _symbol_terms(spec: str, compact: bool) -> dict:
    if spec.startswith("poly:"):
        return _parse_poly(spec, compact)
    if compact and spec in _NAMED_SPHERE:
        return dict(_NAMED_SPHERE[spec])
    if not compact and spec == "one":
        return {(0, 0): 1.0}
    raise ValueError(f"unknown symbol spec {spec!r}; use a name or poly:<terms>")


def _parse_domain(text: str) -> fs.Domain:
    kind, _, rest = text.partition(":")
    try:
        if kind == "interval":
            lo, hi = (float(p) for p in rest.split(","))
            return fs.Domain.interval(lo, hi)
        if kind == "disk":
            return fs.Domain.disk(float(rest))
    except (TypeError, ValueError):
        pass
    raise ValueError(f"bad domain {text!r}; use interval:lo,hi or disk:radius")


# ---------------------------------------------------------------------------
# lemmas verify


def _cmd_lemmas(args) -> int:
    if args.action != "verify":
        raise ValueError(f"unknown lemmas action {args.action!r}")
    if args.n < 1 or args.d < 0 or args.m_max < 0 or args.ell_max < 1:
        raise ValueError("need n >= 1, d >= 0, m-max >= 0, ell-max >= 1")
    rows = []
    all_hold = True
    for m in cb.legal_m_range(args.n, args.d, args.m_max):
        for ell in range(1, args.ell_max + 1):
            res = cb.lem_hard_sum(args.n, args.d, ell, m)
            rows.append((args.n, args.d, m, ell, float(res.value), float(res.bound), res.holds))
            all_hold = all_hold and res.holds
    _write_csv(args.out, "lemmas", ("n", "d", "m", "ell", "value", "bound", "holds"), rows)
    _write_summary(
        args.out, "lemmas", "lemmas verify",
        _settings(args, ("n", "d", "m_max", "ell_max", "out", "seed")),
        {"rows": len(rows), "violations": sum(1 for r in rows if not r[-1])},
        all_hold,
    )
    return 0 if all_hold else 1


# ---------------------------------------------------------------------------
# symbols {norm|product|inverse|sum}


def _symbols_coeffs(args):
    if args.coeffs == "factorial":
        return [args.R ** k * math.factorial(k) for k in range(args.K + 1)]
    try:
        return [float(c) for c in args.coeffs.split(",")]
    except ValueError:
        raise ValueError(f"coeffs must be comma-separated floats or 'factorial', got {args.coeffs!r}")


def _cmd_symbols(args) -> int:
    if args.K < 0:
        raise ValueError("K must be >= 0")
    domain = _parse_domain(args.domain)
    coeffs = _symbols_coeffs(args)
    sym = fs.make_symbol(coeffs, domain, r=args.r, R=args.R, m=args.m)
    rows = []
    payload = {}
    passed = True
    if args.action == "norm":
        total = max(sym.constant, 1e-300)
        for k, a_k in enumerate(coeffs):
            single = fs.make_symbol([0.0] * k + [a_k], domain, r=args.r, R=args.R, m=args.m)
            rows.append((k, 0, single.constant / total, sym.constant))
        payload["norm"] = sym.constant
        passed = all(r[2] <= 1.0 + 1e-12 for r in rows)
    elif args.action == "product":
        if args.m < 4:
            raise ValueError("the product bound is certified for m >= 4 only")
        other = fs.unit_symbol(sym)
        report = fs.product_bound_check(sym, other)
        prod = report["product"]
        for k in range(prod.K + 1):
            mag = abs(prod.coeffs[k].constant_term())
            rows.append((k, 0, mag / max(report["bound"], 1e-300), report["bound"]))
        payload.update(product_norm=report["product_norm"], bound=report["bound"])
        passed = bool(report["holds"])
    elif args.action == "inverse":
        report = fs.star_inverse_report(sym)
        for k in range(report.inverse.K + 1):
            mag = abs(report.inverse.coeffs[k].constant_term())
            rows.append((k, 0, mag / max(report.estimate, 1e-300), report.paper_bound))
        payload.update(
            min_abs_a0=report.min_abs_a0,
            estimate=report.estimate,
            paper_bound=report.paper_bound,
        )
        passed = bool(report.holds)
    elif args.action == "sum":
        res = fs.summation(sym, args.N)
        for k, a_k in enumerate(coeffs):
            weight = abs(a_k) / (args.R ** k * math.factorial(k))
            rows.append((k, 0, weight, res.uniform_bound))
        payload.update(
            K_used=res.K_used,
            sup_abs=res.sup_abs,
            uniform_bound=res.uniform_bound,
            tail_estimate=res.tail_estimate,
        )
        passed = res.sup_abs <= res.uniform_bound * (1.0 + 1e-12)
    else:
        raise ValueError(f"unknown symbols action {args.action!r}")
    _write_csv(args.out, "symbols", ("k", "j", "ratio", "constant"), rows)
    _write_summary(
        args.out, "symbols", f"symbols {args.action}",
        _settings(args, ("action", "domain", "r", "R", "m", "K", "N", "coeffs", "out", "seed")),
        payload, passed,
    )
    return 0 if passed else 1


# ---------------------------------------------------------------------------
# geometry check


def _geometry_rows(geometry, which: str):
    N = 16
    if geometry.compact:
        base = [math.tan(t / 2.0) for t in (0.4, 0.9, 1.4, 1.9, 2.4)]
        density = N + 1.0  # raw kernel = (N+1)(1 + x ybar)^N
    else:
        base = [0.3, 0.8, 1.3]
        density = float(N)  # raw kernel = N exp(N x ybar)
    rows = []
    for x in base:
        y = 0.8 * x + 0.1
        label = f"x={x:.6g},y={y:.6g}"
        if which == "phi1":
            # polarized potential against the raw-kernel route
            value = abs(np.exp(N * geometry.two_phi_tilde(x, np.conj(y))))
            reference = abs(geometry.bergman_kernel(N, x, np.conj(y))) / density
        elif which == "psi":
            value = float(np.abs(geometry.psi_pointwise_norm(x, y, N)))
            half = 0.5 * np.real(
                geometry.two_phi_tilde(x, np.conj(x)) + geometry.two_phi_tilde(y, np.conj(y))
            )
            reference = float(np.exp(N * (np.real(geometry.two_phi_tilde(x, np.conj(y))) - half)))
        elif which == "bergman":
            # h-weighted diagonal: exactly the dimension-density constant
            weight = np.exp(-N * np.real(geometry.two_phi_tilde(x, np.conj(x))))
            value = float(np.real(geometry.bergman_kernel(N, x, np.conj(x))) * weight)
            reference = density
        else:
            raise ValueError(f"unknown check {which!r}")
        rows.append((which, label, value, reference, abs(value - reference)))
    return rows


def _cmd_geometry(args) -> int:
    if args.action != "check":
        raise ValueError(f"unknown geometry action {args.action!r}")
    geometry = _geometry(args.geometry)
    if args.which == "mixed-log":
        chk = geo.mixed_log_derivative_check()
        reference = (1.0 - math.log(2.0)) / (2.0 * math.log(2.0) ** 2)
        rows = [("mixed-log", "t=1", chk.remark_value, reference, abs(chk.remark_value - reference))]
    else:
        rows = _geometry_rows(geometry, args.which)
    worst = max(r[4] / max(abs(r[3]), 1.0) for r in rows)
    passed = worst < 1e-10
    _write_csv(args.out, "geometry", ("which", "point", "value", "reference", "error"), rows)
    _write_summary(
        args.out, "geometry", f"geometry check {args.which}",
        _settings(args, ("geometry", "which", "out", "seed")),
        {"worst_relative_error": worst}, passed,
    )
    return 0 if passed else 1


# ---------------------------------------------------------------------------
# phase expand


def _phase_pair(geometry, order: int):
    if geometry.compact:
        u = PowerSeries.variable(0, 2, order)
        ubar = PowerSeries.variable(1, 2, order)
        return -((1 + u * ubar).log())
    return PowerSeries.from_terms({(1, 1): -1.0}, 2, order)


def _cmd_phase(args) -> int:
    if args.action != "expand":
        raise ValueError(f"unknown phase action {args.action!r}")
    if args.K < 0 or args.degree < 0:
        raise ValueError("need K >= 0 and degree >= 0")
    geometry = _geometry(args.geometry)
    order = max(2 * args.K + 2, args.degree)
    phase = _phase_pair(geometry, order)
    rng = np.random.default_rng(args.seed)
    terms = {}
    for i in range(args.degree + 1):
        for j in range(args.degree + 1 - i):
            terms[(i, j)] = float(np.round(rng.uniform(-1.0, 1.0), 6))
    amplitude = PowerSeries.from_terms(terms, 2, order)
    wick = sp.wick_expand(phase, amplitude, args.K)
    morse = sp.morse_expand(phase, amplitude, args.K)
    rows = []
    worst = 0.0
    for k in range(args.K + 1):
        w, m = complex(wick.coeffs[k]), complex(morse.coeffs[k])
        err = abs(w - m)
        worst = max(worst, err)
        rows.append((k, w.real, w.imag, m.real, m.imag, err))
    passed = worst < 1e-8
    _write_csv(args.out, "phase", ("k", "wick_re", "wick_im", "morse_re", "morse_im", "error"), rows)
    _write_summary(
        args.out, "phase", "phase expand",
        _settings(args, ("geometry", "K", "degree", "out", "seed")),
        {"max_route_disagreement": worst}, passed,
    )
    return 0 if passed else 1


# ---------------------------------------------------------------------------
# compose and bergman


def _coefficient_rows(symbol, K: int, reference=None):
    """Per-(k, node) coefficient values; residual = deviation from reference."""
    rows = []
    worst = 0.0
    for i, node in enumerate(symbol.nodes):
        for k in range(K + 1):
            val = complex(symbol.jets[i].coeffs[k].constant_term())
            if reference is None:
                res = 0.0
            else:
                res = abs(val - complex(reference.jets[i].coeffs[k].constant_term()))
            worst = max(worst, res)
            rows.append((k, f"{node.real:.6g}", val.real, val.imag, res))
    return rows, worst


def _cmd_compose(args) -> int:
    if args.K < 0:
        raise ValueError("K must be >= 0")
    geometry = _geometry(args.geometry)
    build = cc.symbol_from_euclid_poly if geometry.compact else cc.symbol_from_plane_poly
    f = build(geometry, [_symbol_terms(args.f, geometry.compact)], order=args.order)
    g = build(geometry, [_symbol_terms(args.g, geometry.compact)], order=args.order)
    product = cc.sharp_product(f, g, args.K)
    # truncation stability: recompute with a deeper internal bracket cap
    control = cc.sharp_product(f, g, args.K, pair_cap=args.K + 6)
    rows, worst = _coefficient_rows(product, args.K, reference=control)
    passed = worst < 1e-8
    _write_csv(args.out, "compose", ("k", "basepoint", "coeff_re", "coeff_im", "residual"), rows)
    _write_summary(
        args.out, "compose", "compose",
        _settings(args, ("geometry", "K", "f", "g", "order", "out", "seed")),
        {"max_residual": worst}, passed,
    )
    return 0 if passed else 1


def _cmd_bergman(args) -> int:
    if args.K < 0 or args.Nmax < 1:
        raise ValueError("need K >= 0 and Nmax >= 1")
    geometry = _geometry(args.geometry)
    symbol = cc.bergman_symbol(geometry, K=args.K)
    rows, _ = _coefficient_rows(symbol, args.K)
    # residual column: spread of each coefficient across basepoints
    spreads = {}
    for k in range(args.K + 1):
        vals = [complex(symbol.jets[i].coeffs[k].constant_term()) for i in range(len(symbol.nodes))]
        mid = np.mean(vals)
        spreads[k] = max(abs(v - mid) for v in vals)
    rows = [(k, bp, re, im, spreads[k]) for (k, bp, re, im, _) in rows]
    matrix = qs.covariant_matrix(geometry, symbol, args.Nmax)
    defect = qs.operator_norm(np.asarray(matrix) - np.eye(matrix.dim))
    smallest = qs.invertibility_check(matrix)
    worst_spread = max(spreads.values())
    # the cutoff edge keeps the defect at e^{-cN}, so judge by the band
    passed = worst_spread < 1e-8 and 0.9 <= smallest <= 1.1
    _write_csv(args.out, "bergman", ("k", "basepoint", "coeff_re", "coeff_im", "residual"), rows)
    _write_summary(
        args.out, "bergman", "bergman",
        _settings(args, ("geometry", "K", "Nmax", "out", "seed")),
        {
            "identity_defect_at_Nmax": defect,
            "min_singular_at_Nmax": smallest,
            "max_coefficient_spread": worst_spread,
        },
        passed,
    )
    return 0 if passed else 1


# ---------------------------------------------------------------------------
# bergman-check and decay sweeps


def _partial_slope(ns, errs):
    live = [(n, e) for n, e in zip(ns, errs) if e > 0.0]
    if len(live) < 2:
        return None
    xs = np.array([n for n, _ in live], dtype=float)
    ys = np.log([e for _, e in live])
    return float(np.polyfit(xs, ys, 1)[0])


def _cmd_bergman_check(args) -> int:
    if args.Nmax < 8:
        raise ValueError("Nmax must be at least 8")
    geometry = _geometry(args.geometry)
    levels = list(range(8, args.Nmax + 1, 8))
    with ThreadPoolExecutor(max_workers=min(4, len(levels))) as pool:
        errors = list(pool.map(lambda N: qs.bergman_kernel_error(geometry, N), levels))
    rows = []
    for i, (N, err) in enumerate(zip(levels, errors)):
        rows.append((N, err, _partial_slope(levels[: i + 1], errors[: i + 1])))
    slope = _partial_slope(levels, errors)
    if slope is None:
        # the expansion is exact for this geometry; nothing decays
        slope = 0.0
        passed = max(errors) < 1e-10
    else:
        passed = slope < 0.0
    _write_csv(args.out, "bergman-check", ("N", "sup_error", "slope"), rows)
    _write_summary(
        args.out, "bergman-check", "bergman-check",
        _settings(args, ("geometry", "Nmax", "out", "seed")),
        {"slope": slope, "max_sup_error": max(errors)}, passed,
    )
    return 0 if passed else 1


def _cmd_decay(args) -> int:
    geometry = _geometry(args.geometry)
    levels = _parse_n_list(args.N_list)
    terms = _symbol_terms(args.f, geometry.compact)
    region = qs.parse_region(args.V)
    cutoff = args.cutoff

    def job(N):
        matrix = qs.contravariant_matrix(geometry, terms, N, cutoff)
        pairs = qs.eigenpairs(matrix)
        ev, vec = min(pairs, key=lambda p: abs(p[0] - args.E))
        mass = qs.forbidden_mass(geometry, N, vec, region, cutoff)
        return float(ev), float(mass)

    with ThreadPoolExecutor(max_workers=min(4, len(levels))) as pool:
        results = list(pool.map(job, levels))
    rows = []
    table = []
    for i, (N, (ev, mass)) in enumerate(zip(levels, results)):
        table.append((N, mass))
        partial = None
        if len([m for _, m in table if m > 0]) >= 4:
            partial = qs.decay_rate_fit(table)[0]
        rows.append((N, ev, mass, partial))
    rate, quality = qs.decay_rate_fit(table)
    passed = quality > 0.9
    _write_csv(args.out, "decay", ("N", "lambda", "mass", "c_fit_partial"), rows)
    _write_summary(
        args.out, "decay", "decay",
        _settings(args, ("geometry", "f", "E", "V", "N_list", "cutoff", "out", "seed")),
        {"rate": rate, "fit_quality": quality}, passed,
    )
    return 0 if passed else 1


# ---------------------------------------------------------------------------
# parser


def _common() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--out", default=".", help="output directory for CSV/JSON artifacts")
    parent.add_argument("--config", default=None, help="flat key = value config file")
    parent.add_argument("--seed", type=int, default=0, help="seed for randomized sweeps")
    return parent


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="toeplitz-forge", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True)
    parent = _common()

    p = subs.add_parser("lemmas", parents=[parent], help="verify combinatorial bound families")
    p.add_argument("action", choices=["verify"])
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--m-max", type=int, default=16, dest="m_max")
    p.add_argument("--ell-max", type=int, default=40, dest="ell_max")
    p.set_defaults(func=_cmd_lemmas)

    p = subs.add_parser("symbols", parents=[parent], help="symbol-class norm/product/inverse/sum checks")
    p.add_argument("action", choices=["norm", "product", "inverse", "sum"])
    p.add_argument("--domain", default="interval:-0.5,0.5")
    p.add_argument("--r", type=float, default=2.0)
    p.add_argument("--R", type=float, default=2.0)
    p.add_argument("--m", type=int, default=4)
    p.add_argument("--K", type=int, default=6)
    p.add_argument("--N", type=int, default=40)
    p.add_argument("--coeffs", default="factorial")
    p.set_defaults(func=_cmd_symbols)

    p = subs.add_parser("geometry", parents=[parent], help="closed-form geometry cross-checks")
    p.add_argument("action", choices=["check"])
    p.add_argument("--geometry", default="sphere")
    p.add_argument("--which", choices=["phi1", "psi", "bergman", "mixed-log"], default="bergman")
    p.set_defaults(func=_cmd_geometry)

    p = subs.add_parser("phase", parents=[parent], help="stationary-phase route comparison")
    p.add_argument("action", choices=["expand"])
    p.add_argument("--geometry", default="plane")
    p.add_argument("--K", type=int, default=3)
    p.add_argument("--degree", type=int, default=3)
    p.set_defaults(func=_cmd_phase)

    p = subs.add_parser("compose", parents=[parent], help="sharp product with stability residuals")
    p.add_argument("--geometry", default="sphere")
    p.add_argument("--K", type=int, default=2)
    p.add_argument("--f", default="x3")
    p.add_argument("--g", default="poly:0,0,0=1.0;0,0,1=-0.333")
    p.add_argument("--order", type=int, default=8)
    p.set_defaults(func=_cmd_compose)

    p = subs.add_parser("bergman", parents=[parent], help="projector symbol coefficients")
    p.add_argument("--geometry", default="sphere")
    p.add_argument("--K", type=int, default=3)
    p.add_argument("--Nmax", type=int, default=32)
    p.set_defaults(func=_cmd_bergman)

    p = subs.add_parser("bergman-check", parents=[parent], help="kernel-expansion error sweep")
    p.add_argument("--geometry", default="sphere")
    p.add_argument("--Nmax", type=int, default=64)
    p.set_defaults(func=_cmd_bergman_check)

    p = subs.add_parser("decay", parents=[parent], help="eigenvector forbidden-region decay sweep")
    p.add_argument("--geometry", default="sphere")
    p.add_argument("--f", default="x3")
    p.add_argument("--E", type=float, default=0.0)
    p.add_argument("--V", default="x3 >= 1/2")
    p.add_argument("--N-list", default="8,12,16,20,24,28,32", dest="N_list")
    p.add_argument("--cutoff", type=int, default=None)
    p.set_defaults(func=_cmd_decay)

    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    sub = next(
        choice
        for action in parser._actions
        if isinstance(action, argparse._SubParsersAction)
        for name, choice in action.choices.items()
        if name == args.command
    )
    try:
        _apply_config(args, sub, argv)
        return args.func(args)
    except SystemExit:
        raise
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ArithmeticError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
