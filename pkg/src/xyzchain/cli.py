"""Command-line driver: ``xyzchain <command> [options]``.

Exit status is 0 when every internal certification passes, 1 on a
numerical failure and 2 on invalid input.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import bae, thermo
from .elliptic import DomainError, EllipticParams
from .model import SpinChainModel, Twist
from .spectrum import LambdaEvaluator, SpectrumError, diagonalize, ground_tower, select_states
from .zeros import ZeroError, classify, energy_from_zeros, find_zeros

DIGITS = 12
EXIT_OK, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2


class UsageError(ValueError):
    pass


def parse_complex(text: str) -> complex:
    """Parse ``"0.7"``, ``"0.4i"``, ``"i"`` or ``"0.1+0.2i"``."""
    s = text.strip().replace(" ", "").lower().replace("j", "i")
    if s.endswith("i"):
        body = s[:-1]
        # split at the last sign that is not part of an exponent
        cut = max((k for k in range(1, len(body)) if body[k] in "+-" and body[k - 1] != "e"), default=0)
        re_txt, im_txt = (body[:cut], body[cut:]) if cut else ("", body)
        if im_txt in ("", "+"):
            im_txt = "1"
        elif im_txt == "-":
            im_txt = "-1"
        try:
            return complex(float(re_txt) if re_txt else 0.0, float(im_txt))
        except ValueError as exc:
            raise UsageError(f"cannot parse complex literal {text!r}") from exc
    try:
        return complex(float(s), 0.0)
    except ValueError as exc:
        raise UsageError(f"cannot parse complex literal {text!r}") from exc


def parse_sweep(text: str) -> list[float]:
    """``start:stop:step`` inclusive of ``stop`` within half a step."""
    try:
        start, stop, step = (float(x) for x in text.split(":"))
    except ValueError as exc:
        raise UsageError(f"sweep must be start:stop:step, got {text!r}") from exc
    if step <= 0 or stop < start:
        raise UsageError(f"empty sweep {text!r}")
    n = int(math.floor((stop - start) / step + 0.5))
    return [round(start + i * step, DIGITS) for i in range(n + 1)]


def parse_sizes(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x]
    except ValueError as exc:
        raise UsageError(f"sizes must be a comma list of integers, got {text!r}") from exc


def rounded(obj, digits=DIGITS):
    """Round every float in a JSON-like structure to ``digits`` significant digits."""
    if isinstance(obj, float):
        return float(f"{obj:.{digits}g}") if math.isfinite(obj) else obj
    if isinstance(obj, complex):
        return [rounded(obj.real, digits), rounded(obj.imag, digits)]
    if isinstance(obj, (np.floating, np.integer)):
        return rounded(obj.item(), digits)
    if isinstance(obj, dict):
        return {k: rounded(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [rounded(v, digits) for v in obj]
    return obj


def _emit(text: str, path: str | None):
    if path in (None, "-"):
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")


def _policy(args) -> thermo.KmaxPolicy:
    if getattr(args, "kmax", "auto") in (None, "auto"):
        return thermo.KmaxPolicy()
    return thermo.KmaxPolicy(cap=int(args.kmax))


def _model(args) -> SpinChainModel:
    p = EllipticParams(1j * args.tau, parse_complex(args.eta))
    return SpinChainModel(args.N, p, Twist.parse(args.twist))


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_spectrum(args) -> int:
    model = _model(args)
    recs = diagonalize(model, n_levels=args.levels)
    rows = [{"index": r.index, "energy": r.energy, "twist_charge": r.twist_charge,
             "group": r.degeneracy_group} for r in recs[: args.levels or len(recs)]]
    if args.format == "csv":
        buf = io.StringIO()
        buf.write("index,energy,twist_charge,group\n")
        for r in rows:
            buf.write(f"{r['index']},{rounded(r['energy'])!r},{r['twist_charge']},{r['group']}\n")
        _emit(buf.getvalue(), args.out)
    else:
        _emit(json.dumps(rounded({"N": args.N, "levels": rows}), indent=1), args.out)
    return EXIT_OK


def cmd_zeros(args) -> int:
    model = _model(args)
    recs = diagonalize(model, n_levels=24)
    tower = ground_tower(model, recs)
    rec = select_states(recs, args.state, tower=tower)
    zset = find_zeros(LambdaEvaluator(model, rec.state), state_label=args.state)
    report = classify(zset, model)
    e_zeros = energy_from_zeros(zset, model)
    data = json.loads(zset.to_json(DIGITS))
    data["energy_ed"] = rec.energy
    data["energy_zeros"] = e_zeros
    data["census"] = report.census
    data["balance_ok"] = report.balance_ok
    data["integer_relation"] = report.integer_relation["holds"]
    _emit(json.dumps(rounded(data), indent=1), args.out)
    if args.out not in (None, "-"):
        root, _ = os.path.splitext(args.out)
        lines = [f"{rounded(float(w.real))!r} {rounded(float(w.imag))!r}" for w in zset.display]
        _emit("# Re Im (display coordinates)\n" + "\n".join(lines), root + ".dat")
    ok = abs(e_zeros - rec.energy) <= 1e-6 * max(1.0, abs(rec.energy))
    if not ok:
        print(f"energy mismatch: zeros {e_zeros!r} vs ED {rec.energy!r}", file=sys.stderr)
    return EXIT_OK if ok else EXIT_NUMERIC


def _sweep_point(job):
    tau, eta, twists, parities, cap = job
    return thermo.sweep([tau], [eta], twists, parities, thermo.KmaxPolicy(cap=cap))


def cmd_thermo(args) -> int:
    imag = args.regime == "imag"
    taus = parse_sweep(args.tau_sweep) if args.tau_sweep else [args.tau]
    if args.eta_sweep:
        etas = [complex(0, v) if imag else complex(v, 0) for v in parse_sweep(args.eta_sweep)]
    elif args.eta is not None:
        etas = [parse_complex(args.eta)]
    else:
        raise UsageError("thermo needs --eta or --eta-sweep")
    for eta in etas:
        if (eta.imag != 0) != imag:
            raise UsageError(f"eta {eta} does not belong to the {args.regime} regime")
    jobs = []
    for t in taus:
        for e in etas:
            EllipticParams(1j * t, e)  # validate before any work starts
            jobs.append((1j * t, e, args.twists.split(","), ("even", "odd"), _policy(args).cap))
    if args.workers > 1:
        with ProcessPoolExecutor(args.workers) as ex:
            chunks = list(ex.map(_sweep_point, jobs))
    else:
        chunks = [_sweep_point(j) for j in jobs]
    rows = [r for c in chunks for r in c]
    buf = io.StringIO()
    thermo.write_sweep_csv(rows, buf, DIGITS)
    _emit(buf.getvalue(), args.out)
    if args.plot_prefix:
        key = "tau_im" if args.tau_sweep else ("eta_im" if imag else "eta_re")
        curves = {}
        for r in rows:
            curves.setdefault((r["twist"], r["parity"]), []).append((r[key], r["gap"]))
        for (tw, par), pts in curves.items():
            body = "\n".join(f"{rounded(x)!r} {rounded(y)!r}" for x, y in pts)
            _emit(f"# {key} gap\n{body}", f"{args.plot_prefix}_gap_{tw}_{par}.dat")
    return EXIT_OK


def cmd_compare(args) -> int:
    p = EllipticParams(1j * args.tau, parse_complex(args.eta))
    sizes = parse_sizes(args.N)
    energies = {}
    for n in sizes:
        recs = diagonalize(SpinChainModel(n, p, Twist.parse(args.twist)), n_levels=1)
        energies[n] = recs[0].energy
    parities = {n % 2 for n in sizes}
    if len(parities) != 1:
        raise UsageError("compare needs sizes of a single parity")
    fit = thermo.extrapolate(energies, "odd" if parities.pop() else "even")
    e_inf = thermo.energy_density(p, _policy(args))
    rel = abs(fit.slope - e_inf) / abs(e_inf)
    table = {
        "rows": [{"N": n, "E": e, "E_per_site": e / n} for n, e in sorted(energies.items())],
        "fit": {"slope": fit.slope, "intercept": fit.intercept, "curvature": fit.curvature,
                "residual": fit.residual},
        "energy_density": e_inf,
        "relative_difference": rel,
        "rtol": args.rtol,
    }
    if args.format == "csv":
        buf = io.StringIO()
        buf.write("N,E,E_per_site,slope,energy_density\n")
        for row in table["rows"]:
            buf.write(f"{row['N']},{rounded(row['E'])!r},{rounded(row['E_per_site'])!r},"
                      f"{rounded(fit.slope)!r},{rounded(e_inf)!r}\n")
        _emit(buf.getvalue(), args.out)
    else:
        _emit(json.dumps(rounded(table), indent=1), args.out)
    return EXIT_OK if rel < args.rtol else EXIT_NUMERIC


def cmd_bae(args) -> int:
    point = bae.degenerate_eta(args.L, args.K, args.N, args.N1, args.twist, 1j * args.tau)
    params = point.params()
    model = SpinChainModel(point.N, params, point.twist)
    recs = diagonalize(model)
    rng = np.random.default_rng(args.seed)
    probes = [complex(a, b) for a, b in rng.uniform(-0.3, 0.3, (20, 2))]
    ed = [np.array([LambdaEvaluator(model, r.state)(u) for u in probes]) for r in recs]
    seeds = [list(rng.normal(0, 0.3, point.N1) + 1j * rng.normal(0, 0.3, point.N1))
             for _ in range(args.seeds)] if point.N1 else [[]]
    states, failures = bae.solve_many(point, seeds, params=params)
    out = []
    for st in states:
        tq = np.array([bae.tq_lambda(u, st, params) for u in probes])
        errs = [float(np.max(np.abs(tq - e)) / np.max(np.abs(e))) for e in ed]
        best = int(np.argmin(errs))
        out.append({"selection_index": st.selection_index, "phi": st.phi,
                    "roots": [complex(z) for z in st.roots], "residual": st.residual,
                    "matched_level": best if errs[best] < 1e-6 else None,
                    "match_error": errs[best], "energy": recs[best].energy})
    matched = sorted({s["matched_level"] for s in out if s["matched_level"] is not None})
    doc = {"point": point.to_dict(), "states": out, "matched_levels": matched,
           "levels": len(recs), "failures": len(failures)}
    _emit(json.dumps(rounded(doc), indent=1), args.out)
    return EXIT_OK if matched else EXIT_NUMERIC


def cmd_identities(args) -> int:
    from .identities import battery

    results = battery(seed=args.seed, quick=args.quick)
    ok = True
    for r in results:
        ok &= r.passed
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.residual:.3e} (tol {r.tol:.0e})")
    print("all passed" if ok else "failures present")
    return EXIT_OK if ok else EXIT_NUMERIC


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------


def _common(p, with_state=False):
    p.add_argument("--tau", type=float, required=True, help="Im(tau)")
    p.add_argument("--eta", required=True, help="crossing parameter, e.g. 0.7 or 0.4i")
    p.add_argument("--N", type=int, required=True, help="number of sites")
    p.add_argument("--twist", default="p", help="p/0, x, y or z")
    if with_state:
        p.add_argument("--state", default="ground", choices=["ground", "first"])
    p.add_argument("--out", default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="xyzchain", description="XYZ chain spectra, zeros and thermodynamics")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", help="low-lying levels by exact diagonalization")
    _common(p)
    p.add_argument("--levels", type=int, default=None)
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("zeros", help="zeros of Lambda(u) for one eigenstate")
    _common(p, with_state=True)
    p.set_defaults(func=cmd_zeros)

    p = sub.add_parser("thermo", help="thermodynamic-limit sweep as CSV")
    p.add_argument("--regime", choices=["real", "imag"], required=True)
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--tau-sweep", default=None)
    p.add_argument("--eta", default=None)
    p.add_argument("--eta-sweep", default=None, help="start:stop:step (Im part in the imag regime)")
    p.add_argument("--twists", default="p,x,y,z")
    p.add_argument("--kmax", default="auto")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--plot-prefix", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_thermo)

    p = sub.add_parser("compare", help="ED ladder extrapolation against the energy density")
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--eta", required=True)
    p.add_argument("--N", required=True, help="comma list, e.g. 6,8,10,12")
    p.add_argument("--twist", default="p")
    p.add_argument("--rtol", type=float, default=1e-2)
    p.add_argument("--kmax", default="auto")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("bae", help="solve the Bethe equations at a degenerate point")
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--N1", type=int, required=True)
    p.add_argument("--twist", default="p")
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_bae)

    p = sub.add_parser("identities", help="elliptic and integrability identity battery")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--quick", action="store_true")
    p.set_defaults(func=cmd_identities)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if getattr(args, "tau", None) is None and getattr(args, "tau_sweep", None) is None \
            and args.command == "thermo":
        ap.error("thermo needs --tau or --tau-sweep")
    try:
        return args.func(args)
    except (ZeroError, SpectrumError, thermo.ConvergenceError, bae.BaeError, ArithmeticError,
            np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, DomainError, ValueError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
