"""Command-line front end: config ingestion, spectra/rates/scans/brute-force
runs, and the eight-cell closed-form comparison table.

Design rules, enforced here rather than hoped for:

* deterministic output — identical config and code version produce
  byte-identical CSV/JSON (sorted keys, fixed float format, no wall-clock);
* every output file carries a manifest echoing the full parameter set and
  any validity flags;
* config files are flat ``key = value`` text; errors name the file and line.

Frequencies may be given in absolute units by setting ``unit_scale`` to the
trap frequency in those units; everything is divided by it on ingestion.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import __version__
from .bloch import bloch_coefficients
from .cooling import (CoolingResult, effective_threads, imperfection_scan,
                      rates_from_spectrum, table1)
from .params import SystemParams
from .presets import DRIVE_RULES, PRESETS, preset_names, with_drive
from .spectra import full_spectrum

_PARAM_KEYS = ("g", "kappa", "Omega", "Delta", "Delta_c", "N", "eta", "eta_c", "nu")
_FREQ_KEYS = ("g", "kappa", "Omega", "Delta", "Delta_c", "nu")


def _as_bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# every recognized config/--set key and its type
_RUN_KEYS = {
    "unit_scale": float,
    "omega_min": float, "omega_max": float, "omega_points": int,
    "delta_nu_min": float, "delta_nu_max": float, "delta_nu_points": int,
    "n_cav_levels": int, "n_mot_levels": int, "n_init": int, "dim_cap": int,
    "rtol": float, "atol": float, "rel_tol": float,
    "t_final": float, "n_samples": int,
    "mode": str, "include_interference": _as_bool,
    "threads": int, "seed": int, "output": str,
}
_ALL_KEYS = dict({k: float for k in _PARAM_KEYS}, **_RUN_KEYS)


class ConfigError(Exception):
    """Invalid configuration; message carries file:line where applicable."""


def _coerce(key, text, where):
    try:
        return _ALL_KEYS[key](text)
    except ValueError as err:
        raise ConfigError(f"{where}: invalid value for {key!r}: {err}") from None


def parse_config_file(path):
    """Read a flat key=value config; '#' starts a comment. Unknown keys and
    malformed values are reported with file and line number."""
    entries = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as err:
        raise ConfigError(f"{path}: {err.strerror or err}") from None
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(
                f"{path}:{lineno}: expected 'key = value', got {raw.rstrip()!r}")
        key, text = (s.strip() for s in line.split("=", 1))
        if key not in _ALL_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        entries[key] = _coerce(key, text, f"{path}:{lineno}")
    return entries


def _apply_set_flags(entries, set_flags):
    for item in set_flags or ():
        if "=" not in item:
            raise ConfigError(f"--set {item!r}: expected key=value")
        key, text = (s.strip() for s in item.split("=", 1))
        if key not in _ALL_KEYS:
            raise ConfigError(f"--set: unknown key {key!r}")
        entries[key] = _coerce(key, text, f"--set {key}")
    return entries


def build_config(args):
    """Merge preset < config file < --set flags into params + run options."""
    base = {}
    if args.preset:
        if args.preset not in PRESETS:
            raise ConfigError(
                f"unknown preset {args.preset!r}; available: "
                + ", ".join(preset_names()))
        base.update(PRESETS[args.preset])
    entries = {}
    if args.config:
        entries.update(parse_config_file(args.config))
    _apply_set_flags(entries, getattr(args, "set", None))

    run = {k: v for k, v in entries.items() if k in _RUN_KEYS}
    base.update({k: v for k, v in entries.items() if k in _PARAM_KEYS})

    scale = run.get("unit_scale", 1.0)
    if scale <= 0.0:
        raise ConfigError("unit_scale must be positive")
    if scale != 1.0:
        for k in _FREQ_KEYS:
            if k in base:
                base[k] = base[k] / scale

    missing = [k for k in ("g", "kappa", "Omega", "Delta", "Delta_c")
               if k not in base]
    if missing:
        raise ConfigError(
            "missing required parameters: " + ", ".join(missing)
            + " (give a --preset, a --config file, or --set flags)")
    try:
        p = SystemParams(**base)
    except ValueError as err:
        raise ConfigError(f"invalid parameters: {err}") from None
    return p, run


# ---------------------------------------------------------------------------
# emission helpers

def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".16e")


def write_csv(path, columns, header_lines=()):
    """columns: ordered list of (name, 1-d array). 17-significant-digit
    scientific notation for exact round-trips."""
    names = [name for name, _ in columns]
    arrays = [np.atleast_1d(np.asarray(a)) for _, a in columns]
    n = arrays[0].shape[0]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write(",".join(names) + "\n")
        for i in range(n):
            fh.write(",".join(_fmt(col[i]) for col in arrays) + "\n")


def write_json(path, payload):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _manifest(command, p, run, flags, extra=None):
    man = {
        "command": command,
        "version": __version__,
        "params": p.as_dict(),
        "flags": sorted(flags),
        "unit_scale": run.get("unit_scale", 1.0),
    }
    if "seed" in run:
        man["seed"] = run["seed"]
    if extra:
        man.update(extra)
    return man


def _manifest_header_lines(man):
    # compact echo for the CSV header; the JSON twin holds the full record
    pieces = [f"{k}={_fmt(v)}" for k, v in sorted(man["params"].items())]
    return [
        f"cavicool {man['version']} {man['command']}",
        " ".join(pieces),
        "flags: " + (",".join(man["flags"]) if man["flags"] else "none"),
    ]


def _result_payload(res: CoolingResult):
    out = {
        "A_minus": res.A_minus, "A_plus": res.A_plus, "W": res.W,
        "n_final": res.n_final, "route": res.route,
        "flags": sorted(res.flags),
        "params": res.params.as_dict(),
        "regime": {
            "drive": res.regime.drive,
            "bad_cavity": res.regime.bad_cavity,
            "bad_cavity_ratio": res.regime.bad_cavity_ratio,
            "casc_limit": res.regime.casc_limit,
            "nabla_g_limit": res.regime.nabla_g_limit,
        },
    }
    if res.components:
        out["components"] = {k: res.components[k] for k in sorted(res.components)}
    return out


def _print_rates(res: CoolingResult, label=""):
    if label:
        print(f"point: {label}")
    print("params: " + " ".join(
        f"{k}={v:g}" for k, v in sorted(res.params.as_dict().items())))
    print(f"A_minus = {res.A_minus:.9e}")
    print(f"A_plus  = {res.A_plus:.9e}")
    print(f"W       = {res.W:.9e}")
    if res.n_final is not None:
        print(f"n_final = {res.n_final:.9e}")
    else:
        print("n_final = n/a (net heating)")
    print(f"regime: drive={res.regime.drive} bad_cavity={res.regime.bad_cavity} "
          f"(g*sqrt(N+1)/kappa = {res.regime.bad_cavity_ratio:.3g})")
    print("flags: " + (", ".join(sorted(res.flags)) if res.flags else "none"))


# ---------------------------------------------------------------------------
# subcommands

def cmd_spectrum(args):
    p, run = build_config(args)
    dp_bar = math.hypot(p.Delta, p.Omega)
    gamma_n = bloch_coefficients(p).tilde_gamma_N
    default_span = max(2.0 * p.nu, abs(p.Delta_c - p.Delta) + dp_bar + 2.0 * p.kappa)
    lo = run.get("omega_min", -default_span)
    hi = run.get("omega_max", +default_span)
    npts = run.get("omega_points", 1201)
    if npts < 2 or not hi > lo:
        raise ConfigError("spectrum grid is empty: need omega_max > omega_min "
                          "and omega_points >= 2")
    omega = np.linspace(lo, hi, npts)
    res = full_spectrum(p, omega,
                        include_interference=run.get("include_interference", True))

    out = run.get("output") or args.output or "spectrum"
    man = _manifest("spectrum", p, run, res.flags, extra={
        "preset": args.preset, "grid": {"omega_min": lo, "omega_max": hi,
                                        "points": npts},
        "sidebands": {
            "nu": p.nu, "s_i_plus": res.s_i_plus, "s_i_minus": res.s_i_minus,
            "total_plus": res.total_plus, "total_minus": res.total_minus},
        "gamma_N": gamma_n,
    })
    write_csv(out + ".csv",
              [("omega", res.omega), ("S_total", res.s_total),
               ("S_Omega", res.s_omega), ("S_g", res.s_g),
               ("S_I_flag", res.s_i_flag.astype(int))],
              header_lines=_manifest_header_lines(man))
    man["data"] = {
        "omega": res.omega.tolist(), "S_total": res.s_total.tolist(),
        "S_Omega": res.s_omega.tolist(), "S_g": res.s_g.tolist(),
        "S_I_flag": res.s_i_flag.astype(int).tolist(),
    }
    write_json(out + ".json", man)
    i_peak = int(np.argmax(res.s_total))
    print(f"wrote {out}.csv and {out}.json "
          f"({npts} points, peak S_total at omega={res.omega[i_peak]:.6g})")
    return 0


def cmd_rates(args):
    p, run = build_config(args)
    res = rates_from_spectrum(
        p, include_interference=run.get("include_interference", True))
    _print_rates(res, label=args.preset or "")
    if args.table1:
        print()
        _print_table1(table1())
    out = run.get("output") or args.output
    if out:
        man = _manifest("rates", p, run, res.flags,
                        extra={"preset": args.preset,
                               "result": _result_payload(res)})
        write_json(out + ".json", man)
        print(f"wrote {out}.json")
    return 0


def _scan_variants(args, p):
    if args.N and args.Omega:
        raise ConfigError("--N and --Omega cannot be combined in one scan")
    rule = DRIVE_RULES.get(args.preset or "")
    if args.N:
        vals = _parse_list(args.N, "--N")
        return [(f"N={v:g}", p.replace(N=v)) for v in vals]
    if args.Omega:
        vals = _parse_list(args.Omega, "--Omega")
        return [(f"Omega={v:g}", with_drive(p, v, rule)) for v in vals]
    return [("", p)]


def _parse_list(text, flag):
    try:
        vals = [float(s) for s in text.split(",") if s.strip()]
    except ValueError as err:
        raise ConfigError(f"{flag}: {err}") from None
    if not vals:
        raise ConfigError(f"{flag}: empty list")
    return vals


def cmd_scan(args):
    p, run = build_config(args)
    gamma_n = bloch_coefficients(p).tilde_gamma_N
    lo = run.get("delta_nu_min", -3.0 * gamma_n)
    hi = run.get("delta_nu_max", +3.0 * gamma_n)
    npts = run.get("delta_nu_points", 61)
    if npts < 2 or not hi > lo:
        raise ConfigError("scan grid is empty: need delta_nu_max > delta_nu_min "
                          "and delta_nu_points >= 2")
    grid = np.linspace(lo, hi, npts)
    mode = run.get("mode", "anharmonic")
    threads = run.get("threads", args.threads)

    variants = _scan_variants(args, p)
    columns = [("delta_nu", grid)]
    curves = {}
    all_flags = set()
    for label, pv in variants:
        scan = imperfection_scan(
            pv, grid, mode=mode,
            include_interference=run.get("include_interference", True),
            threads=threads)
        suffix = f"[{label}]" if label else ""
        columns.append((f"W{suffix}", scan.W))
        columns.append((f"n_final{suffix}", scan.n_final))
        curves[label or "base"] = {
            "params": pv.as_dict(),
            "W": scan.W.tolist(), "n_final": scan.n_final.tolist(),
            "A_minus": scan.A_minus.tolist(), "A_plus": scan.A_plus.tolist(),
        }
        for r in scan.results:
            all_flags.update(r.flags)

    out = run.get("output") or args.output or "scan"
    man = _manifest("scan", p, run, all_flags, extra={
        "preset": args.preset, "mode": mode,
        "grid": {"delta_nu_min": lo, "delta_nu_max": hi, "points": npts},
        "gamma_N": gamma_n,
        "threads": effective_threads(threads),
    })
    write_csv(out + ".csv", columns, header_lines=_manifest_header_lines(man))
    man["curves"] = curves
    write_json(out + ".json", man)
    print(f"wrote {out}.csv and {out}.json "
          f"({len(variants)} curve(s) x {npts} points)")
    return 0


def cmd_oracle(args):
    from . import oracle as orc

    p, run = build_config(args)
    rtol = run.get("rtol", 1e-6)
    n_init = run.get("n_init", 3)
    dim_cap = run.get("dim_cap", 50_000)
    n_samples = run.get("n_samples", 140)
    t_final = run.get("t_final")

    if args.dims:
        try:
            dims = tuple(int(s) for s in args.dims.split(","))
        except ValueError:
            raise ConfigError(f"--dims: expected integers, got {args.dims!r}") from None
        if len(dims) != 3 or dims[0] != 2:
            raise ConfigError("--dims must be '2,<cavity levels>,<motion levels>'")
        levels = [(dims[1], dims[2])]
    elif "n_cav_levels" in run or "n_mot_levels" in run:
        from .oracle import default_levels
        nc0, nm0 = default_levels(p, n_init)
        levels = [(run.get("n_cav_levels", nc0), run.get("n_mot_levels", nm0))]
    else:
        levels = None

    record = orc.convergence_sweep(
        p, levels=levels, n_init=n_init, rtol=rtol,
        n_samples=n_samples, t_final=t_final, dim_cap=dim_cap)

    print(f"spectral prediction: W = {record.spectral_W:.6e}, "
          f"n_final = {record.spectral_n0 if record.spectral_n0 is not None else math.nan:.6e}")
    for e in record.entries:
        print(f"  levels (2,{e.levels[0]},{e.levels[1]}) "
              f"liouville={e.liouville_dim}: W = {e.W:.6e}, n0 = {e.n0:.6e}, "
              f"substeps={e.substeps}"
              + (f", flags: {', '.join(e.flags)}" if e.flags else ""))
    for i, (dw, dn) in enumerate(record.deltas):
        print(f"  delta level {i}->{i + 1}: |dW|/W = {dw:.3e}, |dn0|/n0 = {dn:.3e}")

    out = run.get("output") or args.output
    payload = _manifest("oracle", p, run, set(), extra={
        "preset": args.preset,
        "result": {
            "converged": record.converged, "W": record.W, "n0": record.n0,
            "t_final": record.t_final, "n_samples": record.n_samples,
            "spectral_W": record.spectral_W, "spectral_n0": record.spectral_n0,
            "entries": [
                {"levels": list(e.levels), "liouville_dim": e.liouville_dim,
                 "W": e.W, "n0": e.n0, "W_route": e.W_route,
                 "W_fit": e.W_fit, "n0_route": e.n0_route,
                 "residual_rms": e.residual_rms,
                 "top_mot_max": e.top_mot_max, "top_cav_max": e.top_cav_max,
                 "substeps": e.substeps, "flags": sorted(e.flags)}
                for e in record.entries],
            "deltas": [list(d) for d in record.deltas],
        },
    })
    if out:
        write_json(out + ".json", payload)
        print(f"wrote {out}.json")

    bad = {"trace-drift", "hermiticity-loss", "nonpositive-state",
           "truncation-unhealthy"}
    violations = bad.intersection(record.entries[-1].flags)
    if violations:
        print("physicality violation: " + ", ".join(sorted(violations)),
              file=sys.stderr)
        print(json.dumps(payload["result"], indent=2, sort_keys=True),
              file=sys.stderr)
        return 4
    if len(record.entries) > 1 and not record.converged:
        print("truncation sweep did not converge", file=sys.stderr)
        return 3
    if record.converged:
        dev = abs(record.W - record.spectral_W) / abs(record.spectral_W)
        label = "eigenvalue" if record.entries[-1].W_route == "eigen" else "fitted"
        print(f"converged; {label} W deviates {100 * dev:.2f}% from spectral")
    return 0


def _print_table1(rows):
    head = (f"{'cell':28s} {'W closed':>12s} {'W spectral':>12s} {'dev':>8s} "
            f"{'n0 closed':>12s} {'n0 spectral':>12s} {'dev':>8s} {'tol':>5s}  ok")
    print(head)
    print("-" * len(head))
    for r in rows:
        if r.params is None:
            print(f"{r.cell:28s} {'—':>12s} {'—':>12s} {'—':>8s} "
                  f"{'—':>12s} {'—':>12s} {'—':>8s} {'—':>5s}  n/a ({r.note})")
            continue
        ok = "yes" if r.within_tolerance else "NO"
        print(f"{r.cell:28s} {r.closed.W:12.4e} {r.spectral.W:12.4e} "
              f"{r.rel_dev_W:8.2%} {r.closed.n_final:12.4e} "
              f"{r.spectral.n_final:12.4e} {r.rel_dev_n0:8.2%} "
              f"{r.tolerance:5.0%}  {ok}")


def cmd_table1(args):
    rows = table1()
    _print_table1(rows)
    out = args.output
    if out:
        payload = {
            "command": "table1", "version": __version__,
            "rows": [
                {"cell": r.cell, "mechanism": r.mechanism, "drive": r.drive,
                 "limit": r.limit,
                 "params": r.params.as_dict() if r.params else None,
                 "W_closed": r.closed.W if r.closed else None,
                 "W_spectral": r.spectral.W if r.spectral else None,
                 "n0_closed": r.closed.n_final if r.closed else None,
                 "n0_spectral": r.spectral.n_final if r.spectral else None,
                 "rel_dev_W": r.rel_dev_W, "rel_dev_n0": r.rel_dev_n0,
                 "tolerance": r.tolerance,
                 "within_tolerance": r.within_tolerance, "note": r.note}
                for r in rows],
        }
        write_json(out + ".json", payload)
        print(f"wrote {out}.json")
    return 0


# ---------------------------------------------------------------------------

def _add_common(sub):
    sub.add_argument("--config", help="flat key=value config file")
    sub.add_argument("--preset", help="named operating point "
                     f"({', '.join(preset_names())})")
    sub.add_argument("--set", action="append", metavar="KEY=VALUE",
                     help="override a single config key (repeatable)")
    sub.add_argument("--output", "-o", help="output basename (no extension)")


def make_parser():
    ap = argparse.ArgumentParser(
        prog="cavicool",
        description="Cavity-assisted cooling of a trapped dipole: spectra, "
                    "rates, scans, and brute-force cross-checks.")
    ap.add_argument("--version", action="version", version=__version__)
    sp = ap.add_subparsers(dest="command", required=True)

    s = sp.add_parser("spectrum", help="force-fluctuation spectrum on a grid")
    _add_common(s)
    s.set_defaults(fn=cmd_spectrum)

    s = sp.add_parser("rates", help="cooling/heating rates at one point")
    _add_common(s)
    s.add_argument("--table1", action="store_true",
                   help="append the eight-cell closed-form comparison")
    s.set_defaults(fn=cmd_rates)

    s = sp.add_parser("scan", help="sideband-mismatch scan W(delta_nu)")
    _add_common(s)
    s.add_argument("--N", help="comma list of thermal occupations (one curve each)")
    s.add_argument("--Omega", help="comma list of drive amplitudes (one curve each)")
    s.add_argument("--threads", type=int, default=None,
                   help="worker threads (CAVICOOL_THREADS caps)")
    s.set_defaults(fn=cmd_scan)

    s = sp.add_parser("oracle", help="brute-force evolution + exponential fit")
    _add_common(s)
    s.add_argument("--dims", help="explicit truncation '2,<cavity>,<motion>'")
    s.set_defaults(fn=cmd_oracle)

    s = sp.add_parser("table1", help="closed forms vs spectral route, all cells")
    s.add_argument("--output", "-o", help="output basename (no extension)")
    s.set_defaults(fn=cmd_table1)

    return ap


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (ValueError, KeyError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except RuntimeError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
