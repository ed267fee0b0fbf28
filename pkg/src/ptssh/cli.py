"""Command-line interface: ``ptssh <command> [options]``.

Every command resolves its settings from built-in defaults, then an optional
``--config`` file (INI, or any artifact written by this tool), then explicit
flags; flags win.  The resolved settings are written into each artifact.

Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 I/O error.
"""
from __future__ import annotations

import argparse
import configparser
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import dynamics, eps, io
from .errors import ParameterError, PTSSHError
from .model import ModelParams, SiteIndex, build_hamiltonian, isolated_trimer_eigenvalues
from .spectrum import LocClass, band_edges, discrete_spectrum, eigenfunction, zero_modes

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

PARAM_KEYS = {"t1": 3.0, "t2": 1.0, "g": 3.0, "gamma": 0.0}


def _floats(text):
    return [float(x) for x in str(text).replace(",", " ").split()]


def _sites(text):
    if isinstance(text, (list, tuple)):
        return [str(s) for s in text]
    return [s.strip() for s in str(text).split(",") if s.strip()]


# Per-command settings: name -> (converter, default).
SETTINGS = {
    "spectrum": {},
    "catalog": {},
    "sweep": {
        "gamma_min": (float, 0.0),
        "gamma_max": (float, 5.0),
        "steps": (int, 501),
    },
    "phase-diagram": {
        "t1_min": (float, 0.0),
        "t1_max": (float, 4.0),
        "g_min": (float, 0.0),
        "g_max": (float, 4.0),
        "resolution": (int, 201),
    },
    "evolve": {
        "site": (_sites, ["0"]),
        "n_cells": (int, None),
        "t_max": (float, 100.0),
        "dt_out": (float, 0.05),
        "tol": (float, 1e-6),
        "backend": (str, None),
    },
    "fit": {
        "trace": (str, None),
        "kind": (str, "power"),
        "window": (_floats, None),
        "fit_site": (str, None),
    },
    "hamiltonian": {"n_cells": (int, 10)},
    "profile": {
        "mode": (int, 0),
        "n_max": (int, 41),
        "normalization": (str, "max"),
    },
}
USES_PARAMS = {"spectrum", "catalog", "sweep", "evolve", "hamiltonian", "profile"}


# ---------------------------------------------------------------------------
# Settings resolution


def _resolve(args) -> dict:
    cmd = args.command
    file_cfg = io.read_config(args.config) if args.config else {}
    flat = {}
    for section in ("params", "run", cmd):
        flat.update(file_cfg.get(section, {}))
    resolved = {"params": {}, cmd: {}}
    if cmd in USES_PARAMS:
        for key, default in PARAM_KEYS.items():
            val = getattr(args, key, None)
            if val is None:
                val = flat.get(key, default)
            resolved["params"][key] = float(val)
    for key, (conv, default) in SETTINGS[cmd].items():
        val = getattr(args, key, None)
        if val is None:
            val = flat.get(key)
            val = default if val is None or val == "" else conv(val)
        resolved[cmd][key] = val
    return resolved


def _provenance(cmd: str, resolved: dict) -> dict:
    out = {"run": {"command": cmd, "version": __version__}}
    if resolved.get("params"):
        out["params"] = resolved["params"]
    out[cmd] = {k: v for k, v in resolved[cmd].items() if v is not None}
    return out


def _params(resolved) -> ModelParams:
    return ModelParams(**resolved["params"])


def _target(out):
    return sys.stdout if out in (None, "-") else out


def _sidecar(out, suffix=".json"):
    if out in (None, "-"):
        return None
    return str(Path(out).with_suffix(suffix))


def _threads(n_jobs: int) -> int:
    cap = os.environ.get("PTSSH_THREADS")
    limit = os.cpu_count() or 1
    if cap:
        try:
            limit = max(1, int(cap))
        except ValueError:
            raise ParameterError(f"PTSSH_THREADS must be an integer, got {cap!r}") from None
    return max(1, min(limit, n_jobs))


# ---------------------------------------------------------------------------
# Commands


def _mode_class(params, mode) -> str:
    if mode.locclass is LocClass.DELOCALIZED and abs(mode.z.imag) <= eps.EPS_Z * max(1.0, abs(mode.z)):
        if any(b.contains(mode.z.real) for b in band_edges(params)):
            return "RIC"
    return mode.locclass.value


def cmd_spectrum(args, resolved):
    p = _params(resolved)
    spec = discrete_spectrum(p)
    rows = []
    for m in spec:
        rows.append(["root", m.z.real, m.z.imag, m.k.real, m.k.imag, _mode_class(p, m)])
    if p.g > 0:
        for zm in zero_modes(p):
            rows.append([f"zero_{zm.flavor.value}", 0.0, 0.0, zm.k.real, zm.k.imag, zm.locclass.value])
    for band in band_edges(p):
        for edge in band.edges:
            rows.append(["band_edge", edge, 0.0, None, None, f"band{band.sign:+d}"])
    for z in isolated_trimer_eigenvalues(p):
        rows.append(["trimer", z.real, z.imag, None, None, "isolated"])
    prov = _provenance("spectrum", resolved)
    prov["run"]["escaped"] = spec.escaped
    io.write_csv(_target(args.out), prov, ["kind", "re_z", "im_z", "re_k", "im_k", "class"], rows)
    side = _sidecar(args.out)
    if side:
        cat = eps.ep_catalog(p.t1, p.t2, p.g).as_dict()
        label = eps.classify_region(p)
        payload = {
            "catalog": {k: v for k, v in cat.items() if v is not None},
            "region": str(label),
            "boundary_ep": label.ep,
            "escaped": spec.escaped,
        }
        io.write_json(side, payload, prov)
    return EXIT_OK


def cmd_catalog(args, resolved):
    p = _params(resolved)
    cat = eps.ep_catalog(p.t1, p.t2, p.g)
    payload = {k: v for k, v in cat.as_dict().items() if v is not None}
    payload["gapped"] = cat.gapped
    payload["on_gap1"] = cat.on_gap1
    payload["on_gap2"] = cat.on_gap2
    resolved["params"].pop("gamma", None)
    io.write_json(_target(args.out), payload, _provenance("catalog", resolved))
    return EXIT_OK


def cmd_sweep(args, resolved):
    p = _params(resolved)
    s = resolved["sweep"]
    if s["steps"] < 2 or not s["gamma_min"] < s["gamma_max"] or s["gamma_min"] < 0:
        raise ParameterError("sweep needs steps >= 2 and 0 <= gamma_min < gamma_max")
    gammas = np.linspace(s["gamma_min"], s["gamma_max"], s["steps"])
    rows = []
    for gam in gammas:
        q = p.with_gamma(float(gam))
        label = eps.classify_region(q)
        for j, m in enumerate(discrete_spectrum(q)):
            rows.append([q.gamma, j, m.z.real, m.z.imag, m.k.real, m.k.imag, _mode_class(q, m), str(label)])
    cols = ["gamma", "mode", "re_z", "im_z", "re_k", "im_k", "class", "region"]
    io.write_csv(_target(args.out), _provenance("sweep", resolved), cols, rows)
    return EXIT_OK


def cmd_phase_diagram(args, resolved):
    if args.cell is not None:
        t1, g = args.cell
        print(eps.phase_label(t1, g))
        return EXIT_OK
    s = resolved["phase-diagram"]
    pd = eps.phase_diagram((s["t1_min"], s["t1_max"]), (s["g_min"], s["g_max"]), s["resolution"])
    prov = _provenance("phase-diagram", resolved)
    io.write_csv(_target(args.out), prov, ["t1", "g", "label"], pd.cells())
    side = _sidecar(args.out)
    if side:
        io.write_json(side, {"t1": pd.t1, **pd.curves}, prov)
    return EXIT_OK


def _trace_rows(trace):
    for site in trace.sites:
        _, lp = dynamics.log_measure(trace, site)
        amp = trace.amplitudes[site]
        for i, t in enumerate(trace.times):
            yield [t, str(site), amp[i].real, amp[i].imag, trace.log_scale[i], math.exp(lp[i]) if lp[i] > -745 else 0.0]


def cmd_evolve(args, resolved):
    p = _params(resolved)
    s = resolved["evolve"]
    sites = [SiteIndex.parse(x) for x in s["site"]]
    if not sites:
        raise ParameterError("at least one --site is required")

    def run(site):
        return dynamics.evolve(
            p, n_cells=s["n_cells"], initial_site=site, t_max=s["t_max"], dt_out=s["dt_out"],
            tol=s["tol"], backend=s["backend"],
        )

    # The compiled kernel releases the GIL, so threads run evolutions concurrently.
    with ThreadPoolExecutor(max_workers=_threads(len(sites))) as pool:
        traces = list(pool.map(run, sites))

    cols = ["t", "site", "re_amp", "im_amp", "log_scale", "P"]
    for site, trace in zip(sites, traces):
        prov = _provenance("evolve", resolved)
        prov["evolve"]["site"] = [str(site)]
        prov["trace"] = {
            "initial_site": str(site),
            "n_cells": trace.n_cells,
            "h": trace.h,
            "step_change": trace.step_change,
            "backend": trace.backend,
        }
        out = args.out
        if out not in (None, "-") and len(sites) > 1:
            path = Path(out)
            out = str(path.with_name(f"{path.stem}_{site}{path.suffix}"))
        io.write_csv(_target(out), prov, cols, _trace_rows(trace))
    return EXIT_OK


def _load_series(path, site=None):
    config, cols, rows = io.read_csv(path)
    if cols[:2] != ["t", "site"] or "P" not in cols:
        raise ParameterError(f"{path} is not a trace file")
    if site is None:
        site = config.get("trace", {}).get("initial_site", "0")
    label = str(SiteIndex.parse(site))
    ip = cols.index("P")
    sel = [(float(r[0]), float(r[ip])) for r in rows if r[1] == label]
    if not sel:
        raise KeyError(f"site {label} not present in {path}")
    t, pv = zip(*sel)
    return config, (np.array(t), np.array(pv))


def cmd_fit(args, resolved):
    s = resolved["fit"]
    if not s["trace"] and args.config and io.read_config(args.config).get("run", {}).get("command") == "evolve":
        s["trace"] = args.config
    if not s["trace"]:
        raise ParameterError("fit needs a trace file")
    _, series = _load_series(s["trace"], s["fit_site"])
    window = tuple(s["window"]) if s["window"] else None
    if window is not None and len(window) != 2:
        raise ParameterError("--window takes two numbers")
    kind = s["kind"]
    if kind == "power":
        payload = dynamics.fit_power_law(series, window).as_dict()
    elif kind == "rate":
        window = window or dynamics.default_window(series[0])
        payload = {"window": list(window), "rate": dynamics.growth_rate(series, window)}
    elif kind == "decay":
        payload = dynamics.fit_decay(series, window or (5.0, 40.0)).as_dict()
    else:
        raise ParameterError(f"unknown fit kind {kind!r}")
    io.write_json(_target(args.out), payload, _provenance("fit", resolved))
    return EXIT_OK


def cmd_hamiltonian(args, resolved):
    p = _params(resolved)
    n = resolved["hamiltonian"]["n_cells"]
    ham = build_hamiltonian(p, n)
    rows = []
    for i in range(ham.dim):
        if i > 0:
            rows.append([i, i - 1, ham.off[i - 1], 0.0])
        if ham.diag[i] != 0:
            rows.append([i, i, ham.diag[i].real, ham.diag[i].imag])
        if i < ham.dim - 1:
            rows.append([i, i + 1, ham.off[i], 0.0])
    io.write_csv(_target(args.out), _provenance("hamiltonian", resolved), ["row", "col", "re", "im"], rows)
    return EXIT_OK


def cmd_profile(args, resolved):
    p = _params(resolved)
    s = resolved["profile"]
    spec = discrete_spectrum(p)
    if not 0 <= s["mode"] < len(spec):
        raise ParameterError(f"mode index must be in 0..{len(spec) - 1}")
    prof = eigenfunction(p, spec[s["mode"]], s["n_max"], normalization=s["normalization"])
    rows = []
    for idx in range(4 * s["n_max"] + 1):
        site = SiteIndex.from_index(idx, s["n_max"])
        a = prof[site]
        rows.append([str(site), 0 if site.is_center else site.cell,
                     "" if site.is_center else site.sublattice.value, a.real, a.imag, abs(a)])
    prov = _provenance("profile", resolved)
    m = spec[s["mode"]]
    prov["mode"] = {"re_z": m.z.real, "im_z": m.z.imag, "degenerate": prof.degenerate}
    io.write_csv(_target(args.out), prov, ["site", "cell", "sublattice", "re", "im", "abs"], rows)
    return EXIT_OK


COMMANDS = {
    "spectrum": cmd_spectrum,
    "catalog": cmd_catalog,
    "sweep": cmd_sweep,
    "phase-diagram": cmd_phase_diagram,
    "evolve": cmd_evolve,
    "fit": cmd_fit,
    "hamiltonian": cmd_hamiltonian,
    "profile": cmd_profile,
}


# ---------------------------------------------------------------------------
# Parser


def _add_params(sp):
    for key in PARAM_KEYS:
        sp.add_argument(f"--{key}", type=float, default=None, help=f"{key} (default {PARAM_KEYS[key]})")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ptssh", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def cmd(name, help_text, params=True):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", help="INI file or previous artifact to take settings from")
        sp.add_argument("--out", help="output path (default: stdout)")
        if params:
            _add_params(sp)
        return sp

    cmd("spectrum", "discrete roots, zero modes, band edges and trimer reference")
    cmd("catalog", "closed-form exceptional points at (t1, t2, g)")

    sp = cmd("sweep", "spectrum and region labels along a gamma sweep")
    sp.add_argument("--gamma-min", dest="gamma_min", type=float)
    sp.add_argument("--gamma-max", dest="gamma_max", type=float)
    sp.add_argument("--steps", type=int)

    sp = cmd("phase-diagram", "gapped/ungapped map of the (t1/t2, g/t2) plane", params=False)
    sp.add_argument("--t1-min", dest="t1_min", type=float)
    sp.add_argument("--t1-max", dest="t1_max", type=float)
    sp.add_argument("--g-min", dest="g_min", type=float)
    sp.add_argument("--g-max", dest="g_max", type=float)
    sp.add_argument("--resolution", type=int)
    sp.add_argument("--cell", nargs=2, type=float, metavar=("T1", "G"),
                    help="print the label of a single point and exit")

    sp = cmd("evolve", "initial-state evolution on the truncated lattice")
    sp.add_argument("--site", action="append", help="initial site (repeatable), e.g. 0, 1B, -2a")
    sp.add_argument("--n-cells", dest="n_cells", type=int)
    sp.add_argument("--t-max", dest="t_max", type=float)
    sp.add_argument("--dt-out", dest="dt_out", type=float)
    sp.add_argument("--tol", type=float)
    sp.add_argument("--backend", choices=["compiled", "python"])

    sp = cmd("fit", "power-law, growth-rate or decay fit of a trace file", params=False)
    sp.add_argument("trace", nargs="?", help="trace CSV written by 'evolve'")
    sp.add_argument("--kind", choices=["power", "rate", "decay"])
    sp.add_argument("--window", nargs=2, type=float, metavar=("T_MIN", "T_MAX"))
    sp.add_argument("--site", dest="fit_site", help="site to fit (default: the initial site)")

    sp = cmd("hamiltonian", "nonzero entries of the truncated Hamiltonian")
    sp.add_argument("--n-cells", dest="n_cells", type=int)

    sp = cmd("profile", "eigenfunction of one discrete mode")
    sp.add_argument("--mode", type=int, help="index into the sorted spectrum")
    sp.add_argument("--n-max", dest="n_max", type=int)
    sp.add_argument("--normalization", choices=["phi0", "max", "none"])
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        resolved = _resolve(args)
        return COMMANDS[args.command](args, resolved)
    except (ValueError, KeyError, configparser.Error) as exc:
        # ParameterError and DomainError are ValueErrors.
        print(f"ptssh: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (PTSSHError, ArithmeticError) as exc:
        print(f"ptssh: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"ptssh: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
