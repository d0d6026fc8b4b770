"""Command-line front end: ``cylflow <command> --config <path> [--out <dir>] [--seed <u64>]``.

Configs are INI files validated against a fixed schema before any work is
done.  Every command writes ``report.json`` (schema ``report_v1``) and, where
relevant, CSV data files into the output directory.  Reports carry no
timestamps so identical config and seed give byte-identical output.
"""
from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, flow, numerics, rates, spectral, variation
from .chart import NormalField, build_cylinder, graph, taper
from .ensemble import analytic_graph, generic_direction, jacobi_direction
from .errors import ConfigurationError, CylflowError, GeometryError, ResolutionError, StiffnessError
from .geometry import (compute_P, drift_tau_residual, gradH_residual, jet, nablaN_residual,
                       simons_residual)

COMMANDS = ("verify", "evolve", "loja", "tail", "rates")
REPORT_SCHEMA = "report_v1"
EXIT_OK, EXIT_GATE, EXIT_RESOLUTION, EXIT_GEOMETRY, EXIT_CONFIG = 0, 1, 2, 3, 4


# --------------------------------------------------------------------------
# configuration


def _int(v):
    return int(v)


def _float(v):
    return float(v)


def _bool(v):
    s = v.strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _list(conv):
    def parse(v):
        return [conv(x) for x in v.replace(",", " ").split()]
    return parse


def _str(v):
    return v.strip()


SCHEMA = {
    "experiment": {"command": (_str, None)},
    "grid": {"k": (_int, 1), "n": (_int, 2), "N": (_int, 4), "m_theta": (_int, 32), "R_box": (_float, 6.0),
             "m_y": (_int, 97)},
    "initial": {"modes": (_str, ""), "amplitudes": (_list(_float), []), "seed": (_int, 0),
                "random_modes": (_int, 0), "random_amplitude": (_float, 0.01),
                "taper_inner": (_float, 4.0), "taper_outer": (_float, 5.5)},
    "stepper": {"dt": (_float, 0.02), "T_end": (_float, 4.0), "scheme": (_str, "imex"), "shoot": (_bool, False),
                "sample_every": (_float, 1.0)},
    "verify": {"amplitude": (_float, 0.05), "levels": (_int, 3)},
    "loja": {"alpha0": (_float, 0.5), "c": (_float, 1.0), "J_max": (_int, 400), "F_inf": (_float, 0.0),
             "trace": (_str, "")},
    "tail": {"m": (_list(_int), [1, 2, 3, 4]), "k_pow": (_list(_int), [0, 1, 2, 3, 4]),
             "R": (_list(_float), [1.0, 2.0, 4.0, 6.0]), "qmax": (_int, 6)},
    "rates": {"alpha": (_float, 0.5), "c": (_float, 1.0), "J_max": (_int, 400), "F_inf": (_float, 0.0),
              "betas": (_list(_float), [0.6, 0.8])},
}
REQUIRED_SECTIONS = {"verify": ("grid",), "evolve": ("grid", "initial", "stepper"), "loja": ("loja",),
                     "tail": ("tail",), "rates": ("rates",)}


def load_config(path, command):
    """Parse and validate a config file; returns ``{section: {key: value}}`` with defaults."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keys are case sensitive (N vs n)
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigurationError(f"malformed config {path}: {exc}") from exc
    return validate_config({s: dict(parser[s]) for s in parser.sections()}, command)


def validate_config(raw, command):
    if command not in COMMANDS:
        raise ConfigurationError(f"unknown command {command!r}")
    for section, keys in raw.items():
        if section not in SCHEMA:
            raise ConfigurationError(f"unknown section [{section}]")
        for key in keys:
            if key not in SCHEMA[section]:
                raise ConfigurationError(f"unknown key {key!r} in [{section}]")
    for section in REQUIRED_SECTIONS[command]:
        if section not in raw:
            raise ConfigurationError(f"command {command} needs a [{section}] section")
    cfg = {}
    for section, spec in SCHEMA.items():
        given = raw.get(section, {})
        out = {}
        for key, (conv, default) in spec.items():
            if key in given:
                try:
                    out[key] = conv(given[key])
                except ValueError as exc:
                    raise ConfigurationError(f"[{section}] {key}: {exc}") from exc
            else:
                out[key] = default
        cfg[section] = out
    declared = cfg["experiment"]["command"]
    if declared is not None and declared != command:
        raise ConfigurationError(f"config is for {declared!r}, not {command!r}")
    if cfg["stepper"]["scheme"] not in ("imex", "explicit"):
        raise ConfigurationError("stepper scheme must be imex or explicit")
    return cfg


def config_hash(cfg, seed):
    blob = json.dumps(dict(config=cfg, seed=seed), sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()


def _grid(cfg):
    g = cfg["grid"]
    return build_cylinder(g["k"], g["n"], g["N"], g["m_theta"], g["R_box"], g["m_y"])


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


# --------------------------------------------------------------------------
# initial data


def _theta_factor(spec, grid):
    coords = grid.coords()
    th = coords[grid.k - 1]  # longitude
    if spec == "1":
        return np.ones(grid.shape)
    for name, fn in (("cos", np.cos), ("sin", np.sin)):
        if spec.startswith(name):
            return fn(int(spec[len(name):]) * th)
    raise ConfigurationError(f"unknown theta factor {spec!r}")


def _axis_factor(spec, grid):
    y = grid.coords()[grid.k:]
    r2 = sum(c**2 for c in y) if y else np.zeros(grid.shape)
    y1 = y[0] if y else np.zeros(grid.shape)
    table = {"1": np.ones(grid.shape), "gauss": np.exp(-r2 / 4), "y": y1, "y2m2": y1**2 - 2,
             "ygauss": y1 * np.exp(-r2 / 4)}
    if spec not in table:
        raise ConfigurationError(f"unknown axis factor {spec!r}")
    return table[spec]


def initial_field(cfg, seed):
    """Normal field from mode labels ``<component>:<theta>:<axis>`` or ``jacobi:<label>``."""
    grid = _grid(cfg)
    ini = cfg["initial"]
    labels = [s.strip() for s in ini["modes"].split(",") if s.strip()]
    amps = ini["amplitudes"]
    if len(amps) != len(labels):
        raise ConfigurationError(f"{len(labels)} modes but {len(amps)} amplitudes")
    comps = np.zeros(grid.shape + (grid.N - grid.n,))
    jac = None
    for label, a in zip(labels, amps):
        parts = label.split(":", 1)
        if parts[0] == "jacobi":
            jac = jac or {el.label: el.field for el in spectral.raw_jacobi_fields(grid)}
            if parts[1] not in jac:
                raise ConfigurationError(f"unknown Jacobi label {parts[1]!r}")
            comps += a * jac[parts[1]].comps
            continue
        bits = label.split(":")
        if len(bits) != 3:
            raise ConfigurationError(f"mode label {label!r} is not component:theta:axis")
        comp = bits[0]
        if comp == "n":
            c = 0
        elif comp.startswith("z") and comp[1:].isdigit() and 1 <= int(comp[1:]) <= grid.codim_extra:
            c = int(comp[1:])
        else:
            raise ConfigurationError(f"unknown component {comp!r}")
        comps[..., c] += a * _theta_factor(bits[1], grid) * _axis_factor(bits[2], grid)
    if ini["random_modes"] > 0:
        rng = np.random.default_rng(seed)
        gauss = _axis_factor("gauss", grid)
        for _ in range(ini["random_modes"]):
            m = int(rng.integers(2, 5))
            phase = rng.uniform(0, 2 * np.pi)
            c = int(rng.integers(0, grid.N - grid.n))
            th = grid.coords()[grid.k - 1]
            comps[..., c] += ini["random_amplitude"] * rng.standard_normal() * np.cos(m * th + phase) * gauss
    U = NormalField(grid, comps)
    if ini["taper_outer"] > 0:
        U = taper(U, ini["taper_inner"], ini["taper_outer"])
    return U


# --------------------------------------------------------------------------
# verify


IDENTITY_ORDER_GATE = 3.5
RESIDUAL_FLOOR = 1e-9


def _entry(name, resolution, value_L2, value_max, order, gate, passed):
    return dict(identity_name=name, resolution=resolution, residual_L2=value_L2, residual_max=value_max,
                fitted_order=order, gate=gate, passed=bool(passed))


def _identity_ladder(cfg):
    base = _grid(cfg)
    amp = cfg["verify"]["amplitude"]
    levels = max(2, cfg["verify"]["levels"])
    m_ys = [base.m_y]
    for _ in range(levels - 1):
        m_ys.append(2 * m_ys[-1] - 1)
    results = {}
    for m_y in m_ys:
        grid = base.refined(m_y=m_y)
        J = jet(graph(grid, analytic_graph(grid, amp)))
        res = list(simons_residual(J)) + list(gradH_residual(J)) + list(nablaN_residual(J))
        res.append(drift_tau_residual(J))
        for r in res:
            results.setdefault(r.name, []).append((grid.h, r.L2, r.max))
    entries = []
    for name, rows in results.items():
        # gates use the Gaussian L2 residual; one-sided stencils at the box edge pollute the max norm
        h = [r[0] for r in rows]
        l2 = [r[1] for r in rows]
        if max(l2) <= RESIDUAL_FLOOR:
            order, ok = None, True
        else:
            order = numerics.convergence_order(h, np.maximum(l2, 1e-300))
            ok = order >= IDENTITY_ORDER_GATE or l2[-1] <= RESIDUAL_FLOOR
        entries.append(_entry(name, m_ys, l2[-1], rows[-1][2], order, f"L2 order >= {IDENTITY_ORDER_GATE}", ok))
    return entries


def _P_entries(cfg):
    g = cfg["grid"]
    grid = build_cylinder(g["k"], g["n"], g["n"] + 1, g["m_theta"], g["R_box"], g["m_y"])
    th = grid.coords()[grid.k - 1]
    y = grid.coords()[grid.k:]
    y1 = y[0] if y else 0.0
    r2 = sum(c**2 for c in y) if y else 0.0
    graphs = {"P_codim1_a": 0.05 * np.sin(th) * np.exp(-r2),
              "P_codim1_b": 0.05 * np.cos(2 * th) * np.exp(-r2 / 2),
              "P_codim1_c": 0.03 * (y1**2 - 2) * np.exp(-r2 / 4) + 0.02 * np.cos(3 * th) * np.exp(-r2 / 4)}
    out = []
    for name, u in graphs.items():
        P = compute_P(jet(graph(grid, NormalField.from_components(grid, u=u)))).value
        mx = float(np.max(np.abs(P)))
        out.append(_entry(name, [grid.m_y], float(np.sqrt(np.mean(P**2))), mx, None, "max|P| <= 1e-8", mx <= 1e-8))
    return out


def _jacobi_entries(grid):
    from .gaussian import inner, rule_for

    rule = rule_for(grid)
    basis = spectral.jacobi_basis(grid, rule)
    cyl = jet(grid.cylinder())
    dim = len(basis)
    want = spectral.jacobi_dimension(grid.k, grid.n, grid.N)
    worst = 0.0
    for el in basis.fields:
        LJ = spectral.apply_L(el, cyl)
        worst = max(worst, math.sqrt(inner(LJ, LJ, rule)) / math.sqrt(inner(el, el, rule)))
    th = grid.coords()[grid.k - 1]
    V = analytic_graph(grid, 1.0) + NormalField.from_components(grid, u=0.3 * np.cos(th))
    coeffs, h = spectral.project_jacobi(V, basis)
    c2, h2 = spectral.project_jacobi(coeffs.to_field(basis), basis)
    idem = float(np.max(np.abs(c2.values - coeffs.values)))
    return [_entry("jacobi_dimension", [grid.m_y], None, float(abs(dim - want)), None, f"dimension == {want}",
                   dim == want),
            _entry("jacobi_LJ", [grid.m_y], worst, worst, None, "||LJ|| <= 1e-7 ||J||", worst <= 1e-7),
            _entry("jacobi_projection_idempotent", [grid.m_y], idem, idem, None, "<= 1e-10", idem <= 1e-10)]


def _variation_entries(grid):
    th = grid.coords()[grid.k - 1]
    y = grid.coords()[grid.k:]
    env = np.exp(-sum(c**2 for c in y) / 4) if y else 1.0
    ua = [0.5 * np.cos(th) * env] if grid.codim_extra else []
    V = NormalField.from_components(grid, u=np.sin(th) * env + 0.3 * np.cos(2 * th), ua=ua)
    J = jet(grid.cylinder())
    out = []
    results = [op(J, V, label="mixed") for op in (variation.dPi, variation.dH, variation.dA, variation.dphi)]
    results += list(variation.cylinder_variation_table(V, label="mixed").values())
    for r in results:
        out.append(_entry(r.op, [grid.m_y], None, r.max_discrepancy, r.order, f"order >= {variation.ORDER_GATE}",
                          r.passed))
    return out


def _taylor_entries(grid):
    if grid.codim_extra == 0:
        return []
    fits = {"taylor_P_generic": (generic_direction(grid), 1.9)}
    if grid.axis_dim:
        fits["taylor_P_jacobi"] = (jacobi_direction(grid), 2.8)
    out = []
    for name, (U, gate) in fits.items():
        fit = variation.taylor_P(U)
        out.append(_entry(name, [grid.m_y], None, fit.residual, fit.p, f"p >= {gate}", fit.p >= gate))
    return out


def cmd_verify(cfg, seed):
    grid = _grid(cfg)
    entries = _identity_ladder(cfg) + _P_entries(cfg)
    if grid.N == grid.n + 1:
        P = compute_P(jet(graph(grid, analytic_graph(grid, cfg["verify"]["amplitude"])))).value
        mx = float(np.max(np.abs(P)))
        entries.append(_entry("P_config_graph", [grid.m_y], None, mx, None, "max|P| <= 1e-8", mx <= 1e-8))
    entries += _jacobi_entries(grid) + _variation_entries(grid) + _taylor_entries(grid)
    failed = [e["identity_name"] for e in entries if not e["passed"]]
    body = dict(identities=entries, failed=failed)
    return (EXIT_GATE if failed else EXIT_OK), body, {}


# --------------------------------------------------------------------------
# evolve, loja, tail, rates


def cmd_evolve(cfg, seed):
    U0 = initial_field(cfg, seed)
    st = cfg["stepper"]
    if st["shoot"]:
        res = flow.shoot(U0, st["T_end"], dt=st["dt"], scheme=st["scheme"])
        trace, shot = res.trace, res.c
    else:
        trace = flow.evolve(U0, st["T_end"], dt=st["dt"], scheme=st["scheme"], sample_every=st["sample_every"])
        shot = None
    seq_F = trace.sample_F
    body = dict(
        samples=dict(t=trace.sample_times, F=seq_F, excess_error=trace.sample_bound),
        delta=trace.delta.tolist(),
        shrinker_scales=[s.as_dict() for s in trace.shrinker_scales()],
        energy=flow.energy_audit(trace),
        monotone=flow.monotone(trace),
        loja=flow.loja_audit(trace).as_dict(),
        constant_mode_shift=shot,
        steps=len(trace.rows) - 1,
    )
    return EXIT_OK, body, {"trace.csv": trace.to_csv()}


def cmd_loja(cfg, seed):
    lj = cfg["loja"]
    if lj["trace"]:
        data = np.genfromtxt(lj["trace"], delimiter=",", names=True)
        t, F = np.atleast_1d(data["t"]), np.atleast_1d(data["F"])
        keep = np.abs(t - np.round(t)) < 1e-9
        rec = rates.SequenceRecord(np.round(t[keep]).astype(int), F[keep] - lj["F_inf"], lj["F_inf"])
        source = "trace"
    else:
        rec = rates.synth_sequence(lj["alpha0"], F_inf=lj["F_inf"], c=lj["c"], J_max=lj["J_max"])
        source = "synthetic"
    audit = flow.loja_audit(rec, F_cyl=lj["F_inf"])
    body = dict(source=source, alpha0=lj["alpha0"] if source == "synthetic" else None, audit=audit.as_dict())
    return EXIT_OK, body, {"sequence.csv": rec.to_csv()}


def cmd_tail(cfg, seed):
    tl = cfg["tail"]
    results = []
    ok = True
    for R in tl["R"]:
        table = rates.gamma_table(R, tl["qmax"])
        quad = [rates.gamma_quad(q, R) for q in range(tl["qmax"] + 1)]
        rel = max(abs(a - b) / abs(b) for a, b in zip(table, quad))
        for m in tl["m"]:
            for kp in tl["k_pow"]:
                r = rates.gaussian_tail(m, kp, R).as_dict()
                ok &= bool(r["holds"])
                results.append(r)
        ok &= rel <= 1e-10
        results.append(dict(R=R, gamma_recursion=table.tolist(), gamma_quadrature=quad, max_relative_gap=rel))
    return (EXIT_OK if ok else EXIT_GATE), dict(results=results, all_hold=ok), {}


def cmd_rates(cfg, seed):
    rt = cfg["rates"]
    rec = rates.synth_sequence(rt["alpha"], F_inf=rt["F_inf"], c=rt["c"], J_max=rt["J_max"])
    verdicts = [rates.summability_check(rec, b).as_dict() for b in rt["betas"]]
    for v in verdicts:
        v.pop("partial_sums")
    body = dict(alpha=rt["alpha"], beta_threshold=rates.beta_threshold(rt["alpha"]), K_min=rec.extra["K_min"],
                inequality_holds=rec.extra["holds"], rate=rates.rate_extraction(rec).as_dict(), summability=verdicts)
    return EXIT_OK, body, {"sequence.csv": rec.to_csv()}


HANDLERS = dict(verify=cmd_verify, evolve=cmd_evolve, loja=cmd_loja, tail=cmd_tail, rates=cmd_rates)


# --------------------------------------------------------------------------
# entry point


def exit_code_for(exc):
    if isinstance(exc, (ResolutionError, StiffnessError)):
        return EXIT_RESOLUTION
    if isinstance(exc, GeometryError):
        return EXIT_GEOMETRY
    if isinstance(exc, ConfigurationError):
        return EXIT_CONFIG
    return EXIT_GATE


def run(command, config_path, out_dir=".", seed=None):
    """Run one experiment; returns ``(exit_code, report_dict)`` and writes the output files."""
    cfg = load_config(config_path, command)
    if seed is None:
        seed = cfg["initial"]["seed"]
    report = dict(schema=REPORT_SCHEMA, version=__version__, command=command, config_hash=config_hash(cfg, seed),
                  seed=seed, config=cfg)
    files = {}
    try:
        code, body, files = HANDLERS[command](cfg, seed)
        report.update(status="ok" if code == EXIT_OK else "gate-failure", result=body)
    except CylflowError as exc:
        code = exit_code_for(exc)
        report.update(status="error", error=dict(type=type(exc).__name__, message=str(exc)))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(_clean(report), sort_keys=True, indent=2) + "\n")
    for name, text in files.items():
        (out / name).write_text(text)
    report["exit_code"] = code
    return code, report


def main(argv=None):
    ap = argparse.ArgumentParser(prog="cylflow", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True)
    ap.add_argument("--out", default=".")
    ap.add_argument("--seed", type=int, default=None)
    args = ap.parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("cylflow: seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    try:
        code, report = run(args.command, args.config, args.out, args.seed)
    except ConfigurationError as exc:
        print(f"cylflow: {exc}", file=sys.stderr)
        return exit_code_for(exc)
    status = report.get("status")
    line = f"{args.command}: {status} (exit {code})"
    if status == "gate-failure":
        line += " failing: " + ", ".join(report["result"].get("failed", []))
    if status == "error":
        line += f" {report['error']['type']}: {report['error']['message']}"
    print(line)
    return code


if __name__ == "__main__":
    sys.exit(main())
