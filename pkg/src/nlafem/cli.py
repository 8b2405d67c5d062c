"""Batch front end: config parsing, run orchestration, artifact emission.

Subcommands:
  afem <config>             adaptive eigenvalue run; writes history.csv, final
                            mesh, SCF traces, and a manifest into the output dir
  annihilator --n --k --out exact annihilator polynomial in text form
  witness <config>          numeric non-vanishing / log-sum witness search
  compare <a> <b>           per-column slope fits and final-value deltas

Configs are flat key = value files with sections. Unknown keys are rejected
with a line-anchored message (exit 2); solver failures exit 3 after writing
whatever partial artifacts exist. The environment variable OUT_DIR overrides
the configured output directory.
"""

from __future__ import annotations

import argparse
import configparser
import math
import os
import sys
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import __version__
from .errors import ConfigError, NlafemError, ParseError
from .estimator import AfemOptions, afem_run
from .mesh import DomainSpec, create_initial_mesh, export_mesh, import_mesh, uniform_refine
from .physics import N1Preset, Potential, ProblemSpec
from .radical import FracPoly, annihilator, logsum_witness, nonvanishing_witness, serialize_multipoly
from .scf import ScfOptions

F17 = "{:.17g}"


# ---------------------------------------------------------------------------
# config schema

_SCHEMA = {
    "domain": {"kind", "x0", "x1", "y0", "y1", "path", "uniform_refine", "bisect_all"},
    "problem": {
        "kappa", "potential", "potential_value", "gamma1", "gamma2",
        "charges", "centers", "eps", "n1", "beta", "beta1", "beta2", "nu",
        "alpha_x", "sign", "floor", "alpha", "n_states",
    },
    "fem": {"degree", "quad_order"},
    "afem": {"theta", "strategy", "eta_tol", "max_dof", "max_iter"},
    "scf": {
        "mixing", "tol_density", "tol_eigen", "max_outer", "eigen_tol",
        "eigen_max_iter", "poisson_tol", "seed",
    },
    "output": {"dir"},
}


@dataclass
class RunConfig:
    domain_kind: str = "unit_square"
    rect: tuple = (0.0, 1.0, 0.0, 1.0)
    mesh_path: str = ""
    pre_uniform: int = 0
    pre_bisect_all: int = 0
    spec: ProblemSpec = field(default_factory=ProblemSpec)
    degree: int = 1
    quad_order: int | None = None
    afem: AfemOptions = field(default_factory=AfemOptions)
    out_dir: str = "out"

    def build_mesh(self):
        if self.domain_kind == "file":
            with open(self.mesh_path) as f:
                mesh = import_mesh(f.read())
        elif self.domain_kind == "rectangle":
            mesh = create_initial_mesh(DomainSpec.rectangle(*self.rect))
        elif self.domain_kind == "l_shape":
            mesh = create_initial_mesh(DomainSpec.l_shape())
        else:
            mesh = create_initial_mesh(DomainSpec.unit_square())
        if self.pre_bisect_all:
            from .mesh import refine

            for _ in range(self.pre_bisect_all):
                mesh = refine(mesh, set(range(mesh.num_elements)))
        if self.pre_uniform:
            mesh = uniform_refine(mesh, self.pre_uniform)
        return mesh

    def to_text(self) -> str:
        s = self.spec
        p, n1, sc = s.potential, s.n1, self.afem.scf
        lines = ["[domain]", f"kind = {self.domain_kind}"]
        if self.domain_kind == "rectangle":
            lines += [f"{k} = {F17.format(v)}" for k, v in zip(("x0", "x1", "y0", "y1"), self.rect)]
        if self.domain_kind == "file":
            lines.append(f"path = {self.mesh_path}")
        lines += [
            f"uniform_refine = {self.pre_uniform}",
            f"bisect_all = {self.pre_bisect_all}",
            "",
            "[problem]",
            f"kappa = {F17.format(s.kappa)}",
            f"potential = {p.kind}",
            f"potential_value = {F17.format(p.value)}",
            f"gamma1 = {F17.format(p.gammas[0])}",
            f"gamma2 = {F17.format(p.gammas[1])}",
            f"charges = {','.join(F17.format(z) for z in p.charges)}",
            "centers = " + ";".join(f"{F17.format(c[0])},{F17.format(c[1])}" for c in p.centers),
            f"eps = {F17.format(p.eps)}",
            f"n1 = {n1.variant}",
            f"beta = {F17.format(n1.beta)}",
            f"beta1 = {F17.format(n1.beta1)}",
            f"beta2 = {F17.format(n1.beta2)}",
            f"nu = {F17.format(n1.nu)}",
            f"alpha_x = {F17.format(n1.alpha_x)}",
            f"sign = {F17.format(n1.sign)}",
            f"floor = {F17.format(n1.floor)}",
            f"alpha = {F17.format(s.alpha)}",
            f"n_states = {s.n_states}",
            "",
            "[fem]",
            f"degree = {self.degree}",
        ]
        if self.quad_order is not None:
            lines.append(f"quad_order = {self.quad_order}")
        lines += [
            "",
            "[afem]",
            f"theta = {F17.format(self.afem.theta)}",
            f"strategy = {self.afem.strategy}",
            f"eta_tol = {F17.format(self.afem.eta_tol)}",
            f"max_dof = {self.afem.max_dof}",
            f"max_iter = {self.afem.max_iter}",
            "",
            "[scf]",
            f"mixing = {F17.format(sc.mixing)}",
            f"tol_density = {F17.format(sc.tol_density)}",
            f"tol_eigen = {F17.format(sc.tol_eigen)}",
            f"max_outer = {sc.max_outer}",
            f"eigen_tol = {F17.format(sc.eigen_tol)}",
            f"eigen_max_iter = {sc.eigen_max_iter}",
            f"poisson_tol = {F17.format(sc.poisson_tol)}",
            f"seed = {sc.seed}",
            "",
            "[output]",
            f"dir = {self.out_dir}",
            "",
        ]
        return "\n".join(lines)


def _key_lines(path_or_text, is_text=False):
    """Map (section, key) -> 1-based line number for error anchoring."""
    text = path_or_text if is_text else open(path_or_text).read()
    out, section = {}, ""
    for i, ln in enumerate(text.splitlines(), start=1):
        s = ln.strip()
        if not s or s.startswith(("#", ";")):
            continue
        if s.startswith("[") and s.endswith("]"):
            section = s[1:-1].strip().lower()
        elif "=" in s:
            out[(section, s.split("=", 1)[0].strip().lower())] = i
    return out, text


def parse_config(path_or_text, is_text=False) -> RunConfig:
    lines, text = _key_lines(path_or_text, is_text)
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as err:
        raise ConfigError(f"invalid config: {err}") from err

    for section in cp.sections():
        sec = section.lower()
        if sec not in _SCHEMA:
            ln = min((v for (s, _), v in lines.items() if s == sec), default=0)
            raise ConfigError(f"line {ln}: unknown section [{section}]")
        for key in cp[section]:
            if key.lower() not in _SCHEMA[sec]:
                ln = lines.get((sec, key.lower()), 0)
                raise ConfigError(f"line {ln}: unknown key {key!r} in section [{section}]")

    def get(sec, key, cast, default):
        if cp.has_option(sec, key):
            raw = cp.get(sec, key)
            try:
                return cast(raw)
            except (ValueError, TypeError) as err:
                raise ConfigError(
                    f"line {lines.get((sec, key), 0)}: bad value for {key}: {raw!r}"
                ) from err
        return default

    charges = get("problem", "charges", lambda s: tuple(float(x) for x in s.split(",") if x.strip()), ())
    centers = get(
        "problem", "centers",
        lambda s: tuple(tuple(float(x) for x in c.split(",")) for c in s.split(";") if c.strip()),
        (),
    )
    try:
        pot = Potential(
            kind=get("problem", "potential", str, "none"),
            value=get("problem", "potential_value", float, 0.0),
            gammas=(get("problem", "gamma1", float, 1.0), get("problem", "gamma2", float, 1.0)),
            charges=charges,
            centers=centers,
            eps=get("problem", "eps", float, 0.1),
        )
        n1 = N1Preset(
            variant=get("problem", "n1", str, "none"),
            beta=get("problem", "beta", float, 0.0),
            beta1=get("problem", "beta1", float, 0.0),
            beta2=get("problem", "beta2", float, 0.0),
            nu=get("problem", "nu", float, 1.0),
            alpha_x=get("problem", "alpha_x", float, 2.0 / 3.0),
            sign=get("problem", "sign", float, 1.0),
            floor=get("problem", "floor", float, 1e-12),
        )
        spec = ProblemSpec(
            kappa=get("problem", "kappa", float, 1.0),
            potential=pot,
            n1=n1,
            alpha=get("problem", "alpha", float, 0.0),
            n_states=get("problem", "n_states", int, 1),
        )
        scf = ScfOptions(
            mixing=get("scf", "mixing", float, 0.3),
            tol_density=get("scf", "tol_density", float, 1e-7),
            tol_eigen=get("scf", "tol_eigen", float, 1e-8),
            max_outer=get("scf", "max_outer", int, 200),
            eigen_tol=get("scf", "eigen_tol", float, 1e-9),
            eigen_max_iter=get("scf", "eigen_max_iter", int, 2000),
            poisson_tol=get("scf", "poisson_tol", float, 1e-10),
            seed=get("scf", "seed", int, ScfOptions().seed),
        )
        degree = get("fem", "degree", int, 1)
        quad_order = get("fem", "quad_order", int, None)
        afem = AfemOptions(
            theta=get("afem", "theta", float, 0.5),
            degree=degree,
            quad_order=quad_order,
            strategy=get("afem", "strategy", str, "maximum"),
            scf=scf,
            eta_tol=get("afem", "eta_tol", float, 0.0),
            max_dof=get("afem", "max_dof", int, 20000),
            max_iter=get("afem", "max_iter", int, 100),
        )
        if afem.strategy not in ("maximum", "dorfler"):
            raise ConfigError(f"unknown marking strategy {afem.strategy!r}")
        kind = get("domain", "kind", str, "unit_square")
        if kind not in ("unit_square", "rectangle", "l_shape", "file"):
            raise ConfigError(
                f"line {lines.get(('domain', 'kind'), 0)}: unknown domain kind {kind!r}"
            )
        return RunConfig(
            domain_kind=kind,
            rect=(
                get("domain", "x0", float, 0.0),
                get("domain", "x1", float, 1.0),
                get("domain", "y0", float, 0.0),
                get("domain", "y1", float, 1.0),
            ),
            mesh_path=get("domain", "path", str, ""),
            pre_uniform=get("domain", "uniform_refine", int, 0),
            pre_bisect_all=get("domain", "bisect_all", int, 0),
            spec=spec,
            degree=degree,
            quad_order=quad_order,
            afem=afem,
            out_dir=get("output", "dir", str, "out"),
        )
    except ConfigError:
        raise
    except ValueError as err:
        raise ConfigError(f"invalid config value: {err}") from err


# ---------------------------------------------------------------------------
# afem run + artifacts

def _write(path, text):
    with open(path, "w") as f:
        f.write(text)


def run(config_path: str) -> int:
    """Execute an AFEM run; returns the process exit status."""
    try:
        cfg = parse_config(config_path)
    except (ConfigError, OSError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2

    out_dir = os.environ.get("OUT_DIR", cfg.out_dir)
    os.makedirs(out_dir, exist_ok=True)
    _write_manifest(out_dir, cfg)

    try:
        mesh = cfg.build_mesh()
    except (NlafemError, OSError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2

    history = None
    status = 0
    try:
        history = afem_run(cfg.spec, mesh, cfg.afem)
    except NlafemError as err:
        history = getattr(err, "history", None)
        print(f"solver error: {err}", file=sys.stderr)
        status = 3

    if history is not None and history.records:
        _write(os.path.join(out_dir, "history.csv"), history.to_csv())
    if history is not None and history.final_mesh is not None:
        _write(os.path.join(out_dir, "mesh_final.txt"), export_mesh(history.final_mesh))
    if history is not None and history.final_state is not None:
        rows = ["scf_iter,density_residual,eig_change,lambda_1"]
        for it, dres, dch, lam in history.final_state.trace:
            dch_s = F17.format(dch) if math.isfinite(dch) else "inf"
            rows.append(f"{it},{F17.format(dres)},{dch_s},{F17.format(lam)}")
        _write(os.path.join(out_dir, "scf_trace.csv"), "\n".join(rows) + "\n")
    if status == 0:
        rec = history.records[-1]
        print(
            f"done: {len(history.records)} iterations, {rec.dofs} dofs, "
            f"eta {F17.format(rec.eta)}, stop: {history.stop_reason}"
        )
    return status


def _write_manifest(out_dir, cfg: RunConfig):
    import scipy

    echo = cfg.to_text()
    body = (
        "# run manifest\n"
        f"# nlafem {__version__}, numpy {np.__version__}, scipy {scipy.__version__}, "
        f"python {sys.version.split()[0]}\n"
        f"# seed {cfg.afem.scf.seed}\n" + echo
    )
    _write(os.path.join(out_dir, "manifest.txt"), body)


# ---------------------------------------------------------------------------
# history comparison

def _read_history(path):
    try:
        with open(path) as f:
            text = f.read()
    except OSError as err:
        raise ParseError(f"{path}: {err}") from err
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if len(lines) < 2:
        raise ParseError(f"{path}: empty or header-only history")
    header = lines[0].split(",")
    rows = []
    for i, ln in enumerate(lines[1:], start=2):
        parts = ln.split(",")
        if len(parts) != len(header):
            raise ParseError(f"{path}:{i}: expected {len(header)} cells, got {len(parts)}")
        try:
            rows.append([float(x) for x in parts])
        except ValueError as err:
            raise ParseError(f"{path}:{i}: non-numeric cell ({err})") from err
    return header, np.array(rows)


def _loglog_slope(x, y):
    m = (x > 0) & (y > 0) & np.isfinite(y)
    if m.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(x[m]), np.log(y[m]), 1)[0])


def compare_histories(path_a: str, path_b: str) -> dict:
    """Per-column log-log slopes vs DOFs and final-value deltas."""
    ha, a = _read_history(path_a)
    hb, b = _read_history(path_b)
    if ha != hb:
        raise ParseError(f"incompatible columns: {ha} vs {hb}")
    dofs_i = ha.index("dofs")
    report = {"columns": ha, "slopes_a": {}, "slopes_b": {}, "final_delta": {}}
    for j, name in enumerate(ha):
        if name in ("k", "dofs"):
            continue
        report["slopes_a"][name] = _loglog_slope(a[:, dofs_i], np.abs(a[:, j]))
        report["slopes_b"][name] = _loglog_slope(b[:, dofs_i], np.abs(b[:, j]))
        report["final_delta"][name] = float(b[-1, j] - a[-1, j])
    return report


# ---------------------------------------------------------------------------
# witness configs

_WITNESS_KEYS = {"mode", "budget", "x0", "x1", "y0", "y1", "z0", "z1"}


def _parse_fracpoly(section) -> FracPoly:
    terms = {}
    for key, raw in section.items():
        parts = raw.split()
        if len(parts) != 4:
            raise ConfigError(f"term {key!r}: expected 'coeff e1 e2 e3', got {raw!r}")
        c = float(Fraction(parts[0]))
        e = tuple(Fraction(x) for x in parts[1:])
        terms[e] = terms.get(e, 0.0) + c
    return FracPoly(terms)


def run_witness(config_path: str) -> int:
    lines, text = _key_lines(config_path)
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    try:
        if "witness" not in cp:
            raise ConfigError("missing [witness] section")
        for key in cp["witness"]:
            if key not in _WITNESS_KEYS:
                raise ConfigError(
                    f"line {lines.get(('witness', key), 0)}: unknown key {key!r} in [witness]"
                )
        w = cp["witness"]
        mode = w.get("mode", "nonvanishing")
        budget = int(w.get("budget", "1000"))
        box = (
            (float(w.get("x0", "0")), float(w.get("x1", "1"))),
            (float(w.get("y0", "0")), float(w.get("y1", "1"))),
            (float(w.get("z0", "0")), float(w.get("z1", "1"))),
        )
        if mode == "nonvanishing":
            if "poly" not in cp:
                raise ConfigError("nonvanishing mode needs a [poly] section")
            p = _parse_fracpoly(cp["poly"])
            pt = nonvanishing_witness(p, box, budget)
        elif mode == "logsum":
            terms = []
            i = 1
            while f"p{i}" in cp:
                if f"q{i}" not in cp:
                    raise ConfigError(f"[p{i}] has no matching [q{i}]")
                terms.append((_parse_fracpoly(cp[f"p{i}"]), _parse_fracpoly(cp[f"q{i}"])))
                i += 1
            if not terms:
                raise ConfigError("logsum mode needs [p1]/[q1] sections")
            pt = logsum_witness(terms, box, budget)
        else:
            raise ConfigError(f"unknown witness mode {mode!r}")
    except (ConfigError, ValueError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except NlafemError as err:
        print(f"solver error: {err}", file=sys.stderr)
        return 3
    if pt is None:
        print("no witness found (inconclusive)")
    else:
        print("witness " + " ".join(F17.format(x) for x in pt))
    return 0


# ---------------------------------------------------------------------------
# entry point

def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="nlafem", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="cmd", required=True)
    p_afem = sub.add_parser("afem", help="run the adaptive eigenvalue loop")
    p_afem.add_argument("config")
    p_ann = sub.add_parser("annihilator", help="emit an exact annihilator polynomial")
    p_ann.add_argument("--n", type=int, required=True)
    p_ann.add_argument("--k", type=int, required=True)
    p_ann.add_argument("--out", default="-")
    p_wit = sub.add_parser("witness", help="numeric witness search")
    p_wit.add_argument("config")
    p_cmp = sub.add_parser("compare", help="compare two history CSVs")
    p_cmp.add_argument("a")
    p_cmp.add_argument("b")
    args = parser.parse_args(argv)

    if args.cmd == "afem":
        return run(args.config)
    if args.cmd == "annihilator":
        try:
            text = serialize_multipoly(annihilator(args.n, args.k))
        except (ValueError, NlafemError) as err:
            print(f"error: {err}", file=sys.stderr)
            return 2
        if args.out == "-":
            sys.stdout.write(text)
        else:
            _write(args.out, text)
        return 0
    if args.cmd == "witness":
        return run_witness(args.config)
    try:
        report = compare_histories(args.a, args.b)
    except ParseError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    for name in report["slopes_a"]:
        print(
            f"{name}: slope_a {F17.format(report['slopes_a'][name])} "
            f"slope_b {F17.format(report['slopes_b'][name])} "
            f"final_delta {F17.format(report['final_delta'][name])}"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
