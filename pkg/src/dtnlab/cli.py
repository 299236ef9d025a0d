"""Command-line experiment harness.

Every command reads an optional flat ``key = value`` config file, applies
``key=value`` overrides from the command line and writes its results
(CSV/JSON) under ``--out``. A ``report.json`` lists the invariant checks
that decide the exit status.

Exit codes: 0 all checks passed, 1 an invariant check failed, 2 bad
config or usage (nothing written), 3 solver or numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .assembly import Potential, assemble
from .duality import DualityError, count_d, solve_s_k, trace_robin_curves
from .geometry import Annulus, Disk, MeshError, Rectangle, mesh_domain
from .linalg import EigenSolverError
from .nodal import nodal_reports, reports_to_csv, tail_max_ratio
from .oracle import OracleError, bessel_zero, disk_dtn_sigma, disk_dtn_spectrum
from .rayleigh import RayleighError, btilde_probe, check_lemma, weyl_fit
from .spectra import SpectrumError, dirichlet_spectrum, robin_spectrum, steklov_spectrum

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3

COMMANDS = {
    "solve": "spectrum",
    "duality": "duality",
    "nodal": "nodal-sweep",
    "keyexample": "keyexample",
    "lemma": "lemma-check",
    "weyl": "weyl",
    "btilde": "btilde",
}
EXPERIMENTS = set(COMMANDS.values())


class ConfigError(ValueError):
    pass


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _floats(s: str) -> tuple[float, ...]:
    return tuple(float(x) for x in s.split(",") if x.strip())


_TYPES = {
    "experiment": str,
    "domain": str,
    "radius": float,
    "inner": float,
    "outer": float,
    "width": float,
    "height": float,
    "h": float,
    "max_vertices": int,
    "q": float,
    "mu": _floats,
    "lam": float,
    "problem": str,
    "sigma": float,
    "count": int,
    "method": str,
    "deflate": _bool,
    "vectors": _bool,
    "k_min": int,
    "k_max": int,
    "sigma_lo": float,
    "sigma_hi": float,
    "n_grid": int,
    "mono_tol": float,
    "residual_tol": float,
    "mismatch_tol": float,
    "zero_tol": float,
    "n": int,
    "eps": float,
    "oracle_rtol": float,
    "epsilon": float,
    "delta": float,
    "k_check": int,
    "growth_tol": float,
    "weyl_tol": float,
}

_TOLERANCES = ("mono_tol", "residual_tol", "mismatch_tol", "zero_tol", "oracle_rtol", "epsilon", "growth_tol", "weyl_tol")

_COMMON = {
    "domain": "disk",
    "radius": 1.0,
    "inner": 0.5,
    "outer": 1.0,
    "width": 1.0,
    "height": 1.0,
    "h": 0.05,
    "max_vertices": 200_000,
    "q": 0.0,
    "lam": 0.0,
    "zero_tol": 1e-8,
}

DEFAULTS = {
    "spectrum": {"problem": "steklov", "count": 12, "sigma": 0.0, "method": "auto", "deflate": True, "vectors": False},
    "duality": {"k_max": 6, "sigma_lo": -50.0, "sigma_hi": 50.0, "n_grid": 41, "mono_tol": 1e-8,
                "residual_tol": 1e-4, "mismatch_tol": 0.01},
    "nodal-sweep": {"k_max": 8},
    "keyexample": {"n": 3, "eps": 0.1},
    "lemma-check": {"epsilon": 0.25, "k_min": 10, "k_max": 30},
    "weyl": {"count": 40, "weyl_tol": 0.15},
    "btilde": {"k_max": 20, "k_check": 10, "growth_tol": 0.2},
}


@dataclass
class ExperimentConfig:
    experiment: str
    values: dict

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)


def parse_pairs(lines, source: str) -> dict:
    out = {}
    for no, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{no}: expected key = value, got {raw.strip()!r}")
        key, value = (x.strip() for x in line.split("=", 1))
        if key not in _TYPES:
            raise ConfigError(f"{source}:{no}: unknown key {key!r}")
        try:
            out[key] = _TYPES[key](value)
        except ValueError as exc:
            raise ConfigError(f"{source}:{no}: bad value for {key}: {exc}") from None
    return out


def build_config(command: str, config_path: str | None, overrides: list[str]) -> ExperimentConfig:
    values = {}
    if config_path is not None:
        try:
            text = Path(config_path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {config_path}: {exc}") from None
        values.update(parse_pairs(text.splitlines(), config_path))
    values.update(parse_pairs(overrides, "command line"))
    exp = values.pop("experiment", None)
    if command == "run":
        if exp is None:
            raise ConfigError("'run' needs experiment = <name> in the config")
    elif exp is not None and exp != COMMANDS[command]:
        raise ConfigError(f"config names experiment {exp!r} but the command runs {COMMANDS[command]!r}")
    exp = exp or COMMANDS[command]
    if exp not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {exp!r}; expected one of {', '.join(sorted(EXPERIMENTS))}")
    if "q" in values and "mu" in values:
        raise ConfigError("give either q or mu (q = -mu), not both")
    merged = {**_COMMON, **DEFAULTS[exp], **values}
    for key in _TOLERANCES:
        if key in merged and not merged[key] > 0:
            raise ConfigError(f"tolerance {key} must be positive")
    if not merged["h"] > 0:
        raise ConfigError("h must be positive")
    if merged["domain"] not in ("disk", "annulus", "rectangle"):
        raise ConfigError(f"unknown domain {merged['domain']!r}")
    if merged.get("problem", "steklov") not in ("steklov", "robin", "dirichlet"):
        raise ConfigError(f"unknown problem {merged['problem']!r}")
    if merged.get("method", "auto") not in ("auto", "dense", "lanczos"):
        raise ConfigError(f"unknown method {merged['method']!r}")
    if "mu" in merged and len(merged["mu"]) == 0:
        raise ConfigError("mu list is empty")
    cfg = ExperimentConfig(exp, merged)
    try:
        _domain(cfg)
    except ValueError as exc:
        raise ConfigError(f"bad domain parameters: {exc}") from None
    return cfg


# ---------------------------------------------------------------- runners


class Checks:
    def __init__(self):
        self.items = []

    def add(self, name: str, ok: bool, **detail):
        self.items.append({"name": name, "ok": bool(ok), **detail})

    @property
    def ok(self) -> bool:
        return all(c["ok"] for c in self.items)


def _domain(cfg: ExperimentConfig):
    kind = cfg["domain"]
    if kind == "disk":
        return Disk(cfg["radius"])
    if kind == "annulus":
        return Annulus(cfg["inner"], cfg["outer"])
    return Rectangle(cfg["width"], cfg["height"])


def _potentials(cfg: ExperimentConfig) -> list[float]:
    if "mu" in cfg.values:
        return [-m for m in cfg["mu"]]
    return [cfg["q"]]


def _mesh(cfg: ExperimentConfig, h: float | None = None):
    return mesh_domain(_domain(cfg), cfg["h"] if h is None else h, max_vertices=cfg["max_vertices"])


def _fm(cfg: ExperimentConfig, q: float | None = None):
    q = _potentials(cfg)[0] if q is None else q
    return assemble(_mesh(cfg), Potential.constant(q))


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])
    return buf.getvalue()


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def run_spectrum(cfg, files, checks):
    fm = _fm(cfg)
    kind = cfg["problem"]
    if kind == "steklov":
        spec = steklov_spectrum(fm, cfg["lam"], cfg["count"], deflate=cfg["deflate"], method=cfg["method"])
    elif kind == "robin":
        spec = robin_spectrum(fm, cfg["sigma"], cfg["count"])
    else:
        spec = dirichlet_spectrum(fm, cfg["count"])
    files["spectrum.csv"] = _csv(["k", "value"], [(k + 1, v) for k, v in enumerate(spec.values)])
    files["spectrum.json"] = spec.to_json(cfg["vectors"]) + "\n"
    checks.add("ascending", bool(np.all(np.diff(spec.values) >= 0)))


def run_duality(cfg, files, checks):
    fm = _fm(cfg)
    lam, K = cfg["lam"], cfg["k_max"]
    curve = trace_robin_curves(fm, cfg["sigma_lo"], cfg["sigma_hi"], cfg["n_grid"], K, lam=lam,
                               tol=cfg["mono_tol"], check=False)
    files["robin_curves.csv"] = curve.to_csv()
    checks.add("robin_monotone", curve.monotone, violations=[list(v) for v in curve.violations[:10]])
    direct = steklov_spectrum(fm, lam, count=K).values
    d = count_d(fm, lam)
    certs = []
    for k in range(1, K + 1):
        c = solve_s_k(fm, lam, k, d=d, direct=direct)
        identity = abs(float(robin_spectrum(fm, direct[k - 1], k + d).values[k + d - 1]) - lam)
        rel = c.mismatch / max(abs(c.sigma_k_direct), 1.0)
        certs.append({**json.loads(c.to_json()), "identity_residual": identity, "relative_mismatch": rel})
        checks.add(f"identity_k{k}", identity <= cfg["residual_tol"] * (1 + abs(direct[k - 1])), value=identity)
        checks.add(f"mismatch_k{k}", rel <= cfg["mismatch_tol"], value=rel)
    s = [c["s_k"] for c in certs]
    checks.add("s_k_ordered", bool(np.all(np.diff(s) >= -1e-9)))
    files["duality.json"] = _json({"lam": lam, "d": d, "certificates": certs})


def run_nodal(cfg, files, checks):
    mesh = _mesh(cfg)
    summary = []
    qs = _potentials(cfg)
    for i, q in enumerate(qs):
        fm = assemble(mesh, Potential.constant(q))
        spec = steklov_spectrum(fm, cfg["lam"], count=cfg["k_max"])
        d = count_d(fm, cfg["lam"])
        reps = nodal_reports(fm, spec, d, cfg["zero_tol"])
        name = "nodal.csv" if len(qs) == 1 else f"nodal_{i:02d}.csv"
        files[name] = reports_to_csv(reps)
        bad = [r.k for r in reps if not r.theorem1_ok]
        checks.add(f"theorem1_q{q:g}", not bad, violations=bad)
        decile = max(1, len(reps) // 10)
        summary.append({"q": q, "d": d, "file": name, "violations": bad,
                        "tail_max_ratio": float(tail_max_ratio(reps)[-decile])})
    files["nodal.json"] = _json({"runs": summary})


def keyexample_report(n: int, eps: float, target_h: float, max_vertices: int = 200_000,
                      zero_tol: float = 1e-8, radius_check: int = 12) -> dict:
    """Sharpness example on the unit disk: ``q = -mu`` with ``mu = j_{n,1}^2 - eps``.

    Raises :class:`OracleError` when the oracle's lowest DtN branch is not ``n``.
    """
    if not 0 <= n <= 8:
        raise OracleError("keyexample supports 0 <= n <= 8")
    mu = bessel_zero(n, 1) ** 2 - eps
    branches = [b for b in disk_dtn_spectrum(mu, n + radius_check, per_branch=True) if not b.resonant]
    lowest = min(branches, key=lambda b: b.sigma)
    if lowest.n != n:
        raise OracleError(
            f"eps={eps} is too large: the lowest oracle branch is n={lowest.n} "
            f"(sigma={lowest.sigma:.6g}), not n={n} (sigma={disk_dtn_sigma(n, mu):.6g})"
        )
    oracle_sigma = disk_dtn_sigma(n, mu)
    mesh = mesh_domain(Disk(1.0), target_h, max_vertices=max_vertices)
    fm = assemble(mesh, Potential.constant(-mu))
    d = count_d(fm, 0.0)
    spec = steklov_spectrum(fm, 0.0, count=min(4, len(mesh.boundary_vertices)))
    reps = nodal_reports(fm, spec, d, zero_tol)
    # the ground state is degenerate for n >= 1; report every member near sigma_1
    ground = [r for r in reps if abs(r.sigma_k - reps[0].sigma_k) <= 0.05 * abs(reps[0].sigma_k)]
    r1 = reps[0]
    rel = abs(r1.sigma_k - oracle_sigma) / abs(oracle_sigma)
    return {
        "n": n,
        "eps": eps,
        "mu": mu,
        "target_h": target_h,
        "h": mesh.h,
        "n_vertices": mesh.n_vertices,
        "d": d,
        "sigma_1": r1.sigma_k,
        "sigma_oracle": oracle_sigma,
        "sigma_rel_err": rel,
        "N_1": r1.N_k,
        "M_1": r1.M_k,
        "bound": 1 + d,
        "bound_ok": r1.theorem1_ok,
        "courant_exceeded": r1.N_k > 1,
        "ground_states": [{"k": r.k, "sigma": r.sigma_k, "N": r.N_k, "M": r.M_k} for r in ground],
        "stated_count": n,
        "expected_real_count": 2 * n if n > 0 else 1,
        "spectrum": spec.values.tolist(),
    }


def run_keyexample(cfg, files, checks):
    rep = keyexample_report(cfg["n"], cfg["eps"], cfg["h"], cfg["max_vertices"], cfg["zero_tol"])
    files["keyexample.json"] = _json(rep)
    checks.add("theorem1", rep["bound_ok"], N_1=rep["N_1"], bound=rep["bound"])
    if "oracle_rtol" in cfg.values:
        checks.add("oracle_sigma_1", rep["sigma_rel_err"] <= cfg["oracle_rtol"], value=rep["sigma_rel_err"])


def run_lemma(cfg, files, checks):
    fm = _fm(cfg)
    spec = steklov_spectrum(fm, cfg["lam"], count=cfg["k_max"])
    rep = check_lemma(fm, spec, cfg["epsilon"], (cfg["k_min"], cfg["k_max"]), cfg.get("delta"), cfg["zero_tol"])
    files["lemma.csv"] = rep.to_csv()
    files["lemma.json"] = _json({"epsilon": rep.epsilon, "delta": rep.delta, "N": rep.N,
                                 "max_ratio": rep.max_ratio, "minmax_ok": rep.minmax_ok})
    checks.add("lemma_N_exists", rep.N is not None, N=rep.N)
    checks.add("minmax", rep.minmax_ok)


def run_weyl(cfg, files, checks):
    fm = _fm(cfg)
    spec = steklov_spectrum(fm, cfg["lam"], count=cfg["count"])
    fit = weyl_fit(spec.values, fm.mesh.perimeter)
    files["spectrum.csv"] = _csv(["k", "value"], [(k + 1, v) for k, v in enumerate(spec.values)])
    rel = abs(fit.predicted_constant - math.pi) / math.pi
    files["weyl.json"] = _json({"slope": fit.slope, "intercept": fit.intercept, "r_squared": fit.r_squared,
                                "predicted_constant": fit.predicted_constant, "relative_error": rel,
                                "boundary_length": fm.mesh.perimeter})
    checks.add("weyl_constant", rel <= cfg["weyl_tol"], value=rel)


def run_btilde(cfg, files, checks):
    fm = _fm(cfg)
    spec = steklov_spectrum(fm, cfg["lam"], count=cfg["k_max"])
    rep = btilde_probe(fm, spec, cfg["k_max"])
    files["btilde.csv"] = rep.to_csv()
    lo, hi = rep.max_upto(cfg["k_check"]), rep.max_r
    growth = hi / lo - 1.0 if lo > 0 else math.inf
    files["btilde.json"] = _json({"max_r": hi, f"max_r_upto_{cfg['k_check']}": lo, "growth": growth})
    checks.add("bounded_growth", growth <= cfg["growth_tol"], value=growth)


RUNNERS = {
    "spectrum": run_spectrum,
    "duality": run_duality,
    "nodal-sweep": run_nodal,
    "keyexample": run_keyexample,
    "lemma-check": run_lemma,
    "weyl": run_weyl,
    "btilde": run_btilde,
}

_SOLVER_ERRORS = (SpectrumError, EigenSolverError, DualityError, RayleighError, OracleError, MeshError,
                  np.linalg.LinAlgError, ArithmeticError, RuntimeError)


def run(cfg: ExperimentConfig, out: Path) -> int:
    files: dict[str, str] = {}
    checks = Checks()
    try:
        RUNNERS[cfg.experiment](cfg, files, checks)
        status = EXIT_OK if checks.ok else EXIT_CHECK
        error = None
    except ConfigError:
        raise
    except _SOLVER_ERRORS as exc:
        status, error = EXIT_SOLVER, f"{type(exc).__name__}: {exc}"
    report = {"experiment": cfg.experiment, "ok": status == EXIT_OK, "exit_code": status,
              "checks": checks.items, "error": error,
              "config": {k: list(v) if isinstance(v, tuple) else v for k, v in sorted(cfg.values.items())}}
    files["report.json"] = _json(report)
    out.mkdir(parents=True, exist_ok=True)
    for name in sorted(files):
        (out / name).write_text(files[name])
    return status


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dtnlab", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in [*COMMANDS, "run"]:
        sp = sub.add_parser(name, help=f"run the {COMMANDS.get(name, 'configured')} experiment")
        sp.add_argument("--config", help="flat key = value config file")
        sp.add_argument("--out", default="out", help="output directory (default: ./out)")
        sp.add_argument("overrides", nargs="*", metavar="key=value")
    return p


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        cfg = build_config(args.command, args.config, args.overrides)
        status = run(cfg, Path(args.out))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    summary = "ok" if status == EXIT_OK else ("check failed" if status == EXIT_CHECK else "solver failure")
    print(f"{cfg.experiment}: {summary} -> {args.out}")
    return status


if __name__ == "__main__":
    sys.exit(main())
