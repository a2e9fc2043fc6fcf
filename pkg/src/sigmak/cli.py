"""Batch front end: ``sigmak <command> --config run.json --out DIR [--quiet]``.

Exit codes: 0 success, 2 invalid configuration (nothing written), 3 numerical
failure (diagnostics.json written), 4 I/O failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import dataclass, field

import jsonschema
import numpy as np

from . import __version__
from .barriers import SphereData, make_barriers
from .entire import ExhaustionPlan, exhaust
from .errors import SigmakError
from .fields import GraphField, GridField
from .radial import RadialParams, asymptote_extract, integrate_profile
from .solver import (Ball, SolitonRHS, rhs_from_config, solve_dirichlet_dual,
                     solve_dirichlet_primal)
from .verify import (CheckResult, check_curvature_bounded, check_flow_residual,
                     check_gradient_bound_cutoff, check_pogorelov, check_sandwich_stages,
                     check_support_band, verification_report)

log = logging.getLogger("sigmak")

COMMANDS = ("radial", "dirichlet", "entire", "soliton", "verify")
EXIT_SCHEMA, EXIT_NUMERICAL, EXIT_IO = 2, 3, 4

_num = {"type": "number"}
_int = {"type": "integer"}
_RHS = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["constant", "radial_poly", "separable", "soliton"]},
        "constants": {"type": "array", "items": _num},
        "a": {"type": "array", "items": _num},
    },
    "additionalProperties": False,
}
_PHI = {"type": "object", "properties": {"coeffs": {"type": "array", "items": _num}}}

SCHEMAS = {
    "radial": {
        "type": "object",
        "required": ["n", "k"],
        "properties": {"n": _int, "k": _int, "rhs_kind": {"enum": ["soliton", "constant"]},
                       "C": _num, "c": _num, "r_max": _num, "tol": _num},
        "additionalProperties": False,
    },
    "dirichlet": {
        "type": "object",
        "required": ["n", "k", "rhs"],
        "properties": {
            "n": _int, "k": _int, "form": {"enum": ["primal", "dual"]}, "rhs": _RHS,
            "radius": _num, "h": _num, "m": _int, "tol": _num, "max_iter": _int,
            "boundary": {"type": "object", "required": ["kind"], "properties": {
                "kind": {"enum": ["hyperboloid", "constant", "radial_soliton"]},
                "value": _num, "shift": _num}},
        },
        "additionalProperties": False,
    },
    "entire": {
        "type": "object",
        "required": ["mode", "n", "k", "rhs"],
        "properties": {
            "mode": {"enum": ["theorem1", "theorem2"]}, "n": _int, "k": _int, "rhs": _RHS,
            "phi": _PHI, "sequence": {"type": "array", "items": _num}, "stages": _int,
            "watch_radius": _num, "h": _num, "dual_h": _num, "M": _num, "c1": _num, "c2": _num,
            "tol": _num, "tol_entire": _num,
        },
        "additionalProperties": False,
    },
    "soliton": {
        "type": "object",
        "required": ["n", "k", "C"],
        "properties": {
            "n": _int, "k": _int, "C": _num, "phi": _PHI,
            "sequence": {"type": "array", "items": _num}, "stages": _int,
            "inner_levels": {"type": "array", "items": _num},
            "watch_radius": _num, "h": _num, "dual_h": _num, "M": _num, "tol": _num,
            "tol_entire": _num,
        },
        "additionalProperties": False,
    },
    "verify": {
        "type": "object",
        "required": ["bundle"],
        "properties": {"bundle": {"type": "string"}},
        "additionalProperties": False,
    },
}
CONFIG_SCHEMA = {
    "type": "object",
    "required": ["spec"],
    "properties": {
        "command": {"enum": list(COMMANDS)},
        "seed": _int,
        "log_level": {"enum": ["DEBUG", "INFO", "WARNING", "ERROR"]},
        "spec": {"type": "object"},
    },
    "additionalProperties": False,
}


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    spec: dict
    output_dir: str
    seed: int = 0
    log_level: str = "INFO"
    source: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, cfg: dict, command: str | None, output_dir: str) -> "RunConfig":
        try:
            jsonschema.validate(cfg, CONFIG_SCHEMA)
        except jsonschema.ValidationError as exc:
            raise ConfigError(f"config: {exc.message}") from None
        cmd = command or cfg.get("command")
        if cmd not in COMMANDS:
            raise ConfigError(f"unknown command {cmd!r}")
        if cfg.get("command") not in (None, cmd):
            raise ConfigError(f"config is for {cfg['command']!r}, not {cmd!r}")
        spec = cfg["spec"]
        try:
            jsonschema.validate(spec, SCHEMAS[cmd])
        except jsonschema.ValidationError as exc:
            path = "/".join(str(p) for p in exc.absolute_path)
            raise ConfigError(f"spec{'/' + path if path else ''}: {exc.message}") from None
        _semantic_checks(cmd, spec)
        return cls(cmd, spec, output_dir, int(cfg.get("seed", 0)), cfg.get("log_level", "INFO"), cfg)


def _semantic_checks(cmd, s):
    if cmd == "verify":
        return
    n, k = s["n"], s["k"]
    if n not in (2, 3) and cmd != "radial":
        raise ConfigError("grid solvers support n = 2 or 3")
    if n < 2:
        raise ConfigError("n must be at least 2")
    if not 1 <= k <= n:
        raise ConfigError(f"need 1 <= k <= n, got k={k}, n={n}")
    C = s.get("C", 2.0)
    radial_soliton = cmd == "radial" and s.get("rhs_kind", "soliton") == "soliton"
    if (cmd == "soliton" or radial_soliton) and not C > 1:
        raise ConfigError("soliton constant C must exceed 1")
    rhs = s.get("rhs")
    if rhs is not None:
        kind = rhs["kind"]
        const = rhs.get("constants", [])
        if kind in ("constant", "soliton") and len(const) != 1:
            raise ConfigError(f"{kind} right-hand side needs one constant")
        if kind == "constant" and not const[0] > 0:
            raise ConfigError("constant right-hand side must be positive")
        if kind == "soliton" and not const[0] > 1:
            raise ConfigError("soliton constant C must exceed 1")
        if kind == "separable" and (len(const) != 2 or not const[0] > const[1] >= 0):
            raise ConfigError("separable right-hand side needs constants [b0, beta] with b0 > beta >= 0")
        a = rhs.get("a", [1.0]) if kind == "separable" else const
        if kind in ("separable", "radial_poly") and (not a or a[0] <= 0 or min(a) < 0):
            raise ConfigError("radial polynomial needs c0 > 0 and nonnegative coefficients")
    for key in ("h", "dual_h", "M", "r_max", "tol", "watch_radius", "radius"):
        if key in s and not s[key] > 0:
            raise ConfigError(f"{key} must be positive")
    seq = s.get("sequence")
    if seq is not None and any(b <= a for a, b in zip(seq, seq[1:])):
        raise ConfigError("sequence must be strictly increasing")
    if "phi" in s and "coeffs" in s["phi"]:
        m = len(s["phi"]["coeffs"])
        if (n == 2 and m % 2 == 0) or (n == 3 and m > 9):
            raise ConfigError("phi coefficients: odd count [a0, a1, b1, ...] for n=2, at most 9 for n=3")


# ---------------------------------------------------------------------------
# artifacts
# ---------------------------------------------------------------------------

def _strip_timing(obj):
    if isinstance(obj, dict):
        return {k: _strip_timing(v) for k, v in obj.items() if k != "wall_time"}
    if isinstance(obj, list):
        return [_strip_timing(v) for v in obj]
    return obj


def write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_strip_timing(_jsonable(obj)), fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


def _jsonable(obj):
    from .fields import _jsonable as j
    return j(obj)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(cfg: RunConfig, files):
    out = cfg.output_dir
    man = {
        "command": cfg.command,
        "config": cfg.source,
        "seed": cfg.seed,
        "version": __version__,
        "files": {os.path.basename(f): sha256_file(f) for f in sorted(files)},
    }
    write_json(os.path.join(out, "manifest.json"), man)
    return man


def check_manifest(bundle) -> dict:
    path = os.path.join(bundle, "manifest.json")
    if not os.path.isfile(path):
        raise FileNotFoundError(f"no manifest in {bundle!r}")
    with open(path, encoding="utf-8") as fh:
        man = json.load(fh)
    for name, digest in man["files"].items():
        fp = os.path.join(bundle, name)
        if not os.path.isfile(fp):
            raise FileNotFoundError(f"artifact {name} listed in the manifest is missing")
        if sha256_file(fp) != digest:
            raise ValueError(f"hash mismatch for {name}")
    return man


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _phi(spec, n):
    coeffs = spec.get("phi", {}).get("coeffs")
    return SphereData.zero(n) if not coeffs else SphereData.harmonics(n, coeffs)


def _save_field(f: GridField, out, stem, files):
    base = os.path.join(out, stem)
    f.save(base)
    files += [base + ".csv", base + ".json"]


def run_radial(cfg: RunConfig, files):
    s = cfg.spec
    p = RadialParams(s["n"], s["k"], s.get("rhs_kind", "soliton"), C=s.get("C", 2.0), c=s.get("c", 1.0))
    prof = integrate_profile(p, r_max=s.get("r_max", 1e3), tol=s.get("tol", 1e-10))
    out = cfg.output_dir
    prof.to_csv(os.path.join(out, "profile.csv"))
    files.append(os.path.join(out, "profile.csv"))
    report = {"params": p.to_dict(), "status": prof.status}
    if p.soliton:
        rep = asymptote_extract(prof, require_rmax=False)
        report["asymptote"] = rep.to_dict()
        report["z_inf_expected"] = p.log_coeff_exact
    write_json(os.path.join(out, "asymptote.json"), report)
    files.append(os.path.join(out, "asymptote.json"))
    return report


def _dirichlet_boundary(s, form):
    b = s.get("boundary", {"kind": "hyperboloid"})
    shift = b.get("shift", 0.0)
    if b["kind"] == "hyperboloid":
        if form == "primal":
            return lambda p: np.sqrt(1 + np.sum(p * p, axis=1)) + shift
        return lambda p: -np.sqrt(1 - np.sum(p * p, axis=1)) + shift
    if b["kind"] == "constant":
        v = b.get("value", 0.0)
        return lambda p: np.full(len(p), v)
    prof = integrate_profile(RadialParams(s["n"], s["k"], "soliton", C=s["rhs"]["constants"][0]))
    if form == "primal":
        return lambda p: prof.height(np.linalg.norm(p, axis=1)) + shift
    return lambda p: prof.dual(np.linalg.norm(p, axis=1)) + shift


def run_dirichlet(cfg: RunConfig, files):
    s = cfg.spec
    n, k = s["n"], s["k"]
    form = s.get("form", "primal")
    rhs = rhs_from_config(s["rhs"])
    g = _dirichlet_boundary(s, form)
    kw = {"h": s.get("h"), "m": s.get("m", None if "h" in s else 65), "tol": s.get("tol", 1e-10),
          "max_iter": s.get("max_iter", 40)}
    radius = s.get("radius", 1.0 if form == "primal" else 0.8)
    if form == "primal":
        f, rep = solve_dirichlet_primal(Ball(radius), rhs, g, n, k, **kw)
    else:
        f, rep = solve_dirichlet_dual(radius, rhs, g, n, k, **kw)
    _save_field(f, cfg.output_dir, "field", files)
    report = {"solve": rep.to_dict(), "residual_ok": rep.residual_norm <= kw["tol"]}
    write_json(os.path.join(cfg.output_dir, "solve_report.json"), report)
    files.append(os.path.join(cfg.output_dir, "solve_report.json"))
    return report


def _plan_from(cfg: RunConfig) -> ExhaustionPlan:
    s = cfg.spec
    n, k = s["n"], s["k"]
    if cfg.command == "soliton":
        mode, rhs = "theorem3", SolitonRHS(s["C"])
    else:
        mode, rhs = s["mode"], rhs_from_config(s["rhs"])
    kw = dict(watch_radius=s.get("watch_radius", 2.0), phi=_phi(s, n), h=s.get("h", 0.125),
              dual_h=s.get("dual_h"), M=s.get("M", 1.0), tol=s.get("tol", 1e-10),
              tol_entire=s.get("tol_entire", 1e-4))
    for key in ("c1", "c2", "inner_levels"):
        if key in s:
            kw[key] = s[key]
    if "sequence" in s:
        return ExhaustionPlan(mode, s["sequence"], n, k, rhs, **kw)
    return ExhaustionPlan.geometric(mode, s.get("stages", 4), n, k, rhs, **kw)


def run_exhaustion(cfg: RunConfig, files):
    plan = _plan_from(cfg)
    out = cfg.output_dir
    f, rep = exhaust(plan)
    for st in rep.stages:
        if st.field is not None:
            _save_field(st.field, out, f"stage_{st.index:02d}", files)
    write_json(os.path.join(out, "exhaustion_report.json"), rep.to_dict())
    files.append(os.path.join(out, "exhaustion_report.json"))
    if f is None:
        raise SigmakError(rep.message)
    _save_field(f, out, "field_K", files)
    return rep.to_dict()


# ---------------------------------------------------------------------------
# verification of bundles
# ---------------------------------------------------------------------------

def _stage_fields(bundle):
    names = sorted(f[:-5] for f in os.listdir(bundle) if f.startswith("stage_") and f.endswith(".json"))
    return [GridField.load(os.path.join(bundle, n)) for n in names]


def verify_bundle(bundle) -> dict:
    if not os.path.isdir(bundle) or not os.listdir(bundle):
        raise FileNotFoundError(f"bundle {bundle!r} is missing or empty")
    man = check_manifest(bundle)
    cmd = man["command"]
    spec = man["config"]["spec"]
    results: list[CheckResult] = []
    if cmd == "radial":
        p = RadialParams(spec["n"], spec["k"], spec.get("rhs_kind", "soliton"), C=spec.get("C", 2.0),
                         c=spec.get("c", 1.0))
        prof = integrate_profile(p, r_max=spec.get("r_max", 1e3), tol=spec.get("tol", 1e-10))
        if p.soliton:
            results += [check_support_band(prof, p.C, p.n, p.k),
                        check_flow_residual(prof, p.C, p.n, p.k, tol=spec.get("tol", 1e-10))]
        results.append(check_curvature_bounded(prof))
    elif cmd == "dirichlet":
        f = GridField.load(os.path.join(bundle, "field"))
        tol = spec.get("tol", 1e-10)
        if spec["rhs"]["kind"] == "soliton":
            C = spec["rhs"]["constants"][0]
            results.append(check_flow_residual(f, C, spec["n"], spec["k"], tol=tol))
        results.append(check_curvature_bounded(f))
    elif cmd == "soliton":
        stages = _stage_fields(bundle)
        C, n, k = spec["C"], spec["n"], spec["k"]
        tol = spec.get("tol", 1e-10)
        primal = [f for f in stages if isinstance(f, GraphField)]
        results.append(check_support_band(primal[-1], C, n, k))
        for i, f in enumerate(primal):
            r = check_flow_residual(f, C, n, k, tol=tol if k == n else None)
            r.name = f"flow_residual_stage_{i}"
            results.append(r)
        results.append(check_curvature_bounded(primal))
        s_val = min(float(np.nanmin(f.values)) for f in primal) + 1.0
        results.append(check_pogorelov(primal, s_val))
        bk = make_barriers(_phi(spec, n), "soliton", n, k, M=spec.get("M", 1.0), C=C)
        results.append(check_gradient_bound_cutoff(primal[-1], lambda x: bk.evaluate(x, 2)[0] + 1e-9,
                                                   bk.scale, name="gradient_bound_soliton"))
    else:
        results += _verify_prescribed(bundle, spec)
    rep = verification_report(results)
    rep["bundle_command"] = cmd
    return rep


def _verify_prescribed(bundle, spec):
    n, k = spec["n"], spec["k"]
    stages = [f for f in _stage_fields(bundle) if isinstance(f, GraphField)]
    tol = spec.get("tol", 1e-10)
    rhs = rhs_from_config(spec["rhs"])
    c = float(rhs.value(np.zeros((1, n)), np.zeros(1), np.zeros((1, n)))[0])
    c1 = spec.get("c1", c)
    b = make_barriers(_phi(spec, n), "prescribed", n, k, M=spec.get("M", 1.0), c1=c1,
                      c2=spec.get("c2", c1))
    dual = spec["mode"] == "theorem1"
    slack = 10 * tol if not dual else 10 * stages[-1].h ** 2
    out = [check_sandwich_stages(stages, b, slack)]
    # successive level stages are ordered on the smaller domain (comparison principle)
    worst = 0.0
    for a, bb in zip(stages, stages[1:]):
        pts = a.points(a.interior)
        diff = a.values[a.interior] - bb.interpolate(pts)
        worst = max(worst, float(np.nanmax(diff)))
    out.append(CheckResult("comparison_principle", worst <= slack, worst, slack,
                           details={"pairs": len(stages) - 1}))
    out.append(check_gradient_bound_cutoff(stages[-1], lambda x: b.evaluate(x, 2)[0] + 1e-9))
    return out


def run_verify(cfg: RunConfig, files):
    rep = verify_bundle(cfg.spec["bundle"])
    path = os.path.join(cfg.output_dir, "verification.json")
    write_json(path, rep)
    files.append(path)
    return rep


RUNNERS = {"radial": run_radial, "dirichlet": run_dirichlet, "entire": run_exhaustion,
           "soliton": run_exhaustion, "verify": run_verify}


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def run(cfg: RunConfig) -> int:
    if cfg.command == "verify" and not os.path.isdir(cfg.spec["bundle"]):
        log.error("bundle %s not found", cfg.spec["bundle"])
        return EXIT_IO
    try:
        os.makedirs(cfg.output_dir, exist_ok=True)
        if not os.access(cfg.output_dir, os.W_OK):
            raise PermissionError(f"{cfg.output_dir} is not writable")
    except OSError as exc:
        log.error("output directory: %s", exc)
        return EXIT_IO
    np.random.seed(cfg.seed)
    files: list = []
    try:
        summary = RUNNERS[cfg.command](cfg, files)
        write_manifest(cfg, files)
    except (SigmakError, ArithmeticError, np.linalg.LinAlgError) as exc:
        log.error("numerical failure: %s", exc)
        diag = {"command": cfg.command, "error": type(exc).__name__, "message": str(exc)}
        report = getattr(exc, "report", None)
        if report is not None and hasattr(report, "to_dict"):
            diag["report"] = report.to_dict()
        try:
            write_json(os.path.join(cfg.output_dir, "diagnostics.json"), diag)
        except OSError:
            return EXIT_IO
        return EXIT_NUMERICAL
    except (OSError, ValueError) as exc:
        if isinstance(exc, OSError) or "hash mismatch" in str(exc):
            log.error("I/O failure: %s", exc)
            return EXIT_IO
        raise
    log.info("%s finished: %d artifact(s) in %s", cfg.command, len(files) + 1, cfg.output_dir)
    if cfg.command == "verify" and not summary.get("passed", False):
        log.warning("some verification checks failed")
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="sigmak", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True)
    ap.add_argument("--out", required=True)
    ap.add_argument("--quiet", action="store_true")
    args = ap.parse_args(argv)
    try:
        with open(args.config, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        print(f"sigmak: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    except json.JSONDecodeError as exc:
        print(f"sigmak: config is not valid JSON: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    try:
        cfg = RunConfig.from_dict(raw, args.command, args.out)
    except ConfigError as exc:
        print(f"sigmak: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    level = logging.WARNING if args.quiet else getattr(logging, cfg.log_level)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
