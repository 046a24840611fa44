"""Command-line interface.

Commands: ``build``, ``sweep``, ``solve-v``, ``verify``, ``export-mesh`` and
``ld-solve``. Settings come from built-in defaults, then an optional flat
``key = value`` config file (``--config``), then command-line flags.

Exit status is 0 on success, 1 on a failed computation or check, and 2 on an
invalid configuration (including inadmissible ``(m, tau, alpha)``). Errors are
also printed to stdout as a one-line JSON object.
"""

import argparse
import csv
import json
import os
import sys
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import __version__, acceptance, ambient, assembly
from .ldsolutions import SCHEMA_VERSION, AdmissibilityError, LDSolution, check_admissible
from .linops import DEFAULT_LMAX
from .quadrature import QuadratureSpec

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2

_QUAD_KEYS = tuple(QuadratureSpec.__dataclass_fields__)
_MESH_KEYS = ("n_ring", "h_max", "foot_r_min")

# key: (type, default, help)
SETTINGS = {
    "m": (int, 2, "number of catenoidal bridges (genus m-1)"),
    "tau": (float, 1e-4, "bridge scale"),
    "ladder": (str, "1e-3,3e-4,1e-4", "comma-separated tau values for sweep"),
    "alpha": (float, 0.5, "gluing exponent, gluing radius tau^alpha"),
    "lmax": (int, DEFAULT_LMAX, "spherical-harmonic band limit of the LD solve"),
    "admissibility": (str, "strict", "strict or relaxed gluing-scale rule (sweep default: relaxed)"),
    "target_v": (float, None, "isoperimetric target in (0,1) for solve-v"),
    "format": (str, "obj", "mesh format for export-mesh: obj or ply"),
    "space": (str, "s3", "export-mesh coordinates: s3 (chart) or r3 (projected)"),
    "out": (str, "canham-out", "output directory"),
    "seed": (int, 0, "seed for sample-point checks"),
    "jobs": (int, None, "worker threads (default: CANHAM_THREADS or 1)"),
}
for _k in _QUAD_KEYS:
    SETTINGS[_k] = (int, getattr(QuadratureSpec(), _k), "quadrature nodes")
for _k in _MESH_KEYS:
    _t = type(getattr(assembly.MeshSpec(), _k))
    SETTINGS[_k] = (_t, getattr(assembly.MeshSpec(), _k), "mesh resolution")


class ConfigError(ValueError):
    pass


def parse_config_file(path):
    """Read ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path) as fh:
        for n, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{n}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in SETTINGS:
                raise ConfigError(f"{path}:{n}: unknown key {key!r}")
            out[key] = value
    return out


def _convert(key, value):
    if value is None or value == "":
        return None
    kind = SETTINGS[key][0]
    try:
        return kind(value)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {value!r}") from None


def parse_ladder(text):
    try:
        taus = [float(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise ConfigError(f"bad ladder {text!r}") from None
    if not taus:
        raise ConfigError("empty ladder")
    return taus


@dataclass
class RunConfig:
    """Resolved settings; admissibility is checked on construction."""

    m: int = 2
    tau: float = 1e-4
    ladder: list = field(default_factory=lambda: [1e-3, 3e-4, 1e-4])
    alpha: float = 0.5
    lmax: int = DEFAULT_LMAX
    strict: bool = True
    quad: QuadratureSpec = field(default_factory=QuadratureSpec)
    mesh: assembly.MeshSpec = field(default_factory=assembly.MeshSpec)
    target_v: float = None
    format: str = "obj"
    space: str = "s3"
    out: str = "canham-out"
    seed: int = 0
    jobs: int = None

    def taus(self, command):
        return self.ladder if command == "sweep" else [self.tau]

    def validate(self, command):
        if self.m < 1:
            raise ConfigError("m must be a positive integer")
        if self.format not in ("obj", "ply"):
            raise ConfigError("format must be obj or ply")
        if self.space not in ("s3", "r3"):
            raise ConfigError("space must be s3 or r3")
        if command in ("build", "sweep", "solve-v", "export-mesh"):
            for tau in self.taus(command):
                check_admissible(self.m, tau, self.alpha, self.strict)
        if command == "solve-v":
            if self.target_v is None:
                raise ConfigError("solve-v needs target_v")
            if not 0.0 < self.target_v < 1.0:
                raise ConfigError("v must lie in (0,1)")

    def surface_spec(self, tau=None):
        return assembly.SurfaceSpec(
            self.m,
            self.tau if tau is None else tau,
            self.alpha,
            self.lmax,
            self.quad,
            self.mesh,
            self.strict,
        )

    def to_dict(self):
        return {
            "m": self.m,
            "tau": self.tau,
            "ladder": list(self.ladder),
            "alpha": self.alpha,
            "lmax": self.lmax,
            "admissibility": "strict" if self.strict else "relaxed",
            "quadrature": asdict(self.quad),
            "mesh": asdict(self.mesh),
            "target_v": self.target_v,
            "seed": self.seed,
        }


def resolve_config(command, args):
    """Defaults < config file < flags, then validate for ``command``."""
    values = {k: v[1] for k, v in SETTINGS.items()}
    if command == "sweep":
        values["admissibility"] = "relaxed"
    if getattr(args, "config", None):
        for k, v in parse_config_file(args.config).items():
            values[k] = _convert(k, v)
    for k in SETTINGS:
        v = getattr(args, k, None)
        if v is not None:
            values[k] = v
    if values["admissibility"] not in ("strict", "relaxed"):
        raise ConfigError("admissibility must be strict or relaxed")
    cfg = RunConfig(
        m=values["m"],
        tau=values["tau"],
        ladder=parse_ladder(values["ladder"]),
        alpha=values["alpha"],
        lmax=values["lmax"],
        strict=values["admissibility"] == "strict",
        quad=QuadratureSpec(**{k: values[k] for k in _QUAD_KEYS}),
        mesh=assembly.MeshSpec(**{k: values[k] for k in _MESH_KEYS}),
        target_v=values["target_v"],
        format=values["format"],
        space=values["space"],
        out=values["out"],
        seed=values["seed"],
        jobs=values["jobs"],
    )
    cfg.validate(command)
    return cfg


# ---------------------------------------------------------------------------
# output helpers


def _dump(payload, path):
    text = json.dumps(payload, indent=2, sort_keys=True, default=_json_default)
    with open(path, "w") as fh:
        fh.write(text + "\n")
    return path


def _json_default(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not JSON serializable: {type(x).__name__}")


def _outdir(cfg):
    os.makedirs(cfg.out, exist_ok=True)
    return cfg.out


def _tag(cfg, tau=None):
    return f"m{cfg.m}_tau{cfg.tau if tau is None else tau:g}"


def write_mesh(path_stem, mesh, fmt):
    if fmt == "ply":
        path = path_stem + ".ply"
        assembly.write_ply(path, mesh)
    else:
        path = path_stem + ".obj"
        assembly.write_obj(path, mesh)
    return path


def error_payload(exc, code):
    return {
        "status": "error",
        "exit_code": code,
        "error": type(exc).__name__,
        "message": str(exc),
    }


# ---------------------------------------------------------------------------
# commands


def cmd_ld_solve(cfg, out=print):
    sol = assembly.ld_solution(cfg.m, cfg.lmax)
    path = os.path.join(_outdir(cfg), f"ld_m{cfg.m}.json")
    sol.save(path)
    out(f"LD solution m={cfg.m} mode={sol.mode} c0={sol.c0:.15g} -> {path}")
    return EXIT_OK


def cmd_build(cfg, out=print):
    d = _outdir(cfg)
    spec = cfg.surface_spec()
    built = assembly.build_surface(spec)
    built.solution.save(os.path.join(d, f"ld_m{cfg.m}.json"))
    report = assembly.total_energy(spec, built=built, jobs=cfg.jobs)
    mesh = assembly.mesh_surface(built)
    tag = _tag(cfg)
    obj = assembly.write_obj(os.path.join(d, f"surface_{tag}.obj"), mesh)
    y = ambient.stereographic_project(mesh)
    ply = assembly.write_ply(os.path.join(d, f"surface_{tag}_r3.ply"), y)
    payload = report.to_dict()
    payload["topology"] = mesh.summary()
    payload["files"] = {"mesh_s3": os.path.basename(obj), "mesh_r3": os.path.basename(ply)}
    _dump(payload, os.path.join(d, f"energy_{tag}.json"))
    s = mesh.summary()
    out(
        f"m={cfg.m} tau={cfg.tau:g}: W-8π = {report.W_minus_8pi:.6e} "
        f"± {report.error:.1e}  [{report.verdict}]  χ={s['euler_characteristic']} genus={s['genus']}"
    )
    return EXIT_OK


def _sweep_row(cfg, tau):
    row = {"tau": tau, "relaxed": check_relaxed(cfg.m, tau, cfg.alpha)}
    try:
        spec = replace(cfg.surface_spec(tau), strict=False)
        built = assembly.build_surface(spec)
        rep = assembly.total_energy(spec, built=built, jobs=1)
        y = ambient.stereographic_project(assembly.mesh_surface(built))
        row.update(
            bridge_deficit=rep.bridge_deficit,
            bridge_error=rep.bridge_error,
            graph_deficit=rep.graph_deficit,
            graph_error=rep.graph_error,
            W_minus_8pi=rep.W_minus_8pi,
            error=rep.error,
            verdict=rep.verdict,
            v=ambient.isoperimetric_ratio(y, willmore=False).v,
            margin_ratio=rep.diagnostics["margin_ratio"],
            status="ok",
        )
    except Exception as exc:  # recorded per row
        row.update(status=f"error: {type(exc).__name__}: {exc}")
    return row


def check_relaxed(m, tau, alpha):
    """True if (m, tau, alpha) passes only the relaxed rule."""
    try:
        check_admissible(m, tau, alpha, strict=True)
        return False
    except AdmissibilityError:
        return True


SWEEP_COLUMNS = (
    "tau",
    "bridge_deficit",
    "bridge_error",
    "graph_deficit",
    "graph_error",
    "W_minus_8pi",
    "error",
    "verdict",
    "v",
    "margin_ratio",
    "relaxed",
    "status",
)


def scaling_fit(rows):
    """Log-log slopes of |W-8π| against tau and against tau^2 |log tau|."""
    good = [r for r in rows if r["status"] == "ok" and r["W_minus_8pi"] != 0.0]
    if len(good) < 2:
        return {"n": len(good)}
    t = np.array([r["tau"] for r in good])
    w = np.abs([r["W_minus_8pi"] for r in good])
    model = t**2 * np.abs(np.log(t))
    return {
        "n": len(good),
        "exponent_vs_tau": float(np.polyfit(np.log(t), np.log(w), 1)[0]),
        "exponent_vs_tau2_log": float(np.polyfit(np.log(model), np.log(w), 1)[0]),
        "margin_ratio": [r["margin_ratio"] for r in good],
        "all_negative": bool(all(r["W_minus_8pi"] < 0.0 for r in good)),
    }


GNUPLOT = """set logscale xy
set xlabel "tau"
set ylabel "|W - 8 pi|"
set datafile separator ","
set key top left
plot "{csv}" using 1:(abs($6)) skip 1 with linespoints title "|W - 8 pi|", \\
     "{csv}" using 1:($1**2*abs(log($1))) skip 1 with lines title "tau^2 |log tau|"
"""


def cmd_sweep(cfg, out=print):
    d = _outdir(cfg)
    rows = assembly.ordered_map(lambda t: _sweep_row(cfg, t), cfg.ladder, cfg.jobs)
    name = f"sweep_m{cfg.m}"
    with open(os.path.join(d, name + ".csv"), "w", newline="") as fh:
        w = csv.DictWriter(fh, SWEEP_COLUMNS, restval="", lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(float(v)) if isinstance(v, float) else v) for k, v in r.items()})
    with open(os.path.join(d, name + ".gp"), "w") as fh:
        fh.write(GNUPLOT.format(csv=name + ".csv"))
    fit = scaling_fit(rows)
    _dump(
        {"schema_version": SCHEMA_VERSION, "kind": "SweepSummary", "config": cfg.to_dict(), "fit": fit},
        os.path.join(d, name + "_fit.json"),
    )
    for r in rows:
        if r["status"] == "ok":
            out(
                f"tau={r['tau']:<8g} W-8π={r['W_minus_8pi']:+.4e} v={r['v']:.4e} "
                f"ratio={r['margin_ratio']:.3f} {r['verdict']}{' (relaxed)' if r['relaxed'] else ''}"
            )
        else:
            out(f"tau={r['tau']:<8g} {r['status']}")
    failed = [r for r in rows if r["status"] != "ok"]
    return EXIT_FAILED if failed else EXIT_OK


def cmd_solve_v(cfg, out=print):
    d = _outdir(cfg)
    spec = cfg.surface_spec()
    built = assembly.build_surface(spec)
    report = assembly.total_energy(spec, built=built, jobs=cfg.jobs)
    y, p_minus = ambient.prepare_v_solve(built)
    res = ambient.solve_for_v(y, cfg.target_v, p_minus)
    iso = ambient.isoperimetric_ratio(res.mesh, willmore=False)
    iso.W = report.W
    iso.W_source = "chart (conformal invariance)"
    iso.error = dict(iso.error, W=report.error, v=abs(res.v - cfg.target_v))
    tag = f"{_tag(cfg)}_v{cfg.target_v:g}"
    path = write_mesh(os.path.join(d, f"surface_{tag}"), res.mesh, cfg.format)
    payload = iso.to_dict()
    payload.update(
        solve=res.to_dict(),
        verdict=report.verdict,
        W_minus_8pi=report.W_minus_8pi,
        config=cfg.to_dict(),
        files={"mesh_r3": os.path.basename(path)},
    )
    _dump(payload, os.path.join(d, f"isoperimetric_{tag}.json"))
    out(
        f"v = {res.v:.6f} (target {cfg.target_v}), genus {res.mesh.genus}, "
        f"W = {report.W:.10f} [{report.verdict}]"
    )
    ok = abs(res.v - cfg.target_v) < 1e-3 and res.mesh.genus == cfg.m - 1
    return EXIT_OK if ok else EXIT_FAILED


def cmd_export_mesh(cfg, out=print):
    d = _outdir(cfg)
    built = assembly.build_surface(cfg.surface_spec())
    mesh = assembly.mesh_surface(built)
    if cfg.space == "r3":
        mesh = ambient.stereographic_project(mesh)
    path = write_mesh(os.path.join(d, f"surface_{_tag(cfg)}_{cfg.space}"), mesh, cfg.format)
    out(f"{path}: {mesh.summary()}")
    return EXIT_OK


def cmd_verify(cfg, quick=False, only=None, artifacts=(), out=print):
    d = _outdir(cfg)
    results = acceptance.run_all(quick=quick, only=only, seed=cfg.seed)
    checks = []
    for path in artifacts:
        try:
            LDSolution.load(path)
            checks.append({"path": path, "passed": True, "message": "checksum ok"})
        except Exception as exc:
            checks.append({"path": path, "passed": False, "message": str(exc)})
    for line in acceptance.summary_lines(results):
        out(line)
    for c in checks:
        out(f"[{'PASS' if c['passed'] else 'FAIL'}] artifact {c['path']}: {c['message']}")
    # runtimes are left out so the file is reproducible
    payload = {
        "schema_version": SCHEMA_VERSION,
        "kind": "VerifyReport",
        "quick": quick,
        "criteria": [
            {"number": r.number, "name": r.name, "passed": r.passed, "budget": r.budget, "details": r.details}
            for r in results
        ],
        "artifacts": checks,
        "passed": all(r.passed for r in results) and all(c["passed"] for c in checks),
    }
    _dump(payload, os.path.join(d, "verify.json"))
    return EXIT_OK if payload["passed"] else EXIT_FAILED


# ---------------------------------------------------------------------------
# argument parsing


def _add_settings(p, keys):
    for k in keys:
        kind, default, text = SETTINGS[k]
        flag = "--" + k.replace("_", "-")
        suffix = "" if default is None else f" (default: {default})"
        p.add_argument(flag, dest=k, type=kind, default=None, help=text + suffix)


_SURFACE = ("m", "tau", "alpha", "lmax", "admissibility", "out", "jobs") + _QUAD_KEYS + _MESH_KEYS


def build_parser():
    parser = argparse.ArgumentParser(
        prog="canham",
        description="Build and certify low-energy genus-g comparison surfaces in S^3.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, help_text, keys):
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", help="flat key = value file; flags override it (default: none)")
        _add_settings(p, keys)
        return p

    command("build", "build the surface, certify W < 8π, write LD artifact, meshes and report", _SURFACE)
    command("sweep", "energy and v over a tau ladder (CSV, gnuplot script, scaling fit)",
            tuple(k for k in _SURFACE if k != "tau") + ("ladder",))
    command("solve-v", "Möbius-adjust the projected surface to a prescribed v",
            _SURFACE + ("target_v", "format"))
    p = command("verify", "run the acceptance matrix", ("out", "seed"))
    p.add_argument("--quick", action="store_true", help="reduced subset (m <= 2, single tau)")
    p.add_argument("--only", type=int, nargs="+", metavar="N", help="criterion numbers to run")
    p.add_argument("--ld-artifact", action="append", default=[], metavar="PATH",
                   help="LD solution file to check for integrity (repeatable)")
    command("export-mesh", "write the surface mesh in OBJ or PLY", _SURFACE + ("format", "space"))
    command("ld-solve", "solve for the LD solution only", ("m", "lmax", "out"))
    return parser


COMMANDS = {
    "build": cmd_build,
    "sweep": cmd_sweep,
    "solve-v": cmd_solve_v,
    "export-mesh": cmd_export_mesh,
    "ld-solve": cmd_ld_solve,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args.command, args)
    except (ValueError, OSError) as exc:
        return _fail(exc, EXIT_CONFIG)
    try:
        if args.command == "verify":
            return cmd_verify(cfg, args.quick, args.only, args.ld_artifact)
        return COMMANDS[args.command](cfg)
    except AdmissibilityError as exc:
        return _fail(exc, EXIT_CONFIG)
    except Exception as exc:
        return _fail(exc, EXIT_FAILED)


def _fail(exc, code):
    print(json.dumps(error_payload(exc, code), ensure_ascii=False))
    print(f"error: {exc}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
