"""Command-line experiment runner.

    framesurf mesh-gen --surface sphere --refine 2 --q 3 --p-list 2,3,4,5,6 --out out/
    framesurf static --op div --test 1 --frames locsph --with-g --p-list 3..8 --out out/
    framesurf run --model swe --case steady_zonal --compare --p 5 --T 5 --out out/

Every subcommand writes `config.echo` (key=value) into its output directory;
`--config FILE` reads the same format, with command-line flags taking precedence.
Exit codes: 0 success, 2 usage error, 3 numerical abort.
"""
from __future__ import annotations

import argparse
import csv
import os
import sys
from dataclasses import dataclass
from pathlib import Path

EXIT_OK, EXIT_USAGE, EXIT_ABORT = 0, 2, 3
THREADS_ENV = "FRAMESURF_THREADS"
MODEL_ALIASES = {"maxwell": "maxwell_tm"}


class UsageError(Exception):
    pass


def parse_int_list(text):
    """'3,4,5' or '3..8' (inclusive) or a mix such as '1,3..5'."""
    values = []
    for part in str(text).replace(" ", "").split(","):
        if not part:
            continue
        if ".." in part:
            lo, hi = part.split("..", 1)
            lo, hi = int(lo), int(hi)
            if hi < lo:
                raise UsageError(f"empty range {part!r}")
            values.extend(range(lo, hi + 1))
        else:
            values.append(int(part))
    if not values:
        raise UsageError("empty integer list")
    return values


def read_config_file(path):
    """Flat key=value file; blank lines and '#' comments are ignored."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, value = line.split("=", 1)
            out[key.strip().replace("-", "_")] = value.strip()
    return out


def _to_bool(value):
    if isinstance(value, bool):
        return value
    v = str(value).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off", ""):
        return False
    raise UsageError(f"not a boolean: {value!r}")


@dataclass
class ExperimentSpec:
    command: str
    options: dict
    out: Path

    def echo(self):
        lines = [f"command={self.command}"]
        for key in sorted(self.options):
            value = self.options[key]
            if key in ("config", "out") or value is None:
                continue
            if isinstance(value, list):
                value = (";" if key == "param" else ",").join(str(v) for v in value)
            lines.append(f"{key}={value}")
        return "\n".join(lines) + "\n"

    def write_echo(self):
        (self.out / "config.echo").write_text(self.echo())


# ---- mesh-gen

def cmd_mesh_gen(spec):
    from .mesh import check_mesh, generate_ellipsoid_mesh, generate_sphere_mesh, mesh_error_stats, write_mesh
    o = spec.options
    if o["surface"] == "sphere":
        mesh = generate_sphere_mesh(o["refine"], o["q"])
    else:
        mesh = generate_ellipsoid_mesh(o["refine"], o["q"], o["ratio"])
    problems = check_mesh(mesh)
    if problems:
        raise RuntimeError("generated mesh failed its checks: " + "; ".join(problems))
    write_mesh(mesh, spec.out / "mesh.fsm")
    with open(spec.out / "stats.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["p", "L2_mesh_error", "Linf_mesh_error", "node_count"])
        if mesh.surface_kind != "sphere":
            print("node-deviation statistics need a sphere; stats.csv has no rows", file=sys.stderr)
            return EXIT_OK
        for p in o["p_list"]:
            s = mesh_error_stats(mesh, p)
            w.writerow([s.p, repr(s.L2_mesh_error), repr(s.Linf_mesh_error), s.node_count])
    return EXIT_OK


# ---- static

STATIC_COLUMNS = ("p", "l2_error", "linf_error", "term1_L2", "term2_L2")


def cmd_static(spec):
    from .solvers.common import cached_mesh
    from .static import run_static
    o = spec.options
    mesh = cached_mesh("sphere", o["refine"], o["q"], 1.0)
    with open(spec.out / "stats.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(STATIC_COLUMNS)
        for p in o["p_list"]:
            r = run_static(mesh, o["op"], o["test"], o["frames"], o["with_g"], p)
            w.writerow([p] + [repr(getattr(r, c)) for c in STATIC_COLUMNS[1:]])
    return EXIT_OK


# ---- run

def _variant_name(frames, with_g):
    if frames == "local" and not with_g:
        return "LOCAL"
    if frames == "locsph":
        return "LOCSPHwithG" if with_g else "LOCSPHnoG"
    return f"{frames}{'withG' if with_g else 'noG'}"


def _parse_params(items):
    params = {}
    for item in items or []:
        if "=" not in item:
            raise UsageError(f"--param expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        try:
            params[key] = float(value) if any(c in value for c in ".eE") else int(value)
        except ValueError:
            params[key] = _to_bool(value) if value.lower() in ("true", "false") else value
    return params


def _write_delta(path, series):
    """Differences of each variant's relative drift (and error) from LOCSPHwithG."""
    from .solvers.timestep import CSV_HEADER
    ref = series["LOCSPHwithG"]
    others = [v for v in ("LOCAL", "LOCSPHnoG") if v in series]
    n = min(len(s.rows) for s in series.values())
    quantities = ("l2_error", "mass_err", "energy_err")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"{q}_LOCSPHwithG" for q in quantities]
                   + [f"delta_{q}_{v}" for v in others for q in quantities])
        for r in range(n):
            row = [repr(ref.rows[r][0])]
            row += [repr(ref.rows[r][CSV_HEADER.index(q)]) for q in quantities]
            for v in others:
                row += [repr(series[v].rows[r][CSV_HEADER.index(q)] - ref.rows[r][CSV_HEADER.index(q)])
                        for q in quantities]
            w.writerow(row)


def cmd_run(spec):
    from .solvers import RUNNERS, SimConfig
    o = spec.options
    model = MODEL_ALIASES.get(o["model"], o["model"])
    if model not in RUNNERS:
        raise UsageError(f"unknown model {o['model']!r}; available: {sorted(RUNNERS) + sorted(MODEL_ALIASES)}")
    params = _parse_params(o.get("param"))
    common = dict(model=model, test_case=o["case"], dt=o["dt"], T_final=o["T"], refine=o["refine"],
                  q=o["q"], surface=o["surface"], ratio=o["ratio"], diagnostic_stride=o["stride"],
                  params=params)
    if o["compare"]:
        variants = ["LOCAL", "LOCSPHnoG", "LOCSPHwithG"]
    else:
        variants = [None]
    p_values = o["p"]
    status = EXIT_OK
    summary = []
    for p in p_values:
        series = {}
        for v in variants:
            try:
                if v is None:
                    frames_d = o["frames_d"] or o["frames"]
                    frames_e = "local" if model == "swe" else o["frames"]
                    cfg = SimConfig(frames_e=frames_e, frames_d=frames_d, with_G=o["with_g"], p=p, **common)
                    name = _variant_name(frames_d, o["with_g"])
                else:
                    cfg = SimConfig.variant(v, p=p, **common)
                    name = v
            except ValueError as exc:
                raise UsageError(str(exc)) from exc
            try:
                s = RUNNERS[model](cfg)
            except ValueError as exc:
                raise UsageError(str(exc)) from exc
            suffix = f"_p{p}" if len(p_values) > 1 else ""
            s.write_csv(spec.out / f"series_{name}{suffix}.csv")
            series[name] = s
            last = s.rows[-1] if s.rows else (float("nan"),) * 6
            summary.append((p, name, last[0], last[1], last[3], last[5], "ABORT" if s.aborted else "ok"))
            if s.aborted is not None:
                print(f"numerical abort ({name}, p={p}): {s.aborted}", file=sys.stderr)
                status = EXIT_ABORT
        if o["compare"] and status == EXIT_OK:
            suffix = f"_p{p}" if len(p_values) > 1 else ""
            _write_delta(spec.out / f"delta{suffix}.csv", series)
    with open(spec.out / "stats.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["p", "variant", "t", "l2_error", "mass_err", "energy_err", "status"])
        for row in summary:
            w.writerow([row[0], row[1]] + [repr(x) for x in row[2:6]] + [row[6]])
    return status


# ---- argument handling

def build_parser():
    parser = argparse.ArgumentParser(prog="framesurf", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key=value file; command-line flags take precedence")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--refine", type=int, default=2, help="icosahedral refinement level")
        p.add_argument("--q", type=int, default=3, help="geometric order of the element maps")

    m = sub.add_parser("mesh-gen", help="generate a mesh and its node-deviation table")
    common(m)
    m.add_argument("--surface", choices=("sphere", "ellipsoid"), default="sphere")
    m.add_argument("--ratio", type=float, default=1.003364, help="ellipsoid equatorial/polar axis ratio")
    m.add_argument("--p-list", default="2,3,4,5,6")

    s = sub.add_parser("static", help="static divergence/curl error sweep")
    common(s)
    s.add_argument("--op", choices=("div", "curl"), required=True)
    s.add_argument("--test", type=int, choices=(1, 2), required=True)
    s.add_argument("--frames", choices=("local", "locsph"), default="locsph")
    s.add_argument("--with-g", action="store_true")
    s.add_argument("--p-list", default="3..8")

    r = sub.add_parser("run", help="time-dependent run(s) with conservation diagnostics")
    common(r)
    r.add_argument("--model", required=True, help="advection | maxwell_tm (maxwell) | swe")
    r.add_argument("--case", required=True, help="named test case")
    r.add_argument("--frames", choices=("local", "locsph"), default="local")
    r.add_argument("--frames-d", choices=("local", "locsph"), default=None,
                   help="divergence frames for swe (default: --frames)")
    r.add_argument("--with-g", action="store_true")
    r.add_argument("--compare", action="store_true", help="run LOCAL, LOCSPHnoG and LOCSPHwithG")
    r.add_argument("--p", default="5", help="degree or list/range, e.g. 5 or 1..5")
    r.add_argument("--dt", type=float, default=1e-3)
    r.add_argument("--T", type=float, default=1.0)
    r.add_argument("--stride", type=int, default=100, help="steps between diagnostic rows")
    r.add_argument("--surface", choices=("sphere", "ellipsoid"), default="sphere")
    r.add_argument("--ratio", type=float, default=1.003364)
    r.add_argument("--param", action="append", help="test-case parameter key=value (repeatable)")
    return parser


BOOL_KEYS = ("with_g", "compare")
LIST_KEYS = ("p_list", "p")


def _apply_config(parser, command, path):
    """Install config-file values as subcommand defaults so flags still win."""
    cfg = read_config_file(path)
    wanted = cfg.pop("command", command)
    if wanted != command:
        raise UsageError(f"config file {path} is for {wanted!r}, not {command!r}")
    sub = parser._subparsers._group_actions[0].choices[command]
    known = {a.dest for a in sub._actions}
    unknown = sorted(set(cfg) - known)
    if unknown:
        raise UsageError(f"unknown config keys: {unknown}")
    for key in BOOL_KEYS:
        if key in cfg:
            cfg[key] = _to_bool(cfg[key])
    if "param" in cfg:
        cfg["param"] = [x for x in cfg["param"].split(";") if x]
    for action in sub._actions:
        if action.dest in cfg:
            action.required = False
    sub.set_defaults(**cfg)


def resolve(argv):
    """Parse argv (with optional --config file) into an ExperimentSpec."""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    command = next((a for a in rest if not a.startswith("-")), None)
    if known.config and command in COMMANDS:
        _apply_config(parser, command, known.config)
    args = parser.parse_args(argv)
    options = vars(args)
    command = options.pop("command")
    for key in LIST_KEYS:
        if key in options:
            options[key] = parse_int_list(options[key])
    if isinstance(options.get("param"), list):
        options["param"] = sorted(set(options["param"]))
    out = Path(options["out"])
    return ExperimentSpec(command, options, out)


COMMANDS = {"mesh-gen": cmd_mesh_gen, "static": cmd_static, "run": cmd_run}


def _thread_limit():
    value = os.environ.get(THREADS_ENV)
    if not value:
        return None
    try:
        n = int(value)
    except ValueError:
        raise UsageError(f"{THREADS_ENV} must be a positive integer, got {value!r}") from None
    if n < 1:
        raise UsageError(f"{THREADS_ENV} must be a positive integer, got {value!r}")
    return n


def main(argv=None):
    try:
        spec = resolve(argv)
        limit = _thread_limit()
    except UsageError as exc:
        print(f"framesurf: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:              # argparse usage errors
        return int(exc.code) if exc.code is not None else EXIT_OK
    spec.out.mkdir(parents=True, exist_ok=True)
    spec.write_echo()
    from threadpoolctl import threadpool_limits
    try:
        with threadpool_limits(limits=limit):
            return COMMANDS[spec.command](spec)
    except UsageError as exc:
        print(f"framesurf: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
