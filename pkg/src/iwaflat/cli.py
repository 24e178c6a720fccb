"""Command-line experiment harness.

Every subcommand resolves a flat key-value configuration (config file, then
command-line flags), writes ``report.json`` (plus CSVs where relevant) into
``<out>/<command>-<hash>/`` where the hash covers the resolved configuration,
and exits with

* 0 on success,
* 1 when a checked invariant fails,
* 2 on unparseable input or usage errors,
* 3 on inputs outside the domain (for example a determinant far from 1).

Config files contain ``key = value`` lines; ``#`` starts a comment.  Vectors
are comma separated.  Matrices live in sidecar files with one row per line.
Tolerances are set with ``--tol.NAME=VALUE`` or ``tol.NAME = VALUE``.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
import warnings
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import flow, group, height, partition, representation, verify
from .errors import InputError, IwaflatError, NotFoundError
from .linalg import haar_orthogonal

EXIT_OK, EXIT_INVARIANT, EXIT_PARSE, EXIT_DOMAIN = 0, 1, 2, 3

COMMANDS = ("decompose", "classify", "nbound", "critpoint", "levelset", "flow", "sl3", "verify")
RANDOMIZED = ("classify", "nbound", "critpoint", "levelset", "flow", "verify")


class ParseError(Exception):
    pass


# -- configuration -------------------------------------------------------------

def parse_config_text(text: str) -> dict:
    cfg = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"config line {lineno}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        if not k:
            raise ParseError(f"config line {lineno}: empty key")
        cfg[k] = v
    return cfg


def read_matrix(path) -> np.ndarray:
    try:
        rows = [line.split() for line in Path(path).read_text().splitlines()
                if line.strip() and not line.lstrip().startswith("#")]
        m = np.array([[float(x) for x in r] for r in rows])
    except (OSError, ValueError) as exc:
        raise ParseError(f"cannot read matrix from {path}: {exc}") from None
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.size == 0:
        raise ParseError(f"{path}: expected a square matrix")
    return m


def _vector(s: str) -> np.ndarray:
    try:
        return np.array([float(x) for x in s.replace(" ", "").split(",") if x])
    except ValueError:
        raise ParseError(f"cannot parse vector {s!r}") from None


class Config:
    """Typed access to the resolved key-value configuration."""

    def __init__(self, values: dict):
        self.values = dict(values)
        self.used = {}

    def _get(self, key, default, conv):
        if key in self.values:
            try:
                val = conv(self.values[key])
            except (ValueError, ParseError) as exc:
                raise ParseError(f"bad value for {key}: {self.values[key]!r}") from exc
        else:
            val = default
        self.used[key] = val.tolist() if isinstance(val, np.ndarray) else val
        return val

    def int(self, key, default=None):
        return self._get(key, default, int)

    def float(self, key, default=None):
        return self._get(key, default, float)

    def str(self, key, default=None):
        return self._get(key, default, str)

    def vector(self, key, default=None):
        return self._get(key, default, _vector)

    def tolerances(self) -> dict:
        tol = {k[4:]: float(v) for k, v in self.values.items() if k.startswith("tol.")}
        self.used.update({f"tol.{k}": v for k, v in tol.items()})
        return tol


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="iwaflat", description="Iwasawa projections along flats of SL_n(R).")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--n", type=int)
    ap.add_argument("--rep", choices=("std", "adjoint"))
    ap.add_argument("--seed", type=int)
    ap.add_argument("--config", help="flat key = value file")
    ap.add_argument("--out", default="runs", help="output root directory")
    ap.add_argument("--matrix", help="sidecar matrix file (one row per line)")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                    help="override any config key")
    return ap


def resolve_config(argv) -> tuple[str, Config, Path]:
    ap = build_parser()
    args, extra = ap.parse_known_args(argv)
    values = {}
    if args.config:
        try:
            values.update(parse_config_text(Path(args.config).read_text()))
        except OSError as exc:
            raise ParseError(f"cannot read config: {exc}") from None
    for key in ("n", "rep", "seed", "matrix"):
        v = getattr(args, key)
        if v is not None:
            values[key] = str(v)
    for item in args.set:
        if "=" not in item:
            raise ParseError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        values[k.strip()] = v.strip()
    it = iter(extra)
    for tok in it:
        if not tok.startswith("--tol."):
            raise ParseError(f"unrecognized argument {tok!r}")
        if "=" in tok:
            k, v = tok[2:].split("=", 1)
        else:
            k, v = tok[2:], next(it, None)
            if v is None:
                raise ParseError(f"{tok} needs a value")
        values[k] = v
    return args.command, Config(values), Path(args.out)


# -- reports -------------------------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if np.isfinite(x) else repr(x)
    return obj


def canonical_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def config_hash(command: str, cfg: Config) -> str:
    blob = json.dumps({"command": command, "config": _jsonable(cfg.values)}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def run_dir(out: Path, command: str, cfg: Config) -> Path:
    d = out / f"{command}-{config_hash(command, cfg)}"
    d.mkdir(parents=True, exist_ok=True)
    return d


def write_report(d: Path, command: str, cfg: Config, checks: dict, metrics: dict, artifacts: list, t0: float) -> dict:
    report = {
        "command": command,
        "config": cfg.used,
        "checks": checks,
        "passed": all(checks.values()),
        "metrics": metrics,
        "artifacts": sorted(artifacts),
        "timing": {
            "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
            "wall_time_s": round(time.perf_counter() - t0, 3),
        },
    }
    (d / "report.json").write_text(canonical_json(report))
    return report


def strip_timing(report: dict) -> dict:
    return {k: v for k, v in report.items() if k != "timing"}


def _fmt(m: np.ndarray) -> str:
    return np.array2string(np.asarray(m), precision=10, suppress_small=True, max_line_width=120)


def _group_element(cfg: Config, n_default: int, rng) -> tuple[np.ndarray, str]:
    path = cfg.str("matrix", None)
    if path:
        return read_matrix(path), path
    n = cfg.int("n", n_default)
    return group.random_sl(n, rng), "random"


# -- subcommands ----------------------------------------------------------------

def cmd_decompose(cfg: Config, d: Path):
    path = cfg.str("matrix", None)
    if not path:
        raise ParseError("decompose needs --matrix FILE")
    g = read_matrix(path)
    group.as_group_element(g, cfg.float("tol.det", group.DET_TOL))
    f = group.iwasawa(g)
    res = float(np.linalg.norm(f.product() - g) / np.linalg.norm(g))
    print("n_part =\n" + _fmt(f.n_part))
    print("a_part =\n" + _fmt(f.a_part))
    print("k_part =\n" + _fmt(f.k_part))
    print("H(g) = " + _fmt(f.H))
    print(f"residual = {res:.3e}")
    tol = cfg.float("tol.reconstruction", 1e-10)
    return ({"reconstruction": res <= tol},
            {"n_part": f.n_part, "a_diag": f.a_diag, "k_part": f.k_part, "H": f.H, "residual": res}, [])


def cmd_classify(cfg: Config, d: Path):
    rng = np.random.default_rng(cfg.int("seed", 0))
    g, src = _group_element(cfg, 3, rng)
    g = group.as_group_element(g)
    rep = representation.get_rep(cfg.str("rep", "std"), g.shape[0])
    eps = cfg.float("tol.support", partition.SUPPORT_RTOL)
    sig = partition.classify(g, rep, eps)
    gen = partition.generic_signature(rep, cfg.int("generic_samples", 8), rng)
    print(json.dumps(sig.to_json(), indent=1))
    print(f"generic class: {sig == gen}")
    return ({"deterministic": sig == partition.classify(g, rep, eps)},
            {"source": src, "signature": sig.to_json(), "generic": sig == gen}, [])


def cmd_nbound(cfg: Config, d: Path):
    rng = np.random.default_rng(cfg.int("seed", 0))
    g, src = _group_element(cfg, 3, rng)
    g = group.as_group_element(g)
    n = g.shape[0]
    rep = representation.get_rep(cfg.str("rep", "std"), n)
    rays = cfg.vector("rays", None)
    rays = rays.reshape(-1, n) if rays is not None else partition.default_rays(n, cfg.int("ray_count", 6), rng)
    r = partition.n_bound_experiment(g, rep, rays, cfg.float("t_max", 15.0), cfg.int("grid", 61), src,
                                     eps_rel=cfg.float("tol.support", partition.SUPPORT_RTOL))
    r.write_csv(d / "nbound.csv")
    n_spread = float(np.max(r.observed) - np.min(r.observed))
    print(f"observed sup = {r.observed_sup:.6g}, theoretical bound = {r.theoretical_bound:.6g}, bounded = {r.bounded}")
    metrics = r.to_json() | {"observed_spread": n_spread}
    if n == 2 and rep.name == "std" and g[1, 0] != 0 and g[1, 1] != 0:
        metrics["sl2_analytic_bound"] = partition.sl2_analytic_bound(g)
    return {"bounded": r.bounded}, metrics, ["nbound.csv"]


def cmd_critpoint(cfg: Config, d: Path):
    rng = np.random.default_rng(cfg.int("seed", 0))
    theta = cfg.float("theta", None)
    if theta is not None:
        g, src = height.rotation2(theta), f"rotation({theta})"
    else:
        g, src = _group_element(cfg, 3, rng)
    n = g.shape[0]
    H0 = cfg.vector("H0", None)
    if H0 is None:
        H0 = group.dominant_default(n)
    opts = height.CriticalOptions(starts=cfg.int("starts", 5), seed=int(rng.integers(2**31)),
                                  grad_tol=cfg.float("tol.grad", height.GRAD_TOL),
                                  r_escape=cfg.float("r_escape", height.R_ESCAPE))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rep = height.find_critical(height.HeightProblem(H0, g), opts)
    print(f"status = {rep.status}")
    if rep.status == "found":
        print(f"a* = {_fmt(rep.a_star)}, h* = {rep.h_star:.12g}, |grad| = {rep.grad_norm:.3e}")
    checks = {}
    if rep.status == "found":
        checks = {"negative_definite": max(rep.hessian_eigenvalues) < 0, "multi_start_agreement": rep.agreement,
                  "maximality_probes": bool(rep.probes_ok)}
    return checks, {"source": src, "H0": H0, "warnings": [str(w.message) for w in caught]} | rep.to_json(), []


def cmd_levelset(cfg: Config, d: Path):
    n = cfg.int("n", 3)
    H0 = cfg.vector("H0", None)
    if H0 is None:
        H0 = group.dominant_default(n)
    a = cfg.vector("a", np.zeros(len(H0)))
    ks = height.level_set_sample(H0, a, cfg.int("count", 5), cfg.int("seed", 0), cfg.int("restarts", 20))
    grads = [float(np.linalg.norm(height.grad_height(height.HeightProblem(H0, k), a))) for k in ks]
    tol = cfg.float("tol.level", 1e-8) * float(np.linalg.norm(H0))
    print(f"{len(ks)} samples, max |grad h(a)| = {max(grads):.3e}")
    return {"critical_at_a": max(grads) <= tol}, {"H0": H0, "a": a, "samples": ks, "grad_norms": grads}, []


def cmd_flow(cfg: Config, d: Path):
    rng = np.random.default_rng(cfg.int("seed", 0))
    ctl = flow.FlowControls(rtol=cfg.float("tol.rtol", 1e-10), limit_tol=cfg.float("tol.limit", flow.OFFDIAG_TOL),
                            sample_dt=cfg.float("sample_dt", None))
    path = cfg.str("matrix", None)
    if path:
        X0 = read_matrix(path)
        H = np.linalg.eigvalsh(X0)[::-1]
        t_end = cfg.float("t_end", 50.0)
        traj = flow.integrate(X0, t_end, ctl)
        src = path
    else:
        n = cfg.int("n", 3)
        H = cfg.vector("H", None)
        if H is None:
            H = flow.random_regular_H(n, rng)
        k = haar_orthogonal(len(H), rng)
        t_end = cfg.float("t_end", max(50.0, flow.default_t_end(H)) if group.is_regular(H) else 50.0)
        traj = flow.flow_from(k, H, t_end, ctl, cross_tol=cfg.float("tol.cross", flow.CROSS_TOL))
        src = "random"
    traj.write_csv(d / "trajectory.csv")
    rep = flow.limit_analysis(traj, H, ctl.limit_tol)
    audit = flow.monotonicity_audit(traj)
    drift = traj.spectrum_drift()
    print(f"limit = {None if rep.limit is None else _fmt(rep.limit)}, permutation = {rep.permutation}, drift = {drift:.3e}")
    checks = {"isospectral": drift <= cfg.float("tol.drift", 1e-8), "c_alpha_nonincreasing": audit["passed"]}
    if rep.regular and not flow.offdiag_norm(traj.states[0]) == 0.0:
        checks["limit_matched"] = rep.permutation is not None
    metrics = {"source": src, "H": H, "t_end": t_end, "drift": drift, "audit": audit, "report": rep.to_json(),
               "steps_accepted": traj.steps_accepted, "cross_check_max": max((r for _, r in traj.cross_check), default=None)}
    return checks, metrics, ["trajectory.csv"]


def cmd_sl3(cfg: Config, d: Path):
    H0 = cfg.vector("H0", np.array([1.0, 0.0, -1.0]))
    X = height.sl3_zero_diagonal(H0)
    iso = float(np.abs(np.linalg.eigvalsh(X) - np.sort(H0)).max())
    holds, slack = height.am_gm_check(*H0)
    x, y, z = X[0, 1], X[0, 2], X[1, 2]
    print("X =\n" + _fmt(X))
    print(f"isospectral error = {iso:.3e}, AM-GM slack = {slack:.6g}")
    checks = {"isospectral": iso <= cfg.float("tol.iso", 1e-8), "am_gm": holds,
              "product_identity": abs(2 * x * y * z - np.prod(H0)) <= 1e-10 * max(1.0, float(H0 @ H0) ** 1.5)}
    return checks, {"H0": H0, "X": X, "slack": slack, "equality_case": height.am_gm_equality(*H0)}, []


def cmd_verify(cfg: Config, d: Path):
    n = cfg.int("n", 3)
    seed = cfg.int("seed", 0)
    sizes = {k: cfg.int(f"size.{k}", v) for k, v in verify.DEFAULT_SIZES.items() if f"size.{k}" in cfg.values}
    checks = verify.run_all(n, seed, sizes, cfg.tolerances(), cfg.str("rep", "std"))
    for c in checks:
        print(f"[{'PASS' if c.passed else 'FAIL'}] {c.suite}.{c.name}")
    return ({f"{c.suite}.{c.name}": c.passed for c in checks},
            {"checks": [c.to_json() for c in checks], "n": n, "seed": seed}, [])


HANDLERS = {
    "decompose": cmd_decompose,
    "classify": cmd_classify,
    "nbound": cmd_nbound,
    "critpoint": cmd_critpoint,
    "levelset": cmd_levelset,
    "flow": cmd_flow,
    "sl3": cmd_sl3,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    t0 = time.perf_counter()
    try:
        command, cfg, out = resolve_config(argv)
    except SystemExit as exc:  # argparse usage errors
        return EXIT_PARSE if exc.code else EXIT_OK
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    # a flow from a given X0 draws no random numbers
    if command in RANDOMIZED and "seed" not in cfg.values and not (command == "flow" and "matrix" in cfg.values):
        print(f"error: {command} is randomized and needs --seed", file=sys.stderr)
        return EXIT_PARSE
    d = run_dir(out, command, cfg)
    try:
        checks, metrics, artifacts = HANDLERS[command](cfg, d)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (InputError, NotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except IwaflatError as exc:
        print(f"invariant failure: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    report = write_report(d, command, cfg, checks, metrics, artifacts, t0)
    print(f"report: {d / 'report.json'}")
    if not report["passed"]:
        failing = [k for k, v in checks.items() if not v]
        print("failed: " + ", ".join(failing), file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
