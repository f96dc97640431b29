"""Command-line harness: ``mss gen | solve | bench | verify``.

Settings come from an optional flat ``key=value`` file (``--config``) with
dotted section prefixes such as ``mcg.rho=0.5`` or ``ro.phi=l1``; any key
can also be given as a flag (``--mcg.rho 0.5``), which wins over the file.

Exit codes: 0 success, 1 fixture check failed, 2 config error, 3 data
error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, fields, is_dataclass, replace
from pathlib import Path

import numpy as np

from .ao import AoParams, affinity, mss_ao
from .fixtures import NAMES as FIXTURES, verify_fixture
from .ho import HoParams, mss_ho
from .mcg import TRACE_COLUMNS, McgParams, mss_mcg
from .metrics import metric_report
from .numerics import InvalidInputError, thin_svd
from .representation import lrr
from .ro import GRAPH_PRESETS, InvalidConfigError, RoParams, frobenius_preset, l1_preset, mss_ro
from .spectral import coarse_active_set, spectral_partition
from .synthgen import (SyntheticSpec, add_noise, fmt17, generate, read_bundle,
                       write_bundle, write_matrix_csv)
from .theory import Partition

SOLVERS = ("mcg", "ao", "ho", "ro", "lrr")
EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3, 4


class ConfigError(ValueError):
    pass


class DataError(OSError):
    pass


# -- configuration -----------------------------------------------------------

def read_config(path) -> dict:
    """Parse a flat ``key=value`` file; ``#`` starts a comment."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for no, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{no}: expected key=value")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def parse_overrides(extra: list) -> dict:
    """Turn leftover ``--key value`` / ``--key=value`` flags into a dict."""
    out, i = {}, 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--"):
            raise ConfigError(f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, val = key.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(extra):
                raise ConfigError(f"flag {tok} needs a value")
            val = extra[i + 1]
            i += 2
        out[key.replace("-", "_")] = val
    return out


def _coerce(value: str, current):
    if isinstance(current, bool):
        low = value.lower()
        if low not in ("1", "0", "true", "false", "yes", "no"):
            raise ConfigError(f"not a boolean: {value!r}")
        return low in ("1", "true", "yes")
    if isinstance(current, int):
        return int(value)
    if isinstance(current, float) or current is None:
        try:
            return float(value)
        except ValueError:
            return value
    if isinstance(current, tuple):
        return tuple(float(v) for v in value.split(","))
    return value


def apply_section(obj, cfg: dict, prefix: str):
    """Return a copy of dataclass ``obj`` with ``prefix.field`` keys applied."""
    names = {f.name: f for f in fields(obj)}
    changes = {}
    for key, val in cfg.items():
        if not key.startswith(prefix + "."):
            continue
        name = key[len(prefix) + 1:]
        if "." in name:
            continue
        if name not in names:
            raise ConfigError(f"unknown setting {key!r}")
        cur = getattr(obj, name)
        if is_dataclass(cur):
            raise ConfigError(f"{key!r} is a section, not a value")
        try:
            changes[name] = _coerce(str(val), cur)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {val!r}") from exc
    return replace(obj, **changes) if changes else obj


def _get(cfg, key, default=None, cast=str):
    if key not in cfg or cfg[key] in (None, ""):
        return default
    try:
        return cast(cfg[key])
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {cfg[key]!r}") from exc


def _ints(text) -> list:
    return [int(v) for v in str(text).split(",") if v != ""]


def build_params(cfg: dict, X, K: int, seed: int):
    """Parameter blocks for every solver from the flat config."""
    mcg = apply_section(McgParams(), cfg, "mcg")
    ao = apply_section(AoParams(mcg=mcg, seed=seed), cfg, "ao")
    ho = apply_section(HoParams(ao=ao), cfg, "ho")
    n = X.shape[1]
    preset = cfg.get("ro.preset", "l1")
    graph = GRAPH_PRESETS.get(cfg.get("ro.graph_preset", "yaleb"))
    if graph is None:
        raise ConfigError(f"unknown ro.graph_preset; choose from {sorted(GRAPH_PRESETS)}")
    if preset == "l1":
        ro = l1_preset(X, graph=graph, seed=seed)
    elif preset == "fro":
        ro = frobenius_preset(n, K, graph=graph, seed=seed)
    elif preset == "none":
        ro = RoParams(graph=graph, seed=seed)
    else:
        raise ConfigError("ro.preset must be l1, fro or none")
    ro = apply_section(ro, {k: v for k, v in cfg.items() if k not in ("ro.preset", "ro.graph_preset")}, "ro")
    return {"mcg": mcg, "ao": ao, "ho": ho, "ro": ro}


# -- solving -----------------------------------------------------------------

def run_solver(solver: str, X, K: int, d: int, params: dict, labels=None, seed: int = 0):
    """Run one solver. Returns ``(J, C, A or None, trace header, trace rows)``."""
    if solver not in SOLVERS:
        raise ConfigError(f"solver must be one of {SOLVERS}")
    X = np.asarray(X, dtype=float)
    if solver == "lrr":
        C = lrr(X)
        A = affinity(C)
        return spectral_partition(A, K, seed), C, A, None, []
    if solver == "ro":
        J, C, A, tr = mss_ro(X, K, d, params["ro"])
        rows = [(t, *r) for t, outer in enumerate(tr.outer, 1) for r in outer]
        return J, C, A, ("t", "ell", "sweeps", "change", "objective"), rows
    svd = thin_svd(X)
    if solver == "mcg":
        if d <= svd.r:
            raise ConfigError(f"d={d} must exceed r(X)={svd.r}")
        W, C, tr = mss_mcg(svd, coarse_active_set(svd.n).weights, None, params["mcg"], d=d)
        return spectral_partition(affinity(C), K, seed), C, affinity(C), TRACE_COLUMNS, tr.rows
    if solver == "ao":
        J, C, info = mss_ao(svd, K, d, params["ao"])
        rows = [(s.t, s.lam, *r) for s in info["steps"] for r in s.mcg_trace.rows]
        return J, C, affinity(C), ("t", "lambda") + TRACE_COLUMNS, rows
    J, C, info = mss_ho(svd, K, d, params["ho"], X=X, labels=labels)
    head = ("h", "omega_kind", "ao_steps", "dual_iterations",
            "err_parti", "bdiag_devi", "intra_b_conn", "kblock_diag")
    rows = []
    for s in info["steps"]:
        m = s.metrics or {}
        rows.append((s.h, s.omega_kind, s.ao_steps, s.dual_iterations,
                     *(m.get(k, "") for k in head[4:])))
    return J, C, affinity(C), head, rows


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return fmt17(v)
    return str(v)


def write_trace(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def _jsonable(obj):
    if is_dataclass(obj):
        return {k: _jsonable(v) for k, v in asdict(obj).items()}
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def _load_data(path):
    p = Path(path)
    if not (p / "X.csv").exists():
        raise DataError(f"no X.csv in {p}")
    try:
        X, labels, _ = read_bundle(p)
    except ValueError as exc:
        raise DataError(f"cannot parse data in {p}: {exc}") from exc
    if X.ndim != 2 or not np.all(np.isfinite(X)):
        raise DataError("X must be a finite 2-D matrix")
    if labels is not None and labels.size != X.shape[1]:
        raise DataError("labels length does not match the number of samples")
    return X, labels


def _priors(cfg, X, labels):
    K = _get(cfg, "K", None, int)
    if K is None and labels is not None:
        K = int(labels.max())
    if K is None:
        raise ConfigError("K is required when labels are absent")
    d = _get(cfg, "d", None, int)
    if d is None:
        raise ConfigError("d is required")
    return K, d


def cmd_gen(cfg: dict) -> dict:
    out = _get(cfg, "out")
    if out is None:
        raise ConfigError("--out is required")
    try:
        spec = SyntheticSpec.equal(_get(cfg, "K", 5, int), _get(cfg, "r", 10, int),
                                   _get(cfg, "d_c", 4, int), _get(cfg, "n_k", 50, int),
                                   _get(cfg, "m", None, int), _get(cfg, "seed", 0, int))
    except InvalidInputError as exc:
        raise ConfigError(str(exc)) from exc
    data = generate(spec)
    noise = _get(cfg, "noise", 0.0, float)
    if noise:
        data.X = add_noise(data.X, noise, seed=spec.seed + 1_000_003)
        data.info["noise_rel"] = noise
    try:
        path = write_bundle(data, out)
    except OSError as exc:
        raise DataError(f"cannot write to {out}: {exc}") from exc
    return {"out": str(path), "shape": list(data.X.shape)}


def cmd_solve(cfg: dict) -> dict:
    data = _get(cfg, "data")
    out = Path(_get(cfg, "out", "."))
    if data is None:
        raise ConfigError("--data is required")
    X, labels = _load_data(data)
    K, d = _priors(cfg, X, labels)
    solver = _get(cfg, "solver", "ho")
    seed = _get(cfg, "seed", 0, int)
    params = build_params(cfg, X, K, seed)
    t0 = time.perf_counter()
    J, C, A, head, rows = run_solver(solver, X, K, d, params, labels, seed)
    wall = (time.perf_counter() - t0) * 1000
    out.mkdir(parents=True, exist_ok=True)
    trace_path = None
    if head is not None:
        trace_path = str(out / "trace.csv")
        write_trace(trace_path, head, rows)
    if _get(cfg, "emit_C", "false").lower() in ("1", "true", "yes"):
        write_matrix_csv(out / "C.csv", C)
    if _get(cfg, "emit_A", "false").lower() in ("1", "true", "yes") and A is not None:
        write_matrix_csv(out / "A.csv", A)
    metrics = None
    if labels is not None:
        truth = Partition.from_labels(labels)
        metrics = metric_report(C, J, truth, K).to_dict()
    used = {"ho": params["ho"], "ao": params["ao"], "mcg": params["mcg"], "ro": params["ro"]}
    result = {"solver": solver, "params": _jsonable(used.get(solver, {})), "seed": seed,
              "K": K, "d": d,
              "partition": [[int(i) for i in p] for p in J.pieces],
              "metrics": metrics, "trace_path": trace_path, "wall_ms": wall}
    (out / "result.json").write_text(json.dumps(_jsonable(result), indent=1) + "\n")
    return result


def _bench_trial(args):
    solvers, K, r, d_c, n_k, m, seed, noise, cfg = args
    data = generate(SyntheticSpec.equal(K, r, d_c, n_k, m, seed))
    X = data.X if not noise else add_noise(data.X, noise, seed=seed + 1_000_003)
    truth = Partition.from_labels(data.labels, K)
    out = []
    for solver in solvers:
        params = build_params(cfg, X, K, seed)
        t0 = time.perf_counter()
        J, C, _, _, _ = run_solver(solver, X, K, K * d_c, params, data.labels, seed)
        wall = time.perf_counter() - t0
        out.append((solver, r, d_c, seed, metric_report(C, J, truth, K).to_dict(), wall))
    return out


def cmd_bench(cfg: dict) -> dict:
    out = _get(cfg, "out")
    if out is None:
        raise ConfigError("--out is required")
    solvers = [s for s in _get(cfg, "solvers", "ho").split(",") if s]
    for s in solvers:
        if s not in SOLVERS:
            raise ConfigError(f"unknown solver {s!r}")
    trials = _get(cfg, "trials", 10, int)
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    seed0 = _get(cfg, "seed", 0, int)
    K, n_k = _get(cfg, "K", 5, int), _get(cfg, "n_k", 50, int)
    m = _get(cfg, "m", None, int)
    noise = _get(cfg, "noise", 0.0, float)
    jobs = []
    for r in _ints(_get(cfg, "r", "10")):
        for d_c in _ints(_get(cfg, "d_c", "4")):
            if not 0 < d_c < r:
                raise ConfigError("need 0 < d_c < r")
            for s in range(seed0, seed0 + trials):
                jobs.append((solvers, K, r, d_c, n_k, m, s, noise, cfg))
    workers = max(1, int(os.environ.get("MSS_THREADS", "1")))
    if workers == 1:
        results = [row for j in jobs for row in _bench_trial(j)]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = [row for rows in ex.map(_bench_trial, jobs) for row in rows]
    results.sort(key=lambda t: (solvers.index(t[0]), t[1], t[2], t[3]))
    keys = ("err_parti", "bdiag_devi", "intra_b_conn", "kblock_diag")
    table = []
    for solver in solvers:
        cells = sorted({(t[1], t[2]) for t in results if t[0] == solver})
        for r, d_c in cells:
            grp = [t for t in results if t[0] == solver and t[1] == r and t[2] == d_c]
            row = {"solver": solver, "r": r, "d_c": d_c, "trials": len(grp)}
            for k in keys:
                row[k] = float(np.mean([t[4][k] for t in grp]))
            row["wall_s"] = float(np.mean([t[5] for t in grp]))
            table.append(row)
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    with open(path / "bench.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        head = ["solver", "r", "d_c", "trials", *keys, "wall_s"]
        w.writerow(head)
        for row in table:
            w.writerow([_fmt(row[h]) for h in head])
    with open(path / "trials.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["solver", "r", "d_c", "seed", *keys, "wall_s"])
        for t in results:
            w.writerow([t[0], t[1], t[2], t[3], *(_fmt(t[4][k]) for k in keys), _fmt(t[5])])
    return {"out": str(path / "bench.csv"), "rows": table}


def cmd_verify(cfg: dict) -> dict:
    name = _get(cfg, "fixture")
    if name not in FIXTURES:
        raise ConfigError(f"fixture must be one of {FIXTURES}")
    checks = verify_fixture(name)
    return {"fixture": name, "passed": all(c[1] for c in checks),
            "checks": [{"check": c, "passed": p, "detail": d} for c, p, d in checks]}


# -- entry point -------------------------------------------------------------

def _parser():
    ap = argparse.ArgumentParser(prog="mss", description="Minimal subspace segmentation tools",
                                 allow_abbrev=False)
    sub = ap.add_subparsers(dest="command", required=True)
    g = sub.add_parser("gen", allow_abbrev=False, help="write a synthetic dataset bundle")
    g.add_argument("--out")
    s = sub.add_parser("solve", allow_abbrev=False, help="run a solver on a dataset bundle")
    s.add_argument("--data")
    s.add_argument("--out")
    s.add_argument("--solver", choices=SOLVERS)
    b = sub.add_parser("bench", allow_abbrev=False, help="mean metrics over seeded synthetic trials")
    b.add_argument("--out")
    b.add_argument("--solvers")
    v = sub.add_parser("verify", allow_abbrev=False, help="check a bundled fixture")
    v.add_argument("fixture", choices=FIXTURES)
    for p in (g, s, b, v):
        p.add_argument("--config", help="flat key=value settings file")
    return ap


def _error(code: int, exc: BaseException) -> int:
    json.dump({"error": type(exc).__name__, "message": str(exc), "exit_code": code},
              sys.stderr)
    sys.stderr.write("\n")
    return code


def main(argv=None) -> int:
    args, extra = _parser().parse_known_args(argv)
    try:
        cfg = read_config(args.config) if args.config else {}
        cfg.update(parse_overrides(extra))
        cfg.update({k: v for k, v in vars(args).items()
                    if v is not None and k not in ("command", "config")})
        handler = {"gen": cmd_gen, "solve": cmd_solve, "bench": cmd_bench,
                   "verify": cmd_verify}[args.command]
        result = handler(cfg)
    except (ConfigError, InvalidConfigError) as exc:
        return _error(EXIT_CONFIG, exc)
    except (DataError, FileNotFoundError) as exc:
        return _error(EXIT_DATA, exc)
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        return _error(EXIT_NUMERIC, exc)
    except (InvalidInputError, ValueError) as exc:
        return _error(EXIT_CONFIG, exc)
    if args.command == "verify":
        for c in result["checks"]:
            tag = "PASS" if c["passed"] else "FAIL"
            print(f"{tag} {result['fixture']}: {c['check']}" + (f" ({c['detail']})" if c["detail"] else ""))
        return EXIT_OK if result["passed"] else EXIT_CHECK
    if args.command == "bench":
        print(Path(result["out"]).read_text(), end="")
    else:
        print(json.dumps(_jsonable({k: v for k, v in result.items() if k != "params"})))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
