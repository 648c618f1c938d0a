"""``ghostsim`` command line: run scenarios, parameter sweeps and the oracle suite.

Exit codes are a stable contract:

    0  every assertion of the run passed
    1  at least one assertion failed
    2  configuration error (bad file, key, value or output directory)
    3  guard violation or insufficient statistics

Each run directory receives ``report.json``, CSV artifacts, PGM images of
single-shot and mean intensities and of ``G``, and ``manifest.json``.  The
default worker count comes from ``GHOSTSIM_WORKERS`` (else the CPU count).
"""

from __future__ import annotations

import argparse
import json
import math
import platform
import re
import sys
import time
from dataclasses import asdict, is_dataclass, replace
from importlib import metadata
from pathlib import Path

import numpy as np
import scipy

from . import io
from .correlation import CorrelationMap
from .errors import ConfigError, GhostSimError, GuardError
from .experiments import ScenarioReport, oracle_config, run_scenario
from .field import IntensityMap
from .scenario import NUMERIC_KEYS, Scenario, load_scenario, parse_override

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_GUARD = 0, 1, 2, 3

__all__ = ["main", "cmd_run", "cmd_sweep", "cmd_oracle", "write_run"]


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if is_dataclass(v):
        return _jsonable(asdict(v))
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    return str(v)


def _safe(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.=+-]", "_", name)


def _prepare_out(out: Path, force: bool):
    if out.exists() and not out.is_dir():
        raise ConfigError(f"output path {out} exists and is not a directory", key="--out")
    if out.exists() and any(out.iterdir()):
        if not force:
            raise ConfigError(f"output directory {out} is not empty; pass --force to overwrite", key="--out")
        # only remove what an earlier run wrote
        manifest = out / "manifest.json"
        if manifest.exists():
            try:
                old = json.loads(manifest.read_text())
                for f in old.get("outputs", []):
                    p = out / f
                    if p.is_file():
                        p.unlink()
            except (OSError, ValueError):
                pass
    out.mkdir(parents=True, exist_ok=True)


def _axis_for(n, u, pu):
    if u is not None and n == len(u):
        return u
    if pu is not None and n == len(pu):
        return pu
    return None


def write_run(rep: ScenarioReport, out: Path) -> list[str]:
    """Write the report and its artifacts into ``out``; returns relative file names."""
    files = []

    def add(p: Path):
        files.append(p.name)
        if p.suffix == ".pgm":
            files.append(p.name + ".scale.txt")

    art = rep.artifacts
    u, pu = art.get("u"), art.get("probe_u")
    for name, a in art.items():
        if name in ("u", "probe_u"):
            continue
        base = _safe(name)
        if isinstance(a, IntensityMap):
            add(io.write_intensity_csv(out / f"{base}.csv", a, name=name))
            add(io.write_pgm(out / f"{base}.pgm", a.values))
        elif isinstance(a, CorrelationMap):
            add(io.write_matrix_csv(out / f"{base}.csv", a.G, name=name, frames=a.frames_used))
            add(io.write_pgm(out / f"{base}.pgm", a.G))
        elif name == "margins":
            cols = {
                "test": [m.test for m in a],
                "value": [float(m.value) for m in a],
                "threshold": [float(m.threshold) for m in a],
                "sense": [m.sense for m in a],
                "margin": [float(m.margin) for m in a],
                "passed": [str(m.passed) for m in a],
            }
            add(io.write_table_csv(out / "margins.csv", cols))
        elif name == "table":
            keys = list(a[0]) if a else []
            add(io.write_table_csv(out / "table.csv", {k: [float(r[k]) for r in a] for k in keys}))
        else:
            arr = np.asarray(a)
            if arr.ndim == 1 and np.isrealobj(arr):
                x = _axis_for(len(arr), u, pu)
                cols = {"u": x} if x is not None else {"index": [float(i) for i in range(len(arr))]}
                cols["value"] = arr
                add(io.write_table_csv(out / f"{base}.csv", cols, name=name))
            elif arr.ndim == 2 and np.isrealobj(arr):
                add(io.write_matrix_csv(out / f"{base}.csv", arr, name=name))
                add(io.write_pgm(out / f"{base}.pgm", arr))
    report = {
        "name": rep.name,
        "experiment": rep.experiment,
        "passed": rep.passed,
        "insufficient_statistics": rep.insufficient,
        "assertions": rep.assertions,
        "metrics": rep.metrics,
        "wall_time": rep.wall_time,
    }
    (out / "report.json").write_text(json.dumps(_jsonable(report), indent=2) + "\n")
    files.append("report.json")
    return files


def _exit_code(rep: ScenarioReport) -> int:
    if rep.insufficient:
        return EXIT_GUARD
    return EXIT_PASS if rep.passed else EXIT_FAIL


def _write_manifest(out: Path, *, config_sha256, seed, wall, outputs, summary, exit_code, argv):
    manifest = {
        "config_sha256": config_sha256,
        "seed": seed,
        "versions": {
            "ghostsim": _version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "wall_time": wall,
        "outputs": sorted(set(outputs)) + ["manifest.json"],
        "summary": summary,
        "exit_code": exit_code,
        "argv": list(argv),
    }
    (out / "manifest.json").write_text(json.dumps(_jsonable(manifest), indent=2) + "\n")


def _summary(rep: ScenarioReport) -> dict:
    return {"passed": rep.passed, "insufficient_statistics": rep.insufficient, "assertions": rep.assertions}


def _cli_overrides(args) -> list[str]:
    ov = list(args.set or [])
    if args.seed is not None:
        ov.append(f"run.seed={args.seed}")
    if args.frames is not None:
        ov.append(f"run.frames={args.frames}")
    if args.workers is not None:
        ov.append(f"run.workers={args.workers}")
    if getattr(args, "quick", False):
        ov.append("run.quick=true")
    return ov


def _default_out(name: str) -> Path:
    return Path("runs") / _safe(name)


def _run_one(sc: Scenario, out: Path, argv, log) -> tuple[int, ScenarioReport | None]:
    t0 = time.perf_counter()
    try:
        rep = run_scenario(sc.config)
    except GuardError as e:
        log(f"guard: {e}")
        _write_manifest(
            out,
            config_sha256=sc.sha256,
            seed=sc.config.seed,
            wall=time.perf_counter() - t0,
            outputs=[],
            summary={"passed": False, "guard": str(e)},
            exit_code=EXIT_GUARD,
            argv=argv,
        )
        return EXIT_GUARD, None
    files = write_run(rep, out)
    code = _exit_code(rep)
    _write_manifest(
        out,
        config_sha256=sc.sha256,
        seed=sc.config.seed,
        wall=time.perf_counter() - t0,
        outputs=files,
        summary=_summary(rep),
        exit_code=code,
        argv=argv,
    )
    log(rep.summary())
    return code, rep


def cmd_run(scenario_path, overrides=(), out_dir=None, force=False, argv=(), log=print) -> int:
    """Run one scenario file and write its artifacts.  Returns the exit code."""
    sc = load_scenario(scenario_path, overrides)
    out = Path(out_dir) if out_dir else _default_out(sc.config.name)
    _prepare_out(out, force)
    code, _ = _run_one(sc, out, argv, log)
    return code


def _headline(rep: ScenarioReport | None) -> tuple[float, float, float]:
    """``(N_sp, visibility, speckle size)`` of a run, NaN where undefined."""
    nan = float("nan")
    if rep is None:
        return nan, nan, nan
    m = rep.metrics
    if rep.experiment == "coherence_transition":
        r = m["points"][0]
        return r["N_sp"], r["visibility"], r["speckle_fwhm_measured"]
    if rep.experiment == "ghost_diffraction":
        return m.get("N_sp", nan), m.get("g_cut_visibility", nan), m.get("speckle_fwhm_measured", nan)
    if rep.experiment == "coherent_limit":
        return m.get("N_sp", nan), m.get("arm1_single_shot_visibility", nan), m.get("speckle_size_nominal", nan)
    return nan, nan, nan


def _split_values(values) -> list[str]:
    out = []
    for v in values:
        out.extend(t.strip() for t in str(v).split(",") if t.strip())
    return out


def cmd_sweep(scenario_path, key, values, overrides=(), out_dir=None, force=False, argv=(), log=print) -> int:
    """One sub-run per value of ``key``; writes ``aggregate.csv``.

    For a coherence-transition scenario a sweep of ``source.D0`` sets the
    transition's D0 list to that single value.
    """
    key = key.strip().lower()
    if key not in NUMERIC_KEYS:
        raise ConfigError("sweep key must address a numeric setting", key=key)
    vals = _split_values(values)
    if not vals:
        raise ConfigError("sweep needs at least one value", key=key)
    base = load_scenario(scenario_path, overrides)
    subs = []
    for v in vals:
        ov = list(overrides) + [f"{key}={v}"]
        sc = load_scenario(scenario_path, ov)
        if key == "source.d0" and sc.config.experiment == "coherence_transition":
            cfg = replace(sc.config, D0_list=(sc.values[key],))
            sc = Scenario(cfg, sc.values, sc.text, sc.path)
        subs.append((v, sc))
    out = Path(out_dir) if out_dir else _default_out(base.config.name + "_sweep")
    _prepare_out(out, force)
    rows = {"value": [], "N_sp": [], "visibility": [], "dx": [], "exit_code": []}
    files, worst = [], EXIT_PASS
    for v, sc in subs:
        sub = out / _safe(f"{key}={v}")
        _prepare_out(sub, force)
        log(f"-- {key} = {v}")
        code, rep = _run_one(sc, sub, argv, log)
        nsp, vis, dx = _headline(rep)
        rows["value"].append(float(sc.values[key]))
        rows["N_sp"].append(float(nsp))
        rows["visibility"].append(float(vis))
        rows["dx"].append(float(dx))
        rows["exit_code"].append(code)
        worst = max(worst, code)
        files.append(sub.name)
    io.write_table_csv(out / "aggregate.csv", rows, key=key)
    _write_manifest(
        out,
        config_sha256=base.sha256,
        seed=base.config.seed,
        wall=None,
        outputs=files + ["aggregate.csv"],
        summary={"key": key, "values": vals, "exit_codes": rows["exit_code"]},
        exit_code=worst,
        argv=argv,
    )
    return worst


def cmd_oracle(out_dir=None, quick=False, seed=None, frames=None, workers=None, force=False, argv=(), log=print) -> int:
    """Run the built-in oracle suite; writes ``margins.csv``."""
    kw = {}
    if seed is not None:
        kw["seed"] = seed
    if frames is not None:
        kw["frames"] = frames
    if workers is not None:
        kw["workers"] = workers
    cfg = oracle_config(quick, **kw)
    out = Path(out_dir) if out_dir else _default_out(cfg.name)
    _prepare_out(out, force)
    text = json.dumps(_jsonable(asdict(cfg)), sort_keys=True)
    sc = Scenario(cfg, {}, text)
    code, _ = _run_one(sc, out, argv, log)
    return code


def _add_common(p, frames=True):
    p.add_argument("--seed", type=int, help="64-bit master seed")
    if frames:
        p.add_argument("--frames", type=int, help="number of speckle frames")
    p.add_argument("--workers", type=int, help="worker threads (default: $GHOSTSIM_WORKERS or CPU count)")
    p.add_argument("--out", help="output directory (default: runs/<name>)")
    p.add_argument("--force", action="store_true", help="overwrite a non-empty output directory")
    p.add_argument("--quick", action="store_true", help="reduced statistics (oracle: 1000 frames, 5 SE band)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ghostsim", description="Ghost diffraction with pseudo-thermal speckle.")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one scenario file")
    r.add_argument("scenario")
    r.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE", help="override a scenario entry")
    _add_common(r)

    s = sub.add_parser("sweep", help="run a scenario once per value of one numeric key")
    s.add_argument("scenario")
    s.add_argument("key", help="dotted key, e.g. source.D0")
    s.add_argument("values", nargs="*", help="values (space or comma separated, units allowed)")
    s.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE")
    _add_common(s)

    o = sub.add_parser("oracle", help="run the built-in oracle suite")
    _add_common(o)
    return ap


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on usage errors, which matches the config code
        return int(e.code or 0)
    err = lambda msg: print(f"ghostsim: {msg}", file=sys.stderr)  # noqa: E731
    try:
        if args.command == "run":
            return cmd_run(args.scenario, _cli_overrides(args), args.out, args.force, argv)
        if args.command == "sweep":
            for item in args.set or []:
                parse_override(item)
            return cmd_sweep(args.scenario, args.key, args.values, _cli_overrides(args), args.out, args.force, argv)
        return cmd_oracle(args.out, args.quick, args.seed, args.frames, args.workers, args.force, argv)
    except ConfigError as e:
        err(f"config error: {e}")
        return EXIT_CONFIG
    except GuardError as e:
        err(f"guard: {e}")
        return EXIT_GUARD
    except (GhostSimError, ValueError) as e:
        err(f"config error: {e}")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
