"""Command-line entry point: ``almm simulate | unmix | learn | eval | render``.

Every command takes an optional JSON run config (``--config``); flags given
on the command line override the file.  Exit codes: 0 success, 2 config
error, 3 data error, 4 numerical failure (non-convergence is only escalated
with ``--strict``).
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import io
from .baselines import (PixelSolveError, unmix_clsu, unmix_fclsu, unmix_sclsu,
                        unmix_ssunsal, unmix_sunsal)
from .metrics import ReportRow, armse, asam, overall_accuracy, rrmse
from .model import ContractError, reconstruct
from .nnls import DEFAULT_DELTA, NNLSConvergenceError
from .su import unmix_image_almm
from .svdl import learn_svdl, svdl_diagnostics
from .synthetic import generate_scene

MODELS = ("fclsu", "clsu", "sclsu", "sunsal", "ssunsal", "almm")
EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class NumericalFailure(RuntimeError):
    pass


def _parser():
    p = argparse.ArgumentParser(prog="almm", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON run config")
        sp.add_argument("--seed", type=int, help="RNG seed (unsigned 64-bit)")
        sp.add_argument("--out", help="output directory (or file for eval)")
        sp.add_argument("--strict", action="store_true", default=None,
                        help="treat non-convergence as a failure (exit 4)")
        sp.add_argument("--run-id", dest="run_id")

    sp = sub.add_parser("simulate", help="generate a synthetic scene bundle")
    common(sp)

    for name, hlp in (("unmix", "unmix a scene"), ("learn", "learn a variability dictionary")):
        sp = sub.add_parser(name, help=hlp)
        common(sp)
        sp.add_argument("--input", help="scene directory holding Y.almm and A.almm")
        sp.add_argument("--truth", help="reference abundances (.almm or .csv)")
        if name == "unmix":
            sp.add_argument("--model", choices=MODELS)
            sp.add_argument("--dict", help="variability dictionary E for --model almm")
            sp.add_argument("--learn", action="store_true", default=None,
                            help="learn E jointly (--model almm)")
            sp.add_argument("--lambda-sparse", dest="lambda_sparse", type=float)

    sp = sub.add_parser("eval", help="score a results directory against a scene")
    common(sp)
    sp.add_argument("--input", help="scene directory with ground truth")
    sp.add_argument("--results", help="results directory written by unmix/learn")
    sp.add_argument("--truth", help="reference abundances (.almm or .csv)")

    sp = sub.add_parser("render", help="write one PGM abundance map per endmember")
    common(sp)
    sp.add_argument("--abundances", help="abundance matrix (.almm or .csv)")
    sp.add_argument("--shape", type=int, nargs=2, metavar=("ROWS", "COLS"))
    sp.add_argument("--range", type=float, nargs=2, metavar=("LO", "HI"))
    return p


def _resolve(args) -> dict:
    """Merge the config file with command-line overrides and validate."""
    doc = io.load_config(args.config) if args.config else {}
    if not isinstance(doc, dict):
        raise io.ConfigError("config must be a JSON object")
    doc = dict(doc)
    for key, val in vars(args).items():
        if key in ("command", "config", "seed") or val is None:
            continue
        doc[key] = list(val) if isinstance(val, (list, tuple)) else val
    if args.seed is not None:
        doc["scene"] = dict(doc.get("scene", {}), rng_seed=args.seed)
        doc["solver"] = dict(doc.get("solver", {}), rng_seed=args.seed)
    return io.parse_config(doc)


def _require(cfg, *keys):
    for k in keys:
        if k not in cfg:
            raise io.ConfigError(f"missing required setting {k!r}")


def _write_json(path, obj):
    io.atomic_write(path, (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode())


def _truth(cfg, scene):
    if "truth" in cfg:
        return io.load_any_matrix(cfg["truth"])
    return scene.get("X_true")


def _report_row(cfg, algorithm, Y, A, X, S, E, B, X_true, wall_ms):
    Y_hat = reconstruct(A, X, S, E, B)
    labels = np.argmax(X_true, axis=0)
    return ReportRow(cfg.get("run_id", "run"), algorithm, armse(X_true, X),
                     rrmse(Y, Y_hat), asam(Y, Y_hat), overall_accuracy(labels, X), wall_ms)


def _check_status(cfg, status, what):
    bad = int(np.sum(np.asarray(status) == 1))
    if bad:
        msg = f"{what}: {bad} pixel(s) hit the iteration cap"
        if cfg.get("strict"):
            raise NumericalFailure(msg)
        print(f"warning: {msg}", file=sys.stderr)


# -- commands --------------------------------------------------------------

def cmd_simulate(cfg):
    _require(cfg, "out")
    scene = generate_scene(cfg["scene"])
    io.save_scene(cfg["out"], scene)
    return scene


def _load_inputs(cfg):
    _require(cfg, "input", "out")
    scene = io.load_scene_arrays(cfg["input"])
    if "truth" in cfg and not Path(cfg["truth"]).exists():
        raise io.DataError(f"truth file {cfg['truth']} does not exist")
    return scene


def _run_learn(cfg, Y, A, out):
    res = learn_svdl(Y, A, cfg["solver"])
    st = res.state
    if not st.converged:
        msg = f"dictionary learning stopped at the iteration cap ({st.iter})"
        if cfg.get("strict"):
            raise NumericalFailure(msg)
        print(f"warning: {msg}", file=sys.stderr)
    io.write_matrix(out / "E.almm", res.E.data)
    io.write_series_csv(out / "diagnostics.csv", svdl_diagnostics(st))
    status = np.where(st.degenerate, 2, 0 if st.converged else 1)
    return res.X.data, res.S.values, res.E.data, res.B.data, status, None


def cmd_unmix(cfg):
    model = cfg.get("model")
    if model is None:
        raise io.ConfigError("no model given; pass --model " + "|".join(MODELS))
    if model not in MODELS:
        raise io.ConfigError(f"unknown model {model!r}")
    if model == "almm" and not cfg.get("learn") and "dict" not in cfg:
        raise io.ConfigError(
            "--model almm needs a variability dictionary: pass --dict E.almm "
            "(e.g. from `almm learn`) or --learn to learn it jointly")
    scene = _load_inputs(cfg)
    E_fixed = None
    if model == "almm" and "dict" in cfg and not cfg.get("learn"):
        E_fixed = io.load_any_matrix(cfg["dict"])
    Y, A = scene["Y"], scene["A"]
    X_true = _truth(cfg, scene)
    out = Path(cfg["out"])
    lam = cfg.get("lambda_sparse")
    solver = cfg["solver"]

    t0 = time.perf_counter()
    E = B = None
    iters = None
    if model == "almm" and cfg.get("learn"):
        X, S, E, B, status, iters = _run_learn(cfg, Y, A, out)
    elif model == "almm":
        r = unmix_image_almm(Y, A, E_fixed, solver)
        E = E_fixed
        X, S, B, status, iters = r.X.data, r.S.values, r.B.data, r.status, r.iters
    else:
        if model == "fclsu":
            r = unmix_fclsu(Y, A, cfg.get("delta", DEFAULT_DELTA))
        elif model in ("clsu", "sclsu"):
            r = (unmix_clsu if model == "clsu" else unmix_sclsu)(Y, A)
        else:
            fn = unmix_sunsal if model == "sunsal" else unmix_ssunsal
            kw = {} if lam is None else {"lambda_sparse": lam}
            r = fn(Y, A, cfg=solver, **kw)
        X, status = r.X.data, r.status
        S = r.S.values if r.S is not None else np.ones(X.shape[1])
    wall_ms = 1e3 * (time.perf_counter() - t0)

    io.write_matrix(out / "X.almm", X)
    if model in ("sclsu", "ssunsal", "almm"):
        io.write_matrix(out / "S.almm", S)
    if B is not None:
        io.write_matrix(out / "B.almm", B)
    if E_fixed is not None:
        # keep E beside B so the results directory reconstructs on its own
        io.write_matrix(out / "E.almm", E_fixed)
    io.write_status_csv(out / "status.csv", status, iters)
    _write_json(out / "run.json", {"command": "unmix", "model": model,
                                   "shape": scene.get("manifest", {}).get("shape")})
    if X_true is not None:
        row = _report_row(cfg, model, Y, A, X, S, E, B, X_true, wall_ms)
        io.write_report(out / "metrics.csv", [row])
    _check_status(cfg, status, model)


def cmd_learn(cfg):
    scene = _load_inputs(cfg)
    Y, A = scene["Y"], scene["A"]
    X_true = _truth(cfg, scene)
    out = Path(cfg["out"])
    t0 = time.perf_counter()
    X, S, E, B, status, _ = _run_learn(cfg, Y, A, out)
    wall_ms = 1e3 * (time.perf_counter() - t0)
    io.write_matrix(out / "X.almm", X)
    io.write_matrix(out / "S.almm", S)
    io.write_matrix(out / "B.almm", B)
    io.write_status_csv(out / "status.csv", status)
    _write_json(out / "run.json", {"command": "learn", "model": "almm",
                                   "shape": scene.get("manifest", {}).get("shape")})
    if X_true is not None:
        io.write_report(out / "metrics.csv",
                        [_report_row(cfg, "almm", Y, A, X, S, E, B, X_true, wall_ms)])


def cmd_eval(cfg):
    _require(cfg, "input", "results", "out")
    scene = io.load_scene_arrays(cfg["input"])
    res = Path(cfg["results"])
    if not (res / "X.almm").exists():
        raise io.DataError(f"results directory {res} lacks X.almm")
    X_true = _truth(cfg, scene)
    if X_true is None:
        raise io.DataError("no ground-truth abundances (X_true.almm or --truth)")
    X = io.read_matrix(res / "X.almm")
    N = X.shape[1]
    S = io.read_matrix(res / "S.almm").ravel() if (res / "S.almm").exists() else np.ones(N)
    E = io.read_matrix(res / "E.almm") if (res / "E.almm").exists() else None
    B = io.read_matrix(res / "B.almm") if (res / "B.almm").exists() and E is not None else None
    algorithm = "unknown"
    if (res / "run.json").exists():
        algorithm = json.loads((res / "run.json").read_text()).get("model", algorithm)
    row = _report_row(cfg, algorithm, scene["Y"], scene["A"], X, S, E, B, X_true, 0.0)
    out = Path(cfg["out"])
    io.write_report(out if out.suffix == ".csv" else out / "report.csv", [row])
    return row


def cmd_render(cfg):
    _require(cfg, "abundances", "out")
    X = io.load_any_matrix(cfg["abundances"])
    shape = cfg.get("shape")
    if shape is None:
        meta = Path(cfg["abundances"]).parent / "run.json"
        if meta.exists():
            shape = json.loads(meta.read_text()).get("shape")
    if shape is None:
        raise io.ConfigError("image shape unknown; pass --shape ROWS COLS")
    rows, cols = (int(v) for v in shape)
    if rows * cols != X.shape[1]:
        raise io.DataError(f"shape {rows}x{cols} does not match {X.shape[1]} pixels")
    lo, hi = cfg.get("range", [0.0, 1.0])
    out = Path(cfg["out"])
    for k in range(X.shape[0]):
        # pixel n sits at row n // cols, column n % cols
        io.write_pgm(out / f"abundance_{k}.pgm", X[k].reshape(rows, cols), lo, hi)


COMMANDS = {"simulate": cmd_simulate, "unmix": cmd_unmix, "learn": cmd_learn,
            "eval": cmd_eval, "render": cmd_render}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = _resolve(args)
        COMMANDS[args.command](cfg)
    except io.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (io.DataError, ContractError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalFailure, PixelSolveError, NNLSConvergenceError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
