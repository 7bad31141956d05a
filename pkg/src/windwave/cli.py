"""
cli.py

Command-line entry point.

    windwave laminar    --config cfg.json --out runs/a [--lambdas 0.2:2:10]
    windwave bifurcate  --config cfg.json --out runs/a
    windwave branch     --config cfg.json --out runs/a --s-max 0.01 --steps 10
    windwave multiplier --config cfg.json --out runs/a --k-max 8 --lambdas 0.4,0.9
    windwave verify     --out runs/v

The config is one JSON document with a "regime" key and every physical field
spelled out; an optional "numerics" object overrides numerical defaults.
Exit codes: 0 ok, 1 verification failed, 2 infeasible, 3 numerical failure,
4 bad input.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from . import __version__
from .core import BadInputError, InfeasibleError, NumericalFailure, PhysicalConfig, WindWaveError, gamma_rel_profile

log = logging.getLogger("windwave")

EXIT_OK, EXIT_VERIFY, EXIT_INFEASIBLE, EXIT_NUMERICAL, EXIT_BAD_INPUT = 0, 1, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage errors are bad input, not "infeasible"
        self.print_usage(sys.stderr)
        self.exit(EXIT_BAD_INPUT, f"{self.prog}: error: {message}\n")


# --- formatting -------------------------------------------------------------

def fmt(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def write_json(path: Path, obj: Any) -> str:
    text = json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"
    path.write_text(text, encoding="utf-8")
    return hashlib.sha256(text.encode()).hexdigest()


def _sha(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


# --- config -----------------------------------------------------------------

def load_config(path: str) -> tuple[PhysicalConfig, dict, str]:
    try:
        raw = Path(path).read_bytes()
        doc = json.loads(raw)
    except OSError as exc:
        raise BadInputError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise BadInputError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise BadInputError("config must be a JSON object")
    numerics = doc.get("numerics", {})
    if not isinstance(numerics, dict):
        raise BadInputError("'numerics' must be an object")
    return PhysicalConfig.from_dict(doc), numerics, hashlib.sha256(raw).hexdigest()


def parse_lambdas(grid: Any) -> np.ndarray:
    """'a:b:n', 'x,y,z', a list, or {"start", "stop", "num"}."""
    if grid is None:
        raise BadInputError("no lambda grid given (--lambdas or numerics.lambda_grid)")
    try:
        if isinstance(grid, dict):
            vals = np.linspace(float(grid["start"]), float(grid["stop"]), int(grid["num"]))
        elif isinstance(grid, (list, tuple)):
            vals = np.array([float(v) for v in grid])
        elif ":" in str(grid):
            a, b, n = str(grid).split(":")
            vals = np.linspace(float(a), float(b), int(n))
        else:
            vals = np.array([float(v) for v in str(grid).split(",") if v.strip()])
    except (KeyError, ValueError, TypeError) as exc:
        raise BadInputError(f"malformed lambda grid {grid!r}") from exc
    if vals.size == 0:
        raise BadInputError("lambda grid is empty")
    if not np.all(np.isfinite(vals)):
        raise BadInputError("lambda grid has non-finite values")
    return vals


def _setup_logging() -> None:
    level = os.environ.get("WINDWAVE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def _limit_threads(n: int | None) -> None:
    if not n:
        return
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        log.info("threadpoolctl not installed; --threads only recorded in the manifest")
        return
    threadpool_limits(n)


class Run:
    """Output directory, manifest and the index of produced files."""

    def __init__(self, args: argparse.Namespace, params: dict, config_sha: str | None):
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        manifest = {
            "tool": "windwave",
            "version": __version__,
            "subcommand": args.command,
            "config": args.config,
            "config_sha256": config_sha,
            "seed": args.seed,
            "threads": args.threads,
            "grid_refine": args.grid_refine,
            "parameters": params,
            "out": str(self.out),
        }
        self.manifest_sha = write_json(self.out / "manifest.json", manifest)
        self.files: dict[str, str] = {}

    def add(self, name: str) -> Path:
        self.files[name] = ""
        return self.out / name

    def close(self, status: str) -> None:
        for name in self.files:
            self.files[name] = _sha(self.out / name)
        write_json(self.out / "outputs.json", {"manifest_sha256": self.manifest_sha, "status": status, "files": self.files})


# --- subcommands ------------------------------------------------------------

def _refined(n: int, k: int) -> int:
    return n * 2**k


def cmd_laminar(args, cfg: PhysicalConfig, numerics: dict, sha: str) -> int:
    from .laminar import laminar

    lams = parse_lambdas(args.lambdas if args.lambdas is not None else numerics.get("lambda_grid"))
    run = Run(args, {"lambdas": lams.tolist()}, sha)
    prof = gamma_rel_profile(cfg) if cfg.regime.lidded else None
    rows = []
    for lam in lams:
        L = laminar(cfg, float(lam), prof)
        rows.append((lam, L.Q, L.depth, L.width))
    write_csv(run.add("laminar.csv"), ["lambda", "Q", "depth", "width"], rows)
    run.close("ok")
    return EXIT_OK


def cmd_bifurcate(args, cfg: PhysicalConfig, numerics: dict, sha: str) -> int:
    from .dispersion import bifurcate

    elements = _refined(int(numerics.get("elements", 256)), args.grid_refine)
    samples = int(numerics.get("samples", 65))
    run = Run(args, {"n": args.mode, "elements": elements, "samples": samples}, sha)
    try:
        bp = bifurcate(cfg, n=args.mode, elements=elements, samples=samples)
    except InfeasibleError as exc:
        err = {"error": "infeasible", "condition": exc.condition, "value": exc.value, "message": str(exc)}
        write_json(run.add("bifurcation.json"), err)
        print(json.dumps(_jsonable(err), sort_keys=True))
        run.close("infeasible")
        return EXIT_INFEASIBLE
    doc = bp.to_dict()
    doc["manifest_sha256"] = run.manifest_sha
    write_json(run.add("bifurcation.json"), doc)
    print(json.dumps({"lambda_star": bp.lam_star, "regime": cfg.regime.value}))
    run.close("ok")
    return EXIT_OK


def cmd_branch(args, cfg: PhysicalConfig, numerics: dict, sha: str) -> int:
    from . import height_pde as hp
    from .dispersion import bifurcate

    s_max = float(args.s_max if args.s_max is not None else numerics.get("s_max", 1e-2))
    steps = int(args.steps if args.steps is not None else numerics.get("steps", 10))
    nq = int(numerics.get("nq", 32))
    nw = _refined(int(numerics.get("n_water", 32)), args.grid_refine)
    na = _refined(int(numerics.get("n_air", 32)), args.grid_refine)
    run = Run(args, {"s_max": s_max, "steps": steps, "nq": nq, "n_water": nw, "n_air": na}, sha)
    amps = hp.amplitude_schedule(s_max, steps)
    prof = gamma_rel_profile(cfg)
    lam = bifurcate(cfg, gamma_rel=prof).lam_star
    grid = hp.HeightGrid.make(cfg, nq, nw, na)
    pts, err = hp.continue_branch(cfg, lam, amps, grid, prof)
    write_csv(
        run.add("branch.csv"),
        ["s", "Q", "depth", "eta_inf", "newton_iterations", "F_E_deviation"],
        [(p.s, p.Q, p.field.depth, p.diagnostics["eta_max"], p.iterations,
          max(abs(v) for v in p.diagnostics["F_E"])) for p in pts],
    )
    keys = ["F_E_mean", "F_E_spread", "drag", "bernoulli_resid", "kinematic_resid", "circ_err"]
    write_csv(run.add("diagnostics.csv"), ["s"] + keys, [[p.s] + [p.diagnostics[k] for k in keys] for p in pts])
    if err is not None:
        log.error("%s", err)
        print(f"branch stopped after {len(pts)} of {steps} points: {err}", file=sys.stderr)
        run.close("partial")
        return EXIT_NUMERICAL
    run.close("ok")
    return EXIT_OK


def cmd_multiplier(args, cfg: PhysicalConfig, numerics: dict, sha: str) -> int:
    from . import dispersion as disp
    from . import strip_transform as st

    k_max = int(args.k_max if args.k_max is not None else numerics.get("k_max", 8))
    fd_k = int(args.fd_k_max if args.fd_k_max is not None else numerics.get("fd_k_max", 3))
    if k_max < 1:
        raise BadInputError("k_max must be >= 1")
    lam_grid = args.lambdas if args.lambdas is not None else numerics.get("lambda_grid")
    if lam_grid is None:
        lams = np.array([disp.solve_unbounded_lambda_star(cfg)])
    else:
        lams = parse_lambdas(lam_grid)
    grid = st.StripGrid.make()
    for _ in range(args.grid_refine):
        grid = grid.refine()
    run = Run(args, {"k_max": k_max, "fd_k_max": fd_k, "lambdas": lams.tolist(),
                     "strip": {"n_water": grid.y_water.size - 1, "n_air": grid.y_air.size - 1,
                               "y_max": grid.y_max, "nx": grid.nx}}, sha)
    solver = st.StripSolver(cfg, grid) if fd_k > 0 else None
    rows = []
    for lam in lams:
        for k in range(1, k_max + 1):
            m = disp.multiplier_m(cfg, k, lam)
            mt = disp.multiplier_m_tilde(cfg, k, lam)
            sym = disp.interface_symbol(cfg, k, lam)
            fd = st.fd_multiplier(cfg, float(lam), k, solver=solver) if k <= fd_k else None
            ref = mt if cfg.regime.value == "unbounded_shear" else m
            rows.append((k, lam, m, mt, sym, fd,
                         None if fd is None else abs(fd - 2 * ref),
                         None if fd is None else abs(fd - 2 * sym)))
    write_csv(run.add("multiplier.csv"),
              ["k", "lambda", "m", "m_tilde", "interface_symbol", "fd", "abs_err_vs_2m", "abs_err_vs_2symbol"], rows)
    run.close("ok")
    return EXIT_OK


def cmd_verify(args, cfg, numerics: dict, sha: str | None) -> int:
    from . import verify

    run = Run(args, {}, sha)
    lines: list[str] = []

    def echo(line: str) -> None:
        lines.append(line)
        print(line, flush=True)

    results = verify.run_all(args.seed, echo)
    extra = [verify.criterion_2(verify.feasible_lidded()), verify.companion_8()]
    for r in extra:
        echo("companion " + r.line())
    passed = sum(r.passed for r in results)
    echo(f"{passed}/{len(results)} criteria passed")
    run.add("verify.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    write_csv(run.add("verify.csv"), ["criterion", "name", "passed", "detail"],
              [(r.number, r.name, r.passed, r.detail) for r in results + extra])
    run.close("ok" if passed == len(results) else "failed")
    return EXIT_OK if passed == len(results) else EXIT_VERIFY


COMMANDS = {
    "laminar": cmd_laminar,
    "bifurcate": cmd_bifurcate,
    "branch": cmd_branch,
    "multiplier": cmd_multiplier,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config with a 'regime' discriminator")
    common.add_argument("--out", default="windwave_out", help="output directory")
    common.add_argument("--seed", type=int, default=None, help="seed for sampled checks")
    common.add_argument("--threads", type=int, default=None, help="BLAS thread cap")
    common.add_argument("--grid-refine", type=int, default=0, help="halve grid spacings K times")

    p = _Parser(prog="windwave", description=__doc__.split("\n\n")[0].strip())
    p.add_argument("--version", action="version", version=f"windwave {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    s = sub.add_parser("laminar", parents=[common], help="laminar family over a lambda grid")
    s.add_argument("--lambdas", help="a:b:n or comma list")
    s = sub.add_parser("bifurcate", parents=[common], help="bifurcation point and condition report")
    s.add_argument("--mode", type=int, default=1, help="mode number n (lidded irrotational)")
    s = sub.add_parser("branch", parents=[common], help="continue the bifurcating branch")
    s.add_argument("--s-max", type=float)
    s.add_argument("--steps", type=int)
    s = sub.add_parser("multiplier", parents=[common], help="Fourier multipliers and FD comparison")
    s.add_argument("--k-max", type=int)
    s.add_argument("--fd-k-max", type=int, help="largest k with a finite-difference check")
    s.add_argument("--lambdas", help="a:b:n or comma list (default lambda*)")
    sub.add_parser("verify", parents=[common], help="run the acceptance suite")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _setup_logging()
    _limit_threads(args.threads)
    try:
        if args.grid_refine < 0:
            raise BadInputError("--grid-refine must be >= 0")
        if args.command == "verify" and not args.config:
            cfg, numerics, sha = None, {}, None
        else:
            if not args.config:
                raise BadInputError(f"{args.command} needs --config")
            cfg, numerics, sha = load_config(args.config)
        return COMMANDS[args.command](args, cfg, numerics, sha)
    except InfeasibleError as exc:
        print(json.dumps(_jsonable({"error": "infeasible", "condition": exc.condition, "value": exc.value,
                                    "message": str(exc)}), sort_keys=True), file=sys.stderr)
        return EXIT_INFEASIBLE
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except BadInputError as exc:
        print(f"bad input: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except WindWaveError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
