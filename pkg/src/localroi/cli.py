"""``localroi`` command-line interface.

Exit codes: 0 success, 1 a verified mathematical check failed, 2 input or
schema error, 3 solver or resource failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import __version__
from . import io as jio
from .config import DEFAULT_TOL, Tolerances
from .construction import build_optimal_task, verify_achievability
from .discrimination import (
    DiscriminationTask,
    LocalStrategy,
    bound_report,
    psg_best_locc1,
    psg_best_lo_n,
    psg_compatible_seesaw,
)
from .errors import (
    DegenerateCertificateError,
    GenerationError,
    InaccurateCertificateError,
    ResourceError,
    SchemaError,
    ShapeError,
    SolverError,
)
from .incompatibility import compute_roi, tensor_roi
from .linalg import matrix_to_json
from .measurements import MeasurementSet, validate_set
from .oracle import simulate_game

log = logging.getLogger("localroi")

EXIT_OK, EXIT_CHECK, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2, 3

DEFAULTS = {
    "restarts": 20,
    "seed": 0,
    "trials": 100_000,
    "mode": "lo",
    "tensor_tol": 1e-5,
    "compat_tol": 1e-6,
    "sigma": 4.0,
}


class InputError(Exception):
    pass


@dataclasses.dataclass(frozen=True)
class RunConfig:
    command: str
    inputs: tuple[str, ...]
    task: str | None
    output: str | None
    tol: Tolerances
    seed: int
    restarts: int
    parties: int | None
    trials: int
    mode: str
    parent_sizes: tuple[int, ...] | None

    def as_json(self) -> dict[str, Any]:
        out = dataclasses.asdict(self)
        out["tol"] = dataclasses.asdict(self.tol)
        out["inputs"] = list(self.inputs)
        out["parent_sizes"] = None if self.parent_sizes is None else list(self.parent_sizes)
        out.pop("output")
        return out


# --------------------------------------------------------------------------
# input helpers


def _load_set(path: str, tol: Tolerances) -> MeasurementSet:
    s = jio.set_from_json(jio.load(path, "measurement_set.v1"))
    bad = validate_set(s, tol)
    if bad:
        v = bad[0]
        where = f"/povms/{v.povm}" + ("" if v.outcome is None else f"/{v.outcome}")
        raise SchemaError(f"{path}: {v.kind} violation (residual {v.residual:.3e})", where)
    return s


def _load_sets(cfg: RunConfig, count: int | None = None) -> list[MeasurementSet]:
    if not cfg.inputs:
        raise InputError("at least one --input measurement set is required")
    if count is not None and len(cfg.inputs) != count:
        raise InputError(f"{cfg.command} needs exactly {count} --input files, got {len(cfg.inputs)}")
    if cfg.parties is not None and len(cfg.inputs) != cfg.parties:
        raise InputError(f"--parties {cfg.parties} but {len(cfg.inputs)} --input files")
    return [_load_set(p, cfg.tol) for p in cfg.inputs]


def _load_task(cfg: RunConfig) -> DiscriminationTask:
    if cfg.task is None:
        raise InputError(f"{cfg.command} needs --task")
    return jio.task_from_json(jio.load(cfg.task, "task.v1"))


def _write(cfg: RunConfig, obj: dict, schema_id: str) -> None:
    if cfg.output:
        jio.save(cfg.output, obj, schema_id)
    else:
        jio.validate(jio._plain(obj), schema_id)


def _report(cfg: RunConfig, result: dict, passed: bool | None = None) -> dict:
    body: dict[str, Any] = {"command": cfg.command, "result": result}
    if passed is not None:
        body["passed"] = passed
    return jio.envelope("command_report.v1", body, cfg.as_json())


def _strategy_json(st: LocalStrategy) -> dict:
    return {"mode": st.mode, "choices": [c.tolist() for c in st.choices], "guess": st.guess.tolist()}


# --------------------------------------------------------------------------
# commands


def cmd_roi(cfg: RunConfig) -> int:
    (s,) = _load_sets(cfg, 1)
    cert = compute_roi(s, cfg.tol)
    fails = cert.check(s, cfg.tol)
    _write(cfg, jio.cert_to_json(cert, cfg.as_json()), "roi_cert.v1")
    print(f"roi = {cert.roi:.10f}  gap = {cert.gap:.2e}  M* = {cert.witness_trace:.10f}")
    if fails:
        print("certificate invariants violated: " + ", ".join(fails))
        return EXIT_CHECK
    return EXIT_OK


def cmd_compat_check(cfg: RunConfig) -> int:
    (s,) = _load_sets(cfg, 1)
    cert = compute_roi(s, cfg.tol)
    compatible = cert.roi <= DEFAULTS["compat_tol"]
    _write(cfg, _report(cfg, {"roi": cert.roi, "gap": cert.gap, "compatible": compatible, "threshold": DEFAULTS["compat_tol"]}), "command_report.v1")
    print(f"{'compatible' if compatible else 'incompatible'} (roi = {cert.roi:.3e})")
    return EXIT_OK


def cmd_tensor_roi(cfg: RunConfig) -> int:
    a, b = _load_sets(cfg, 2)
    r = tensor_roi(a, b, cfg.tol)
    ok = r.multiplicativity_residual <= DEFAULTS["tensor_tol"]
    _write(cfg, _report(cfg, {**r._asdict(), "threshold": DEFAULTS["tensor_tol"]}, ok), "command_report.v1")
    print(f"I_a = {r.I_a:.10f}  I_b = {r.I_b:.10f}  I_ab = {r.I_ab:.10f}  residual = {r.multiplicativity_residual:.2e}")
    return EXIT_OK if ok else EXIT_CHECK


def cmd_psg(cfg: RunConfig) -> int:
    task = _load_task(cfg)
    sets = _load_sets(cfg)
    if cfg.mode == "locc1":
        if len(sets) != 2:
            raise InputError("--mode locc1 needs exactly two parties")
        res = psg_best_locc1(task, *sets)
    else:
        res = psg_best_lo_n(task, sets)
    _write(cfg, _report(cfg, {"value": res.value, "strategy": _strategy_json(res.strategy)}), "command_report.v1")
    print(f"P_{cfg.mode} = {res.value:.12f}")
    return EXIT_OK


def cmd_seesaw(cfg: RunConfig) -> int:
    task = _load_task(cfg)
    sets = _load_sets(cfg) if cfg.inputs else None
    if cfg.parent_sizes is None and sets is None:
        raise InputError("seesaw needs --parent-sizes or --input sets to size the parents")
    res = psg_compatible_seesaw(task, cfg.parent_sizes, cfg.restarts, cfg.seed, tol=cfg.tol, sets=sets)
    result = {
        "value": res.value,
        "restart_values": res.restart_values,
        "iterations": res.iterations,
        "parents": [[matrix_to_json(e) for e in p] for p in res.parents],
    }
    _write(cfg, _report(cfg, result), "command_report.v1")
    print(f"compatible lower bound = {res.value:.12f} (best of {len(res.restart_values)} restarts)")
    return EXIT_OK


def cmd_bound_check(cfg: RunConfig) -> int:
    task = _load_task(cfg)
    sets = _load_sets(cfg)
    rep = bound_report(task, sets, restarts=cfg.restarts, seed=cfg.seed, tol=cfg.tol)
    body = dataclasses.asdict(rep)
    body.pop("details")
    _write(cfg, jio.envelope("bound_report.v1", body, cfg.as_json()), "bound_report.v1")
    print(f"P_lo = {rep.p_lo:.10f}  bound = {rep.bound:.10f}  ratio = {rep.ratio:.6f}  {'PASS' if rep.passed else 'FAIL'}")
    return EXIT_OK if rep.passed else EXIT_CHECK


def _construct(cfg: RunConfig):
    a, b = _load_sets(cfg, 2)
    ca, cb = compute_roi(a, cfg.tol), compute_roi(b, cfg.tol)
    return a, b, ca, cb, build_optimal_task(ca, cb, cfg.tol)


def cmd_construct(cfg: RunConfig) -> int:
    if not cfg.output:
        raise InputError("construct needs --output for the task file")
    a, b, ca, cb, bundle = _construct(cfg)
    out = Path(cfg.output)
    meta_path = out.with_name(out.stem + ".meta.json")
    jio.save(out, jio.task_to_json(bundle.task), "task.v1")
    meta = {
        "M_star": bundle.M_star,
        "N_star": bundle.N_star,
        "roi_a": ca.roi,
        "roi_b": cb.roi,
        "dropped_mass": bundle.dropped_mass,
        "label_maps": bundle.label_maps(),
        "task_file": out.name,
    }
    jio.save(meta_path, jio.envelope("bundle_meta.v1", meta, cfg.as_json()), "bundle_meta.v1")
    print(f"wrote {out} and {meta_path}  (M* = {bundle.M_star:.10f}, N* = {bundle.N_star:.10f})")
    return EXIT_OK


def cmd_verify_achievability(cfg: RunConfig) -> int:
    a, b, ca, cb, bundle = _construct(cfg)
    rep = verify_achievability(bundle, a, b, ca, cb, restarts=cfg.restarts, seed=cfg.seed, tol=cfg.tol)
    body = dataclasses.asdict(rep)
    body["checks"] = rep.checks
    _write(cfg, _report(cfg, body, rep.passed), "command_report.v1")
    for name, ok in rep.checks.items():
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    print(f"ratio = {rep.ratio:.8f}  expected = {rep.expected_ratio:.8f}")
    return EXIT_OK if rep.passed else EXIT_CHECK


def cmd_simulate(cfg: RunConfig) -> int:
    task = _load_task(cfg)
    sets = _load_sets(cfg)
    if cfg.mode == "locc1":
        if len(sets) != 2:
            raise InputError("--mode locc1 needs exactly two parties")
        best = psg_best_locc1(task, *sets)
    else:
        best = psg_best_lo_n(task, sets)
    sim = simulate_game(task, sets, best.strategy, cfg.trials, cfg.seed)
    ok = sim.within(best.value, DEFAULTS["sigma"])
    result = {**dataclasses.asdict(sim), "expected": best.value, "n_sigma": DEFAULTS["sigma"]}
    _write(cfg, _report(cfg, result, ok), "command_report.v1")
    print(f"empirical = {sim.empirical_rate:.6f} +- {sim.std_error:.6f}  expected = {best.value:.6f}")
    return EXIT_OK if ok else EXIT_CHECK


COMMANDS: dict[str, tuple[Callable[[RunConfig], int], str]] = {
    "roi": (cmd_roi, "robustness certificate for one measurement set"),
    "compat-check": (cmd_compat_check, "decide joint measurability (roi <= 1e-6)"),
    "tensor-roi": (cmd_tensor_roi, "check 1+I of a product set against the product of 1+I"),
    "psg": (cmd_psg, "optimal local guessing probability (lo, or locc1 for two parties)"),
    "seesaw": (cmd_seesaw, "see-saw lower bound with compatible measurements"),
    "bound-check": (cmd_bound_check, "check the local guessing bound on a task"),
    "construct": (cmd_construct, "build the bound-achieving task from two sets"),
    "verify-achievability": (cmd_verify_achievability, "build and verify the bound-achieving task"),
    "simulate": (cmd_simulate, "Monte Carlo play of the optimal strategy"),
}


def _tol_override(text: str) -> tuple[str, float]:
    key, sep, value = text.partition("=")
    fields = {f.name for f in dataclasses.fields(Tolerances)}
    if not sep or key not in fields:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE with KEY in {sorted(fields)}")
    try:
        num = int(value) if key == "string_cap" else float(value)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad number {value!r}") from exc
    return key, num


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="localroi", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name, (_, helptext) in COMMANDS.items():
        sp = sub.add_parser(name, help=helptext, formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        sp.add_argument("-i", "--input", action="append", default=[], help="measurement_set.v1 file (repeat per party)")
        sp.add_argument("--task", help="task.v1 file")
        sp.add_argument("-o", "--output", help="write the JSON report here")
        sp.add_argument("--tol", action="append", default=[], type=_tol_override, metavar="KEY=VALUE",
                        help="tolerance override, e.g. gap_tol=1e-7")
        sp.add_argument("--seed", type=int, default=DEFAULTS["seed"], help="RNG seed for see-saw restarts and sampling")
        sp.add_argument("--restarts", type=int, default=DEFAULTS["restarts"] if name in ("seesaw", "verify-achievability") else 0,
                        help="see-saw restarts")
        sp.add_argument("--parties", type=int, help="expected number of parties (checked against --input)")
        sp.add_argument("--trials", type=int, default=DEFAULTS["trials"], help="Monte Carlo trials")
        sp.add_argument("--mode", choices=["lo", "locc1"], default=DEFAULTS["mode"], help="strategy class for psg")
        sp.add_argument("--parent-sizes", type=int, nargs="+", help="see-saw parent outcome counts per party")
        sp.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        tol = DEFAULT_TOL.with_overrides(**dict(args.tol))
        if args.restarts < 0 or args.trials < 1:
            raise InputError("--restarts must be >= 0 and --trials >= 1")
    except (ValueError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    cfg = RunConfig(
        command=args.command,
        inputs=tuple(args.input),
        task=args.task,
        output=args.output,
        tol=tol,
        seed=args.seed,
        restarts=args.restarts,
        parties=args.parties,
        trials=args.trials,
        mode=args.mode,
        parent_sizes=None if args.parent_sizes is None else tuple(args.parent_sizes),
    )
    handler = COMMANDS[cfg.command][0]
    try:
        return handler(cfg)
    except (SchemaError, InputError, ShapeError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except DegenerateCertificateError as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except (SolverError, InaccurateCertificateError, ResourceError, GenerationError, np.linalg.LinAlgError, ArithmeticError, MemoryError) as exc:
        print(f"solver/resource failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
