"""Command-line front end.

Exit codes: 0 detected, 3 inconclusive, 2 usage or input error, 1 a
self-checking reproduction violated one of its bounds.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from . import __version__
from .circuits import WMode, build_pool
from .detect import AdaptiveConfig, SeparabilityVerdict, algorithm1, algorithm2, detect_noisy_pure, detect_pure
from .optim import OptimizerConfig
from .qcore import MAX_QUBITS, DensityMatrix, PureState, bernoulli_estimate, power_overlap
from .stateio import StateFileError, read_json, read_state, write_json, write_state
from .statelib import NamedStateSpec, oracle_infidelity, rho3, rho4, rho_g, bell_chain

EXIT_DETECTED = 0
EXIT_BOUND_VIOLATED = 1
EXIT_INPUT = 2
EXIT_INCONCLUSIVE = 3

MODES = ("pure", "noisy", "mixed-full", "mixed-k")

log = logging.getLogger("pqcsep")


class OptimizerSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    max_iterations: int = Field(2000, ge=1)
    restarts: int = Field(10, ge=1)
    learning_rate: float = Field(0.05, gt=0)
    tolerance: float = Field(1e-9, gt=0)
    patience: int = Field(100, ge=1)
    polish: bool = True
    polish_iterations: int = Field(500, ge=0)
    stop_on_success: bool = True


class RunConfig(BaseModel):
    """Run configuration file; unknown keys are rejected."""

    model_config = ConfigDict(extra="forbid")

    seed: int = 0
    epsilon: float = Field(1e-4, gt=0, lt=1)
    s_max: Optional[int] = Field(None, ge=1)
    purity_tol: float = Field(1e-4, gt=0, lt=0.5)
    m_max: int = Field(8, ge=1)
    include_p1_member_per_round: bool = False
    w_mode: WMode = WMode.FULL3
    shots: Optional[int] = Field(None, ge=1)
    optimizer: OptimizerSection = OptimizerSection()
    out: Optional[str] = None
    trace_csv: Optional[str] = None

    def adaptive(self) -> AdaptiveConfig:
        opt = OptimizerConfig(seed=self.seed, threshold=self.epsilon, **self.optimizer.model_dump())
        return AdaptiveConfig(
            epsilon=self.epsilon,
            s_max=self.s_max,
            purity_tol=self.purity_tol,
            m_max=self.m_max,
            optimizer=opt,
            include_p1_member_per_round=self.include_p1_member_per_round,
            w_mode=self.w_mode,
        )


class InputError(Exception):
    pass


def _fail(msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return EXIT_INPUT


def _load_config(args) -> RunConfig:
    data = {}
    if getattr(args, "config", None):
        try:
            data = read_json(args.config)
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config: {exc}") from None
        if not isinstance(data, dict):
            raise InputError("config must be a JSON object")
    overrides = {
        "seed": args.seed,
        "epsilon": args.epsilon,
        "s_max": args.s_max,
        "m_max": args.m_max,
        "shots": args.shots,
        "out": args.out,
        "trace_csv": args.trace_csv,
    }
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise InputError(f"invalid config: {exc}") from None


def _write_trace(path: str, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["stage", "restart", "iteration", "cost"])
        w.writerows(rows)


def build_report(mode: str, verdict: SeparabilityVerdict, cfg: RunConfig, n_qubits: int) -> dict:
    report = {"mode": mode, "n_qubits": n_qubits, **verdict.to_dict()}
    report["config"] = cfg.model_dump(mode="json", exclude={"out", "trace_csv"})
    report["seed"] = cfg.seed
    return report


def run_detect(mode: str, state, cfg: RunConfig, trace: Optional[list] = None) -> SeparabilityVerdict:
    acfg = cfg.adaptive()
    if mode == "pure":
        if not isinstance(state, PureState):
            raise InputError("mode 'pure' needs a pure state file")
        return detect_pure(state, acfg, trace)
    rho = state.projector() if isinstance(state, PureState) else state
    if mode == "noisy":
        return detect_noisy_pure(rho, acfg, trace)
    if mode == "mixed-full":
        return algorithm1(rho, acfg, trace)
    return algorithm2(rho, acfg, trace)


def _shot_estimate(mode: str, verdict: SeparabilityVerdict, cfg: RunConfig) -> Optional[dict]:
    # for the fidelity-type costs the sampled quantity is the overlap probability (1 - cost)^2
    if cfg.shots is None or mode not in ("pure", "noisy") or verdict.final_cost is None:
        return None
    p = min(1.0, max(0.0, (1.0 - verdict.final_cost) ** 2))
    est = bernoulli_estimate(p, cfg.shots, cfg.seed)
    return {"probability": p, "estimate": est.estimate, "shots": est.shots, "seed": est.seed}


def cmd_detect(args) -> int:
    try:
        cfg = _load_config(args)
        state = read_state(args.state)
        if args.mode == "pure" and not isinstance(state, PureState):
            raise InputError("mode 'pure' needs a pure state file")
        if state.n_qubits < 2:
            raise InputError("detection needs at least two qubits")
        trace = [] if cfg.trace_csv else None
        verdict = run_detect(args.mode, state, cfg, trace)
    except (InputError, StateFileError) as exc:
        return _fail(str(exc))
    report = build_report(args.mode, verdict, cfg, state.n_qubits)
    shots = _shot_estimate(args.mode, verdict, cfg)
    if shots is not None:
        report["shot_estimate"] = shots
    text = json.dumps(report, indent=2)
    if cfg.out:
        Path(cfg.out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    if trace is not None:
        _write_trace(cfg.trace_csv, trace)
    return EXIT_DETECTED if verdict.detected else EXIT_INCONCLUSIVE


def pool_report(n: int) -> dict:
    pool = build_pool(n)
    return {
        "n_qubits": n,
        "L": len(pool.p2),
        "schedule": [[list(p) for p in layer] for layer in pool.schedule.layers],
        "p1": pool.p1.to_json(),
        "p2": [c.to_json() for c in pool.p2],
        "param_counts": {
            "p1_full3": pool.p1.num_params,
            "p1_reduced2": 2 * n,
            "p2": [c.num_params for c in pool.p2],
        },
    }


def cmd_pool(args) -> int:
    if not 2 <= args.n <= MAX_QUBITS:
        return _fail(f"n must lie in 2..{MAX_QUBITS}")
    rep = pool_report(args.n)
    if args.format == "json":
        print(json.dumps(rep, indent=2))
        return 0
    print(f"n = {args.n}, L = {rep['L']}")
    print(f"P1: W, {rep['param_counts']['p1_full3']} parameters ({2 * args.n} reduced)")
    for l, (layer, count) in enumerate(zip(rep["schedule"], rep["param_counts"]["p2"]), start=1):
        pairs = " ".join(f"({a},{b})" for a, b in layer)
        print(f"V{l}: {pairs}  [{count} parameters]")
    return 0


def cmd_state_gen(args) -> int:
    try:
        if args.spec is not None:
            path = Path(args.spec)
            raw = read_json(path) if path.exists() else json.loads(args.spec)
        else:
            raw = {"family": args.family}
            for key in ("n_qubits", "pairs", "q", "seed"):
                val = getattr(args, key)
                if val is not None:
                    raw[key] = val
        spec = NamedStateSpec.model_validate(raw)
        state = spec.build()
    except (ValidationError, ValueError, OSError) as exc:
        return _fail(f"invalid state spec: {exc}")
    write_state(args.out, state, compress=args.gzip)
    return 0


# ------------------------------------------------------------------ reproduce


def _repro_fig3a(out: Path, cfg: RunConfig) -> dict:
    rows = []
    checks = []
    for q in (0.2, 0.4, 0.6, 0.8):
        rho = rho_g(q)
        psi = bell_chain(5)
        prev = np.inf
        for m in range(1, 7):
            oracle = oracle_infidelity(q, m)
            num, den = power_overlap(rho, m, psi)
            dense = abs(1 - num / den)
            rows.append({"q": q, "m": m, "infidelity": oracle, "dense": dense, "abs_diff": abs(oracle - dense)})
            checks.append(("oracle matches dense power", abs(oracle - dense) <= 1e-10))
            checks.append(("infidelity decreases with m", oracle < prev))
            prev = oracle
        checks.append((f"q={q}: m=5 infidelity below 1e-4", oracle_infidelity(q, 5) < 1e-4))
    checks.append(("q=0.8, m=5 infidelity below 1e-8", oracle_infidelity(0.8, 5) < 1e-8))
    with open(out / "fig3a.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    return {"rows": len(rows), "checks": checks}


def _rounds_csv(path: Path, verdict: SeparabilityVerdict) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["S", "members", "parameters", "cost"])
        for r in verdict.diagnostics.get("rounds", []):
            w.writerow([r["S"], r["members"], r["parameters"], r["cost"]])


def _repro_alg1(out: Path, cfg: RunConfig) -> dict:
    cfg = cfg.model_copy(update={"s_max": cfg.s_max or 16})
    verdict = algorithm1(rho4(0.9), cfg.adaptive())
    _rounds_csv(out / "alg1_rounds.csv", verdict)
    rounds = verdict.diagnostics["rounds"]
    checks = [
        ("detected", verdict.detected),
        ("S <= 16", verdict.detected and verdict.diagnostics["S"] <= 16),
        ("cost below 1e-4", verdict.final_cost < 1e-4),
        ("parameters per round = S(1+2n)", all(r["parameters"] == r["S"] * 9 for r in rounds)),
    ]
    return {"verdict": verdict.to_dict(), "checks": checks}


def _repro_alg2(out: Path, cfg: RunConfig) -> dict:
    cfg = cfg.model_copy(update={"s_max": cfg.s_max or 5})
    verdict = algorithm2(rho3(0.7), cfg.adaptive())
    _rounds_csv(out / "alg2_rounds.csv", verdict)
    purities = []
    with open(out / "alg2_members.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["member", "circuit", "pair", "weight", "purity", "k"])
        for i, m in enumerate(verdict.diagnostics.get("members", []), start=1):
            for pp in m["pair_purities"]:
                purities.append(pp["purity"])
                pair = f"({pp['pair'][0]},{pp['pair'][1]})"
                w.writerow([i, f"V{m['circuit']['index']}", pair, m["weight"], pp["purity"], m["k"]])
    checks = [
        ("detected", verdict.detected),
        ("k = 2", verdict.k == 2),
        ("S <= 5", verdict.detected and verdict.diagnostics["S"] <= 5),
        ("cost below 1e-4", verdict.final_cost < 1e-4),
        ("some member pair purity below 0.99", any(p < 0.99 for p in purities)),
    ]
    return {"verdict": verdict.to_dict(), "checks": checks}


EXPERIMENTS = {"fig3a": _repro_fig3a, "alg1-demo": _repro_alg1, "alg2-demo": _repro_alg2}


def cmd_reproduce(args) -> int:
    try:
        cfg = _load_config(args)
    except InputError as exc:
        return _fail(str(exc))
    out = Path(cfg.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    result = EXPERIMENTS[args.experiment](out, cfg)
    ok = all(passed for _, passed in result["checks"])
    for name, passed in result["checks"]:
        print(f"[{'PASS' if passed else 'FAIL'}] {args.experiment}: {name}")
    report = {
        "experiment": args.experiment,
        "passed": ok,
        "checks": [{"name": n, "passed": bool(p)} for n, p in result["checks"]],
        "config": cfg.model_dump(mode="json", exclude={"out", "trace_csv"}),
        "seed": cfg.seed,
    }
    if "verdict" in result:
        report["verdict"] = result["verdict"]
    write_json(out / f"{args.experiment}_report.json", report)
    return 0 if ok else EXIT_BOUND_VIOLATED


# ------------------------------------------------------------------ parser


def _run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="RunConfig JSON file")
    p.add_argument("--out", type=str)
    p.add_argument("--seed", type=int)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--s-max", dest="s_max", type=int)
    p.add_argument("--m-max", dest="m_max", type=int)
    p.add_argument("--shots", type=int)
    p.add_argument("--trace-csv", dest="trace_csv", type=str)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pqcsep", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pool", help="show the circuit pools for n qubits")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_pool)

    p = sub.add_parser("detect", help="run a separability detection")
    p.add_argument("--mode", choices=MODES, required=True)
    p.add_argument("--state", type=Path, required=True)
    _run_flags(p)
    p.set_defaults(func=cmd_detect)

    state = sub.add_parser("state", help="state file utilities")
    ssub = state.add_subparsers(dest="state_command", required=True)
    p = ssub.add_parser("gen", help="generate a named state")
    p.add_argument("--spec", type=str, help="NamedStateSpec JSON (inline or path)")
    p.add_argument("--family", choices=("GHZ", "BELL_CHAIN", "PRODUCT_RANDOM"))
    p.add_argument("--n", dest="n_qubits", type=int)
    p.add_argument("--pairs", type=int)
    p.add_argument("--q", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--gzip", action="store_true")
    p.set_defaults(func=cmd_state_gen)

    p = sub.add_parser("reproduce", help="rerun a numerical experiment with self-checks")
    p.add_argument("--experiment", choices=tuple(EXPERIMENTS), required=True)
    _run_flags(p)
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "state_command", None) == "gen" and args.spec is None and args.family is None:
        parser.error("state gen needs --spec or --family")
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
