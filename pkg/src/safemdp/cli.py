"""Command-line interface.

Four subcommands: ``validate`` checks a model document, ``eval``
evaluates a fixed policy, ``solve`` runs one of the optimizers, and
``simulate`` compares Monte Carlo estimates against the analytic
values.  Every command prints a JSON report to stdout with sorted keys
and floats rounded to 12 significant digits; everything except the
``timings`` block is a pure function of the inputs and the seed.

Exit codes: 0 success, 2 validation or parameter problems, 3 unreadable
input files, 4 non-transient chain, 5 infeasible constraint, 6
enumeration cap exceeded.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time

import numpy as np

from . import bellman, chain, constrained, evaluate
from .exceptions import (
    CapExceededError,
    DivergenceError,
    InfeasibleError,
    LpUnboundedError,
    ModelFormatError,
    ModelValidationError,
    NotTransientError,
    PolicyError,
    SafeMdpError,
)
from .model import MdpModel, Policy, load_model, load_policy, validate_model
from .simulate import brute_force_constrained, mc_estimates

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_IO = 3
EXIT_NOT_TRANSIENT = 4
EXIT_INFEASIBLE = 5
EXIT_CAP = 6

SOLVE_MODES = ("unconstrained", "safest", "p-safe", "relative", "lp", "dual")


def _round_floats(obj):
    if isinstance(obj, float):
        return float(f"{obj:.12g}")
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    return obj


def _digest(path: str) -> dict:
    with open(path, "rb") as fh:
        data = fh.read()
    return {"path": path, "sha256": hashlib.sha256(data).hexdigest()}


def _read(path: str) -> str:
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def _labeled(model: MdpModel, vec) -> dict:
    return {
        str(model.states[i]): float(v) for i, v in enumerate(np.asarray(vec, float))
    }


def _labeled_matrix(model: MdpModel, mat) -> dict:
    h = np.asarray(mat, float).shape[0]
    return {
        str(model.states[i]): {
            str(model.states[j]): float(mat[i][j]) for j in range(len(mat[i]))
        }
        for i in range(h)
    }


def _policy_doc(model: MdpModel, policy: Policy) -> dict:
    out = {}
    for i in range(model.n_taboo):
        row = policy.matrix[i]
        out[str(model.states[i])] = {
            str(model.actions[u]): float(row[u])
            for u in range(model.n_actions)
            if row[u] != 0.0
        }
    return out


def _emit(report: dict, started: float) -> None:
    report["timings"] = {"total_seconds": time.perf_counter() - started}
    print(json.dumps(_round_floats(report), sort_keys=True, indent=2))


def _error_report(report: dict, started: float, kind: str, message: str, code: int) -> int:
    report["error"] = {"kind": kind, "message": message}
    _emit(report, started)
    return code


def cmd_validate(args, report: dict, started: float) -> int:
    report["inputs"] = {"model": _digest(args.model)}
    try:
        model = load_model(_read(args.model))
    except ModelValidationError as exc:
        report["results"] = {"valid": False, "violations": exc.violations}
        _emit(report, started)
        return EXIT_INVALID
    except ModelFormatError as exc:
        report["results"] = {"valid": False, "violations": [str(exc)]}
        _emit(report, started)
        return EXIT_INVALID
    violations = validate_model(model)
    report["results"] = {
        "valid": not violations,
        "violations": violations,
        "states": len(model.states),
        "taboo": model.n_taboo,
        "forbidden": model.n_forbidden,
        "target": model.n_target,
        "actions": model.n_actions,
    }
    _emit(report, started)
    return EXIT_OK if not violations else EXIT_INVALID


def _load_pair(args) -> tuple[MdpModel, Policy]:
    model = load_model(_read(args.model))
    policy = load_policy(_read(args.policy), model)
    return model, policy


def cmd_eval(args, report: dict, started: float) -> int:
    report["inputs"] = {"model": _digest(args.model), "policy": _digest(args.policy)}
    model, policy = _load_pair(args)
    cq = evaluate.chain_quantities(model, policy)
    v = cq.green @ cq.inputs.stage_cost
    s = cq.green @ cq.inputs.to_forbidden
    t = cq.green @ cq.inputs.to_target
    h = model.n_taboo
    initial = np.zeros(model.n_states)
    initial[:h] = 1.0 / h
    gamma = chain.occupation(model, policy, initial)
    lam = chain.hitting(model, policy, initial)
    residual = chain.evolution_residual(initial, gamma, lam, cq.matrix)
    report["results"] = {
        "value": _labeled(model, v),
        "safety": _labeled(model, s),
        "reach": _labeled(model, t),
        "green": _labeled_matrix(model, cq.green),
        "spectral_radius": float(cq.spectral_radius),
        "evolution_residual": float(residual),
        "residual_initial": "uniform over taboo states",
    }
    if args.csv:
        _emit_eval_csv(model, report["results"])
        return EXIT_OK
    _emit(report, started)
    return EXIT_OK


def _emit_eval_csv(model: MdpModel, results: dict) -> None:
    lines = ["quantity,state,value"]
    for name in ("value", "safety", "reach"):
        for state, x in results[name].items():
            lines.append(f"{name},{state},{x:.12g}")
    lines.append("green,from,to,value")
    for src, row in results["green"].items():
        for dst, x in row.items():
            lines.append(f"green,{src},{dst},{x:.12g}")
    print("\n".join(lines))


def cmd_solve(args, report: dict, started: float) -> int:
    report["inputs"] = {"model": _digest(args.model)}
    model = load_model(_read(args.model))
    mode = args.mode
    results: dict = {"mode": mode}

    if mode in ("p-safe", "lp", "dual") and args.p is None:
        raise ParameterError(f"--mode {mode} requires --p")
    if mode == "relative" and args.q is None and args.p is None:
        raise ParameterError("--mode relative requires --q (or --p to convert)")

    if mode == "unconstrained":
        res = bellman.value_iteration(model, tol=args.tol)
        results.update(
            value=_labeled(model, res.value),
            policy=_policy_doc(model, res.policy),
            iterations=res.iterations,
            residual=res.residual,
        )
    elif mode == "safest":
        s_star, pol = bellman.safest_policy(model)
        results.update(
            min_safety=_labeled(model, s_star), policy=_policy_doc(model, pol)
        )
    elif mode == "p-safe":
        rep = constrained.constrained_vi_pure(model, args.p, tol=args.tol)
        results.update(
            value=_labeled(model, rep.value),
            policy=_policy_doc(model, rep.policy),
            feasible=rep.feasible,
            gap_vs_best_policy=rep.gap,
            info=rep.info,
            p=args.p,
        )
    elif mode == "relative":
        q = args.q if args.q is not None else constrained.p_to_q(args.p)
        rep = constrained.relative_vi(model, q, tol=args.tol)
        results.update(
            value=_labeled(model, rep.value),
            policy=_policy_doc(model, rep.policy),
            q=float(q),
            info=rep.info,
        )
    elif mode == "lp":
        problem = constrained.build_lp(model, args.p)
        solution = constrained.solve_lp(problem)
        level = float(solution.multipliers[0]) if solution.multipliers.size else 0.0
        _, greedy = constrained.dual_inner(model, solution.multipliers, args.p)
        results.update(
            value=_labeled(model, solution.value),
            l=_labeled(model, solution.l),
            multipliers=_labeled(model, solution.multipliers),
            objective=solution.objective,
            simplex_iterations=solution.iterations,
            policy=_policy_doc(model, greedy),
            p=args.p,
        )
        results["multiplier_level"] = level
    elif mode == "dual":
        oracle_total = None
        if args.oracle:
            oracle = brute_force_constrained(model, args.p)
            if oracle.feasible:
                oracle_total = float(oracle.value.sum())
                results["oracle"] = {
                    "value": _labeled(model, oracle.value),
                    "policy": _policy_doc(model, oracle.policy),
                    "admissible_count": oracle.admissible_count,
                }
        rep = constrained.dual_ascent(
            model, args.p, tol=args.tol, oracle_total=oracle_total
        )
        if not rep.feasible:
            results.update(
                feasible=False,
                min_safety=_labeled(model, rep.info["min_safety"]),
                p=args.p,
            )
            report["results"] = results
            report["error"] = {
                "kind": "Infeasible",
                "message": f"no policy keeps safety within {args.p} everywhere",
            }
            _emit(report, started)
            return EXIT_INFEASIBLE
        results.update(
            value=_labeled(model, rep.value),
            policy=_policy_doc(model, rep.policy),
            multipliers=_labeled(model, rep.multipliers),
            feasible=True,
            gap=rep.gap,
            info=rep.info,
            p=args.p,
        )

    report["results"] = results
    _emit(report, started)
    return EXIT_OK


def cmd_simulate(args, report: dict, started: float) -> int:
    report["inputs"] = {"model": _digest(args.model), "policy": _digest(args.policy)}
    if args.n < 1:
        raise ParameterError("--n must be a positive integer")
    model, policy = _load_pair(args)
    start = model.state_index(args.start)
    mc = mc_estimates(
        model, policy, start, args.n, args.seed, max_steps=args.max_steps
    )
    results = {
        "start": str(args.start),
        "n": args.n,
        "seed": args.seed,
        "truncated": mc.truncated,
        "estimates": {
            name: {"mean": est.mean, "std_error": est.std_error, "n": est.n}
            for name, est in (
                ("safety", mc.s_hat),
                ("reach", mc.t_hat),
                ("value", mc.v_hat),
            )
        },
    }
    if start < model.n_taboo:
        cq = evaluate.chain_quantities(model, policy)
        analytic = {
            "safety": float((cq.green @ cq.inputs.to_forbidden)[start]),
            "reach": float((cq.green @ cq.inputs.to_target)[start]),
            "value": float((cq.green @ cq.inputs.stage_cost)[start]),
        }
        results["analytic"] = analytic
        results["deviation_in_se"] = {
            name: (
                abs(results["estimates"][name]["mean"] - analytic[name])
                / results["estimates"][name]["std_error"]
                if results["estimates"][name]["std_error"] > 0
                else 0.0
            )
            for name in analytic
        }
    report["results"] = results
    _emit(report, started)
    return EXIT_OK


class ParameterError(SafeMdpError):
    """A command was invoked with missing or inconsistent parameters."""


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="safemdp",
        description="Safety-constrained dynamic programming on finite MDPs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_val = sub.add_parser("validate", help="check a model document")
    p_val.add_argument("model")

    p_eval = sub.add_parser("eval", help="evaluate a fixed policy")
    p_eval.add_argument("model")
    p_eval.add_argument("policy")
    p_eval.add_argument("--csv", action="store_true", help="emit CSV tables")

    p_solve = sub.add_parser("solve", help="run an optimizer")
    p_solve.add_argument("model")
    p_solve.add_argument("--mode", choices=SOLVE_MODES, required=True)
    p_solve.add_argument("--p", type=float, help="safety level for p-safe/lp/dual")
    p_solve.add_argument("--q", type=float, help="relative level for --mode relative")
    p_solve.add_argument("--tol", type=float, default=1e-10)
    p_solve.add_argument("--seed", type=int, default=0, help="echoed into the report")
    p_solve.add_argument(
        "--oracle",
        action="store_true",
        help="also run the brute-force enumeration oracle (dual mode)",
    )

    p_sim = sub.add_parser("simulate", help="Monte Carlo check of a policy")
    p_sim.add_argument("model")
    p_sim.add_argument("policy")
    p_sim.add_argument("--start", required=True)
    p_sim.add_argument("--n", type=int, default=10_000)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--max-steps", type=int, default=10**5)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    started = time.perf_counter()
    report: dict = {"command": args.command, "arguments": _echo_arguments(args)}
    handler = {
        "validate": cmd_validate,
        "eval": cmd_eval,
        "solve": cmd_solve,
        "simulate": cmd_simulate,
    }[args.command]
    try:
        return handler(args, report, started)
    except OSError as exc:
        return _error_report(report, started, "IO", str(exc), EXIT_IO)
    except ParameterError as exc:
        return _error_report(report, started, "Parameter", str(exc), EXIT_INVALID)
    except (ModelFormatError, ModelValidationError, PolicyError, ValueError) as exc:
        return _error_report(report, started, "Invalid", str(exc), EXIT_INVALID)
    except NotTransientError as exc:
        report.setdefault("results", {})["spectral_radius"] = exc.spectral_radius
        return _error_report(report, started, "NotTransient", str(exc), EXIT_NOT_TRANSIENT)
    except DivergenceError as exc:
        return _error_report(report, started, "Diverging", str(exc), EXIT_NOT_TRANSIENT)
    except (InfeasibleError, LpUnboundedError) as exc:
        return _error_report(report, started, "Infeasible", str(exc), EXIT_INFEASIBLE)
    except CapExceededError as exc:
        return _error_report(report, started, "CapExceeded", str(exc), EXIT_CAP)
    except SafeMdpError as exc:
        return _error_report(report, started, type(exc).__name__, str(exc), 1)


def _echo_arguments(args) -> dict:
    skip = {"command"}
    out = {}
    for key, value in sorted(vars(args).items()):
        if key in skip or value is None:
            continue
        out[key] = value
    return out


if __name__ == "__main__":
    sys.exit(main())
