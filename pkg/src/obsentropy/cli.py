"""Command-line interface: entropy, certify, fuzz, experiment, distance.

Exit codes: 0 success; 1 a mathematical bound failed (and nothing else exits
1, so campaigns are scriptable); 2 bad files, bad flags, bad config, or an
unknown experiment; 3 an iterative solver hit its cap before certifying its
tolerance.  Numbers print in nats with 12 significant digits; --log-base 2
rescales entropic quantities at the presentation layer only.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import bounds, entropy, experiments, fuzz, measurement_distance, povm_algebra, qmat
from .bounds import ConvexStateSet
from .fuzz import CampaignConfig
from .qmat import ConvergenceError

LN2 = math.log(2.0)

# report fields measured in nats (epsilon is a trace distance, dim a count)
_ENTROPIC_REPORT_KEYS = ("quantity_lhs", "bound_rhs", "slack", "kappa")


def _round12(obj):
    """Recursively round floats to 12 significant digits for printing."""
    if isinstance(obj, float):
        return float(f"{obj:.12g}") if math.isfinite(obj) else obj
    if isinstance(obj, dict):
        return {k: _round12(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round12(v) for v in obj]
    return obj


def _emit(obj) -> None:
    print(json.dumps(_round12(obj), indent=2))


def _cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


def _write_csv(path: str, columns, rows) -> None:
    with open(path, "w") as f:
        f.write(",".join(columns) + "\n")
        for row in rows:
            f.write(",".join(_cell(v) for v in row) + "\n")


def _parse_ints(text: str, flag: str):
    try:
        return [int(x) for x in text.split(",") if x.strip() != ""]
    except ValueError:
        raise ValueError(f"{flag} expects a comma-separated integer list, got {text!r}")


def _parse_floats(text: str, flag: str):
    try:
        return [float(x) for x in text.split(",") if x.strip() != ""]
    except ValueError:
        raise ValueError(f"{flag} expects a comma-separated number list, got {text!r}")


def _env_seed():
    raw = os.environ.get("OENTROPY_SEED")
    if raw is None:
        return None
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"OENTROPY_SEED must be an integer, got {raw!r}")


def _resolve_seed(flag_seed, default=None):
    if flag_seed is not None:
        return flag_seed
    env = _env_seed()
    if env is not None:
        return env
    return default


def _load_chi(path: str) -> ConvexStateSet:
    with open(path) as f:
        return ConvexStateSet.from_json(json.load(f))


# ---------------------------------------------------------------------------
# entropy

def _cmd_entropy(args) -> int:
    rho = qmat.load_state(args.state)
    m = qmat.load_povm(args.povm)
    breakdown = entropy.observational_entropy(m, rho).to_json()
    if args.log_base == "2":
        for key in ("total", "shannon_term", "boltzmann_term"):
            breakdown[key] = breakdown[key] / LN2
    _emit(breakdown)
    return 0


# ---------------------------------------------------------------------------
# certify

def _require(args, names):
    for name in names:
        if getattr(args, name.replace("-", "_")) is None:
            raise ValueError(f"--kind {args.kind} requires --{name}")


def _build_report(args):
    kind = args.kind
    if kind in ("afw", "naive"):
        _require(args, ("povm", "state", "sigma"))
        m = qmat.load_povm(args.povm)
        rho, sigma = qmat.load_state(args.state), qmat.load_state(args.sigma)
        if kind == "afw":
            return bounds.certify_oe_continuity(m, rho, sigma)
        return bounds.certify_naive_continuity(m, rho, sigma)
    if kind == "concavity":
        _require(args, ("povm", "states", "weights"))
        m = qmat.load_povm(args.povm)
        states = [qmat.load_state(p) for p in args.states]
        lam = _parse_floats(args.weights, "--weights")
        return bounds.concavity_gap(m, states, lam)
    if kind == "conditional":
        _require(args, ("povm", "state", "sigma", "dims"))
        d_ab = _parse_ints(args.dims, "--dims")
        if len(d_ab) != 2:
            raise ValueError("--kind conditional requires --dims a,b (two factors)")
        m_a = qmat.load_povm(args.povm)
        rho, sigma = qmat.load_state(args.state), qmat.load_state(args.sigma)
        return bounds.certify_conditional_continuity(m_a, rho, sigma, d_ab[0], d_ab[1])
    if kind == "set_distance":
        _require(args, ("povm", "state", "sigma", "chi"))
        m = qmat.load_povm(args.povm)
        chi = _load_chi(args.chi)
        rho, sigma = qmat.load_state(args.state), qmat.load_state(args.sigma)
        kappa = args.kappa if args.kappa is not None else math.log(m.dim)
        return bounds.certify_set_distance_continuity(m, chi, rho, sigma, kappa=kappa)
    if kind == "restricted":
        _require(args, ("povms", "state", "sigma", "chi"))
        ms = [qmat.load_povm(p) for p in args.povms]
        chi = _load_chi(args.chi)
        rho, sigma = qmat.load_state(args.state), qmat.load_state(args.sigma)
        kappa = args.kappa if args.kappa is not None else math.log(ms[0].dim)
        return bounds.certify_restricted_continuity(rho, sigma, chi, ms, kappa=kappa)
    raise ValueError(f"unknown bound kind {kind!r}")


def _cmd_certify(args) -> int:
    report = _build_report(args)
    payload = report.to_json()
    if args.log_base == "2":
        for key in _ENTROPIC_REPORT_KEYS:
            if isinstance(payload[key], float):
                payload[key] = payload[key] / LN2
    _emit(payload)
    if report.status != "ok":
        print("error: bound precondition failed; report is not a certificate",
              file=sys.stderr)
        return 2
    return 0 if report.passes(args.tolerance) else 1


# ---------------------------------------------------------------------------
# fuzz

_CONFIG_FIELDS = ("seed", "trials", "dims", "outcome_counts", "bound_kinds",
                  "tolerance", "output_path")


def _cmd_fuzz(args) -> int:
    raw = {}
    if args.config is not None:
        import tomli
        with open(args.config, "rb") as f:
            raw = tomli.load(f)
        unknown = set(raw) - set(_CONFIG_FIELDS)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
    seed = _resolve_seed(args.seed, raw.get("seed"))
    if seed is None:
        raise ValueError("no seed given: pass --seed, set seed in the config, "
                         "or export OENTROPY_SEED")
    if args.trials is not None:
        raw["trials"] = args.trials
    if args.dims is not None:
        raw["dims"] = _parse_ints(args.dims, "--dims")
    if args.outcome_counts is not None:
        raw["outcome_counts"] = _parse_ints(args.outcome_counts, "--outcome-counts")
    if args.kinds is not None:
        raw["bound_kinds"] = [k.strip() for k in args.kinds.split(",") if k.strip()]
    if args.tolerance is not None:
        raw["tolerance"] = args.tolerance
    if args.output is not None:
        raw["output_path"] = args.output
    raw["seed"] = seed
    raw.setdefault("trials", 100)
    config = CampaignConfig(**raw)

    witness_path = args.witness
    if witness_path is None:
        base, _ = os.path.splitext(config.output_path)
        witness_path = base + "_witness.json"
    result = fuzz.run_campaign(config, jobs=args.jobs, witness_path=witness_path)
    _emit({"rows": result.rows, "violations": result.violations,
           "csv": result.csv_path, "witness": result.witness_path})
    return 0 if result.violations == 0 else 1


# ---------------------------------------------------------------------------
# experiment

def _out(args, filename: str) -> str:
    os.makedirs(args.out_dir, exist_ok=True)
    return os.path.join(args.out_dir, filename)


def _exp_example1(args) -> int:
    dims = _parse_ints(args.dims, "--dims")
    lambdas = np.linspace(0.0, 0.5, args.lambda_steps)
    rows = experiments.example1_sweep(dims, lambdas)
    path = _out(args, "example1.csv")
    _write_csv(path, experiments.SWEEP_COLUMNS,
               [(r.d, r.lam, r.s_lambda, r.p0, r.p1, r.v0, r.v1,
                 r.afw_rhs, r.naive_rhs, r.ratio_to_logd) for r in rows])
    _emit({"rows": len(rows), "csv": path})
    return 0


def _exp_nogo(args) -> int:
    dims = []
    d = 2
    while d < args.max_d:
        dims.append(d)
        d *= 2
    dims.append(args.max_d)
    scan = experiments.no_go_scan(args.lam, dims, threshold=args.threshold)
    path = _out(args, "nogo.csv")
    _write_csv(path, ("d", "ratio"), scan.rows)
    _emit({"lambda": scan.lam, "threshold": scan.threshold,
           "monotone": scan.monotone, "first_dim_over": scan.first_dim_over,
           "delta": scan.delta, "max_ratio": max(r[1] for r in scan.rows),
           "csv": path})
    return 0


def _exp_pathology(args) -> int:
    seed = _resolve_seed(args.seed, 0)
    d = args.dim
    basis = np.eye(d, dtype=complex)
    m = qmat.Povm(np.stack([np.outer(basis[i], basis[i].conj()) for i in range(d)]))
    rho = qmat.random_density(d, d, qmat.trial_rng(seed, 0))
    sigma = qmat.random_density(d, d, qmat.trial_rng(seed, 1))
    rows = experiments.refinement_pathology(m, rho, sigma, args.iterations)
    path = _out(args, "pathology.csv")
    _write_csv(path, experiments.PATHOLOGY_COLUMNS,
               [(r.iteration, r.outcomes, r.entropy_diff, r.naive_rhs,
                 r.afw_rhs, r.all_volumes_le_1) for r in rows])
    diffs = [r.entropy_diff for r in rows]
    small = [r for r in rows if r.all_volumes_le_1]
    _emit({"iterations": args.iterations, "seed": seed,
           "entropy_diff_spread": max(diffs) - min(diffs),
           "naive_strictly_grows_once_volumes_le_1": all(
               b.naive_rhs > a.naive_rhs for a, b in zip(small, small[1:])),
           "csv": path})
    return 0


def _exp_channel_probe(args) -> int:
    seed = _resolve_seed(args.seed, 0)
    d = args.dim
    rho = qmat.random_density(d, d, qmat.trial_rng(seed, 0))
    sigma = qmat.random_density(d, d, qmat.trial_rng(seed, 1))
    m = qmat.random_povm(d, args.outcomes, qmat.trial_rng(seed, 2))
    grid = np.linspace(0.05, 0.95, args.s_steps)
    probe = experiments.channel_continuity_probe(rho, sigma, m, grid)
    path = _out(args, "channel_probe.csv")
    _write_csv(path, experiments.CHANNEL_PROBE_COLUMNS,
               [(r.s, r.f_s, r.diff, r.never_increases, r.fraction_bound)
                for r in probe.rows])
    summary = {k: v for k, v in probe.to_json().items() if k != "rows"}
    summary.update({"seed": seed, "csv": path})
    _emit(summary)
    return 0


def _exp_gamma_probe(args) -> int:
    seed = _resolve_seed(args.seed, 0)
    d = args.dim
    lambdas = _parse_floats(args.lambdas, "--lambdas")
    rho = qmat.random_density(d, d, qmat.trial_rng(seed, 0))
    sigma = qmat.random_density(d, d, qmat.trial_rng(seed, 1))
    pairs = []
    for lam in lambdas:
        _, m, _, m_lam = experiments.mixing_family(d, lam)
        pairs.append((m_lam, m))
    rows = experiments.gamma_continuity_probe(rho, sigma, pairs, tol=args.tol)
    path = _out(args, "gamma_probe.csv")
    _write_csv(path, experiments.GAMMA_PROBE_COLUMNS,
               [(r.gamma, r.d_m, r.d_n, r.diff) for r in rows])
    _emit({"pairs": len(rows), "seed": seed,
           "max_gamma": max(r.gamma for r in rows),
           "max_diff": max(r.diff for r in rows), "csv": path})
    return 0


def _exp_minimax(args) -> int:
    gaps = {}
    for name, rho, chi, ms in experiments.minimax_instances():
        gaps[name] = experiments.minimax_spot_check(
            rho, chi, ms, gap_bound=args.gap_bound, resolution=args.resolution)
    payload = {"gaps": gaps, "max_gap": max(gaps.values()),
               "gap_bound": args.gap_bound, "resolution": args.resolution}
    qmat.save_json(_round12(payload), _out(args, "minimax.json"))
    _emit(payload)
    return 0


# ---------------------------------------------------------------------------
# distance

def _cmd_distance(args) -> int:
    m = qmat.load_povm(args.povm_a)
    n = qmat.load_povm(args.povm_b)
    out = {}
    diag_file = None
    callback = None
    try:
        if args.diagnostics is not None:
            diag_file = open(args.diagnostics, "w")
            diag_file.write("iteration,primal,dual,gap\n")

            def callback(it, primal, dual, gap):
                diag_file.write(f"{it},{primal:.12g},{dual:.12g},{gap:.12g}\n")

        if args.metric in ("diamond", "both"):
            sol = measurement_distance.diamond_distance(
                m, n, tol=args.tol if args.tol is not None else 1e-6,
                diagnostics=callback)
            out["diamond"] = {"value": sol.value, "gap": sol.gap,
                              "iterations": sol.iterations}
        if args.metric in ("gamma", "both"):
            tol = args.tol if args.tol is not None else 1e-4
            fwd = measurement_distance.one_way_sim_distance(m, n, tol=tol)
            bwd = measurement_distance.one_way_sim_distance(n, m, tol=tol)
            out["gamma"] = {"value": (fwd.value + bwd.value) / 2.0,
                            "forward": fwd.value, "backward": bwd.value}
    finally:
        if diag_file is not None:
            diag_file.close()
    _emit(out)
    return 0


# ---------------------------------------------------------------------------
# parser and dispatch

def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="obsentropy",
        description="Observational entropy, continuity certificates, and "
                    "measurement distances.")
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("entropy", help="observational entropy of a state under a POVM")
    q.add_argument("--state", required=True, help="density matrix JSON file")
    q.add_argument("--povm", required=True, help="POVM JSON file")
    q.add_argument("--log-base", choices=("e", "2"), default="e")
    q.set_defaults(func=_cmd_entropy)

    c = sub.add_parser("certify", help="run one continuity/concavity certificate")
    c.add_argument("--kind", required=True, choices=fuzz.KNOWN_KINDS)
    c.add_argument("--povm", help="POVM JSON file")
    c.add_argument("--povms", nargs="+", help="POVM JSON files (restricted kind)")
    c.add_argument("--state", help="density matrix JSON file")
    c.add_argument("--sigma", help="second density matrix JSON file")
    c.add_argument("--states", nargs="+", help="mixture component files (concavity kind)")
    c.add_argument("--weights", help="comma-separated mixture weights (concavity kind)")
    c.add_argument("--dims", help="a,b tensor factors (conditional kind)")
    c.add_argument("--chi", help="reference-set JSON file (set_distance/restricted)")
    c.add_argument("--kappa", type=float, help="override the bound's kappa")
    c.add_argument("--tolerance", type=float, default=1e-9)
    c.add_argument("--log-base", choices=("e", "2"), default="e")
    c.set_defaults(func=_cmd_certify)

    f = sub.add_parser("fuzz", help="randomized certificate campaign")
    f.add_argument("--config", help="TOML file mirroring the campaign config fields")
    f.add_argument("--seed", type=int, help="base seed (fallback: config, then OENTROPY_SEED)")
    f.add_argument("--trials", type=int, help="trials per bound kind")
    f.add_argument("--dims", help="comma-separated dimensions, each in [2, 16]")
    f.add_argument("--outcome-counts", dest="outcome_counts",
                   help="comma-separated outcome counts")
    f.add_argument("--kinds", help="comma-separated bound kinds")
    f.add_argument("--tolerance", type=float)
    f.add_argument("--output", help="CSV output path")
    f.add_argument("--witness", help="witness JSON path (default: <output>_witness.json)")
    f.add_argument("--jobs", type=int, default=1, help="parallel workers")
    f.set_defaults(func=_cmd_fuzz)

    e = sub.add_parser("experiment", help="scripted demonstrations, tables to --out-dir")
    esub = e.add_subparsers(dest="name", required=True)

    x1 = esub.add_parser("example1", help="two-outcome mixing family sweep")
    x1.add_argument("--dims", default="2,3,4,6")
    x1.add_argument("--lambda-steps", dest="lambda_steps", type=int, default=21)
    x1.add_argument("--out-dir", default=".")
    x1.set_defaults(func=_exp_example1)

    ng = esub.add_parser("nogo", help="entropy/log d ratio scan at fixed lambda")
    ng.add_argument("--lambda", dest="lam", type=float, default=0.05)
    ng.add_argument("--max-d", dest="max_d", type=int, default=1_000_000)
    ng.add_argument("--threshold", type=float, default=0.9)
    ng.add_argument("--out-dir", default=".")
    ng.set_defaults(func=_exp_nogo)

    pa = esub.add_parser("pathology", help="refinement leaves entropies fixed, coarse bound grows")
    pa.add_argument("--dim", type=int, default=4)
    pa.add_argument("--iterations", type=int, default=10)
    pa.add_argument("--seed", type=int)
    pa.add_argument("--out-dir", default=".")
    pa.set_defaults(func=_exp_pathology)

    cp = esub.add_parser("channel-probe", help="measured relative entropy under channel noise")
    cp.add_argument("--dim", type=int, default=3)
    cp.add_argument("--outcomes", type=int, default=3)
    cp.add_argument("--s-steps", dest="s_steps", type=int, default=19)
    cp.add_argument("--seed", type=int)
    cp.add_argument("--out-dir", default=".")
    cp.set_defaults(func=_exp_channel_probe)

    gp = esub.add_parser("gamma-probe", help="relative-entropy gap vs simulation distance")
    gp.add_argument("--dim", type=int, default=2)
    gp.add_argument("--lambdas", default="0.1,0.2,0.3,0.4,0.5")
    gp.add_argument("--tol", type=float, default=1e-4)
    gp.add_argument("--seed", type=int)
    gp.add_argument("--out-dir", default=".")
    gp.set_defaults(func=_exp_gamma_probe)

    mm = esub.add_parser("minimax", help="sup-inf vs inf-sup gap on fixed small instances")
    mm.add_argument("--resolution", type=float, default=1e-2)
    mm.add_argument("--gap-bound", dest="gap_bound", type=float, default=5e-3)
    mm.add_argument("--out-dir", default=".")
    mm.set_defaults(func=_exp_minimax)

    d = sub.add_parser("distance", help="diamond / simulation distance between POVMs")
    d.add_argument("--povm-a", required=True)
    d.add_argument("--povm-b", required=True)
    d.add_argument("--metric", choices=("diamond", "gamma", "both"), default="diamond")
    d.add_argument("--tol", type=float, help="certified tolerance (default 1e-6 diamond, 1e-4 gamma)")
    d.add_argument("--diagnostics", help="stream solver (iteration, primal, dual, gap) CSV here")
    d.set_defaults(func=_cmd_distance)
    return p


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code if isinstance(exc.code, int) else 2
        return 0 if code == 0 else 2
    try:
        return args.func(args)
    except ConvergenceError as exc:
        print(f"error: solver did not converge: {exc}", file=sys.stderr)
        return 3
    except ArithmeticError as exc:
        print(f"error: bound violated: {exc}", file=sys.stderr)
        return 1
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
