"""Experiment driver: JSON configs in, CSV artifacts out.

Subcommands: simulate | gaps | hitting | difflimit | estimators | nonrev |
check-balancing | accept.  Every run is seeded explicitly (config ``seed``
or ``--seed``); wall-clock seeding requires ``--nondeterministic``.  With a
fixed config and seed the CSV artifacts are byte-identical across runs,
except for the ``runtime_s`` column of ``difflimit``, which reports real
elapsed time by design.

Exit status: 0 on success, 1 when a certification or acceptance criterion
fails, 2 on invalid configuration or usage.
"""

from __future__ import annotations

import argparse
import importlib.resources
import json
import os
import secrets
import sys
import tempfile

import numpy as np

from . import acceptance, balancing, diffusion, estimators, hitting, nonrev, spectral
from .errors import ConfigInvalid, LbjumpError
from .models import (
    RatioOracle,
    kernel_from_descriptor,
    target_from_descriptor,
)
from .simulate import run_replicas, trajectories_to_csv

__all__ = ["main"]


def _fmt(value) -> str:
    """Lossless, diff-stable cell formatting: 17 significant digits."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def _write_csv(path, header, rows) -> None:
    """Atomic CSV write: UTF-8, LF endings, rendered through :func:`_fmt`."""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(_fmt(v) for v in row) + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigInvalid(f"cannot read config {path}: {exc}") from exc


def _bundled(name: str) -> dict:
    with importlib.resources.files("lbjump.configs").joinpath(name).open() as fh:
        return json.load(fh)


def _check_keys(cfg: dict, required: set, optional: set, where: str) -> None:
    missing = required - cfg.keys()
    unknown = cfg.keys() - required - optional
    if missing:
        raise ConfigInvalid(f"{where}: missing fields {sorted(missing)}")
    if unknown:
        raise ConfigInvalid(f"{where}: unknown fields {sorted(unknown)}")


def _resolve_seed(cfg: dict, args) -> int:
    if args.seed is not None:
        return int(args.seed)
    if "seed" in cfg and cfg["seed"] is not None:
        return int(cfg["seed"])
    if args.nondeterministic:
        return secrets.randbits(63)
    raise ConfigInvalid(
        "no seed given: set 'seed' in the config, pass --seed, or opt in with --nondeterministic"
    )


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, int(args.threads))
    env = os.environ.get("LBJUMP_THREADS")
    return max(1, int(env)) if env else 1


_FUNCTIONS = {
    "identity": lambda s: float(s),
    "indicator0": lambda s: 1.0 if s == 0 else 0.0,
    "square": lambda s: float(s) ** 2,
    "min3": lambda s: float(min(s, 3)),
    "parity": lambda s: -1.0 if s % 2 else 1.0,
}


def _named_function(name: str):
    try:
        return _FUNCTIONS[name]
    except KeyError:
        raise ConfigInvalid(f"unknown test function {name!r}; choose from {sorted(_FUNCTIONS)}")


def _g(name) -> balancing.BalancingSpec:
    try:
        return balancing.get(name)
    except KeyError as exc:
        raise ConfigInvalid(str(exc)) from exc


# ---------------------------------------------------------------------------
# subcommands


def _cmd_simulate(cfg, args, out_dir) -> int:
    _check_keys(cfg, {"model", "g", "x0", "horizon", "n_replicas"},
                {"seed", "method", "max_events"}, "simulate")
    seed = _resolve_seed(cfg, args)
    oracle = RatioOracle(
        target_from_descriptor(cfg["model"]["target"]),
        kernel_from_descriptor(cfg["model"]["kernel"]),
    )
    trajs = run_replicas(
        cfg["x0"], oracle, _g(cfg["g"]), float(cfg["horizon"]),
        int(cfg["n_replicas"]), seed,
        method=cfg.get("method", "exact"),
        max_events=int(cfg.get("max_events", 10_000_000)),
        threads=_threads(args),
    )
    path = os.path.join(out_dir, "simulate.csv")
    trajectories_to_csv(trajs, path)
    print(f"wrote {path} ({sum(t.event_count for t in trajs)} events)")
    return 0


def _cmd_gaps(cfg, args, out_dir) -> int:
    _check_keys(cfg, {"gs"}, {"seed", "instances", "model"}, "gaps")
    if ("instances" in cfg) == ("model" in cfg):
        raise ConfigInvalid("gaps: give exactly one of 'instances' or 'model'")
    gs = [_g(n) for n in cfg["gs"]]
    g_min = balancing.get("min")
    if "model" in cfg:
        pairs = [(
            target_from_descriptor(cfg["model"]["target"]),
            kernel_from_descriptor(cfg["model"]["kernel"]),
        )]
    else:
        _check_keys(cfg["instances"], {"count", "m_min", "m_max"}, set(), "gaps.instances")
        seed = _resolve_seed(cfg, args)
        rng = np.random.default_rng(seed)
        pairs = []
        for _ in range(int(cfg["instances"]["count"])):
            m = int(rng.integers(int(cfg["instances"]["m_min"]),
                                 int(cfg["instances"]["m_max"]) + 1))
            pairs.append(spectral.random_reversible_instance(m, rng))
    rows = []
    all_ok = True
    for i, (target, kernel) in enumerate(pairs):
        for g in gs:
            gap_L = spectral.spectral_gap(spectral.build_generator(target, kernel, g)).gap
            if g.sup_bound is not None and not g.sup_is_empirical:
                cert = spectral.gap_sandwich_check(target, kernel, g)
                gap_P, lam_bar, sand = cert.values["gap_P"], cert.values["lambda_bar"], cert.ok
                all_ok &= cert.ok
            else:
                gap_P = lam_bar = sand = None
            comp = (
                spectral.comparison_check(target, kernel, g, g_min, 1.0).ok
                if g.is_nondecreasing
                else None
            )
            if comp is not None:
                all_ok &= comp
            rows.append((i, g.name, gap_L, gap_P, lam_bar, sand, comp))
    path = os.path.join(out_dir, "gaps.csv")
    _write_csv(path, ["instance_id", "g_name", "gap_L", "gap_P", "lambda_bar",
                      "sandwich_ok", "comparison_ok"], rows)
    print(f"wrote {path}")
    return 0 if all_ok else 1


def _cmd_hitting(cfg, args, out_dir) -> int:
    _check_keys(cfg, {"target", "g", "k", "Ns", "n_replicas"}, {"seed", "n_max"}, "hitting")
    seed = _resolve_seed(cfg, args)
    model = hitting.BirthDeathModel(target_from_descriptor(cfg["target"]), _g(cfg["g"]))
    k = int(cfg["k"])
    rows = []
    for j, N in enumerate(cfg["Ns"]):
        N = int(N)
        est = hitting.expected_hitting(model, N=N, k=k,
                                       n_max=int(cfg["n_max"]) if "n_max" in cfg else None)
        samp = hitting.simulate_hitting(model, N=N, k=k,
                                        n_replicas=int(cfg["n_replicas"]),
                                        master_seed=seed + j)
        sum_a = sum(model.a(n + 1) for n in range(k, N))
        rows.append((N, k, est.lower, est.upper, samp.mean, samp.se, sum_a))
    path = os.path.join(out_dir, "hitting.csv")
    _write_csv(path, ["N", "k", "lower", "upper", "sim_mean", "sim_se", "sum_a_partial"], rows)
    print(f"wrote {path}")
    return 0


def _cmd_difflimit(cfg, args, out_dir) -> int:
    _check_keys(cfg, {"target", "g", "sigmas", "horizon", "n_samples"}, {"seed"}, "difflimit")
    seed = _resolve_seed(cfg, args)
    target = target_from_descriptor(cfg["target"])
    exp = diffusion.DiffusionExperiment(
        target=target, g=_g(cfg["g"]), sigmas=tuple(cfg["sigmas"]),
        horizon=float(cfg["horizon"]), n_samples=int(cfg["n_samples"]),
        x0=np.zeros(target.dim),
    )
    table = diffusion.convergence_experiment(exp, master_seed=seed)
    rows = [
        (r.sigma, r.n_samples, r.ks_vs_langevin, r.ks_vs_stationary, r.runtime_s)
        for r in table.rows
    ]
    path = os.path.join(out_dir, "difflimit.csv")
    _write_csv(path, ["sigma", "n_samples", "ks_vs_langevin", "ks_vs_stationary",
                      "runtime_s"], rows)
    print(f"wrote {path} (strictly decreasing: {table.strictly_decreasing})")
    return 0


def _cmd_estimators(cfg, args, out_dir) -> int:
    _check_keys(cfg, {"model", "g", "f", "n_steps", "n_seeds"}, {"seed"}, "estimators")
    seed = _resolve_seed(cfg, args)
    oracle = RatioOracle(
        target_from_descriptor(cfg["model"]["target"]),
        kernel_from_descriptor(cfg["model"]["kernel"]),
    )
    faceoff = estimators.variance_faceoff(
        oracle, _g(cfg["g"]), _named_function(cfg["f"]),
        n_steps=int(cfg["n_steps"]), n_seeds=int(cfg["n_seeds"]), master_seed=seed,
    )
    rows = []
    for kind in ("MC", "IS", "MH"):
        for s, est in enumerate(faceoff.estimates[kind]):
            rows.append((s, kind, est, None, faceoff.variances[kind]))
    path = os.path.join(out_dir, "estimators.csv")
    _write_csv(path, ["seed", "estimator", "estimate", "se", "var_across_seeds"], rows)
    print(f"wrote {path} (p-value IS<=MC: {faceoff.p_value_is_beats_mc:.4f})")
    return 0


def _cmd_nonrev(cfg, args, out_dir) -> int:
    _check_keys(cfg, {"n_instances", "gs"}, {"seed", "times", "m_probe"}, "nonrev")
    seed = _resolve_seed(cfg, args)
    rng = np.random.default_rng(seed)
    gs = [_g(n) for n in cfg["gs"]]
    rows = []
    all_ok = True
    for i in range(int(cfg["n_instances"])):
        chain = nonrev.random_lifted_instance(rng)
        for g in gs:
            kern = nonrev.build_skew_kernel(chain, g)
            cert = nonrev.certify_skew_balance(kern, g)
            sa = nonrev.certify_self_adjointness(kern, rng)
            ok = cert.ok and sa.ok
            all_ok &= ok
            rows.append((i, g.name, cert.values["skew_residual"],
                         cert.values["invariance_residual"],
                         sa.values["max_residual"], ok))
    cert_path = os.path.join(out_dir, "nonrev_cert.csv")
    _write_csv(cert_path, ["instance_id", "g_name", "skew_residual",
                           "invariance_residual", "selfadj_residual", "ok"], rows)

    m_probe = int(cfg.get("m_probe", 20))
    times = cfg.get("times", [0.25, 0.5, 1.0, 2.0, 4.0])
    probe_chain = nonrev.directed_cycle_lift(np.full(m_probe, 1.0 / m_probe))
    tv_rows = nonrev.nonrev_mixing_probe(probe_chain, _g(cfg["gs"][0]), times)
    tv_path = os.path.join(out_dir, "nonrev_tv.csv")
    _write_csv(tv_path, ["t", "tv_nonrev", "tv_rev"], tv_rows)
    print(f"wrote {cert_path} and {tv_path}")
    return 0 if all_ok else 1


def _cmd_check_balancing(cfg, args, out_dir) -> int:
    _check_keys(cfg, {"gs"}, {"grid", "seed"}, "check-balancing")
    grid_cfg = cfg.get("grid", {})
    _check_keys(grid_cfg, set(), {"n", "lo", "hi"}, "check-balancing.grid")
    grid = balancing.standard_grid(
        n=int(grid_cfg.get("n", 200)),
        lo=float(grid_cfg.get("lo", 1e-6)),
        hi=float(grid_cfg.get("hi", 1e6)),
    )
    specs = (
        balancing.builtin_catalog()
        if cfg["gs"] == "catalog"
        else [_g(n) for n in cfg["gs"]]
    )
    rows = []
    all_ok = True
    for g in specs:
        identity = balancing.check_balancing(g, grid)
        bounds = balancing.check_bounds(g, grid)
        worst = 0.0
        for t in grid:
            gt = g(t)
            worst = max(worst, abs(gt - t * g(1.0 / t)) / max(1.0, gt))
        ok = identity.ok and bounds.ok
        all_ok &= ok
        rows.append((g.name, grid.size, worst, bounds.ok, ok))
    path = os.path.join(out_dir, "check_balancing.csv")
    _write_csv(path, ["g_name", "n_grid", "max_identity_residual", "bounds_ok", "pass"], rows)
    print(f"wrote {path}")
    return 0 if all_ok else 1


def _cmd_accept(cfg, args, out_dir) -> int:
    results = acceptance.run_all(cfg if cfg else None)
    summary = {
        "passed": all(r.passed for r in results),
        "criteria": [
            {"number": r.number, "name": r.name, "passed": r.passed,
             "runtime_s": round(r.runtime_s, 3)}
            for r in results
        ],
    }
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "accept_summary.json")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    print(f"wrote {path}")
    return 0 if summary["passed"] else 1


_COMMANDS = {
    "simulate": (_cmd_simulate, "simulate_default.json"),
    "gaps": (_cmd_gaps, "gaps_default.json"),
    "hitting": (_cmd_hitting, "hitting_default.json"),
    "difflimit": (_cmd_difflimit, "difflimit_default.json"),
    "estimators": (_cmd_estimators, "estimators_default.json"),
    "nonrev": (_cmd_nonrev, "nonrev_default.json"),
    "check-balancing": (_cmd_check_balancing, "check_balancing_default.json"),
    "accept": (_cmd_accept, None),
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="lbjump",
        description="Locally-balanced jump process experiments",
    )
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", help="JSON experiment config (bundled default otherwise)")
    parser.add_argument("--seed", type=int, help="master seed, overrides the config")
    parser.add_argument("--out", default="lbjump_out", help="output directory")
    parser.add_argument("--threads", type=int,
                        help="worker threads for replicated runs (or LBJUMP_THREADS)")
    parser.add_argument("--nondeterministic", action="store_true",
                        help="allow wall-clock seeding when no seed is given")
    args = parser.parse_args(argv)

    fn, default_cfg = _COMMANDS[args.command]
    try:
        if args.config is not None:
            cfg = _load_json(args.config)
        elif default_cfg is not None:
            cfg = _bundled(default_cfg)
        else:
            cfg = None
        return fn(cfg, args, args.out)
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except LbjumpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
