"""Command-line front end.

Subcommands: simulate, fit, predict, diagnose, check-maxid, sim-study,
benchmark. Configuration is one JSON document; any key can be overridden
with MAXIDSPATIAL_CFG__<SECTION>__<KEY> environment variables (values
parsed as JSON). Exit codes: 0 success, 1 usage, 2 data/schema problem,
3 numerical failure (fit leaves a state dump for resuming).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .basis import (
    ExpCovParams,
    GaussianDensityBasisSpec,
    eval_gaussian_basis,
    sample_log_gp_basis,
)
from .dependence import empirical_chi, extremal_coefficient
from .distributions import GevParams, HougaardParams
from .errors import ConfigError, DomainError, NumericalError
from .io import (
    file_sha256,
    read_chain,
    read_dataset_csv,
    write_chain,
    write_dataset_csv,
    write_manifest,
    write_rows_csv,
)
from .kernels import BACKEND
from .maxid_check import rectangle_experiment, reference_table
from .mcmc import McmcConfig, ModelSpec, Priors, Sampler, model_from_state
from .predict import log_score, predict_at, rank_factors, return_level
from .process import Dataset, MaxIdModel, simulate_field
from .simstudy import StudyScale, run_design

ENV_PREFIX = "MAXIDSPATIAL_CFG__"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

_DEFAULT_CONFIG = {
    "model": {
        "basis_family": "log-gp",
        "n_basis": 15,
        "tilt": "free",
        "margins": "gp",
        "knots": None,
    },
    "priors": {
        "theta_sd": 10.0,
        "coef_var": 100.0,
        "scale_var": 100.0,
        "range_var": None,
        "tau_var": None,
    },
    "mcmc": {
        "n_iter": 4000,
        "burn_in": 1000,
        "thin": 5,
        "n_clusters": 20,
        "seed": 0,
        "target_accept_scalar": 0.41,
        "target_accept_block": 0.23,
        "adapt": True,
        "n_chains": 1,
        "basis_joint_accept": False,
    },
    "simulate": {
        "alpha": 0.25,
        "theta": 0.1,
        "n_sites": 30,
        "n_years": 20,
        "sites": "random",
        "basis_variance": 25.0,
        "basis_range": 0.75,
        "bandwidth": None,
        "mu": 0.0,
        "sigma": 1.0,
        "xi": 0.0,
        "missing_rate": 0.0,
    },
}


def load_config(path: str | None) -> dict:
    cfg = json.loads(json.dumps(_DEFAULT_CONFIG))
    if path is not None:
        if not os.path.exists(path):
            raise ConfigError(f"config file not found: {path}")
        with open(path, encoding="utf-8") as fh:
            try:
                user = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        for section, vals in user.items():
            if section not in cfg:
                raise ConfigError(f"{path}: unknown config section {section!r}")
            if not isinstance(vals, dict):
                raise ConfigError(f"{path}: section {section!r} must be an object")
            for key, val in vals.items():
                if key not in cfg[section]:
                    raise ConfigError(f"{path}: unknown key {section}.{key}")
                cfg[section][key] = val
    for name, val in os.environ.items():
        if not name.startswith(ENV_PREFIX):
            continue
        parts = name[len(ENV_PREFIX):].lower().split("__")
        if len(parts) != 2 or parts[0] not in cfg or parts[1] not in cfg[parts[0]]:
            raise ConfigError(f"unrecognized config override {name}")
        try:
            cfg[parts[0]][parts[1]] = json.loads(val)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{name}: value must be JSON ({exc})") from exc
    return cfg


def _model_spec(cfg: dict) -> ModelSpec:
    m = cfg["model"]
    knots = m.get("knots")
    return ModelSpec(
        basis_family=m["basis_family"],
        n_basis=int(m["n_basis"]),
        tilt=m["tilt"],
        margins=m["margins"],
        knots=None if knots is None else np.asarray(knots, dtype=np.float64),
    )


def _mcmc_config(cfg: dict, seed: int | None, chains: int | None) -> McmcConfig:
    m = dict(cfg["mcmc"])
    if seed is not None:
        m["seed"] = seed
    if chains is not None:
        m["n_chains"] = chains
    return McmcConfig(**m)


def _priors(cfg: dict) -> Priors:
    return Priors(**cfg["priors"])


def _read_sites_csv(path: str) -> tuple[np.ndarray, list[str]]:
    import csv

    if not os.path.exists(path):
        raise ConfigError(f"input file not found: {path}")
    coords, ids = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:3] != ["station_id", "x", "y"]:
            raise ConfigError(f"{path}: expected header station_id,x,y[,...]")
        for row in reader:
            if not row:
                continue
            ids.append(row[0])
            coords.append((float(row[1]), float(row[2])))
    if not ids:
        raise ConfigError(f"{path}: no sites")
    return np.asarray(coords, dtype=np.float64), ids


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    sim = cfg["simulate"]
    rng = np.random.default_rng(args.seed if args.seed is not None else cfg["mcmc"]["seed"])
    if isinstance(sim["sites"], str) and sim["sites"] not in ("random", "grid"):
        coords, _ = _read_sites_csv(sim["sites"])
    elif sim["sites"] == "grid":
        side = int(np.ceil(np.sqrt(sim["n_sites"])))
        g = np.linspace(0.0, 1.0, side)
        coords = np.array([(a, b) for a in g for b in g])[: sim["n_sites"]]
    else:
        coords = rng.uniform(size=(int(sim["n_sites"]), 2))
    spec = _model_spec(cfg)
    if spec.basis_family == "log-gp":
        basis = sample_log_gp_basis(
            coords,
            spec.n_basis,
            ExpCovParams(float(sim["basis_variance"]), float(sim["basis_range"])),
            rng,
        )
    else:
        bw = sim["bandwidth"]
        if bw is None:
            raise ConfigError("simulate.bandwidth is required for the gaussian-density family")
        basis = eval_gaussian_basis(coords, GaussianDensityBasisSpec(spec.knots, float(bw)))
    d = coords.shape[0]
    model = MaxIdModel(
        dep=HougaardParams(float(sim["alpha"]), float(sim["theta"])),
        basis=basis,
        mu=np.full(d, float(sim["mu"])),
        sigma=np.full(d, float(sim["sigma"])),
        xi=np.full(d, float(sim["xi"])),
    )
    data = simulate_field(model, int(sim["n_years"]), rng)
    if float(sim["missing_rate"]) > 0.0:
        mask = rng.uniform(size=data.values.shape) < float(sim["missing_rate"])
        # keep at least one observation per year
        mask[np.arange(mask.shape[0]), rng.integers(0, d, mask.shape[0])] = False
        data.values[mask] = np.nan
    os.makedirs(args.out, exist_ok=True)
    out_csv = os.path.join(args.out, "data.csv")
    write_dataset_csv(out_csv, data)
    write_manifest(args.out, {"command": "simulate", "config": cfg, "seed": args.seed}, [])
    print(f"wrote {out_csv} ({data.n_years} years x {data.n_sites} sites)")
    return 0


def cmd_fit(args) -> int:
    cfg = load_config(args.config)
    data = read_dataset_csv(args.data)
    spec = _model_spec(cfg)
    base = _mcmc_config(cfg, args.seed, args.chains)
    priors = _priors(cfg)
    os.makedirs(args.out, exist_ok=True)
    seeds = np.random.SeedSequence(base.seed).spawn(base.n_chains)
    chain_dirs = []

    def one(chain_idx: int, seed_int: int) -> str:
        from dataclasses import replace

        cc = replace(base, seed=seed_int)
        rng = np.random.default_rng(cc.seed)
        sampler = Sampler(data, spec, priors, cc, rng)
        try:
            out = sampler.run()
        except NumericalError:
            dump = os.path.join(args.out, f"state_dump_chain{chain_idx:02d}.npz")
            snap = sampler.snapshot()
            np.savez(dump, alpha=snap.alpha, theta=snap.theta, log_a=snap.log_a,
                     mu=snap.mu, gamma=snap.gamma, xi=snap.xi, values=snap.values)
            print(f"numerical failure; state dumped to {dump}", file=sys.stderr)
            raise
        cdir = os.path.join(args.out, f"chain{chain_idx:02d}")
        write_chain(cdir, out)
        return cdir

    seed_ints = [int(s.generate_state(1)[0] % 2**31) for s in seeds]
    if base.n_chains > 1 and args.threads > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=args.threads) as pool:
            chain_dirs = list(pool.map(_fit_worker, [
                (args.config, args.data, args.out, k, s) for k, s in enumerate(seed_ints)
            ]))
    else:
        for k, s in enumerate(seed_ints):
            chain_dirs.append(one(k, s))
    write_manifest(
        args.out,
        {"command": "fit", "config": cfg, "seed": base.seed, "chains": base.n_chains},
        [args.data] + ([args.config] if args.config else []),
    )
    for cdir in chain_dirs:
        print(f"chain written to {cdir}")
    return 0


def _fit_worker(packed):
    config, data_path, out, idx, seed = packed
    from dataclasses import replace

    cfg = load_config(config)
    data = read_dataset_csv(data_path)
    cc = replace(_mcmc_config(cfg, None, None), seed=seed)
    rng = np.random.default_rng(cc.seed)
    sampler = Sampler(data, _model_spec(cfg), _priors(cfg), cc, rng)
    out_dir = os.path.join(out, f"chain{idx:02d}")
    write_chain(out_dir, sampler.run())
    return out_dir


def cmd_predict(args) -> int:
    chain = read_chain(args.chain)
    data = read_dataset_csv(args.data)
    coords, ids = _read_sites_csv(args.sites)
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    os.makedirs(args.out, exist_ok=True)
    field = predict_at(coords, chain, data, rng, draw_stride=args.stride)
    field.site_ids = ids
    summ = field.summarize()
    write_rows_csv(
        os.path.join(args.out, "predictive_summary.csv"),
        ["site_id", "mean", "sd", "q05", "q95"],
        [
            (ids[i], summ["mean"][i], summ["sd"][i], summ["q05"][i], summ["q95"][i])
            for i in range(len(ids))
        ],
    )
    if args.full_draws:
        rows = (
            (d.site_id, d.year, d.iteration, d.z_data) for d in field.iter_draws()
        )
        write_rows_csv(
            os.path.join(args.out, "predictive_draws.csv"),
            ["site_id", "year", "iteration", "value"],
            rows,
        )
    rl = return_level(chain, coords, args.return_level, rng, draw_stride=args.stride)
    write_rows_csv(
        os.path.join(args.out, "return_level.csv"),
        ["site_id", "level", "mean", "sd"],
        [
            (ids[i], args.return_level, rl["mean"][i], rl["sd"][i])
            for i in range(len(ids))
        ],
    )
    if chain.spec.basis_family == "log-gp":
        write_rows_csv(
            os.path.join(args.out, "factor_ranking.csv"),
            ["rank", "basis_index", "variance_share"],
            [(r + 1, l, s) for r, (l, s) in enumerate(rank_factors(chain))],
        )
    write_manifest(
        args.out,
        {"command": "predict", "chain": args.chain, "return_level": args.return_level,
         "stride": args.stride, "seed": args.seed},
        [args.sites, args.data],
    )
    print(f"predictions written to {args.out}")
    return 0


def cmd_diagnose(args) -> int:
    data = read_dataset_csv(args.data)
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    os.makedirs(args.out, exist_ok=True)
    chain = read_chain(args.chain)
    picks = np.arange(0, chain.n_kept, args.stride)
    u_levels = [float(u) for u in args.u.split(",")]

    # rank-based uniform transform of the observations
    obs_u = np.full(data.values.shape, np.nan)
    for i in range(data.n_sites):
        col = data.values[:, i]
        ok = np.isfinite(col)
        if ok.sum() > 1:
            ranks = np.argsort(np.argsort(col[ok]))
            obs_u[ok, i] = (ranks + 0.5) / ok.sum()

    rows = []
    for u in u_levels:
        emp = empirical_chi(obs_u, data.coords, u, n_bins=args.bins, rng=rng)
        sims = np.full((picks.shape[0], args.bins), np.nan)
        for k, m in enumerate(picks):
            state = _state_from_draw(chain, m)
            model = model_from_state(state, data, chain.spec)
            sim = simulate_field(model, data.n_years, rng)
            sim_u = np.argsort(np.argsort(sim.values, axis=0), axis=0)
            sim_u = (sim_u + 0.5) / data.n_years
            sims[k] = empirical_chi(sim_u, data.coords, u, n_bins=args.bins, n_boot=1, rng=rng).values
        lo = np.nanpercentile(sims, 2.5, axis=0)
        hi = np.nanpercentile(sims, 97.5, axis=0)
        for b in range(args.bins):
            rows.append((u, emp.u[b], emp.values[b], emp.lo95[b], emp.hi95[b], lo[b], hi[b]))
    write_rows_csv(
        os.path.join(args.out, "chi_curves.csv"),
        ["u", "distance", "empirical", "emp_lo95", "emp_hi95", "model_lo95", "model_hi95"],
        rows,
    )

    # group-statistic tables on the Gumbel scale (posterior-mean margins)
    mu_hat = chain.mu_draws.mean(axis=0)
    gamma_hat = chain.gamma_draws.mean(axis=0)
    xi_hat = float(chain.scalars["xi"].mean())
    gum = _to_gumbel(data.values, mu_hat, np.exp(gamma_hat), xi_hat)
    stats_obs = _group_stats(gum)
    sim_stats = {k: [] for k in stats_obs}
    for k, m in enumerate(picks):
        state = _state_from_draw(chain, m)
        model = model_from_state(state, data, chain.spec)
        sim = simulate_field(model, data.n_years, rng)
        gsim = _to_gumbel(sim.values, state.mu, np.exp(state.gamma), state.xi)
        for key, val in _group_stats(gsim).items():
            sim_stats[key].append(val)
    rows = []
    for key in stats_obs:
        arr = np.sort(np.array(sim_stats[key]), axis=1)
        obs_sorted = np.sort(stats_obs[key])
        med = np.percentile(arr, 50.0, axis=0)
        lo = np.percentile(arr, 2.5, axis=0)
        hi = np.percentile(arr, 97.5, axis=0)
        for q in range(obs_sorted.shape[0]):
            rows.append((key, q + 1, obs_sorted[q], med[q], lo[q], hi[q]))
    write_rows_csv(
        os.path.join(args.out, "qq_group_stats.csv"),
        ["statistic", "order", "observed", "model_median", "model_lo95", "model_hi95"],
        rows,
    )

    # pairwise extremal coefficients (max-stable family only)
    if chain.spec.tilt == "zero":
        state = _state_from_draw(chain, chain.n_kept - 1)
        model = model_from_state(state, data, chain.spec)
        alpha_hat = float(chain.scalars["alpha"].mean())
        rows = []
        for i in range(data.n_sites):
            for j in range(i + 1, data.n_sites):
                w = model.basis.weights[[i, j]]
                rows.append(
                    (
                        data.sites[i].id,
                        data.sites[j].id,
                        float(np.linalg.norm(data.coords[i] - data.coords[j])),
                        extremal_coefficient(w, alpha_hat),
                    )
                )
        write_rows_csv(
            os.path.join(args.out, "extremal_coefficients.csv"),
            ["site_a", "site_b", "distance", "theta2"],
            rows,
        )
    write_manifest(
        args.out,
        {"command": "diagnose", "chain": args.chain, "u": args.u,
         "bins": args.bins, "stride": args.stride, "seed": args.seed},
        [args.data],
    )
    print(f"diagnostics written to {args.out}")
    return 0


def _state_from_draw(chain, m: int):
    from .mcmc import ChainState

    sc = chain.scalars
    d = chain.coords.shape[0]
    return ChainState(
        alpha=float(sc["alpha"][m]),
        theta=float(sc["theta"][m]) if "theta" in sc else 0.0,
        log_a=np.log(chain.a_draws[m]),
        latent=None if chain.latent_draws is None else chain.latent_draws[m],
        tau=float(sc["tau"][m]) if "tau" in sc else None,
        mu=chain.mu_draws[m],
        gamma=chain.gamma_draws[m],
        xi=float(sc["xi"][m]),
        beta_mu=float(sc.get("beta_mu", sc.get("mu"))[m]),
        beta_gamma=float(sc.get("beta_gamma", sc.get("gamma"))[m]),
        d2_mu=float(sc["d2_mu"][m]) if "d2_mu" in sc else 1.0,
        rho_mu=float(sc["rho_mu"][m]) if "rho_mu" in sc else 1.0,
        d2_gamma=float(sc["d2_gamma"][m]) if "d2_gamma" in sc else 1.0,
        rho_gamma=float(sc["rho_gamma"][m]) if "rho_gamma" in sc else 1.0,
        d2_k=float(sc["d2_k"][m]) if "d2_k" in sc else 1.0,
        rho_k=float(sc["rho_k"][m]) if "rho_k" in sc else 1.0,
        values=np.empty((0, d)),
    )


def _to_gumbel(values, mu, sigma, xi):
    from . import kernels

    t_n, d = values.shape
    out = np.full((t_n, d), np.nan)
    for i in range(d):
        col = values[:, i]
        ok = np.isfinite(col)
        w = kernels.gev_nlog_cdf_cells(
            col[ok], np.full(ok.sum(), mu[i]), np.full(ok.sum(), sigma[i]), float(xi)
        )
        out[ok, i] = -np.log(np.maximum(w, 1e-300))
    return out


def _group_stats(gumbel_vals):
    return {
        "min": np.nanmin(gumbel_vals, axis=1),
        "mean": np.nanmean(gumbel_vals, axis=1),
        "max": np.nanmax(gumbel_vals, axis=1),
    }


def cmd_check_maxid(args) -> int:
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    os.makedirs(args.out, exist_ok=True)
    if args.data is not None:
        sample = np.loadtxt(args.data, delimiter=",", skiprows=args.skip_header)
        if sample.ndim != 2 or sample.shape[1] != 2:
            raise ConfigError(f"{args.data}: expected an n x 2 CSV")
        p_pos = np.empty(args.N)
        d_min = np.empty(args.N)
        for k in range(args.N):
            p_pos[k], d_min[k] = rectangle_experiment(sample, args.M, rng)
        rows = [
            (
                "data",
                "",
                float(np.quantile(p_pos, 0.025)),
                float(np.quantile(p_pos, 0.975)),
                float(np.quantile(d_min, 0.05)),
            )
        ]
        inputs = [args.data]
    else:
        params = [float(x) for x in args.params.split(",")]
        table = reference_table(args.family, params, args.n, args.M, args.N, rng)
        rows = [
            (r["family"], r["param"], r["p_pos_q025"], r["p_pos_q975"], r["d_min_q05"])
            for r in table
        ]
        inputs = []
    out_csv = os.path.join(args.out, "maxid_check.csv")
    write_rows_csv(
        out_csv, ["family", "param", "p_pos_q025", "p_pos_q975", "d_min_q05"], rows
    )
    write_manifest(
        args.out,
        {"command": "check-maxid", "family": args.family, "params": args.params,
         "n": args.n, "M": args.M, "N": args.N, "seed": args.seed},
        inputs,
    )
    print(f"rectangle diagnostics written to {out_csv}")
    return 0


def cmd_sim_study(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    scale = StudyScale(
        n_sites=args.sites,
        n_years=args.years,
        n_basis=args.L,
        n_iter=args.iters,
        burn_in=args.burn,
        thin=args.thin,
        n_clusters=args.clusters,
        n_replicates=args.reps,
    )
    rows = []
    for d in args.design:
        res = run_design(
            d,
            args.basis,
            scale,
            seed=args.seed if args.seed is not None else 0,
            progress=lambda i, n: print(f"design {d}: replicate {i}/{n}", flush=True),
        )
        for p, s in res["summary"].items():
            rows.append(
                (d, res["tilt"], p, s["truth"], s["bias"], s["rmse"], s["coverage"])
            )
    out_csv = os.path.join(args.out, "sim_study.csv")
    write_rows_csv(
        out_csv,
        ["design", "tilt", "parameter", "truth", "bias", "rmse", "coverage"],
        rows,
    )
    write_manifest(
        args.out,
        {"command": "sim-study", "designs": args.design, "basis": args.basis,
         "scale": vars(args), "seed": args.seed},
        [],
    )
    print(f"study results written to {out_csv}")
    return 0


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

def build_parser() -> _Parser:
    p = _Parser(prog="maxidspatial", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def add_common(sp):
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--seed", type=int, default=None)

    sp = sub.add_parser("simulate", help="simulate a dataset from a model config")
    sp.add_argument("--config", default=None)
    add_common(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("fit", help="fit a model by MCMC")
    sp.add_argument("--config", default=None)
    sp.add_argument("--data", required=True)
    sp.add_argument("--chains", type=int, default=None)
    sp.add_argument("--threads", type=int, default=1)
    add_common(sp)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("predict", help="posterior predictive draws at new sites")
    sp.add_argument("--chain", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--sites", required=True, help="CSV with header station_id,x,y")
    sp.add_argument("--return-level", type=float, default=0.99)
    sp.add_argument("--stride", type=int, default=1)
    sp.add_argument("--full-draws", action="store_true")
    add_common(sp)
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("diagnose", help="tail-dependence and QQ diagnostics")
    sp.add_argument("--chain", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--u", default="0.9", help="comma-separated quantile levels")
    sp.add_argument("--bins", type=int, default=12)
    sp.add_argument("--stride", type=int, default=5)
    add_common(sp)
    sp.set_defaults(func=cmd_diagnose)

    sp = sub.add_parser("check-maxid", help="bivariate max-id rectangle diagnostic")
    sp.add_argument("--family", choices=["logistic", "gaussian"], default="logistic")
    sp.add_argument("--params", default="0.05,0.5,1.0", help="dependence parameters")
    sp.add_argument("--alpha", dest="params_alpha", default=None, help="alias for --params")
    sp.add_argument("--data", default=None, help="n x 2 CSV instead of a reference family")
    sp.add_argument("--skip-header", type=int, default=0)
    sp.add_argument("--n", type=int, default=55)
    sp.add_argument("--M", type=int, default=1000)
    sp.add_argument("--N", type=int, default=300)
    add_common(sp)
    sp.set_defaults(func=cmd_check_maxid)

    sp = sub.add_parser("sim-study", help="scaled replication of the study designs")
    sp.add_argument("--design", type=int, nargs="+", required=True, choices=range(1, 7))
    sp.add_argument("--basis", choices=["log-gp", "gaussian-density"], default="log-gp")
    sp.add_argument("--sites", type=int, default=30)
    sp.add_argument("--years", type=int, default=20)
    sp.add_argument("--L", type=int, default=6)
    sp.add_argument("--iters", type=int, default=4000)
    sp.add_argument("--burn", type=int, default=1000)
    sp.add_argument("--thin", type=int, default=5)
    sp.add_argument("--clusters", type=int, default=5)
    sp.add_argument("--reps", type=int, default=20)
    add_common(sp)
    sp.set_defaults(func=cmd_sim_study)

    sp = sub.add_parser("benchmark", help="time the numba and numpy kernel backends")
    sp.set_defaults(func=None, command="benchmark")
    return p


def main(argv=None) -> int:
    try:
        parser = build_parser()
        args = parser.parse_args(argv)
        if args.command == "benchmark":
            from .benchmark import run_benchmark

            run_benchmark()
            return 0
        if getattr(args, "params_alpha", None):
            args.params = args.params_alpha
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
