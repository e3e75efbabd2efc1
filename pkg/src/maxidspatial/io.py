"""File formats: the long-form dataset CSV, chain persistence, run
manifests, and small CSV writers for diagnostics.

Dataset CSV schema: header ``station_id,x,y,year,value``, one row per
station-year, empty value marking a missing cell. All files are UTF-8 with
LF line endings; floats are written with shortest round-trip formatting so
identical runs produce identical bytes.
"""
from __future__ import annotations

import csv
import hashlib
import json
import os
from dataclasses import asdict

import numpy as np

from .basis import Site
from .errors import ConfigError
from .mcmc import ChainOutput, ChainState, McmcConfig, ModelSpec
from .process import Dataset

__all__ = [
    "read_dataset_csv",
    "write_dataset_csv",
    "write_chain",
    "read_chain",
    "write_manifest",
    "file_sha256",
    "write_rows_csv",
]

_DATA_HEADER = ["station_id", "x", "y", "year", "value"]


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def read_dataset_csv(path: str) -> Dataset:
    """Read the long-form station-year CSV into a Dataset."""
    if not os.path.exists(path):
        raise ConfigError(f"input file not found: {path}")
    by_site: dict[str, tuple[float, float]] = {}
    cells: dict[tuple[str, int], float] = {}
    years: set[int] = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != _DATA_HEADER:
            raise ConfigError(
                f"{path}: expected header {','.join(_DATA_HEADER)}, got {header}"
            )
        for ln, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 5:
                raise ConfigError(f"{path}:{ln}: expected 5 columns")
            sid, xs, ys, yr, val = row
            try:
                x, y, year = float(xs), float(ys), int(yr)
            except ValueError as exc:
                raise ConfigError(f"{path}:{ln}: {exc}") from exc
            if sid in by_site and by_site[sid] != (x, y):
                raise ConfigError(f"{path}:{ln}: station {sid} moved")
            by_site[sid] = (x, y)
            years.add(year)
            if val.strip() != "":
                cells[(sid, year)] = float(val)
    if not by_site:
        raise ConfigError(f"{path}: no data rows")
    site_ids = sorted(by_site)
    year_list = sorted(years)
    values = np.full((len(year_list), len(site_ids)), np.nan)
    for (sid, year), v in cells.items():
        values[year_list.index(year), site_ids.index(sid)] = v
    sites = [Site(sid, by_site[sid]) for sid in site_ids]
    return Dataset(sites, np.array(year_list), values)


def write_dataset_csv(path: str, data: Dataset) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_DATA_HEADER)
        for i, site in enumerate(data.sites):
            for t, year in enumerate(data.years):
                v = data.values[t, i]
                w.writerow(
                    [
                        site.id,
                        _fmt(site.coords[0]),
                        _fmt(site.coords[1]),
                        int(year),
                        _fmt(v) if np.isfinite(v) else "",
                    ]
                )


def write_rows_csv(path: str, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def file_sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir: str, config_echo: dict, inputs: list[str]) -> str:
    """Write the run manifest: configuration echo, library versions, and
    SHA-256 hashes of the input files. Deterministic byte-for-byte."""
    from . import __version__
    from .kernels import BACKEND

    manifest = {
        "config": config_echo,
        "inputs": {os.path.basename(p): file_sha256(p) for p in inputs},
        "versions": {
            "maxidspatial": __version__,
            "numpy": np.__version__,
            "kernel_backend": BACKEND,
        },
    }
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _spec_echo(spec: ModelSpec) -> dict:
    d = asdict(spec)
    if d.get("knots") is not None:
        d["knots"] = np.asarray(d["knots"]).tolist()
    return d


def write_chain(out_dir: str, chain: ChainOutput) -> None:
    """Persist a chain: scalar draws CSV, field draw .npy files, and a JSON
    summary (dimensions, acceptance, ESS, final state for resuming)."""
    os.makedirs(out_dir, exist_ok=True)
    names = list(chain.scalars)
    with open(
        os.path.join(out_dir, "scalars.csv"), "w", newline="", encoding="utf-8"
    ) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration"] + names)
        burn, thin = chain.config.burn_in, chain.config.thin
        for k in range(chain.n_kept):
            it = burn + (k + 1) * thin
            w.writerow([it] + [_fmt(chain.scalars[n][k]) for n in names])

    np.save(os.path.join(out_dir, "a_draws.npy"), chain.a_draws)
    np.save(os.path.join(out_dir, "mu_draws.npy"), chain.mu_draws)
    np.save(os.path.join(out_dir, "gamma_draws.npy"), chain.gamma_draws)
    if chain.latent_draws is not None:
        np.save(os.path.join(out_dir, "latent_draws.npy"), chain.latent_draws)
    if chain.missing_cells.shape[0]:
        np.save(os.path.join(out_dir, "imputed_draws.npy"), chain.imputed_draws)
        np.save(os.path.join(out_dir, "missing_cells.npy"), chain.missing_cells)
    np.save(os.path.join(out_dir, "coords.npy"), chain.coords)

    state = chain.final_state
    summary = {
        "spec": _spec_echo(chain.spec),
        "config": asdict(chain.config),
        "n_kept": chain.n_kept,
        "years": chain.years.tolist(),
        "site_ids": list(chain.site_ids),
        "acceptance": {k: float(v) for k, v in sorted(chain.acceptance.items())},
        "ess": {k: float(v) for k, v in sorted(chain.ess.items())},
        "scalar_names": names,
    }
    with open(os.path.join(out_dir, "chain.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    np.savez(
        os.path.join(out_dir, "resume_state.npz"),
        **{
            k: (np.asarray(v) if v is not None else np.array(np.nan))
            for k, v in asdict(state).items()
            if k != "proposal_log_scales"
        },
        proposal_names=np.array(sorted(state.proposal_log_scales)),
        proposal_values=np.array(
            [state.proposal_log_scales[k] for k in sorted(state.proposal_log_scales)]
        ),
    )
    with open(os.path.join(out_dir, "run.log"), "w", encoding="utf-8") as fh:
        fh.write(f"wallclock_s={chain.wallclock_s}\n")


def read_chain(out_dir: str) -> ChainOutput:
    """Load a persisted chain (enough to predict/diagnose from it)."""
    with open(os.path.join(out_dir, "chain.json"), encoding="utf-8") as fh:
        summary = json.load(fh)
    spec_d = dict(summary["spec"])
    if spec_d.get("knots") is not None:
        spec_d["knots"] = np.asarray(spec_d["knots"], dtype=np.float64)
    spec = ModelSpec(**spec_d)
    config = McmcConfig(**summary["config"])
    scalars = {}
    with open(os.path.join(out_dir, "scalars.csv"), newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        cols = {name: [] for name in header[1:]}
        for row in reader:
            for name, val in zip(header[1:], row[1:]):
                cols[name].append(float(val))
    scalars = {k: np.array(v) for k, v in cols.items()}

    def load(name):
        p = os.path.join(out_dir, name)
        return np.load(p) if os.path.exists(p) else None

    a_draws = load("a_draws.npy")
    latent = load("latent_draws.npy")
    missing = load("missing_cells.npy")
    imputed = load("imputed_draws.npy")
    st = np.load(os.path.join(out_dir, "resume_state.npz"), allow_pickle=False)
    scales = dict(
        zip([str(s) for s in st["proposal_names"]], st["proposal_values"].tolist())
    )

    def opt(key):
        arr = st[key]
        return None if arr.shape == () and np.isnan(arr) else arr

    state = ChainState(
        alpha=float(st["alpha"]),
        theta=float(st["theta"]),
        log_a=st["log_a"],
        latent=opt("latent"),
        tau=(None if np.isnan(st["tau"]) else float(st["tau"])),
        mu=st["mu"],
        gamma=st["gamma"],
        xi=float(st["xi"]),
        beta_mu=float(st["beta_mu"]),
        beta_gamma=float(st["beta_gamma"]),
        d2_mu=float(st["d2_mu"]),
        rho_mu=float(st["rho_mu"]),
        d2_gamma=float(st["d2_gamma"]),
        rho_gamma=float(st["rho_gamma"]),
        d2_k=float(st["d2_k"]),
        rho_k=float(st["rho_k"]),
        values=st["values"],
        proposal_log_scales=scales,
    )
    return ChainOutput(
        spec=spec,
        config=config,
        scalars=scalars,
        a_draws=a_draws,
        latent_draws=latent,
        mu_draws=load("mu_draws.npy"),
        gamma_draws=load("gamma_draws.npy"),
        imputed_draws=imputed if imputed is not None else np.empty((len(a_draws), 0)),
        missing_cells=missing if missing is not None else np.empty((0, 2), dtype=int),
        acceptance=summary["acceptance"],
        ess=summary["ess"],
        wallclock_s=0.0,
        final_state=state,
        coords=load("coords.npy"),
        site_ids=summary["site_ids"],
        years=np.array(summary["years"]),
    )
