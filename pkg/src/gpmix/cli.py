"""Command-line front end: ``simulate``, ``fit``, ``diagnose`` and ``bin``.

Every output is a headed CSV or an indented JSON file. Floats are written
with shortest round-trip repr, so rerunning a pipeline with the same seeds
reproduces the files byte for byte. Wall-clock timings go to a separate
``timing.json`` to keep the other outputs deterministic.

Exit codes: 0 ok, 2 usage or configuration error, 3 data or I/O error,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import pandas as pd
import yaml

from . import __version__
from .core import McmcConfig, validate_dataset
from .errors import (
    ConfigInvalid,
    DataError,
    DimensionMismatch,
    MissingColumn,
    NonPositiveParameter,
    NumericalError,
)
from .estimands import CateSummary, ate_draws, bin_by_quantile, diagnostics, summarize
from .kernels import default_hyperparams
from .sampler_known import run_gibbs_known
from .sampler_unknown import default_probit_config, run_gibbs_unknown
from .simgen import gen_case_a, gen_case_b
from .transform import DEFAULT_CLIP_EPS

__all__ = ["CONFIG_KEYS", "load_config", "main", "build_parser"]

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

CONFIG_KEYS = {
    "kernel.s0_sq": float,
    "kernel.s_sq": None,  # scalar or list
    "kernel.c": None,  # list
    "kernel.sh_sq": float,
    "kernel.bandwidth_sq": float,
    "ig.a": float,
    "ig.b": float,
    "mcmc.iters": int,
    "mcmc.burn_in": int,
    "mcmc.thin": int,
    "mcmc.seed": int,
    "mcmc.jitter": float,
    "mcmc.chains": int,
    "mcmc.tune": bool,
    "probit.psi_scale": float,
    "probit.step_size": float,
    "clip.eps": float,
    "standardize_x": bool,
    "level": float,
}

_DEFAULTS = {
    "ig.a": 2.0,
    "ig.b": 1.0,
    "mcmc.iters": 6000,
    "mcmc.burn_in": 1000,
    "mcmc.thin": 1,
    "mcmc.seed": 0,
    "mcmc.jitter": 1e-8,
    "mcmc.chains": 1,
    "mcmc.tune": True,
    "probit.psi_scale": 2.5,
    "probit.step_size": 0.1,
    "clip.eps": DEFAULT_CLIP_EPS,
    "standardize_x": False,
    "level": 0.95,
}


def _flatten(d, prefix=""):
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def load_config(path=None) -> dict:
    """Read a YAML or JSON config into a flat dict of dotted keys with defaults.

    Nested mappings are flattened (``{"mcmc": {"iters": 10}}`` is the same as
    ``{"mcmc.iters": 10}``). Unknown keys raise :class:`ConfigInvalid`.
    """
    raw = {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            loaded = yaml.safe_load(fh)
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigInvalid("config must be a mapping")
        raw = _flatten(loaded)
    unknown = sorted(set(raw) - set(CONFIG_KEYS))
    if unknown:
        raise ConfigInvalid(f"unknown config keys: {', '.join(unknown)}")
    cfg = dict(_DEFAULTS)
    for key, value in raw.items():
        cast = CONFIG_KEYS[key]
        try:
            if cast is bool:
                if not isinstance(value, bool):
                    raise TypeError
                cfg[key] = value
            elif cast is not None:
                cfg[key] = cast(value)
            else:
                cfg[key] = np.asarray(value, dtype=float)
        except (TypeError, ValueError) as exc:
            raise ConfigInvalid(f"bad value for {key}: {value!r}") from exc
    return cfg


# ---------------------------------------------------------------- file helpers


def _write_json(path, obj):
    text = json.dumps(obj, indent=2, sort_keys=True, default=_json_default)
    Path(path).write_text(text + "\n", encoding="utf-8")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _write_csv(df: pd.DataFrame, path):
    df.to_csv(path, index=False, lineterminator="\n")


def _x_columns(df):
    cols = [c for c in df.columns if re.fullmatch(r"x\d+", str(c))]
    if not cols:
        raise MissingColumn("no covariate columns named x1, x2, ...")
    return sorted(cols, key=lambda c: int(c[1:]))


def _require(df, cols, what):
    missing = [c for c in cols if c not in df.columns]
    if missing:
        raise MissingColumn(f"{what} is missing column(s): {', '.join(missing)}")


# ---------------------------------------------------------------- subcommands


def cmd_simulate(case, n, seed, out):
    gens = {"a": gen_case_a, "b": gen_case_b}
    if case not in gens:
        raise ConfigInvalid(f"unknown case {case!r}; expected 'a' or 'b'")
    sim = gens[case](n=n, seed=seed)
    ds = sim.dataset
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    data = pd.DataFrame({"y": ds.y, "w": ds.w, "e_true": sim.true_e})
    for j in range(ds.p):
        data[f"x{j + 1}"] = ds.x[:, j]
    _write_csv(data, out / "data.csv")
    truth = pd.DataFrame({"unit": np.arange(ds.n), "true_cate": sim.true_cate, "y1": sim.y1, "y0": sim.y0})
    _write_csv(truth, out / "truth.csv")
    _write_json(out / "manifest.json", {"case": case, "n": n, "seed": seed, "p": ds.p, "version": __version__})
    return out


def _chain_seeds(seed, chains):
    if chains == 1:
        return [seed]
    children = np.random.SeedSequence(seed).spawn(chains)
    return [int(c.generate_state(1, dtype=np.uint64)[0]) for c in children]


def _n_threads(chains):
    cap = os.environ.get("GPMIX_THREADS")
    limit = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(chains, limit))


def _long_draws(d, mode, thin_output, it_index):
    parts = []

    def add(q, mat):
        k, m = mat.shape
        parts.append(
            pd.DataFrame(
                {
                    "iter": np.repeat(it_index, m),
                    "quantity": q,
                    "index": np.tile(np.arange(m), k),
                    "value": mat.reshape(-1),
                }
            )
        )

    add("g", d.g_draws)
    if not thin_output:
        add("h", d.h_draws)
        add("sigma2", d.sigma2_draws[:, None])
        if mode == "unknown":
            add("beta", d.beta_draws)
            add("e", d.e_draws)
    return pd.concat(parts, ignore_index=True)


def cmd_fit(data_path, config_path, out, mode, thin_output=False, progress=False):
    cfg = load_config(config_path)
    df = pd.read_csv(data_path)
    _require(df, ["y", "w"], "data file")
    xcols = _x_columns(df)
    x = df[xcols].to_numpy(dtype=float)
    e_col = next((c for c in ("e_true", "e") if c in df.columns), None)
    if mode == "known" and e_col is None:
        raise MissingColumn("mode 'known' needs a propensity column named e_true or e")
    e_known = df[e_col].to_numpy(dtype=float) if mode == "known" else None

    x_center = x_scale = None
    if cfg["standardize_x"]:
        x_center = x.mean(axis=0)
        x_scale = x.std(axis=0, ddof=0)
        x_scale[x_scale == 0] = 1.0
        x = (x - x_center) / x_scale
    ds = validate_dataset(x, df["y"].to_numpy(dtype=float), df["w"].to_numpy(), e_known)

    overrides = {
        k.split(".", 1)[1]: cfg[k]
        for k in ("kernel.s0_sq", "kernel.s_sq", "kernel.c", "kernel.sh_sq", "kernel.bandwidth_sq")
        if k in cfg
    }
    hypers = default_hyperparams(ds.x, ig_a=cfg["ig.a"], ig_b=cfg["ig.b"], **overrides)
    probit_cfg = None
    if mode == "unknown":
        probit_cfg = default_probit_config(ds.x, ds.w, cfg["probit.psi_scale"], cfg["probit.step_size"])

    chains = cfg["mcmc.chains"]
    if chains < 1:
        raise ConfigInvalid("mcmc.chains must be >= 1")
    seeds = _chain_seeds(cfg["mcmc.seed"], chains)

    def run(seed):
        mc = McmcConfig(
            total_iters=cfg["mcmc.iters"],
            burn_in=cfg["mcmc.burn_in"],
            thin=cfg["mcmc.thin"],
            seed=seed,
            jitter=cfg["mcmc.jitter"],
        )
        cb = _progress_printer() if progress and chains == 1 else None
        if mode == "known":
            return run_gibbs_known(ds, hypers, mc, clip_eps=cfg["clip.eps"], progress=cb)
        return run_gibbs_unknown(
            ds, hypers, mc, probit_cfg, clip_eps=cfg["clip.eps"], tune=cfg["mcmc.tune"], progress=cb
        )

    if chains == 1:
        results = [run(seeds[0])]
    else:
        with ThreadPoolExecutor(max_workers=_n_threads(chains)) as pool:
            results = list(pool.map(run, seeds))

    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    mc0 = results[0].meta
    it_index = mc0["burn_in"] + mc0["thin"] * np.arange(1, results[0].n_draws + 1)
    frames = []
    for c, d in enumerate(results):
        f = _long_draws(d, mode, thin_output, it_index)
        if chains > 1:
            f.insert(0, "chain", c)
        frames.append(f)
    _write_csv(pd.concat(frames, ignore_index=True), out / "draws.csv")

    cate = np.vstack([d.g_draws for d in results])
    level = cfg["level"]
    _write_csv(summarize(cate, level).to_frame(), out / "summary.csv")
    ate = summarize(ate_draws(cate), level)
    _write_json(out / "ate.json", {"point": float(ate.point), "lwr": float(ate.lwr), "upr": float(ate.upr), "level": level})

    chain_meta = []
    timing = []
    for c, d in enumerate(results):
        meta = dict(d.meta)
        timing.append({"chain": c, "wall_time_s": meta.pop("wall_time_s")})
        meta["chain"] = c
        if mode == "unknown":
            meta["acceptance_rate"] = d.acceptance_rate
        chain_meta.append(meta)
    _write_json(
        out / "chain_meta.json",
        {
            "version": __version__,
            "mode": mode,
            "chains": chain_meta,
            "config": {k: v for k, v in cfg.items()},
            "hyperparameters": {
                "s0_sq": hypers.s0_sq,
                "s_sq": hypers.s_sq,
                "c": hypers.c,
                "sh_sq": hypers.sh_sq,
                "bandwidth_sq": hypers.bandwidth_sq,
                "ig_a": hypers.ig_a,
                "ig_b": hypers.ig_b,
            },
            "standardize_x": {"center": x_center, "scale": x_scale} if cfg["standardize_x"] else None,
            "covariates": xcols,
        },
    )
    _write_json(out / "timing.json", {"chains": timing})
    return out


def _progress_printer(every=100):
    def cb(it, total):
        if it % every == 0 or it == total:
            print(f"\riteration {it}/{total}", end="\n" if it == total else "", file=sys.stderr, flush=True)

    return cb


def _read_indexed(path, what):
    df = pd.read_csv(path)
    if "unit" not in df.columns:
        df.insert(0, "unit", np.arange(len(df)))
    if df["unit"].duplicated().any():
        raise DataError(f"{what} has duplicate unit ids")
    return df.set_index("unit").sort_index()


def cmd_diagnose(summary_path, truth_path, out):
    summ = _read_indexed(summary_path, "summary")
    truth = _read_indexed(truth_path, "truth")
    _require(summ, ["cate_point", "cate_lwr", "cate_upr"], "summary file")
    _require(truth, ["true_cate"], "truth file")
    if len(summ) != len(truth) or not summ.index.equals(truth.index):
        raise DimensionMismatch(f"summary has {len(summ)} units, truth has {len(truth)} (or ids differ)")
    s = CateSummary(
        point=summ["cate_point"].to_numpy(),
        lwr=summ["cate_lwr"].to_numpy(),
        upr=summ["cate_upr"].to_numpy(),
        level=float("nan"),
    )
    rep = diagnostics(truth["true_cate"].to_numpy(), s)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "diagnostics.json", {**rep.as_dict(), "n": len(summ)})
    scatter = pd.DataFrame(
        {
            "unit": summ.index.to_numpy(),
            "true_cate": truth["true_cate"].to_numpy(),
            "point": s.point,
            "lwr": s.lwr,
            "upr": s.upr,
        }
    )
    _write_csv(scatter, out / "cate_scatter.csv")
    return rep


def cmd_bin(summary_path, values_column, n_bins, out, data_path=None, draws_path=None, level=0.95):
    """Decile-style table of the CATE against one column of the data.

    Bin intervals need the per-draw CATEs, read from ``draws.csv`` (by
    default the one next to ``summary_path``).
    """
    summ = _read_indexed(summary_path, "summary")
    if values_column in summ.columns:
        values = summ[values_column].to_numpy(dtype=float)
    else:
        if data_path is None:
            raise MissingColumn(f"column {values_column!r} not in the summary; pass --data")
        data = pd.read_csv(data_path)
        _require(data, [values_column], "data file")
        if len(data) != len(summ):
            raise DimensionMismatch(f"data has {len(data)} rows, summary has {len(summ)} units")
        values = data[values_column].to_numpy(dtype=float)
    draws_path = Path(draws_path) if draws_path else Path(summary_path).with_name("draws.csv")
    draws = pd.read_csv(draws_path)
    g = draws[draws["quantity"] == "g"]
    keys = ["chain", "iter"] if "chain" in g.columns else ["iter"]
    cate = g.pivot_table(index=keys, columns="index", values="value", sort=True).to_numpy()
    if cate.shape[1] != len(summ):
        raise DimensionMismatch(f"draws cover {cate.shape[1]} units, summary has {len(summ)}")
    table = bin_by_quantile(values, cate, n_bins, level)
    out = Path(out)
    if out.suffix.lower() != ".csv":
        out.mkdir(parents=True, exist_ok=True)
        out = out / "bins.csv"
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
    _write_csv(table, out)
    return table


# ---------------------------------------------------------------- entry point


def build_parser():
    ap = argparse.ArgumentParser(prog="gpmix", description="GP mixture model for heterogeneous treatment effects")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate a synthetic benchmark dataset")
    s.add_argument("--case", required=True, help="a (40 covariates) or b (5 covariates)")
    s.add_argument("--n", type=int, default=250)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True, help="output directory")

    f = sub.add_parser("fit", help="run the sampler on a data file")
    f.add_argument("--data", required=True)
    f.add_argument("--config", default=None, help="YAML or JSON file of dotted keys")
    f.add_argument("--out", required=True, help="output directory")
    f.add_argument("--mode", choices=["known", "unknown"], default="known")
    f.add_argument("--thin-output", action="store_true", help="store only the g draws")
    f.add_argument("--progress", action="store_true", help="print an iteration counter to stderr")

    d = sub.add_parser("diagnose", help="MSE, bias and coverage against the truth")
    d.add_argument("--summary", required=True)
    d.add_argument("--truth", required=True)
    d.add_argument("--out", required=True, help="output directory")

    b = sub.add_parser("bin", help="CATE summaries by quantile bins of a column")
    b.add_argument("--summary", required=True)
    b.add_argument("--values-column", required=True)
    b.add_argument("--n-bins", type=int, default=10)
    b.add_argument("--out", required=True, help="output directory or .csv path")
    b.add_argument("--data", default=None, help="data file holding the values column")
    b.add_argument("--draws", default=None, help="draws.csv (default: next to the summary)")
    b.add_argument("--level", type=float, default=0.95)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            cmd_simulate(args.case.lower(), args.n, args.seed, args.out)
        elif args.command == "fit":
            cmd_fit(args.data, args.config, args.out, args.mode, args.thin_output, args.progress)
        elif args.command == "diagnose":
            cmd_diagnose(args.summary, args.truth, args.out)
        elif args.command == "bin":
            cmd_bin(args.summary, args.values_column, args.n_bins, args.out, args.data, args.draws, args.level)
    except (ConfigInvalid, NonPositiveParameter, yaml.YAMLError) as exc:
        print(f"gpmix: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        print(f"gpmix: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"gpmix: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
