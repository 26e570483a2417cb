"""Experiment configs, orchestration and report emission.

Configs are plain ``key = value`` text with an optional ``[experiment]``
section header; parsing validates everything up front and reports all
errors with their line numbers.  Emission is canonical, so
``emit_config(parse_config(text))`` normalizes byte for byte and parsed
configs round-trip exactly.

Subcommands: coeffs, fourier, check, decompose, lil, flil, cclt,
remainder.  Every run writes a CSV of per-item values (17 significant
digits, enough to round-trip doubles) and a JSON aggregate that validates
against the bundled schema; the exit code is 0 on pass, 1 on a window
fail, 2 on errors.  Worker count changes speed only, never results.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import conditions, experiments, martingale
from .coefficients import a_eval, alpha_table, b_eval, beta_table, normalization_constant
from .processes import (
    FiniteMarkovChain,
    IID,
    LinearProcess,
    format_process,
    parse_process,
    sample_path,
    sigma2_analytic,
)
from .slowly_varying import format_ell, parse_ell

__all__ = ["ExperimentConfig", "ConfigError", "parse_config", "emit_config", "run", "main"]

SUBCOMMANDS = ("coeffs", "fourier", "check", "decompose", "lil", "flil", "cclt", "remainder")

_KEY_ORDER = (
    "process", "ell", "N", "reps", "seed", "n_ladder", "start",
    "sigma_mode", "tolerance", "quadrature_level", "window", "out",
)


@dataclass(frozen=True)
class ExperimentConfig:
    process: str = "iid:normal"
    ell: str = "one_vee_log"
    N: int | None = None
    reps: int | None = None
    seed: int = 0
    n_ladder: tuple[int, ...] | None = None
    start: str | None = None
    sigma_mode: str = "analytic"
    tolerance: float = 1e-9
    quadrature_level: int = 24
    window: tuple[float, float] | None = None
    out: str | None = None


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = errors


def _parse_int(s: str) -> int:
    v = int(s)
    return v


def parse_config(text: str) -> ExperimentConfig:
    """Parse and fully validate; raises ConfigError listing every problem."""
    errors: list[str] = []
    values: dict[str, object] = {}
    seen: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith(("#", ";")):
            continue
        if line.startswith("["):
            if line != "[experiment]":
                errors.append(f"line {lineno}: unknown section {line!r}")
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected 'key = value', got {raw!r}")
            continue
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip().strip('"')
        if key == "n":
            key = "N"
        if key not in _KEY_ORDER:
            errors.append(f"line {lineno}: unknown key {key!r}")
            continue
        if key in seen:
            errors.append(f"line {lineno}: duplicate key {key!r}")
            continue
        seen.add(key)
        try:
            if key in ("N", "reps", "quadrature_level"):
                values[key] = _parse_int(val)
            elif key == "seed":
                values[key] = _parse_int(val)
            elif key == "tolerance":
                values[key] = float(val)
            elif key == "n_ladder":
                values[key] = tuple(_parse_int(v) for v in val.split(","))
            elif key == "window":
                lo, hi = (float(v) for v in val.split(","))
                values[key] = (lo, hi)
            else:
                values[key] = val
        except ValueError:
            errors.append(f"line {lineno}: cannot parse value for {key!r}: {val!r}")

    cfg = ExperimentConfig(**values) if not errors else None
    if cfg is not None:
        try:
            parse_process(cfg.process)
        except ValueError as e:
            errors.append(f"process: {e}")
        try:
            parse_ell(cfg.ell)
        except ValueError as e:
            errors.append(f"ell: {e}")
        if cfg.N is not None and cfg.N < 1:
            errors.append("N must be >= 1")
        if cfg.reps is not None and cfg.reps < 1:
            errors.append("reps must be >= 1")
        if not 0.0 < cfg.tolerance <= 1e-4:
            errors.append("tolerance must lie in (0, 1e-4]")
        if cfg.quadrature_level < 1:
            errors.append("quadrature_level must be >= 1")
        if cfg.sigma_mode not in ("analytic", "estimated"):
            errors.append("sigma_mode must be 'analytic' or 'estimated'")
        if cfg.n_ladder is not None and (
            any(v < 1 for v in cfg.n_ladder)
            or any(b <= a for a, b in zip(cfg.n_ladder, cfg.n_ladder[1:]))
        ):
            errors.append("n_ladder must be strictly increasing positive integers")
        if cfg.window is not None and cfg.window[0] > cfg.window[1]:
            errors.append("window must satisfy lo <= hi")
    if errors:
        raise ConfigError(errors)
    return cfg


def emit_config(cfg: ExperimentConfig) -> str:
    """Canonical text form; parse(emit(cfg)) == cfg."""
    lines = ["[experiment]"]
    for key in _KEY_ORDER:
        v = getattr(cfg, key)
        if v is None:
            continue
        if key in ("process", "ell", "start", "sigma_mode", "out"):
            lines.append(f'{key} = "{v}"')
        elif key == "n_ladder":
            lines.append(f"{key} = " + ",".join(str(int(x)) for x in v))
        elif key == "window":
            lines.append(f"{key} = {v[0]:g},{v[1]:g}")
        elif key == "tolerance":
            lines.append(f"{key} = {v:g}")
        else:
            lines.append(f"{key} = {v}")
    return "\n".join(lines) + "\n"


# -- emission helpers ----------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None:
        return ""
    return f"{float(x):.17g}"


def _write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) if not isinstance(v, str) else v for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_json(path: Path, obj: dict) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _sigma_ref(cfg: ExperimentConfig, model) -> float:
    if cfg.sigma_mode == "analytic":
        v = sigma2_analytic(model)
        if v is None:
            raise ValueError("no closed-form variance for this model; use sigma_mode = estimated")
        return math.sqrt(max(v, 0.0))
    est = martingale.sigma2(model, "variance_rate", n=4096, reps=4096, seed=cfg.seed)
    return math.sqrt(max(est.value, 0.0))


# -- subcommand runners ----------------------------------------------------------------


def _run_coeffs(cfg, out, threads):
    ell = parse_ell(cfg.ell)
    N = cfg.N or 100
    table = alpha_table(beta_table(ell, N, cfg.tolerance))
    rows = [(0, "", "", table.alpha[0])]
    for k in range(1, N + 1):
        rows.append((k, table.beta[k - 1], table.gamma[k - 1], table.alpha[k]))
    _write_csv(out / "coeffs.csv", ["k", "beta_k", "gamma_k", "alpha_k"], rows)
    _write_json(out / "coeffs.json", {
        "kind": "coeffs",
        "c": table.c,
        "N": table.N,
        "ell": format_ell(ell),
        "tail_bound": table.tail_bound,
        "gamma_top": float(table.gamma[-1]),
        "pass": True,
    })
    return 0


_FOURIER_GRID = (1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0)


def _run_fourier(cfg, out, threads):
    ell = parse_ell(cfg.ell)
    c = normalization_constant(ell, min(cfg.tolerance, 1e-9))
    rows = []
    for t in _FOURIER_GRID:
        be = b_eval(ell, t, order=2, tolerance=1e-4)
        ae = a_eval(ell, t, order=1, tolerance=1e-4)
        ellt = float(ell.eval_real(np.array(1.0 / t)))
        ratio_bp = abs(be.first_derivative) * math.sqrt(t * ellt) / (2 * c * math.sqrt(math.pi))
        ratio_1mb = abs(1 - be.value) * math.sqrt(ellt / t) / (4 * c * math.sqrt(math.pi))
        ratio_ap = abs(ae.first_derivative) * math.sqrt(t**3 / ellt) * 8 * c * math.sqrt(math.pi)
        rows.append((t, be.value.real, be.value.imag, abs(be.first_derivative),
                     abs(be.second_derivative), ratio_bp, ratio_1mb, ratio_ap))
    _write_csv(out / "fourier.csv",
               ["t", "re_b", "im_b", "abs_bprime", "abs_bsecond",
                "ratio_bprime", "ratio_one_minus_b", "ratio_aprime"], rows)
    _write_json(out / "fourier.json", {
        "kind": "fourier", "c": c, "ell": format_ell(ell),
        "grid": list(_FOURIER_GRID), "pass": True,
    })
    return 0


def _run_check(cfg, out, threads):
    model = parse_process(cfg.process)
    ell = parse_ell(cfg.ell)
    N = cfg.N or 2000
    v = conditions.cond_norm_seq(model, N)
    base, strong = conditions.mw_series(v, ell, inputs=format_process(model))
    rows = list(zip(base.ns.astype(int), v.values, base.partial_sums, strong.partial_sums))
    _write_csv(out / "check.csv", ["n", "v_n", "partial_mw2", "partial_zw5"], rows)

    def rep_json(r):
        return {
            "condition": r.condition,
            "verdict": r.verdict,
            "total": r.total,
            "tail_exponent": r.tail_exponent,
            "certified_tail_bound": r.certified_tail_bound,
            "partial_sums_tail": [float(x) for x in r.partial_sums[-5:]],
            "tail_model": (None if r.tail_exponent is None
                           else f"power-law exponent {r.tail_exponent:.4f}"),
            "notes": list(r.notes),
        }

    ok = strong.verdict in (conditions.CONVERGES_CERTIFIED, conditions.CONVERGES_EXTRAPOLATED)
    _write_json(out / "check.json", {
        "kind": "check",
        "process": format_process(model),
        "ell": format_ell(ell),
        "N": N,
        "reports": [rep_json(base), rep_json(strong)],
        "pass": bool(ok),
    })
    return 0 if ok else 1


def _run_decompose(cfg, out, threads):
    model = parse_process(cfg.process)
    N = cfg.N or 100_000
    eps = martingale.epsilon_for(N)
    path = sample_path(model, N, cfg.seed)
    dec = martingale.decompose(path, model, eps)
    resid = np.abs(dec.S - dec.M - dec.R)
    stride = max(1, N // 10_000)
    idx = np.unique(np.concatenate([np.arange(0, N, stride), [N - 1]]))
    rows = [(int(i + 1), dec.S[i], dec.M[i], dec.R[i], resid[i]) for i in idx]
    _write_csv(out / "decompose.csv", ["n", "S_n", "M_n", "R_n", "residual"], rows)
    rate = martingale.sigma2(model, "variance_rate", n=min(N, 4096), reps=2048, seed=cfg.seed)
    inc = martingale.sigma2(model, "increment", n=min(N, 4096), reps=64, seed=cfg.seed)
    ok = dec.max_identity_residual <= 1e-9
    _write_json(out / "decompose.json", {
        "kind": "decompose",
        "process": format_process(model),
        "N": N,
        "epsilon": eps,
        "max_identity_residual": dec.max_identity_residual,
        "sigma2_rate": rate.value,
        "sigma2_inc": inc.value,
        "errors": {"rate_stderr": rate.stderr, "inc_stderr": inc.stderr,
                   "resolvent_residual": dec.resolvent_residual},
        "pass": bool(ok),
    })
    return 0 if ok else 1


def _run_lil(cfg, out, threads):
    model = parse_process(cfg.process)
    if cfg.N is None or cfg.reps is None:
        raise ValueError("lil needs N and reps")
    sigma = _sigma_ref(cfg, model)
    rep = experiments.run_lil(model, cfg.N, cfg.reps, cfg.seed, sigma,
                              window=cfg.window, threads=threads,
                              model_name=format_process(model))
    rows = [(r, rep.peaks[r], int(rep.peak_pos[r]), rep.terminal[r], rep.normalized[r])
            for r in range(cfg.reps)]
    _write_csv(out / "lil.csv", ["rep", "peak", "peak_pos", "terminal", "normalized"], rows)
    _write_json(out / "lil.json", {
        "kind": "lil",
        "process": format_process(model),
        "N": cfg.N, "reps": cfg.reps, "seed": cfg.seed,
        "sigma_ref": rep.sigma_ref,
        "median": rep.median, "q10": rep.q10, "q90": rep.q90,
        "window": None if rep.window is None else list(rep.window),
        "pass": True if rep.passed is None else bool(rep.passed),
    })
    return 0 if (rep.passed is None or rep.passed) else 1


def _run_flil(cfg, out, threads):
    model = parse_process(cfg.process)
    if cfg.n_ladder is None or cfg.reps is None:
        raise ValueError("flil needs n_ladder and reps")
    sigma = _sigma_ref(cfg, model)
    rep = experiments.run_flil(model, cfg.n_ladder, cfg.reps, cfg.seed, sigma,
                               threads=threads, model_name=format_process(model))
    rows = []
    for r in range(cfg.reps):
        for j, N in enumerate(rep.N_list):
            rows.append((r, N, rep.endpoint[r, j], rep.integral[r, j], rep.supremum[r, j]))
    _write_csv(out / "flil.csv", ["rep", "N", "endpoint", "integral", "supremum"], rows)
    cap = 1.15 * sigma
    cap_int = 1.15 * sigma / math.sqrt(3.0)
    attain = 0.75 * sigma
    ok = (float(rep.endpoint.max(initial=-math.inf)) <= cap
          and float(rep.integral.max(initial=-math.inf)) <= cap_int
          and rep.pooled_endpoint_max >= attain)
    _write_json(out / "flil.json", {
        "kind": "flil",
        "process": format_process(model),
        "n_ladder": list(rep.N_list), "reps": cfg.reps, "seed": cfg.seed,
        "sigma_ref": sigma,
        "targets": rep.targets,
        "max_endpoint": float(rep.endpoint.max()),
        "max_integral": float(rep.integral.max()),
        "max_supremum": float(rep.supremum.max()),
        "pooled_endpoint_max": rep.pooled_endpoint_max,
        "window": [attain, cap],
        "median": float(np.median(rep.endpoint[:, -1])),
        "q10": float(np.quantile(rep.endpoint[:, -1], 0.1)),
        "q90": float(np.quantile(rep.endpoint[:, -1], 0.9)),
        "pass": bool(ok),
    })
    return 0 if ok else 1


def _run_cclt(cfg, out, threads):
    model = parse_process(cfg.process)
    if cfg.N is None or cfg.reps is None:
        raise ValueError("cclt needs N and reps")
    sigma = _sigma_ref(cfg, model)
    start = cfg.start
    if start is not None and start not in ("each",):
        start = int(start) if isinstance(model, FiniteMarkovChain) else float(start)
    rep = experiments.run_cclt(model, start, cfg.N, cfg.reps, cfg.seed, sigma,
                               threads=threads, model_name=format_process(model))
    rows = []
    for si, st in enumerate(rep.starts):
        for r, z in enumerate(rep.samples[si]):
            rows.append((str(st), r, z))
    _write_csv(out / "cclt.csv", ["start", "rep", "z"], rows)
    ks_cap = cfg.window[1] if cfg.window is not None else rep.ks_null_99
    ok = bool(np.all(rep.ks <= ks_cap))
    _write_json(out / "cclt.json", {
        "kind": "cclt",
        "process": format_process(model),
        "n": cfg.N, "reps": cfg.reps, "seed": cfg.seed,
        "sigma_ref": sigma,
        "starts": [str(s) for s in rep.starts],
        "ks": [float(k) for k in rep.ks],
        "ks_cap": float(ks_cap),
        "ks_null_99": rep.ks_null_99,
        "pass": ok,
    })
    return 0 if ok else 1


def _run_remainder(cfg, out, threads):
    model = parse_process(cfg.process)
    if cfg.n_ladder is None or cfg.reps is None:
        raise ValueError("remainder needs n_ladder and reps")
    rep = experiments.remainder_growth(model, cfg.n_ladder, cfg.reps, cfg.seed,
                                       threads=threads, model_name=format_process(model))
    rows = []
    for r in range(cfg.reps):
        for j, N in enumerate(rep.N_ladder):
            lim = rep.limit_stats[r, j] if rep.limit_stats is not None else ""
            rows.append((r, N, rep.stats[r, j], lim))
    _write_csv(out / "remainder.csv", ["rep", "N", "stat", "limit_stat"], rows)
    ok = bool(rep.medians[-1] < rep.medians[0])
    _write_json(out / "remainder.json", {
        "kind": "remainder",
        "process": format_process(model),
        "n_ladder": list(rep.N_ladder), "reps": cfg.reps, "seed": cfg.seed,
        "medians": [float(m) for m in rep.medians],
        "limit_medians": (None if rep.limit_medians is None
                          else [float(m) for m in rep.limit_medians]),
        "pass": ok,
    })
    return 0 if ok else 1


_RUNNERS = {
    "coeffs": _run_coeffs,
    "fourier": _run_fourier,
    "check": _run_check,
    "decompose": _run_decompose,
    "lil": _run_lil,
    "flil": _run_flil,
    "cclt": _run_cclt,
    "remainder": _run_remainder,
}


def run(subcommand: str, cfg: ExperimentConfig, out_dir=None, threads: int = 1) -> int:
    """Dispatch one subcommand; returns the process exit code."""
    if subcommand not in _RUNNERS:
        raise ValueError(f"unknown subcommand {subcommand!r}")
    out = Path(out_dir if out_dir is not None else (cfg.out or "."))
    out.mkdir(parents=True, exist_ok=True)
    return _RUNNERS[subcommand](cfg, out, threads)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="iterlog",
        description="Martingale-approximation experiments for stationary processes",
    )
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", required=True, help="experiment config file")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker count (affects speed only, never results)")
    args = parser.parse_args(argv)
    try:
        cfg = parse_config(Path(args.config).read_text(encoding="utf-8"))
    except ConfigError as e:
        for err in e.errors:
            print(f"config error: {err}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"cannot read config: {e}", file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    try:
        return run(args.subcommand, cfg, args.out, args.threads)
    except (ValueError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
