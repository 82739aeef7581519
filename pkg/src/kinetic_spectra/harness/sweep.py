"""Gamma sweeps over model families and convergence-rate fitting."""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ..blocks import BlockSpec, make_block
from ..grushin import IllConditionedError, effective_operator
from ..spectra import (
    SpectrumProximityError,
    Window,
    dense_eigvals,
    adaptive_kmax,
    match_spectra,
    resolvent_diff_norm,
)
from .config import SweepConfig, default_out_dir

logger = logging.getLogger(__name__)

CSV_COLUMNS = (
    "model", "parameter", "n", "gamma", "K_max", "target_mu",
    "lambda_re", "lambda_im", "abs_error", "resolvent_diff", "slope",
)
MONOTONE_SLACK = 1e-12


def fit_rate(gammas: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of ``log(error)`` against ``log(1/gamma)``."""
    g = np.asarray(gammas, dtype=float)
    e = np.asarray(errors, dtype=float)
    if len(g) != len(e):
        raise ValueError("gammas and errors differ in length")
    if len(g) < 3:
        raise ValueError(f"need at least 3 points to fit a rate, got {len(g)}")
    if np.any(g <= 0):
        raise ValueError("gammas must be positive")
    if not np.all(e > 0):
        raise ValueError("errors must be positive")
    slope, _ = np.polyfit(np.log(1.0 / g), np.log(e), 1)
    return float(slope)


def nonincreasing(values: Sequence[float], slack: float = MONOTONE_SLACK) -> bool:
    v = list(values)
    return all(np.isfinite(v)) and all(b <= a * (1 + 1e-9) + slack for a, b in zip(v, v[1:]))


def lambda_grid_2d(C0: float, points: int = 5) -> np.ndarray:
    t = np.linspace(-C0, C0, points)
    return (t[:, None] + 1j * t[None, :]).ravel()


def effective_error(block: BlockSpec, gamma: float, lams, K_max=None) -> float:
    """``max |effective_operator(lam) - (lam - mu)|`` over the given points."""
    return max(abs(effective_operator(block, gamma, z, K_max) - (z - block.mu)) for z in lams)


@dataclass
class SweepRow:
    model: str
    parameter: float
    n: int
    gamma: float
    K_max: int | None
    target_mu: float
    lambda_re: float
    lambda_im: float
    abs_error: float
    resolvent_diff: float
    eff_error: float
    window_eigs: list
    error: str | None = None


def _row_task(task) -> SweepRow:
    (geometry, param, n), gamma, window, C0, policy, K_fixed, lams = task
    block = make_block(geometry, param, n)
    nan = float("nan")
    row = SweepRow(block.geometry.value, block.parameter, n, gamma, None, block.mu, nan, nan, nan, nan, nan, [])
    try:
        if block.is_finite:
            K = None
        elif policy == "fixed":
            K = K_fixed
        else:
            K = adaptive_kmax(block, gamma, C0)
        row.K_max = K
        ev = dense_eigvals(block, gamma, K)
        near = complex(ev[np.argmin(np.abs(ev - block.mu))])
        row.lambda_re, row.lambda_im = near.real, near.imag
        row.abs_error = abs(near - block.mu)
        U = Window(*window)
        row.window_eigs = [[float(z.real), float(z.imag)] for z in sorted(ev[U.contains(ev)], key=lambda z: (z.real, z.imag))]
        diffs, notes = [], []
        for lam in lams:
            try:
                diffs.append(resolvent_diff_norm(block, gamma, lam, K, C0))
            except SpectrumProximityError as exc:
                logger.warning("%s", exc)
                notes.append(f"resolvent skipped: {exc}")
        row.resolvent_diff = max(diffs) if diffs else nan
        try:
            row.eff_error = float(effective_error(block, gamma, lambda_grid_2d(C0), K))
        except IllConditionedError as exc:
            notes.append(f"effective operator: {exc}")
        row.error = "; ".join(notes) or None
    except Exception as exc:  # solver failures are recorded, never fatal
        row.error = f"{type(exc).__name__}: {exc}"
    return row


@dataclass
class ConvergenceReport:
    rows: list[SweepRow]
    blocks: list[dict]
    families: list[dict]

    @property
    def passed(self) -> bool:
        return all(b["pass"] for b in self.blocks) and all(f["pass"] for f in self.families)

    def slope_of(self, model: str, parameter: float, n: int) -> float | None:
        for b in self.blocks:
            if (b["model"], b["parameter"], b["n"]) == (model, parameter, n):
                return b["slope"]
        return None

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for r in self.rows:
                slope = self.slope_of(r.model, r.parameter, r.n)
                w.writerow([
                    r.model, repr(r.parameter), r.n, repr(r.gamma), "" if r.K_max is None else r.K_max,
                    repr(r.target_mu), _fmt(r.lambda_re), _fmt(r.lambda_im), _fmt(r.abs_error),
                    _fmt(r.resolvent_diff), _fmt(slope),
                ])

    def to_json(self) -> dict:
        rows = []
        for r in self.rows:
            d = asdict(r)
            d.pop("window_eigs")
            rows.append({k: _json_num(v) for k, v in d.items()})
        return {"passed": self.passed, "blocks": _json_num(self.blocks), "families": _json_num(self.families), "rows": rows}


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and not math.isfinite(x)):
        return ""
    return repr(float(x))


def _json_num(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _json_num(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_num(v) for v in obj]
    return obj


def _safe_slope(gammas, errors):
    try:
        return fit_rate(gammas, errors)
    except ValueError:
        return None


def run_sweep(config: SweepConfig, out_dir=None, jobs: int = 1, write: bool = True) -> ConvergenceReport:
    """Run every (block, gamma) task of ``config`` and summarize convergence.

    Writes a CSV row per (model, parameter, gamma) and a JSON summary to
    ``out_dir`` (default from the environment). Aggregation is order-stable,
    so results do not depend on ``jobs``.
    """
    keys = []
    for fam in config.families:
        for b in fam.blocks():
            key = (b.geometry.value, b.parameter, b.n)
            if key not in keys:
                keys.append(key)
    tasks = [
        (key, g, tuple(config.window.as_list()), config.C0, config.kmax_policy, config.K_max, config.lambda_grid)
        for key in keys
        for g in config.gamma_grid
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_row_task, tasks))
    else:
        rows = [_row_task(t) for t in tasks]

    tol = config.tolerances
    gammas = list(config.gamma_grid)
    by_key: dict[tuple, list[SweepRow]] = {}
    for r in rows:
        by_key.setdefault((r.model, r.parameter, r.n), []).append(r)

    blocks = []
    for key, rs in by_key.items():
        err = [r.abs_error for r in rs]
        res = [r.resolvent_diff for r in rs]
        eff = [r.eff_error for r in rs]
        slope = _safe_slope(gammas, err)
        summary = {
            "model": key[0], "parameter": key[1], "n": key[2], "mu": rs[0].target_mu,
            "slope": slope, "eff_slope": _safe_slope(gammas, eff),
            "final_error": err[-1], "final_resolvent_diff": res[-1],
            "error_monotone": nonincreasing(err), "resolvent_monotone": nonincreasing(res),
            "errors": [r.error for r in rs if r.error],
        }
        summary["pass"] = bool(
            summary["error_monotone"]
            and err[-1] <= tol["final_error"]
            and summary["resolvent_monotone"]
            and res[-1] <= tol["resolvent"]
        )
        blocks.append(summary)

    families = []
    for fam in config.families:
        per_gamma = []
        for gi, g in enumerate(config.gamma_grid):
            eigs, targets = [], []
            for b in fam.blocks():
                r = by_key[(b.geometry.value, b.parameter, b.n)][gi]
                mult = fam.multiplicity(b)
                eigs += [complex(re, im) for re, im in r.window_eigs] * mult
                targets += [b.mu] * mult
            m = match_spectra(eigs, targets, config.window)
            per_gamma.append({
                "gamma": g,
                "max_matched_distance": m.max_matched_distance,
                "n_pairs": len(m.pairs),
                "unmatched_computed": len(m.unmatched_computed),
                "unmatched_target": len(m.unmatched_target),
            })
        dists = [p["max_matched_distance"] for p in per_gamma]
        last = per_gamma[-1]
        families.append({
            "geometry": fam.geometry.value, "n": fam.n, "parameters": list(fam.parameters),
            "per_gamma": per_gamma,
            "monotone": nonincreasing(dists),
            "pass": bool(nonincreasing(dists) and last["unmatched_target"] == 0 and last["max_matched_distance"] <= tol["match"]),
        })

    report = ConvergenceReport(rows, blocks, families)
    if write:
        out = Path(out_dir) if out_dir is not None else default_out_dir()
        out.mkdir(parents=True, exist_ok=True)
        report.write_csv(out / config.outputs["csv"])
        summary = {"config": config.to_dict(), **report.to_json()}
        (out / config.outputs["json"]).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return report
