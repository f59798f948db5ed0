"""Sweep orchestration: run the full chain over frame lengths, schemes and
scenario parameters, and emit machine-readable CSV results.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

import numpy as np

from .compensation import SCHEMES, build_plan, monte_carlo_delta
from .config import ConfigError, SystemParams
from .rate import per_position_rates, spectral_efficiency


@dataclass(frozen=True)
class SweepSpec:
    f_values: tuple
    schemes: tuple = ("kalman", "direct", "ap1_only")
    snr_ap_db: tuple = (-15.0,)
    c_nu_values: tuple = (5e-18,)
    n_realizations: int = 1000
    master_seed: int = 1
    n_workers: int = 1

    def __post_init__(self):
        if not self.f_values:
            raise ConfigError("f_values must be nonempty")
        if self.n_realizations < 1:
            raise ConfigError("n_realizations must be >= 1")
        bad = [s for s in self.schemes if s not in SCHEMES]
        if bad:
            raise ConfigError(f"unknown scheme(s) {bad}; expected subset of {SCHEMES}")


DEFAULT_SWEEP = SweepSpec(f_values=(1, 2, 3), n_realizations=500)


def fig2_sweep(n_realizations: int = 10_000, master_seed: int = 1,
               n_workers: int = 1) -> SweepSpec:
    """Frame-length sweep for the better oscillator (c_nu = 5e-18) at
    inter-array SNRs of -15 and -20 dB, all three schemes."""
    return SweepSpec(f_values=tuple(range(1, 11)), schemes=SCHEMES,
                     snr_ap_db=(-15.0, -20.0), c_nu_values=(5e-18,),
                     n_realizations=n_realizations, master_seed=master_seed,
                     n_workers=n_workers)


def fig3_sweep(n_realizations: int = 10_000, master_seed: int = 1,
               n_workers: int = 1) -> SweepSpec:
    """Same sweep with the lower-quality oscillator (c_nu = 1.58e-17)."""
    return replace(fig2_sweep(n_realizations, master_seed, n_workers),
                   c_nu_values=(1.58e-17,))


_SWEEP_KEYS = {
    "f_values": lambda raw: tuple(int(x) for x in raw.split(",")),
    "schemes": lambda raw: tuple(s.strip() for s in raw.split(",")),
    "snr_ap_db": lambda raw: tuple(float(x) for x in raw.split(",")),
    "c_nu_values": lambda raw: tuple(float(x) for x in raw.split(",")),
    "n_realizations": int,
    "master_seed": int,
    "n_workers": int,
}


def parse_sweep(text: str) -> SweepSpec:
    """Flat key=value sweep document, comma-separated lists."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _SWEEP_KEYS:
            raise ConfigError(f"line {lineno}: unknown sweep key '{key}'")
        try:
            values[key] = _SWEEP_KEYS[key](raw)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: malformed value for '{key}': {raw!r}") from exc
    if "f_values" not in values:
        raise ConfigError("sweep must define f_values")
    return SweepSpec(**values)


@dataclass(frozen=True)
class ResultRow:
    scheme: str
    frame_len: int
    snr_ap_db: float        # NaN for the SNR-independent ap1_only baseline
    c_nu: float
    se_mean: float
    se_stderr: float
    n_realizations: int
    wall_time_s: float


def cell_seed(master_seed: int, i_cnu: int, i_snr: int, frame_len: int) -> int:
    """Per-cell RNG seed; deliberately excludes the scheme so that scheme
    comparisons within a cell share their random draws."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(i_cnu, i_snr, frame_len))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def run_cell(params: SystemParams, scheme: str, n_realizations: int, seed: int,
             n_workers: int = 1):
    """One sweep cell: Delta statistics -> rate table -> average per-UE SE.

    Returns (se_mean, se_stderr); the stderr comes from batch means over the
    run groups."""
    plan = build_plan(params, scheme)
    stats = monte_carlo_delta(params, scheme, n_realizations, seed,
                              n_workers=n_workers)
    rates = per_position_rates(params, plan, stats)
    se = float(np.mean([spectral_efficiency(k, plan, rates)
                        for k in range(1, params.n_ues + 1)]))
    live = stats.group_counts > 0
    se_groups = []
    for g in np.nonzero(live)[0]:
        g_rates = per_position_rates(params, plan, stats,
                                     mean_delta=stats.group_means[g])
        se_groups.append(np.mean([spectral_efficiency(k, plan, g_rates)
                                  for k in range(1, params.n_ues + 1)]))
    if len(se_groups) > 1:
        stderr = float(np.std(se_groups, ddof=1) / math.sqrt(len(se_groups)))
    else:
        stderr = float("nan")
    return se, stderr


def run_sweep(spec: SweepSpec, params: SystemParams):
    """Evaluate every (c_nu, SNR, scheme, F) cell; deterministic for a fixed
    (master_seed, n_workers) and row order fixed by the loop nesting.

    ap1_only does not depend on the inter-array SNR, so it is evaluated once
    per (c_nu, F) and reported with snr_ap_db = NaN.
    """
    rows = []
    for i_cnu, c_nu in enumerate(spec.c_nu_values):
        for i_snr, snr_db in enumerate(spec.snr_ap_db):
            for scheme in spec.schemes:
                if scheme == "ap1_only" and i_snr > 0:
                    continue
                for F in spec.f_values:
                    cell = replace(params, frame_len=int(F), c_nu=float(c_nu))
                    cell = cell.with_snr_ap_db(float(snr_db))
                    seed = cell_seed(spec.master_seed, i_cnu, i_snr, int(F))
                    t0 = time.perf_counter()
                    se, stderr = run_cell(cell, scheme, spec.n_realizations, seed,
                                          n_workers=spec.n_workers)
                    rows.append(ResultRow(
                        scheme=scheme, frame_len=int(F),
                        snr_ap_db=float("nan") if scheme == "ap1_only" else float(snr_db),
                        c_nu=float(c_nu), se_mean=se, se_stderr=stderr,
                        n_realizations=spec.n_realizations,
                        wall_time_s=time.perf_counter() - t0))
    return rows


CSV_COLUMNS = ("scheme", "frame_len", "snr_ap_db", "c_nu", "se_mean", "se_stderr",
               "n_realizations", "wall_time_s")


def _fmt(value) -> str:
    if isinstance(value, float):
        return "%.6g" % value
    return str(value)


def emit_csv(rows) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for r in rows:
        lines.append(",".join(_fmt(getattr(r, c)) for c in CSV_COLUMNS))
    return "\n".join(lines) + "\n"


def parse_result_csv(text: str):
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != ",".join(CSV_COLUMNS):
        raise ConfigError("unrecognized results header")
    rows = []
    for ln in lines[1:]:
        f = ln.split(",")
        rows.append(ResultRow(scheme=f[0], frame_len=int(f[1]), snr_ap_db=float(f[2]),
                              c_nu=float(f[3]), se_mean=float(f[4]), se_stderr=float(f[5]),
                              n_realizations=int(f[6]), wall_time_s=float(f[7])))
    return rows
