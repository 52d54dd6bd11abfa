"""Monte-Carlo orchestration: per-drop pipeline, parallel sweep, aggregation, output.

Random streams are derived from the master seed with ``SeedSequence`` spawn
keys, so every drop is reproducible on its own and results do not depend on
how drops are distributed over workers:

* ``(drop, attempt)`` drives placement, LOS states and shadowing. It does not
  depend on N, so antenna sweeps see the same layouts.
* ``(drop, attempt, N)`` drives fading, CSI errors, symbols and scheduling.
"""

import json
import logging
import multiprocessing
import os
import platform
import tempfile
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .channel import (build_channels, draw_large_scale, make_link_gain_sampler,
                      make_mean_gain_model)
from .config import SimConfig, config_hash
from .errors import AllocationError, OutputError, PlacementError, SimulationError
from .lbt import conventional_lbt, enhanced_lbt, wifi_defer
from .metrics import (DropMetrics, SectorPlan, build_cdf, cell_rate, lbt_airtime_split,
                      sinr_terms, wifi_interference_matrix)
from .spatial import (allocate_dof_fixed_k, allocate_dof_threshold, baseline_zf_precoders,
                      compute_precoders, estimate_covariance, schedule_ues, simulate_silence)
from .topology import AP, build_grid, drop_nodes
from .units import dbm2w, thermal_noise_w, w2dbm

log = logging.getLogger(__name__)

MMIMO_U = "mmimo-u"
LBT = "lbt"
RATE_SCHEMES = {MMIMO_U: (MMIMO_U,), LBT: ("lbt-case1", "lbt-case2")}
POWER_FLOOR_W = 1e-30
CDF_GRID = np.round(np.arange(1, 1001) / 1000.0, 3)

REFERENCE_VALUES = {
    "fig2_lbt_defer_fraction": 0.21,
    "fig2_lbt_median_dbm_floor": -72.0,
    "fig3_lbt_above_threshold_n32": 0.96,
    "fig4_mmimo_u_wifi_mbps": 130.0,
    "fig4_mmimo_u_cell_mbps": {"32": 275.0, "64": 400.0, "112": 500.0},
    "fig4_lbt_best_aggregate_mbps": 314.0,
    "fig4_mmimo_u_aggregate_mbps_n128": 660.0,
}


def layout_seed(seed: int, drop: int, attempt: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(seed, spawn_key=(drop, attempt))


def fading_seed(seed: int, drop: int, attempt: int, n_antennas: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(seed, spawn_key=(drop, attempt, n_antennas))


def place_drop(cfg: SimConfig, grid, drop: int, n_antennas: int = 1):
    """Node layout for ``drop``, redrawing on placement failure.

    Returns ``(nodes, attempt, layout_rng)``; the generator is positioned
    right after placement so large-scale draws can continue from it.
    """
    for attempt in range(cfg.run.max_resamples + 1):
        rng = np.random.default_rng(layout_seed(cfg.run.seed, drop, attempt))
        if cfg.scenario.association == "realized":
            model = make_link_gain_sampler(cfg, rng)
        else:
            model = make_mean_gain_model(cfg)
        try:
            nodes = drop_nodes(grid, rng, cfg.scenario, model, n_antennas)
        except PlacementError as exc:
            log.warning("drop %d attempt %d: %s", drop, attempt, exc)
            continue
        return nodes, attempt, rng
    raise PlacementError(f"drop {drop}: placement failed {cfg.run.max_resamples + 1} times")


def _to_dbm(p_w):
    return w2dbm(np.maximum(p_w, POWER_FLOOR_W))


def _cluster_share(active, hotspot_of, n_hotspots):
    """Fraction of each hotspot's devices that hold the medium."""
    per = np.bincount(hotspot_of, minlength=n_hotspots)
    on = np.bincount(hotspot_of, weights=np.asarray(active, float), minlength=n_hotspots)
    return on / np.maximum(per, 1)


def _sector_sum(values, sector_of, n_sectors):
    return np.bincount(sector_of, weights=values, minlength=n_sectors)


def simulate_drop(cfg: SimConfig, n_antennas: int, drop: int, grid=None) -> DropMetrics:
    """Run both access schemes on one drop and collect everything the figures need."""
    return simulate_drop_sweep(cfg, (n_antennas,), drop, grid)[0]


def simulate_drop_sweep(cfg: SimConfig, antennas, drop: int, grid=None) -> List[DropMetrics]:
    """:func:`simulate_drop` for several antenna counts sharing one layout.

    Gives the same results as separate calls; the layout and large-scale
    state are simply computed once.
    """
    grid = grid or build_grid(cfg.scenario.inter_site_distance, cfg.scenario.rings)
    with threadpool_limits(limits=1):
        nodes, attempt, layout_rng = place_drop(cfg, grid, drop)
        large = draw_large_scale(nodes, grid, cfg, layout_rng)
        return [_simulate_drop(cfg, int(n), drop, grid, nodes, attempt, large)
                for n in antennas]


def _simulate_drop(cfg, N, drop, grid, nodes, attempt, large):
    rng = np.random.default_rng(fading_seed(cfg.run.seed, drop, attempt, N))
    ch = build_channels(nodes, grid, cfg, N, large, rng)

    radio, sp = cfg.radio, cfg.spatial
    n_bs, n_wifi = grid.n_sectors, nodes.n_wifi
    p_b = cfg.bs_power_w
    gamma_lbt = cfg.gamma_lbt_w
    noise_bs = thermal_noise_w(radio.bandwidth_hz, radio.bs_noise_figure_db,
                               radio.noise_density_dbm_hz)
    noise_ue = thermal_noise_w(radio.bandwidth_hz, radio.ue_noise_figure_db,
                               radio.noise_density_dbm_hz)
    sensitivity = float(dbm2w(radio.ue_sensitivity_dbm))
    p_wifi = np.where(nodes.wifi_role == AP, dbm2w(radio.ap_power_dbm),
                      dbm2w(radio.sta_power_dbm))
    wifi_sector = nodes.wifi_sector
    n_hot = len(nodes.hotspot_centers)
    hot_sector = nodes.hotspot_sector
    range_floor = noise_bs * 10 ** (sp.sensing_range_db / 10)
    talker = radio.wifi_single_talker

    out = DropMetrics(n_antennas=N, drop=drop, resampled=attempt)
    sensed = {MMIMO_U: np.zeros(n_bs), LBT: np.zeros(n_bs)}
    granted = {MMIMO_U: np.zeros(n_bs, bool), LBT: np.zeros(n_bs, bool)}
    plans = {MMIMO_U: {}, LBT: {}}
    k_cap = min(sp.max_scheduled or N, N)

    for b in range(n_bs):
        # Silent period: every in-range hotspot is on air.
        strong = ch.beta_g[b] * p_wifi >= range_floor
        hot_on = np.zeros(n_hot, bool)
        hot_on[nodes.wifi_hotspot[strong]] = True
        tx = np.flatnonzero(hot_on[nodes.wifi_hotspot])
        snap = simulate_silence(ch.g[b, tx], p_wifi[tx], sp.covariance_samples, noise_bs, rng,
                                groups=nodes.wifi_hotspot[tx] if talker else None)
        cov = estimate_covariance(snap)

        associated = nodes.ues_in_sector(b)
        sched = schedule_ues(associated, k_cap, rng) if associated.size else associated

        if sp.criterion == "fixed-k":
            K = sched.size
            D = allocate_dof_fixed_k(N, K, sp.c1) if K else int(np.floor(sp.c1 * N))
            sched_u = sched
        else:
            D, K = allocate_dof_threshold(cov.lambda_hat, cfg.gamma_w, sp.c2, N)
            sched_u = schedule_ues(sched, K, rng) if (K and sched.size) else sched[:0]

        dec_u = enhanced_lbt(snap.z_samples, cov.U_hat, D, gamma_lbt)
        dec_c = conventional_lbt(snap.z_samples, gamma_lbt)
        sensed[MMIMO_U][b], granted[MMIMO_U][b] = dec_u.sensed_power_w, dec_u.granted
        sensed[LBT][b], granted[LBT][b] = dec_c.sensed_power_w, dec_c.granted

        try:
            if sched_u.size:
                pre = compute_precoders(ch.h_hat[sched_u], cov.U_hat, D,
                                        sp.regularization_eps, sp.condition_cap)
                plans[MMIMO_U][b] = SectorPlan(sched_u, pre)
                out.regularized += pre.regularized
            if sched.size:
                pre = baseline_zf_precoders(ch.h_hat[sched], sp.regularization_eps,
                                            sp.condition_cap)
                plans[LBT][b] = SectorPlan(sched, pre)
                out.regularized += pre.regularized
        except AllocationError as exc:
            raise SimulationError(f"drop {drop}, BS {b}: {exc}") from exc

    for scheme in cfg.run.schemes:
        all_on = sorted(plans[scheme])
        contrib = wifi_interference_matrix(ch, plans[scheme], all_on, p_b)
        i_all = contrib.sum(axis=0)
        out.wifi_interference_dbm[scheme] = _to_dbm(i_all)
        out.wifi_defer[scheme] = wifi_defer(i_all, gamma_lbt)
        out.bs_sensed_dbm[scheme] = _to_dbm(sensed[scheme])
        out.bs_granted[scheme] = granted[scheme]

        if scheme == MMIMO_U:
            active = [b for b in all_on if granted[MMIMO_U][b]]
            i_act = contrib[active].sum(axis=0)
            wifi_on = ~wifi_defer(i_act, gamma_lbt)
            terms = sinr_terms(ch, plans[MMIMO_U], active,
                               p_wifi * cfg.wifi_activity * wifi_on, p_b, noise_ue)
            cell = np.zeros(n_bs)
            sinr_db = []
            for b, t in terms.items():
                r = cell_rate(t.sinr, radio.bandwidth_hz, t.signal, sensitivity)
                cell[b] = np.sum(r)
                sinr_db.append(10 * np.log10(np.maximum(t.sinr, 1e-30)))
            share = _cluster_share(wifi_on, nodes.wifi_hotspot, n_hot)
            wifi = _sector_sum(share * cfg.rates.wifi_cluster_rate_bps, hot_sector, n_bs)
            out.sector_cell_rate_bps[MMIMO_U] = cell
            out.sector_wifi_rate_bps[MMIMO_U] = wifi
            out.ue_sinr_db[MMIMO_U] = np.concatenate(sinr_db) if sinr_db else np.zeros(0)
        else:
            _lbt_rates(cfg, nodes, ch, plans[LBT], granted[LBT], contrib, p_wifi,
                       p_b, noise_ue, sensitivity, out)
    return out


def _lbt_rates(cfg, nodes, ch, plans, granted, contrib, p_wifi, p_b, noise_ue,
               sensitivity, out):
    """Rates under energy-detection LBT.

    A BS whose sensing succeeds transmits all the time. Otherwise it shares
    the medium equally with the Wi-Fi contenders of its sector (the two APs in
    case 1, all devices in case 2) and those devices are silent while it
    transmits. Inter-cell interference assumes every BS with UEs is on air.
    """
    radio = cfg.radio
    gamma_lbt = cfg.gamma_lbt_w
    n_bs = len(granted)
    n_hot = len(nodes.hotspot_centers)
    wifi_sector = nodes.wifi_sector
    all_on = sorted(plans)
    has_plan = np.zeros(n_bs, bool)
    has_plan[all_on] = True
    shares_bs = granted | ~has_plan

    i_all = contrib.sum(axis=0)
    i_others = i_all - contrib[wifi_sector, np.arange(nodes.n_wifi)]
    contending = ~shares_bs[wifi_sector]
    on_air = ~np.where(contending, wifi_defer(i_others, gamma_lbt), wifi_defer(i_all, gamma_lbt))

    # While a denied BS transmits, its own sector's devices are silent.
    base = p_wifi * cfg.wifi_activity * on_air
    wifi_pw = np.broadcast_to(base, (n_bs, nodes.n_wifi)).copy()
    for b in np.flatnonzero(~shares_bs):
        wifi_pw[b, wifi_sector == b] = 0.0
    terms = sinr_terms(ch, plans, all_on, wifi_pw, p_b, noise_ue)
    full_rate = np.zeros(n_bs)
    sinr_db = []
    for b, t in terms.items():
        full_rate[b] = np.sum(cell_rate(t.sinr, radio.bandwidth_hz, t.signal, sensitivity))
        sinr_db.append(10 * np.log10(np.maximum(t.sinr, 1e-30)))
    out.ue_sinr_db[LBT] = np.concatenate(sinr_db) if sinr_db else np.zeros(0)

    n_aps = np.bincount(wifi_sector[nodes.wifi_role == AP], minlength=n_bs)
    n_dev = np.bincount(wifi_sector, minlength=n_bs)
    cluster_on = _cluster_share(on_air, nodes.wifi_hotspot, n_hot)
    for name, contenders in (("lbt-case1", n_aps), ("lbt-case2", n_dev)):
        bs_share = np.where(shares_bs, 1.0,
                            np.array([lbt_airtime_split(int(n)) for n in contenders]))
        bs_share = np.where(has_plan, bs_share, 0.0)
        wifi_time = np.where(shares_bs, 1.0, 1.0 - bs_share)[nodes.hotspot_sector]
        out.sector_cell_rate_bps[name] = bs_share * full_rate
        out.sector_wifi_rate_bps[name] = _sector_sum(
            wifi_time * cluster_on * cfg.rates.wifi_cluster_rate_bps, nodes.hotspot_sector, n_bs)


# ---------------------------------------------------------------------------
# Sweep and aggregation


def _task(args):
    cfg, drop = args
    return simulate_drop_sweep(cfg, cfg.run.antennas, drop)


@dataclass
class RunManifest:
    config_hash: str
    seed: int
    drop_seeds: Dict[str, List[int]]
    software_version: str
    python: str
    numpy: str
    wall_clock_s: float
    started_at: str
    workers: int
    regularized_precoders: int
    resampled_drops: int


@dataclass
class RunResult:
    config: SimConfig
    drops: Dict[int, List[DropMetrics]] = field(default_factory=dict)
    manifest: RunManifest = None


def preflight_output(path) -> Path:
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
        with tempfile.NamedTemporaryFile(dir=path, prefix=".probe"):
            pass
    except OSError as exc:
        raise OutputError(f"output directory {path} is not writable: {exc}") from None
    return path


def run_experiment(cfg: SimConfig, workers: int = None, progress=None) -> RunResult:
    """Simulate every (N, drop) pair. Output is independent of ``workers``."""
    workers = workers or cfg.run.workers
    tasks = [(cfg, d) for d in range(cfg.run.drops)]
    started = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    t0 = time.perf_counter()
    per_drop = []
    if workers == 1:
        for t in tasks:
            per_drop.append(_task(t))
            if progress:
                progress(len(per_drop), len(tasks))
    else:
        ctx = multiprocessing.get_context("spawn")
        with ctx.Pool(workers) as pool:
            for r in pool.imap(_task, tasks, chunksize=1):
                per_drop.append(r)
                if progress:
                    progress(len(per_drop), len(tasks))
    results = [r for sweep in per_drop for r in sweep]
    res = RunResult(config=cfg)
    for n in cfg.run.antennas:
        res.drops[int(n)] = [r for r in results if r.n_antennas == int(n)]
    res.manifest = RunManifest(
        config_hash=config_hash(cfg),
        seed=cfg.run.seed,
        drop_seeds={str(n): [int(fading_seed(cfg.run.seed, r.drop, r.resampled, n)
                                 .generate_state(1, np.uint64)[0]) for r in res.drops[n]]
                    for n in res.drops},
        software_version=__version__,
        python=platform.python_version(),
        numpy=np.__version__,
        wall_clock_s=time.perf_counter() - t0,
        started_at=started,
        workers=workers,
        regularized_precoders=int(sum(r.regularized for r in results)),
        resampled_drops=int(sum(r.resampled > 0 for r in results)),
    )
    return res


def _stack(drops, attr, key):
    parts = [getattr(d, attr)[key] for d in drops if key in getattr(d, attr)]
    return np.concatenate(parts) if parts else np.zeros(0)


def summarize(result: RunResult) -> dict:
    cfg = result.config
    thr = cfg.lbt.gamma_lbt_dbm
    out = {"gamma_lbt_dbm": thr, "antennas": {}}
    for n, drops in sorted(result.drops.items()):
        entry = {"fig2": {}, "fig3": {}, "fig4": {}}
        for scheme in cfg.run.schemes:
            wi = _stack(drops, "wifi_interference_dbm", scheme)
            cdf = build_cdf(wi)
            entry["fig2"][scheme] = {
                "fraction_below_threshold": cdf.fraction_below(thr),
                "defer_fraction": float(np.mean(_stack(drops, "wifi_defer", scheme))),
                "median_dbm": cdf.median,
                "p99_dbm": float(np.quantile(wi, 0.99)),
                "samples": int(wi.size),
            }
            bs = _stack(drops, "bs_sensed_dbm", scheme)
            cdf = build_cdf(bs)
            entry["fig3"][scheme] = {
                "fraction_below_threshold": cdf.fraction_below(thr),
                "fraction_above_threshold": 1.0 - cdf.fraction_below(thr),
                "median_dbm": cdf.median,
                "grant_fraction": float(np.mean(_stack(drops, "bs_granted", scheme))),
                "samples": int(bs.size),
            }
            for name in RATE_SCHEMES[scheme]:
                cell = float(np.mean(_stack(drops, "sector_cell_rate_bps", name))) / 1e6
                wifi = float(np.mean(_stack(drops, "sector_wifi_rate_bps", name))) / 1e6
                sinr = _stack(drops, "ue_sinr_db", scheme)
                entry["fig4"][name] = {
                    "cellular_mbps": cell,
                    "wifi_mbps": wifi,
                    "aggregate_mbps": cell + wifi,
                    "median_ue_sinr_db": float(np.median(sinr)) if sinr.size else None,
                }
        out["antennas"][str(n)] = entry
    out["flags"] = {
        "regularized_precoders": result.manifest.regularized_precoders,
        "resampled_drops": result.manifest.resampled_drops,
    }
    out["reference_values"] = REFERENCE_VALUES
    return out


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _cdf_rows(result, attr):
    rows = []
    for n, drops in sorted(result.drops.items()):
        for scheme in result.config.run.schemes:
            q = build_cdf(_stack(drops, attr, scheme)).quantile(CDF_GRID)
            rows.extend(f"{scheme},{n},{float(p)!r},{float(v)!r}" for p, v in zip(CDF_GRID, q))
    return rows


def emit_results(result: RunResult, out_dir) -> Dict[str, Path]:
    """Write figure CSVs, ``summary.json`` and ``manifest.json``; returns their paths."""
    out_dir = preflight_output(out_dir)
    files = {}
    text = "scheme,n_antennas,probability,interference_dbm\n"
    text += "\n".join(_cdf_rows(result, "wifi_interference_dbm")) + "\n"
    files["fig2"] = out_dir / "fig2_wifi_interference_cdf.csv"
    _atomic_write(files["fig2"], text)

    text = "scheme,n_antennas,probability,sensed_dbm\n"
    text += "\n".join(_cdf_rows(result, "bs_sensed_dbm")) + "\n"
    files["fig3"] = out_dir / "fig3_bs_interference_cdf.csv"
    _atomic_write(files["fig3"], text)

    summary = summarize(result)
    lines = ["scheme,n_antennas,cellular_mbps,wifi_mbps,aggregate_mbps"]
    for n, entry in summary["antennas"].items():
        for name, r in entry["fig4"].items():
            lines.append(f"{name},{n},{r['cellular_mbps']!r},{r['wifi_mbps']!r},"
                         f"{r['aggregate_mbps']!r}")
    files["fig4"] = out_dir / "fig4_rates.csv"
    _atomic_write(files["fig4"], "\n".join(lines) + "\n")

    files["summary"] = out_dir / "summary.json"
    _atomic_write(files["summary"], json.dumps(summary, indent=2, sort_keys=True) + "\n")
    files["manifest"] = out_dir / "manifest.json"
    _atomic_write(files["manifest"], json.dumps(asdict(result.manifest), indent=2) + "\n")
    return files
