"""Command-line front end: rate tables, link and chain simulations, tomography.

Exit codes: 0 success, 2 configuration error, 3 statistically unresolved.
"""
import argparse
import csv
import dataclasses
import io
import json
import math
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import network as nw
from . import tomography as tm
from .config import ConfigError, ExperimentConfig, load_config
from .optics import DetectorModel, FiberChannel, link_success_probability, transmission_probability
from .sources import ideal_spin_photon_pure
from .states import fidelity_pure_target

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_UNRESOLVED = 3

RATE_COLUMNS = ("L_per_arm_km", "p_arm", "p_success", "rate_Hz", "seconds_per_pair")


def _clean(x):
    """JSON-safe copy: tuples to lists, non-finite floats to strings."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.generic):
        x = x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return x


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def _config_comment(cfg: ExperimentConfig) -> str:
    return "".join(f"# {line}\n" for line in cfg.to_ini().splitlines() if line)


def _require_seed(cfg: ExperimentConfig) -> int:
    if cfg.run.master_seed is None:
        raise ConfigError("run.master_seed (or --seed) is required for stochastic runs")
    return cfg.run.master_seed


def _replica_seeds(seed: int, n: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(n)


def _map(fn, jobs, workers: int):
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, jobs))
    return [fn(j) for j in jobs]


# ---------------------------------------------------------------------------
# rate table


def rate_table_rows(cfg: ExperimentConfig) -> list[dict]:
    rt = cfg.rate_table
    if rt.alpha_db_per_km is None:
        raise ConfigError("rate_table.alpha_db_per_km is required")
    if rt.r0_hz <= 0:
        raise ConfigError("rate_table.r0_hz must be positive")
    det = DetectorModel(efficiency=rt.detector_efficiency)
    rows = []
    for L in rt.lengths_per_arm_km:
        p_arm = transmission_probability(L, rt.alpha_db_per_km)
        p = link_success_probability(2 * L, rt.alpha_db_per_km, det)
        rate = rt.r0_hz * p
        rows.append({
            "L_per_arm_km": L,
            "p_arm": p_arm,
            "p_success": p,
            "rate_Hz": rate,
            "seconds_per_pair": 1.0 / rate if rate > 0 else math.inf,
        })
    return rows


def run_rate_table(cfg: ExperimentConfig) -> tuple[str, int]:
    rows = rate_table_rows(cfg)
    if cfg.run.format == "json":
        return dumps({"command": "rate-table", "config": cfg.to_dict(), "rows": rows}), EXIT_OK
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=RATE_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: repr(float(v)) for k, v in r.items()})
    return _config_comment(cfg) + buf.getvalue(), EXIT_OK


# ---------------------------------------------------------------------------
# simulations


def build_link(cfg: ExperimentConfig) -> nw.LinkSpec:
    lk = cfg.link
    try:
        return nw.LinkSpec(
            channel=FiberChannel(lk.length_km, lk.alpha_db_per_km, lk.n_core),
            source_rate=lk.source_rate_hz,
            detectors=DetectorModel(lk.detector_efficiency, lk.dark_count_prob),
            p_success=lk.p_success,
        )
    except ValueError as exc:
        raise ConfigError(f"[link]: {exc}") from None


def build_node(cfg: ExperimentConfig) -> nw.NodeSpec:
    m = cfg.memory
    try:
        return nw.NodeSpec(
            memory_t2=m.t2_us * 1e-6,
            memory_t1=m.t1_us * 1e-6,
            local_op_time=m.local_op_us * 1e-6,
            swap_depolarizing=m.swap_depolarizing,
        )
    except ValueError as exc:
        raise ConfigError(f"[memory]: {exc}") from None


def budget_warnings(cfg: ExperimentConfig, link: nw.LinkSpec) -> list[str]:
    t2 = cfg.memory.t2_us * 1e-6
    if not math.isfinite(t2):
        return []
    b = nw.check_coherence_budget(cfg.link.length_km, cfg.link.n_core, t2, link.period, link.success_probability)
    out = []
    if not b.propagation_ok:
        out.append(f"memory T2 {t2:.3g} s is shorter than the herald round trip {b.propagation_time:.3g} s")
    if not b.rate_ok:
        out.append(f"memory T2 {t2:.3g} s is shorter than the mean wait {b.required_t2:.3g} s for a heralded link")
    return out


def _two_link_job(args):
    link, node, seed, max_time, memoryless, track = args
    rng = np.random.default_rng(seed)
    return nw.simulate_two_link_protocol([link, link], [node] * 3, rng, max_time, memoryless, track)


def _chain_job(args):
    chain_cfg, seed, rounds, track, events = args
    rng = np.random.default_rng(seed)
    return nw.simulate_chain(chain_cfg, rng, rounds, track, events)


def aggregate_stats(parts: list[nw.SimulationStats]) -> dict:
    """Combine replica statistics; independent of the order of ``parts``."""
    deliveries = sum(p.deliveries for p in parts)
    elapsed = math.fsum(p.elapsed for p in parts)
    out = {
        "replicas": len(parts),
        "deliveries": deliveries,
        "elapsed_s": elapsed,
        "rounds": elapsed / parts[0].period,
        "rate_hz": deliveries / elapsed if elapsed > 0 else 0.0,
        "unresolved": any(p.unresolved for p in parts),
        "notes": sorted({n for p in parts for n in p.notes}),
    }
    for name in ("fidelity", "latency"):
        w = [(p.deliveries, getattr(p, f"mean_{name}"), getattr(p, f"std_{name}")) for p in parts]
        w = [x for x in w if x[0] > 0 and math.isfinite(x[1])]
        if w:
            n = sum(x[0] for x in w)
            mean = math.fsum(k * m for k, m, _ in w) / n
            second = math.fsum(k * (s * s + m * m) for k, m, s in w) / n
            out[f"mean_{name}"] = mean
            out[f"std_{name}"] = math.sqrt(max(second - mean * mean, 0.0))
    return out


def _sim_output(cfg, command, stats, theory, warns, fmt) -> str:
    if fmt == "json":
        return dumps({"command": command, "config": cfg.to_dict(), "warnings": warns, "result": stats, "theory": theory})
    flat = {**{f"result.{k}": v for k, v in stats.items() if k != "notes"}, **{f"theory.{k}": v for k, v in theory.items()}}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["quantity", "value"])
    for k in sorted(flat):
        w.writerow([k, _clean(flat[k])])
    head = _config_comment(cfg) + "".join(f"# warning: {x}\n" for x in warns)
    return head + buf.getvalue()


def _split_rounds(total: int, replicas: int) -> list[int]:
    base, extra = divmod(total, replicas)
    return [base + (1 if i < extra else 0) for i in range(replicas)]


def run_link_sim(cfg: ExperimentConfig) -> tuple[str, int]:
    seed = _require_seed(cfg)
    link = build_link(cfg)
    node = build_node(cfg)
    warns = budget_warnings(cfg, link)
    tl = cfg.two_link
    if tl.max_rounds < cfg.run.replicas:
        raise ConfigError("two_link.max_rounds must be at least run.replicas")
    seeds = _replica_seeds(seed, cfg.run.replicas)
    jobs = [(link, node, s, r * link.period, tl.memoryless, tl.track_fidelity)
            for s, r in zip(seeds, _split_rounds(tl.max_rounds, cfg.run.replicas))]
    stats = aggregate_stats(_map(_two_link_job, jobs, cfg.run.workers))
    p = link.success_probability
    r0 = 1.0 / link.period
    if tl.memoryless:
        theory = {"rate_hz": r0 * p * p, "law": "R0 p^2"}
    else:
        theory = {"rate_hz": r0 / nw.expected_max_geometric(p, 2), "two_thirds_law_hz": 0.67 * r0 * p}
    stats["ratio_to_theory"] = stats["rate_hz"] / theory["rate_hz"]
    theory["ignores_signal_delay"] = link.signal_delay > 0
    code = EXIT_UNRESOLVED if stats["unresolved"] or stats["deliveries"] < cfg.run.min_deliveries else EXIT_OK
    return _sim_output(cfg, "link-sim", stats, theory, warns, cfg.run.format), code


def run_chain_sim(cfg: ExperimentConfig, events_path: str | None = None) -> tuple[str, int]:
    seed = _require_seed(cfg)
    link = build_link(cfg)
    node = build_node(cfg)
    warns = budget_warnings(cfg, link)
    ch = cfg.chain
    if ch.max_rounds < cfg.run.replicas:
        raise ConfigError("chain.max_rounds must be at least run.replicas")
    chain_cfg = nw.ChainConfig.uniform(ch.n_nodes, link, node, heralded=ch.heralded, protocol=nw.ChainProtocol(ch.protocol))
    seeds = _replica_seeds(seed, cfg.run.replicas)
    jobs = [(chain_cfg, s, r, ch.track_fidelity, events_path is not None and i == 0)
            for i, (s, r) in enumerate(zip(seeds, _split_rounds(ch.max_rounds, cfg.run.replicas)))]
    parts = _map(_chain_job, jobs, cfg.run.workers)
    stats = aggregate_stats(parts)
    p = link.success_probability
    r0 = 1.0 / link.period
    m = ch.n_nodes - 1
    if chain_cfg.holds_pairs:
        theory = {"rate_hz": r0 / nw.expected_max_geometric(p, m), "log_law_hz": r0 * p / math.log(ch.n_nodes) if ch.n_nodes > 2 else r0 * p}
    else:
        theory = {"rate_hz": r0 * p**m}
        if not ch.heralded:
            theory["output_fidelity"] = nw.unheralded_output(p**m, link.pair_kind).fidelity()
    stats["ratio_to_theory"] = stats["rate_hz"] / theory["rate_hz"]
    if events_path is not None:
        log = nw.EventLog()
        log.events = parts[0].events or []
        Path(events_path).write_text(log.to_jsonl(), encoding="utf-8")
    code = EXIT_UNRESOLVED if stats["unresolved"] or stats["deliveries"] < cfg.run.min_deliveries else EXIT_OK
    return _sim_output(cfg, "chain-sim", stats, theory, warns, cfg.run.format), code


# ---------------------------------------------------------------------------
# tomography


def tomography_preset(cfg: ExperimentConfig) -> tm.TomographyPreset:
    t = cfg.tomography
    base = tm.IDEAL_PRESET if t.preset == "ideal" else tm.EXPERIMENT_LIKE_PRESET
    kw = {}
    if t.depolarizing_prob is not None:
        kw["depolarizing_prob"] = t.depolarizing_prob
    if t.detection_window_ps is not None:
        kw["detection_window"] = t.detection_window_ps * 1e-12
    if t.background_prob is not None:
        kw["background"] = t.background_prob
    if t.init_fidelity is not None:
        kw["init_fidelity"] = t.init_fidelity
    if t.shots_per_setting is not None:
        kw["shots_per_setting"] = t.shots_per_setting
    return dataclasses.replace(base, **kw)


def tomography_report(cfg: ExperimentConfig) -> dict:
    t = cfg.tomography
    try:
        settings = tuple(tm.BasisSetting.parse(s) for s in t.settings)
        tm.check_informationally_complete(settings)
    except ValueError as exc:
        raise ConfigError(f"[tomography]: {exc}") from None
    preset = tomography_preset(cfg)
    target = ideal_spin_photon_pure()
    try:
        rho_true = preset.source()
        det = preset.detector()
    except ValueError as exc:
        raise ConfigError(f"[tomography]: {exc}") from None
    if t.analytic:
        counts = tm.expected_counts(rho_true, settings, preset.shots_per_setting, det)
        rng = None
    else:
        rng = np.random.default_rng(np.random.SeedSequence(_require_seed(cfg)))
        counts = tm.simulate_counts(rho_true, settings, preset.shots_per_setting, det, rng)

    report = {"true_fidelity": fidelity_pure_target(rho_true, target), "counts_csv": counts.to_csv()}
    corr = tm.correlators_from_counts(counts)
    if not np.isnan(corr).any():
        d = tm.direct_reconstruction(corr, target)
        report["direct"] = d.to_json()
    mle = tm.mle_reconstruction(counts, target)
    res = mle.to_json()
    res["diagnostics"] = {k: v for k, v in res["diagnostics"].items() if k != "nll_history"}
    report["mle"] = res
    if rng is not None and t.n_resamples > 0:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            bs = tm.bootstrap_statistics(counts, target, t.n_resamples, rng, workers=cfg.run.workers, bins=t.histogram_bins)
        hist, edges = bs.histogram()
        report["bootstrap"] = bs.summary()
        report["histogram"] = {"edges": edges.tolist(), "counts": hist.tolist()}
        report["histogram_csv"] = bs.histogram_csv()
    return report


def run_tomography(cfg: ExperimentConfig, out: str | None = None) -> tuple[str, int]:
    report = tomography_report(cfg)
    counts_csv = report.pop("counts_csv")
    hist_csv = report.pop("histogram_csv", None)
    if out is not None:
        base = Path(out)
        base.with_suffix(".counts.csv").write_text(counts_csv, encoding="utf-8")
        if hist_csv is not None:
            base.with_suffix(".histogram.csv").write_text(hist_csv, encoding="utf-8")
    if cfg.run.format == "json":
        return dumps({"command": "tomo", "config": cfg.to_dict(), "result": report}), EXIT_OK
    text = _config_comment(cfg)
    text += f"# true_fidelity={report['true_fidelity']!r}\n"
    text += f"# mle_fidelity={report['mle']['fidelity_to_target']!r}\n"
    if "direct" in report:
        text += f"# direct_fidelity={report['direct']['fidelity_to_target']!r}\n"
    if "bootstrap" in report:
        text += "".join(f"# bootstrap_{k}={v!r}\n" for k, v in sorted(report["bootstrap"].items()))
    return text + (hist_csv if hist_csv is not None else counts_csv), EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="sectioned key-value config file")
    common.add_argument("--seed", type=int, help="master seed (overrides run.master_seed)")
    common.add_argument("--workers", type=int, help="worker processes (overrides run.workers)")
    common.add_argument("--out", metavar="PATH", help="write output here instead of stdout")
    common.add_argument("--format", choices=("csv", "json"), help="output format (overrides run.format)")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="K=V",
                        help="override section.key=value; repeatable")
    p = argparse.ArgumentParser(prog="qdrepeater", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("rate-table", parents=[common], help="entanglement rate against fiber length")
    sub.add_parser("link-sim", parents=[common], help="two-link repeater Monte Carlo")
    chain = sub.add_parser("chain-sim", parents=[common], help="repeater chain Monte Carlo")
    chain.add_argument("--events", metavar="PATH", help="write the first replica's event log (JSON lines)")
    sub.add_parser("tomo", parents=[common], help="simulated tomography with MLE and bootstrap")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"run.master_seed={args.seed}")
    if args.workers is not None:
        overrides.append(f"run.workers={args.workers}")
    if args.format is not None:
        overrides.append(f"run.format={args.format}")
    try:
        cfg = load_config(args.config, overrides)
        if args.command == "rate-table":
            text, code = run_rate_table(cfg)
        elif args.command == "link-sim":
            text, code = run_link_sim(cfg)
        elif args.command == "chain-sim":
            text, code = run_chain_sim(cfg, getattr(args, "events", None))
        else:
            text, code = run_tomography(cfg, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if code == EXIT_UNRESOLVED:
        print("result is statistically unresolved; see notes", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
