"""Experiment orchestration over seeds.

Every experiment is split into an independent per-seed pipeline (``_seed_*``)
that returns plain rows, and a single-threaded reduction (``_reduce_*``) that
builds summary rows and the summary dict. Rows are always written in config
seed order, so results do not depend on the worker count or on completion
order. Timing lives only in ``manifest.jsonl``.
"""

from __future__ import annotations

import csv
import json
import math
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__
from ..errors import ResourceLimitError
from ..growth import Ball
from ..topology import HOLE_CSV_HEADER, detect_holes, report_rows
from ..weights import WeightField
from .config import ExperimentConfig

# ------------------------------------------------------------------ manifest


@dataclass
class SeedStatus:
    seed: int
    ok: bool
    seconds: float
    error: str = ""


@dataclass
class RunManifest:
    experiment: str
    config: dict
    version: str
    seeds: list = field(default_factory=list)   # SeedStatus
    outputs: list = field(default_factory=list)
    started: float = 0.0
    seconds: float = 0.0

    @property
    def failed(self) -> list:
        return [s.seed for s in self.seeds if not s.ok]

    @property
    def exit_code(self) -> int:
        return 2 if self.failed else 0

    def to_dict(self) -> dict:
        out = asdict(self)
        out["failed"] = self.failed
        return out


class _Deadline:
    def __init__(self, seconds):
        self.end = None if seconds is None else time.monotonic() + float(seconds)

    def check(self):
        if self.end is not None and time.monotonic() > self.end:
            raise ResourceLimitError("max_wall_seconds exceeded")


def _ball(cfg: ExperimentConfig, seed: int) -> Ball:
    field_ = WeightField(cfg.distribution, seed, cfg.d)
    return Ball(field_, max_vertices=int(cfg.caps["max_vertices"]))


def _f(x) -> str:
    """Stable float text: repr round-trips, nan/inf spelled plainly."""
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return "nan"
    return repr(x)


# ------------------------------------------------------------------ holes


HOLES_HEADER = HOLE_CSV_HEADER


def _seed_holes(cfg, seed, dl):
    ball = _ball(cfg, seed)
    rows = []
    for t in sorted(cfg.times):
        dl.check()
        ball.grow_to(t)
        rows += report_rows(detect_holes(ball), seed)
    return rows


def _reduce_holes(cfg, rows):
    by_t = {}
    for r in rows:
        if r[0] == "summary":
            by_t.setdefault(float(r[2]), []).append((r[7], r[8]))
    summary = {"t": [], "mean_N": [], "mean_M": [], "max_M": []}
    for t in sorted(by_t):
        N = [a for a, _ in by_t[t]]
        M = [b for _, b in by_t[t]]
        summary["t"].append(t)
        summary["mean_N"].append(float(np.mean(N)))
        summary["mean_M"].append(float(np.mean(M)))
        summary["max_M"].append(int(max(M)))
    return [], summary


# ------------------------------------------------------------------ scaling


SCALING_HEADER = ["row_type", "seed", "t", "N", "M", "volume", "edge_boundary",
                  "slope_N", "slope_N_lo", "slope_N_hi", "M_best_law"]


def _seed_scaling(cfg, seed, dl):
    ball = _ball(cfg, seed)
    rows = []
    for t in sorted(cfg.times):
        dl.check()
        ball.grow_to(t)
        rep = detect_holes(ball)
        rows.append(["sample", seed, _f(t), rep.N, rep.M, ball.size,
                     rep.edge_boundary_size, "", "", "", ""])
    return rows


def _reduce_scaling(cfg, rows):
    from ..analysis.scaling import SeriesPoint, fit_scaling

    pts = [SeriesPoint(int(r[1]), float(r[2]), int(r[3]), int(r[4]), int(r[5]), int(r[6]))
           for r in rows]
    try:
        fit = fit_scaling(pts)
        summary = fit.summary()
    except ValueError as exc:
        fit = None
        summary = {"note": str(exc)}
    ts = sorted({p.t for p in pts})
    ratio = {}
    for t in ts:
        Ms = [p.M for p in pts if p.t == t]
        ratio[t] = max(Ms) / (t * math.log(t)) if t > 1 else math.nan
    summary["max_M_over_tlogt"] = [ratio[t] for t in ts]
    summary["t"] = ts
    if fit is None:
        srow = ["summary", "", "", "", "", "", "", "nan", "nan", "nan", ""]
    else:
        lo, hi = fit.slope_N_ci
        srow = ["summary", "", "", "", "", "", "", _f(fit.slope_N), _f(lo), _f(hi),
                fit.best_M_law or ""]
    return [srow], summary


# ------------------------------------------------------------------ shape


SHAPE_HEADER = ["row_type", "seed", "r", "direction", "g_hat", "se"]


def _dir_text(z) -> str:
    return " ".join(str(c) for c in z)


def _shape_radii(cfg):
    p = cfg.probe
    r_max = float(p["r_max"])
    radii = sorted({float(r) for r in p["radii"] if float(r) <= r_max} | {r_max})
    return radii


def _seed_shape(cfg, seed, dl):
    from ..analysis.shape import replica_samples

    dirs = cfg.probe["directions"]
    radii = _shape_radii(cfg)
    dl.check()
    s = replica_samples(WeightField(cfg.distribution, seed, cfg.d), dirs, radii,
                        int(cfg.caps["max_vertices"]))
    return [["sample", seed, _f(r), _dir_text(z), _f(s[i, j]), ""]
            for i, r in enumerate(radii) for j, z in enumerate(dirs)]


def _reduce_shape(cfg, rows):
    from ..analysis.shape import aggregate_shape

    dirs = cfg.probe["directions"]
    radii = _shape_radii(cfg)
    seeds = sorted({int(r[1]) for r in rows}, key=[int(r[1]) for r in rows].index)
    look = {(int(r[1]), float(r[2]), r[3]): float(r[4]) for r in rows}
    S = np.array([[[look[(s, r, _dir_text(z))] for z in dirs] for r in radii] for s in seeds])
    est = aggregate_shape(dirs, radii, S)
    out = [["summary", "", _f(rec["r"]), _dir_text(rec["direction"]), _f(rec["g_hat"]),
            _f(rec["se"])] for rec in est.as_records()]
    summary = {"replicas": est.replicas, "estimates": est.as_records(),
               "in_radius": est.in_radius, "out_radius": est.out_radius}
    return out, summary


# ------------------------------------------------------------------ barrel


BARREL_HEADER = ["row_type", "seed", "n", "mode", "chain_ok", "m1", "m3", "m2", "L",
                 "upper_ok", "lower_ok", "upper_margin", "lower_margin", "note"]


def _barrel_ns(cfg):
    ns = cfg.gadget["barrel_n"] or [cfg.gadget["n"]]
    return [int(n) for n in ns]


def _seed_barrel(cfg, seed, dl):
    from ..gadgets.barrel import BarrelSpec, verify_barrel

    g = cfg.gadget
    rows = []
    for n in _barrel_ns(cfg):
        spec = BarrelSpec.build(n, g["eps"], g["a"], g["b"], g["delta"], cfg.d, enforce=False)
        ok, why = spec.chain()
        for mode in g["modes"]:
            dl.check()
            head = ["sample", seed, n, mode, ok, spec.m1, spec.m3, spec.m2, spec.L]
            if not ok:
                rows.append(head + ["", "", "", "", f"scale chain fails: {why}"])
                continue
            rep = verify_barrel(spec, mode, seed if mode == "sampled" else None)
            rows.append(head + [rep.upper_ok, rep.lower_ok, _f(rep.upper_margin),
                                _f(rep.lower_margin), ""])
    return rows


def _reduce_barrel(cfg, rows):
    recs = [{"seed": r[1], "n": r[2], "mode": r[3], "chain_ok": r[4],
             "upper_ok": r[9], "lower_ok": r[10]} for r in rows]
    return [], {"runs": recs}


# ------------------------------------------------------------------ plant


PLANT_HEADER = ["row_type", "seed", "t", "n", "mode", "x", "s", "formed", "volume",
                "volume_bound", "hole_formed"]


def _plant_spec(cfg, t):
    from ..gadgets.barrel import BarrelSpec

    g = cfg.gadget
    return BarrelSpec.build(cfg.gadget_n(t), g["eps"], g["a"], g["b"], g["delta"], cfg.d)


def _seed_plant(cfg, seed, dl):
    from ..gadgets.goodvertex import scan_good_vertices
    from ..gadgets.planting import plant_and_verify_hole

    g = cfg.gadget
    ball = _ball(cfg, seed)
    rows = []
    for t in sorted(cfg.times):
        dl.check()
        ball.grow_to(t)
        spec = _plant_spec(cfg, t)
        bp = g["b_prime"] if g["b_prime"] is not None else spec.window_width
        limit = int(g["samples"]) or 1
        scan = scan_good_vertices(ball, float(bp), spec.n, g["max_path_edges"], limit=limit)
        for cert in scan:
            for mode in g["modes"]:
                dl.check()
                rep = plant_and_verify_hole(ball, cert, spec, mode, method=g["method"],
                                            seed=seed)
                for s, ok, vol in rep.checks:
                    rows.append(["sample", seed, _f(t), spec.n, mode, _dir_text(cert.x),
                                 _f(s), ok, vol, _f(spec.volume_bound), rep.hole_formed])
    return rows


def _reduce_plant(cfg, rows):
    plants = {}
    for r in rows:
        key = (r[1], r[2], r[4], r[5])
        plants.setdefault(key, []).append((r[7] is True and r[8] >= float(r[9])))
    ok = [all(v) for v in plants.values()]
    return [], {"plants": len(ok), "all_formed_with_volume": sum(ok),
                "fraction": (sum(ok) / len(ok)) if ok else math.nan}


# ------------------------------------------------------------------ sector


SECTOR_HEADER = ["row_type", "seed", "t", "has_hole", "contained", "x0", "J", "K",
                 "hole_volume", "escape_near", "escape_left", "escape_right",
                 "escape_far", "frequency"]


def _seed_sector(cfg, seed, dl):
    from ..gadgets.sector import largest_hole_sector_test

    ball = _ball(cfg, seed)
    rows = []
    for t in sorted(cfg.times):
        dl.check()
        ball.grow_to(t)
        rep = largest_hole_sector_test(ball, float(cfg.gadget["C18"]))
        esc = [rep.escapes.get(k, "") for k in ("near", "left", "right", "far")]
        rows.append(["sample", seed, _f(t), rep.has_hole,
                     "" if rep.contained is None else rep.contained,
                     _dir_text(rep.x0) if rep.x0 else "", _f(rep.J), _f(rep.K),
                     rep.hole_volume, *esc, ""])
    return rows


def sector_frequencies(rows) -> dict:
    """t -> fraction of seeds whose largest hole sits inside its sector."""
    by_t = {}
    for r in rows:
        by_t.setdefault(float(r[2]), []).append(r[4] is True)
    return {t: float(np.mean(v)) for t, v in sorted(by_t.items())}


def _reduce_sector(cfg, rows):
    freq = sector_frequencies(rows)
    out = [["summary", "", _f(t), "", "", "", "", "", "", "", "", "", "", _f(f)]
           for t, f in freq.items()]
    return out, {"t": list(freq), "frequency": list(freq.values()),
                 "C18": float(cfg.gadget["C18"])}


# ------------------------------------------------------------------ straightness


STRAIGHT_HEADER = ["row_type", "seed", "r", "x", "max_angle", "out_size", "slope"]


def _seed_straightness(cfg, seed, dl):
    from ..analysis.probes import straightness_probe

    dl.check()
    ball = _ball(cfg, seed)
    rep = straightness_probe(ball, cfg.probe["radii"], float(cfg.gadget["p"]),
                             int(cfg.probe["samples"]), seed=seed)
    return [["sample", seed, _f(r), _dir_text(x), _f(a), k, ""]
            for r in rep.radii for x, a, k in rep.samples[r]]


def _reduce_straightness(cfg, rows):
    p = float(cfg.gadget["p"])
    by_r = {}
    for r in rows:
        by_r.setdefault(float(r[2]), []).append(float(r[4]))
    radii = sorted(by_r)
    mx = [max(by_r[r]) for r in radii]
    slope = math.nan
    if len(radii) >= 2 and all(m > 0 for m in mx):
        slope = float(np.polyfit(np.log(radii), np.log(mx), 1)[0])
    out = [["summary", "", _f(r), "", _f(m), "", _f(slope)] for r, m in zip(radii, mx)]
    return out, {"p": p, "r": radii, "max_angle": mx, "slope": slope,
                 "reference": [r ** (-p) for r in radii]}


# ------------------------------------------------------------------ kesten


KESTEN_HEADER = ["row_type", "seed", "n", "mode", "ratio", "min_ratio", "p01_ratio"]


def _seed_kesten(cfg, seed, dl):
    from ..analysis.probes import EXACT_MAX_N, min_ratio_exact, min_ratio_greedy

    n, mode = int(cfg.probe["n"]), cfg.probe["mode"]
    if mode == "exact" and n > EXACT_MAX_N:
        raise ValueError(f"exact mode needs n <= {EXACT_MAX_N}")
    fn = min_ratio_exact if mode == "exact" else min_ratio_greedy
    dl.check()
    return [["sample", seed, n, mode, _f(fn(WeightField(cfg.distribution, seed, cfg.d), n)),
             "", ""]]


def _reduce_kesten(cfg, rows):
    r = np.array([float(x[4]) for x in rows])
    if not len(r):
        return [], {}
    s = {"n": int(cfg.probe["n"]), "mode": cfg.probe["mode"], "samples": len(r),
         "min_ratio": float(r.min()), "p01_ratio": float(np.percentile(r, 1)),
         "mean_ratio": float(r.mean())}
    return [["summary", "", s["n"], s["mode"], "", _f(s["min_ratio"]), _f(s["p01_ratio"])]], s


# ------------------------------------------------------------------ concentration


CONC_HEADER = ["row_type", "seed", "r", "T", "g_hat_sample", "mean", "std", "chi"]
GHAT_SEED_OFFSET = 1_000_003


def _seed_concentration(cfg, seed, dl):
    from ..analysis.probes import concentration_samples
    from ..analysis.shape import _ghat_value, probe_point

    z = cfg.probe["direction"]
    radii = sorted(float(r) for r in cfg.probe["radii"])
    mv = int(cfg.caps["max_vertices"])
    dl.check()
    T = concentration_samples(WeightField(cfg.distribution, seed, cfg.d), z, radii, mv)
    gs = ""
    if cfg.probe["g_hat"] is None:
        # norm estimate from a disjoint seed block, never from the sample itself
        dl.check()
        x, _ = probe_point(z, radii[-1])
        other = Ball(WeightField(cfg.distribution, seed + GHAT_SEED_OFFSET, cfg.d),
                     max_vertices=mv)
        gs = _f(_ghat_value(other.passage_time(x), x, z))
    return [["sample", seed, _f(r), _f(t), gs if i == len(radii) - 1 else "", "", "", ""]
            for i, (r, t) in enumerate(zip(radii, T))]


def _reduce_concentration(cfg, rows):
    from ..analysis.probes import concentration_from_samples

    z = cfg.probe["direction"]
    radii = sorted(float(r) for r in cfg.probe["radii"])
    seeds = list(dict.fromkeys(int(r[1]) for r in rows))
    if not seeds:
        return [], {}
    look = {(int(r[1]), float(r[2])): float(r[3]) for r in rows}
    T = np.array([[look[(s, r)] for r in radii] for s in seeds])
    g = cfg.probe["g_hat"]
    if g is None:
        g = float(np.mean([float(r[4]) for r in rows if r[4] != ""]))
    rep = concentration_from_samples(z, radii, T, g, [float(c) for c in cfg.probe["C_grid"]])
    chi = "degenerate" if rep.degenerate else _f(rep.chi)
    out = [["summary", "", _f(r), "", _f(g), _f(rep.mean[r]), _f(rep.std[r]), chi]
           for r in radii]
    summary = {"g_hat": g, "chi": rep.chi, "degenerate": rep.degenerate,
               "records": rep.as_records(), "radii": radii}
    return out, summary


# ------------------------------------------------------------------ dispatch


EXPERIMENT_TABLE = {
    "holes": ("holes.csv", HOLES_HEADER, _seed_holes, _reduce_holes),
    "scaling": ("scaling.csv", SCALING_HEADER, _seed_scaling, _reduce_scaling),
    "shape": ("shape.csv", SHAPE_HEADER, _seed_shape, _reduce_shape),
    "barrel": ("barrel.csv", BARREL_HEADER, _seed_barrel, _reduce_barrel),
    "plant": ("plant.csv", PLANT_HEADER, _seed_plant, _reduce_plant),
    "sector": ("sector.csv", SECTOR_HEADER, _seed_sector, _reduce_sector),
    "straightness": ("straightness.csv", STRAIGHT_HEADER, _seed_straightness,
                     _reduce_straightness),
    "kesten": ("kesten.csv", KESTEN_HEADER, _seed_kesten, _reduce_kesten),
    "concentration": ("concentration.csv", CONC_HEADER, _seed_concentration,
                      _reduce_concentration),
}


def _run_seed(cfg: ExperimentConfig, seed: int):
    """Worker entry point; never raises."""
    t0 = time.perf_counter()
    fn = EXPERIMENT_TABLE[cfg.experiment][2]
    try:
        rows = fn(cfg, seed, _Deadline(cfg.caps["max_wall_seconds"]))
        return seed, rows, None, time.perf_counter() - t0
    except Exception as exc:  # crash isolation: record and move on
        msg = f"{type(exc).__name__}: {exc}"
        tb = traceback.format_exc(limit=3)
        return seed, None, msg + "\n" + tb, time.perf_counter() - t0


def science_echo(cfg: ExperimentConfig) -> dict:
    """Config echo written into data files; output placement is left out."""
    echo = cfg.echo()
    echo.pop("output", None)
    return echo


def _cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def write_csv(path: Path, header, rows, echo: dict) -> None:
    with open(path, "w", newline="") as fh:
        for line in json.dumps(echo, sort_keys=True, indent=1).splitlines():
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(v) for v in r])


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, tuple):
        return list(o)
    return str(o)


def run(cfg: ExperimentConfig) -> RunManifest:
    name, header, _, reduce = EXPERIMENT_TABLE[cfg.experiment]
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    man = RunManifest(cfg.experiment, cfg.echo(), __version__, started=time.time())
    t0 = time.perf_counter()
    seeds = cfg.seeds
    results = {}
    if cfg.workers > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.workers, len(seeds))) as pool:
            futs = {s: pool.submit(_run_seed, cfg, s) for s in seeds}
            for s, f in futs.items():
                try:
                    results[s] = f.result()
                except Exception as exc:  # worker died outright
                    results[s] = (s, None, f"{type(exc).__name__}: {exc}", 0.0)
    else:
        for s in seeds:
            results[s] = _run_seed(cfg, s)

    rows = []
    for s in seeds:
        _, r, err, secs = results[s]
        man.seeds.append(SeedStatus(s, err is None, round(secs, 3), err or ""))
        if r is not None:
            rows += r
    extra, summary = reduce(cfg, rows)
    summary = {"experiment": cfg.experiment, "seeds_ok": [s.seed for s in man.seeds if s.ok],
               **summary}

    echo = science_echo(cfg)
    csv_path = out / name
    write_csv(csv_path, header, rows + extra, echo)
    sum_path = out / "summary.json"
    sum_path.write_text(json.dumps({"config": echo, "summary": summary}, sort_keys=True,
                                   indent=2, default=_json_default) + "\n")
    man.outputs = [str(csv_path), str(sum_path)]
    man.seconds = round(time.perf_counter() - t0, 3)
    man_path = out / "manifest.jsonl"
    man.outputs.append(str(man_path))
    # one line per invocation; earlier runs in the same directory are kept
    with open(man_path, "a") as fh:
        fh.write(json.dumps(man.to_dict(), sort_keys=True, default=_json_default) + "\n")
    return man
