"""Monte Carlo comparison of the indirect, direct and grid-hopping estimators.

Scenario files are INI-style (``[section]`` headers, ``key = value`` lines,
``#`` comments).  See the README for the full key list.
"""

from __future__ import annotations

import configparser
import csv
import logging
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .direct import direct_estimate
from .hopping import hop_estimate
from .indirect import indirect_estimate
from .interp import HopTable, InterpScheme, StaleHopTableError, precompute_hop_table, read_hop_table
from .model import (
    Estimate,
    Grid,
    SceneGeometry,
    Target,
    WaveformConfig,
    build_location_grid,
    build_velocity_grid,
    geometry_hash,
)
from .synth import NoiseSpec, on_bin_geometry, synthesize_frame

log = logging.getLogger(__name__)

ALGORITHM_KINDS = ("indirect", "direct", "hop")
SCENE_MODES = ("offgrid", "ongrid", "exact")
ALPHA_MODELS = ("unit", "random_phase", "independent")

TRIAL_COLUMNS = [
    "trial", "snr_db", "density", "algorithm",
    "truth_x0", "truth_x1", "est_x0", "est_x1",
    "truth_v0", "truth_v1", "est_v0", "est_v1",
    "t_offline_ns", "t_online_ns",
]
SUMMARY_COLUMNS = ["algorithm", "density", "snr_db", "threshold", "hit_ratio", "mean_online_ns", "vel_rmse_hits"]


class ScenarioError(ValueError):
    """Invalid scenario file or parameter; reported with its location."""


@dataclass(frozen=True)
class AlgoSpec:
    """One configured estimator; ``label`` is what appears in result files."""

    label: str
    kind: str
    scheme: InterpScheme = InterpScheme.POLY3
    oversample: int = 4

    @classmethod
    def parse(cls, text: str, scheme="poly3", oversample: int = 4) -> AlgoSpec:
        """``indirect``, ``direct``, ``hop`` or ``hop:<scheme>:<oversample>``."""
        label = text.strip()
        parts = label.split(":")
        kind = parts[0].lower()
        if kind not in ALGORITHM_KINDS:
            raise ValueError(f"unknown algorithm {label!r}; valid names: {', '.join(ALGORITHM_KINDS)} "
                             "(hop also accepts hop:<scheme>:<oversample>)")
        if kind != "hop":
            if len(parts) != 1:
                raise ValueError(f"algorithm {kind!r} takes no options, got {label!r}")
            return cls(label, kind)
        if len(parts) not in (1, 3):
            raise ValueError(f"hop options must be hop:<scheme>:<oversample>, got {label!r}")
        if len(parts) == 3:
            scheme, oversample = parts[1], parts[2]
        try:
            P = int(oversample)
        except ValueError:
            raise ValueError(f"oversampling must be an integer, got {oversample!r}") from None
        if P < 1:
            raise ValueError(f"oversampling must be >= 1, got {P}")
        return cls(label, "hop", InterpScheme.parse(scheme), P)


@dataclass(frozen=True)
class Scenario:
    cfg: WaveformConfig = field(default_factory=WaveformConfig)
    geom: SceneGeometry = field(default_factory=lambda: SceneGeometry((0.0, 0.0), [(-18.0, 6.0), (18.0, 9.0), (2.0, 36.0)]))
    mode: str = "offgrid"
    extents: tuple = (-15.0, 15.0, 3.0, 33.0)
    speed_bound: float = 15.0
    alpha: str = "random_phase"
    snr_db: tuple = (0.0,)
    densities: tuple = (1.0, 2.0, 4.0)
    thresholds: tuple = tuple(np.round(np.arange(0.2, 3.0001, 0.2), 10))
    trials: int = 100
    seed: int = 0
    algorithms: tuple = (AlgoSpec("indirect", "indirect"), AlgoSpec("direct", "direct"), AlgoSpec("hop", "hop"))
    velocity_density: float = 1.0
    indirect_range_oversample: int = 1
    indirect_doppler_oversample: int = 1
    hop_doppler_oversample: int = 4
    timing: bool = True
    timing_repeats: int = 3
    threads: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise ScenarioError(f"trials must be >= 1, got {self.trials}")
        if self.mode not in SCENE_MODES:
            raise ScenarioError(f"unknown scene mode {self.mode!r}; valid: {', '.join(SCENE_MODES)}")
        if self.alpha not in ALPHA_MODELS:
            raise ScenarioError(f"unknown alpha model {self.alpha!r}; valid: {', '.join(ALPHA_MODELS)}")
        if not self.densities or any(not d > 0 for d in self.densities):
            raise ScenarioError(f"densities must be positive, got {self.densities}")
        th = list(self.thresholds)
        if not th or any(t <= 0 for t in th) or any(b <= a for a, b in zip(th, th[1:])):
            raise ScenarioError(f"thresholds must be positive and strictly ascending, got {self.thresholds}")
        if not self.snr_db:
            raise ScenarioError("at least one SNR value is required")
        if not self.algorithms:
            raise ScenarioError("at least one algorithm is required")
        labels = [a.label for a in self.algorithms]
        if len(set(labels)) != len(labels):
            raise ScenarioError(f"duplicate algorithm labels in {labels}")
        if not self.speed_bound > 0:
            raise ScenarioError(f"speed_bound must be positive, got {self.speed_bound}")
        xmin, xmax, ymin, ymax = self.extents
        if not (xmax > xmin and ymax > ymin):
            raise ScenarioError(f"extents must be non-degenerate, got {self.extents}")
        for name in ("velocity_density",):
            if not getattr(self, name) > 0:
                raise ScenarioError(f"{name} must be positive")
        for name in ("indirect_range_oversample", "indirect_doppler_oversample", "hop_doppler_oversample",
                     "timing_repeats", "threads"):
            if getattr(self, name) < 1:
                raise ScenarioError(f"{name} must be >= 1, got {getattr(self, name)}")

    def location_grid(self, density) -> Grid:
        return build_location_grid(self.extents, self.cfg, density)

    def velocity_grid(self) -> Grid:
        return build_velocity_grid(self.speed_bound, self.cfg, self.velocity_density)


@dataclass
class AlgoResult:
    x: np.ndarray
    v: np.ndarray
    timings: dict
    t_offline_ns: int
    t_online_ns: int


@dataclass
class TrialRecord:
    trial: int
    snr_db: float | None
    density: float
    truth_x: np.ndarray
    truth_v: np.ndarray
    results: dict  # algorithm label -> AlgoResult


# ---------------------------------------------------------------------------
# scenario files

_SCHEMA = {
    "waveform": {"f0", "bandwidth", "chirp_duration", "chirps", "samples", "c"},
    "geometry": {"tx", "rx"},
    "scene": {"mode", "extents", "speed_bound", "alpha"},
    "run": {"trials", "seed", "snr_db", "densities", "thresholds", "threads", "timing", "timing_repeats",
            "velocity_density"},
    "algorithms": {"use", "scheme", "oversample", "doppler_oversample", "indirect_range_oversample",
                   "indirect_doppler_oversample"},
}
_REQUIRED = {("run", "trials")}


def _line_of(text, section, key=None):
    current = None
    for n, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            current = s[1:-1].strip()
            if key is None and current == section:
                return n
        elif current == section and key is not None and "=" in s:
            if s.split("=", 1)[0].strip().lower() == key:
                return n
    return None


def _floats(value):
    return [float(v) for v in value.replace(";", ",").split(",") if v.strip()]


def _points(value):
    pts = []
    for chunk in value.split(";"):
        if chunk.strip():
            xy = _floats(chunk)
            if len(xy) != 2:
                raise ValueError(f"expected 'x, y' pairs separated by ';', got {chunk.strip()!r}")
            pts.append(xy)
    return pts


def _snrs(value):
    out = []
    for item in value.split(","):
        item = item.strip().lower()
        if not item:
            continue
        out.append(None if item in ("noiseless", "inf", "none") else float(item))
    return tuple(out)


def _bool(value):
    v = value.strip().lower()
    if v in ("1", "yes", "true", "on"):
        return True
    if v in ("0", "no", "false", "off"):
        return False
    raise ValueError(f"expected a boolean, got {value!r}")


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file {path}: {exc.strerror or exc}") from None
    return parse_scenario(text, str(path))


def parse_scenario(text: str, source: str = "<scenario>") -> Scenario:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ScenarioError(f"{source}: {exc}") from None

    def where(section, key=None):
        line = _line_of(text, section, key)
        loc = f"[{section}]" + (f" {key}" if key else "")
        return f"{source}:{line}: {loc}" if line else f"{source}: {loc}"

    for section in parser.sections():
        if section not in _SCHEMA:
            raise ScenarioError(f"{where(section)}: unknown section; valid: {', '.join(_SCHEMA)}")
        for key in parser[section]:
            if key not in _SCHEMA[section]:
                raise ScenarioError(f"{where(section, key)}: unknown key; valid: {', '.join(sorted(_SCHEMA[section]))}")
    for section, key in _REQUIRED:
        if not parser.has_option(section, key):
            raise ScenarioError(f"{source}: missing required key [{section}] {key}")

    def get(section, key, conv, default):
        if not parser.has_option(section, key):
            return default
        raw = parser.get(section, key)
        try:
            return conv(raw)
        except (ValueError, TypeError) as exc:
            raise ScenarioError(f"{where(section, key)}: {exc}") from None

    defaults = Scenario(trials=1)
    d_cfg = defaults.cfg
    try:
        cfg = WaveformConfig(
            f0=get("waveform", "f0", float, d_cfg.f0),
            B=get("waveform", "bandwidth", float, d_cfg.B),
            Tc=get("waveform", "chirp_duration", float, d_cfg.Tc),
            Mc=get("waveform", "chirps", int, d_cfg.Mc),
            Ms=get("waveform", "samples", int, d_cfg.Ms),
            c=get("waveform", "c", float, d_cfg.c),
        )
    except ScenarioError:
        raise
    except ValueError as exc:
        raise ScenarioError(f"{where('waveform')}: {exc}") from None

    tx = get("geometry", "tx", _points, [defaults.geom.tx.tolist()])
    rx = get("geometry", "rx", _points, defaults.geom.rx.tolist())
    if len(tx) != 1:
        raise ScenarioError(f"{where('geometry', 'tx')}: expected exactly one transmitter position")
    try:
        geom = SceneGeometry(tx[0], rx)
    except ValueError as exc:
        raise ScenarioError(f"{where('geometry')}: {exc}") from None

    extents = get("scene", "extents", _floats, list(defaults.extents))
    if len(extents) != 4:
        raise ScenarioError(f"{where('scene', 'extents')}: expected xmin, xmax, ymin, ymax")

    scheme = get("algorithms", "scheme", str, "poly3")
    oversample = get("algorithms", "oversample", int, 4)
    use = get("algorithms", "use", lambda s: [a for a in s.split(",") if a.strip()],
              [a.label for a in defaults.algorithms])
    try:
        algorithms = tuple(AlgoSpec.parse(a, scheme, oversample) for a in use)
    except ValueError as exc:
        raise ScenarioError(f"{where('algorithms')}: {exc}") from None

    kwargs = dict(
        cfg=cfg,
        geom=geom,
        mode=get("scene", "mode", lambda s: s.strip().lower(), defaults.mode),
        extents=tuple(extents),
        speed_bound=get("scene", "speed_bound", float, defaults.speed_bound),
        alpha=get("scene", "alpha", lambda s: s.strip().lower(), defaults.alpha),
        snr_db=get("run", "snr_db", _snrs, defaults.snr_db),
        densities=tuple(get("run", "densities", _floats, list(defaults.densities))),
        thresholds=tuple(get("run", "thresholds", _floats, list(defaults.thresholds))),
        trials=get("run", "trials", int, defaults.trials),
        seed=get("run", "seed", int, defaults.seed),
        algorithms=algorithms,
        velocity_density=get("run", "velocity_density", float, defaults.velocity_density),
        indirect_range_oversample=get("algorithms", "indirect_range_oversample", int, 1),
        indirect_doppler_oversample=get("algorithms", "indirect_doppler_oversample", int, 1),
        hop_doppler_oversample=get("algorithms", "doppler_oversample", int, defaults.hop_doppler_oversample),
        timing=get("run", "timing", _bool, defaults.timing),
        timing_repeats=get("run", "timing_repeats", int, defaults.timing_repeats),
        threads=get("run", "threads", int, defaults.threads),
    )
    try:
        return Scenario(**kwargs)
    except ScenarioError as exc:
        raise ScenarioError(f"{source}: {exc}") from None


# ---------------------------------------------------------------------------
# scenes

def trial_streams(seed: int, trial: int):
    scene_ss, noise_ss = np.random.SeedSequence(seed, spawn_key=(trial,)).spawn(2)
    return np.random.default_rng(scene_ss), int(noise_ss.generate_state(1, np.uint64)[0])


def draw_scene(scenario: Scenario, grid: Grid, vgrid: Grid, rng):
    """Returns ``(geometry, target, receiver_gains)`` for one trial."""
    sc = scenario
    if sc.mode == "offgrid":
        xmin, xmax, ymin, ymax = sc.extents
        x = rng.uniform((xmin, ymin), (xmax, ymax))
        speed = rng.uniform(0.0, sc.speed_bound)
        heading = rng.uniform(0.0, 2 * np.pi)
        v = speed * np.array([np.cos(heading), np.sin(heading)])
    else:
        x = grid.points[rng.integers(len(grid))]
        speeds = np.linalg.norm(vgrid.points, axis=1)
        ok = speeds <= sc.speed_bound
        if sc.mode == "exact":
            ok &= (speeds == 0) | (speeds >= 1.0)
        candidates = vgrid.points[ok]
        v = candidates[rng.integers(len(candidates))]
    geom = sc.geom
    if sc.mode == "exact":
        geom = on_bin_geometry(sc.cfg, sc.geom.tx, x, v, sc.geom.Q, rng)
    phase = rng.uniform(0.0, 2 * np.pi)
    alpha = 1.0 if sc.alpha == "unit" else np.exp(1j * phase)
    gains = None
    if sc.alpha == "independent":
        gains = np.exp(1j * rng.uniform(0.0, 2 * np.pi, geom.Q))
    return geom, Target(x, v, alpha), gains


# ---------------------------------------------------------------------------
# Monte Carlo

class TableCache:
    """Hop tables keyed by scene hash, grid size, scheme and oversampling."""

    def __init__(self, preloaded=()):
        self._tables = {}
        self._files = list(preloaded)

    @staticmethod
    def key(h, n_bins, scheme, P):
        return (h, n_bins, InterpScheme.parse(scheme).K, int(P))

    def get(self, grid, geom, cfg, algo: AlgoSpec) -> HopTable:
        k = self.key(geometry_hash(geom, cfg), len(grid), algo.scheme, algo.oversample)
        if k in self._tables:
            return self._tables[k]
        for path in self._files:
            try:
                table = read_hop_table(path, grid, geom, cfg)
            except StaleHopTableError as exc:
                log.debug("not using %s: %s", path, exc)
                continue
            if table.K == algo.scheme.K and table.oversample == algo.oversample:
                log.info("reusing hop table %s (skipping rebuild)", path)
                self._tables[k] = table
                return table
        table = precompute_hop_table(grid, geom, cfg, algo.oversample, algo.scheme)
        log.debug("built hop table %s P=%d over %d bins in %.1f ms", algo.scheme.value, algo.oversample,
                  len(grid), table.build_ns / 1e6)
        self._tables[k] = table
        return table


def _run_algo(algo: AlgoSpec, frame, grid, vgrid, geom, sc: Scenario, table):
    if algo.kind == "indirect":
        call = lambda: indirect_estimate(frame, (grid, vgrid), geom, sc.cfg,  # noqa: E731
                                         sc.indirect_range_oversample, sc.indirect_doppler_oversample)
    elif algo.kind == "direct":
        call = lambda: direct_estimate(frame, (grid, vgrid), geom, sc.cfg)  # noqa: E731
    else:
        call = lambda: hop_estimate(frame, table, vgrid, geom, sc.cfg, sc.hop_doppler_oversample)  # noqa: E731
    est: Estimate = call()
    if not sc.timing:
        return AlgoResult(est.x, est.v, {}, 0, 0)
    online = [est.online_ns]
    for _ in range(sc.timing_repeats - 1):
        online.append(call().online_ns)
    offline = table.build_ns if table is not None else 0
    return AlgoResult(est.x, est.v, est.timings, int(offline), int(statistics.median(online)))


def run_trial(sc: Scenario, trial: int, snr_db, grid: Grid, vgrid: Grid, tables: TableCache) -> TrialRecord:
    rng, noise_seed = trial_streams(sc.seed, trial)
    geom, target, gains = draw_scene(sc, grid, vgrid, rng)
    frame = synthesize_frame(sc.cfg, geom, [target], NoiseSpec(snr_db, noise_seed), gains)
    results = {}
    for algo in sc.algorithms:
        table = None
        if algo.kind == "hop":
            # exact-mode geometries are single-use, so their tables are not cached
            if sc.mode == "exact":
                table = precompute_hop_table(grid, geom, sc.cfg, algo.oversample, algo.scheme)
            else:
                table = tables.get(grid, geom, sc.cfg, algo)
        results[algo.label] = _run_algo(algo, frame, grid, vgrid, geom, sc, table)
    return TrialRecord(trial, snr_db, float(grid.density), target.x, target.v, results)


def run_monte_carlo(sc: Scenario, tables: TableCache | None = None, threads: int | None = None) -> list:
    """Every (density, SNR, trial) combination, ordered by density, then SNR, then trial.

    Scenes and noise come from per-trial seed substreams, so a trial's scene
    is shared across SNRs and the records do not depend on the worker count.
    """
    tables = tables or TableCache()
    threads = threads or sc.threads
    vgrid = sc.velocity_grid()
    records = []
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for density in sc.densities:
            grid = sc.location_grid(density)
            if sc.mode != "exact":
                for algo in sc.algorithms:
                    if algo.kind == "hop":
                        tables.get(grid, sc.geom, sc.cfg, algo)
            for snr in sc.snr_db:
                t0 = time.perf_counter()
                records.extend(pool.map(lambda t: run_trial(sc, t, snr, grid, vgrid, tables), range(sc.trials)))
                log.info("density %g, snr %s: %d trials in %.1f s", density, _fmt_snr(snr), sc.trials,
                         time.perf_counter() - t0)
    return records


# ---------------------------------------------------------------------------
# metrics and output

def hit_ratio(records, algorithm: str, threshold: float) -> float:
    """Fraction of records whose location estimate lies within ``threshold`` metres of truth."""
    records = list(records)
    if not records:
        raise ValueError("no records")
    if algorithm not in records[0].results:
        raise KeyError(f"unknown algorithm {algorithm!r}; recorded: {', '.join(records[0].results)}")
    hits = sum(bool(np.linalg.norm(r.results[algorithm].x - r.truth_x) <= threshold) for r in records)
    return hits / len(records)


def velocity_rmse(records, algorithm: str, threshold: float) -> float:
    """RMS velocity error over the records that are location hits; NaN without hits."""
    errs = [np.sum((r.results[algorithm].v - r.truth_v) ** 2) for r in records
            if np.linalg.norm(r.results[algorithm].x - r.truth_x) <= threshold]
    return float(np.sqrt(np.mean(errs))) if errs else float("nan")


def mean_online_ns(records, algorithm: str) -> float:
    return float(np.mean([r.results[algorithm].t_online_ns for r in records]))


def _fmt_snr(snr):
    return "noiseless" if snr is None else repr(float(snr))


def _f(x):
    return repr(float(x))


def emit_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRIAL_COLUMNS)
        for rec in records:
            for label, res in rec.results.items():
                w.writerow([rec.trial, _fmt_snr(rec.snr_db), _f(rec.density), label,
                            _f(rec.truth_x[0]), _f(rec.truth_x[1]), _f(res.x[0]), _f(res.x[1]),
                            _f(rec.truth_v[0]), _f(rec.truth_v[1]), _f(res.v[0]), _f(res.v[1]),
                            res.t_offline_ns, res.t_online_ns])


def group_records(records):
    """``{(density, snr_db): [records]}`` preserving first-seen order."""
    groups = {}
    for rec in records:
        groups.setdefault((rec.density, rec.snr_db), []).append(rec)
    return groups


def summarize(records, thresholds):
    rows = []
    records = list(records)
    if not records:
        return rows
    labels = list(records[0].results)
    groups = group_records(records)
    for label in labels:
        for (density, snr), recs in groups.items():
            mean_t = mean_online_ns(recs, label)
            for th in thresholds:
                rows.append({
                    "algorithm": label, "density": density, "snr_db": snr, "threshold": float(th),
                    "hit_ratio": hit_ratio(recs, label, th), "mean_online_ns": mean_t,
                    "vel_rmse_hits": velocity_rmse(recs, label, th),
                })
    return rows


def emit_summary(records, path, thresholds) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for row in summarize(records, thresholds):
            w.writerow([row["algorithm"], _f(row["density"]), _fmt_snr(row["snr_db"]), _f(row["threshold"]),
                        _f(row["hit_ratio"]), _f(row["mean_online_ns"]), _f(row["vel_rmse_hits"])])


def run_bench(sc: Scenario, out_dir, tables: TableCache | None = None, threads: int | None = None):
    """Run the scenario and write ``trials.csv`` and ``summary.csv`` into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = run_monte_carlo(sc, tables, threads)
    emit_csv(records, out / "trials.csv")
    emit_summary(records, out / "summary.csv", sc.thresholds)
    return records


def with_overrides(sc: Scenario, **kw) -> Scenario:
    kw = {k: v for k, v in kw.items() if v is not None}
    return replace(sc, **kw) if kw else sc
