"""Command-line front end.

Configuration comes from a flat key = value manifest file plus command-line
overrides (``--key value``); keys mirror the run-configuration field names.
Every command writes delimited output with a leading comment line recording
tool version, seed and a hash of the effective configuration, and renders
the matching figure alongside unless ``figures = false``.

Exit codes: 0 on success, 2 for configuration or usage errors, 1 for
runtime failures.  Partially written outputs are removed on error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import coincidence as co
from . import experiment as ex
from . import linkmodel as lm
from . import tomography as tm
from .errors import ConfigurationError, TeleSimError, ValidationError
from .fockoptics import BsmOutcome, SourceParams
from .qstate import SIX_STATES, STATE_BASIS_SLOT, MeasurementBasis

COMMANDS = ("simulate", "tomo-state", "tomo-process", "sweep-attenuation",
            "sweep-window", "predict", "fit")

DETECTOR_KEYS = tuple(f"eff_{d.lower()}" for d in ex.DETECTOR_NAMES) + \
    tuple(f"dark_{d.lower()}" for d in ex.DETECTOR_NAMES)

GLOBAL_DEFAULTS = {
    "pulses": "1000000",
    "seed": "1",
    "g1": "0.1",
    "g2": "0.1",
    "xi": "1.0",
    "attenuation_db": "0.0",
    "rep_period_ps": "12500",
    "jitter_sigma_ps": "500",
    "tag_resolution_ps": "156",
    "feed_forward": "true",
    "ff_delay_ps": "250000",
    "drift_angle_rad": "0.0",
    "window_ps": "3000",
    "n_max": "4",
    "emit_tags": "false",
    "figures": "true",
    "eff_d1": "0.5", "eff_d2": "0.5", "eff_d3": "0.5", "eff_d4": "0.5",
    "eff_d5": "0.5", "eff_d6": "0.5", "eff_trig": "0.5",
    "dark_d1": "300", "dark_d2": "300", "dark_d3": "300", "dark_d4": "300",
    "dark_d5": "180", "dark_d6": "400", "dark_trig": "300",
}

KNOWN_KEYS = set(GLOBAL_DEFAULTS) | set(DETECTOR_KEYS) | {
    "command", "output_dir", "charlie_state", "bob_basis", "post_correct",
    "sweep_start_db", "sweep_stop_db", "sweep_step_db", "target_events",
    "min_pulses", "with_model",
    "window_start_ns", "window_stop_ns", "window_step_ns",
    "p_bsm_hz", "v0", "s2_frac", "v2", "n_hz", "tau_s",
    "sweep_csv", "probe_h", "probe_v", "probe_p", "probe_r",
}


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigurationError(f"cannot parse boolean value {text!r}")


def parse_manifest_file(path) -> dict[str, str]:
    values: dict[str, str] = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigurationError(f"{path}:{lineno}: expected key = value")
            key, _, val = line.partition("=")
            values[key.strip()] = val.strip()
    return values


class Manifest:
    """Merged configuration: overrides > manifest file > command defaults."""

    def __init__(self, values: dict[str, str], command: str, output_dir: str):
        unknown = set(values) - KNOWN_KEYS
        if unknown:
            raise ConfigurationError(f"unknown configuration keys: {sorted(unknown)}")
        self.values = values
        self.command = command
        self.output_dir = Path(output_dir)
        self.defaults: dict[str, str] = {}

    def set_defaults(self, **kwargs) -> None:
        self.defaults.update({k: str(v) for k, v in kwargs.items()})

    def _raw(self, key: str, default=None):
        if key in self.values:
            return self.values[key]
        if key in self.defaults:
            return self.defaults[key]
        if key in GLOBAL_DEFAULTS:
            return GLOBAL_DEFAULTS[key]
        return default

    def has(self, key: str) -> bool:
        return key in self.values

    def get_str(self, key: str, default=None) -> str | None:
        v = self._raw(key, default)
        return None if v is None else str(v)

    def get_int(self, key: str, default=None) -> int:
        v = self._raw(key, default)
        if v is None:
            raise ConfigurationError(f"missing required integer key {key!r}")
        try:
            return int(float(v))
        except ValueError as err:
            raise ConfigurationError(f"key {key!r}: cannot parse integer from {v!r}") from err

    def get_float(self, key: str, default=None) -> float:
        v = self._raw(key, default)
        if v is None:
            raise ConfigurationError(f"missing required numeric key {key!r}")
        try:
            return float(v)
        except ValueError as err:
            raise ConfigurationError(f"key {key!r}: cannot parse number from {v!r}") from err

    def get_bool(self, key: str, default=None) -> bool:
        v = self._raw(key, None)
        if v is None:
            if default is None:
                raise ConfigurationError(f"missing required boolean key {key!r}")
            return bool(default)
        if isinstance(v, bool):
            return v
        return _parse_bool(str(v))

    def charlie_label(self, default: str = "P") -> str:
        label = (self.get_str("charlie_state") or default).upper()
        if label not in SIX_STATES:
            raise ConfigurationError(
                f"charlie_state must be one of H, V, P, M, R, L; got {label!r}")
        return label

    def basis(self, default: str | None = None) -> MeasurementBasis:
        raw = self.get_str("bob_basis") or default
        if raw is None:
            raise ConfigurationError("bob_basis is required")
        try:
            return MeasurementBasis(raw.upper())
        except ValueError as err:
            raise ConfigurationError(f"bob_basis must be HV, PM or RL; got {raw!r}") from err

    def detector_table(self) -> dict[str, ex.DetectorSpec]:
        table = {}
        for name in ex.DETECTOR_NAMES:
            low = name.lower()
            table[name] = ex.DetectorSpec(
                efficiency=self.get_float(f"eff_{low}"),
                dark_rate_hz=self.get_float(f"dark_{low}"))
        return table

    def config(self, charlie_label: str, basis: MeasurementBasis,
               seed: int, **forced) -> ex.ExperimentConfig:
        kwargs = dict(
            source=SourceParams(g1=self.get_float("g1"), g2=self.get_float("g2"),
                                xi=self.get_float("xi")),
            pulses=self.get_int("pulses"),
            seed=seed,
            charlie_state=SIX_STATES[charlie_label],
            bob_basis=basis,
            attenuation_db=self.get_float("attenuation_db"),
            rep_period_ps=self.get_int("rep_period_ps"),
            detector_table=self.detector_table(),
            jitter_sigma_ps=self.get_float("jitter_sigma_ps"),
            tag_resolution_ps=self.get_int("tag_resolution_ps"),
            feed_forward=self.get_bool("feed_forward", True),
            ff_delay_ps=self.get_int("ff_delay_ps"),
            drift_angle_rad=self.get_float("drift_angle_rad"),
            window_ps=self.get_int("window_ps"),
            n_max=self.get_int("n_max"),
        )
        kwargs.update(forced)
        return ex.ExperimentConfig(**kwargs)

    def config_hash(self) -> str:
        merged = dict(GLOBAL_DEFAULTS)
        merged.update(self.defaults)
        merged.update(self.values)
        merged.pop("output_dir", None)
        merged["command"] = self.command
        blob = "\n".join(f"{k}={merged[k]}" for k in sorted(merged))
        return hashlib.sha256(blob.encode()).hexdigest()[:12]

    def header_comment(self) -> str:
        return (f"# telesim {__version__} seed={self.get_int('seed')} "
                f"config={self.config_hash()}")


def subseed(seed: int, tag: str) -> int:
    digest = hashlib.sha256(f"{seed}:{tag}".encode()).digest()
    return int.from_bytes(digest[:8], "little") % (2 ** 63)


class OutputSet:
    """Tracks files written by one command so failures leave no partials."""

    def __init__(self, outdir: Path):
        self.outdir = outdir
        self.paths: list[Path] = []

    def path(self, name: str) -> Path:
        self.outdir.mkdir(parents=True, exist_ok=True)
        p = self.outdir / name
        self.paths.append(p)
        return p

    def discard(self) -> None:
        for p in self.paths:
            try:
                p.unlink(missing_ok=True)
            except OSError:
                pass


def _write_json(path: Path, comment: str, payload: dict) -> None:
    with open(path, "w") as fh:
        fh.write(comment + "\n")
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_json_report(path) -> dict:
    """Read a report written by this tool (comment line + JSON body)."""
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return json.loads("".join(lines))


def read_table_csv(path) -> np.ndarray:
    """Read a CSV with leading comment lines into a named record array."""
    import io as _io
    with open(path) as fh:
        body = "".join(ln for ln in fh if not ln.startswith("#"))
    return np.genfromtxt(_io.StringIO(body), delimiter=",", names=True)


def _complex_matrix_payload(m: np.ndarray) -> dict:
    return {"re": np.real(m).tolist(), "im": np.imag(m).tolist()}


def _tally_offsets(cfg: ex.ExperimentConfig) -> dict[str, int]:
    return {"D5": cfg.ff_delay_ps, "D6": cfg.ff_delay_ps}


def _run_tally(man: Manifest, cfg: ex.ExperimentConfig, out: OutputSet,
               tag_stem: str | None):
    """Execute one run on the appropriate path; return (RunResult, EventTally)."""
    if man.get_bool("emit_tags", False):
        res = ex.run(cfg)
        tally = co.tally_events(res.tags, cfg.window_ps, offsets=_tally_offsets(cfg))
        if tag_stem is not None:
            ex.write_tags_qtt(out.path(f"{tag_stem}.qtt"), res.tags)
            ex.write_tags_csv(out.path(f"{tag_stem}.csv"), res.tags)
        return res, tally
    res = ex.run_counts(cfg)
    return res, res.tally


def _fidelity_from_tally(tally, label: str, basis: MeasurementBasis,
                         feed_forward: bool, post_correct: bool):
    charlie = SIX_STATES[label]
    a, b = co.visibility_from_tally(tally, charlie, basis, feed_forward, post_correct)
    n = a + b
    if n == 0:
        return float("nan"), float("nan"), 0
    f = a / n
    sigma = math.sqrt(max(f * (1.0 - f), 1.0 / n) / n)
    return f, sigma, n


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_simulate(man: Manifest, out: OutputSet) -> None:
    man.set_defaults(post_correct="false")
    t_start = time.perf_counter()
    labels = [man.charlie_label()] if man.has("charlie_state") else list("HVPMRL")
    seed = man.get_int("seed")
    post_correct = man.get_bool("post_correct", False)

    per_state = {}
    csv_rows = []
    for label in labels:
        basis = man.basis(default=STATE_BASIS_SLOT[label][0].value)
        cfg = man.config(label, basis, subseed(seed, f"simulate-{label}"))
        tag_stem = (f"tags_{label}" if len(labels) > 1 else "tags") \
            if man.get_bool("emit_tags", False) else None
        res, tally = _run_tally(man, cfg, out, tag_stem)
        fid, sigma, n = _fidelity_from_tally(tally, label, basis,
                                             cfg.feed_forward, post_correct)
        per_state[label] = {
            "basis": basis.value,
            "fidelity": fid,
            "fidelity_sigma": sigma,
            "visibility": 2.0 * fid - 1.0 if not math.isnan(fid) else float("nan"),
            "n_events": tally.n_events,
            "n_ambiguous": tally.n_ambiguous,
            "attempts": {k.value: v for k, v in res.attempts.items()},
        }
        for outcome, (n_plus, n_minus) in tally.by_outcome.items():
            csv_rows.append((label, basis.value, outcome.value, n_plus, n_minus))

    fids = [s["fidelity"] for s in per_state.values()]
    avg_f = float(np.nanmean(fids)) if fids else float("nan")
    summary = {
        "command": "simulate",
        "version": __version__,
        "seed": seed,
        "config_hash": man.config_hash(),
        "post_correct": post_correct,
        "states": per_state,
        "average_fidelity": avg_f,
        "average_visibility": 2.0 * avg_f - 1.0,
        "total_fourfolds": int(sum(s["n_events"] for s in per_state.values())),
        "wall_time_s": round(time.perf_counter() - t_start, 3),
    }

    counts_path = out.path("counts.csv")
    with open(counts_path, "w") as fh:
        fh.write(man.header_comment() + "\n")
        fh.write("state,basis,bsm,n_plus,n_minus\n")
        for row in csv_rows:
            fh.write(",".join(str(x) for x in row) + "\n")
    _write_json(out.path("summary.json"), man.header_comment(), summary)

    if man.get_bool("figures", True):
        from . import plots
        plots.state_fidelity_figure(
            out.path("fig_state_fidelity.png"), list(per_state),
            [per_state[k]["fidelity"] for k in per_state],
            [per_state[k]["fidelity_sigma"] for k in per_state])


def cmd_tomo_state(man: Manifest, out: OutputSet) -> None:
    man.set_defaults(post_correct="false")
    label = man.charlie_label()
    seed = man.get_int("seed")
    counts = {}
    for basis in MeasurementBasis:
        cfg = man.config(label, basis, subseed(seed, f"tomo-{label}-{basis.value}"))
        _, tally = _run_tally(man, cfg, out, None)
        counts[basis] = (tally.n_plus, tally.n_minus)
    tc = tm.TomographyCounts(counts)
    tm.write_counts_csv(out.path("counts.csv"), tc, man.header_comment())

    mle = tm.mle_state(tc)
    from .qstate import bloch_vector, fidelity, purity
    ideal = SIX_STATES[label]
    payload = {
        "command": "tomo-state",
        "state_label": label,
        "rho": _complex_matrix_payload(mle.rho.entries),
        "bloch": bloch_vector(mle.rho).tolist(),
        "purity": purity(mle.rho),
        "fidelity_to_ideal": fidelity(ideal, mle.rho),
        "mle": {"converged": mle.converged, "iterations": mle.iterations,
                "log_likelihood": mle.log_likelihood, "message": mle.message},
        "counts": {b.value: list(counts[b]) for b in MeasurementBasis},
        "feed_forward": man.get_bool("feed_forward", True),
        "seed": seed,
        "config_hash": man.config_hash(),
    }
    _write_json(out.path("state.json"), man.header_comment(), payload)
    if man.get_bool("figures", True):
        from . import plots
        plots.density_figure(out.path("fig_state.png"), mle.rho.entries,
                             title=f"teleported |{label}>")


def cmd_tomo_process(man: Manifest, out: OutputSet) -> None:
    rhos = []
    sources = {}
    for probe in tm.PROBE_LABELS:
        key = f"probe_{probe.lower()}"
        path = man.get_str(key)
        if not path:
            raise ConfigurationError(f"missing probe counts file for {probe} "
                                     f"(set {key} = <counts.csv>)")
        if not Path(path).exists():
            raise ConfigurationError(f"probe counts file for {probe} not found: {path}")
        counts = tm.read_counts_csv(path)
        rhos.append(tm.mle_state(counts).rho)
        sources[probe] = str(path)

    rec = tm.process_from_pairs(tm.PROBE_STATES, rhos)
    f_proc = tm.process_fidelity(rec.chi, tm.ProcessMatrix.identity())
    bmap = tm.bloch_map(rec.chi)
    cloud = bmap.deformed_sphere(1024)

    ell_path = out.path("ellipsoid.csv")
    with open(ell_path, "w") as fh:
        fh.write(man.header_comment() + "\n")
        fh.write("x,y,z\n")
        for p in cloud:
            fh.write(f"{p[0]:.9f},{p[1]:.9f},{p[2]:.9f}\n")

    payload = {
        "command": "tomo-process",
        "chi_raw": _complex_matrix_payload(rec.chi_raw),
        "chi_projected": _complex_matrix_payload(rec.chi.chi),
        "process_fidelity_vs_identity": f_proc,
        "bloch_map": {"m": bmap.m.tolist(), "c": bmap.c.tolist()},
        "probe_files": sources,
        "probe_set": list(tm.PROBE_LABELS),
        "feed_forward": man.get_bool("feed_forward", True),
        "seed": man.get_int("seed"),
        "config_hash": man.config_hash(),
    }
    _write_json(out.path("chi.json"), man.header_comment(), payload)
    if man.get_bool("figures", True):
        from . import plots
        plots.chi_figure(out.path("fig_chi.png"), rec.chi.chi)
        plots.ellipsoid_figure(out.path("fig_ellipsoid.png"), cloud)


def _sweep_grid(man: Manifest) -> np.ndarray:
    start = man.get_float("sweep_start_db", 0.0)
    stop = man.get_float("sweep_stop_db", 60.0)
    step = man.get_float("sweep_step_db", 5.0)
    if step <= 0 or stop < start:
        raise ConfigurationError("sweep bounds must satisfy start <= stop, step > 0")
    return np.arange(start, stop + step / 2.0, step)


def cmd_sweep_attenuation(man: Manifest, out: OutputSet) -> None:
    man.set_defaults(feed_forward="false", post_correct="true")
    grid = _sweep_grid(man)
    seed = man.get_int("seed")
    label = man.charlie_label()
    basis = man.basis(default=STATE_BASIS_SLOT[label][0].value)
    post_correct = man.get_bool("post_correct", True)
    target = man.get_int("target_events", 0)
    min_pulses = man.get_int("min_pulses", 100_000)
    cap = man.get_int("pulses")

    rows = []
    for db in grid:
        cfg = man.config(label, basis, subseed(seed, f"att-{db:.6g}"),
                         attenuation_db=float(db))
        if target > 0:
            est = ex.expected_rates(cfg)["total_per_pulse"]
            want = int(target / est) + 1 if est > 0 else cap
            cfg = cfg.with_overrides(pulses=int(np.clip(want, min_pulses, cap)))
        res = ex.run_counts(cfg)
        tally = res.tally
        a, b = co.visibility_from_tally(tally, SIX_STATES[label], basis,
                                        cfg.feed_forward, post_correct)
        n = a + b
        vis = (a - b) / n if n else float("nan")
        vsig = co.visibility_sigma(a, b)
        rate = tally.n_events / cfg.duration_s()
        n_dark = (cfg.detector_table["D5"].dark_rate_hz
                  + cfg.detector_table["D6"].dark_rate_hz)
        point_snr = cfg.eta / (n_dark * cfg.window_ps * 1e-12) if n_dark > 0 \
            else float("inf")
        rows.append({"attenuation_db": float(db), "rate_hz": rate,
                     "visibility": vis, "snr": point_snr,
                     "n_events": tally.n_events, "n_ambiguous": tally.n_ambiguous,
                     "vis_sigma": vsig, "pulses": cfg.pulses})

    model_rate = model_vis = None
    fit_info = None
    if man.get_bool("with_model", False):
        # configured truth for the model: raw receiver dark rate rescaled for
        # the anchor-relative window geometry of the event finder
        raw_dark = man.get_float("dark_d5") + man.get_float("dark_d6")
        n_dark = man.get_float("n_hz", lm.effective_dark_rate_hz(
            raw_dark, man.get_int("window_ps"), man.get_float("jitter_sigma_ps")))
        tau_s = man.get_float("tau_s", man.get_int("window_ps") * 1e-12)
        fit = lm.fit_budget([r["attenuation_db"] for r in rows],
                            [r["rate_hz"] for r in rows],
                            [r["visibility"] for r in rows],
                            n_hz=n_dark, tau_s=tau_s,
                            rate_sigma=[math.sqrt(max(r["n_events"], 1))
                                        / (r["pulses"] * man.get_int("rep_period_ps") * 1e-12)
                                        for r in rows],
                            vis_sigma=[max(r["vis_sigma"], 1e-6) if math.isfinite(r["vis_sigma"])
                                       else 1.0 for r in rows])
        model = lm.predict_rate_visibility(fit.budget, grid)
        model_rate = [p.rate_hz for p in model]
        model_vis = [p.visibility for p in model]
        fit_info = {"p_bsm_hz": fit.budget.p_bsm_hz, "v0": fit.budget.v0,
                    "s2_frac": fit.budget.s2_frac, "n_hz": n_dark, "tau_s": tau_s,
                    "residual_norm": fit.residual_norm, "flagged": fit.flagged,
                    "message": fit.message}

    csv_path = out.path("attenuation_sweep.csv")
    with open(csv_path, "w") as fh:
        fh.write(man.header_comment() + "\n")
        header = "attenuation_db,rate_hz,visibility,snr,n_events,n_ambiguous,vis_sigma,pulses"
        if model_rate is not None:
            header += ",model_rate_hz,model_visibility"
        fh.write(header + "\n")
        for i, r in enumerate(rows):
            line = (f"{r['attenuation_db']:.6g},{r['rate_hz']:.9e},"
                    f"{r['visibility']:.9f},{r['snr']:.9e},{r['n_events']},"
                    f"{r['n_ambiguous']},{r['vis_sigma']:.9f},{r['pulses']}")
            if model_rate is not None:
                line += f",{model_rate[i]:.9e},{model_vis[i]:.9f}"
            fh.write(line + "\n")

    if fit_info is not None:
        _write_json(out.path("sweep_fit.json"), man.header_comment(),
                    {"command": "sweep-attenuation", "fit": fit_info})
    if man.get_bool("figures", True):
        from . import plots
        plots.attenuation_figure(
            out.path("fig_attenuation.png"),
            [r["attenuation_db"] for r in rows], [r["rate_hz"] for r in rows],
            [r["visibility"] for r in rows], model_rate, model_vis,
            vis_sigma=[r["vis_sigma"] for r in rows])


def cmd_sweep_window(man: Manifest, out: OutputSet) -> None:
    man.set_defaults(feed_forward="false", post_correct="true")
    seed = man.get_int("seed")
    label = man.charlie_label()
    basis = man.basis(default=STATE_BASIS_SLOT[label][0].value)
    post_correct = man.get_bool("post_correct", True)
    start_ns = man.get_float("window_start_ns", 1.0)
    stop_ns = man.get_float("window_stop_ns", 29.0)
    step_ns = man.get_float("window_step_ns", 1.0)
    if step_ns <= 0 or stop_ns < start_ns:
        raise ConfigurationError("window sweep bounds must satisfy start <= stop, step > 0")
    taus = [int(round(t * 1000)) for t in
            np.arange(start_ns, stop_ns + step_ns / 2.0, step_ns)]

    cfg = man.config(label, basis, subseed(seed, "sweep-window"))
    res = ex.run(cfg)
    if man.get_bool("emit_tags", False):
        ex.write_tags_qtt(out.path("tags.qtt"), res.tags)
        ex.write_tags_csv(out.path("tags.csv"), res.tags)
    points = co.window_sweep(res.tags, taus, SIX_STATES[label], basis,
                             cfg.feed_forward, offsets=_tally_offsets(cfg),
                             post_correct=post_correct)

    csv_path = out.path("window_sweep.csv")
    with open(csv_path, "w") as fh:
        fh.write(man.header_comment() + "\n")
        fh.write("tau_ps,n_events,visibility,sigma_violation,n_ambiguous,"
                 "n_correct,n_wrong\n")
        for p in points:
            fh.write(f"{p.tau_ps},{p.n_events},{p.visibility:.9f},"
                     f"{p.sigma_violation:.6f},{p.n_ambiguous},"
                     f"{p.n_correct},{p.n_wrong}\n")
    if man.get_bool("figures", True):
        from . import plots
        plots.window_figure(
            out.path("fig_window.png"),
            [p.tau_ps / 1000.0 for p in points],
            [p.visibility for p in points],
            [p.sigma_violation for p in points],
            vis_sigma=[co.visibility_sigma(p.n_correct, p.n_wrong) for p in points])


def _budget_from_manifest(man: Manifest) -> lm.LinkBudget:
    n_dark = man.get_float("n_hz", man.get_float("dark_d5") + man.get_float("dark_d6"))
    tau_s = man.get_float("tau_s", man.get_int("window_ps") * 1e-12)
    return lm.LinkBudget(
        attenuation_db=man.get_float("attenuation_db", 0.0),
        n_hz=n_dark, tau_s=tau_s,
        p_bsm_hz=man.get_float("p_bsm_hz"),
        v0=man.get_float("v0"),
        s2_frac=man.get_float("s2_frac", 0.0),
        v2=man.get_float("v2", 0.0))


def cmd_predict(man: Manifest, out: OutputSet) -> None:
    budget = _budget_from_manifest(man)
    grid = _sweep_grid(man)
    points = lm.predict_rate_visibility(budget, grid)
    csv_path = out.path("predict.csv")
    with open(csv_path, "w") as fh:
        fh.write(man.header_comment() + "\n")
        fh.write("attenuation_db,rate_hz,visibility,snr\n")
        for p in points:
            fh.write(f"{p.attenuation_db:.6g},{p.rate_hz:.9e},"
                     f"{p.visibility:.9f},{p.snr:.9e}\n")
    if man.get_bool("figures", True):
        from . import plots
        plots.attenuation_figure(out.path("fig_predict.png"),
                                 [p.attenuation_db for p in points],
                                 [p.rate_hz for p in points],
                                 [p.visibility for p in points])


def cmd_fit(man: Manifest, out: OutputSet) -> None:
    path = man.get_str("sweep_csv")
    if not path:
        raise ConfigurationError("fit requires sweep_csv = <attenuation sweep file>")
    if not Path(path).exists():
        raise ConfigurationError(f"sweep file not found: {path}")
    rows = read_table_csv(path)
    needed = ("attenuation_db", "rate_hz", "visibility")
    for col in needed:
        if col not in (rows.dtype.names or ()):
            raise ConfigurationError(f"sweep file lacks column {col!r}")
    n_dark = man.get_float("n_hz", man.get_float("dark_d5") + man.get_float("dark_d6"))
    tau_s = man.get_float("tau_s", man.get_int("window_ps") * 1e-12)
    vs = rows["vis_sigma"] if "vis_sigma" in rows.dtype.names else None
    fit = lm.fit_budget(rows["attenuation_db"], rows["rate_hz"], rows["visibility"],
                        n_hz=n_dark, tau_s=tau_s, vis_sigma=vs)
    payload = {
        "command": "fit",
        "sweep_csv": str(path),
        "held_fixed": {"n_hz": n_dark, "tau_s": tau_s},
        "estimates": {"p_bsm_hz": fit.budget.p_bsm_hz, "v0": fit.budget.v0,
                      "s2_frac": fit.budget.s2_frac},
        "residual_norm": fit.residual_norm,
        "n_points": fit.n_points,
        "flagged": fit.flagged,
        "message": fit.message,
        "seed": man.get_int("seed"),
        "config_hash": man.config_hash(),
    }
    _write_json(out.path("fit.json"), man.header_comment(), payload)
    if man.get_bool("figures", True):
        from . import plots
        model = lm.predict_rate_visibility(fit.budget, rows["attenuation_db"])
        plots.attenuation_figure(out.path("fig_fit.png"),
                                 rows["attenuation_db"], rows["rate_hz"],
                                 rows["visibility"],
                                 [p.rate_hz for p in model],
                                 [p.visibility for p in model])


_DISPATCH = {
    "simulate": cmd_simulate,
    "tomo-state": cmd_tomo_state,
    "tomo-process": cmd_tomo_process,
    "sweep-attenuation": cmd_sweep_attenuation,
    "sweep-window": cmd_sweep_window,
    "predict": cmd_predict,
    "fit": cmd_fit,
}


def _parse_overrides(extra: list[str]) -> dict[str, str]:
    values = {}
    i = 0
    while i < len(extra):
        item = extra[i]
        if not item.startswith("--"):
            raise ConfigurationError(f"unexpected argument {item!r}")
        key = item[2:].replace("-", "_")
        if "=" in key:
            key, _, val = key.partition("=")
            values[key] = val
            i += 1
            continue
        if i + 1 >= len(extra):
            raise ConfigurationError(f"flag --{key} expects a value")
        values[key] = extra[i + 1]
        i += 2
    return values


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="telesim",
        description="teleportation-over-a-lossy-link simulator and analysis toolkit")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("-m", "--manifest", help="flat key = value configuration file")
    parser.add_argument("-o", "--output-dir", default="out",
                        help="directory for result files (default: out)")
    args, extra = parser.parse_known_args(argv)

    out = None
    try:
        values: dict[str, str] = {}
        if args.manifest:
            if not Path(args.manifest).exists():
                raise ConfigurationError(f"manifest not found: {args.manifest}")
            values.update(parse_manifest_file(args.manifest))
        values.update(_parse_overrides(extra))
        command = values.pop("command", args.command)
        if command != args.command and args.command:
            command = args.command
        outdir = values.pop("output_dir", args.output_dir)
        man = Manifest(values, command, outdir)
        out = OutputSet(man.output_dir)
        _DISPATCH[command](man, out)
        return 0
    except (ConfigurationError, ValidationError) as err:
        print(f"telesim: configuration error: {err}", file=sys.stderr)
        if out is not None:
            out.discard()
        return 2
    except TeleSimError as err:
        print(f"telesim: error: {err}", file=sys.stderr)
        if out is not None:
            out.discard()
        return 1
    except Exception as err:  # noqa: BLE001 - CLI boundary
        print(f"telesim: unexpected failure: {err}", file=sys.stderr)
        if out is not None:
            out.discard()
        return 1


if __name__ == "__main__":
    sys.exit(main())
