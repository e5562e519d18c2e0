"""Offline training, online evaluation and convergence studies."""
from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__
from ..bifidelity import (
    QUANTITIES,
    Snapshot,
    assemble_surrogate,
    greedy_select,
    l2_norm,
    mean_l2_error,
    reconstruct_from_low,
    split_vector,
)
from ..errors import BifiError, InvalidState, SampleMismatch
from ..fluid_solver import run_low_fidelity
from ..kinetic_solver import run_high_fidelity
from ..phase_space import MacroField
from ..scenarios import ScenarioConfig, draw_samples
from .config import ExperimentConfig
from .fieldio import (
    inventory,
    read_matrix_csv,
    read_samples_csv,
    write_field_csv,
    write_json,
    write_matrix_csv,
    write_profile_csv,
    write_samples_csv,
    write_table_csv,
)

log = logging.getLogger(__name__)

RUNNERS = {"high": run_high_fidelity, "low": run_low_fidelity}
STUDY_COLUMNS = ("r", "err_rho", "err_u1", "err_T", "err_lowfi")


class SolverFailure(BifiError):
    def __init__(self, sample_id, model, cause):
        self.sample_id = sample_id
        self.model = model
        self.cause = cause
        cell = getattr(cause, "cell", None)
        where = f" (cell {cell})" if cell is not None else ""
        super().__init__(f"{model}-fidelity run failed for sample {sample_id}{where}: {cause}")


@dataclass
class SweepResult:
    fields: dict
    seconds: dict

    @property
    def mean_seconds(self) -> float:
        return float(np.mean(list(self.seconds.values()))) if self.seconds else 0.0


def _run_one(job):
    model, sample, scenario = job
    t0 = time.perf_counter()
    try:
        W = RUNNERS[model](sample, scenario)
    except (InvalidState, FloatingPointError, np.linalg.LinAlgError) as exc:
        raise SolverFailure(sample.id, model, exc) from None
    return sample.id, W.conserved, time.perf_counter() - t0


def sweep(model: str, samples, scenario: ScenarioConfig, workers: int = 1) -> SweepResult:
    """Run one model over many samples; results are keyed by sample id."""
    jobs = [(model, s, scenario) for s in samples]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    return SweepResult(
        {i: MacroField(w) for i, w, _ in results},
        {i: t for i, _, t in results},
    )


def block_scales(snapshots, dx: float) -> tuple:
    """Mean L2 norm of each (rho, u1, T) block over a snapshot set."""
    parts = [split_vector(s.vector) for s in snapshots]
    scales = []
    for q in QUANTITIES:
        s = float(np.mean([l2_norm(p[q], dx) for p in parts]))
        scales.append(s if s > 0 else 1.0)
    return tuple(scales)


@dataclass
class Timer:
    phases: dict = field(default_factory=dict)

    def run(self, name, fn, *args, **kwargs):
        t0 = time.perf_counter()
        out = fn(*args, **kwargs)
        self.phases[name] = self.phases.get(name, 0.0) + time.perf_counter() - t0
        return out


def _manifest(out: Path, exp: ExperimentConfig, timer: Timer, extra: dict) -> dict:
    files = [p for p in out.rglob("*") if p.is_file() and p.name != "manifest.json" and not p.name.endswith(".tmp")]
    data = {
        "artifact_version": __version__,
        "config_hash": exp.scenario.digest(),
        "scenario": exp.scenario.to_dict(),
        "layout": {k: [v.start, v.stop] for k, v in exp.scenario.layout().items()},
        "phase_seconds": timer.phases,
        "files": inventory(out, files),
    }
    data.update(extra)
    write_json(out / "manifest.json", data)
    return data


def run_model(model: str, exp: ExperimentConfig, samples, out, workers: int = 1) -> dict:
    """Write one field CSV per sample, then the manifest."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    samples = list(samples)
    _check_dims(samples, exp.scenario)
    timer = Timer()
    res = timer.run(f"{model}_sweep", sweep, model, samples, exp.scenario, workers)
    x = exp.scenario.high_grid().x_centers
    timer.run("write", lambda: [write_field_csv(out / f"{s.id}.csv", x, res.fields[s.id]) for s in samples])
    return _manifest(out, exp, timer, {
        "model": model,
        "samples": [s.id for s in samples],
        "run_seconds": res.seconds,
    })


def _check_dims(samples, scenario: ScenarioConfig):
    for s in samples:
        if s.dim != scenario.dim:
            raise SampleMismatch(f"sample {s.id} has {s.dim} parameters, scenario expects {scenario.dim}")


def _load_low_sweep(path: Path, ids):
    if not path.exists():
        return None
    stored_ids, matrix = read_matrix_csv(path)
    if stored_ids != list(ids):
        log.warning("ignoring %s: sample ids differ from the current training set", path)
        return None
    return matrix


def train(exp: ExperimentConfig, out, workers: int = 1, samples=None, budget: int | None = None, seed: int | None = None) -> Path:
    """Offline stage: cheap sweep, greedy selection, expensive runs, assembly."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    scen = exp.scenario
    budget = exp.budget if budget is None else budget
    if samples is None:
        samples = draw_samples(scen, scen.n_train, seed, "train")
    samples = list(samples)
    _check_dims(samples, scen)
    if budget > len(samples):
        raise SampleMismatch(f"budget {budget} exceeds the {len(samples)} training samples")
    dx = scen.high_grid().dx
    timer = Timer()
    write_samples_csv(out / "samples_train.csv", samples)

    low_path = out / "low_sweep.csv"
    low_matrix = _load_low_sweep(low_path, [s.id for s in samples])
    low_seconds = {}
    if low_matrix is None:
        res = timer.run("low_sweep", sweep, "low", samples, scen, workers)
        low_matrix = np.stack([np.concatenate([res.fields[s.id].rho, res.fields[s.id].u1, res.fields[s.id].T]) for s in samples])
        low_seconds = res.seconds
        write_matrix_csv(low_path, [s.id for s in samples], low_matrix)
    else:
        log.info("reusing completed low-fidelity sweep from %s", low_path)
    low_snaps = [Snapshot(s.id, v, "low") for s, v in zip(samples, low_matrix)]

    scales = block_scales(low_snaps, dx) if scen.block_scaling else None
    if scales is not None:
        low_snaps = [Snapshot(s.id, _scaled(s.vector, scales), "low") for s in low_snaps]

    sel = timer.run("greedy", greedy_select, low_snaps, budget, dx)
    for k, d in enumerate(sel.residuals, 1):
        log.info("greedy step %d: %s residual %.6e", k, sel.ids[k - 1], d)
    chosen = [samples[i] for i in sel.indices]
    high = timer.run("high_sweep", sweep, "high", chosen, scen, workers)
    high_snaps = [Snapshot.from_macro(s.id, high.fields[s.id], "high", scales) for s in chosen]
    surrogate = timer.run(
        "assemble", assemble_surrogate, sel, [low_snaps[i] for i in sel.indices], high_snaps, dx, scales
    )
    write_matrix_csv(out / "low_selected.csv", sel.ids, surrogate.low)
    write_matrix_csv(out / "high_selected.csv", sel.ids, surrogate.high)
    write_json(out / "config.json", exp.to_dict())
    _manifest(out, exp, timer, {
        "kind": "surrogate",
        "budget": budget,
        "selected": len(sel.ids),
        "early_stop": sel.early_stop,
        "ids": sel.ids,
        "z": [list(s.z) for s in chosen],
        "residuals": [float(d) for d in sel.residuals],
        "gramian_condition": surrogate.condition_number,
        "gramian_rank": surrogate.rank,
        "block_scales": list(scales) if scales else None,
        "n_train": len(samples),
        "low_seconds": low_seconds,
        "high_seconds": high.seconds,
    })
    return out


def _scaled(v, scales):
    return np.concatenate([p / s for p, s in zip(np.split(v, 3), scales)])


def load_surrogate(path):
    """Return (surrogate, experiment config, manifest) from a trained directory."""
    import json

    from ..bifidelity import BiFidelitySurrogate, SelectionResult

    path = Path(path)
    try:
        manifest = json.loads((path / "manifest.json").read_text())
        exp = ExperimentConfig.from_dict(json.loads((path / "config.json").read_text()))
    except OSError as exc:
        raise SampleMismatch(f"no trained surrogate in {path}: {exc}") from exc
    ids_l, low = read_matrix_csv(path / "low_selected.csv")
    ids_h, high = read_matrix_csv(path / "high_selected.csv")
    if ids_l != manifest["ids"] or ids_h != manifest["ids"]:
        raise SampleMismatch("stored snapshot ids do not match the manifest")
    scales = tuple(manifest["block_scales"]) if manifest.get("block_scales") else None
    sel = SelectionResult(list(ids_l), list(range(len(ids_l))), np.array(manifest["residuals"]), low, manifest["early_stop"])
    return BiFidelitySurrogate(sel, low, high, exp.scenario.high_grid().dx, scales), exp, manifest


def _fields(W: MacroField) -> dict:
    return {"rho": W.rho, "u1": W.u1, "T": W.T}


def evaluate(surrogate_dir, samples, out, with_reference: bool = False, workers: int = 1, r_list=None) -> dict:
    """Online stage for a set of test samples; optionally scores against the expensive model."""
    surrogate, exp, manifest = load_surrogate(surrogate_dir)
    scen = exp.scenario
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    samples = list(samples)
    _check_dims(samples, scen)
    grid = scen.high_grid()
    dx, x = grid.dx, grid.x_centers
    timer = Timer()

    low = timer.run("low_sweep", sweep, "low", samples, scen, workers)
    recon = {}
    for s in samples:
        vec = _scaled(_vec(low.fields[s.id]), surrogate.scales) if surrogate.scales else _vec(low.fields[s.id])
        recon[s.id] = timer.run("reconstruct", reconstruct_from_low, surrogate, vec)
    (out / "bifi").mkdir(exist_ok=True)
    for s in samples:
        f = recon[s.id].fields()
        write_profile_csv(out / "bifi" / f"{s.id}.csv", x, f)
    write_samples_csv(out / "samples_test.csv", samples)

    report = {
        "n_test": len(samples),
        "budget": surrogate.size,
        "low_residuals": {s.id: recon[s.id].low_residual for s in samples},
        "mean_low_seconds": low.mean_seconds,
    }
    r_values = sorted(set(r_list)) if r_list else [surrogate.size]
    if r_list and len(set(r_list)) != len(r_list):
        log.warning("duplicate entries in r list removed")
    if max(r_values) > surrogate.size:
        raise SampleMismatch(f"r = {max(r_values)} exceeds the trained budget {surrogate.size}")

    if with_reference:
        high = timer.run("high_sweep", sweep, "high", samples, scen, workers)
        ref = {s.id: _fields(high.fields[s.id]) for s in samples}
        lowf = {s.id: _fields(low.fields[s.id]) for s in samples}
        low_err = mean_l2_error(ref, lowf, dx)
        rows = []
        for r in r_values:
            sub = surrogate.prefix(r)
            approx = {}
            for s in samples:
                vec = recon[s.id].low_vector
                approx[s.id] = reconstruct_from_low(sub, vec).fields()
            err = mean_l2_error(ref, approx, dx)
            rows.append((r, err["rho"], err["u1"], err["T"], low_err["rho"]))
        write_table_csv(out / "convergence.csv", STUDY_COLUMNS, rows)
        _write_stats(out / "stats.csv", x, samples, ref, {s.id: recon[s.id].fields() for s in samples}, lowf)
        report.update({
            "errors": {str(r[0]): dict(zip(QUANTITIES, r[1:4])) for r in rows},
            "low_fidelity_errors": low_err,
            "mean_high_seconds": high.mean_seconds,
            "speedup": high.mean_seconds / low.mean_seconds if low.mean_seconds > 0 else None,
            "r": r_values,
        })
    write_json(out / "report.json", report)
    _manifest(out, exp, timer, {
        "kind": "evaluation",
        "surrogate": str(Path(surrogate_dir)),
        "surrogate_config_hash": manifest["config_hash"],
        "with_reference": with_reference,
        "n_test_declared": scen.n_test,
    })
    return report


def _vec(W: MacroField) -> np.ndarray:
    return np.concatenate([W.rho, W.u1, W.T])


def _write_stats(path, x, samples, ref, bifi, low):
    cols = {}
    for label, src in (("high", ref), ("bifi", bifi), ("low", low)):
        for q in QUANTITIES:
            stack = np.stack([src[s.id][q] for s in samples])
            cols[f"mean_{q}_{label}"] = stack.mean(axis=0)
            cols[f"std_{q}_{label}"] = stack.std(axis=0)
    write_profile_csv(path, x, cols)


def study(exp: ExperimentConfig, r_list, out, workers: int = 1, seed: int | None = None, test_samples=None) -> dict:
    """Train once at the largest r, then score every nested prefix on a test set."""
    r_values = sorted(set(int(r) for r in r_list))
    if len(r_values) != len(list(r_list)):
        log.warning("duplicate entries in r list removed")
    if not r_values or r_values[0] < 1:
        raise ValueError("r list must contain positive integers")
    out = Path(out)
    sdir = train(exp, out / "surrogate", workers, budget=max(r_values), seed=seed)
    if test_samples is None:
        test_samples = draw_samples(exp.scenario, exp.scenario.n_test, seed, "test")
    report = evaluate(sdir, test_samples, out / "eval", with_reference=True, workers=workers, r_list=r_values)
    rows = [(int(r),) + tuple(report["errors"][str(r)][q] for q in QUANTITIES) + (report["low_fidelity_errors"]["rho"],)
            for r in report["r"]]
    write_table_csv(out / "study.csv", STUDY_COLUMNS, rows)
    return report


def read_samples_for(exp: ExperimentConfig, path):
    return read_samples_csv(path, exp.scenario.dim)
