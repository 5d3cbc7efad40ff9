"""Scenario files, run orchestration, the static baseline pairing and bundled presets."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .engine import SimConfig, SimError, SimulationResult, run
from .routing import AntNetParams
from .topology import FailureSchedule, Topology, TopologyError, parse_topology
from .workload import RunSummary, WorkloadSpec, cohort, metrics_csv, summarize, summary_csv, workload_digest

PRESET_ROOT = Path(__file__).parent / "data" / "presets"
PRESETS = ("fig6", "fig7", "fig8")

_SIM_KEYS = {
    "seed": int, "duration": float, "processing_delay_base": float, "load_smoothing": float,
    "ant_size": int, "metrics_interval": float, "data_ttl": int, "launch_interval": float,
}
_ANTNET_KEYS = {
    "eta": float, "window": int, "c1": float, "c2": float, "z": float, "r_min": float,
    "r_max": float, "mode": str, "subpath": "bool", "launch_interval": float, "explore": float,
}
_WORKLOAD_KEYS = {
    "calls": int, "rate": float, "packet_count": int, "packet_size": int,
    "start": float, "convergence_window": float,
}
_SECTIONS = ("topology", "sim", "antnet", "workload", "failures", "output")


class ScenarioError(ValueError):
    """Validation failure; the message names file, section and line where known."""

    def __init__(self, message: str, path=None, section: str | None = None, line: int | None = None):
        self.path, self.section, self.line = path, section, line
        where = [str(path)] if path is not None else []
        if section:
            where.append(f"[{section}]")
        if line is not None:
            where.append(f"line {line}")
        super().__init__(f"{' '.join(where)}: {message}" if where else message)


@dataclass(frozen=True)
class Scenario:
    path: Path | None
    text: str
    topology_path: Path
    topology_text: str
    topology: Topology
    sim: SimConfig
    params: AntNetParams
    workload: WorkloadSpec
    schedule: FailureSchedule
    out_dir: Path | None = None

    @property
    def name(self) -> str:
        return self.path.stem if self.path else "scenario"

    def with_seed(self, seed: int) -> "Scenario":
        return dataclasses.replace(self, sim=dataclasses.replace(self.sim, seed=seed))


def _convert(kind, raw: str):
    if kind == "bool":
        low = raw.lower()
        if low in ("true", "yes", "1", "on"):
            return True
        if low in ("false", "no", "0", "off"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    return kind(raw)


def parse_scenario(text: str, path: Path | None = None, base_dir: Path | None = None) -> Scenario:
    """Parse and fully validate a scenario document (topology file included)."""
    base_dir = base_dir or (path.parent if path else Path.cwd())
    values: dict[str, dict[str, tuple[object, int]]] = {s: {} for s in _SECTIONS}
    failures: list[tuple[float, int]] = []
    failure_lines: list[int] = []
    section = None
    tables = {"sim": _SIM_KEYS, "antnet": _ANTNET_KEYS, "workload": _WORKLOAD_KEYS,
              "topology": {"path": str}, "output": {"dir": str}}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in _SECTIONS:
                raise ScenarioError(f"unknown section [{section}]", path, None, lineno)
            continue
        if section is None:
            raise ScenarioError("content before the first section header", path, None, lineno)
        if section == "failures":
            parts = line.split()
            if len(parts) != 4 or parts[0] != "remove" or parts[2] != "@":
                raise ScenarioError("expected 'remove <node-id> @ <time-s>'", path, section, lineno)
            try:
                failures.append((float(parts[3]), int(parts[1])))
            except ValueError:
                raise ScenarioError(f"bad removal {line!r}", path, section, lineno) from None
            failure_lines.append(lineno)
            continue
        if "=" not in line:
            raise ScenarioError("expected 'key = value'", path, section, lineno)
        key, raw_value = (s.strip() for s in line.split("=", 1))
        kinds = tables[section]
        if key not in kinds:
            raise ScenarioError(f"unknown key {key!r}", path, section, lineno)
        if key in values[section]:
            raise ScenarioError(f"duplicate key {key!r}", path, section, lineno)
        try:
            values[section][key] = (_convert(kinds[key], raw_value), lineno)
        except ValueError as exc:
            raise ScenarioError(f"{key}: {exc}", path, section, lineno) from None

    def build(section, factory, extra=None):
        kwargs = {k: v for k, (v, _) in values[section].items()}
        kwargs.update(extra or {})
        try:
            return factory(**kwargs)
        except (ValueError, SimError) as exc:
            raise ScenarioError(str(exc), path, section) from None

    if "path" not in values["topology"]:
        raise ScenarioError("missing 'path'", path, "topology")
    topo_ref, topo_line = values["topology"]["path"]
    topo_path = (base_dir / topo_ref).resolve() if not Path(topo_ref).is_absolute() else Path(topo_ref)
    try:
        topo_text = topo_path.read_text(encoding="utf-8")
    except OSError:
        raise ScenarioError(f"topology file not found: {topo_path}", path, "topology", topo_line) from None
    try:
        topo = parse_topology(topo_text, str(topo_path))
    except TopologyError as exc:
        raise ScenarioError(str(exc), path, "topology", topo_line) from None

    sim_vals = dict(values["sim"])
    sim_interval = sim_vals.pop("launch_interval", None)
    ant_interval = values["antnet"].get("launch_interval")
    if sim_interval and ant_interval and sim_interval[0] != ant_interval[0]:
        raise ScenarioError("launch_interval given in [sim] and [antnet] with different values", path, "sim", sim_interval[1])
    values["sim"] = sim_vals
    if sim_interval and not ant_interval:
        values["antnet"]["launch_interval"] = sim_interval

    params = build("antnet", AntNetParams)
    workload = build("workload", WorkloadSpec)
    sim = build("sim", SimConfig, {"workload": workload})
    try:
        schedule = FailureSchedule(tuple(failures))
        schedule.validate_against(topo)
    except TopologyError as exc:
        raise ScenarioError(str(exc), path, "failures", failure_lines[0] if failure_lines else None) from None
    if workload.calls and len(schedule.apply(topo).nodes) < 2:
        raise ScenarioError("workload needs at least 2 surviving nodes", path, "failures")

    out_dir = None
    if "dir" in values["output"]:
        out_dir = base_dir / values["output"]["dir"][0]
    return Scenario(path, text, topo_path, topo_text, topo, sim, params, workload, schedule, out_dir)


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ScenarioError("scenario file not found", path) from None
    return parse_scenario(text, path)


# -- running ----------------------------------------------------------------


@dataclass
class RunOutcome:
    scenario: Scenario
    antnet: SimulationResult
    static: SimulationResult | None = None

    def cohort_summary(self, result: SimulationResult) -> RunSummary | None:
        if not self.scenario.schedule.events:
            return None
        sc = self.scenario
        return summarize(cohort(result.calls, result.records, sc.topology, sc.schedule, sc.workload.convergence_window))


def run_antnet(scenario: Scenario) -> SimulationResult:
    return run(scenario.sim, scenario.topology, scenario.schedule, scenario.params)


def run_static(scenario: Scenario) -> SimulationResult:
    cfg = dataclasses.replace(scenario.sim, routing="static", ants=False)
    return run(cfg, scenario.topology, scenario.schedule, scenario.params)


def compare_baseline(scenario: Scenario) -> tuple[SimulationResult, SimulationResult]:
    """AntNet and frozen-Dijkstra runs over the same seed, workload and failures."""
    ant = run_antnet(scenario)
    static = run_static(scenario)
    if workload_digest(ant.calls) != workload_digest(static.calls):
        raise SimError("baseline pairing produced different workloads")
    return ant, static


def _summary_dict(summary: RunSummary | None):
    return dataclasses.asdict(summary) if summary is not None else None


def manifest(outcome: RunOutcome) -> dict:
    sc = outcome.scenario
    ant = outcome.antnet
    doc = {
        "code_version": __version__,
        "scenario_path": str(sc.path) if sc.path else None,
        "scenario_text": sc.text,
        "topology_path": str(sc.topology_path),
        "topology_text": sc.topology_text,
        "topology_sha256": hashlib.sha256(sc.topology_text.encode()).hexdigest(),
        "seed": sc.sim.seed,
        "sim": {k: v for k, v in dataclasses.asdict(sc.sim).items() if k != "workload"},
        "antnet": dataclasses.asdict(sc.params),
        "workload": dataclasses.asdict(sc.workload),
        "failures": [{"time": t, "node": n} for t, n in sc.schedule.events],
        "workload_sha256": workload_digest(ant.calls),
        "runs": {"antnet": _run_dict(outcome, ant)},
    }
    if outcome.static is not None:
        doc["runs"]["static"] = _run_dict(outcome, outcome.static)
    return doc


def _run_dict(outcome: RunOutcome, result: SimulationResult) -> dict:
    return {
        "trace_hash": result.trace_hash,
        "counters": dataclasses.asdict(result.counters),
        "summary": _summary_dict(result.summary),
        "post_removal_cohort": _summary_dict(outcome.cohort_summary(result)),
    }


def write_outputs(outcome: RunOutcome, out_dir: Path) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    files = {
        "metrics.csv": metrics_csv(outcome.antnet.series),
        "summary.csv": summary_csv(outcome.antnet.summary),
    }
    if outcome.static is not None:
        files["baseline_metrics.csv"] = metrics_csv(outcome.static.series)
        files["baseline_summary.csv"] = summary_csv(outcome.static.summary)
    files["manifest.json"] = json.dumps(manifest(outcome), indent=2, sort_keys=True) + "\n"
    written = []
    for name, body in files.items():
        target = out_dir / name
        target.write_text(body, encoding="utf-8")
        written.append(target)
    return written


def run_scenario(scenario: Scenario, out_dir=None, *, seed: int | None = None, baseline: bool = False) -> RunOutcome:
    if seed is not None:
        scenario = scenario.with_seed(seed)
    if baseline:
        ant, static = compare_baseline(scenario)
    else:
        ant, static = run_antnet(scenario), None
    outcome = RunOutcome(scenario, ant, static)
    target = Path(out_dir) if out_dir is not None else (scenario.out_dir or Path("runs") / scenario.name)
    write_outputs(outcome, target)
    return outcome


def replay_manifest(path) -> RunOutcome:
    """Re-execute a run from the scenario and topology text embedded in its manifest."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    scenario = _scenario_from_texts(doc["scenario_text"], doc["topology_text"], doc["scenario_path"])
    scenario = scenario.with_seed(doc["seed"])
    if "static" in doc["runs"]:
        ant, static = compare_baseline(scenario)
    else:
        ant, static = run_antnet(scenario), None
    return RunOutcome(scenario, ant, static)


def _scenario_from_texts(scenario_text: str, topology_text: str, name) -> Scenario:
    import tempfile

    with tempfile.TemporaryDirectory() as tmp:
        topo = Path(tmp) / "topology.topo"
        topo.write_text(topology_text, encoding="utf-8")
        lines = []
        section = None
        for raw in scenario_text.splitlines():
            stripped = raw.split("#", 1)[0].strip()
            if stripped.startswith("["):
                section = stripped.strip("[] ")
            if section == "topology" and stripped.startswith("path"):
                raw = f"path = {topo}"
            lines.append(raw)
        sc = parse_scenario("\n".join(lines) + "\n", Path(name) if name else None, Path(tmp))
    return dataclasses.replace(sc, text=scenario_text)


# -- presets ----------------------------------------------------------------


def preset_files(name: str) -> list[Path]:
    if name not in PRESETS:
        raise ScenarioError(f"unknown preset {name!r} (choose from {', '.join(PRESETS)})")
    return sorted((PRESET_ROOT / name).glob("sim*.scn"))


def run_preset(name: str, out_dir=None, *, seed: int | None = None, baseline: bool = False) -> list[RunOutcome]:
    scenarios = [load_scenario(p) for p in preset_files(name)]  # validate all before running any
    root = Path(out_dir) if out_dir is not None else Path("runs") / name
    return [run_scenario(sc, root / sc.name, seed=seed, baseline=baseline) for sc in scenarios]
