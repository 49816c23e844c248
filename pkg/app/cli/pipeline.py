"""
Module: pipeline
Description: The lab's commands. Each stage reads the artifacts of earlier stages from the output directory, writes
its own under `<output_dir>/<stage>/` and registers them in the manifest.

Stage seeds are `derive_seed(master_seed, stage, index)`, so any stage can be rerun in isolation.
"""

from dataclasses import replace
import json
import logging
from pathlib import Path
import time
from typing import Any, Callable

import numpy as np

from app.adversarial.histograms import amplitude_histogram, peak_agreement, position_histogram, top_peaks
from app.adversarial.models import Balance
from app.adversarial.one_pixel import allowed_positions, mine_perturbations, transfer_rate
from app.aes.codegen import CodegenOptions, first_round_program, memory_image, round_output
from app.aes.models import LeakageModel
from app.aes.reference import round_one_state
from app.classifiers.models import Predictor
from app.classifiers.trainer import train
from app.cli.config import PipelineConfig
from app.countermeasure.insertion import ProtectedProgram, protect, random_noise_program
from app.countermeasure.locate import annotate_source, locate_insertion_points, probe_sentinel, search_range
from app.countermeasure.models import InsertionPoint, NoiseSet
from app.countermeasure.selection import (
    candidate_pool,
    realizable_amplitude_bounds,
    select_noise_instructions,
    select_target_intervals,
)
from app.dataset.acquisition import acquire
from app.dataset.models import Campaign, Dataset
from app.dataset.processing import apply_stats, correlation_profile, standardize
from app.errors import ArtifactError, CountermeasureError
from app.evaluation import acceptance, reports
from app.evaluation.campaigns import Trainer, mean_rank_curve, model_rank_curve, naive_adversarial_study
from app.evaluation.models import RankCurve
from app.evaluation.overhead import analytic_spread, execution_overhead
from app.store.manifestDB import ManifestDB
from app.store.modelfiles import load_model, save_model
from app.store.perturbations import read_perturbations, write_perturbations
from app.store.traces import read_dataset, write_dataset
from app.template.attack import fit_templates
from app.typings import ClassifierKind, Verdict
from app.utils import derive_seed
from app.vm.assembler import assemble, parse_instruction
from app.vm.executor import execute
from app.vm.models import Program

logger = logging.getLogger(__name__)

ATTACKERS: tuple[ClassifierKind, ...] = ("template", "mlp", "cnn")
ROUND_CHECK_RUNS = 20


class Workspace:
    """Output directory of a run and its artifact manifest."""

    def __init__(self, config: PipelineConfig):
        self.config = config
        self.root = Path(config.output_dir)
        self.root.mkdir(parents=True, exist_ok=True)
        self.manifest = ManifestDB(self.root)
        self.failed_checks: dict[str, list[str]] = {}

    def path(self, stage: str, name: str) -> Path:
        return self.root / stage.replace("-", "_") / name

    def require(self, stage: str, name: str) -> Path:
        """Path of an artifact written by an earlier stage.

        Raises:
            ArtifactError: The file does not exist.
        """
        path = self.path(stage, name)
        if not path.exists():
            raise ArtifactError(f"missing artifact {path}: run the `{stage}` command first")
        return path

    def record(self, stage: str, path: Path) -> Path:
        self.manifest.record(path, stage, self.config.seed(stage))
        logger.debug(f"Wrote {path}")
        return path

    def write_json(self, stage: str, name: str, data: Any) -> Path:
        path = self.path(stage, name)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return self.record(stage, path)

    def write_text(self, stage: str, name: str, text: str) -> Path:
        path = self.path(stage, name)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
        return self.record(stage, path)

    def read_json(self, stage: str, name: str) -> Any:
        return json.loads(self.require(stage, name).read_text(encoding="utf-8"))

    def check(self, stage: str, name: str, outcome: Verdict) -> Verdict:
        """Record the verdict of a result check; failed checks leave the stage `partial`."""
        if outcome == "fail":
            logger.warning(f"Check failed in stage `{stage}`: {name}")
            self.failed_checks.setdefault(stage, []).append(name)
        return outcome


def unprotected_program(config: PipelineConfig) -> Program:
    return assemble(first_round_program(CodegenOptions(scratch_register=config.countermeasure.scratch_register)))


def probe_memory(config: PipelineConfig) -> dict[int, bytes]:
    """Memory of the noise-free probe and profiling runs: zero plaintext under the fixed key."""
    return memory_image(bytes(16), bytes.fromhex(config.campaign.fixed_key))


def model_name(kind: str, leakage: LeakageModel, suffix: str = "") -> str:
    return f"{kind}_{leakage.kind}{suffix}.npz"


def trainer_for(kind: ClassifierKind, config: PipelineConfig, leakage: LeakageModel) -> Trainer:
    """Attacker factory of the rank campaigns. Templates ignore the training seed."""
    if kind == "template":
        return lambda dataset, seed: fit_templates(dataset, config.template_regularization, config.template_ridge)
    if kind == "mlp":
        return lambda dataset, seed: train(dataset, config.mlp_spec(leakage, seed))
    return lambda dataset, seed: train(dataset, config.cnn_spec(leakage, seed, dataset.n))


def campaign_pair(config: PipelineConfig, stage: str, recompile_each_run: bool = False) -> tuple[Campaign, Campaign]:
    """Random-key profiling campaign and fixed-key attack campaign of a stage."""
    common = dict(config=config.device, length_cap=config.campaign.length_cap, recompile_each_run=recompile_each_run)
    profiling = Campaign(
        count=config.campaign.profiling_count, key_policy="random", seed=config.seed(stage, 0), **common
    )
    attack = Campaign(
        count=config.campaign.attack_count,
        key_policy="fixed",
        fixed_key=config.campaign.fixed_key,
        seed=config.seed(stage, 1),
        **common,
    )
    return profiling, attack


def load_capture(workspace: Workspace, name: str) -> Dataset:
    return read_dataset(workspace.require("capture", name))


def load_attacker(workspace: Workspace, kind: str, leakage: LeakageModel, suffix: str = "") -> Predictor:
    path = workspace.path("train", model_name(kind, leakage, suffix))
    if not path.exists():
        raise ArtifactError(f"missing model file {path}: run the `train` command first")
    return load_model(path)


def load_points(workspace: Workspace) -> list[InsertionPoint]:
    return [InsertionPoint.from_dict(point) for point in workspace.read_json("locate", "points.json")]


def load_variants(workspace: Workspace) -> dict[str, Program | ProtectedProgram]:
    return {
        "unprotected": unprotected_program(workspace.config),
        "random_noise": ProtectedProgram.from_dict(workspace.read_json("protect", "random_noise.json")),
        "protected": ProtectedProgram.from_dict(workspace.read_json("protect", "protected.json")),
    }


def check_round_output(variant: Program | ProtectedProgram, config: PipelineConfig, runs: int, seed: int) -> None:
    """Compare the round-one output of a few noise-free runs with the reference AES.

    Raises:
        CountermeasureError: An output differs.
    """
    quiet = config.device.model_copy(update={"noise_sigma": 0.0})
    for r in range(runs):
        rng = np.random.default_rng(derive_seed(seed, "round-check", r))
        plaintext, key = rng.bytes(16), rng.bytes(16)
        program = variant if isinstance(variant, Program) else variant.compile(derive_seed(seed, "compile", r))
        _, state = execute(program, memory_image(plaintext, key), quiet)
        if round_output(state) != round_one_state(plaintext, key):
            raise CountermeasureError(f"the program changes the round-one output (run {r})")


def rank_row(curve: RankCurve, **labels) -> dict[str, Any]:
    return labels | {
        "accuracy": curve.mean_accuracy,
        "rank_zero_M": curve.traces_to_rank_zero() or "",
        "final_mean_rank": float(curve.mean[-1]),
        "final_equivalence_rank": float(curve.equivalence.mean(axis=0)[-1]) if curve.equivalence is not None else "",
    }


def attack_traces(raw: Dataset, model: Predictor, count: int) -> np.ndarray:
    """The first `count` attack traces, standardized with the model's statistics."""
    return apply_stats(raw, model.stats).traces[:count]


# Stages


def capture(workspace: Workspace) -> None:
    """Acquire the unprotected profiling (random key) and attack (fixed key) datasets."""
    config = workspace.config
    program = unprotected_program(config)
    check_round_output(program, config, ROUND_CHECK_RUNS, config.seed("capture", 2))
    workspace.write_text("capture", "unprotected.asm", program.source_text)
    for campaign, name in zip(campaign_pair(config, "capture"), ("profiling.sct", "attack.sct")):
        dataset = acquire(program, campaign, config.leakage, threads=config.threads)
        workspace.record("capture", write_dataset(workspace.path("capture", name), dataset))


def train_attackers(workspace: Workspace) -> None:
    """Train every attacker on the whole profiling set, plus a label-shuffled MLP used as a control."""
    config = workspace.config
    standardized, _ = standardize(load_capture(workspace, "profiling.sct"))
    rows = []

    def save(model, name: str, label: str, leakage: LeakageModel) -> None:
        workspace.record("train", save_model(workspace.path("train", name), model))
        log = getattr(model, "training_log", [])
        rows.append({"model": label, "leakage": leakage.kind, "final_loss": log[-1] if log else ""})

    for i, leakage in enumerate(config.leakage_models()):
        profiling = standardized.relabel(leakage)
        for j, kind in enumerate(ATTACKERS):
            model = trainer_for(kind, config, leakage)(profiling, config.seed("train", 10 * i + j))
            save(model, model_name(kind, leakage), kind, leakage)

    profiling = standardized.relabel(config.leakage)
    shuffled = np.random.default_rng(config.seed("train-control")).permutation(profiling.labels)
    spec = config.mlp_spec(config.leakage, config.seed("train-control", 1))
    control = train(replace(profiling, labels=shuffled), spec)
    save(control, model_name("mlp", config.leakage, "_control"), "mlp_control", config.leakage)
    workspace.record("train", reports.write_table(workspace.path("train", "training.csv"), rows))


def attack(workspace: Workspace) -> None:
    """Accuracy and rank curves of the trained attackers on the unprotected attack set."""
    config = workspace.config
    raw = load_capture(workspace, "attack.sct")
    rows = []
    for leakage in config.leakage_models():
        curves = {}
        for i, kind in enumerate(ATTACKERS):
            model = load_attacker(workspace, kind, leakage)
            curve = model_rank_curve(
                model, raw.relabel(leakage), config.evaluation.repetitions, config.evaluation.max_traces,
                config.seed("attack", i),
            )
            curves[kind.upper()] = curve
            path = reports.write_rank_curve(workspace.path("attack", f"rank_{kind}_{leakage.kind}.csv"), curve)
            workspace.record("attack", path)
            recovered = acceptance.recovers_key(curve)
            name = f"{kind} ({leakage.kind}) recovers the key within {acceptance.RANK_ZERO_MAX_TRACES} traces"
            row = rank_row(curve, model=kind, leakage=leakage.kind)
            rows.append(row | {"recovers_key": workspace.check("attack", name, recovered)})
        path = reports.plot_rank_curves(workspace.path("attack", f"rank_{leakage.kind}.svg"), curves, leakage.kind)
        workspace.record("attack", path)
    workspace.record("attack", reports.write_table(workspace.path("attack", "accuracy.csv"), rows))


def mine(workspace: Workspace) -> None:
    """One-pixel perturbations against every attacker and the control, with histograms and the correlation check.

    A small Balance-terminated set is mined on the MLP as well, to compare the cost of both termination kinds.
    """
    config = workspace.config
    mining = config.mining
    raw = load_capture(workspace, "attack.sct")
    correlation = correlation_profile(raw)
    peaks = top_peaks(np.abs(correlation), mining.peak_count, distance=config.device.samples_per_cycle)
    radius = mining.peak_radius_cycles * config.device.samples_per_cycle
    logger.info(f"Correlation peaks at samples {peaks.tolist()}")
    frame = [{"sample": i, "correlation": float(c)} for i, c in enumerate(correlation)]
    workspace.record("mine", reports.write_table(workspace.path("mine", "correlation.csv"), frame))

    models = {kind: load_attacker(workspace, kind, config.leakage) for kind in ATTACKERS}
    models["control"] = load_attacker(workspace, "mlp", config.leakage, "_control")
    rows, mined = [], {}
    for i, (name, model) in enumerate(models.items()):
        traces = attack_traces(raw, model, mining.trace_count)
        de = config.de.model_copy(update={"seed": config.seed("mine", i)})
        started = time.perf_counter()
        mined[name] = perturbations = mine_perturbations(
            model, traces, config.termination, de, amplitude_bounds=mining.amplitude_bounds, threads=config.threads
        )
        logger.info(f"Mining against {name} took {time.perf_counter() - started:.1f} s")
        path = write_perturbations(workspace.path("mine", f"perturbations_{name}.csv"), perturbations)
        workspace.record("mine", path)

        successful = perturbations.successful
        counts = position_histogram(successful, raw.n)
        path = reports.write_position_histogram(workspace.path("mine", f"positions_{name}.csv"), counts)
        workspace.record("mine", path)
        path = reports.plot_position_histogram(workspace.path("mine", f"positions_{name}.svg"), counts, correlation)
        workspace.record("mine", path)
        histogram = amplitude_histogram(successful, mining.amplitude_bins, range=mining.amplitude_bounds)
        path = reports.write_amplitude_histogram(workspace.path("mine", f"amplitudes_{name}.csv"), histogram)
        workspace.record("mine", path)
        rows.append(
            {
                "model": name,
                "termination": config.termination.kind,
                "traces": len(perturbations),
                "success_rate": perturbations.success_rate,
                "mean_iterations": perturbations.mean_iterations,
                "peak_agreement": peak_agreement(successful, peaks, radius),
                "transfer_from_mlp": "",
            }
        )

    for row in rows:
        if row["model"] not in ("mlp", "control"):
            model = models[row["model"]]
            row["transfer_from_mlp"] = transfer_rate(
                model, attack_traces(raw, model, mining.trace_count), mined["mlp"], config.termination
            )

    for row in rows:
        row["efficacy_check"] = row["peak_check"] = ""
    control_rate = next(row["success_rate"] for row in rows if row["model"] == "control")
    mlp_row = next(row for row in rows if row["model"] == "mlp")
    efficacy = acceptance.one_pixel_efficacy(mlp_row["success_rate"], control_rate)
    mlp_row["efficacy_check"] = workspace.check("mine", "one-pixel efficacy against the MLP", efficacy)
    agreement = acceptance.peaks_agree(mlp_row["peak_agreement"])
    mlp_row["peak_check"] = workspace.check("mine", "MLP perturbations near the correlation peaks", agreement)

    if mining.balance_trace_count and models["mlp"].n_classes == 2:
        traces = attack_traces(raw, models["mlp"], mining.balance_trace_count)
        de = config.de.model_copy(update={"seed": config.seed("mine-balance")})
        started = time.perf_counter()
        balanced = mine_perturbations(
            models["mlp"], traces, Balance(), de, amplitude_bounds=mining.amplitude_bounds, threads=config.threads
        )
        logger.info(f"Balance-terminated mining of {len(traces)} traces took {time.perf_counter() - started:.1f} s")
        workspace.record("mine", write_perturbations(workspace.path("mine", "perturbations_mlp_balance.csv"), balanced))
        rows.append(
            {
                "model": "mlp",
                "termination": "balance",
                "traces": len(balanced),
                "success_rate": balanced.success_rate,
                "mean_iterations": balanced.mean_iterations,
                "peak_agreement": peak_agreement(balanced.successful, peaks, radius),
                "transfer_from_mlp": "",
                "efficacy_check": "",
                "peak_check": "",
            }
        )
    elif mining.balance_trace_count:
        logger.warning("Balance termination needs a two-class leakage model, skipping the Balance set")
    workspace.record("mine", reports.write_table(workspace.path("mine", "summary.csv"), rows))


def locate(workspace: Workspace) -> None:
    """Insertion points at the peaks of the position histograms, found by probing the unprotected program."""
    config = workspace.config
    program = unprotected_program(config)
    memory = probe_memory(config)
    n = config.campaign.length_cap
    counts = np.zeros(n, dtype=np.int64)
    for kind in ATTACKERS:
        perturbations = read_perturbations(workspace.require("mine", f"perturbations_{kind}.csv"))
        counts += position_histogram(perturbations.successful, n)

    # Only samples a probe can reach
    reach = probe_sentinel(program, search_range(program)[1], config.device, memory)
    counts[reach + 1 :] = 0
    if not counts.any():
        raise CountermeasureError("no successful perturbation inside the capture window to derive targets from")
    radius = config.countermeasure.window_radius
    targets = sorted(top_peaks(counts, config.countermeasure.point_count, distance=max(1, radius)).tolist())
    logger.info(f"Target samples {targets}")

    points = locate_insertion_points(
        program, targets, config.device, config.countermeasure.tolerance_cycles, memory_init=memory
    )
    workspace.record("locate", reports.write_probe_log(workspace.path("locate", "probes.csv"), points))
    workspace.write_json("locate", "points.json", [point.to_dict() for point in points])
    annotated = annotate_source(program.source_text, [point.instruction_index for point in points])
    workspace.write_text("locate", "annotated.asm", annotated)


def select(workspace: Workspace) -> None:
    """Constrained re-mining around the insertion points, target amplitude intervals and noise instructions."""
    config = workspace.config
    points = load_points(workspace)
    program = unprotected_program(config)
    radius = config.countermeasure.window_radius
    windows = [(point.observed_sample - radius, point.observed_sample + radius) for point in points]
    raw = load_capture(workspace, "attack.sct")
    mining = config.mining
    models = {kind: load_attacker(workspace, kind, config.leakage) for kind in ATTACKERS}
    stats = models["mlp"].stats
    bounds = realizable_amplitude_bounds(stats, allowed_positions(stats.n, windows), config.device)
    logger.info(f"Realizable amplitudes around the insertion points: [{bounds[0]:.3f}, {bounds[1]:.3f}]")

    histograms = {}
    for i, (kind, model) in enumerate(models.items()):
        de = config.de.model_copy(update={"seed": config.seed("select", i)})
        constrained = mine_perturbations(
            model,
            attack_traces(raw, model, mining.trace_count),
            config.termination,
            de,
            windows,
            bounds,
            threads=config.threads,
        )
        path = write_perturbations(workspace.path("select", f"perturbations_{kind}.csv"), constrained)
        workspace.record("select", path)
        histograms[kind.upper()] = histogram = amplitude_histogram(
            constrained.successful, config.mining.amplitude_bins, range=bounds
        )
        path = reports.write_amplitude_histogram(workspace.path("select", f"amplitudes_{kind}.csv"), histogram)
        workspace.record("select", path)
    workspace.record("select", reports.plot_amplitude_histogram(workspace.path("select", "amplitudes.svg"), histograms))

    filled = [histogram for histogram in histograms.values() if histogram.counts.any()]
    if not filled:
        raise CountermeasureError("no constrained perturbation succeeded: widen countermeasure_window_radius")
    intervals = select_target_intervals(filled)
    rows = [{"low": low, "high": high} for low, high in intervals]
    workspace.record("select", reports.write_table(workspace.path("select", "intervals.csv"), rows))

    noise_set = select_noise_instructions(
        candidate_pool(config.countermeasure.scratch_register),
        points,
        intervals,
        config.device,
        stats,
        program,
        memory_init=probe_memory(config),
        repetitions=config.countermeasure.profile_repetitions,
        margin=config.countermeasure.interval_margin,
        criterion=config.countermeasure.amplitude_criterion,
    )
    members = [
        {"instruction": text, "amplitude": amplitude, "delta": delta}
        for text, amplitude, delta in zip(noise_set.texts, noise_set.mean_amplitudes(), noise_set.mean_deltas())
    ]
    workspace.write_json("select", "noise.json", {"intervals": intervals, "members": members})


def protect_program(workspace: Workspace) -> None:
    """Bind the annotated program to its noise set, and build the random-noise control implementation."""
    config = workspace.config
    program = unprotected_program(config)
    points = load_points(workspace)
    selected = workspace.read_json("select", "noise.json")
    noise_set = NoiseSet(members=[parse_instruction(member["instruction"]) for member in selected["members"]])
    policy = config.insertion_policy()

    protected = protect(program, points, noise_set, policy)
    control = random_noise_program(
        program,
        config.countermeasure.random_noise_slots,
        candidate_pool(config.countermeasure.scratch_register),
        policy,
        config.seed("protect", 1),
        config.device,
        probe_memory(config),
    )
    for variant in (protected, control):
        check_round_output(variant, config, ROUND_CHECK_RUNS, config.seed("protect", 2))
        workspace.write_json("protect", f"{variant.implementation}.json", variant.to_dict())
    workspace.write_text("protect", "protected_example.asm", protected.source(config.seed("protect", 3)))


def evaluate(workspace: Workspace) -> None:
    """Retrain every attacker on every implementation's traces and compare the rank curves."""
    config = workspace.config
    evaluation = config.evaluation
    variants = load_variants(workspace)
    datasets = {"unprotected": (load_capture(workspace, "profiling.sct"), load_capture(workspace, "attack.sct"))}
    for implementation in ("random_noise", "protected"):
        pair = []
        for campaign, part in zip(campaign_pair(config, f"evaluate-{implementation}", True), ("profiling", "attack")):
            dataset = acquire(variants[implementation], campaign, config.leakage, threads=config.threads)
            path = write_dataset(workspace.path("evaluate", f"{implementation}_{part}.sct"), dataset)
            workspace.record("evaluate", path)
            pair.append(dataset)
        datasets[implementation] = (pair[0], pair[1])

    rows = []
    for j, leakage in enumerate(config.leakage_models()):
        for i, kind in enumerate(ATTACKERS):
            curves = {}
            for implementation, (profiling, attack_set) in datasets.items():
                curve = mean_rank_curve(
                    trainer_for(kind, config, leakage),
                    profiling.relabel(leakage),
                    evaluation.repetitions,
                    min(evaluation.profiling_count, len(profiling)),
                    evaluation.max_traces,
                    seed=config.seed("evaluate", 10 * j + i),
                    attack_dataset=attack_set.relabel(leakage),
                    threads=config.threads,
                )
                curves[implementation] = curve
                name = f"rank_{implementation}_{kind}_{leakage.kind}.csv"
                workspace.record("evaluate", reports.write_rank_curve(workspace.path("evaluate", name), curve))
                row = rank_row(curve, implementation=implementation, model=kind, leakage=leakage.kind)
                row["countermeasure_check"] = ""
                if implementation == "protected":
                    holds = acceptance.countermeasure_holds(kind, curve, curves["unprotected"], leakage.n_classes)
                    name = f"protected traces resist {kind} ({leakage.kind})"
                    row["countermeasure_check"] = workspace.check("evaluate", name, holds)
                rows.append(row)
            name = f"rank_{kind}_{leakage.kind}.svg"
            path = reports.plot_rank_curves(workspace.path("evaluate", name), curves, f"{kind.upper()} {leakage.kind}")
            workspace.record("evaluate", path)
    workspace.record("evaluate", reports.write_table(workspace.path("evaluate", "summary.csv"), rows))


def study_naive(workspace: Workspace) -> None:
    """Attackers retrained on one-pixel conversions of every trace, against attackers trained on the originals."""
    config = workspace.config
    evaluation = config.evaluation
    campaign = Campaign(
        count=evaluation.naive_trace_count,
        key_policy="fixed",
        fixed_key=config.campaign.fixed_key,
        config=config.device,
        length_cap=config.campaign.length_cap,
        seed=config.seed("study-naive"),
    )
    dataset = acquire(unprotected_program(config), campaign, config.leakage, threads=config.threads)
    workspace.record("study-naive", write_dataset(workspace.path("study-naive", "traces.sct"), dataset))

    report = naive_adversarial_study(
        dataset,
        trainer_for("mlp", config, config.leakage),
        config.termination,
        config.de,
        evaluation.repetitions,
        evaluation.naive_profiling_count,
        evaluation.max_traces,
        seed=config.seed("study-naive", 1),
        amplitude_bounds=config.mining.amplitude_bounds,
        threads=config.threads,
    )
    curves = {"original": report.source, "converted": report.adversarial}
    for name, curve in curves.items():
        path = reports.write_rank_curve(workspace.path("study-naive", f"rank_{name}.csv"), curve)
        workspace.record("study-naive", path)
    workspace.record("study-naive", reports.plot_rank_curves(workspace.path("study-naive", "ranks.svg"), curves))
    outcome = acceptance.conversion_fails_to_protect(report)
    summary = report.summary | {"naive_check": workspace.check("study-naive", "converted traces still leak", outcome)}
    path = reports.write_table(workspace.path("study-naive", "summary.csv"), [summary])
    workspace.record("study-naive", path)


def overhead(workspace: Workspace) -> None:
    """Cycle counts of the three implementations, with the analytic spread of the noisy ones."""
    config = workspace.config
    variants = load_variants(workspace)
    rows = execution_overhead(variants, config.evaluation.overhead_runs, config.seed("overhead"), config.device)
    workspace.record("overhead", reports.write_overhead(workspace.path("overhead", "overhead.csv"), rows))
    by_variant = {row.variant: row for row in rows}
    bounds = []
    for row in rows:
        analytic = analytic_spread(variants[row.variant]) if row.variant != "unprotected" else 0
        check = ""
        if row.variant == "protected":
            outcome = acceptance.overhead_bound(row, by_variant["unprotected"], analytic)
            check = workspace.check("overhead", "protected cycle overhead and spread", outcome)
        bounds.append(
            {
                "variant": row.variant,
                "observed_spread": row.max_cycles - row.min_cycles,
                "analytic_spread": analytic,
                "overhead_check": check,
            }
        )
    workspace.record("overhead", reports.write_table(workspace.path("overhead", "spread.csv"), bounds))


STAGES: dict[str, Callable[[Workspace], None]] = {
    "capture": capture,
    "train": train_attackers,
    "attack": attack,
    "mine": mine,
    "locate": locate,
    "select": select,
    "protect": protect_program,
    "evaluate": evaluate,
    "study-naive": study_naive,
    "overhead": overhead,
}
COMMANDS = [*STAGES, "pipeline"]


def run(command: str, config: PipelineConfig) -> Workspace:
    """Run a command; `pipeline` runs every stage in order.

    Artifacts of a failing stage are flagged `partial` in the manifest before the error propagates. A stage whose
    result checks fail completes, with its artifacts flagged `partial` as well.
    """
    if command not in COMMANDS:
        raise ValueError(f"unknown command `{command}`, expected one of {COMMANDS}")
    workspace = Workspace(config)
    for stage in STAGES if command == "pipeline" else [command]:
        logger.info(f"Running stage `{stage}` (seed {config.seed(stage)})")
        started = time.perf_counter()
        try:
            STAGES[stage](workspace)
            if workspace.failed_checks.get(stage):
                workspace.manifest.mark_stage(stage, "partial")
        except Exception:
            workspace.manifest.mark_stage(stage, "partial")
            raise
        finally:
            workspace.manifest.export()
        logger.info(f"Stage `{stage}` done in {time.perf_counter() - started:.1f} s")
    return workspace
