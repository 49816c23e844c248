"""
Run Summary
Builds a text report from the artifacts of a pipeline run: manifest, attack accuracies, rank-0 trace counts,
one-pixel mining results, the overhead table and the verdicts of the result checks.

Usage: python scripts/summarize_run.py <output_dir>

Example:
    python scripts/summarize_run.py ./output/small
"""

from dataclasses import dataclass
import json
from pathlib import Path
import sys
from typing import Optional

import pandas as pd

from app.store.manifestDB import MANIFEST_EXPORT


@dataclass
class RunArtifacts:
    manifest: list[dict]
    accuracy: Optional[pd.DataFrame]
    mining: Optional[pd.DataFrame]
    evaluation: Optional[pd.DataFrame]
    naive: Optional[pd.DataFrame]
    overhead: Optional[pd.DataFrame]
    spread: Optional[pd.DataFrame]


def read_table(path: Path) -> Optional[pd.DataFrame]:
    """CSV table of a stage, None when the stage has not run."""
    return pd.read_csv(path, keep_default_na=False) if path.exists() else None


def load_run(output_dir: Path) -> RunArtifacts:
    manifest_path = output_dir / MANIFEST_EXPORT
    manifest = json.loads(manifest_path.read_text(encoding="utf-8")) if manifest_path.exists() else []
    return RunArtifacts(
        manifest=manifest,
        accuracy=read_table(output_dir / "attack" / "accuracy.csv"),
        mining=read_table(output_dir / "mine" / "summary.csv"),
        evaluation=read_table(output_dir / "evaluate" / "summary.csv"),
        naive=read_table(output_dir / "study_naive" / "summary.csv"),
        overhead=read_table(output_dir / "overhead" / "overhead.csv"),
        spread=read_table(output_dir / "overhead" / "spread.csv"),
    )


def check_verdicts(run: RunArtifacts) -> list[tuple[str, str, str]]:
    """(table, row label, verdict) of every check column, skipping rows a check does not apply to."""
    tables = {
        "attack": run.accuracy,
        "mine": run.mining,
        "evaluate": run.evaluation,
        "study-naive": run.naive,
        "overhead": run.spread,
    }
    verdicts = []
    for name, table in tables.items():
        if table is None:
            continue
        columns = [c for c in table.columns if c.endswith("_check") or c == "recovers_key"]
        labels = [c for c in ("implementation", "variant", "model", "leakage") if c in table.columns]
        for _, row in table.iterrows():
            label = " / ".join(str(row[c]) for c in labels) or name
            verdicts.extend((name, f"{label} {c}", row[c]) for c in columns if row[c])
    return verdicts


def _section(report: list[str], title: str) -> None:
    report.append(title)
    report.append("-" * len(title))


def build_report(run: RunArtifacts) -> str:
    """Build run report"""
    report = []
    report.append("+===================================+")
    report.append("SIDE-CHANNEL LAB RUN REPORT")
    report.append("+===================================+")
    report.append("")

    _section(report, "MANIFEST")
    stages = sorted({artifact["stage"] for artifact in run.manifest})
    for stage in stages:
        artifacts = [a for a in run.manifest if a["stage"] == stage]
        partial = sum(a["status"] == "partial" for a in artifacts)
        suffix = f" ({partial} partial)" if partial else ""
        report.append("{:<35s}{} files{}".format(f"{stage}:", len(artifacts), suffix))
    report.append("")

    if run.accuracy is not None:
        _section(report, "TRAINED ATTACKERS (unprotected)")
        for row in run.accuracy.itertuples(index=False):
            rank_zero = row.rank_zero_M if row.rank_zero_M != "" else "never"
            report.append(
                "{:<35s}accuracy {:.4f}   rank 0 from M = {}".format(
                    f"{row.model.upper()} ({row.leakage}):", float(row.accuracy), rank_zero
                )
            )
        report.append("")

    if run.mining is not None:
        _section(report, "ONE-PIXEL MINING")
        for row in run.mining.itertuples(index=False):
            report.append(
                "{:<35s}success {:.2%}   {:.1f} DE iterations   peak agreement {:.2%}".format(
                    f"{row.model} ({row.termination}):",
                    float(row.success_rate),
                    float(row.mean_iterations),
                    float(row.peak_agreement),
                )
            )
        report.append("")

    if run.evaluation is not None:
        _section(report, "RETRAINED ATTACKERS PER IMPLEMENTATION")
        for row in run.evaluation.itertuples(index=False):
            rank_zero = row.rank_zero_M if row.rank_zero_M != "" else "never"
            report.append(
                "{:<35s}accuracy {:.4f}   rank 0 from M = {}   final mean rank {:.1f}".format(
                    f"{row.implementation} / {row.model.upper()} ({row.leakage}):",
                    float(row.accuracy),
                    rank_zero,
                    float(row.final_mean_rank),
                )
            )
        report.append("")

    if run.naive is not None:
        _section(report, "NAIVE CONVERSION STUDY")
        row = run.naive.iloc[0]
        report.append("{:<35s}{}".format("Original, rank 0 from M =", row["source_rank_zero"] or "never"))
        report.append("{:<35s}{}".format("Converted, rank 0 from M =", row["adversarial_rank_zero"] or "never"))
        report.append("{:<35s}{:.2%}".format("Conversion success rate:", float(row["conversion_success_rate"])))
        report.append("")

    verdicts = check_verdicts(run)
    if verdicts:
        _section(report, "CHECKS")
        for stage, label, outcome in verdicts:
            report.append("{:<55s}{}".format(f"{stage}: {label}", outcome))
        failed = sum(outcome == "fail" for _, _, outcome in verdicts)
        report.append(f"{failed} of {len(verdicts)} checks failed")
        report.append("")

    if run.overhead is not None:
        _section(report, "EXECUTION OVERHEAD (cycles)")
        report.append("{:<20s}{:>8s}{:>12s}{:>12s}{:>12s}".format("variant", "runs", "min", "avg", "max"))
        for row in run.overhead.itertuples(index=False):
            report.append(
                "{:<20s}{:>8}{:>12}{:>12}{:>12}".format(
                    row.variant, row.runs, row.min_cycles, row.avg_cycles, row.max_cycles
                )
            )
        report.append("")
    return "\n".join(report)


if __name__ == "__main__":
    if len(sys.argv) != 2:
        print("Usage: python scripts/summarize_run.py <output_dir>")
        print("\nExample:")
        print("\tpython scripts/summarize_run.py ./output/small")
        sys.exit(1)

    output_dir = Path(sys.argv[1])
    if not output_dir.is_dir():
        print(f"Error: output directory not found: {output_dir}")
        sys.exit(1)

    report = build_report(load_run(output_dir))
    print(report)

    report_path = output_dir / "summary.txt"
    report_path.write_text(report + "\n", encoding="utf-8")
    print(f"\n\nReport saved to {report_path}")
