"""Corpus-scale workflow: synthesize, enhance, score, compare, plot.

Everything is offline and deterministic. The same flow drives real data:
point hypothesis_dir at ASR output and reference_dir at the curated
transcripts.

Run with: python demos/03_corpus_workflow.py
"""

import tempfile
from pathlib import Path

from clinscribe.cli import RunConfig, cmd_enhance, cmd_report, cmd_score, cmd_synth

root = Path(tempfile.mkdtemp(prefix="clinscribe_demo_"))
print(f"working under {root}")

# 1. A deterministic fixture corpus: references from the template grammar,
#    hypotheses corrupted at ASR-ish error rates.
cmd_synth(RunConfig(output_dir=str(root / "corpus"), seed=7, count=4))

# 2. Enhance the hypotheses with the offline echo backend (swap backend to
#    "http" plus backend_url for a real service).
summary, _ = cmd_enhance(
    RunConfig(
        hypothesis_dir=str(root / "corpus" / "hypotheses"),
        output_dir=str(root / "enhanced"),
        backend="echo",
        chunk_lines=10,
    )
)
print(f"enhanced {summary['enhanced']} transcripts, "
      f"{summary['truncations']} truncations, {summary['fallbacks']} fallbacks")

# 3. Score raw ASR and enhanced output against the references.
for label, hyp_dir in [
    ("asr", root / "corpus" / "hypotheses"),
    ("enhanced", root / "enhanced" / "enhanced"),
]:
    report, _ = cmd_score(
        RunConfig(
            hypothesis_dir=str(hyp_dir),
            reference_dir=str(root / "corpus" / "references"),
            output_dir=str(root / f"scored_{label}"),
            llm="echo-mock" if label == "enhanced" else "--",
            stt="synthetic",
            method="Diarization + Correction" if label == "enhanced" else "ASR",
        )
    )
    wer_stat = report.aggregates["wer"]
    print(f"{label}: WER {wer_stat.mean:.4f} ± {wer_stat.std:.4f} over n={wer_stat.n}")

# 4. Merge the runs into one comparison table.
table, _ = cmd_report(
    [str(root / "scored_asr" / "report.json"),
     str(root / "scored_enhanced" / "report.json")],
    "wer",
    str(root / "comparison"),
)
print("\n" + table)

# 5. The per-transcript CSV feeds external plotting; box plots of the
#    per-transcript scores look like this with matplotlib.
try:
    import csv

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    series = {}
    for label in ("asr", "enhanced"):
        with open(root / f"scored_{label}" / "report.csv", encoding="utf-8") as fh:
            series[label] = [
                float(row["wer"]) for row in csv.DictReader(fh) if row["wer"]
            ]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.boxplot(series.values(), tick_labels=list(series.keys()))
    ax.set_ylabel("per-transcript WER")
    fig.tight_layout()
    fig.savefig(root / "wer_boxplot.png", dpi=120)
    print(f"wrote {root / 'wer_boxplot.png'}")
except ImportError:
    print("matplotlib not installed; skipping the box plot")

print(f"\nreports and tables left under {root}")
