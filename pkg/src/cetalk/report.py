"""Batch interpretation reports: per-submission rows, summary
statistics and optional figures.

Each submission row carries the interpretation (CE, score, unmatched
words) and its tokenization counts; the aggregate block reports max,
min, mean and median for phrases, sentences, clauses, words and score.
The data are typically skewed, which is why both mean and median are
reported.  Figures (score and length histograms) render to files next
to the delimited output when requested.
"""

from __future__ import annotations

import json
import statistics
from dataclasses import dataclass, field

from .interpreter import Interpretation, interpret, DEFAULT_LOOKAHEAD
from .kernel import KnowledgeBase

METRICS = ("phrases", "sentences", "clauses", "words", "score")
STATS = ("max", "min", "mean", "median")


@dataclass
class ReportRow:
    index: int
    text: str
    ce_text: str
    score: int
    phrases: int
    sentences: int
    clauses: int
    words: int
    unmatched: list[str] = field(default_factory=list)

    @classmethod
    def from_interpretation(cls, index: int, interp: Interpretation) -> "ReportRow":
        tok = interp.tokenized
        return cls(
            index=index,
            text=interp.text,
            ce_text=interp.ce_text(),
            score=interp.score,
            phrases=tok.phrase_count,
            sentences=tok.sentence_count,
            clauses=tok.clause_count,
            words=tok.word_count,
            unmatched=list(interp.unmatched_words),
        )

    def metric(self, name: str) -> int:
        return getattr(self, name)


@dataclass
class RunReport:
    rows: list[ReportRow] = field(default_factory=list)

    def aggregates(self) -> dict[str, dict[str, float | int | None]]:
        """max/min/mean/median per metric; None marks an empty report."""
        out: dict[str, dict[str, float | int | None]] = {}
        for metric in METRICS:
            values = [row.metric(metric) for row in self.rows]
            if not values:
                out[metric] = {stat: None for stat in STATS}
                continue
            out[metric] = {
                "max": max(values),
                "min": min(values),
                "mean": round(statistics.mean(values), 2),
                "median": statistics.median(values),
            }
        return out

    def to_json(self) -> str:
        payload = {
            "rows": [
                {
                    "index": r.index,
                    "text": r.text,
                    "ce": r.ce_text,
                    "score": r.score,
                    "phrases": r.phrases,
                    "sentences": r.sentences,
                    "clauses": r.clauses,
                    "words": r.words,
                    "unmatched": r.unmatched,
                }
                for r in self.rows
            ],
            "aggregates": self.aggregates(),
        }
        return json.dumps(payload, indent=2)

    def to_delimited(self, sep: str = "\t") -> str:
        header = sep.join(
            ["index", "score", "phrases", "sentences", "clauses", "words", "unmatched", "ce"]
        )
        lines = [header]
        for r in self.rows:
            lines.append(
                sep.join(
                    [
                        str(r.index),
                        str(r.score),
                        str(r.phrases),
                        str(r.sentences),
                        str(r.clauses),
                        str(r.words),
                        " ".join(r.unmatched),
                        r.ce_text.replace("\n", " "),
                    ]
                )
            )
        return "\n".join(lines)

    def aggregate_text(self) -> str:
        aggregates = self.aggregates()
        lines = ["", "summary" + "\t" + "\t".join(STATS)]
        for metric in METRICS:
            cells = [metric.capitalize()]
            for stat in STATS:
                value = aggregates[metric][stat]
                if value is None:
                    cells.append("n/a")
                elif stat == "mean":
                    cells.append(f"{value:.2f}")
                else:
                    cells.append(f"{value:g}")
            lines.append("\t".join(cells))
        return "\n".join(lines)

    def to_text(self) -> str:
        return self.to_delimited() + self.aggregate_text()


def run_report(
    submissions, kb: KnowledgeBase, lookahead: int = DEFAULT_LOOKAHEAD
) -> RunReport:
    """Interpret each submission against the KB (one report row each).

    Nothing is asserted; id counters advance so rows are reproducible
    for a fixed input file on a fresh KB."""
    report = RunReport()
    for i, text in enumerate(submissions, start=1):
        interp = interpret(text, kb, lookahead)
        report.rows.append(ReportRow.from_interpretation(i, interp))
    return report


def render_figures(report: RunReport, directory) -> list[str]:
    """Histogram the score and word-count distributions and their
    relationship; returns the written paths."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from pathlib import Path

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written: list[str] = []

    scores = [r.score for r in report.rows]
    words = [r.words for r in report.rows]

    def hist(values, title, xlabel, name):
        fig, ax = plt.subplots(figsize=(6, 4))
        upper = max(values, default=1)
        ax.hist(values, bins=range(0, upper + 2), color="#4878a8", edgecolor="white")
        ax.set_title(title)
        ax.set_xlabel(xlabel)
        ax.set_ylabel("submissions")
        fig.tight_layout()
        path = directory / name
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(str(path))

    hist(scores, "Score distribution", "score", "score_distribution.png")
    hist(words, "Submission length", "words", "word_distribution.png")

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.scatter(words, scores, color="#a85448", alpha=0.7)
    ax.set_title("Words vs score")
    ax.set_xlabel("words")
    ax.set_ylabel("score")
    fig.tight_layout()
    path = directory / "words_vs_score.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(str(path))
    return written


__all__ = [
    "METRICS",
    "STATS",
    "ReportRow",
    "RunReport",
    "run_report",
    "render_figures",
]
