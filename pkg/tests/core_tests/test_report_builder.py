import unittest
from pathlib import Path

from src.analysis.themes import ThemeLexicon
from src.core.errors import DomainError
from src.reporting.figure_data import emit_figure_data
from src.reporting.report_builder import TABLE_NAMES, ReportBuilder, render_summary, write_report
from src.utils.config import AnalysisSettings
from tests.test_utils import (
    MODEL_A,
    MODEL_B,
    free_text_record,
    generate_temp_dir,
    scalar_record,
    tensor_record,
)

LOSSES = {
    "paradox": [("self reference loop", "the sentence refers to itself", 0.9)],
    "ignorance": [("star count", "cannot observe every star", 0.95)],
    "vagueness": [("height threshold", "tall has no sharp boundary", 0.6)],
}


def sample_records():
    records = []
    for model in (MODEL_A, MODEL_B):
        for rep in (1, 2, 3):
            records.append(scalar_record(model, "paradox", 0.5, 1.0, 0.5, rep=rep))
            records.append(scalar_record(model, "ignorance", 0.0, 1.0, 0.0, rep=rep))
            for stimulus, losses in LOSSES.items():
                i_value = round(0.5 + 0.1 * rep + (0.05 if model == MODEL_B else 0.0) - losses[0][2] / 10, 4)
                records.append(tensor_record(model, stimulus, 0.1, i_value, 0.1,
                                             [(w, y, round(s - 0.05 * rep, 4)) for w, y, s in losses], rep=rep))
            records.append(free_text_record(model, "paradox", "A self-referential loop; the wording is ambiguous.",
                                            rep=rep))
    return records


def sample_lexicon():
    return ThemeLexicon(
        version="test",
        themes={
            "self-reference": ["self", "loop"],
            "empirical-access": ["observ"],
            "contextual-definitions": ["threshold", "boundary"],
            "language-ambiguity": ["ambigu"],
        },
        reference_themes=("self-reference", "empirical-access", "contextual-definitions"),
    )


class TestReportBuilder(unittest.TestCase):

    def setUp(self):
        self.settings = AnalysisSettings(permutations=50, seed=3)
        self.builder = ReportBuilder(self.settings, sample_lexicon())
        self.records = sample_records()

    def test_tables_the_inputs_support(self):
        report = self.builder.build(self.records)
        for name in ("s1_model_table", "paradox_positions", "position_table", "mistral_matrix",
                     "scalar_vs_jaccard", "severity_table", "convergence_summary", "ablation_overlap"):
            self.assertIn(name, report.tables, msg=report.notes.get(name))
        self.assertIn("tautology_table", report.notes)
        self.assertIn("s2_constraint_table", report.notes)
        self.assertEqual(set(report.tables) | set(report.notes), set(TABLE_NAMES))

    def test_s1_table_has_overall_row(self):
        frame = self.builder.build(self.records, only=["s1_model_table"]).table("s1_model_table")
        self.assertEqual(list(frame["model"]), [MODEL_A, MODEL_B, "ALL"])
        self.assertEqual(frame.iloc[-1]["hyper_truth_count"], 6)
        self.assertEqual(frame.iloc[-1]["valid_reps"], 12)
        self.assertEqual(frame.iloc[1]["display_name"], "Mistral Medium 3.1")

    def test_focus_matrix(self):
        frame = self.builder.build(self.records, only=["mistral_matrix"]).table("mistral_matrix")
        self.assertEqual(list(frame["phenomenon"]), ["paradox", "ignorance", "vagueness"])
        self.assertEqual(frame.loc[0, "paradox"], 1.0)
        self.assertEqual(frame.loc[0, "ignorance"], 0.0)
        self.assertEqual(list(frame["valid_reps"]), [3, 3, 3])

    def test_ablation_overlap(self):
        frame = self.builder.build(self.records, only=["ablation_overlap"]).table("ablation_overlap")
        self.assertEqual(list(frame["reference_found"]), [1, 1])
        self.assertEqual(list(frame["reference_total"]), [3, 3])

    def test_theme_tables_need_a_lexicon(self):
        report = ReportBuilder(self.settings).build(self.records, only=["convergence_summary"])
        self.assertIn("no theme lexicon", report.notes["convergence_summary"])
        with self.assertRaises(DomainError):
            report.table("convergence_summary")

    def test_unknown_table(self):
        with self.assertRaises(DomainError):
            self.builder.build(self.records, only=["figure_9"])

    def test_written_report_is_deterministic(self):
        with generate_temp_dir() as first, generate_temp_dir() as second:
            for out_dir in (first, second):
                write_report(ReportBuilder(self.settings, sample_lexicon()).build(self.records), out_dir)
            first_files = sorted(p.relative_to(first) for p in Path(first).rglob("*") if p.is_file())
            second_files = sorted(p.relative_to(second) for p in Path(second).rglob("*") if p.is_file())
            self.assertEqual(first_files, second_files)
            for relative in first_files:
                self.assertEqual((Path(first) / relative).read_bytes(), (Path(second) / relative).read_bytes())
            self.assertIn(Path("summary.md"), first_files)
            self.assertIn(Path("tables") / "s1_model_table.csv", first_files)

    def test_summary_lists_skipped_tables(self):
        summary = render_summary(self.builder.build(self.records))
        self.assertIn("## Skipped", summary)
        self.assertIn("`tautology_table`", summary)
        self.assertIn("S1 hyper-truth: 6/12", summary)

    def test_figure_data(self):
        report = self.builder.build(self.records, only=["paradox_positions", "scalar_vs_jaccard", "mistral_matrix"])
        with generate_temp_dir() as out_dir:
            written = emit_figure_data(report, out_dir)
            self.assertEqual([p.name for p in written],
                             ["fig1_positions.csv", "fig2_scalar_vs_jaccard.csv", "fig3_focus_matrix.csv"])
            header = written[2].read_text(encoding="utf-8").splitlines()[0]
            self.assertEqual(header, "phenomenon,paradox,ignorance,vagueness")


if __name__ == '__main__':
    unittest.main()
