"""
Builds the analysis report: every table the metrics battery can produce from a set of records,
as pandas DataFrames, plus a Markdown summary. Tables the inputs cannot support are skipped
with a note rather than failing the whole report.
"""

from dataclasses import dataclass, field
from pathlib import Path

import pandas as pd

from src.analysis import loss_vocabulary, scalar_metrics, statistics, themes, validation
from src.core.errors import DomainError
from src.core.model_manager import ModelManager
from src.core.neutrosophic import EpistemicPosition
from src.core.prompt_templates import Strategy
from src.core.stimuli import TAUTOLOGY_IDS
from src.utils.helpers import ensure_dir
from src.utils.logger import logger, tracer

TABLE_NAMES = (
    "s1_model_table",
    "strategy_hyper_truth",
    "s2_constraint_table",
    "phenomenon_sums",
    "position_table",
    "paradox_positions",
    "absorption_table",
    "scalar_vs_jaccard",
    "mistral_matrix",
    "jaccard_matrices",
    "severity_table",
    "correlation_table",
    "convergence_summary",
    "loss_overlap",
    "tautology_table",
    "ablation_table",
    "ablation_overlap",
    "ablation_extras",
    "variance_compression_table",
    "validation_summary",
)
FLOAT_FORMAT = "%.6f"


@dataclass
class AnalysisReport:
    tables: dict = field(default_factory=dict)
    notes: dict = field(default_factory=dict)
    settings: dict = field(default_factory=dict)

    def table(self, name):
        if name not in self.tables:
            reason = self.notes.get(name, "not computed")
            raise DomainError(f"table '{name}' is not available: {reason}")
        return self.tables[name]

    def names(self):
        return [name for name in TABLE_NAMES if name in self.tables]


class ReportBuilder:
    def __init__(self, settings, lexicon=None, model_manager=None):
        """
        Initializes the builder.

        Args:
            settings (AnalysisSettings): Seed, permutations, tolerance, tokenizer and theme options.
            lexicon (ThemeLexicon, optional): Needed for the theme tables; they are skipped without it.
            model_manager (ModelManager, optional): Supplies display names.
        """
        self.settings = settings
        self.lexicon = lexicon
        self.model_manager = model_manager or ModelManager()
        logger.info("ReportBuilder initialized.")

    def build(self, records, only=None):
        """
        Computes the report tables.

        Args:
            records (iterable[TrialRecord]): All loaded records (any mix of strategies and stimulus sets).
            only (iterable[str], optional): Restrict to these table names.

        Returns:
            AnalysisReport: Tables keyed by name, and notes for the ones that were skipped.
        """
        records = sorted(records, key=lambda r: r.key())
        names = list(only) if only else list(TABLE_NAMES)
        unknown = [name for name in names if name not in TABLE_NAMES]
        if unknown:
            raise DomainError(f"unknown table(s): {', '.join(unknown)}; choose from {', '.join(TABLE_NAMES)}")

        report = AnalysisReport(settings=self._settings_snapshot())
        for name in names:
            with tracer.start_as_current_span("BuildReportTable") as span:
                span.set_attribute("table", name)
                try:
                    frame = getattr(self, f"_{name}")(records)
                except DomainError as e:
                    logger.warning(f"Table '{name}' skipped: {e}")
                    report.notes[name] = str(e)
                    continue
                if frame is None or frame.empty:
                    report.notes[name] = "inputs contain no rows for this table"
                    logger.info(f"Table '{name}' has no rows for these inputs.")
                    continue
                report.tables[name] = frame.reset_index(drop=True)
                span.set_attribute("rows", len(frame))
                logger.info(f"Table '{name}' built with {len(frame)} rows.")
        return report

    def _settings_snapshot(self):
        return {
            "seed": self.settings.seed,
            "permutations": self.settings.permutations,
            "stopwords": self.settings.stopwords,
            "position_tolerance": self.settings.position_tolerance,
            "universal_mode": self.settings.universal_mode,
            "convergence_unit": self.settings.convergence_unit,
            "focus_model": self.settings.focus_model,
            "lexicon_version": self.lexicon.version if self.lexicon else None,
        }

    def _display(self, slug):
        return self.model_manager.display_name(slug)

    def _require_lexicon(self):
        if self.lexicon is None:
            raise DomainError("no theme lexicon loaded")
        return self.lexicon

    @staticmethod
    def _original_tensor(records):
        return [r for r in records if r.strategy is Strategy.S4_TENSOR_LOSSES and r.stimulus not in TAUTOLOGY_IDS]

    @staticmethod
    def _tautology_tensor(records):
        return [r for r in records if r.strategy is Strategy.S4_TENSOR_LOSSES and r.stimulus in TAUTOLOGY_IDS]

    # --- scalar tables ---

    def _s1_model_table(self, records):
        summaries = scalar_metrics.model_summary(records, Strategy.S1_NEUTROSOPHIC)
        rows = [
            {
                "model": s.model,
                "display_name": self._display(s.model),
                "hyper_truth_pct": 100.0 * s.hyper_truth.fraction,
                "hyper_truth_count": s.hyper_truth.numerator,
                "valid_reps": s.hyper_truth.denominator,
                "total_reps": s.total_reps,
                "mean_sum": s.mean_sum,
                "cv_sum": s.cv_sum,
            }
            for s in summaries
        ]
        if rows:
            pool = scalar_metrics.scalar_records(records, strategy=Strategy.S1_NEUTROSOPHIC)
            overall = scalar_metrics.hyper_truth_rate(pool)
            sums = [r.sum for r in pool]
            rows.append({
                "model": "ALL",
                "display_name": "All models",
                "hyper_truth_pct": 100.0 * overall.fraction,
                "hyper_truth_count": overall.numerator,
                "valid_reps": overall.denominator,
                "total_reps": sum(s.total_reps for s in summaries),
                "mean_sum": scalar_metrics.fmean(sums),
                "cv_sum": scalar_metrics.coefficient_of_variation(sums) if len(sums) > 1 else None,
            })
        return pd.DataFrame(rows)

    def _strategy_hyper_truth(self, records):
        rows = [
            {
                "strategy": s.strategy.value,
                "hyper_truth_pct": 100.0 * s.rate.fraction,
                "hyper_truth_count": s.rate.numerator,
                "valid_reps": s.rate.denominator,
                "mean_sum": s.mean_sum,
                "constructive": s.constructive,
            }
            for s in scalar_metrics.strategy_hyper_truth(records)
        ]
        if any(not row["constructive"] for row in rows):
            pooled = scalar_metrics.cross_strategy_hyper_truth(records)
            rows.append({
                "strategy": "S1+S2+S4",
                "hyper_truth_pct": 100.0 * pooled.fraction,
                "hyper_truth_count": pooled.numerator,
                "valid_reps": pooled.denominator,
                "mean_sum": scalar_metrics.fmean(
                    r.sum for r in scalar_metrics.scalar_records(records)
                    if r.strategy is not Strategy.S3_ENTROPY_DERIVED
                ),
                "constructive": False,
            })
        return pd.DataFrame(rows)

    def _s2_constraint_table(self, records):
        return pd.DataFrame([
            {
                "model": c.model,
                "mean_sum": c.mean_sum,
                "std_sum": c.std_sum,
                "hyper_truth_count": c.hyper_truth_count,
                "flagged_count": c.flagged_count,
                "valid_reps": c.valid_reps,
            }
            for c in scalar_metrics.constraint_table(records)
        ])

    def _phenomenon_sums(self, records):
        return pd.DataFrame([
            {
                "phenomenon": p.stimulus,
                "category": p.category,
                "mean_sum": p.mean_sum,
                "reference_sum": p.reference_sum,
                "delta": p.delta,
                "hyper_truth_pct": 100.0 * p.hyper_truth.fraction,
                "hyper_truth_count": p.hyper_truth.numerator,
                "valid_reps": p.hyper_truth.denominator,
            }
            for p in scalar_metrics.phenomenon_sums(records)
        ])

    def _position_table(self, records):
        rows = []
        for p in scalar_metrics.position_table(records, tol=self.settings.position_tolerance):
            rows.append({
                "model": p.model,
                "display_name": self._display(p.model),
                "saturation": p.counts[EpistemicPosition.SATURATION],
                "balanced_conflict": p.counts[EpistemicPosition.BALANCED_CONFLICT],
                "absorption": p.counts[EpistemicPosition.ABSORPTION],
                "other": p.counts[EpistemicPosition.OTHER],
                "valid_reps": p.valid_reps,
                "dominant_position": p.dominant.value,
                "dominant_count": p.dominant_count,
                "modal_T": p.modal.t,
                "modal_I": p.modal.i,
                "modal_F": p.modal.f,
                "modal_count": p.modal_count,
                "stable": p.stable,
            })
        return pd.DataFrame(rows)

    def _paradox_positions(self, records):
        return pd.DataFrame([
            {
                "model": o.model,
                "display_name": self._display(o.model),
                "rep": o.rep,
                "T": o.scalar.t,
                "I": o.scalar.i,
                "F": o.scalar.f,
                "sum": o.scalar.sum,
                "position": o.position.value,
            }
            for o in scalar_metrics.paradox_positions(records, tol=self.settings.position_tolerance)
        ])

    def _absorption_table(self, records):
        return pd.DataFrame([
            {
                "model": a.model,
                "absorbed_phenomena": ";".join(a.absorbed),
                "absorbed_count": len(a.absorbed),
                "collapsed_groups": ";".join("|".join(group) for group in a.collapsed_groups),
                "valid_cells": sum(
                    1 for c in scalar_metrics.aggregate_cells(records)
                    if c.model == a.model and c.strategy is Strategy.S1_NEUTROSOPHIC
                ),
            }
            for a in scalar_metrics.detect_absorption(records, tol=self.settings.position_tolerance)
        ])

    # --- loss vocabulary tables ---

    def _scalar_vs_jaccard(self, records):
        return pd.DataFrame([
            {
                "model": s.model,
                "display_name": self._display(s.model),
                "phenomenon_a": s.stimulus_a,
                "phenomenon_b": s.stimulus_b,
                "manhattan": s.manhattan,
                "jaccard": s.jaccard,
                "valid_reps_a": s.reps_a,
                "valid_reps_b": s.reps_b,
            }
            for s in loss_vocabulary.scalar_vs_jaccard(self._original_tensor(records), self.settings.stopwords)
        ])

    def _mistral_matrix(self, records):
        focus = self.model_manager.resolve(self.settings.focus_model).slug
        pool = self._original_tensor(records)
        if not any(r.model == focus for r in pool):
            raise DomainError(f"no S4 records for focus model {focus}")
        matrix = loss_vocabulary.pairwise_jaccard_matrix(focus, pool, self.settings.stopwords)
        rows = []
        for a, values in zip(matrix.phenomena, matrix.values):
            row = {"phenomenon": a}
            row.update(dict(zip(matrix.phenomena, values)))
            row["valid_reps"] = len(loss_vocabulary.tensor_records(pool, model=focus, stimulus=a))
            rows.append(row)
        return pd.DataFrame(rows)

    def _jaccard_matrices(self, records):
        pool = self._original_tensor(records)
        rows = []
        for model, matrix in loss_vocabulary.jaccard_matrices(pool, self.settings.stopwords).items():
            for a, b, value in matrix.off_diagonal():
                rows.append({
                    "model": model,
                    "phenomenon_a": a,
                    "phenomenon_b": b,
                    "jaccard": value,
                    "valid_reps_a": len(loss_vocabulary.tensor_records(pool, model=model, stimulus=a)),
                    "valid_reps_b": len(loss_vocabulary.tensor_records(pool, model=model, stimulus=b)),
                })
        return pd.DataFrame(rows)

    def _severity_table(self, records):
        return pd.DataFrame([
            {
                "model": p.model,
                "phenomenon": p.stimulus,
                "mean_severity": p.mean_severity,
                "losses_per_rep": p.losses_per_rep,
                "mean_max_severity": scalar_metrics.fmean(p.max_severities),
                "valid_reps": p.valid_reps,
                "loss_count": p.loss_count,
            }
            for p in loss_vocabulary.severity_table(self._original_tensor(records))
        ])

    def _correlation_table(self, records):
        return pd.DataFrame([
            {
                "predictor": row.predictor,
                "scope": row.scope,
                "mode": row.report.mode.value,
                "n": row.report.n,
                "pearson_r": row.report.pearson_r,
                "pearson_p": row.report.pearson_p,
                "spearman_rho": row.report.spearman_rho,
                "spearman_p": row.report.spearman_p,
            }
            for row in statistics.severity_correlations(self._original_tensor(records))
        ])

    def _loss_overlap(self, records):
        overlap = loss_vocabulary.cross_stimulus_loss_overlap(self._original_tensor(records))
        return pd.DataFrame([
            {
                "phenomenon_a": a,
                "phenomenon_b": b,
                "description_jaccard": value,
                "unique_descriptions": overlap.unique_descriptions,
                "total_descriptions": overlap.total_descriptions,
            }
            for a, b, value in overlap.pair_jaccard
        ])

    # --- theme tables ---

    def _convergence_summary(self, records):
        lexicon = self._require_lexicon()
        pool = self._original_tensor(records)
        summary = themes.theme_convergence(
            pool, lexicon, mode=self.settings.universal_mode, unit=self.settings.convergence_unit
        )
        test = themes.convergence_permutation_test(pool, lexicon, self.settings.permutations, self.settings.seed)
        rows = [{
            "scope": "all",
            "universal_count": summary.universal_count,
            "universal_themes": ";".join(summary.universal_themes),
            "mean_pairwise_jaccard": summary.mean_pairwise_jaccard,
            "models": len(summary.models),
            "permutation_observed": test.observed,
            "permutation_p": test.p_value,
            "permutations": test.permutations,
            "mode": summary.mode,
            "unit": summary.unit,
            "lexicon_version": lexicon.version,
        }]
        for item in summary.per_stimulus:
            rows.append({
                "scope": item.stimulus,
                "universal_count": len(item.universal),
                "universal_themes": ";".join(item.universal),
                "mean_pairwise_jaccard": item.mean_jaccard,
                "models": item.models,
                "permutation_observed": None,
                "permutation_p": None,
                "permutations": None,
                "mode": summary.mode,
                "unit": "per-stimulus",
                "lexicon_version": lexicon.version,
            })
        return pd.DataFrame(rows)

    def _ablation(self, records):
        return themes.ablation_overlap(records, self._require_lexicon())

    def _ablation_table(self, records):
        result = self._ablation(records)
        rows = []
        for model in result.models:
            for theme in self.lexicon.theme_ids:
                hits, reps = result.presence[model][theme]
                rows.append({
                    "model": model,
                    "theme": theme,
                    "reference": theme in result.reference_themes,
                    "presence": result.render_presence(model, theme),
                    "present_reps": hits,
                    "reps": reps,
                })
        return pd.DataFrame(rows)

    def _ablation_overlap(self, records):
        result = self._ablation(records)
        return pd.DataFrame([
            {
                "model": model,
                "overlap": result.overlap[model],
                "reference_found": round(result.overlap[model] * len(result.reference_themes)),
                "reference_total": len(result.reference_themes),
                "responses": sum(1 for r in records if r.model == model
                                 and r.strategy is Strategy.S5_ABLATION and r.is_valid),
            }
            for model in result.models
        ])

    def _ablation_extras(self, records):
        result = self._ablation(records)
        return pd.DataFrame([
            {"theme": theme, "response_fraction": fraction, "response_count": count, "responses": result.responses}
            for theme, fraction, count in result.extras
        ])

    # --- validation tables ---

    def _tautology_table(self, records):
        comparison = validation.tautology_comparison(self._original_tensor(records), self._tautology_tensor(records))
        metrics = (
            ("indeterminacy", "indeterminacy", comparison.indeterminacy_ratio),
            ("max_severity", "max_severity", comparison.max_severity_ratio),
            ("losses_per_rep", "losses_per_rep", comparison.losses_per_rep_ratio),
        )
        return pd.DataFrame([
            {
                "metric": name,
                "original": getattr(comparison.original, attribute),
                "tautology": getattr(comparison.tautology, attribute),
                "ratio": ratio,
                "original_reps": comparison.original.valid_reps,
                "tautology_reps": comparison.tautology.valid_reps,
            }
            for name, attribute, ratio in metrics
        ])

    def _variance_compression_table(self, records):
        originals = [r for r in records if r.stimulus not in TAUTOLOGY_IDS]
        scalar_values, tensor_values = validation.indeterminacy_by_phenomenon(originals)
        return pd.DataFrame([
            {
                "phenomenon": v.stimulus,
                "s1s3_variance": v.scalar_variance,
                "s4_variance": v.tensor_variance,
                "ratio": v.ratio,
                "infinite": v.infinite,
                "s1s3_n": v.scalar_n,
                "s4_n": v.tensor_n,
            }
            for v in validation.variance_compression(scalar_values, tensor_values)
        ])

    def _validation_summary(self, records):
        """One line per validation test, each computed independently so a missing input only drops its line."""
        rows = []

        def add(test, statistic, compute):
            try:
                value, n = compute()
            except DomainError as e:
                logger.debug(f"Validation line '{test}' unavailable: {e}")
                return
            rows.append({"test": test, "statistic": statistic, "value": value, "n": n})

        tensor = self._original_tensor(records)

        def raw_correlation():
            pairs = statistics.severity_indeterminacy_pairs(tensor)
            report = statistics.correlate(pairs.max_severity, pairs.indeterminacy)
            return report.pearson_r, report.n

        def double_correlation():
            pairs = statistics.severity_indeterminacy_pairs(tensor)
            report = statistics.correlate(pairs.max_severity, pairs.indeterminacy,
                                          statistics.ResidualMode.DOUBLE, pairs.stimuli, pairs.models)
            return report.pearson_r, report.n

        def tautology_ratio():
            comparison = validation.tautology_comparison(tensor, self._tautology_tensor(records))
            return comparison.indeterminacy_ratio, comparison.tautology.valid_reps

        def ablation_overlap():
            result = themes.ablation_overlap(records, self._require_lexicon())
            return scalar_metrics.fmean(result.overlap.values()), result.responses

        def compression():
            originals = [r for r in records if r.stimulus not in TAUTOLOGY_IDS]
            compressions = validation.variance_compression(*validation.indeterminacy_by_phenomenon(originals))
            return min(v.ratio for v in compressions), len(compressions)

        add("loss_calibration", "pearson_r max_severity vs I (raw)", raw_correlation)
        add("loss_calibration_controlled", "pearson_r max_severity vs I (double residual)", double_correlation)
        add("tautology_control", "I ratio tautology/original", tautology_ratio)
        add("ablation", "mean reference theme overlap", ablation_overlap)
        add("variance_compression", "min S1-S3/S4 I variance ratio", compression)
        return pd.DataFrame(rows)


def write_table(frame, path):
    path = Path(path)
    ensure_dir(path.parent)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n", encoding="utf-8")
    return path


def render_summary(report):
    """Human-readable Markdown summary of a report (deterministic for identical reports)."""
    lines = ["# Neutrosophic evaluation report", "", "## Settings", ""]
    for key in sorted(report.settings):
        lines.append(f"- {key}: {report.settings[key]}")
    lines += ["", "## Tables", ""]
    for name in report.names():
        lines.append(f"- `{name}` ({len(report.tables[name])} rows)")

    highlights = []
    if "s1_model_table" in report.tables:
        overall = report.tables["s1_model_table"].iloc[-1]
        highlights.append(
            f"- S1 hyper-truth: {int(overall['hyper_truth_count'])}/{int(overall['valid_reps'])} "
            f"({overall['hyper_truth_pct']:.1f}%)"
        )
    if "mistral_matrix" in report.tables:
        frame = report.tables["mistral_matrix"]
        phenomena = list(frame["phenomenon"])
        off_diagonal = [frame.loc[i, b] for i, a in enumerate(phenomena) for b in phenomena if a != b]
        if off_diagonal:
            highlights.append(f"- Focus-model max off-diagonal loss Jaccard: {max(off_diagonal):.3f}")
    if "convergence_summary" in report.tables:
        row = report.tables["convergence_summary"].iloc[0]
        highlights.append(
            f"- Universal themes: {int(row['universal_count'])}, mean pairwise Jaccard "
            f"{row['mean_pairwise_jaccard']:.3f}, permutation p = {row['permutation_p']:.6g}"
        )
    if highlights:
        lines += ["", "## Highlights", ""] + highlights

    if report.notes:
        lines += ["", "## Skipped", ""]
        for name in TABLE_NAMES:
            if name in report.notes:
                lines.append(f"- `{name}`: {report.notes[name]}")
    return "\n".join(lines) + "\n"


def write_report(report, out_dir):
    """
    Writes every table to <out_dir>/tables/<name>.csv and the summary to <out_dir>/summary.md.

    Returns:
        list[Path]: Written files.
    """
    out_dir = ensure_dir(out_dir)
    written = [write_table(report.tables[name], out_dir / "tables" / f"{name}.csv") for name in report.names()]
    summary_path = out_dir / "summary.md"
    with open(summary_path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(render_summary(report))
    written.append(summary_path)
    logger.info(f"Report written to {out_dir} ({len(written) - 1} tables).")
    return written
