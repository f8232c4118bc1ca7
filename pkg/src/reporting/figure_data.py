"""
Plot-ready CSV data for the three figures: paradox positions per model and rep, scalar distance
against loss Jaccard per model, and the focus model's pairwise loss Jaccard matrix.
No images are rendered.
"""

from src.reporting.report_builder import write_table
from src.utils.helpers import ensure_dir
from src.utils.logger import logger

FIGURE_SOURCES = (
    ("fig1_positions.csv", "paradox_positions", ["model", "display_name", "rep", "T", "I", "F", "position"]),
    ("fig2_scalar_vs_jaccard.csv", "scalar_vs_jaccard", ["model", "display_name", "manhattan", "jaccard"]),
    ("fig3_focus_matrix.csv", "mistral_matrix", None),
)


def emit_figure_data(report, out_dir):
    """
    Writes <out_dir>/figures/fig*.csv from the matching report tables.

    Args:
        report (AnalysisReport): A built report.
        out_dir (str | Path): Output root.

    Returns:
        list[Path]: Files written; figures whose table is missing are skipped with a warning.
    """
    figures_dir = ensure_dir(ensure_dir(out_dir) / "figures")
    written = []
    for filename, table_name, columns in FIGURE_SOURCES:
        if table_name not in report.tables:
            logger.warning(f"Skipping {filename}: table '{table_name}' is not in the report.")
            continue
        frame = report.tables[table_name]
        if columns is None:
            columns = [c for c in frame.columns if c != "valid_reps"]
        written.append(write_table(frame[columns], figures_dir / filename))
        logger.info(f"Figure data written: {figures_dir / filename}")
    return written
