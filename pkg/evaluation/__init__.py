from evaluation.metrics import P2PError, dice, p2p_error, msd, surface_samples, point_triangle_distances
from evaluation.statistics import WilcoxonMode, WilcoxonResult, wilcoxon_signed_rank, BoxPlotSummary, box_plot_summary
from evaluation.report import (
    METRICS,
    CaseMetrics,
    PairedComparison,
    MethodSummary,
    ReferenceValues,
    EvaluationReport,
    evaluate_case,
    compare_methods,
    aggregate,
    metrics_frame,
    write_report,
)

__all__ = [
    "P2PError",
    "dice",
    "p2p_error",
    "msd",
    "surface_samples",
    "point_triangle_distances",

    "WilcoxonMode",
    "WilcoxonResult",
    "wilcoxon_signed_rank",
    "BoxPlotSummary",
    "box_plot_summary",

    "METRICS",
    "CaseMetrics",
    "PairedComparison",
    "MethodSummary",
    "ReferenceValues",
    "EvaluationReport",
    "evaluate_case",
    "compare_methods",
    "aggregate",
    "metrics_frame",
    "write_report",
]
