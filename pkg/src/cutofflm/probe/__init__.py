from .perplexity import mean_perplexity, per_document_perplexities
from .series import PerplexitySeries, QuarterBucket, quarter_index, quarter_label, relative_series
from .breakpoint import CutoffEstimate, detect_cutoff, fit_breakpoint

__all__ = [
    "mean_perplexity",
    "per_document_perplexities",
    "PerplexitySeries",
    "QuarterBucket",
    "quarter_index",
    "quarter_label",
    "relative_series",
    "CutoffEstimate",
    "detect_cutoff",
    "fit_breakpoint",
]
