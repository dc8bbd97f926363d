"""Language models with strict temporal data cutoffs.

End-to-end pipeline: partition timestamped corpora per cutoff year, train
decoder-only transformers on the partitions, curate instruction data that
respects the same boundaries, detect each checkpoint's effective knowledge
cutoff via perplexity trend reversal, and serve the dated model family over
HTTP.
"""

__version__ = "0.1.0"
