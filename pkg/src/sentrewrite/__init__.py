"""Extract-then-rewrite summarization with summary-level reinforcement learning."""

__version__ = "0.1.0"
