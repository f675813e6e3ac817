"""Shared exception types."""


class BackendError(RuntimeError):
    """An inference backend (NLI classifier, similarity scorer, paraphraser)
    is unavailable or failed to produce a usable result."""
