"""Span-QA model adapter for the bridgeqa pipeline.

Trains a small transformer on extended-SQuAD datasets emitted by
bridgeqa and exports word-level start/end scores in the logits schema
its constrained decoder consumes.  The coupling to the pipeline is the
two file formats, nothing else.
"""

__version__ = "0.1.0"
