"""Bridging anaphora resolution as span-based question answering.

Submodules:
  treebank    bracketed-parse reading, head finding, NP variations
  quasigen    quasi-bridging training-pair synthesis
  qagen       QA dataset construction (extended SQuAD format)
  decode      constrained span decoding over start/end scores
  mentionmap  span-to-mention projection and time-type filtering
  scoring     strict/lenient accuracy and report comparison
  formats     file-schema validation
  cli         command-line pipeline driver
"""

__version__ = "0.1.0"
