"""One-shot corpus preprocessor for the triple-extraction engine.

Runs a language model and a noun-phrase chunker over a corpus, aligns
annotations from word space into the model's token space, and writes
sentence-bundle directories in the engine's documented on-disk format.
The exporter is a separate program from the engine and talks to it only
through that format (and the engine's CLI, in tests).
"""

__version__ = "0.1.0"
