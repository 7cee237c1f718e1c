"""Narrative-space authoring engine.

Shape a space of stories from example narratives (pivot -> outline at a
configurable abstraction level -> simulated variants) and unfold it at
play-time into causally sound, executable game plots.
"""

__version__ = "0.1.0"
