"""Verifier-gated plan generation on Blocksworld.

Submodules are imported lazily by design: data workers only need the pure
Python domain code, so keep torch out of the package root.
"""

__version__ = "0.1.0"
