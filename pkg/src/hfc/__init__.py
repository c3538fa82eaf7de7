"""Joint holomorphic functional calculus for commuting tuples of matrices."""

from __future__ import annotations

__version__ = "0.1.0"
