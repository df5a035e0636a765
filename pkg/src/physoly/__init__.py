"""Tool-augmented agent harness for multi-part olympiad physics theory problems.

Solves problems with a manager model in a Reason-Act loop over a small
physics toolset, and grades/aggregates/ranks the resulting solutions with
rubric scoring and numeric accuracy metrics. All model traffic can be
recorded to cassettes and replayed deterministically.
"""

from pathlib import Path

__version__ = "0.1.0"

FIXTURES_DIR = Path(__file__).resolve().parent / "fixtures"
