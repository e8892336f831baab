"""Post-processing figures for the disk-flow diagnostics CSV outputs.

Pure file-to-file: reads the documented diagnostics.csv / sweep.csv
schemas, writes image files, never re-runs simulations or touches
snapshots.
"""

from .figures import FigureSpec, RUN_KINDS, SWEEP_KINDS, make_figure

__all__ = ["FigureSpec", "RUN_KINDS", "SWEEP_KINDS", "make_figure"]
