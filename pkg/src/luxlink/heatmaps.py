"""Coarse text rendering of per-point maps, shared by reports and prompts."""

from __future__ import annotations

import numpy as np


def render_text_grid(values: np.ndarray, n_rows: int, n_cols: int,
                     bins: int = 10) -> str:
    """Bin a row-major map into digits 0..bins-1, one text row per grid row.

    Binning is min-max over the map.  A constant map has no spread to bin,
    so it renders as the middle bin everywhere.  Row 0 (nearest the facade)
    is the first text line.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("empty map")
    if values.size != n_rows * n_cols:
        raise ValueError(f"map length {values.size} != {n_rows}x{n_cols}")
    lo, hi = float(values.min()), float(values.max())
    if hi - lo < 1e-300:
        digits = np.full(values.shape, bins // 2, dtype=int)
    else:
        digits = np.minimum((values - lo) / (hi - lo) * bins, bins - 1).astype(int)
    rows = digits.reshape(n_rows, n_cols)
    return "\n".join("".join(str(d) for d in row) for row in rows)
