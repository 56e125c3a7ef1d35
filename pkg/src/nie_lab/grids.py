"""Named noise-level grids and parsing of grid specifications."""

from __future__ import annotations

SIN_GRID: tuple[float, ...] = (
    1e-6, 1e-4, 5e-4, 1e-3, 2e-3, 3e-3, 4e-3, 5e-3, 6e-3, 7e-3, 8e-3, 9e-3, 1e-2, 2e-2, 4e-2, 7e-2,
)

_DIAB_EXTRA = (
    10**-2.75, 10**-2.5, 10**-2.25, 10**-1.75, 3e-2,
    10**-1.5, 5e-2, 10**-1.25, 8e-2, 9e-2,
    1e-1, 10**-0.75, 10**-0.5, 10**-0.25, 1.0,
)

DIAB_GRID: tuple[float, ...] = tuple(sorted(set(SIN_GRID) | set(_DIAB_EXTRA)))

NAMED_GRIDS = {"sin": SIN_GRID, "diab": DIAB_GRID}


def parse_grid(text: str) -> tuple[float, ...]:
    """``sin``, ``diab`` or ``custom:p1,p2,...`` (ascending, each in [0, 1))."""
    text = text.strip()
    if text in NAMED_GRIDS:
        return NAMED_GRIDS[text]
    if not text.startswith("custom:"):
        raise ValueError(f"unknown grid {text!r}; use 'sin', 'diab' or 'custom:p1,p2,...'")
    body = text[len("custom:"):]
    try:
        values = tuple(float(v) for v in body.split(",") if v.strip())
    except ValueError:
        raise ValueError(f"custom grid has a non-numeric entry: {body!r}") from None
    if not values:
        raise ValueError("custom grid is empty")
    for v in values:
        if not 0.0 <= v < 1.0:
            raise ValueError(f"custom grid level {v!r} outside [0, 1)")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ValueError("custom grid must be strictly ascending")
    return values


def nonzero_levels(grid) -> tuple[float, ...]:
    return tuple(float(p) for p in grid if p != 0.0)


__all__ = ["SIN_GRID", "DIAB_GRID", "NAMED_GRIDS", "parse_grid", "nonzero_levels"]
