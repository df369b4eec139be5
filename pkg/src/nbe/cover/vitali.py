"""Greedy 5r-covering selection for families of equal-radius balls."""

from __future__ import annotations

from typing import Callable, Sequence

from ..symbolic import as_word, bowen_distance

__all__ = ["five_r_select", "shift_metric", "in_ball"]

Ball = tuple[bytes, float]


def shift_metric(N: int, n: int = 1) -> Callable[[bytes, bytes], float]:
    """``d_n`` on finite words; ``n=1`` is the plain shift metric."""
    return lambda x, y: bowen_distance(x, y, n, N)


def in_ball(center, y, radius: float, distance) -> bool:
    return distance(as_word(center), as_word(y)) < radius


def five_r_select(balls: Sequence[Ball], distance: Callable[[bytes, bytes], float]) -> list[Ball]:
    """Pairwise disjoint subfamily whose 5r-enlargements cover the union.

    Scans the family in order and keeps a ball when its centre is at least
    ``2r`` from every kept centre.  Kept balls are then disjoint by the
    triangle inequality, and every discarded ball lies within ``3r`` of a
    kept centre.  The selection follows the usual Vitali conclusion
    (selected balls pairwise disjoint).
    """
    if not balls:
        return []
    radii = {r for _, r in balls}
    if len(radii) != 1:
        raise ValueError("five_r_select needs a common radius")
    r = radii.pop()
    kept: list[Ball] = []
    for x, rad in balls:
        x = as_word(x)
        if all(distance(x, y) >= 2 * r for y, _ in kept):
            kept.append((x, rad))
    return kept
