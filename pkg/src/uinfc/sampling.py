"""Deterministic low-discrepancy sampling of balls and annuli."""

import numpy as np
from scipy.stats import qmc


def _halton(dim, count, seed):
    # Scrambled Halton is prefix-stable: the first k points never depend on count.
    return qmc.Halton(d=dim, scramble=True, seed=seed).random(count)


def annulus_points(center, inner, outer, count, seed=0, extra_dims=0):
    """Quasi-random points with ``inner <= ||p - center|| <= outer``.

    Points come from a scrambled Halton sequence over the bounding cube with
    rejection, so the first ``k`` of ``count`` points equal the ``k`` points
    returned for ``count=k``.

    Parameters
    ----------
    center : array_like, shape (n,)
    inner, outer : float
        Radii, ``0 <= inner < outer``.
    count : int
    seed : int
    extra_dims : int
        Additional uniform ``[0, 1)`` coordinates carried along with every
        accepted point (used for paired perturbation directions).

    Returns
    -------
    points : ndarray, shape (count, n)
    extra : ndarray, shape (count, extra_dims)
    """
    center = np.asarray(center, dtype=float)
    n = center.size
    accepted, extras = [], []
    total = 0
    # Cube-to-ball acceptance is about 0.16 in five dimensions.
    batch = max(64, int(1.2 * count / _ball_fraction(n)) + 16)
    offset = 0
    while total < count:
        raw = _halton(n + extra_dims, offset + batch, seed)[offset:]
        offset += batch
        cube = 2.0 * raw[:, :n] - 1.0
        radii = np.linalg.norm(cube, axis=1)
        # Map the unit ball onto the annulus radially, preserving prefix order.
        keep = radii <= 1.0
        cube, radii, rest = cube[keep], radii[keep], raw[keep, n:]
        with np.errstate(invalid="ignore", divide="ignore"):
            unit = np.where(radii[:, None] > 0, cube / radii[:, None], 0.0)
        scaled = inner + (outer - inner) * radii
        accepted.append(center + unit * scaled[:, None])
        extras.append(rest)
        total += len(cube)
    points = np.concatenate(accepted)[:count]
    extra = np.concatenate(extras)[:count]
    return points, extra


def _ball_fraction(n):
    from math import gamma, pi

    return pi ** (n / 2) / gamma(n / 2 + 1) / 2.0 ** n


def ball_points(center, radius, count, seed=0):
    """Quasi-random points in the closed ball plus their radial projections.

    Half of the returned points are interior Halton points, the other half are
    the same directions pushed to the boundary sphere, which is where radially
    increasing functions attain their suprema.
    """
    half = max(1, count // 2)
    inside, _ = annulus_points(center, 0.0, radius, count - half, seed)
    center = np.asarray(center, dtype=float)
    d = inside[:half] - center
    norms = np.linalg.norm(d, axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        shell = np.where(norms > 0, center + radius * d / norms, center)
    return np.concatenate([inside, shell])
