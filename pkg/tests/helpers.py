"""Shared generators for the test modules."""

import numpy as np

from lecm import states
from lecm.entanglement import MeasurementBasis, Partition, localize
from lecm.stationarity import ETStep, elementary_transform, haar_bases


def random_instance(rng, n_min=3, n_max=5, real=None):
    """Random state, random S1|S2|E partition and Haar-random environment basis."""
    n = int(rng.integers(n_min, n_max + 1))
    real = bool(rng.integers(2)) if real is None else real
    state = states.random_state(n, rng, real=real)
    sites = rng.permutation(n)
    k1 = int(rng.integers(1, n - 1))
    k2 = int(rng.integers(1, n - k1))
    part = Partition.from_system(n, sites[:k1], sites[k1:k1 + k2])
    x = haar_bases(rng, 1, part.d_e, real)[0]
    return state, part, MeasurementBasis(x)


def sbar(state, part, x):
    return localize(state, part, MeasurementBasis(x)).average


def central_slope(state, part, bsm, i, j, eps=1e-5, phase=False):
    """Symmetric finite-difference derivative of the average entropy along the ET of (i, j)."""
    up = elementary_transform(MeasurementBasis(bsm.vectors), ETStep(i, j, eps), phase=phase).vectors
    dn = elementary_transform(MeasurementBasis(bsm.vectors), ETStep(i, j, -eps), phase=phase).vectors
    return (sbar(state, part, up) - sbar(state, part, dn)) / (2 * eps)


__all__ = ["central_slope", "random_instance", "sbar"]
