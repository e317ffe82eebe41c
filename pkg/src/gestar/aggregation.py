"""Sample-count-weighted averaging of client parameter vectors.

This module is the aggregation boundary of the federated simulation: it
sees only (client id, parameter vector, sample count, loss trace) and must
stay importable without any dataset or sample machinery. Keep it that way;
an architecture test enforces it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, ShapeError


@dataclass
class ClientUpdate:
    client_id: int
    params: np.ndarray
    n_samples: int
    loss_trace: list[float] = field(default_factory=list)

    def __post_init__(self):
        self.params = np.asarray(self.params, dtype=np.float64)
        if self.n_samples < 1:
            raise ParameterError(f"client {self.client_id}: sample count must be >= 1")


def aggregate(updates: list[ClientUpdate]) -> np.ndarray:
    """Weighted mean of client parameters, weights n_k / sum(n_k).

    Summation runs in ascending client-id order so results are independent
    of scheduling. The mean is accumulated as deviations from the first
    update (mathematically identical), which makes consensus exact: if all
    clients return the same vector, that vector comes back bit-for-bit.
    """
    if not updates:
        raise ParameterError("aggregate needs at least one client update")
    ordered = sorted(updates, key=lambda u: u.client_id)
    length = ordered[0].params.size
    for u in ordered:
        if u.params.size != length:
            raise ShapeError(
                f"client {u.client_id} returned {u.params.size} parameters, expected {length}"
            )
    total = float(sum(u.n_samples for u in ordered))
    anchor = ordered[0].params
    acc = np.zeros(length)
    for u in ordered:
        acc += (u.n_samples / total) * (u.params - anchor)
    return anchor + acc
