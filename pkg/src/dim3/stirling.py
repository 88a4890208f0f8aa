"""Unsigned Stirling numbers of the first kind, kept as log-magnitudes."""
from __future__ import annotations

import numpy as np


class StirlingTable:
    """Lazily grown table of ``log S(N, m)`` for ``0 <= m <= N <= n_max``.

    ``S(0, 0) = 1`` and ``S(N+1, m) = S(N, m-1) + N * S(N, m)``.
    Entries with ``m > N`` or ``m == 0 < N`` are ``-inf``.
    """

    def __init__(self, n_max: int = 16):
        self._log = np.full((1, 1), 0.0)
        self.extend(n_max)

    @property
    def n_max(self) -> int:
        return self._log.shape[0] - 1

    def extend(self, n_max: int) -> None:
        old = self.n_max
        if n_max <= old:
            return
        new = np.full((n_max + 1, n_max + 1), -np.inf)
        new[: old + 1, : old + 1] = self._log
        for N in range(old, n_max):
            prev = new[N]
            row = np.full(n_max + 1, -np.inf)
            with np.errstate(divide="ignore"):
                row[1:] = np.logaddexp(prev[:-1], np.log(N) + prev[1:])
            row[0] = -np.inf
            new[N + 1] = row
        self._log = new

    def log(self, N, m):
        N = np.asarray(N)
        m = np.asarray(m)
        top = int(max(np.max(N, initial=0), np.max(m, initial=0)))
        self.extend(top)
        return self._log[N, m]

    def rows(self, N) -> np.ndarray:
        """``log S(N_c, m)`` for m = 0..max(N) as a ``(len(N), max(N) + 1)`` array."""
        N = np.asarray(N, dtype=np.int64)
        top = int(N.max(initial=0))
        self.extend(top)
        return self._log[N, : top + 1]
