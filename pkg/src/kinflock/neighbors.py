"""Uniform cell lists for short-range pair enumeration."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np


@dataclass
class NeighborBins:
    positions: np.ndarray  # (N, d)
    cutoff: float
    order: np.ndarray  # particle indices sorted by cell key
    sorted_keys: np.ndarray
    cell_index: np.ndarray  # (N, d) padded integer cell coordinates
    shape: tuple

    def candidate_pairs(self):
        """All (i, j) with i != j sharing a cell or adjacent cells; each
        unordered pair appears once."""
        n, d = self.positions.shape
        inv = np.empty(n, dtype=np.int64)
        inv[self.order] = np.arange(n)
        ii, jj = [], []
        for off in _half_shell(d):
            target = self.cell_index + np.asarray(off)
            tkeys = np.ravel_multi_index(target.T, self.shape)
            lo = np.searchsorted(self.sorted_keys, tkeys, side="left")
            hi = np.searchsorted(self.sorted_keys, tkeys, side="right")
            if not any(off):
                # same cell: keep partners that come later in sorted order
                lo = np.maximum(lo, inv + 1)
            cnt = np.clip(hi - lo, 0, None)
            total = int(cnt.sum())
            if total == 0:
                continue
            src = np.repeat(np.arange(n), cnt)
            starts = np.repeat(lo - np.cumsum(cnt) + cnt, cnt)
            pos = starts + np.arange(total)
            ii.append(src)
            jj.append(self.order[pos])
        if not ii:
            e = np.empty(0, dtype=np.int64)
            return e, e
        return np.concatenate(ii), np.concatenate(jj)

    def pairs(self):
        """Pairs ``(i, j)`` with ``i < j`` and ``|x_i - x_j| <= cutoff``,
        together with their distances."""
        i, j = self.candidate_pairs()
        diff = self.positions[i] - self.positions[j]
        dist = np.sqrt(np.sum(diff * diff, axis=1))
        keep = dist <= self.cutoff
        i, j, dist = i[keep], j[keep], dist[keep]
        swap = i > j
        i, j = np.where(swap, j, i), np.where(swap, i, j)
        return i, j, dist


def _half_shell(d):
    """Offsets o in {-1,0,1}^d with o == 0 or first nonzero entry positive."""
    for off in itertools.product((-1, 0, 1), repeat=d):
        nz = [c for c in off if c != 0]
        if not nz or nz[0] > 0:
            yield off


def neighbor_bins(positions, cutoff: float) -> NeighborBins:
    """Bin ``positions`` (shape ``(N,)`` or ``(N, d)``) into cubic cells of
    side ``cutoff``."""
    if not cutoff > 0:
        raise ValueError("cutoff must be positive")
    x = np.asarray(positions, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if len(x) == 0:
        raise ValueError("no particles to bin")
    lo = x.min(axis=0)
    cell = np.floor((x - lo) / cutoff).astype(np.int64) + 1  # pad by one cell
    shape = tuple(int(s) for s in cell.max(axis=0) + 2)
    keys = np.ravel_multi_index(cell.T, shape)
    order = np.argsort(keys, kind="stable")
    return NeighborBins(x, float(cutoff), order, keys[order], cell, shape)


def brute_force_pairs(positions, cutoff: float):
    """O(N^2) reference enumeration of pairs within ``cutoff``."""
    x = np.asarray(positions, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    diff = x[:, None, :] - x[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    i, j = np.nonzero(np.triu(dist <= cutoff, k=1))
    return i, j
