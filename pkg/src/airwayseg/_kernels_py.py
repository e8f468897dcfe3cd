"""Pure NumPy/stdlib implementations of the hot kernels.

Semantically equivalent to the compiled ``airwayseg._kernels`` extension and
used as the fallback backend when the extension is not built. Integer-valued
results (NMS selections, flood labels, component labels) are identical to the
compiled backend; box-filter output may differ from it at float rounding
level because the summation order differs.
"""

from __future__ import annotations

import heapq
from collections import deque
from math import sqrt

import numpy as np

NAME = "python"


def box_smooth(data: np.ndarray, valid: np.ndarray, kernel: int, passes: int) -> np.ndarray:
    """Repeated kernel x kernel mean filter with clamp-to-edge padding.

    Invalid pixels never contribute to a window's average and stay 0 in the
    output; the average divides by the number of valid samples in the window
    (edge-replicated samples count with multiplicity).
    """
    h, w = data.shape
    r = kernel // 2
    vmask = valid.astype(np.float64)
    out = np.where(valid, data, 0.0)
    # Window counts depend only on the valid mask, so compute them once.
    cnt = _box_sum(vmask, r)
    safe = cnt > 0
    for _ in range(passes):
        s = _box_sum(out * vmask, r)
        out = np.divide(s, cnt, out=np.zeros_like(s), where=safe)
        out[~valid] = 0.0
    return out


def _box_sum(arr: np.ndarray, r: int) -> np.ndarray:
    if r == 0:
        return arr.copy()
    padded = np.pad(arr, r, mode="edge")
    ii = padded.cumsum(axis=0).cumsum(axis=1)
    ii = np.pad(ii, ((1, 0), (1, 0)))
    h, w = arr.shape
    k = 2 * r + 1
    return (
        ii[k : k + h, k : k + w]
        - ii[0:h, k : k + w]
        - ii[k : k + h, 0:w]
        + ii[0:h, 0:w]
    )


def local_max_candidates(data: np.ndarray, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pixels inside ``mask`` that are >= every in-bounds 8-neighbor, row-major."""
    h, w = data.shape
    is_max = mask.astype(bool).copy()
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            if dr == 0 and dc == 0:
                continue
            r0, r1 = max(0, -dr), h - max(0, dr)
            c0, c1 = max(0, -dc), w - max(0, dc)
            if r1 <= r0 or c1 <= c0:
                continue
            here = data[r0:r1, c0:c1]
            there = data[r0 + dr : r1 + dr, c0 + dc : c1 + dc]
            is_max[r0:r1, c0:c1] &= here >= there
    rows, cols = np.nonzero(is_max)
    return rows.astype(np.int64), cols.astype(np.int64)


def greedy_nms(
    rows: np.ndarray, cols: np.ndarray, order: np.ndarray, min_dist: int
) -> np.ndarray:
    """Greedy minimum-distance suppression over pre-sorted candidates.

    ``order`` indexes candidates from best to worst; a candidate is accepted
    iff its squared distance to every accepted one is >= min_dist**2 (exact
    integer arithmetic). Returns accepted candidate indices in acceptance
    order.
    """
    min_d2 = int(min_dist) * int(min_dist)
    accepted: list[int] = []
    ar = np.empty(len(order), dtype=np.int64)
    ac = np.empty(len(order), dtype=np.int64)
    n_acc = 0
    for idx in order:
        r, c = int(rows[idx]), int(cols[idx])
        if n_acc:
            dr = ar[:n_acc] - r
            dc = ac[:n_acc] - c
            if np.min(dr * dr + dc * dc) < min_d2:
                continue
        ar[n_acc] = r
        ac[n_acc] = c
        n_acc += 1
        accepted.append(int(idx))
    return np.asarray(accepted, dtype=np.int64)


# Neighbor offsets in the documented deterministic push order: N, E, S, W,
# then diagonals NE, SE, SW, NW for 8-connectivity.
_NEIGHBORS_4 = ((-1, 0), (0, 1), (1, 0), (0, -1))
_NEIGHBORS_8 = _NEIGHBORS_4 + ((-1, 1), (1, 1), (1, -1), (-1, -1))


def compact_flood(
    height: np.ndarray,
    valid: np.ndarray,
    marker_rows: np.ndarray,
    marker_cols: np.ndarray,
    compactness: float,
    connectivity: int,
    maxdim: float,
) -> np.ndarray:
    """Marker-seeded priority flood over ``height`` with a compactness term.

    Pixels pop in (priority, insertion age) order; a pixel is labeled on its
    first pop and each unlabeled valid neighbor is pushed with priority
    ``height[nb] + compactness * dist(nb, seed_of_region) / maxdim``. Equal
    priorities resolve FIFO via the age counter, markers seeded in list
    order, neighbors pushed in N,E,S,W(,NE,SE,SW,NW) order.
    """
    h, w = height.shape
    offsets = _NEIGHBORS_4 if connectivity == 4 else _NEIGHBORS_8
    labels = np.zeros((h, w), dtype=np.int32)
    seeds = [(int(r), int(c)) for r, c in zip(marker_rows, marker_cols)]
    heap: list[tuple[float, int, int, int, int]] = []
    age = 0
    for k, (r, c) in enumerate(seeds):
        heapq.heappush(heap, (float(height[r, c]), age, r, c, k + 1))
        age += 1
    while heap:
        _, _, r, c, lab = heapq.heappop(heap)
        if labels[r, c] != 0:
            continue
        labels[r, c] = lab
        sr, sc = seeds[lab - 1]
        for dr, dc in offsets:
            nr, nc = r + dr, c + dc
            if nr < 0 or nr >= h or nc < 0 or nc >= w:
                continue
            if labels[nr, nc] != 0 or not valid[nr, nc]:
                continue
            d = sqrt(float((nr - sr) * (nr - sr) + (nc - sc) * (nc - sc)))
            prio = float(height[nr, nc]) + compactness * d / maxdim
            heapq.heappush(heap, (prio, age, nr, nc, lab))
            age += 1
    return labels


def label_components8(mask: np.ndarray) -> tuple[np.ndarray, int]:
    """8-connected component labeling, labels in first-encounter raster order."""
    h, w = mask.shape
    labels = np.zeros((h, w), dtype=np.int32)
    mask = mask.astype(bool)
    nxt = 0
    q: deque[tuple[int, int]] = deque()
    for r0 in range(h):
        row = mask[r0]
        for c0 in range(w):
            if not row[c0] or labels[r0, c0]:
                continue
            nxt += 1
            labels[r0, c0] = nxt
            q.append((r0, c0))
            while q:
                r, c = q.popleft()
                for dr, dc in _NEIGHBORS_8:
                    nr, nc = r + dr, c + dc
                    if 0 <= nr < h and 0 <= nc < w and mask[nr, nc] and not labels[nr, nc]:
                        labels[nr, nc] = nxt
                        q.append((nr, nc))
    return labels, nxt
