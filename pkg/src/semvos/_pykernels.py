"""Pure-Python fallback for the compiled raster kernels.

Same signatures and results as :mod:`semvos._ckernels`, just slower.
"""
from collections import deque

import numpy as np

_FOUR = ((-1, 0), (1, 0), (0, -1), (0, 1))
_EIGHT = tuple((dr, dc) for dr in (-1, 0, 1) for dc in (-1, 0, 1) if dr or dc)


def label_components(mask, eight):
    h, w = mask.shape
    fg = mask.astype(bool).tolist()
    labels = [[-1] * w for _ in range(h)]
    steps = _EIGHT if eight else _FOUR
    n = 0
    for r0 in range(h):
        row = fg[r0]
        for c0 in range(w):
            if not row[c0] or labels[r0][c0] >= 0:
                continue
            labels[r0][c0] = n
            queue = deque([(r0, c0)])
            while queue:
                r, c = queue.popleft()
                for dr, dc in steps:
                    rr, cc = r + dr, c + dc
                    if 0 <= rr < h and 0 <= cc < w and fg[rr][cc] and labels[rr][cc] < 0:
                        labels[rr][cc] = n
                        queue.append((rr, cc))
            n += 1
    return np.array(labels, dtype=np.int32).reshape(h, w), n


def absorb_unlabeled(seeds):
    h, w = seeds.shape
    labels = np.array(seeds, dtype=np.int32).tolist()
    dist = [[-1] * w for _ in range(h)]
    queue = deque()
    for r in range(h):
        for c in range(w):
            if labels[r][c] >= 0:
                dist[r][c] = 0
                queue.append((r, c))
    if not queue:
        return np.zeros((h, w), dtype=np.int32)
    while queue:
        r, c = queue.popleft()
        lab = labels[r][c]
        d = dist[r][c] + 1
        for dr, dc in _FOUR:
            rr, cc = r + dr, c + dc
            if not (0 <= rr < h and 0 <= cc < w):
                continue
            if dist[rr][cc] < 0:
                dist[rr][cc] = d
                labels[rr][cc] = lab
                queue.append((rr, cc))
            elif dist[rr][cc] == d and lab < labels[rr][cc]:
                labels[rr][cc] = lab
    return np.array(labels, dtype=np.int32)


def near_mask(src, target, radius, chebyshev):
    src = np.asarray(src, dtype=bool)
    target = np.asarray(target, dtype=bool)
    h, w = src.shape
    if radius < 0:
        return np.zeros((h, w), dtype=np.uint8)
    reach = int(radius)
    r2 = radius * radius
    # dilate the target by the structuring element, then intersect
    hit = np.zeros((h, w), dtype=bool)
    for dy in range(-reach, reach + 1):
        for dx in range(-reach, reach + 1):
            if abs(dy) >= h or abs(dx) >= w:
                continue
            if not chebyshev and dy * dy + dx * dx > r2:
                continue
            ys, yd = (slice(dy, h), slice(0, h - dy)) if dy >= 0 else (slice(0, h + dy), slice(-dy, h))
            xs, xd = (slice(dx, w), slice(0, w - dx)) if dx >= 0 else (slice(0, w + dx), slice(-dx, w))
            hit[yd, xd] |= target[ys, xs]
    return (hit & src).astype(np.uint8)
