"""Slow reference implementations used to cross-check the fast paths.

Everything here trades speed for obviousness: breadth-first flood fill
instead of run-based union-find, exhaustive candidate scans instead of
incrementally maintained state, Fraction arithmetic instead of carefully
ordered floats.  Tests compute the expected value through these routes
first and then assert that the package's implementation agrees.
"""

import math
from collections import deque
from fractions import Fraction

import numpy as np

_MASK64 = (1 << 64) - 1
_GRID = 1 << 20


# ---------------------------------------------------------------------------
# connected components


def flood_components(binary, connectivity=8):
    """Pixel lists of connected regions via breadth-first flood fill.

    Returns one sorted list of (y, x) pairs per component, components
    ordered by (min y, min x) like the package implementation.
    """
    grid = np.asarray(binary, dtype=bool)
    h, w = grid.shape
    if connectivity == 8:
        steps = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]
    else:
        steps = [(-1, 0), (0, -1), (0, 1), (1, 0)]
    seen = np.zeros((h, w), dtype=bool)
    comps = []
    for y in range(h):
        for x in range(w):
            if not grid[y, x] or seen[y, x]:
                continue
            queue = deque([(y, x)])
            seen[y, x] = True
            pixels = []
            while queue:
                cy, cx = queue.popleft()
                pixels.append((cy, cx))
                for dy, dx in steps:
                    ny, nx = cy + dy, cx + dx
                    if 0 <= ny < h and 0 <= nx < w and grid[ny, nx] and not seen[ny, nx]:
                        seen[ny, nx] = True
                        queue.append((ny, nx))
            comps.append(sorted(pixels))
    comps.sort(key=lambda px: (px[0][0], min(x for _, x in px)))
    return comps


# ---------------------------------------------------------------------------
# threshold selection


def isodata_scan(hist):
    """Fixed-point threshold via a table over all 256 integer cuts.

    The update T(g) = (mean below or at g + mean above g) / 2 is
    precomputed for every cut g that leaves both sides populated, then the
    mean-seeded iteration is replayed against that table in plain Python
    arithmetic.
    """
    counts = [int(c) for c in hist]
    total_n = sum(counts)
    total_v = sum(v * c for v, c in enumerate(counts))
    table = {}
    n_low = 0
    v_low = 0
    for g in range(256):
        n_low += counts[g]
        v_low += g * counts[g]
        n_high = total_n - n_low
        v_high = total_v - v_low
        if n_low and n_high:
            table[g] = (v_low / n_low + v_high / n_high) / 2.0
    t = total_v / total_n
    for _ in range(100):
        t_next = table[math.floor(t)]
        if abs(t_next - t) < 0.5:
            return t_next
        t = t_next
    return t


# ---------------------------------------------------------------------------
# convex hull


def hull_vertices_scan(points):
    """Hull vertex set by testing every directed pair as a supporting edge.

    A pair (a, b) supports the hull when every other point lies strictly to
    its left or on the closed segment between a and b.  Collinear points
    strictly between two vertices are rejected because the pair they would
    extend fails the segment containment check.  Integer inputs keep every
    cross product exact.
    """
    pts = sorted({(int(p[0]), int(p[1])) for p in points})
    verts = set()
    for a in pts:
        for b in pts:
            if a == b:
                continue
            supporting = True
            for p in pts:
                if p == a or p == b:
                    continue
                cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
                if cross < 0:
                    supporting = False
                    break
                if cross == 0:
                    inside = (
                        min(a[0], b[0]) <= p[0] <= max(a[0], b[0])
                        and min(a[1], b[1]) <= p[1] <= max(a[1], b[1])
                    )
                    if not inside:
                        supporting = False
                        break
            if supporting:
                verts.add(a)
                verts.add(b)
    return verts


def hull_vertices_scan_fast(points):
    """Same supporting-edge scan as hull_vertices_scan, batched per anchor.

    All n^3 cross products are still evaluated; numpy just evaluates the
    (candidate, witness) plane for one anchor at a time so point sets in
    the hundreds stay affordable.  Integer coordinates keep every product
    exact in int64.
    """
    pts = np.array(
        sorted({(int(p[0]), int(p[1])) for p in points}), dtype=np.int64
    )
    n = len(pts)
    if n == 1:
        return {tuple(pts[0])}
    verts = set()
    for i in range(n):
        a = pts[i]
        d = pts - a
        cross = (
            d[:, 0][:, None] * d[:, 1][None, :]
            - d[:, 1][:, None] * d[:, 0][None, :]
        )
        lo = np.minimum(a, pts)
        hi = np.maximum(a, pts)
        inside = (
            (pts[None, :, 0] >= lo[:, None, 0])
            & (pts[None, :, 0] <= hi[:, None, 0])
            & (pts[None, :, 1] >= lo[:, None, 1])
            & (pts[None, :, 1] <= hi[:, None, 1])
        )
        # a witness on the carrier line only passes inside the closed
        # segment; the degenerate pair b == a therefore never supports
        ok = (cross > 0) | ((cross == 0) & inside)
        supporting = ok.all(axis=1)
        supporting[i] = False
        if supporting.any():
            verts.add((int(a[0]), int(a[1])))
            for j in np.nonzero(supporting)[0]:
                verts.add((int(pts[j, 0]), int(pts[j, 1])))
    return verts


def polygon_is_counter_clockwise(vertices):
    """Strict convexity check: every consecutive turn is a left turn."""
    n = len(vertices)
    for i in range(n):
        o = vertices[i]
        a = vertices[(i + 1) % n]
        b = vertices[(i + 2) % n]
        cross = (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
        if cross <= 0:
            return False
    return True


# ---------------------------------------------------------------------------
# decision tree split selection


def entropy_bits(c0, c1):
    n = c0 + c1
    h = 0.0
    for c in (c0, c1):
        if c:
            p = c / n
            h -= p * math.log2(p)
    return h


def split_scan(X, y):
    """Exhaustive best split: every feature, every midpoint threshold.

    Quality is information gain in bits; the first candidate reaching the
    running maximum in (feature, threshold) order wins and the gain must be
    strictly positive.  Returns (feature, threshold, gain) or None.
    """
    rows = [[float(v) for v in row] for row in np.asarray(X, dtype=np.float64)]
    labels = [int(v) for v in y]
    n = len(labels)
    if n < 2:
        return None
    c1_total = sum(labels)
    h_parent = entropy_bits(n - c1_total, c1_total)
    best = None
    best_gain = 0.0
    for f in range(len(rows[0])):
        pairs = sorted(zip([row[f] for row in rows], labels))
        vals = [p[0] for p in pairs]
        running = 0
        for i in range(n - 1):
            running += pairs[i][1]
            if vals[i] == vals[i + 1]:
                continue
            n_left = i + 1
            c1_left = running
            c0_left = n_left - c1_left
            n_right = n - n_left
            c1_right = c1_total - c1_left
            c0_right = n_right - c1_right
            gain = (
                h_parent
                - (n_left / n) * entropy_bits(c0_left, c1_left)
                - (n_right / n) * entropy_bits(c0_right, c1_right)
            )
            if gain > best_gain:
                best = (f, (vals[i] + vals[i + 1]) / 2.0, float(gain))
                best_gain = gain
    return best


# ---------------------------------------------------------------------------
# deterministic random streams


def splitmix64_sequence(seed, count):
    """Outputs of the published splitmix64 recurrence, written out longhand."""
    out = []
    state = seed & _MASK64
    for _ in range(count):
        state = (state + 0x9E3779B97F4A7C15) & _MASK64
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        out.append(z ^ (z >> 31))
    return out


class MirrorRng:
    """Second implementation of the package generator, for cross-checking."""

    def __init__(self, seed):
        self.state = seed & _MASK64
        self.spare = None

    def u64(self):
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def uniform(self):
        return (self.u64() >> 11) * 2.0 ** -53

    def below(self, n):
        return (self.u64() * n) >> 64

    def normal(self):
        if self.spare is not None:
            z, self.spare = self.spare, None
            return z
        u1 = 1.0 - self.uniform()
        u2 = self.uniform()
        r = math.sqrt(-2.0 * math.log(u1))
        self.spare = r * math.sin(2.0 * math.pi * u2)
        return r * math.cos(2.0 * math.pi * u2)


def mirror_derive_seed(seed, *parts):
    def mix(z):
        z &= _MASK64
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    state = mix(seed & _MASK64)
    for part in parts:
        state = mix((state + 0x9E3779B97F4A7C15 + (part & _MASK64)) & _MASK64)
    return state


def patch_sums_reference(gray, center, seed, count=100, size=5):
    """Seeded patch pixel sums recomputed with the mirror generator."""
    rng = MirrorRng(seed)
    h, w = gray.shape
    half = size // 2
    std = math.sqrt(5.0)
    sums = []
    for _ in range(count):
        zx = rng.normal()
        zy = rng.normal()
        px = int(math.floor(float(center[0]) + std * zx + 0.5))
        py = int(math.floor(float(center[1]) + std * zy + 0.5))
        px = min(max(px, half), w - 1 - half)
        py = min(max(py, half), h - 1 - half)
        total = 0
        for yy in range(py - half, py + half + 1):
            for xx in range(px - half, px + half + 1):
                total += int(gray[yy, xx])
        sums.append(total)
    return sums


# ---------------------------------------------------------------------------
# intensity statistics


def _snap_to_grid(x: Fraction) -> float:
    """Round an exact rational half-to-even onto the 2**-20 grid."""
    scaled = x * _GRID
    q = scaled.numerator // scaled.denominator
    rem = scaled - q
    if rem > Fraction(1, 2) or (rem == Fraction(1, 2) and q % 2):
        q += 1
    return q / float(_GRID)


def grid_stats_reference(patch_sums, patch_area=25):
    """(mean, max, q1, q2, q3) of patch means in exact rational arithmetic.

    Quartiles interpolate linearly between order statistics at positions
    k * (n - 1) / 4; every statistic is snapped to the 2**-20 grid at the
    very end, so no rounding happens mid-computation.
    """
    sums = sorted(int(s) for s in patch_sums)
    n = len(sums)
    means = [Fraction(s, patch_area) for s in sums]

    def quartile(k):
        pos = Fraction((n - 1) * k, 4)
        lo = pos.numerator // pos.denominator
        frac = pos - lo
        if frac == 0:
            return means[lo]
        return means[lo] * (1 - frac) + means[lo + 1] * frac

    return (
        _snap_to_grid(Fraction(sum(sums), n * patch_area)),
        _snap_to_grid(means[-1]),
        _snap_to_grid(quartile(1)),
        _snap_to_grid(quartile(2)),
        _snap_to_grid(quartile(3)),
    )


# ---------------------------------------------------------------------------
# geometry helpers


def bbox_of_pixels(pixels):
    xs = [int(p[0]) for p in pixels]
    ys = [int(p[1]) for p in pixels]
    return (min(xs), min(ys), max(xs), max(ys))


def centroid_of_pixels(pixels):
    xs = [int(p[0]) for p in pixels]
    ys = [int(p[1]) for p in pixels]
    return (sum(xs) / len(xs), sum(ys) / len(ys))


def iou_reference(a, b):
    """IoU of two inclusive boxes by literally counting lattice cells."""
    cells_a = {
        (x, y) for x in range(a[0], a[2] + 1) for y in range(a[1], a[3] + 1)
    }
    cells_b = {
        (x, y) for x in range(b[0], b[2] + 1) for y in range(b[1], b[3] + 1)
    }
    inter = len(cells_a & cells_b)
    if inter == 0:
        return 0.0
    return inter / float(len(cells_a | cells_b))


def boundary_reference(region, bbox=None):
    """8-neighborhood boundary of a region; the frame border counts as
    outside, so clipped objects stay sealed along the image edge."""
    reg = np.asarray(region, dtype=bool)
    h, w = reg.shape
    if bbox is None:
        x0, y0, x1, y1 = 0, 0, w - 1, h - 1
    else:
        x0, y0, x1, y1 = bbox
    out = np.zeros_like(reg)
    for y in range(y0, y1 + 1):
        for x in range(x0, x1 + 1):
            if not reg[y, x]:
                continue
            for dy in (-1, 0, 1):
                for dx in (-1, 0, 1):
                    if dy == 0 and dx == 0:
                        continue
                    ny, nx = y + dy, x + dx
                    if ny < 0 or ny >= h or nx < 0 or nx >= w or not reg[ny, nx]:
                        out[y, x] = True
    return out


# ---------------------------------------------------------------------------
# label propagation


def propagate_reference(prev_centers, prev_labels, cur_centers):
    """Nearest-previous-center label inheritance with explicit tie rules.

    Each current instance takes the label of the closest previous center
    (ties to the lower previous index); if several inherit the target
    label, the closest claimant keeps it (ties to the lower current index).
    """
    inherited = []
    for cx, cy in cur_centers:
        best_j = None
        best_d = None
        for j, (px, py) in enumerate(prev_centers):
            d = math.hypot(cx - px, cy - py)
            if best_d is None or d < best_d:
                best_d, best_j = d, j
        inherited.append((best_j, best_d))
    labels = [int(prev_labels[j]) for j, _ in inherited]
    claimants = [i for i, lab in enumerate(labels) if lab == 1]
    if len(claimants) > 1:
        keeper = min(claimants, key=lambda i: (inherited[i][1], i))
        for i in claimants:
            if i != keeper:
                labels[i] = 0
    return labels


def luma_reference(r, g, b):
    """ITU-R 601 luma, rounded half-up in exact integer arithmetic."""
    return (299 * int(r) + 587 * int(g) + 114 * int(b) + 500) // 1000
