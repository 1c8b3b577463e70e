"""Slow, loop-based reference implementations used only by the tests.

They read raw masks and depth lists directly and share no code with the
package's vectorized paths.
"""

import math


def naive_metrics(pred, gt, max_depth=10.0, min_depth=1e-3, base=1.25):
    n = 0
    sq = rel = lg = 0.0
    hits = [0, 0, 0]
    for i in range(len(gt)):
        for j in range(len(gt[0])):
            g = gt[i][j]
            p = pred[i][j]
            if not (g == g) or g <= 0 or g > max_depth or not (p == p) or math.isinf(p):
                continue
            p = min(max(p, min_depth), max_depth)
            n += 1
            sq += (p - g) ** 2
            rel += abs(p - g) / g
            lg += abs(math.log10(p) - math.log10(g))
            r = max(p / g, g / p)
            for k in range(3):
                if r < base ** (k + 1):
                    hits[k] += 1
    return {"delta1": hits[0] / n, "delta2": hits[1] / n, "delta3": hits[2] / n,
            "rmse": math.sqrt(sq / n), "abs_rel": rel / n, "log10": lg / n, "valid_pixels": n}


def naive_object(ids, depth, iid, max_depth=10.0):
    """(row, col, radius, mean, std, max) from nested lists."""
    pix = [(i, j) for i in range(len(ids)) for j in range(len(ids[0])) if ids[i][j] == iid]
    r0 = sum(p[0] for p in pix) / len(pix)
    c0 = sum(p[1] for p in pix) / len(pix)
    rad = max(math.hypot(i - r0, j - c0) for i, j in pix)
    ds = [depth[i][j] for i, j in pix if depth[i][j] == depth[i][j] and 0 < depth[i][j] <= max_depth]
    if not ds:
        return None
    mu = sum(ds) / len(ds)
    sd = math.sqrt(sum((d - mu) ** 2 for d in ds) / len(ds))
    return (r0, c0, rad, mu, sd, max(ds))


def brute_force_relations(ids, depth, classes, lam, unique_only=True):
    """Set of (subject, object, axis, direction) straight from the inequalities."""
    present = sorted({v for row in ids for v in row if v != 0})
    counts = {}
    for i in present:
        counts[classes[i]] = counts.get(classes[i], 0) + 1
    stats = {}
    for i in present:
        if unique_only and counts[classes[i]] != 1:
            continue
        s = naive_object(ids, depth, i)
        if s is not None:
            stats[i] = s
    out = set()
    for a in stats:
        for b in stats:
            if a == b:
                continue
            xa, ya, ra, ma, sa, Ma = stats[a]
            xb, yb, rb, mb, sb, Mb = stats[b]
            if abs(ya - yb) > lam * (ra + rb):
                out.add((a, b, "horizontal", "left" if ya < yb else "right"))
            if abs(xa - xb) > lam * (ra + rb):
                out.add((a, b, "vertical", "above" if xa < xb else "below"))
            if abs(ma - mb) > (Ma - ma) + (Mb - mb):
                out.add((a, b, "depth", "front" if ma + sa < mb + sb else "behind"))
    return out
