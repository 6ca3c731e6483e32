"""Brute-force reference implementations used only by the test suite.

Everything here is deliberately naive: explicit voxel loops, dictionaries for
matrices and scalar arithmetic for every feature formula, so that it shares no
code path with the vectorised implementations it checks.
"""
import itertools
import math
from collections import deque
from fractions import Fraction

OFFSETS26 = [d for d in itertools.product((-1, 0, 1), repeat=3) if d != (0, 0, 0)]
DIRS13 = []
for d in OFFSETS26:
    if tuple(-c for c in d) not in DIRS13:
        DIRS13.append(d)


def _grid(levels):
    lv = levels.tolist()
    nx, ny, nz = len(lv), len(lv[0]), len(lv[0][0])

    def at(x, y, z):
        if 0 <= x < nx and 0 <= y < ny and 0 <= z < nz:
            return lv[x][y][z]
        return 0

    voxels = [(x, y, z) for x in range(nx) for y in range(ny) for z in range(nz) if lv[x][y][z] > 0]
    return at, voxels


def _h(probs):
    return -sum(q * math.log2(q) for q in probs if q > 0)


# ---------------------------------------------------------------------- GLCM


def glcm_dir_counts(levels, d):
    at, voxels = _grid(levels)
    counts = {}
    for (x, y, z) in voxels:
        for sgn in (1, -1):
            b = at(x + sgn * d[0], y + sgn * d[1], z + sgn * d[2])
            if b > 0:
                a = at(x, y, z)
                counts[(a, b)] = counts.get((a, b), 0) + 1
    return counts


def glcm_feats_from_counts(counts, ng):
    tot = sum(counts.values())
    p = {k: v / tot for k, v in counts.items()}
    P = lambda i, j: p.get((i, j), 0.0)  # noqa: E731
    L = range(1, ng + 1)
    px = {i: sum(P(i, j) for j in L) for i in L}
    py = {j: sum(P(i, j) for i in L) for j in L}
    ux = sum(i * px[i] for i in L)
    uy = sum(j * py[j] for j in L)
    sx = math.sqrt(sum((i - ux) ** 2 * px[i] for i in L))
    sy = math.sqrt(sum((j - uy) ** 2 * py[j] for j in L))
    pplus, pminus = {}, {}
    for i in L:
        for j in L:
            pplus[i + j] = pplus.get(i + j, 0.0) + P(i, j)
            pminus[abs(i - j)] = pminus.get(abs(i - j), 0.0) + P(i, j)
    da = sum(k * v for k, v in pminus.items())
    hx, hy = _h(px.values()), _h(py.values())
    hxy = _h(p.values())
    hxy1 = -sum(P(i, j) * math.log2(px[i] * py[j]) for i in L for j in L if P(i, j) > 0)
    # hxy2 - hxy equals the mutual information; exact rational ratios make it
    # exactly 0 for an independent matrix
    rows = {i: sum(counts.get((i, j), 0) for j in L) for i in L}
    cols = {j: sum(counts.get((i, j), 0) for i in L) for j in L}
    mutual = sum(P(i, j) * math.log2(Fraction(counts[(i, j)] * tot, rows[i] * cols[j]))
                 for (i, j) in counts)
    acor = sum(P(i, j) * i * j for i in L for j in L)
    cs = lambda e: sum((i + j - ux - uy) ** e * P(i, j) for i in L for j in L)  # noqa: E731
    return {
        "Autocorrelation": acor,
        "ClusterProminence": cs(4),
        "ClusterShade": cs(3),
        "ClusterTendency": cs(2),
        "Contrast": sum((i - j) ** 2 * P(i, j) for i in L for j in L),
        "Correlation": (acor - ux * uy) / (sx * sy) if sx * sy > 0 else 1.0,
        "DifferenceAverage": da,
        "DifferenceEntropy": _h(pminus.values()),
        "DifferenceVariance": sum((k - da) ** 2 * v for k, v in pminus.items()),
        "Id": sum(P(i, j) / (1 + abs(i - j)) for i in L for j in L),
        "Idm": sum(P(i, j) / (1 + (i - j) ** 2) for i in L for j in L),
        "Idmn": sum(P(i, j) / (1 + (i - j) ** 2 / ng ** 2) for i in L for j in L),
        "Idn": sum(P(i, j) / (1 + abs(i - j) / ng) for i in L for j in L),
        "Imc1": (hxy - hxy1) / max(hx, hy) if max(hx, hy) > 0 else 0.0,
        "Imc2": math.sqrt(max(0.0, 1 - math.exp(-2 * mutual))),
        "InverseVariance": sum(P(i, j) / (i - j) ** 2 for i in L for j in L if i != j),
        "JointAverage": ux,
        "JointEnergy": sum(v * v for v in p.values()),
        "JointEntropy": hxy,
        "MaximumProbability": max(p.values()),
        "SumEntropy": _h(pplus.values()),
        "SumSquares": sum((i - ux) ** 2 * P(i, j) for i in L for j in L),
    }


def glcm(levels, ng):
    per = [glcm_dir_counts(levels, d) for d in DIRS13]
    per = [glcm_feats_from_counts(c, ng) for c in per if c]
    if not per:
        return None
    return {k: sum(f[k] for f in per) / len(per) for k in per[0]}


# ---------------------------------------------------------- size matrices


def size_feats(counts, ng, n_voxels):
    """Generic run/zone/dependence formulas from a {(gray, size): count} dict."""
    tot = sum(counts.values())
    pg, ps = {}, {}
    for (i, j), c in counts.items():
        pg[i] = pg.get(i, 0) + c
        ps[j] = ps.get(j, 0) + c
    mu_i = sum(i * c for (i, j), c in counts.items()) / tot
    mu_j = sum(j * c for (i, j), c in counts.items()) / tot
    s = lambda f: sum(c * f(i, j) for (i, j), c in counts.items()) / tot  # noqa: E731
    return {
        "short": s(lambda i, j: 1 / j ** 2),
        "long": s(lambda i, j: j ** 2),
        "gln": sum(v * v for v in pg.values()) / tot,
        "glnn": sum(v * v for v in pg.values()) / tot ** 2,
        "sn": sum(v * v for v in ps.values()) / tot,
        "snn": sum(v * v for v in ps.values()) / tot ** 2,
        "pct": tot / n_voxels,
        "glv": s(lambda i, j: (i - mu_i) ** 2),
        "sv": s(lambda i, j: (j - mu_j) ** 2),
        "ent": _h([c / tot for c in counts.values()]),
        "lgl": s(lambda i, j: 1 / i ** 2),
        "hgl": s(lambda i, j: i ** 2),
        "slgl": s(lambda i, j: 1 / (i ** 2 * j ** 2)),
        "shgl": s(lambda i, j: i ** 2 / j ** 2),
        "llgl": s(lambda i, j: j ** 2 / i ** 2),
        "lhgl": s(lambda i, j: i ** 2 * j ** 2),
    }


def glrlm(levels):
    at, voxels = _grid(levels)
    per = []
    for d in DIRS13:
        counts = {}
        for (x, y, z) in voxels:
            g = at(x, y, z)
            if at(x - d[0], y - d[1], z - d[2]) == g:
                continue  # not a run start
            n = 1
            while at(x + n * d[0], y + n * d[1], z + n * d[2]) == g:
                n += 1
            counts[(g, n)] = counts.get((g, n), 0) + 1
        per.append(size_feats(counts, None, len(voxels)))
    return {k: sum(f[k] for f in per) / len(per) for k in per[0]}


def glszm(levels):
    at, voxels = _grid(levels)
    seen = set()
    counts = {}
    for v in voxels:
        if v in seen:
            continue
        g = at(*v)
        queue, size = deque([v]), 0
        seen.add(v)
        while queue:
            x, y, z = queue.popleft()
            size += 1
            for d in OFFSETS26:
                w = (x + d[0], y + d[1], z + d[2])
                if w not in seen and at(*w) == g:
                    seen.add(w)
                    queue.append(w)
        counts[(g, size)] = counts.get((g, size), 0) + 1
    return size_feats(counts, None, len(voxels)), counts


def gldm(levels):
    at, voxels = _grid(levels)
    counts = {}
    for (x, y, z) in voxels:
        g = at(x, y, z)
        dep = 1 + sum(1 for d in OFFSETS26 if at(x + d[0], y + d[1], z + d[2]) == g)
        counts[(g, dep)] = counts.get((g, dep), 0) + 1
    return size_feats(counts, None, len(voxels))


def ngtdm(levels, ng):
    at, voxels = _grid(levels)
    n = {i: 0 for i in range(1, ng + 1)}
    s = {i: 0.0 for i in range(1, ng + 1)}
    for (x, y, z) in voxels:
        g = at(x, y, z)
        nb = [at(x + d[0], y + d[1], z + d[2]) for d in OFFSETS26]
        nb = [b for b in nb if b > 0]
        if nb:
            n[g] += 1
            s[g] += abs(g - sum(nb) / len(nb))
    nvp = sum(n.values())
    if nvp == 0:
        return None
    p = {i: n[i] / nvp for i in n}
    P = [i for i in p if p[i] > 0]
    ngp = len(P)
    ps = sum(p[i] * s[i] for i in P)
    stot = sum(s.values())
    busy_den = sum(abs(i * p[i] - j * p[j]) for i in P for j in P)
    return {
        "Coarseness": 1 / ps if ps > 0 else 1e6,
        "Contrast": (sum(p[i] * p[j] * (i - j) ** 2 for i in P for j in P) / (ngp * (ngp - 1))
                     * stot / nvp) if ngp > 1 else 0.0,
        "Busyness": ps / busy_den if busy_den > 0 else 0.0,
        "Complexity": sum(abs(i - j) * (p[i] * s[i] + p[j] * s[j]) / (p[i] + p[j])
                          for i in P for j in P) / nvp,
        "Strength": sum((p[i] + p[j]) * (i - j) ** 2 for i in P for j in P) / stot
        if stot > 0 else 0.0,
    }


# ------------------------------------------------------------------ LoG


def mirror_index(i, n):
    if n == 1:
        return 0
    period = 2 * (n - 1)
    i %= period
    return period - i if i > n - 1 else i


def dense_log_kernel(sigma_vox, radius):
    """Tabulated 3-D LoG kernel: separable sampled Gaussian convolved with the
    6-neighbour Laplacian stencil, support radius + 1, unit spacing."""
    g = [math.exp(-0.5 * (k / sigma_vox) ** 2) for k in range(-radius, radius + 1)]
    tot = sum(g)
    g = [v / tot for v in g]
    R = radius + 1

    def G(a, b, c):
        if max(abs(a), abs(b), abs(c)) > radius:
            return 0.0
        return g[a + radius] * g[b + radius] * g[c + radius]

    kernel = {}
    for a in range(-R, R + 1):
        for b in range(-R, R + 1):
            for c in range(-R, R + 1):
                val = -6 * G(a, b, c)
                for e in ((1, 0, 0), (0, 1, 0), (0, 0, 1)):
                    val += G(a + e[0], b + e[1], c + e[2]) + G(a - e[0], b - e[1], c - e[2])
                if val != 0.0:
                    kernel[(a, b, c)] = val
    return kernel


def dense_convolve_mirror(data, kernel, scale):
    nx, ny, nz = data.shape
    out = [[[0.0] * nz for _ in range(ny)] for _ in range(nx)]
    for x in range(nx):
        for y in range(ny):
            for z in range(nz):
                acc = 0.0
                for (a, b, c), w in kernel.items():
                    acc += w * data[mirror_index(x + a, nx), mirror_index(y + b, ny),
                                    mirror_index(z + c, nz)]
                out[x][y][z] = scale * acc
    return out


# ----------------------------------------------------------------- SHAP


def path_expectation(tree, x, subset, node=0):
    """E[f(x) | x_S] with unknown features integrated out by training cover."""
    if tree["left"][node] < 0:
        return tree["value"][node]
    f = tree["feature"][node]
    left, right = tree["left"][node], tree["right"][node]
    if f in subset:
        nxt = left if x[f] <= tree["threshold"][node] else right
        return path_expectation(tree, x, subset, nxt)
    cl, cr = tree["cover"][left], tree["cover"][right]
    return (cl * path_expectation(tree, x, subset, left)
            + cr * path_expectation(tree, x, subset, right)) / (cl + cr)


def brute_shapley(tree, x, n_features):
    """Exact Shapley values by enumerating every coalition."""
    phi = [0.0] * n_features
    players = list(range(n_features))
    for i in players:
        others = [j for j in players if j != i]
        for r in range(len(others) + 1):
            weight = math.factorial(r) * math.factorial(n_features - r - 1) / math.factorial(n_features)
            for S in itertools.combinations(others, r):
                S = set(S)
                phi[i] += weight * (path_expectation(tree, x, S | {i}) - path_expectation(tree, x, S))
    return phi


# ------------------------------------------------------------------ evaluation


def pair_count_auc(scores, labels):
    """P(s+ > s-) + P(s+ = s-) / 2 by looping over every pair."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    twice = 0
    for a in pos:
        for b in neg:
            twice += 2 if a > b else 1 if a == b else 0
    return twice / (2 * len(pos) * len(neg))


def _rank_aucs(S, y):
    """Row-wise Mann-Whitney AUC of a resample matrix (rows = resamples)."""
    import numpy as np
    from scipy.stats import rankdata

    pos = np.asarray(y) == 1
    m, n = int(pos.sum()), int((~pos).sum())
    r = rankdata(S, axis=1)
    return (r[:, pos].sum(axis=1) - m * (m + 1) / 2) / (m * n)


def paired_permutation_p(a, b, y, n_resamples, rng):
    """Two-sided paired permutation test on AUC_a - AUC_b: swap the two models'
    scores case by case at random."""
    import numpy as np

    a, b = np.asarray(a, float), np.asarray(b, float)
    obs = abs(_rank_aucs(a[None], y)[0] - _rank_aucs(b[None], y)[0])
    swap = rng.random((n_resamples, len(a))) < 0.5
    d = np.abs(_rank_aucs(np.where(swap, b, a), y) - _rank_aucs(np.where(swap, a, b), y))
    return float(np.mean(d >= obs - 1e-12))


def _tie_groups(x, o, w):
    keys = sorted(set(x))
    groups = [[(oi, wi) for xi, oi, wi in zip(x, o, w) if xi == k] for k in keys]
    return keys, groups


def weighted_sse(fitted, o, w):
    return sum(wi * (fi - oi) ** 2 for fi, oi, wi in zip(fitted, o, w))


def isotonic_partition_oracle(x, o, w):
    """Best monotone fit by enumerating every split of the sorted distinct scores
    into contiguous blocks, each fitted by its weighted mean.  Returns the SSE."""
    keys, groups = _tie_groups(x, o, w)
    m = len(keys)
    best = math.inf
    for cuts in itertools.product([False, True], repeat=m - 1):
        blocks, cur = [], [0]
        for i, c in enumerate(cuts, 1):
            if c:
                blocks.append(cur)
                cur = [i]
            else:
                cur.append(i)
        blocks.append(cur)
        levels, sse = [], 0.0
        for blk in blocks:
            pairs = [p for i in blk for p in groups[i]]
            tw = sum(wi for _, wi in pairs)
            mu = sum(oi * wi for oi, wi in pairs) / tw
            levels.append(mu)
            sse += sum(wi * (oi - mu) ** 2 for oi, wi in pairs)
        if all(a <= b + 1e-15 for a, b in zip(levels, levels[1:])):
            best = min(best, sse)
    return best


def isotonic_grid_oracle(x, o, w, n_grid=401):
    """Monotone step fit restricted to a level grid, optimised exactly by dynamic
    programming over distinct scores.  Returns the SSE (an upper bound on the optimum)."""
    import numpy as np

    keys, groups = _tie_groups(x, o, w)
    grid = np.linspace(min(o), max(o), n_grid)
    best = np.zeros(n_grid)
    for g in groups:
        cost = sum(wi * (grid - oi) ** 2 for oi, wi in g)
        best = np.minimum.accumulate(best) + cost
    return float(best.min())


def random_monotone_sse(x, o, w, rng, n_candidates=1000):
    """Smallest SSE among random nondecreasing level vectors over distinct scores."""
    import numpy as np

    keys, groups = _tie_groups(x, o, w)
    lo, hi = min(o), max(o)
    best = math.inf
    for _ in range(n_candidates):
        levels = np.sort(rng.uniform(lo, hi, len(keys)))
        sse = sum(wi * (lv - oi) ** 2 for lv, g in zip(levels, groups) for oi, wi in g)
        best = min(best, sse)
    return best


def random_tree_dict(rng, n_features, max_depth):
    """Random flat tree with consistent covers (children sum to their parent)."""
    tree = {k: [] for k in ("feature", "threshold", "left", "right", "value", "cover")}

    def node(cover, depth):
        i = len(tree["feature"])
        for k in tree:
            tree[k].append(None)
        tree["cover"][i] = float(cover)
        if depth >= max_depth or cover < 2 or rng.random() < 0.25:
            tree["feature"][i], tree["threshold"][i] = -1, 0.0
            tree["left"][i] = tree["right"][i] = -1
            tree["value"][i] = float(rng.random())
            return i
        tree["feature"][i] = int(rng.integers(0, n_features))
        tree["threshold"][i] = float(rng.normal())
        tree["value"][i] = 0.0
        c_left = int(rng.integers(1, cover))
        tree["left"][i] = node(c_left, depth + 1)
        tree["right"][i] = node(cover - c_left, depth + 1)
        return i

    node(int(rng.integers(2, 200)), 0)
    return tree
