"""Hot numeric kernels, each in a numba loop version and a vectorised numpy version.

The public names at the bottom of the module point at one or the other
depending on :data:`evolvability._accel.USE_NUMBA`. Both versions take and
return plain float64/int64 arrays so they can be compared directly.
"""

import math

import numpy as np

from evolvability._accel import USE_NUMBA, njit

# Layout of the packed world-parameter vector consumed by the rollout kernels.
W_LO_X, W_LO_Y, W_HI_X, W_HI_Y = 0, 1, 2, 3
W_AGENT_X, W_AGENT_Y, W_BLOCK_X, W_BLOCK_Y = 4, 5, 6, 7
W_AGENT_R, W_BLOCK_R, W_STEP = 8, 9, 10
WORLD_PARAM_COUNT = 11
OBS_DIM = 8
ACT_DIM = 2


# --------------------------------------------------------------------------- #
# Push-world rollout
# --------------------------------------------------------------------------- #


@njit
def _clip(x, lo, hi):
    if x < lo:
        return lo
    if x > hi:
        return hi
    return x


@njit
def _rollout_batch_nb(weights, dims, world, max_steps):
    m = weights.shape[0]
    n_layers = dims.shape[0] - 1
    width = 0
    for i in range(dims.shape[0]):
        if dims[i] > width:
            width = dims[i]
    src = np.empty(width)
    dst = np.empty(width)
    out = np.empty((m, 2))
    lo_x, lo_y = world[W_LO_X], world[W_LO_Y]
    hi_x, hi_y = world[W_HI_X], world[W_HI_Y]
    reach = world[W_AGENT_R] + world[W_BLOCK_R]
    step = world[W_STEP]
    for r in range(m):
        w = weights[r]
        ax, ay = world[W_AGENT_X], world[W_AGENT_Y]
        bx, by = world[W_BLOCK_X], world[W_BLOCK_Y]
        sx, sy = bx, by
        for _ in range(max_steps):
            src[0] = ax
            src[1] = ay
            src[2] = bx
            src[3] = by
            src[4] = ax - bx
            src[5] = ay - by
            src[6] = bx - sx
            src[7] = by - sy
            off = 0
            for layer in range(n_layers):
                n_in = dims[layer]
                n_out = dims[layer + 1]
                boff = off + n_in * n_out
                for o in range(n_out):
                    acc = 0.0
                    row = off + o * n_in
                    for i in range(n_in):
                        acc += w[row + i] * src[i]
                    acc += w[boff + o]
                    if layer == n_layers - 1:
                        dst[o] = math.tanh(acc)
                    else:
                        dst[o] = acc if acc > 0.0 else 0.0
                off = boff + n_out
                for o in range(n_out):
                    src[o] = dst[o]
            ax = _clip(ax + step * src[0], lo_x, hi_x)
            ay = _clip(ay + step * src[1], lo_y, hi_y)
            dx = bx - ax
            dy = by - ay
            dist = math.sqrt(dx * dx + dy * dy)
            if dist < reach:
                if dist > 0.0:
                    nx = dx / dist
                    ny = dy / dist
                else:
                    nx = 1.0
                    ny = 0.0
                overlap = reach - dist
                bx = _clip(bx + nx * overlap, lo_x, hi_x)
                by = _clip(by + ny * overlap, lo_y, hi_y)
        out[r, 0] = bx
        out[r, 1] = by
    return out


def _rollout_batch_np(weights, dims, world, max_steps):
    weights = np.asarray(weights, dtype=np.float64)
    m = weights.shape[0]
    layers = []
    off = 0
    for n_in, n_out in zip(dims[:-1], dims[1:]):
        n_in, n_out = int(n_in), int(n_out)
        W = weights[:, off:off + n_in * n_out].reshape(m, n_out, n_in)
        off += n_in * n_out
        b = weights[:, off:off + n_out]
        off += n_out
        layers.append((W, b))
    lo = np.array([world[W_LO_X], world[W_LO_Y]])
    hi = np.array([world[W_HI_X], world[W_HI_Y]])
    agent = np.tile([world[W_AGENT_X], world[W_AGENT_Y]], (m, 1))
    block = np.tile([world[W_BLOCK_X], world[W_BLOCK_Y]], (m, 1))
    start = block.copy()
    reach = world[W_AGENT_R] + world[W_BLOCK_R]
    step = world[W_STEP]
    for _ in range(max_steps):
        x = np.concatenate([agent, block, agent - block, block - start], axis=1)
        for li, (W, b) in enumerate(layers):
            x = np.einsum("moi,mi->mo", W, x) + b
            x = np.tanh(x) if li == len(layers) - 1 else np.maximum(x, 0.0)
        agent = np.clip(agent + step * x[:, :2], lo, hi)
        delta = block - agent
        dist = np.sqrt(delta[:, 0] ** 2 + delta[:, 1] ** 2)
        hit = dist < reach
        if hit.any():
            normal = np.zeros_like(delta)
            normal[:, 0] = 1.0
            pos = hit & (dist > 0.0)
            normal[pos] = delta[pos] / dist[pos, None]
            overlap = reach - dist
            moved = np.clip(block + normal * overlap[:, None], lo, hi)
            block = np.where(hit[:, None], moved, block)
    return block


# --------------------------------------------------------------------------- #
# Novelty scores over an offspring batch
# --------------------------------------------------------------------------- #


@njit
def _knn_scores_nb(cands, archive, k):
    m, d = cands.shape
    a = archive.shape[0]
    pool = m - 1 + a
    kk = k if k < pool else pool
    out = np.empty(m)
    dists = np.empty(pool)
    for i in range(m):
        p = 0
        for j in range(m):
            if j == i:
                continue
            acc = 0.0
            for c in range(d):
                diff = cands[i, c] - cands[j, c]
                acc += diff * diff
            dists[p] = math.sqrt(acc)
            p += 1
        for j in range(a):
            acc = 0.0
            for c in range(d):
                diff = cands[i, c] - archive[j, c]
                acc += diff * diff
            dists[p] = math.sqrt(acc)
            p += 1
        # partial sort, then sum the k smallest in ascending order
        ordered = np.sort(np.partition(dists, kk - 1)[:kk]) if kk < pool else np.sort(dists)
        total = 0.0
        for j in range(kk):
            total += ordered[j]
        out[i] = total
    return out


def _cross_dist(x, y):
    diff = x[:, None, :] - y[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def _knn_scores_np(cands, archive, k):
    m = cands.shape[0]
    sib = _cross_dist(cands, cands)
    off_diag = ~np.eye(m, dtype=bool)
    sib = sib[off_diag].reshape(m, m - 1)
    pool = np.concatenate([sib, _cross_dist(cands, archive)], axis=1)
    kk = min(k, pool.shape[1])
    return np.sort(pool, axis=1)[:, :kk].sum(axis=1)


@njit
def _kde_scores_nb(cands, archive, archive_weights, bandwidth):
    m, d = cands.shape
    a = archive.shape[0]
    norm = (2.0 * math.pi) ** (-0.5 * d) * bandwidth ** (-d)
    inv = 1.0 / (2.0 * bandwidth * bandwidth)
    size = m - 1 + a
    out = np.empty(m)
    for i in range(m):
        total = 0.0
        for j in range(m):
            if j == i:
                continue
            acc = 0.0
            for c in range(d):
                diff = cands[i, c] - cands[j, c]
                acc += diff * diff
            total += math.exp(-acc * inv)
        for j in range(a):
            acc = 0.0
            for c in range(d):
                diff = cands[i, c] - archive[j, c]
                acc += diff * diff
            total += math.exp(-acc * inv) * archive_weights[j]
        out[i] = -norm * total / size
    return out


def _kde_scores_np(cands, archive, archive_weights, bandwidth):
    m, d = cands.shape
    norm = (2.0 * math.pi) ** (-0.5 * d) * bandwidth ** (-d)
    inv = 1.0 / (2.0 * bandwidth * bandwidth)
    sq = np.sum((cands[:, None, :] - cands[None, :, :]) ** 2, axis=-1)
    sib = np.exp(-sq * inv)
    np.fill_diagonal(sib, 0.0)
    sq_a = np.sum((cands[:, None, :] - archive[None, :, :]) ** 2, axis=-1)
    arch = np.exp(-sq_a * inv) * archive_weights[None, :]
    size = m - 1 + archive.shape[0]
    return -norm * (sib.sum(axis=1) + arch.sum(axis=1)) / size


# --------------------------------------------------------------------------- #
# Pairwise statistics of an offspring set
# --------------------------------------------------------------------------- #


@njit
def _pairwise_mean_max_nb(points):
    m, d = points.shape
    total = 0.0
    best = 0.0
    for i in range(m):
        for j in range(i + 1, m):
            acc = 0.0
            for c in range(d):
                diff = points[i, c] - points[j, c]
                acc += diff * diff
            dist = math.sqrt(acc)
            total += dist
            if dist > best:
                best = dist
    pairs = m * (m - 1) // 2
    return total / pairs, best


def _pairwise_mean_max_np(points):
    m = points.shape[0]
    iu = np.triu_indices(m, 1)
    dist = _cross_dist(points, points)[iu]
    return float(dist.mean()), float(dist.max())


# --------------------------------------------------------------------------- #
# Niche-chain simulation
# --------------------------------------------------------------------------- #


@njit
def _pick(cum, u):
    # first index with cum > u
    lo = 0
    hi = cum.shape[0] - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if cum[mid] > u:
            hi = mid
        else:
            lo = mid + 1
    return lo


@njit
def _chain_coverage_nb(cum_t, cum_d, absorbing, uniforms):
    repeats, walks, depth = uniforms.shape
    n = cum_d.shape[0]
    counts = np.zeros(repeats, dtype=np.int64)
    absorbed = 0
    seen = np.zeros(n, dtype=np.bool_)
    for r in range(repeats):
        seen[:] = False
        distinct = 0
        for u in range(walks):
            s = _pick(cum_d, uniforms[r, u, 0])
            if not seen[s]:
                seen[s] = True
                distinct += 1
            for g in range(1, depth):
                if absorbing[s]:
                    absorbed += 1
                else:
                    s = _pick(cum_t[s], uniforms[r, u, g])
                if not seen[s]:
                    seen[s] = True
                    distinct += 1
        counts[r] = distinct
    return counts, absorbed


def _chain_coverage_np(cum_t, cum_d, absorbing, uniforms):
    repeats, walks, depth = uniforms.shape
    n = cum_d.shape[0]
    rows = np.arange(repeats)
    seen = np.zeros((repeats, n), dtype=bool)
    absorbed = 0
    for u in range(walks):
        s = np.searchsorted(cum_d, uniforms[:, u, 0], side="right")
        seen[rows, s] = True
        for g in range(1, depth):
            stuck = absorbing[s]
            absorbed += int(stuck.sum())
            nxt = (cum_t[s] <= uniforms[:, u, g][:, None]).sum(axis=1)
            s = np.where(stuck, s, nxt)
            seen[rows, s] = True
    return seen.sum(axis=1).astype(np.int64), absorbed


if USE_NUMBA:
    rollout_batch = _rollout_batch_nb
    knn_scores = _knn_scores_nb
    kde_scores = _kde_scores_nb
    pairwise_mean_max = _pairwise_mean_max_nb
    chain_coverage = _chain_coverage_nb
else:
    rollout_batch = _rollout_batch_np
    knn_scores = _knn_scores_np
    kde_scores = _kde_scores_np
    pairwise_mean_max = _pairwise_mean_max_np
    chain_coverage = _chain_coverage_np
