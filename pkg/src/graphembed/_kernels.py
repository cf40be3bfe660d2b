"""Numba kernels for the per-step samplers and per-pair SGD loops.

Randomness inside kernels comes from splitmix64 streams so results depend
only on the seeds passed in, never on global state or thread scheduling.
"""

import numpy as np
from numba import njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0


@njit(cache=True)
def mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True)
def stream_seed(a, b, c):
    h = mix64(np.uint64(a) + _GOLDEN)
    h = mix64(h ^ (np.uint64(b) + _GOLDEN))
    return mix64(h ^ (np.uint64(c) + _GOLDEN))


@njit(cache=True)
def next_u64(state):
    state[0] = state[0] + _GOLDEN
    return mix64(state[0])


@njit(cache=True)
def uniform(state):
    return float(next_u64(state) >> _S11) * _INV53


@njit(cache=True)
def randint(state, n):
    return int(uniform(state) * n)


@njit(cache=True)
def build_alias(weights, prob_out, alias_out):
    """Vose alias table for unnormalized ``weights`` written into the out arrays."""
    k = len(weights)
    total = 0.0
    for i in range(k):
        total += weights[i]
    small = np.empty(k, np.int64)
    large = np.empty(k, np.int64)
    ns = 0
    nl = 0
    scaled = np.empty(k)
    for i in range(k):
        scaled[i] = weights[i] * k / total
        alias_out[i] = i
        if scaled[i] < 1.0:
            small[ns] = i
            ns += 1
        else:
            large[nl] = i
            nl += 1
    while ns > 0 and nl > 0:
        ns -= 1
        s = small[ns]
        nl -= 1
        lg = large[nl]
        prob_out[s] = scaled[s]
        alias_out[s] = lg
        scaled[lg] = scaled[lg] - (1.0 - scaled[s])
        if scaled[lg] < 1.0:
            small[ns] = lg
            ns += 1
        else:
            large[nl] = lg
            nl += 1
    while nl > 0:
        nl -= 1
        prob_out[large[nl]] = 1.0
    while ns > 0:
        ns -= 1
        prob_out[small[ns]] = 1.0


@njit(cache=True)
def alias_draw(state, prob, alias, offset, k):
    i = randint(state, k)
    if uniform(state) < prob[offset + i]:
        return i
    return alias[offset + i]


@njit(cache=True)
def _contains(indices, lo, hi, x):
    j = lo + np.searchsorted(indices[lo:hi], x)
    return j < hi and indices[j] == x


@njit(cache=True)
def _bias(indptr, indices, t, x, inv_p, inv_q):
    if x == t:
        return inv_p
    if _contains(indices, indptr[t], indptr[t + 1], x):
        return 1.0
    return inv_q


@njit(cache=True)
def build_node_tables(indptr, weights, prob, alias):
    n = len(indptr) - 1
    for v in range(n):
        lo, hi = indptr[v], indptr[v + 1]
        if hi > lo:
            build_alias(weights[lo:hi], prob[lo:hi], alias[lo:hi])


@njit(cache=True)
def build_edge_tables(indptr, indices, weights, inv_p, inv_q, offsets, prob, alias):
    """One alias table per arc ``t -> v`` over ``v``'s neighbors, biased by ``alpha``."""
    n = len(indptr) - 1
    for t in range(n):
        for e in range(indptr[t], indptr[t + 1]):
            v = indices[e]
            lo, hi = indptr[v], indptr[v + 1]
            k = hi - lo
            if k == 0:
                continue
            w = np.empty(k)
            for a in range(k):
                w[a] = weights[lo + a] * _bias(indptr, indices, t, indices[lo + a], inv_p, inv_q)
            off = offsets[e]
            build_alias(w, prob[off:off + k], alias[off:off + k])


@njit(cache=True)
def _scan_draw(state, indptr, indices, weights, t, v, inv_p, inv_q):
    lo, hi = indptr[v], indptr[v + 1]
    total = 0.0
    for a in range(lo, hi):
        total += weights[a] * _bias(indptr, indices, t, indices[a], inv_p, inv_q)
    r = uniform(state) * total
    acc = 0.0
    for a in range(lo, hi):
        acc += weights[a] * _bias(indptr, indices, t, indices[a], inv_p, inv_q)
        if r < acc:
            return a - lo
    return hi - lo - 1


@njit(cache=True)
def walk_kernel(indptr, indices, weights, starts, walk_ids, length, seed, inv_p, inv_q, mode,
                node_prob, node_alias, edge_offsets, edge_prob, edge_alias, out, lengths):
    """Fill ``out[w]`` with a walk from ``starts[w]``.

    ``mode`` 0: first-order (uniform/weighted) steps; 1: second-order via arc
    alias tables; 2: second-order via linear scan.
    """
    for w in range(len(starts)):
        state = np.empty(1, np.uint64)
        state[0] = stream_seed(seed, starts[w], walk_ids[w])
        cur = starts[w]
        out[w, 0] = cur
        steps = 1
        prev = -1
        prev_arc = -1
        while steps < length:
            lo, hi = indptr[cur], indptr[cur + 1]
            k = hi - lo
            if k == 0:
                break
            if prev < 0 or mode == 0:
                j = alias_draw(state, node_prob, node_alias, lo, k)
            elif mode == 1:
                j = alias_draw(state, edge_prob, edge_alias, edge_offsets[prev_arc], k)
            else:
                j = _scan_draw(state, indptr, indices, weights, prev, cur, inv_p, inv_q)
            prev = cur
            prev_arc = lo + j
            cur = indices[lo + j]
            out[w, steps] = cur
            steps += 1
        lengths[w] = steps


@njit(cache=True)
def _sigmoid(x):
    if x >= 0:
        return 1.0 / (1.0 + np.exp(-x))
    e = np.exp(x)
    return e / (1.0 + e)


@njit(cache=True)
def _log_sigmoid(x):
    if x >= 0:
        return -np.log1p(np.exp(-x))
    return x - np.log1p(np.exp(x))


@njit(cache=True)
def sgns_epoch(walks, lengths, window, neg, Y, C, noise_prob, noise_alias, lr0, lr_min,
               done, total, seed, epoch):
    """One pass of skip-gram negative sampling over the corpus; returns (loss sum, pairs)."""
    state = np.empty(1, np.uint64)
    state[0] = stream_seed(seed, 0x5A5A, epoch)
    d = Y.shape[1]
    m = len(noise_prob)
    neu = np.empty(d)
    loss = 0.0
    count = 0
    for w in range(walks.shape[0]):
        L = lengths[w]
        for i in range(L):
            c = walks[w, i]
            lo = max(0, i - window)
            hi = min(L, i + window + 1)
            for jpos in range(lo, hi):
                if jpos == i:
                    continue
                x = walks[w, jpos]
                frac = (done + count) / total
                lr = lr0 - (lr0 - lr_min) * frac
                for a in range(d):
                    neu[a] = 0.0
                f = 0.0
                for a in range(d):
                    f += Y[c, a] * C[x, a]
                g = (1.0 - _sigmoid(f)) * lr
                loss -= _log_sigmoid(f)
                for a in range(d):
                    neu[a] += g * C[x, a]
                    C[x, a] += g * Y[c, a]
                for _ in range(neg):
                    z = alias_draw(state, noise_prob, noise_alias, 0, m)
                    if z == x:
                        continue
                    f = 0.0
                    for a in range(d):
                        f += Y[c, a] * C[z, a]
                    g = -_sigmoid(f) * lr
                    loss -= _log_sigmoid(-f)
                    for a in range(d):
                        neu[a] += g * C[z, a]
                        C[z, a] += g * Y[c, a]
                for a in range(d):
                    Y[c, a] += neu[a]
                count += 1
    return loss, count


@njit(cache=True)
def gf_epoch(pairs, weights, order, Y, lr, lam):
    d = Y.shape[1]
    for e in order:
        i = pairs[e, 0]
        j = pairs[e, 1]
        dot = 0.0
        for a in range(d):
            dot += Y[i, a] * Y[j, a]
        err = weights[e] - dot
        for a in range(d):
            yi = Y[i, a]
            yj = Y[j, a]
            Y[i, a] = yi + lr * (err * yj - lam * yi)
            Y[j, a] = yj + lr * (err * yi - lam * yj)


@njit(cache=True)
def line1_epoch(arcs, weights, order, indptr, indices, Y, lr, neg, seed, epoch):
    state = np.empty(1, np.uint64)
    state[0] = stream_seed(seed, 0x11E1, epoch)
    n, d = Y.shape
    for e in order:
        i = arcs[e, 0]
        j = arcs[e, 1]
        dot = 0.0
        for a in range(d):
            dot += Y[i, a] * Y[j, a]
        g = weights[e] * (1.0 - _sigmoid(dot))
        for a in range(d):
            yi = Y[i, a]
            yj = Y[j, a]
            Y[i, a] = yi + lr * g * yj
            Y[j, a] = yj + lr * g * yi
        lo, hi = indptr[i], indptr[i + 1]
        if n - 1 - (hi - lo) <= 0:
            continue
        for _ in range(neg):
            z = -1
            for _try in range(1000):
                cand = randint(state, n)
                if cand != i and not _contains(indices, lo, hi, cand):
                    z = cand
                    break
            if z < 0:
                continue
            dot = 0.0
            for a in range(d):
                dot += Y[i, a] * Y[z, a]
            g = -_sigmoid(dot)
            for a in range(d):
                yi = Y[i, a]
                yz = Y[z, a]
                Y[i, a] = yi + lr * g * yz
                Y[z, a] = yz + lr * g * yi
