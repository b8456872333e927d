"""NumPy implementations of the hot kernels.

These mirror ``_ckernels.pyx`` exactly and are used when the compiled
extension is unavailable (or ``SCHAUDERLAB_PURE_PYTHON=1`` is set).
Pairwise loops are processed in row blocks to bound memory.
"""
import numpy as np

_BLOCK = 512


def _pair_blocks(values, xs, ts, c):
    m = values.shape[0]
    for i0 in range(0, m - 1, _BLOCK):
        i1 = min(m, i0 + _BLOCK)
        # pairs (i, j) with i in [i0, i1) and j > i
        vi, xi, ti = values[i0:i1], xs[i0:i1], ts[i0:i1]
        vj, xj, tj = values[i0 + 1:], xs[i0 + 1:], ts[i0 + 1:]
        diff = np.sqrt(((vi[:, None, :] - vj[None, :, :]) ** 2).sum(-1))
        dist = np.sqrt(((xi[:, None, :] - xj[None, :, :]) ** 2).sum(-1))
        dist = dist + np.sqrt(c * np.abs(ti[:, None] - tj[None, :]))
        rows = np.arange(i0, i1)[:, None]
        cols = np.arange(i0 + 1, m)[None, :]
        upper = cols > rows
        yield diff, dist, upper


def pair_quotient_max(values, xs, ts, c, alpha, min_gap):
    """Largest ``|v_i - v_j| / dist_ij**alpha`` over pairs with ``dist_ij >= min_gap``.

    ``dist_ij = |x_i - x_j| + sqrt(c |t_i - t_j|)``.  Returns the maximum
    and the number of admissible pairs.
    """
    values = np.ascontiguousarray(values, dtype=np.float64)
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    ts = np.ascontiguousarray(ts, dtype=np.float64)
    best = 0.0
    count = 0
    for diff, dist, upper in _pair_blocks(values, xs, ts, c):
        ok = upper & (dist >= min_gap) & (dist > 0.0)
        n = int(ok.sum())
        if n:
            count += n
            ratio = diff[ok] / dist[ok] ** alpha
            best = max(best, float(ratio.max()))
    return best, count


def pair_envelope(values, xs, ts, c, d_min, d_max, nbins):
    """Binned modulus of continuity over all node pairs.

    Pairs are grouped into ``nbins`` logarithmic distance bins spanning
    ``[d_min, d_max]``; for each bin the largest difference, the distance of
    the pair attaining it, and the pair count are returned.
    """
    values = np.ascontiguousarray(values, dtype=np.float64)
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    ts = np.ascontiguousarray(ts, dtype=np.float64)
    bmax = np.zeros(nbins)
    bdist = np.zeros(nbins)
    bcount = np.zeros(nbins, dtype=np.int64)
    lo = np.log(d_min)
    step = (np.log(d_max) - lo) / nbins
    for diff, dist, upper in _pair_blocks(values, xs, ts, c):
        ok = upper & (dist >= d_min) & (dist <= d_max)
        if not ok.any():
            continue
        dd, ff = dist[ok], diff[ok]
        b = np.minimum(((np.log(dd) - lo) / step).astype(np.int64), nbins - 1)
        bcount += np.bincount(b, minlength=nbins)
        # first pair (in i, j order) attaining each bin maximum, as in the C loop
        order = np.lexsort((-ff, b))
        first = np.r_[True, b[order][1:] != b[order][:-1]]
        sel = order[first]
        for bb, f, dv in zip(b[sel], ff[sel], dd[sel]):
            if f > bmax[bb]:
                bmax[bb] = f
                bdist[bb] = dv
    return bmax, bdist, bcount


def element_flux(grads, coef, mu, p):
    """Flux ``coef * (mu^2 + |xi|^2)^((p-2)/2) xi`` per element.

    ``grads`` has shape ``(E, k, d)``.  Returns ``(flux, phi, dphi)`` where
    ``phi = s^((p-2)/2)`` and ``dphi = (p-2) s^((p-4)/2)`` with
    ``s = mu^2 + |xi|^2``; both are set to 0 where ``s == 0``.
    """
    grads = np.ascontiguousarray(grads, dtype=np.float64)
    s = mu * mu + (grads ** 2).sum(axis=(1, 2))
    pos = s > 0
    phi = np.zeros_like(s)
    dphi = np.zeros_like(s)
    phi[pos] = s[pos] ** (0.5 * (p - 2.0))
    dphi[pos] = (p - 2.0) * s[pos] ** (0.5 * (p - 4.0))
    flux = (np.asarray(coef) * phi)[:, None, None] * grads
    return flux, phi, dphi
