"""Compiled inner loop of the diluted R-rho-R iteration.

Works on the reduced problem where the outcomes ``ops`` sum to the identity
and only fired outcomes (``n > 0``) are passed in. Each iteration takes the
multiplicative step ``sigma -> K sigma K / tr`` with the Hermitian factor

    K = I + beta * A_prev + eps * (R - I),

i.e. the diluted update ``I + eps (R - I)`` plus a momentum term that reuses
the previous generator ``A_prev = K_prev - I``. ``eps`` is line-searched
(doubled while the gain grows, halved until the likelihood does not drop) and
the momentum is dropped whenever it fails to give an ascent step. Because the
update is multiplicative, small eigenvalues shrink and recover geometrically
instead of being clipped at zero. When no multiplicative step ascends, a
step towards the top eigenvector of ``R`` is tried before giving up. Every
accepted step is an ascent step.
"""
import numba
import numpy as np

Q_FLOOR = 1e-300
MAX_EPS = 2.0**20
# smallest eigenvalue allowed for K; bounds how fast any direction can shrink
K_FLOOR = 0.5


@numba.njit(cache=True)
def _probs(ops, sigma, out):
    m, d = ops.shape[0], ops.shape[1]
    for l in range(m):
        acc = 0.0
        for i in range(d):
            for j in range(d):
                # tr(sigma P) for Hermitian P
                acc += (sigma[i, j] * np.conj(ops[l, i, j])).real
        out[l] = acc


@numba.njit(cache=True)
def _loglik(n, q):
    acc = 0.0
    for l in range(n.shape[0]):
        if q[l] <= 0.0:
            return -np.inf
        acc += n[l] * np.log(q[l])
    return acc


@numba.njit(cache=True)
def _gain(n, q, dq):
    # sum n log(q_new / q) without cancelling two large log-likelihoods
    acc = 0.0
    for l in range(n.shape[0]):
        ratio = dq[l] / q[l]
        if ratio <= -1.0:
            return -np.inf
        acc += n[l] * np.log1p(ratio)
    return acc


@numba.njit(cache=True)
def _r_op(ops, n, total, q, r):
    d = ops.shape[1]
    r[:, :] = 0.0
    for l in range(ops.shape[0]):
        c = n[l] / (total * max(q[l], Q_FLOOR))
        for i in range(d):
            for j in range(d):
                r[i, j] += c * ops[l, i, j]


@numba.njit(cache=True)
def _residual(r, sigma):
    """Optimality gap ``max(||R sigma - sigma||_1, lambda_max(R) - 1)``.

    ``R sigma = sigma`` alone also holds at rank-deficient points that are not
    maximizers; the maximizer additionally needs ``R <= I``.
    """
    diff = r @ sigma - sigma
    fixed = np.sum(np.linalg.svd(diff)[1])
    return max(fixed, np.linalg.eigvalsh(r)[-1] - 1.0)


@numba.njit(cache=True)
def _increment(sigma, a):
    """``K sigma K / tr(...) - sigma`` for ``K = I + a``, expanded in ``a``.

    Expanding avoids subtracting two nearly equal matrices, which matters once
    steps are ~1e-8 in size.
    """
    lin = a @ sigma
    lin = lin + lin.conj().T
    e = lin + a @ sigma @ a
    tau = np.trace(e).real
    delta = (e - tau * sigma) / (1.0 + tau)
    return 0.5 * (delta + delta.conj().T)


@numba.njit(cache=True)
def _k_ok(a):
    return 1.0 + np.linalg.eigvalsh(a)[0] >= K_FLOOR


@numba.njit(cache=True)
def _line_search(ops, n, sigma, q, base, b, max_halvings, dq):
    """Best step along ``a = base + eps * b``. Returns (increment, gain, a, ok)."""
    eps = 1.0
    for _ in range(max_halvings):
        if _k_ok(base + eps * b):
            break
        eps *= 0.5
    a = base + eps * b
    if not _k_ok(a):
        return sigma, 0.0, a, False
    delta = _increment(sigma, a)
    _probs(ops, delta, dq)
    gain = _gain(n, q, dq)
    if gain >= 0.0:
        while 2 * eps <= MAX_EPS:
            a2 = base + (2 * eps) * b
            if not _k_ok(a2):
                break
            d2 = _increment(sigma, a2)
            _probs(ops, d2, dq)
            g2 = _gain(n, q, dq)
            if not g2 > gain:
                break
            delta, gain, a, eps = d2, g2, a2, 2 * eps
        return delta, gain, a, True
    for _ in range(max_halvings):
        eps *= 0.5
        a = base + eps * b
        delta = _increment(sigma, a)
        _probs(ops, delta, dq)
        gain = _gain(n, q, dq)
        if gain >= 0.0:
            return delta, gain, a, True
    return delta, 0.0, a, False


@numba.njit(cache=True)
def _boundary_step(ops, n, sigma, q, r, max_halvings, dq):
    """Ascent step ``sigma -> (1 - alpha) sigma + alpha |v><v|`` along the top
    eigenvector of ``R``.

    Its first-order gain ``N alpha (lambda_max(R) - 1)`` does not depend on the
    eigenvalues of ``sigma``, so it can regrow directions that the
    multiplicative update has shrunk below floating-point resolution.
    Returns (increment, gain, ok) with the best ``alpha`` among powers of two.
    """
    w, v = np.linalg.eigh(r)
    if w[-1] <= 1.0:
        return sigma, 0.0, False
    top = np.ascontiguousarray(v[:, -1:])
    direction = top @ top.conj().T - sigma
    best_gain = 0.0
    best = sigma
    alpha = 1.0
    for _ in range(max_halvings):
        delta = alpha * direction
        _probs(ops, delta, dq)
        gain = _gain(n, q, dq)
        if gain > best_gain:
            best_gain, best = gain, delta
        elif best_gain > 0.0:
            # the gain is concave in alpha; past the peak
            break
        alpha *= 0.5
    if best_gain > 0.0:
        return 0.5 * (best + best.conj().T), best_gain, True
    return sigma, 0.0, False


@numba.njit(cache=True)
def _fixed_point(ops, n, tol, max_iters, max_halvings, hist, record):
    d = ops.shape[1]
    m = ops.shape[0]
    total = n.sum()
    eye = np.eye(d).astype(np.complex128)
    sigma = eye / d
    gen = np.zeros((d, d), dtype=np.complex128)
    q = np.empty(m)
    dq = np.empty(m)
    r = np.zeros((d, d), dtype=np.complex128)
    _probs(ops, sigma, q)
    ll = _loglik(n, q)
    n_hist = 0
    if record:
        hist[0] = ll
        n_hist = 1
    converged = False
    k = 0
    it = 0
    while True:
        _r_op(ops, n, total, q, r)
        residual = _residual(r, sigma)
        if residual < tol:
            converged = True
            break
        if it >= max_iters:
            break
        it += 1
        b = r - eye
        accepted = False
        if k > 0:
            beta = k / (k + 3.0)
            delta, gain, a, accepted = _line_search(ops, n, sigma, q, beta * gen, b, max_halvings, dq)
        if not accepted:
            k = 0
            delta, gain, a, accepted = _line_search(ops, n, sigma, q, 0.0 * gen, b, max_halvings, dq)
        if accepted:
            gen = a
            k += 1
        else:
            delta, gain, accepted = _boundary_step(ops, n, sigma, q, r, max_halvings, dq)
            if not accepted:
                # no ascending step left at floating-point resolution
                break
            gen = 0.0 * gen
            k = 0
        sigma = sigma + delta
        _probs(ops, sigma, q)
        ll += gain
        if record:
            hist[n_hist] = ll
            n_hist += 1
    return sigma, it, residual, converged, n_hist
