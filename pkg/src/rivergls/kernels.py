"""Hot CAR(1) kernels: whitening and the inverse innovations scan.

Both kernels exploit the Markov property of the continuous AR(1) process,
so a full fit never materializes an n-by-n matrix.  With lag correlations
r_k = phi**(t_k - t_{k-1}) inside each group:

* whitening maps z to e_1 = z_1, e_k = (z_k - r_k z_{k-1}) / sqrt(1 - r_k^2),
  and accumulates logdet = sum log(1 - r_k^2), the log-determinant of the
  group's correlation matrix;
* the innovations scan is the exact inverse: eps_1 = eta_1,
  eps_k = r_k eps_{k-1} + sqrt(1 - r_k^2) eta_k.

Groups are passed as a ``starts`` offset array (len = n_groups + 1) over
rows already sorted group-contiguously with strictly increasing times
inside each group; callers enforce that ordering.

The default implementations are numba ``@njit`` compiled.  Setting the
environment variable ``RIVERGLS_NO_NUMBA=1`` (before import), or running
where numba is not importable, selects the pure-numpy fallbacks instead.
``benchmarks/bench_kernels.py`` compares the two paths.
"""

import os

import numpy as np

NUMBA_ENABLED = os.environ.get("RIVERGLS_NO_NUMBA", "").strip().lower() not in (
    "1",
    "true",
    "yes",
)

if NUMBA_ENABLED:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is a declared dependency
        NUMBA_ENABLED = False


def whiten_groups_numpy(values, times, starts, phi):
    """Vectorized whitening of each column of ``values`` (n, m).

    Returns ``(whitened, logdet)``.  The lag-1 recursion is expressible with
    shifted slices, so no explicit scan is needed on this path.
    """
    n = values.shape[0]
    r = np.zeros(n)
    if n > 1:
        dt = times[1:] - times[:-1]
        # Group-head rows get r = 0; clamp their (possibly negative) dt first
        # so phi**dt cannot overflow before being overwritten.
        r[1:] = phi ** np.where(dt > 0.0, dt, 1.0)
    heads = starts[:-1]
    r[heads] = 0.0
    q = -(r * r)  # log(1 - r^2) = log1p(q)
    s = np.sqrt(1.0 + q)
    out = np.empty_like(values)
    if n > 1:
        out[1:] = (values[1:] - r[1:, None] * values[:-1]) / s[1:, None]
    out[heads] = values[heads]
    mask = np.ones(n, dtype=bool)
    mask[heads] = False
    logdet = float(np.sum(np.log1p(q[mask])))
    return out, logdet


def innovations_groups_numpy(times, starts, phi, noise):
    """Inverse scan: turn iid unit noise into a unit-variance CAR(1) path."""
    eps = np.empty_like(noise)
    for g in range(starts.shape[0] - 1):
        a, b = starts[g], starts[g + 1]
        eps[a] = noise[a]
        prev = noise[a]
        for k in range(a + 1, b):
            r = phi ** (times[k] - times[k - 1])
            prev = r * prev + np.sqrt(1.0 - r * r) * noise[k]
            eps[k] = prev
    return eps


if NUMBA_ENABLED:

    @njit(cache=True)
    def _whiten_groups_numba(values, times, starts, phi):
        n, m = values.shape
        out = np.empty_like(values)
        logdet = 0.0
        for g in range(starts.shape[0] - 1):
            a, b = starts[g], starts[g + 1]
            for j in range(m):
                out[a, j] = values[a, j]
            for k in range(a + 1, b):
                r = phi ** (times[k] - times[k - 1])
                q = -(r * r)
                s = np.sqrt(1.0 + q)
                logdet += np.log1p(q)
                for j in range(m):
                    out[k, j] = (values[k, j] - r * values[k - 1, j]) / s
        return out, logdet

    @njit(cache=True)
    def _innovations_groups_numba(times, starts, phi, noise):
        eps = np.empty_like(noise)
        for g in range(starts.shape[0] - 1):
            a, b = starts[g], starts[g + 1]
            eps[a] = noise[a]
            for k in range(a + 1, b):
                r = phi ** (times[k] - times[k - 1])
                eps[k] = r * eps[k - 1] + np.sqrt(1.0 - r * r) * noise[k]
        return eps

    def whiten_groups(values, times, starts, phi):
        return _whiten_groups_numba(values, times, starts, phi)

    whiten_groups.__doc__ = whiten_groups_numpy.__doc__

    def innovations_groups(times, starts, phi, noise):
        return _innovations_groups_numba(times, starts, phi, noise)

    innovations_groups.__doc__ = innovations_groups_numpy.__doc__

else:
    whiten_groups = whiten_groups_numpy
    innovations_groups = innovations_groups_numpy
