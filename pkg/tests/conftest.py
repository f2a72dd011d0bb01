"""Shared oracles and the acceptance summary hook.

The oracles here are deliberately written differently from the package code:
explicit orthogonal complements by Gram-Schmidt instead of ``I - V V^T``,
LAPACK's general (non-symmetric) eigensolver instead of ``eigh``, and plain
Python loops instead of vectorized sums.
"""
import numpy as np
import pytest
import scipy.linalg

ACCEPTANCE_RESULTS = []


def gram_schmidt_complement(v, tol=1e-10):
    """Columns completing ``v`` to an orthonormal basis of R^n (modified Gram-Schmidt)."""
    v = np.asarray(v, dtype=float)
    n = v.shape[0]
    cols = [v[:, i] for i in range(v.shape[1])]
    extra = []
    for k in range(n):
        x = np.zeros(n)
        x[k] = 1.0
        for _ in range(2):  # second pass for numerical orthogonality
            for c in cols + extra:
                x = x - (c @ x) * c
        norm = np.linalg.norm(x)
        if norm > tol:
            extra.append(x / norm)
        if len(cols) + len(extra) == n:
            break
    if not extra:
        return np.zeros((n, 0))
    return np.column_stack(extra)


def oracle_eigvals(m):
    """Descending eigenvalues from the general eigensolver (``geev``), real parts."""
    vals = scipy.linalg.eigvals(np.asarray(m, dtype=float))
    return np.sort(vals.real)[::-1]


def oracle_spectral_norm(x):
    """Largest singular value via ``sqrt(lambda_max(X^T X))`` with the general eigensolver."""
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return 0.0
    lam = oracle_eigvals(x.T @ x)[0]
    return float(np.sqrt(max(lam, 0.0)))


def random_basis(rng, n, r):
    if r == 0:
        return np.zeros((n, 0))
    q, _ = np.linalg.qr(rng.standard_normal((n, r)))
    return q


def random_symmetric(rng, n, low=-1.0, high=1.0):
    a = rng.uniform(low, high, size=(n, n))
    return np.triu(a) + np.triu(a, 1).T


def naive_window(layers, last, L):
    """Python-loop sum of ``A^2 - D`` over ``[last-L+1, last]``."""
    n = layers.shape[1]
    out = np.zeros((n, n))
    for t in range(last - L, last):
        a = layers[t].astype(float)
        for i in range(n):
            for j in range(n):
                out[i, j] += sum(a[i, k] * a[k, j] for k in range(n))
            out[i, i] -= a[i].sum()
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, ok, text in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {text}")
