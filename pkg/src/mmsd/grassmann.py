"""Geometry and spectral primitives for subspaces of R^N.

Bases are plain ``(N, p)`` float arrays with orthonormal columns.  The
functions here validate shapes at the boundary and otherwise stay out of the
way.
"""

from __future__ import annotations

import numpy as np

# relative singular/eigen value threshold used for every rank decision
RANK_TOL = 1e-10
ORTHO_TOL = 1e-10


class RankError(np.linalg.LinAlgError):
    """Matrix is numerically rank deficient."""

    def __init__(self, msg, rank=None):
        super().__init__(msg)
        self.rank = rank


def _as_basis(u, name="u"):
    u = np.asarray(u, dtype=float)
    if u.ndim != 2:
        raise ValueError(f"{name} must be a 2-D array, got shape {u.shape}")
    if u.shape[1] > u.shape[0]:
        raise ValueError(f"{name} has more columns than rows: {u.shape}")
    return u


def _check_pair(u1, u2):
    u1 = _as_basis(u1, "u1")
    u2 = _as_basis(u2, "u2")
    if u1.shape != u2.shape:
        raise ValueError(f"shape mismatch: {u1.shape} and {u2.shape}")
    return u1, u2


def is_orthonormal(u, tol=ORTHO_TOL):
    u = np.asarray(u, dtype=float)
    g = u.T @ u
    return bool(np.max(np.abs(g - np.eye(u.shape[1])), initial=0.0) <= tol)


def check_orthonormal(u, tol=ORTHO_TOL, name="basis"):
    u = _as_basis(u, name)
    if not is_orthonormal(u, tol):
        err = np.max(np.abs(u.T @ u - np.eye(u.shape[1])))
        raise ValueError(f"{name} is not orthonormal (max |U'U - I| = {err:.3g})")
    return u


def fix_signs(v):
    """Flip columns so the largest-magnitude entry of each is positive.

    Ties in magnitude resolve to the first such entry.
    """
    v = np.array(v, dtype=float, copy=True)
    if v.size == 0:
        return v
    idx = np.argmax(np.abs(v), axis=0)
    s = np.sign(v[idx, np.arange(v.shape[1])])
    s[s == 0] = 1.0
    return v * s


def orthonormalize(m):
    """Orthonormal basis for range(m); m must have full column rank.

    Returns the left singular vectors of ``m`` under the sign convention of
    :func:`fix_signs`.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-D array, got shape {m.shape}")
    n, p = m.shape
    if p > n:
        raise RankError(f"{p} columns cannot be independent in R^{n}", rank=n)
    if p == 0:
        return np.zeros((n, 0))
    u, s, _ = np.linalg.svd(m, full_matrices=False)
    rank = int(np.sum(s > RANK_TOL * s[0])) if s[0] > 0 else 0
    if rank < p:
        raise RankError(f"matrix has numerical rank {rank} < {p}", rank=rank)
    return fix_signs(u)


def principal_angles(u1, u2):
    """Principal angles in [0, pi/2], ascending."""
    u1, u2 = _check_pair(u1, u2)
    s = np.linalg.svd(u2.T @ u1, compute_uv=False)
    s = np.clip(s, 0.0, 1.0)
    return np.sort(np.arccos(s))


def squared_distance(u1, u2):
    """Projection distance ``||P1 - P2||_F^2 = 2(p - tr(U1'U2 U2'U1))``."""
    u1, u2 = _check_pair(u1, u2)
    p = u1.shape[1]
    c = u1.T @ u2
    d2 = 2.0 * (p - np.sum(c * c))
    return float(min(max(d2, 0.0), 2.0 * p))


def geodesic_distance(u1, u2):
    return float(np.sqrt(np.sum(principal_angles(u1, u2) ** 2)))


def afe(u, ubar):
    """Fraction of the energy of ``u`` lying in range(ubar), in [0, 1]."""
    u, ubar = _check_pair(u, ubar)
    c = u.T @ ubar
    return float(min(max(np.sum(c * c) / u.shape[1], 0.0), 1.0))


def projector(u):
    u = np.asarray(u, dtype=float)
    return u @ u.T


def spectral_decomposition(s):
    """Eigen-decomposition with descending values and the sign convention.

    Equal eigenvalues keep the ascending order LAPACK hands back for them
    (a stable sort on the negated values).
    """
    s = np.asarray(s, dtype=float)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {s.shape}")
    s = 0.5 * (s + s.T)
    w, v = np.linalg.eigh(s)
    order = np.argsort(-w, kind="stable")
    return fix_signs(v[:, order]), w[order]


def top_p_eigvecs(s, p):
    """The ``p`` principal eigenvectors of the symmetric matrix ``s``.

    Eigenvalues that tie to within the rank tolerance are ordered by the
    index of each eigenvector's dominant coordinate, so a matrix like
    ``diag(1, 1, 0)`` deterministically returns ``[e1, e2]``.
    """
    s = np.asarray(s, dtype=float)
    n = s.shape[0]
    if not 1 <= p <= n:
        raise ValueError(f"p must lie in [1, {n}], got {p}")
    vecs, vals = spectral_decomposition(s)
    scale = max(np.max(np.abs(vals)), np.finfo(float).tiny)
    tied = np.abs(np.diff(vals)) <= RANK_TOL * scale
    if np.any(tied):
        lead = np.argmax(np.abs(vecs), axis=0)
        # group runs of tied eigenvalues, order each run by dominant index
        groups = np.concatenate([[0], np.cumsum(~tied)])
        order = np.lexsort((lead, groups))
        vecs = vecs[:, order]
    return vecs[:, :p].copy()


def null_space_basis(x, n=None):
    """Orthonormal basis of range(x)^perp.

    ``x`` has orthonormal columns; pass ``n`` when ``x`` has no columns so the
    ambient dimension is known.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1 or x.size == 0:
        if n is None:
            n = x.shape[0] if x.ndim == 2 else x.size
        if x.size == 0:
            return np.eye(n)
        x = x.reshape(-1, 1)
    check_orthonormal(x, tol=1e-8, name="x")
    n, k = x.shape
    q, _ = np.linalg.qr(x, mode="complete")
    return q[:, k:]


def complete_basis(v, p):
    """Extend orthonormal columns ``v`` to ``p`` columns.

    New directions come from Gram-Schmidt over e_1, e_2, ... in index order,
    so the completion is deterministic.
    """
    v = np.asarray(v, dtype=float)
    n = v.shape[0]
    cols = [v[:, j] for j in range(v.shape[1])]
    for i in range(n):
        if len(cols) >= p:
            break
        e = np.zeros(n)
        e[i] = 1.0
        for _ in range(2):
            for c in cols:
                e -= (c @ e) * c
        nrm = np.linalg.norm(e)
        if nrm > 1e-8:
            cols.append(e / nrm)
    return np.column_stack(cols) if cols else np.zeros((n, 0))


def uniform_stiefel(n, p, rng):
    """Haar-distributed ``n x p`` orthonormal matrix."""
    if not 1 <= p <= n:
        raise ValueError(f"need 1 <= p <= n, got n={n}, p={p}")
    g = rng.standard_normal((n, p))
    q, r = np.linalg.qr(g)
    d = np.sign(np.diag(r))
    d[d == 0] = 1.0
    return q * d


def reorthonormalize(x):
    """Nearest orthonormal matrix (polar factor); removes accumulated drift."""
    u, _, vt = np.linalg.svd(x, full_matrices=False)
    return u @ vt
