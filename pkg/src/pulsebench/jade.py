"""JADE blind source separation for real-valued signals.

Joint Approximate Diagonalization of Eigenmatrices (Cardoso & Souloumiac,
"Blind beamforming for non-Gaussian signals", IEE Proceedings-F, 1993):
whiten the observations, estimate the parallel slices of the fourth-order
cumulant tensor, and jointly diagonalize them with Givens rotations.  The
algorithm is fully deterministic, which keeps separation results exactly
reproducible across runs.
"""

import numpy as np

from .errors import ConvergenceFailure, RankDeficient

MAX_SWEEPS = 100
ANGLE_TOL = 1e-8
RANK_EPS = 1e-12


def jade_separate(X: np.ndarray, max_sweeps: int = MAX_SWEEPS,
                  angle_tol: float = ANGLE_TOL):
    """Separate the rows of X into statistically independent sources.

    Parameters
    ----------
    X : ndarray, shape (n, T)
        Observation matrix, one sensor per row; rows are expected zero-mean
        (any residual mean is removed).  Requires T >= 10.
    max_sweeps : int
        Cap on full Jacobi sweeps over all row pairs.
    angle_tol : float
        A sweep with every rotation angle below this threshold terminates
        the diagonalization.

    Returns
    -------
    (sources, demixing) : (ndarray (n, T), ndarray (n, n))
        sources = demixing @ X, rows in decreasing order of mixing energy,
        signs fixed so each demixing row has a nonnegative first entry.
        demixing @ cov(X) @ demixing.T is the identity (unit variance,
        uncorrelated sources).

    Raises
    ------
    RankDeficient
        If a covariance eigenvalue is below 1e-12 times the largest.
    ConvergenceFailure
        If rotations are still above angle_tol after max_sweeps sweeps.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {X.shape}")
    n, T = X.shape
    if T < 10:
        raise ValueError(f"need at least 10 samples, got {T}")
    X = X - X.mean(axis=1, keepdims=True)

    # Whitening via eigendecomposition of the sample covariance.
    cov = (X @ X.T) / T
    evals, evecs = np.linalg.eigh(cov)
    if evals[-1] <= 0.0 or evals[0] < RANK_EPS * evals[-1]:
        raise RankDeficient(
            f"covariance eigenvalues {evals} are rank deficient")
    order = np.argsort(evals)[::-1]
    scales = np.sqrt(evals[order])
    whitener = (evecs[:, order] / scales).T
    Z = whitener @ X

    # Parallel slices of the fourth-order cumulant tensor of the whitened
    # data: n*(n+1)/2 symmetric n x n matrices stored side by side.
    m = n
    nbcm = m * (m + 1) // 2
    CM = np.zeros((m, m * nbcm))
    R = np.eye(m)
    col = 0
    for im in range(m):
        zim = Z[im]
        CM[:, col:col + m] = (((zim * zim) * Z) @ Z.T / T
                              - R - 2.0 * np.outer(R[:, im], R[:, im]))
        col += m
        for jm in range(im):
            zjm = Z[jm]
            CM[:, col:col + m] = np.sqrt(2.0) * (
                ((zim * zjm) * Z) @ Z.T / T
                - np.outer(R[:, im], R[:, jm])
                - np.outer(R[:, jm], R[:, im]))
            col += m

    # Joint diagonalization by Jacobi (Givens) rotations.
    V = np.eye(m)
    converged = False
    for _ in range(max_sweeps):
        rotated = False
        for p in range(m - 1):
            for q in range(p + 1, m):
                Ip = np.arange(p, m * nbcm, m)
                Iq = np.arange(q, m * nbcm, m)
                g1 = CM[p, Ip] - CM[q, Iq]
                g2 = CM[p, Iq] + CM[q, Ip]
                ton = g1 @ g1 - g2 @ g2
                toff = 2.0 * (g1 @ g2)
                theta = 0.5 * np.arctan2(toff, ton + np.hypot(ton, toff))
                if abs(theta) > angle_tol:
                    rotated = True
                    c, s = np.cos(theta), np.sin(theta)
                    G = np.array([[c, -s], [s, c]])
                    pair = [p, q]
                    V[:, pair] = V[:, pair] @ G
                    CM[pair, :] = G.T @ CM[pair, :]
                    CM[:, Ip], CM[:, Iq] = (c * CM[:, Ip] + s * CM[:, Iq],
                                            -s * CM[:, Ip] + c * CM[:, Iq])
        if not rotated:
            converged = True
            break
    if not converged:
        raise ConvergenceFailure(
            f"joint diagonalization still rotating after {max_sweeps} sweeps")

    demixing = V.T @ whitener

    # Fix the permutation/sign indeterminacy deterministically: order rows by
    # decreasing mixing-column energy, then make each row's first entry >= 0.
    mixing = np.linalg.pinv(demixing)
    keys = np.argsort((mixing * mixing).sum(axis=0))[::-1]
    demixing = demixing[keys]
    signs = np.where(demixing[:, 0] >= 0.0, 1.0, -1.0)
    demixing = signs[:, None] * demixing
    return demixing @ X, demixing
