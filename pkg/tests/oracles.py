"""Slow, direct reference computations used to check the fast paths.

None of these share code with the package: they work on explicit loops or
materialised dense matrices.
"""

import math

import numpy as np


def naive_convolve_sum(filters, x):
    """Spatial circular convolution sum by explicit loops."""
    K, p, _ = filters.shape
    _, M, N = x.shape
    out = np.zeros((M, N))
    for k in range(K):
        for i in range(M):
            for j in range(N):
                acc = 0.0
                for a in range(p):
                    for b in range(p):
                        acc += filters[k, a, b] * x[k, (i - a) % M, (j - b) % N]
                out[i, j] += acc
    return out


def circular_diff_matrix(n):
    """Forward difference with wrap-around, (D v)[i] = v[i+1] - v[i]."""
    D = -np.eye(n)
    for i in range(n):
        D[i, (i + 1) % n] += 1.0
    return D


def dense_lowpass(image, strength):
    """Solve (I + strength (Dx^T Dx + Dy^T Dy)) low = image with dense matrices."""
    M, N = image.shape
    Dr = np.kron(circular_diff_matrix(M), np.eye(N))   # vertical, row-major vec
    Dc = np.kron(np.eye(M), circular_diff_matrix(N))   # horizontal
    A = np.eye(M * N) + strength * (Dr.T @ Dr + Dc.T @ Dc)
    low = np.linalg.solve(A, image.ravel()).reshape(M, N)
    return low, image - low


def dct2_atom(u, v, p):
    """Orthonormal 2-D DCT-II basis function from the closed-form cosine."""
    def c(k):
        scale = math.sqrt(1.0 / p) if k == 0 else math.sqrt(2.0 / p)
        return np.array([scale * math.cos(math.pi * (2 * n + 1) * k / (2 * p))
                         for n in range(p)])
    return np.outer(c(u), c(v))


def dense_kron_system(Lc, Lr, alpha, beta, eta):
    """Materialised alpha L_c (x) I_M + beta I_N (x) L_r + eta I (column-stacked vec)."""
    M, N = Lr.shape[0], Lc.shape[0]
    return (alpha * np.kron(Lc, np.eye(M)) + beta * np.kron(np.eye(N), Lr)
            + eta * np.eye(M * N))


def vec(Z):
    return Z.reshape(-1, order="F")


def unvec(z, shape):
    return z.reshape(shape, order="F")


def dense_bin_solve(filters, s, y, u, rho):
    """x-update by an explicit K x K solve at every full-spectrum DFT bin."""
    K = filters.shape[0]
    M, N = s.shape
    Df = np.fft.fft2(filters, s=(M, N))
    Sf = np.fft.fft2(s)
    Rf = np.fft.fft2(y - u)
    Xf = np.zeros((K, M, N), dtype=complex)
    for i in range(M):
        for j in range(N):
            a = Df[:, i, j][np.newaxis, :]
            A = a.conj().T @ a + rho * np.eye(K)
            rhs = a.conj().ravel() * Sf[i, j] + rho * Rf[:, i, j]
            Xf[:, i, j] = np.linalg.solve(A, rhs)
    return np.real(np.fft.ifft2(Xf))


def random_laplacian(n, rng, density=0.6):
    """Laplacian of a random symmetric nonnegative weight matrix."""
    W = rng.uniform(0, 1, (n, n)) * (rng.uniform(0, 1, (n, n)) < density)
    W = np.triu(W, 1)
    W = W + W.T
    return np.diag(W.sum(1)) - W, W


def golden_section(f, lo, hi, tol=1e-12, max_iter=500):
    """Minimise a unimodal scalar function on [lo, hi]."""
    g = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a < tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def pairwise_glr(x, W, side):
    """1/2 sum_ij W_ij |x_i - x_j|^2 over columns (side='column') or rows."""
    V = x.T if side == "column" else x
    n = V.shape[0]
    total = 0.0
    for i in range(n):
        for j in range(n):
            d = V[i] - V[j]
            total += W[i, j] * float(d @ d)
    return 0.5 * total


def cosine(a, b, eps=1e-8):
    return float(a @ b) / (max(np.linalg.norm(a), eps) * max(np.linalg.norm(b), eps))


def brute_knn_weights(tiles, knn, delta, eps=1e-8):
    """kNN tile graph by ranking all pairs with explicit loops, max-symmetrised."""
    T = len(tiles)
    W = np.zeros((T, T))
    for i in range(T):
        sims = [(cosine(tiles[i], tiles[j], eps), j) for j in range(T) if j != i]
        # highest similarity first, lower index wins ties
        sims.sort(key=lambda t: (-t[0], t[1]))
        for sim, j in sims[:knn]:
            W[i, j] = math.exp(-((1 - sim) ** 2) / delta**2)
    return np.maximum(W, W.T)
