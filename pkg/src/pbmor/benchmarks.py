"""Benchmark systems: a Carleman-bilinearized RC ladder and a 2-D
advection-diffusion problem with affine parameter dependence."""

from __future__ import annotations

import numpy as np

from pbmor.system import (AffineMatrix, BilinearSystem, CoefficientFunction, linear_coefficient,
                          square_coefficient)

# RC circuit ----------------------------------------------------------------


def rc_stencil(N):
    """Tridiagonal ``[1, -2, 1]`` with last diagonal entry ``-1``."""
    T = np.diag(-2.0 * np.ones(N)) + np.diag(np.ones(N - 1), 1) + np.diag(np.ones(N - 1), -1)
    T[-1, -1] = -1.0
    return T


def rc_A1(N, p):
    return (1.0 + p) * rc_stencil(N)


def rc_quadratic_pattern(N):
    """``A_2(p) / p^2`` built from the 1-based index list of the RC benchmark."""
    P = np.zeros((N, N * N))

    def put(i, j, v):
        P[i - 1, j - 1] += v

    put(1, 1, -1.0)
    put(1, 2, 0.5)
    put(1, N + 1, 0.5)
    put(1, N + 2, -0.5)
    for k in range(2, N):
        put(k, (k - 2) * N + k - 1, 0.5)
        put(k, (k - 1) * N + k + 1, 0.5)
        put(k, k * N + k, 0.5)
        put(k, (k - 2) * N + k, -0.5)
        put(k, (k - 1) * N + k - 1, -0.5)
        put(k, k * N + k + 1, -0.5)
    put(N, (N - 2) * N + N - 1, 0.5)
    put(N, (N - 1) * N + N, 0.5)
    put(N, (N - 2) * N + N, -0.5)
    put(N, (N - 1) * N + N - 1, -0.5)
    return P


def rc_A2(N, p):
    return p ** 2 * rc_quadratic_pattern(N)


def rc_A_monolithic(N, p):
    """The bilinearized state matrix assembled directly for one ``p``."""
    A1 = rc_A1(N, p)
    I = np.eye(N)
    top = np.hstack([A1, rc_A2(N, p)])
    bottom = np.hstack([np.zeros((N * N, N)), np.kron(A1, I) + np.kron(I, A1)])
    return np.vstack([top, bottom])


def rc_g(v, p):
    """Resistor current ``g(v; p) = exp(p v) + v - 1``."""
    return np.expm1(p * v) + v


def rc_f(v, p):
    """Nonlinear RC right-hand side ``f(v; p)``."""
    d = np.empty_like(v)
    d[0] = v[0]
    d[1:] = v[1:] - v[:-1]  # differences v_{k-1} - v_k with sign flipped
    cur = rc_g(-d[1:], p)  # g(v_{k-1} - v_k)
    out = np.empty_like(v)
    out[0] = -rc_g(v[0], p) - (cur[0] if v.size > 1 else 0.0)
    if v.size > 1:
        out[1:-1] = cur[:-1] - cur[1:]
        out[-1] = cur[-1]
    return out


def gen_rc(N):
    """Carleman bilinearization of the parametric RC ladder with ``N`` nodes.

    State ``x = [v; v (x) v]`` of size ``n = N + N^2``, one input, one
    output, one parameter.  ``A(p) = A0 + p A0 + p^2 A_quad`` where ``A0``
    carries the stencil blocks and ``A_quad`` the quadratic coupling.
    """
    if N < 2:
        raise ValueError('N must be at least 2')
    n = N + N * N
    T = rc_stencil(N)
    I = np.eye(N)
    A0 = np.zeros((n, n))
    A0[:N, :N] = T
    A0[N:, N:] = np.kron(T, I) + np.kron(I, T)
    Aq = np.zeros((n, n))
    Aq[:N, N:] = rc_quadratic_pattern(N)
    e1 = np.zeros(N)
    e1[0] = 1.0
    Nmat = np.zeros((n, n))
    Nmat[N:, :N] = np.kron(e1[:, None], I) + np.kron(I, e1[:, None])
    b = np.zeros((n, 1))
    b[0, 0] = 1.0
    A = AffineMatrix(A0, [(linear_coefficient(0), A0), (square_coefficient(0), Aq)])
    return BilinearSystem(E=np.eye(n), A=A, N=[Nmat], B=b, C=b.T.copy(), nu=1, name=f'rc(N={N})')


# advection-diffusion ------------------------------------------------------

ADVDIFF_BOX = {'log_p1': (-3.0, 1.0), 'p2': (-1.0, 1.0), 'p3': (-1.0, 1.0), 'p4': (1.0, 10.0)}


def advdiff_grid(grid):
    """Interior node coordinates (x, y) of a uniform grid on ``[-1, 1]^2``.

    Nodes are numbered x-fastest.
    """
    h = 2.0 / (grid + 1)
    t = -1.0 + h * np.arange(1, grid + 1)
    X, Y = np.meshgrid(t, t)
    return X.ravel(), Y.ravel(), h


def laplacian_2d(grid):
    """5-point Laplacian with homogeneous Dirichlet data and the boundary coupling vector.

    Returns ``(L, beta)`` with ``L`` symmetric negative definite and
    ``beta[i] = (number of boundary neighbours of node i) / h^2`` so that the
    discrete Laplacian of a field equal to ``u`` on the boundary is
    ``L x + u beta``.
    """
    h = 2.0 / (grid + 1)
    D = np.diag(-2.0 * np.ones(grid)) + np.diag(np.ones(grid - 1), 1) + np.diag(np.ones(grid - 1), -1)
    I = np.eye(grid)
    L = (np.kron(I, D) + np.kron(D, I)) / h ** 2
    ii, jj = np.meshgrid(np.arange(grid), np.arange(grid))
    ii, jj = ii.ravel(), jj.ravel()
    nb = (ii == 0).astype(float) + (ii == grid - 1) + (jj == 0) + (jj == grid - 1)
    return L, nb / h ** 2


def advection_matrix(grid, vx, vy):
    """``-(v . grad)`` by central differences, zero boundary values."""
    h = 2.0 / (grid + 1)
    n = grid * grid
    Nm = np.zeros((n, n))
    for idx in range(n):
        i, j = idx % grid, idx // grid  # x index, y index
        if i + 1 < grid:
            Nm[idx, idx + 1] -= vx[idx] / (2 * h)
        if i - 1 >= 0:
            Nm[idx, idx - 1] += vx[idx] / (2 * h)
        if j + 1 < grid:
            Nm[idx, idx + grid] -= vy[idx] / (2 * h)
        if j - 1 >= 0:
            Nm[idx, idx - grid] += vy[idx] / (2 * h)
    return Nm


def gaussian_source(x, y, p):
    """``exp(-((x - p2)^2 + (y - p3)^2) / p4)`` at the given nodes."""
    return np.exp(-((x - p[1]) ** 2 + (y - p[2]) ** 2) / p[3])


def gaussian_coefficient(x, y, tag=''):
    """Vector-valued coefficient returning the source at every node in ``(x, y)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)

    def grad(p):
        f = gaussian_source(x, y, p)
        G = np.zeros((x.size, 4))
        G[:, 1] = f * 2 * (x - p[1]) / p[3]
        G[:, 2] = f * 2 * (y - p[2]) / p[3]
        G[:, 3] = f * ((x - p[1]) ** 2 + (y - p[2]) ** 2) / p[3] ** 2
        return G

    return CoefficientFunction(lambda p: gaussian_source(x, y, p), grad, tag=tag)


def output_vector(grid):
    """Average over the nodes in ``[0.5, 1] x [0.5, 1]``."""
    x, y, _ = advdiff_grid(grid)
    mask = (x >= 0.5) & (y >= 0.5)
    c = mask / mask.sum()
    return c


def gen_advdiff(grid=21):
    """Finite-difference advection-diffusion benchmark (m = 4, l = 1, nu = 4).

    ``p = (p1, p2, p3, p4)``: diffusivity, source centre and source reach.
    Inputs: the two velocity field amplitudes, the boundary value and the
    source strength.  ``A(p) = p1 L``, ``b_3(p) = p1 beta``, ``b_4(p)`` is the
    Gaussian source sampled at the nodes, ``N_3 = N_4 = 0``.
    """
    if grid < 5:
        raise ValueError('grid must be at least 5')
    x, y, h = advdiff_grid(grid)
    n = grid * grid
    L, beta = laplacian_2d(grid)
    N1 = advection_matrix(grid, -y, x)
    v2 = 0.5 * (np.cos(np.pi * (x - y)) + 1.0)
    N2 = advection_matrix(grid, v2, v2)
    Z = np.zeros((n, n))
    p1 = linear_coefficient(0)
    A = AffineMatrix(Z, [(p1, L)])
    B3 = np.zeros((n, 4))
    B3[:, 2] = beta
    stack = np.zeros((n, n, 4))
    stack[np.arange(n), np.arange(n), 3] = 1.0
    B = AffineMatrix(np.zeros((n, 4)), [(p1, B3), (gaussian_coefficient(x, y, tag=f'advdiff.source:{grid}'), stack)])
    C = output_vector(grid)[None, :]
    return BilinearSystem(E=np.eye(n), A=A, N=[N1, N2, Z.copy(), Z.copy()], B=B, C=C, nu=4,
                          name=f'advdiff(grid={grid})')


def advdiff_source_snapshots(grid, params):
    """Matrix whose columns are ``b_4(p)`` for each parameter row in ``params``."""
    x, y, _ = advdiff_grid(grid)
    return np.column_stack([gaussian_source(x, y, p) for p in np.atleast_2d(params)])


def sample_advdiff_params(rng, count, fix=None):
    """Uniform draws from the advection-diffusion box (``ln p1`` uniform)."""
    lo = np.array([ADVDIFF_BOX[k][0] for k in ('log_p1', 'p2', 'p3', 'p4')])
    hi = np.array([ADVDIFF_BOX[k][1] for k in ('log_p1', 'p2', 'p3', 'p4')])
    P = lo + (hi - lo) * rng.random((count, 4))
    P[:, 0] = np.exp(P[:, 0])
    for j, v in (fix or {}).items():
        P[:, j] = v
    return P
