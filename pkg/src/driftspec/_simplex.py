"""
Private Nelder-Mead simplex search over many independent problems at once.

``scipy.optimize.minimize(method="Nelder-Mead")`` handles one problem per call. The
per-batch ψ updates of the heteroscedastic fit are B independent 2-d problems, so
they are advanced together here, one vectorised objective call per simplex move.
"""

from __future__ import annotations

from collections.abc import Callable

import numpy as np

__all__ = ["batched_nelder_mead"]

REFLECT = 1.0
EXPAND = 2.0
CONTRACT = 0.5
SHRINK = 0.5

Objective = Callable[[np.ndarray], np.ndarray]  # type: ignore[type-arg]


def batched_nelder_mead(
    fun: Objective,
    x0: np.ndarray,  # type: ignore[type-arg]
    step: np.ndarray,  # type: ignore[type-arg]
    *,
    maxfev: int = 200,
    xrtol: float = 1e-8,
) -> tuple[np.ndarray, np.ndarray]:  # type: ignore[type-arg]
    """
    Minimise ``fun`` independently for every row of ``x0``.

    Parameters
    ----------
    fun :
        Maps points of shape (B, d) to values of shape (B,). Row b of the input
        only affects entry b of the output.
    x0 :
        Starting points, shape (B, d).
    step :
        Initial simplex edge per problem, shape (B,).
    maxfev :
        Maximum number of evaluations per problem.
    xrtol :
        A problem stops once its simplex diameter is below
        ``xrtol * max(‖x0_b‖, step_b)``.

    Returns
    -------
    The best vertex per problem and its value. The value never exceeds
    ``fun(x0)``.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    n_problems, dim = x0.shape
    step = np.broadcast_to(np.asarray(step, dtype=np.float64), (n_problems,))
    rows = np.arange(n_problems)

    simplex = np.repeat(x0[:, None, :], dim + 1, axis=1)
    for i in range(dim):
        simplex[:, i + 1, i] += step
    values = np.stack([fun(simplex[:, i]) for i in range(dim + 1)], axis=1)
    nfev = np.full(n_problems, dim + 1)
    tolerance = xrtol * np.maximum(np.max(np.abs(x0), axis=1), step)
    active = np.ones(n_problems, dtype=bool)

    while True:
        order = np.argsort(values, axis=1)
        simplex = np.take_along_axis(simplex, order[:, :, None], axis=1)
        values = np.take_along_axis(values, order, axis=1)
        diameter = np.max(np.abs(simplex[:, 1:] - simplex[:, :1]), axis=(1, 2))
        active &= (diameter > tolerance) & (nfev < maxfev)
        if not active.any():
            break

        best, worst = simplex[:, 0], simplex[:, -1]
        centroid = simplex[:, :-1].mean(axis=1)
        f_best, f_second, f_worst = values[:, 0], values[:, -2], values[:, -1]

        x_reflect = centroid + REFLECT * (centroid - worst)
        f_reflect = fun(x_reflect)
        x_expand = centroid + EXPAND * (centroid - worst)
        f_expand = fun(x_expand)
        outside = f_reflect < f_worst
        x_contract = np.where(
            outside[:, None],
            centroid + CONTRACT * (x_reflect - centroid),
            centroid + CONTRACT * (worst - centroid),
        )
        f_contract = fun(x_contract)

        take_reflect = (f_reflect >= f_best) & (f_reflect < f_second)
        try_expand = f_reflect < f_best
        take_expand = try_expand & (f_expand < f_reflect)
        take_reflect |= try_expand & ~take_expand
        try_contract = ~(take_reflect | take_expand)
        take_contract = try_contract & np.where(
            outside, f_contract <= f_reflect, f_contract < f_worst
        )
        shrink = try_contract & ~take_contract

        new_vertex = np.select(
            [take_expand[:, None], take_reflect[:, None]],
            [x_expand, x_reflect],
            default=x_contract,
        )
        new_value = np.select(
            [take_expand, take_reflect], [f_expand, f_reflect], default=f_contract
        )
        replace = active & ~shrink
        simplex[rows[replace], -1] = new_vertex[replace]
        values[rows[replace], -1] = new_value[replace]
        nfev += np.where(active, 1 + (try_expand | try_contract), 0)

        shrinking = active & shrink
        if shrinking.any():
            shrunk = best[:, None, :] + SHRINK * (simplex - best[:, None, :])
            shrunk_values = np.stack(
                [fun(shrunk[:, i]) for i in range(1, dim + 1)], axis=1
            )
            simplex[shrinking, 1:] = shrunk[shrinking, 1:]
            values[shrinking, 1:] = shrunk_values[shrinking]
            nfev += np.where(shrinking, dim, 0)

    return simplex[:, 0], values[:, 0]
