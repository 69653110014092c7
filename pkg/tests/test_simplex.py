import numpy as np
import scipy.optimize

from driftspec._simplex import batched_nelder_mead


def test_independent_quadratics() -> None:
    targets = np.array([[1.0, -2.0], [0.5, 0.5], [-3.0, 4.0]])
    scales = np.array([1.0, 10.0, 0.1])

    def fun(x: np.ndarray) -> np.ndarray:  # type: ignore[type-arg]
        return scales * np.sum((x - targets) ** 2, axis=1)  # type: ignore[no-any-return]

    x0 = np.zeros((3, 2))
    best, values = batched_nelder_mead(fun, x0, np.full(3, 0.5), maxfev=2000, xrtol=1e-10)
    np.testing.assert_allclose(best, targets, atol=1e-6)
    assert np.all(values <= fun(x0))


def test_never_worse_than_start() -> None:
    def fun(x: np.ndarray) -> np.ndarray:  # type: ignore[type-arg]
        return np.abs(x[:, 0]) + np.abs(x[:, 1] - 1)  # type: ignore[no-any-return]

    x0 = np.array([[0.0, 1.0], [2.0, 2.0]])
    best, values = batched_nelder_mead(fun, x0, np.array([0.1, 0.1]), maxfev=20)
    assert np.all(values <= fun(x0))
    np.testing.assert_allclose(fun(best), values)


def test_agrees_with_scipy_on_rosenbrock() -> None:
    shifts = np.array([[0.0, 0.0], [2.0, -1.0], [-0.5, 3.0]])

    def fun(x: np.ndarray) -> np.ndarray:  # type: ignore[type-arg]
        return scipy.optimize.rosen((x - shifts).T)  # type: ignore[no-any-return]

    x0 = shifts + np.array([-1.2, 1.0])
    best, values = batched_nelder_mead(fun, x0, np.full(3, 0.1), maxfev=4000, xrtol=1e-12)
    for b in range(3):
        single = scipy.optimize.minimize(
            lambda x, b=b: scipy.optimize.rosen(x - shifts[b]),
            x0[b],
            method="Nelder-Mead",
            options={"xatol": 1e-10, "fatol": 1e-14, "maxfev": 4000},
        )
        np.testing.assert_allclose(best[b], single.x, atol=1e-6)
        np.testing.assert_allclose(best[b], shifts[b] + 1, atol=1e-6)
    assert np.all(values < 1e-10)
