"""Central finite-difference gradient checking.

The comparison metric is |analytic - numeric| <= tol * max(1, |analytic|,
|numeric|): plain relative error breaks down at exact zeros (zero-initialized
parameters produce many), so magnitudes below 1 are compared absolutely.
"""

import numpy as np

FD_STEP = 1e-5
FD_TOL = 1e-4


def rel_err(a, b) -> float:
    a, b = float(a), float(b)
    return abs(a - b) / max(1.0, abs(a), abs(b))


def central_diff(loss_fn, arrays, name, flat_index, h=FD_STEP) -> float:
    plus = {k: v.copy() for k, v in arrays.items()}
    minus = {k: v.copy() for k, v in arrays.items()}
    plus[name].flat[flat_index] += h
    minus[name].flat[flat_index] -= h
    return (loss_fn(plus) - loss_fn(minus)) / (2.0 * h)


def check_gradients(
    loss_fn,
    arrays,
    analytic,
    coords_per_array=None,
    h=FD_STEP,
    tol=FD_TOL,
    seed=0,
) -> float:
    """Assert analytic gradients match central differences; return worst error.

    loss_fn maps an {name: array} dict to a float.  Checks every coordinate
    of every array in `analytic`, or a seeded sample of `coords_per_array`
    coordinates for the larger arrays.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for name, grad in analytic.items():
        size = grad.size
        if coords_per_array is None or size <= coords_per_array:
            indices = range(size)
        else:
            indices = rng.choice(size, size=coords_per_array, replace=False)
        for fi in indices:
            numeric = central_diff(loss_fn, arrays, name, fi, h)
            err = rel_err(grad.flat[fi], numeric)
            worst = max(worst, err)
            assert err <= tol, (
                f"{name}[{fi}]: analytic {grad.flat[fi]:.8g} vs numeric "
                f"{numeric:.8g} (rel err {err:.2e})"
            )
    return worst
