"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..errors import NumericCheckError


@dataclass
class GradCheckReport:
    """Worst relative error per checked array, plus the overall maximum.

    Errors are normalized by max(1, |analytic|, |numeric|): relative for
    large gradients, absolute near zero.
    """

    max_rel_error: float
    tolerance: float
    per_array: dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tolerance

    def __str__(self) -> str:
        status = "ok" if self.passed else "FAIL"
        return f"gradcheck {status}: max rel error {self.max_rel_error:.3e} (tol {self.tolerance:.1e})"


def finite_difference_check(
    fn: Callable[[], float],
    arrays: dict[str, np.ndarray],
    analytic: dict[str, np.ndarray],
    h: float = 1e-6,
    tolerance: float = 1e-5,
) -> GradCheckReport:
    """Compare analytic gradients against central differences.

    `fn` recomputes the scalar loss from the current contents of `arrays`
    (perturbed in place, then restored). `analytic` maps the same keys to
    the gradients under test. `fn` must be deterministic: it is evaluated
    twice up front and any discrepancy raises.
    """
    base1 = float(fn())
    base2 = float(fn())
    if base1 != base2:
        raise NumericCheckError(
            f"loss closure is not deterministic: {base1!r} != {base2!r}"
        )
    per_array: dict[str, float] = {}
    worst = 0.0
    for name, arr in arrays.items():
        if name not in analytic:
            raise KeyError(f"no analytic gradient supplied for {name!r}")
        grad = np.asarray(analytic[name], dtype=np.float64)
        if grad.shape != arr.shape:
            raise NumericCheckError(
                f"gradient shape {grad.shape} != array shape {arr.shape} for {name!r}"
            )
        err = 0.0
        flat = arr.reshape(-1)
        gflat = grad.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            fplus = float(fn())
            flat[i] = orig - h
            fminus = float(fn())
            flat[i] = orig
            numeric = (fplus - fminus) / (2.0 * h)
            a = gflat[i]
            denom = max(1.0, abs(a), abs(numeric))
            err = max(err, abs(a - numeric) / denom)
        per_array[name] = err
        worst = max(worst, err)
    return GradCheckReport(max_rel_error=worst, tolerance=tolerance, per_array=per_array)
