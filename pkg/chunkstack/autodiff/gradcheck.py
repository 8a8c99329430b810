import logging
from typing import Callable, Dict, List, Mapping, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field

from chunkstack.autodiff.tensor import Tensor, no_grad

logger = logging.getLogger(__name__)

REL_ERR_FLOOR = 1e-8


class ParameterCheck(BaseModel):
    name: str
    size: int
    max_rel_err: float
    worst_index: List[int]
    analytic: float
    numeric: float


class GradCheckReport(BaseModel):
    """Outcome of a central-difference gradient check."""

    step: float
    tol: float
    max_rel_err: float = Field(..., ge=0)
    passed: bool
    n_scalars: int
    parameters: List[ParameterCheck]

    def worst(self, k: int = 5) -> List[ParameterCheck]:
        return sorted(self.parameters, key=lambda p: p.max_rel_err, reverse=True)[:k]


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), REL_ERR_FLOOR)


def grad_check(
    fn: Callable[[], Tensor],
    params: Union[Mapping[str, Tensor], Sequence[Tensor]],
    h: float = 1e-5,
    tol: float = 1e-4,
) -> GradCheckReport:
    """
    Compare analytic gradients against central differences.

    Mathematical Background:
    ----------------------
    For every scalar parameter θ:
        numeric = (f(θ + h) - f(θ - h)) / 2h
        rel_err = |analytic - numeric| / max(|analytic|, |numeric|, 1e-8)

    Args:
        fn: Deterministic closure rebuilding the graph and returning a scalar loss
        params: Parameters to check (name -> tensor, or a sequence); must be f64
        h: Finite-difference step
        tol: Pass threshold on the largest relative error

    Returns:
        GradCheckReport with per-parameter worst errors
    """
    named: Dict[str, Tensor] = (
        dict(params) if isinstance(params, Mapping) else {f"param{i}": p for i, p in enumerate(params)}
    )
    for name, p in named.items():
        if p.dtype != np.float64:
            raise ValueError(f"grad_check requires f64 parameters; {name} is {p.dtype}")

    for p in named.values():
        p.zero_grad()
    loss = fn()
    loss.backward()
    analytic = {name: p.grad.copy() for name, p in named.items()}

    checks: List[ParameterCheck] = []
    n_scalars = 0
    with no_grad():
        for name, p in named.items():
            worst: Tuple[float, Tuple[int, ...], float, float] = (0.0, (), 0.0, 0.0)
            for index in np.ndindex(p.shape):
                original = p.data[index]
                p.data[index] = original + h
                f_plus = fn().item()
                p.data[index] = original - h
                f_minus = fn().item()
                p.data[index] = original
                numeric = (f_plus - f_minus) / (2 * h)
                a = float(analytic[name][index])
                err = relative_error(a, numeric)
                if err > worst[0] or not worst[1]:
                    worst = (err, index, a, numeric)
                n_scalars += 1
            checks.append(
                ParameterCheck(
                    name=name,
                    size=int(p.size),
                    max_rel_err=worst[0],
                    worst_index=[int(i) for i in worst[1]],
                    analytic=worst[2],
                    numeric=worst[3],
                )
            )

    max_err = max((c.max_rel_err for c in checks), default=0.0)
    report = GradCheckReport(
        step=h,
        tol=tol,
        max_rel_err=max_err,
        passed=max_err <= tol,
        n_scalars=n_scalars,
        parameters=checks,
    )
    if not report.passed:
        for c in report.worst():
            logger.warning(
                f"Gradient mismatch in {c.name}{c.worst_index}: analytic={c.analytic:.6e} "
                f"numeric={c.numeric:.6e} rel_err={c.max_rel_err:.3e}"
            )
    else:
        logger.info(f"Gradient check passed over {n_scalars} scalars (max rel err {max_err:.3e})")
    return report
