"""Finite-difference validation of analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor, no_grad


@dataclass
class GradCheckReport:
    max_rel_err: float
    passed: bool
    tol: float
    eps: float
    # (input index, flat element index) of the worst element
    worst: tuple[int, int] | None = None
    # (kind, input index, flat element index) of a NaN, if found
    nan_at: tuple[str, int, int] | None = None
    per_input: list[float] = field(default_factory=list)

    def __str__(self):
        status = "pass" if self.passed else "FAIL"
        return f"grad_check: max_rel_err={self.max_rel_err:.3e} tol={self.tol:g} [{status}]"


def grad_check(fn, inputs: list[Tensor], eps: float = 1e-5, tol: float = 1e-4) -> GradCheckReport:
    """Compare analytic gradients of ``fn(*inputs)`` against central differences.

    ``fn`` must return a scalar Tensor built from the given inputs. The
    relative error per element uses a ``max(|analytic|, |numeric|, 1e-8)``
    denominator; the check passes iff the max over all elements of all
    inputs is <= ``tol``.
    """
    if not (1e-7 <= eps <= 1e-3):
        raise ValueError(f"eps must lie in [1e-7, 1e-3], got {eps}")
    for x in inputs:
        x.requires_grad = True
        x.grad = None

    out = fn(*inputs)
    if not isinstance(out, Tensor) or out.data.size != 1:
        raise ValueError("grad_check function must return a scalar Tensor")
    out.backward()
    analytic = [np.zeros_like(x.data) if x.grad is None else x.grad.copy() for x in inputs]

    report = GradCheckReport(max_rel_err=0.0, passed=True, tol=tol, eps=eps)

    def eval_scalar() -> float:
        with no_grad():
            return float(fn(*inputs).data)

    for i, x in enumerate(inputs):
        flat = x.data.reshape(-1)
        numeric = np.zeros_like(flat)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + eps
            f_plus = eval_scalar()
            flat[j] = orig - eps
            f_minus = eval_scalar()
            flat[j] = orig
            numeric[j] = (f_plus - f_minus) / (2.0 * eps)
        ana = analytic[i].reshape(-1)
        if np.isnan(ana).any():
            report.nan_at = ("analytic", i, int(np.isnan(ana).argmax()))
            report.passed = False
            report.max_rel_err = float("nan")
            return report
        if np.isnan(numeric).any():
            report.nan_at = ("numeric", i, int(np.isnan(numeric).argmax()))
            report.passed = False
            report.max_rel_err = float("nan")
            return report
        denom = np.maximum(np.maximum(np.abs(ana), np.abs(numeric)), 1e-8)
        rel = np.abs(ana - numeric) / denom
        worst_j = int(rel.argmax()) if rel.size else 0
        worst_err = float(rel[worst_j]) if rel.size else 0.0
        report.per_input.append(worst_err)
        if worst_err > report.max_rel_err:
            report.max_rel_err = worst_err
            report.worst = (i, worst_j)

    report.passed = report.max_rel_err <= tol
    return report
