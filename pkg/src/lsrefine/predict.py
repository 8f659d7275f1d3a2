"""Closed-form convergence and recognition conditions, plus the cost model.

Every predicate evaluates one inequality in exact quantities (kappa, the
residual-size ratio rho = ||r*|| / (||A|| ||x*||), and the unit roundoffs);
all dimensional constants are set to 1, so these are qualitative region
markers rather than proofs.  ConditionReport packages the full set for one
problem so the harness can overlay predicted and observed behavior.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .precision import PrecisionPair


@dataclass(frozen=True)
class ConditionEntry:
    lhs: float
    threshold: float
    holds: bool


@dataclass(frozen=True)
class ConditionReport:
    kappa: float
    rho: float
    u: float
    u_r: float
    entries: dict[str, ConditionEntry]

    def holds(self, name: str) -> bool:
        return self.entries[name].holds


def ls_recognition(kappa: float, rho: float) -> bool:
    """kappa^2 * rho < 1; independent of the precisions in use."""
    return kappa * kappa * rho < 1.0


def sn_recognition(kappa: float, rnorm: float, xnorm: float, u: float) -> bool:
    """kappa^2 * ||r*|| / ||x*|| < 1/u (semi-normal, u_r = u^2 convention)."""
    return kappa * kappa * rnorm / xnorm < 1.0 / u


def sn_convergence(kappa: float, u: float) -> bool:
    """kappa < u^-1/2: the semi-normal error contracts every iteration."""
    return kappa < u ** -0.5


def sn_limiting(kappa: float, rho: float, u: float, u_r: float) -> bool:
    """u_r * kappa^2 * (2 + rho) < u: semi-normal limiting accuracy O(u)."""
    return u_r * kappa * kappa * (2.0 + rho) < u


def csne_one_step(kappa: float, rho: float, u: float) -> bool:
    """u * kappa^3 * (2 + rho) < 1: one corrected semi-normal step suffices
    (equivalently kappa < u^-1/3 when rho = O(1))."""
    return u * kappa ** 3 * (2.0 + rho) < 1.0


def aug_x_convergence(kappa: float, rho: float, u: float) -> bool:
    """kappa^2 * rho <= 1/u: the saddle-point refinement corrects x."""
    return kappa * kappa * rho <= 1.0 / u


def aug_r_convergence(rho: float, u: float) -> bool:
    """1/rho <= 1/u: the saddle-point refinement corrects r (simplified
    constant; see the module docstring)."""
    lhs = math.inf if rho == 0 else 1.0 / rho
    return lhs <= 1.0 / u


def kappa_augmented(sigma_max: float, sigma_min: float, alpha: float) -> float:
    """Condition number of the alpha-scaled saddle-point matrix."""
    if sigma_max <= 0 or sigma_min <= 0 or alpha <= 0:
        raise ValueError("sigma_max, sigma_min, alpha must be positive")
    num = alpha + math.sqrt(alpha * alpha + 4.0 * sigma_max * sigma_max)
    den = min(2.0 * alpha, math.sqrt(alpha * alpha + 4.0 * sigma_min * sigma_min) - alpha)
    return num / den


_COST_ROWS = {
    "ls": {"flops_residual_precision": lambda m, n: 2 * m * n,
           "flops_working_precision": lambda m, n: 4 * m * n + n * n,
           "needs_Az": True, "needs_ATz": False},
    "semi_normal": {"flops_residual_precision": lambda m, n: 4 * m * n - n,
                    "flops_working_precision": lambda m, n: 2 * n * n + n,
                    "needs_Az": True, "needs_ATz": True},
    "augmented": {"flops_residual_precision": lambda m, n: 4 * m * n + m - n,
                  "flops_working_precision": lambda m, n: 8 * m * n + 2 * n * n,
                  "needs_Az": True, "needs_ATz": True},
}


def cost_model(m: int, n: int, strategy: str) -> dict:
    """Per-iteration flop counts and operator needs for one strategy."""
    try:
        row = _COST_ROWS[strategy]
    except KeyError:
        raise ValueError(f"no cost row for strategy {strategy!r}") from None
    return {
        "flops_residual_precision": row["flops_residual_precision"](m, n),
        "flops_working_precision": row["flops_working_precision"](m, n),
        "needs_Az": row["needs_Az"],
        "needs_ATz": row["needs_ATz"],
    }


def evaluate_conditions(kappa: float, rnorm: float, xnorm: float, anorm: float,
                        p: PrecisionPair) -> ConditionReport:
    """Evaluate every predicate for one problem at one precision pair."""
    u, u_r = p.u, p.u_r
    rho = rnorm / (anorm * xnorm)
    entries = {
        "ls_recognition": ConditionEntry(
            kappa * kappa * rho, 1.0, ls_recognition(kappa, rho)),
        "sn_recognition": ConditionEntry(
            kappa * kappa * rnorm / xnorm, 1.0 / u,
            sn_recognition(kappa, rnorm, xnorm, u)),
        "sn_convergence": ConditionEntry(
            kappa, u ** -0.5, sn_convergence(kappa, u)),
        "sn_limiting": ConditionEntry(
            u_r * kappa * kappa * (2.0 + rho), u, sn_limiting(kappa, rho, u, u_r)),
        "csne_one_step": ConditionEntry(
            u * kappa ** 3 * (2.0 + rho), 1.0, csne_one_step(kappa, rho, u)),
        "aug_x_convergence": ConditionEntry(
            kappa * kappa * rho, 1.0 / u, aug_x_convergence(kappa, rho, u)),
        "aug_r_convergence": ConditionEntry(
            math.inf if rho == 0 else 1.0 / rho, 1.0 / u,
            aug_r_convergence(rho, u)),
    }
    return ConditionReport(kappa=kappa, rho=rho, u=u, u_r=u_r, entries=entries)
