"""Closed-form error bounds and certified cutoffs.

All logarithms are natural.  Each function evaluates one inequality so that
numerical checks can compare a measured quantity against it.
"""
from __future__ import annotations

import math

from .errors import DomainError

SINH1_2PI = math.sinh(1.0) / (2 * math.pi)  # ~0.18704


def _check_eps(eps: float) -> None:
    if not 0 < eps < 1:
        raise DomainError(f"eps must lie in (0, 1), got {eps}")


def _check_alphaT(alphaT: float) -> None:
    if alphaT < 0 or not math.isfinite(alphaT):
        raise DomainError(f"alphaT must be finite and >= 0, got {alphaT}")


def cutoff_for_accuracy(M: int, alphaT: float, eps: float) -> int:
    """Smallest certified L giving eigenvalue accuracy eps (in units of omega).

    The log(9(2M+1)^2 alphaT) term is clamped at zero when its argument is
    below one; the formula otherwise assumes alphaT of order one or larger.
    """
    _check_eps(eps)
    _check_alphaT(alphaT)
    k = 2 * M + 1
    arg = 9 * k * k * alphaT
    third = math.log(arg) if arg > 1 else 0.0
    return math.ceil(k * (SINH1_2PI * alphaT + math.log(1 / eps) + third)) + 1


def cutoff_lieb_robinson(M: int, alphaT: float, eps: float) -> int:
    """Window for Sambe-space time evolution up to time T with error eps.

    Obtained by inverting 2 exp((2M+1) e alpha t - d/M) <= eps for d.
    """
    if eps <= 0:
        raise DomainError(f"eps must be positive, got {eps}")
    _check_alphaT(alphaT)
    if M == 0:
        return 1
    val = M * ((2 * M + 1) * math.e * alphaT + math.log(2 / eps))
    return max(1, math.ceil(val)) + 1


def cutoff_lieb_robinson_decaying(zeta: float, alphaT: float, eps: float) -> int:
    """Analogue of the window above for exponentially decaying components.

    Inverts 2 exp(-d/z1 + 2 z2 alpha t + 2/z2) <= eps with
    z1 = 1/(1/zeta - 1 + e^{-1/zeta}) and z2 = 1/(1 - e^{-1/zeta}).
    """
    if eps <= 0 or zeta <= 0:
        raise DomainError("need eps > 0 and zeta > 0")
    _check_alphaT(alphaT)
    z1 = 1.0 / (1.0 / zeta - 1.0 + math.exp(-1.0 / zeta))
    z2 = 1.0 / (1.0 - math.exp(-1.0 / zeta))
    return math.ceil(z1 * (2 * z2 * alphaT + 2 / z2 + math.log(2 / eps))) + 1


def tail_exact(l: int, M: int, alphaT: float) -> float:
    return math.exp(-(abs(l) - 0.5) / (2 * M + 1) + SINH1_2PI * alphaT)


def tail_truncated(l: int, M: int, alphaT: float, eps_over_omega: float) -> float:
    return math.exp(-(abs(l) - abs(eps_over_omega)) / (2 * M + 1) + SINH1_2PI * alphaT)


def tail_expdecay(l: int, zeta: float, alphaT: float) -> float:
    x = 1.0 / (4 * zeta)
    coth = math.cosh(x) / math.sinh(x)
    return math.exp(-(abs(l) - 0.5) * x + coth / (8 * math.pi * zeta) * alphaT)


def tail_sum(L: int, M: int, alphaT: float) -> float:
    return 9 * (2 * M + 1) * math.exp(-L / (2 * M + 1) + SINH1_2PI * alphaT)


def tail_bound(l: int, M: int, alphaT: float, variant: str = "exact", *,
               eps_max: float | None = None, zeta: float | None = None,
               L: int | None = None) -> float:
    """Dispatch on ``variant`` in {exact, truncated, expdecay, tail_sum}.

    ``eps_max`` is in units of omega.
    """
    if variant == "exact":
        return tail_exact(l, M, alphaT)
    if variant == "truncated":
        if eps_max is None:
            raise DomainError("truncated variant needs eps_max")
        return tail_truncated(l, M, alphaT, eps_max)
    if variant == "expdecay":
        if zeta is None or zeta <= 0:
            raise DomainError("expdecay variant needs zeta > 0")
        return tail_expdecay(l, zeta, alphaT)
    if variant == "tail_sum":
        if L is None:
            raise DomainError("tail_sum variant needs L")
        return tail_sum(L, M, alphaT)
    raise DomainError(f"unknown tail-bound variant {variant!r}")


# ------------------------------------------------------------ eigenvalue accuracy

def eigenvalue_accuracy(L: int, M: int, alphaT: float) -> float:
    """|eps_n - eps~| / omega guaranteed for some truncated eigenvalue."""
    k = 2 * M + 1
    return 8 * k * k * alphaT * math.exp(-L / k + SINH1_2PI * alphaT)


def eigenvalue_soundness(L: int, M: int, alphaT: float, eps_over_omega: float) -> float:
    """|eps~ - eps_n| / omega guaranteed for some true quasienergy."""
    k = 2 * M + 1
    return 9 * k * k * alphaT * math.exp(-(L - abs(eps_over_omega)) / k + SINH1_2PI * alphaT)


def lieb_robinson(M: int, alphat: float, d: float) -> float:
    """Bound on a block of exp(-iH_F t) - exp(-iH_F^L t) at hopping distance d."""
    if M == 0:
        return 0.0 if d > 0 else 2.0
    return 2 * math.exp((2 * M + 1) * math.e * alphat - d / M)


def lr_distance(l: int, lp: int, L: int) -> int:
    """Minimal number of hops from l' to l passing outside the window [L]."""
    if -L + 1 <= l <= L:
        return 2 * L - abs(l) - abs(lp)
    return abs(l) - abs(lp)


def norm_deviation(L: int, M: int, alphaT: float, eps_over_omega: float) -> float:
    """epsilon_norm: |(norm of the reconstructed physical state) - 1|."""
    k = 2 * M + 1
    return (6 * k * k * alphaT * math.log(2 * math.e * L)
            * math.exp(-(L - abs(eps_over_omega)) / k + SINH1_2PI * alphaT))


def evolution_residual(L: int, M: int, alphaT: float, eps_over_omega: float) -> float:
    """Bound on ||(U(t+T;t) - e^{-i eps T}) phi(t)|| / ||phi(t)||; inf if vacuous."""
    k = 2 * M + 1
    num = 32 * k * k * math.exp(-(L - abs(eps_over_omega)) / k + 2 * (M + 1) * math.e * alphaT)
    den = 1 - norm_deviation(L, M, alphaT, eps_over_omega)
    return num / den if den > 0 else math.inf


def pbc_residual(L: int, l: int, M: int, alphaT: float) -> float:
    """Residual of a shifted exact eigenvector under the wrapped truncation."""
    k = 2 * M + 1
    return 54 * k * k * math.exp(-(L - abs(l)) / k + SINH1_2PI * alphaT)


def residual_norm_deviation(L: int, M: int, alphaT: float) -> float:
    """| ||Psi_1|| - 1/2 | for the enlarged-window initial state."""
    k = 2 * M + 1
    return 27 * k * math.exp(-L / k + SINH1_2PI * alphaT)


def negative_part_norm(L: int, M: int, alphaT: float, coeff_l1: float = 1.0) -> float:
    """||Psi_neg||, scaled by sum_n |c_n| for a superposition input."""
    k = 2 * M + 1
    return coeff_l1 * 45 * k * k * (math.sqrt(2 * L) + 1) * math.exp(-L / k + SINH1_2PI * alphaT)


def approx_qsvt_error_bound(q: int, eta: float, n_max: int) -> float:
    if q < 1 or q % 2 == 0:
        raise DomainError("q must be a positive odd integer")
    if eta < 0 or n_max < 1:
        raise DomainError("need eta >= 0 and n_max >= 1")
    return q * q * eta * math.sqrt(n_max)
