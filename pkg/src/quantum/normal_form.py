# Copyright © 2025 Sierra Labs LLC
# SPDX-License-Identifier: AGPL-3.0-only
# License-Filename: LICENSE

"""
Quantum Birkhoff normal form at matrix level.

Each step solves (i/ℏ)[F̂_j, Ĥ] = ⟨P̂_j⟩ − P̂_j entrywise, conjugates by
U_j = exp(−iε^j F̂_j/ℏ) and collects the resonant remainder ⟨R̂_j⟩. The
formal ε-series of the conjugated operator is tracked alongside the exact
conjugation so the remainders can be read off order by order.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy import linalg

from ..classical.frequency import ResonanceModule
from ..classical.symbols import WeylSymbol
from ..core.errors import BandOverflowError, NumericalToleranceError, ValidationError
from .quantization import (
    HermiteBasisSpec,
    OperatorMatrix,
    hamiltonian_matrix,
    operator_norm,
    quantize,
    quantum_average,
    resonant_mask,
    spectrum,
)

logger = logging.getLogger(__name__)

MAX_ORDER = 4
UNITARY_TOLERANCE = 1e-10


def _denominators(basis: HermiteBasisSpec) -> np.ndarray:
    """ω·(k − k′) for every matrix entry."""
    wk = basis.multi_indices @ np.asarray(basis.omega)
    return wk[:, None] - wk[None, :]


def solve_quantum_cohomological(V: OperatorMatrix, rm: ResonanceModule) -> OperatorMatrix:
    """
    Solve (i/ℏ)[F̂, Ĥ] = ⟨V̂⟩ − V̂ entrywise.

    F[k,k′] = V[k,k′]/(iω·(k−k′)) off the resonant entries, 0 on them.

    Args:
        V: Operator to normalize
        rm: Resonance module

    Returns:
        Hermitian F̂ (when V̂ is Hermitian)
    """
    mask = resonant_mask(V.basis, rm)
    denom = _denominators(V.basis)
    safe = np.where(mask, 1.0, denom)
    F = np.where(mask, 0.0, V.entries / (1j * safe))
    return OperatorMatrix(V.basis, F, f"F[{V.symbol_tag}]", V.degree)


def unitary_exponential(F: OperatorMatrix, scale: float, tol: float = UNITARY_TOLERANCE) -> np.ndarray:
    """
    exp(−i·scale·F̂) through the eigendecomposition of the Hermitian F̂.

    Args:
        F: Hermitian generator
        scale: Real prefactor (ε^j/ℏ)

    Returns:
        Unitary matrix
    """
    if not F.is_hermitian():
        raise ValidationError(f"Generator {F.symbol_tag} is not Hermitian (defect {F.hermitian_defect:.3e})")
    try:
        values, vectors = linalg.eigh(F.entries)
    except linalg.LinAlgError as e:
        raise NumericalToleranceError(f"Eigendecomposition of generator failed: {e}") from e
    U = (vectors * np.exp(-1j * scale * values)) @ vectors.conj().T
    defect = float(np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0]))))
    if defect > tol:
        raise NumericalToleranceError(f"Matrix exponential not unitary: defect {defect:.3e}")
    return U


def conjugate(P: OperatorMatrix, U: np.ndarray) -> OperatorMatrix:
    """U* P̂ U."""
    return OperatorMatrix(P.basis, U.conj().T @ P.entries @ U, f"U*({P.symbol_tag})U", P.degree)


def conjugate_step(P: OperatorMatrix, F: OperatorMatrix, eps: float, hbar: Optional[float] = None) -> OperatorMatrix:
    """
    First normal-form conjugation P̂¹ = U* P̂ U with U = exp(−iεF̂/ℏ).

    Args:
        P: Operator Ĥ + εV̂
        F: Solution of the cohomological equation for V̂
        eps: Perturbation size
        hbar: Semiclassical parameter (defaults to the basis value)

    Returns:
        Conjugated operator
    """
    hbar = P.basis.hbar if hbar is None else hbar
    if eps == 0:
        return P
    return conjugate(P, unitary_exponential(F, eps / hbar))


def first_order_residual(
    P1: OperatorMatrix, H: OperatorMatrix, Vavg: OperatorMatrix, eps: float, degree: Optional[int] = None
) -> float:
    """‖P̂¹ − Ĥ − ε⟨V̂⟩‖ on the reliable band."""
    deg = degree if degree is not None else max(P1.degree, 2)
    mask = P1.basis.reliable_mask(deg)
    return operator_norm(P1.entries - H.entries - eps * Vavg.entries, mask)


def second_order_remainder(
    F1: OperatorMatrix, V: OperatorMatrix, Vavg: OperatorMatrix, rm: ResonanceModule, hbar: Optional[float] = None
) -> OperatorMatrix:
    """
    ⟨R̂₂⟩ = ⟨(i/2ℏ)[F̂₁, ⟨V̂⟩ + V̂]⟩.

    Args:
        F1: First generator
        V: Perturbation
        Vavg: Its quantum average
        rm: Resonance module
        hbar: Semiclassical parameter

    Returns:
        Resonant second-order remainder
    """
    hbar = V.basis.hbar if hbar is None else hbar
    S = Vavg.entries + V.entries
    R = (1j / (2 * hbar)) * (F1.entries @ S - S @ F1.entries)
    return quantum_average(OperatorMatrix(V.basis, R, "R2", 2 * V.degree), rm)


@dataclass
class NormalFormStep:
    """One conjugation U_j = exp(−iε^j F̂_j/ℏ)."""
    j: int
    F: OperatorMatrix
    unitary: np.ndarray
    remainder: OperatorMatrix
    residual_norm: float
    F_symbol: Optional[WeylSymbol] = None

    @property
    def unitary_defect(self) -> float:
        return float(np.max(np.abs(self.unitary.conj().T @ self.unitary - np.eye(self.unitary.shape[0]))))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "j": self.j,
            "residual_norm": self.residual_norm,
            "unitary_defect": self.unitary_defect,
            "generator_norm": operator_norm(self.F),
            "remainder_norm": operator_norm(self.remainder),
        }


@dataclass
class NormalFormResult:
    """
    Output of the normal-form iteration.

    Features:
    - per-step generators, unitaries and resonant remainders ⟨R̂_j⟩
    - the exactly conjugated operator and the accumulated unitary
    - the normal-form operator Ĥ + Σ ε^j ⟨R̂_j⟩
    """
    H: OperatorMatrix
    eps: float
    steps: List[NormalFormStep]
    conjugated: OperatorMatrix
    unitary: np.ndarray
    degree: int = 2
    rm: Optional[ResonanceModule] = None

    @property
    def order(self) -> int:
        return len(self.steps)

    @property
    def remainders(self) -> List[OperatorMatrix]:
        return [step.remainder for step in self.steps]

    @property
    def normal_form_operator(self) -> OperatorMatrix:
        total = self.H.entries.copy()
        for step in self.steps:
            total = total + self.eps ** step.j * step.remainder.entries
        return OperatorMatrix(self.H.basis, total, "normal_form", self.degree)

    @property
    def offresonant_residual(self) -> float:
        return self.steps[-1].residual_norm if self.steps else math.nan

    def to_dict(self) -> Dict[str, Any]:
        return {
            "eps": self.eps,
            "order": self.order,
            "steps": [s.to_dict() for s in self.steps],
            "offresonant_residual": self.offresonant_residual,
        }


def _offresonant_norm(A: OperatorMatrix, rm: ResonanceModule, degree: int) -> float:
    mask = resonant_mask(A.basis, rm)
    return operator_norm(np.where(mask, 0, A.entries), A.basis.reliable_mask(degree))


def normal_form_iterate(
    P: OperatorMatrix,
    rm: ResonanceModule,
    eps: float,
    N: int,
    V: Optional[OperatorMatrix] = None,
    H: Optional[OperatorMatrix] = None,
) -> NormalFormResult:
    """
    N steps of the quantum Birkhoff normal form for P̂ = Ĥ + εV̂.

    Args:
        P: Perturbed operator
        rm: Resonance module
        eps: Perturbation size
        N: Number of steps (1 ≤ N ≤ 4)
        V: Perturbation matrix (recovered as (P̂ − Ĥ)/ε when omitted)
        H: Unperturbed operator (exact diagonal Ĥ when omitted)

    Returns:
        NormalFormResult whose conjugated operator has off-resonant part O(ε^{N+1})
    """
    if not 1 <= N <= MAX_ORDER:
        raise ValidationError(f"Normal form order must be in [1, {MAX_ORDER}], got {N}")
    basis = P.basis
    hbar = basis.hbar
    if H is None:
        H = hamiltonian_matrix(basis)
    if V is None:
        if eps == 0:
            raise ValidationError("A perturbation matrix is required when eps = 0")
        V = OperatorMatrix(basis, (P.entries - H.entries) / eps, "V", P.degree)
    degree = max(V.degree, 2)
    if not basis.reliable_mask(2 * degree).any():
        raise BandOverflowError(
            f"No basis state below {basis.reliable_energy(2 * degree):.4g} for degree {2 * degree}; "
            f"nmax={basis.nmax} is too small for the normal form"
        )

    # Formal series coefficients of the conjugated operator, orders 0..N
    coeffs: List[np.ndarray] = [H.entries.astype(complex), V.entries.astype(complex)]
    coeffs += [np.zeros_like(coeffs[0]) for _ in range(N - 1)]

    steps: List[NormalFormStep] = []
    U_total = np.eye(basis.dim, dtype=complex)
    current = P
    for j in range(1, N + 1):
        Pj = OperatorMatrix(basis, coeffs[j], f"P{j}", degree * j)
        remainder = quantum_average(Pj, rm)
        F = solve_quantum_cohomological(Pj, rm)
        U = unitary_exponential(F, eps ** j / hbar) if eps else np.eye(basis.dim, dtype=complex)
        U_total = U_total @ U
        current = conjugate(current, U)

        new = [np.zeros_like(c) for c in coeffs]
        for i, c in enumerate(coeffs):
            term = c
            m = 0
            while i + j * m <= N:
                new[i + j * m] = new[i + j * m] + term / math.factorial(m)
                m += 1
                term = (1j / hbar) * (F.entries @ term - term @ F.entries)
        coeffs = new

        residual = _offresonant_norm(current, rm, 2 * degree)
        steps.append(NormalFormStep(j=j, F=F, unitary=U, remainder=remainder, residual_norm=residual))
        logger.debug(f"Normal form step {j}: off-resonant residual {residual:.3e}")

    return NormalFormResult(
        H=H, eps=eps, steps=steps, conjugated=current, unitary=U_total, degree=degree, rm=rm
    )


@dataclass
class ObservableStability:
    """‖U Op(a) U* − Op(a)‖ and its ratio to ε."""
    norm: float
    eps: Optional[float] = None

    @property
    def constant(self) -> float:
        """C in norm ≤ Cε; NaN without a positive ε."""
        return self.norm / self.eps if self.eps else math.nan

    def to_dict(self) -> Dict[str, Any]:
        return {"norm": self.norm, "eps": self.eps, "constant": self.constant}


def observable_stability(
    U: np.ndarray, a: WeylSymbol, basis: HermiteBasisSpec, eps: Optional[float] = None
) -> ObservableStability:
    """
    ‖U Op(a) U* − Op(a)‖ on the reliable band.

    For U from a normal-form step of size ε the norm is O(ε); passing ε
    reports the constant norm/ε alongside.

    Args:
        U: Unitary
        a: Observable symbol
        basis: Hermite basis
        eps: Perturbation size the unitary was built with

    Returns:
        ObservableStability
    """
    if eps is not None and eps < 0:
        raise ValidationError(f"eps must be non-negative, got {eps}")
    A = quantize(a, basis)
    D = U @ A.entries @ U.conj().T - A.entries
    return ObservableStability(norm=operator_norm(D, basis.reliable_mask(max(2, a.max_degree))), eps=eps)



@dataclass
class NormalFormQuasimode:
    state: np.ndarray
    eigenvalue: float
    width: float


def normal_form_quasimodes(
    result: NormalFormResult, P: OperatorMatrix, window: Tuple[float, float]
) -> List[NormalFormQuasimode]:
    """
    Quasimodes from the normal form: eigenvectors of Ĥ + Σ ε^j⟨R̂_j⟩ mapped back by U.

    Args:
        result: Normal-form iteration
        P: Original operator P̂
        window: Energy window

    Returns:
        States U ψ̃ with their eigenvalues and widths ‖P̂ψ − λψ‖
    """
    pairs = spectrum(result.normal_form_operator, window)
    modes: List[NormalFormQuasimode] = []
    for k, lam in enumerate(pairs.values):
        psi = result.unitary @ pairs.vectors[:, k]
        psi = psi / np.linalg.norm(psi)
        w = float(np.linalg.norm(P.entries @ psi - lam * psi))
        modes.append(NormalFormQuasimode(state=psi, eigenvalue=float(lam), width=w))
    return modes
