"""Symmetric curvature functions on the positive cone.

Every family is evaluated through the logarithm of its degree-one
normalization ``L = log F``; first and second derivatives of ``F`` follow from

    F_i  = d F L_i
    F_ij = F (d^2 L_i L_j + d L_ij)

where ``d`` is the homogeneity degree of the evaluated function (1 for the
normalized form used by the flow).  All kernels are vectorized over leading
axes; ``kappa`` always carries the curvature index last.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

__all__ = [
    "CurvatureDomainError",
    "CurvatureSpec",
    "Eps0Report",
    "FValue",
    "Family",
    "ParameterError",
    "PrincipalTuple",
    "CertReport",
    "ConditionResult",
    "check_classK",
    "estimate_eps0",
    "eval_F",
    "eval_sigma",
    "hessian_contract",
    "sample_cone",
]

#: relative eigenvalue gap below which the divided difference switches to its limit
DEGENERATE_GAP = 1e-8
#: boundary probe scales for the vanishing test
BOUNDARY_EPS = (1e-2, 1e-4, 1e-6)
BOUNDARY_TOL = 1e-3


class ParameterError(ValueError):
    """Invalid parameter for a curvature operation."""


class CurvatureDomainError(ValueError):
    """Principal curvatures outside the positive cone."""

    def __init__(self, message: str, kappa=None, index=None):
        super().__init__(message)
        self.kappa = kappa
        self.index = index


class Family(str, Enum):
    GAUSS_ROOT = "GaussRoot"
    PRODUCT_GK = "ProductGK"
    QUOTIENT = "Quotient"
    MEAN = "Mean"
    SCALAR_ROOT = "ScalarRoot"

    @classmethod
    def parse(cls, name: str) -> "Family":
        key = name.strip().replace("_", "").replace("-", "").lower()
        for member in cls:
            if member.value.lower() == key:
                return member
        raise ParameterError(f"unknown curvature family {name!r}")


GFACTORS = ("sigma1", "sigma2root")


@dataclass(frozen=True)
class CurvatureSpec:
    """Which curvature function to evaluate.

    ``a`` and ``g`` are only used by ``ProductGK``: ``F = (G K^a)^(1/deg)``
    with ``G`` either ``sigma1`` or ``sigma2root = (sigma_2 / C(n,2))^(1/2)``.
    """

    family: Family = Family.GAUSS_ROOT
    a: float = 0.0
    g: str = "sigma1"
    normalized: bool = True
    kappa_min: float = 0.0

    def __post_init__(self):
        if not isinstance(self.family, Family):
            object.__setattr__(self, "family", Family.parse(str(self.family)))
        if self.a < 0 or not math.isfinite(self.a):
            raise ParameterError(f"exponent a must be a nonnegative real, got {self.a}")
        if self.g not in GFACTORS:
            raise ParameterError(f"unknown G factor {self.g!r}; expected one of {GFACTORS}")
        if self.kappa_min < 0:
            raise ParameterError("kappa_min must be nonnegative")

    def native_degree(self, n: int) -> float:
        """Homogeneity degree of the unnormalized function."""
        fam = self.family
        if fam is Family.GAUSS_ROOT:
            return float(n)
        if fam is Family.PRODUCT_GK:
            return 1.0 + n * self.a
        if fam is Family.SCALAR_ROOT:
            return 2.0
        return 1.0

    def degree(self, n: int) -> float:
        return 1.0 if self.normalized else self.native_degree(n)

    def check_dim(self, n: int) -> None:
        if not 1 <= n <= 3:
            raise ParameterError(f"dimension n must satisfy 1 <= n <= 3, got {n}")
        needs_sigma2 = self.family is Family.SCALAR_ROOT or (
            self.family is Family.PRODUCT_GK and self.g == "sigma2root"
        )
        if needs_sigma2 and n < 2:
            raise ParameterError(f"{self.family.value} needs n >= 2")

    def describe(self) -> str:
        if self.family is Family.PRODUCT_GK:
            return f"ProductGK(G={self.g}, a={self.a:g})"
        return self.family.value

    def to_config(self) -> dict[str, str]:
        return {
            "family": self.family.value,
            "a": repr(float(self.a)),
            "g": self.g,
            "normalized": "true" if self.normalized else "false",
        }


@dataclass(frozen=True)
class PrincipalTuple:
    """Principal curvatures, stored ascending."""

    kappa: tuple[float, ...]

    def __init__(self, kappa):
        values = tuple(sorted(float(k) for k in np.ravel(kappa)))
        if not 1 <= len(values) <= 3:
            raise ParameterError(f"need 1 <= n <= 3 curvatures, got {len(values)}")
        object.__setattr__(self, "kappa", values)

    @property
    def n(self) -> int:
        return len(self.kappa)

    def in_cone(self, margin: float = 0.0) -> bool:
        return self.kappa[0] > margin

    def array(self) -> np.ndarray:
        return np.array(self.kappa)


@dataclass
class FValue:
    F: float
    F_i: np.ndarray
    H: float | None = None


# --- elementary symmetric polynomials -------------------------------------


def _sigma_all(k: np.ndarray) -> np.ndarray:
    """All elementary symmetric polynomials sigma_0..sigma_n along the last axis."""
    n = k.shape[-1]
    e = np.zeros(k.shape[:-1] + (n + 1,))
    e[..., 0] = 1.0
    for i in range(n):
        x = k[..., i]
        for j in range(i + 1, 0, -1):
            e[..., j] = e[..., j] + x * e[..., j - 1]
    return e


def _sigma(k: np.ndarray, order: int) -> np.ndarray:
    if order < 0:
        return np.zeros(k.shape[:-1])
    if order > k.shape[-1]:
        return np.zeros(k.shape[:-1])
    return _sigma_all(k)[..., order]


def _sigma_grad(k: np.ndarray, order: int) -> np.ndarray:
    """d sigma_order / d kappa_i = sigma_{order-1}(kappa with kappa_i removed)."""
    n = k.shape[-1]
    out = np.empty(k.shape)
    for i in range(n):
        kk = k.copy()
        kk[..., i] = 0.0
        out[..., i] = _sigma(kk, order - 1)
    return out


def _sigma_hess(k: np.ndarray, order: int) -> np.ndarray:
    n = k.shape[-1]
    out = np.zeros(k.shape + (n,))
    for i in range(n):
        for j in range(i + 1, n):
            kk = k.copy()
            kk[..., i] = 0.0
            kk[..., j] = 0.0
            out[..., i, j] = out[..., j, i] = _sigma(kk, order - 2)
    return out


def eval_sigma(kappa, k: int) -> float:
    """The ``k``-th elementary symmetric polynomial of ``kappa``."""
    arr = np.asarray(kappa.kappa if isinstance(kappa, PrincipalTuple) else kappa, float)
    n = arr.shape[-1]
    if not 1 <= k <= n:
        raise ParameterError(f"sigma order k={k} outside 1..{n}")
    return float(_sigma(arr[None, :], k)[0])


def _log_sigma(k: np.ndarray, order: int, scale: float = 1.0):
    """log(sigma_order / scale) with gradient and Hessian."""
    n = k.shape[-1]
    if order == 0:
        z = np.zeros(k.shape[:-1])
        return z, np.zeros(k.shape), np.zeros(k.shape + (n,))
    s = _sigma(k, order)
    ds = _sigma_grad(k, order)
    d2s = _sigma_hess(k, order)
    L = np.log(s / scale)
    dL = ds / s[..., None]
    d2L = d2s / s[..., None, None] - ds[..., :, None] * ds[..., None, :] / (s * s)[..., None, None]
    return L, dL, d2L


def _log_gauss(k: np.ndarray):
    n = k.shape[-1]
    L = np.mean(np.log(k), axis=-1)
    dL = 1.0 / (n * k)
    d2L = np.zeros(k.shape + (n,))
    idx = np.arange(n)
    d2L[..., idx, idx] = -1.0 / (n * k * k)
    return L, dL, d2L


def _log_normalized(spec: CurvatureSpec, k: np.ndarray):
    """log of the degree-one normalization and its derivatives."""
    n = k.shape[-1]
    fam = spec.family
    if fam is Family.GAUSS_ROOT:
        return _log_gauss(k)
    if fam is Family.MEAN:
        return _log_sigma(k, 1, float(n))
    if fam is Family.SCALAR_ROOT:
        L, dL, d2L = _log_sigma(k, 2, math.comb(n, 2))
        return 0.5 * L, 0.5 * dL, 0.5 * d2L
    if fam is Family.QUOTIENT:
        La, dLa, d2La = _log_sigma(k, n)
        Lb, dLb, d2Lb = _log_sigma(k, n - 1)
        return La - Lb, dLa - dLb, d2La - d2Lb
    if fam is Family.PRODUCT_GK:
        if spec.g == "sigma1":
            Lg, dLg, d2Lg = _log_sigma(k, 1)
        else:
            Lg, dLg, d2Lg = _log_sigma(k, 2, math.comb(n, 2))
            Lg, dLg, d2Lg = 0.5 * Lg, 0.5 * dLg, 0.5 * d2Lg
        Lk, dLk, d2Lk = _log_gauss(k)
        # log K = n * mean(log kappa)
        deg = 1.0 + n * spec.a
        a_n = spec.a * n
        return (Lg + a_n * Lk) / deg, (dLg + a_n * dLk) / deg, (d2Lg + a_n * d2Lk) / deg
    raise ParameterError(f"unsupported family {fam}")


def _as_kappa(kappa) -> np.ndarray:
    if isinstance(kappa, PrincipalTuple):
        return kappa.array()
    return np.sort(np.asarray(kappa, dtype=float), axis=-1)


def _check_cone(spec: CurvatureSpec, k: np.ndarray) -> None:
    bad = ~(k > spec.kappa_min)
    if np.any(bad):
        where = np.argwhere(bad)[0]
        offending = k[tuple(where[:-1])]
        raise CurvatureDomainError(
            f"kappa outside the positive cone (kappa_{where[-1] + 1} = "
            f"{offending[where[-1]]:.6g} <= {spec.kappa_min:g})",
            kappa=offending.copy(),
            index=tuple(int(i) for i in where),
        )


def F_and_grad(spec: CurvatureSpec, kappa: np.ndarray):
    """Vectorized ``F`` and ``F_i`` over leading axes (no sorting)."""
    k = np.asarray(kappa, dtype=float)
    spec.check_dim(k.shape[-1])
    _check_cone(spec, k)
    L, dL, _ = _log_normalized(spec, k)
    d = spec.degree(k.shape[-1])
    F = np.exp(d * L)
    return F, (d * F)[..., None] * dL


def F_grad_hess(spec: CurvatureSpec, kappa: np.ndarray):
    """Vectorized ``F``, ``F_i`` and ``F_ij``."""
    k = np.asarray(kappa, dtype=float)
    spec.check_dim(k.shape[-1])
    _check_cone(spec, k)
    L, dL, d2L = _log_normalized(spec, k)
    d = spec.degree(k.shape[-1])
    F = np.exp(d * L)
    grad = (d * F)[..., None] * dL
    hess = F[..., None, None] * (d * d * dL[..., :, None] * dL[..., None, :] + d * d2L)
    return F, grad, hess


def eval_F(spec: CurvatureSpec, kappa) -> FValue:
    """Evaluate ``F`` and its gradient at one principal-curvature tuple."""
    k = _as_kappa(kappa)
    if k.ndim != 1:
        raise ParameterError("eval_F takes a single tuple; use F_and_grad for batches")
    F, grad = F_and_grad(spec, k)
    return FValue(F=float(F), F_i=grad, H=float(k.sum()))


def _divided_differences(k: np.ndarray, grad: np.ndarray, hess: np.ndarray) -> np.ndarray:
    """(F_i - F_j)/(k_i - k_j) with the analytic limit F_ii - F_ij on near-ties."""
    n = k.shape[-1]
    scale = np.linalg.norm(k, axis=-1)[..., None, None]
    dk = k[..., :, None] - k[..., None, :]
    dg = grad[..., :, None] - grad[..., None, :]
    diag = np.diagonal(hess, axis1=-2, axis2=-1)
    limit = 0.5 * (diag[..., :, None] + diag[..., None, :]) - hess
    close = np.abs(dk) < DEGENERATE_GAP * scale
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(close, limit, dg / np.where(close, 1.0, dk))
    q[..., np.arange(n), np.arange(n)] = 0.0
    return q


def _contract(k, grad, hess, eta) -> np.ndarray:
    eta_d = np.diagonal(eta, axis1=-2, axis2=-1)
    first = np.einsum("...i,...ij,...j->...", eta_d, hess, eta_d)
    second = np.sum(_divided_differences(k, grad, hess) * eta * eta, axis=(-2, -1))
    return first + second


def hessian_contract(spec: CurvatureSpec, kappa, eta) -> float:
    """Second derivative of ``F`` on symmetric matrices, contracted twice with ``eta``.

    ``kappa`` is taken as the diagonal of ``h`` in the order given (no sorting),
    so ``eta`` refers to the same basis.
    """
    k = np.asarray(kappa.kappa if isinstance(kappa, PrincipalTuple) else kappa, float)
    eta = np.asarray(eta, dtype=float)
    n = k.shape[-1]
    if eta.shape[-2:] != (n, n):
        raise ParameterError(f"eta must be {n}x{n}")
    if not np.allclose(eta, np.swapaxes(eta, -1, -2), rtol=0, atol=1e-14 * max(1.0, np.abs(eta).max())):
        raise ParameterError("eta must be symmetric")
    _, grad, hess = F_grad_hess(spec, k)
    return float(_contract(k, grad, hess, eta))


# --- certification ----------------------------------------------------------


def sample_cone(n: int, samples: int, rng: np.random.Generator,
                low: float = 1e-2, high: float = 1e2) -> np.ndarray:
    """Log-uniform samples of the positive cone, shape (samples, n), rows ascending."""
    logs = rng.uniform(math.log(low), math.log(high), size=(samples, n))
    return np.sort(np.exp(logs), axis=-1)


@dataclass
class ConditionResult:
    name: str
    passed: bool
    worst_margin: float
    witness: dict | None = None
    note: str = ""


@dataclass
class CertReport:
    spec: CurvatureSpec
    n: int
    samples: int
    seed: int
    conditions: dict[str, ConditionResult] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.conditions.values())

    def failed(self) -> list[str]:
        return [name for name, c in self.conditions.items() if not c.passed]


def _aitken_limit(y: np.ndarray) -> np.ndarray:
    """Delta-squared extrapolation of three-term sequences along the last axis."""
    d1 = y[..., 1] - y[..., 0]
    d2 = y[..., 2] - y[..., 1]
    denom = d2 - d1
    ok = np.abs(denom) > 1e-14 * np.maximum(np.abs(y[..., 0]), 1e-300)
    with np.errstate(divide="ignore", invalid="ignore"):
        lim = np.where(ok, y[..., 2] - d2 * d2 / np.where(ok, denom, 1.0), y[..., 2])
    return np.abs(lim)


def boundary_limits(spec: CurvatureSpec, kappa: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Extrapolated F when one curvature collapses, relative to the uncollapsed value.

    Returns ``(ratio, collapsed)`` with shapes (m, n) and (m, n, n); entry
    ``[s, i]`` sends curvature ``i`` of sample ``s`` to zero.
    """
    m, n = kappa.shape
    kmax = kappa.max(axis=-1)
    probes = np.repeat(kappa[:, None, None, :], n, axis=1).repeat(len(BOUNDARY_EPS), axis=2)
    for i in range(n):
        for e, eps in enumerate(BOUNDARY_EPS):
            probes[:, i, e, i] = eps * kmax
    F = F_and_grad(spec, np.sort(probes, axis=-1))[0]
    ref_k = kappa[:, None, :].repeat(n, axis=1).copy()
    for i in range(n):
        ref_k[:, i, i] = kmax
    F_ref = F_and_grad(spec, np.sort(ref_k, axis=-1))[0]
    return _aitken_limit(F) / F_ref, probes[:, :, -1, :]


def _random_symmetric(rng: np.random.Generator, m: int, n: int) -> np.ndarray:
    a = rng.standard_normal((m, n, n))
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def concavity_margin(spec: CurvatureSpec, kappa: np.ndarray, eta: np.ndarray):
    """RHS - LHS of the class-(K) concavity inequality at diagonal points.

    Returns ``(margin, scale)`` where ``scale`` bounds the magnitude of the
    terms involved (for round-off aware tolerances).
    """
    F, grad, hess = F_grad_hess(spec, kappa)
    lhs = _contract(kappa, grad, hess, eta)
    trace = np.einsum("...i,...ii->...", grad, eta)
    first = trace * trace / F
    second = np.einsum("...i,...ij,...j->...", grad, eta * eta, 1.0 / kappa)
    return first - second - lhs, np.abs(lhs) + first + second


def check_classK(spec: CurvatureSpec, samples: int = 1000, seed: int = 0, n: int = 2,
                 fd_tol: float = 1e-6) -> CertReport:
    """Sample-based certification of the class-(K) conditions.

    Checks positivity of ``F_i``, vanishing on the cone boundary, and the
    concavity inequality with random symmetric ``eta``.  A finite-difference
    cross-check of the analytic gradient is included.  Failures carry a
    witness and are report outcomes, not exceptions.
    """
    from . import oracles

    if samples < 1:
        raise ParameterError("samples must be >= 1")
    spec.check_dim(n)
    rng = np.random.default_rng(seed)
    kappa = sample_cone(n, samples, rng)
    report = CertReport(spec=spec, n=n, samples=samples, seed=seed)

    F, grad = F_and_grad(spec, kappa)
    pos = grad * kappa / F[:, None]
    s = int(np.argmin(pos.min(axis=-1)))
    report.conditions["monotonicity"] = ConditionResult(
        "monotonicity", bool(np.all(grad > 0)), float(pos.min()),
        witness={"kappa": kappa[s].tolist(), "F_i": grad[s].tolist()},
    )

    ratio, collapsed = boundary_limits(spec, kappa)
    s, i = np.unravel_index(int(np.argmax(ratio)), ratio.shape)
    report.conditions["boundary_vanishing"] = ConditionResult(
        "boundary_vanishing", bool(ratio.max() <= BOUNDARY_TOL), float(ratio.max()),
        witness={"kappa": np.sort(collapsed[s, i]).tolist(), "extrapolated_ratio": float(ratio[s, i])},
        note=f"extrapolated F/F_ref when one curvature -> 0 (tolerance {BOUNDARY_TOL:g})",
    )

    eta = _random_symmetric(rng, samples, n)
    margin, scale = concavity_margin(spec, kappa, eta)
    tol = 1e-8 * np.maximum(1.0, scale)
    s = int(np.argmin(margin / tol))
    eq_margin, eq_scale = concavity_margin(spec, kappa, kappa[:, :, None] * np.eye(n))
    report.conditions["concavity"] = ConditionResult(
        "concavity", bool(np.all(margin >= -tol)), float(margin.min()),
        witness={"kappa": kappa[s].tolist(), "eta": eta[s].tolist(), "margin": float(margin[s])},
        note=f"equality case eta = diag(kappa): max |margin| = {np.abs(eq_margin).max():.3g}",
    )

    fd = oracles.fd_gradient_F(spec, kappa)
    rel = np.abs(fd - grad) / np.abs(grad)
    s = int(np.argmax(rel.max(axis=-1)))
    report.conditions["gradient_fd"] = ConditionResult(
        "gradient_fd", bool(rel.max() <= fd_tol), float(rel.max()),
        witness={"kappa": kappa[s].tolist()},
        note="max relative deviation of analytic F_i from central differences",
    )
    return report


@dataclass
class Eps0Report:
    spec: CurvatureSpec
    n: int
    samples: int
    seed: int
    r1: float  # min over samples of min_i F_i H / (n F)
    r2: float  # min over samples of min_i F_i kappa_i / F
    r3: float  # min over samples of F^{ij} h_ik h^k_j / (F H)
    r2_max: float
    implication_holds: bool
    implication_worst: float
    chain_holds: bool
    chain_worst: float
    classK_passed: bool

    @property
    def positive(self) -> dict[str, bool]:
        return {"gradient_trace": self.r1 > 0, "euler_component": self.r2 > 0,
                "curvature_square": self.r3 > 0}


def eps0_ratios(spec: CurvatureSpec, kappa: np.ndarray):
    """Per-sample ratios (r1, r2, r3) at diagonal points ``kappa`` (ascending rows)."""
    n = kappa.shape[-1]
    F, grad = F_and_grad(spec, kappa)
    H = kappa.sum(axis=-1)
    r1 = (grad * H[:, None]).min(axis=-1) / (n * F)
    r2 = (grad * kappa).min(axis=-1) / F
    r3 = (grad * kappa * kappa).sum(axis=-1) / (F * H)
    return r1, r2, r3, F, grad


def estimate_eps0(spec: CurvatureSpec, samples: int = 1000, seed: int = 0, n: int = 2,
                  check: bool = True) -> Eps0Report:
    """Sampled infima of the three structural ratios and the two implications between them."""
    if samples < 1:
        raise ParameterError("samples must be >= 1")
    spec.check_dim(n)
    classK = True
    if check:
        classK = check_classK(spec, samples=min(samples, 200), seed=seed, n=n).passed
        if not classK:
            warnings.warn(f"{spec.describe()} fails the class-(K) checks; ratios reported anyway",
                          stacklevel=2)
    rng = np.random.default_rng(seed)
    kappa = sample_cone(n, samples, rng)
    r1, r2, r3, F, grad = eps0_ratios(spec, kappa)
    implication = r1 - r3
    # largest curvature is the last column (rows ascending)
    Fk = grad * kappa
    H = kappa.sum(axis=-1)
    link_a = Fk.min(axis=-1) - Fk[:, -1]                  # F_i k_i >= F_n k_n
    link_b = Fk[:, -1] - grad[:, -1] * H / n              # F_n k_n >= F_n H / n
    link_c = grad[:, -1] * H / n - r1 * F                 # F_n H / n >= eps F
    chain = np.minimum(np.minimum(link_a, link_b), link_c) / F
    return Eps0Report(
        spec=spec, n=n, samples=samples, seed=seed,
        r1=float(r1.min()), r2=float(r2.min()), r3=float(r3.min()), r2_max=float(r2.max()),
        implication_holds=bool(np.all(implication <= 1e-8)),
        implication_worst=float(implication.max()),
        chain_holds=bool(np.all(chain >= -1e-10)),
        chain_worst=float(chain.min()),
        classK_passed=classK,
    )
