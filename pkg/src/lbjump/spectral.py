"""Finite-state generator assembly and spectral certificates.

The generator of a locally-balanced jump process on m states is
L_ij = g(t(i,j)) * gamma_ij off the diagonal, with rows summing to zero.
Because the weighted jump measure is pi-reversible, D^{1/2} (-L) D^{-1/2}
(D = diag(pi)) is symmetric positive semidefinite and every quantity here —
spectral gaps, semigroup evolution, decay certificates — reduces to one dense
symmetric eigendecomposition.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .balancing import BalancingSpec
from .errors import (
    DimensionMismatch,
    EigenFailure,
    PremiseViolated,
    SupportMismatch,
)
from .models import FiniteKernel, FiniteTarget, RatioOracle
from .reports import CertReport

__all__ = [
    "GeneratorMatrix",
    "MHKernel",
    "GapReport",
    "build_generator",
    "mh_kernel",
    "dirichlet_form",
    "dirichlet_form_edges",
    "spectral_gap",
    "mh_gap",
    "evolve_distribution",
    "tv_distance",
    "chi_squared",
    "gap_sandwich_check",
    "comparison_check",
    "tv_decay_check",
    "random_reversible_instance",
]

_ATOL = 1e-12


@dataclass(frozen=True)
class GeneratorMatrix:
    """Dense rate matrix with its stationary vector."""

    L: np.ndarray
    pi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "L", np.asarray(self.L, dtype=float))
        object.__setattr__(self, "pi", np.asarray(self.pi, dtype=float))
        self.validate()

    def validate(self, atol: float = _ATOL) -> None:
        L, pi = self.L, self.pi
        if L.shape != (pi.size, pi.size):
            raise DimensionMismatch("generator and stationary vector sizes differ")
        if np.max(np.abs(L.sum(axis=1))) > atol:
            raise ValueError("generator rows must sum to 0")
        off = L - np.diag(np.diag(L))
        if np.min(off) < -atol:
            raise ValueError("off-diagonal rates must be nonnegative")
        if np.max(np.abs(pi[:, None] * L - (pi[:, None] * L).T)) > atol:
            raise ValueError("generator is not pi-reversible")

    @property
    def size(self) -> int:
        return self.pi.size


@dataclass(frozen=True)
class MHKernel:
    """Accept-reject transition matrix with acceptance min(1, t)."""

    P: np.ndarray
    pi: np.ndarray

    def __post_init__(self):
        P, pi = np.asarray(self.P, dtype=float), np.asarray(self.pi, dtype=float)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "pi", pi)
        if np.max(np.abs(P.sum(axis=1) - 1.0)) > _ATOL:
            raise ValueError("transition rows must sum to 1")
        flux = pi[:, None] * P
        if np.max(np.abs(flux - flux.T)) > _ATOL:
            raise ValueError("kernel is not pi-reversible")


@dataclass(frozen=True)
class GapReport:
    """Spectral gap with the full spectrum and the achieving test function."""

    gap: float
    spectrum: np.ndarray
    test_function: np.ndarray | None = field(default=None, repr=False)


def _log_ratio_matrix(target: FiniteTarget, kernel: FiniteKernel) -> np.ndarray:
    """log t(i, j) on the mutual support; -inf elsewhere."""
    if np.any(target.pi <= 0.0):
        raise SupportMismatch("spectral analysis needs pi > 0 on the whole space")
    with np.errstate(divide="ignore", invalid="ignore"):
        lp = np.log(target.pi)
        lg = np.log(kernel.matrix)
        log_t = lp[None, :] + lg.T - lp[:, None] - lg
    log_t[kernel.matrix <= 0.0] = -np.inf
    return log_t


def build_generator(
    target: FiniteTarget, kernel: FiniteKernel, g: BalancingSpec
) -> GeneratorMatrix:
    """L_ij = g(t(i,j)) * gamma_ij for i != j, diagonal fixed by zero row sums."""
    RatioOracle(target, kernel)  # runs the pairing validation
    m = target.size
    log_t = _log_ratio_matrix(target, kernel)
    L = np.zeros((m, m))
    for i in range(m):
        for j in range(m):
            if i != j and kernel.matrix[i, j] > 0.0 and np.isfinite(log_t[i, j]):
                L[i, j] = g(np.exp(log_t[i, j])) * kernel.matrix[i, j]
    np.fill_diagonal(L, -L.sum(axis=1))
    return GeneratorMatrix(L=L, pi=target.pi)


def mh_kernel(target: FiniteTarget, kernel: FiniteKernel) -> MHKernel:
    """Accept-reject chain P_ij = min(1, t(i,j)) * gamma_ij, rejection mass on
    the diagonal.  This is the discrete-time chain whose Dirichlet form the
    gap sandwich compares against."""
    m = target.size
    log_t = _log_ratio_matrix(target, kernel)
    P = np.zeros((m, m))
    for i in range(m):
        for j in range(m):
            if i != j and kernel.matrix[i, j] > 0.0 and np.isfinite(log_t[i, j]):
                P[i, j] = min(1.0, np.exp(log_t[i, j])) * kernel.matrix[i, j]
        P[i, i] = max(0.0, 1.0 - P[i].sum()) + kernel.matrix[i, i]
    # renormalize away the eps-level float slack so the row-sum invariant is exact
    P /= P.sum(axis=1, keepdims=True)
    return MHKernel(P=P, pi=target.pi)


def dirichlet_form(gen: GeneratorMatrix, f) -> float:
    """<f, -L f>_pi, the quadratic form governing L2 contraction."""
    f = np.asarray(f, dtype=float)
    if f.shape != (gen.size,):
        raise DimensionMismatch(f"f has shape {f.shape}, generator size {gen.size}")
    return float(-f @ (gen.pi * (gen.L @ f)))


def dirichlet_form_edges(gen: GeneratorMatrix, f) -> float:
    """Equivalent edge form (1/2) sum_ij (f_j - f_i)^2 pi_i L_ij; kept as an
    independent code path to cross-check :func:`dirichlet_form`."""
    f = np.asarray(f, dtype=float)
    if f.shape != (gen.size,):
        raise DimensionMismatch(f"f has shape {f.shape}, generator size {gen.size}")
    diff = f[None, :] - f[:, None]
    W = gen.pi[:, None] * gen.L
    np.fill_diagonal(W, 0.0)
    return float(0.5 * np.sum(diff**2 * W))


def _symmetric_eig(neg_op: np.ndarray, pi: np.ndarray):
    """Eigendecomposition of D^{1/2} A D^{-1/2} for a pi-reversible A >= 0."""
    root = np.sqrt(pi)
    S = (root[:, None] * neg_op) / root[None, :]
    S = 0.5 * (S + S.T)
    try:
        vals, vecs = np.linalg.eigh(S)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(str(exc)) from exc
    return vals, vecs, root


def spectral_gap(gen: GeneratorMatrix) -> GapReport:
    """Gap of -L: the second-smallest eigenvalue of the pi-symmetrized
    negative generator, which on a finite space equals the variational
    infimum of Dirichlet form over variance."""
    vals, vecs, root = _symmetric_eig(-gen.L, gen.pi)
    order = np.argsort(vals)
    gap_idx = order[1]
    f = vecs[:, gap_idx] / root
    return GapReport(gap=float(vals[gap_idx]), spectrum=vals[order], test_function=f)


def mh_gap(kern: MHKernel) -> GapReport:
    """Dirichlet-form gap of the accept-reject chain: second-smallest
    eigenvalue of I - P in the pi inner product.  This matches the
    variational comparison the sandwich certificate uses; discrete-time
    periodicity effects (eigenvalues near -1) are irrelevant to it."""
    m = kern.pi.size
    vals, vecs, root = _symmetric_eig(np.eye(m) - kern.P, kern.pi)
    order = np.argsort(vals)
    gap_idx = order[1]
    f = vecs[:, gap_idx] / root
    return GapReport(gap=float(vals[gap_idx]), spectrum=vals[order], test_function=f)


def evolve_distribution(gen: GeneratorMatrix, mu0, t: float) -> np.ndarray:
    """mu0^T exp(tL) via the symmetrized eigendecomposition (exact for
    reversible L, no scaling-and-squaring error analysis needed)."""
    mu0 = np.asarray(mu0, dtype=float)
    vals, vecs, root = _symmetric_eig(-gen.L, gen.pi)
    w = mu0 / root
    mu_t = root * (vecs @ (np.exp(-t * vals) * (vecs.T @ w)))
    return mu_t


def tv_distance(p, q) -> float:
    return float(0.5 * np.sum(np.abs(np.asarray(p) - np.asarray(q))))


def chi_squared(mu, pi) -> float:
    """chi^2(mu || pi) = sum (mu_i/pi_i - 1)^2 pi_i on the support of pi."""
    mu, pi = np.asarray(mu, dtype=float), np.asarray(pi, dtype=float)
    if np.any((pi == 0.0) & (mu > 0.0)):
        raise SupportMismatch("mu puts mass where pi has none")
    mask = pi > 0.0
    return float(np.sum((mu[mask] / pi[mask] - 1.0) ** 2 * pi[mask]))


def gap_sandwich_check(
    target: FiniteTarget,
    kernel: FiniteKernel,
    g: BalancingSpec,
    tol: float = 1e-9,
) -> CertReport:
    """Certify Gap(L) >= Gap(P) >= Gap(L)/sup g for bounded nondecreasing g,
    where P is the min(1,t) accept-reject chain on the same proposal."""
    from .jumprate import rate_bound

    lam_bar = rate_bound(g)
    gap_L = spectral_gap(build_generator(target, kernel, g)).gap
    gap_P = mh_gap(mh_kernel(target, kernel)).gap
    failures = []
    if not gap_L >= gap_P - tol:
        failures.append(f"Gap(L) = {gap_L!r} < Gap(P) = {gap_P!r}")
    if not gap_P >= gap_L / lam_bar - tol:
        failures.append(f"Gap(P) = {gap_P!r} < Gap(L)/sup g = {gap_L / lam_bar!r}")
    return CertReport(
        name=f"gap_sandwich[{g.name}]",
        ok=not failures,
        values={"gap_L": gap_L, "gap_P": gap_P, "lambda_bar": lam_bar},
        failures=failures,
    )


def comparison_check(
    target: FiniteTarget,
    kernel: FiniteKernel,
    g1: BalancingSpec,
    g2: BalancingSpec,
    omega: float,
    tol: float = 1e-9,
) -> CertReport:
    """Certify gap(L1) >= omega * gap(L2) after verifying the pointwise
    premise g1 >= omega*g2 on every ratio the model actually realizes."""
    log_t = _log_ratio_matrix(target, kernel)
    realized = np.exp(log_t[np.isfinite(log_t) & ~np.eye(target.size, dtype=bool)])
    bad = [t for t in realized if g1(t) < omega * g2(t) - 1e-15 * max(1.0, g2(t))]
    if bad:
        raise PremiseViolated(
            f"g1 >= {omega}*g2 fails at realized ratios {sorted(set(bad))[:5]}"
        )
    gap1 = spectral_gap(build_generator(target, kernel, g1)).gap
    gap2 = spectral_gap(build_generator(target, kernel, g2)).gap
    ok = gap1 >= omega * gap2 - tol
    return CertReport(
        name=f"gap_comparison[{g1.name}>={omega}*{g2.name}]",
        ok=ok,
        values={"gap_1": gap1, "gap_2": gap2, "omega": omega},
        failures=[] if ok else [f"gap1 = {gap1!r} < omega*gap2 = {omega * gap2!r}"],
    )


def tv_decay_check(
    gen: GeneratorMatrix, mu0, times, tol: float = 1e-9
) -> CertReport:
    """Certify ||mu0 exp(tL) - pi||_TV <= (1/2) chi^2(mu0||pi)^{1/2} e^{-gap t}
    at each requested time."""
    mu0 = np.asarray(mu0, dtype=float)
    chi = chi_squared(mu0, gen.pi)
    gap = spectral_gap(gen).gap
    failures = []
    curve = []
    for t in times:
        tv = tv_distance(evolve_distribution(gen, mu0, t), gen.pi)
        bound = 0.5 * np.sqrt(chi) * np.exp(-gap * t)
        curve.append((float(t), tv, float(bound)))
        if tv > bound + tol:
            failures.append(f"t = {t}: TV = {tv!r} > bound = {bound!r}")
    return CertReport(
        name="tv_decay",
        ok=not failures,
        values={"gap": gap, "chi2": chi, "curve": curve},
        failures=failures,
    )


def random_reversible_instance(
    m: int, rng: np.random.Generator, min_entry: float = 1e-6
) -> tuple[FiniteTarget, FiniteKernel]:
    """Random finite test instance: Dirichlet(1,..,1) target and a proposal
    built by symmetrizing a random stochastic matrix and renormalizing rows.

    Instances with off-diagonal proposal mass below ``min_entry`` are
    redrawn: near-zero mutual entries make the ratio matrix ill-conditioned
    without exercising anything new.
    """
    for _ in range(200):
        pi = rng.dirichlet(np.ones(m))
        A = rng.random((m, m))
        np.fill_diagonal(A, 0.0)
        A /= A.sum(axis=1, keepdims=True)
        S = 0.5 * (A + A.T)
        S /= S.sum(axis=1, keepdims=True)
        off = S[~np.eye(m, dtype=bool)]
        if off.min() >= min_entry and pi.min() > 1e-6:
            return FiniteTarget(pi), FiniteKernel(S)
    raise RuntimeError("could not draw an acceptable random instance")
