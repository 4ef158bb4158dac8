"""Gain synthesis and the Lyapunov certificate of the tracking/observation errors.

With e = x - s and e_hat = x_hat - x the closed loop obeys

    e_tilde(k+1) = A_tilde e_tilde(k) + b_tilde (f(x) - mu(x_hat)) - theta_tilde v(k)

    A_tilde = [[A + b phi^T, b phi^T], [0, A + theta c^T]]
    b_tilde = (b; -b),  theta_tilde = (0; theta)

Gains are placed with Ackermann's formula. A Lyapunov matrix P for A_tilde
yields the ultimate bound on |e| and |e_hat| whenever xi0 > 0. All matrix
norms are spectral norms.
"""
import math
import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from ..errors import InputError, SynthesisError, InfeasibleError, NumericalError
from . import signals

logger = logging.getLogger(__name__)

POLE_TOLERANCE = 1e-8
LYAPUNOV_RESIDUAL_TOLERANCE = 1e-9
SYMMETRY_TOLERANCE = 1e-10

# Kronecker systems beyond this dimension go to scipy's solver
KRONECKER_MAX_DIM = 20


def build_matrices(n, T):
    """A, b, c of the integrator chain of order n and step T."""
    if int(n) != n or n < 1:
        raise InputError("order must be a positive integer, got {!r}".format(n))
    if not T > 0:
        raise InputError("step must be positive, got {!r}".format(T))
    A = np.eye(n) + T * np.eye(n, k=1)
    A[n - 1, n - 1] = 0.0
    b = np.zeros(n)
    b[-1] = 1.0
    c = np.zeros(n)
    c[0] = 1.0
    return A, b, c


def controllability_matrix(A, b):
    n = A.shape[0]
    cols = [b]
    for _ in range(n - 1):
        cols.append(A @ cols[-1])
    return np.column_stack(cols)


def observability_matrix(A, c):
    return controllability_matrix(A.T, c).T


def _check_poles(poles, n):
    poles = np.asarray(poles, dtype=complex).reshape(-1)
    if poles.shape[0] != n:
        raise InputError("{} poles requested for a system of order {}".format(poles.shape[0], n))
    if not np.allclose(np.sort_complex(poles), np.sort_complex(poles.conj())):
        raise InputError("poles must be closed under complex conjugation")
    outside = poles[np.abs(poles) >= 1]
    if outside.size:
        logger.warning("poles %s are not inside the unit disk; the certificate will be infeasible",
                       outside)
        signals.pole_outside_unit_disk.send(None, poles=outside.tolist())
    return poles


def _matrix_polynomial(A, coefficients):
    """p(A) by Horner's rule, coefficients highest power first."""
    result = np.zeros_like(A)
    for a in coefficients:
        result = result @ A + a * np.eye(A.shape[0])
    return result


def place_controller(A, b, poles):
    """phi such that A + b phi^T has the requested spectrum (Ackermann)."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float).reshape(-1)
    n = A.shape[0]
    if A.shape != (n, n) or b.shape != (n,):
        raise InputError("matrix dimensions are incorrect")
    poles = _check_poles(poles, n)

    C = controllability_matrix(A, b)
    if np.linalg.matrix_rank(C) < n:
        raise SynthesisError("pair (A, b) is not controllable")

    coefficients = np.real(np.poly(poles))
    e_n = np.zeros(n)
    e_n[-1] = 1.0
    # e_n^T C^-1 as a vector
    w = np.linalg.solve(C.T, e_n)
    K = _matrix_polynomial(A, coefficients).T @ w
    return -K


def place_observer(A, c, poles):
    """theta such that A + theta c^T has the requested spectrum."""
    A = np.asarray(A, dtype=float)
    c = np.asarray(c, dtype=float).reshape(-1)
    try:
        return place_controller(A.T, c, poles)
    except SynthesisError:
        raise SynthesisError("pair (A, c^T) is not observable")


def pole_error(matrix, poles):
    """Multiset distance between the spectrum of `matrix` and `poles`.

    Eigenvalues are matched greedily to their nearest unmatched pole.
    """
    eigs = list(np.linalg.eigvals(matrix))
    remaining = list(np.asarray(poles, dtype=complex).reshape(-1))
    worst = 0.0
    for eig in sorted(eigs, key=lambda z: (z.real, z.imag)):
        i = int(np.argmin([abs(eig - p) for p in remaining]))
        worst = max(worst, abs(eig - remaining.pop(i)))
    return worst


@dataclass(frozen=True, eq=False)
class GainSet:
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    phi: np.ndarray
    theta: np.ndarray
    controller_poles: tuple
    observer_poles: tuple
    A_tilde: np.ndarray = None
    b_tilde: np.ndarray = None
    theta_tilde: np.ndarray = None

    @property
    def order(self):
        return self.A.shape[0]

    @property
    def closed_loop(self):
        """A + b phi^T"""
        return self.A + np.outer(self.b, self.phi)

    @property
    def observer_matrix(self):
        """A + theta c^T"""
        return self.A + np.outer(self.theta, self.c)

    def pole_errors(self):
        return {
            "controller": pole_error(self.closed_loop, self.controller_poles),
            "observer": pole_error(self.observer_matrix, self.observer_poles),
        }

    def to_dict(self):
        return {
            "A": self.A.tolist(),
            "b": self.b.tolist(),
            "c": self.c.tolist(),
            "phi": self.phi.tolist(),
            "theta": self.theta.tolist(),
            "controller_poles": _poles_to_json(self.controller_poles),
            "observer_poles": _poles_to_json(self.observer_poles),
            "A_tilde": self.A_tilde.tolist(),
            "b_tilde": self.b_tilde.tolist(),
            "theta_tilde": self.theta_tilde.tolist(),
            "pole_errors": self.pole_errors(),
        }


def _poles_to_json(poles):
    return [p.real if p.imag == 0 else [p.real, p.imag] for p in np.asarray(poles, dtype=complex)]


def assemble_concatenated(gains):
    """(A_tilde, b_tilde, theta_tilde) of the concatenated error dynamics."""
    n = gains.order
    bphi = np.outer(gains.b, gains.phi)
    A_tilde = np.block([
        [gains.closed_loop, bphi],
        [np.zeros((n, n)), gains.observer_matrix],
    ])
    b_tilde = np.concatenate([gains.b, -gains.b])
    theta_tilde = np.concatenate([np.zeros(n), gains.theta])
    return A_tilde, b_tilde, theta_tilde


def make_gains(A, b, c, phi, theta, controller_poles=(), observer_poles=()):
    """GainSet from given gains, concatenated matrices filled in."""
    partial = GainSet(
        A=np.asarray(A, dtype=float), b=np.asarray(b, dtype=float),
        c=np.asarray(c, dtype=float), phi=np.asarray(phi, dtype=float),
        theta=np.asarray(theta, dtype=float),
        controller_poles=tuple(np.asarray(controller_poles, dtype=complex)),
        observer_poles=tuple(np.asarray(observer_poles, dtype=complex)))
    A_tilde, b_tilde, theta_tilde = assemble_concatenated(partial)
    return GainSet(
        A=partial.A, b=partial.b, c=partial.c, phi=partial.phi, theta=partial.theta,
        controller_poles=partial.controller_poles, observer_poles=partial.observer_poles,
        A_tilde=A_tilde, b_tilde=b_tilde, theta_tilde=theta_tilde)


def synthesize(n, T, controller_poles, observer_poles):
    A, b, c = build_matrices(n, T)
    phi = place_controller(A, b, controller_poles)
    theta = place_observer(A, c, observer_poles)
    gains = make_gains(A, b, c, phi, theta, controller_poles, observer_poles)
    errors = gains.pole_errors()
    if max(errors.values()) > POLE_TOLERANCE:
        raise NumericalError("placed spectra miss the requested poles by {}".format(errors))
    logger.info("synthesized phi=%s theta=%s", phi, theta)
    return gains


def spectral_radius(M):
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def solve_discrete_lyapunov(A_tilde, Q, max_kronecker_dim=KRONECKER_MAX_DIM):
    """P solving A^T P A - P = -Q for Schur A."""
    A_tilde = np.asarray(A_tilde, dtype=float)
    Q = np.asarray(Q, dtype=float)
    m = A_tilde.shape[0]
    if A_tilde.shape != (m, m) or Q.shape != (m, m):
        raise InputError("matrix dimensions are incorrect")
    if not np.allclose(Q, Q.T):
        raise InputError("Q must be symmetric")

    rho = spectral_radius(A_tilde)
    if rho >= 1:
        raise InfeasibleError("error dynamics are not Schur (spectral radius {:.6g})".format(rho))

    if m <= max_kronecker_dim:
        # row-major vec(A^T P A) = (A^T kron A^T) vec(P)
        At = A_tilde.T
        system = np.eye(m * m) - np.kron(At, At)
        P = np.linalg.solve(system, Q.reshape(-1)).reshape(m, m)
    else:
        P = linalg.solve_discrete_lyapunov(A_tilde.T, Q)

    scale = max(1.0, float(np.max(np.abs(P))))
    asymmetry = float(np.max(np.abs(P - P.T)))
    if asymmetry > SYMMETRY_TOLERANCE * scale:
        raise NumericalError("Lyapunov solution is asymmetric by {:.3e}".format(asymmetry))
    P = (P + P.T) / 2

    residual = lyapunov_residual(A_tilde, P, Q)
    if residual > LYAPUNOV_RESIDUAL_TOLERANCE * scale:
        raise NumericalError("Lyapunov residual {:.3e} exceeds tolerance".format(residual))
    return P


def lyapunov_residual(A_tilde, P, Q):
    return float(np.max(np.abs(A_tilde.T @ P @ A_tilde - P + Q)))


@dataclass(frozen=True, eq=False)
class StabilityCertificate:
    P: np.ndarray
    Q: np.ndarray
    xi0: float
    xi1: float
    xi2: float
    xi: float
    xi_statement: float
    chi: float
    P_bar: float
    L_f: float
    beta: float
    v_bar: float
    tracking_bound: float
    observation_bound: float
    conservative_bound: float
    residual: float
    feasible: bool

    def to_dict(self):
        return {
            "P": self.P.tolist(),
            "Q": self.Q.tolist(),
            "xi0": self.xi0,
            "xi1": self.xi1,
            "xi2": self.xi2,
            "xi": self.xi,
            "xi_statement": self.xi_statement,
            "chi": self.chi,
            "P_bar": self.P_bar,
            "L_f": self.L_f,
            "beta": self.beta,
            "v_bar": self.v_bar,
            "tracking_bound": self.tracking_bound,
            "observation_bound": self.observation_bound,
            "conservative_bound": self.conservative_bound,
            "lyapunov_residual": self.residual,
            "feasible": self.feasible,
        }


def certificate(gains, Q, L_f, beta, v_bar, P_bar, max_kronecker_dim=KRONECKER_MAX_DIM):
    """Ultimate bounds on |e| and |e_hat| from the Lyapunov matrix of A_tilde.

    xi0 <= 0 is not an error: the certificate comes back with feasible=False
    and no bounds.
    """
    Q = np.asarray(Q, dtype=float)
    values = [L_f, beta, v_bar, P_bar]
    if not all(math.isfinite(a) and a >= 0 for a in values):
        raise InputError("L_f, beta, v_bar and P_bar must be finite and non-negative")
    if np.any(np.linalg.eigvalsh(Q) <= 0):
        raise InputError("Q must be positive definite")

    A_tilde = gains.A_tilde
    P = solve_discrete_lyapunov(A_tilde, Q, max_kronecker_dim)
    eig_P = np.linalg.eigvalsh(P)
    norm_P = float(np.linalg.norm(P, 2))
    norm_AtP = float(np.linalg.norm(A_tilde.T @ P, 2))
    norm_theta = float(np.linalg.norm(gains.theta))

    xi0 = float(np.min(np.linalg.eigvalsh(Q))) - 2 * math.sqrt(2) * L_f * norm_AtP - 2 * L_f ** 2 * norm_P
    xi1 = norm_AtP + 2 * beta * L_f * norm_P * P_bar + math.sqrt(2) * L_f * norm_P * norm_theta * v_bar
    xi2 = norm_P
    chi = math.sqrt(eig_P[-1] / eig_P[0])
    feasible = xi0 > 0

    if feasible:
        xi = (xi1 + math.sqrt(xi1 ** 2 + xi0 * xi2)) / xi0
        xi_statement = xi1 / xi0 + math.sqrt(1 + xi2 / xi0)
        perturbation = math.sqrt(2) * beta * P_bar + norm_theta * v_bar
        bound = chi * xi * perturbation
        conservative = chi * max(xi, xi_statement) * perturbation
    else:
        xi = xi_statement = bound = conservative = None
        logger.warning("certificate infeasible: xi0 = %.6g", xi0)

    cert = StabilityCertificate(
        P=P, Q=Q, xi0=xi0, xi1=xi1, xi2=xi2, xi=xi, xi_statement=xi_statement,
        chi=chi, P_bar=float(P_bar), L_f=float(L_f), beta=float(beta), v_bar=float(v_bar),
        tracking_bound=bound, observation_bound=bound, conservative_bound=conservative,
        residual=lyapunov_residual(A_tilde, P, Q), feasible=feasible)
    signals.certificate_computed.send(cert)
    return cert


def power_sup(model, domain, grid_per_dim, inflation=1.0):
    """Largest power-function value over a tensor grid of `domain`, times `inflation`.

    The result never exceeds the ceiling sqrt(max k(x, x)) times `inflation`.
    """
    if grid_per_dim < 2:
        raise InputError("grid_per_dim must be at least 2, got {!r}".format(grid_per_dim))
    grid = domain.grid(grid_per_dim)
    grid_max = float(np.max(model.power_many(grid)))
    logger.info("power function supremum over %d grid points: %.6g (ceiling %.6g)",
                grid.shape[0], grid_max, power_ceiling(model))
    return grid_max * inflation


def power_ceiling(model):
    return model.kernel.sigma_f
