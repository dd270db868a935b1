"""Student Kramers oscillator: a particle in a quartic potential with
velocity noise whose variance is quadratic in the velocity.

State ``(x, v)``; drift ``(v, -eta v - U'(x))`` with potential
``U(x) = -a x^4/4 - b x^3/3 - c x^2/2 - d x`` and velocity noise variance
``sigma^2(v) = alpha v^2 + beta v + gamma``.
"""

from dataclasses import astuple, dataclass

import numpy as np
from scipy import integrate

from ..errors import IntegrationError, InvalidInputError
from ..moments import LinearPearsonModel, QuadraticDiffusionSpec
from .split import SplitNonlinearModel

__all__ = [
    "SkParams",
    "SK_TRUE",
    "SK_INIT",
    "sk_potential",
    "sk_force",
    "sk_sigma2",
    "sk_drift",
    "sk_drift_jacobian",
    "sk_drift_hessian",
    "sk_diffusion_spec",
    "sk_split",
    "sk_equilibria",
    "sk_approx_invariant_densities",
    "skew_t_params",
    "lamperti",
    "lamperti_inverse",
    "lamperti_drift",
    "lamperti_drift_jacobian",
    "lamperti_drift_hessian",
]


@dataclass(frozen=True)
class SkParams:
    eta: float
    a: float
    b: float
    c: float
    d: float
    alpha: float
    beta: float
    gamma: float

    names = ("eta", "a", "b", "c", "d", "alpha", "beta", "gamma")

    def __post_init__(self):
        for name in self.names:
            value = float(getattr(self, name))
            if not np.isfinite(value):
                raise InvalidInputError(f"parameter {name} must be finite")
            object.__setattr__(self, name, value)

    def to_vector(self):
        return np.array(astuple(self), dtype=float)

    @classmethod
    def from_vector(cls, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (8,):
            raise InvalidInputError("Kramers parameter vector has 8 entries")
        return cls(*theta)

    def to_fields(self):
        return {f"sk.{n}": getattr(self, n) for n in self.names}

    @classmethod
    def from_fields(cls, fields):
        try:
            return cls(*(fields[f"sk.{n}"] for n in cls.names))
        except KeyError as exc:
            raise InvalidInputError(f"missing Kramers field {exc}") from None

    @property
    def discriminant(self):
        """``4 alpha gamma - beta^2``; positive when the noise never vanishes."""
        return 4.0 * self.alpha * self.gamma - self.beta ** 2

    def check(self):
        """Raise unless the parameters give a well-posed ergodic oscillator.

        Requires a confining potential, strictly positive noise variance and
        damping that dominates the multiplicative noise.
        """
        if not self.a < 0:
            raise InvalidInputError("quartic coefficient a must be negative")
        if self.alpha == 0 and self.beta == 0:
            if not self.gamma > 0:
                raise InvalidInputError("constant noise variance must be positive")
        elif not (self.alpha > 0 and self.discriminant > 0):
            raise InvalidInputError("noise variance must stay positive (alpha > 0, beta^2 < 4 alpha gamma)")
        if not self.alpha < 2 * self.eta:
            raise InvalidInputError("need alpha < 2 eta")
        return self


SK_TRUE = SkParams(eta=30.0, a=-125.0, b=40.0, c=150.0, d=-20.0, alpha=20.0, beta=-8.0, gamma=1280.8)
SK_INIT = SkParams(eta=50.0, a=-200.0, b=10.0, c=100.0, d=10.0, alpha=30.0, beta=-5.0, gamma=1000.0)


def sk_potential(p, x):
    x = np.asarray(x, dtype=float)
    return -p.a * x ** 4 / 4 - p.b * x ** 3 / 3 - p.c * x ** 2 / 2 - p.d * x


def sk_force(p, x):
    """``-U'(x) = a x^3 + b x^2 + c x + d``."""
    x = np.asarray(x, dtype=float)
    return ((p.a * x + p.b) * x + p.c) * x + p.d


def _force_prime(p, x):
    return (3 * p.a * x + 2 * p.b) * x + p.c


def sk_sigma2(p, v):
    v = np.asarray(v, dtype=float)
    return (p.alpha * v + p.beta) * v + p.gamma


def sk_drift(p, z):
    z = np.asarray(z, dtype=float)
    x, v = z[..., 0], z[..., 1]
    return np.stack([v, -p.eta * v + sk_force(p, x)], axis=-1)


def sk_drift_jacobian(p, z):
    z = np.asarray(z, dtype=float)
    x = z[..., 0]
    out = np.zeros(z.shape[:-1] + (2, 2))
    out[..., 0, 1] = 1.0
    out[..., 1, 0] = _force_prime(p, x)
    out[..., 1, 1] = -p.eta
    return out


def sk_drift_hessian(p, z):
    z = np.asarray(z, dtype=float)
    out = np.zeros(z.shape[:-1] + (2, 2, 2))
    out[..., 1, 0, 0] = 6 * p.a * z[..., 0] + 2 * p.b
    return out


def sk_diffusion_spec(p):
    alpha = np.zeros((4, 4))
    beta = np.zeros((4, 2))
    gamma = np.zeros(4)
    # vec index of entry (2, 2) is 3; vec(z z^T)[3] = v^2
    alpha[3, 3] = p.alpha
    beta[3, 1] = p.beta
    gamma[3] = p.gamma
    return QuadraticDiffusionSpec(alpha, beta, gamma)


def sk_split(p, mean_x, var_x):
    """Linearize the force around the well nearest the empirical mean.

    ``A = [[0, 1], [3a E[X^2] + 2b E[X] + c, -eta]]`` and ``b = (b_x, 0)``
    where ``b_x`` makes the linear force match the cubic one in mean. The
    remainder only touches the velocity and depends on ``x`` alone, so its
    flow is exact: ``(x, v) -> (x, v + h N2(x))``.
    """
    if var_x < 0:
        raise InvalidInputError("variance must be non-negative")
    second = var_x + mean_x ** 2
    slope = 3 * p.a * second + 2 * p.b * mean_x + p.c
    shift = p.b / (3 * p.a)
    radius = np.sqrt(var_x + (mean_x + shift) ** 2)
    roots = (-shift + radius, -shift - radius)
    bx = min(roots, key=lambda r: (abs(r - mean_x), -r))
    A = np.array([[0.0, 1.0], [slope, -p.eta]])
    b = np.array([bx, 0.0])

    def n2(x):
        return sk_force(p, x) - slope * (x - bx)

    def N(z):
        z = np.asarray(z, dtype=float)
        return np.stack([np.zeros_like(z[..., 0]), n2(z[..., 0])], axis=-1)

    def DN(z):
        z = np.asarray(z, dtype=float)
        out = np.zeros(z.shape[:-1] + (2, 2))
        out[..., 1, 0] = _force_prime(p, z[..., 0]) - slope
        return out

    def flow(z, h):
        z = np.asarray(z, dtype=float)
        x = z[..., 0]
        out = np.stack([x, z[..., 1] + h * n2(x)], axis=-1)
        Df = np.zeros(z.shape[:-1] + (2, 2))
        Df[..., 0, 0] = 1.0
        Df[..., 1, 1] = 1.0
        Df[..., 1, 0] = h * (_force_prime(p, x) - slope)
        return out, Df

    linear = LinearPearsonModel(A, b, sk_diffusion_spec(p))
    return SplitNonlinearModel(linear, N, DN, flow)


def sk_equilibria(p):
    """Real roots of the force, sorted."""
    roots = np.roots([p.a, p.b, p.c, p.d])
    return np.sort(roots[np.abs(roots.imag) < 1e-9].real)


class _Density:
    def __init__(self, log_fn, bracket):
        self.log_fn = log_fn
        self.bracket = bracket
        self._norm = None
        # subtract the log-density peak so exp() stays in range
        self._shift = np.max(log_fn(np.linspace(*bracket, 2001)))

    def unnormalized(self, z):
        return np.exp(self.log_fn(np.asarray(z, dtype=float)) - self._shift)

    def normalizer(self, bracket=None):
        lo, hi = bracket or self.bracket
        value, err = integrate.quad(self.unnormalized, lo, hi, limit=400, epsabs=0, epsrel=1e-10)
        if not np.isfinite(value) or value <= 0 or err > 1e-6 * value:
            raise IntegrationError("density normalization did not converge")
        return value

    def __call__(self, z):
        if self._norm is None:
            self._norm = self.normalizer()
        return self.unnormalized(z) / self._norm


def sk_approx_invariant_densities(p, x_bracket=(-5.0, 5.0), v_bracket=(-200.0, 200.0)):
    """Approximate marginal stationary densities of position and velocity.

    The joint law is approximated by a product of the two marginals. Each
    returned object is callable (normalized density) and exposes
    ``unnormalized`` and ``normalizer``.
    """
    if not p.alpha < 2 * p.eta:
        raise InvalidInputError("need alpha < 2 eta for an invariant density")
    rate = (2 * p.eta - p.alpha) / p.gamma

    def log_pi_x(x):
        return -rate * sk_potential(p, x)

    if p.alpha > 0:
        D = p.discriminant
        if D <= 0:
            raise InvalidInputError("need 4 alpha gamma > beta^2")
        sqD = np.sqrt(D)

        def log_pi_v(v):
            return (-(p.eta / p.alpha + 1) * np.log(sk_sigma2(p, v))
                    + 2 * p.beta * p.eta / (p.alpha * sqD) * np.arctan((2 * p.alpha * v + p.beta) / sqD))
    else:
        def log_pi_v(v):
            return -p.eta * v ** 2 / p.gamma

    return _Density(log_pi_x, x_bracket), _Density(log_pi_v, v_bracket)


def skew_t_params(rate, alpha, beta, gamma):
    """Map ``(eta, alpha, beta, gamma)`` to skew-t ``(nu, mu, nu sigma^2, omega)``."""
    if not alpha > 0:
        raise InvalidInputError("alpha must be positive")
    D = 4 * alpha * gamma - beta ** 2
    if not D > 0:
        raise InvalidInputError("need 4 alpha gamma > beta^2")
    nu = 2 * rate / alpha + 1
    mu = -beta / (2 * alpha)
    nu_sigma2 = D / (4 * alpha ** 2)
    omega = 2 * beta * rate / (alpha * np.sqrt(D))
    return nu, mu, nu_sigma2, omega


# Lamperti transform of the velocity: u = psi(v) has unit diffusion.

def _lamperti_consts(p):
    if not (p.alpha > 0 and p.discriminant > 0):
        raise InvalidInputError("Lamperti transform needs alpha > 0 and 4 alpha gamma > beta^2")
    return np.sqrt(p.alpha), np.sqrt(p.discriminant)


def lamperti(p, v):
    r, sqD = _lamperti_consts(p)
    return np.arcsinh((2 * p.alpha * np.asarray(v, dtype=float) + p.beta) / sqD) / r


def lamperti_inverse(p, u):
    r, sqD = _lamperti_consts(p)
    return (sqD * np.sinh(r * np.asarray(u, dtype=float)) - p.beta) / (2 * p.alpha)


def _lamperti_parts(p, y):
    r, sqD = _lamperti_consts(p)
    s = sqD / (2 * r)  # sqrt(gamma - beta^2 / (4 alpha))
    y = np.asarray(y, dtype=float)
    x, u = y[..., 0], y[..., 1]
    g = p.eta * p.beta / (2 * p.alpha) + sk_force(p, x)
    return r, s, x, u, g


def lamperti_drift(p, y):
    """Drift in ``(x, u)`` coordinates where ``u = psi(v)``."""
    r, s, x, u, g = _lamperti_parts(p, y)
    ch = np.cosh(r * u)
    f1 = s * np.sinh(r * u) / r - p.beta / (2 * p.alpha)
    f2 = -(p.eta + p.alpha / 2) * np.tanh(r * u) / r + g / (s * ch)
    return np.stack([f1, f2], axis=-1)


def lamperti_drift_jacobian(p, y):
    r, s, x, u, g = _lamperti_parts(p, y)
    ch = np.cosh(r * u)
    th = np.tanh(r * u)
    out = np.zeros(np.shape(u) + (2, 2))
    out[..., 0, 1] = s * ch
    out[..., 1, 0] = _force_prime(p, x) / (s * ch)
    out[..., 1, 1] = -(p.eta + p.alpha / 2) / ch ** 2 - g * r * th / (s * ch)
    return out


def lamperti_drift_hessian(p, y):
    r, s, x, u, g = _lamperti_parts(p, y)
    ch = np.cosh(r * u)
    sh = np.sinh(r * u)
    th = sh / ch
    out = np.zeros(np.shape(u) + (2, 2, 2))
    out[..., 0, 1, 1] = s * r * sh
    out[..., 1, 0, 0] = (6 * p.a * x + 2 * p.b) / (s * ch)
    cross = -_force_prime(p, x) * r * th / (s * ch)
    out[..., 1, 0, 1] = cross
    out[..., 1, 1, 0] = cross
    out[..., 1, 1, 1] = (2 * r * (p.eta + p.alpha / 2) * sh / ch ** 3
                         - g * r ** 2 * (ch ** 2 - 2 * sh ** 2) / (s * ch ** 3))
    return out
