"""
Admissibility of parameter sets, contraction coefficients and the
coupling-based tau-dependence diagnostic.

Conventions
-----------
ARCH/GARCH families are treated through the squared process, so their
Lipschitz coefficients are ``||xi_0||_4^2 a_j`` with ``a_j`` the ARCH(inf)
coefficients; LARCH families use ``||xi_0||_8 |a_j|``; count families use the
Lipschitz coefficients of the intensity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special
from scipy.stats import qmc

from .exceptions import InadmissibleError, InvalidArgumentError
from .innovations import InnovationSpec, gaussian, make_rng, open_uniform
from .kernels import KernelSpec, bandwidth, kernel_l2_squared
from .models import Family, ModelSpec, parse_family, simulate_batch
from .paths import ParameterPath

__all__ = [
    "Admissibility",
    "LipschitzProfile",
    "TauEstimate",
    "check_admissible",
    "lipschitz_profile",
    "lambda_bound",
    "estimate_tau",
    "ar1_asymptotic_sd",
    "arch_coefficients",
]

ROOT_TOL = 1e-9
EXPANSION_TOL = 1e-14
PATH_GRID = 1000


@dataclass(frozen=True)
class Admissibility:
    """
    Verdict of a parameter constraint.

    ``value`` is the constrained quantity (must be < 1), ``margin = 1 - value``.
    For paths ``worst_u`` is where the margin is smallest.
    """

    ok: bool
    margin: float
    value: float
    detail: str
    worst_u: float | None = None

    def to_dict(self):
        return {"ok": self.ok, "margin": self.margin, "value": self.value, "detail": self.detail,
                "worst_u": self.worst_u}


def _companion_radius(coefs) -> float:
    """Largest modulus of the roots of ``z^m + c_1 z^{m-1} + ... + c_m``."""
    c = np.trim_zeros(np.asarray(coefs, dtype=float), "b")
    m = c.size
    if m == 0:
        return 0.0
    comp = np.zeros((m, m))
    comp[0, :] = -c
    comp[1:, :-1] = np.eye(m - 1)
    return float(np.max(np.abs(np.linalg.eigvals(comp))))


def arch_coefficients(c, d, tol=EXPANSION_TOL, max_terms=100_000):
    """
    Coefficients of ``c(z) / (1 - d(z))`` for ``c(z) = sum c_i z^i``, ``d(z) = sum d_j z^j``.

    The expansion stops once a full block of ``max(p, q)`` consecutive terms
    is below ``tol`` in absolute value, or at ``max_terms``.
    """
    c = np.asarray(c, dtype=float)
    d = np.asarray(d, dtype=float)
    p, q = c.size, d.size
    out = []
    small = 0
    block = max(p, q, 1)
    for j in range(1, max_terms + 1):
        v = c[j - 1] if j <= p else 0.0
        for k in range(1, min(q, j - 1) + 1):
            v += d[k - 1] * out[j - k - 1]
        out.append(v)
        small = small + 1 if abs(v) < tol else 0
        if j >= p and small >= block:
            break
    return np.asarray(out)


def _theta_points(fam: Family, obj):
    """Points representing a parameter set: one point, a path grid, or a box sample."""
    from .estimator import ThetaBox  # local import: estimator depends on models only

    if isinstance(obj, ParameterPath):
        u = np.linspace(0.0, 1.0, PATH_GRID)
        return obj.eval(u), u
    if isinstance(obj, ThetaBox):
        lo, hi = obj.lower, obj.upper
        d = lo.size
        corners = np.array(np.meshgrid(*[[0.0, 1.0]] * d, indexing="ij")).reshape(d, -1).T
        inner = qmc.Halton(d=d, scramble=False).random(513)[1:]
        unit = np.vstack([corners, inner])
        return lo + (hi - lo) * unit, None
    th = np.atleast_2d(np.asarray(obj, dtype=float))
    if th.shape[1] != fam.dim:
        raise InvalidArgumentError(f"{fam} needs {fam.dim} parameters")
    return th, None


def _split(fam: Family, th):
    p, q = fam.p, fam.q
    k = fam.kind
    if k in ("tvgarch", "tvglarch"):
        return th[0], th[1:1 + p], th[1 + p:1 + p + q]
    if k == "tvarmagarch":
        o = p + q
        return th[:p], th[p:o], th[o], th[o + 1:o + 1 + fam.p2], th[o + 1 + fam.p2:o + 1 + fam.p2 + fam.q2]
    if k == "tvingarch":
        return th[0], th[1:1 + p], th[1 + p:1 + p + q]
    if k == "tvingarch-thr":
        return th[0], th[1:1 + p], th[1 + p:1 + p + q], th[1 + p + q:1 + p + 2 * q]
    raise InvalidArgumentError(f"no split for {fam}")  # pragma: no cover


def _zeta(kappa):
    return float(special.zeta(kappa, 1)) if kappa > 1 else math.inf


def _constraint(fam: Family, th, xi: InnovationSpec):
    """(value, ok, detail) of the family constraint at one parameter point."""
    k = fam.kind
    if k in ("tvar1", "tvar1-scale"):
        v = abs(th[0])
        return v, v < 1, "|a1| < 1"
    if k == "tvarinf":
        v = abs(th[0]) * _zeta(th[1])
        return v, v < 1, "sum |a_j| = |mu| zeta(kappa) < 1"
    if k == "tvarma":
        p, q = fam.p, fam.q
        ra = _companion_radius(th[:p])
        rm = _companion_radius(th[p:p + q])
        v = max(ra, rm)
        return v, v < 1 - ROOT_TOL, "roots of 1+sum phi_i z^i and 1+sum psi_j z^j outside the closed unit disk"
    if k == "tvarchinf":
        v = xi.norm(4) ** 2 * th[1] * _zeta(th[2])
        return v, v < 1, "||xi||_4^2 c1 zeta(p) < 1"
    if k == "tvgarch":
        _, c, d = _split(fam, th)
        v = float(np.sum(d) + xi.norm(4) ** 2 * np.sum(c))
        return v, v < 1, "sum d_j + ||xi||_4^2 sum c_i < 1"
    if k == "tvarmagarch":
        phi, psi, _, c, d = _split(fam, th)
        g = float(np.sum(d) + xi.norm(4) ** 2 * np.sum(c))
        r = max(_companion_radius(phi), _companion_radius(psi))
        v = max(g, r)
        ok = g < 1 and r < 1 - ROOT_TOL
        return v, ok, "GARCH moment bound and ARMA root condition"
    if k == "tvlarchinf":
        v = xi.norm(8) * abs(th[1]) * _zeta(th[2])
        return v, v < 1, "||xi||_8 sum |a_j| < 1"
    if k == "tvglarch":
        _, c, d = _split(fam, th)
        if np.sum(np.abs(d)) >= 1 and _companion_radius(-np.asarray(d)) >= 1:
            return math.inf, False, "||xi||_8 sum |a_j| < 1 (expansion diverges)"
        v = xi.norm(8) * float(np.sum(np.abs(arch_coefficients(c, d))))
        return v, v < 1, "||xi||_8 sum |a_j| < 1"
    if k == "tvingarch":
        _, a, b = _split(fam, th)
        v = float(np.sum(a) + np.sum(b))
        return v, v < 1, "sum a_i + sum b_j < 1"
    _, a, b, c = _split(fam, th)
    v = float(np.sum(a) + np.sum(np.maximum(np.abs(b), np.abs(c))))
    return v, v < 1, "sum a_i + sum max(|b_j|, |c_j|) < 1"


def check_admissible(family, theta=None, innovations=None) -> Admissibility:
    """
    Evaluate the family's stationarity / moment constraint.

    Parameters
    ----------
    family : str, Family or ModelSpec
        With a ModelSpec, ``theta`` and ``innovations`` default to its path
        and innovation law.
    theta : array_like, ParameterPath or ThetaBox
        A point, a curve (checked on a 1000-point grid of ``[0, 1]``) or a box.
    innovations : InnovationSpec, optional
        Gaussian by default; supplies ``||xi_0||_4`` and ``||xi_0||_8``.
    """
    if isinstance(family, ModelSpec):
        theta = family.path if theta is None else theta
        innovations = family.innovations if innovations is None else innovations
        family = family.family
    fam = parse_family(family)
    xi = InnovationSpec.from_config(innovations)
    if theta is None:
        raise InvalidArgumentError("need a parameter point, path or box")
    pts, u = _theta_points(fam, theta)
    worst = None
    for i, th in enumerate(pts):
        v, ok, detail = _constraint(fam, th, xi)
        if worst is None or v > worst[0] or (not ok and worst[1]):
            worst = (v, ok, detail, i)
    v, ok, detail, i = worst
    all_ok = all(_constraint(fam, th, xi)[1] for th in pts) if pts.shape[0] > 1 else ok
    return Admissibility(bool(all_ok), float(1.0 - v), float(v), detail,
                         None if u is None else float(u[i]))


@dataclass(frozen=True)
class LipschitzProfile:
    """
    Contraction coefficients ``b_j`` (``j = 1..J``) of a parameter set.

    ``B0`` includes a bound on ``sum_{j > J} b_j``; ``decay`` is ``"finite"``,
    ``"geometric"`` (rate ``rate``) or ``"power"`` (``b_j <= coef j^-kappa``).
    """

    b: np.ndarray
    B0: float
    C0: float
    J: int
    tail_J: float
    decay: str = "finite"
    rate: float = 0.0
    coef: float = 0.0
    kappa: float = 0.0
    family: str = ""
    extra: dict = field(default_factory=dict)

    def tail(self, r: int) -> float:
        """Bound on ``sum_{j > r} b_j``."""
        r = int(r)
        if r < self.J:
            return float(np.sum(self.b[r:]) + self.tail_J)
        if self.decay == "finite":
            return 0.0
        if self.decay == "power":
            return self.coef * r ** (1.0 - self.kappa) / (self.kappa - 1.0)
        bj = self.b[-1] if self.b.size else 0.0
        return float(bj * self.rate ** (r - self.J + 1) / (1.0 - self.rate))

    def tails(self, s: int) -> np.ndarray:
        """``tail(r)`` for ``r = 1..s``."""
        upto = min(s, self.J)
        rev = np.cumsum(self.b[::-1])[::-1]  # rev[k] = sum_{j >= k+1} b_j
        head = np.append(rev[1:], 0.0)[:upto] + self.tail_J
        if s <= self.J:
            return head
        rest = np.array([self.tail(r) for r in range(self.J + 1, s + 1)])
        return np.concatenate([head, rest])

    def to_dict(self):
        return {"B0": self.B0, "C0": self.C0, "J": self.J, "tail_J": self.tail_J, "decay": self.decay,
                "b_head": self.b[:20].tolist(), "family": self.family}


def _geometric_tail(bs, rate):
    if rate >= 1:
        return math.inf
    return float(bs[-1] * rate / (1.0 - rate)) if bs.size else 0.0


def lipschitz_profile(family, theta=None, innovations=None, J: int = 1000) -> LipschitzProfile:
    """
    Coefficients ``b_j = sup_theta Lip_j`` over a point, path or box.

    The supremum is taken over the representative points of the set (the
    1000-point grid of a path; corners plus 512 Halton points of a box),
    except where ``b_j`` is monotone in the parameters and the box corner is
    exact.  Raises :class:`InadmissibleError` for power-law decay with
    exponent ``<= 1``.
    """
    if isinstance(family, ModelSpec):
        theta = family.path if theta is None else theta
        innovations = family.innovations if innovations is None else innovations
        family = family.family
    fam = parse_family(family)
    xi = InnovationSpec.from_config(innovations)
    if theta is None:
        raise InvalidArgumentError("need a parameter point, path or box")
    pts, _ = _theta_points(fam, theta)
    k = fam.kind
    J = int(J)
    if J < 1:
        raise InvalidArgumentError("horizon J must be >= 1")
    j = np.arange(1, J + 1, dtype=float)

    if k in ("tvar1", "tvar1-scale"):
        b = np.zeros(J)
        b[0] = float(np.max(np.abs(pts[:, 0])))
        sig = float(np.max(pts[:, 1])) if k == "tvar1-scale" else 1.0
        return LipschitzProfile(b, float(b.sum()), sig * xi.norm(2), J, 0.0, "finite", family=str(fam))

    if k in ("tvarinf", "tvarchinf", "tvlarchinf"):
        ie = 1 if k == "tvarinf" else 2
        ic = 0 if k == "tvarinf" else 1
        kap = float(np.min(pts[:, ie]))
        if kap <= 1.0:
            raise InadmissibleError(f"power-law decay exponent {kap} <= 1: coefficients are not summable")
        scale = {"tvarinf": 1.0, "tvarchinf": xi.norm(4) ** 2, "tvlarchinf": xi.norm(8)}[k]
        coef = scale * float(np.max(np.abs(pts[:, ic])))
        b = coef * j ** (-kap)
        tail = coef * J ** (1.0 - kap) / (kap - 1.0)
        if k == "tvarinf":
            c0 = float(np.max(np.abs(pts[:, 2]))) * xi.norm(2)
        elif k == "tvarchinf":
            c0 = xi.norm(4) ** 2 * float(np.max(pts[:, 0]))
        else:
            c0 = xi.norm(8) * float(np.max(np.abs(pts[:, 0])))
        return LipschitzProfile(b, float(b.sum() + tail), c0, J, tail, "power", coef=coef, kappa=kap,
                                family=str(fam))

    rows = []
    c0s = []
    rates = []
    for th in pts:
        coefs, c0, rate = _expansion(fam, th, xi, J)
        rows.append(np.abs(coefs))
        c0s.append(c0)
        rates.append(rate)
    b = np.max(np.vstack(rows), axis=0)
    rate = float(max(rates))
    tail = _geometric_tail(b, rate) if rate > 0 else 0.0
    decay = "geometric" if rate > 0 else "finite"
    return LipschitzProfile(b, float(b.sum() + tail), float(max(c0s)), J, tail, decay, rate=rate,
                            family=str(fam))


def _series_ratio(num, den, J):
    """First ``J`` coefficients (from ``z^0``) of ``num(z) / den(z)`` with ``den[0] != 0``."""
    out = np.zeros(J + 1)
    num = np.concatenate([num, np.zeros(max(0, J + 1 - len(num)))])
    for t in range(J + 1):
        v = num[t]
        for i in range(1, min(len(den) - 1, t) + 1):
            v -= den[i] * out[t - i]
        out[t] = v / den[0]
    return out


def _expansion(fam: Family, th, xi: InnovationSpec, J: int):
    """Signed Lipschitz coefficients ``(beta_1..beta_J)``, ``C0`` and geometric rate at one point."""
    k = fam.kind
    pad = np.zeros(J)
    if k == "tvarma":
        p, q = fam.p, fam.q
        sig = th[p + q]
        phi = np.concatenate([[1.0], th[:p]])
        psi = np.concatenate([[1.0], th[p:p + q] / sig])
        rho = _series_ratio(phi, psi, J)
        rate = _companion_radius(th[p:p + q] / sig) if q else 0.0
        return rho[1:], abs(sig) * xi.norm(2), rate
    if k == "tvarmagarch":
        phi, psi, c0, c, d = _split(fam, th)
        rho = _series_ratio(np.concatenate([[1.0], phi]), np.concatenate([[1.0], psi]), J)
        alpha = arch_coefficients(c, d, max_terms=J)
        alpha = np.concatenate([alpha, pad])[:J]
        sq = np.sqrt(np.maximum(alpha, 0.0))
        mpart = np.convolve(sq, np.abs(rho))[:J]
        beta = np.abs(rho[1:]) + xi.norm(4) * mpart
        rate = max(_companion_radius(psi), _companion_radius(-np.asarray(d)) if len(d) else 0.0)
        c0_eff = c0 / max(1e-300, 1.0 - float(np.sum(d)))
        return beta, xi.norm(4) * math.sqrt(max(c0_eff, 0.0)), rate
    if k in ("tvgarch", "tvglarch"):
        c0, c, d = _split(fam, th)
        alpha = np.concatenate([arch_coefficients(c, d, max_terms=J), pad])[:J]
        rate = _companion_radius(-np.asarray(d)) if len(d) else 0.0
        denom = 1.0 - float(np.sum(d))
        c0_eff = c0 / denom if denom > 0 else math.inf
        if k == "tvgarch":
            return xi.norm(4) ** 2 * alpha, xi.norm(4) ** 2 * c0_eff, rate
        return xi.norm(8) * alpha, xi.norm(8) * abs(c0_eff), rate
    if k == "tvingarch":
        a0, a, b = _split(fam, th)
        alpha = np.concatenate([arch_coefficients(a, b, max_terms=J), pad])[:J]
        rate = _companion_radius(-np.asarray(b)) if len(b) else 0.0
        denom = 1.0 - float(np.sum(b))
        return alpha, a0 / denom if denom > 0 else math.inf, rate
    a0, a, b, c = _split(fam, th)
    m = np.maximum(np.abs(b), np.abs(c))
    alpha = np.concatenate([arch_coefficients(m, a, max_terms=J), pad])[:J]
    rate = _companion_radius(-np.asarray(a)) if len(a) else 0.0
    denom = 1.0 - float(np.sum(a))
    return alpha, a0 / denom if denom > 0 else math.inf, rate


def lambda_bound(profile: LipschitzProfile, s):
    """
    ``lambda_s = min_{1 <= r <= s} B0^(s/r) + sum_{t > r} b_t``, exact over integer ``r``.

    ``s`` may be an integer or an array of integers.
    """
    if not profile.B0 < 1:
        raise InadmissibleError(f"B0 = {profile.B0} >= 1: no contraction")
    scalar = np.ndim(s) == 0
    svals = np.atleast_1d(np.asarray(s, dtype=np.int64))
    if np.any(svals < 1):
        raise InvalidArgumentError("lag s must be >= 1")
    smax = int(svals.max())
    tails = profile.tails(smax)
    r = np.arange(1, smax + 1, dtype=float)
    logb = math.log(profile.B0) if profile.B0 > 0 else -math.inf
    out = np.empty(svals.size)
    for i, sv in enumerate(svals):
        rr = r[:sv]
        with np.errstate(under="ignore"):
            geo = np.exp(logb * sv / rr) if profile.B0 > 0 else np.zeros(sv)
        out[i] = float(np.min(geo + tails[:sv]))
    return float(out[0]) if scalar else out


@dataclass
class TauEstimate:
    s: np.ndarray
    tau_hat: np.ndarray
    p: float
    R: int
    lambda_bound: np.ndarray | None = None
    theta: np.ndarray | None = None

    def to_dict(self):
        return {
            "s": self.s.tolist(),
            "tau_hat": self.tau_hat.tolist(),
            "p": self.p,
            "R": self.R,
            "lambda_bound": None if self.lambda_bound is None else self.lambda_bound.tolist(),
            "theta": None if self.theta is None else self.theta.tolist(),
        }


def estimate_tau(model: ModelSpec, u: float, s_max: int = 20, p: float = 2, R: int = 10_000,
                 burn_in: int = 500, seed: int = 0, with_bound: bool = True) -> TauEstimate:
    """
    Monte Carlo coupling estimate of ``tau(s)`` for the stationary version at ``u``.

    Two copies run ``burn_in + s_max`` steps with the parameter frozen at
    ``theta(u)``; they share innovations at times ``1..s_max`` and use
    independent innovations before.  ``tau_hat(s)`` is the ``L^p`` norm of
    their difference at time ``s``.  Count families are coupled through the
    uniforms driving Poisson inversion.
    """
    if p not in (1, 2):
        raise InvalidArgumentError("p must be 1 or 2")
    if R < 100:
        raise InvalidArgumentError("need at least R = 100 replications")
    if s_max < 1 or burn_in < 1:
        raise InvalidArgumentError("s_max and burn_in must be >= 1")
    frozen = model.frozen(u)
    th = frozen.path.eval(u)
    T = burn_in + s_max
    thetas = np.repeat(th[None, :], T, axis=0)
    rng_a = make_rng(seed, (0,))
    rng_b = make_rng(seed, (1,))
    if frozen.family.is_count:
        ua = open_uniform(rng_a, (R, T))
        ub = ua.copy()
        ub[:, :burn_in] = open_uniform(rng_b, (R, burn_in))
        xa, _ = simulate_batch(frozen, thetas, uniforms=ua)
        xb, _ = simulate_batch(frozen, thetas, uniforms=ub)
    else:
        ea = frozen.innovations.sample(rng_a, (R, T))
        eb = ea.copy()
        eb[:, :burn_in] = frozen.innovations.sample(rng_b, (R, burn_in))
        xa, _ = simulate_batch(frozen, thetas, xi=ea)
        xb, _ = simulate_batch(frozen, thetas, xi=eb)
    diff = np.abs(xa[:, burn_in:] - xb[:, burn_in:])
    tau = np.mean(diff**p, axis=0) ** (1.0 / p)
    s = np.arange(1, s_max + 1)
    lam = None
    if with_bound:
        try:
            prof = lipschitz_profile(frozen.family, th, frozen.innovations, J=max(1000, s_max))
            lam = lambda_bound(prof, s)
        except InadmissibleError:
            lam = None
    return TauEstimate(s, tau, float(p), int(R), lam, th)


def ar1_asymptotic_sd(theta_star: float, kernel, n: int, lam: float = 0.35) -> float:
    """``sqrt((1 - theta^2) * int K^2 / (n h_n))`` for the localized LS estimator of tvAR(1)."""
    if not abs(theta_star) < 1:
        raise InadmissibleError("|theta| must be < 1")
    k = kernel if isinstance(kernel, KernelSpec) else KernelSpec.from_name(kernel)
    h = bandwidth(n, lam)
    return math.sqrt((1.0 - theta_star**2) * kernel_l2_squared(k) / (n * h))
