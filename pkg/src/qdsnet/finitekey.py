"""Finite-size security analysis for a two-intensity decoy-state key link.

Given per-intensity sifted detection and error tallies, the analyzer
bounds the vacuum and single-photon contributions to the Z key
(Hoeffding concentration on the observed counts), converts the X-basis
single-photon error rate into a phase-error bound via a random-sampling
tail estimate, transfers those whole-key bounds onto an L-bit substring,
and turns the substring's smooth min-entropy into the distinct failure
probabilities of the signature scheme: robustness, repudiation, and
forgery.

All quantities here are scalar floats; everything is closed-form, so the
full chain evaluates in microseconds and the minimal secure substring
length can be found by direct scan.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

EC_EFFICIENCY = 1.16
_LAMBDA_FLOOR = 1e-12


class AnalysisError(RuntimeError):
    """Base class for security-analysis failures."""


class InsufficientDataError(AnalysisError):
    """Observed counts cannot support a positive single-photon bound."""


class LinkInsecureError(AnalysisError):
    """No substring length meets the target failure probability."""

    def __init__(self, message: str, best_eps: float, best_len: int | None):
        super().__init__(message)
        self.best_eps = best_eps
        self.best_len = best_len


@dataclass(frozen=True)
class Conventions:
    """Resolvable ambiguities in the concentration terms.

    log_base: base of the logarithm inside the Hoeffding deviation and
    the sampling tail ("e" or "2").  vacuum_upper_intensity: which
    intensity's error count anchors the vacuum upper bound ("nu" or
    "mu").  Defaults reproduce the published tabulated values.
    """

    log_base: str = "e"
    vacuum_upper_intensity: str = "nu"

    def __post_init__(self):
        if self.log_base not in ("e", "2"):
            raise ValueError("log_base must be 'e' or '2'")
        if self.vacuum_upper_intensity not in ("nu", "mu"):
            raise ValueError("vacuum_upper_intensity must be 'nu' or 'mu'")

    def log_recip(self, x: float) -> float:
        """log(1/x) in the configured base."""
        if self.log_base == "e":
            return -math.log(x)
        return -math.log2(x)


DEFAULT_CONVENTIONS = Conventions()


@dataclass(frozen=True)
class IntensityConfig:
    """Signal/decoy intensities and the sender's basis/intensity priors."""

    mu: float
    nu: float
    p_mu: float
    p_nu: float
    p_z: float
    p_x: float

    def __post_init__(self):
        if not 0 < self.nu < self.mu:
            raise ValueError("need 0 < nu < mu")
        for name in ("p_mu", "p_nu", "p_z", "p_x"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ValueError(f"{name} must be in (0, 1)")
        # published parameter tables are rounded to 3 decimals, so allow
        # a little slack in the simplex constraints
        if abs(self.p_mu + self.p_nu - 1.0) > 5e-3:
            raise ValueError("p_mu + p_nu must sum to 1")
        if abs(self.p_z + self.p_x - 1.0) > 5e-3:
            raise ValueError("p_z + p_x must sum to 1")

    def prob_of(self, intensity: float) -> float:
        if intensity == self.mu:
            return self.p_mu
        if intensity == self.nu:
            return self.p_nu
        raise ValueError(f"unknown intensity {intensity}")


@dataclass(frozen=True)
class DetectionTally:
    """Sifted detection/error counts per basis and intensity for one link.

    n_* are sifted detection counts, m_* the bit errors among them; the
    suffix names the sender intensity.  n_z_total is carried explicitly
    because accumulation stops when it reaches the configured key block
    size.  accumulation_time_s is the wall-clock time the tally took.
    """

    n_z_mu: int
    n_z_nu: int
    m_z_mu: int
    m_z_nu: int
    n_x_mu: int
    n_x_nu: int
    m_x_mu: int
    m_x_nu: int
    n_z_total: int
    accumulation_time_s: float

    def __post_init__(self):
        for name in ("n_z_mu", "n_z_nu", "m_z_mu", "m_z_nu",
                     "n_x_mu", "n_x_nu", "m_x_mu", "m_x_nu", "n_z_total"):
            v = getattr(self, name)
            if v < 0 or v != int(v):
                raise ValueError(f"{name} must be a nonnegative integer")
        for basis in ("z", "x"):
            for inten in ("mu", "nu"):
                n = getattr(self, f"n_{basis}_{inten}")
                m = getattr(self, f"m_{basis}_{inten}")
                if m > n:
                    raise ValueError(f"m_{basis}_{inten} exceeds n_{basis}_{inten}")
        if self.n_z_total != self.n_z_mu + self.n_z_nu:
            raise ValueError("n_z_total must equal n_z_mu + n_z_nu")
        if self.accumulation_time_s < 0:
            raise ValueError("accumulation_time_s must be nonnegative")

    def detections(self, basis: str, inten: str) -> int:
        return getattr(self, f"n_{basis}_{inten}")

    def errors(self, basis: str, inten: str) -> int:
        return getattr(self, f"m_{basis}_{inten}")

    def detections_total(self, basis: str) -> int:
        return self.detections(basis, "mu") + self.detections(basis, "nu")

    def errors_total(self, basis: str) -> int:
        return self.errors(basis, "mu") + self.errors(basis, "nu")

    @property
    def e_z(self) -> float:
        """Pooled Z-basis error rate across both intensities."""
        return self.errors_total("z") / self.detections_total("z")


@dataclass(frozen=True)
class SecurityTargets:
    """Failure-probability budget and message parameters for one link."""

    eps_sf: float = 1e-10
    eps_cor: float = 1e-10
    eps_target: float = 1e-5
    message_len_bits: int = 8
    lambda_ec_bits: float | None = None

    def __post_init__(self):
        for name in ("eps_sf", "eps_cor", "eps_target"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ValueError(f"{name} must be in (0, 1)")
        if self.message_len_bits < 8 or self.message_len_bits % 8:
            raise ValueError("message_len_bits must be a positive multiple of 8")
        if self.lambda_ec_bits is not None and self.lambda_ec_bits < 0:
            raise ValueError("lambda_ec_bits must be nonnegative")


_REPORT_KEYS = (
    "tau0", "tau1", "s_z0_l", "s_z1_l", "s_z0_u", "s_x1_l", "v_x1_u",
    "phi_z_u", "e_z", "h_min_per_L", "eps_rob", "eps_rep", "eps_for",
    "eps", "signature_len_bits", "signature_rate_tps",
)


@dataclass(frozen=True)
class SecurityReport:
    """Full output of the analysis chain at one substring length."""

    tau0: float
    tau1: float
    s_z0_l: float
    s_z1_l: float
    s_z0_u: float
    s_x1_l: float
    v_x1_u: float
    phi_z_u: float
    e_z: float
    h_min_per_L: float
    eps_rob: float
    eps_rep: float
    eps_for: float
    eps: float
    signature_len_bits: int
    signature_rate_tps: float

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in _REPORT_KEYS}

    @classmethod
    def from_dict(cls, d: dict) -> "SecurityReport":
        return cls(**{k: d[k] for k in _REPORT_KEYS})


def binary_entropy(x: float) -> float:
    """Shannon entropy of a bit with bias x; h(0) = h(1) = 0."""
    if not 0.0 <= x <= 1.0:
        raise ValueError("binary_entropy needs x in [0, 1]")
    if x in (0.0, 1.0):
        return 0.0
    return -x * math.log2(x) - (1 - x) * math.log2(1 - x)


def tau(n: int, cfg: IntensityConfig) -> float:
    """Probability that a sent pulse carries exactly n photons."""
    if n < 0:
        raise ValueError("photon number must be nonnegative")
    return sum(
        p * math.exp(-k) * k ** n / math.factorial(n)
        for k, p in ((cfg.mu, cfg.p_mu), (cfg.nu, cfg.p_nu))
    )


def hoeffding_shift(count: int, total: int, k_intensity: float,
                    cfg: IntensityConfig, eps_sf: float, upper: bool,
                    conv: Conventions = DEFAULT_CONVENTIONS) -> float:
    """Finite-size corrected count (e^k / P_k) * (count +- delta).

    delta = sqrt((total / 2) * log(1 / eps_sf)) is the Hoeffding
    deviation for the pooled sample of `total` events.
    """
    if total <= 0:
        raise ValueError("total must be positive")
    delta = math.sqrt(total / 2 * conv.log_recip(eps_sf))
    shifted = count + delta if upper else count - delta
    return math.exp(k_intensity) / cfg.prob_of(k_intensity) * shifted


def vacuum_lower(tally: DetectionTally, cfg: IntensityConfig, eps_sf: float,
                 basis: str = "z",
                 conv: Conventions = DEFAULT_CONVENTIONS) -> float:
    """Lower bound on vacuum-event detections in the chosen basis."""
    total = tally.detections_total(basis)
    n_nu_low = hoeffding_shift(tally.detections(basis, "nu"), total,
                               cfg.nu, cfg, eps_sf, upper=False, conv=conv)
    n_mu_high = hoeffding_shift(tally.detections(basis, "mu"), total,
                                cfg.mu, cfg, eps_sf, upper=True, conv=conv)
    t0 = tau(0, cfg)
    s0 = t0 * (cfg.mu * n_nu_low - cfg.nu * n_mu_high) / (cfg.mu - cfg.nu)
    return max(s0, 0.0)


def vacuum_upper(tally: DetectionTally, cfg: IntensityConfig, eps_sf: float,
                 basis: str = "z",
                 conv: Conventions = DEFAULT_CONVENTIONS) -> float:
    """Upper bound on vacuum-event detections in the chosen basis.

    Vacuum detections are error-prone half the time, so twice the
    corrected error count caps them; the trailing deviation term covers
    the sampling of the vacuum events themselves.
    """
    k_name = conv.vacuum_upper_intensity
    k = cfg.mu if k_name == "mu" else cfg.nu
    m_total = tally.errors_total(basis)
    n_total = tally.detections_total(basis)
    m_high = hoeffding_shift(tally.errors(basis, k_name), m_total,
                             k, cfg, eps_sf, upper=True, conv=conv)
    t0 = tau(0, cfg)
    s0_u = 2 * (t0 * m_high + math.sqrt(n_total / 2 * conv.log_recip(eps_sf)))
    return min(s0_u, float(n_total))


def single_photon_lower(tally: DetectionTally, cfg: IntensityConfig,
                        eps_sf: float, basis: str = "z",
                        conv: Conventions = DEFAULT_CONVENTIONS) -> float:
    """Lower bound on single-photon detections in the chosen basis."""
    mu, nu = cfg.mu, cfg.nu
    total = tally.detections_total(basis)
    n_nu_low = hoeffding_shift(tally.detections(basis, "nu"), total,
                               nu, cfg, eps_sf, upper=False, conv=conv)
    n_mu_high = hoeffding_shift(tally.detections(basis, "mu"), total,
                                mu, cfg, eps_sf, upper=True, conv=conv)
    s0_u = vacuum_upper(tally, cfg, eps_sf, basis, conv=conv)
    t0, t1 = tau(0, cfg), tau(1, cfg)
    bracket = (n_nu_low
               - (nu ** 2 / mu ** 2) * n_mu_high
               - ((mu ** 2 - nu ** 2) / mu ** 2) * (s0_u / t0))
    s1 = t1 * mu / (nu * (mu - nu)) * bracket
    return min(max(s1, 0.0), float(total))


def vx1_upper(tally: DetectionTally, cfg: IntensityConfig, eps_sf: float,
              conv: Conventions = DEFAULT_CONVENTIONS) -> float:
    """Upper bound on single-photon bit errors in the X basis."""
    mu, nu = cfg.mu, cfg.nu
    m_total = tally.errors_total("x")
    m_mu_high = hoeffding_shift(tally.errors("x", "mu"), m_total,
                                mu, cfg, eps_sf, upper=True, conv=conv)
    m_nu_low = hoeffding_shift(tally.errors("x", "nu"), m_total,
                               nu, cfg, eps_sf, upper=False, conv=conv)
    t1 = tau(1, cfg)
    v = t1 * (m_mu_high - m_nu_low) / (mu - nu)
    return max(v, 0.0)


def gamma_upper(n: float, k: float, eps: float, lam: float,
                conv: Conventions = DEFAULT_CONVENTIONS) -> float:
    """Random-sampling deviation for drawing n of n+k bits without replacement.

    Bounds how much the rate of a property in the drawn n bits can exceed
    lam, its rate in the full population, except with probability eps.
    """
    if n <= 0 or k <= 0:
        raise ValueError("gamma_upper needs n > 0 and k > 0")
    lam = min(max(lam, _LAMBDA_FLOOR), 1.0 - _LAMBDA_FLOOR)
    total = n + k
    arg = total / (2 * math.pi * n * k * lam * (1 - lam) * eps ** 2)
    # a log argument <= 1 means the tail bound is vacuous at this size
    g = max(total / (n * k) * conv.log_recip(1.0 / arg), 0.0)
    a = max(n, k)
    num = (1 - 2 * lam) * a * g / total + math.sqrt(
        a ** 2 * g ** 2 / total ** 2 + 4 * lam * (1 - lam) * g)
    den = 2 + 2 * a ** 2 * g / total ** 2
    return num / den


def phase_error_upper(tally: DetectionTally, cfg: IntensityConfig,
                      eps_sf: float,
                      conv: Conventions = DEFAULT_CONVENTIONS) -> float:
    """Upper bound on the single-photon phase error rate of the Z key.

    The X-basis single-photon error rate estimates the Z-basis phase
    error rate; gamma_upper covers the statistical transfer between the
    two finite samples.  Raises InsufficientDataError when the X-basis
    single-photon count cannot be bounded away from zero.
    """
    s_x1 = single_photon_lower(tally, cfg, eps_sf, basis="x", conv=conv)
    if s_x1 <= 0:
        raise InsufficientDataError(
            "X-basis single-photon lower bound is not positive")
    s_z1 = single_photon_lower(tally, cfg, eps_sf, basis="z", conv=conv)
    if s_z1 <= 0:
        raise InsufficientDataError(
            "Z-basis single-photon lower bound is not positive")
    ratio = vx1_upper(tally, cfg, eps_sf, conv=conv) / s_x1
    phi = ratio + gamma_upper(s_z1, s_x1, eps_sf, ratio, conv=conv)
    return min(max(phi, 0.0), 0.5)


def substring_bounds(s_z0_l: float, s_z1_l: float, phi_z_u: float,
                     n_z: int, length: int, eps_sf: float,
                     conv: Conventions = DEFAULT_CONVENTIONS
                     ) -> tuple[float, float, float]:
    """Transfer whole-key bounds onto a random L-bit substring.

    Returns (vacuum lower, single-photon lower, phase error upper) for
    the substring.  Each transfer pays one gamma_upper sampling penalty.
    """
    if not 0 < length < n_z:
        raise ValueError("substring length must be in (0, n_z)")
    lam0 = s_z0_l / n_z
    s0_L = length * (lam0 - gamma_upper(length, n_z - length, eps_sf, lam0,
                                        conv=conv))
    s0_L = min(max(s0_L, 0.0), float(length))

    lam1 = s_z1_l / n_z
    s1_L = length * (lam1 - gamma_upper(length, n_z - length, eps_sf, lam1,
                                        conv=conv))
    s1_L = min(max(s1_L, 0.0), float(length))

    rest = s_z1_l - s1_L
    if s1_L <= 0 or rest <= 0:
        phi_L = 0.5
    else:
        phi_L = phi_z_u + gamma_upper(s1_L, rest, eps_sf, phi_z_u, conv=conv)
        phi_L = min(max(phi_L, 0.0), 0.5)
    return s0_L, s1_L, phi_L


def min_entropy(s0_L: float, s1_L: float, phi_L: float, length: int,
                n_z: int, lambda_ec_bits: float, eps_cor: float) -> float:
    """Smooth min-entropy of an L-bit substring of the Z key.

    Vacuum bits are fully unpredictable, single-photon bits lose the
    phase-error entropy, and the substring's share of the reconciliation
    leakage (plus the verification tag) is subtracted.
    """
    leak_share = length / n_z * (lambda_ec_bits + math.log2(2 / eps_cor))
    return s0_L + s1_L * (1 - binary_entropy(phi_L)) - leak_share


def security_bounds(h_n: float, message_len_bits: int, eps_cor: float
                    ) -> tuple[float, float, float, float]:
    """(eps_rob, eps_rep, eps_for, eps) from the substring min-entropy.

    Robustness fails only if either reconciliation verification fails;
    repudiation needs Bob and Charlie to disagree, impossible once their
    shares are symmetrized; forgery needs a digest collision under an
    attacker ignorant of H_n bits of the hash key.
    """
    eps_rob = 2 * eps_cor
    eps_rep = 0.0
    try:
        eps_for = message_len_bits / 8 * 2.0 ** (1.0 - h_n)
    except OverflowError:
        eps_for = math.inf
    return eps_rob, eps_rep, eps_for, max(eps_rob, eps_rep, eps_for)


@dataclass(frozen=True)
class LinkBounds:
    """Whole-key quantities shared by every candidate substring length."""

    tau0: float
    tau1: float
    s_z0_l: float
    s_z0_u: float
    s_z1_l: float
    s_x1_l: float
    v_x1_u: float
    phi_z_u: float
    e_z: float
    lambda_ec: float
    n_z: int
    time_s: float


def link_bounds(tally: DetectionTally, cfg: IntensityConfig,
                targets: SecurityTargets,
                conv: Conventions = DEFAULT_CONVENTIONS) -> LinkBounds:
    """Evaluate every length-independent bound once."""
    if tally.detections_total("z") == 0 or tally.detections_total("x") == 0:
        raise InsufficientDataError(
            "no detections in at least one basis; nothing to bound")
    e_z = tally.e_z
    if targets.lambda_ec_bits is not None:
        lam_ec = targets.lambda_ec_bits
    else:
        lam_ec = EC_EFFICIENCY * tally.n_z_total * binary_entropy(e_z)
    return LinkBounds(
        tau0=tau(0, cfg),
        tau1=tau(1, cfg),
        s_z0_l=vacuum_lower(tally, cfg, targets.eps_sf, "z", conv=conv),
        s_z0_u=vacuum_upper(tally, cfg, targets.eps_sf, "z", conv=conv),
        s_z1_l=single_photon_lower(tally, cfg, targets.eps_sf, "z", conv=conv),
        s_x1_l=single_photon_lower(tally, cfg, targets.eps_sf, "x", conv=conv),
        v_x1_u=vx1_upper(tally, cfg, targets.eps_sf, conv=conv),
        phi_z_u=phase_error_upper(tally, cfg, targets.eps_sf, conv=conv),
        e_z=e_z,
        lambda_ec=lam_ec,
        n_z=tally.n_z_total,
        time_s=tally.accumulation_time_s,
    )


def signature_rate(n_z: int, length: int, time_s: float) -> float:
    """Signatures per second: each signature consumes 2L bits per key."""
    if time_s <= 0:
        raise ValueError("accumulation time must be positive")
    if length <= 0:
        raise ValueError("signature length must be positive")
    return n_z / (2 * length * time_s)


def _entropy_at(bounds: LinkBounds, length: int, targets: SecurityTargets,
                conv: Conventions) -> float:
    s0_L, s1_L, phi_L = substring_bounds(
        bounds.s_z0_l, bounds.s_z1_l, bounds.phi_z_u,
        bounds.n_z, length, targets.eps_sf, conv=conv)
    return min_entropy(s0_L, s1_L, phi_L, length, bounds.n_z,
                       bounds.lambda_ec, targets.eps_cor)


def report_at_length(tally: DetectionTally, cfg: IntensityConfig,
                     targets: SecurityTargets, length: int,
                     conv: Conventions = DEFAULT_CONVENTIONS,
                     bounds: LinkBounds | None = None) -> SecurityReport:
    """Evaluate the full chain at one fixed substring length."""
    if length < 8 or length % 8:
        raise ValueError("signature length must be a positive multiple of 8")
    if bounds is None:
        bounds = link_bounds(tally, cfg, targets, conv=conv)
    h_n = _entropy_at(bounds, length, targets, conv)
    eps_rob, eps_rep, eps_for, eps = security_bounds(
        h_n, targets.message_len_bits, targets.eps_cor)
    return SecurityReport(
        tau0=bounds.tau0, tau1=bounds.tau1,
        s_z0_l=bounds.s_z0_l, s_z1_l=bounds.s_z1_l, s_z0_u=bounds.s_z0_u,
        s_x1_l=bounds.s_x1_l, v_x1_u=bounds.v_x1_u, phi_z_u=bounds.phi_z_u,
        e_z=bounds.e_z, h_min_per_L=h_n,
        eps_rob=eps_rob, eps_rep=eps_rep, eps_for=eps_for, eps=eps,
        signature_len_bits=length,
        signature_rate_tps=signature_rate(bounds.n_z, length, bounds.time_s),
    )


def min_signature_length(tally: DetectionTally, cfg: IntensityConfig,
                         targets: SecurityTargets,
                         conv: Conventions = DEFAULT_CONVENTIONS
                         ) -> tuple[int, SecurityReport]:
    """Smallest substring length whose total failure bound meets the target.

    Lengths are multiples of 8 so signatures are whole bytes; the scan
    runs up to n_z / 2 because one signature consumes 2L bits.  Raises
    LinkInsecureError (carrying the best achievable bound) when no
    length qualifies, and InsufficientDataError when the single-photon
    bounds collapse entirely.
    """
    bounds = link_bounds(tally, cfg, targets, conv=conv)
    if 2 * targets.eps_cor > targets.eps_target:
        raise LinkInsecureError(
            "robustness floor 2*eps_cor exceeds the target", 2 * targets.eps_cor, None)
    best_eps = math.inf
    best_len: int | None = None
    for length in range(8, bounds.n_z // 2 + 1, 8):
        h_n = _entropy_at(bounds, length, targets, conv)
        eps = security_bounds(h_n, targets.message_len_bits, targets.eps_cor)[3]
        if eps < best_eps:
            best_eps, best_len = eps, length
        if eps <= targets.eps_target:
            report = report_at_length(tally, cfg, targets, length,
                                      conv=conv, bounds=bounds)
            return length, report
    raise LinkInsecureError(
        f"no substring length reaches eps <= {targets.eps_target:g} "
        f"(best {best_eps:g} at L = {best_len})", best_eps, best_len)
