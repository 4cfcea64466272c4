"""Machine, line and turbine parameters plus the coefficient tables derived from them.

All quantities are per unit except ``H`` (s), ``omega_R`` (rad/s) and the
turbine/governor time constants (s).  Angles are stored in radians.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np


class ParameterError(ValueError):
    """A parameter set violates a physical or structural invariant."""


class SingularInductanceError(ParameterError):
    """An inductance block determinant vanished."""


@dataclass(frozen=True)
class MachineParams:
    L_d: float = 1.70
    L_F: float = 1.65
    L_D: float = 1.605
    L_q: float = 1.64
    L_Q: float = 1.526
    kM_F: float = 1.55
    kM_D: float = 1.55
    M_R: float = 1.55
    kM_Q: float = 1.49
    r: float = 0.001096
    r_F: float = 0.000742
    r_D: float = 0.0131
    r_Q: float = 0.0540
    H: float = 2.37
    D: float = 0.0
    omega_R: float = 376.99
    R_e: float = 0.02
    L_e: float = 0.4
    V_inf: float = 1.0
    alpha: float = math.radians(3.5598)
    K_T: float = 1.0
    K_G: float = 1.0
    tau_T: float = 0.5
    tau_G: float = 0.2
    R_T: float = 20.0
    E_FD_min: float = -5.0
    E_FD_max: float = 5.0
    G_V_min: float = 0.0
    G_V_max: float = 1.2
    k: float = math.sqrt(1.5)
    # Tabulated transient constants; None means derive from the circuit values.
    L_d_prime: float | None = 0.245
    tau_d0_prime: float | None = 5.90

    def __post_init__(self) -> None:
        validate(self)


_POSITIVE = (
    "L_d", "L_F", "L_D", "L_q", "L_Q",
    "r", "r_F", "r_D", "r_Q", "H", "omega_R", "R_e", "L_e", "V_inf",
    "K_T", "K_G", "tau_T", "tau_G", "R_T", "k",
)


def validate(p: MachineParams) -> None:
    for name in _POSITIVE:
        v = getattr(p, name)
        if not (math.isfinite(v) and v > 0):
            raise ParameterError(f"{name} must be positive and finite, got {v}")
    # a zero mutual inductance is an uncoupled winding
    for name in ("D", "kM_F", "kM_D", "M_R", "kM_Q"):
        v = getattr(p, name)
        if not (math.isfinite(v) and v >= 0):
            raise ParameterError(f"{name} must be non-negative, got {v}")
    if p.L_d * p.L_F - p.kM_F**2 <= 0:
        raise ParameterError("L_d*L_F - kM_F^2 must be positive (L'_d > 0)")
    if not p.E_FD_min < p.E_FD_max:
        raise ParameterError("E_FD_min must be below E_FD_max")
    if not p.G_V_min < p.G_V_max:
        raise ParameterError("G_V_min must be below G_V_max")
    for name in ("L_d_prime", "tau_d0_prime"):
        v = getattr(p, name)
        if v is not None and not v > 0:
            raise ParameterError(f"{name} must be positive when given, got {v}")


def transient_constants(p: MachineParams) -> dict[str, float]:
    """Transient inductance, open-circuit field time constant (s) and swing constant."""
    if p.L_F <= 0 or p.r_F <= 0:
        raise ParameterError("L_F and r_F must be positive")
    return {
        "L_d_prime": p.L_d - p.kM_F**2 / p.L_F,
        "tau_d0_prime": p.L_F / (p.omega_R * p.r_F),
        "tau_j": 2.0 * p.H,
    }


@dataclass(frozen=True)
class TruthCoefficients:
    F11: float; F12: float; F13: float; F14: float; F15: float; F16: float
    F21: float; F22: float; F23: float; F24: float; F25: float; F26: float
    F31: float; F32: float; F33: float; F34: float; F35: float; F36: float
    F41: float; F42: float; F43: float; F44: float; F45: float; F46: float
    F51: float; F52: float; F53: float; F54: float; F55: float; F56: float
    F61: float; F62: float; F63: float; F64: float; F65: float; F66: float
    F81: float; F82: float; F91: float; F92: float
    G11: float; G21: float; G31: float; G92: float
    y11: float; y12: float; y13: float; y14: float; y15: float; y16: float
    y21: float; y22: float; y23: float; y24: float; y25: float; y26: float
    i11: float
    alpha: float
    mu: float
    nu: float
    tau_j: float
    # inverse inductance entries, kept for the L*L^-1 identity check
    inv_d: tuple = field(repr=False, default=())
    inv_q: tuple = field(repr=False, default=())

    def row(self, i: int) -> np.ndarray:
        return np.array([getattr(self, f"F{i}{j}") for j in range(1, 7)])


def inductance_blocks(p: MachineParams) -> tuple[np.ndarray, np.ndarray]:
    """d-axis (I_d, I_F, I_D) and q-axis (I_q, I_Q) inductance blocks including the line."""
    Ld_ext = p.L_d + p.L_e
    Lq_ext = p.L_q + p.L_e
    d = np.array([[Ld_ext, p.kM_F, p.kM_D], [p.kM_F, p.L_F, p.M_R], [p.kM_D, p.M_R, p.L_D]])
    q = np.array([[Lq_ext, p.kM_Q], [p.kM_Q, p.L_Q]])
    return d, q


def derive_truth_coefficients(p: MachineParams) -> TruthCoefficients:
    k = p.k
    M_F, M_D, M_Q = p.kM_F / k, p.kM_D / k, p.kM_Q / k
    Ld_ext = p.L_d + p.L_e
    Lq_ext = p.L_q + p.L_e
    mu = Ld_ext * p.M_R**2 - p.L_D * p.L_F * Ld_ext + k**2 * (
        p.L_D * M_F**2 + p.L_F * M_D**2 - 2.0 * M_D * M_F * p.M_R
    )
    nu = -(k**2) * M_Q**2 + p.L_Q * Lq_ext
    if abs(mu) < 1e-12:
        raise SingularInductanceError("d-axis determinant mu is zero")
    if abs(nu) < 1e-12:
        raise SingularInductanceError("q-axis determinant nu is zero")

    Ld1 = (p.M_R**2 - p.L_D * p.L_F) / mu
    LF1 = (M_D**2 * k**2 - p.L_D * Ld_ext) / mu
    LD1 = (M_F**2 * k**2 - p.L_F * Ld_ext) / mu
    MF1 = (M_D * p.M_R - p.L_D * M_F) / mu
    MD1 = (M_F * p.M_R - p.L_F * M_D) / mu
    MR1 = (Ld_ext * p.M_R - M_D * M_F * k**2) / mu
    Lq1 = p.L_Q / nu
    LQ1 = Lq_ext / nu
    MQ1 = M_Q / nu

    R = p.r + p.R_e
    V = p.V_inf
    # Electrical rates run in per-unit time, so the swing constant carries omega_R.
    tj = 2.0 * p.H * p.omega_R
    Le = p.L_e

    c = dict(
        F11=-Ld1 * R, F12=k * MF1 * p.r_F, F13=k * MD1 * p.r_D,
        F14=-Lq_ext * Ld1, F15=-p.kM_Q * Ld1, F16=V * Ld1,
        F21=k * MF1 * R, F22=-LF1 * p.r_F, F23=-MR1 * p.r_D,
        F24=k * MF1 * Lq_ext, F25=k**2 * MF1 * M_Q, F26=-V * k * MF1,
        F31=k * MD1 * R, F32=-MR1 * p.r_F, F33=-LD1 * p.r_D,
        F34=k * MD1 * Lq_ext, F35=k**2 * MD1 * M_Q, F36=-V * k * MD1,
        F41=Lq1 * Ld_ext, F42=p.kM_F * Lq1, F43=p.kM_D * Lq1,
        F44=-Lq1 * R, F45=k * MQ1 * p.r_Q, F46=-V * Lq1,
        F51=-k * MQ1 * Ld_ext, F52=-(k**2) * MQ1 * M_F, F53=-(k**2) * MQ1 * M_D,
        F54=k * MQ1 * R, F55=-LQ1 * p.r_Q, F56=V * k * MQ1,
        F61=-(p.L_d - p.L_q) / tj, F62=-p.kM_F / tj, F63=-p.kM_D / tj,
        F64=p.kM_Q / tj, F65=-p.D / tj, F66=1.0 / tj,
        F81=-1.0 / p.tau_T, F82=p.K_T / p.tau_T,
        F91=-p.K_G / (p.tau_G * p.R_T), F92=-1.0 / p.tau_G,
        G11=-k * MF1, G21=LF1, G31=MR1, G92=p.K_G / p.tau_G,
    )
    c.update(
        y11=p.R_e + Le * c["F11"], y12=Le * c["F12"], y13=Le * c["F13"],
        y14=Le * c["F14"] + Le, y15=Le * c["F15"], y16=Le * c["F16"] - V,
        y21=Le * c["F41"] - Le, y22=Le * c["F42"], y23=Le * c["F43"],
        y24=p.R_e + Le * c["F44"], y25=Le * c["F45"], y26=Le * c["F46"] + V,
        i11=Le * c["G11"],
    )
    inv_d = ((Ld1, -k * MF1, -k * MD1), (-k * MF1, LF1, MR1), (-k * MD1, MR1, LD1))
    inv_q = ((Lq1, -k * MQ1), (-k * MQ1, LQ1))
    return TruthCoefficients(**c, alpha=p.alpha, mu=mu, nu=nu, tau_j=tj, inv_d=inv_d, inv_q=inv_q)


@dataclass(frozen=True)
class ReducedCoefficients:
    f11: float; f12: float; f13: float; g11: float
    f21: float; f22: float; f23: float; f24: float
    f25: float; f26: float; f27: float; f28: float
    f41: float; f42: float; f51: float; f52: float; g55: float
    Vd1: float; Vd2: float; Vd3: float
    Vq1: float; Vq2: float; Vq3: float
    L1: float; L2: float; L3: float; L4: float; R1: float; M1: float
    tau_d0_prime: float
    tau_j: float
    L_d_prime: float
    V_inf: float
    alpha: float


def derive_reduced_coefficients(p: MachineParams, include_stator_r: bool = False) -> ReducedCoefficients:
    """One-axis model coefficients.

    The stator resistance is dropped from R1 unless ``include_stator_r`` is set.
    Tabulated ``L_d_prime``/``tau_d0_prime`` take precedence over derived ones.
    """
    tc = transient_constants(p)
    Ldp = p.L_d_prime if p.L_d_prime is not None else tc["L_d_prime"]
    tdp = p.tau_d0_prime if p.tau_d0_prime is not None else tc["tau_d0_prime"]
    tj = tc["tau_j"]
    V = p.V_inf

    R1 = p.R_e + (p.r if include_stator_r else 0.0)
    L1 = p.L_q + p.L_e
    L2 = p.L_d - Ldp
    L3 = Ldp + p.L_e
    L4 = p.L_q - Ldp
    M1 = R1**2 + L3 * L1
    if M1 <= 0:
        raise ParameterError(f"M1 must be positive, got {M1}")
    a = 1.0 / (M1 * tj)
    b = 1.0 / (M1**2 * tj)

    return ReducedCoefficients(
        f11=-(1.0 + L2 * L1 / M1) / tdp,
        f12=L2 * L1 * V / (M1 * tdp),
        f13=L2 * R1 * V / (M1 * tdp),
        g11=1.0 / tdp,
        f21=-(R1 * a + L4 * L1 * R1 * b),
        f22=(R1 * a + 2.0 * L4 * L1 * R1 * b) * V,
        f23=-(L3 * a + L4 * L1 * L3 * b - L4 * R1**2 * b) * V,
        f24=-(L4 * R1**2 * b - L4 * L1 * L3 * b) * V**2,
        f25=-L4 * L1 * R1 * V**2 * b,
        f26=L4 * L3 * R1 * V**2 * b,
        f27=-p.D / tj,
        f28=1.0 / tj,
        f41=-1.0 / p.tau_T,
        f42=p.K_T / p.tau_T,
        f51=-p.K_G / (p.tau_G * p.R_T),
        f52=-1.0 / p.tau_G,
        g55=p.K_G / p.tau_G,
        Vd1=-p.L_q * R1 / M1,
        Vd2=V * p.L_q * R1 / M1,
        Vd3=-V * p.L_q * L3 / M1,
        Vq1=-Ldp * L1 / M1,
        Vq2=V * Ldp * L1 / M1,
        Vq3=V * Ldp * R1 / M1,
        L1=L1, L2=L2, L3=L3, L4=L4, R1=R1, M1=M1,
        tau_d0_prime=tdp, tau_j=tj, L_d_prime=Ldp, V_inf=V, alpha=p.alpha,
    )


@dataclass(frozen=True)
class OperatingPoint:
    name: str
    I_d0: float
    I_F0: float
    I_D0: float
    I_q0: float
    I_Q0: float
    omega_0: float
    delta_0: float
    T_m0: float
    G_V0: float
    V_d0: float
    V_q0: float
    V_t0: float
    E_q0_prime: float
    P: float = float("nan")
    PF: float = float("nan")
    I_a0: float = float("nan")

    def __post_init__(self) -> None:
        if self.omega_0 != 1.0:
            raise ParameterError(f"operating point {self.name}: omega_0 must be 1")
        vt = math.hypot(self.V_d0, self.V_q0)
        if abs(vt - self.V_t0) > 2e-3:
            raise ParameterError(
                f"operating point {self.name}: V_t0={self.V_t0} but hypot(V_d0, V_q0)={vt:.5f}"
            )

    def truth_state(self) -> np.ndarray:
        return np.array([self.I_d0, self.I_F0, self.I_D0, self.I_q0, self.I_Q0,
                         self.omega_0, self.delta_0, self.T_m0, self.G_V0])

    def reduced_state(self) -> np.ndarray:
        return np.array([self.E_q0_prime, self.omega_0, self.delta_0, self.T_m0, self.G_V0])


OPERATING_POINTS: dict[str, OperatingPoint] = {
    "I": OperatingPoint("I", -0.9185, 1.6315, -4.6204e-6, 0.4047, 5.9539e-5, 1.0, 1.0,
                        1.0012, 1.0012, -0.6628, 0.9670, 1.172, 1.1925, 1.00, 0.85, 1.0037),
    "II": OperatingPoint("II", -0.4818, 1.0228, 0.0, 0.4094, 0.0, 1.0, 1.0325,
                         0.6373, 0.6373, -0.6710, 0.7659, 1.0182, 0.8844, 0.6368, 0.9892, 0.6323),
    "III": OperatingPoint("III", -1.4281, 2.37786, 0.0, 0.37472, 0.0, 1.0, 0.88676,
                          1.34899, 1.34899, -0.6130, 1.2575, 1.3990, 1.6078, 1.3466, 0.652, 1.4764),
}


# ---------------------------------------------------------------- config files

_SECTIONS = {
    "machine": ("L_d", "L_F", "L_D", "L_q", "L_Q", "kM_F", "kM_D", "M_R", "kM_Q",
                "r", "r_F", "r_D", "r_Q", "H", "D", "omega_R", "k", "L_d_prime", "tau_d0_prime"),
    "line": ("R_e", "L_e", "V_inf", "alpha"),
    "turbine": ("K_T", "K_G", "tau_T", "tau_G", "R_T"),
    "limits": ("E_FD_min", "E_FD_max", "G_V_min", "G_V_max"),
}


@dataclass(frozen=True)
class Config:
    params: MachineParams
    operating_points: dict[str, OperatingPoint]
    extra: dict[str, dict[str, str]] = field(default_factory=dict)


def _read_section(sec: configparser.SectionProxy) -> dict[str, float | None]:
    out: dict[str, float | None] = {}
    for key, raw in sec.items():
        if raw.strip().lower() in ("none", ""):
            out[key] = None
            continue
        try:
            val = float(raw)
        except ValueError as exc:
            raise ParameterError(f"[{sec.name}] {key}: not a number: {raw!r}") from exc
        if key.endswith("_deg"):
            out[key[: -len("_deg")]] = math.radians(val)
        else:
            out[key] = val
    return out


def parse_config(text: str, base: MachineParams | None = None) -> Config:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str  # keep key case
    cp.read_string(text)
    base = base or MachineParams()
    updates: dict[str, float | None] = {}
    known = {f.name for f in fields(MachineParams)}
    for sname, keys in _SECTIONS.items():
        if not cp.has_section(sname):
            continue
        vals = _read_section(cp[sname])
        for key, v in vals.items():
            if key not in keys or key not in known:
                raise ParameterError(f"[{sname}] unknown key {key!r}")
            updates[key] = v
    params = replace(base, **updates)

    ops = dict(OPERATING_POINTS)
    extra: dict[str, dict[str, str]] = {}
    for sname in cp.sections():
        if sname.startswith("operating_point."):
            name = sname.split(".", 1)[1]
            vals = _read_section(cp[sname])
            start = asdict(ops[name]) if name in ops else {}
            start.update(vals)
            start["name"] = name
            try:
                ops[name] = OperatingPoint(**start)
            except TypeError as exc:
                raise ParameterError(f"[{sname}] incomplete or unknown keys: {exc}") from exc
        elif sname not in _SECTIONS:
            extra[sname] = dict(cp[sname])
    return Config(params, ops, extra)


def reduced_coefficients_for(cfg: Config) -> ReducedCoefficients:
    """Derived one-axis coefficients with any ``[reduced_coefficients]`` overrides applied."""
    rc = derive_reduced_coefficients(cfg.params)
    over = cfg.extra.get("reduced_coefficients")
    if not over:
        return rc
    known = {f.name for f in fields(ReducedCoefficients)}
    vals = {}
    for key, raw in over.items():
        if key not in known:
            raise ParameterError(f"[reduced_coefficients] unknown key {key!r}")
        try:
            vals[key] = float(raw)
        except ValueError as exc:
            raise ParameterError(f"[reduced_coefficients] {key}: not a number: {raw!r}") from exc
    return replace(rc, **vals)


def simulation_setting(cfg: Config, key: str, default: float) -> float:
    """Numeric entry of the ``[simulation]`` section, e.g. the test-signal step height ``gamma_h``."""
    raw = cfg.extra.get("simulation", {}).get(key)
    if raw is None:
        return default
    try:
        return float(raw)
    except ValueError as exc:
        raise ParameterError(f"[simulation] {key}: not a number: {raw!r}") from exc


def load_config(path: str | Path | None = None) -> Config:
    """Load a sectioned key=value parameter file; ``None`` gives the bundled defaults."""
    if path is None:
        return Config(MachineParams(), dict(OPERATING_POINTS))
    return parse_config(Path(path).read_text())


def dump_config(cfg: Config) -> str:
    p = cfg.params
    lines: list[str] = []
    for sname, keys in _SECTIONS.items():
        lines.append(f"[{sname}]")
        for key in keys:
            v = getattr(p, key)
            if key == "alpha":
                lines.append(f"alpha_deg = {math.degrees(v)!r}")
            else:
                lines.append(f"{key} = {'none' if v is None else repr(v)}")
        lines.append("")
    for name, op in cfg.operating_points.items():
        lines.append(f"[operating_point.{name}]")
        for key, v in asdict(op).items():
            if key != "name":
                lines.append(f"{key} = {v!r}")
        lines.append("")
    for sname, vals in cfg.extra.items():
        lines.append(f"[{sname}]")
        lines.extend(f"{k} = {v}" for k, v in vals.items())
        lines.append("")
    return "\n".join(lines)
