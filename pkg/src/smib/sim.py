"""Closed-loop simulation: plants, controllers, test signals, trajectories and metrics.

Every controller works in one-axis coordinates ``[E'_q, omega, delta, T_m, G_V]`` with
inputs ``[E_FD, u_T]``. Each plant maps its own state into those coordinates and maps
``E_FD`` back to its own first input. The linear plant works in deviations throughout.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import fbl as fb
from . import reduced_model as rm
from . import truth_model as tm
from ._io import atomic_write_text
from .design import GainMatrix, ObserverGain, PidController
from .linearize import StateSpaceModel
from .ode import integrate as ode_integrate
from .params import MachineParams, ReducedCoefficients, TruthCoefficients

DIVERGENCE_BOUND = 1e6


class SimulationDiverged(RuntimeError):
    def __init__(self, message: str, trajectory: "Trajectory | None" = None):
        super().__init__(message)
        self.trajectory = trajectory


# ---------------------------------------------------------------- test signals

@dataclass(frozen=True)
class TestSignal:
    times: tuple
    amplitudes: tuple  # cumulative level after each step
    tag: str = "custom"

    __test__ = False  # not a pytest class

    def __post_init__(self) -> None:
        if len(self.times) != len(self.amplitudes) or not self.times:
            raise ValueError("need one amplitude per step time")
        if self.times[0] != 0.0 or any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("step times must start at 0 and increase strictly")

    def __call__(self, t: float) -> float:
        level = 0.0
        for ti, a in zip(self.times, self.amplitudes):
            if t >= ti:
                level = a
            else:
                break
        return level


GAMMA_H_DEFAULT = 0.05


def staircase(tag: str = "Gamma1", h: float = GAMMA_H_DEFAULT, times=None, heights=None) -> TestSignal:
    """Gamma1 has four steps of ``h`` at 0, 200, 400, 600 s; Gamma2 uses ``h/2``."""
    if tag == "custom":
        if times is None or heights is None:
            raise ValueError("custom staircase needs times and heights")
        return TestSignal(tuple(float(t) for t in times), tuple(np.cumsum(heights).tolist()), "custom")
    step = {"Gamma1": h, "Gamma2": 0.5 * h}.get(tag)
    if step is None:
        raise ValueError(f"unknown test signal {tag!r}")
    ts = (0.0, 200.0, 400.0, 600.0)
    return TestSignal(ts, tuple(step * (i + 1) for i in range(4)), tag)


# ---------------------------------------------------------------- plants

@dataclass
class Limits:
    E_FD: tuple = (-5.0, 5.0)
    G_V: tuple = (0.0, 1.2)
    enabled: bool = True

    @classmethod
    def from_params(cls, p: MachineParams, enabled: bool = True, G_V_max: float | None = None) -> "Limits":
        return cls((p.E_FD_min, p.E_FD_max), (p.G_V_min, p.G_V_max if G_V_max is None else G_V_max), enabled)


@dataclass
class Plant:
    kind: str
    state_labels: tuple
    input_labels: tuple
    output_labels: tuple
    rhs: Callable[[np.ndarray, np.ndarray], np.ndarray]
    output: Callable[[np.ndarray, np.ndarray], np.ndarray]
    reduced_view: Callable[[np.ndarray], np.ndarray]
    to_input: Callable[[np.ndarray], np.ndarray]  # E_FD-style control -> plant input
    gv_index: int
    offset_x: np.ndarray  # absolute = offset + state (nonzero only for the linear plant)
    offset_u: np.ndarray
    extra: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.state_labels)


def reduced_plant(rc: ReducedCoefficients) -> Plant:
    return Plant(
        "reduced", rm.STATE_LABELS, rm.INPUT_LABELS, rm.OUTPUT_LABELS,
        lambda x, u: rm.reduced_rhs(x, u, rc),
        lambda x, u: rm.reduced_output(x, rc),
        lambda x: np.asarray(x, dtype=float),
        lambda u: np.asarray(u, dtype=float),
        4, np.zeros(5), np.zeros(2),
    )


def truth_plant(tc: TruthCoefficients, p: MachineParams, kf: fb.FblCoefficients,
                reconstruction: str = "field_angle") -> Plant:
    return Plant(
        "truth", tm.STATE_LABELS, tm.INPUT_LABELS, tm.OUTPUT_LABELS,
        lambda x, u: tm.truth_rhs(x, u, tc),
        lambda x, u: tm.truth_output(x, u, tc),
        lambda x: fb.truth_to_reduced(x, kf, reconstruction),
        lambda u: np.array([fb.efd_to_vf(float(u[0]), p), float(u[1])]),
        8, np.zeros(9), np.zeros(2),
        {"reconstruction": reconstruction},
    )


def linear_plant(ss: StateSpaceModel, coupled: bool = True) -> Plant:
    A, B, C = rm.coupled_linear_model(ss, coupled)
    labels = tuple("d_" + s for s in ss.state_labels)
    return Plant(
        "linear", labels, tuple("d_" + s for s in ss.input_labels), tuple("d_" + s for s in ss.output_labels),
        lambda x, u: A @ x + B @ u,
        lambda x, u: C @ x,
        lambda x: np.asarray(x, dtype=float),
        lambda u: np.asarray(u, dtype=float),
        4, np.array(ss.x0, dtype=float), np.array(ss.u0, dtype=float),
        {"A": A, "B": B, "C": C, "coupled": coupled},
    )


# ---------------------------------------------------------------- controllers

@dataclass
class Reference:
    """Set point in the plant's one-axis coordinates: state, input and measured outputs."""
    x: np.ndarray
    u: np.ndarray
    y: np.ndarray


class Controller:
    name = "controller"
    state_labels: tuple = ()

    def initial_state(self, plant: Plant, x0: np.ndarray) -> np.ndarray:
        return np.zeros(len(self.state_labels))

    def control(self, t: float, x: np.ndarray, xc: np.ndarray, plant: Plant) -> np.ndarray:
        raise NotImplementedError

    def derivative(self, t: float, x: np.ndarray, xc: np.ndarray, u: np.ndarray, plant: Plant) -> np.ndarray:
        return np.zeros(0)


class OpenLoop(Controller):
    """u(t) = base + [signal_E_FD(t), signal_u_T(t)]."""

    name = "open-loop"

    def __init__(self, base, efd_signal=None, ut_signal=None):
        self.base = np.asarray(base, dtype=float)
        self.efd_signal = efd_signal
        self.ut_signal = ut_signal

    def control(self, t, x, xc, plant):
        u = self.base.copy()
        if self.efd_signal is not None:
            u[0] += self.efd_signal(t)
        if self.ut_signal is not None:
            u[1] += self.ut_signal(t)
        return u


class StateFeedback(Controller):
    """u = u_ref - K (x - x_ref) on the one-axis view of the plant state."""

    def __init__(self, K: GainMatrix | np.ndarray, ref: Reference, name: str = "state-feedback"):
        self.K = K.K if isinstance(K, GainMatrix) else np.asarray(K, dtype=float)
        self.ref = ref
        self.name = name

    def control(self, t, x, xc, plant):
        return self.ref.u - self.K @ (plant.reduced_view(x) - self.ref.x)


class ObserverFeedback(Controller):
    """u = u_ref - K x_hat with a linear estimator driven by measured outputs.

    x_hat' = A x_hat + B du + L (dy - C x_hat), du = u - u_ref, dy = y - y_ref.
    """

    state_labels = tuple("hat_" + s for s in rm.STATE_LABELS)

    def __init__(self, K, L: ObserverGain | np.ndarray, A, B, C, ref: Reference, name: str = "observer"):
        self.K = K.K if isinstance(K, GainMatrix) else np.asarray(K, dtype=float)
        self.L = L.L if isinstance(L, ObserverGain) else np.asarray(L, dtype=float)
        self.A, self.B, self.C = (np.asarray(M, dtype=float) for M in (A, B, C))
        self.ref = ref
        self.name = name
        self.x_hat0 = np.zeros(self.A.shape[0])

    def initial_state(self, plant, x0):
        return self.x_hat0.copy()

    def _measure(self, x, u, plant):
        y = plant.output(x, plant.to_input(u))
        return y[: self.C.shape[0]] - self.ref.y[: self.C.shape[0]]

    def control(self, t, x, xc, plant):
        return self.ref.u - self.K @ xc

    def derivative(self, t, x, xc, u, plant):
        dy = self._measure(x, u, plant)
        return self.A @ xc + self.B @ (u - self.ref.u) + self.L @ (dy - self.C @ xc)


class DualPid(Controller):
    """AVR PID on the V_t error driving E_FD and LFC PID on the omega error driving u_T.

    Each loop is the filtered realization from :func:`design.pid_controller`.
    The omega-error integral equals the rotor angle error, so its initial value is
    taken from the starting angle offset. When ``efd_limits`` is given the AVR
    integrator is bled by back-calculation with tracking time sqrt(Ti*Td).
    Plants with input feedthrough close an algebraic loop through V_t, solved by
    the secant method.
    """

    state_labels = ("avr_int", "avr_filt", "lfc_int", "lfc_filt")
    name = "pid"

    def __init__(self, avr: PidController, lfc: PidController, ref: Reference, efd_limits=None):
        self.avr, self.lfc, self.ref = avr, lfc, ref
        self.efd_limits = efd_limits
        self._cache = None
        g = avr.gains
        if g.Ki and g.Kp and g.Kd:
            self._tracking = math.sqrt((g.Kp / g.Ki) * (g.Kd / g.Kp))
        elif g.Ki and g.Kp:
            self._tracking = g.Kp / g.Ki
        else:
            self._tracking = 1.0

    def initial_state(self, plant, x0):
        d = plant.reduced_view(x0)[2] - self.ref.x[2]
        return np.array([0.0, 0.0, -d, 0.0])

    def _law(self, x, xc, plant):
        key = (x.tobytes(), xc.tobytes())
        if self._cache is not None and self._cache[0] == key:
            return self._cache[1]
        a, l = self.avr, self.lfc
        ew = self.ref.y[1] - plant.output(x, plant.to_input(self.ref.u))[1]
        ut = self.ref.u[1] + l.C @ xc[2:] + l.D * ew
        base = self.ref.u[0] + a.C @ xc[:2]

        def err(efd):
            return self.ref.y[0] - plant.output(x, plant.to_input(np.array([efd, ut])))[0]

        # secant on r(E) = base + D e(E) - E; exact in one step without feedthrough
        e0 = self.ref.u[0]
        r0 = base + a.D * err(e0) - e0
        e1 = e0 + r0
        for _ in range(30):
            ev = err(e1)
            r1 = base + a.D * ev - e1
            if abs(r1) <= 1e-13 * max(1.0, abs(e1)) or r1 == r0:
                break
            e0, e1, r0 = e1, e1 - r1 * (e1 - e0) / (r1 - r0), r1
        out = (np.array([base + a.D * ev, ut]), ev, ew)
        self._cache = (key, out)
        return out

    def control(self, t, x, xc, plant):
        return self._law(x, xc, plant)[0]

    def derivative(self, t, x, xc, u, plant):
        raw, ev, ew = self._law(x, xc, plant)
        dav = self.avr.A @ xc[:2] + self.avr.B * ev
        if self.efd_limits is not None and self.avr.gains.Ki != 0.0:
            # back-calculation keeps the integrator continuous at the saturation boundary
            lo, hi = self.efd_limits
            off = plant.offset_u[0]
            sat = min(max(raw[0] + off, lo), hi) - off
            dav[0] += (sat - raw[0]) / (self.avr.gains.Ki * self._tracking)
        return np.concatenate([dav, self.lfc.A @ xc[2:] + self.lfc.B * ew])


class Fbl(Controller):
    name = "fbl"

    def __init__(self, sp: fb.FblSetpoint, K, rc: ReducedCoefficients, kf: fb.FblCoefficients):
        self.sp, self.rc, self.kf = sp, rc, kf
        self.K = K.K if isinstance(K, GainMatrix) else np.asarray(K, dtype=float)

    def control(self, t, x, xc, plant):
        return fb.fbl_control(plant.reduced_view(x), self.sp, self.K, self.rc, self.kf)


# ---------------------------------------------------------------- trajectories

@dataclass
class SimOptions:
    integrator: str = "rk45"
    dt: float = 1e-3
    rtol: float = 1e-8
    atol: float = 1e-10
    limits: Limits | None = None
    sample_dt: float | None = None
    max_step: float = math.inf


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    u: np.ndarray
    y: np.ndarray
    state_labels: tuple
    input_labels: tuple
    output_labels: tuple
    meta: dict = field(default_factory=dict)
    complete: bool = True
    message: str = ""

    def channel(self, name: str) -> np.ndarray:
        for labels, data in ((self.state_labels, self.x), (self.input_labels, self.u), (self.output_labels, self.y)):
            if name in labels:
                return data[:, labels.index(name)]
        if name == "t":
            return self.t
        raise KeyError(name)

    @property
    def channels(self) -> tuple:
        return tuple(self.state_labels) + tuple(self.input_labels) + tuple(self.output_labels)

    @property
    def unique_channels(self) -> tuple:
        """Channel names without repeats; an output that mirrors a state resolves to the state."""
        return tuple(dict.fromkeys(self.channels))

    def to_csv(self) -> str:
        buf = io.StringIO()
        for k, v in self.meta.items():
            buf.write(f"# {k}={v}\n")
        if not self.complete:
            buf.write(f"# terminated={self.message}\n")
        buf.write(",".join(("t",) + self.channels) + "\n")
        data = np.column_stack([self.t, self.x, self.u, self.y])
        for row in data:
            buf.write(",".join("%.12g" % v for v in row) + "\n")
        return buf.getvalue()

    def write_csv(self, path: str | Path) -> None:
        atomic_write_text(path, self.to_csv())

    @classmethod
    def from_csv(cls, text: str) -> "Trajectory":
        meta: dict = {}
        header = None
        rows = []
        for line in text.splitlines():
            if not line.strip():
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    k, v = body.split("=", 1)
                    meta[k.strip()] = v.strip()
                continue
            if header is None:
                header = line.strip().split(",")
                continue
            rows.append([float(v) for v in line.split(",")])
        if header is None or header[0] != "t":
            raise ValueError("trajectory CSV must start with a 't' column")
        data = np.array(rows, dtype=float).reshape(-1, len(header))
        n_x = int(meta.get("n_states", len(header) - 1))
        n_u = int(meta.get("n_inputs", 0))
        cols = header[1:]
        xs, us, ys = cols[:n_x], cols[n_x:n_x + n_u], cols[n_x + n_u:]
        complete = "terminated" not in meta
        return cls(data[:, 0], data[:, 1:1 + n_x], data[:, 1 + n_x:1 + n_x + n_u], data[:, 1 + n_x + n_u:],
                   tuple(xs), tuple(us), tuple(ys), meta, complete, meta.get("terminated", ""))


def _clamp_control(u: np.ndarray, plant: Plant, lim: Limits | None) -> np.ndarray:
    if lim is None or not lim.enabled:
        return u
    lo, hi = lim.E_FD
    off = plant.offset_u[0]
    u = u.copy()
    u[0] = min(max(u[0] + off, lo), hi) - off
    return u


def _gv_projection(gi: int, off: float, bounds: tuple):
    lo, hi = bounds

    def post(z):
        g = z[gi] + off
        if lo <= g <= hi:
            return z
        z = z.copy()
        z[gi] = min(max(g, lo), hi) - off
        return z

    return post


def simulate(plant: Plant, controller: Controller, x0, horizon: float, options: SimOptions | None = None,
             meta: dict | None = None) -> Trajectory:
    """Integrate the closed loop from ``x0`` over ``[0, horizon]``.

    The controller is evaluated inside every integrator stage. With limits enabled
    E_FD is clamped before it reaches the plant, G_V stops integrating outward at
    its bounds, and the explicit integrators also project G_V back after each step.
    """
    opt = options or SimOptions()
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (plant.n,) or not np.all(np.isfinite(x0)):
        raise ValueError("x0 must be a finite vector matching the plant")
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    n = plant.n
    xc0 = np.asarray(controller.initial_state(plant, x0), dtype=float)
    z0 = np.concatenate([x0, xc0])
    lim = opt.limits
    gv_limit = lim.G_V if lim is not None and lim.enabled else None
    gv_i, gv_off = plant.gv_index, plant.offset_x[plant.gv_index]

    def applied(t, z):
        x, xc = z[:n], z[n:]
        return _clamp_control(np.asarray(controller.control(t, x, xc, plant), dtype=float), plant, lim)

    def f(t, z):
        if not np.all(np.abs(z) < DIVERGENCE_BOUND):
            return np.full_like(z, np.nan)
        x, xc = z[:n], z[n:]
        u = applied(t, z)
        dx = plant.rhs(x, plant.to_input(u))
        if gv_limit is not None:
            g = x[gv_i] + gv_off
            if (g >= gv_limit[1] and dx[gv_i] > 0.0) or (g <= gv_limit[0] and dx[gv_i] < 0.0):
                dx[gv_i] = 0.0
        dxc = controller.derivative(t, x, xc, u, plant)
        return np.concatenate([dx, dxc])

    post = _gv_projection(gv_i, gv_off, gv_limit) if gv_limit is not None else None

    sample_dt = opt.sample_dt or max(opt.dt if opt.integrator == "rk4" else 0.0, horizon / 4000.0)
    m = max(1, int(round(horizon / sample_dt)))
    grid = np.linspace(0.0, horizon, m + 1)
    res = ode_integrate(f, z0, grid, method=opt.integrator, dt=opt.dt, rtol=opt.rtol, atol=opt.atol,
                        max_step=opt.max_step, post=post)
    k = res.n_ok
    Z = res.y[:k]
    U = np.array([plant.to_input(applied(t, z)) for t, z in zip(grid[:k], Z)]).reshape(k, 2)
    Y = np.array([plant.output(z[:n], u) for z, u in zip(Z, U)]).reshape(k, -1)
    labels = tuple(plant.state_labels) + tuple(controller.state_labels)
    info = {"plant": plant.kind, "controller": controller.name, "integrator": opt.integrator,
            "dt": opt.dt if opt.integrator == "rk4" else "adaptive",
            "limits": bool(lim is not None and lim.enabled),
            "n_states": len(labels), "n_inputs": 2}
    info.update(meta or {})
    return Trajectory(grid[:k], Z, U, Y, labels, plant.input_labels, plant.output_labels, info,
                      res.success, res.message)


# ---------------------------------------------------------------- metrics

@dataclass
class ChannelMetrics:
    final: float
    ss_error: float
    settling_time: float  # nan when unsettled
    peak_deviation: float
    decaying: bool

    @property
    def settled(self) -> bool:
        return not math.isnan(self.settling_time)


def channel_metrics(t: np.ndarray, y: np.ndarray, ref: float | None = None, band: float = 0.02) -> ChannelMetrics:
    """Final value is the mean of the last 5% of samples.

    The settling band is ``band`` times the largest excursion from the final value, so
    deviation signals that end at zero and absolute signals are treated alike.
    """
    k = max(1, int(math.ceil(0.05 * len(y))))
    final = float(np.mean(y[-k:]))
    dev = np.abs(y - final)
    peak = float(dev.max())
    outside = np.flatnonzero(dev > band * peak)
    if peak <= 1e-12 * max(1.0, abs(final)) or outside.size == 0:
        settle = float(t[0])
    elif outside[-1] == len(y) - 1:
        settle = float("nan")
    else:
        settle = float(t[outside[-1] + 1])
    half = len(y) // 2
    early = float(dev[:half].max()) if half else peak
    late = float(dev[half:].max())
    decaying = late <= early or late <= 1e-12
    err = abs(final - ref) if ref is not None else float("nan")
    return ChannelMetrics(final, err, settle, peak, bool(decaying))


def metrics(tr: Trajectory, refs: dict | None = None, horizon: float | None = None) -> dict[str, ChannelMetrics]:
    refs = refs or {}
    if horizon is not None and tr.t[-1] < 0.8 * horizon:
        raise ValueError(f"trajectory covers {tr.t[-1]:.3g} of {horizon:.3g}; metrics need at least 80%")
    return {name: channel_metrics(tr.t, tr.channel(name), refs.get(name)) for name in tr.channels}


def metrics_to_text(ms: dict[str, ChannelMetrics], extra: dict | None = None) -> str:
    lines = []
    for k, v in (extra or {}).items():
        lines.append(f"{k}={v}")
    for name, m in ms.items():
        lines.append(f"{name}.final={m.final:.12g}")
        if not math.isnan(m.ss_error):
            lines.append(f"{name}.ss_error={m.ss_error:.12g}")
        lines.append(f"{name}.settling_time={'unsettled' if not m.settled else format(m.settling_time, '.6g')}")
        lines.append(f"{name}.peak_deviation={m.peak_deviation:.12g}")
        lines.append(f"{name}.decaying={str(m.decaying).lower()}")
    return "\n".join(lines) + "\n"


def parse_metrics(text: str) -> dict[str, str]:
    out = {}
    for line in text.splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out
