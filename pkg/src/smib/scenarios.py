"""Named closed-loop and linearization runs with their default design parameters.

Scenario names carry a section-style prefix so runs can be matched to the figures
they reproduce. Every gain is synthesized from the stored design inputs at run time.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import fbl as fb
from . import sim
from ._io import atomic_write_text
from .design import (
    GainMatrix, LtrSchedule, PidGains, gains_to_text, kalman_ltr_gain, lqr_gain,
    observer_gain, pid_controller, place_poles,
)
from .linearize import Equilibrium, StateSpaceModel, find_equilibrium, linearize_reduced, linearize_truth
from .numlin import eigenvalues
from .params import (
    Config, derive_truth_coefficients, reduced_coefficients_for, simulation_setting,
)
from .reduced_model import reduced_output

# step height whose final one-axis equilibrium sits at delta = 0.725 rad (V_t = 0.820)
GAMMA_H_CALIBRATED = 0.019983560850885467
PERTURBATION = {"T_m": 0.05}  # mechanical torque kick applied at t = 0
LINEAR_PERTURBATION = {"d_E_q_prime": 0.05, "d_omega": 0.01}


def _diag(*v) -> np.ndarray:
    return np.diag(np.array(v, dtype=float))


LQR_LINEAR = (_diag(300, 250, 200, 200, 250), 0.5 * np.eye(2))
LQR_RETUNED = (_diag(40000, 10000, 250000, 500, 500), 0.07 * np.eye(2))
POLES_LINEAR = (-0.8, -0.9, -0.7, -1.1, -1.0)
POLES_REDUCED = (-300.0, -0.9, -280.0, -5.0, -70.0)
POLES_TRUTH = (-8.0 + 0.05j, -8.0 - 0.05j, -200.0, -250.0, -0.1)
POLES_OBSERVER_PLACE = (-0.7, -0.8, -0.5, -0.9, -0.8)
LQR_OBS_VT = (np.eye(5), 20.0 * np.eye(2))
LQR_OBS_VT_OMEGA = (np.eye(5), np.eye(2))
LQR_OBS_REDUCED = (_diag(5, 5, 0.5, 0.05, 5), 1000.0 * np.eye(2))
LQR_LTR_REDUCED = (_diag(1254.75, 1500, 544.5, 142.5, 1500), np.eye(2))
LQR_LTR_TRUTH = (_diag(7500, 15000, 16500, 7500, 7500), np.eye(2))
LTR_REDUCED = dict(V10=np.eye(5), V20=np.eye(2), V=np.eye(2), q=9.0005)
LTR_TRUTH = dict(V10=np.eye(5), V20=0.65 * np.eye(2), V=np.eye(2), q=5.25)
FBL_REDUCED = (_diag(300, 250, 200, 200, 250), 0.07 * np.eye(2))
FBL_TRUTH = (250.0 * np.eye(5), 30000.0 * np.eye(2))
PID_LINEAR = {"AVR": (10.0, 10.0, 4.0), "LFC": (200.0, 150.0, 100.0)}
PID_TRUTH = {"AVR": (2000.0, 15000.0, 4.0), "LFC": (2000.0, 1500.0, 1000.0)}
OBSERVER_RHO = 12.0


@dataclass(frozen=True)
class Scenario:
    name: str
    plant: str  # truth | reduced | linear
    controller: str  # none | open-loop | pid | lqr | place | observer-lqr | observer-place | ltr-lqg | fbl
    op: str = "I"
    horizon: float = 30.0
    integrator: str = "rk45"
    design: dict = field(default_factory=dict)
    perturbation: dict | None = None
    G_V_max: float | None = None
    limits: bool | None = None  # None: on for nonlinear plants, off for the linear plant
    description: str = ""

    @property
    def limits_enabled(self) -> bool:
        return self.plant != "linear" if self.limits is None else self.limits


def _registry() -> dict[str, Scenario]:
    S: list[Scenario] = []
    add = S.append
    add(Scenario("sec3.4-linearize-op1", "reduced", "none", description="one-axis linearization at OP I"))
    add(Scenario("sec3.4-linearize-truth-op1", "truth", "none", description="ninth-order linearization at OP I"))
    for tag in ("Gamma1", "Gamma2"):
        k = tag[-1]
        add(Scenario(f"sec5-gamma{k}-reduced", "reduced", "open-loop", horizon=800.0,
                     design={"signal": tag, "h": GAMMA_H_CALIBRATED},
                     description=f"{tag} staircase on both inputs, one-axis plant"))
        add(Scenario(f"sec5-gamma{k}-truth", "truth", "open-loop", horizon=800.0, integrator="lsoda",
                     design={"signal": tag, "h": GAMMA_H_CALIBRATED},
                     description=f"{tag} staircase on both inputs, ninth-order plant"))
    add(Scenario("sec6.2-pid-decoupled-linear", "linear", "pid", design={"pid": PID_LINEAR, "coupled": False},
                 description="AVR and LFC PID loops on the decoupled linear model"))
    add(Scenario("sec6.2-pid-coupled-linear", "linear", "pid", design={"pid": PID_LINEAR, "coupled": True},
                 description="AVR and LFC PID loops on the coupled linear model"))
    add(Scenario("sec6.3-pid-reduced", "reduced", "pid", design={"pid": PID_LINEAR},
                 description="linear-design PID gains on the one-axis plant"))
    add(Scenario("sec6.4-pid-truth", "truth", "pid", horizon=300.0, integrator="lsoda", design={"pid": PID_TRUTH},
                 description="retuned PID gains on the ninth-order plant"))
    add(Scenario("sec7.1.1-lqr-linear", "linear", "lqr", design={"lqr": LQR_LINEAR}))
    add(Scenario("sec7.1.2-lqr-reduced-original", "reduced", "lqr", design={"lqr": LQR_LINEAR},
                 description="linear-design LQR gains on the one-axis plant"))
    add(Scenario("sec7.1.2-lqr-reduced", "reduced", "lqr", design={"lqr": LQR_RETUNED},
                 description="retuned LQR gains on the one-axis plant"))
    add(Scenario("sec7.1.3-lqr-truth", "truth", "lqr", horizon=3000.0, integrator="lsoda",
                 design={"lqr": LQR_RETUNED}))
    add(Scenario("sec7.2.1-place-linear", "linear", "place", design={"poles": POLES_LINEAR}))
    add(Scenario("sec7.2.2-place-reduced-original", "reduced", "place", design={"poles": POLES_LINEAR}))
    add(Scenario("sec7.2.2-place-reduced", "reduced", "place", design={"poles": POLES_REDUCED}))
    add(Scenario("sec7.2.3-place-truth", "truth", "place", horizon=3000.0, integrator="lsoda",
                 design={"poles": POLES_TRUTH}))
    add(Scenario("sec7.3.1-observer-lqr-vt-linear", "linear", "observer-lqr", horizon=60.0,
                 design={"lqr": LQR_OBS_VT, "outputs": "Vt", "rho": OBSERVER_RHO}))
    add(Scenario("sec7.3.1-observer-lqr-linear", "linear", "observer-lqr", horizon=60.0,
                 design={"lqr": LQR_OBS_VT_OMEGA, "outputs": "Vt_omega", "rho": OBSERVER_RHO}))
    add(Scenario("sec7.3.2-observer-place-linear", "linear", "observer-place", horizon=60.0,
                 design={"poles": POLES_OBSERVER_PLACE, "outputs": "Vt_omega", "rho": OBSERVER_RHO}))
    add(Scenario("sec7.3.3-observer-lqr-reduced", "reduced", "observer-lqr", horizon=200.0,
                 design={"lqr": LQR_OBS_REDUCED, "outputs": "Vt_omega", "rho": OBSERVER_RHO}))
    add(Scenario("sec7.3.4-ltr-reduced", "reduced", "ltr-lqg", horizon=60.0,
                 design={"lqr": LQR_LTR_REDUCED, "ltr": LTR_REDUCED}))
    add(Scenario("sec7.3.5-ltr-truth", "truth", "ltr-lqg", horizon=3000.0, integrator="lsoda",
                 design={"lqr": LQR_LTR_TRUTH, "ltr": LTR_TRUTH}))
    add(Scenario("sec8.1-fbl-reduced", "reduced", "fbl", horizon=20.0, design={"fbl": FBL_REDUCED}, G_V_max=1.5))
    add(Scenario("sec8.2-fbl-truth", "truth", "fbl", horizon=3000.0, integrator="lsoda",
                 design={"fbl": FBL_TRUTH}, G_V_max=1.5))
    for op, tag in (("II", "op2"), ("III", "op3")):
        add(Scenario(f"sec9-lqr-{tag}", "truth", "lqr", op=op, horizon=3000.0, integrator="lsoda",
                     design={"lqr": LQR_RETUNED}, G_V_max=1.5))
        add(Scenario(f"sec9-ltr-{tag}", "truth", "ltr-lqg", op=op, horizon=3000.0, integrator="lsoda",
                     design={"lqr": LQR_LTR_TRUTH, "ltr": LTR_TRUTH}, G_V_max=1.5))
        add(Scenario(f"sec9-fbl-{tag}", "truth", "fbl", op=op, horizon=3000.0, integrator="lsoda",
                     design={"fbl": FBL_TRUTH}, G_V_max=1.5))
    return {s.name: s for s in S}


SCENARIOS: dict[str, Scenario] = _registry()


class UnknownScenario(KeyError):
    def __init__(self, name: str):
        super().__init__(name)
        self.name = name

    def __str__(self) -> str:
        return f"unknown scenario {self.name!r}; known: " + ", ".join(SCENARIOS)


def get_scenario(name: str) -> Scenario:
    try:
        return SCENARIOS[name]
    except KeyError:
        raise UnknownScenario(name) from None


# ---------------------------------------------------------------- preparation

@dataclass
class Prepared:
    scenario: Scenario
    plant: sim.Plant | None
    controller: sim.Controller | None
    x0: np.ndarray | None
    options: sim.SimOptions
    refs: dict
    statespace: StateSpaceModel | None
    gains: dict
    info: dict


@dataclass
class Models:
    cfg: Config
    rc: object
    tc: object
    kf: fb.FblCoefficients

    @classmethod
    def from_config(cls, cfg: Config) -> "Models":
        rc = reduced_coefficients_for(cfg)
        return cls(cfg, rc, derive_truth_coefficients(cfg.params), fb.fbl_coefficients(rc, cfg.params))

    def anchors(self, op: str) -> dict:
        if op not in self.cfg.operating_points:
            raise KeyError(f"unknown operating point {op!r}")
        o = self.cfg.operating_points[op]
        return {"delta0": o.delta_0, "Tm0": o.T_m0}

    def reduced_eq(self, op: str) -> Equilibrium:
        return find_equilibrium("reduced", self.anchors(op), self.rc)

    def truth_eq(self, op: str) -> Equilibrium:
        return find_equilibrium("truth", self.anchors(op), self.tc, self.cfg.params)

    def design_model(self) -> StateSpaceModel:
        """Controllers are always designed about OP I."""
        return linearize_reduced(self.reduced_eq("I"), self.rc)


def _perturbed(x: np.ndarray, labels: tuple, pert: dict) -> np.ndarray:
    x = np.array(x, dtype=float)
    for k, v in pert.items():
        if k not in labels:
            raise KeyError(f"perturbation names unknown state {k!r}")
        x[labels.index(k)] += v
    return x


def _output_matrix(lin: StateSpaceModel, outputs: str) -> np.ndarray:
    C = np.asarray(lin.C, dtype=float)
    return C[:1] if outputs == "Vt" else C


def prepare(scn: Scenario, cfg: Config, integrator: str | None = None, dt: float | None = None,
            seed: int = 0, limits: bool = True) -> Prepared:
    """Resolve the plant, controller, references and gains of ``scn`` without simulating."""
    m = Models.from_config(cfg)
    p = cfg.params
    lin = m.design_model()
    info = {"scenario": scn.name, "plant": scn.plant, "controller": scn.controller, "op": scn.op, "seed": seed}
    opts = sim.SimOptions(integrator=integrator or scn.integrator)
    if dt is not None:
        opts.dt = dt
    opts.limits = sim.Limits.from_params(p, enabled=limits and scn.limits_enabled, G_V_max=scn.G_V_max)

    if scn.controller == "none":
        if scn.plant == "truth":
            ss = linearize_truth(m.truth_eq(scn.op), m.tc)
        else:
            ss = linearize_reduced(m.reduced_eq(scn.op), m.rc)
        return Prepared(scn, None, None, None, opts, {}, ss, {}, info)

    # plant, its starting state and the set point in one-axis coordinates
    eq = m.reduced_eq(scn.op)
    if scn.plant == "linear":
        plant = sim.linear_plant(lin, scn.design.get("coupled", True))
        ref = sim.Reference(np.zeros(5), np.zeros(2), np.zeros(2))
        x_eq = np.zeros(5)
        pert = LINEAR_PERTURBATION if scn.perturbation is None else scn.perturbation
        refs = {k: 0.0 for k in plant.state_labels + plant.output_labels}
    else:
        ref = sim.Reference(eq.x0, eq.u0, reduced_output(eq.x0, m.rc))
        if scn.plant == "reduced":
            plant = sim.reduced_plant(m.rc)
            x_eq, u_eq = eq.x0, eq.u0
        elif scn.plant == "truth":
            plant = sim.truth_plant(m.tc, p, m.kf)
            teq = m.truth_eq(scn.op)
            x_eq, u_eq = teq.x0, teq.u0
        else:
            raise ValueError(f"unknown plant {scn.plant!r}")
        pert = PERTURBATION if scn.perturbation is None else scn.perturbation
        y_eq = plant.output(x_eq, u_eq)
        refs = {"V_t": float(y_eq[0]), "omega": 1.0, "delta": float(x_eq[plant.state_labels.index("delta")])}
    gains: dict = {}
    d = scn.design

    if scn.controller == "open-loop":
        h = simulation_setting(cfg, "gamma_h", d.get("h", sim.GAMMA_H_DEFAULT))
        sig = sim.staircase(d["signal"], h)
        # absolute inputs; the plant starts from its OP-I equilibrium
        ctl = sim.OpenLoop(np.zeros(2), sig, sig)
        x0 = x_eq
        info["gamma_h"] = h
        refs = {}
    elif scn.controller == "pid":
        g = d["pid"]
        avr = pid_controller(PidGains(*g["AVR"], loop="AVR"))
        lfc = pid_controller(PidGains(*g["LFC"], loop="LFC"))
        lim = opts.limits.E_FD if opts.limits.enabled else None
        ctl = sim.DualPid(avr, lfc, ref, lim)
        x0 = _perturbed(x_eq, plant.state_labels, pert)
        gains = {"pid_avr": np.array([g["AVR"]]), "pid_lfc": np.array([g["LFC"]])}
    elif scn.controller in ("lqr", "place"):
        K = _state_gain(scn, lin, seed)
        ctl = sim.StateFeedback(K, ref, scn.controller)
        x0 = _perturbed(x_eq, plant.state_labels, pert)
        gains = {"K": K.K}
    elif scn.controller in ("observer-lqr", "observer-place"):
        K = _state_gain(scn, lin, seed)
        C = _output_matrix(lin, d["outputs"])
        poles = np.linalg.eigvals(K.closed_loop(lin.A, lin.B))
        L = observer_gain(lin.A, C, rho=d["rho"], controller_poles=poles, seed=seed)
        ctl = sim.ObserverFeedback(K, L, lin.A, lin.B, C, ref, scn.controller)
        x0 = _perturbed(x_eq, plant.state_labels, pert)
        gains = {"K": K.K, "L": L.L}
    elif scn.controller == "ltr-lqg":
        K = _state_gain(scn, lin, seed)
        L = kalman_ltr_gain(lin, LtrSchedule(**d["ltr"]))
        ctl = sim.ObserverFeedback(K, L, lin.A, lin.B, lin.C, ref, "ltr-lqg")
        x0 = _perturbed(x_eq, plant.state_labels, pert)
        gains = {"K": K.K, "H": L.L}
    elif scn.controller == "fbl":
        if scn.plant == "linear":
            raise ValueError("feedback linearization needs a nonlinear plant")
        K = fb.brunovsky_lqr(*d["fbl"])
        ctl = sim.Fbl(fb.FblSetpoint(eq.x0[2], eq.x0[3]), K, m.rc, m.kf)
        x0 = _perturbed(x_eq, plant.state_labels, pert)
        gains = {"K": K.K}
    else:
        raise ValueError(f"unknown controller {scn.controller!r}")
    uses_lin = scn.plant == "linear" or scn.controller not in ("open-loop", "pid", "fbl")
    return Prepared(scn, plant, ctl, x0, opts, refs, lin if uses_lin else None, gains, info)


def _state_gain(scn: Scenario, lin: StateSpaceModel, seed: int) -> GainMatrix:
    d = scn.design
    if "lqr" in d:
        return lqr_gain(lin, *d["lqr"])
    return place_poles(lin.A, lin.B, d["poles"], seed=seed)


# ---------------------------------------------------------------- running

@dataclass
class RunResult:
    prepared: Prepared
    trajectory: sim.Trajectory | None
    metrics: dict
    files: list


def run(scn: Scenario | str, cfg: Config, out_dir: str | Path | None = None, **kw) -> RunResult:
    """Prepare, simulate and (when ``out_dir`` is given) write the scenario artifacts.

    Raises :class:`sim.SimulationDiverged` after writing the partial trajectory.
    """
    if isinstance(scn, str):
        scn = get_scenario(scn)
    prep = prepare(scn, cfg, **kw)
    files: list = []
    target = Path(out_dir) / scn.name if out_dir is not None else None

    if prep.statespace is not None and target is not None:
        prep.statespace.write_csv(target / "statespace.csv")
        files.append(target / "statespace.csv")
    if prep.gains and target is not None:
        atomic_write_text(target / "gains.txt", gains_to_text(prep.gains, prep.info))
        files.append(target / "gains.txt")

    if prep.plant is None:
        eig = eigenvalues(prep.statespace.A)
        ms = {"eig": eig}
        if target is not None:
            lines = [f"{k}={v}" for k, v in prep.info.items()]
            lines += [f"eig{i}={z.real:.12g}{z.imag:+.12g}j" for i, z in enumerate(eig)]
            atomic_write_text(target / "metrics.txt", "\n".join(lines) + "\n")
            files.append(target / "metrics.txt")
        return RunResult(prep, None, ms, files)

    meta = dict(prep.info)
    meta["horizon"] = scn.horizon
    tr = sim.simulate(prep.plant, prep.controller, prep.x0, scn.horizon, prep.options, meta)
    if target is not None:
        tr.write_csv(target / "trajectory.csv")
        files.append(target / "trajectory.csv")
    if not tr.complete:
        raise sim.SimulationDiverged(f"{scn.name}: {tr.message}", tr)
    ms = sim.metrics(tr, prep.refs, scn.horizon)
    if target is not None:
        extra = dict(prep.info)
        extra.update({f"ref.{k}": f"{v:.12g}" for k, v in prep.refs.items()})
        atomic_write_text(target / "metrics.txt", sim.metrics_to_text(ms, extra))
        files.append(target / "metrics.txt")
    return RunResult(prep, tr, ms, files)


def with_overrides(scn: Scenario, **changes) -> Scenario:
    return replace(scn, **changes)
