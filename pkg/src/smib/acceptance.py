"""Acceptance suite: twelve numbered criteria, each reporting measured against expected values.

Each criterion is a function of a :class:`~smib.params.Config` returning a
:class:`CriterionResult`. :func:`run_all` evaluates every criterion and never raises
for a numerical miss; a criterion that crashes is reported as a failure with the error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import fbl as fb
from . import reference as ref
from . import scenarios as sc
from . import sim
from .design import (
    LtrSchedule, kalman_ltr_gain, lqr_gain, ltr_asymptote_gap, match_spectra, observer_gain,
    place_poles, separation_matrix,
)
from .frames import park_matrix
from .linearize import final_value, linearize_truth
from .numlin import care_residual, eigenvalues, is_hurwitz, poly_from_roots, polynomial_roots
from .ode import integrate
from .params import Config, load_config, transient_constants
from .reduced_model import coupled_linear_model, lfc_avr_transfer_functions, reduced_rhs
from .truth_model import truth_rhs


@dataclass
class Check:
    name: str
    measured: float
    expected: float
    tol: float
    passed: bool
    relation: str = "abs"  # abs: |m - e| <= tol; le: m <= tol; rel: |m - e| <= tol |e|

    def describe(self) -> str:
        if self.relation == "le":
            return f"{self.name}={self.measured:.6g} (<= {self.tol:.3g})"
        delta = self.measured - self.expected
        bound = f"{self.tol:.3g}" + (" rel" if self.relation == "rel" else "")
        return f"{self.name}={self.measured:.6g} (expected {self.expected:.6g} +/- {bound}, delta {delta:+.3g})"


@dataclass
class CriterionResult:
    number: int
    title: str
    checks: list[Check] = field(default_factory=list)
    error: str = ""

    @property
    def passed(self) -> bool:
        return not self.error and bool(self.checks) and all(c.passed for c in self.checks)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        head = f"{status} {self.number:2d} {self.title}"
        if self.error:
            return f"{head}: error: {self.error}"
        shown = self.failures() if not self.passed else self.checks[:3]
        more = len(self.checks) - len(shown)
        body = "; ".join(c.describe() for c in shown)
        return f"{head}: {body}" + (f"; +{more} more checks" if more > 0 else "")

    # helpers used by the criterion functions
    def close(self, name: str, measured: float, expected: float, tol: float) -> Check:
        c = Check(name, float(measured), float(expected), tol, bool(abs(measured - expected) <= tol))
        self.checks.append(c)
        return c

    def relative(self, name: str, measured: float, expected: float, tol: float) -> Check:
        ok = bool(abs(measured - expected) <= tol * abs(expected))
        c = Check(name, float(measured), float(expected), tol, ok, "rel")
        self.checks.append(c)
        return c

    def at_most(self, name: str, measured: float, bound: float) -> Check:
        c = Check(name, float(measured), 0.0, bound, bool(measured <= bound), "le")
        self.checks.append(c)
        return c

    def holds(self, name: str, flag: bool) -> Check:
        c = Check(name, float(bool(flag)), 1.0, 0.0, bool(flag))
        self.checks.append(c)
        return c


# ---------------------------------------------------------------- shared pieces

def _models(cfg: Config) -> sc.Models:
    return sc.Models.from_config(cfg)


def _spectra_distance(got, want) -> float:
    return match_spectra(np.asarray(got, dtype=complex), np.asarray(want, dtype=complex))


def _run_final(cfg: Config, name: str, **overrides) -> tuple[dict, dict]:
    """Final values and references of a registered closed-loop scenario."""
    scn = sc.get_scenario(name)
    if overrides:
        scn = sc.with_overrides(scn, **overrides)
    res = sc.run(scn, cfg)
    return {k: m.final for k, m in res.metrics.items()}, res.prepared.refs


# ---------------------------------------------------------------- criteria

def derived_constants(cfg: Config) -> CriterionResult:
    r = CriterionResult(1, "derived transient constants")
    tc = transient_constants(cfg.params)
    r.close("L_d_prime", tc["L_d_prime"], ref.DERIVED_CONSTANTS["L_d_prime"], 1e-3)
    r.close("tau_d0_prime", tc["tau_d0_prime"], ref.DERIVED_CONSTANTS["tau_d0_prime"], 0.01)
    r.close("tau_j", tc["tau_j"], ref.DERIVED_CONSTANTS["tau_j"], 1e-3)
    return r


def coefficient_table(cfg: Config) -> CriterionResult:
    r = CriterionResult(2, "reduced coefficient table")
    rc = _models(cfg).rc
    for key, want in ref.REDUCED_COEFFICIENTS.items():
        r.close(key, getattr(rc, key), want, 1e-3)
    for key, want in ref.LIMIT_VALUES.items():
        r.close(key, getattr(cfg.params, key), want, 1e-3)
    return r


def reduced_linearization(cfg: Config) -> CriterionResult:
    r = CriterionResult(3, "reduced linearization at OP I")
    lin = _models(cfg).design_model()
    for name, got, want in (("A", lin.A, ref.REDUCED_A), ("B", lin.B, ref.REDUCED_B), ("C", lin.C, ref.REDUCED_C)):
        diff = np.abs(got - want)
        i, j = np.unravel_index(int(np.argmax(diff)), diff.shape)
        r.close(f"{name}[{i + 1},{j + 1}]", got[i, j], want[i, j], 1e-3)
    r.at_most("eig_distance", _spectra_distance(eigenvalues(lin.A), ref.REDUCED_EIGENVALUES), 1e-3)
    return r


def truth_linearization(cfg: Config) -> CriterionResult:
    r = CriterionResult(4, "truth linearization at OP I")
    m = _models(cfg)
    ss = linearize_truth(m.truth_eq("I"), m.tc)
    r.at_most("eig_distance", _spectra_distance(eigenvalues(ss.A), ref.TRUTH_EIGENVALUES), 2e-3)
    r.close("D11", ss.D[0, 0], ref.TRUTH_D11, 2e-3)
    return r


def equilibria(cfg: Config) -> CriterionResult:
    r = CriterionResult(5, "equilibria and steady inputs")
    m = _models(cfg)
    eq = m.reduced_eq("I")
    for label, got, want in zip(sim.reduced_plant(m.rc).state_labels, eq.x0, ref.REDUCED_EQUILIBRIUM):
        r.close(label, got, want, 2e-3)
    r.close("E_FD0", eq.u0[0], ref.E_FD0, 2e-3)
    r.close("u_T0", eq.u0[1], ref.U_T0, 1e-3)
    teq = m.truth_eq("I")
    r.close("V_F0", teq.u0[0], ref.V_F0, 2e-5)
    tab = cfg.operating_points["I"].truth_state()
    r.at_most("truth_residual", float(np.linalg.norm(truth_rhs(tab, teq.u0, m.tc), np.inf)), 1e-3)
    return r


def final_values(cfg: Config) -> CriterionResult:
    r = CriterionResult(6, "final-value theorem and step simulations")
    m = _models(cfg)
    lin = m.design_model()
    tfs = lfc_avr_transfer_functions(lin, m.rc)
    d_ss = final_value(tfs["delta_over_uT"])
    w_ss = final_value(tfs["omega_over_uT"])
    v_ss = final_value(tfs["avr_closed"])
    r.close("delta_ss", d_ss, ref.DELTA_SS, 1e-3)
    r.close("omega_ss", w_ss, ref.OMEGA_SS, 1e-3)
    r.close("avr_Vt_ss", v_ss, ref.AVR_VT_SS, 1e-3)

    # unit u_T step on the decoupled linear plant
    A, B, _ = coupled_linear_model(lin, coupled=False)
    u = np.array([0.0, 1.0])
    # the swing pair decays at about 5e-3 per unit time
    res = integrate(lambda t, x: A @ x + B @ u, np.zeros(5), np.linspace(0.0, 3000.0, 3001))
    r.close("delta_ss_sim", res.y[-1, 2], d_ss, 2e-3)
    r.close("omega_ss_sim", res.y[-1, 1], w_ss, 2e-3)

    # unit V_t reference step through the unity-feedback AVR loop
    T1 = lin.C[0, 0]
    rc = m.rc
    res = integrate(lambda t, e: np.array([rc.f11 * e[0] + rc.g11 * (1.0 - T1 * e[0])]),
                    np.zeros(1), np.linspace(0.0, 100.0, 201))
    r.close("avr_Vt_ss_sim", T1 * res.y[-1, 0], v_ss, 2e-3)
    return r


def lqr(cfg: Config) -> CriterionResult:
    r = CriterionResult(7, "LQR on the OP-I reduced model")
    lin = _models(cfg).design_model()
    Q, R = sc.LQR_LINEAR
    g = lqr_gain(lin, Q, R)
    for i in range(2):
        for j in range(5):
            r.relative(f"K[{i + 1},{j + 1}]", g.K[i, j], ref.LQR_K[i, j], 0.02)
    res = float(np.linalg.norm(care_residual(lin.A, lin.B, Q, R, g.inputs["P"]), np.inf))
    r.at_most("care_residual", res, 1e-7)
    r.holds("hurwitz", is_hurwitz(g.closed_loop(lin.A, lin.B)))
    return r


def placement(cfg: Config) -> CriterionResult:
    r = CriterionResult(8, "pole placement and separation")
    lin = _models(cfg).design_model()
    A, B, C = lin.A, lin.B, lin.C
    for tag, poles in (("linear", sc.POLES_LINEAR), ("reduced", sc.POLES_REDUCED), ("truth", sc.POLES_TRUTH)):
        g = place_poles(A, B, poles)
        r.at_most(f"placed_{tag}", _spectra_distance(eigenvalues(g.closed_loop(A, B)), poles), 1e-6)

    designs = []
    for Q, R in (sc.LQR_OBS_VT, sc.LQR_OBS_VT_OMEGA):
        designs.append(lqr_gain(lin, Q, R).K)
    designs.append(place_poles(A, B, sc.POLES_OBSERVER_PLACE).K)
    for tag, K, Cm in (("obs_lqr_vt", designs[0], C[:1]), ("obs_lqr", designs[1], C),
                       ("obs_place", designs[2], C)):
        L = observer_gain(A, Cm, rho=sc.OBSERVER_RHO, controller_poles=eigenvalues(A - B @ K)).L
        _separation_check(r, tag, A, B, Cm, K, L)
    K = lqr_gain(lin, *sc.LQR_LTR_REDUCED).K
    H = kalman_ltr_gain(lin, LtrSchedule(**sc.LTR_REDUCED)).L
    _separation_check(r, "ltr", A, B, C, K, H)
    return r


def _separation_check(r: CriterionResult, tag: str, A, B, C, K, L) -> None:
    joint = eigenvalues(separation_matrix(A, B, C, K, L))
    parts = np.concatenate([eigenvalues(A - B @ K), eigenvalues(A - L @ C)])
    r.at_most(f"separation_{tag}", _spectra_distance(joint, parts), 1e-6)


def ltr(cfg: Config) -> CriterionResult:
    r = CriterionResult(9, "LTR asymptote")
    lin = _models(cfg).design_model()
    gaps = []
    for q in (10.0, 30.0, 100.0, 300.0):
        sched = LtrSchedule(np.eye(5), np.eye(2), np.eye(2), q)
        gaps.append(ltr_asymptote_gap(lin, sched))
        H = kalman_ltr_gain(lin, sched).L
        r.holds(f"hurwitz_q{q:g}", is_hurwitz(lin.A - H @ lin.C))
    for a, b, q in zip(gaps, gaps[1:], (30, 100, 300)):
        r.at_most(f"gap_q{q}-gap_prev", b - a, -1e-15)
    return r


def fbl_exactness(cfg: Config) -> CriterionResult:
    r = CriterionResult(10, "feedback linearization exactness")
    m = _models(cfg)
    scn = sc.with_overrides(sc.get_scenario("sec8.1-fbl-reduced"), limits=False, horizon=20.0)
    prep = sc.prepare(scn, cfg)
    prep.options.sample_dt = 1e-3
    prep.options.rtol, prep.options.atol = 1e-11, 1e-13
    tr = sim.simulate(prep.plant, prep.controller, prep.x0, 20.0, prep.options)
    if not tr.complete:
        r.error = tr.message
        return r
    ctl = prep.controller
    z = np.array([fb.fbl_transform(x, m.rc) for x in tr.x])
    v = np.array([fb.virtual_inputs(zz, ctl.sp, ctl.K) for zz in z])
    dt = np.diff(tr.t)
    # central differences on interior samples
    dz3 = (z[2:, 2] - z[:-2, 2]) / (dt[1:] + dt[:-1])
    dz5 = (z[2:, 4] - z[:-2, 4]) / (dt[1:] + dt[:-1])
    r.at_most("rms(dz3-v1)", float(np.sqrt(np.mean((dz3 - v[1:-1, 0]) ** 2))), 1e-4)
    r.at_most("rms(dz5-v2)", float(np.sqrt(np.mean((dz5 - v[1:-1, 1]) ** 2))), 1e-4)
    r.close("V_t(20)", tr.channel("V_t")[-1], ref.FBL_TARGET["V_t"], 5e-3)
    r.close("delta(20)", tr.channel("delta")[-1], ref.FBL_TARGET["delta"], 5e-3)
    r.close("omega(20)", tr.channel("omega")[-1], ref.FBL_TARGET["omega"], 5e-3)
    return r


def operating_points(cfg: Config) -> CriterionResult:
    r = CriterionResult(11, "operating-point sweep on the truth plant")
    s = ref.SWEEP
    fin, _ = _run_final(cfg, "sec9-lqr-op2")
    r.close("lqr_op2_V_t", fin["V_t"], s["lqr_op2_vt"], 5e-3)
    fin, _ = _run_final(cfg, "sec9-lqr-op3")
    r.close("lqr_op3_V_t", fin["V_t"], s["lqr_op3_vt"], 5e-3)
    delta3 = cfg.operating_points["III"].delta_0
    r.at_most("lqr_op3_delta_error", abs(fin["delta"] - delta3), s["lqr_delta_error"])
    op2 = cfg.operating_points["II"]
    fin, _ = _run_final(cfg, "sec9-ltr-op2")
    r.close("ltr_op2_V_t_error", abs(fin["V_t"] - op2.V_t0), s["ltr_op2_vt_error"], 0.01)
    r.close("ltr_op2_delta_error", abs(fin["delta"] - op2.delta_0), s["ltr_op2_delta_error"], 0.015)
    fin, _ = _run_final(cfg, "sec9-ltr-op3")
    r.close("ltr_op3_V_t", fin["V_t"], s["ltr_op3_vt"], 5e-3)
    return r


def numerics(cfg: Config) -> CriterionResult:
    r = CriterionResult(12, "numerics hygiene")
    m = _models(cfg)
    eq = m.reduced_eq("I")
    u0 = eq.u0
    f = lambda t, x: reduced_rhs(x, u0, m.rc)  # noqa: E731

    # rk4 order by step halving from a displaced start
    x0 = np.array(eq.x0, dtype=float)
    x0[0] += 0.05
    x0[1] += 0.01
    ends = [integrate(f, x0, [0.0, 5.0], method="rk4", dt=h).y[-1] for h in (0.2, 0.1, 0.05)]
    ratio = np.linalg.norm(ends[0] - ends[1]) / np.linalg.norm(ends[1] - ends[2])
    r.close("rk4_richardson_ratio", ratio, 16.0, 3.2)

    hold = integrate(f, eq.x0, np.linspace(0.0, 100.0, 101), method="rk45")
    r.at_most("reduced_hold_drift", float(np.max(np.abs(hold.y - eq.x0))), 1e-6)
    teq = m.truth_eq("I")
    hold = integrate(lambda t, x: truth_rhs(x, teq.u0, m.tc), teq.x0, np.linspace(0.0, 100.0, 101), method="rk45")
    r.at_most("truth_hold_drift", float(np.max(np.abs(hold.y - teq.x0))), 1e-6)

    rng = np.random.default_rng(0)
    ortho = power = 0.0
    for theta in rng.uniform(-math.pi, math.pi, 16):
        P = park_matrix(theta)
        ortho = max(ortho, float(np.max(np.abs(P @ P.T - np.eye(3)))))
        v, i = rng.normal(size=3), rng.normal(size=3)
        power = max(power, abs(float(v @ i - (P @ v) @ (P @ i))))
    r.at_most("park_orthogonality", ortho, 1e-12)
    r.at_most("park_power_invariance", power, 1e-12)

    tfs = lfc_avr_transfer_functions(m.design_model(), m.rc)
    polys = [np.asarray(tfs[k].den) for k in ("delta_over_uT", "omega_over_uT", "avr_closed", "G_lfc")]
    polys.append(poly_from_roots(ref.REDUCED_EIGENVALUES).real)
    worst = 0.0
    for c in polys:
        for z in polynomial_roots(c):
            scale = float(np.polyval(np.abs(c), abs(z)))
            worst = max(worst, abs(np.polyval(c, z)) / scale)
    r.at_most("poly_root_residual", worst, 1e-7)
    return r


CRITERIA: tuple[Callable[[Config], CriterionResult], ...] = (
    derived_constants, coefficient_table, reduced_linearization, truth_linearization, equilibria,
    final_values, lqr, placement, ltr, fbl_exactness, operating_points, numerics,
)
TITLES = {
    1: "derived transient constants", 2: "reduced coefficient table", 3: "reduced linearization at OP I",
    4: "truth linearization at OP I", 5: "equilibria and steady inputs",
    6: "final-value theorem and step simulations", 7: "LQR on the OP-I reduced model",
    8: "pole placement and separation", 9: "LTR asymptote", 10: "feedback linearization exactness",
    11: "operating-point sweep on the truth plant", 12: "numerics hygiene",
}


def run_criterion(number: int, cfg: Config | None = None) -> CriterionResult:
    cfg = cfg if cfg is not None else load_config(None)
    fn = CRITERIA[number - 1]
    try:
        return fn(cfg)
    except Exception as exc:  # a crash is a failed criterion, not a crashed report
        return CriterionResult(number, TITLES[number], error=f"{type(exc).__name__}: {exc}")


def run_all(cfg: Config | None = None) -> list[CriterionResult]:
    cfg = cfg if cfg is not None else load_config(None)
    return [run_criterion(i, cfg) for i in range(1, len(CRITERIA) + 1)]


def report(results: list[CriterionResult]) -> str:
    lines = [r.line() for r in results]
    n = sum(r.passed for r in results)
    lines.append(f"{n}/{len(results)} criteria passed")
    return "\n".join(lines) + "\n"
