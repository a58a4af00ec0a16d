"""Fixed-step closed-loop simulation.

Each step holds the control torque computed at the start of the step
(zero-order hold), advances the angular velocity with classical RK4 on
Euler's equation and advances attitudes on SO(3) with the exponential map
of the RK4-weighted stage velocity, so rotations never leave the group.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from . import _kernels
from .controllers import (
    GainError,
    QuatSmcConfig,
    S1Variant,
    SmcConfig,
    gain_k,
    quat_sigma,
    s1_control,
    s1_sigma,
    unit_switch,
)
from .dynamics import (
    BodyState,
    CylinderState,
    Inertia,
    QuatState,
    Reference,
    attitude_lyapunov,
    wrap_angle,
)
from .so3 import exp_so3, hat, project_to_so3, quat_to_rot, vee_pa

log = logging.getLogger(__name__)

REACH_SUSTAIN_S = 0.1
QUAT_DRIFT_WARN = 1e-6

SO3_COLUMNS = (
    ["t"]
    + [f"R{i}{j}" for i in (1, 2, 3) for j in (1, 2, 3)]
    + ["wx", "wy", "wz", "sx", "sy", "sz", "ux", "uy", "uz", "trRe", "VR", "Vsig"]
)
QUAT_COLUMNS = SO3_COLUMNS + ["q0"]
CYLINDER_COLUMNS = ["run_id", "t", "theta", "omega", "sigma", "u", "jump"]


class SimulationAbort(RuntimeError):
    """The state became non-finite; ``index`` is the step where it happened."""

    def __init__(self, message: str, index: int):
        super().__init__(f"{message} (step {index})")
        self.index = index


class AttitudeUpdate(str, Enum):
    EXPMAP = "expmap"
    RK4_PROJECT = "rk4project"


_MODE_CODES = {AttitudeUpdate.EXPMAP: _kernels.EXPMAP, AttitudeUpdate.RK4_PROJECT: _kernels.RK4_PROJECT}


@dataclass(frozen=True)
class SimConfig:
    dt: float = 1e-4
    T: float = 10.0
    attitude_update: AttitudeUpdate = AttitudeUpdate.EXPMAP
    seed: int = 0
    record_stride: int = 100

    def __post_init__(self):
        object.__setattr__(self, "attitude_update", AttitudeUpdate(self.attitude_update))
        if not self.dt > 0.0:
            raise ValueError("dt must be > 0")
        if not self.T > 0.0:
            raise ValueError("T must be > 0")
        if self.dt > self.T:
            raise ValueError("dt must not exceed T")
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))


@dataclass(frozen=True)
class DisturbanceSpec:
    """Channelwise ``amplitude * trig(freq * t)`` with ``trig`` in {sin, cos}."""

    amplitudes: tuple = (0.0, 0.0, 0.0)
    freqs: tuple = (0.0, 0.0, 0.0)
    kinds: tuple = ("sin", "sin", "sin")

    def __post_init__(self):
        for name in ("amplitudes", "freqs", "kinds"):
            if len(getattr(self, name)) != 3:
                raise ValueError(f"disturbance {name} must have 3 entries")
        for k in self.kinds:
            if k not in ("sin", "cos"):
                raise ValueError(f"disturbance kind must be 'sin' or 'cos', got {k!r}")
        object.__setattr__(self, "_a", np.asarray(self.amplitudes, dtype=float))
        object.__setattr__(self, "_f", np.asarray(self.freqs, dtype=float))
        object.__setattr__(self, "_cos_mask", np.array([k == "cos" for k in self.kinds]))
        object.__setattr__(self, "_zero", not np.any(self._a))

    @property
    def d_bar(self) -> float:
        """Euclidean norm of the amplitudes; bounds ``|d(t)|`` for all t."""
        return float(np.linalg.norm(self._a))

    @classmethod
    def benchmark(cls) -> "DisturbanceSpec":
        """``(sin 5 pi t, cos 7 pi t, sin 9 pi t)``."""
        return cls((1.0, 1.0, 1.0), (5 * math.pi, 7 * math.pi, 9 * math.pi), ("sin", "cos", "sin"))

    @classmethod
    def zero(cls) -> "DisturbanceSpec":
        return cls()


def eval_disturbance(spec: DisturbanceSpec, t: float) -> np.ndarray:
    if spec._zero:
        return np.zeros(3)
    x = spec._f * t
    return spec._a * np.where(spec._cos_mask, np.cos(x), np.sin(x))


def step_attitude(R, omega, dt: float, mode: AttitudeUpdate = AttitudeUpdate.EXPMAP) -> np.ndarray:
    """Advance ``dR/dt = R hat(omega)`` over ``dt`` with ``omega`` held constant."""
    if mode is AttitudeUpdate.EXPMAP:
        return R @ exp_so3(dt * np.asarray(omega, dtype=float))
    A = dt * hat(omega)
    A2 = A @ A
    # RK4 for a linear constant-coefficient system is the 4th-order Taylor polynomial
    step = np.eye(3) + A + A2 / 2.0 + (A2 @ A) / 6.0 + (A2 @ A2) / 24.0
    return project_to_so3(R @ step)


@dataclass
class RunMetrics:
    reach_time: float | None
    min_tr_Re: float
    final_tr_Re: float
    final_omega_e_norm: float
    max_u_norm: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d: dict) -> "RunMetrics":
        return cls(**d)


class TrajectoryRecord(NamedTuple):
    t: float
    R: np.ndarray
    omega: np.ndarray
    sigma: np.ndarray
    u: np.ndarray
    tr_Re: float
    V_R: float
    V_sigma: float
    q0: float | None = None


@dataclass
class Trajectory:
    """Recorded samples, one row per record, in ``columns`` order."""

    data: np.ndarray
    columns: list
    seed: int = 0
    quaternions: np.ndarray | None = field(default=None, repr=False)

    def column(self, name: str) -> np.ndarray:
        return self.data[:, self.columns.index(name)]

    @property
    def t(self) -> np.ndarray:
        return self.data[:, 0]

    @property
    def sigma(self) -> np.ndarray:
        i = self.columns.index("sx")
        return self.data[:, i : i + 3]

    def records(self) -> Iterator[TrajectoryRecord]:
        has_q = "q0" in self.columns
        for row in self.data:
            yield TrajectoryRecord(
                t=float(row[0]),
                R=row[1:10].reshape(3, 3),
                omega=row[10:13],
                sigma=row[13:16],
                u=row[16:19],
                tr_Re=float(row[19]),
                V_R=float(row[20]),
                V_sigma=float(row[21]),
                q0=float(row[22]) if has_q else None,
            )

    def __len__(self):
        return len(self.data)


def reach_tolerance(eps_layer: float) -> float:
    return max(eps_layer, 1e-3)


class _ReachTracker:
    def __init__(self, tol: float):
        self.tol = tol
        self.since = None
        self.reach_time = math.nan

    def update(self, t: float, s_norm: float):
        if not math.isnan(self.reach_time):
            return
        if s_norm <= self.tol:
            if self.since is None:
                self.since = t
            if t - self.since >= REACH_SUSTAIN_S - 1e-9:
                self.reach_time = self.since
        else:
            self.since = None


def _metrics(values) -> RunMetrics:
    reach, min_tr, final_tr, final_we, max_u = (float(x) for x in values)
    return RunMetrics(
        reach_time=None if math.isnan(reach) else reach,
        min_tr_Re=min_tr,
        final_tr_Re=final_tr,
        final_omega_e_norm=final_we,
        max_u_norm=max_u,
    )


def _so3_loop_numpy(init, ref, J, smc, dist, sim):
    h = sim.dt
    n = sim.n_steps
    mode = sim.attitude_update
    Jm, Ji = J.J, J.J_inv
    eps = smc.eps_layer
    reach = _ReachTracker(reach_tolerance(eps))
    R = np.array(init.R, dtype=float)
    w = np.array(init.omega, dtype=float)
    Rd = np.array(ref.R_d0, dtype=float)
    rows = []
    min_tr, max_u, final_we = math.inf, 0.0, 0.0

    def f(w, torque):
        return Ji @ (np.cross(Jm @ w, w) + torque)

    for k in range(n + 1):
        t = k * h
        wd = ref.omega_d(t)
        wd_dot = ref.omega_d_dot(t)
        Re = Rd.T @ R
        ReT = Re.T
        we = w - ReT @ wd
        s = we + vee_pa(Re)
        v = unit_switch(s, gain_k(w, we, smc), eps)
        u = -Jm @ (ReT @ (np.cross(Re @ we, wd) - wd_dot)) + v

        tr = float(Re[0, 0] + Re[1, 1] + Re[2, 2])
        min_tr = min(min_tr, tr)
        max_u = max(max_u, math.sqrt(float(u @ u)))
        reach.update(t, math.sqrt(float(s @ s)))
        if k % sim.record_stride == 0 or k == n:
            rows.append(np.concatenate(
                ([t], R.ravel(), w, s, u, [tr, attitude_lyapunov(Re), 0.5 * float(s @ Jm @ s)])
            ))
        if k == n:
            final_we = math.sqrt(float(we @ we))
            break

        d1 = eval_disturbance(dist, t)
        dm = eval_disturbance(dist, t + 0.5 * h)
        d2 = eval_disturbance(dist, t + h)
        k1 = f(w, u + d1)
        w2 = w + 0.5 * h * k1
        k2 = f(w2, u + dm)
        w3 = w + 0.5 * h * k2
        k3 = f(w3, u + dm)
        w4 = w + h * k3
        k4 = f(w4, u + d2)
        R = step_attitude(R, (w + 2 * w2 + 2 * w3 + w4) / 6.0, h, mode)
        w = w + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(R))):
            return np.array(rows), (reach.reach_time, min_tr, tr, final_we, max_u), k + 1
        if not ref.is_static:
            wd_next = ref.omega_d(t + h)
            wd_mid = ref.omega_d(t + 0.5 * h)
            Rd = step_attitude(Rd, (wd + 4 * wd_mid + wd_next) / 6.0, h, mode)
    return np.array(rows), (reach.reach_time, min_tr, tr, final_we, max_u), -1


def simulate_so3_closed_loop(
    init: BodyState,
    ref: Reference,
    J: Inertia,
    smc: SmcConfig,
    dist: DisturbanceSpec,
    sim: SimConfig,
    engine: str = "compiled",
) -> tuple[Trajectory, RunMetrics]:
    """Closed loop of the rigid body under feedforward plus the SO(3) reaching law.

    ``engine="numpy"`` runs the same loop in plain numpy (slow; used to
    cross-check the compiled loop).

    Raises
    ------
    GainError
        If the gains do not dominate the bound for this inertia.
    SimulationAbort
        If the state becomes non-finite.
    """
    smc.check_inertia(J)
    if dist.d_bar > smc.d_bar + 1e-12:
        raise GainError(
            f"disturbance bound {dist.d_bar:.6g} exceeds controller d_bar {smc.d_bar:.6g}"
        )
    if engine == "numpy":
        # blow-up is detected explicitly below
        with np.errstate(over="ignore", invalid="ignore"):
            rows, metrics, abort = _so3_loop_numpy(init, ref, J, smc, dist, sim)
    else:
        rows, metrics, abort = _kernels.so3_loop(
            np.array(init.R, dtype=float), np.array(init.omega, dtype=float), ref.R_d0.copy(),
            ref.offset, ref.amplitude, ref.freq, ref.phase,
            dist._a, dist._f, dist._cos_mask,
            J.J, J.J_inv,
            smc.c_omega2, smc.c_omega_e, smc.k_0, smc.eps_layer,
            sim.dt, sim.n_steps, sim.record_stride, _MODE_CODES[sim.attitude_update],
            reach_tolerance(smc.eps_layer), REACH_SUSTAIN_S,
        )
    if abort >= 0:
        raise SimulationAbort("non-finite state", abort)
    return Trajectory(rows, list(SO3_COLUMNS), seed=sim.seed), _metrics(metrics)


def _quat_rate(q, w):
    q0, qv = q[0], q[1:]
    return np.concatenate(([-0.5 * float(qv @ w)], 0.5 * (q0 * w + np.cross(qv, w))))


def _quat_loop_numpy(init, J, cfg, dist, sim):
    h = sim.dt
    n = sim.n_steps
    Jm, Ji = J.J, J.J_inv
    reach = _ReachTracker(reach_tolerance(cfg.eps_layer))
    q = np.array(init.q, dtype=float)
    q /= np.linalg.norm(q)
    w = np.array(init.omega, dtype=float)
    rows, quats = [], []
    min_tr, max_u, max_drift = math.inf, 0.0, 0.0

    def f(w, torque):
        return Ji @ (np.cross(Jm @ w, w) + torque)

    for k in range(n + 1):
        t = k * h
        s = quat_sigma(q, w)
        u = unit_switch(s, cfg.k_q, cfg.eps_layer)
        R = quat_to_rot(q)
        tr = float(R[0, 0] + R[1, 1] + R[2, 2])
        min_tr = min(min_tr, tr)
        max_u = max(max_u, math.sqrt(float(u @ u)))
        reach.update(t, math.sqrt(float(s @ s)))
        if k % sim.record_stride == 0 or k == n:
            rows.append(np.concatenate(
                ([t], R.ravel(), w, s, u, [tr, attitude_lyapunov(R), 0.5 * float(s @ Jm @ s), q[0]])
            ))
            quats.append(q.copy())
        if k == n:
            break

        d1 = eval_disturbance(dist, t)
        dm = eval_disturbance(dist, t + 0.5 * h)
        d2 = eval_disturbance(dist, t + h)
        a1, b1 = _quat_rate(q, w), f(w, u + d1)
        a2, b2 = _quat_rate(q + 0.5 * h * a1, w + 0.5 * h * b1), f(w + 0.5 * h * b1, u + dm)
        a3, b3 = _quat_rate(q + 0.5 * h * a2, w + 0.5 * h * b2), f(w + 0.5 * h * b2, u + dm)
        a4, b4 = _quat_rate(q + h * a3, w + h * b3), f(w + h * b3, u + d2)
        q = q + (h / 6.0) * (a1 + 2 * a2 + 2 * a3 + a4)
        w = w + (h / 6.0) * (b1 + 2 * b2 + 2 * b3 + b4)
        metrics = (reach.reach_time, min_tr, tr, math.sqrt(float(w @ w)), max_u)
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(q))):
            return np.array(rows), np.array(quats), metrics, k + 1, max_drift
        nq = math.sqrt(float(q @ q))
        max_drift = max(max_drift, abs(nq - 1.0))
        q = q / nq
    metrics = (reach.reach_time, min_tr, tr, math.sqrt(float(w @ w)), max_u)
    return np.array(rows), np.array(quats), metrics, -1, max_drift


def simulate_quat_closed_loop(
    init: QuatState,
    J: Inertia,
    cfg: QuatSmcConfig,
    dist: DisturbanceSpec,
    sim: SimConfig,
    engine: str = "compiled",
) -> tuple[Trajectory, RunMetrics]:
    """Regulation to the identity with the quaternion sliding-mode law.

    The quaternion is renormalized after every step. ``tr_Re`` is the trace
    of the attitude matrix, which is the error since the target is ``I``.
    """
    if engine == "numpy":
        with np.errstate(over="ignore", invalid="ignore"):
            rows, quats, metrics, abort, drift = _quat_loop_numpy(init, J, cfg, dist, sim)
    else:
        rows, quats, metrics, abort, drift = _kernels.quat_loop(
            np.array(init.q, dtype=float), np.array(init.omega, dtype=float),
            dist._a, dist._f, dist._cos_mask,
            J.J, J.J_inv, cfg.k_q, cfg.eps_layer,
            sim.dt, sim.n_steps, sim.record_stride,
            reach_tolerance(cfg.eps_layer), REACH_SUSTAIN_S, QUAT_DRIFT_WARN,
        )
    if drift > QUAT_DRIFT_WARN:
        log.warning("quaternion norm drifted by up to %.3g in one step", drift)
    if abort >= 0:
        raise SimulationAbort("non-finite state", abort)
    traj = Trajectory(rows, list(QUAT_COLUMNS), seed=sim.seed, quaternions=quats)
    return traj, _metrics(metrics)


@dataclass
class CylinderTrajectory:
    """Columns ``t, theta, omega, sigma, u, jump``; ``jump`` flags a step in
    which the sliding variable changed by more than pi (a discontinuity)."""

    run_id: int
    data: np.ndarray

    def column(self, name: str) -> np.ndarray:
        return self.data[:, CYLINDER_COLUMNS.index(name) - 1]

    @property
    def final(self) -> CylinderState:
        return CylinderState(float(self.data[-1, 1]), float(self.data[-1, 2]))


def simulate_cylinder(
    init: CylinderState,
    variant: S1Variant,
    sim: SimConfig,
    run_id: int = 0,
) -> CylinderTrajectory:
    """Single-axis body under ``u = -(|w| + 1) sgn(sigma)``.

    The control is held over each step and the double integrator is
    advanced exactly; the angle is wrapped to [0, 2 pi) after every step.
    """
    variant = S1Variant(variant)
    h = sim.dt
    n = sim.n_steps
    theta, w = wrap_angle(init.theta), float(init.omega)
    rows = []
    s_prev = None
    jumped = False
    for k in range(n + 1):
        t = k * h
        s = s1_sigma(theta, w, variant)
        u = s1_control(theta, w, variant)
        if s_prev is not None and abs(s - s_prev) > math.pi:
            jumped = True
        s_prev = s
        if k % sim.record_stride == 0 or k == n:
            rows.append((t, theta, w, s, u, 1.0 if jumped else 0.0))
            jumped = False
        if k == n:
            break
        theta = wrap_angle(theta + h * w + 0.5 * h * h * u)
        w = w + h * u
        if not (math.isfinite(theta) and math.isfinite(w)):
            raise SimulationAbort("non-finite cylinder state", k + 1)
    return CylinderTrajectory(run_id, np.array(rows))


def portrait_grid(n_theta: int, omega_range: tuple, n_omega: int) -> list:
    """Initial conditions ``theta = 2 pi i / n_theta`` by ``n_omega`` evenly spaced rates."""
    thetas = [2.0 * math.pi * i / n_theta for i in range(n_theta)]
    omegas = np.linspace(omega_range[0], omega_range[1], n_omega) if n_omega > 1 else [omega_range[0]]
    return [CylinderState(th, float(om)) for th in thetas for om in omegas]


def simulate_cylinder_grid(
    inits: Sequence[CylinderState],
    variant: S1Variant,
    sim: SimConfig,
    workers: int = 4,
) -> list:
    """Run every initial condition; results are sorted by ``run_id``."""
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        futures = [
            pool.submit(simulate_cylinder, s, variant, sim, i) for i, s in enumerate(inits)
        ]
        results = [f.result() for f in futures]
    return sorted(results, key=lambda r: r.run_id)
