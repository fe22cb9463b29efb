"""Nonlinear attitude dynamics of a spacecraft with a four-wheel pyramidal RWA.

The spacecraft flies a circular orbit and is modelled in a Local Vertical
Local Horizontal (LVLH) frame. Attitude is parameterized by 3-2-1
(yaw-pitch-roll) Euler angles of the body frame relative to LVLH. Gravity
gradient torques are included; they are the only external torque and the
free resource used to dump reaction-wheel momentum.

State vector layout (10 entries), all SI:

    x = [phi, theta, psi, w1, w2, w3, Om1, Om2, Om3, Om4]

    phi, theta, psi : roll, pitch, yaw angles of body w.r.t. LVLH [rad]
    w1, w2, w3      : body angular velocity w.r.t. inertial frame,
                      body coordinates [rad/s]
    Om1..Om4        : wheel spin rates about their spin axes [rad/s]

Control vector u = [A1, A2, A3, A4] holds the wheel angular
accelerations [rad/s^2].

The reaction wheel array is a pyramid symmetric about the body y axis:
wheel i has frame W_i with spin axis z_Wi, related to the body frame by
O_{Wi/S} = O1(alpha) * O2(beta + (i-1)*pi/2), where alpha is the common
elevation angle and beta an azimuth offset.

The unforced equilibrium family used throughout the toolkit is

    x_eq(v) = [0, 0, 0, 0, -n, 0, a, b, a, b],   v = (a, b),

i.e. the body tracks LVLH, rotates at the orbit rate about -y, and
opposite wheels spin at equal rates so the wheel momentum has no
component transverse to the orbit normal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SpacecraftParams",
    "KinematicsSingularityError",
    "N_STATES",
    "N_INPUTS",
    "IDX_ANGLES",
    "IDX_RATES",
    "IDX_WHEELS",
    "rot1",
    "rot2",
    "rot3",
    "euler_dcm",
    "wheel_axes",
    "rw_momentum",
    "equilibrium",
    "eom_rhs",
    "rk4_step",
    "propagate_zoh",
]

N_STATES = 10
N_INPUTS = 4

# Index slices into the state vector.
IDX_ANGLES = slice(0, 3)
IDX_RATES = slice(3, 6)
IDX_WHEELS = slice(6, 10)

# Guard against the theta = +/- pi/2 singularity of the 3-2-1 kinematics.
# The operating envelope (|angles| <= 0.1 rad) never gets close.
COS_THETA_MIN = 1e-6


class KinematicsSingularityError(ValueError):
    """Raised when cos(theta) falls below the kinematics singularity guard."""


@dataclass(frozen=True)
class SpacecraftParams:
    """Physical parameters of the spacecraft and reaction wheel array.

    Attributes:
        J1, J2, J3: principal moments of inertia [kg m^2].
        Js: wheel moment of inertia about its spin axis [kg m^2].
            Transverse wheel inertia is neglected.
        n: circular orbit rate [rad/s].
        alpha: RWA elevation angle [rad], in [-pi/2, pi/2].
        beta: RWA azimuth offset [rad], in [0, pi/2).
        tau_max: maximum wheel motor torque [N m]; the wheel acceleration
            bound is tau_max / Js.

    Defaults describe a mid-size spacecraft at 500 km altitude.
    """

    J1: float = 1000.0
    J2: float = 2200.0
    J3: float = 1400.0
    Js: float = 0.1
    n: float = 1.1086e-3
    alpha: float = math.pi / 4
    beta: float = 0.0
    tau_max: float = 0.05

    def __post_init__(self) -> None:
        J = (self.J1, self.J2, self.J3)
        if min(J) <= 0.0:
            raise ValueError(f"principal inertias must be positive, got {J}")
        # Triangle inequality for physically realizable rigid bodies.
        if (
            self.J1 > self.J2 + self.J3
            or self.J2 > self.J1 + self.J3
            or self.J3 > self.J1 + self.J2
        ):
            raise ValueError(f"inertias violate the triangle inequality: {J}")
        if self.Js <= 0.0:
            raise ValueError(f"wheel inertia Js must be positive, got {self.Js}")
        if self.n <= 0.0:
            raise ValueError(f"orbit rate n must be positive, got {self.n}")
        if not -math.pi / 2 <= self.alpha <= math.pi / 2:
            raise ValueError(f"alpha must be in [-pi/2, pi/2], got {self.alpha}")
        if not 0.0 <= self.beta < math.pi / 2:
            raise ValueError(f"beta must be in [0, pi/2), got {self.beta}")
        if self.tau_max <= 0.0:
            raise ValueError(f"tau_max must be positive, got {self.tau_max}")

    @property
    def u_max(self) -> float:
        """Wheel acceleration saturation bound [rad/s^2]."""
        return self.tau_max / self.Js

    @property
    def orbit_period(self) -> float:
        """Orbital period [s]."""
        return 2.0 * math.pi / self.n


def rot1(a: float) -> np.ndarray:
    """Direction cosine matrix for a rotation about axis 1 (x)."""
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, s], [0.0, -s, c]])


def rot2(a: float) -> np.ndarray:
    """Direction cosine matrix for a rotation about axis 2 (y)."""
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, -s], [0.0, 1.0, 0.0], [s, 0.0, c]])


def rot3(a: float) -> np.ndarray:
    """Direction cosine matrix for a rotation about axis 3 (z)."""
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])


def euler_dcm(phi: float, theta: float, psi: float) -> np.ndarray:
    """DCM mapping LVLH coordinates to body coordinates for 3-2-1 angles."""
    return rot1(phi) @ rot2(theta) @ rot3(psi)


def wheel_axes(p: SpacecraftParams) -> np.ndarray:
    """Wheel spin axes in body coordinates, one row per wheel, shape (4, 3).

    Row i is the body-frame image of z_Wi under O_{S/Wi} with
    O_{Wi/S} = O1(alpha) O2(beta + (i-1)*pi/2).
    """
    axes = np.empty((4, 3))
    for i in range(4):
        beta_i = p.beta + i * math.pi / 2
        o_wi_s = rot1(p.alpha) @ rot2(beta_i)
        axes[i] = o_wi_s.T @ np.array([0.0, 0.0, 1.0])
    return axes


def rw_momentum(x: np.ndarray, p: SpacecraftParams) -> np.ndarray:
    """Total reaction wheel angular momentum in body coordinates [N m s].

    Closed form of Js * sum_i O_{S/Wi} (0, 0, Om_i); the pyramid geometry
    collapses the sum to pair differences in x/z and the pair sum in y.
    """
    om1, om2, om3, om4 = x[6], x[7], x[8], x[9]
    ca, sa = math.cos(p.alpha), math.sin(p.alpha)
    cb, sb = math.cos(p.beta), math.sin(p.beta)
    return p.Js * np.array(
        [
            ca * ((om2 - om4) * cb + (om1 - om3) * sb),
            -sa * (om1 + om2 + om3 + om4),
            ca * ((om1 - om3) * cb - (om2 - om4) * sb),
        ]
    )


def equilibrium(v: np.ndarray, p: SpacecraftParams) -> np.ndarray:
    """Unforced equilibrium state for wheel-pair speed command v = (a, b)."""
    a, b = float(v[0]), float(v[1])
    x = np.zeros(N_STATES)
    x[4] = -p.n
    x[6:10] = (a, b, a, b)
    return x


def eom_rhs(x: np.ndarray, u: np.ndarray, p: SpacecraftParams) -> np.ndarray:
    """Right-hand side of the equations of motion, dx/dt = f(x, u).

    Combines the 3-2-1 Euler-angle kinematics relative to the rotating
    LVLH frame, Euler's rotational dynamics with gravity-gradient torque
    and wheel momentum coupling, and the wheel integrators dOm_i/dt = A_i.

    Raises:
        KinematicsSingularityError: if cos(theta) <= 1e-6.
    """
    phi, theta, psi = x[0], x[1], x[2]
    w1, w2, w3 = x[3], x[4], x[5]

    cphi, sphi = math.cos(phi), math.sin(phi)
    cth, sth = math.cos(theta), math.sin(theta)
    cpsi, spsi = math.cos(psi), math.sin(psi)

    if cth <= COS_THETA_MIN:
        raise KinematicsSingularityError(
            f"cos(theta) = {cth:.3e} at theta = {theta:.6f} rad; "
            "3-2-1 kinematics are singular at |theta| = pi/2"
        )

    n = p.n
    # Body rate relative to LVLH: the orbit frame itself rotates at rate n
    # about -y_LVLH, which in body coordinates adds the vector below.
    q1 = w1 + n * cth * spsi
    q2 = w2 + n * (sphi * sth * spsi + cphi * cpsi)
    q3 = w3 + n * (cphi * sth * spsi - sphi * cpsi)

    dphi = q1 + (sth / cth) * (sphi * q2 + cphi * q3)
    dtheta = cphi * q2 - sphi * q3
    dpsi = (sphi * q2 + cphi * q3) / cth

    # Gravity gradient: local-vertical direction in body coordinates.
    c1 = -sth
    c2 = sphi * cth
    c3 = cphi * cth

    h = rw_momentum(x, p)
    # omega x h_rw
    wxh1 = w2 * h[2] - w3 * h[1]
    wxh2 = w3 * h[0] - w1 * h[2]
    wxh3 = w1 * h[1] - w2 * h[0]

    ca, sa = math.cos(p.alpha), math.sin(p.alpha)
    cb, sb = math.cos(p.beta), math.sin(p.beta)
    a1, a2, a3, a4 = u[0], u[1], u[2], u[3]
    # Reaction torque of the wheel accelerations on the body.
    t1 = p.Js * ca * (-sb * a1 - cb * a2 + sb * a3 + cb * a4)
    t2 = p.Js * sa * (a1 + a2 + a3 + a4)
    t3 = p.Js * ca * (-cb * a1 + sb * a2 + cb * a3 - sb * a4)

    n3 = 3.0 * n * n
    dw1 = ((p.J2 - p.J3) * (w2 * w3 - n3 * c2 * c3) - wxh1 + t1) / p.J1
    dw2 = ((p.J3 - p.J1) * (w1 * w3 - n3 * c1 * c3) - wxh2 + t2) / p.J2
    dw3 = ((p.J1 - p.J2) * (w1 * w2 - n3 * c1 * c2) - wxh3 + t3) / p.J3

    return np.array([dphi, dtheta, dpsi, dw1, dw2, dw3, a1, a2, a3, a4])


def rk4_step(
    x: np.ndarray, u: np.ndarray, dt: float, p: SpacecraftParams
) -> np.ndarray:
    """One classical fourth-order Runge-Kutta step with u held constant."""
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    k1 = eom_rhs(x, u, p)
    k2 = eom_rhs(x + 0.5 * dt * k1, u, p)
    k3 = eom_rhs(x + 0.5 * dt * k2, u, p)
    k4 = eom_rhs(x + dt * k3, u, p)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def propagate_zoh(
    x: np.ndarray,
    u: np.ndarray,
    duration: float,
    dt: float,
    p: SpacecraftParams,
) -> np.ndarray:
    """Propagate with constant input over `duration` using RK4 substeps.

    `duration` must be an integer multiple of `dt` (the caller picks a
    substep that divides the sampling period).
    """
    n_sub = round(duration / dt)
    if not math.isclose(n_sub * dt, duration, rel_tol=1e-12):
        raise ValueError(f"duration {duration} is not a multiple of dt {dt}")
    for _ in range(n_sub):
        x = rk4_step(x, u, dt, p)
    return x
