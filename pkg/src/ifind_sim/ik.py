"""Damped-least-squares inverse kinematics with joint limits."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chain import KinematicChain, _compiled, check_limits, fk_jacobian_raw
from .errors import NotConverged
from .transforms import Pose, rotvec_from_matrix

_TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class IKOptions:
    max_iterations: int = 200
    damping: float = 0.05
    position_tolerance: float = 1e-8
    orientation_tolerance: float = 1e-8
    step_norm_cap: float = 0.2
    # Task-error clamp: distant targets are pulled in to this radius so the
    # early iterations do not overshoot through ill-conditioned regions.
    error_clamp_position: float = 0.25
    error_clamp_orientation: float = 1.0
    # Extra deterministic attempts from mid-range seeds when the caller's
    # seed lands in a local minimum (limited wrists have a few).
    restarts: int = 3


def pose_error(current_rotation: np.ndarray, current_position: np.ndarray,
               target: Pose) -> tuple[np.ndarray, float, float]:
    """6-vector task error (position; rotation-vector) plus its two norms."""
    e_pos = target.position - current_position
    r_err = target.rotation_matrix() @ current_rotation.T
    e_rot = rotvec_from_matrix(r_err)
    return (np.concatenate([e_pos, e_rot]),
            float(np.linalg.norm(e_pos)), float(np.linalg.norm(e_rot)))


def _clamp_q(cc, q: np.ndarray) -> np.ndarray:
    wrapped = np.where(
        cc.full_circle,
        q - _TWO_PI * np.round(q / _TWO_PI),
        np.clip(q, cc.lo, cc.hi))
    return wrapped


def _attempt(chain: KinematicChain, cc, target_r, target_p, q0,
             opts: IKOptions):
    """One damped-least-squares descent; returns (converged, q, residuals)."""
    q = q0.copy()
    lam2_max = opts.damping ** 2
    lam2_min = (0.02 * opts.damping) ** 2
    eye6 = np.eye(6)
    best_q = q.copy()
    best_res = (np.inf, np.inf)
    stall_reference = np.inf
    for it in range(opts.max_iterations + 1):
        r, t, jac = fk_jacobian_raw(chain, q)
        e_pos = target_p - t
        e_rot = rotvec_from_matrix(target_r @ r.T)
        pos_res = float(np.linalg.norm(e_pos))
        rot_res = float(np.linalg.norm(e_rot))
        if (pos_res, rot_res) < best_res:
            best_res = (pos_res, rot_res)
            best_q = q.copy()
        if (pos_res <= opts.position_tolerance
                and rot_res <= opts.orientation_tolerance):
            return True, q, best_res
        if it % 25 == 0:
            # Bail out of attempts pinned in a local minimum: residual has
            # not shrunk by at least 20% over the last 25 iterations.
            combined = pos_res + rot_res
            if combined > 0.8 * stall_reference:
                return False, best_q, best_res
            stall_reference = combined
        if pos_res > opts.error_clamp_position:
            e_pos = e_pos * (opts.error_clamp_position / pos_res)
        if rot_res > opts.error_clamp_orientation:
            e_rot = e_rot * (opts.error_clamp_orientation / rot_res)
        err = np.concatenate([e_pos, e_rot])
        # Error-proportional damping (capped at the configured value):
        # large residuals keep the full damping for robustness near
        # singularities, small residuals converge superlinearly instead
        # of creeping at a fixed-lambda contraction rate.
        lam2 = min(lam2_max, max(lam2_min, float(err @ err)))
        dq = jac.T @ np.linalg.solve(jac @ jac.T + lam2 * eye6, err)
        step = float(np.linalg.norm(dq))
        if step > opts.step_norm_cap:
            dq *= opts.step_norm_cap / step
        q = _clamp_q(cc, q + dq)
    return False, best_q, best_res


def solve_ik(chain: KinematicChain, target: Pose, seed: np.ndarray,
             opts: IKOptions | None = None) -> np.ndarray:
    """Solve for joints reaching ``target``, starting from ``seed``.

    Deterministic: the same (chain, target, seed, opts) always produces
    the same iterates, including the fixed fallback seeds tried when the
    caller's seed descends into a local minimum. Raises
    :class:`NotConverged` with the best iterate and its residual when the
    tolerances are not met; unreachable targets surface the same way.
    """
    opts = opts or IKOptions()
    q0 = check_limits(chain, np.asarray(seed, dtype=float)).copy()
    cc = _compiled(chain)
    target_r = target.rotation_matrix()
    target_p = target.position
    span = cc.hi - cc.lo
    seeds = [q0]
    for k in range(opts.restarts):
        frac = (0.5, 0.3, 0.7, 0.4, 0.6)[k % 5]
        fallback = np.where(cc.full_circle, 0.0, cc.lo + frac * span)
        seeds.append(fallback)
    best_q = q0
    best_res = (np.inf, np.inf)
    for s in seeds:
        ok, q, res = _attempt(chain, cc, target_r, target_p, s, opts)
        if ok:
            return q
        if res < best_res:
            best_res = res
            best_q = q
    raise NotConverged(
        f"IK on {chain.name} did not converge: position residual "
        f"{best_res[0]:.3e} m, orientation residual {best_res[1]:.3e} rad",
        best_q=best_q, position_residual=best_res[0],
        orientation_residual=best_res[1])
