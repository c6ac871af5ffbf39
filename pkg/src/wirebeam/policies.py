"""Non-learned reference policies.

The oracle reads the true, delay-free node position and takes whichever of
the nine grid actions leaves the beam closest (great-circle) to the exact
look direction, so it is the apples-to-apples upper reference for any
grid-constrained tracker.  The fixed-beam baseline never moves.
"""

from __future__ import annotations

import enum
import math

import numpy as np

from .channel import BeamOrientation, look_angles
from .env import CENTER_ACTION, N_ACTIONS, apply_action


class PolicyKind(enum.Enum):
    ORACLE = "oracle"
    FIXED_BEAM = "fixed"
    DQN_GREEDY = "dqn"


def oracle_action(true_node_pos: np.ndarray, rx_pos: np.ndarray,
                  beam: BeamOrientation, refine_angle: float) -> int:
    """Grid action minimizing the post-action angle to the look direction.

    Ties resolve to the lowest index.
    """
    _, theta, phi = look_angles(true_node_pos, rx_pos)
    target = BeamOrientation(theta, phi).unit_vector()
    best_action, best_angle = 0, math.inf
    for a in range(N_ACTIONS):
        candidate = apply_action(beam, a, refine_angle).unit_vector()
        ang = math.acos(max(-1.0, min(1.0, float(candidate @ target))))
        if ang < best_angle:
            best_action, best_angle = a, ang
    return best_action


def fixed_action() -> int:
    """The do-nothing action; the beam stays at its initial angle."""
    return CENTER_ACTION
