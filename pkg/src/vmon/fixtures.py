"""Shared anchoring test vectors.

The browser viewer duplicates the pose math client-side; both sides must
reproduce the same {G_WH, mode -> G_HO} vectors within 1e-6. The generator
is deterministic so the committed fixture can always be rebuilt.
"""

from __future__ import annotations

import json
import math
import random

from . import anchoring
from .anchoring import AnchorState, Pose

TOLERANCE = 1e-6


def _random_pose(rng: random.Random, t_scale: float = 2.0) -> Pose:
    q = [rng.gauss(0.0, 1.0) for _ in range(4)]
    norm = math.sqrt(sum(v * v for v in q))
    q = tuple(v / norm for v in q)
    t = tuple(rng.uniform(-t_scale, t_scale) for _ in range(3))
    return Pose(q=q, t=t)


def generate_anchoring_vectors(seed: int = 7, n_head: int = 10, n_world: int = 30,
                               n_body: int = 20) -> dict:
    rng = random.Random(seed)
    vectors = []

    for _ in range(n_head):
        state = AnchorState(mode="head", fixed_G_HO=_random_pose(rng))
        g_wh = _random_pose(rng)
        expected = anchoring.head_anchored_pose(state, g_wh)
        vectors.append({
            "mode": "head",
            "G_WH": g_wh.to_dict(),
            "fixed_G_HO": state.fixed_G_HO.to_dict(),
            "expected_G_HO": expected.to_dict(),
        })

    for _ in range(n_world):
        state = AnchorState(mode="world", fixed_G_WO=_random_pose(rng))
        g_wh = _random_pose(rng)
        expected = anchoring.world_anchored_pose(state, g_wh)
        vectors.append({
            "mode": "world",
            "G_WH": g_wh.to_dict(),
            "fixed_G_WO": state.fixed_G_WO.to_dict(),
            "expected_G_HO": expected.to_dict(),
        })

    for i in range(n_body):
        fixed_g_ho = _random_pose(rng, t_scale=1.0)
        g_wh = _random_pose(rng)
        aligned_g_wo = anchoring.compose(fixed_g_ho, g_wh)
        if i % 2 == 0:
            # hold branch: stored world pose within the deadband
            current = anchoring.compose(
                Pose.from_axis_angle((0, 0, 1), 0.01, translation=(0.02, 0.0, 0.0)),
                aligned_g_wo,
            )
        else:
            # pursuit branch: well outside the deadband
            current = anchoring.compose(
                Pose.from_axis_angle((0, 1, 0), 0.8, translation=(0.5, 0.2, 0.0)),
                aligned_g_wo,
            )
        dt = rng.choice([1.0 / 60.0, 0.1, 0.5])
        state = AnchorState(mode="body", fixed_G_HO=fixed_g_ho, current_G_WO=current)
        g_ho, state = anchoring.body_anchored_step(state, g_wh, dt)
        vectors.append({
            "mode": "body",
            "G_WH": g_wh.to_dict(),
            "fixed_G_HO": fixed_g_ho.to_dict(),
            "body": {
                "d_dead": state.d_dead,
                "theta_dead": state.theta_dead,
                "tau": state.tau,
                "current_G_WO": current.to_dict(),
                "dt": dt,
            },
            "expected_G_HO": g_ho.to_dict(),
            "expected_current_G_WO": state.current_G_WO.to_dict(),
        })

    return {"tolerance": TOLERANCE, "seed": seed, "vectors": vectors}


def write_anchoring_fixture(path, seed: int = 7) -> int:
    doc = generate_anchoring_vectors(seed=seed)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")
    return len(doc["vectors"])
