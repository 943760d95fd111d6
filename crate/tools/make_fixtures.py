#!/usr/bin/env python3
"""Regenerate the bundled fixtures under fixtures/.

Produces:
  - five synthetic scene manifests (21 keyframes at 2 Hz) with per-frame
    PNG images and plausible ego kinematics,
  - canned stage-1/stage-2 model replies per scene (consumed by the
    ignored `regenerate_replay_store` test, which fingerprints them into
    fixtures/replay/store.jsonl),
  - the 100-reply parser corpus with sidecar .expected.json files,
  - a small detections file plus intrinsics for the `lift` subcommand.

Everything is seeded; running this twice produces identical bytes.
"""

import json
import math
import os
import random
import shutil

from PIL import Image, ImageDraw

ROOT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..")
FIXTURES = os.path.join(ROOT, "fixtures")

FX = FY = 1266.417203
CX, CY = 800.0, 450.0
# Camera mounted 1.70 m forward, 1.51 m up; ego->cam axis map
# (x right = -ego y, y down = -ego z, z fwd = ego x).
CAM_Q_WXYZ = [0.5, 0.5, -0.5, 0.5]
CAM_T = [0.0, 1.51, -1.70]
DT = 0.5
BASE_TS = 1533151603500000


def rotate(points, theta):
    c, s = math.cos(theta), math.sin(theta)
    return [(c * x - s * y, s * x + c * y) for x, y in points]


def scene_poses(kind):
    """21 (x, y, yaw) poses sampled at 2 Hz."""
    n = 21
    if kind == "straight":
        theta, v = 0.3, 8.0
        return [
            (100.0 + v * DT * i * math.cos(theta), 200.0 + v * DT * i * math.sin(theta), theta)
            for i in range(n)
        ]
    if kind == "left_arc":
        r, v, theta0, x0, y0 = 50.0, 6.0, 1.0, -40.0, 75.0
        out = []
        for i in range(n):
            th = theta0 + v / r * DT * i
            x = x0 + r * (math.sin(th) - math.sin(theta0))
            y = y0 - r * (math.cos(th) - math.cos(theta0))
            out.append((x, y, th))
        return out
    if kind == "right_arc":
        r, v, theta0, x0, y0 = 40.0, 5.0, -2.2, 300.0, -120.0
        out = []
        for i in range(n):
            th = theta0 - v / r * DT * i
            x = x0 - r * (math.sin(th) - math.sin(theta0))
            y = y0 + r * (math.cos(th) - math.cos(theta0))
            out.append((x, y, th))
        return out
    if kind == "decel":
        theta = 1.2
        out = []
        for i in range(n):
            t = DT * i
            s = 10.0 * t - 0.4 * t * t  # v(t) = 10 - 0.8 t
            out.append((s * math.cos(theta), s * math.sin(theta), theta))
        return out
    if kind == "s_curve":
        v, theta0, x0, y0 = 4.0, -0.5, 50.0, 50.0
        fine = 1e-3
        out = []
        x, y, th, t = x0, y0, theta0, 0.0
        for i in range(n):
            while t < DT * i - 1e-9:
                k = 0.03 * math.sin(2.0 * math.pi * t / 10.0)
                th += k * v * fine
                x += v * math.cos(th) * fine
                y += v * math.sin(th) * fine
                t += fine
            out.append((x, y, th))
        return out
    raise ValueError(kind)


def write_image(path, scene_idx, frame_idx):
    img = Image.new("RGB", (64, 36), (20 + 40 * scene_idx, 60, 120 + 5 * frame_idx))
    draw = ImageDraw.Draw(img)
    draw.rectangle([2 + 2 * frame_idx, 20, 8 + 2 * frame_idx, 28], fill=(230, 230, 230))
    draw.line([(0, 30), (63, 30)], fill=(200, 180, 60))
    img.save(path, format="PNG")


def normalize(a):
    while a <= -math.pi:
        a += 2 * math.pi
    while a > math.pi:
        a -= 2 * math.pi
    return a


def write_scenes():
    scenes_dir = os.path.join(FIXTURES, "scenes")
    shutil.rmtree(scenes_dir, ignore_errors=True)
    os.makedirs(scenes_dir)
    kinds = ["straight", "left_arc", "right_arc", "decel", "s_curve"]
    for idx, kind in enumerate(kinds, start=1):
        scene_id = f"scene_{idx:04d}"
        img_dir = os.path.join(scenes_dir, "images", scene_id)
        os.makedirs(img_dir)
        frames = []
        for i, (x, y, yaw) in enumerate(scene_poses(kind)):
            rel = f"images/{scene_id}/frame_{i:02d}.png"
            write_image(os.path.join(scenes_dir, rel), idx, i)
            frames.append(
                {
                    "timestamp_us": BASE_TS + i * 500000,
                    "image_path": rel,
                    "ego": {"x": round(x, 6), "y": round(y, 6), "z": 0.0, "yaw": round(normalize(yaw), 6)},
                    "camera": {
                        "fx": FX,
                        "fy": FY,
                        "cx": CX,
                        "cy": CY,
                        "cam_from_ego": {"t": CAM_T, "q_wxyz": CAM_Q_WXYZ},
                    },
                }
            )
        manifest = {"scene_id": scene_id, "frames": frames}
        with open(os.path.join(scenes_dir, f"{scene_id}.json"), "w") as f:
            json.dump(manifest, f, indent=1)
            f.write("\n")


STAGE1_REPLIES = {
    "scene_0001": """Intent Command: The ego vehicle should continue straight along the current lane and maintain its speed; the road ahead is clear.

Scene Description: A two-lane road in daylight. No traffic lights are visible, lane markings are solid on the right and dashed in the center, and traffic is light.

Major Objects:
- silver sedan, far ahead in the same lane: moving at a similar speed, sets the safe following distance
- cyclist, right shoulder of the image: riding steadily, keep lateral clearance when passing
""",
    "scene_0002": """### Intent Command
Follow the lane as it bends to the left and maintain the current speed through the curve.

### Scene Description
A gentle left-hand curve with a guardrail on the right. No signals or crossings; the lane markings curve smoothly ahead.

### Major Objects
- white SUV, center of the image: about 40 m ahead in the same lane, pacing the curve
- road sign, right edge: curve warning, confirms the bend ahead
""",
    "scene_0003": """Intent Command: Turn right following the lane curvature and decelerate slightly for the tightening bend.

Scene Description: The road curves to the right past a parked truck; visibility into the bend is limited. Lane markings are clear.

Major Objects:
- parked truck, right side of the image: reduces visibility into the curve, stay left within the lane
- oncoming hatchback, left lane: approaching in the opposite direction, no conflict if we hold our lane
""",
    "scene_0004": """**Intent Command:** Continue straight but decelerate smoothly; traffic ahead is slowing toward a junction.

**Scene Description:** A straight urban road approaching an intersection with a queue forming. The signal ahead shows amber.

**Major Objects:**
- blue compact car, directly ahead: brake lights on, closing distance drives our deceleration
- pedestrian, left sidewalk near the crossing: waiting to cross, watch for a step-off
- traffic light, upper center: amber now, expect red by arrival
""",
    "scene_0005": """Intent Command: Follow the winding lane, first bearing left then right, and maintain a gentle speed.

Scene Description: A curvy suburban street lined with parked cars; the lane weaves left then right. No signals in view.

Major Objects:
- parked van, right side: narrows the usable lane on the first bend
- dog walker, left sidewalk: close to the curb through the second bend, pass slowly
""",
}

STAGE2_REPLIES = {
    "scene_0001": """Based on the clear road and steady history, the vehicle should hold its cruise.

Speed: [8.00, 8.00, 8.00, 8.00, 8.00, 8.00, 8.00, 8.00, 8.00, 8.00]
Curvature: [0.00, 0.00, 0.00, 0.00, 0.00, 0.00, 0.00, 0.00, 0.00, 0.00]
""",
    "scene_0002": """```
Speed: [6.0, 6.0, 6.0, 6.0, 6.0, 6.0, 6.0, 6.0, 6.0, 6.0]
Curvature: [0.02, 0.02, 0.02, 0.02, 0.02, 0.02, 0.02, 0.02, 0.02, 0.02]
```
The curve keeps a constant radius, so the curvature stays at 0.02 throughout.
""",
    "scene_0003": """Holding the bend requires slowing slightly.

Speed: [5.0, 4.9, 4.8, 4.8, 4.9, 5.0]
Curvature: [-0.025, -0.025, -0.025, -0.025, -0.025, -0.025]
""",
    "scene_0004": """The queue ahead means a steady brake down to walking pace.

Speed: [5.60, 5.20, 4.80, 4.40, 4.00, 3.60, 3.20, 2.80, 2.40, 2.00]
Curvature: [0.00, 0.00, 0.00, 0.00, 0.00, 0.00, 0.00, 0.00, 0.00, 0.00]
""",
    "scene_0005": """Weaving through the two bends at a constant 4 m/s:

Speed: [4.00, 4.00, 4.00, 4.00, 4.00, 4.00, 4.00, 4.00, 4.00, 4.00]
Curvature: [-0.028, -0.030, -0.027, -0.021, -0.012, -0.002, 0.009, 0.018, 0.025, 0.029]
""",
}


def write_scene_replies():
    replies_dir = os.path.join(FIXTURES, "scenes", "replies")
    os.makedirs(replies_dir, exist_ok=True)
    for scene_id in sorted(STAGE1_REPLIES):
        with open(os.path.join(replies_dir, f"{scene_id}.stage1.txt"), "w") as f:
            f.write(STAGE1_REPLIES[scene_id])
        with open(os.path.join(replies_dir, f"{scene_id}.stage2.txt"), "w") as f:
            f.write(STAGE2_REPLIES[scene_id])


# --- parser corpus ---

MANEUVER_PHRASES = {
    "Straight": ["proceed straight along the lane", "keep going straight"],
    "LeftTurn": ["turn left at the junction", "prepare a left merge"],
    "RightTurn": ["turn right at the corner", "bear right with the lane"],
}
SPEED_PHRASES = {
    "Maintain": ["maintain the current speed", "maintain speed through the block"],
    "Accelerate": ["accelerate back to cruise", "accelerate once the lane clears"],
    "Decelerate": ["decelerate for the queue", "slow down near the school zone"],
    "Stop": ["stop before the crosswalk", "come to a stop at the signal"],
}
OBJECTS = [
    ("pedestrian", "left crosswalk", "may step into the lane"),
    ("silver sedan", "center of the image", "braking ahead of us"),
    ("cyclist", "right shoulder", "wobbling near the lane edge"),
    ("delivery truck", "parked on the right", "door open, driver may exit"),
    ("bus", "opposite lane", "pulling out of the stop"),
    ("traffic cone", "lane divider", "marks a narrowed lane"),
]
HEADER_STYLES = [
    ("Intent Command:", "Scene Description:", "Major Objects:"),
    ("### Intent Command", "### Scene Description", "### Major Objects"),
    ("**Intent Command:**", "**Scene Description:**", "**Major Objects:**"),
    ("intent command:", "scene description:", "major objects:"),
    ("## Intent Command:", "## Scene Description:", "## Major Objects:"),
]
SCENES_TEXT = [
    "A straight road with light traffic and a green signal far ahead.",
    "Dense urban block; parked cars on both sides and a zebra crossing.",
    "Rainy dual carriageway, spray from the truck ahead reduces visibility.",
    "Suburban T-junction with a yield sign and a cyclist lane on the right.",
    "Night scene, headlights of oncoming traffic and reflective lane studs.",
]


def reasoning_file(rng):
    style = rng.choice(HEADER_STYLES)
    maneuver = rng.choice(list(MANEUVER_PHRASES))
    speed = rng.choice(list(SPEED_PHRASES))
    intent = f"The ego vehicle should {rng.choice(MANEUVER_PHRASES[maneuver])} and {rng.choice(SPEED_PHRASES[speed])}."
    scene = rng.choice(SCENES_TEXT)
    objs = rng.sample(OBJECTS, k=rng.randint(1, 3))
    bullet = rng.choice(["-", "*", "1."])
    lines = []
    for i, (label, loc, why) in enumerate(objs):
        mark = f"{i + 1}." if bullet == "1." else bullet
        lines.append(f"{mark} {label}, {loc}: {why}")
    preamble = rng.choice(["", "Here is my analysis of the scene.\n\n", "Let me walk through the scene step by step.\n\n"])
    text = f"{preamble}{style[0]}\n{intent}\n\n{style[1]}\n{scene}\n\n{style[2]}\n" + "\n".join(lines) + "\n"
    expected = {
        "stage": "reasoning",
        "expect_ok": True,
        "intent_maneuver": maneuver,
        "intent_speed": speed,
        "n_objects": len(objs),
        "first_label": objs[0][0],
    }
    return text, expected


def fmt_number(rng, value):
    style = rng.randint(0, 3)
    if style == 0:
        return f"{value:.2f}"
    if style == 1:
        return f"{value:.1f}"
    if style == 2 and value == int(value):
        return str(int(value))
    return f"{value:.3f}"


def prediction_file(rng):
    n = 10
    base_speed = rng.uniform(0.0, 14.0)
    speeds = [max(0.0, base_speed + rng.uniform(-0.5, 0.5)) for _ in range(n)]
    curvs = [rng.uniform(-0.12, 0.12) for _ in range(n)]
    variant = rng.randint(0, 9)
    truncated = False

    if variant == 0:  # clamped values present
        speeds[rng.randrange(n)] = rng.uniform(41.0, 80.0)
        curvs[rng.randrange(n)] = rng.choice([-1.0, 0.9])
    if variant == 1:  # extra points beyond the horizon
        speeds += [base_speed] * rng.randint(1, 3)
        curvs += [0.0] * rng.randint(1, 3)
        truncated = True

    speed_cells = [fmt_number(rng, v) for v in speeds]
    curv_cells = [f"{v:.3f}" for v in curvs]
    if variant == 2:  # scientific notation sprinkled in
        curv_cells[0] = f"{curvs[0]:.2e}"
    if variant == 3:  # unicode minus
        curv_cells = [c.replace("-", "−") for c in curv_cells]

    speed_label = rng.choice(["Speed:", "Speed:", "speed =", "**Speed**:", "Future speeds (m/s):"])
    curv_label = rng.choice(["Curvature:", "Curvature:", "curvature =", "**Curvature**:", "Future curvatures (1/m):"])
    body = f"{speed_label} [{', '.join(speed_cells)}]\n{curv_label} [{', '.join(curv_cells)}]"

    if variant == 4:  # fenced
        body = f"```\n{body}\n```"
    if variant == 5:  # prose wrapped
        body = f"Considering the reasoning above, the plan is:\n\n{body}\n\nThis keeps the ride smooth."
    if variant == 6:  # echo the history first
        echo = ", ".join(["2.00"] * 10)
        body = f"Your speed history (m/s) was [{echo}].\n\n{body}"
    if variant == 7:  # newlines inside brackets
        body = body.replace(", ", ",\n  ", 3)

    # Expected values mirror the parser's clamp/truncate rules.
    exp_speed = [min(max(float(c.replace("−", "-")), 0.0), 40.0) for c in speed_cells[:n]]
    exp_curv = [min(max(float(c.replace("−", "-")), -0.5), 0.5) for c in curv_cells[:n]]
    expected = {
        "stage": "prediction",
        "expect_ok": True,
        "speed": exp_speed,
        "curvature": exp_curv,
        "truncated": truncated,
    }
    return body + "\n", expected


FAILURE_FILES = [
    (
        "Intent Command: proceed straight and maintain speed.\n\nMajor Objects:\n- truck, ahead: slowing\n",
        {"stage": "reasoning", "expect_ok": False, "error": "MissingSection"},
    ),
    (
        "Speed: [3.0, 3.0, 3.0, 3.0, 3.0, 3.0, 3.0, 3.0, 3.0, 3.0]\nThe curvature stays near zero throughout.\n",
        {"stage": "prediction", "expect_ok": False, "error": "MissingList"},
    ),
    (
        "Speed: [4.0, 4.1, 4.2, 4.1]\nCurvature: [0, 0, 0, 0, 0, 0, 0, 0, 0, 0]\n",
        {"stage": "prediction", "expect_ok": False, "error": "TooFewPoints"},
    ),
    (
        "Speed: [5.0, 5.0, about five, 5.0, 5.0, 5.0, 5.0, 5.0, 5.0, 5.0]\nCurvature: [0, 0, 0, 0, 0, 0, 0, 0, 0, 0]\n",
        {"stage": "prediction", "expect_ok": False, "error": "NonNumericToken"},
    ),
]


def write_corpus():
    corpus_dir = os.path.join(FIXTURES, "replies")
    shutil.rmtree(corpus_dir, ignore_errors=True)
    os.makedirs(corpus_dir)
    rng = random.Random(20240817)
    entries = []
    for _ in range(52):
        entries.append(prediction_file(rng))
    for _ in range(44):
        entries.append(reasoning_file(rng))
    entries.extend(FAILURE_FILES)
    assert len(entries) == 100
    rng.shuffle(entries)
    for i, (text, expected) in enumerate(entries):
        stem = os.path.join(corpus_dir, f"reply_{i:03d}")
        with open(stem + ".txt", "w") as f:
            f.write(text)
        with open(stem + ".expected.json", "w") as f:
            json.dump(expected, f, indent=1)
            f.write("\n")


# --- detections ---

def project_corners(t, dims, yaw):
    dx, dy, dz = dims
    c, s = math.cos(yaw), math.sin(yaw)
    us, vs = [], []
    for i in range(8):
        ox = (1 if i & 1 else -1) * dx / 2
        oy = (1 if i & 2 else -1) * dz / 2
        oz = (1 if i & 4 else -1) * dy / 2
        X = c * ox + s * oz + t[0]
        Y = oy + t[1]
        Z = -s * ox + c * oz + t[2]
        assert Z > 0
        us.append(FX * X / Z + CX)
        vs.append(FY * Y / Z + CY)
    return min(us), min(vs), max(us), max(vs)


def write_detections():
    det_dir = os.path.join(FIXTURES, "detections")
    shutil.rmtree(det_dir, ignore_errors=True)
    os.makedirs(det_dir)
    boxes = [
        (0, "car", [2.1, 1.0, 18.0], [4.5, 1.9, 1.7], 0.25),
        (0, "truck", [-4.0, 0.6, 30.0], [8.2, 2.5, 3.1], -0.10),
        (1, "pedestrian", [3.5, 0.9, 12.0], [0.6, 0.7, 1.8], 1.30),
        (1, "car", [-1.2, 1.1, 45.0], [4.3, 1.8, 1.5], 3.00),
        (2, "trailer", [6.0, 0.8, 25.0], [10.0, 2.6, 3.6], 0.05),
    ]
    lines = []
    for frame, cls, t, dims, yaw in boxes:
        x_min, y_min, x_max, y_max = project_corners(t, dims, yaw)
        theta_ray = math.atan2((x_min + x_max) / 2 - CX, FX)
        alpha = normalize(yaw - theta_ray)
        lines.append(
            json.dumps(
                {
                    "frame": frame,
                    "class": cls,
                    "box2d": [round(v, 3) for v in (x_min, y_min, x_max, y_max)],
                    "dims_lwh": dims,
                    "alpha": round(alpha, 6),
                }
            )
        )
    with open(os.path.join(det_dir, "detections.jsonl"), "w") as f:
        f.write("\n".join(lines) + "\n")
    with open(os.path.join(det_dir, "intrinsics.json"), "w") as f:
        json.dump({"fx": FX, "fy": FY, "cx": CX, "cy": CY}, f, indent=1)
        f.write("\n")


def main():
    os.makedirs(FIXTURES, exist_ok=True)
    write_scenes()
    write_scene_replies()
    write_corpus()
    write_detections()
    print("fixtures written to", FIXTURES)


if __name__ == "__main__":
    main()
