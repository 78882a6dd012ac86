#!/usr/bin/env python3
"""Writes the bundled demo scene configs from a small 2-D room layout.

Three talkers and three two-microphone devices in a 6 m x 5 m room. Paths
are the direct sound plus first-order wall reflections (image sources).
Delays are in samples relative to the earliest arrival in the scene.
"""
import json
import math
import pathlib

RATE = 16000.0
SPEED = 343.0
ROOM = (6.0, 5.0)
REFLECTION = 0.5
SPACING = 0.12

# (id, centre, facing angle in degrees, sro_hz)
DEVICES = [
    ("dev0", (1.2, 1.0), 30.0, 0.0),
    ("dev1", (4.8, 1.3), 120.0, 0.3),
    ("dev2", (3.0, 4.2), -90.0, -0.3),
]
# (id, position, f0 range, seed)
TALKERS = [
    ("talker0", (1.0, 3.5), (95.0, 135.0), 11),
    ("talker1", (3.2, 2.4), (165.0, 230.0), 12),
    ("talker2", (5.2, 3.8), (120.0, 170.0), 13),
]


def mics(centre, angle):
    a = math.radians(angle + 90.0)
    dx, dy = 0.5 * SPACING * math.cos(a), 0.5 * SPACING * math.sin(a)
    return [(centre[0] - dx, centre[1] - dy), (centre[0] + dx, centre[1] + dy)]


def images(src):
    x, y = src
    yield (x, y), 1.0
    yield (-x, y), REFLECTION
    yield (2 * ROOM[0] - x, y), REFLECTION
    yield (x, -y), REFLECTION
    yield (x, 2 * ROOM[1] - y), REFLECTION


def paths(src, mic):
    taps = []
    for pos, refl in images(src):
        d = math.dist(pos, mic)
        taps.append((d / SPEED * RATE, refl / max(d, 0.3)))
    return taps


def build(duration, seed_offset, with_sro):
    raw = {}
    for tid, pos, _, _ in TALKERS:
        for did, centre, angle, _ in DEVICES:
            raw[(tid, did)] = [paths(pos, m) for m in mics(centre, angle)]
    earliest = min(t[0][0] for v in raw.values() for t in v)
    sources = []
    for tid, _, f0, seed in TALKERS:
        p = {}
        for did, *_ in DEVICES:
            chans = []
            for taps in raw[(tid, did)]:
                direct_delay, direct_gain = taps[0]
                chans.append({
                    "gain": round(direct_gain, 6),
                    "delay": round(direct_delay - earliest, 4),
                    "echoes": [{"delay": round(d - direct_delay, 4),
                                "gain": round(g / direct_gain, 6)} for d, g in taps[1:]],
                })
            p[did] = chans
        sources.append({"id": tid,
                        "signal": {"type": "speech", "level": 0.1, "f0_hz": list(f0),
                                   "seed": seed + seed_offset},
                        "paths": p})
    return {
        "version": 1,
        "rate_hz": RATE,
        "duration_s": duration,
        "noise_level": 0.001,
        "lagrange_order": 4,
        "arrays": [{"id": did, "channels": 2, "sro_hz": sro if with_sro else 0.0}
                   for did, _, _, sro in DEVICES],
        "sources": sources,
    }


if __name__ == "__main__":
    out = pathlib.Path(__file__).resolve().parent.parent / "demos"
    out.mkdir(exist_ok=True)
    (out / "demo_scene.json").write_text(json.dumps(build(15.0, 0, True), indent=2) + "\n")
    (out / "demo_train_scene.json").write_text(json.dumps(build(5.0, 100, False), indent=2) + "\n")
