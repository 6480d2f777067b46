#!/usr/bin/env python3
"""Writes the default 19-channel 10/20 montage on the unit sphere.

Positions use idealized spherical angles (theta from the vertex, phi azimuth,
negative theta on the left hemisphere).
"""
import json
import math
import sys

ANGLES = [
    ("Fp1", -92, -72), ("Fp2", 92, 72), ("F7", -92, -36), ("F3", -60, -51),
    ("Fz", 46, 90), ("F4", 60, 51), ("F8", 92, 36), ("T3", -92, 0),
    ("C3", -46, 0), ("Cz", 0, 0), ("C4", 46, 0), ("T4", 92, 0),
    ("T5", -92, 36), ("P3", -60, 51), ("Pz", 46, -90), ("P4", 60, -51),
    ("T6", 92, -36), ("O1", -92, 72), ("O2", 92, -72),
]


def main(path):
    electrodes = []
    for label, theta, phi in ANGLES:
        t, p = math.radians(theta), math.radians(phi)
        electrodes.append({
            "label": label,
            "x": math.sin(t) * math.cos(p),
            "y": math.sin(t) * math.sin(p),
            "z": math.cos(t),
        })
    doc = {"name": "standard_1020_19", "radius": 1.0, "electrodes": electrodes}
    with open(path, "w") as f:
        json.dump(doc, f, indent=2)
        f.write("\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data/montage_1020.json")
