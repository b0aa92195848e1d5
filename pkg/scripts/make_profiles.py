"""Regenerates the bundled device-profile fixtures in src/nacqfl/profiles/.

The fleet is synthetic but shaped like a real multi-site deployment: three
regions roughly 50 km apart, each with three co-located device pairs, so
K-means finds clean structure at 3, 5 and 7 clusters. Calibration quality
comes in three tiers so that noise-aware selection has real choices to
make; link quality varies mildly by site. Each profile's quantum volume is
computed (not invented) with the package's own heavy-output protocol and
cached in the file.

Run from the repository root:  python scripts/make_profiles.py
"""

import json
import pathlib

import numpy as np

from nacqfl.noise import CalibrationData
from nacqfl.selection import quantum_volume
from nacqfl.topology import DeviceProfile

OUT_DIR = pathlib.Path(__file__).resolve().parents[1] / "src" / "nacqfl" / "profiles"

TIERS = {
    # e1, e2, readout, prep, t1_us
    "A": dict(e1=3e-4, e2=5e-3, ro=0.010, prep=0.005, t1=150.0),
    "B": dict(e1=1.2e-3, e2=2e-2, ro=0.020, prep=0.010, t1=90.0),
    "C": dict(e1=8e-3, e2=1e-1, ro=0.080, prep=0.030, t1=10.0),
}

# name, capacity, region, site-in-region, quality tier, classical resources
DEVICES = [
    ("oslo-5", 5, 0, 0, "A", 0.55),
    ("perth-5", 5, 0, 0, "B", 0.40),
    ("lagos-7", 7, 0, 1, "A", 0.70),
    ("melbourne-14", 14, 0, 1, "C", 0.80),
    ("mumbai-27", 27, 0, 2, "C", 1.00),
    ("hanoi-27", 27, 0, 2, "B", 0.90),
    ("jakarta-5", 5, 1, 0, "A", 0.50),
    ("manila-5", 5, 1, 0, "A", 0.45),
    ("london-5", 5, 1, 1, "B", 0.35),
    ("rueschlikon-16", 16, 1, 1, "C", 0.85),
    ("kolkata-27", 27, 1, 2, "B", 0.95),
    ("quito-5", 5, 1, 2, "B", 0.30),
    ("lima-5", 5, 2, 0, "A", 0.50),
    ("nairobi-5", 5, 2, 0, "B", 0.40),
    ("casablanca-7", 7, 2, 1, "A", 0.65),
    ("geneva-27", 27, 2, 1, "B", 0.90),
    ("algiers-27", 27, 2, 2, "C", 0.95),
    ("sydney-27", 27, 2, 2, "C", 1.00),
]

REGION_CENTERS = [(0.0, 0.0), (60.0, 10.0), (30.0, 52.0)]
SITE_OFFSETS = [(-9.0, -4.0), (9.0, -4.0), (0.0, 9.0)]
SITE_LINK_EPS = [0.004, 0.008, 0.014]  # per-site quantum-link Pauli scale

SINGLE_QUBIT_GATES = ("X", "Y", "H", "RX", "RY")
VIRTUAL_GATES = ("Z", "RZ")  # frame changes: zero duration, zero error


def jitter(rng, base, spread=0.2):
    return float(base * rng.uniform(1.0 - spread, 1.0 + spread))


def build_calibration(rng, capacity, tier):
    t = TIERS[tier]
    n = capacity
    t1 = tuple(jitter(rng, t["t1"]) for _ in range(n))
    t2 = tuple(min(jitter(rng, 1.1 * t1q, 0.3), 1.9 * t1q) for t1q in t1)
    single = {}
    for g in SINGLE_QUBIT_GATES:
        single[g] = tuple(jitter(rng, t["e1"], 0.35) for _ in range(n))
    for g in VIRTUAL_GATES:
        single[g] = tuple(0.0 for _ in range(n))
    coupled = min(capacity, 12)
    pairs = {}
    for a in range(coupled):
        for b in range(a + 1, coupled):
            pairs[f"{a}-{b}"] = jitter(rng, t["e2"], 0.35)
    duration = {g: 35.6 for g in SINGLE_QUBIT_GATES}
    duration.update({g: 0.0 for g in VIRTUAL_GATES})
    duration["CNOT"] = 380.0
    return {
        "t1": list(t1),
        "t2": list(t2),
        "single_gate_err": {g: list(v) for g, v in single.items()},
        "two_gate_err": {"CNOT": pairs},
        "readout_err": [jitter(rng, t["ro"], 0.3) for _ in range(n)],
        "prep01": [jitter(rng, t["prep"], 0.3) for _ in range(n)],
        "prep10": [jitter(rng, t["prep"], 0.3) for _ in range(n)],
        "gate_duration": duration,
    }


def main():
    OUT_DIR.mkdir(parents=True, exist_ok=True)
    for old in OUT_DIR.glob("*.json"):
        old.unlink()
    for idx, (name, capacity, region, site, tier, resources) in enumerate(DEVICES):
        rng = np.random.default_rng(1000 + idx)
        cx, cy = REGION_CENTERS[region]
        sx, sy = SITE_OFFSETS[site]
        position = [cx + sx + rng.uniform(-1.2, 1.2), cy + sy + rng.uniform(-1.2, 1.2)]
        eps = SITE_LINK_EPS[site]
        link = [jitter(rng, eps, 0.25), jitter(rng, eps, 0.25), jitter(rng, 2 * eps, 0.25)]
        doc = {
            "id": name,
            "capacity": capacity,
            "position": [round(v, 3) for v in position],
            "calibration": build_calibration(rng, capacity, tier),
            "classical_resources": resources,
            "link_pauli": [round(v, 6) for v in link],
            "quantum_volume": None,
        }
        profile = DeviceProfile.from_dict(doc)
        qv = quantum_volume(profile, seed=77 + idx, max_width=4)
        doc["quantum_volume"] = qv
        path = OUT_DIR / f"{name}.json"
        path.write_text(json.dumps(doc, indent=1) + "\n")
        print(f"{name:16s} tier {tier} capacity {capacity:3d} QV {qv}")
    # round-trip sanity
    for path in sorted(OUT_DIR.glob("*.json")):
        DeviceProfile.from_dict(json.loads(path.read_text()))
        CalibrationData.from_dict(json.loads(path.read_text())["calibration"])


if __name__ == "__main__":
    main()
