#!/usr/bin/env python3
"""Regenerates cases/mesh68_synthetic.json.

A 68-bus meshed grid shaped like the classic New England / New York test
system at the level of counts only: 68 buses, 16 generators, 86 lines.
Every parameter here is synthetic; none of it comes from that system's
data files. Thirty load buses carry controllable load (alpha = 100 pu,
+/- 0.01 pu each, 0.3 pu total), three buses take a 1 pu step increase in
uncontrollable load, and control is sampled every 250 ms.
"""

import json
import pathlib

N_BUSES = 68
GENERATOR_IDS = set(range(53, 69))
CONTROLLABLE_IDS = set(range(1, 31))
STEP_BUSES = {1, 7, 27}


class Lcg:
    """Tiny deterministic generator so the file is reproducible."""

    def __init__(self, seed: int):
        self.state = seed

    def uniform(self, lo: float, hi: float) -> float:
        self.state = (6364136223846793005 * self.state + 1442695040888963407) % 2**64
        return lo + (hi - lo) * (self.state >> 11) / float(2**53)


def main() -> None:
    rng = Lcg(20140703)

    buses = []
    for bus_id in range(1, N_BUSES + 1):
        bus = {
            "id": bus_id,
            "kind": "generator" if bus_id in GENERATOR_IDS else "load",
        }
        if bus_id in GENERATOR_IDS:
            bus["M"] = round(rng.uniform(2.5, 6.5), 4)
        # Load damping is kept high enough that the 250 ms zero-order hold
        # cannot sustain a relay oscillation against the +/-0.01 pu bounds.
        bus["D"] = round(rng.uniform(2.0, 3.0), 4)
        bus["P_m"] = -1.0 if bus_id in STEP_BUSES else 0.0
        if bus_id in CONTROLLABLE_IDS:
            bus["cost"] = {"alpha": 100.0, "d_min": -0.01, "d_max": 0.01}
        else:
            bus["cost"] = {"alpha": 100.0, "d_min": 0.0, "d_max": 0.0}
        buses.append(bus)

    lines = []
    for i in range(1, N_BUSES + 1):
        to = i + 1 if i < N_BUSES else 1
        lines.append({"from": i, "to": to, "B": round(rng.uniform(3.0, 10.0), 4)})
    for i in range(1, 53, 3):  # 18 chords
        to = (i + 17 - 1) % N_BUSES + 1
        lines.append({"from": i, "to": to, "B": round(rng.uniform(3.0, 10.0), 4)})
    assert len(lines) == 86

    scenario = {
        "version": 1,
        "name": "mesh68_synthetic",
        "description": (
            "Synthetic 68-bus mesh (16 generators, 86 lines): 1 pu load steps "
            "at three buses, 30 controllable loads with alpha = 100 pu, "
            "sampled control every 250 ms. Parameters are made up; results are "
            "not comparable to any published 68-bus study."
        ),
        "buses": buses,
        "lines": lines,
        "initial": {
            "omega_g": {str(i): 0.0 for i in sorted(GENERATOR_IDS)},
            "flows": [0.0] * len(lines),
        },
        "integrator": {
            "h": 0.001,
            "horizon": 40.0,
            "decimation": 100,
            "controller": "sampled:250",
        },
        "analysis": {"lyapunov": True, "kkt": True},
    }

    out = pathlib.Path(__file__).resolve().parent.parent / "cases" / "mesh68_synthetic.json"
    out.write_text(json.dumps(scenario, indent=1) + "\n")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
