"""Search for a (alpha, T) pair passing the tPN inequality and record it.

For T = 0.1 the smallest alpha on a geometric grid whose sharp ratio
sup lhs/rhs over the N = 5 span is at most 1 (a factor 6 below the bound)
is kept.  The spans for N <= 5 are nested, so the certificate covers every
N <= 5.  The sharp ratio is recomputed at a higher working precision to
make sure it is not an artifact of the digits used.

Run from the repository root:  python3 tests/fixtures/make_tpn_fixture.py
An interrupted search can be resumed from its log with ``--resume LOG``.
"""

import argparse
import ast
import json
import math
import pathlib
import time

from momentctl.biortho import WeightSpec, estimate_spectral_constant, tpn_sharp_constant
from momentctl.systems import boundary_system

OMEGA = (0.3, 1.1)
T_STAR = 0.1
N_MAX = 5
TARGET = 1.0

out = pathlib.Path(__file__).with_name("tpn_fixture.json")
rep = estimate_spectral_constant(OMEGA, range(1, 9), precision="extended")
beta = rep.slope
system = boundary_system("cos2", N_MAX, omega=OMEGA)
modes = system.modes(N_MAX)

ap = argparse.ArgumentParser()
ap.add_argument("--resume", help="log of an interrupted run (one dict per line)")
args = ap.parse_args()

trail = []
alpha = 0.05
found = None
if args.resume:
    for line in pathlib.Path(args.resume).read_text().splitlines():
        if line.startswith("{"):
            trail.append(ast.literal_eval(line))
            alpha *= math.sqrt(2.0)
    if trail and trail[-1]["sharp_ratio"] <= TARGET:
        found = trail[-1]["alpha"]
while found is None and alpha < 5.0:
    t0 = time.time()
    sharp = tpn_sharp_constant(modes, WeightSpec(alpha, beta, 1.0, OMEGA), T_STAR)
    trail.append({"alpha": alpha, "sharp_ratio": sharp, "seconds": round(time.time() - t0, 1)})
    print(trail[-1], flush=True)
    if sharp <= TARGET:
        found = alpha
        break
    alpha *= math.sqrt(2.0)
if found is None:
    raise SystemExit("no passing alpha on the grid")
check = tpn_sharp_constant(modes, WeightSpec(found, beta, 1.0, OMEGA), T_STAR, dps=90)
fixture = {
    "omega": list(OMEGA), "T": T_STAR, "alpha": found, "beta": beta, "b": 1.0,
    "system": {"kind": "boundary", "potential": "cos2"}, "N_max": N_MAX,
    "n_modes": len(modes), "sharp_ratio": trail[-1]["sharp_ratio"],
    "sharp_ratio_dps90": check, "search": trail,
    "beta_fit": {"N": rep.N, "constants": rep.constants, "r2": rep.r2},
}
out.write_text(json.dumps(fixture, indent=2) + "\n")
print("wrote", out)
