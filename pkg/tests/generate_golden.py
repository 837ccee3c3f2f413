"""Regenerate tests/data/golden_L4_neel_z.json from the oracles alone.

    python tests/generate_golden.py

Jacobi eigensolver plus mpmath primal Newton; nothing from the package.
"""

import json
import math
import os
import sys

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
import oracles  # noqa: E402

L, G, H_FIELD, J = 4, 0.9, 0.75, 1.0
OUT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "data", "golden_L4_neel_z.json")


def main():
    H = oracles.kron_hamiltonian(L, G, H_FIELD, J)
    E, V = oracles.jacobi_eigh(H)
    p = (V.T @ oracles.neel_product(L, "z")) ** 2
    p = p / p.sum()
    D = len(E)
    dkl = [math.log(D) - oracles.entropy_mp(p)]
    for n in range(1, D):
        q = oracles.primal_maxent(E, p, n)
        dkl.append(max(oracles.kl_mp(p, q), 0.0))
        print(n, dkl[-1])
    # level 3 model moment of gamma_2 (rescaled monomial) and its true value
    x = oracles.rescaled(E)
    q2 = oracles.primal_maxent(E, p, 2)
    data = {
        "L": L, "g": G, "h": H_FIELD, "J": J, "initial_state": "neel_z",
        "dkl": [float(d) for d in dkl],
        "gamma2_moment3": [float(q2 @ x**3), float(p @ x**3)],
    }
    with open(OUT, "w") as fh:
        json.dump(data, fh, indent=1)
        fh.write("\n")


if __name__ == "__main__":
    main()
