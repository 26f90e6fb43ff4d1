"""Convergence of finite-width pulse trains to the Dirac comb as tau -> 0.

    python3 scripts/narrow_pulse_limit.py --tau 1e-2 --tau 1e-3 --tau 1e-4
"""

import argparse

import numpy as np

from pulsed_oscillator import closed_form as cf
from pulsed_oscillator.model import DriveSpec, SystemParams, TimeGrid


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--tau", type=float, action="append")
    parser.add_argument("--k-c", type=int, default=30)
    args = parser.parse_args(argv)
    taus = args.tau or [1e-2, 1e-3, 1e-4]

    params = SystemParams.from_omega(2.0, 10.0)
    t = TimeGrid(0.0, 6.0, 6000).times
    dc = DriveSpec.dirac_comb(1.0, 0.2)
    x_dc, h_dc = cf.tp_dc(t, params, dc), cf.hs_dc(t, params, dc, args.k_c)
    peak, h_peak = np.max(np.abs(x_dc)), np.max(np.abs(h_dc))

    print("tau,tp_sp_vs_tp_dc,tp_gp_vs_tp_dc,tp_gp_exact_vs_tp_dc,hs_gp_vs_hs_dc")
    for tau in taus:
        sp = DriveSpec.square_train(1.0, tau, 0.2)
        gp = DriveSpec.gaussian_train(1.0, tau, 0.2)
        row = [
            np.max(np.abs(cf.tp_sp(t, params, sp) - x_dc)) / peak,
            np.max(np.abs(cf.tp_gp(t, params, gp) - x_dc)) / peak,
            np.max(np.abs(cf.tp_gp_exact(t, params, gp) - x_dc)) / peak,
            np.max(np.abs(cf.hs_gp(t, params, gp, args.k_c) - h_dc)) / h_peak,
        ]
        print(f"{tau:g}," + ",".join(f"{v:.4e}" for v in row))


if __name__ == "__main__":
    main()
