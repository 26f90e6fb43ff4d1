"""Normalized responses to Dirac, square and Gaussian pulse trains.

Writes one CSV per drive kind with the time-periodic form, the harmonic
series at k_c = 2 and k_c = 30 and (for the Gaussian train) the oracle, all
divided by I_p/m, plus a CSV of the first four square and Gaussian pulses.
Prints the agreement of each series with the time-periodic form.

    python3 scripts/pulse_train_responses.py --out results/
"""

import argparse
from pathlib import Path

import numpy as np

from pulsed_oscillator import closed_form as cf
from pulsed_oscillator.model import DriveSpec, Method, SystemParams, TimeGrid
from pulsed_oscillator.oracle import OracleConfig, integrate


def write_csv(path, header, columns):
    np.savetxt(path, np.column_stack(columns), delimiter=",", header=",".join(header), comments="", fmt="%.17g")


def force_panel(out):
    grid = TimeGrid(0.0, 4.0, 4000)
    sp = DriveSpec.square_train(1.0, 0.05, 0.2)
    gp = DriveSpec.gaussian_train(1.0, 0.05, 0.2)
    f_sp, f_gp = cf.force_eval(grid.times, sp), cf.force_eval(grid.times, gp)
    write_csv(out / "force_sp_gp.csv", ["t", "f_sp", "f_gp"],
              [grid.times, f_sp / np.max(f_sp), f_gp / np.max(f_gp)])


def response_panels(out, t_end, samples):
    params = SystemParams.from_omega(2.0, 10.0)
    grid = TimeGrid(0.0, t_end, samples)
    t = grid.times
    drives = {
        "dc": DriveSpec.dirac_comb(1.0, 0.2),
        "sp": DriveSpec.square_train(1.0, 0.001, 0.2),
        "gp": DriveSpec.gaussian_train(1.0, 0.001, 0.2),
    }
    for kind, drive in drives.items():
        tp = cf.particular(t, params, drive, Method.time_periodic())
        hs2 = cf.particular(t, params, drive, Method.harmonic(2))
        hs30 = cf.particular(t, params, drive, Method.harmonic(30))
        header, cols = ["t", "x_tp", "x_hs2", "x_hs30"], [t, tp, hs2, hs30]
        if kind == "gp":
            header.append("x_oracle")
            cols.append(integrate(grid, params, drive, config=OracleConfig(dt=1e-4)).values)
        write_csv(out / f"response_{kind}.csv", header, cols)
        peak = np.max(np.abs(tp))
        for name, x in zip(header[2:], cols[2:]):
            early = np.max(np.abs(x - tp)[t <= drive.T]) / peak
            late = np.max(np.abs(x - tp)[t >= 3 * drive.T]) / peak
            print(f"{kind} {name:<9} vs x_tp: max rel-to-peak on [0,T] {early:.3e}, on [3T,end] {late:.3e}")


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=Path, default=Path("results"))
    parser.add_argument("--t-end", type=float, default=6.0)
    parser.add_argument("--samples", type=int, default=6000)
    args = parser.parse_args(argv)
    args.out.mkdir(parents=True, exist_ok=True)
    force_panel(args.out)
    response_panels(args.out, args.t_end, args.samples)
    print(f"wrote CSVs to {args.out}")


if __name__ == "__main__":
    main()
