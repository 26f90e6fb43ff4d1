"""Monte-Carlo recovery of (gamma, omega) from noisy Gaussian-train traces.

    python3 scripts/fit_monte_carlo.py --seeds 20 --noise 0.01
"""

import argparse
import time

import numpy as np

from pulsed_oscillator.fitting import FitProblem, fit, synthetic_data
from pulsed_oscillator.model import DriveSpec, TimeGrid


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seeds", type=int, default=20)
    parser.add_argument("--noise", type=float, default=0.01)
    parser.add_argument("--gamma", type=float, default=2.0)
    parser.add_argument("--omega", type=float, default=10.0)
    parser.add_argument("--auto-init", action="store_true", help="seed from the data instead of (1.5, 8)")
    args = parser.parse_args(argv)

    drive = DriveSpec.gaussian_train(1.0, 0.001, 0.2)
    grid = TimeGrid(0.0, 6.0, 6000)
    init = None if args.auto_init else (1.5, 8.0)
    start = time.perf_counter()
    print("seed,gamma_hat,omega_hat,rel_err_gamma,rel_err_omega,n_iterations,converged")
    g_err, w_err = [], []
    for seed in range(args.seeds):
        data = synthetic_data(grid, args.gamma, args.omega, drive, noise=args.noise, seed=seed)
        r = fit(FitProblem(data, drive, init=init))
        g_err.append(abs(r.gamma_hat - args.gamma) / args.gamma)
        w_err.append(abs(r.omega_hat - args.omega) / args.omega)
        print(f"{seed},{r.gamma_hat:.8g},{r.omega_hat:.8g},{g_err[-1]:.3e},{w_err[-1]:.3e},"
              f"{r.n_iterations},{str(r.converged).lower()}")
    print(f"# median rel error gamma {np.median(g_err):.3e}, omega {np.median(w_err):.3e}, "
          f"{time.perf_counter() - start:.1f} s")


if __name__ == "__main__":
    main()
