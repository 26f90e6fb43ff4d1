import numpy as np

# reference configuration used throughout the tests
GAMMA, OMEGA, PERIOD, SHIFT, TAU = 2.0, 10.0, 1.0, 0.2, 0.001

# filled by the acceptance suite, printed in the terminal summary
ACCEPTANCE_LINES = []


def rel_to_peak(a, b, peak=None):
    a, b = np.asarray(a), np.asarray(b)
    peak = np.max(np.abs(a)) if peak is None else peak
    return float(np.max(np.abs(a - b)) / peak)


def centre_distance(t, drive, n=None):
    """Distance from each time to the nearest pulse centre."""
    t = np.asarray(t, dtype=float)
    n = n if n is not None else drive.pulse_count_until(float(np.max(t)) + drive.T)
    centres = drive.Q + drive.T * np.arange(n)
    return np.min(np.abs(t[:, None] - centres[None, :]), axis=1)


def random_setup(rng, kind):
    """A valid (params, drive) draw with appreciable damping and a usable erf range."""
    from pulsed_oscillator.model import DriveSpec, SystemParams

    gamma = rng.uniform(0.2, 4.0)
    omega = rng.uniform(2.0, 30.0)
    T = rng.uniform(0.5, 3.0)
    tau = 0.0
    if kind != "dc":
        # keep tau*omega/sqrt(2) < 0.5 and leave room for the shift
        tau = rng.uniform(1e-4, min(0.2 * T, 0.5 / omega))
    Q = rng.uniform(tau + 0.05 * T, 0.95 * T)
    impulse = rng.uniform(0.1, 3.0) * rng.choice([-1.0, 1.0])
    m = rng.uniform(0.2, 5.0)
    return SystemParams.from_omega(gamma, omega, m), DriveSpec(kind, T, tau, Q, impulse=impulse)
