"""Time the hierarchy right-hand side on the compiled and numpy backends.

Usage::

    python3 benchmarks/bench_rhs.py [--repeat N] [--threads T] [--large]

Each case builds a propagator, evaluates the derivative of a random
hierarchy state with every available backend and reports the best time
per call, the speedup over numpy and the largest deviation between them.
"""
import argparse
import timeit

import numpy as np

from antenna_heom.bath import BathConfig, SpectralDensityParams, expand_correlation, reorganization_energy
from antenna_heom.driving import Pulse
from antenna_heom.engine import EmissionRates, HeomPropagator
from antenna_heom.kernels import available_backends
from antenna_heom.network import NetworkSpec, build_operators, eigenanalyze
from antenna_heom.units import ns_to_au, rate_mhz_to_au

CASES = {
    "classical L4": ("classical", 298.0, 1, None, 4),
    "quantum L3 nm5": ("quantum", 0.01, 5, 0.01, 3),
    "quantum L4 nm10": ("quantum", 0.01, 10, 0.01, 4),
}
LARGE = {"quantum L5 nm10": ("quantum", 0.01, 10, 0.01, 5)}


def build(regime, temperature, n_mat, eta, level, backend, threads):
    ops = build_operators(NetworkSpec())
    eig = eigenanalyze(ops)
    params = SpectralDensityParams.classical() if regime == "classical" else SpectralDensityParams.quantum()
    bath = BathConfig(params, temperature, n_mat, eta).calibrated(eig.omega_bd())
    ops = ops.with_renormalization(reorganization_energy(bath.params))
    omega = eig.gap("B", "g")
    rate = float(rate_mhz_to_au(10.0))
    return HeomPropagator(ops, expand_correlation(bath), Pulse(1e-6, ns_to_au(25.0), omega),
                          EmissionRates(rate, rate), level=level, frame_frequency=omega,
                          backend=backend, threads=threads)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--large", action="store_true", help="include the 11628-ADO hierarchy")
    args = parser.parse_args(argv)

    cases = dict(CASES, **(LARGE if args.large else {}))
    rng = np.random.default_rng(0)
    print(f"{'case':<18}{'ADOs':>7}{'backend':>9}{'time/call':>13}{'speedup':>9}{'max dev':>11}")
    for name, spec in cases.items():
        ref_time, ref_out = None, None
        for backend in ("python",) + tuple(b for b in available_backends() if b != "python"):
            prop = build(*spec, backend=backend, threads=args.threads)
            y = rng.standard_normal((prop.n_ados, 8, 8)) + 1j * rng.standard_normal((prop.n_ados, 8, 8))
            if ref_out is not None:
                y = ref_y
            out = np.empty_like(y)
            t = ns_to_au(3.0)
            number = max(1, int(2000 / prop.n_ados))
            best = min(timeit.repeat(lambda: prop.rhs(t, y, out), number=number, repeat=args.repeat)) / number
            result = out.copy()
            if ref_out is None:
                ref_time, ref_out, ref_y = best, result, y
                dev = 0.0
            else:
                dev = np.abs(result - ref_out).max() / np.abs(ref_out).max()
            print(f"{name:<18}{prop.n_ados:>7}{backend:>9}{best * 1e6:>10.1f} us"
                  f"{ref_time / best:>8.1f}x{dev:>11.1e}")


if __name__ == "__main__":
    main()
