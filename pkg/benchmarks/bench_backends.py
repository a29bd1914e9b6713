#!/usr/bin/env python3
"""Time MLP training under the numba kernels vs the pure-numpy fallback.

Each backend runs in its own subprocess so the SEASONAL_ADS_BACKEND
selection (made at import time) is honest; the first run on the numba
path includes JIT compilation, so a warm second run is timed separately.

Usage: python benchmarks/bench_backends.py [--samples 20000] [--epochs 10]
"""

import argparse
import json
import os
import subprocess
import sys

WORKLOAD = """
import json, time
import numpy as np
from seasonal_ads.fusion import TrainConfig, train
from seasonal_ads.kernels import BACKEND

n, epochs = {n}, {epochs}
rng = np.random.default_rng(0)
dim = 66
signs = rng.choice([-1.0, 1.0], size=dim) * 2.0
y = np.repeat(np.arange(2), n // 2)
X = np.where(y[:, None] == 1, signs, -signs) + rng.standard_normal((n, dim))
config = TrainConfig(epochs=epochs, seed=0)

t0 = time.perf_counter()
train(X, y, 2, config)
t1 = time.perf_counter()
train(X, y, 2, config)
t2 = time.perf_counter()
print(json.dumps({{"backend": BACKEND.name, "cold_s": t1 - t0, "warm_s": t2 - t1}}))
"""


def run_backend(backend: str, n: int, epochs: int) -> dict:
    env = dict(os.environ, SEASONAL_ADS_BACKEND=backend)
    proc = subprocess.run(
        [sys.executable, "-c", WORKLOAD.format(n=n, epochs=epochs)],
        env=env,
        capture_output=True,
        text=True,
        check=True,
    )
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--samples", type=int, default=20_000)
    parser.add_argument("--epochs", type=int, default=10)
    args = parser.parse_args()

    print(f"training workload: {args.samples} samples x {args.epochs} epochs, net 66-256-64-2")
    results = {}
    for backend in ("numpy", "numba"):
        try:
            results[backend] = run_backend(backend, args.samples, args.epochs)
        except subprocess.CalledProcessError as exc:
            print(f"{backend}: failed\n{exc.stderr}", file=sys.stderr)
    print(f"{'backend':8s} {'cold (s)':>10s} {'warm (s)':>10s}")
    for backend, res in results.items():
        print(f"{backend:8s} {res['cold_s']:10.2f} {res['warm_s']:10.2f}")
    if len(results) == 2:
        speedup = results["numpy"]["warm_s"] / results["numba"]["warm_s"]
        print(f"warm speedup (numpy/numba): {speedup:.2f}x")


if __name__ == "__main__":
    main()
