"""How many models are worth training?

Measures pareto-curve noise at increasing sample sizes on the bundled
synthetic pool, fits the hyperbolic trendline and finds its elbow: the
point where training more models stops buying much curve stability.
"""

import numpy as np

from blockeval.harness import build_synthetic_pool
from blockeval.stats import recommend_sample_size, sample_size_trend

pool = build_synthetic_pool(size=3000, seed=7)
print(f"pool: {len(pool)} surrogate records")

trend = sample_size_trend(pool, "macs", repetitions=100, seed=0)
print(f"\n{'n':>5} {'noise':>9} {'trendline':>10}")
for n, noise, fit in zip(
    trend.sample_sizes, trend.noise, trend.trendline(np.array(trend.sample_sizes))
):
    bar = "#" * int(round(noise * 4000))
    print(f"{n:>5} {noise:>9.4f} {fit:>10.4f}  {bar}")

print(f"\ntrendline: {trend.intercept:.4f} + {trend.inverse_gain:.2f}/n")
print(f"elbow of the trendline: n = {trend.elbow:.0f}")
print(f"recommended sample size: {recommend_sample_size(pool, 'macs', seed=0)}")
print("\naround 130 samples the curve noise has mostly flattened out, which")
print("is why the comparison pipeline defaults to 130 models per family.")
