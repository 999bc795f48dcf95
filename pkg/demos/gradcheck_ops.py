"""Finite-difference check of every differentiable op in the autodiff core.

Each registry entry builds a small scalar function of random inputs; the
analytic gradient from the tape is compared with central differences.
"""

from lyrnet.diagnostics import format_table, run_gradchecks

results = run_gradchecks(seed=0)
print(format_table(results))
print(f"{sum(r.passed for r in results)}/{len(results)} ops pass; "
      f"total {sum(r.seconds for r in results):.1f}s")
