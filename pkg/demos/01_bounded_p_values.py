"""Bounded selective p-values on a toy line.

The selection oracle here is an explicit partition of the line, so the exact
selective p-value is known and we can watch the bounds close in on it.
Run with ``python3 demos/01_bounded_p_values.py``.
"""

# %%
import numpy as np

from adasi import Decision, PiecewiseOracle, Precision, gaussian, naive_p, oc_p, run
from adasi.core import selective_p
from adasi.intervals import IntervalUnion

# %% [markdown]
# A line cut into 60 cells. The observed statistic sits in a cell labelled 0;
# every other cell labelled 0 also reproduces the observed output.

# %%
rng = np.random.default_rng(4)
edges = np.sort(rng.uniform(-6, 6, 59))
labels = rng.integers(0, 3, 60).tolist()
t = 2.1
cell = int(np.searchsorted(edges, t))
labels[cell] = 0
oracle = PiecewiseOracle(edges, labels, 0)
null = gaussian(1.0)

cuts = np.concatenate([[-np.inf], edges, [np.inf]])
truth = IntervalUnion([(cuts[i], cuts[i + 1]) for i, lab in enumerate(labels) if lab == 0])
p_exact = selective_p(t, "two-sided", null, truth)
print(f"naive p   = {naive_p(t, 'two-sided', null):.4f}")
print(f"oc p      = {oc_p(t, 'two-sided', null, PiecewiseOracle(edges, labels, 0)):.4f}")
print(f"exact p   = {p_exact:.4f}")

# %% [markdown]
# Search until the bounds are within 1e-3 of each other, printing the trace.

# %%
res = run(t, "two-sided", null, oracle, "pi3", rule=Precision(1e-3))
for it, lo, hi in res.state.trace:
    print(f"iter {it:3d}: {lo:.5f} <= p <= {hi:.5f}")
print(f"{oracle.calls} oracle calls; exact value {p_exact:.5f} is inside the final bracket")

# %% [markdown]
# To decide at level 0.05, the search can stop far earlier.

# %%
for strategy in ("pi1", "pi2", "pi3"):
    o = PiecewiseOracle(edges, labels, 0)
    r = run(t, "two-sided", null, o, strategy, rule=Decision(0.05))
    verdict = {True: "reject", False: "accept", None: "undecided"}[r.decision]
    print(f"{strategy}: {verdict} after {o.calls} calls, bracket [{r.p_lower:.4f}, {r.p_upper:.4f}]")
