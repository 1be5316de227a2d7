"""Testing a coefficient chosen by forward stepwise selection.

Run with ``python3 demos/02_stepwise_selection.py``.
"""

# %%
import numpy as np

from adasi import core
from adasi.confidence import selective_ci
from adasi.sfs import SfsProblem, chi_direction, run_sfs, sfs_oracle, z_direction

rng = np.random.default_rng(11)
n, p, K = 100, 10, 5
X = rng.standard_normal((n, p))
beta = np.r_[np.full(5, 0.3), np.zeros(5)]
D = X @ beta + rng.standard_normal(n)
problem = SfsProblem(X, D, 1.0, K)
history = run_sfs(X, D, K)
print("selected, in order:", history.order)

# %% [markdown]
# z-test for one selected feature. The test conditions on the selected set,
# so the feature is picked from the set alone (here its smallest index), never
# by its position in the selection order. The line ``a + b z`` moves the data
# along the contrast that estimates this coefficient.

# %%
j = min(history.selected)
eta, line, null = z_direction(problem, history, j)
t = line.z_obs
print(f"feature {j}: estimate {t:.3f}, null sd {null.scale:.3f}")

o = sfs_oracle(problem, history, line)
print(f"naive       p = {core.naive_p(t, 'two-sided', null):.4f}")
print(f"oc          p = {core.oc_p(t, 'two-sided', null, o):.4f}  ({o.calls} call)")
o = sfs_oracle(problem, history, line)
print(f"exhaustive  p = {core.exhaustive_p(t, 'two-sided', null, o):.4f}  ({o.calls} calls)")
o = sfs_oracle(problem, history, line)
res = core.run(t, "two-sided", null, o, "pi3", rule=core.Decision(0.05))
print(f"decision    p in [{res.p_lower:.4f}, {res.p_upper:.4f}]  ({o.calls} calls), reject={res.decision}")

# %% [markdown]
# Confidence interval bounds from the same partial search. The outer interval
# contains the exact selective interval; the inner one is contained in it.

# %%
outer, inner = selective_ci(0.05, res.state)
print(f"95% interval: outer [{outer[0]:.3f}, {outer[1]:.3f}], inner [{inner[0]:.3f}, {inner[1]:.3f}]")
full = core.run(t, "two-sided", null, sfs_oracle(problem, history, line), "pi3", rule=None)
outer, inner = selective_ci(0.05, full.state)
print(f"after a full search: [{outer[0]:.3f}, {outer[1]:.3f}]")

# %% [markdown]
# Chi test: does the last selected feature add anything beyond the others?

# %%
g = [history.order[-1]]
_, line_c, null_c = chi_direction(problem, history, g)
o = sfs_oracle(problem, history, line_c)
res_c = core.run(line_c.z_obs, "two-sided", null_c, o, "pi3", rule=core.Precision(1e-3))
print(f"group {g}: statistic {line_c.z_obs:.3f} ~ chi({null_c.dof:g}); p in [{res_c.p_lower:.4f}, {res_c.p_upper:.4f}] after {o.calls} calls")
