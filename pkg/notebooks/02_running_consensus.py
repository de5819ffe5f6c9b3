# %% [markdown]
# # Running consensus on counts and rewards
#
# Each round every agent adds its own pull to its estimate and averages with
# its neighbours. The estimates stay within eps_n of the network average.

# %%
import numpy as np

from coopbandits.estimation import NetworkEstimationState, centralized_reference, consensus_step
from coopbandits.graph import consensus_model, path_graph

m = consensus_model(path_graph(5))
rng = np.random.default_rng(1)
M, N, T = m.M, 3, 200
means = np.array([1.0, 0.0, -1.0])

# %%
state = NetworkEstimationState.zeros(M, N)
xi_hist, r_hist, drift = [], [], []
for t in range(T):
    xi = np.eye(N)[rng.integers(0, N, M)]
    r = xi * (means + rng.normal(size=(M, 1)))
    state = consensus_step(state, xi, r, m.P)
    xi_hist.append(xi)
    r_hist.append(r)
    ref = centralized_reference(np.array(xi_hist), np.array(r_hist))
    drift.append(np.abs(state.nhat - ref.n_cent).max())

print("max drift", max(drift), "bound eps_n", m.epsilon_n)

# %%
# per-agent mean estimates after T rounds
print(np.round(state.shat / state.nhat, 3))
