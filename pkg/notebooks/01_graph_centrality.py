# %% [markdown]
# # Consensus matrices and node centrality
#
# Build P = I - (kappa/d_max) L for a few small graphs and look at the
# count-drift bound eps_n and the per-node measure eps_c.

# %%
import numpy as np

from coopbandits.graph import (complete_graph, consensus_model, erdos_renyi, paw_graph,
                               path_graph, star_graph)
from coopbandits.numerics import RandomStream
from coopbandits.policies import t_dagger

np.set_printoptions(precision=3, suppress=True)

# %%
# triangle 1-2-3 with node 4 hanging off node 3
m = consensus_model(paw_graph())
print("kappa", m.kappa)
print("eigenvalues", m.spectrum.eigenvalues)
print("eps_n", round(m.epsilon_n, 3))
print("eps_c", m.epsilon_c)
print("t_dagger", [round(t_dagger(e), 1) for e in m.epsilon_c])
# node 3 (the hub) is best placed, the pendant node 4 worst

# %%
# the star has a repeated eigenvalue, so its leaf values depend on the
# eigenbasis picked inside that eigenspace
for g, name in [(complete_graph(4), "complete"), (path_graph(4), "path"), (star_graph(4), "star")]:
    mm = consensus_model(g)
    print(f"{name:9s} eps_n={mm.epsilon_n:6.3f} eps_c={mm.epsilon_c}")

# %%
# literal kappa rule d/(d-1) fails on every connected 4-node graph
from coopbandits.graph import SpectrumError

try:
    consensus_model(paw_graph(), "d/(d-1)")
except SpectrumError as exc:
    print(exc)

# %%
# a few sparse random graphs: degree vs centrality
s = RandomStream(0)
for _ in range(3):
    mm = consensus_model(erdos_renyi(10, np.log(10) / 10, s))
    order = np.argsort(mm.epsilon_c)
    print("degrees", mm.graph.degrees[order], "eps_c", mm.epsilon_c[order])
