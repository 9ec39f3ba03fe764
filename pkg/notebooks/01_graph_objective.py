# %% [markdown]
# # Graph objective basics
#
# A small tour of the numeric core: Laplacian, signal smoothness, the
# log-det objective and effective resistance as its edge gradient.

# %%
import numpy as np

from graphcf.graph import (
    ObjectiveParams,
    WeightedGraph,
    effective_resistance,
    laplacian,
    objective,
    precision,
    smoothness,
)

# %% [markdown]
# Four nodes on a path, plus one weak chord.

# %%
g = WeightedGraph.from_edges(4, [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (0, 3, 0.2)])
print(laplacian(g).toarray())

# %% [markdown]
# Smoothness is small when signals agree across heavy edges.

# %%
smooth = np.array([[1.0], [1.1], [1.2], [1.3]])
rough = np.array([[1.0], [-1.0], [1.0], [-1.0]])
print("smooth signal:", smoothness(smooth, g))
print("rough signal: ", smoothness(rough, g))

# %% [markdown]
# The objective rewards log det of the precision matrix and penalizes both
# rough signals and total edge weight.

# %%
p = ObjectiveParams(beta=0.01, sigma=1.0)
for x, name in [(smooth, "smooth"), (rough, "rough")]:
    print(name, objective(g, x, p))

# %% [markdown]
# Effective resistance under the precision matrix is the derivative of
# log det with respect to an edge weight. Check it with a finite difference.

# %%
theta = precision(g, p.sigma).toarray()
i, j, h = 0, 2, 1e-6
e = np.zeros(4)
e[i], e[j] = 1, -1
fd = (np.linalg.slogdet(theta + h * np.outer(e, e))[1]
      - np.linalg.slogdet(theta - h * np.outer(e, e))[1]) / (2 * h)
print("resistance:", effective_resistance(g, p, i, j), "finite difference:", fd)
