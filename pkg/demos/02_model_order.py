# %% [markdown]
# # Reading the model order off spectra and a dendrogram
#
# First the eigengap: a layer made of k well separated groups has k
# eigenvalues of the normalized adjacency near 1, then a drop.

# %%
import numpy as np

from mxonmtf import BenchmarkSpec, RandomStream, count_common, embed_layers, generate, linkage
from mxonmtf.model_order import estimate_k, spectrum

spec = BenchmarkSpec(n=160, L=3, k_c=2, k_p=[1, 2, 3], mu=0.05, avg_degree=12, seed=3)
net, _ = generate(spec)
for l, a in enumerate(net.layers):
    print(f"layer {l} leading |eigenvalues|:", np.round(spectrum(a)[:7], 3))

ks, deltas = estimate_k(net, RandomStream(3), trials=30)
print("k_l =", ks, " null thresholds =", np.round(deltas, 3))

# %% [markdown]
# ## Stacked embeddings
#
# Every layer is factorized alone; its community profiles (one row per
# community) are normalized and stacked. Profiles of a shared community sit
# close together, so they merge first under single linkage.

# %%
X = embed_layers(net, ks, RandomStream(3))
F = linkage(X)
np.set_printoptions(precision=4, suppress=True)
print(F.merges)

# %% [markdown]
# The scan stops before the first merge distance that grows by half or more.
# Merges of two original leaves below that cut are the common communities.

# %%
order = count_common(F, ks)
print(order.record())
