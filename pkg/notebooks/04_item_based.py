# %% [markdown]
# # Item-based prediction
#
# For each query a small graph is learned over the target item and the
# items the active user already rated; the rating is the weighted mean of
# the user's ratings on items adjacent to the target.

# %%
import numpy as np

from graphcf.datasets import fetch_movielens_100k
from graphcf.evalbench import mae
from graphcf.ingest import parse_movielens, split_train_test, to_matrix
from graphcf.learn import LearnConfig
from graphcf.predict import predict_item_based, query_config

ds = parse_movielens(fetch_movielens_100k())
train, test = split_train_test(ds, 0.2, 42)
m = to_matrix(train)
cfg = query_config(LearnConfig())

# %%
rng = np.random.default_rng(0)
pick = rng.choice(len(test), 200, replace=False)
users, items = test.user_indices()[pick], test.item_indices()[pick]
preds = [predict_item_based(m, (u, i), cfg) for u, i in zip(users, items)]
print("MAE on 200 sampled test pairs:", round(mae([p.value for p in preds], test.ratings[pick]), 4))
print("sources:", {s: sum(p.source == s for p in preds) for s in {p.source for p in preds}})
