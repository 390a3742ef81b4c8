"""Synthetic multi-graph benchmark.

Users belong to planted communities. The friendship graph is a stochastic
block model over those communities; each community prefers one block of
sellers; sellers carry segment/region/keyword attribute nodes; and credit
labels follow community-level base rates. The homophily knobs dial each
signal between pure noise (0) and fully community-determined (1).

Every generator draws from its own stream derived from ``cfg.seed``.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields

import numpy as np

from .errors import FileFormatError
from .graph import BIPARTITE, HOMOGENEOUS, Graph, save_graph

_SALT = {"communities": 1, "friendship": 2, "purchases": 3, "attributes": 4,
         "credit": 5, "cold": 6}


@dataclass
class SynthConfig:
    users: int = 2000
    sellers: int = 200
    attributes: int = 60
    communities: int = 8
    p_intra: float = 0.04
    p_inter: float = 0.002
    purchase_homophily: float = 0.7
    purchases_per_user: float = 6.0
    attribute_homophily: float = 0.8
    credit_homophily: float = 0.7
    credit_positive_rate: float = 0.16
    # ratio between consecutive community credit rates; 1 = equal rates
    credit_rate_ratio: float = 1.0 / 3.0
    community_credit_rates: tuple | None = None
    cold_user_fraction: float = 0.5
    seed: int = 0

    def __post_init__(self):
        for name in ("p_intra", "p_inter", "purchase_homophily", "attribute_homophily",
                     "credit_homophily", "credit_positive_rate", "cold_user_fraction",
                     "credit_rate_ratio"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1] (got {v})")
        if self.communities < 2:
            raise ValueError("need at least 2 communities")
        if self.users < self.communities or self.sellers < self.communities:
            raise ValueError("need at least one user and one seller per community")
        if self.attributes < self.communities + 2:
            raise ValueError("attributes must cover one segment per community plus regions and keywords")
        if self.community_credit_rates is not None:
            self.community_credit_rates = tuple(float(r) for r in self.community_credit_rates)
            if len(self.community_credit_rates) != self.communities:
                raise ValueError("community_credit_rates needs one rate per community")


def _rng(cfg, what):
    return np.random.default_rng([int(cfg.seed), _SALT[what]])


def user_labels(cfg):
    return [f"u{i}" for i in range(cfg.users)]


def seller_labels(cfg):
    return [f"s{j}" for j in range(cfg.sellers)]


def attribute_layout(cfg):
    """Counts of (segment, region, keyword) attribute nodes."""
    n_seg = cfg.communities
    n_reg = max(1, (cfg.attributes - n_seg) // 4)
    return n_seg, n_reg, cfg.attributes - n_seg - n_reg


def attribute_labels(cfg):
    n_seg, n_reg, n_kw = attribute_layout(cfg)
    return ([f"seg{i}" for i in range(n_seg)] + [f"reg{i}" for i in range(n_reg)]
            + [f"kw{i}" for i in range(n_kw)])


def user_communities(cfg):
    """Balanced random community assignment."""
    rng = _rng(cfg, "communities")
    return rng.permutation(np.arange(cfg.users) % cfg.communities)


def seller_subsets(cfg):
    """Preferred-seller block of each seller (contiguous blocks)."""
    return np.arange(cfg.sellers) * cfg.communities // cfg.sellers


def _sample_block(rng, rows, cols, p, diagonal):
    """Edges of one SBM block as (row, col) index pairs into ``rows``/``cols``."""
    if diagonal:
        m = len(rows)
        total = m * (m - 1) // 2
    else:
        total = len(rows) * len(cols)
    if total == 0 or p <= 0:
        return np.empty((0, 2), dtype=np.int64)
    k = rng.binomial(total, p)
    flat = rng.choice(total, size=k, replace=False)
    if diagonal:
        # unrank flat index into the strict upper triangle, row-major
        m = len(rows)
        i = (m - 2 - np.floor(np.sqrt(-8.0 * flat + 4.0 * m * (m - 1) - 7) / 2.0 - 0.5)).astype(np.int64)
        j = flat + i + 1 - m * (m - 1) // 2 + (m - i) * ((m - i) - 1) // 2
        return np.stack([rows[i], rows[j]], axis=1)
    return np.stack([rows[flat // len(cols)], cols[flat % len(cols)]], axis=1)


def gen_friendship(cfg):
    comm = user_communities(cfg)
    rng = _rng(cfg, "friendship")
    members = [np.flatnonzero(comm == c) for c in range(cfg.communities)]
    blocks = []
    for a in range(cfg.communities):
        for b in range(a, cfg.communities):
            p = cfg.p_intra if a == b else cfg.p_inter
            blocks.append(_sample_block(rng, members[a], members[b], p, a == b))
    edges = np.concatenate(blocks) if blocks else np.empty((0, 2), np.int64)
    return Graph.from_edges(cfg.users, edges, HOMOGENEOUS, user_labels(cfg), name="friendship")


def gen_purchases(cfg, friendship=None):
    """Bipartite user-seller graph (users on the left).

    Each user makes ``1 + Poisson(purchases_per_user - 1)`` distinct
    purchases; each comes from the community's preferred block with
    probability ``purchase_homophily`` and from all sellers otherwise.
    """
    if friendship is not None and friendship.num_nodes != cfg.users:
        raise ValueError("friendship graph does not match cfg.users")
    comm = user_communities(cfg)
    subset = seller_subsets(cfg)
    pref = [np.flatnonzero(subset == c) for c in range(cfg.communities)]
    rng = _rng(cfg, "purchases")
    edges = []
    for u in range(cfg.users):
        m = 1 + rng.poisson(max(cfg.purchases_per_user - 1.0, 0.0))
        m = min(m, len(pref[comm[u]]), cfg.sellers)
        bought = set()
        while len(bought) < m:
            if rng.random() < cfg.purchase_homophily:
                s = int(rng.choice(pref[comm[u]]))
            else:
                s = int(rng.integers(cfg.sellers))
            bought.add(s)
        edges.extend((u, cfg.users + s) for s in sorted(bought))
    return Graph.from_edges(cfg.users + cfg.sellers, np.array(edges, dtype=np.int64),
                            BIPARTITE, user_labels(cfg) + seller_labels(cfg),
                            left_size=cfg.users, name="purchases")


def gen_seller_attributes(cfg):
    """Bipartite seller-attribute graph (sellers on the left).

    Every seller links to one segment, one region and 1-3 keywords. The
    segment equals the seller's preferred block with probability
    ``attribute_homophily``; keywords come from that segment's keyword
    bucket with the same probability.
    """
    n_seg, n_reg, n_kw = attribute_layout(cfg)
    subset = seller_subsets(cfg)
    rng = _rng(cfg, "attributes")
    seg0, reg0, kw0 = cfg.sellers, cfg.sellers + n_seg, cfg.sellers + n_seg + n_reg
    kw_bucket = np.arange(n_kw) % n_seg
    edges = []
    for s in range(cfg.sellers):
        seg = subset[s] if rng.random() < cfg.attribute_homophily else rng.integers(n_seg)
        edges.append((s, seg0 + int(seg)))
        edges.append((s, reg0 + int(rng.integers(n_reg))))
        n_words = int(rng.integers(1, 4))
        words = set()
        while len(words) < min(n_words, n_kw):
            if rng.random() < cfg.attribute_homophily and np.any(kw_bucket == seg):
                words.add(int(rng.choice(np.flatnonzero(kw_bucket == seg))))
            else:
                words.add(int(rng.integers(n_kw)))
        edges.extend((s, kw0 + w) for w in sorted(words))
    return Graph.from_edges(cfg.sellers + cfg.attributes, np.array(edges, dtype=np.int64),
                            BIPARTITE, seller_labels(cfg) + attribute_labels(cfg),
                            left_size=cfg.sellers, name="attributes")


def community_credit_rates(cfg):
    """Per-community positive rates whose size-weighted mean is exactly
    ``credit_positive_rate``.

    The rates form a geometric ladder ``1, q, q^2, ...`` (``q`` =
    ``credit_rate_ratio``) assigned to communities in random order and scaled
    to the target mean, so one community carries most of the risk.
    """
    comm = user_communities(cfg)
    sizes = np.bincount(comm, minlength=cfg.communities).astype(np.float64)
    weights = sizes / sizes.sum()
    if cfg.community_credit_rates is not None:
        return np.array(cfg.community_credit_rates)
    p = cfg.credit_positive_rate
    ladder = cfg.credit_rate_ratio ** np.arange(cfg.communities, dtype=np.float64)
    rates = _rng(cfg, "credit").permutation(ladder)
    rates *= p / (weights @ rates)
    if rates.max() > 1.0:
        raise ValueError(f"credit_rate_ratio={cfg.credit_rate_ratio} puts a community rate above 1; "
                         "raise it towards 1")
    return rates


def gen_credit_labels(cfg, friendship=None):
    """0/1 label per user.

    User ``u`` is positive with probability
    ``h * rate[community(u)] + (1 - h) * credit_positive_rate``.
    """
    if friendship is not None and friendship.num_nodes != cfg.users:
        raise ValueError("friendship graph does not match cfg.users")
    comm = user_communities(cfg)
    rates = community_credit_rates(cfg)
    h = cfg.credit_homophily
    prob = h * rates[comm] + (1.0 - h) * cfg.credit_positive_rate
    rng = np.random.default_rng([int(cfg.seed), _SALT["credit"], 1])
    return (rng.random(cfg.users) < prob).astype(np.int64)


def cold_users(cfg):
    """Users whose purchases are withheld from the observed transaction graph."""
    rng = _rng(cfg, "cold")
    k = int(round(cfg.cold_user_fraction * cfg.users))
    return np.sort(rng.choice(cfg.users, size=k, replace=False))


def split_purchases(purchases, cold):
    """Split the purchase graph into (observed, cold) bipartite graphs.

    Both keep every seller on the right; the observed graph keeps only warm
    users on the left and the cold graph only the cold ones.
    """
    n_users = purchases.left_size
    is_cold = np.zeros(n_users, dtype=bool)
    is_cold[cold] = True
    sellers = list(purchases.labels[n_users:])
    edges = purchases.edges()
    out = []
    for flag, name in ((False, "purchases"), (True, "purchases_cold")):
        users = np.flatnonzero(is_cold == flag)
        remap = np.full(n_users, -1, dtype=np.int64)
        remap[users] = np.arange(len(users))
        keep = is_cold[edges[:, 0]] == flag
        e = edges[keep]
        e = np.stack([remap[e[:, 0]], e[:, 1] - n_users + len(users)], axis=1)
        labels = [purchases.labels[u] for u in users] + sellers
        out.append(Graph.from_edges(len(labels), e, BIPARTITE, labels, len(users), name))
    return tuple(out)


@dataclass
class SynthData:
    config: SynthConfig
    friendship: Graph
    purchases: Graph
    observed_purchases: Graph
    cold_purchases: Graph
    attributes: Graph
    credit: np.ndarray
    communities: np.ndarray


def generate(cfg):
    friendship = gen_friendship(cfg)
    purchases = gen_purchases(cfg, friendship)
    observed, cold = split_purchases(purchases, cold_users(cfg))
    return SynthData(cfg, friendship, purchases, observed, cold,
                     gen_seller_attributes(cfg), gen_credit_labels(cfg, friendship),
                     user_communities(cfg))


def config_items(cfg):
    items = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            v = ",".join(repr(x) for x in v)
        items.append((f.name, "" if v is None else v))
    return items


def write_synth(data, outdir):
    """Write edge lists, label maps, credit labels and a manifest to ``outdir``."""
    os.makedirs(outdir, exist_ok=True)
    save_graph(data.friendship, os.path.join(outdir, "friendship"))
    save_graph(data.observed_purchases, os.path.join(outdir, "purchases"))
    save_graph(data.cold_purchases, os.path.join(outdir, "purchases_cold"))
    save_graph(data.attributes, os.path.join(outdir, "attributes"))
    labels = data.friendship.labels
    with open(os.path.join(outdir, "credit.labels"), "w", encoding="utf-8") as fh:
        for lab, y in zip(labels, data.credit):
            fh.write(f"{lab}\t{int(y)}\n")
    with open(os.path.join(outdir, "communities.tsv"), "w", encoding="utf-8") as fh:
        for lab, c in zip(labels, data.communities):
            fh.write(f"{lab}\t{int(c)}\n")
    with open(os.path.join(outdir, "synth.manifest"), "w", encoding="utf-8") as fh:
        for k, v in config_items(data.config):
            fh.write(f"{k}={v}\n")
        fh.write(f"summary={json.dumps(summary(data), sort_keys=True)}\n")


def summary(data):
    return {
        "users": data.friendship.num_nodes,
        "friendship_edges": data.friendship.edge_count,
        "observed_purchase_edges": data.observed_purchases.edge_count,
        "cold_purchase_edges": data.cold_purchases.edge_count,
        "attribute_edges": data.attributes.edge_count,
        "credit_positive": int(data.credit.sum()),
    }


def read_labels_file(path):
    """``label<TAB>0|1`` lines as a dict."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 2 or parts[1] not in ("0", "1"):
                raise FileFormatError(path, "'label<TAB>0|1' lines", f"line {lineno}")
            out[parts[0]] = int(parts[1])
    return out
