"""Ranking comparison (Kendall tau) and the friend-recommendation protocol."""

from __future__ import annotations

import hashlib
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .features import RE_INDEX, FeatureContext
from .logistic import LogisticModel
from .model import Dataset
from .ranking import (
    DEFAULT_GAMMA,
    RankVector,
    _assemble,
    _edge_weights_all_hours,
    aggregate,
    personal_weights,
    power_iterate,
    tunkrank,
)

SCENARIO_TAGS = ("L_fh", "L_fl", "L_th", "L_tl", "L_dh", "L_dl", "L_rr", "L_ur")


def _merge_count(seq: list[int]) -> tuple[list[int], int]:
    if len(seq) <= 1:
        return seq, 0
    mid = len(seq) // 2
    left, inv_l = _merge_count(seq[:mid])
    right, inv_r = _merge_count(seq[mid:])
    merged = []
    inv = inv_l + inv_r
    i = j = 0
    while i < len(left) and j < len(right):
        if left[i] <= right[j]:
            merged.append(left[i])
            i += 1
        else:
            merged.append(right[j])
            inv += len(left) - i
            j += 1
    merged.extend(left[i:])
    merged.extend(right[j:])
    return merged, inv


def kendall_tau(rank_a: RankVector | dict, rank_b: RankVector | dict) -> float:
    """tau-a over the tie-broken total orders: (C - D) / (n(n-1)/2).

    Computed by merge-sort inversion counting; score ties are broken by
    user id before pair counting.
    """
    a = rank_a.as_dict() if isinstance(rank_a, RankVector) else dict(rank_a)
    b = rank_b.as_dict() if isinstance(rank_b, RankVector) else dict(rank_b)
    if set(a) != set(b):
        raise ValueError("rankings cover different user sets")
    n = len(a)
    if n < 2:
        raise ValueError("need at least two users")
    order_a = sorted(a, key=lambda u: (-a[u], u))
    pos_b = {u: i for i, u in enumerate(sorted(b, key=lambda u: (-b[u], u)))}
    seq = [pos_b[u] for u in order_a]
    _, inversions = _merge_count(seq)
    pairs = n * (n - 1) // 2
    return (pairs - 2 * inversions) / pairs


def kendall_tau_bruteforce(rank_a, rank_b) -> float:
    """O(n^2) pair-count oracle with the same tie-breaking convention."""
    a = rank_a.as_dict() if isinstance(rank_a, RankVector) else dict(rank_a)
    b = rank_b.as_dict() if isinstance(rank_b, RankVector) else dict(rank_b)
    users = sorted(a)
    n = len(users)
    concordant = discordant = 0
    key_a = {u: (-a[u], u) for u in users}
    key_b = {u: (-b[u], u) for u in users}
    for i in range(n):
        for j in range(i + 1, n):
            u, v = users[i], users[j]
            s = (key_a[u] < key_a[v]) == (key_b[u] < key_b[v])
            concordant += s
            discordant += not s
    return (concordant - discordant) / (n * (n - 1) // 2)


def _sub_seed(seed: int, *parts) -> int:
    h = hashlib.sha256(repr((seed,) + parts).encode()).digest()
    return int.from_bytes(h[:8], "big") % 2**32


@dataclass
class LinkSet:
    tag: str
    links: list[tuple[str, str]]
    criterion: str
    seed: int
    flagged: bool = False  # fewer eligible links than requested


def user_signature_distributions(dataset: Dataset, ctx: FeatureContext) -> np.ndarray:
    """Per-user attribute vectors normalized into probability distributions.

    Components: listed count, favourites per tweet, verified flag, retweet
    ratio, tweet count, friend count, follower count - each min-max scaled
    over the user set, then shifted by a small epsilon and normalized to sum
    1 so Jensen-Shannon distances between users are well defined. This is an
    interpretive construction; only the relative distances matter.
    """
    n = len(ctx.user_ids)
    friend_deg = np.array([len(dataset.graph.friends(u)) for u in ctx.user_ids], float)
    follower_deg = np.array(
        [len(dataset.graph.followers(u)) for u in ctx.user_ids], float
    )
    cols = np.stack(
        [ctx.listed, ctx.fv, ctx.vr, ctx.rr, ctx.tweet_counts, friend_deg, follower_deg],
        axis=1,
    )
    lo, hi = cols.min(axis=0), cols.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    scaled = (cols - lo) / span + 1e-6
    return scaled / scaled.sum(axis=1, keepdims=True)


def _js_distance_rows(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    m = 0.5 * (p + q)
    with np.errstate(divide="ignore", invalid="ignore"):
        kl_pm = np.where(p > 0, p * np.log(np.maximum(p, 1e-300) / np.maximum(m, 1e-300)), 0.0)
        kl_qm = np.where(q > 0, q * np.log(np.maximum(q, 1e-300) / np.maximum(m, 1e-300)), 0.0)
    jsd = (0.5 * kl_pm.sum(axis=1) + 0.5 * kl_qm.sum(axis=1)) / np.log(2.0)
    return np.sqrt(np.maximum(jsd, 0.0))


def edge_js_distances(dataset: Dataset, ctx: FeatureContext) -> np.ndarray:
    sig = user_signature_distributions(dataset, ctx)
    return _js_distance_rows(sig[ctx.edge_src], sig[ctx.edge_dst])


def build_link_sets(
    dataset: Dataset,
    seed: int = 0,
    ctx: Optional[FeatureContext] = None,
    n_links: int = 30,
    pool_fraction: float = 0.1,
) -> dict[str, LinkSet]:
    """Eight evaluation link sets: friend follower/tweet count high/low 10%,
    pairwise Jensen-Shannon distance high/low 10%, reciprocal, unreciprocal."""
    if ctx is None:
        ctx = FeatureContext(dataset)
    edges = ctx.edges
    follower_deg = np.array(
        [len(dataset.graph.followers(v)) for _, v in edges], dtype=float
    )
    tweet_count = ctx.tweet_counts[ctx.edge_dst]
    js_dist = edge_js_distances(dataset, ctx)
    reciprocal = np.array(
        [dataset.graph.has_edge(v, u) for u, v in edges], dtype=bool
    )

    def top_pool(values: np.ndarray, high: bool) -> list[int]:
        k = max(1, int(len(edges) * pool_fraction))
        order = np.argsort(-values if high else values, kind="stable")
        return list(order[:k])

    pools = {
        "L_fh": (top_pool(follower_deg, True), "friend follower count, high 10%"),
        "L_fl": (top_pool(follower_deg, False), "friend follower count, low 10%"),
        "L_th": (top_pool(tweet_count, True), "friend tweet count, high 10%"),
        "L_tl": (top_pool(tweet_count, False), "friend tweet count, low 10%"),
        "L_dh": (top_pool(js_dist, True), "pair JS distance, high 10%"),
        "L_dl": (top_pool(js_dist, False), "pair JS distance, low 10%"),
        "L_rr": (list(np.flatnonzero(reciprocal)), "followed each other"),
        "L_ur": (list(np.flatnonzero(~reciprocal)), "one-directional follow"),
    }
    out: dict[str, LinkSet] = {}
    for tag, (pool, criterion) in pools.items():
        if not pool:
            warnings.warn(f"scenario {tag}: empty pool, skipped")
            out[tag] = LinkSet(tag, [], criterion, seed, flagged=True)
            continue
        rng = np.random.default_rng(_sub_seed(seed, "linkset", tag))
        take = min(n_links, len(pool))
        chosen = rng.choice(len(pool), size=take, replace=False)
        out[tag] = LinkSet(
            tag,
            [edges[pool[i]] for i in sorted(chosen)],
            criterion,
            seed,
            flagged=take < n_links,
        )
    return out


class TirLinkScorer:
    """Reusable TIR machinery for repeated single-edge-removal rankings.

    Removing edge (u, v) only changes column u of every hourly matrix: u
    loses a friend, which shifts the tweet-share feature and close-friend
    multiplier for u's remaining edges. Those rows are recomputed; all other
    cached edge weights are reused.
    """

    def __init__(
        self,
        dataset: Dataset,
        model: LogisticModel,
        c: float,
        gamma: float = DEFAULT_GAMMA,
        ctx: Optional[FeatureContext] = None,
        tol: float = 1e-8,
        max_iters: int = 200,
    ):
        self.dataset = dataset
        self.model = model
        self.c = c
        self.gamma = gamma
        self.ctx = ctx if ctx is not None else FeatureContext(dataset)
        self.tol = tol
        self.max_iters = max_iters
        self.weights = _edge_weights_all_hours(self.ctx, model, c)
        self.edge_index = {e: i for i, e in enumerate(self.ctx.edges)}
        self.static = self.ctx.edge_static_features()

    def personal_scores_without(self, u: str, v: str) -> RankVector:
        ctx = self.ctx
        removed = self.edge_index[(u, v)]
        iu, iv = ctx.index[u], ctx.index[v]
        keep = np.ones(len(ctx.edges), dtype=bool)
        keep[removed] = False
        u_rows = np.flatnonzero((ctx.edge_src == iu) & keep)

        weights = self.weights[keep]
        if len(u_rows):
            x = self.static[u_rows].copy()
            x[:, RE_INDEX] = 1.0
            new_total = ctx.friend_tweet_total[iu] - ctx.tweet_counts[iv]
            dsts = ctx.edge_dst[u_rows]
            x[:, 6] = ctx.tweet_counts[dsts] / new_total if new_total > 0 else 0.0
            mult = np.where(ctx.edge_close[u_rows], self.c, 1.0 - self.c)
            w_u = np.empty((len(u_rows), 24))
            for t in range(24):
                xt = x.copy()
                xt[:, 7] = ctx.n_t[dsts, t]
                xt[:, 8] = ctx.a_t[iu, t]
                xt[:, 9] = ctx.a_t[dsts, t]
                xt[:, 10] = xt[:, 8] * xt[:, 9]
                if self.model.scaler is not None:
                    xt = self.model.scaler.transform(xt)
                w_u[:, t] = mult * ctx.n_t[dsts, t] * self.model.predict(xt)
            # positions of u's rows inside the kept-edge ordering
            kept_pos = np.cumsum(keep) - 1
            weights[kept_pos[u_rows]] = w_u

        src = ctx.edge_src[keep]
        dst = ctx.edge_dst[keep]
        n = len(ctx.user_ids)
        hourly = [
            power_iterate(
                _assemble(src, dst, weights[:, t], n, t, self.gamma),
                ctx.user_ids,
                tol=self.tol,
                max_iters=self.max_iters,
            )
            for t in range(24)
        ]
        return aggregate(
            hourly,
            personal_weights(ctx, u),
            model="tir",
            params={"c": self.c, "mode": "personal", "user": u},
        )


class TwitterRankLinkScorer:
    """TwitterRank counterpart of TirLinkScorer (per-topic matrices)."""

    def __init__(
        self,
        dataset: Dataset,
        gamma: float = DEFAULT_GAMMA,
        ctx: Optional[FeatureContext] = None,
        tol: float = 1e-8,
        max_iters: int = 200,
    ):
        self.dataset = dataset
        self.gamma = gamma
        self.ctx = ctx if ctx is not None else FeatureContext(dataset)
        self.tol = tol
        self.max_iters = max_iters
        ctx = self.ctx
        totals = ctx.friend_tweet_total[ctx.edge_src]
        with np.errstate(divide="ignore", invalid="ignore"):
            self.ratio = np.where(
                totals > 0, ctx.tweet_counts[ctx.edge_dst] / np.maximum(totals, 1e-300), 0.0
            )
        self.sims = np.stack(
            [
                1.0 - np.abs(ctx.topics[ctx.edge_src, t] - ctx.topics[ctx.edge_dst, t])
                for t in range(ctx.topics.shape[1])
            ],
            axis=1,
        )  # (n_edges, k)
        self.edge_index = {e: i for i, e in enumerate(ctx.edges)}

    def personal_scores_without(self, u: str, v: str) -> RankVector:
        ctx = self.ctx
        removed = self.edge_index[(u, v)]
        iu, iv = ctx.index[u], ctx.index[v]
        keep = np.ones(len(ctx.edges), dtype=bool)
        keep[removed] = False
        ratio = self.ratio[keep].copy()
        u_rows = np.flatnonzero((ctx.edge_src == iu) & keep)
        new_total = ctx.friend_tweet_total[iu] - ctx.tweet_counts[iv]
        kept_pos = np.cumsum(keep) - 1
        if len(u_rows):
            dsts = ctx.edge_dst[u_rows]
            ratio[kept_pos[u_rows]] = (
                ctx.tweet_counts[dsts] / new_total if new_total > 0 else 0.0
            )
        src, dst = ctx.edge_src[keep], ctx.edge_dst[keep]
        sims = self.sims[keep]
        n = len(ctx.user_ids)
        shares = ctx.topics[iu]
        scores = np.zeros(n)
        for t in range(ctx.topics.shape[1]):
            if shares[t] <= 0:
                continue
            rv = power_iterate(
                _assemble(src, dst, ratio * sims[:, t], n, t, self.gamma),
                ctx.user_ids,
                tol=self.tol,
                max_iters=self.max_iters,
            )
            scores += shares[t] * rv.scores
        if shares.sum() > 0:
            scores /= shares.sum()
        return RankVector(
            user_ids=tuple(ctx.user_ids),
            scores=scores,
            hour=None,
            model="twitterrank",
            params={"mode": "personal", "user": u},
        )


def _remove_edge_dataset(dataset: Dataset, u: str, v: str) -> Dataset:
    from .model import FollowGraph

    edges = [(a, b) for a, b in dataset.graph.edges() if (a, b) != (u, v)]
    reduced = Dataset(
        users=dataset.users,
        graph=FollowGraph(dataset.users.keys(), edges),
        tweets=list(dataset.tweets),
        observation_window=dataset.observation_window,
        tz_offset=dataset.tz_offset,
    )
    return reduced


def sample_candidates(
    dataset: Dataset, u: str, seed: int, size: int = 10
) -> list[str]:
    not_followed = sorted(
        x for x in dataset.users if x != u and not dataset.graph.has_edge(u, x)
    )
    if len(not_followed) < size:
        raise ValueError(f"fewer than {size} non-followed users for {u!r}")
    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(not_followed), size=size, replace=False)
    return [not_followed[i] for i in sorted(chosen)]


def q_score(scores: RankVector, v: str, candidates: Sequence[str]) -> int:
    """Number of candidates the true friend v outranks (ties by user id)."""
    d = scores.as_dict()
    key_v = (-d[v], v)
    return sum(1 for cand in candidates if key_v < (-d[cand], cand))


def evaluate_link(
    dataset: Dataset,
    link: tuple[str, str],
    seed: int,
    model: str = "tunkrank",
    scorer=None,
    tunkrank_p: float = 0.05,
) -> int:
    """Q(l) for one removed link: sample 10 non-followed candidates, rank on
    the reduced graph, count candidates ranked below the true friend.

    TIR and TwitterRank use personal-perspective aggregation via the given
    scorer; TunkRank uses its global ranking.
    """
    u, v = link
    if not dataset.graph.has_edge(u, v):
        raise ValueError(f"link ({u!r}, {v!r}) not in graph")
    candidates = sample_candidates(dataset, u, _sub_seed(seed, "candidates", u, v))
    if model == "tunkrank":
        reduced = _remove_edge_dataset(dataset, u, v)
        scores = tunkrank(reduced, p=tunkrank_p, tol=1e-10)
    elif model in ("tir", "twitterrank"):
        if scorer is None:
            raise ValueError(f"{model} evaluation requires a prepared scorer")
        scores = scorer.personal_scores_without(u, v)
    else:
        raise ValueError(f"unknown model {model!r}")
    return q_score(scores, v, candidates)


@dataclass
class ScenarioResult:
    tag: str
    model: str
    c: Optional[float]
    q_values: list[int]
    n_links: int = field(init=False)
    mean_q: float = field(init=False)

    def __post_init__(self):
        self.n_links = len(self.q_values)
        self.mean_q = float(np.mean(self.q_values)) if self.q_values else float("nan")


def run_scenarios(
    dataset: Dataset,
    logistic_model: LogisticModel,
    seed: int = 0,
    models: Sequence[str] = ("tir", "tunkrank", "twitterrank"),
    c_grid: Sequence[float] = (0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.96, 0.97, 0.98, 0.99, 1.0),
    gamma: float = DEFAULT_GAMMA,
    tunkrank_p: float = 0.05,
    scenarios: Optional[Sequence[str]] = None,
    n_links: int = 30,
    ctx: Optional[FeatureContext] = None,
    tol: float = 1e-8,
) -> list[ScenarioResult]:
    """Mean Q per (scenario, model); TIR additionally swept over c_grid."""
    if ctx is None:
        ctx = FeatureContext(dataset)
    link_sets = build_link_sets(dataset, seed=seed, ctx=ctx, n_links=n_links)
    tags = list(scenarios) if scenarios else list(SCENARIO_TAGS)
    results: list[ScenarioResult] = []

    tw_scorer = (
        TwitterRankLinkScorer(dataset, gamma=gamma, ctx=ctx, tol=tol)
        if "twitterrank" in models
        else None
    )
    tir_scorers = (
        {c: TirLinkScorer(dataset, logistic_model, c, gamma=gamma, ctx=ctx, tol=tol)
         for c in c_grid}
        if "tir" in models
        else {}
    )
    for tag in tags:
        links = link_sets[tag].links
        if not links:
            continue
        for model in models:
            if model == "tir":
                for c in c_grid:
                    qs = [
                        evaluate_link(dataset, l, seed, "tir", tir_scorers[c])
                        for l in links
                    ]
                    results.append(ScenarioResult(tag, "tir", c, qs))
            elif model == "twitterrank":
                qs = [
                    evaluate_link(dataset, l, seed, "twitterrank", tw_scorer)
                    for l in links
                ]
                results.append(ScenarioResult(tag, "twitterrank", None, qs))
            else:
                qs = [
                    evaluate_link(dataset, l, seed, "tunkrank", tunkrank_p=tunkrank_p)
                    for l in links
                ]
                results.append(ScenarioResult(tag, "tunkrank", None, qs))
    return results
