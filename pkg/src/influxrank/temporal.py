"""Hourly/weekly activity profiles, K-SC shape clustering, delay/trace metrics."""

from __future__ import annotations

import bisect
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .model import Dataset, SECONDS_PER_DAY


@dataclass
class HourlyProfile:
    user_id: str
    raw_counts: np.ndarray  # tweets per hour bin, integer counts
    n_t: np.ndarray  # raw_counts / available_days
    a_t: np.ndarray  # n_t normalized to sum 1 (zero vector if no tweets)
    available_days: float
    has_tweets: bool


@dataclass
class ClusterResult:
    k: int
    centroids: np.ndarray  # (k, 24), unit Euclidean norm each
    assignment: dict[str, int]
    proportions: np.ndarray
    asc: Optional[float]
    objective: float
    objective_history: list[float]


@dataclass(frozen=True)
class ResponseMetric:
    tweet_id: str
    kind: str
    delay: int
    trace: int


def hourly_profile(dataset: Dataset, user_id: str) -> HourlyProfile:
    """Per-hour tweet rate and normalized activity for one user.

    The available-day span is the interval between the user's first and last
    tweet, floored at one day to avoid rate blow-up for single-burst users.
    """
    if user_id not in dataset.users:
        raise KeyError(f"unknown user {user_id!r}")
    tweets = dataset.tweets_by_author[user_id]
    counts = np.zeros(24)
    if not tweets:
        return HourlyProfile(user_id, counts, counts.copy(), counts.copy(), 1.0, False)
    for tw in tweets:
        counts[dataset.hour_of(tw.timestamp)] += 1
    span = (tweets[-1].timestamp - tweets[0].timestamp) / SECONDS_PER_DAY
    days = max(span, 1.0)
    n_t = counts / days
    a_t = n_t / n_t.sum()
    return HourlyProfile(user_id, counts, n_t, a_t, days, True)


def all_profiles(dataset: Dataset) -> dict[str, HourlyProfile]:
    return {uid: hourly_profile(dataset, uid) for uid in sorted(dataset.users)}


def global_activity(dataset: Dataset, granularity: str = "hour_of_day") -> np.ndarray:
    """Total event counts binned by hour of day (24), day of week (7) or both (7x24)."""
    if not dataset.tweets:
        raise ValueError("empty dataset")
    if granularity == "hour_of_day":
        out = np.zeros(24)
        for tw in dataset.tweets:
            out[dataset.hour_of(tw.timestamp)] += 1
    elif granularity == "day_of_week":
        out = np.zeros(7)
        for tw in dataset.tweets:
            out[dataset.weekday_of(tw.timestamp)] += 1
    elif granularity == "hour_x_day":
        out = np.zeros((7, 24))
        for tw in dataset.tweets:
            out[dataset.weekday_of(tw.timestamp), dataset.hour_of(tw.timestamp)] += 1
    else:
        raise ValueError(f"unknown granularity {granularity!r}")
    return out


def _shift_set(max_shift: int) -> list[int]:
    if not 0 <= max_shift <= 23:
        raise ValueError("max_shift must be in [0, 23]")
    shifts = sorted({q % 24 for q in range(-max_shift, max_shift + 1)})
    return shifts


def _shape_distances(x: np.ndarray, centroid: np.ndarray, shifts: Sequence[int]):
    """Scale/shift-invariant distance of rows of x to one centroid.

    d(x, c) = min_q sqrt(1 - cos^2(x, shift(c, q))); also returns the best
    shift per row. Both arguments may be arbitrarily scaled.
    """
    xn = np.linalg.norm(x, axis=1)
    best = np.full(x.shape[0], np.inf)
    best_q = np.zeros(x.shape[0], dtype=int)
    cn = np.linalg.norm(centroid)
    for q in shifts:
        cq = np.roll(centroid, q)
        cos2 = (x @ cq) ** 2 / np.maximum(xn * cn, 1e-300) ** 2
        d = np.sqrt(np.maximum(0.0, 1.0 - cos2))
        better = d < best
        best[better] = d[better]
        best_q[better] = q
    return best, best_q


def ksc_distance(x: np.ndarray, c: np.ndarray, max_shift: int = 0) -> float:
    d, _ = _shape_distances(np.asarray(x, dtype=float)[None, :], np.asarray(c, float),
                            _shift_set(max_shift))
    return float(d[0])


def _update_centroid(members: np.ndarray) -> np.ndarray:
    """Unit minimizer of the summed scaled residuals over aligned members."""
    norms = np.linalg.norm(members, axis=1, keepdims=True)
    unit = members / norms
    scatter = len(members) * np.eye(members.shape[1]) - unit.T @ unit
    vals, vecs = np.linalg.eigh(scatter)
    c = vecs[:, 0]
    if c.sum() < 0:
        c = -c
    return c


def _pairwise_shape_distance(x: np.ndarray, shifts: Sequence[int]) -> np.ndarray:
    xn = np.linalg.norm(x, axis=1)
    unit = x / xn[:, None]
    best = np.full((x.shape[0], x.shape[0]), np.inf)
    for q in shifts:
        cos2 = (unit @ np.roll(unit, q, axis=1).T) ** 2
        np.minimum(best, np.sqrt(np.maximum(0.0, 1.0 - cos2)), out=best)
    return best


def _silhouette(dist: np.ndarray, labels: np.ndarray, k: int) -> float:
    n = len(labels)
    scores = np.zeros(n)
    for i in range(n):
        own = labels == labels[i]
        own[i] = False
        a = dist[i, own].mean() if own.any() else 0.0
        b = np.inf
        for j in range(k):
            if j == labels[i]:
                continue
            other = labels == j
            if other.any():
                b = min(b, dist[i, other].mean())
        if not np.isfinite(b):
            scores[i] = 0.0
            continue
        denom = max(a, b)
        scores[i] = 0.0 if denom == 0 else (b - a) / denom
    return float(scores.mean())


def ksc_cluster(
    profiles: dict[str, np.ndarray],
    k: int,
    max_shift: int = 0,
    seed: int = 0,
    max_iters: int = 100,
) -> ClusterResult:
    """Shape-based k-means with a scale-invariant (optionally cyclic-shift-
    invariant) distance; centroids solve a minimum-eigenvector problem.

    All-zero profiles are excluded with a warning. Initialization is seeded
    farthest-point sampling, so results are deterministic given the seed.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    shifts = _shift_set(max_shift)
    ids = sorted(profiles)
    mat = np.asarray([profiles[u] for u in ids], dtype=float)
    nonzero = np.linalg.norm(mat, axis=1) > 0
    if not nonzero.all():
        warnings.warn(f"excluding {int((~nonzero).sum())} all-zero profiles")
        ids = [u for u, keep in zip(ids, nonzero) if keep]
        mat = mat[nonzero]
    if k > len(ids):
        raise ValueError(f"k={k} exceeds {len(ids)} nonzero profiles")

    rng = np.random.default_rng(seed)
    centroid_idx = [int(rng.integers(len(ids)))]
    while len(centroid_idx) < k:
        min_d = np.full(len(ids), np.inf)
        for ci in centroid_idx:
            d, _ = _shape_distances(mat, mat[ci], shifts)
            np.minimum(min_d, d, out=min_d)
        centroid_idx.append(int(np.argmax(min_d)))
    centroids = mat[centroid_idx] / np.linalg.norm(mat[centroid_idx], axis=1, keepdims=True)

    labels = np.full(len(ids), -1)
    history: list[float] = []
    for _ in range(max_iters):
        dists = np.empty((len(ids), k))
        qs = np.empty((len(ids), k), dtype=int)
        for j in range(k):
            dists[:, j], qs[:, j] = _shape_distances(mat, centroids[j], shifts)
        new_labels = dists.argmin(axis=1)
        # keep clusters nonempty: move the farthest point into an empty
        # cluster, taking only from clusters that can spare a member
        for j in range(k):
            if not (new_labels == j).any():
                counts = np.bincount(new_labels, minlength=k)
                cand = np.flatnonzero(counts[new_labels] > 1)
                far = int(cand[np.argmax(dists[cand, new_labels[cand]])])
                new_labels[far] = j
        history.append(float((dists[np.arange(len(ids)), new_labels] ** 2).sum()))
        if (new_labels == labels).all():
            break
        labels = new_labels
        for j in range(k):
            members = mat[labels == j]
            q = qs[labels == j, j]
            aligned = np.stack([np.roll(row, -qi) for row, qi in zip(members, q)])
            centroids[j] = _update_centroid(aligned)

    asc: Optional[float] = None
    if k >= 2:
        asc = _silhouette(_pairwise_shape_distance(mat, shifts), labels, k)
    proportions = np.bincount(labels, minlength=k) / len(ids)
    return ClusterResult(
        k=k,
        centroids=centroids,
        assignment=dict(zip(ids, (int(l) for l in labels))),
        proportions=proportions,
        asc=asc,
        objective=history[-1],
        objective_history=history,
    )


def select_k(
    profiles: dict[str, np.ndarray],
    k_range: Sequence[int],
    seed: int = 0,
    max_shift: int = 0,
    max_iters: int = 100,
) -> tuple[int, dict[int, float]]:
    """Pick the cluster count maximizing the average silhouette coefficient."""
    ks = sorted(set(k_range))
    if not ks or ks[0] < 2 or ks[-1] > 10:
        raise ValueError("k_range must lie within [2, 10]")
    asc_per_k: dict[int, float] = {}
    for k in ks:
        result = ksc_cluster(profiles, k, max_shift=max_shift, seed=seed,
                             max_iters=max_iters)
        asc_per_k[k] = result.asc if result.asc is not None else float("-inf")
    best_k = max(ks, key=lambda k: (asc_per_k[k], -k))
    return best_k, asc_per_k


def response_metrics(dataset: Dataset) -> tuple[list[ResponseMetric], int]:
    """Delay and trace for every resolvable response, plus the excluded count.

    Delay is the response-minus-original time gap. Trace counts the tweets the
    responder received (posted by any of their friends) strictly between the
    original and the response.
    """
    timelines: dict[str, list[int]] = {
        uid: [tw.timestamp for tw in tws]
        for uid, tws in dataset.tweets_by_author.items()
    }
    metrics: list[ResponseMetric] = []
    excluded = 0
    for tw in dataset.tweets:
        if not tw.is_response:
            continue
        orig = (
            dataset.tweets_by_id.get(tw.responds_to_tweet)
            if tw.responds_to_tweet
            else None
        )
        if orig is None or orig.timestamp > tw.timestamp:
            excluded += 1
            continue
        t_i, t_j = orig.timestamp, tw.timestamp
        trace = 0
        for friend in dataset.graph.friends(tw.author):
            ts = timelines[friend]
            trace += bisect.bisect_left(ts, t_j) - bisect.bisect_right(ts, t_i)
        metrics.append(
            ResponseMetric(tw.tweet_id, tw.kind, delay=t_j - t_i, trace=trace)
        )
    return metrics, excluded


def cdf_table(values: Sequence[float]) -> list[tuple[float, float]]:
    """(value, cumulative fraction) pairs over the distinct sorted values."""
    if not values:
        return []
    arr = np.sort(np.asarray(values, dtype=float))
    n = len(arr)
    out = []
    uniq, idx = np.unique(arr, return_index=True)
    counts = np.diff(np.append(idx, n))
    cum = np.cumsum(counts) / n
    for v, c in zip(uniq, cum):
        out.append((float(v), float(c)))
    return out
