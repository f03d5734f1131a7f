"""Acquisition functions: each one maps (features, classifier, pool, budget)
to exactly min(B, |unlabeled|) distinct unlabeled indices.

All strategies are pure functions of their arguments plus a seed; repeated
invocation is bit-identical. Ties always break toward the smaller dataset
index. Probability work happens in float64.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .classifier import LinearClassifier, mc_dropout_proba, predict_proba
from .geometry import (
    _kmeanspp_from_dist,
    greedy_k_center,
    kmeans,
    knn,
    nearest_to_centroids,
    pairwise_sq_dist,
)
from .rng import derive_rng, derive_seed

STRATEGY_KINDS = (
    "random",
    "uncertainty",
    "entropy",
    "margins",
    "bald",
    "powerbald",
    "coreset",
    "badge",
    "alfamix",
    "typiclust",
    "probcover",
    "dropquery",
)

SCORE_KINDS = ("uncertainty", "entropy", "margins", "bald")


class StrategyUnavailable(RuntimeError):
    """The strategy cannot run in the current pool state (e.g. no anchors yet)."""


@dataclass
class QuerySpec:
    """Strategy identifier plus its hyperparameters (defaults = benchmark protocol)."""

    kind: str
    diversify: bool = False
    diversify_k: int = 50
    inference_dropout: bool = False
    mc_samples: int = 20
    dq_m: int = 3
    dq_rho: float = 0.75
    dq_literal: bool = False
    power_beta: float = 1.0
    alfamix_eps_scale: float = 0.2
    typiclust_max_clusters: int = 500
    typiclust_knn: int = 20
    probcover_purity: float = 0.95

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise ValueError(f"unknown strategy kind {self.kind!r}")

    def strategy_id(self) -> str:
        """Record identifier; diversification variants get their own id."""
        sid = self.kind
        if self.diversify and self.kind in SCORE_KINDS:
            sid += "_divdrop" if self.inference_dropout else "_div"
        if self.kind == "dropquery" and self.dq_literal:
            sid += "_literal"
        return sid


@dataclass
class QueryResult:
    """Selected unlabeled indices, plus the candidate-set fraction for dropquery."""

    selected: np.ndarray
    candidate_fraction: Optional[float] = None

    def __post_init__(self):
        self.selected = np.asarray(self.selected, dtype=np.int64)


# ---------------------------------------------------------------------------
# scoring


def score_uncertainty(probs: np.ndarray) -> np.ndarray:
    """1 - max class probability (higher = less confident)."""
    return 1.0 - np.asarray(probs, dtype=np.float64).max(axis=1)


def score_entropy(probs: np.ndarray) -> np.ndarray:
    """Predictive entropy in nats, with 0*log(0) = 0."""
    p = np.asarray(probs, dtype=np.float64)
    terms = np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0)
    return -terms.sum(axis=1)


def score_margin(probs: np.ndarray) -> np.ndarray:
    """Negated top-two probability margin, so higher = more uncertain."""
    p = np.sort(np.asarray(probs, dtype=np.float64), axis=1)
    return -(p[:, -1] - p[:, -2])


def score_bald(mc_probs: np.ndarray) -> np.ndarray:
    """Mutual information: entropy of the mean minus mean entropy, clamped >= 0."""
    mc = np.asarray(mc_probs, dtype=np.float64)
    mean_entropy = np.stack([score_entropy(mc[s]) for s in range(mc.shape[0])]).mean(axis=0)
    entropy_mean = score_entropy(mc.mean(axis=0))
    return np.maximum(entropy_mean - mean_entropy, 0.0)


def select_topb(scores: np.ndarray, unlabeled: np.ndarray, b: int) -> np.ndarray:
    """The b highest-scoring unlabeled indices; ties to the smaller index."""
    unlabeled = np.asarray(unlabeled, dtype=np.int64)
    order = np.lexsort((unlabeled, -np.asarray(scores, dtype=np.float64)))
    return unlabeled[order[: min(b, len(unlabeled))]]


def _score_order(scores: np.ndarray, indices: np.ndarray) -> np.ndarray:
    """Indices sorted by descending score, ascending index on ties."""
    indices = np.asarray(indices, dtype=np.int64)
    return indices[np.lexsort((indices, -np.asarray(scores, dtype=np.float64)))]


# ---------------------------------------------------------------------------
# diversified top-K*B selection


def diversify(
    scores: np.ndarray,
    features: np.ndarray,
    unlabeled: np.ndarray,
    b: int,
    k_multiplier: int = 50,
    seed: int = 0,
) -> np.ndarray:
    """Cluster the top-(K*B) scored points into B clusters, take cluster medoid-like picks.

    The kmeans call uses ``seed`` directly, so the selection can be replayed
    through the public geometry API. Shortfalls are padded from the shortlist
    in score order.
    """
    unlabeled = np.asarray(unlabeled, dtype=np.int64)
    b_eff = min(b, len(unlabeled))
    if b_eff == 0:
        return np.empty(0, dtype=np.int64)
    ranked = _score_order(scores, unlabeled)
    shortlist = ranked[: min(k_multiplier * b_eff, len(ranked))]
    cl = kmeans(features[shortlist], min(b_eff, len(shortlist)), seed)
    picked = shortlist[nearest_to_centroids(features[shortlist], cl)]
    if len(picked) < b_eff:
        chosen = set(picked.tolist())
        pad = [i for i in shortlist.tolist() if i not in chosen][: b_eff - len(picked)]
        picked = np.concatenate([picked, np.asarray(pad, dtype=np.int64)])
    return picked


# ---------------------------------------------------------------------------
# individual strategies


def query_random(unlabeled: np.ndarray, b: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    unlabeled = np.asarray(unlabeled, dtype=np.int64)
    b_eff = min(b, len(unlabeled))
    return rng.choice(unlabeled, size=b_eff, replace=False)


def query_powerbald(
    bald_scores: np.ndarray,
    unlabeled: np.ndarray,
    b: int,
    beta: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Sample B indices without replacement with probability ~ (score + 1e-12)^beta."""
    unlabeled = np.asarray(unlabeled, dtype=np.int64)
    weights = (np.maximum(np.asarray(bald_scores, dtype=np.float64), 0.0) + 1e-12) ** beta
    b_eff = min(b, len(unlabeled))
    picks = []
    alive = np.ones(len(unlabeled), dtype=bool)
    for _ in range(b_eff):
        w = np.where(alive, weights, 0.0)
        cum = np.cumsum(w)
        r = rng.random() * cum[-1]
        pos = min(int(np.searchsorted(cum, r, side="right")), len(w) - 1)
        if not alive[pos]:
            pos = int(np.flatnonzero(alive)[0])
        picks.append(unlabeled[pos])
        alive[pos] = False
    return np.asarray(picks, dtype=np.int64)


def query_coreset(features: np.ndarray, labeled, unlabeled, b: int) -> np.ndarray:
    """Greedy k-center over the train pool with labeled points as existing centers."""
    labeled = np.asarray(labeled, dtype=np.int64)
    unlabeled = np.asarray(unlabeled, dtype=np.int64)
    pool = np.sort(np.concatenate([labeled, unlabeled]))
    existing = np.searchsorted(pool, np.sort(labeled))
    b_eff = min(b, len(unlabeled))
    picks = greedy_k_center(features[pool], existing, b_eff)
    return pool[picks]


def badge_sq_dist(z_i, p_i, z_j, p_j) -> float:
    """Squared Frobenius distance between rank-one gradient embeddings z p^T.

    Evaluated through inner products of the factor vectors only, so no
    (C x d)-sized embedding is ever materialized.
    """
    z_i = np.asarray(z_i, dtype=np.float64)
    p_i = np.asarray(p_i, dtype=np.float64)
    z_j = np.asarray(z_j, dtype=np.float64)
    p_j = np.asarray(p_j, dtype=np.float64)
    val = (
        (z_i @ z_i) * (p_i @ p_i)
        + (z_j @ z_j) * (p_j @ p_j)
        - 2.0 * (z_i @ z_j) * (p_i @ p_j)
    )
    return max(float(val), 0.0)


def query_badge(
    features: np.ndarray,
    clf: LinearClassifier,
    unlabeled,
    b: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """k-means++ seeding in gradient-embedding space via the factorized distance.

    The rng consumption matches kmeanspp_seed exactly, so the trace equals a
    k-means++ run on explicitly materialized embeddings sharing the rng.
    """
    unlabeled = np.asarray(unlabeled, dtype=np.int64)
    b_eff = min(b, len(unlabeled))
    Z = np.asarray(features, dtype=np.float64)[unlabeled]
    probs = predict_proba(clf, Z)
    P = probs.copy()
    P[np.arange(len(unlabeled)), np.argmax(probs, axis=1)] -= 1.0
    z2 = np.einsum("ij,ij->i", Z, Z)
    p2 = np.einsum("ij,ij->i", P, P)
    g2 = z2 * p2  # ||z p^T||_F^2 per point

    def dist_to(j):
        return np.maximum(g2 + g2[j] - 2.0 * (Z @ Z[j]) * (P @ P[j]), 0.0)

    picks = _kmeanspp_from_dist(len(unlabeled), b_eff, rng, dist_to)
    return unlabeled[picks]


def query_alfamix(
    features: np.ndarray,
    clf: LinearClassifier,
    labeled,
    labeled_labels,
    unlabeled,
    b: int,
    eps_scale: float,
    seed: int,
) -> np.ndarray:
    """Interpolation-consistency query against per-class anchor means.

    For each unlabeled point and anchor, mixes by the d-dimensional first-order
    rule: alpha = eps * h / ||h|| with h = grad * (anchor - z) and
    eps = eps_scale / sqrt(d), then flags points whose predicted label flips.
    The rule approximates the original closed form; candidates are diversified
    by k-means (seeded with ``seed``).
    """
    labeled = np.asarray(labeled, dtype=np.int64)
    unlabeled = np.asarray(unlabeled, dtype=np.int64)
    if labeled.size == 0:
        raise StrategyUnavailable(
            "alfamix needs labeled anchors; select an initial pool first "
            "(use random or centroid init)"
        )
    b_eff = min(b, len(unlabeled))
    X = np.asarray(features, dtype=np.float64)
    d = X.shape[1]
    eps = eps_scale / np.sqrt(d)
    y_lab = np.asarray(labeled_labels, dtype=np.int64)
    anchors = np.stack([X[labeled[y_lab == c]].mean(axis=0) for c in np.unique(y_lab)])

    U = X[unlabeled]
    probs = predict_proba(clf, U)
    base = np.argmax(probs, axis=1)
    delta = probs.copy()
    delta[np.arange(len(unlabeled)), base] -= 1.0
    grads = delta @ clf.weights  # d-loss/d-z at each unlabeled point

    flips = np.zeros(len(unlabeled), dtype=np.int64)
    for anchor in anchors:
        direction = anchor[None, :] - U
        h = grads * direction
        norms = np.sqrt(np.einsum("ij,ij->i", h, h))
        alpha = np.where(norms[:, None] > 0, eps * h / np.maximum(norms, 1e-300)[:, None], 0.0)
        mixed = U + alpha * direction
        flips += np.argmax(predict_proba(clf, mixed), axis=1) != base

    entropy = score_entropy(probs)
    cand_mask = flips > 0
    cands = unlabeled[cand_mask]
    if cands.size:
        cl = kmeans(X[cands], min(b_eff, len(cands)), seed)
        picked = cands[nearest_to_centroids(X[cands], cl)]
    else:
        picked = np.empty(0, dtype=np.int64)

    if len(picked) < b_eff:
        chosen = set(picked.tolist())
        cand_order = cands[
            np.lexsort((cands, -entropy[cand_mask], -flips[cand_mask].astype(np.float64)))
        ]
        rest_mask = ~cand_mask
        rest_order = _score_order(entropy[rest_mask], unlabeled[rest_mask])
        pad = [i for i in np.concatenate([cand_order, rest_order]).tolist() if i not in chosen]
        picked = np.concatenate(
            [picked, np.asarray(pad[: b_eff - len(picked)], dtype=np.int64)]
        )
    return picked


def typicality(features: np.ndarray, idx: int, k: int = 20) -> float:
    """Inverse mean distance to the k nearest neighbors (clamped near zero).

    A point with no neighbors to average over (k < 1) has typicality 0.
    """
    if k < 1:
        return 0.0
    X = np.asarray(features, dtype=np.float64)
    d2 = pairwise_sq_dist(X[idx : idx + 1], X)[0]
    d2[idx] = np.inf
    nearest = np.sort(np.sqrt(d2), kind="stable")[:k]
    return float(1.0 / (nearest.mean() + 1e-12))


def _typicality_all(features: np.ndarray, k: int) -> np.ndarray:
    if features.shape[0] <= 1 or k < 1:
        return np.zeros(features.shape[0])
    _, dist = knn(features, min(k, features.shape[0] - 1))
    return 1.0 / (dist.mean(axis=1) + 1e-12)


def query_typiclust(
    features: np.ndarray,
    labeled,
    unlabeled,
    b: int,
    max_clusters: int,
    knn_k: int,
    seed: int,
) -> np.ndarray:
    """Cluster the train pool, then take the densest unlabeled member of
    the least-labeled clusters (ranked by labeled count asc, size desc, id asc)."""
    labeled = np.asarray(labeled, dtype=np.int64)
    unlabeled = np.asarray(unlabeled, dtype=np.int64)
    b_eff = min(b, len(unlabeled))
    if b_eff == 0:
        return np.empty(0, dtype=np.int64)
    pool = np.sort(np.concatenate([labeled, unlabeled]))
    is_labeled = np.isin(pool, labeled)
    X = np.asarray(features, dtype=np.float64)[pool]
    k = min(len(labeled) + b_eff, max_clusters, len(pool))
    cl = kmeans(X, k, seed)

    sizes = np.bincount(cl.assignments, minlength=k)
    lab_counts = np.bincount(cl.assignments[is_labeled], minlength=k)
    rank = np.lexsort((np.arange(k), -sizes, lab_counts))

    # per-cluster queues of unlabeled members, densest first
    queues = []
    for cid in rank:
        members = np.flatnonzero(cl.assignments == cid)
        cand = members[~is_labeled[members]]
        if cand.size == 0:
            continue
        typ = _typicality_all(X[members], min(knn_k, len(members) - 1))
        cand_typ = typ[np.searchsorted(members, cand)]
        queues.append(list(pool[cand[np.lexsort((cand, -cand_typ))]]))

    picks = []
    while len(picks) < b_eff and queues:
        exhausted = []
        for qi, q in enumerate(queues):
            if len(picks) == b_eff:
                break
            picks.append(q.pop(0))
            if not q:
                exhausted.append(qi)
        queues = [q for qi, q in enumerate(queues) if qi not in exhausted]
    return np.asarray(picks, dtype=np.int64)


def estimate_delta(
    features: np.ndarray,
    num_classes: int,
    purity_threshold: float = 0.95,
    seed: int = 0,
) -> float:
    """Largest ball radius on a log grid whose pseudo-label purity clears the threshold.

    Pseudo-labels come from kmeans(features, num_classes, seed); the grid is 64
    log-spaced radii between the 1st and 99th percentile of 2000 sampled
    pairwise distances (pairs from default_rng(seed)).
    """
    X = np.asarray(features, dtype=np.float64)
    n = X.shape[0]
    pseudo = kmeans(X, min(num_classes, n), seed).assignments

    rng = np.random.default_rng(seed)
    left = rng.integers(0, n, 2000)
    right = rng.integers(0, n - 1, 2000)
    right = np.where(right >= left, right + 1, right)  # pair without i == j
    sample = np.sqrt(np.einsum("ij,ij->i", X[left] - X[right], X[left] - X[right]))
    lo = max(float(np.percentile(sample, 1)), 1e-12)
    hi = max(float(np.percentile(sample, 99)), lo * (1 + 1e-9))
    grid = np.geomspace(lo, hi, 64)

    # a point stays pure at radius delta iff no differently-labeled point
    # sits within delta, so one pass over nearest cross-label distances
    # answers every grid value
    dist = np.sqrt(pairwise_sq_dist(X, X))
    label_differs = pseudo[:, None] != pseudo[None, :]
    cross = np.where(label_differs, dist, np.inf)
    nearest_cross = cross.min(axis=1)
    best = grid[0]
    for delta in grid:
        purity = float((nearest_cross > delta).mean())
        if purity >= purity_threshold:
            best = delta
    return float(best)


def query_probcover(features: np.ndarray, labeled, unlabeled, b: int, delta: float) -> np.ndarray:
    """Greedy max-coverage over the delta-ball graph, seeded by labeled coverage."""
    labeled = np.asarray(labeled, dtype=np.int64)
    unlabeled = np.asarray(unlabeled, dtype=np.int64)
    b_eff = min(b, len(unlabeled))
    pool = np.sort(np.concatenate([labeled, unlabeled]))
    X = np.asarray(features, dtype=np.float64)[pool]
    adj = pairwise_sq_dist(X, X) <= delta * delta

    covered = np.zeros(len(pool), dtype=bool)
    lab_pos = np.searchsorted(pool, np.sort(labeled))
    if lab_pos.size:
        covered = adj[lab_pos].any(axis=0)

    cand = np.isin(pool, unlabeled)
    picks = []
    for _ in range(b_eff):
        counts = np.where(cand, adj[:, ~covered].sum(axis=1), -1)
        pick = int(np.argmax(counts))
        picks.append(int(pool[pick]))
        covered |= adj[pick]
        cand[pick] = False
    return np.asarray(picks, dtype=np.int64)


def dropquery(
    features: np.ndarray,
    clf: LinearClassifier,
    unlabeled,
    b: int,
    m: int = 3,
    rho: float = 0.75,
    seed: int = 0,
    literal: bool = False,
) -> QueryResult:
    """Consistency-under-dropout query.

    The base prediction uses no dropout; ``m`` feature-dropout passes (masks
    seeded with ``seed`` through mc_dropout_proba) vote against it. A point
    joins the candidate set when more than half of the passes disagree with
    the base prediction. ``literal=True`` flips the predicate to keep the
    mostly-consistent points instead (the alternate reading, kept for audits).

    Candidates are clustered into B groups (kmeans seeded with ``seed``) and
    the member nearest each centroid is selected. An empty candidate set falls
    back to margin-scored diversified selection; a partial one is topped up
    with the highest-margin-uncertainty leftovers.
    """
    unlabeled = np.asarray(unlabeled, dtype=np.int64)
    b_eff = min(b, len(unlabeled))
    if b_eff == 0:
        return QueryResult(np.empty(0, dtype=np.int64), candidate_fraction=0.0)
    X = np.asarray(features, dtype=np.float64)
    U = X[unlabeled]
    base_probs = predict_proba(clf, U)
    base = np.argmax(base_probs, axis=1)
    mc = mc_dropout_proba(clf, U, m, rho, seed)
    agree = (np.argmax(mc, axis=2) == base[None, :]).sum(axis=0)
    if literal:
        cand_mask = agree > 0.5 * m
    else:
        cand_mask = (m - agree) > 0.5 * m
    cands = unlabeled[cand_mask]
    fraction = float(len(cands) / len(unlabeled))

    margins = score_margin(base_probs)
    if cands.size == 0:
        selected = diversify(margins, X, unlabeled, b_eff, k_multiplier=50, seed=seed)
        return QueryResult(selected, candidate_fraction=fraction)

    cl = kmeans(X[cands], min(b_eff, len(cands)), seed)
    selected = cands[nearest_to_centroids(X[cands], cl)]
    if len(selected) < b_eff:
        chosen = set(selected.tolist())
        pad = [i for i in _score_order(margins, unlabeled).tolist() if i not in chosen]
        selected = np.concatenate(
            [selected, np.asarray(pad[: b_eff - len(selected)], dtype=np.int64)]
        )
    return QueryResult(selected, candidate_fraction=fraction)


# ---------------------------------------------------------------------------
# dispatcher


def _probs_for_scoring(spec: QuerySpec, clf: LinearClassifier, U: np.ndarray, seed: int) -> np.ndarray:
    if spec.diversify and spec.inference_dropout:
        rho = clf.train_config.dropout_rho
        return mc_dropout_proba(clf, U, 1, rho, derive_seed(seed, "inference-dropout"))[0]
    return predict_proba(clf, U)


def query(
    spec: QuerySpec,
    features: np.ndarray,
    clf: LinearClassifier,
    labeled,
    labeled_labels,
    unlabeled,
    b: int,
    seed: int,
    delta: Optional[float] = None,
    num_classes: Optional[int] = None,
) -> QueryResult:
    """Run one acquisition round for the given spec. Returns min(B, |unlabeled|) indices."""
    unlabeled = np.asarray(unlabeled, dtype=np.int64)
    b_eff = min(b, len(unlabeled))
    if b_eff == 0:
        return QueryResult(np.empty(0, dtype=np.int64))
    X = np.asarray(features, dtype=np.float64)

    if spec.kind == "random":
        return QueryResult(query_random(unlabeled, b_eff, seed))

    if spec.kind in ("uncertainty", "entropy", "margins"):
        probs = _probs_for_scoring(spec, clf, X[unlabeled], seed)
        scorer = {
            "uncertainty": score_uncertainty,
            "entropy": score_entropy,
            "margins": score_margin,
        }[spec.kind]
        scores = scorer(probs)
        if spec.diversify:
            return QueryResult(
                diversify(scores, X, unlabeled, b_eff, spec.diversify_k, derive_seed(seed, "diversify"))
            )
        return QueryResult(select_topb(scores, unlabeled, b_eff))

    if spec.kind in ("bald", "powerbald"):
        rho = clf.train_config.dropout_rho
        mc = mc_dropout_proba(clf, X[unlabeled], spec.mc_samples, rho, derive_seed(seed, "mc"))
        scores = score_bald(mc)
        if spec.kind == "powerbald":
            return QueryResult(
                query_powerbald(scores, unlabeled, b_eff, spec.power_beta, derive_rng(seed, "power"))
            )
        if spec.diversify:
            return QueryResult(
                diversify(scores, X, unlabeled, b_eff, spec.diversify_k, derive_seed(seed, "diversify"))
            )
        return QueryResult(select_topb(scores, unlabeled, b_eff))

    if spec.kind == "coreset":
        return QueryResult(query_coreset(X, labeled, unlabeled, b_eff))

    if spec.kind == "badge":
        return QueryResult(query_badge(X, clf, unlabeled, b_eff, derive_rng(seed, "badge")))

    if spec.kind == "alfamix":
        return QueryResult(
            query_alfamix(
                X, clf, labeled, labeled_labels, unlabeled, b_eff, spec.alfamix_eps_scale, seed
            )
        )

    if spec.kind == "typiclust":
        return QueryResult(
            query_typiclust(
                X, labeled, unlabeled, b_eff, spec.typiclust_max_clusters, spec.typiclust_knn, seed
            )
        )

    if spec.kind == "probcover":
        if delta is None:
            if num_classes is None:
                raise ValueError("probcover needs either a precomputed delta or num_classes")
            delta = estimate_delta(X, num_classes, spec.probcover_purity, derive_seed(seed, "delta"))
        return QueryResult(query_probcover(X, labeled, unlabeled, b_eff, delta))

    if spec.kind == "dropquery":
        return dropquery(X, clf, unlabeled, b_eff, spec.dq_m, spec.dq_rho, seed, spec.dq_literal)

    raise ValueError(f"unknown strategy kind {spec.kind!r}")
