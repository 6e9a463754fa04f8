"""The bridging descriptor: a three-level facial-shape hierarchy with
mean-HOG templates, and the distance vector it induces for any face.

Level one clusters whole-face landmark layouts; within each of those nodes,
level two clusters the upper-face and lower-face landmark sub-vectors
separately.  Every node keeps the mean HOG vector of its member faces as a
template.  A face's descriptor ``h`` lists its L2 distance to every template
in fixed order: the top nodes, then all upper children, then all lower
children.  Slots for children that were pruned at build time (a top node with
too few members) carry a sentinel distance, the largest distance observed on
the build corpus.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hog import HogConfig, compute_hog
from .kmeans import kmeans
from .serialize import load_container, save_container


@dataclass(frozen=True)
class LandmarkSchema:
    """Fixed landmark layout with an upper/lower face split."""

    point_names: tuple[str, ...]
    upper: tuple[int, ...]
    lower: tuple[int, ...]

    def __post_init__(self):
        n = len(self.point_names)
        if sorted(self.upper + self.lower) != list(range(n)):
            raise ValueError("upper and lower regions must partition the landmark points")

    @property
    def n_points(self) -> int:
        return len(self.point_names)

    def to_dict(self) -> dict:
        return {
            "point_names": list(self.point_names),
            "upper": list(self.upper),
            "lower": list(self.lower),
        }

    @staticmethod
    def from_dict(d: dict) -> "LandmarkSchema":
        return LandmarkSchema(
            tuple(d["point_names"]), tuple(d["upper"]), tuple(d["lower"])
        )


#: Ten points, box-normalized: brows, eyes and nose bridge above; nose tip,
#: mouth corners, lower lip and chin below.
DEFAULT_SCHEMA = LandmarkSchema(
    point_names=(
        "left_brow", "right_brow", "left_eye", "right_eye", "nose_bridge",
        "nose_tip", "mouth_left", "mouth_right", "lower_lip", "chin",
    ),
    upper=(0, 1, 2, 3, 4),
    lower=(5, 6, 7, 8, 9),
)


def check_landmarks(points: np.ndarray, schema: LandmarkSchema) -> np.ndarray:
    points = np.asarray(points, dtype=np.float64)
    if points.shape != (schema.n_points, 2):
        raise ValueError(
            f"landmarks must have shape ({schema.n_points}, 2), got {points.shape}"
        )
    if np.any(points < 0.0) or np.any(points > 1.0):
        raise ValueError("landmark coordinates must be box-normalized to [0, 1]")
    return points


@dataclass
class ChildGroup:
    """Second-level clusters of one top node, for one face region."""

    centroids: np.ndarray   # (m, 2 * region size)
    templates: np.ndarray   # (m, hog dim)

    @property
    def count(self) -> int:
        return self.centroids.shape[0]


@dataclass
class ClusterTree:
    t_top: int
    u_max: int
    l_max: int
    hog_cfg: HogConfig
    schema: LandmarkSchema
    top_centroids: np.ndarray      # (T, 2 * n_points)
    top_templates: np.ndarray      # (T, hog dim)
    upper: list[ChildGroup]        # one per top node
    lower: list[ChildGroup]
    sentinel: float                # fills slots of pruned children
    h_mean: np.ndarray             # standardization stats over the build corpus
    h_std: np.ndarray

    @property
    def descriptor_length(self) -> int:
        return self.t_top + self.t_top * self.u_max + self.t_top * self.l_max

    @property
    def hog_dim(self) -> int:
        return self.top_templates.shape[1]

    def pruned_nodes(self) -> list[tuple[int, str, int]]:
        """(top index, region, kept children) for every reduced node."""
        out = []
        for t in range(self.t_top):
            if self.upper[t].count < self.u_max:
                out.append((t, "upper", self.upper[t].count))
            if self.lower[t].count < self.l_max:
                out.append((t, "lower", self.lower[t].count))
        return out


def _flat(points: np.ndarray) -> np.ndarray:
    return points.reshape(points.shape[0], -1)


def build_cluster_tree(
    corpus,
    t_top: int = 10,
    u_children: int = 10,
    l_children: int = 10,
    seed: int = 0,
    hog_cfg: HogConfig | None = None,
    schema: LandmarkSchema | None = None,
) -> ClusterTree:
    """Build the hierarchy from ``corpus``: a sequence of (landmarks, image).

    Top-level K-means runs on the full box-normalized landmark vectors; each
    top node is then split on the upper-region and lower-region sub-vectors
    separately.  A top node with fewer members than the requested child count
    keeps one child per member instead.
    """
    hog_cfg = hog_cfg or HogConfig()
    schema = schema or DEFAULT_SCHEMA
    if t_top < 1 or u_children < 1 or l_children < 1:
        raise ValueError("cluster counts must all be >= 1")
    n = len(corpus)
    if n < t_top * max(u_children, l_children):
        raise ValueError(
            f"corpus of {n} faces is too small for T={t_top}, "
            f"U={u_children}, L={l_children}"
        )

    landmarks = np.stack([check_landmarks(lm, schema) for lm, _ in corpus])
    hogs = np.stack([compute_hog(img, hog_cfg) for _, img in corpus])

    top = kmeans(_flat(landmarks), t_top, seed)
    top_templates = np.stack(
        [hogs[top.assignments == t].mean(axis=0) for t in range(t_top)]
    )

    upper_groups: list[ChildGroup] = []
    lower_groups: list[ChildGroup] = []
    for t in range(t_top):
        members = np.where(top.assignments == t)[0]
        for region, want, groups, axis in (
            ("upper", u_children, upper_groups, 0),
            ("lower", l_children, lower_groups, 1),
        ):
            idx = schema.upper if region == "upper" else schema.lower
            pts = _flat(landmarks[members][:, list(idx), :])
            k = min(want, len(members))
            sub = kmeans(pts, k, seed=[seed, t, axis])
            templates = np.stack(
                [hogs[members[sub.assignments == c]].mean(axis=0) for c in range(k)]
            )
            groups.append(ChildGroup(sub.centroids, templates))

    all_templates = np.concatenate(
        [top_templates]
        + [g.templates for g in upper_groups]
        + [g.templates for g in lower_groups]
    )
    dists = np.sqrt(
        np.maximum(
            np.sum(hogs**2, axis=1)[:, None]
            - 2.0 * hogs @ all_templates.T
            + np.sum(all_templates**2, axis=1)[None, :],
            0.0,
        )
    )
    sentinel = float(dists.max())

    tree = ClusterTree(
        t_top=t_top,
        u_max=u_children,
        l_max=l_children,
        hog_cfg=hog_cfg,
        schema=schema,
        top_centroids=top.centroids,
        top_templates=top_templates,
        upper=upper_groups,
        lower=lower_groups,
        sentinel=sentinel,
        h_mean=np.zeros(1),  # placeholder until descriptors exist
        h_std=np.ones(1),
    )
    corpus_h = np.stack([extract_descriptor(img, tree) for _, img in corpus])
    tree.h_mean = corpus_h.mean(axis=0)
    tree.h_std = corpus_h.std(axis=0)
    return tree


def extract_descriptor(image: np.ndarray, tree: ClusterTree) -> np.ndarray:
    """Raw distance vector ``h`` for one face image, fixed node order."""
    hog = compute_hog(image, tree.hog_cfg)
    if hog.shape[0] != tree.hog_dim:
        raise ValueError(
            f"HOG dimensionality {hog.shape[0]} does not match the bank's "
            f"templates ({tree.hog_dim}); check image geometry and HOG config"
        )
    h = np.full(tree.descriptor_length, tree.sentinel)
    h[: tree.t_top] = np.linalg.norm(tree.top_templates - hog, axis=1)
    off = tree.t_top
    for t in range(tree.t_top):
        g = tree.upper[t]
        h[off + t * tree.u_max : off + t * tree.u_max + g.count] = np.linalg.norm(
            g.templates - hog, axis=1
        )
    off = tree.t_top + tree.t_top * tree.u_max
    for t in range(tree.t_top):
        g = tree.lower[t]
        h[off + t * tree.l_max : off + t * tree.l_max + g.count] = np.linalg.norm(
            g.templates - hog, axis=1
        )
    return h


def standardize_descriptor(h: np.ndarray, tree: ClusterTree) -> np.ndarray:
    """Center and scale ``h`` by the build-corpus statistics.

    Entries that were constant over the corpus (for instance sentinel slots)
    standardize to zero.
    """
    h = np.asarray(h, dtype=np.float64)
    if h.shape[-1] != tree.descriptor_length:
        raise ValueError(
            f"descriptor length {h.shape[-1]} does not match bank length "
            f"{tree.descriptor_length}"
        )
    return (h - tree.h_mean) / np.maximum(tree.h_std, 1e-12)


def network_descriptor(image: np.ndarray, tree: ClusterTree) -> np.ndarray:
    """Standardized descriptor, ready to concatenate into the first FC layer."""
    return standardize_descriptor(extract_descriptor(image, tree), tree)


def save_bank(path, tree: ClusterTree) -> None:
    arrays = {
        "top_centroids": tree.top_centroids,
        "top_templates": tree.top_templates,
        "h_mean": tree.h_mean,
        "h_std": tree.h_std,
    }
    for t in range(tree.t_top):
        arrays[f"upper_{t}.centroids"] = tree.upper[t].centroids
        arrays[f"upper_{t}.templates"] = tree.upper[t].templates
        arrays[f"lower_{t}.centroids"] = tree.lower[t].centroids
        arrays[f"lower_{t}.templates"] = tree.lower[t].templates
    meta = {
        "t_top": tree.t_top,
        "u_max": tree.u_max,
        "l_max": tree.l_max,
        "hog": tree.hog_cfg.to_dict(),
        "schema": tree.schema.to_dict(),
        "sentinel": tree.sentinel,
    }
    save_container(path, "bridge-bank", meta, arrays)


def load_bank(path) -> ClusterTree:
    kind, meta, arrays = load_container(path)
    if kind != "bridge-bank":
        raise ValueError(f"{path}: container holds {kind!r}, not a bridge bank")
    t_top = int(meta["t_top"])
    upper = [
        ChildGroup(arrays[f"upper_{t}.centroids"], arrays[f"upper_{t}.templates"])
        for t in range(t_top)
    ]
    lower = [
        ChildGroup(arrays[f"lower_{t}.centroids"], arrays[f"lower_{t}.templates"])
        for t in range(t_top)
    ]
    return ClusterTree(
        t_top=t_top,
        u_max=int(meta["u_max"]),
        l_max=int(meta["l_max"]),
        hog_cfg=HogConfig.from_dict(meta["hog"]),
        schema=LandmarkSchema.from_dict(meta["schema"]),
        top_centroids=arrays["top_centroids"],
        top_templates=arrays["top_templates"],
        upper=upper,
        lower=lower,
        sentinel=float(meta["sentinel"]),
        h_mean=arrays["h_mean"],
        h_std=arrays["h_std"],
    )
