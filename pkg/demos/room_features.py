# Room layout features and PCA compression
#
# A layout map labels each grid cell free, wall, table, or furniture.  The
# feature extractor stacks per-class occupancy fractions at four pyramid
# levels (whole room, 2x3 blocks, 5x6 blocks, the full 10x12 grid).  A
# power-iteration PCA then squeezes a collection of such vectors down to a
# few directions that explain most of the variance.

import numpy as np

from ospace.room import (
    LayoutMap,
    OCCUPANCY_CLASSES,
    extract_layout_features,
    pca_fit,
    pca_project,
)

rng = np.random.default_rng(7)


def random_layout():
    # mostly free space with a few table blobs and sometimes a walled edge
    cells = [["free"] * 12 for _ in range(10)]
    for _ in range(int(rng.integers(2, 5))):
        r, c = int(rng.integers(0, 8)), int(rng.integers(0, 10))
        for dr in range(2):
            for dc in range(2):
                cells[r + dr][c + dc] = "table"
    if rng.random() < 0.5:
        for row in cells:
            row[0] = "wall"
    return LayoutMap(cells=tuple(tuple(row) for row in cells))


layout = random_layout()
feat = extract_layout_features(layout)
print(f"one layout -> feature vector of dim {feat.shape[0]}")
print(f"occupancy classes: {OCCUPANCY_CLASSES}")
print(f"whole-room fractions: {np.round(feat[:4], 3)} (sum {feat[:4].sum():.3f})")

# compress 40 random layouts to 6 principal directions
samples = np.array([extract_layout_features(random_layout())
                    for _ in range(40)])
model = pca_fit(samples, 6)
var = model.explained_variances
print(f"\nexplained variance shares: {np.round(var / var.sum(), 3)}")

z = pca_project(model, feat)
print(f"projection of the first layout: {np.round(z, 3)}")

# reconstruction error drops as components are added
centered = feat - model.mean
for k in (1, 3, 6):
    approx = model.components[:k].T @ (model.components[:k] @ centered)
    err = np.linalg.norm(centered - approx) / np.linalg.norm(centered)
    print(f"relative reconstruction error with {k} components: {err:.3f}")
