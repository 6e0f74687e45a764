import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from leafgen import write_dataset  # noqa: E402


@pytest.fixture(scope="session")
def leaf_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("plantvillage")
    write_dataset(root, "Potato", per_class=12, seed=0)
    (root / "README_not_a_class").mkdir()
    return root


@pytest.fixture(scope="session")
def leaf_cache(leaf_root, tmp_path_factory):
    from plantdx.dataset import scan_dataset, write_feature_cache
    from plantdx.pipeline import extract_dataset

    cache = extract_dataset(scan_dataset(leaf_root))
    path = tmp_path_factory.mktemp("cache") / "features.csv"
    write_feature_cache(cache, path)
    return path
