import numpy as np
import pytest

from clfm.imgcore import ColorSpace, ImageBuffer, write_png


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_image(rng, h=16, w=16, space=ColorSpace.SRGB):
    return ImageBuffer(rng.uniform(0.0, 1.0, (h, w, 3)).astype(np.float32), space)


def gray_image(value, h=16, w=16, space=ColorSpace.SRGB):
    return ImageBuffer(np.full((h, w, 3), value, dtype=np.float32), space)


def write_pair_fixture(directory, n_pairs=3, size=64, seed=101):
    """Source directory of aligned synthetic <id>_low/_normal PNG pairs."""
    from clfm.synthetic import make_pair

    rng = np.random.default_rng(seed)
    directory.mkdir(parents=True, exist_ok=True)
    for i in range(n_pairs):
        low, normal = make_pair(rng, size)
        write_png(low, directory / f"pair{i}_low.png")
        write_png(normal, directory / f"pair{i}_normal.png")
    return directory


@pytest.fixture(scope="session")
def fixture_dataset(tmp_path_factory):
    """A built 3-pair dataset shared by pipeline/service tests."""
    from clfm.pipeline import build_dataset, ingest
    from clfm.retinex import InterpolationMethod

    root = tmp_path_factory.mktemp("dataset_fixture")
    pairs_dir = write_pair_fixture(root / "pairs")
    out_dir = root / "built"
    records = ingest(pairs_dir)
    manifest = build_dataset(
        records, (0.2, 0.4, 0.6, 0.8), InterpolationMethod.RETINEX, out_dir
    )
    return {"pairs_dir": pairs_dir, "dataset_dir": out_dir, "manifest": manifest}
