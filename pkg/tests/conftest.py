import pytest

from camtrap.manifest import load_manifest
from camtrap.synthetic import SceneConfig, gen_synthetic, save_synthetic

SMALL_SCENE = SceneConfig(width=64, height=64, cameras=3, frames_per_camera=30,
                          genus_names=("Striped", "Spotted"), blob_size=(14, 20),
                          p_animal=0.7)


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """One small synthetic scene on disk, shared by the pipeline tests."""
    root = tmp_path_factory.mktemp("scene")
    data = gen_synthetic(SMALL_SCENE, seed=11)
    manifest_path = save_synthetic(data, root)
    return load_manifest(manifest_path)
