import pytest


@pytest.fixture(scope="session")
def toy_dataset(tmp_path_factory):
    """5^3 labeled dataset on a cheap solver configuration, split 80/10/10.

    Built through the generator package; the trainer itself only reads the
    files this leaves behind.
    """
    from satkerr import (DatasetManifest, NoiseConfig, ParameterRanges,
                         PropagationConfig, TransverseGrid, generate, split)

    out = tmp_path_factory.mktemp("toy") / "ds"
    manifest = DatasetManifest(
        ranges=ParameterRanges(n2_count=5, isat_count=5, alpha_count=5),
        grid=TransverseGrid(224, 224, 12 * 1.7e-3, 12 * 1.7e-3),
        downsample=1,
        propagation=PropagationConfig(0.20, 4),
        noise=NoiseConfig(),
        master_seed=31,
    )
    generate(manifest, out)
    split(manifest, (0.8, 0.1, 0.1), seed=5)
    manifest.save(out / "manifest.json")
    return out
