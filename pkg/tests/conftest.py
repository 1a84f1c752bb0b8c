import numpy as np
import pytest

from spml_lab import losses


def random_loss_input(rng, n, c, with_pseudo=False):
    conf = rng.uniform(0.02, 0.98, size=(n, c))
    labels = rng.integers(0, c, size=n)
    pseudo_sets = []
    for i in range(n):
        if with_pseudo and c > 1:
            candidates = [j for j in range(c) if j != labels[i]]
            size = int(rng.integers(0, len(candidates) + 1))
            pick = rng.choice(candidates, size=size, replace=False)
            pseudo_sets.append(set(int(p) for p in pick))
        else:
            pseudo_sets.append(set())
    return losses.LossInput(conf, labels, pseudo_sets)


@pytest.fixture
def np_rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory):
    """Small well-separated confusing dataset shared by harness/CLI tests."""
    from spml_lab.data import SynthConfig, generate_confusing

    out = tmp_path_factory.mktemp("tiny_dataset")
    config = SynthConfig(base_classes=4, train_per_class=12, val_per_class=6,
                         test_per_class=6, dim=8, cluster_std=0.5,
                         center_scale=4.0, seed=100)
    manifests = generate_confusing(config, out)
    return out, manifests


def experiment_config(dataset_dir, **overrides):
    from spml_lab.harness import ExperimentConfig

    base = dict(
        train_manifest=str(dataset_dir / "train_manifest.json"),
        val_manifest=str(dataset_dir / "val_manifest.json"),
        test_manifest=str(dataset_dir / "test_manifest.json"),
        loss="an", pseudo_mode="none", k=5, tau=0.1,
        batch_size=16, lr=1e-3, hidden_dim=16, patience=5,
        max_epochs=15, seeds=[0])
    base.update(overrides)
    return ExperimentConfig(**base)
