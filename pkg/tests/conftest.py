import numpy as np
import pytest
import torch

from dermoscan.augment import AugmentationPolicy
from dermoscan.models import ModelSpec, build_model

import acceptance_report
from synthdata import balanced_counts, make_class_corpus, make_flat_images, synth_records, write_metadata_csv


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if acceptance_report.LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in acceptance_report.LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def small_net():
    """Untrained resnet18 classifier shared by prediction-shaped tests."""
    torch.manual_seed(0)
    return build_model(ModelSpec("resnet18", pretrained=False)).eval()


@pytest.fixture(scope="session")
def fast_policy():
    # small presize keeps resample/augment tests cheap
    return AugmentationPolicy(presize_to=64, final_size=32)


@pytest.fixture(scope="session")
def corpus28(tmp_path_factory):
    """28-image class-folder corpus (4 per label) plus its id->label map."""
    root = tmp_path_factory.mktemp("corpus28")
    labels = make_class_corpus(root, balanced_counts(28), seed=2)
    return root, labels


@pytest.fixture(scope="session")
def metadata28(tmp_path_factory):
    root = tmp_path_factory.mktemp("meta28")
    counts = balanced_counts(28)
    csv_path = write_metadata_csv(root / "meta.csv", counts)
    flat = make_flat_images(root / "flat", synth_records(counts), seed=2)
    return csv_path, flat


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
