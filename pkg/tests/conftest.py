import numpy as np
import pytest

from boostcrf import Dataset, LabeledSequence, LabelSpace, ObservationSequence


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def single_slice_dataset(labels, n_labels, track=None):
    """Datasets of one-slice sequences, all observed."""
    seqs = []
    for i, l in enumerate(labels):
        pt = [[0.0, 0.0]] if track is None else [track[i]]
        x = ObservationSequence.from_track(pt)
        seqs.append(LabeledSequence(x, np.array([l]), np.array([l])))
    return Dataset(LabelSpace.of_size(n_labels), seqs)
