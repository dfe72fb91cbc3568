import numpy as np
import pytest
import scipy.io

from pyprep.manifest import MANIFEST


def fabricate_recording(path, record, rng):
    """One MAT file shaped like a real corpus recording: drive-end and
    fan-end channels plus the shaft speed."""
    de = rng.standard_normal((record.expected_samples, 1))
    scipy.io.savemat(path, {
        record.channel_key: de,
        f"X{record.file_id:03d}_FE_time": rng.standard_normal((64, 1)),
        f"X{record.file_id:03d}RPM": np.array([[1797 - 25 * record.load]]),
    })


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    """A full fabricated corpus with the manifest's expected lengths."""
    root = tmp_path_factory.mktemp("corpus")
    rng = np.random.default_rng(0)
    for record in MANIFEST:
        fabricate_recording(root / record.filename, record, rng)
    return root
