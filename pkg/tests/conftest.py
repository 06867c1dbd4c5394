import os
import tempfile

import numpy as np
import pytest

import scorehazard.dataset as dataset
import scorehazard.synthgen as synthgen


@pytest.fixture
def temp_folder():
    """Create a temporary folder for test data."""
    with tempfile.TemporaryDirectory() as tmpdirname:
        yield tmpdirname


@pytest.fixture
def km_episodes():
    """Five episodes: events at 0.1, 0.4, 0.7 and censored rows at 0.2, 0.9."""
    return dataset.EpisodeSet(
        scores=[0.1, 0.2, 0.4, 0.7, 0.9],
        events=[1, 0, 1, 1, 0],
        covariates=np.zeros((5, 0)),
        covariate_names=(),
    )


@pytest.fixture
def km_table():
    """Risk table rows (0.1, 1, 5), (0.4, 1, 3), (0.7, 1, 2)."""
    return dataset.RiskTable.from_rows([(0.1, 1, 5), (0.4, 1, 3), (0.7, 1, 2)])


@pytest.fixture
def cox_episodes():
    """Three events whose partial likelihood peaks at beta = -ln(2)/2."""
    return dataset.EpisodeSet(
        scores=[0.3, 0.5, 0.9],
        events=[1, 1, 1],
        covariates=[[1.0], [0.0], [1.0]],
        covariate_names=("z",),
    )


@pytest.fixture
def monotone_episodes():
    """The only Z=1 episode responds first, so the likelihood rises without bound."""
    return dataset.EpisodeSet(
        scores=[0.1, 0.2, 0.3, 0.4],
        events=[1, 1, 1, 0],
        covariates=[[1.0], [0.0], [0.0], [0.0]],
        covariate_names=("z",),
    )


@pytest.fixture
def make_synthetic():
    """Factory for seeded synthetic episode sets."""

    def make(n, beta, censor_fraction=0.0, seed=0, covariates=None, rate=1.0):
        specs = tuple(
            synthgen.CovariateSpec.parse(text)
            for text in (covariates or ["bernoulli:0.5"] * len(beta))
        )
        cfg = synthgen.SynthConfig(
            n=n,
            true_beta=tuple(beta),
            baseline_rate=rate,
            censor_fraction=censor_fraction,
            covariate_spec=specs,
            seed=seed,
        )
        return dataset.build_episodes(synthgen.generate(cfg))

    return make


@pytest.fixture
def canonical_csv():
    """Canonical file with a responder series, an unlabeled row and a non-responder."""
    return (
        b"id,score,label,terminal,x1,x2\n"
        b"dev1,0.2,responder,0,1.0,0.5\n"
        b"dev1,0.4,responder,0,1.0,0.7\n"
        b"dev1,0.9,responder,1,1.0,0.9\n"
        b"dev2,0.5,unlabeled,0,0.0,0.1\n"
        b"dev3,0.3,non_responder,0,0.0,0.2\n"
        b"dev3,0.6,non_responder,0,0.0,0.3\n"
    )


@pytest.fixture
def backblaze_raw():
    """Ten Backblaze daily rows: drive A fails on its last day, drive B never fails."""
    header = (
        "date,serial_number,model,failure,"
        "smart_5_raw,smart_9_raw,smart_197_raw,score"
    )
    rows = [
        "2024-01-01,A,ST4000,0,0,8760,0,0.10",
        "2024-01-02,A,ST4000,0,0,8784,0,0.20",
        "2024-01-03,A,ST4000,0,4,8808,0,0.35",
        "2024-01-04,A,ST4000,0,8,8832,5,0.60",
        "2024-01-05,A,ST4000,0,8,8856,5,0.75",
        "2024-01-06,A,ST4000,1,16,8880,10,0.95",
        "2024-01-01,B,ST4000,0,0,17520,0,0.05",
        "2024-01-02,B,ST4000,0,0,17544,0,0.04",
        "2024-01-03,B,ST4000,0,0,17568,0,0.06",
        "2024-01-04,B,ST4000,0,0,17592,0,0.05",
    ]
    return "\n".join([header, *rows]) + "\n"


@pytest.fixture
def write_file(temp_folder):
    """Write text or bytes to a file in the temporary folder and return its path."""

    def write(name, content):
        path = os.path.join(temp_folder, name)
        mode = "wb" if isinstance(content, bytes) else "w"
        with open(path, mode) as handle:
            handle.write(content)
        return path

    return write
