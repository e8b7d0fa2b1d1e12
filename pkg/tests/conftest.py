import numpy as np
import pytest

from xaxisreg.dataset import Dataset, SynthSpec, gen_synthetic


def make_dataset(seed, n, lo=-3.0, hi=3.0, b=1):
    rng = np.random.default_rng(seed)
    X = rng.uniform(lo, hi, size=(n, b))
    y = np.sin(X).sum(axis=1) + 0.3 * rng.normal(size=n)
    return Dataset(X, y)


@pytest.fixture
def noisy_sine():
    spec = SynthSpec("sine", n=60, domain=[[0.0, 6.0]], noise_low=0.5, noise_high=1.5, seed=11)
    return gen_synthetic(spec)


@pytest.fixture
def write_text(tmp_path):
    def _write(name, text):
        p = tmp_path / name
        p.write_text(text, encoding="utf-8")
        return p
    return _write
