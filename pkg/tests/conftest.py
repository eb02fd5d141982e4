from pathlib import Path

import numpy as np
import pytest

from sgeq import rvq
from sgeq.codec import CodecConfig
from sgeq.corpus import load_corpus
from sgeq.experiments import model_filename, rd_sweep

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def test_signals():
    return [u.samples for u in load_corpus(DATA / "test")]


@pytest.fixture(scope="session")
def train_signals():
    return [u.samples for u in load_corpus(DATA / "train")]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# acceptance training budget
SEED = 0
MAX_ITERS = 25
DEPTHS = (1, 2, 4, 6, 8, 16)
SIZES = (128, 256, 512, 1024)


@pytest.fixture(scope="session")
def sweep(train_signals, test_signals, tmp_path_factory):
    """Rate-distortion rows keyed by (mode, C, N_Q) plus the C=1024 models.

    C in {128, 256, 512} is trained with 8 stages; C=1024 with 16 stages,
    whose leading stages serve every shallower depth.
    """
    model_dir = tmp_path_factory.mktemp("models")
    base = CodecConfig()
    rows = rd_sweep(train_signals, test_signals, base, sizes=SIZES[:3], stages_list=(8,),
                    seed=SEED, max_iters=MAX_ITERS, model_dir=model_dir)
    rows += rd_sweep(train_signals, test_signals, base, sizes=(1024,), stages_list=DEPTHS,
                     seed=SEED, max_iters=MAX_ITERS, model_dir=model_dir)
    models = {m: rvq.RvqModel.load(model_dir / model_filename(m, 1024, 16, SEED))
              for m in ("baseline", "equalizer")}
    table = {(r["mode"], r["codebook_size"], r["num_stages"]): r for r in rows}
    return table, models, model_dir
