from pathlib import Path

import numpy as np
import pytest

from parsers import load_config, parse_config

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"

SHORT_CONFIG = """
name: short
fhn: {{a: -0.525, b: 0.6, eps: 0.06, c: 0.75, i_ext: 1.0}}
coupling:
  sigma: {sigma}
  scheme: {{b_uu: 1.0}}
  topology: {{generator: ring, n: 5}}
filter: {{tau1: 0.01, tau2: 0.01}}
gain: {{g: 1.0}}
integrator: {{dt: {dt}, t_end: {t_end}, record_stride: {stride}}}
init:
  # zero sum and zero cubic sum: the filters start without a step input
  y0: [0.7, 0.1, -0.7, -0.1, 0.0]
  v0: [0.4, 0.75, -0.1, -0.5, 0.0]
  theta0: {{a: -0.9, b: 0.2, c: 0.97, eps: 0.1}}
output:
  pe_l_values: [0.5, 1.0, 2.0]
"""


def short_config_text(sigma=0.0099, dt=0.001, t_end=20.0, stride=10):
    return SHORT_CONFIG.format(sigma=sigma, dt=dt, t_end=t_end, stride=stride)


@pytest.fixture
def short_config():
    return parse_config(short_config_text(), source="short.yaml")


@pytest.fixture
def short_config_path(tmp_path):
    path = tmp_path / "short.yaml"
    path.write_text(short_config_text())
    return path


@pytest.fixture(scope="session")
def experiment1():
    return load_config(CONFIG_DIR / "experiment1.yaml")


@pytest.fixture(scope="session")
def experiment2():
    return load_config(CONFIG_DIR / "experiment2.yaml")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
