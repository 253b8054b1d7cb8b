# -*- coding: utf-8 -*-

import json

import numpy as np
import pytest

from lutpim.config import DeviceConfig
from lutpim.quantizer import CodeMatrix, CodeTable


@pytest.fixture
def rng():
    return np.random.default_rng(20190528)


@pytest.fixture
def device():
    return DeviceConfig()


@pytest.fixture
def w1a3_tables():
    return CodeTable.unsigned(1), CodeTable.unsigned(3)


@pytest.fixture
def random_problem(rng):
    """Factory for a random (W, A) pair, unsigned tables unless asked."""

    def make(M, K, N, b_w, b_a, symmetric=False, act_symmetric=False):
        factory = CodeTable.symmetric if symmetric else CodeTable.unsigned
        w_table = factory(b_w)
        factory = CodeTable.symmetric if act_symmetric else CodeTable.unsigned
        a_table = factory(b_a)
        W = CodeMatrix.random(M, K, b_w, rng)
        A = CodeMatrix.random(K, N, b_a, rng)
        return W, A, w_table, a_table

    return make


@pytest.fixture
def write_config(tmp_path):
    def write(data, name="config.json"):
        path = tmp_path / name
        with open(path, "w") as fp:
            json.dump(data, fp, indent="\t")
        return str(path)

    return write
