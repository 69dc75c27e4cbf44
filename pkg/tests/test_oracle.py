import numpy as np
import pytest

from visbank.bank import VisualBank
from visbank.checks import oracle_equivalence
from visbank.errors import ZeroNormInput
from visbank.oracle import oracle_update


def test_tie_breaks_low():
    assert oracle_update([[1, 0], [1, 0]], [1, 0])[0] == 0


def test_worked_example():
    k, slot = oracle_update([[1, 0], [0, 1]], [np.float32(0.9), np.float32(0.1)])
    assert k == 0
    assert slot == pytest.approx([0.95, 0.05])
    bank = VisualBank(1, 2, 2)
    bank.insert_prompt(0, [1, 0])
    bank.insert_prompt(0, [0, 1])
    bank.insert_prompt(0, [0.9, 0.1])
    assert bank.slots[0, 0].tolist() == slot


def test_zero_norm():
    with pytest.raises(ZeroNormInput):
        oracle_update([[1, 0]], [0, 0])


def test_equivalence_small(backend):
    res = oracle_equivalence(900, seed=11)
    assert res.updates == 900
    assert res.ok, res
