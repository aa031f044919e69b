import sys
from pathlib import Path

import pytest

from mertens_enum import zeros

HERE = Path(__file__).parent
ROOT = HERE.parent
sys.path.insert(0, str(HERE))

FIXTURE_2000 = HERE / "data" / "zeros_first2000.txt"


def full_data_path():
    for name in ("zeros_74000.txt.gz", "zeros_74000.txt"):
        p = ROOT / "data" / name
        if p.exists():
            return p
    return None


@pytest.fixture(scope="session")
def first2000():
    return zeros.parse_zero_file(FIXTURE_2000)


_FULL = {}


def full_zeros():
    """All ingested zeros of the shipped dataset (parsed once per session)."""
    if "z" not in _FULL:
        p = full_data_path()
        _FULL["z"] = zeros.parse_zero_file(p) if p else []
    return _FULL["z"]


def dataset_for(mode):
    """Weighted dataset at the mode's height cutoff, or None if the data does not reach it."""
    key = ("ds", mode)
    if key not in _FULL:
        zs = full_zeros()
        cutoff = zeros.HEIGHT_CUTOFF[zeros.Mode(mode)]
        if not zs or float(zs[-1].gamma) < cutoff - 1:
            _FULL[key] = None
        else:
            _FULL[key] = zeros.weight_dataset(zs, mode)
    return _FULL[key]
