"""Small builders shared across test modules."""

import numpy as np

from tabinsight.dataset import Column


def num_col(vals, valid=None, name="x"):
    vals = np.asarray(vals, dtype=np.float64)
    if valid is None:
        valid = np.ones(len(vals), dtype=bool)
    return Column(name, "numeric", vals, np.asarray(valid, dtype=bool))


def cat_col(tokens, name="c"):
    dictionary = []
    seen = {}
    codes = np.full(len(tokens), -1, dtype=np.int32)
    valid = np.zeros(len(tokens), dtype=bool)
    for i, t in enumerate(tokens):
        if t is None:
            continue
        if t not in seen:
            seen[t] = len(dictionary)
            dictionary.append(t)
        codes[i] = seen[t]
        valid[i] = True
    return Column(name, "categorical", codes, valid, tuple(dictionary))


def unpack_signs(sv):
    return np.unpackbits(sv.words.view(np.uint8), bitorder="little")[: sv.k]
