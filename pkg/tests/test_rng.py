import numpy as np
import pytest

from treedefect import derive_seed, stream


def test_same_labels_same_draws():
    a = stream(7, "split").random(8)
    b = stream(7, "split").random(8)
    assert np.array_equal(a, b)


def test_different_labels_differ():
    a = stream(7, "split").random(8)
    b = stream(7, "init").random(8)
    c = stream(8, "split").random(8)
    assert not np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_int_labels_supported():
    a = stream(3, "bootstrap", 0).random(4)
    b = stream(3, "bootstrap", 1).random(4)
    assert not np.array_equal(a, b)


def test_string_int_labels_do_not_alias():
    a = stream(3, "fold", 1).random(4)
    b = stream(3, "fold", "1").random(4)
    assert not np.array_equal(a, b)


def test_negative_seed_accepted():
    assert stream(-5, "x").random() == stream(-5, "x").random()


def test_bool_label_rejected():
    with pytest.raises(TypeError):
        stream(0, True)


def test_non_string_label_rejected():
    with pytest.raises(TypeError):
        stream(0, 1.5)


def test_derive_seed_deterministic():
    assert derive_seed(11, "cv", 3) == derive_seed(11, "cv", 3)
    assert derive_seed(11, "cv", 3) != derive_seed(11, "cv", 4)
