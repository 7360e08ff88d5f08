import numpy as np

from uinfc.validate import (
    SUITE,
    dini_surrogate,
    endi_clf_closed_form,
    f_tilde_grid_min,
    lemma1_localization,
    lemma2_sandwich,
    prox_inequality,
)


def test_suite_names():
    assert [n for n, _ in SUITE] == ["lemma1_localization", "lemma2_sandwich", "prox_inequality",
                                     "dini_surrogate", "decay_audit_1d", "endi_clf_closed_form"]


def test_small_counts_pass():
    for ok, detail in (lemma1_localization(count=20), lemma2_sandwich(count_abs=20, count_endi=3),
                       prox_inequality(count=20, probes=50), dini_surrogate(count=20),
                       endi_clf_closed_form(count=50)):
        assert ok, detail


def test_corrupted_zeta_is_caught():
    ok, detail = prox_inequality(count=20, probes=50, corrupt_zeta=True)
    assert not ok and detail.split("/")[0] != detail.split("/")[1].split()[0]


def test_grid_min_oracle_on_circle():
    # phi3 = 0: f_tilde is constant in theta
    assert abs(f_tilde_grid_min(np.array([0.3, 0.4, 0.0])) - 0.25) < 1e-15
    assert abs(f_tilde_grid_min(np.array([3.0, 4.0, 1.0])) - 17.0) < 1e-9
