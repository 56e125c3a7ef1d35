import numpy as np
import pytest

from nie_lab.nie import SpectrumScan, detect_R, estimate_p_star, importance_ratio


def test_ratio_examples():
    np.testing.assert_array_equal(importance_ratio([0.1, 2.0], [0.1, 2.0]), [1.0, 1.0])
    np.testing.assert_allclose(importance_ratio([1e-4, 0.5], [0.0, 1.0]), [1e6, 0.5])
    np.testing.assert_array_equal(importance_ratio([0.0, 0.0], [0.3, 1.0]), [0.0, 0.0])


def test_detect_examples():
    assert detect_R([1.5, 1.2, 0.9, 0.4]) == (2, True)
    assert detect_R([0.9, 0.8]) == (0, True)
    assert detect_R([1.1, 0.9, 1.05]) == (1, False)
    lam = np.array([1e-3, 0.2, 4.0])
    assert detect_R(importance_ratio(lam, lam)).R == 0


REF = np.array([1.0, 2.0, 10.0])
SPECTRA = {0.001: [1.5, 2.5, 5.0], 0.002: [3.0, 3.2, 4.0], 0.004: [2.0, 4.0, 4.5]}


def toy_scan(n_runs=2, spectra=SPECTRA):
    scan = SpectrumScan(tuple(sorted(spectra)))
    for run in range(n_runs):
        scan.add(run, 0, 0.0, REF)
        for p, lam in spectra.items():
            scan.add(run, 0, p, lam)
    return scan


def test_p_star_arithmetic():
    rep = estimate_p_star(toy_scan())
    assert rep.R_max == 2
    assert rep.p_star_samples == [0.002, 0.004, 0.002, 0.004]
    assert rep.p_star == pytest.approx(0.003)
    assert rep.p_star_std == pytest.approx(0.001)
    assert rep.status == "ok" and not rep.extrapolated
    np.testing.assert_allclose(rep.I_bar_mean, [(1.5 + 1.25) / 2, (3 + 1.6) / 2, 2.0])


def test_ties_go_to_smaller_p():
    spectra = {0.001: [2.0, 2.5, 3.0], 0.002: [2.0, 2.2, 3.0], 0.004: [1.5, 2.1, 3.0]}
    scan = SpectrumScan(tuple(sorted(spectra)))
    scan.add(0, 0, 0.0, [1.0, 2.0, 4.0])
    for p, lam in spectra.items():
        scan.add(0, 0, p, lam)
    assert estimate_p_star(scan).p_star == 0.001


def test_no_equalization_status():
    spectra = {p: [0.5, 1.0, 5.0] for p in (0.001, 0.002, 0.004)}
    rep = estimate_p_star(toy_scan(spectra=spectra))
    assert rep.status == "no-equalization" and rep.p_star is None and rep.R_max == 0


def test_r_max_is_minimum_over_runs():
    scan = toy_scan()
    for p in scan.grid:
        scan.add(5, 0, p, [0.5, 2.1, 9.0])
    scan.add(5, 0, 0.0, REF)
    rep = estimate_p_star(scan)
    assert rep.R_max == 0 and rep.R_max_per_run[(0, 0)] == 2


def test_nonconforming_counted():
    spectra = dict(SPECTRA)
    spectra[0.001] = [1.5, 1.0, 11.0]
    rep = estimate_p_star(toy_scan(spectra=spectra))
    assert rep.nonconforming_fraction == pytest.approx(1 / 3)


def test_validation_errors():
    scan = SpectrumScan((0.001, 0.002))
    with pytest.raises(ValueError, match="at least 3"):
        scan.validate()
    scan = toy_scan()
    del scan.records[(1, 0, 0.002)]
    with pytest.raises(ValueError, match="missing"):
        estimate_p_star(scan)
    with pytest.raises(ValueError, match="ascending"):
        SpectrumScan((0.002, 0.001, 0.004)).validate()
