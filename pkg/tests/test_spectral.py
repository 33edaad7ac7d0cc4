import numpy as np
import pytest

from semiflow import InvalidArgument, ResourceLimit, m_of_t
from semiflow.spectral import (DISCRETIZED_SPECTRUM_CAVEAT, BoxPartition,
                               Observable, build_ulam, correlation, decay_fit,
                               resonance_compare, spectrum)


def test_partition_measure(f_generic):
    part = BoxPartition.build(f_generic, 64, 4)
    grid = np.arange(4096) / 4096
    integral = float(np.mean(f_generic(grid)))
    assert part.total_measure() == pytest.approx(integral, abs=1e-3)


def test_ulam_identity_at_t0(f_generic):
    op = build_ulam(f_generic, 0.0, 8, 4, 32)
    assert np.array_equal(op.matrix, np.eye(32))


def test_ulam_doubling_map_closed_form(f_const):
    nx, ppb = 16, 256
    op = build_ulam(f_const, 1.0, nx, 1, ppb)
    ref = np.zeros((nx, nx))
    for j in range(nx):
        ref[(2 * j) % nx, j] += 0.5
        ref[(2 * j + 1) % nx, j] += 0.5
    assert np.max(np.abs(op.matrix - ref)) <= 2.0 / np.sqrt(ppb)


def test_ulam_columns_sum_to_one(f_sin):
    op = build_ulam(f_sin, 3.0, 16, 4, 64)
    sums = op.matrix.sum(axis=0)
    assert np.max(np.abs(sums - 1.0)) <= 2.0 / np.sqrt(64)
    assert np.all(op.matrix >= 0.0)


def test_ulam_mass_conservation(f_sin):
    op = build_ulam(f_sin, 2.0, 16, 4, 64)
    masses = np.repeat(op.partition.column_heights / (16 * 4), 4)
    pushed = op.matrix @ masses
    assert pushed.sum() == pytest.approx(masses.sum(), rel=1e-12)


def test_ulam_memory_cap(f_sin):
    with pytest.raises(ResourceLimit):
        build_ulam(f_sin, 1.0, 512, 256, 16)


def test_ulam_lattice_deterministic(f_sin):
    a = build_ulam(f_sin, 2.0, 8, 4, 32, seed=1)
    b = build_ulam(f_sin, 2.0, 8, 4, 32, seed=99)
    assert np.array_equal(a.matrix, b.matrix)


def test_ulam_monte_carlo_mode(f_sin):
    a = build_ulam(f_sin, 2.0, 8, 4, 32, seed=5, mode="monte-carlo")
    b = build_ulam(f_sin, 2.0, 8, 4, 32, seed=5, mode="monte-carlo")
    c = build_ulam(f_sin, 2.0, 8, 4, 32, seed=6, mode="monte-carlo")
    assert np.array_equal(a.matrix, b.matrix)
    assert not np.array_equal(a.matrix, c.matrix)
    assert np.max(np.abs(a.matrix.sum(axis=0) - 1.0)) <= 1e-12


def test_spectrum_identity(f_const):
    op = build_ulam(f_const, 0.0, 4, 2, 16)
    rep = spectrum(op, 3)
    assert all(abs(v - 1.0) <= 1e-12 for v in rep.eigenvalues)


def test_spectrum_leading_eigenvalue_flat(f_const):
    op = build_ulam(f_const, 1.0, 64, 1, 64)
    rep = spectrum(op, 4)
    assert abs(rep.eigenvalues[0] - 1.0) <= 1e-8
    # flat invariant density: eigenvector of the doubling Ulam matrix
    vals, vecs = np.linalg.eig(op.matrix)
    lead = vecs[:, np.argmax(np.abs(vals))].real
    lead = np.abs(lead) / np.abs(lead).sum()
    cv = lead.std() / lead.mean()
    assert cv < 0.05


def test_spectrum_matches_dense_oracle(f_sin):
    op = build_ulam(f_sin, 4.0, 64, 8, 64)
    rep = spectrum(op, 8)
    dense = np.linalg.eigvals(op.matrix)
    dense = dense[np.argsort(-np.abs(dense))]
    assert abs(rep.eigenvalues[1]) == pytest.approx(abs(dense[1]), abs=1e-8)
    assert abs(rep.eigenvalues[0] - 1.0) <= 1e-8
    assert all(abs(v) <= 1.0 + 1e-10 for v in rep.eigenvalues)
    assert DISCRETIZED_SPECTRUM_CAVEAT in rep.caveats


def test_spectrum_k_cap(f_sin):
    op = build_ulam(f_sin, 1.0, 8, 2, 16)
    with pytest.raises(InvalidArgument):
        spectrum(op, 33)


def test_correlation_mean_zero_against_one(f_sin):
    psi = Observable(s_wave=("cos", 1.0))
    one = Observable(cutoff=False)
    curve = correlation(f_sin, psi, one, [0.5, 1.5, 3.0], 64, 8)
    assert all(abs(v) <= 1e-12 for _, v in curve.samples)


def test_correlation_zero_time_variance(f_generic):
    psi = Observable(x_wave=("cos", 1), s_wave=("cos", 1.0))
    curve = correlation(f_generic, psi, psi, [0.0], 128, 8)
    assert curve.samples[0][1] >= 0.0


def test_correlation_periodic_nondecay_constant(f_const):
    psi = Observable(s_wave=("cos", 1.0))
    early = correlation(f_const, psi, psi, [0.1 * k for k in range(11)], 64, 16)
    late = correlation(f_const, psi, psi, [10.0 + 0.1 * k for k in range(11)], 64, 16)
    m_early = max(abs(v) for _, v in early.samples)
    m_late = max(abs(v) for _, v in late.samples)
    assert m_late >= 0.9 * m_early


def test_correlation_weakly_mixing_decays(f_sin):
    psi = Observable(x_wave=("cos", 1))
    ts = [0.5 * k for k in range(17)]
    curve = correlation(f_sin, psi, psi, ts, 8192, 8)
    assert abs(curve.samples[0][1]) > 0.1
    assert all(abs(v) < 1e-2 for t, v in curve.samples if t >= 6.0)


def test_decay_fit_exact_geometric():
    from semiflow.spectral import CorrelationCurve
    cc = CorrelationCurve(
        samples=tuple((float(t), 3.0 * 0.7 ** t) for t in range(1, 7)),
        psi_id="a", phi_id="b", ceiling_key="k")
    rate, residual = decay_fit(cc)
    assert rate == pytest.approx(0.7, rel=1e-12)
    assert residual <= 1e-12


def test_decay_fit_constant_curve():
    from semiflow.spectral import CorrelationCurve
    cc = CorrelationCurve(samples=tuple((float(t), 0.25) for t in range(5)),
                          psi_id="a", phi_id="b", ceiling_key="k")
    rate, _ = decay_fit(cc)
    assert rate == pytest.approx(1.0, abs=1e-12)


def test_decay_fit_masks_zeros():
    from semiflow.spectral import CorrelationCurve
    samples = [(0.0, 0.5), (1.0, 0.0), (2.0, 0.125), (3.0, 0.0), (4.0, 0.03125)]
    cc = CorrelationCurve(samples=tuple(samples), psi_id="a", phi_id="b",
                          ceiling_key="k")
    rate, _ = decay_fit(cc)
    assert rate == pytest.approx(0.5, rel=1e-9)


def test_resonance_compare_constant(f_const):
    op = build_ulam(f_const, 2.0, 32, 4, 64)
    rep = spectrum(op, 4)
    psi = Observable(s_wave=("cos", 1.0))
    curve = correlation(f_const, psi, psi, [0.25 * k for k in range(1, 12)], 64, 8)
    fit = decay_fit(curve)
    est = m_of_t(f_const, 2.0, 8, 4, certified=False)
    out = resonance_compare(rep, fit, est)
    assert out["m_bound_per_unit_time"] == pytest.approx(1.0)
    assert out["fitted_rate"] == pytest.approx(1.0, abs=0.05)
    assert DISCRETIZED_SPECTRUM_CAVEAT in out["caveats"]


def test_resonance_compare_generic_all_below_one(f_sin):
    t = 4.0
    op = build_ulam(f_sin, t, 64, 8, 64)
    rep = spectrum(op, 4)
    psi = Observable(x_wave=("cos", 1))
    curve = correlation(f_sin, psi, psi, [0.5 * k for k in range(1, 13)], 2048, 8)
    fit = decay_fit(curve)
    est = m_of_t(f_sin, t, 12, 8, certified=False)
    out = resonance_compare(rep, fit, est)
    assert out["lambda2_abs"] < 1.0
    assert out["fitted_rate"] < 1.0
    assert out["m_bound_per_unit_time"] < 1.0


def test_resonance_compare_rejects_mismatched_t(f_sin):
    op = build_ulam(f_sin, 2.0, 8, 2, 16)
    rep = spectrum(op, 3)
    est = m_of_t(f_sin, 3.0, 8, 4, certified=False)
    with pytest.raises(InvalidArgument):
        resonance_compare(rep, (0.5, 0.0), est)
