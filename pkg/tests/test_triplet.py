import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from maserkit.errors import InvalidInputError
from maserkit.triplet import (
    DEFAULT_POPULATIONS,
    BiexpFit,
    TripletRateModel,
    combined_rate_from_eigen,
    difference_coefficients,
    eigenrates,
    equivalent_model,
    evolve_populations,
    predicted_trepr_signal,
    zero_crossing_time,
)

REF_MODEL = TripletRateModel(n_x0=0.6, n_y0=0.21, n_z0=0.19,
                             k_x=3.0e5, k_z=0.5e5, w_xz=0.9e5)


def rk4_oracle(model, t_grid):
    """Fixed-step RK4 on the 2x2 rate equation, independent of the
    closed-form propagator under test."""
    m = model.rate_matrix()
    dt = 2e-9
    out_x = np.empty(len(t_grid))
    out_z = np.empty(len(t_grid))
    y = np.array([model.n_x0, model.n_z0])
    t = 0.0
    for i, t_target in enumerate(t_grid):
        while t < t_target - 1e-15:
            h = min(dt, t_target - t)
            k1 = m @ y
            k2 = m @ (y + 0.5 * h * k1)
            k3 = m @ (y + 0.5 * h * k2)
            k4 = m @ (y + h * k3)
            y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            t += h
        out_x[i], out_z[i] = y
    return out_x, out_z


def test_propagator_matches_rk4():
    t = np.linspace(0.0, 2e-5, 9)
    n_x, n_z = evolve_populations(REF_MODEL, t)
    ox, oz = rk4_oracle(REF_MODEL, t)
    assert np.allclose(n_x, ox, rtol=1e-8, atol=1e-12)
    assert np.allclose(n_z, oz, rtol=1e-8, atol=1e-12)


def test_eigenrates_match_numpy():
    lam = np.sort(np.linalg.eigvals(REF_MODEL.rate_matrix()).real)
    am, ap = eigenrates(REF_MODEL)
    assert am == pytest.approx(lam[0], rel=1e-12)
    assert ap == pytest.approx(lam[1], rel=1e-12)
    assert am < ap < 0


def test_population_sum_conserved_without_depopulation():
    model = TripletRateModel(*DEFAULT_POPULATIONS, k_x=0.0, k_z=0.0, w_xz=2e5)
    t = np.linspace(0.0, 5e-5, 50)
    n_x, n_z = evolve_populations(model, t)
    assert np.allclose(n_x + n_z, model.n_x0 + model.n_z0, rtol=1e-12)
    # relaxation equilibrates the pair
    assert abs(n_x[-1] - n_z[-1]) < 1e-4


def test_difference_matches_coefficient_form():
    t = np.linspace(0.0, 2e-5, 400)
    n_x, n_z = evolve_populations(REF_MODEL, t)
    A, B = difference_coefficients(REF_MODEL)
    am, ap = eigenrates(REF_MODEL)
    u = A * np.exp(am * t) + B * np.exp(ap * t)
    assert np.allclose(n_x - n_z, u, rtol=1e-10, atol=1e-13)
    assert A + B == pytest.approx(REF_MODEL.n_x0 - REF_MODEL.n_z0, rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(
    n_x0=st.floats(0.05, 0.9),
    split=st.floats(0.05, 0.95),
    k_x=st.floats(1e4, 1e6),
    k_z=st.floats(1e4, 1e6),
    w=st.floats(1e3, 1e6),
)
def test_biexponential_reproduces_dynamics(n_x0, split, k_x, k_z, w):
    n_z0 = (1.0 - n_x0) * split
    n_y0 = 1.0 - n_x0 - n_z0
    model = TripletRateModel(n_x0=n_x0, n_y0=n_y0, n_z0=n_z0,
                             k_x=k_x, k_z=k_z, w_xz=w)
    am, ap = eigenrates(model)
    if (ap - am) < 1e-5 * abs(am):
        return  # nearly degenerate pair, coefficients are ill-defined
    t = np.linspace(0.0, 5.0 / abs(ap), 60)
    n_x, n_z = evolve_populations(model, t)
    A, B = difference_coefficients(model)
    u = A * np.exp(am * t) + B * np.exp(ap * t)
    assert np.allclose(n_x - n_z, u, rtol=1e-8, atol=1e-12)
    # populations stay non-negative under pure decay and exchange
    assert np.all(n_x > -1e-12) and np.all(n_z > -1e-12)


def test_degenerate_model_raises():
    model = TripletRateModel(*DEFAULT_POPULATIONS, k_x=1e5, k_z=1e5, w_xz=0.0)
    with pytest.raises(InvalidInputError):
        difference_coefficients(model)


def test_model_validation():
    with pytest.raises(InvalidInputError):
        TripletRateModel(0.5, 0.2, 0.2, 1e5, 1e5, 1e4)   # sums to 0.9
    with pytest.raises(InvalidInputError):
        TripletRateModel(0.7, 0.4, -0.1, 1e5, 1e5, 1e4)  # negative population
    with pytest.raises(InvalidInputError):
        TripletRateModel(*DEFAULT_POPULATIONS, k_x=-1.0, k_z=1e5, w_xz=1e4)


def test_grid_validation():
    with pytest.raises(InvalidInputError):
        evolve_populations(REF_MODEL, np.array([-1e-6, 0.0]))
    with pytest.raises(InvalidInputError):
        evolve_populations(REF_MODEL, np.array([0.0, 1e-6, 1e-6]))


def test_equivalent_model_gives_identical_signal():
    other = equivalent_model(REF_MODEL, w_new=1.2e5)
    # genuinely different microscopic rates
    assert abs(other.k_x - REF_MODEL.k_x) > 1e4
    assert abs(other.w_xz - REF_MODEL.w_xz) > 1e4
    # same eigenvalues and same biexponential coefficients
    assert np.allclose(eigenrates(other), eigenrates(REF_MODEL), rtol=1e-12)
    assert np.allclose(difference_coefficients(other),
                       difference_coefficients(REF_MODEL), rtol=1e-10)
    # and the observable difference trace is pointwise identical
    t = np.linspace(0.0, 2e-5, 200)
    ux = np.subtract(*evolve_populations(REF_MODEL, t))
    uo = np.subtract(*evolve_populations(other, t))
    assert np.allclose(ux, uo, rtol=0, atol=1e-12)


def test_equivalent_model_rejects_out_of_family():
    dk = 0.5 * (REF_MODEL.k_x - REF_MODEL.k_z)
    r = math.hypot(REF_MODEL.w_xz, dk)
    with pytest.raises(InvalidInputError):
        equivalent_model(REF_MODEL, w_new=1.01 * r)
    with pytest.raises(InvalidInputError):
        equivalent_model(REF_MODEL, w_new=0.0)


def test_combined_rate_reference_values():
    rate, tau = combined_rate_from_eigen(-3.93e5, -0.459e5)
    assert rate == pytest.approx(2.1945e5, rel=1e-12)
    assert tau == pytest.approx(4.5569e-6, rel=1e-4)
    with pytest.raises(InvalidInputError):
        combined_rate_from_eigen(-3.93e5, 0.459e5)


REF_FIT = BiexpFit(A=0.547, B=-0.066, alpha_minus=-3.93e5, alpha_plus=-0.459e5)


def test_zero_crossing_reference_value():
    # ln(0.066/0.547) / (alpha_minus - alpha_plus) = 6.093 us
    t0 = zero_crossing_time(REF_FIT)
    assert t0 == pytest.approx(6.093e-6, rel=1e-3)
    tr = predicted_trepr_signal(REF_FIT, np.array([t0 * (1 - 1e-6), t0, t0 * (1 + 1e-6)]))
    assert tr.y[0] * tr.y[-1] < 0 or abs(tr.y[1]) < 1e-12


def test_zero_crossing_none_for_same_sign():
    fit = BiexpFit(A=0.5, B=0.1, alpha_minus=-4e5, alpha_plus=-5e4)
    assert zero_crossing_time(fit) is None


def test_biexpfit_validates_rate_order():
    with pytest.raises(InvalidInputError):
        BiexpFit(A=1.0, B=0.1, alpha_minus=-1e4, alpha_plus=-1e5)
    with pytest.raises(InvalidInputError):
        BiexpFit(A=1.0, B=0.1, alpha_minus=-1e5, alpha_plus=1e4)


def test_predicted_signal_is_dimensionless_trace():
    tr = predicted_trepr_signal(REF_FIT, np.linspace(0, 2e-5, 10))
    assert tr.unit == "dimensionless"
    assert tr.y[0] == pytest.approx(REF_FIT.A + REF_FIT.B, rel=1e-12)
