import numpy as np
import pytest

from maserkit.errors import InvalidInputError, NumericalError
from maserkit.fitting import (
    FitProblem,
    fit_biexponential,
    fit_maser_parameters,
    nlls_minimize,
)
from maserkit.cqed import MaserState, MaserSystemParams, simulate_maser
from maserkit.synthetic import BURST_DEFAULTS, biexp_trepr, maser_burst
from maserkit.trace import TimeTrace


def linear_problem(slope=2.0, intercept=-1.0, init=(0.0, 0.0)):
    t = np.linspace(0.0, 1.0, 30)
    y = intercept + slope * t
    trace = TimeTrace(t, y, "dimensionless")

    def model(p):
        return p[0] + p[1] * t

    return FitProblem(model=model, data=trace, init=np.asarray(init, dtype=float),
                      loss_space="linear"), (intercept, slope)


def test_linear_model_converges_immediately():
    problem, truth = linear_problem()
    res = nlls_minimize(problem)
    assert res.converged
    assert res.iterations <= 2
    assert res.params[0] == pytest.approx(truth[0], abs=1e-10)
    assert res.params[1] == pytest.approx(truth[1], abs=1e-10)
    assert res.residual_norm < 1e-10
    assert res.jacobian_condition > 0
    assert len(res.param_uncertainties) == 2


def test_fit_is_deterministic():
    t = np.linspace(0.0, 1e-5, 200)
    y = 0.5 * np.exp(-3e5 * t) + 0.02
    trace = TimeTrace(t, y, "dimensionless")

    def model(p):
        return p[0] * np.exp(-p[1] * t) + p[2]

    init = np.array([0.3, 2e5, 0.0])
    res1 = nlls_minimize(FitProblem(model=model, data=trace, init=init,
                                    loss_space="linear"))
    res2 = nlls_minimize(FitProblem(model=model, data=trace, init=init,
                                    loss_space="linear"))
    assert np.array_equal(res1.params, res2.params)
    assert res1.iterations == res2.iterations


def test_fit_scale_equivariance():
    """Scaling the data scales the recovered amplitude, nothing else."""
    t = np.linspace(0.0, 1e-5, 120)
    y = 0.7 * np.exp(-2.5e5 * t)

    def run(scale):
        trace = TimeTrace(t, scale * y, "dimensionless")

        def model(p):
            return p[0] * np.exp(-p[1] * t)

        return nlls_minimize(FitProblem(
            model=model, data=trace,
            init=np.array([0.4 * scale, 1.5e5]), loss_space="linear"))

    a = run(1.0)
    b = run(1e6)
    assert b.params[0] / a.params[0] == pytest.approx(1e6, rel=1e-8)
    assert b.params[1] == pytest.approx(a.params[1], rel=1e-8)


def test_bounds_are_respected():
    problem, _ = linear_problem()
    bounded = FitProblem(model=problem.model, data=problem.data,
                         init=problem.init, loss_space="linear",
                         bounds=((-0.5, 0.5), (-10.0, 10.0)))
    res = nlls_minimize(bounded)
    assert -0.5 <= res.params[0] <= 0.5


# ---------------------------------------------------------------------------
# biexponential


def test_biexp_round_trip_noiseless():
    trace, meta = biexp_trepr()
    fit = fit_biexponential(trace)
    assert fit.A == pytest.approx(meta["A"], rel=1e-6)
    assert fit.B == pytest.approx(meta["B"], rel=1e-6)
    assert fit.alpha_minus == pytest.approx(meta["alpha_minus"], rel=1e-6)
    assert fit.alpha_plus == pytest.approx(meta["alpha_plus"], rel=1e-6)


def test_biexp_round_trip_with_noise():
    trace, meta = biexp_trepr(noise_rms=0.005, seed=4)
    fit = fit_biexponential(trace)
    assert fit.A == pytest.approx(meta["A"], rel=0.05)
    assert fit.B == pytest.approx(meta["B"], rel=0.05)
    assert fit.alpha_minus == pytest.approx(meta["alpha_minus"], rel=0.05)
    assert fit.alpha_plus == pytest.approx(meta["alpha_plus"], rel=0.05)
    # one-sigma uncertainties are reported and have sane magnitude
    assert 0 < fit.alpha_minus_err < 0.2 * abs(fit.alpha_minus)


def test_biexp_explicit_init_and_component_order():
    trace, meta = biexp_trepr()
    # swapped starting components must converge to the same ordered answer
    fit = fit_biexponential(trace, init=(-0.1, 0.6, -0.5e5, -4.5e5))
    assert fit.alpha_minus <= fit.alpha_plus < 0
    assert fit.alpha_minus == pytest.approx(meta["alpha_minus"], rel=1e-5)
    assert fit.A == pytest.approx(meta["A"], rel=1e-5)


def test_biexp_handles_single_component_data():
    t = np.linspace(0.0, 2e-5, 500)
    y = 0.5 * np.exp(-3.0e5 * t)
    fit = fit_biexponential(TimeTrace(t, y, "dimensionless"))
    dominant = max(abs(fit.A), abs(fit.B))
    recessive = min(abs(fit.A), abs(fit.B))
    assert dominant == pytest.approx(0.5, rel=1e-3)
    assert recessive < 1e-3 * dominant


def test_biexp_error_cases():
    t = np.linspace(0.0, 1e-5, 100)
    with pytest.raises(NumericalError):
        fit_biexponential(TimeTrace(t, np.full(100, 3.3), "dimensionless"))
    with pytest.raises(InvalidInputError):
        fit_biexponential(TimeTrace(t[:5], np.exp(-t[:5]), "dimensionless"))


# ---------------------------------------------------------------------------
# maser burst


def test_maser_fit_recovers_parameters_from_perturbed_start():
    trace, meta = maser_burst()
    truth = np.array([meta["g_e"], meta["kappa_s"], meta["n_spins"]])
    fixed = {k: meta[k] for k in ("kappa_c", "gamma", "n_bar", "inversion0", "delta")}
    init = truth * np.array([1.3, 0.7, 1.3])
    res = fit_maser_parameters(trace, fixed, init)
    assert res.converged
    rel = np.abs(res.params / truth - 1.0)
    assert np.all(rel < 0.02), f"relative errors {rel}"


def test_zero_coupling_cannot_track_a_burst():
    """With g_e = 0 the photon equation decouples from the spins, so one
    trajectory (exponential relaxation to n_bar) is the best any choice
    of kappa_s and n_spins can do.  Its log-space residual against a
    real burst must dwarf the converged fit's."""
    trace, meta = maser_burst(noise_rms_log10=0.02, seed=1)
    fixed = {k: meta[k] for k in ("kappa_c", "gamma", "n_bar", "inversion0", "delta")}
    truth = np.array([meta["g_e"], meta["kappa_s"], meta["n_spins"]])
    res = fit_maser_parameters(trace, fixed, truth)
    assert res.converged

    params = MaserSystemParams(
        g_e=0.0, kappa_c=fixed["kappa_c"], kappa_s=meta["kappa_s"],
        gamma=fixed["gamma"], delta=fixed["delta"],
        n_spins=meta["n_spins"], n_bar=fixed["n_bar"])
    init = MaserState(photon_number=fixed["n_bar"], coherence=0.0,
                      inversion=fixed["inversion0"], spin_correlation=0.0)
    flat = simulate_maser(params, init, (trace.t[0], trace.t[-1]), t_eval=trace.t)
    log_resid = (np.log10(np.maximum(flat.photon_number, 1e-300))
                 - np.log10(np.maximum(trace.y, 1e-300)))
    assert float(np.linalg.norm(log_resid)) >= 10.0 * res.residual_norm


def test_maser_fit_validates_inputs():
    trace, meta = maser_burst()
    fixed = {k: meta[k] for k in ("kappa_c", "gamma", "n_bar", "inversion0", "delta")}
    with pytest.raises(InvalidInputError):
        fit_maser_parameters(trace, {"kappa_c": 1.0}, (1e7, 1e6, 1e14))
    with pytest.raises(InvalidInputError):
        fit_maser_parameters(trace, fixed, (-1e7, 1e6, 1e14))
