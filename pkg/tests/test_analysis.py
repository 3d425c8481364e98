import numpy as np

from softmode.analysis import analyze_trajectory, summarize
from softmode.dynamics import IntegratorConfig, integrate_reverse
from softmode.observables import correlation_length_first_moment
from softmode.schedule import log_grid, make_schedule
from softmode.scores import LocalTanhScore, make_drift

SCHED = make_schedule(1.0)


def _records(n=3):
    model = LocalTanhScore(2, SCHED)
    cfg = IntegratorConfig(log_grid(50.0, 1e-3, 205), record_every=10)
    return model, [integrate_reverse(model, SCHED, IntegratorConfig(cfg.grid, True, s, 10), shape=(16, 16)) for s in range(n)]


def test_final_state_appended_and_xi_matches():
    model, records = _records(1)
    rec = records[0]
    a = analyze_trajectory(rec, SCHED)
    assert a.times[-1] == rec.t_final and len(a.times) == len(rec.times) + 1
    assert a.xi_x[-1] == correlation_length_first_moment(rec.final)
    assert a.spectrum is None and a.xi_eq is None


def test_spectrum_on_analysis_times_and_summary():
    model, records = _records(3)
    drift = make_drift(model, "sde")
    analyses = [analyze_trajectory(r, SCHED, drift, n_max=3, shells_used=(1, 2)) for r in records]
    assert np.array_equal(analyses[0].spectrum.times, analyses[0].times)
    s = summarize(analyses)
    assert np.array_equal(s.xi_x, np.median([a.xi_x for a in analyses], axis=0))
    assert np.array_equal(s.growth_rate, np.median([-a.dxi_dlogt for a in analyses], axis=0))
    assert s.abs_lambda.shape == (len(s.times), 4)
    assert s.argmax_growth() in s.times and s.argmin_abs_lambda(1) in s.times
