"""Acceptance suite: one test per release criterion, one PASS/FAIL line each.

Every criterion prints ``[ACCEPT] <name>: PASS`` or ``FAIL`` (run pytest
with ``-s`` to see the lines as they happen), then asserts. Tolerances are
pinned here on purpose; loosening them is a release decision, not a test
fix.
"""

import time

import numpy as np

import photonkit as pk
from photonkit.fit import (
    cw_g2_jacobian,
    cw_g2_model,
    levenberg_marquardt,
    multi_exp_jacobian,
    multi_exp_model,
    numeric_jacobian,
    pulsed_g2_jacobian,
    pulsed_g2_model,
)


def report(name, checks):
    """Print the one-line verdict for a criterion, then enforce it."""
    failed = [(label, detail) for label, passed, detail in checks if not passed]
    print(f"[ACCEPT] {name}: {'FAIL' if failed else 'PASS'}")
    for label, detail in failed:
        print(f"         failed: {label} ({detail})")
    assert not failed, f"{name}: {[label for label, _ in failed]}"


def poisson_decay_histogram(rng, floor, pairs, tau0=0.2, bin_ns=0.1,
                            period_ns=100.0):
    bw = int(bin_ns * 1000)
    period = int(period_ns * 1000)
    n = period // bw
    t = (np.arange(n) + 0.5) * bw / 1000.0
    lam = np.full(n, float(floor))
    for amp, tau in pairs:
        sel = t >= tau0
        lam[sel] += amp * np.exp(-(t[sel] - tau0) / tau)
    return pk.DecayHistogram(bw, period, rng.poisson(lam).astype(np.int64))


def test_criterion_1_correlator_matches_oracle():
    """Fast correlator equals the brute-force oracle on 50 mixed-density
    pairs of 10^4 events, under 1 s per pair."""
    rng = np.random.default_rng(100)
    mismatches = 0
    worst = 0.0
    for i in range(50):
        duration = int(10 ** rng.uniform(7.5, 11.5))
        window = int(10 ** rng.uniform(5.0, 6.3))
        bin_width = int(rng.choice([100, 500, 1000, 4096]))
        window = max(window, bin_width)
        a = pk.TimestampStream(
            0, np.sort(rng.integers(0, duration, size=10_000)), duration)
        b = pk.TimestampStream(
            1, np.sort(rng.integers(0, duration, size=10_000)), duration)
        start = time.perf_counter()
        fast = pk.cross_correlate(a, b, window, bin_width)
        worst = max(worst, time.perf_counter() - start)
        brute = pk.brute_force_correlate(a, b, window, bin_width)
        if not np.array_equal(fast.counts, brute.counts):
            mismatches += 1
    report("1 oracle equivalence", [
        ("bin-for-bin equality on 50 pairs", mismatches == 0,
         f"{mismatches} mismatching pairs"),
        ("fast path < 1 s per pair", worst < 1.0, f"worst {worst:.3f} s"),
    ])


def test_criterion_2_pulsed_antibunching():
    """10^7 pulses at T = 100 ns, tau_X = 4.7 ns, background tuned to
    ON/OFF levels near 200/20 counts/ms: g2(tau0) in [0.15, 0.45],
    verdict single_photon, all inside 2 minutes."""
    start = time.perf_counter()
    law = pk.BlinkingLaw(kind="none", off_emission_rate_per_ms=18.0)
    emitter = pk.EmitterModel(lifetime_ns=4.7, biexciton_probability=0.004,
                              blinking=law)
    excitation = pk.ExcitationConfig(mode="pulsed", pulse_period_ps=100_000,
                                     excitation_probability=0.03)
    detector = pk.DetectorModel(efficiency=0.6, dark_rate_per_ms=1.0,
                                jitter_sigma_ps=600.0, dead_time_ps=22_000)
    emission = pk.generate_emission(emitter, excitation, pk.PS_PER_S, seed=11)
    ch0, ch1, sync = pk.detect_hbt(emission, detector, seed=11)
    hist = pk.cross_correlate(ch0, ch1, 600_000, 500)
    fit = pk.fit_g2_pw(hist, 100.0, n_side=5)
    _, g2 = pk.normalize_g2(hist, fit)
    verdict = pk.single_photon_verdict(g2)
    elapsed = time.perf_counter() - start
    rate_per_ms = (len(ch0) + len(ch1)) / 1000.0
    report("2 pulsed antibunching", [
        (">= 1e7 pulses", len(sync) >= 10_000_000, f"{len(sync)} pulses"),
        ("ON rate near 200 counts/ms", 150 < rate_per_ms < 250,
         f"{rate_per_ms:.0f}/ms"),
        ("g2(tau0) < 0.5", g2.value < 0.5, f"g2 = {g2}"),
        ("g2(tau0) in [0.15, 0.45]", 0.15 <= g2.value <= 0.45, f"g2 = {g2}"),
        ("verdict single_photon", verdict is pk.Verdict.SINGLE_PHOTON,
         verdict.value),
        ("runtime < 2 min", elapsed < 120.0, f"{elapsed:.1f} s"),
    ])


def test_criterion_3_cw_lifetime_recovery():
    """CW run with tau_X = 4.700 ns and >= 1e6 detected photons: the g2 dip
    fit recovers tau_X within 3 sigma at a relative error under 15%."""
    law = pk.BlinkingLaw(off_emission_rate_per_ms=0.0)
    emitter = pk.EmitterModel(lifetime_ns=4.700, blinking=law)
    excitation = pk.ExcitationConfig(mode="cw", cw_rate_per_s=1.1e6)
    detector = pk.DetectorModel(efficiency=1.0, dark_rate_per_ms=1.0,
                                jitter_sigma_ps=0.0, dead_time_ps=0)
    emission = pk.generate_emission(emitter, excitation, pk.PS_PER_S, seed=7)
    ch0, ch1, _ = pk.detect_hbt(emission, detector, seed=7)
    n_detected = len(ch0) + len(ch1)
    hist = pk.cross_correlate(ch0, ch1, 1_000_000, 500)
    fit = pk.fit_g2_cw(hist)
    m = fit.value_of("tau_x_ns")
    report("3 CW lifetime recovery", [
        (">= 1e6 detected photons", n_detected >= 1_000_000,
         f"{n_detected} photons"),
        ("tau_X within 3 sigma of 4.700", abs(m.value - 4.700) < 3 * m.sigma,
         f"tau_X = {m}"),
        ("sigma/tau_X < 15%", m.sigma / 4.700 < 0.15,
         f"{m.sigma / 4.700:.1%}"),
    ])


def test_criterion_4_triple_exponential_recovery():
    """Triple-exponential decay (0.833, 4.959, 13.135) ns at paper-scale
    counts: each lifetime back within 3 sigma, and the amplitude-weighted
    average of the truth parameters matches the closed form to 1e-12."""
    rng = np.random.default_rng(17)
    taus = (0.833, 4.959, 13.135)
    hist = poisson_decay_histogram(rng, 10.0, [(1667.0, t) for t in taus])
    fit = pk.fit_multiexp(hist, n_components=3)
    checks = [("fit converged", fit.converged, f"flags {fit.flags}")]
    for i, truth in enumerate(taus, start=1):
        m = fit.value_of(f"tau{i}_ns")
        checks.append((f"tau{i} within 3 sigma of {truth}",
                       abs(m.value - truth) < 3 * m.sigma, f"tau{i} = {m}"))
    truth_params = pk.MultiExpParams(
        floor=10.0, amplitudes=np.full(3, 1667.0),
        lifetimes_ns=np.array(taus), tau0_ns=0.2)
    avg = pk.average_lifetime(truth_params)
    closed_form = sum(taus) / 3.0
    checks.append(("truth-weight average matches closed form to 1e-12",
                   abs(avg.value - closed_form) < 1e-12,
                   f"|diff| = {abs(avg.value - closed_form):.2e}"))
    report("4 triple-exponential recovery", checks)


def test_criterion_5_biexponential_regression():
    """Bi-exponential fixture (24.164, 1.334) ns: the 2-component fit
    recovers both within 3 sigma; a 3-component fit flags the extra
    component as degenerate."""
    pairs = [(3000.0, 1.334), (800.0, 24.164)]
    fit2 = pk.fit_multiexp(
        poisson_decay_histogram(np.random.default_rng(19), 10.0, pairs),
        n_components=2)
    checks = []
    for i, truth in enumerate((1.334, 24.164), start=1):
        m = fit2.value_of(f"tau{i}_ns")
        checks.append((f"tau{i} within 3 sigma of {truth}",
                       abs(m.value - truth) < 3 * m.sigma, f"tau{i} = {m}"))
    fit3 = pk.fit_multiexp(
        poisson_decay_histogram(np.random.default_rng(19), 10.0, pairs),
        n_components=3)
    checks.append(("3-component fit flags a degenerate component",
                   "degenerate_component" in fit3.flags, f"flags {fit3.flags}"))
    checks.append(("3-component fit suggests refitting with 2",
                   "suggest_n_components=2" in fit3.flags,
                   f"flags {fit3.flags}"))
    report("5 biexponential regression", checks)


def test_criterion_6_blinking_loop_closure():
    """600 s power-law blinking at alpha = 0.369, threshold 50 counts/ms:
    the MLE lands in 0.369 +/- max(3 sigma, 0.05) and the model comparison
    says power_law; an exponential-blinking control says exponential."""
    law = pk.BlinkingLaw(kind="power_law", alpha_on=0.369, alpha_off=0.369,
                         min_dwell_ms=3.0, max_dwell_ms=100_000.0,
                         off_emission_rate_per_ms=20.0)
    trace, _ = pk.simulate_intensity_trace(law, 200.0, 600 * pk.PS_PER_S,
                                           seed=5)
    res = pk.analyze_blinking(trace, threshold_per_ms=50.0, min_dwell_ms=3.0,
                              tau_min_ms=3.0)
    checks = []
    for state, m, model in (("on", res.alpha_on, res.model_on),
                            ("off", res.alpha_off, res.model_off)):
        tol = max(3 * m.sigma, 0.05)
        checks.append((f"alpha_{state} in 0.369 +/- {tol:.3f}",
                       abs(m.value - 0.369) < tol, f"alpha_{state} = {m}"))
        checks.append((f"{state} dwells classified power_law",
                       model == "power_law", model))

    law_exp = pk.BlinkingLaw(kind="two_state_exponential", mean_on_ms=100.0,
                             mean_off_ms=50.0, off_emission_rate_per_ms=20.0)
    trace_exp, _ = pk.simulate_intensity_trace(law_exp, 200.0,
                                               600 * pk.PS_PER_S, seed=6)
    res_exp = pk.analyze_blinking(trace_exp, threshold_per_ms=50.0)
    checks.append(("exponential control classified exponential (on)",
                   res_exp.model_on == "exponential", res_exp.model_on))
    checks.append(("exponential control classified exponential (off)",
                   res_exp.model_off == "exponential", res_exp.model_off))
    report("6 blinking loop closure", checks)


def test_criterion_7_poissonian_null():
    """A 10^6-event Poissonian stream through the beam splitter: normalized
    g2 flat within 1 +/- 0.05 in every bin, verdict not_single."""
    stream = pk.simulate_poissonian(1e7, int(1e11), seed=21)
    detector = pk.DetectorModel(efficiency=1.0, dark_rate_per_ms=0.0,
                                jitter_sigma_ps=0.0, dead_time_ps=0)
    ch0, ch1, _ = pk.detect_hbt(stream, detector, seed=21)
    hist = pk.cross_correlate(ch0, ch1, 1_000_000, 5000)
    fit = pk.fit_g2_cw(hist)
    norm, g2 = pk.normalize_g2(hist, fit)
    values = norm.normalized
    verdict = pk.single_photon_verdict(g2)
    report("7 Poissonian null", [
        (">= 1e6 events", len(ch0) + len(ch1) >= 1_000_000,
         f"{len(ch0) + len(ch1)} events"),
        ("all bins within 1 +/- 0.05",
         bool(np.all(np.abs(values - 1.0) <= 0.05)),
         f"range [{values.min():.4f}, {values.max():.4f}]"),
        ("verdict not_single", verdict is pk.Verdict.NOT_SINGLE,
         f"g2 = {g2}, verdict {verdict.value}"),
    ])


def test_criterion_8_property_suites():
    """The six pinned invariants: noiseless inversion, analytic Jacobians,
    normalization scale invariance, segmentation conservation, dead-time
    spacing, and worker-count determinism."""
    checks = []

    # Noiseless fits invert the forward model to 1e-6.
    inversion_ok = True
    cw_truth = np.array([800.0, 0.85, 0.4, 4.7])
    tau = np.linspace(-60, 60, 481)
    res = levenberg_marquardt(cw_g2_model, tau, cw_g2_model(tau, cw_truth),
                              cw_truth * [1.3, 0.7, 0.5, 1.6],
                              jacobian=cw_g2_jacobian)
    inversion_ok &= res.converged and np.allclose(
        res.theta, cw_truth, rtol=1e-6)
    exp_truth = np.array([12.0, 1500.0, 0.9, 900.0, 8.0])
    t = np.linspace(0.0, 90, 700)
    res = levenberg_marquardt(
        lambda x, p: multi_exp_model(x, p, 0.0), t,
        multi_exp_model(t, exp_truth, 0.0), exp_truth * [2.0, 0.6, 1.5, 1.4, 0.7],
        jacobian=lambda x, p: multi_exp_jacobian(x, p, 0.0))
    inversion_ok &= res.converged and np.allclose(
        res.theta, exp_truth, rtol=1e-6)
    checks.append(("noiseless-fit inversion at 1e-6", bool(inversion_ok), ""))

    # Analytic Jacobians agree with central differences to 1e-6.
    jac_ok = True
    rng = np.random.default_rng(8)
    for _ in range(10):
        th = np.array([rng.uniform(50, 5000), rng.uniform(0.1, 1.0),
                       rng.uniform(-2, 2), rng.uniform(0.5, 15)])
        grid = np.linspace(-40, 40, 401)
        grid = grid[np.abs(grid - th[2]) > 1e-3]
        ana = cw_g2_jacobian(grid, th)
        jac_ok &= np.allclose(numeric_jacobian(cw_g2_model, grid, th), ana,
                              rtol=1e-6, atol=1e-6 * np.abs(ana).max())
        th_exp = np.array([rng.uniform(1, 50), rng.uniform(100, 3000),
                           rng.uniform(0.3, 3), rng.uniform(100, 3000),
                           rng.uniform(4, 30)])
        t = np.linspace(0.5, 80, 300)
        ana = multi_exp_jacobian(t, th_exp, 0.2)
        jac_ok &= np.allclose(
            numeric_jacobian(lambda x, p: multi_exp_model(x, p, 0.2), t,
                             th_exp), ana,
            rtol=1e-6, atol=1e-6 * np.abs(ana).max())
    period = 50.0
    th_pw = np.concatenate(([6.0], rng.uniform(50, 500, 7), [0.5, 4.7]))
    grid = np.linspace(-180, 180, 1201)
    for kink in th_pw[-2] + np.arange(-3, 4) * period:
        grid = grid[np.abs(grid - kink) > 1e-3]
    ana = pulsed_g2_jacobian(grid, th_pw, period)
    jac_ok &= np.allclose(
        numeric_jacobian(lambda x, p: pulsed_g2_model(x, p, period), grid,
                         th_pw), ana,
        rtol=1e-6, atol=1e-6 * np.abs(ana).max())
    checks.append(("Jacobian vs finite differences at 1e-6", bool(jac_ok), ""))

    # Normalization is invariant under count rescaling to 1e-10.
    rng = np.random.default_rng(12)
    tau_c = (np.arange(-100, 100) + 0.5) * 0.5
    lam = 500.0 * (1 - 0.8 * np.exp(-np.abs(tau_c - 0.3) / 4.7))
    counts = rng.poisson(lam).astype(np.int64)
    hist = pk.CoincidenceHistogram(500, 50_000, counts)
    fit = pk.fit_g2_cw(hist)
    norm_1, _ = pk.normalize_g2(hist, fit)
    hist_7 = pk.CoincidenceHistogram(500, 50_000, counts * 7)
    fit_7 = pk.fit_g2_cw(hist_7)
    norm_7, _ = pk.normalize_g2(hist_7, fit_7)
    scale_ok = np.allclose(norm_7.normalized, norm_1.normalized, rtol=1e-10)
    checks.append(("normalization scale invariance at 1e-10",
                   bool(scale_ok), ""))

    # Segmentation conserves every bin, exactly.
    rng = np.random.default_rng(13)
    counts = rng.poisson(60.0, size=5000).astype(np.int64)
    trace = pk.IntensityTrace(counts, pk.PS_PER_MS)
    segments = pk.segment_trace(trace, 50.0)
    total = sum(s.duration_ps for s in segments)
    seg_ok = (total == trace.duration
              and segments[0].start == 0
              and segments[-1].end == trace.duration
              and all(p.end == q.start and p.on != q.on
                      for p, q in zip(segments, segments[1:])))
    state = np.empty(trace.n_bins, dtype=bool)
    for s in segments:
        state[s.start // trace.bin_width:s.end // trace.bin_width] = s.on
    seg_ok = seg_ok and np.array_equal(state, counts >= 50.0)
    checks.append(("segmentation conserves the trace exactly", bool(seg_ok),
                   f"{total} ps vs {trace.duration} ps"))

    # Dead time leaves no pair of events closer than the dead time.
    stream = pk.simulate_poissonian(2e6, int(2e10), seed=14)
    detector = pk.DetectorModel(efficiency=1.0, dark_rate_per_ms=1.0,
                                jitter_sigma_ps=0.0, dead_time_ps=22_000)
    ch0, ch1, _ = pk.detect_hbt(stream, detector, seed=14)
    dead_ok = all(
        ch.events.size < 2 or int(np.diff(ch.events).min()) >= 22_000
        for ch in (ch0, ch1))
    checks.append(("dead-time spacing holds exactly", bool(dead_ok), ""))

    # Worker count never changes a result, bit for bit.
    law = pk.BlinkingLaw(kind="power_law", alpha_on=0.4, alpha_off=0.6,
                         min_dwell_ms=1.0, max_dwell_ms=10_000.0,
                         off_emission_rate_per_ms=5.0)
    emitter = pk.EmitterModel(lifetime_ns=4.7, blinking=law)
    excitation = pk.ExcitationConfig(mode="cw", cw_rate_per_s=3e5)
    serial = pk.generate_emission(emitter, excitation, 3 * pk.PS_PER_S, 15,
                                  workers=1)
    threaded = pk.generate_emission(emitter, excitation, 3 * pk.PS_PER_S, 15,
                                    workers=4)
    det_ok = serial == threaded
    a = pk.TimestampStream(
        0, np.sort(np.random.default_rng(16).integers(0, 10**10, 50_000)),
        10**10)
    b = pk.TimestampStream(
        1, np.sort(np.random.default_rng(17).integers(0, 10**10, 50_000)),
        10**10)
    corr_ok = np.array_equal(
        pk.cross_correlate(a, b, 500_000, 500, workers=1).counts,
        pk.cross_correlate(a, b, 500_000, 500, workers=3).counts)
    checks.append(("worker-count determinism is bit-exact",
                   bool(det_ok and corr_ok), ""))

    report("8 property suites", checks)
