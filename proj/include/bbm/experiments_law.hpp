#pragma once

// Convergence-in-law experiments: the renormalized-data flow against the
// limiting stochastic equation, the weakly interacting flow against the
// closed-form linear limit, and the space-time-noise analogues. The
// comparisons follow the proof structure: finite-dimensional pairings,
// moment matching within combined standard errors, and a two-sample
// distribution test.

#include "bbm/experiments_core.hpp"

namespace bbm {

namespace detail {

struct ArmGates {
    EnsembleSummary a;
    EnsembleSummary b;
    KsResult ks;
};

inline ArmGates add_two_arm_gates(ExperimentResult& res, const std::string& anchor,
                                  const ObservableSample& arm_a, const ObservableSample& arm_b) {
    ArmGates out;
    out.a = moment_summary(arm_a);
    out.b = moment_summary(arm_b);
    out.ks = ks_two_sample(arm_a, arm_b);
    const double mean_se = std::sqrt(out.a.mean_se * out.a.mean_se + out.b.mean_se * out.b.mean_se);
    const double var_se =
        std::sqrt(out.a.variance_se * out.a.variance_se + out.b.variance_se * out.b.variance_se);
    res.gates.push_back(make_gate("mean-match", anchor, "|mean gap| / combined SE",
                                  std::abs(out.a.mean - out.b.mean) / mean_se, "<=", 3.0));
    res.gates.push_back(make_gate("variance-match", anchor, "|variance gap| / combined SE",
                                  std::abs(out.a.variance - out.b.variance) / var_se, "<=", 3.0));
    res.gates.push_back(
        make_gate("ks-p", anchor, "two-sample KS p-value", out.ks.p_value, ">=", 0.01));
    res.summary["mean_a"] = out.a.mean;
    res.summary["mean_b"] = out.b.mean;
    res.summary["mean_se_a"] = out.a.mean_se;
    res.summary["mean_se_b"] = out.b.mean_se;
    res.summary["variance_a"] = out.a.variance;
    res.summary["variance_b"] = out.b.variance;
    res.summary["variance_se_a"] = out.a.variance_se;
    res.summary["variance_se_b"] = out.b.variance_se;
    res.summary["ks_statistic"] = out.ks.statistic;
    res.summary["ks_p"] = out.ks.p_value;
    return out;
}

inline void push_arm_rows(ExperimentResult& res, const std::string& arm,
                          const ObservableSample& s, const std::string& anchor) {
    for (std::size_t i = 0; i < s.values.size(); ++i)
        res.csv_rows.push_back({arm, std::to_string(i), fmt_g17(s.values[i]), anchor});
}

}  // namespace detail

// ---------------------------------------------------------------------------
// thm13: renormalized data flow vs the limiting stochastic equation
// ---------------------------------------------------------------------------

inline ExperimentResult run_thm13(const MaterializedConfig& cfg, int workers) {
    ExperimentResult res;
    res.id = "thm13";
    detail::PhaseTimer timer(res.timers);
    timer.start();

    const double alpha = cfg.get_double("model.alpha");
    const int n_trunc = static_cast<int>(cfg.get_int("model.truncation"));
    const int m = static_cast<int>(cfg.get_int("solve.mode_bound"));
    const double dt = cfg.get_double("solve.dt");
    const double horizon = cfg.get_double("solve.horizon");
    const int samples = static_cast<int>(cfg.get_int("ensemble.samples"));
    const SeedSpec seed(cfg.get_u64("seed.master"), 0);
    const std::uint64_t base_a = cfg.get_u64("seed.stream_base_a");
    const std::uint64_t base_b = cfg.get_u64("seed.stream_base_b");

    const GridSpec grid = GridSpec::with_mode_bound(m);
    const TestFunction psi = cosine_test_function(GridSpec::with_mode_bound(2), 1);
    SolveConfig scfg;
    scfg.grid = grid;
    scfg.dt = dt;
    scfg.horizon = horizon;
    scfg.record_times = {horizon};

    const auto arm_a = run_ensemble({"pairing", "tail"}, samples, workers,
                                    [&](int member) -> std::vector<double> {
        const SeedSpec ms = seed.with_stream(base_a + static_cast<std::uint64_t>(member));
        const GaussianCoefficients g =
            sample_gaussian_coeffs(grid.mode_bound, ms, GaussianKind::InitialData);
        const MonitoredSolve sol = solve_renormalized(g, alpha, n_trunc, scfg);
        return {pairing(sol.trajectory.states.back(), psi), sol.max_tail_fraction};
    });
    timer.stop("arm_a");

    const auto arm_b = run_ensemble({"pairing"}, samples, workers,
                                    [&](int member) -> std::vector<double> {
        const SeedSpec ms = seed.with_stream(base_b + static_cast<std::uint64_t>(member));
        const GaussianCoefficients gz =
            sample_gaussian_coeffs(grid.mode_bound, ms, GaussianKind::WhiteNoise);
        const SpectralField zeta = white_noise(grid, gz);
        const SpectralField v0(grid);
        const LimitSolve sol = solve_limit_sbbm(zeta, v0, scfg);
        return {pairing(sol.u.states.back(), psi)};
    });
    timer.stop("arm_b");

    res.csv_header = {"arm", "member", "value", "anchor"};
    detail::push_arm_rows(res, "renormalized", arm_a.samples[0], "Theorem 1.3");
    detail::push_arm_rows(res, "limit", arm_b.samples[0], "Theorem 1.3");
    detail::add_two_arm_gates(res, "Theorem 1.3", arm_a.samples[0], arm_b.samples[0]);

    double max_tail = 0.0;
    for (double v : arm_a.samples[1].values) max_tail = std::max(max_tail, v);
    res.summary["max_tail_fraction"] = max_tail;
    res.summary["failures_a"] = arm_a.failures.size();
    res.summary["failures_b"] = arm_b.failures.size();
    return res;
}

inline ExperimentDef def_thm13() {
    ExperimentDef def;
    def.id = "thm13";
    def.description = "convergence in law, Theorem 1.3: renormalized data flow vs limit equation";
    def.anchor = "Theorem 1.3";
    def.schema.add("experiment.id", "thm13", "experiment id")
        .add("model.alpha", "0", "data exponent")
        .add("model.truncation", "64", "data truncation N")
        .add("solve.mode_bound", "256", "solver resolution M")
        .add("solve.dt", "0.002", "time step")
        .add("solve.horizon", "1", "final time")
        .add("ensemble.samples", "400", "members per arm")
        .add("seed.master", "424243", "master seed")
        .add("seed.stream_base_a", "0", "first stream id, renormalized arm")
        .add("seed.stream_base_b", "1000000", "first stream id, limit arm");
    def.run = run_thm13;
    return def;
}

// ---------------------------------------------------------------------------
// thm15: weakly interacting flow vs the closed-form linear limit
// ---------------------------------------------------------------------------

inline ExperimentResult run_thm15(const MaterializedConfig& cfg, int workers) {
    ExperimentResult res;
    res.id = "thm15";
    detail::PhaseTimer timer(res.timers);
    timer.start();

    const double alpha = cfg.get_double("model.alpha");
    const int n_trunc = static_cast<int>(cfg.get_int("model.truncation"));
    const int m = static_cast<int>(cfg.get_int("solve.mode_bound"));
    const double dt = cfg.get_double("solve.dt");
    const double horizon = cfg.get_double("solve.horizon");
    const int samples = static_cast<int>(cfg.get_int("ensemble.samples"));
    const SeedSpec seed(cfg.get_u64("seed.master"), 0);
    const std::uint64_t base_a = cfg.get_u64("seed.stream_base_a");
    const std::uint64_t base_b = cfg.get_u64("seed.stream_base_b");

    const GridSpec grid = GridSpec::with_mode_bound(m);
    const TestFunction psi = cosine_test_function(GridSpec::with_mode_bound(2), 1);
    SolveConfig scfg;
    scfg.grid = grid;
    scfg.dt = dt;
    scfg.horizon = horizon;
    scfg.record_times = {horizon};

    const auto arm_a = run_ensemble({"pairing", "tail"}, samples, workers,
                                    [&](int member) -> std::vector<double> {
        const SeedSpec ms = seed.with_stream(base_a + static_cast<std::uint64_t>(member));
        const GaussianCoefficients g =
            sample_gaussian_coeffs(grid.mode_bound, ms, GaussianKind::InitialData);
        const MonitoredSolve sol = solve_weak(g, alpha, n_trunc, scfg);
        return {pairing(sol.trajectory.states.back(), psi), sol.max_tail_fraction};
    });
    timer.stop("arm_a");

    // independent data and noise substreams within one member stream
    const auto arm_b = run_ensemble({"pairing"}, samples, workers,
                                    [&](int member) -> std::vector<double> {
        const SeedSpec ms = seed.with_stream(base_b + static_cast<std::uint64_t>(member));
        const GaussianCoefficients gu =
            sample_gaussian_coeffs(grid.mode_bound, ms, GaussianKind::InitialData);
        const GaussianCoefficients gz =
            sample_gaussian_coeffs(grid.mode_bound, ms, GaussianKind::WhiteNoise);
        const SpectralField u0 = initial_data(grid, gu, alpha);
        const SpectralField zeta = white_noise(grid, gz);
        return {pairing(linear_limit(u0, zeta, horizon), psi)};
    });
    timer.stop("arm_b");

    res.csv_header = {"arm", "member", "value", "anchor"};
    detail::push_arm_rows(res, "weak", arm_a.samples[0], "Theorem 1.5");
    detail::push_arm_rows(res, "linear-limit", arm_b.samples[0], "Theorem 1.5");
    detail::add_two_arm_gates(res, "Theorem 1.5", arm_a.samples[0], arm_b.samples[0]);

    double max_tail = 0.0;
    for (double v : arm_a.samples[1].values) max_tail = std::max(max_tail, v);
    res.summary["max_tail_fraction"] = max_tail;
    return res;
}

inline ExperimentDef def_thm15() {
    ExperimentDef def;
    def.id = "thm15";
    def.description = "convergence in law, Theorem 1.5: weakly interacting flow vs linear limit";
    def.anchor = "Theorem 1.5";
    def.schema.add("experiment.id", "thm15", "experiment id")
        .add("model.alpha", "0", "data exponent")
        .add("model.truncation", "64", "data truncation N")
        .add("solve.mode_bound", "256", "solver resolution M")
        .add("solve.dt", "0.002", "time step")
        .add("solve.horizon", "1", "final time")
        .add("ensemble.samples", "400", "members per arm")
        .add("seed.master", "424243", "master seed")
        .add("seed.stream_base_a", "0", "first stream id, weak arm")
        .add("seed.stream_base_b", "1000000", "first stream id, linear-limit arm");
    def.run = run_thm15;
    return def;
}

// ---------------------------------------------------------------------------
// appendix-noise: space-time covariance of the quadratic object and the
// It{o} isometry of the sampled convolution
// ---------------------------------------------------------------------------

inline ExperimentResult run_appendix_noise(const MaterializedConfig& cfg, int workers) {
    ExperimentResult res;
    res.id = "appendix-noise";
    detail::PhaseTimer timer(res.timers);
    timer.start();

    const double alpha_app = cfg.get_double("model.appendix_alpha");
    const int n_trunc = static_cast<int>(cfg.get_int("model.truncation"));
    const int m = static_cast<int>(cfg.get_int("solve.mode_bound"));
    const std::vector<double> times = detail::parse_list(cfg.get_string("app.times"));
    const std::vector<long long> iso_modes = detail::parse_int_list(cfg.get_string("app.iso_modes"));
    const int samples = static_cast<int>(cfg.get_int("ensemble.samples"));
    const SeedSpec seed(cfg.get_u64("seed.master"), 0);
    const std::uint64_t stream_base = cfg.get_u64("seed.stream_base");

    const GridSpec grid = GridSpec::with_mode_bound(m);
    const TestFunction psi = cosine_test_function(GridSpec::with_mode_bound(2), 1);

    std::vector<std::string> labels;
    for (double t : times) labels.push_back("quadratic_t" + fmt_g6(t));
    for (long long n : iso_modes) labels.push_back("mode_sq_n" + std::to_string(n));

    const auto ens = run_ensemble(labels, samples, workers, [&](int member) -> std::vector<double> {
        const SeedSpec ms = seed.with_stream(stream_base + static_cast<std::uint64_t>(member));
        const Trajectory path = wiener_convolution_path(grid, alpha_app, n_trunc, times, ms);
        std::vector<double> out;
        ProductWorkspace ws(grid);
        SpectralField sq(grid);
        for (std::size_t k = 0; k < times.size(); ++k) {
            ws.square(path.states[k], sq);
            // Y_N = -P_{!=0}(z^2); the pairing only sees the nonzero modes
            double val = 0.0;
            for (int n = 1; n <= psi.mode_bound(); ++n) {
                const cd ph = psi.coeff(n);
                if (ph == cd(0.0, 0.0)) continue;
                val += 2.0 * ((-sq.coeff(n)) * std::conj(ph)).real();
            }
            out.push_back(val);
        }
        for (long long n : iso_modes)
            out.push_back(std::norm(path.states.front().coeff(static_cast<int>(n))));
        return out;
    });
    timer.stop("paths");

    res.csv_header = {"kind", "t1", "t2", "n", "value", "anchor"};
    // covariance targets (t1 ^ t2)^2 * sum_{n != 0} |psihat|^2 = (t1 ^ t2)^2 / 2
    const std::vector<std::pair<std::size_t, std::size_t>> pairs = {{0, 0}, {0, 1}, {1, 2}};
    for (const auto& [i, j] : pairs) {
        if (i >= times.size() || j >= times.size()) continue;
        const double target = appendix_limit_covariance(times[i], times[j], psi, psi);
        double est = 0.0, se = 0.0;
        if (i == j) {
            const EnsembleSummary s = moment_summary(ens.samples[i]);
            est = s.variance;
            se = s.variance_se;
        } else {
            const detail::CovEstimate ce =
                detail::covariance_estimate(ens.samples[i].values, ens.samples[j].values);
            est = ce.cov;
            se = ce.se;
        }
        const double exact_finite = appendix_finite_covariance_pairing(
            alpha_app, n_trunc, times[i], times[j], psi, psi);
        res.csv_rows.push_back({"mc_covariance", fmt_g17(times[i]), fmt_g17(times[j]), "0",
                                fmt_g17(est), "Proposition A.1"});
        res.csv_rows.push_back({"limit_covariance", fmt_g17(times[i]), fmt_g17(times[j]), "0",
                                fmt_g17(target), "Eq. (sto2c)"});
        res.csv_rows.push_back({"finite_covariance", fmt_g17(times[i]), fmt_g17(times[j]), "0",
                                fmt_g17(exact_finite), "Proposition A.1"});
        const std::string tag = "t=" + fmt_g6(times[i]) + ",s=" + fmt_g6(times[j]);
        res.gates.push_back(make_gate("limit-covariance-" + tag, "Eq. (sto2c)",
                                      "|MC - limit target| / SE", std::abs(est - target) / se,
                                      "<=", 3.0));
        // diagnostic: the sampler matches its own exact finite-N covariance
        res.gates.push_back(make_gate("finite-covariance-" + tag, "Proposition A.1",
                                      "|MC - exact finite-N| / SE",
                                      std::abs(est - exact_finite) / se, "<=", 3.0));
        res.summary["mc_cov_" + tag] = est;
        res.summary["mc_se_" + tag] = se;
        res.summary["limit_cov_" + tag] = target;
        res.summary["finite_cov_" + tag] = exact_finite;
    }

    // It{o} isometry per mode at the first time node
    const double c = renorm_constant(1.0 - alpha_app, n_trunc);
    for (std::size_t k = 0; k < iso_modes.size(); ++k) {
        const long long n = iso_modes[k];
        const EnsembleSummary s = moment_summary(ens.samples[times.size() + k]);
        const double exact = c * c * std::norm(phi_symbol(n)) *
                             std::pow(japanese_bracket(static_cast<double>(n)), 2.0 * alpha_app) *
                             times.front();
        res.csv_rows.push_back({"mode_variance_mc", fmt_g17(times.front()), fmt_g17(times.front()),
                                std::to_string(n), fmt_g17(s.mean), "Eq. (sto4)"});
        res.csv_rows.push_back({"mode_variance_exact", fmt_g17(times.front()),
                                fmt_g17(times.front()), std::to_string(n), fmt_g17(exact),
                                "Eq. (sto4)"});
        res.gates.push_back(make_gate("isometry-n=" + std::to_string(n), "Eq. (sto4)",
                                      "|MC mode variance - isometry| / SE",
                                      std::abs(s.mean - exact) / s.mean_se, "<=", 3.0));
    }
    timer.stop("reduce");
    return res;
}

inline ExperimentDef def_appendix_noise() {
    ExperimentDef def;
    def.id = "appendix-noise";
    def.description = "Proposition A.1: space-time covariance of the quadratic noise object";
    def.anchor = "Proposition A.1";
    def.schema.add("experiment.id", "appendix-noise", "experiment id")
        .add("model.appendix_alpha", "0.75", "noise smoothing exponent")
        .add("model.truncation", "128", "noise truncation N")
        .add("solve.mode_bound", "256", "grid resolution M (holds the squared modes)")
        .add("app.times", "1,2,3", "path sample times")
        .add("app.iso_modes", "1,5,32,128", "modes for the isometry check")
        .add("ensemble.samples", "20000", "sampled paths")
        .add("seed.master", "424243", "master seed")
        .add("seed.stream_base", "0", "first member stream id");
    def.run = run_appendix_noise;
    return def;
}

// ---------------------------------------------------------------------------
// appendix-thm: weakly interacting stochastic flow vs its linear limit
// ---------------------------------------------------------------------------

inline ExperimentResult run_appendix_thm(const MaterializedConfig& cfg, int workers) {
    ExperimentResult res;
    res.id = "appendix-thm";
    detail::PhaseTimer timer(res.timers);
    timer.start();

    const double alpha_app = cfg.get_double("model.appendix_alpha");
    const int n_trunc = static_cast<int>(cfg.get_int("model.truncation"));
    const int m = static_cast<int>(cfg.get_int("solve.mode_bound"));
    const double dt = cfg.get_double("solve.dt");
    const double horizon = cfg.get_double("solve.horizon");
    const int samples = static_cast<int>(cfg.get_int("ensemble.samples"));
    const double v0_amp = cfg.get_double("data.v0_amplitude");
    const SeedSpec seed(cfg.get_u64("seed.master"), 0);
    const std::uint64_t base_a = cfg.get_u64("seed.stream_base_a");
    const std::uint64_t base_b = cfg.get_u64("seed.stream_base_b");

    const GridSpec grid = GridSpec::with_mode_bound(m);
    const TestFunction psi = cosine_test_function(GridSpec::with_mode_bound(2), 1);
    SpectralField v0(grid);
    v0.set_mode_pair(1, cd(0.5 * v0_amp, 0.0));  // v0 = v0_amplitude * cos x

    SolveConfig scfg;
    scfg.grid = grid;
    scfg.dt = dt;
    scfg.horizon = horizon;
    scfg.record_times = {horizon};

    const auto arm_a = run_ensemble({"pairing"}, samples, workers,
                                    [&](int member) -> std::vector<double> {
        const SeedSpec ms = seed.with_stream(base_a + static_cast<std::uint64_t>(member));
        const AppendixSolve sol =
            appendix_solve(ms, alpha_app, n_trunc, AppendixEquation::WeakInteraction, scfg, &v0);
        return {pairing(sol.trajectory.states.back(), psi)};
    });
    timer.stop("arm_a");

    const auto arm_b = run_ensemble({"pairing"}, samples, workers,
                                    [&](int member) -> std::vector<double> {
        const SeedSpec ms = seed.with_stream(base_b + static_cast<std::uint64_t>(member));
        const AppendixSolve sol =
            appendix_solve(ms, alpha_app, n_trunc, AppendixEquation::LinearLimit, scfg, &v0);
        return {pairing(sol.trajectory.states.back(), psi)};
    });
    timer.stop("arm_b");

    res.csv_header = {"arm", "member", "value", "anchor"};
    detail::push_arm_rows(res, "weak-noise", arm_a.samples[0], "Theorem A.4");
    detail::push_arm_rows(res, "linear-limit", arm_b.samples[0], "Theorem A.4");
    detail::add_two_arm_gates(res, "Theorem A.4", arm_a.samples[0], arm_b.samples[0]);
    return res;
}

inline ExperimentDef def_appendix_thm() {
    ExperimentDef def;
    def.id = "appendix-thm";
    def.description = "Theorem A.4: weakly interacting stochastic flow vs its linear limit";
    def.anchor = "Theorem A.4";
    def.schema.add("experiment.id", "appendix-thm", "experiment id")
        .add("model.appendix_alpha", "0.75", "noise smoothing exponent")
        .add("model.truncation", "64", "noise truncation N")
        .add("solve.mode_bound", "256", "solver resolution M")
        .add("solve.dt", "0.002", "time step")
        .add("solve.horizon", "1", "final time")
        .add("ensemble.samples", "400", "members per arm")
        .add("data.v0_amplitude", "0.5", "deterministic data amplitude (cos x profile)")
        .add("seed.master", "424243", "master seed")
        .add("seed.stream_base_a", "0", "first stream id, weak arm")
        .add("seed.stream_base_b", "1000000", "first stream id, limit arm");
    def.run = run_appendix_thm;
    return def;
}

}  // namespace bbm
