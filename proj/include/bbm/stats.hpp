#pragma once

// Monte Carlo orchestration and the statistical tests that turn the
// convergence-in-law statements into desk-scale checks: moment estimates with
// standard errors, fourth-moment (Gaussianity) diagnostics, one- and
// two-sample Kolmogorov-Smirnov tests, scaling-law fits, and path increment
// regularity. Ensemble members are embarrassingly parallel; every reduction
// is a fixed pairwise tree so results are bitwise independent of the worker
// count and scheduling order.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "bbm/spectral.hpp"

namespace bbm {

struct EnsembleError : std::runtime_error {
    explicit EnsembleError(const std::string& what) : std::runtime_error(what) {}
};

// Order-fixed pairwise tree sum: associative reduction with O(log n) error
// growth, identical for any worker count.
inline double pairwise_sum(const double* x, std::size_t n) {
    if (n <= 32) {
        long double acc = 0.0L;
        for (std::size_t i = 0; i < n; ++i) acc += x[i];
        return static_cast<double>(acc);
    }
    const std::size_t half = n / 2;
    return pairwise_sum(x, half) + pairwise_sum(x + half, n - half);
}

inline double pairwise_sum(const std::vector<double>& x) { return pairwise_sum(x.data(), x.size()); }

// ---------------------------------------------------------------------------
// Ensemble execution
// ---------------------------------------------------------------------------

struct ObservableSample {
    std::string label;
    std::vector<double> values;
};

struct MemberFailure {
    int member = 0;
    std::string what;
};

struct EnsembleResult {
    std::vector<ObservableSample> samples;
    std::vector<MemberFailure> failures;
};

inline int resolve_workers(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs `member(i)` for i in [0, count), each expected to return one value per
// label. Member output lands in index-addressed slots, so the result is
// bitwise independent of workers and scheduling. Individual member failures
// (exceptions or non-finite values) are collected; more than 0.1% of them
// fails the run, since silently dropping members would bias laws.
inline EnsembleResult run_ensemble(const std::vector<std::string>& labels, int count, int workers,
                                   const std::function<std::vector<double>(int)>& member) {
    if (count < 2) throw std::invalid_argument("run_ensemble: need at least 2 members");
    const std::size_t nobs = labels.size();
    std::vector<std::vector<double>> slots(static_cast<std::size_t>(count));
    std::vector<std::string> errors(static_cast<std::size_t>(count));

    const int nw = std::min(resolve_workers(workers), count);
    std::atomic<int> next{0};
    auto work = [&]() {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= count) return;
            try {
                std::vector<double> v = member(i);
                if (v.size() != nobs) throw std::runtime_error("observable count mismatch");
                for (double x : v)
                    if (!std::isfinite(x)) throw std::runtime_error("non-finite observable");
                slots[static_cast<std::size_t>(i)] = std::move(v);
            } catch (const std::exception& e) {
                errors[static_cast<std::size_t>(i)] = e.what()[0] ? e.what() : "unknown failure";
                if (errors[static_cast<std::size_t>(i)].empty())
                    errors[static_cast<std::size_t>(i)] = "unknown failure";
            }
        }
    };
    if (nw <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(nw));
        for (int w = 0; w < nw; ++w) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }

    EnsembleResult out;
    for (int i = 0; i < count; ++i)
        if (!errors[static_cast<std::size_t>(i)].empty())
            out.failures.push_back({i, errors[static_cast<std::size_t>(i)]});
    if (static_cast<double>(out.failures.size()) > 0.001 * static_cast<double>(count)) {
        std::string what = "run_ensemble: " + std::to_string(out.failures.size()) +
                           " member failures out of " + std::to_string(count);
        if (!out.failures.empty()) what += "; first: " + out.failures.front().what;
        throw EnsembleError(what);
    }
    if (!out.failures.empty()) {
        // below threshold: drop failed members but keep the record
        out.samples.resize(nobs);
        for (std::size_t k = 0; k < nobs; ++k) out.samples[k].label = labels[k];
        for (int i = 0; i < count; ++i) {
            if (!errors[static_cast<std::size_t>(i)].empty()) continue;
            for (std::size_t k = 0; k < nobs; ++k)
                out.samples[k].values.push_back(slots[static_cast<std::size_t>(i)][k]);
        }
        return out;
    }
    out.samples.resize(nobs);
    for (std::size_t k = 0; k < nobs; ++k) {
        out.samples[k].label = labels[k];
        out.samples[k].values.resize(static_cast<std::size_t>(count));
        for (int i = 0; i < count; ++i)
            out.samples[k].values[static_cast<std::size_t>(i)] = slots[static_cast<std::size_t>(i)][k];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Moment estimation
// ---------------------------------------------------------------------------

struct EnsembleSummary {
    std::size_t count = 0;
    double mean = 0.0;
    double mean_se = 0.0;
    double variance = 0.0;  // unbiased
    double variance_se = 0.0;
    double fourth_central = 0.0;
    double excess_kurtosis = 0.0;
    double kurtosis_se = 0.0;  // jackknife
    bool kurtosis_defined = false;
};

inline EnsembleSummary moment_summary(const ObservableSample& s) {
    const std::size_t n = s.values.size();
    if (n < 2) throw std::invalid_argument("moment_summary: need at least 2 values");
    const double nd = static_cast<double>(n);
    EnsembleSummary out;
    out.count = n;
    out.mean = pairwise_sum(s.values) / nd;

    std::vector<double> c(n), c2(n), c3(n), c4(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double y = s.values[i] - out.mean;
        c[i] = y;
        c2[i] = y * y;
        c3[i] = c2[i] * y;
        c4[i] = c2[i] * c2[i];
    }
    const double s1 = pairwise_sum(c);
    const double s2 = pairwise_sum(c2);
    const double s3 = pairwise_sum(c3);
    const double s4 = pairwise_sum(c4);

    const double m2 = s2 / nd;
    const double m4 = s4 / nd;
    out.variance = s2 / (nd - 1.0);
    out.mean_se = std::sqrt(std::max(out.variance, 0.0) / nd);
    out.fourth_central = m4;
    if (n >= 4) {
        const double v = std::max(m4 - m2 * m2 * (nd - 3.0) / (nd - 1.0), 0.0);
        out.variance_se = std::sqrt(v / nd);
    }

    if (m2 <= 0.0) {
        out.kurtosis_defined = false;  // degenerate sample
        return out;
    }
    out.excess_kurtosis = m4 / (m2 * m2) - 3.0;
    out.kurtosis_defined = true;

    if (n >= 8) {
        // leave-one-out kurtosis from power sums of the centered data
        std::vector<double> loo(n);
        const double nm1 = nd - 1.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double y = c[i];
            const double mu = (s1 - y) / nm1;  // mean shift of the loo sample
            const double r2 = (s2 - c2[i]) / nm1;
            const double r3 = (s3 - c3[i]) / nm1;
            const double r4 = (s4 - c4[i]) / nm1;
            const double m2i = r2 - mu * mu;
            const double m4i = r4 - 4.0 * mu * r3 + 6.0 * mu * mu * r2 - 3.0 * mu * mu * mu * mu;
            loo[i] = (m2i > 0.0) ? m4i / (m2i * m2i) - 3.0 : 0.0;
        }
        const double loo_mean = pairwise_sum(loo) / nd;
        long double acc = 0.0L;
        for (std::size_t i = 0; i < n; ++i) {
            const long double d = loo[i] - loo_mean;
            acc += d * d;
        }
        out.kurtosis_se = std::sqrt(static_cast<double>(acc) * (nd - 1.0) / nd);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Kolmogorov-Smirnov machinery
// ---------------------------------------------------------------------------

// Kolmogorov survival function Q(z) = 2 sum_k (-1)^{k-1} exp(-2 k^2 z^2).
inline double kolmogorov_q(double z) {
    if (z <= 0.0) return 1.0;
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * static_cast<double>(k) * k * z * z);
        sum += (k % 2 == 1 ? term : -term);
        if (term < 1e-16) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

inline double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

// One-sample KS against the normal with the sample's own mean and variance
// (finite-size correction by Stephens). With estimated parameters the
// p-value is conservative for a "passes as Gaussian" gate.
inline KsResult ks_test_normal(const ObservableSample& s, double mean, double sd) {
    std::vector<double> x = s.values;
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double f = std_normal_cdf((x[i] - mean) / sd);
        d = std::max(d, std::abs(f - static_cast<double>(i + 1) / n));
        d = std::max(d, std::abs(f - static_cast<double>(i) / n));
    }
    KsResult out;
    out.statistic = d;
    out.p_value = kolmogorov_q(d * (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)));
    return out;
}

// Fourth-moment diagnostics of a scalar pairing sample: excess kurtosis with
// SE plus a KS test against the matched normal.
struct GaussianizationRecord {
    EnsembleSummary summary;
    KsResult ks;
};

inline GaussianizationRecord gaussianization_test(const ObservableSample& s) {
    GaussianizationRecord rec;
    rec.summary = moment_summary(s);
    if (!rec.summary.kurtosis_defined)
        throw std::invalid_argument("gaussianization_test: degenerate sample");
    rec.ks = ks_test_normal(s, rec.summary.mean, std::sqrt(rec.summary.variance));
    return rec;
}

// Two-sample KS with the asymptotic p-value.
inline KsResult ks_two_sample(const ObservableSample& a, const ObservableSample& b) {
    if (a.values.empty() || b.values.empty())
        throw std::invalid_argument("ks_two_sample: empty sample");
    std::vector<double> x = a.values, y = b.values;
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    const double nx = static_cast<double>(x.size());
    const double ny = static_cast<double>(y.size());
    double d = 0.0;
    std::size_t i = 0, j = 0;
    while (i < x.size() && j < y.size()) {
        const double v = std::min(x[i], y[j]);
        while (i < x.size() && x[i] <= v) ++i;
        while (j < y.size() && y[j] <= v) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / nx - static_cast<double>(j) / ny));
    }
    KsResult out;
    out.statistic = d;
    const double ne = std::sqrt(nx * ny / (nx + ny));
    out.p_value = kolmogorov_q(d * (ne + 0.12 + 0.11 / ne));
    return out;
}

// ---------------------------------------------------------------------------
// Scaling fits
// ---------------------------------------------------------------------------

enum class ScalingModel { PowerLaw, LogLinear };

struct ScalingFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

// Least squares of log(value) on log(N) (power law) or value on log(N).
inline ScalingFit scaling_fit(const std::vector<std::pair<double, double>>& points,
                              ScalingModel model) {
    if (points.size() < 4) throw std::invalid_argument("scaling_fit: need at least 4 points");
    std::vector<double> xs, ys;
    for (const auto& [n, v] : points) {
        if (n <= 0.0) throw std::invalid_argument("scaling_fit: N must be positive");
        xs.push_back(std::log(n));
        if (model == ScalingModel::PowerLaw) {
            if (v <= 0.0)
                throw std::invalid_argument("scaling_fit: power law needs positive values");
            ys.push_back(std::log(v));
        } else {
            ys.push_back(v);
        }
    }
    const double n = static_cast<double>(xs.size());
    const double mx = pairwise_sum(xs) / n;
    const double my = pairwise_sum(ys) / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double dx = xs[i] - mx, dy = ys[i] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    ScalingFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    return fit;
}

// ---------------------------------------------------------------------------
// Increment regularity
// ---------------------------------------------------------------------------

struct IncrementRecord {
    std::vector<double> lags;
    std::vector<double> mean_sq_increment;  // E ||X(t+h) - X(t)||^2_{H^s}
    double fitted_two_theta = 0.0;
};

// Empirical second moments of path increments per lag plus the log-log
// fitted Hoelder exponent 2 theta.
inline IncrementRecord increment_regularity(const std::vector<Trajectory>& paths, double s,
                                            const std::vector<double>& lags) {
    if (paths.empty()) throw std::invalid_argument("increment_regularity: no paths");
    const Trajectory& first = paths.front();
    first.validate();
    if (first.times.size() < 2) throw std::invalid_argument("increment_regularity: short path");
    const double dt = first.times[1] - first.times[0];
    for (std::size_t j = 1; j < first.times.size(); ++j)
        if (std::abs((first.times[j] - first.times[j - 1]) - dt) > 1e-9 * std::max(1.0, dt))
            throw std::invalid_argument("increment_regularity: non-uniform path grid");

    IncrementRecord rec;
    rec.lags = lags;
    for (double h : lags) {
        const double steps = h / dt;
        const auto k = static_cast<std::size_t>(std::llround(steps));
        if (k == 0 || std::abs(steps - static_cast<double>(k)) > 1e-9)
            throw std::invalid_argument("increment_regularity: lag misaligned with grid");
        long double acc = 0.0L;
        std::size_t cnt = 0;
        for (const Trajectory& p : paths) {
            for (std::size_t j = 0; j + k < p.times.size(); ++j) {
                SpectralField diff = p.states[j + k];
                for (int n = -diff.mode_bound(); n <= diff.mode_bound(); ++n)
                    diff.set_coeff(n, diff.coeff(n) - p.states[j].coeff(n));
                const double v = h_norm(diff, s);
                acc += static_cast<long double>(v) * v;
                ++cnt;
            }
        }
        rec.mean_sq_increment.push_back(cnt ? static_cast<double>(acc / cnt) : 0.0);
    }
    bool all_positive = true;
    for (double v : rec.mean_sq_increment) all_positive = all_positive && v > 0.0;
    if (all_positive && lags.size() >= 2) {
        std::vector<std::pair<double, double>> pts;
        for (std::size_t i = 0; i < lags.size(); ++i)
            pts.push_back({lags[i], rec.mean_sq_increment[i]});
        if (pts.size() >= 4) {
            rec.fitted_two_theta = scaling_fit(pts, ScalingModel::PowerLaw).slope;
        } else {
            const double num = std::log(rec.mean_sq_increment.back() /
                                        rec.mean_sq_increment.front());
            const double den = std::log(lags.back() / lags.front());
            rec.fitted_two_theta = num / den;
        }
    }
    return rec;
}

}  // namespace bbm
