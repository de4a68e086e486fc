#pragma once

// Observables from event records: histograms, the joint arrival-time
// distribution and its marginals, fringe visibility, two-sample KS tests,
// chi-square goodness of fit and bootstrap noise estimates.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "dynamics.hpp"
#include "random.hpp"

namespace arrival {

class StatsError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Uniform 1D histogram; values outside [lo, hi) are counted separately.
struct Histogram {
    double lo = 0.0, hi = 1.0;
    std::vector<double> counts;
    double outside = 0.0;

    Histogram() = default;
    Histogram(double lo_, double hi_, std::size_t bins) : lo(lo_), hi(hi_), counts(bins, 0.0) {
        if (!(hi > lo) || bins == 0) throw StatsError("histogram needs hi > lo and at least one bin");
    }
    std::size_t bins() const { return counts.size(); }
    double width() const { return (hi - lo) / static_cast<double>(counts.size()); }
    double left_edge(std::size_t i) const { return lo + static_cast<double>(i) * width(); }
    double centre(std::size_t i) const { return lo + (static_cast<double>(i) + 0.5) * width(); }
    /// Bin index or -1 when outside.
    long index(double x) const {
        if (!(x >= lo) || !(x < hi)) return -1;
        const auto i = static_cast<std::size_t>((x - lo) / width());
        return static_cast<long>(std::min(i, counts.size() - 1));
    }
    void add(double x, double w = 1.0) {
        const long i = index(x);
        if (i < 0) outside += w;
        else counts[static_cast<std::size_t>(i)] += w;
    }
    double total() const { return std::accumulate(counts.begin(), counts.end(), 0.0); }
};

/// Empirical quantile with linear interpolation (q in [0, 1]).
inline double quantile(std::vector<double> v, double q) {
    if (v.empty()) throw StatsError("quantile of an empty sample");
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto i = static_cast<std::size_t>(std::floor(pos));
    if (i + 1 >= v.size()) return v.back();
    return v[i] + (pos - static_cast<double>(i)) * (v[i + 1] - v[i]);
}

struct Range {
    double lo, hi;
};

/// The interval holding the central `fraction` of the sample, widened a
/// hair so that the upper quantile itself falls inside.
inline Range central_range(const std::vector<double>& v, double fraction = 0.995) {
    const double tail = 0.5 * (1.0 - fraction);
    double lo = quantile(v, tail), hi = quantile(v, 1.0 - tail);
    if (!(hi > lo)) {
        const double pad = std::max(std::abs(lo) * 1e-9, 1e-12);
        lo -= pad;
        hi += pad;
    }
    return {lo, std::nextafter(hi, std::numeric_limits<double>::infinity())};
}

inline Histogram histogram(const std::vector<double>& v, std::size_t bins = 200, double fraction = 0.995) {
    const Range r = central_range(v, fraction);
    Histogram h(r.lo, r.hi, bins);
    for (double x : v) h.add(x);
    return h;
}

struct Binning {
    std::size_t bins = 200;
    double central_fraction = 0.995;
    std::optional<Range> t_left, t_right;  // explicit ranges override quantiles
};

/// Joint histogram over (t_L, t_R). Marginals are its row and column sums.
struct JointDistribution {
    Histogram axis_left, axis_right;  // edges only; counts unused
    std::vector<double> joint;        // row-major, [left bin][right bin]
    Histogram marginal_left, marginal_right;
    std::size_t kept = 0, lost = 0;
    double outside = 0.0;  // kept events with a time outside the ranges

    double at(std::size_t i, std::size_t j) const { return joint[i * axis_right.bins() + j]; }
    double in_range() const { return std::accumulate(joint.begin(), joint.end(), 0.0); }
};

inline std::vector<double> left_times(const std::vector<DetectionRecord>& r) {
    std::vector<double> v;
    for (const auto& e : r)
        if (e.kept()) v.push_back(e.t_left);
    return v;
}
inline std::vector<double> right_times(const std::vector<DetectionRecord>& r) {
    std::vector<double> v;
    for (const auto& e : r)
        if (e.kept()) v.push_back(e.t_right);
    return v;
}

inline JointDistribution build_joint(const std::vector<DetectionRecord>& records, const Binning& b = {}) {
    JointDistribution J;
    const auto tl = left_times(records), tr = right_times(records);
    J.kept = tl.size();
    J.lost = records.size() - J.kept;
    if (J.kept == 0) throw StatsError("no kept events: cannot build a joint distribution from zero kept events");
    const Range rl = b.t_left ? *b.t_left : central_range(tl, b.central_fraction);
    const Range rr = b.t_right ? *b.t_right : central_range(tr, b.central_fraction);
    J.axis_left = Histogram(rl.lo, rl.hi, b.bins);
    J.axis_right = Histogram(rr.lo, rr.hi, b.bins);
    J.joint.assign(b.bins * b.bins, 0.0);
    for (std::size_t k = 0; k < tl.size(); ++k) {
        const long i = J.axis_left.index(tl[k]), j = J.axis_right.index(tr[k]);
        if (i < 0 || j < 0) {
            J.outside += 1.0;
            continue;
        }
        J.joint[static_cast<std::size_t>(i) * b.bins + static_cast<std::size_t>(j)] += 1.0;
    }
    J.marginal_left = Histogram(rl.lo, rl.hi, b.bins);
    J.marginal_right = Histogram(rr.lo, rr.hi, b.bins);
    for (std::size_t i = 0; i < b.bins; ++i)
        for (std::size_t j = 0; j < b.bins; ++j) {
            J.marginal_left.counts[i] += J.at(i, j);
            J.marginal_right.counts[j] += J.at(i, j);
        }
    return J;
}

/// L1 distance between the normalised joint and the outer product of its
/// normalised marginals.
inline double factorization_l1(const JointDistribution& J) {
    const double n = J.in_range();
    if (!(n > 0)) throw StatsError("empty joint distribution");
    double d = 0.0;
    const std::size_t nl = J.axis_left.bins(), nr = J.axis_right.bins();
    for (std::size_t i = 0; i < nl; ++i)
        for (std::size_t j = 0; j < nr; ++j)
            d += std::abs(J.at(i, j) / n - J.marginal_left.counts[i] / n * J.marginal_right.counts[j] / n);
    return d;
}

/// L1 distance between two joints on the same bins, each normalised.
inline double joint_l1(const JointDistribution& A, const JointDistribution& B) {
    if (A.joint.size() != B.joint.size()) throw StatsError("joint distributions have different binning");
    const double na = A.in_range(), nb = B.in_range();
    double d = 0.0;
    for (std::size_t k = 0; k < A.joint.size(); ++k) d += std::abs(A.joint[k] / na - B.joint[k] / nb);
    return d;
}

// ---------------------------------------------------------------------------
// Visibility

/// Gaussian kernel smoothing; the kernel is renormalised near the edges.
inline std::vector<double> smooth(const std::vector<double>& v, double bandwidth_bins) {
    if (bandwidth_bins <= 0) return v;
    const int half = static_cast<int>(std::ceil(4.0 * bandwidth_bins));
    std::vector<double> k(2 * half + 1);
    for (int i = -half; i <= half; ++i) k[i + half] = std::exp(-0.5 * i * i / (bandwidth_bins * bandwidth_bins));
    std::vector<double> out(v.size());
    const int n = static_cast<int>(v.size());
    for (int i = 0; i < n; ++i) {
        double s = 0.0, w = 0.0;
        for (int j = std::max(0, i - half); j <= std::min(n - 1, i + half); ++j) {
            s += k[j - i + half] * v[j];
            w += k[j - i + half];
        }
        out[i] = s / w;
    }
    return out;
}

struct Extrema {
    std::vector<std::size_t> maxima, minima;
};

/// Alternating extrema, each confirmed only once the signal has moved away
/// from it by more than `delta`.
inline Extrema find_extrema(const std::vector<double>& s, double delta) {
    Extrema e;
    if (s.empty()) return e;
    std::size_t imax = 0, imin = 0;
    double vmax = s[0], vmin = s[0];
    int looking = 0;  // 0 unknown, +1 for a maximum, -1 for a minimum
    for (std::size_t i = 1; i < s.size(); ++i) {
        if (s[i] > vmax) {
            vmax = s[i];
            imax = i;
        }
        if (s[i] < vmin) {
            vmin = s[i];
            imin = i;
        }
        if (looking >= 0 && s[i] < vmax - delta) {
            if (looking == 1 || imax > 0) e.maxima.push_back(imax);
            looking = -1;
            vmin = s[i];
            imin = i;
        } else if (looking <= 0 && s[i] > vmin + delta) {
            if (looking == -1 || imin > 0) e.minima.push_back(imin);
            looking = 1;
            vmax = s[i];
            imax = i;
        }
    }
    return e;
}

struct VisibilityOptions {
    double bandwidth_bins = 2.0;
    /// Extrema must stand out by this many standard deviations of Poisson
    /// noise in the smoothed counts.
    double noise_sigmas = 3.0;
    std::size_t window_lo = 0, window_hi = 0;  // bin window [lo, hi); hi = 0 -> all bins
};

/// (mean maxima - mean minima) / (mean maxima + mean minima) of the
/// smoothed histogram inside the window. Throws when fewer than three
/// extrema (with at least one of each kind) are found; a flat signal gives 0.
inline double visibility(const std::vector<double>& counts, const VisibilityOptions& o = {}) {
    const std::size_t hi = o.window_hi ? std::min(o.window_hi, counts.size()) : counts.size();
    if (o.window_lo >= hi) throw StatsError("empty visibility window");
    const auto s_all = smooth(counts, o.bandwidth_bins);
    const std::vector<double> s(s_all.begin() + static_cast<long>(o.window_lo), s_all.begin() + static_cast<long>(hi));
    const double smax = *std::max_element(s.begin(), s.end()), smin = *std::min_element(s.begin(), s.end());
    if (!(smax > 0)) throw StatsError("visibility undefined: no counts in window");
    if (smax - smin <= 1e-12 * smax) return 0.0;
    // variance of a Gaussian-smoothed Poisson count ~ mean / (2 sqrt(pi) h)
    const double n_eff = o.bandwidth_bins > 0 ? 2.0 * std::sqrt(std::numbers::pi) * o.bandwidth_bins : 1.0;
    const double delta = o.noise_sigmas * std::sqrt(smax / n_eff);
    const Extrema e = find_extrema(s, delta);
    if (e.maxima.size() + e.minima.size() < 3 || e.maxima.empty() || e.minima.empty())
        throw StatsError("visibility undefined: fewer than 3 fringe extrema (found " +
                         std::to_string(e.maxima.size() + e.minima.size()) + ")");
    double a = 0.0, b = 0.0;
    for (auto i : e.maxima) a += s[i];
    for (auto i : e.minima) b += s[i];
    a /= static_cast<double>(e.maxima.size());
    b /= static_cast<double>(e.minima.size());
    return (a - b) / (a + b);
}

inline double visibility(const Histogram& h, const VisibilityOptions& o = {}) { return visibility(h.counts, o); }

/// Pi(t_R | t_L in [lo, hi)) as counts over the right axis.
inline std::vector<double> conditional_right(const JointDistribution& J, double t_lo, double t_hi) {
    std::vector<double> out(J.axis_right.bins(), 0.0);
    bool any_row = false;
    for (std::size_t i = 0; i < J.axis_left.bins(); ++i) {
        const double c = J.axis_left.centre(i);
        if (c < t_lo || c >= t_hi) continue;
        any_row = true;
        for (std::size_t j = 0; j < out.size(); ++j) out[j] += J.at(i, j);
    }
    if (!any_row || std::accumulate(out.begin(), out.end(), 0.0) == 0.0)
        throw StatsError("empty conditioning slice");
    return out;
}

inline double conditional_visibility(const JointDistribution& J, double t_lo, double t_hi,
                                     const VisibilityOptions& o = {}) {
    return visibility(conditional_right(J, t_lo, t_hi), o);
}

// ---------------------------------------------------------------------------
// Kolmogorov-Smirnov

/// Q_KS(lambda) = 2 sum_k (-1)^(k-1) exp(-2 k^2 lambda^2).
inline double kolmogorov_q(double lambda) {
    if (lambda < 1e-3) return 1.0;
    double s = 0.0;
    for (int k = 1; k <= 200; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        s += (k % 2 ? 1.0 : -1.0) * term;
        if (term < 1e-16) break;
    }
    return std::clamp(2.0 * s, 0.0, 1.0);
}

struct KsResult {
    double statistic = 0.0;
    double critical = 0.0;  // at alpha
    double p_value = 1.0;
    bool reject = false;
};

inline KsResult ks_distance(std::vector<double> a, std::vector<double> b, double alpha = 0.01) {
    if (a.empty() || b.empty()) throw StatsError("KS test needs two nonempty samples");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] == x) ++i;
        while (j < b.size() && b[j] == x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    KsResult r;
    r.statistic = d;
    const double ne = na * nb / (na + nb);
    r.critical = std::sqrt(-0.5 * std::log(alpha / 2.0)) / std::sqrt(ne);
    const double sq = std::sqrt(ne);
    r.p_value = kolmogorov_q((sq + 0.12 + 0.11 / sq) * d);
    r.reject = d > r.critical;
    return r;
}

// ---------------------------------------------------------------------------
// Chi-square goodness of fit

struct Chi2Result {
    double statistic = 0.0;
    double dof = 0.0;
    double p_value = 1.0;
};

/// Pearson chi-square of observed counts against expected counts. Bins with
/// expectation below `min_expected` are pooled with their neighbours.
inline Chi2Result chi2_gof(const std::vector<double>& observed, const std::vector<double>& expected,
                           double min_expected = 5.0, std::size_t fitted_params = 0) {
    if (observed.size() != expected.size() || observed.empty()) throw StatsError("chi-square needs matching bins");
    std::vector<double> o, e;
    double ao = 0.0, ae = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        ao += observed[i];
        ae += expected[i];
        if (ae >= min_expected) {
            o.push_back(ao);
            e.push_back(ae);
            ao = ae = 0.0;
        }
    }
    if (ae > 0 || ao > 0) {
        if (e.empty()) throw StatsError("too few expected counts for chi-square");
        o.back() += ao;
        e.back() += ae;
    }
    Chi2Result r;
    for (std::size_t i = 0; i < o.size(); ++i) r.statistic += (o[i] - e[i]) * (o[i] - e[i]) / e[i];
    r.dof = static_cast<double>(o.size()) - 1.0 - static_cast<double>(fitted_params);
    if (r.dof < 1) throw StatsError("chi-square has no degrees of freedom");
    r.p_value = boost::math::cdf(boost::math::complement(boost::math::chi_squared(r.dof), r.statistic));
    return r;
}

// ---------------------------------------------------------------------------
// Bootstrap

/// Resample indices [0, n) with replacement; resample b uses its own
/// counter-based substream.
inline std::vector<std::size_t> bootstrap_indices(std::size_t n, std::uint64_t seed, std::size_t b) {
    RandomStream rng(seed, b, stream_tag::bootstrap);
    std::vector<std::size_t> idx(n);
    for (auto& i : idx) i = std::min(n - 1, static_cast<std::size_t>(rng.uniform() * static_cast<double>(n)));
    return idx;
}

template <class T>
std::vector<T> resample(const std::vector<T>& v, const std::vector<std::size_t>& idx) {
    std::vector<T> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(v[i]);
    return out;
}

struct BootstrapSummary {
    double mean = 0.0, sd = 0.0;
    std::size_t failures = 0;  // resamples where the statistic was undefined
};

/// Runs `stat` on `resamples` bootstrap copies of `records`. Statistics that
/// throw StatsError are counted as failures and skipped.
template <class Stat>
BootstrapSummary bootstrap(const std::vector<DetectionRecord>& records, Stat&& stat, std::size_t resamples = 200,
                           std::uint64_t seed = 1) {
    std::vector<double> vals;
    BootstrapSummary s;
    for (std::size_t b = 0; b < resamples; ++b) {
        const auto rs = resample(records, bootstrap_indices(records.size(), seed, b));
        try {
            vals.push_back(stat(rs));
        } catch (const StatsError&) {
            ++s.failures;
        }
    }
    if (vals.empty()) return s;
    s.mean = std::accumulate(vals.begin(), vals.end(), 0.0) / static_cast<double>(vals.size());
    double v = 0.0;
    for (double x : vals) v += (x - s.mean) * (x - s.mean);
    s.sd = vals.size() > 1 ? std::sqrt(v / static_cast<double>(vals.size() - 1)) : 0.0;
    return s;
}

/// Mean L1 distance between bootstrap joints and the original joint on the
/// same bins: the sampling noise scale of the joint histogram.
inline double joint_bootstrap_noise(const std::vector<DetectionRecord>& records, const JointDistribution& J,
                                    std::size_t resamples = 200, std::uint64_t seed = 1) {
    Binning b;
    b.bins = J.axis_left.bins();
    b.t_left = Range{J.axis_left.lo, J.axis_left.hi};
    b.t_right = Range{J.axis_right.lo, J.axis_right.hi};
    double s = 0.0;
    for (std::size_t r = 0; r < resamples; ++r) {
        const auto rs = resample(records, bootstrap_indices(records.size(), seed, r));
        s += joint_l1(build_joint(rs, b), J);
    }
    return s / static_cast<double>(resamples);
}

// ---------------------------------------------------------------------------
// Temporal clusters

/// Number of separated groups in a sample of times: runs of smoothed
/// histogram bins above `floor_fraction` of the peak, split by at least
/// `min_gap_bins` quiet bins.
inline std::size_t count_time_clusters(const std::vector<double>& times, std::size_t bins = 200,
                                       double floor_fraction = 0.02, std::size_t min_gap_bins = 3,
                                       double bandwidth_bins = 1.0) {
    if (times.empty()) return 0;
    const auto [lo, hi] = std::minmax_element(times.begin(), times.end());
    Histogram h(*lo, std::nextafter(*hi, std::numeric_limits<double>::infinity()) + 1e-12, bins);
    for (double t : times) h.add(t);
    const auto s = smooth(h.counts, bandwidth_bins);
    const double peak = *std::max_element(s.begin(), s.end());
    // a cluster must also rise above Poisson noise
    const double floor = std::max(floor_fraction * peak, 3.0 * std::sqrt(peak / 10.0));
    std::size_t clusters = 0, quiet = min_gap_bins;
    for (double v : s) {
        if (v > floor) {
            if (quiet >= min_gap_bins) ++clusters;
            quiet = 0;
        } else {
            ++quiet;
        }
    }
    return clusters;
}

}  // namespace arrival
