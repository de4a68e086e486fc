#pragma once

// Metric summaries of event ensembles, shared by the command-line tool and
// the acceptance runner.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "abr.hpp"
#include "dynamics.hpp"
#include "stats.hpp"

namespace arrival {

struct MetricOptions {
    Binning binning;
    VisibilityOptions visibility;
    double slice_fraction = 0.01;  // conditioning slice width, fraction of the t_L range
};

/// Slice of t_L of the given width fraction, centred on the q-quantile of
/// the kept t_L (the median by default).
inline Range conditioning_slice(const std::vector<DetectionRecord>& records, const JointDistribution& J,
                                double fraction, double q = 0.5) {
    const double mid = quantile(left_times(records), q);
    const double half = 0.5 * fraction * (J.axis_left.hi - J.axis_left.lo);
    return {mid - half, mid + half};
}

/// Visibility or the reason it is undefined.
struct VisibilityValue {
    std::optional<double> value;
    std::string undefined;

    nlohmann::ordered_json json() const {
        if (value) return *value;
        return {{"undefined", undefined}};
    }
};

template <class F>
VisibilityValue try_visibility(F&& f) {
    try {
        return {f(), {}};
    } catch (const StatsError& e) {
        return {std::nullopt, e.what()};
    }
}

inline std::map<std::string, std::size_t> loss_counts(const std::vector<DetectionRecord>& records) {
    std::map<std::string, std::size_t> m;
    for (const auto& r : records)
        if (!r.kept()) ++m[to_string(r.lost)];
    return m;
}

struct EnsembleMetrics {
    JointDistribution joint;
    VisibilityValue v_left, v_right, v_conditional;
    Range slice{};
};

inline EnsembleMetrics ensemble_metrics(const std::vector<DetectionRecord>& records, const MetricOptions& o = {}) {
    EnsembleMetrics m;
    m.joint = build_joint(records, o.binning);
    m.v_left = try_visibility([&] { return visibility(m.joint.marginal_left, o.visibility); });
    m.v_right = try_visibility([&] { return visibility(m.joint.marginal_right, o.visibility); });
    m.slice = conditioning_slice(records, m.joint, o.slice_fraction);
    m.v_conditional =
        try_visibility([&] { return conditional_visibility(m.joint, m.slice.lo, m.slice.hi, o.visibility); });
    return m;
}

inline nlohmann::ordered_json metrics_json(const std::vector<DetectionRecord>& records, const EnsembleMetrics& m,
                                           const MetricOptions& o) {
    nlohmann::ordered_json j;
    j["events"] = records.size();
    j["kept"] = m.joint.kept;
    j["lost"] = m.joint.lost;
    j["lost_by_reason"] = loss_counts(records);
    j["outside_histogram_range"] = m.joint.outside;
    j["bins"] = o.binning.bins;
    j["t_left_range_ms"] = {m.joint.axis_left.lo, m.joint.axis_left.hi};
    j["t_right_range_ms"] = {m.joint.axis_right.lo, m.joint.axis_right.hi};
    j["smoothing_bandwidth_bins"] = o.visibility.bandwidth_bins;
    j["visibility_left"] = m.v_left.json();
    j["visibility_right"] = m.v_right.json();
    j["conditional_slice_t_left_ms"] = {m.slice.lo, m.slice.hi};
    j["visibility_right_given_left"] = m.v_conditional.json();
    j["factorization_l1"] = factorization_l1(m.joint);
    return j;
}

/// Survival of the no-back-action baseline: the fraction of events with at
/// least one particle not yet at its screen at each time.
inline std::vector<SurvivalPoint> survival_from_records(const std::vector<DetectionRecord>& records,
                                                        const std::vector<double>& times) {
    std::vector<SurvivalPoint> out;
    if (records.empty()) return out;
    std::vector<double> done;
    for (const auto& r : records)
        done.push_back(r.kept() ? std::max(r.t_left, r.t_right) : std::numeric_limits<double>::infinity());
    std::sort(done.begin(), done.end());
    const double n = static_cast<double>(done.size());
    for (double t : times) {
        const auto finished = std::upper_bound(done.begin(), done.end(), t) - done.begin();
        out.push_back({t, (n - static_cast<double>(finished)) / n, nan_value});
    }
    return out;
}

}  // namespace arrival
