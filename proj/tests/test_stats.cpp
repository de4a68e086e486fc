#include <gtest/gtest.h>

#include <numbers>

#include <arrival/stats.hpp>

using namespace arrival;

namespace {

DetectionRecord rec(double tl, double tr, LostReason lost = LostReason::none) {
    DetectionRecord r;
    r.t_left = tl;
    r.t_right = tr;
    r.lost = lost;
    return r;
}

// Expected counts of `total` events spread as f over 200 bins.
std::vector<double> signal(double total, double (*f)(double)) {
    std::vector<double> v(200);
    double s = 0;
    for (int i = 0; i < 200; ++i) s += v[i] = f(i / 200.0);
    for (auto& x : v) x *= total / s;
    return v;
}

std::vector<double> normals(std::size_t n, double mean, std::uint64_t stream) {
    RandomStream r(77, stream);
    std::vector<double> v(n);
    for (auto& x : v) x = mean + r.normal();
    return v;
}

}  // namespace

TEST(Joint, SingleRecordOneBin) {
    const auto J = build_joint({rec(1.0, 2.0)});
    EXPECT_EQ(J.kept, 1u);
    EXPECT_DOUBLE_EQ(J.in_range(), 1.0);
    EXPECT_EQ(std::count_if(J.joint.begin(), J.joint.end(), [](double v) { return v != 0; }), 1);
}

TEST(Joint, EmptyInputNamesZeroKept) {
    try {
        build_joint({rec(1, 2, LostReason::t_max)});
        FAIL();
    } catch (const StatsError& e) {
        EXPECT_NE(std::string(e.what()).find("zero kept events"), std::string::npos);
    }
}

TEST(Joint, MarginalsAreRowAndColumnSums) {
    std::vector<DetectionRecord> r;
    const auto a = normals(5000, 10.0, 1), b = normals(5000, 20.0, 2);
    for (std::size_t i = 0; i < a.size(); ++i) r.push_back(rec(a[i], b[i]));
    r.push_back(rec(0, 0, LostReason::wrong_side));
    const auto J = build_joint(r);
    EXPECT_EQ(J.kept, 5000u);
    EXPECT_EQ(J.lost, 1u);
    EXPECT_DOUBLE_EQ(J.in_range() + J.outside, 5000.0);
    EXPECT_DOUBLE_EQ(J.marginal_left.total(), J.in_range());
    for (std::size_t i = 0; i < J.axis_left.bins(); ++i) {
        double row = 0;
        for (std::size_t j = 0; j < J.axis_right.bins(); ++j) row += J.at(i, j);
        EXPECT_DOUBLE_EQ(row, J.marginal_left.counts[i]);
    }
}

TEST(Joint, IndependentSamplesFactorize) {
    std::vector<DetectionRecord> r;
    const auto a = normals(100000, 0.0, 3), b = normals(100000, 0.0, 4);
    for (std::size_t i = 0; i < a.size(); ++i) r.push_back(rec(a[i], b[i]));
    Binning bn;
    bn.bins = 50;
    const auto J = build_joint(r, bn);
    EXPECT_LT(factorization_l1(J), 3.0 * joint_bootstrap_noise(r, J, 20));
    // perfectly correlated samples do not
    std::vector<DetectionRecord> c;
    for (double x : a) c.push_back(rec(x, x));
    const auto K = build_joint(c, bn);
    EXPECT_GT(factorization_l1(K), 3.0 * joint_bootstrap_noise(c, K, 20));
}

// Gaussian smoothing of bandwidth bw bins scales a fringe of period P bins by
// exp(-2 pi^2 bw^2 / P^2)
double damped(double v, double period_bins, double bw = 2.0) {
    return v * std::exp(-2.0 * std::numbers::pi * std::numbers::pi * bw * bw / (period_bins * period_bins));
}

TEST(Visibility, ConstantIsZero) { EXPECT_DOUBLE_EQ(visibility(std::vector<double>(200, 40.0)), 0.0); }

TEST(Visibility, FullContrastSinusoid) {
    const auto v = signal(1e6, [](double u) { return 1.0 + std::cos(2 * std::numbers::pi * 8 * u); });
    EXPECT_NEAR(visibility(v), damped(1.0, 25), 0.01);
    VisibilityOptions raw;
    raw.bandwidth_bins = 0;
    EXPECT_NEAR(visibility(v, raw), 1.0, 0.01);
}

TEST(Visibility, LongPeriodSinusoidTouchingZero) {
    // three fringes over 200 bins: smoothing bias stays below 0.02
    const auto v = signal(1e6, [](double u) { return 1.0 + std::cos(2 * std::numbers::pi * 3 * u); });
    EXPECT_NEAR(visibility(v), 1.0, 0.02);
}

TEST(Visibility, HalfContrastSinusoid) {
    // 0.5 + 0.25 cos: maxima 0.75, minima 0.25, so V = 0.5
    const auto v = signal(1e6, [](double u) { return 0.5 + 0.25 * std::cos(2 * std::numbers::pi * 8 * u); });
    EXPECT_NEAR(visibility(v), damped(0.5, 25), 0.01);
}

TEST(Visibility, NoisyFringesAndTooFewExtrema) {
    RandomStream r(3, 0);
    auto v = signal(2e5, [](double u) { return 1.0 + 0.6 * std::cos(2 * std::numbers::pi * 6 * u); });
    for (auto& x : v) x = std::max(0.0, x + std::sqrt(x) * r.normal());
    EXPECT_NEAR(visibility(v), damped(0.6, 200.0 / 6), 0.05);
    const auto mono = signal(1e5, [](double u) { return 1.0 + u; });
    EXPECT_THROW(visibility(mono), StatsError);
}

TEST(Visibility, Window) {
    auto v = signal(1e6, [](double u) { return u < 0.5 ? 1.0 + std::cos(2 * std::numbers::pi * 10 * u) : 1.0; });
    VisibilityOptions o;
    o.window_lo = 0;
    o.window_hi = 100;
    EXPECT_NEAR(visibility(v, o), damped(1.0, 20), 0.02);
    o.window_lo = 110;
    o.window_hi = 200;
    EXPECT_DOUBLE_EQ(visibility(v, o), 0.0);
}

TEST(Visibility, ConditionalSlice) {
    std::vector<DetectionRecord> r;
    for (int i = 0; i < 100; ++i) r.push_back(rec(i, i));
    const auto J = build_joint(r);
    EXPECT_THROW(conditional_right(J, 1000, 2000), StatsError);
    EXPECT_NO_THROW(conditional_right(J, 10, 20));
}

TEST(Ks, Basics) {
    const std::vector<double> a{1, 2, 3, 4}, b{10, 11};
    EXPECT_DOUBLE_EQ(ks_distance(a, a).statistic, 0.0);
    EXPECT_DOUBLE_EQ(ks_distance(a, b).statistic, 1.0);
    EXPECT_THROW(ks_distance({}, a), StatsError);
    const auto k = ks_distance(normals(10000, 0.0, 5), normals(10000, 0.5, 6));
    EXPECT_TRUE(k.reject);
    EXPECT_LT(k.p_value, 1e-10);
    const auto same = ks_distance(normals(10000, 0.0, 7), normals(10000, 0.0, 8));
    EXPECT_FALSE(same.reject);
    EXPECT_NEAR(same.critical, 1.6276 * std::sqrt(2.0 / 10000), 1e-4);
}

TEST(Ks, KolmogorovTail) {
    EXPECT_NEAR(kolmogorov_q(1.6276), 0.01, 1e-4);
    EXPECT_NEAR(kolmogorov_q(1.3581), 0.05, 1e-4);
    EXPECT_DOUBLE_EQ(kolmogorov_q(0.0), 1.0);
}

TEST(Chi2, UniformCounts) {
    const auto r = chi2_gof({25, 25, 25, 25}, {25, 25, 25, 25});
    EXPECT_DOUBLE_EQ(r.statistic, 0.0);
    EXPECT_DOUBLE_EQ(r.dof, 3.0);
    EXPECT_DOUBLE_EQ(r.p_value, 1.0);
    EXPECT_LT(chi2_gof({50, 0, 25, 25}, {25, 25, 25, 25}).p_value, 1e-6);
}

TEST(Bootstrap, DeterministicSpread) {
    std::vector<DetectionRecord> r;
    for (double x : normals(2000, 0.0, 9)) r.push_back(rec(x, 0));
    auto mean = [](const std::vector<DetectionRecord>& v) {
        double s = 0;
        for (const auto& e : v) s += e.t_left;
        return s / static_cast<double>(v.size());
    };
    const auto a = bootstrap(r, mean, 200, 1), b = bootstrap(r, mean, 200, 1);
    EXPECT_DOUBLE_EQ(a.sd, b.sd);
    EXPECT_NEAR(a.sd, 1.0 / std::sqrt(2000.0), 0.2 / std::sqrt(2000.0));
}

TEST(Clusters, CountsSeparatedGroups) {
    std::vector<double> t;
    for (double x : normals(5000, 0.0, 10)) t.push_back(x);
    EXPECT_EQ(count_time_clusters(t), 1u);
    for (double x : normals(3000, 20.0, 11)) t.push_back(x);
    for (double x : normals(2000, 40.0, 12)) t.push_back(x);
    EXPECT_EQ(count_time_clusters(t), 3u);
}
