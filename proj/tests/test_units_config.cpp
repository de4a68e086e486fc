#include <gtest/gtest.h>

#include <filesystem>

#include <arrival/config.hpp>

using namespace arrival;

TEST(Units, InternalConstants) {
    const auto k = to_internal(default_constants());
    EXPECT_NEAR(k.hbar, 105.4571817, 1e-9);
    EXPECT_NEAR(k.g, 9.81, 1e-12);
    const auto c = to_internal_units(preset("fig5"));
    EXPECT_NEAR(c.mass, 6.6465, 1e-3);
    EXPECT_NEAR(c.hbar / c.mass, 15.866, 1e-3);
}

TEST(Units, RoundTripThroughInternalUnits) {
    for (const auto& name : preset_names()) {
        const auto a = preset(name);
        const auto b = from_internal_units(to_internal_units(a));
        EXPECT_EQ(to_json(a).dump(), to_json(b).dump()) << name;
    }
}

TEST(Units, FallTime) {
    // 8 cm from rest: sqrt(2 * 0.08 / 9.81) s
    EXPECT_NEAR(fall_time(80000.0, 9.81), 127.7101, 1e-3);
}

TEST(Config, PresetsValidate) {
    for (const auto& name : preset_names()) EXPECT_NO_THROW(validate(preset(name))) << name;
    EXPECT_THROW(preset("fig9"), ConfigError);
}

TEST(Config, PresetGeometry) {
    const auto f3 = preset("fig3");
    EXPECT_DOUBLE_EQ(f3.y_left, -4e-3);
    EXPECT_DOUBLE_EQ(f3.y_right, -0.08);
    EXPECT_EQ(preset("fig4").species, "cesium-133");
    const auto f5 = preset("fig5");
    EXPECT_EQ(f5.species, "helium-4");
    EXPECT_DOUBLE_EQ(f5.y_left, f5.y_right);
}

TEST(Config, ParsesUnitsAndSections) {
    const auto c = load_config(R"(
# sample
[run]
preset = fig2
seed = 42
n_events = 1e3
collapse = off
[experiment]
eta = 0.5
sigma_y = 2um
u_x = 20 m/s
[screens]
y_left = -1mm   ; comment
t_max = 300ms
[abr]
kappa = 3
)");
    EXPECT_EQ(c.preset, "fig2");
    EXPECT_EQ(c.seed, 42u);
    EXPECT_EQ(c.n_events, 1000u);
    EXPECT_FALSE(c.collapse_enabled);
    EXPECT_DOUBLE_EQ(c.eta, 0.5);
    EXPECT_DOUBLE_EQ(c.sigma_y, 2e-6);
    EXPECT_DOUBLE_EQ(c.y_left, -1e-3);
    EXPECT_DOUBLE_EQ(c.t_max, 0.3);
    EXPECT_DOUBLE_EQ(c.abr.kappa_over_kappa0, 3.0);
}

TEST(Config, ErrorsNameTheField) {
    auto field_of = [](const std::string& text) {
        try {
            load_config(text);
        } catch (const ConfigError& e) {
            return e.field();
        }
        return std::string("<none>");
    };
    EXPECT_EQ(field_of("[experiment]\neta = 2\n"), "eta");
    EXPECT_EQ(field_of("[experiment]\nsigma_x = -1um\n"), "sigma_x");
    EXPECT_EQ(field_of("[experiment]\nbogus = 1\n"), "bogus");
    EXPECT_EQ(field_of("[abr]\nkappa = 0\n"), "kappa");
    EXPECT_EQ(field_of("[screens]\ny_left = 3 kg\n"), "y_left");
    EXPECT_EQ(field_of("[experiment]\nspecies = unobtanium\n"), "species");
    EXPECT_EQ(field_of("[experiment]\neta = 0\n[run]\npreset = fig2\n"), "preset");
    EXPECT_THROW(load_config("[nowhere]\n"), ConfigError);
    EXPECT_THROW(load_config("eta = 0\n"), ConfigError);
}

TEST(Config, Overrides) {
    auto c = preset("fig3");
    apply_override(c, "y_left", "-8cm");
    apply_override(c, "eta", "0");
    EXPECT_DOUBLE_EQ(c.y_left, -0.08);
    EXPECT_DOUBLE_EQ(c.eta, 0.0);
    EXPECT_THROW(apply_override(c, "hbar", "1"), ConfigError);
    EXPECT_THROW(apply_override(c, "eta", "abc"), ConfigError);
}

TEST(Config, AutomaticHorizon) {
    auto c = to_internal_units(preset("fig2"));
    const double tf = fall_time(c.l_y - c.y_right, c.g);
    EXPECT_NEAR(effective_t_max(c), 2 * tf + 1.0, 1e-9);
    c.t_max = 50;
    EXPECT_DOUBLE_EQ(effective_t_max(c), 50);
}

TEST(Config, ShippedConfigsLoad) {
    std::size_t n = 0;
    for (const auto& f : std::filesystem::directory_iterator(ARRIVAL_CONFIG_DIR)) {
        if (f.path().extension() != ".cfg") continue;
        EXPECT_NO_THROW(load_config_file(f.path().string())) << f.path();
        ++n;
    }
    EXPECT_GE(n, 3u);
    const auto c = load_config_file(std::string(ARRIVAL_CONFIG_DIR) + "/fig3-no-collapse.cfg");
    EXPECT_FALSE(c.collapse_enabled);
    EXPECT_DOUBLE_EQ(c.y_left, -1e-3);
    EXPECT_EQ(c.n_events, 20000u);
}
