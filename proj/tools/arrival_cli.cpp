// Command-line front end: intrinsic (run), absorbing-boundary (abr) and
// semiclassical (semi) pipelines. Exit codes: 0 ok, 2 config error,
// 3 runtime error.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <arrival/abr.hpp>
#include <arrival/config.hpp>
#include <arrival/dynamics.hpp>
#include <arrival/io.hpp>
#include <arrival/report.hpp>
#include <arrival/semiclassical.hpp>

using namespace arrival;
using json = nlohmann::ordered_json;

namespace {

struct CommonOptions {
    std::string preset, config, species, out_dir = "out";
    std::optional<std::uint64_t> seed;
    std::optional<std::string> events;
    std::optional<unsigned> workers;
    std::vector<std::string> sweeps;
    bool no_collapse = false, quiet = false;
};

struct Point {
    std::string label;
    ExperimentConfig config;
};

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) out.push_back(detail::trim(cur));
    return out;
}

std::string file_safe(std::string s) {
    for (char& ch : s)
        if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' && ch != '.' && ch != '=' && ch != '_')
            ch = '_';
    return s;
}

ExperimentConfig base_config(const CommonOptions& o, const std::string& default_preset) {
    ExperimentConfig c = !o.config.empty() ? load_config_file(o.config) : preset(o.preset.empty() ? default_preset : o.preset);
    if (!o.config.empty() && !o.preset.empty()) throw ConfigError("preset", "give either --preset or --config");
    if (!o.species.empty()) c.species = o.species;
    if (o.seed) {
        c.seed = *o.seed;
    } else if (const char* env = std::getenv("SEED"); env && *env) {
        try {
            c.seed = parse_count(env);
        } catch (const std::invalid_argument& e) {
            throw ConfigError("SEED", e.what());
        }
    }
    if (o.events) {
        try {
            c.n_events = parse_count(*o.events);
        } catch (const std::invalid_argument& e) {
            throw ConfigError("events", e.what());
        }
    }
    if (o.workers) c.workers = *o.workers;
    if (o.no_collapse) c.collapse_enabled = false;
    return c;
}

/// Cartesian product of all --sweep axes.
std::vector<Point> expand(const ExperimentConfig& base, const std::vector<std::string>& sweeps) {
    std::vector<Point> pts{{base.preset.empty() ? "config" : base.preset, base}};
    for (const auto& sw : sweeps) {
        const auto eq = sw.find('=');
        if (eq == std::string::npos) throw ConfigError("sweep", "expected key=v1,v2,... in '" + sw + "'");
        const std::string key = detail::trim(sw.substr(0, eq));
        const auto values = split(sw.substr(eq + 1), ',');
        if (values.empty()) throw ConfigError("sweep", "no values for '" + key + "'");
        std::vector<Point> next;
        for (const auto& p : pts)
            for (const auto& v : values) {
                Point q = p;
                apply_override(q.config, key, v);
                q.label += "_" + key + "=" + v;
                next.push_back(std::move(q));
            }
        pts = std::move(next);
    }
    for (auto& p : pts) {
        p.label = file_safe(p.label);
        for (const auto& w : validate(p.config)) std::cerr << "warning [" << p.label << "]: " << w << '\n';
    }
    return pts;
}

std::function<void(std::size_t, std::size_t)> progress(const CommonOptions& o, const std::string& label) {
    if (o.quiet) return {};
    return [label](std::size_t done, std::size_t total) {
        std::cerr << "  " << label << ": " << done << " / " << total << " events\n";
    };
}

std::string histogram_csv(const Histogram& h) {
    std::ostringstream os;
    write_histogram_csv(os, h);
    return os.str();
}

EventsMeta meta(const ExperimentConfig& c, Source s) { return {s, c.eta, c.species, c.seed}; }

json ks_json(const KsResult& k) {
    return {{"statistic", k.statistic}, {"critical_0.01", k.critical}, {"p_value", k.p_value}, {"reject", k.reject}};
}

// ---------------------------------------------------------------------------

void cmd_run(const CommonOptions& o, RunManifest& man) {
    const auto pts = expand(base_config(o, "fig2"), o.sweeps);
    const MetricOptions mo;
    json metrics = json::object();
    std::vector<std::vector<double>> right_times_by_point;
    for (const auto& p : pts) {
        if (!o.quiet) std::cerr << "run " << p.label << '\n';
        const auto ic = to_internal_units(p.config);
        EnsembleOptions eo;
        eo.progress_every = std::max<std::size_t>(1, ic.n_events / 10);
        eo.progress = progress(o, p.label);
        const auto res = run_ensemble(ic, screens_of(ic), eo);
        man.add_run(p.label, p.config);
        man.write_output("events_" + p.label + ".csv", events_csv(res.records, meta(p.config, Source::bohmian)));
        json mj;
        try {
            const auto m = ensemble_metrics(res.records, mo);
            man.write_output("hist_left_" + p.label + ".csv", histogram_csv(m.joint.marginal_left));
            man.write_output("hist_right_" + p.label + ".csv", histogram_csv(m.joint.marginal_right));
            mj = metrics_json(res.records, m, mo);
        } catch (const StatsError& e) {
            mj = {{"events", res.records.size()}, {"error", e.what()}};
        }
        mj["collapse"] = p.config.collapse_enabled;
        metrics[p.label] = mj;
        right_times_by_point.push_back(right_times(res.records));
    }
    json table = json::array();
    for (std::size_t a = 0; a < pts.size(); ++a)
        for (std::size_t b = a + 1; b < pts.size(); ++b) {
            if (right_times_by_point[a].empty() || right_times_by_point[b].empty()) continue;
            table.push_back({{"a", pts[a].label}, {"b", pts[b].label},
                             {"ks_right", ks_json(ks_distance(right_times_by_point[a], right_times_by_point[b]))}});
        }
    json out;
    out["runs"] = metrics;
    out["pairwise_right_marginal"] = table;
    man.write_output("metrics.json", out.dump(2) + "\n");
}

void cmd_abr(const CommonOptions& o, const std::string& kappa_list, bool no_backaction, RunManifest& man) {
    auto base = base_config(o, "fig5");
    std::vector<double> kappas;
    if (!kappa_list.empty()) {
        if (no_backaction) throw ConfigError("kappa", "--kappa has no meaning with --no-backaction");
        for (const auto& v : split(kappa_list, ',')) {
            double k;
            try {
                k = parse_quantity(v, Dimension::none);
            } catch (const std::invalid_argument& e) {
                throw ConfigError("kappa", e.what());
            }
            if (!(k > 0)) throw ConfigError("kappa", "must be positive, got " + v);
            kappas.push_back(k);
        }
    } else {
        kappas.push_back(base.abr.kappa_over_kappa0);
    }
    json metrics = json::object();
    for (const auto& p : expand(base, o.sweeps)) {
        const auto ic0 = to_internal_units(p.config);
        const AbrSetup su = abr_setup(ic0);
        if (no_backaction) {
            const std::string label = p.label + "_no-backaction";
            if (!o.quiet) std::cerr << "abr " << label << '\n';
            EnsembleOptions eo;
            eo.progress_every = std::max<std::size_t>(1, ic0.n_events / 10);
            eo.progress = progress(o, label);
            Screens scr = screens_of(ic0);
            scr.t_max = su.t_max;
            const auto res = run_ensemble(ic0, scr, eo);
            std::vector<double> times;
            for (int i = 0; i <= 400; ++i) times.push_back(su.t_max * i / 400.0);
            const auto surv = survival_from_records(res.records, times);
            man.add_run(label, p.config, {{"backaction", false}});
            man.write_output("events_" + label + ".csv", events_csv(res.records, meta(p.config, Source::bohmian)));
            std::ostringstream sc;
            write_survival_csv(sc, surv, 0.0);
            man.write_output("survival_" + label + ".csv", sc.str());
            metrics[label] = {{"kept", res.records.size() - res.lost()},
                              {"lost_by_reason", loss_counts(res.records)},
                              {"fall_time_ms", su.fall_time},
                              {"survival_at_3_fall_times", survival_at(surv, 3.0 * su.fall_time)},
                              {"right_time_clusters", count_time_clusters(right_times(res.records))}};
            continue;
        }
        for (double k : kappas) {
            ExperimentConfig c = p.config;
            c.abr.kappa_over_kappa0 = k;
            const std::string label = p.label + "_kappa=" + fmt12(k);
            if (!o.quiet) std::cerr << "abr " << label << '\n';
            const auto res = evolve_abr_ensemble(to_internal_units(c));
            man.add_run(label, c, {{"backaction", true}});
            man.write_output("events_" + label + ".csv", events_csv(res.records, meta(c, Source::abr)));
            std::ostringstream sc, wc;
            write_survival_csv(sc, res.survival, k);
            write_survival_csv(wc, res.survival, k, true);
            man.write_output("survival_" + label + ".csv", sc.str());
            man.write_output("survival_wavenorm_" + label + ".csv", wc.str());
            json mj;
            mj["kappa_over_kappa0"] = k;
            mj["kappa0_per_um"] = res.setup.kappa0;
            mj["fall_time_ms"] = res.setup.fall_time;
            mj["grid"] = {{"y_boundary_um", res.setup.y_boundary}, {"y_far_um", res.setup.y_far},
                          {"n_grid", res.setup.n_grid},          {"dt_ms", res.setup.dt},
                          {"t_max_ms", res.setup.t_max}};
            mj["kept"] = std::count_if(res.records.begin(), res.records.end(), [](auto& r) { return r.kept(); });
            mj["lost_by_reason"] = loss_counts(res.records);
            mj["survival_at_3_fall_times"] = survival_at(res.survival, 3.0 * res.setup.fall_time);
            mj["wave_norm_at_3_fall_times"] = survival_at(res.survival, 3.0 * res.setup.fall_time, true);
            mj["outward_violations"] = res.outward_violations;
            mj["max_far_amplitude"] = res.max_far_amplitude;
            mj["max_norm_defect"] = res.max_norm_defect;
            mj["right_time_clusters"] = count_time_clusters(right_times(res.records));
            metrics[label] = mj;
        }
    }
    man.write_output("metrics.json", json{{"runs", metrics}}.dump(2) + "\n");
}

void cmd_semi(const CommonOptions& o, RunManifest& man) {
    json table = json::array();
    for (const auto& p : expand(base_config(o, "fig7"), o.sweeps)) {
        if (!o.quiet) std::cerr << "semi " << p.label << '\n';
        const auto ic = to_internal_units(p.config);
        const Screens scr = screens_of(ic);
        const auto semi = run_semiclassical(ic, scr, ic.n_events, ic.seed);
        EnsembleOptions eo;
        eo.progress_every = std::max<std::size_t>(1, ic.n_events / 10);
        eo.progress = progress(o, p.label);
        const auto bohm = run_ensemble(ic, scr, eo).records;
        man.add_run(p.label, p.config);
        man.write_output("events_semiclassical_" + p.label + ".csv",
                         events_csv(semi, meta(p.config, Source::semiclassical)));
        man.write_output("events_bohmian_" + p.label + ".csv", events_csv(bohm, meta(p.config, Source::bohmian)));
        json row{{"label", p.label}, {"y_left_m", p.config.y_left}, {"y_right_m", p.config.y_right}};
        const auto sl = left_times(semi), bl = left_times(bohm), sr = right_times(semi), br = right_times(bohm);
        if (sl.empty() || bl.empty()) throw std::runtime_error(p.label + ": no kept events to compare");
        row["ks_left"] = ks_json(ks_distance(sl, bl));
        row["ks_right"] = ks_json(ks_distance(sr, br));
        row["kept_semiclassical"] = sl.size();
        row["kept_bohmian"] = bl.size();
        table.push_back(row);
    }
    man.write_output("comparison.json", json{{"semiclassical_vs_bohmian", table}}.dump(2) + "\n");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Arrival-time simulator for entangled atom pairs"};
    app.require_subcommand(1);
    CommonOptions o;
    std::string kappa_list;
    bool no_backaction = false;
    auto add_common = [&](CLI::App* s) {
        s->add_option("--preset", o.preset, "Preset: " + [] {
            std::string s;
            for (const auto& n : preset_names()) s += (s.empty() ? "" : ", ") + n;
            return s;
        }());
        s->add_option("--config", o.config, "Configuration file")->check(CLI::ExistingFile);
        s->add_option("--seed", o.seed, "Master seed (overrides SEED and the config)");
        s->add_option("--events", o.events, "Number of events");
        s->add_option("--sweep", o.sweeps, "key=v1,v2,... (repeatable; Cartesian product)");
        s->add_option("--workers", o.workers, "Worker threads")->check(CLI::PositiveNumber);
        s->add_option("--out-dir", o.out_dir, "Output directory");
        s->add_option("--species", o.species, "Atomic species, e.g. helium-4, sodium-23, cesium-133");
        s->add_flag("--no-collapse", o.no_collapse, "Do not collapse after the first detection");
        s->add_flag("--quiet", o.quiet, "No progress output");
    };
    auto* run = app.add_subcommand("run", "Intrinsic Bohmian arrival times");
    auto* abr = app.add_subcommand("abr", "Absorbing-boundary detector ensembles");
    auto* semi = app.add_subcommand("semi", "Semiclassical versus Bohmian comparison");
    for (auto* s : {run, abr, semi}) add_common(s);
    abr->add_option("--kappa", kappa_list, "Detector wavenumbers in units of kappa0, comma separated");
    abr->add_flag("--no-backaction", no_backaction, "Intrinsic trajectories truncated at the detector plane");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    const std::string sub = app.get_subcommands().front()->get_name();
    std::optional<RunManifest> man;
    try {
        std::filesystem::create_directories(o.out_dir);
        man.emplace(sub, o.out_dir);
        if (sub == "run") cmd_run(o, *man);
        else if (sub == "abr") cmd_abr(o, kappa_list, no_backaction, *man);
        else cmd_semi(o, *man);
        man->write();
        if (!o.quiet) std::cerr << "wrote " << (std::filesystem::path(o.out_dir) / "manifest.json").string() << '\n';
        return 0;
    } catch (const ConfigError& e) {
        if (man) man->remove_outputs();
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        if (man) man->remove_outputs();
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
}
