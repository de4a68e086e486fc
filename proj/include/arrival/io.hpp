#pragma once

// Output artifacts: events CSV, survival CSV, histogram CSV, JSON reports
// and the run manifest with content hashes.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>
#include <openssl/evp.h>

#include "abr.hpp"
#include "config.hpp"
#include "dynamics.hpp"
#include "stats.hpp"

namespace arrival {

inline constexpr const char* version = "1.0.0";

inline const char* events_header =
    "event_id,source,eta,species,seed,t_left_ms,x_left_um,t_right_ms,x_right_um,first_screen,collapse_applied,"
    "lost_reason";

/// %.12g, or an empty field for NaN.
inline std::string fmt12(double v) {
    if (std::isnan(v)) return {};
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

struct EventsMeta {
    Source source = Source::bohmian;
    double eta = 0.0;
    std::string species;
    std::uint64_t seed = 0;
};

inline void write_events_csv(std::ostream& os, const std::vector<DetectionRecord>& records, const EventsMeta& m) {
    os << events_header << '\n';
    const std::string eta = fmt12(m.eta), seed = std::to_string(m.seed);
    for (const auto& r : records) {
        os << r.event_id << ',' << to_string(m.source) << ',' << eta << ',' << m.species << ',' << seed << ','
           << fmt12(r.t_left) << ',' << fmt12(r.x_left) << ',' << fmt12(r.t_right) << ',' << fmt12(r.x_right) << ','
           << to_string(r.first) << ',' << (r.collapse_applied ? 1 : 0) << ',' << to_string(r.lost) << '\n';
    }
}

inline std::string events_csv(const std::vector<DetectionRecord>& records, const EventsMeta& m) {
    std::ostringstream os;
    write_events_csv(os, records, m);
    return os.str();
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

inline double field_or_nan(const std::string& s) { return s.empty() ? nan_value : std::stod(s); }

inline LostReason lost_from_string(const std::string& s) {
    for (auto r : {LostReason::none, LostReason::t_max, LostReason::node_trap, LostReason::wrong_side,
                   LostReason::degenerate_collapse, LostReason::no_hit, LostReason::start_below})
        if (s == to_string(r)) return r;
    throw std::runtime_error("unknown lost_reason '" + s + "'");
}

}  // namespace detail

/// Parses an events CSV written by write_events_csv.
inline std::vector<DetectionRecord> read_events_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || detail::split_csv_line(line) != detail::split_csv_line(events_header))
        throw std::runtime_error("events CSV header does not match the schema");
    std::vector<DetectionRecord> out;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto f = detail::split_csv_line(line);
        if (f.size() != 12) throw std::runtime_error("events CSV row has " + std::to_string(f.size()) + " fields");
        DetectionRecord r;
        r.event_id = std::stoull(f[0]);
        r.t_left = detail::field_or_nan(f[5]);
        r.x_left = detail::field_or_nan(f[6]);
        r.t_right = detail::field_or_nan(f[7]);
        r.x_right = detail::field_or_nan(f[8]);
        r.first = f[9] == "left" ? Screen::left : f[9] == "right" ? Screen::right : Screen::none;
        r.collapse_applied = f[10] == "1";
        r.lost = detail::lost_from_string(f[11]);
        out.push_back(r);
    }
    return out;
}

/// Survival curve with times in seconds.
inline void write_survival_csv(std::ostream& os, const std::vector<SurvivalPoint>& s, double kappa_over_kappa0,
                               bool wave_norm = false) {
    os << "t_s," << (wave_norm ? "wave_norm" : "survival_fraction") << ",kappa_over_kappa0\n";
    const std::string k = fmt12(kappa_over_kappa0);
    for (const auto& p : s)
        os << fmt12(p.t / scale::time) << ',' << fmt12(wave_norm ? p.wave_norm : p.fraction) << ',' << k << '\n';
}

inline void write_histogram_csv(std::ostream& os, const Histogram& h) {
    os << "bin_left_edge,count\n";
    for (std::size_t i = 0; i < h.bins(); ++i) os << fmt12(h.left_edge(i)) << ',' << fmt12(h.counts[i]) << '\n';
}

// ---------------------------------------------------------------------------
// Hashes

namespace detail {

inline std::string digest_hex(const EVP_MD* md, const std::string& data) {
    unsigned char out[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx || EVP_DigestInit_ex(ctx, md, nullptr) != 1 || EVP_DigestUpdate(ctx, data.data(), data.size()) != 1 ||
        EVP_DigestFinal_ex(ctx, out, &len) != 1) {
        EVP_MD_CTX_free(ctx);
        throw std::runtime_error("digest computation failed");
    }
    EVP_MD_CTX_free(ctx);
    std::ostringstream os;
    for (unsigned i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(out[i]);
    return os.str();
}

}  // namespace detail

inline std::string sha256_hex(const std::string& data) { return detail::digest_hex(EVP_sha256(), data); }

/// Git blob id of `data`: sha1("blob <size>\0" + data).
inline std::string git_blob_hash(const std::string& data) {
    std::string s = "blob " + std::to_string(data.size());
    s.push_back('\0');
    s += data;
    return detail::digest_hex(EVP_sha1(), s);
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

// ---------------------------------------------------------------------------
// Manifest

/// Records one invocation: resolved configs, input hash, outputs with checksums.
class RunManifest {
public:
    RunManifest(std::string command, std::filesystem::path out_dir)
        : command_(std::move(command)), out_dir_(std::move(out_dir)), start_(std::chrono::steady_clock::now()) {}

    void add_run(const std::string& label, const ExperimentConfig& c, nlohmann::ordered_json extra = {}) {
        nlohmann::ordered_json r;
        r["label"] = label;
        r["config"] = to_json(c);
        if (!extra.is_null()) r["extra"] = std::move(extra);
        runs_.push_back(std::move(r));
    }

    /// Writes `content` under the output directory and records its checksum.
    void write_output(const std::string& name, const std::string& content) {
        const auto path = out_dir_ / name;
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + path.string());
        out << content;
        out.close();
        if (!out) throw std::runtime_error("failed writing " + path.string());
        written_.push_back(path);
        outputs_.push_back({{"file", name}, {"sha256", sha256_hex(content)}, {"bytes", content.size()}});
    }

    /// Hash over the resolved inputs only (command and run configs).
    std::string input_hash() const {
        nlohmann::ordered_json in;
        in["command"] = command_;
        in["runs"] = nlohmann::ordered_json::array();
        for (const auto& r : runs_) in["runs"].push_back(r);
        return git_blob_hash(in.dump());
    }

    nlohmann::ordered_json json() const {
        nlohmann::ordered_json j;
        j["command"] = command_;
        j["version"] = version;
        j["input_hash"] = input_hash();
        j["modules"] = {{"units-config", version}, {"analytic-wave", version}, {"sampler", version},
                        {"bohm-dynamics", version}, {"abr-solver", version},  {"semiclassical", version},
                        {"stats", version},         {"cli", version}};
        j["runs"] = runs_;
        j["wall_clock_s"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        j["outputs"] = outputs_;
        return j;
    }

    void write() {
        const auto path = out_dir_ / "manifest.json";
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot write " + path.string());
        out << json().dump(2) << '\n';
        written_.push_back(path);
    }

    /// Deletes everything written so far.
    void remove_outputs() noexcept {
        for (const auto& p : written_) {
            std::error_code ec;
            std::filesystem::remove(p, ec);
        }
        written_.clear();
    }

private:
    std::string command_;
    std::filesystem::path out_dir_;
    std::chrono::steady_clock::time_point start_;
    nlohmann::ordered_json runs_ = nlohmann::ordered_json::array();
    nlohmann::ordered_json outputs_ = nlohmann::ordered_json::array();
    std::vector<std::filesystem::path> written_;
};

}  // namespace arrival
