#include <gtest/gtest.h>

#include <filesystem>

#include <arrival/io.hpp>

using namespace arrival;

namespace {

std::vector<DetectionRecord> sample_records() {
    DetectionRecord a;
    a.event_id = 0;
    a.set(Screen::left, 28.560123456789012, -5123.5);
    a.set(Screen::right, 127.7, 5000.25);
    a.first = Screen::left;
    a.collapse_applied = true;
    DetectionRecord b;
    b.event_id = 1;
    b.set(Screen::left, 30.0, -1.0);
    b.first = Screen::left;
    b.lost = LostReason::t_max;
    return {a, b};
}

}  // namespace

TEST(EventsCsv, SchemaAndFormatting) {
    const auto csv = events_csv(sample_records(), {Source::bohmian, -1.0, "sodium-23", 42});
    std::istringstream in(csv);
    std::string header, row0, row1;
    std::getline(in, header);
    std::getline(in, row0);
    std::getline(in, row1);
    EXPECT_EQ(header,
              "event_id,source,eta,species,seed,t_left_ms,x_left_um,t_right_ms,x_right_um,first_screen,"
              "collapse_applied,lost_reason");
    EXPECT_EQ(row0, "0,bohmian,-1,sodium-23,42,28.5601234568,-5123.5,127.7,5000.25,left,1,");
    EXPECT_EQ(row1, "1,bohmian,-1,sodium-23,42,30,-1,,,left,0,t_max");
}

TEST(EventsCsv, RoundTrip) {
    const auto recs = sample_records();
    std::istringstream in(events_csv(recs, {Source::abr, 0.5, "helium-4", 1}));
    const auto back = read_events_csv(in);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[1], recs[1]);
    EXPECT_NEAR(back[0].t_left, recs[0].t_left, 1e-9);
    std::istringstream bad("event_id,source\n");
    EXPECT_THROW(read_events_csv(bad), std::runtime_error);
}

TEST(SurvivalCsv, SecondsAndKappa) {
    std::ostringstream os;
    write_survival_csv(os, {{0.0, 1.0, 1.0}, {2.5, 0.5, 0.4}}, 3.0);
    EXPECT_EQ(os.str(), "t_s,survival_fraction,kappa_over_kappa0\n0,1,3\n0.0025,0.5,3\n");
}

TEST(HistogramCsv, Edges) {
    Histogram h(0.0, 2.0, 2);
    h.add(0.5);
    std::ostringstream os;
    write_histogram_csv(os, h);
    EXPECT_EQ(os.str(), "bin_left_edge,count\n0,1\n1,0\n");
}

TEST(Hashes, KnownValues) {
    EXPECT_EQ(git_blob_hash("hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
    EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Manifest, ListsOutputsAndCleansUp) {
    const auto dir = std::filesystem::temp_directory_path() / "arrival_manifest_test";
    std::filesystem::create_directories(dir);
    RunManifest m("run", dir);
    m.add_run("a", preset("fig2"));
    m.write_output("x.csv", "abc\n");
    m.write();
    const auto j = nlohmann::json::parse(read_file(dir / "manifest.json"));
    EXPECT_EQ(j["outputs"][0]["file"], "x.csv");
    EXPECT_EQ(j["outputs"][0]["sha256"], sha256_hex("abc\n"));
    EXPECT_EQ(j["input_hash"].get<std::string>().size(), 40u);

    RunManifest m2("run", dir);
    m2.add_run("a", preset("fig2"));
    EXPECT_EQ(m2.input_hash(), m.input_hash());
    RunManifest m3("run", dir);
    auto other = preset("fig2");
    other.seed = 2;
    m3.add_run("a", other);
    EXPECT_NE(m3.input_hash(), m.input_hash());

    m.remove_outputs();
    EXPECT_FALSE(std::filesystem::exists(dir / "x.csv"));
    EXPECT_FALSE(std::filesystem::exists(dir / "manifest.json"));
    std::filesystem::remove_all(dir);
}
