#include <sys/wait.h>

#include <cstdio>
#include <filesystem>

#include <gtest/gtest.h>
#include <json.hpp>

#include "tracklabel/mot_io.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string out;  // stdout and stderr
};

Run run(const std::string& args) {
    const std::string cmd = std::string(TRACKLABEL_CLI) + " " + args + " 2>&1";
    Run r;
    FILE* p = ::popen(cmd.c_str(), "r");
    if (!p) return r;
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
    const int status = ::pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("tracklabel-cli-" + name + "-" + std::to_string(::getpid()));
    fs::remove_all(p);
    return p;
}

std::string read(const fs::path& p) { return tracklabel::read_text_file(p); }

}  // namespace

TEST(Cli, ZeroBudgetLabelEqualsSelftrainOutput) {
    const auto root = scratch("b0");
    const auto l = run("label --benchmark 2 --budget 0 --annotator oracle -o " + (root / "label").string());
    ASSERT_EQ(l.code, 0) << l.out;
    const auto s = run("selftrain --benchmark 2 -o " + (root / "self").string());
    ASSERT_EQ(s.code, 0) << s.out;
    EXPECT_EQ(read(root / "label" / "labels.txt"), read(root / "self" / "pseudo_labels.txt"));
    EXPECT_EQ(read(root / "label" / "labels.prov"), read(root / "self" / "pseudo_labels.prov"));

    const auto manifest = json::parse(read(root / "label" / "manifest.json"));
    EXPECT_EQ(manifest.at("config_hash").get<std::string>().size(), 16u);
    EXPECT_TRUE(manifest.at("seeds").contains("source"));
    for (const auto& [file, hash] : manifest.at("stages").at("label").at("artifacts").items())
        EXPECT_TRUE(fs::exists(root / "label" / file)) << file;
    fs::remove_all(root);
}

TEST(Cli, EvaluateGroundTruthAgainstItself) {
    const auto root = scratch("eval");
    ASSERT_EQ(run("synthgen -o " + (root / "seq").string()).code, 0);
    const auto gt = (root / "seq" / "gt" / "gt.txt").string();
    const auto r = run("evaluate --gt " + gt + " --labels " + gt + " -o " + (root / "eval").string());
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("HOTA 100.000"), std::string::npos) << r.out;
    const auto metrics = json::parse(read(root / "eval" / "metrics.json"));
    EXPECT_EQ(metrics.at("hota").get<double>(), 1.0);
    EXPECT_TRUE(fs::exists(root / "eval" / "manifest.json"));
    fs::remove_all(root);
}

TEST(Cli, StudyInterpTable) {
    const auto root = scratch("interp");
    const auto r = run("study interp -o " + root.string());
    ASSERT_EQ(r.code, 0) << r.out;
    for (const char* ratio : {"1.00", "0.50", "0.20", "0.10", "0.05"})
        EXPECT_NE(r.out.find(std::string("\n") + ratio), std::string::npos) << ratio;
    const auto rows = json::parse(read(root / "interp.json"));
    ASSERT_EQ(rows.size(), 5u);
    EXPECT_EQ(rows[0].at("hota").get<double>(), 1.0);
    EXPECT_GE(rows[1].at("hota").get<double>(), 0.99);
    fs::remove_all(root);
}

TEST(Cli, BadConfigExitsWithErrorRecord) {
    const auto root = scratch("bad");
    fs::create_directories(root);
    tracklabel::write_text_file(root / "bad.json", R"({"budgett": 5})");
    const auto r = run("label -c " + (root / "bad.json").string() + " -o " + (root / "out").string());
    EXPECT_EQ(r.code, 2);
    const auto err = json::parse(r.out.substr(r.out.find('{')));
    EXPECT_EQ(err.at("error"), "config");
    EXPECT_NE(err.at("message").get<std::string>().find("budgett"), std::string::npos);

    const auto usage = run("label --no-such-flag");
    EXPECT_EQ(usage.code, 2);
    const auto missing = run("evaluate --gt /nonexistent --labels /nonexistent -o " + (root / "e").string());
    EXPECT_NE(missing.code, 0);
    fs::remove_all(root);
}

TEST(Cli, SynthgenWritesSequenceDirectory) {
    const auto root = scratch("synth");
    const auto r = run("synthgen --benchmark 1 --which source --set n_frames=30 -o " + root.string());
    ASSERT_EQ(r.code, 0) << r.out;
    for (const char* f : {"seqinfo.ini", "det/det.txt", "gt/gt.txt", "manifest.json", "world.cfg"})
        EXPECT_TRUE(fs::exists(root / f)) << f;
    const auto seq = tracklabel::load_sequence_dir(root);
    EXPECT_EQ(seq.frame_count, 30);
    EXPECT_EQ(run("synthgen --set no_such_key=1 -o " + root.string()).code, 2);
    fs::remove_all(root);
}
