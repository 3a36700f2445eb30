#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "mva/annotations.h"
#include "mva/tensor_io.h"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace mva;

namespace {

struct CliResult {
    int code = -1;
    std::string out;   // stdout
    std::string err;   // stderr
};

CliResult run(const std::string& args) {
    static int counter = 0;
    const fs::path err_file = fs::temp_directory_path() / ("mva_cli_err_" + std::to_string(++counter));
    const std::string cmd = std::string(MVA_CLI_PATH) + " " + args + " 2>" + err_file.string();
    CliResult r;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return r;
    std::array<char, 4096> buf{};
    std::size_t n;
    while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream es(err_file);
    r.err.assign(std::istreambuf_iterator<char>(es), {});
    fs::remove(err_file);
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), {}};
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("mva_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }
    fs::path dir_;
};

void write_lines(const fs::path& p, const std::vector<AnnotationRecord>& recs) {
    std::ofstream os(p);
    write_annotations(os, recs);
}

AnnotationRecord box(std::uint64_t image, std::size_t y0, std::size_t x0, std::optional<double> score) {
    AnnotationRecord r;
    r.image_id = image;
    r.instance.category = 1;
    r.instance.mask = BinaryMask(8, 8);
    for (std::size_t y = y0; y < y0 + 3; ++y)
        for (std::size_t x = x0; x < x0 + 3; ++x) r.instance.mask.set(y, x);
    r.instance.score = score;
    return r;
}

}  // namespace

TEST_F(Cli, GenDataCountContract) {
    const CliResult r = run("gen-data --seed 4 --count 5 --size 16 --out " + (dir_ / "d").string());
    ASSERT_EQ(r.code, 0) << r.err;
    const json manifest = json::parse(r.out);
    EXPECT_EQ(manifest.at("count"), 5);
    std::size_t images = 0;
    for (const auto& e : fs::directory_iterator(dir_ / "d" / "images")) images += e.path().extension() == ".mvtn";
    EXPECT_EQ(images, 5u);
    std::ifstream ann(dir_ / "d" / "annotations.jsonl");
    const auto recs = read_annotations(ann);
    EXPECT_EQ(recs.size(), 5u * 3u);
    EXPECT_EQ(slurp(dir_ / "d" / "manifest.json").empty(), false);
}

TEST_F(Cli, GenDataDeterministic) {
    ASSERT_EQ(run("gen-data --seed 9 --count 3 --size 20 --out " + (dir_ / "a").string()).code, 0);
    ASSERT_EQ(run("gen-data --seed 9 --count 3 --size 20 --out " + (dir_ / "b").string()).code, 0);
    std::size_t compared = 0;
    for (const auto& e : fs::recursive_directory_iterator(dir_ / "a")) {
        if (!e.is_regular_file()) continue;
        const fs::path rel = fs::relative(e.path(), dir_ / "a");
        EXPECT_EQ(slurp(e.path()), slurp(dir_ / "b" / rel)) << rel;
        ++compared;
    }
    EXPECT_EQ(compared, 5u);
}

TEST_F(Cli, GenDataRejectsSmallSize) {
    const CliResult r = run("gen-data --size 8 --out " + (dir_ / "d").string());
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("--size"), std::string::npos) << r.err;
}

TEST_F(Cli, GradcheckExitCodes) {
    const CliResult ok = run("gradcheck --block mv_adapter --seed 1");
    EXPECT_EQ(ok.code, 0) << ok.err;
    const json j = json::parse(ok.out);
    EXPECT_TRUE(j.at("pass").get<bool>());
    EXPECT_LE(j.at("max_rel_err").get<double>(), 1e-4);
    EXPECT_EQ(run("gradcheck --block eca --tol 1e-14").code, 1);
    EXPECT_EQ(run("gradcheck --block bogus").code, 2);
    EXPECT_EQ(run("gradcheck").code, 2);
}

TEST_F(Cli, EvalIdenticalIsPerfect) {
    const std::vector<AnnotationRecord> gt{box(0, 0, 0, {}), box(1, 4, 4, {})};
    std::vector<AnnotationRecord> pred = gt;
    for (auto& p : pred) p.instance.score = 1.0;
    write_lines(dir_ / "gt.jsonl", gt);
    write_lines(dir_ / "pred.jsonl", pred);
    const CliResult r = run("eval --pred " + (dir_ / "pred.jsonl").string() + " --gt " + (dir_ / "gt.jsonl").string());
    ASSERT_EQ(r.code, 0) << r.err;
    const json j = json::parse(r.out);
    EXPECT_EQ(j.at("map").get<double>(), 1.0);
    EXPECT_EQ(j.at("ap50").get<double>(), 1.0);
    EXPECT_EQ(j.at("per_threshold").size(), 10u);
}

TEST_F(Cli, EvalEmptyPredictionsScoreZero) {
    write_lines(dir_ / "gt.jsonl", {box(0, 0, 0, {})});
    write_lines(dir_ / "pred.jsonl", {});
    const CliResult r = run("eval --pred " + (dir_ / "pred.jsonl").string() + " --gt " + (dir_ / "gt.jsonl").string());
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(json::parse(r.out).at("map").get<double>(), 0.0);
}

TEST_F(Cli, EvalDerivedExample) {
    // Two exact hits around one miss: precision 1 up to recall 0.5, then 2/3.
    write_lines(dir_ / "gt.jsonl", {box(0, 0, 0, {}), box(0, 5, 5, {})});
    write_lines(dir_ / "pred.jsonl", {box(0, 0, 0, 0.9), box(0, 0, 5, 0.8), box(0, 5, 5, 0.7)});
    const CliResult r = run("eval --thresholds 0.5,0.75 --pred " + (dir_ / "pred.jsonl").string() + " --gt " +
                      (dir_ / "gt.jsonl").string());
    ASSERT_EQ(r.code, 0) << r.err;
    const json j = json::parse(r.out);
    const double expected = (51.0 + 50.0 * (2.0 / 3.0)) / 101.0;
    EXPECT_NEAR(j.at("map").get<double>(), expected, 1e-15);
    EXPECT_NEAR(j.at("ap75").get<double>(), expected, 1e-15);
}

TEST_F(Cli, EvalMalformedRleNamesLine) {
    write_lines(dir_ / "gt.jsonl", {box(0, 0, 0, {})});
    std::ofstream(dir_ / "pred.jsonl") << to_json_line(box(0, 0, 0, 0.5)) << "\n"
                                       << R"({"category":1,"image_id":0,"mask":{"h":8,"rle":[3,100],"w":8},"score":0.5})"
                                       << "\n";
    const CliResult r = run("eval --pred " + (dir_ / "pred.jsonl").string() + " --gt " + (dir_ / "gt.jsonl").string());
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("line 2"), std::string::npos) << r.err;
}

TEST_F(Cli, EvalMissingFileIsIoError) {
    EXPECT_EQ(run("eval --pred " + (dir_ / "nope").string() + " --gt " + (dir_ / "nope2").string()).code, 3);
}

TEST_F(Cli, BenchCsv) {
    const CliResult r = run("bench --op conv3x3 --sizes 16,24 --reps 1");
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream is(r.out);
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "op,size,reps,median_ms,items_per_s");
    std::size_t rows = 0;
    while (std::getline(is, line)) {
        EXPECT_EQ(line.rfind("conv3x3,", 0), 0u) << line;
        ++rows;
    }
    EXPECT_EQ(rows, 2u);
    EXPECT_EQ(run("bench --op nothing").code, 2);
}

TEST_F(Cli, BenchMvForwardScalesWithArea) {
    const CliResult r = run("bench --op mv_forward --sizes 64,128 --reps 7");
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream is(r.out);
    std::string line;
    std::getline(is, line);
    std::vector<double> ms;
    while (std::getline(is, line)) {
        std::vector<std::string> cells;
        std::istringstream ls(line);
        for (std::string cell; std::getline(ls, cell, ',');) cells.push_back(cell);
        ASSERT_EQ(cells.size(), 5u) << line;
        ms.push_back(std::stod(cells[3]));
    }
    ASSERT_EQ(ms.size(), 2u);
    // 4x the pixels; allow a factor of 3 either way around linear.
    const double ratio = ms[1] / ms[0];
    EXPECT_GT(ratio, 4.0 / 3.0);
    EXPECT_LT(ratio, 12.0);
}

TEST_F(Cli, InspectTensorAndRejectsJunk) {
    save_tensor(dir_ / "t.mvtn", Tensor({2, 3}, {1, 2, 3, 4, 5, 6}));
    const CliResult r = run("inspect " + (dir_ / "t.mvtn").string());
    ASSERT_EQ(r.code, 0) << r.err;
    const json j = json::parse(r.out);
    EXPECT_EQ(j.at("kind"), "tensor");
    EXPECT_EQ(j.at("numel"), 6);
    EXPECT_EQ(j.at("max").get<double>(), 6.0);
    std::ofstream(dir_ / "junk.bin") << "JUNKJUNK";
    EXPECT_EQ(run("inspect " + (dir_ / "junk.bin").string()).code, 2);
}

TEST_F(Cli, TrainDeterministic) {
    ASSERT_EQ(run("gen-data --seed 2 --count 6 --size 16 --objects 1 --categories 2 --out " +
                  (dir_ / "d").string())
                  .code,
              0);
    std::ofstream(dir_ / "cfg.txt") << "slot = mv_adapter\nepochs = 2\nchannels = 4\nbatch = 2\n";
    const std::string common = "train --config " + (dir_ / "cfg.txt").string() + " --dataset " + (dir_ / "d").string();
    const CliResult a = run(common + " --out " + (dir_ / "ra").string());
    const CliResult b = run(common + " --out " + (dir_ / "rb").string());
    ASSERT_EQ(a.code, 0) << a.err;
    ASSERT_EQ(b.code, 0) << b.err;
    EXPECT_EQ(a.out, b.out);
    EXPECT_EQ(std::count(a.out.begin(), a.out.end(), '\n'), 2);
    EXPECT_EQ(slurp(dir_ / "ra" / "checkpoint.mvck"), slurp(dir_ / "rb" / "checkpoint.mvck"));
    EXPECT_EQ(slurp(dir_ / "ra" / "metrics.jsonl"), a.out);
    const CliResult ins = run("inspect " + (dir_ / "ra" / "checkpoint.mvck").string());
    ASSERT_EQ(ins.code, 0) << ins.err;
    EXPECT_EQ(json::parse(ins.out).at("kind"), "checkpoint");
    EXPECT_EQ(run("train --config " + (dir_ / "missing.txt").string()).code, 3);
}
