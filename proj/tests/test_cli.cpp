#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "ettwin/core/geometry.hpp"
#include "ettwin/core/image.hpp"
#include "ettwin/estimator/estimator.hpp"
#include "ettwin/eyescene/eyescene.hpp"

namespace fs = std::filesystem;
using namespace ettwin;

namespace {

const fs::path kWork = fs::temp_directory_path() / "ettwin_cli_test";

int run(const std::string& args, const std::string& tag) {
    const std::string cmd = std::string(ETTWIN_CLI) + " " + args + " > " + (kWork / (tag + ".out")).string() + " 2> " +
                            (kWork / (tag + ".err")).string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

class Cli : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        fs::remove_all(kWork);
        fs::create_directories(kWork);
    }
};

}  // namespace

TEST_F(Cli, RenderStraightAhead) {
    const auto out = kWork / "render0";
    ASSERT_EQ(run("render --target 0 --out " + out.string(), "render0"), 0) << slurp(kWork / "render0.err");
    const auto img = read_pgm(out / "frame.pgm");
    EXPECT_EQ(img.width(), 320);
    EXPECT_EQ(img.height(), 240);
    const auto sidecar = nlohmann::json::parse(slurp(out / "frame.json"));
    // Projected pupil center, computed from the frame's own eye and slippage.
    const auto rig = eyescene::default_rig();
    const auto eye = eyescene::apply_gaze(eyescene::generate_identity(sidecar["identity_seed"].get<std::uint64_t>()),
                                          Vec3(0, 0, 1));
    const Vec3 slip(sidecar["slippage"][0].get<double>(), sidecar["slippage"][1].get<double>(),
                    sidecar["slippage"][2].get<double>());
    CameraPose pose = rig.cameras[0].pose;
    pose.translation += slip;
    const Vec2 expected = project(eye.pupil_center(), rig.cameras[0].intrinsics, pose);
    const Vec2 found = estimator::pupil_centroid(img);
    EXPECT_LT((found - expected).norm(), 10.0) << found.transpose() << " vs " << expected.transpose();
    EXPECT_TRUE(fs::exists(out / "frame.etlf"));
    EXPECT_TRUE(fs::exists(out / "run.json"));
}

TEST_F(Cli, RenderReproducesFromRunJson) {
    const auto a = kWork / "repro_a", b = kWork / "repro_b";
    ASSERT_EQ(run("render --target 17 --identity 3 --slippage-index 2 --out " + a.string(), "repro_a"), 0);
    ASSERT_EQ(run("render --config " + (a / "run.json").string() + " --out " + b.string(), "repro_b"), 0)
        << slurp(kWork / "repro_b.err");
    EXPECT_EQ(read_file_bytes(a / "frame.pgm"), read_file_bytes(b / "frame.pgm"));
    EXPECT_EQ(read_file_bytes(a / "frame.etlf"), read_file_bytes(b / "frame.etlf"));
}

TEST_F(Cli, InvalidTarget) {
    EXPECT_EQ(run("render --target 114 --out " + (kWork / "bad").string(), "badtarget"), 2);
    const auto err = nlohmann::json::parse(slurp(kWork / "badtarget.err"));
    EXPECT_NE(err["error"]["message"].get<std::string>().find("[0,114)"), std::string::npos);
}

TEST_F(Cli, MalformedConfig) {
    write(kWork / "broken.json", "{\"spec_version\": 1, \"dataset\": {");
    EXPECT_EQ(run("sweep --config " + (kWork / "broken.json").string() + " --out " + (kWork / "x").string(), "broken"), 2);
    const auto err = nlohmann::json::parse(slurp(kWork / "broken.err"));
    EXPECT_EQ(err["error"]["kind"], "config");

    write(kWork / "unknown.json", R"({"spec_version": 1, "dataset": {"identity_cnt": 5}})");
    EXPECT_EQ(run("sweep --config " + (kWork / "unknown.json").string() + " --out " + (kWork / "y").string(), "unknown"),
              2);
    EXPECT_EQ(nlohmann::json::parse(slurp(kWork / "unknown.err"))["error"]["pointer"], "/dataset/identity_cnt");
}

TEST_F(Cli, SmallestSweepAndReport) {
    write(kWork / "sweep.json", R"({"spec_version": 1,
        "dataset": {"identity_count": 5, "slippage_per_gaze": 1},
        "sweep": {"axis": "blur_radius", "values": [0], "trials": 1}})");
    const auto out = kWork / "sweep";
    ASSERT_EQ(run("sweep --config " + (kWork / "sweep.json").string() + " --out " + out.string(), "sweep"), 0)
        << slurp(kWork / "sweep.err");
    const auto csv = slurp(out / "report.csv");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
    EXPECT_NE(csv.find(",ridge,"), std::string::npos);
    EXPECT_NE(csv.find(",geometric,"), std::string::npos);
    for (const char* f : {"p50.svg", "p75.svg", "p95.svg", "summary.json", "run.json"}) EXPECT_TRUE(fs::exists(out / f)) << f;

    const auto again = kWork / "sweep_again";
    ASSERT_EQ(run("sweep --workers 8 --config " + (out / "run.json").string() + " --out " + again.string(), "again"), 0)
        << slurp(kWork / "again.err");
    EXPECT_EQ(slurp(again / "report.csv"), csv);

    EXPECT_EQ(run("sweep --config " + (kWork / "sweep.json").string() + " --out " + out.string(), "exists"), 3);

    const auto rep = kWork / "report";
    ASSERT_EQ(run("report " + out.string() + " --out " + rep.string(), "report"), 0) << slurp(kWork / "report.err");
    EXPECT_TRUE(fs::exists(rep / "p95.svg"));
}

TEST_F(Cli, Selftest) { EXPECT_EQ(run("selftest", "selftest"), 0) << slurp(kWork / "selftest.out"); }
