#include "mflq/cli.hpp"
#include "mflq/examples.hpp"
#include "mflq/problem_io.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace mflq;
namespace fs = std::filesystem;

namespace {

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("mflq_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    fs::path write_problem(const ProblemSpec& spec, const std::string& name = "problem.json") {
        save_problem(spec, dir_ / name);
        return dir_ / name;
    }

    int run_config(RunConfig cfg) {
        out_.str("");
        err_.str("");
        return run(cfg, out_, err_);
    }

    /// Runs the installed binary through the shell; returns its exit status.
    int run_binary(const std::string& args, const std::string& env = "") {
        const std::string cmd = env + " \"" MFLQ_CLI_PATH "\" " + args + " > \"" + (dir_ / "stdout.txt").string() +
                                "\" 2> \"" + (dir_ / "stderr.txt").string() + "\"";
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    static std::string slurp(const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream os;
        os << in.rdbuf();
        return os.str();
    }

    fs::path dir_;
    std::ostringstream out_, err_;
};

ProblemSpec mv_problem() {
    return build_mean_variance(MarketModel::constant(0.05, Vector::Constant(1, 0.35), Matrix::Constant(1, 1, 1.0)),
                               1.0, 1.0, 1.0);
}

/// R = -1 with D = 1 and G = 0.5: the gain denominator is negative at T.
ProblemSpec singular_problem() {
    SpeedParams p;
    p.beta = 1.0;
    p.gamma = 0.5;
    return build_speed_example(p).spec;
}

}  // namespace

TEST_F(CliTest, CheckPdOnMeanVarianceFailsWithControlMessage) {
    RunConfig cfg;
    cfg.command = "check-pd";
    cfg.problem_path = write_problem(mv_problem());
    cfg.output_dir = dir_ / "out";
    EXPECT_EQ(run_config(cfg), kExitCheckFailed);
    EXPECT_NE(out_.str().find("R >> 0"), std::string::npos) << out_.str();
    EXPECT_TRUE(fs::exists(dir_ / "out" / "pd_report.json"));
}

TEST_F(CliTest, ValidateReportsAndMissingFileIsInputError) {
    RunConfig cfg;
    cfg.command = "validate";
    cfg.problem_path = write_problem(mv_problem());
    cfg.output_dir = dir_ / "out";
    EXPECT_EQ(run_config(cfg), kExitOk);
    auto j = problem_to_json(mv_problem());
    j["weights"]["Q"] = Json::parse(R"({"constant": [[1, 2]]})");
    j["weights"]["R"] = Json::parse(R"({"constant": [[0.0]]})");
    cfg.problem_path = dir_ / "bad.json";
    write_file_atomic(cfg.problem_path, dump_json(j));
    EXPECT_EQ(run_config(cfg), kExitCheckFailed);
    EXPECT_NE(out_.str().find("Q"), std::string::npos) << out_.str();
    cfg.problem_path = dir_ / "absent.json";
    EXPECT_EQ(run_config(cfg), kExitInputError);
    EXPECT_FALSE(err_.str().empty());
}

TEST_F(CliTest, SolveWritesArtifactsAndRerunsAreByteIdentical) {
    RunConfig cfg;
    cfg.command = "solve";
    cfg.problem_path = write_problem(mv_problem());
    cfg.grid_steps = 200;
    cfg.output_dir = dir_ / "a";
    ASSERT_EQ(run_config(cfg), kExitOk) << err_.str();
    cfg.output_dir = dir_ / "b";
    ASSERT_EQ(run_config(cfg), kExitOk);
    for (const char* f : {"riccati.csv", "solution.json", "manifest.json"}) {
        ASSERT_TRUE(fs::exists(dir_ / "a" / f)) << f;
        EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "b" / f)) << f;
    }
    const auto manifest = Json::parse(slurp(dir_ / "a" / "manifest.json"));
    EXPECT_EQ(manifest["command"], "solve");
    EXPECT_EQ(manifest["config_hash"].get<std::string>().size(), 16u);
}

TEST_F(CliTest, SimulateIsReproducibleAcrossThreadCounts) {
    RunConfig cfg;
    cfg.command = "simulate";
    cfg.problem_path = write_problem(build_speed_example({.beta = -0.3}).spec);
    cfg.grid_steps = 100;
    cfg.paths = 500;
    cfg.dump = true;
    cfg.output_dir = dir_ / "a";
    ASSERT_EQ(run_config(cfg), kExitOk) << err_.str();
    cfg.threads = 3;
    cfg.output_dir = dir_ / "b";
    ASSERT_EQ(run_config(cfg), kExitOk);
    for (const char* f : {"moments.csv", "ensemble_summary.csv", "cost.json", "ensemble.bin", "manifest.json"})
        EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "b" / f)) << f;
}

TEST_F(CliTest, SpeedExampleWritesItsCsvs) {
    RunConfig cfg;
    cfg.command = "example";
    cfg.example_name = "speed";
    cfg.grid_steps = 400;
    cfg.output_dir = dir_ / "out";
    EXPECT_EQ(run_config(cfg), kExitOk) << out_.str() << err_.str();
    for (const char* f : {"riccati.csv", "state.csv", "control.csv", "adjoint_y.csv", "adjoint_z.csv", "report.json"})
        EXPECT_TRUE(fs::exists(dir_ / "out" / f)) << f;
    cfg.overrides["nonsense"] = 1.0;
    EXPECT_EQ(run_config(cfg), kExitInputError);
}

TEST_F(CliTest, SingularProblemExitsThreeWithoutArtifacts) {
    RunConfig cfg;
    cfg.command = "solve";
    cfg.problem_path = write_problem(singular_problem());
    cfg.grid_steps = 100;
    cfg.output_dir = dir_ / "out";
    EXPECT_EQ(run_config(cfg), kExitNumericalFailure);
    EXPECT_FALSE(fs::exists(dir_ / "out" / "riccati.csv"));
    EXPECT_FALSE(fs::exists(dir_ / "out" / "manifest.json"));
}

TEST_F(CliTest, BinaryHonoursOutputDirectoryVariableAndExitCodes) {
    const auto problem = write_problem(mv_problem());
    const auto out = dir_ / "env_out";
    EXPECT_EQ(run_binary("solve \"" + problem.string() + "\" --grid-steps 100", "MFLQ_OUT_DIR=\"" + out.string() + "\""),
              0);
    EXPECT_TRUE(fs::exists(out / "riccati.csv"));
    EXPECT_EQ(run_binary("check-pd \"" + problem.string() + "\" --out \"" + (dir_ / "x").string() + "\""), 1);
    EXPECT_EQ(run_binary("solve \"" + (dir_ / "none.json").string() + "\" --out \"" + (dir_ / "x").string() + "\""),
              2);
    EXPECT_EQ(run_binary("frobnicate"), 2);
    const auto singular = write_problem(singular_problem(), "singular.json");
    EXPECT_EQ(run_binary("solve \"" + singular.string() + "\" --out \"" + (dir_ / "y").string() + "\""), 3);
    EXPECT_FALSE(fs::exists(dir_ / "y"));
}
