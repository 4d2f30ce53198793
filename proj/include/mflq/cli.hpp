#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace mflq {

struct RunConfig {
    /// validate, solve, check-pd, check-rc, simulate, evaluate or example.
    std::string command;
    std::filesystem::path problem_path;
    std::filesystem::path compensator_path;
    std::filesystem::path law_path;
    int grid_steps = 2000;
    int paths = 10000;
    std::uint64_t seed = 42;
    int threads = 1;
    /// Also write the full ensemble as ensemble.bin (simulate).
    bool dump = false;
    std::filesystem::path output_dir;
    /// mv, speed or negdef.
    std::string example_name;
    std::map<std::string, double> overrides;
};

/// Output directory used when none is given: $MFLQ_OUT_DIR, else ./mflq_out.
std::filesystem::path default_output_dir();

/// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitInputError = 2;
inline constexpr int kExitNumericalFailure = 3;

/// Runs one command. Artifacts and manifest.json are written only when the command
/// completes (exit 0 or 1); each file goes through a temporary and a rename.
int run(const RunConfig& config, std::ostream& out, std::ostream& err);

/// Parses argv and runs; CLI usage errors give kExitInputError.
int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::string& data, std::uint64_t h = 1469598103934665603ULL);

}  // namespace mflq
