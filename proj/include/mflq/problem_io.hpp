#pragma once

#include "mflq/compensator.hpp"
#include "mflq/problem.hpp"
#include "mflq/simulation.hpp"

#include "json.hpp"

#include <filesystem>
#include <string>

namespace mflq {

using Json = nlohmann::json;

/// Time function: {"constant": [[...]]} or
/// {"grid": {"count": K, "horizon": T, "samples": [[[...]], ...], "times": [...]}}.
/// "horizon" defaults to the enclosing horizon; "times", when present, must be uniform from 0.
Json time_function_to_json(const TimeFunctionMatrix& f);
TimeFunctionMatrix time_function_from_json(const Json& j, const std::string& where, double horizon);

Json matrix_to_json(const Matrix& a);
Matrix matrix_from_json(const Json& j, const std::string& where);

/// {T, n, m, d, x0, coefficients: {A, Atilde, B, Btilde, C: [..], Ctilde, D, Dtilde},
///  weights: {Q, Qtilde, S, Stilde, R, Rtilde, G, Gtilde, ell?}}; G and Gtilde are plain matrices.
Json problem_to_json(const ProblemSpec& spec);
/// Throws ParseError naming the missing or malformed field, then ValidationError with every violation.
ProblemSpec problem_from_json(const Json& j);

/// {H: {F0, fdot}, K: {F0, fdot}}.
Json compensator_to_json(const CompensatorPair& c);
CompensatorPair compensator_from_json(const Json& j, double horizon);

/// {Theta, ThetaHat, c}.
Json law_to_json(const FeedbackLaw& law);
FeedbackLaw law_from_json(const Json& j, double horizon);

Json read_json_file(const std::filesystem::path& path);

ProblemSpec load_problem(const std::filesystem::path& path);
void save_problem(const ProblemSpec& spec, const std::filesystem::path& path);
CompensatorPair load_compensator(const std::filesystem::path& path, double horizon);
void save_compensator(const CompensatorPair& c, const std::filesystem::path& path);
FeedbackLaw load_law(const std::filesystem::path& path, double horizon);
void save_law(const FeedbackLaw& law, const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

/// Two-space indented JSON with a trailing newline.
std::string dump_json(const Json& j);

}  // namespace mflq
