#pragma once

#include "mflq/riccati.hpp"
#include "mflq/simulation.hpp"

#include <filesystem>
#include <string>

namespace mflq {

/// %.17g with '.' as decimal separator regardless of locale.
std::string format_double(double v);

/// Columns t, P[i][j]..., Phat[i][j]..., phi[i]... (when present), Gamma[i][j]..., margin1, margin2.
std::string riccati_csv(const RiccatiSolution& sol);

/// Columns t, m[i]..., V[i][j]..., runningCost.
std::string moments_csv(const MomentState& moments);

/// Columns t, empMean[i]..., empVar[i][i]...
std::string ensemble_summary_csv(const PathEnsemble& ensemble);

/// Flat little-endian dump of a retained ensemble; layout in docs/ensemble_format.md.
///   header: char[8] "MFLQENS1", int32 n, m, d, N, steps, uint64 seed, float64 T, int32 mode
///   body:   X (N * nodes * n), U (N * nodes * m), dW (N * steps * d), path_cost (N); float64, row-major.
std::string ensemble_binary(const PathEnsemble& ensemble);
/// Inverse of ensemble_binary; summaries other than path costs are left empty.
PathEnsemble read_ensemble_binary(const std::string& bytes);

}  // namespace mflq
