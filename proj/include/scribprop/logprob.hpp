#pragma once

#include "scribprop/core.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <string>

namespace scribprop {

/// Per-pixel log-probabilities over a label universe; row p holds pixel p.
struct LogProbMap {
  int width = 0;
  int height = 0;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> values;

  int num_labels() const { return static_cast<int>(values.cols()); }
};

/// Largest |sum_l exp(v_pl) - 1| over pixels.
double max_normalization_error(const LogProbMap& map);

/// Decodes the "SLPB" binary layout. Pixels whose exp-sum drifts by at most
/// 1e-3 are renormalized; larger drift raises NotNormalized.
LogProbMap decode_logprob(const std::string& bytes);
LogProbMap load_logprob_file(const std::filesystem::path& path);
std::string encode_logprob(const LogProbMap& map);
void save_logprob_file(const LogProbMap& map, const std::filesystem::path& path);

}  // namespace scribprop
