#pragma once

#include <string>
#include <vector>

#include "coughkit/audio.hpp"
#include "coughkit/features.hpp"

namespace coughkit {

/// Feature rows extracted from one recording plus any soft diagnostics
/// (degenerate frames skipped, silent file, ...). Hard I/O and format errors
/// still throw.
struct ExtractionResult {
  std::vector<FeatureRow> rows;
  std::vector<std::string> warnings;
};

/// Full per-file pipeline: load -> resample -> normalize -> high-pass ->
/// segment -> frame -> 22 features -> 44-dim aggregate (one row per cough
/// segment). segment ids are "<id_prefix>#<index>".
ExtractionResult extract_file(const std::string& wav_path, const std::string& id_prefix,
                              const std::string& label, const PreprocessConfig& cfg);

}  // namespace coughkit
