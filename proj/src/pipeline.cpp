#include "coughkit/pipeline.hpp"

#include <span>

#include "coughkit/errors.hpp"

namespace coughkit {

ExtractionResult extract_file(const std::string& wav_path, const std::string& id_prefix,
                              const std::string& label, const PreprocessConfig& cfg) {
  ExtractionResult result;
  AudioSignal raw = load_wav(wav_path);
  if (raw.samples.empty()) {
    result.warnings.push_back(wav_path + ": empty audio, no segments");
    return result;
  }

  AudioSignal prepared;
  try {
    prepared = preprocess(raw, cfg);
  } catch (const Error& e) {
    if (e.code() != Errc::degenerate_input) throw;
    result.warnings.push_back(wav_path + ": silent recording, no segments");
    return result;
  }

  auto segments = segment_coughs(prepared, cfg);
  if (segments.empty()) {
    result.warnings.push_back(wav_path + ": no cough segments above the silence threshold");
    return result;
  }

  MelFilterBank bank = MelFilterBank::make(26, cfg.frame_length, cfg.target_rate, 0.0,
                                           cfg.target_rate / 2.0);
  int emitted = 0;
  for (size_t s = 0; s < segments.size(); ++s) {
    if (segments[s].samples.size() < static_cast<size_t>(cfg.frame_length)) {
      result.warnings.push_back(wav_path + ": segment " + std::to_string(s) +
                                " shorter than one frame, skipped");
      continue;
    }
    FrameMatrix frames = frame_segment(segments[s], cfg.frame_length);
    std::vector<FrameFeatures> feats;
    for (int f = 0; f < frames.frames.rows; ++f) {
      std::span<const double> frame(frames.frames.data.data() +
                                        static_cast<size_t>(f) * cfg.frame_length,
                                    cfg.frame_length);
      try {
        feats.push_back(frame_features(frame, bank, cfg.target_rate));
      } catch (const Error& e) {
        if (e.code() != Errc::degenerate_input) throw;
        result.warnings.push_back(wav_path + ": degenerate frame skipped in segment " +
                                  std::to_string(s));
      }
    }
    if (feats.empty()) {
      result.warnings.push_back(wav_path + ": segment " + std::to_string(s) +
                                " had no usable frames");
      continue;
    }
    for (const SegmentFeatureVector& vec : aggregate(feats)) {
      FeatureRow row;
      row.segment_id = id_prefix + "#" + std::to_string(emitted++);
      row.label = label;
      row.values = vec.values;
      result.rows.push_back(std::move(row));
    }
  }
  return result;
}

}  // namespace coughkit
