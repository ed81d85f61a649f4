#include "coughkit/config.hpp"

#include <fstream>
#include <set>

#include "coughkit/errors.hpp"

namespace coughkit {

namespace {

void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!allowed.count(key))
      fail(Errc::schema_error, "config: unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void get_if(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

ToolConfig tool_config_from_json(const nlohmann::json& j) {
  ToolConfig cfg;
  try {
    check_keys(j, {"preprocess", "encoder", "fusion", "train"}, "config root");

    if (j.contains("preprocess")) {
      const auto& p = j.at("preprocess");
      check_keys(p,
                 {"target_rate", "target_dbfs", "hpf_cutoff", "silence_threshold", "min_silence",
                  "min_segment", "frame_length"},
                 "preprocess");
      get_if(p, "target_rate", cfg.preprocess.target_rate);
      get_if(p, "target_dbfs", cfg.preprocess.target_dbfs);
      get_if(p, "hpf_cutoff", cfg.preprocess.hpf_cutoff);
      get_if(p, "silence_threshold", cfg.preprocess.silence_threshold);
      get_if(p, "min_silence", cfg.preprocess.min_silence);
      get_if(p, "min_segment", cfg.preprocess.min_segment);
      get_if(p, "frame_length", cfg.preprocess.frame_length);
      cfg.preprocess.validate();
    }

    if (j.contains("encoder")) {
      const auto& e = j.at("encoder");
      check_keys(e,
                 {"n_steps", "n_d", "n_a", "gamma", "virtual_batch_size", "epsilon", "embed_dim",
                  "out_dim"},
                 "encoder");
      get_if(e, "n_steps", cfg.train.encoder.n_steps);
      get_if(e, "n_d", cfg.train.encoder.n_d);
      get_if(e, "n_a", cfg.train.encoder.n_a);
      get_if(e, "gamma", cfg.train.encoder.gamma);
      get_if(e, "virtual_batch_size", cfg.train.encoder.virtual_batch_size);
      get_if(e, "epsilon", cfg.train.encoder.epsilon);
      get_if(e, "embed_dim", cfg.train.encoder.embed_dim);
      get_if(e, "out_dim", cfg.train.encoder.out_dim);
      cfg.train.encoder.validate();
    }

    if (j.contains("fusion")) {
      const auto& f = j.at("fusion");
      check_keys(f, {"h1", "h2"}, "fusion");
      get_if(f, "h1", cfg.train.fusion.h1);
      get_if(f, "h2", cfg.train.fusion.h2);
    }

    if (j.contains("train")) {
      const auto& t = j.at("train");
      check_keys(t,
                 {"learning_rate", "epochs", "batch_size", "alpha", "split_fraction", "seed"},
                 "train");
      get_if(t, "learning_rate", cfg.train.learning_rate);
      get_if(t, "epochs", cfg.train.epochs);
      get_if(t, "batch_size", cfg.train.batch_size);
      get_if(t, "alpha", cfg.train.alpha);
      get_if(t, "split_fraction", cfg.train.split_fraction);
      get_if(t, "seed", cfg.train.seed);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::schema_error, std::string("config: bad value: ") + e.what());
  }
  return cfg;
}

ToolConfig load_tool_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::file_not_found, "no such config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::schema_error, std::string("config: invalid JSON: ") + e.what());
  }
  return tool_config_from_json(j);
}

nlohmann::json tool_config_to_json(const ToolConfig& cfg) {
  return {
      {"preprocess",
       {{"target_rate", cfg.preprocess.target_rate},
        {"target_dbfs", cfg.preprocess.target_dbfs},
        {"hpf_cutoff", cfg.preprocess.hpf_cutoff},
        {"silence_threshold", cfg.preprocess.silence_threshold},
        {"min_silence", cfg.preprocess.min_silence},
        {"min_segment", cfg.preprocess.min_segment},
        {"frame_length", cfg.preprocess.frame_length}}},
      {"encoder",
       {{"n_steps", cfg.train.encoder.n_steps},
        {"n_d", cfg.train.encoder.n_d},
        {"n_a", cfg.train.encoder.n_a},
        {"gamma", cfg.train.encoder.gamma},
        {"virtual_batch_size", cfg.train.encoder.virtual_batch_size},
        {"epsilon", cfg.train.encoder.epsilon},
        {"embed_dim", cfg.train.encoder.embed_dim},
        {"out_dim", cfg.train.encoder.out_dim}}},
      {"fusion", {{"h1", cfg.train.fusion.h1}, {"h2", cfg.train.fusion.h2}}},
      {"train",
       {{"learning_rate", cfg.train.learning_rate},
        {"epochs", cfg.train.epochs},
        {"batch_size", cfg.train.batch_size},
        {"alpha", cfg.train.alpha},
        {"split_fraction", cfg.train.split_fraction},
        {"seed", cfg.train.seed}}},
  };
}

}  // namespace coughkit
