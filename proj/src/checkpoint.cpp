#include "coughkit/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>

#include <json.hpp>

#include "coughkit/errors.hpp"

namespace coughkit {

namespace {

const char kB64Alphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int b64_value(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+') return 62;
  if (c == '/') return 63;
  return -1;
}

std::string tensor_to_base64(const Tensor& t) {
  std::vector<unsigned char> bytes;
  bytes.reserve(t.size() * 4);
  for (double v : t.data) {
    uint32_t bits = std::bit_cast<uint32_t>(static_cast<float>(v));
    bytes.push_back(bits & 0xFF);
    bytes.push_back((bits >> 8) & 0xFF);
    bytes.push_back((bits >> 16) & 0xFF);
    bytes.push_back((bits >> 24) & 0xFF);
  }
  return base64_encode(bytes.data(), bytes.size());
}

Tensor tensor_from_base64(int rows, int cols, const std::string& text) {
  auto bytes = base64_decode(text);
  if (bytes.size() != static_cast<size_t>(rows) * cols * 4)
    fail(Errc::schema_error, "checkpoint: tensor payload size mismatch");
  Tensor t(rows, cols);
  for (size_t i = 0; i < t.size(); ++i) {
    uint32_t bits = static_cast<uint32_t>(bytes[4 * i]) |
                    (static_cast<uint32_t>(bytes[4 * i + 1]) << 8) |
                    (static_cast<uint32_t>(bytes[4 * i + 2]) << 16) |
                    (static_cast<uint32_t>(bytes[4 * i + 3]) << 24);
    t.data[i] = static_cast<double>(std::bit_cast<float>(bits));
  }
  return t;
}

}  // namespace

std::string base64_encode(const unsigned char* data, size_t len) {
  std::string out;
  out.reserve((len + 2) / 3 * 4);
  for (size_t i = 0; i < len; i += 3) {
    uint32_t chunk = static_cast<uint32_t>(data[i]) << 16;
    if (i + 1 < len) chunk |= static_cast<uint32_t>(data[i + 1]) << 8;
    if (i + 2 < len) chunk |= static_cast<uint32_t>(data[i + 2]);
    out.push_back(kB64Alphabet[(chunk >> 18) & 0x3F]);
    out.push_back(kB64Alphabet[(chunk >> 12) & 0x3F]);
    out.push_back(i + 1 < len ? kB64Alphabet[(chunk >> 6) & 0x3F] : '=');
    out.push_back(i + 2 < len ? kB64Alphabet[chunk & 0x3F] : '=');
  }
  return out;
}

std::vector<unsigned char> base64_decode(const std::string& text) {
  if (text.size() % 4 != 0) fail(Errc::schema_error, "base64: length must be a multiple of 4");
  std::vector<unsigned char> out;
  out.reserve(text.size() / 4 * 3);
  for (size_t i = 0; i < text.size(); i += 4) {
    uint32_t chunk = 0;
    int pad = 0;
    for (int j = 0; j < 4; ++j) {
      char c = text[i + j];
      if (c == '=') {
        chunk <<= 6;
        ++pad;
      } else {
        int v = b64_value(c);
        if (v < 0) fail(Errc::schema_error, "base64: invalid character");
        chunk = (chunk << 6) | static_cast<uint32_t>(v);
      }
    }
    out.push_back((chunk >> 16) & 0xFF);
    if (pad < 2) out.push_back((chunk >> 8) & 0xFF);
    if (pad < 1) out.push_back(chunk & 0xFF);
  }
  return out;
}

std::string checkpoint_to_json(const Checkpoint& ckpt) {
  nlohmann::json j;
  j["schema_version"] = ckpt.schema_version;
  j["encoder_config"] = {
      {"n_steps", ckpt.encoder_config.n_steps},
      {"n_d", ckpt.encoder_config.n_d},
      {"n_a", ckpt.encoder_config.n_a},
      {"gamma", ckpt.encoder_config.gamma},
      {"virtual_batch_size", ckpt.encoder_config.virtual_batch_size},
      {"epsilon", ckpt.encoder_config.epsilon},
      {"embed_dim", ckpt.encoder_config.embed_dim},
      {"out_dim", ckpt.encoder_config.out_dim},
  };
  j["fusion_config"] = {
      {"h1", ckpt.fusion_config.h1},
      {"h2", ckpt.fusion_config.h2},
      {"out_dim", ckpt.fusion_config.out_dim},
      {"num_classes", ckpt.fusion_config.num_classes},
      {"binary", ckpt.fusion_config.binary},
      {"alpha", ckpt.fusion_config.alpha},
      {"task", ckpt.task},
      {"class_names", ckpt.class_names},
  };
  j["feature_statistics"] = {
      {"age_mean", ckpt.feature_statistics.age_mean},
      {"age_std", ckpt.feature_statistics.age_std},
      {"cough_mean", ckpt.feature_statistics.cough_mean},
      {"cough_std", ckpt.feature_statistics.cough_std},
  };
  nlohmann::json tensors = nlohmann::json::object();
  for (const auto& [name, tensor] : ckpt.tensors) {
    tensors[name] = {{"shape", {tensor.rows, tensor.cols}}, {"data", tensor_to_base64(tensor)}};
  }
  j["tensors"] = std::move(tensors);
  return j.dump(2);
}

Checkpoint checkpoint_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::schema_error, std::string("checkpoint: invalid JSON: ") + e.what());
  }
  try {
    Checkpoint ckpt;
    ckpt.schema_version = j.at("schema_version").get<int>();
    if (ckpt.schema_version != 1)
      fail(Errc::schema_error, "checkpoint: unsupported schema version");
    const auto& ec = j.at("encoder_config");
    ckpt.encoder_config.n_steps = ec.at("n_steps").get<int>();
    ckpt.encoder_config.n_d = ec.at("n_d").get<int>();
    ckpt.encoder_config.n_a = ec.at("n_a").get<int>();
    ckpt.encoder_config.gamma = ec.at("gamma").get<double>();
    ckpt.encoder_config.virtual_batch_size = ec.at("virtual_batch_size").get<int>();
    ckpt.encoder_config.epsilon = ec.at("epsilon").get<double>();
    ckpt.encoder_config.embed_dim = ec.at("embed_dim").get<int>();
    ckpt.encoder_config.out_dim = ec.at("out_dim").get<int>();
    const auto& fc = j.at("fusion_config");
    ckpt.fusion_config.h1 = fc.at("h1").get<int>();
    ckpt.fusion_config.h2 = fc.at("h2").get<int>();
    ckpt.fusion_config.out_dim = fc.at("out_dim").get<int>();
    ckpt.fusion_config.num_classes = fc.at("num_classes").get<int>();
    ckpt.fusion_config.binary = fc.at("binary").get<bool>();
    ckpt.fusion_config.alpha = fc.at("alpha").get<double>();
    ckpt.task = fc.at("task").get<std::string>();
    ckpt.class_names = fc.at("class_names").get<std::vector<std::string>>();
    const auto& fs = j.at("feature_statistics");
    ckpt.feature_statistics.age_mean = fs.at("age_mean").get<double>();
    ckpt.feature_statistics.age_std = fs.at("age_std").get<double>();
    ckpt.feature_statistics.cough_mean = fs.at("cough_mean").get<std::vector<double>>();
    ckpt.feature_statistics.cough_std = fs.at("cough_std").get<std::vector<double>>();
    for (const auto& [name, spec] : j.at("tensors").items()) {
      int rows = spec.at("shape").at(0).get<int>();
      int cols = spec.at("shape").at(1).get<int>();
      ckpt.tensors[name] = tensor_from_base64(rows, cols, spec.at("data").get<std::string>());
    }
    return ckpt;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::schema_error, std::string("checkpoint: missing or mistyped field: ") + e.what());
  }
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path);
  if (!out) fail(Errc::io_error, "cannot write checkpoint: " + path);
  out << checkpoint_to_json(ckpt) << "\n";
  if (!out) fail(Errc::io_error, "write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::file_not_found, "no such checkpoint: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return checkpoint_from_json(text);
}

}  // namespace coughkit
