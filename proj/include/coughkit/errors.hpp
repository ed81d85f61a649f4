#pragma once

#include <stdexcept>
#include <string>

namespace coughkit {

/// Error categories surfaced by the toolkit. Each failure mode named in a
/// module contract maps to one distinct value.
enum class Errc {
  file_not_found,
  malformed_wav,
  unsupported_wav_encoding,
  invalid_argument,
  degenerate_input,
  schema_error,
  shape_mismatch,
  io_error,
};

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& msg) { throw Error(code, msg); }

}  // namespace coughkit
