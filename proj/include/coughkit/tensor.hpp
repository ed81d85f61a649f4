#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "coughkit/errors.hpp"

namespace coughkit {

/// Dense row-major matrix of doubles. Row vectors are 1xN, column vectors Nx1.
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<size_t>(r) * static_cast<size_t>(c), fill) {}

  static Tensor from(int r, int c, std::vector<double> values) {
    Tensor t;
    t.rows = r;
    t.cols = c;
    if (values.size() != static_cast<size_t>(r) * static_cast<size_t>(c))
      fail(Errc::shape_mismatch, "Tensor::from: value count does not match shape");
    t.data = std::move(values);
    return t;
  }

  double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

  size_t size() const { return data.size(); }
  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }
};

/// Flat collection of named, shaped parameter arrays; the content of a model
/// checkpoint. std::map keeps iteration order deterministic.
using NamedTensorStore = std::map<std::string, Tensor>;

}  // namespace coughkit
