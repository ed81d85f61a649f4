#include "coughkit/graph.hpp"

#include <cmath>

#include "coughkit/errors.hpp"

namespace coughkit::ad {

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) fail(Errc::shape_mismatch, std::string(op) + ": shape mismatch");
}

}  // namespace

namespace {
thread_local uint64_t g_activation_signature = 1469598103934665603ULL;  // FNV offset
}

void reset_activation_signature() { g_activation_signature = 1469598103934665603ULL; }

uint64_t activation_signature() { return g_activation_signature; }

void note_activation_bit(bool active) {
  g_activation_signature ^= active ? 0x9E3779B97F4A7C15ULL : 0xD1B54A32D192ED03ULL;
  g_activation_signature *= 1099511628211ULL;  // FNV prime
}

const Tensor& Var::value() const { return g_->value(id_); }
int Var::rows() const { return value().rows; }
int Var::cols() const { return value().cols; }

Var Graph::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = false;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Graph::leaf(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = true;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Graph::param(NamedTensorStore& store, const std::string& name) {
  auto it = param_ids_.find(name);
  if (it != param_ids_.end()) return Var(this, it->second);
  auto ts = store.find(name);
  if (ts == store.end()) fail(Errc::invalid_argument, "unknown parameter: " + name);
  Var v = leaf(ts->second);
  param_ids_[name] = v.id();
  return v;
}

Var Graph::emit(Tensor value, std::vector<int> parents, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  n.parents = std::move(parents);
  for (int p : n.parents)
    if (nodes_[p].needs_grad) n.needs_grad = true;
  if (n.needs_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

void Graph::backward(Var loss) {
  if (loss.rows() != 1 || loss.cols() != 1)
    fail(Errc::shape_mismatch, "backward: loss must be 1x1");
  double lv = loss.value().at(0, 0);
  if (!std::isfinite(lv)) fail(Errc::invalid_argument, "backward: non-finite loss");

  for (Node& n : nodes_) {
    if (n.needs_grad)
      n.grad = Tensor(n.value.rows, n.value.cols);
    else
      n.grad = Tensor();
  }
  if (!nodes_[loss.id()].needs_grad)
    return;  // loss does not depend on any tracked leaf; all gradients are zero
  nodes_[loss.id()].grad.at(0, 0) = 1.0;

  for (int id = loss.id(); id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.needs_grad || !n.backward) continue;
    n.backward(*this, n.grad);
  }
}

const Tensor& Graph::grad(Var v) const { return nodes_[v.id()].grad; }

Tensor* Graph::grad_if_needed(int id) {
  Node& n = nodes_[id];
  if (!n.needs_grad) return nullptr;
  return &n.grad;
}

std::map<std::string, Tensor> Graph::param_grads() const {
  std::map<std::string, Tensor> out;
  for (const auto& [name, id] : param_ids_) out[name] = nodes_[id].grad;
  return out;
}

double scalar(Var v) {
  if (v.rows() != 1 || v.cols() != 1) fail(Errc::shape_mismatch, "scalar: node is not 1x1");
  return v.value().at(0, 0);
}

// ---- ops -------------------------------------------------------------------

Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols != bv.rows) fail(Errc::shape_mismatch, "matmul: inner dimensions differ");
  Tensor out(av.rows, bv.cols);
  for (int i = 0; i < av.rows; ++i)
    for (int k = 0; k < av.cols; ++k) {
      double aik = av.at(i, k);
      if (aik == 0.0) continue;
      for (int j = 0; j < bv.cols; ++j) out.at(i, j) += aik * bv.at(k, j);
    }
  int aid = a.id(), bid = b.id();
  return a.graph().emit(std::move(out), {aid, bid}, [aid, bid](Graph& g, const Tensor& go) {
    const Tensor& av2 = g.value(aid);
    const Tensor& bv2 = g.value(bid);
    if (Tensor* da = g.grad_if_needed(aid)) {
      for (int i = 0; i < av2.rows; ++i)
        for (int j = 0; j < bv2.cols; ++j) {
          double gij = go.at(i, j);
          if (gij == 0.0) continue;
          for (int k = 0; k < av2.cols; ++k) da->at(i, k) += gij * bv2.at(k, j);
        }
    }
    if (Tensor* db = g.grad_if_needed(bid)) {
      for (int i = 0; i < av2.rows; ++i)
        for (int k = 0; k < av2.cols; ++k) {
          double aik = av2.at(i, k);
          if (aik == 0.0) continue;
          for (int j = 0; j < bv2.cols; ++j) db->at(k, j) += aik * go.at(i, j);
        }
    }
  });
}

Var add(Var a, Var b) {
  check_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  for (size_t i = 0; i < out.size(); ++i) out.data[i] += b.value().data[i];
  int aid = a.id(), bid = b.id();
  return a.graph().emit(std::move(out), {aid, bid}, [aid, bid](Graph& g, const Tensor& go) {
    if (Tensor* da = g.grad_if_needed(aid))
      for (size_t i = 0; i < go.size(); ++i) da->data[i] += go.data[i];
    if (Tensor* db = g.grad_if_needed(bid))
      for (size_t i = 0; i < go.size(); ++i) db->data[i] += go.data[i];
  });
}

Var sub(Var a, Var b) {
  check_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  for (size_t i = 0; i < out.size(); ++i) out.data[i] -= b.value().data[i];
  int aid = a.id(), bid = b.id();
  return a.graph().emit(std::move(out), {aid, bid}, [aid, bid](Graph& g, const Tensor& go) {
    if (Tensor* da = g.grad_if_needed(aid))
      for (size_t i = 0; i < go.size(); ++i) da->data[i] += go.data[i];
    if (Tensor* db = g.grad_if_needed(bid))
      for (size_t i = 0; i < go.size(); ++i) db->data[i] -= go.data[i];
  });
}

Var mul(Var a, Var b) {
  check_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  for (size_t i = 0; i < out.size(); ++i) out.data[i] *= b.value().data[i];
  int aid = a.id(), bid = b.id();
  return a.graph().emit(std::move(out), {aid, bid}, [aid, bid](Graph& g, const Tensor& go) {
    const Tensor& av = g.value(aid);
    const Tensor& bv = g.value(bid);
    if (Tensor* da = g.grad_if_needed(aid))
      for (size_t i = 0; i < go.size(); ++i) da->data[i] += go.data[i] * bv.data[i];
    if (Tensor* db = g.grad_if_needed(bid))
      for (size_t i = 0; i < go.size(); ++i) db->data[i] += go.data[i] * av.data[i];
  });
}

Var add_rowvec(Var a, Var bias) {
  const Tensor& av = a.value();
  const Tensor& bv = bias.value();
  if (bv.rows != 1 || bv.cols != av.cols)
    fail(Errc::shape_mismatch, "add_rowvec: bias must be 1 x cols");
  Tensor out = av;
  for (int i = 0; i < av.rows; ++i)
    for (int j = 0; j < av.cols; ++j) out.at(i, j) += bv.at(0, j);
  int aid = a.id(), bid = bias.id();
  return a.graph().emit(std::move(out), {aid, bid}, [aid, bid](Graph& g, const Tensor& go) {
    if (Tensor* da = g.grad_if_needed(aid))
      for (size_t i = 0; i < go.size(); ++i) da->data[i] += go.data[i];
    if (Tensor* db = g.grad_if_needed(bid))
      for (int i = 0; i < go.rows; ++i)
        for (int j = 0; j < go.cols; ++j) db->at(0, j) += go.at(i, j);
  });
}

Var scale(Var a, double c) {
  Tensor out = a.value();
  for (double& v : out.data) v *= c;
  int aid = a.id();
  return a.graph().emit(std::move(out), {aid}, [aid, c](Graph& g, const Tensor& go) {
    if (Tensor* da = g.grad_if_needed(aid))
      for (size_t i = 0; i < go.size(); ++i) da->data[i] += c * go.data[i];
  });
}

Var add_scalar(Var a, double c) {
  Tensor out = a.value();
  for (double& v : out.data) v += c;
  int aid = a.id();
  return a.graph().emit(std::move(out), {aid}, [aid](Graph& g, const Tensor& go) {
    if (Tensor* da = g.grad_if_needed(aid))
      for (size_t i = 0; i < go.size(); ++i) da->data[i] += go.data[i];
  });
}

Var relu(Var a) {
  Tensor out = a.value();
  for (double& v : out.data) {
    note_activation_bit(v > 0.0);
    v = v > 0.0 ? v : 0.0;
  }
  int aid = a.id();
  return a.graph().emit(std::move(out), {aid}, [aid](Graph& g, const Tensor& go) {
    if (Tensor* da = g.grad_if_needed(aid)) {
      const Tensor& av = g.value(aid);
      for (size_t i = 0; i < go.size(); ++i)
        if (av.data[i] > 0.0) da->data[i] += go.data[i];
    }
  });
}

Var sigmoid(Var a) {
  Tensor out = a.value();
  for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
  Tensor cached = out;
  int aid = a.id();
  return a.graph().emit(std::move(out), {aid},
                        [aid, cached = std::move(cached)](Graph& g, const Tensor& go) {
    if (Tensor* da = g.grad_if_needed(aid))
      for (size_t i = 0; i < go.size(); ++i) {
        double s = cached.data[i];
        da->data[i] += go.data[i] * s * (1.0 - s);
      }
  });
}

Var log_shift(Var a, double eps) {
  Tensor out = a.value();
  for (double& v : out.data) v = std::log(v + eps);
  int aid = a.id();
  return a.graph().emit(std::move(out), {aid}, [aid, eps](Graph& g, const Tensor& go) {
    if (Tensor* da = g.grad_if_needed(aid)) {
      const Tensor& av = g.value(aid);
      for (size_t i = 0; i < go.size(); ++i) da->data[i] += go.data[i] / (av.data[i] + eps);
    }
  });
}

Var clamp(Var a, double lo, double hi) {
  Tensor out = a.value();
  for (double& v : out.data) {
    note_activation_bit(v > lo && v < hi);
    v = v < lo ? lo : (v > hi ? hi : v);
  }
  int aid = a.id();
  return a.graph().emit(std::move(out), {aid}, [aid, lo, hi](Graph& g, const Tensor& go) {
    if (Tensor* da = g.grad_if_needed(aid)) {
      const Tensor& av = g.value(aid);
      for (size_t i = 0; i < go.size(); ++i)
        if (av.data[i] > lo && av.data[i] < hi) da->data[i] += go.data[i];
    }
  });
}

Var concat_cols(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rows != bv.rows) fail(Errc::shape_mismatch, "concat_cols: row counts differ");
  Tensor out(av.rows, av.cols + bv.cols);
  for (int i = 0; i < av.rows; ++i) {
    for (int j = 0; j < av.cols; ++j) out.at(i, j) = av.at(i, j);
    for (int j = 0; j < bv.cols; ++j) out.at(i, av.cols + j) = bv.at(i, j);
  }
  int aid = a.id(), bid = b.id();
  int acols = av.cols, bcols = bv.cols;
  return a.graph().emit(std::move(out), {aid, bid},
                        [aid, bid, acols, bcols](Graph& g, const Tensor& go) {
    if (Tensor* da = g.grad_if_needed(aid))
      for (int i = 0; i < go.rows; ++i)
        for (int j = 0; j < acols; ++j) da->at(i, j) += go.at(i, j);
    if (Tensor* db = g.grad_if_needed(bid))
      for (int i = 0; i < go.rows; ++i)
        for (int j = 0; j < bcols; ++j) db->at(i, j) += go.at(i, acols + j);
  });
}

Var slice_cols(Var a, int col_begin, int col_end) {
  const Tensor& av = a.value();
  if (col_begin < 0 || col_end > av.cols || col_begin >= col_end)
    fail(Errc::shape_mismatch, "slice_cols: bad column range");
  Tensor out(av.rows, col_end - col_begin);
  for (int i = 0; i < av.rows; ++i)
    for (int j = col_begin; j < col_end; ++j) out.at(i, j - col_begin) = av.at(i, j);
  int aid = a.id();
  return a.graph().emit(std::move(out), {aid}, [aid, col_begin](Graph& g, const Tensor& go) {
    if (Tensor* da = g.grad_if_needed(aid))
      for (int i = 0; i < go.rows; ++i)
        for (int j = 0; j < go.cols; ++j) da->at(i, col_begin + j) += go.at(i, j);
  });
}

Var sum_all(Var a) {
  double acc = 0.0;
  for (double v : a.value().data) acc += v;
  Tensor out(1, 1);
  out.at(0, 0) = acc;
  int aid = a.id();
  return a.graph().emit(std::move(out), {aid}, [aid](Graph& g, const Tensor& go) {
    if (Tensor* da = g.grad_if_needed(aid)) {
      double gv = go.at(0, 0);
      for (double& v : da->data) v += gv;
    }
  });
}

Var softmax_rows(Var a) {
  Tensor out = a.value();
  for (int i = 0; i < out.rows; ++i) {
    double mx = out.at(i, 0);
    for (int j = 1; j < out.cols; ++j) mx = std::max(mx, out.at(i, j));
    double sum = 0.0;
    for (int j = 0; j < out.cols; ++j) {
      out.at(i, j) = std::exp(out.at(i, j) - mx);
      sum += out.at(i, j);
    }
    for (int j = 0; j < out.cols; ++j) out.at(i, j) /= sum;
  }
  Tensor cached = out;
  int aid = a.id();
  return a.graph().emit(std::move(out), {aid},
                        [aid, cached = std::move(cached)](Graph& g, const Tensor& go) {
    if (Tensor* da = g.grad_if_needed(aid)) {
      for (int i = 0; i < go.rows; ++i) {
        double dot = 0.0;
        for (int j = 0; j < go.cols; ++j) dot += go.at(i, j) * cached.at(i, j);
        for (int j = 0; j < go.cols; ++j)
          da->at(i, j) += cached.at(i, j) * (go.at(i, j) - dot);
      }
    }
  });
}

Var min_elem(Var a, Var b) {
  check_same_shape(a.value(), b.value(), "min_elem");
  Tensor out = a.value();
  for (size_t i = 0; i < out.size(); ++i) {
    bool a_smaller = out.data[i] <= b.value().data[i];
    note_activation_bit(a_smaller);
    if (!a_smaller) out.data[i] = b.value().data[i];
  }
  int aid = a.id(), bid = b.id();
  return a.graph().emit(std::move(out), {aid, bid}, [aid, bid](Graph& g, const Tensor& go) {
    const Tensor& av = g.value(aid);
    const Tensor& bv = g.value(bid);
    Tensor* da = g.grad_if_needed(aid);
    Tensor* db = g.grad_if_needed(bid);
    for (size_t i = 0; i < go.size(); ++i) {
      if (av.data[i] <= bv.data[i]) {
        if (da) da->data[i] += go.data[i];
      } else {
        if (db) db->data[i] += go.data[i];
      }
    }
  });
}

Var embedding_rows(Var table, const std::vector<int>& indices) {
  const Tensor& tv = table.value();
  Tensor out(static_cast<int>(indices.size()), tv.cols);
  for (size_t b = 0; b < indices.size(); ++b) {
    int idx = indices[b];
    if (idx < 0 || idx >= tv.rows) fail(Errc::invalid_argument, "embedding_rows: index out of range");
    for (int j = 0; j < tv.cols; ++j) out.at(static_cast<int>(b), j) = tv.at(idx, j);
  }
  int tid = table.id();
  return table.graph().emit(std::move(out), {tid},
                            [tid, indices](Graph& g, const Tensor& go) {
    if (Tensor* dt = g.grad_if_needed(tid))
      for (int b = 0; b < go.rows; ++b)
        for (int j = 0; j < go.cols; ++j) dt->at(indices[b], j) += go.at(b, j);
  });
}

namespace {

struct BnChunk {
  int row_begin, row_end;
  std::vector<double> inv_std;  // per column
};

}  // namespace

Var ghost_batch_norm(Var x, Var gamma, Var beta, BnState state, int virtual_batch_size,
                     Mode mode, double momentum, double eps) {
  const Tensor& xv = x.value();
  const int rows = xv.rows, cols = xv.cols;
  if (gamma.value().cols != cols || gamma.value().rows != 1 || beta.value().cols != cols ||
      beta.value().rows != 1)
    fail(Errc::shape_mismatch, "batch_norm: gamma/beta must be 1 x cols");
  if (!state.running_mean || !state.running_var ||
      state.running_mean->cols != cols || state.running_var->cols != cols)
    fail(Errc::shape_mismatch, "batch_norm: running statistics must be 1 x cols");
  if (virtual_batch_size < 1) fail(Errc::invalid_argument, "batch_norm: virtual batch size < 1");
  if (rows < 1) fail(Errc::invalid_argument, "batch_norm: empty batch");

  const Tensor& gv = gamma.value();
  const Tensor& bv = beta.value();
  int xid = x.id(), gid = gamma.id(), bid = beta.id();

  if (mode == Mode::infer) {
    Tensor xhat(rows, cols);
    Tensor out(rows, cols);
    std::vector<double> inv_std(cols);
    for (int j = 0; j < cols; ++j)
      inv_std[j] = 1.0 / std::sqrt(state.running_var->at(0, j) + eps);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) {
        xhat.at(i, j) = (xv.at(i, j) - state.running_mean->at(0, j)) * inv_std[j];
        out.at(i, j) = gv.at(0, j) * xhat.at(i, j) + bv.at(0, j);
      }
    Tensor cached_gamma = gv;
    return x.graph().emit(std::move(out), {xid, gid, bid},
                          [xid, gid, bid, xhat = std::move(xhat), inv_std,
                           cached_gamma = std::move(cached_gamma)](Graph& g, const Tensor& go) {
      if (Tensor* dx = g.grad_if_needed(xid))
        for (int i = 0; i < go.rows; ++i)
          for (int j = 0; j < go.cols; ++j)
            dx->at(i, j) += go.at(i, j) * cached_gamma.at(0, j) * inv_std[j];
      if (Tensor* dg = g.grad_if_needed(gid))
        for (int i = 0; i < go.rows; ++i)
          for (int j = 0; j < go.cols; ++j) dg->at(0, j) += go.at(i, j) * xhat.at(i, j);
      if (Tensor* db = g.grad_if_needed(bid))
        for (int i = 0; i < go.rows; ++i)
          for (int j = 0; j < go.cols; ++j) db->at(0, j) += go.at(i, j);
    });
  }

  // Training mode: per-chunk batch statistics; running statistics updated as
  // an EMA, chunk by chunk in order.
  Tensor xhat(rows, cols);
  Tensor out(rows, cols);
  std::vector<BnChunk> chunks;
  for (int r0 = 0; r0 < rows; r0 += virtual_batch_size) {
    const int r1 = std::min(rows, r0 + virtual_batch_size);
    const double count = r1 - r0;
    BnChunk chunk{r0, r1, std::vector<double>(cols)};
    for (int j = 0; j < cols; ++j) {
      double mean = 0.0;
      for (int i = r0; i < r1; ++i) mean += xv.at(i, j);
      mean /= count;
      double var = 0.0;
      for (int i = r0; i < r1; ++i) {
        double d = xv.at(i, j) - mean;
        var += d * d;
      }
      var /= count;
      double inv = 1.0 / std::sqrt(var + eps);
      chunk.inv_std[j] = inv;
      for (int i = r0; i < r1; ++i) {
        xhat.at(i, j) = (xv.at(i, j) - mean) * inv;
        out.at(i, j) = gv.at(0, j) * xhat.at(i, j) + bv.at(0, j);
      }
      state.running_mean->at(0, j) = momentum * state.running_mean->at(0, j) + (1.0 - momentum) * mean;
      state.running_var->at(0, j) = momentum * state.running_var->at(0, j) + (1.0 - momentum) * var;
    }
    chunks.push_back(std::move(chunk));
  }

  Tensor cached_gamma = gv;
  return x.graph().emit(std::move(out), {xid, gid, bid},
                        [xid, gid, bid, xhat = std::move(xhat), chunks = std::move(chunks),
                         cached_gamma = std::move(cached_gamma)](Graph& g, const Tensor& go) {
    Tensor* dx = g.grad_if_needed(xid);
    Tensor* dg = g.grad_if_needed(gid);
    Tensor* db = g.grad_if_needed(bid);
    for (const BnChunk& chunk : chunks) {
      const double count = chunk.row_end - chunk.row_begin;
      for (int j = 0; j < go.cols; ++j) {
        double sum_g = 0.0, sum_gx = 0.0;
        for (int i = chunk.row_begin; i < chunk.row_end; ++i) {
          sum_g += go.at(i, j);
          sum_gx += go.at(i, j) * xhat.at(i, j);
        }
        if (dg) dg->at(0, j) += sum_gx;
        if (db) db->at(0, j) += sum_g;
        if (dx) {
          const double k = cached_gamma.at(0, j) * chunk.inv_std[j];
          for (int i = chunk.row_begin; i < chunk.row_end; ++i)
            dx->at(i, j) += k * (go.at(i, j) - sum_g / count - xhat.at(i, j) * sum_gx / count);
        }
      }
    }
  });
}

Var batch_norm(Var x, Var gamma, Var beta, BnState state, Mode mode, double momentum,
               double eps) {
  return ghost_batch_norm(x, gamma, beta, state, std::max(1, x.rows()), mode, momentum, eps);
}

}  // namespace coughkit::ad
