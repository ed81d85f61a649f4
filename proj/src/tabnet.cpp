#include "coughkit/tabnet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "coughkit/errors.hpp"

namespace coughkit {

using ad::Graph;
using ad::Mode;
using ad::Var;

void EncoderConfig::validate() const {
  if (n_steps < 1) fail(Errc::invalid_argument, "encoder: n_steps must be >= 1");
  if (n_d < 1 || n_a < 1) fail(Errc::invalid_argument, "encoder: n_d and n_a must be >= 1");
  if (gamma < 1.0) fail(Errc::invalid_argument, "encoder: gamma must be >= 1");
  if (virtual_batch_size < 1) fail(Errc::invalid_argument, "encoder: virtual_batch_size must be >= 1");
  if (embed_dim < 1 || out_dim < 1) fail(Errc::invalid_argument, "encoder: widths must be >= 1");
}

std::vector<double> sparsemax(std::span<const double> scores) {
  const size_t n = scores.size();
  if (n == 0) fail(Errc::invalid_argument, "sparsemax: empty input");
  for (double v : scores)
    if (!std::isfinite(v)) fail(Errc::invalid_argument, "sparsemax: non-finite input");

  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<double>());

  double cumulative = 0.0;
  double tau = 0.0;
  for (size_t k = 1; k <= n; ++k) {
    cumulative += sorted[k - 1];
    double candidate = (cumulative - 1.0) / static_cast<double>(k);
    if (sorted[k - 1] > candidate) tau = candidate;
  }

  std::vector<double> out(n);
  for (size_t i = 0; i < n; ++i) {
    out[i] = std::max(scores[i] - tau, 0.0);
    ad::note_activation_bit(out[i] > 0.0);
  }
  return out;
}

Var sparsemax_rows(Var scores) {
  const Tensor& sv = scores.value();
  Tensor out(sv.rows, sv.cols);
  for (int i = 0; i < sv.rows; ++i) {
    std::span<const double> row(sv.data.data() + static_cast<size_t>(i) * sv.cols, sv.cols);
    auto projected = sparsemax(row);
    for (int j = 0; j < sv.cols; ++j) out.at(i, j) = projected[j];
  }
  Tensor cached = out;
  int sid = scores.id();
  return scores.graph().emit(std::move(out), {sid},
                             [sid, cached = std::move(cached)](Graph& g, const Tensor& go) {
    Tensor* ds = g.grad_if_needed(sid);
    if (!ds) return;
    // Jacobian on the support S: diag(1) - 1/|S|; zero elsewhere.
    for (int i = 0; i < go.rows; ++i) {
      double sum = 0.0;
      int count = 0;
      for (int j = 0; j < go.cols; ++j)
        if (cached.at(i, j) > 0.0) {
          sum += go.at(i, j);
          ++count;
        }
      if (count == 0) continue;
      double mean = sum / count;
      for (int j = 0; j < go.cols; ++j)
        if (cached.at(i, j) > 0.0) ds->at(i, j) += go.at(i, j) - mean;
    }
  });
}

std::vector<double> capped_sparsemax(std::span<const double> scores,
                                     std::span<const double> caps) {
  const size_t n = scores.size();
  if (n == 0 || caps.size() != n)
    fail(Errc::shape_mismatch, "capped_sparsemax: score/cap size mismatch");
  double cap_total = 0.0;
  for (size_t j = 0; j < n; ++j) {
    if (!std::isfinite(scores[j])) fail(Errc::invalid_argument, "capped_sparsemax: non-finite score");
    if (!(caps[j] >= 0.0)) fail(Errc::invalid_argument, "capped_sparsemax: negative cap");
    cap_total += caps[j];
  }
  if (cap_total < 1.0 - 1e-9)
    fail(Errc::invalid_argument, "capped_sparsemax: caps sum below 1, projection infeasible");

  // sum_j clamp(z_j - tau, 0, cap_j) is piecewise linear and nonincreasing in
  // tau; walk its breakpoints (z_j and z_j - cap_j) to the segment containing
  // the crossing with 1, then interpolate exactly.
  auto mass = [&](double tau) {
    double acc = 0.0;
    for (size_t j = 0; j < n; ++j) acc += std::clamp(scores[j] - tau, 0.0, caps[j]);
    return acc;
  };
  std::vector<double> breakpoints;
  breakpoints.reserve(2 * n);
  for (size_t j = 0; j < n; ++j) {
    breakpoints.push_back(scores[j]);
    breakpoints.push_back(scores[j] - caps[j]);
  }
  std::sort(breakpoints.begin(), breakpoints.end(), std::greater<double>());

  double tau = breakpoints.back();
  double prev_bp = breakpoints.front();
  double prev_mass = mass(prev_bp);  // 0 at the top breakpoint
  bool found = false;
  for (size_t k = 1; k < breakpoints.size(); ++k) {
    const double bp = breakpoints[k];
    const double m = mass(bp);
    if (m >= 1.0) {
      tau = (m == prev_mass) ? bp : bp + (m - 1.0) * (prev_bp - bp) / (m - prev_mass);
      found = true;
      break;
    }
    prev_bp = bp;
    prev_mass = m;
  }
  if (!found) tau = breakpoints.back();  // caps sum to exactly 1

  std::vector<double> out(n);
  for (size_t j = 0; j < n; ++j) {
    out[j] = std::clamp(scores[j] - tau, 0.0, caps[j]);
    const double slack = scores[j] - tau;
    ad::note_activation_bit(slack > 0.0);
    ad::note_activation_bit(slack < caps[j]);
  }
  return out;
}

ad::Var capped_sparsemax_rows(Var scores, Var caps) {
  const Tensor& sv = scores.value();
  const Tensor& cv = caps.value();
  if (!sv.same_shape(cv)) fail(Errc::shape_mismatch, "capped_sparsemax_rows: shape mismatch");

  Tensor out(sv.rows, sv.cols);
  for (int i = 0; i < sv.rows; ++i) {
    std::span<const double> row(sv.data.data() + static_cast<size_t>(i) * sv.cols, sv.cols);
    std::span<const double> cap_row(cv.data.data() + static_cast<size_t>(i) * cv.cols, cv.cols);
    auto projected = capped_sparsemax(row, cap_row);
    for (int j = 0; j < sv.cols; ++j) out.at(i, j) = projected[j];
  }
  Tensor cached = out;
  int sid = scores.id(), cid = caps.id();
  return scores.graph().emit(std::move(out), {sid, cid},
                             [sid, cid, cached = std::move(cached)](Graph& g, const Tensor& go) {
    const Tensor& cv2 = g.value(cid);
    Tensor* ds = g.grad_if_needed(sid);
    Tensor* dc = g.grad_if_needed(cid);
    if (!ds && !dc) return;
    for (int i = 0; i < go.rows; ++i) {
      // Free coordinates move with tau; capped ones follow their cap.
      double free_sum = 0.0;
      int free_count = 0;
      for (int j = 0; j < go.cols; ++j) {
        const double m = cached.at(i, j);
        if (m > 0.0 && m < cv2.at(i, j)) {
          free_sum += go.at(i, j);
          ++free_count;
        }
      }
      const double free_mean = free_count ? free_sum / free_count : 0.0;
      for (int j = 0; j < go.cols; ++j) {
        const double m = cached.at(i, j);
        if (m > 0.0 && m < cv2.at(i, j)) {
          if (ds) ds->at(i, j) += go.at(i, j) - free_mean;
        } else if (m >= cv2.at(i, j) && m > 0.0) {
          if (dc) dc->at(i, j) += go.at(i, j) - free_mean;
        } else if (m == 0.0 && cv2.at(i, j) == 0.0) {
          // Fully spent feature: the zero cap still carries the gradient.
          if (dc) dc->at(i, j) += go.at(i, j) - free_mean;
        }
      }
    }
  });
}

namespace {

Tensor uniform_init(int rows, int cols, int fan_in, Rng& rng) {
  Tensor t(rows, cols);
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max(1, fan_in)));
  for (double& v : t.data) v = rng.uniform(-bound, bound);
  return t;
}

void init_linear(NamedTensorStore& store, const std::string& prefix, int in_dim, int out_dim,
                 Rng& rng) {
  store[prefix + ".w"] = uniform_init(in_dim, out_dim, in_dim, rng);
  store[prefix + ".b"] = Tensor(1, out_dim);
}

void init_bn(NamedTensorStore& store, const std::string& prefix, int dim) {
  store[prefix + ".bn_gamma"] = Tensor(1, dim, 1.0);
  store[prefix + ".bn_beta"] = Tensor(1, dim);
  store[prefix + ".bn_running_mean"] = Tensor(1, dim);
  store[prefix + ".bn_running_var"] = Tensor(1, dim, 1.0);
}

void init_glu(NamedTensorStore& store, const std::string& prefix, int in_dim, int hidden,
              Rng& rng) {
  init_linear(store, prefix, in_dim, 2 * hidden, rng);
  init_bn(store, prefix, 2 * hidden);
}

ad::BnState bn_state(NamedTensorStore& store, const std::string& prefix) {
  return {&store.at(prefix + ".bn_running_mean"), &store.at(prefix + ".bn_running_var")};
}

constexpr double kBnMomentum = 0.9;

int clamp_vbs(int virtual_batch_size, int batch) { return std::min(virtual_batch_size, batch); }

}  // namespace

void init_tabnet_params(NamedTensorStore& store, const EncoderConfig& cfg, int input_dim,
                        Rng& rng) {
  cfg.validate();
  const int hidden = cfg.n_d + cfg.n_a;

  store["tabnet.embed.gender"] = uniform_init(kGenderLevels, cfg.embed_dim, cfg.embed_dim, rng);
  init_bn(store, "tabnet.input", input_dim);

  init_glu(store, "tabnet.ft.shared0", input_dim, hidden, rng);
  init_glu(store, "tabnet.ft.shared1", hidden, hidden, rng);
  for (int step = 0; step <= cfg.n_steps; ++step) {
    const std::string base = "tabnet.ft.step" + std::to_string(step);
    init_glu(store, base + ".a", hidden, hidden, rng);
    init_glu(store, base + ".b", hidden, hidden, rng);
  }
  for (int step = 1; step <= cfg.n_steps; ++step) {
    const std::string base = "tabnet.at.step" + std::to_string(step);
    init_linear(store, base, cfg.n_a, input_dim, rng);
    init_bn(store, base, input_dim);
  }
  init_linear(store, "tabnet.out", cfg.n_d, cfg.out_dim, rng);
}

ad::Var embed_and_normalize(Graph& g, NamedTensorStore& store,
                            const std::vector<SymptomRecord>& records,
                            const FeatureStats& stats, const EncoderConfig& cfg, Mode mode) {
  cfg.validate();
  if (records.empty()) fail(Errc::invalid_argument, "embed_and_normalize: empty batch");
  const int batch = static_cast<int>(records.size());

  Tensor numeric(batch, 13);
  std::vector<int> gender_idx(records.size());
  const double age_scale = std::max(stats.age_std, 1e-8);
  for (int b = 0; b < batch; ++b) {
    const SymptomRecord& r = records[b];
    r.validate();
    numeric.at(b, 0) = (r.age - stats.age_mean) / age_scale;
    auto flags = r.flags();
    for (int j = 0; j < 12; ++j) numeric.at(b, 1 + j) = flags[j];
    gender_idx[b] = static_cast<int>(r.gender);
  }

  Var numeric_v = g.constant(std::move(numeric));
  Var embedded = ad::embedding_rows(g.param(store, "tabnet.embed.gender"), gender_idx);
  Var features = ad::concat_cols(numeric_v, embedded);
  return ad::batch_norm(features, g.param(store, "tabnet.input.bn_gamma"),
                        g.param(store, "tabnet.input.bn_beta"), bn_state(store, "tabnet.input"),
                        mode, kBnMomentum, kInputBnEpsilon);
}

std::vector<std::pair<int, int>> encoded_column_spans(const EncoderConfig& cfg) {
  // Field order matches symptom_field_names(): age, gender, then 12 flags.
  // Encoded layout: age (col 0), flags (cols 1..12), gender embedding last.
  std::vector<std::pair<int, int>> spans(symptom_field_names().size());
  spans[0] = {0, 1};                              // age
  spans[1] = {13, 13 + cfg.embed_dim};            // gender
  for (int f = 0; f < 12; ++f) spans[2 + f] = {1 + f, 2 + f};
  return spans;
}

ad::Var glu_block(Graph& g, NamedTensorStore& store, const std::string& prefix, Var x,
                  int virtual_batch_size, Mode mode) {
  Var w = g.param(store, prefix + ".w");
  Var b = g.param(store, prefix + ".b");
  if (x.cols() != w.rows()) fail(Errc::shape_mismatch, "glu_block: input width mismatch at " + prefix);

  Var z = ad::add_rowvec(ad::matmul(x, w), b);
  z = ad::ghost_batch_norm(z, g.param(store, prefix + ".bn_gamma"),
                           g.param(store, prefix + ".bn_beta"), bn_state(store, prefix),
                           clamp_vbs(virtual_batch_size, x.rows()), mode, kBnMomentum, kGluBnEpsilon);
  const int half = z.cols() / 2;
  Var linear = ad::slice_cols(z, 0, half);
  Var gate = ad::slice_cols(z, half, z.cols());
  return ad::mul(linear, ad::sigmoid(gate));
}

ad::Var feature_transformer(Graph& g, NamedTensorStore& store, const EncoderConfig& cfg,
                            int step, Var x, Mode mode) {
  const double scale = std::sqrt(0.5);
  const std::string step_base = "tabnet.ft.step" + std::to_string(step);
  const int vbs = cfg.virtual_batch_size;

  Var h0 = glu_block(g, store, "tabnet.ft.shared0", x, vbs, mode);
  Var h1 = ad::scale(ad::add(glu_block(g, store, "tabnet.ft.shared1", h0, vbs, mode), h0), scale);
  Var h2 = ad::scale(ad::add(glu_block(g, store, step_base + ".a", h1, vbs, mode), h1), scale);
  Var h3 = ad::scale(ad::add(glu_block(g, store, step_base + ".b", h2, vbs, mode), h2), scale);
  return h3;
}

ad::Var attentive_transformer(Graph& g, NamedTensorStore& store, const EncoderConfig& cfg,
                              int step, Var a_prev, Var prior, Mode mode, Var cap) {
  for (double v : prior.value().data)
    if (v < 0.0) fail(Errc::invalid_argument, "attentive_transformer: prior entries must be >= 0");
  const std::string base = "tabnet.at.step" + std::to_string(step);
  Var z = ad::add_rowvec(ad::matmul(a_prev, g.param(store, base + ".w")),
                         g.param(store, base + ".b"));
  z = ad::ghost_batch_norm(z, g.param(store, base + ".bn_gamma"),
                           g.param(store, base + ".bn_beta"), bn_state(store, base),
                           clamp_vbs(cfg.virtual_batch_size, a_prev.rows()), mode, kBnMomentum,
                           kGluBnEpsilon);
  Var masked_scores = ad::mul(z, prior);
  return cap.valid() ? capped_sparsemax_rows(masked_scores, cap) : sparsemax_rows(masked_scores);
}

TabNetForward forward_steps(Graph& g, NamedTensorStore& store, const EncoderConfig& cfg,
                            Var features, Mode mode) {
  cfg.validate();
  const int batch = features.rows();
  const int dim = features.cols();

  if (cfg.n_steps >= dim)
    fail(Errc::invalid_argument,
         "forward_steps: n_steps must stay below the feature dimension for the mask budget");

  TabNetForward fwd;
  Var split0 = feature_transformer(g, store, cfg, 0, features, mode);
  Var attention = ad::slice_cols(split0, cfg.n_d, cfg.n_d + cfg.n_a);
  Var prior = g.constant(Tensor(batch, dim, 1.0));
  Var spent = g.constant(Tensor(batch, dim));

  for (int step = 1; step <= cfg.n_steps; ++step) {
    // Remaining per-feature attention budget; at gamma = 1 a fully used
    // feature has cap 0 and cannot be selected again.
    Var budget = ad::sub(g.constant(Tensor(batch, dim, cfg.gamma)), spent);
    Var cap = ad::min_elem(prior, budget);
    Var mask = attentive_transformer(g, store, cfg, step, attention, prior, mode, cap);
    spent = ad::add(spent, mask);
    prior = ad::mul(prior, ad::sub(g.constant(Tensor(batch, dim, cfg.gamma)), mask));
    Var masked = ad::mul(mask, features);
    Var transformed = feature_transformer(g, store, cfg, step, masked, mode);
    Var decision = ad::slice_cols(transformed, 0, cfg.n_d);
    attention = ad::slice_cols(transformed, cfg.n_d, cfg.n_d + cfg.n_a);

    Var activated = ad::relu(decision);
    fwd.d_out = fwd.d_out.valid() ? ad::add(fwd.d_out, activated) : activated;
    fwd.masks.push_back(mask);
    fwd.step_relu.push_back(activated);
  }

  fwd.s_e = ad::add_rowvec(ad::matmul(fwd.d_out, g.param(store, "tabnet.out.w")),
                           g.param(store, "tabnet.out.b"));
  return fwd;
}

ad::Var sparsity_loss(const std::vector<Var>& masks, double epsilon) {
  if (masks.empty()) fail(Errc::invalid_argument, "sparsity_loss: no masks");
  const int batch = masks.front().rows();
  Var total;
  for (Var mask : masks) {
    if (mask.rows() != batch || mask.cols() != masks.front().cols())
      fail(Errc::shape_mismatch, "sparsity_loss: inconsistent mask shapes");
    Var term = ad::sum_all(ad::mul(mask, ad::log_shift(mask, epsilon)));
    total = total.valid() ? ad::add(total, term) : term;
  }
  const double norm = -1.0 / (static_cast<double>(masks.size()) * batch);
  return ad::scale(total, norm);
}

Tensor step_weights_from(const TabNetForward& fwd) {
  const int batch = fwd.d_out.rows();
  const int steps = static_cast<int>(fwd.step_relu.size());
  Tensor weights(batch, steps);
  for (int s = 0; s < steps; ++s) {
    const Tensor& dr = fwd.step_relu[s].value();
    for (int b = 0; b < batch; ++b) {
      double acc = 0.0;
      for (int j = 0; j < dr.cols; ++j) acc += dr.at(b, j);
      weights.at(b, s) = acc;
    }
  }
  return weights;
}

std::vector<Mask> masks_from(const TabNetForward& fwd) {
  std::vector<Mask> out;
  for (size_t i = 0; i < fwd.masks.size(); ++i)
    out.push_back({fwd.masks[i].value(), static_cast<int>(i) + 1});
  return out;
}

}  // namespace coughkit
