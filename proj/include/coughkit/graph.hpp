#pragma once

// Reverse-mode automatic differentiation over named matrix parameters.
//
// A Graph is a tape built define-by-run: every op appends a node holding its
// value and a closure that scatters the incoming gradient to its parents.
// Nodes are created in topological order, so backward() is a single reverse
// sweep. Everything is double precision; training relies on the gradients
// matching central finite differences.

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "coughkit/tensor.hpp"

namespace coughkit::ad {

enum class Mode { train, infer };

class Graph;

/// Cheap handle to a node in a Graph.
class Var {
 public:
  Var() = default;
  const Tensor& value() const;
  int rows() const;
  int cols() const;
  Graph& graph() const { return *g_; }
  int id() const { return id_; }
  bool valid() const { return g_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* g, int id) : g_(g), id_(id) {}
  Graph* g_ = nullptr;
  int id_ = -1;
};

using BackwardFn = std::function<void(Graph&, const Tensor& grad_out)>;

class Graph {
 public:
  /// Leaf with no gradient (inputs, targets, priors' seed).
  Var constant(Tensor value);

  /// Gradient-tracked leaf that is not a named parameter.
  Var leaf(Tensor value);

  /// Gradient-tracked leaf bound to store[name]; repeated requests for the
  /// same name return the same node so gradients accumulate across uses.
  Var param(NamedTensorStore& store, const std::string& name);

  /// Appends an op node. needs_grad is inherited from the parents.
  Var emit(Tensor value, std::vector<int> parents, BackwardFn backward);

  /// Reverse sweep from a 1x1 loss node. Errors on a non-finite loss.
  void backward(Var loss);

  const Tensor& value(int id) const { return nodes_[id].value; }
  const Tensor& grad(Var v) const;
  bool needs_grad(int id) const { return nodes_[id].needs_grad; }

  /// Gradient buffer of a node, or nullptr when the node does not track
  /// gradients. Only valid during/after backward().
  Tensor* grad_if_needed(int id);

  /// Copies of the parameter gradients accumulated by the last backward().
  std::map<std::string, Tensor> param_grads() const;

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<int> parents;
    BackwardFn backward;
    bool needs_grad = false;
  };
  std::vector<Node> nodes_;
  std::map<std::string, int> param_ids_;

  friend class Var;
};

double scalar(Var v);

/// Activation-pattern signature of every kinked op (relu half-space, clamp
/// range, sparsemax support) evaluated since the last reset, per thread.
/// Finite-difference checks compare the signatures of the two probe
/// evaluations and skip coordinates whose pattern flips inside the interval:
/// the gradient contract only covers points away from kinks.
void reset_activation_signature();
uint64_t activation_signature();
void note_activation_bit(bool active);

// ---- primitive ops -------------------------------------------------------

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);              // elementwise
Var add_rowvec(Var a, Var bias);    // bias is 1 x cols, broadcast over rows
Var scale(Var a, double c);
Var add_scalar(Var a, double c);
Var relu(Var a);
Var sigmoid(Var a);
Var log_shift(Var a, double eps);   // ln(a + eps)
Var clamp(Var a, double lo, double hi);
Var concat_cols(Var a, Var b);
Var slice_cols(Var a, int col_begin, int col_end);
Var sum_all(Var a);                 // 1x1
Var softmax_rows(Var a);
Var min_elem(Var a, Var b);         // elementwise minimum
Var embedding_rows(Var table, const std::vector<int>& indices);

/// Batch normalization state held outside the graph (running statistics are
/// updated as a side effect of a training-mode forward pass).
struct BnState {
  Tensor* running_mean = nullptr;  // 1 x cols
  Tensor* running_var = nullptr;   // 1 x cols
};

/// Standard batch normalization across all rows.
Var batch_norm(Var x, Var gamma, Var beta, BnState state, Mode mode,
               double momentum = 0.9, double eps = 1e-8);

/// Batch normalization applied independently to consecutive row chunks of
/// virtual_batch_size (the final short chunk is normalized on its own).
/// Inference mode uses the running statistics and ignores the chunking.
Var ghost_batch_norm(Var x, Var gamma, Var beta, BnState state, int virtual_batch_size,
                     Mode mode, double momentum = 0.9, double eps = 1e-8);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }

}  // namespace coughkit::ad
