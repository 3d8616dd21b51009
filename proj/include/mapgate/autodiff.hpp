// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "mapgate/errors.hpp"
#include "mapgate/rng.hpp"

namespace mapgate::diff {

// A trainable tensor. `grad` always has the same shape as `value` and is
// accumulated into by Tape::backward.
struct Parameter {
  std::string name;
  Eigen::MatrixXd value;
  Eigen::MatrixXd grad;

  Parameter() = default;
  Parameter(std::string n, Eigen::MatrixXd v)
      : name(std::move(n)),
        value(std::move(v)),
        grad(Eigen::MatrixXd::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(); }
  long size() const { return value.size(); }
};

// Handle to a node on a Tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Append-only reverse-mode tape over dense matrices. One tape per forward
// pass; parameters are leased in with leaf() and receive their gradients when
// backward() runs.
class Tape {
 public:
  Var constant(Eigen::MatrixXd v);
  Var leaf(Parameter& p);

  // y = a * b
  Var matmul(Var a, Var b);
  // elementwise sum, identical shapes
  Var add(Var a, Var b);
  // every row of a plus the single row of bias
  Var add_rowvec(Var a, Var bias);
  Var subtract(Var a, Var b);
  Var scale(Var a, double k);
  Var relu(Var a);
  // Inverted-scale dropout; call only in training mode (evaluation simply
  // skips the op, which keeps the inference path an identity).
  Var dropout(Var a, double rate, Rng& rng);
  // [a | b] column concatenation, equal row counts
  Var hcat(Var a, Var b);
  // Zero-pad columns on the right up to total_cols.
  Var pad_cols(Var a, int total_cols);
  // Mean over row groups: rows are split into consecutive segments of the
  // given sizes and each segment is averaged into one output row. Rows within
  // a segment are accumulated in a canonical content order, so any vertex
  // permutation yields a bitwise-identical result.
  Var segment_mean(Var a, const std::vector<int>& sizes);
  Var row_mean(Var a);
  // Row-wise softmax of logits / temperature, max-subtracted for stability.
  Var softmax_rows(Var logits, double temperature);
  // Scalar mean of squared differences.
  Var mse(Var pred, Var target);
  // Rows are flattened waypoint sequences (x0, y0, x1, y1, ...); returns the
  // per-row mean Euclidean distance to the matching row of target, R x 1.
  Var mean_l2_rows(Var pts, Var target);
  // Row-wise minimum, R x 1; the subgradient flows to the argmin entry.
  Var row_min(Var a);
  Var mean_all(Var a);
  Var sum_all(Var a);
  // Scalar node with precomputed gradients with respect to each input; used
  // to splice analytically differentiated losses into the graph.
  Var custom_scalar(const std::vector<Var>& inputs, double value,
                    std::vector<Eigen::MatrixXd> input_grads);

  const Eigen::MatrixXd& value(Var v) const;
  double scalar(Var v) const;

  // Reverse sweep from a 1x1 loss node. Gradients land in the leased
  // Parameters (accumulated) and stay readable through grad_of().
  void backward(Var loss);
  // Gradient of the last backward() target with respect to node v; zero
  // matrix if the node was unreachable.
  Eigen::MatrixXd grad_of(Var v) const;

  int size() const { return static_cast<int>(nodes_.size()); }

 private:
  struct Node {
    Eigen::MatrixXd value;
    std::function<void(Tape&, const Eigen::MatrixXd&)> back;  // upstream -> inputs
    Parameter* param = nullptr;
  };

  Var push(Eigen::MatrixXd value,
           std::function<void(Tape&, const Eigen::MatrixXd&)> back,
           Parameter* param = nullptr);
  const Node& node(Var v) const;
  void check_input(Var v) const;
  void accumulate(int id, const Eigen::MatrixXd& g);

  std::vector<Node> nodes_;
  std::vector<Eigen::MatrixXd> grads_;
};

}  // namespace mapgate::diff
