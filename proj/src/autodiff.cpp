// SPDX-License-Identifier: Apache-2.0
#include "mapgate/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mapgate::diff {

Var Tape::push(Eigen::MatrixXd value,
               std::function<void(Tape&, const Eigen::MatrixXd&)> back,
               Parameter* param) {
  Node n;
  n.value = std::move(value);
  n.back = std::move(back);
  n.param = param;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

const Tape::Node& Tape::node(Var v) const {
  if (!v.valid() || v.id >= static_cast<int>(nodes_.size())) {
    throw GraphCycle("variable does not belong to this tape");
  }
  return nodes_[v.id];
}

void Tape::check_input(Var v) const {
  // Inputs must already exist; append-only construction keeps the graph
  // acyclic.
  node(v);
}

void Tape::accumulate(int id, const Eigen::MatrixXd& g) {
  if (grads_[id].size() == 0) {
    grads_[id] = g;
  } else {
    grads_[id] += g;
  }
}

Var Tape::constant(Eigen::MatrixXd v) { return push(std::move(v), nullptr); }

Var Tape::leaf(Parameter& p) { return push(p.value, nullptr, &p); }

const Eigen::MatrixXd& Tape::value(Var v) const { return node(v).value; }

double Tape::scalar(Var v) const {
  const auto& m = node(v).value;
  if (m.rows() != 1 || m.cols() != 1) {
    throw ShapeMismatch("scalar() called on a non 1x1 node");
  }
  return m(0, 0);
}

Var Tape::matmul(Var a, Var b) {
  check_input(a);
  check_input(b);
  const auto& A = nodes_[a.id].value;
  const auto& B = nodes_[b.id].value;
  if (A.cols() != B.rows()) {
    throw ShapeMismatch("matmul: " + std::to_string(A.rows()) + "x" +
                        std::to_string(A.cols()) + " * " +
                        std::to_string(B.rows()) + "x" +
                        std::to_string(B.cols()));
  }
  const int ia = a.id, ib = b.id;
  return push(A * B, [ia, ib](Tape& t, const Eigen::MatrixXd& g) {
    t.accumulate(ia, g * t.nodes_[ib].value.transpose());
    t.accumulate(ib, t.nodes_[ia].value.transpose() * g);
  });
}

Var Tape::add(Var a, Var b) {
  check_input(a);
  check_input(b);
  const auto& A = nodes_[a.id].value;
  const auto& B = nodes_[b.id].value;
  if (A.rows() != B.rows() || A.cols() != B.cols()) {
    throw ShapeMismatch("add: shapes differ");
  }
  const int ia = a.id, ib = b.id;
  return push(A + B, [ia, ib](Tape& t, const Eigen::MatrixXd& g) {
    t.accumulate(ia, g);
    t.accumulate(ib, g);
  });
}

Var Tape::add_rowvec(Var a, Var bias) {
  check_input(a);
  check_input(bias);
  const auto& A = nodes_[a.id].value;
  const auto& B = nodes_[bias.id].value;
  if (B.rows() != 1 || B.cols() != A.cols()) {
    throw ShapeMismatch("add_rowvec: bias must be 1 x cols(a)");
  }
  Eigen::MatrixXd out = A;
  out.rowwise() += B.row(0);
  const int ia = a.id, ib = bias.id;
  return push(std::move(out), [ia, ib](Tape& t, const Eigen::MatrixXd& g) {
    t.accumulate(ia, g);
    t.accumulate(ib, g.colwise().sum());
  });
}

Var Tape::subtract(Var a, Var b) {
  check_input(a);
  check_input(b);
  const auto& A = nodes_[a.id].value;
  const auto& B = nodes_[b.id].value;
  if (A.rows() != B.rows() || A.cols() != B.cols()) {
    throw ShapeMismatch("subtract: shapes differ");
  }
  const int ia = a.id, ib = b.id;
  return push(A - B, [ia, ib](Tape& t, const Eigen::MatrixXd& g) {
    t.accumulate(ia, g);
    t.accumulate(ib, -g);
  });
}

Var Tape::scale(Var a, double k) {
  check_input(a);
  const int ia = a.id;
  return push(nodes_[a.id].value * k, [ia, k](Tape& t, const Eigen::MatrixXd& g) {
    t.accumulate(ia, g * k);
  });
}

Var Tape::relu(Var a) {
  check_input(a);
  Eigen::MatrixXd out = nodes_[a.id].value.cwiseMax(0.0);
  const int ia = a.id;
  return push(std::move(out), [ia](Tape& t, const Eigen::MatrixXd& g) {
    const auto& v = t.nodes_[ia].value;
    t.accumulate(ia, g.cwiseProduct((v.array() > 0.0).cast<double>().matrix()));
  });
}

Var Tape::dropout(Var a, double rate, Rng& rng) {
  check_input(a);
  if (rate < 0.0 || rate >= 1.0) {
    throw InvalidValue("dropout rate must be in [0, 1)");
  }
  const auto& A = nodes_[a.id].value;
  Eigen::MatrixXd mask(A.rows(), A.cols());
  const double keep = 1.0 - rate;
  for (long i = 0; i < mask.rows(); ++i) {
    for (long j = 0; j < mask.cols(); ++j) {
      mask(i, j) = rng.uniform() < rate ? 0.0 : 1.0 / keep;
    }
  }
  const int ia = a.id;
  return push(A.cwiseProduct(mask),
              [ia, mask](Tape& t, const Eigen::MatrixXd& g) {
                t.accumulate(ia, g.cwiseProduct(mask));
              });
}

Var Tape::hcat(Var a, Var b) {
  check_input(a);
  check_input(b);
  const auto& A = nodes_[a.id].value;
  const auto& B = nodes_[b.id].value;
  if (A.rows() != B.rows()) throw ShapeMismatch("hcat: row counts differ");
  Eigen::MatrixXd out(A.rows(), A.cols() + B.cols());
  out << A, B;
  const int ia = a.id, ib = b.id;
  const long ca = A.cols(), cb = B.cols();
  return push(std::move(out), [ia, ib, ca, cb](Tape& t, const Eigen::MatrixXd& g) {
    t.accumulate(ia, g.leftCols(ca));
    t.accumulate(ib, g.rightCols(cb));
  });
}

Var Tape::pad_cols(Var a, int total_cols) {
  check_input(a);
  const auto& A = nodes_[a.id].value;
  if (total_cols < A.cols()) throw ShapeMismatch("pad_cols: target too small");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(A.rows(), total_cols);
  out.leftCols(A.cols()) = A;
  const int ia = a.id;
  const long ca = A.cols();
  return push(std::move(out), [ia, ca](Tape& t, const Eigen::MatrixXd& g) {
    t.accumulate(ia, g.leftCols(ca));
  });
}

Var Tape::segment_mean(Var a, const std::vector<int>& sizes) {
  check_input(a);
  const auto& A = nodes_[a.id].value;
  const long total = std::accumulate(sizes.begin(), sizes.end(), 0L);
  if (total != A.rows()) throw ShapeMismatch("segment_mean: sizes must cover rows");
  for (int s : sizes) {
    if (s <= 0) throw ShapeMismatch("segment_mean: empty segment");
  }

  Eigen::MatrixXd out(sizes.size(), A.cols());
  long start = 0;
  for (size_t s = 0; s < sizes.size(); ++s) {
    // Accumulate rows in a canonical (lexicographically sorted) order so the
    // result does not depend on how the caller ordered them.
    std::vector<long> idx(sizes[s]);
    std::iota(idx.begin(), idx.end(), start);
    std::sort(idx.begin(), idx.end(), [&A](long i, long j) {
      for (long c = 0; c < A.cols(); ++c) {
        if (A(i, c) != A(j, c)) return A(i, c) < A(j, c);
      }
      return false;
    });
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(A.cols());
    for (long i : idx) acc += A.row(i);
    out.row(s) = acc / static_cast<double>(sizes[s]);
    start += sizes[s];
  }

  const int ia = a.id;
  return push(std::move(out), [ia, sizes](Tape& t, const Eigen::MatrixXd& g) {
    const auto& A = t.nodes_[ia].value;
    Eigen::MatrixXd da = Eigen::MatrixXd::Zero(A.rows(), A.cols());
    long start = 0;
    for (size_t s = 0; s < sizes.size(); ++s) {
      const double inv = 1.0 / static_cast<double>(sizes[s]);
      for (int r = 0; r < sizes[s]; ++r) da.row(start + r) = g.row(s) * inv;
      start += sizes[s];
    }
    t.accumulate(ia, da);
  });
}

Var Tape::row_mean(Var a) {
  const auto& A = node(a).value;
  return segment_mean(a, {static_cast<int>(A.rows())});
}

Var Tape::softmax_rows(Var logits, double temperature) {
  check_input(logits);
  if (!(temperature > 0.0)) {
    throw InvalidTemperature("softmax temperature must be positive");
  }
  const auto& L = nodes_[logits.id].value;
  Eigen::MatrixXd out(L.rows(), L.cols());
  for (long r = 0; r < L.rows(); ++r) {
    const double m = L.row(r).maxCoeff();
    const Eigen::RowVectorXd e =
        ((L.row(r).array() - m) / temperature).exp().matrix();
    out.row(r) = e / e.sum();
  }
  const int il = logits.id;
  return push(out, [il, out, temperature](Tape& t, const Eigen::MatrixXd& g) {
    Eigen::MatrixXd dl(out.rows(), out.cols());
    for (long r = 0; r < out.rows(); ++r) {
      const double dot = g.row(r).dot(out.row(r));
      dl.row(r) = (out.row(r).array() * (g.row(r).array() - dot) / temperature)
                      .matrix();
    }
    t.accumulate(il, dl);
  });
}

Var Tape::mse(Var pred, Var target) {
  check_input(pred);
  check_input(target);
  const auto& P = nodes_[pred.id].value;
  const auto& T = nodes_[target.id].value;
  if (P.rows() != T.rows() || P.cols() != T.cols()) {
    throw ShapeMismatch("mse: shapes differ");
  }
  const double n = static_cast<double>(P.size());
  Eigen::MatrixXd diff = P - T;
  Eigen::MatrixXd out(1, 1);
  out(0, 0) = diff.squaredNorm() / n;
  const int ip = pred.id, it = target.id;
  return push(std::move(out), [ip, it, n](Tape& t, const Eigen::MatrixXd& g) {
    const Eigen::MatrixXd d =
        (t.nodes_[ip].value - t.nodes_[it].value) * (2.0 * g(0, 0) / n);
    t.accumulate(ip, d);
    t.accumulate(it, -d);
  });
}

Var Tape::mean_l2_rows(Var pts, Var target) {
  check_input(pts);
  check_input(target);
  const auto& P = nodes_[pts.id].value;
  const auto& T = nodes_[target.id].value;
  if (P.rows() != T.rows() || P.cols() != T.cols()) {
    throw ShapeMismatch("mean_l2_rows: shapes differ");
  }
  if (P.cols() % 2 != 0) {
    throw ShapeMismatch("mean_l2_rows: columns must hold (x, y) pairs");
  }
  const long steps = P.cols() / 2;
  Eigen::MatrixXd out(P.rows(), 1);
  for (long r = 0; r < P.rows(); ++r) {
    double acc = 0.0;
    for (long s = 0; s < steps; ++s) {
      const double dx = P(r, 2 * s) - T(r, 2 * s);
      const double dy = P(r, 2 * s + 1) - T(r, 2 * s + 1);
      acc += std::sqrt(dx * dx + dy * dy);
    }
    out(r, 0) = acc / static_cast<double>(steps);
  }
  const int ip = pts.id, it = target.id;
  return push(std::move(out), [ip, it, steps](Tape& t, const Eigen::MatrixXd& g) {
    const auto& P = t.nodes_[ip].value;
    const auto& T = t.nodes_[it].value;
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(P.rows(), P.cols());
    for (long r = 0; r < P.rows(); ++r) {
      for (long s = 0; s < steps; ++s) {
        const double dx = P(r, 2 * s) - T(r, 2 * s);
        const double dy = P(r, 2 * s + 1) - T(r, 2 * s + 1);
        const double norm = std::sqrt(dx * dx + dy * dy);
        if (norm > 1e-30) {
          const double k = g(r, 0) / (norm * static_cast<double>(steps));
          d(r, 2 * s) = k * dx;
          d(r, 2 * s + 1) = k * dy;
        }
      }
    }
    t.accumulate(ip, d);
    t.accumulate(it, -d);
  });
}

Var Tape::row_min(Var a) {
  check_input(a);
  const auto& A = nodes_[a.id].value;
  Eigen::MatrixXd out(A.rows(), 1);
  std::vector<long> winners(A.rows());
  for (long r = 0; r < A.rows(); ++r) {
    long idx = 0;
    out(r, 0) = A.row(r).minCoeff(&idx);
    winners[r] = idx;
  }
  const int ia = a.id;
  return push(std::move(out), [ia, winners](Tape& t, const Eigen::MatrixXd& g) {
    const auto& A = t.nodes_[ia].value;
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(A.rows(), A.cols());
    for (long r = 0; r < A.rows(); ++r) d(r, winners[r]) = g(r, 0);
    t.accumulate(ia, d);
  });
}

Var Tape::mean_all(Var a) {
  check_input(a);
  const auto& A = nodes_[a.id].value;
  const double n = static_cast<double>(A.size());
  Eigen::MatrixXd out(1, 1);
  out(0, 0) = A.sum() / n;
  const int ia = a.id;
  return push(std::move(out), [ia, n](Tape& t, const Eigen::MatrixXd& g) {
    const auto& A = t.nodes_[ia].value;
    t.accumulate(ia, Eigen::MatrixXd::Constant(A.rows(), A.cols(), g(0, 0) / n));
  });
}

Var Tape::sum_all(Var a) {
  check_input(a);
  const auto& A = nodes_[a.id].value;
  Eigen::MatrixXd out(1, 1);
  out(0, 0) = A.sum();
  const int ia = a.id;
  return push(std::move(out), [ia](Tape& t, const Eigen::MatrixXd& g) {
    const auto& A = t.nodes_[ia].value;
    t.accumulate(ia, Eigen::MatrixXd::Constant(A.rows(), A.cols(), g(0, 0)));
  });
}

Var Tape::custom_scalar(const std::vector<Var>& inputs, double value,
                        std::vector<Eigen::MatrixXd> input_grads) {
  if (inputs.size() != input_grads.size()) {
    throw ShapeMismatch("custom_scalar: one gradient per input required");
  }
  std::vector<int> ids;
  ids.reserve(inputs.size());
  for (size_t i = 0; i < inputs.size(); ++i) {
    check_input(inputs[i]);
    const auto& v = nodes_[inputs[i].id].value;
    if (v.rows() != input_grads[i].rows() || v.cols() != input_grads[i].cols()) {
      throw ShapeMismatch("custom_scalar: gradient shape differs from input");
    }
    ids.push_back(inputs[i].id);
  }
  Eigen::MatrixXd out(1, 1);
  out(0, 0) = value;
  return push(std::move(out),
              [ids, grads = std::move(input_grads)](Tape& t,
                                                    const Eigen::MatrixXd& g) {
                for (size_t i = 0; i < ids.size(); ++i) {
                  t.accumulate(ids[i], grads[i] * g(0, 0));
                }
              });
}

void Tape::backward(Var loss) {
  const auto& l = node(loss);
  if (l.value.rows() != 1 || l.value.cols() != 1) {
    throw ShapeMismatch("backward expects a scalar loss node");
  }
  grads_.assign(nodes_.size(), Eigen::MatrixXd());
  grads_[loss.id] = Eigen::MatrixXd::Ones(1, 1);
  for (int id = loss.id; id >= 0; --id) {
    if (grads_[id].size() == 0) continue;
    if (nodes_[id].back) nodes_[id].back(*this, grads_[id]);
    if (nodes_[id].param) nodes_[id].param->grad += grads_[id];
  }
}

Eigen::MatrixXd Tape::grad_of(Var v) const {
  const auto& n = node(v);
  if (v.id < static_cast<int>(grads_.size()) && grads_[v.id].size() != 0) {
    return grads_[v.id];
  }
  return Eigen::MatrixXd::Zero(n.value.rows(), n.value.cols());
}

}  // namespace mapgate::diff
