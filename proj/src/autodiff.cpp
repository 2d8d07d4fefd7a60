#include "abibench/autodiff.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace abibench::ad {

const Matrix& Var::value() const { return graph->value(id); }
Eigen::Index Var::rows() const { return value().rows(); }
Eigen::Index Var::cols() const { return value().cols(); }

namespace {

void require_same_graph(Var a, Var b, const char* op) {
  if (a.graph != b.graph || a.graph == nullptr)
    throw ConfigError(std::string(op) + ": operands from different graphs");
}

void require_finite(const Matrix& m, const char* op, const char* phase) {
  if (!m.allFinite())
    throw NumericalError(std::string("non-finite values in ") + phase + " of '" + op + "'");
}

Matrix cwise_unary(const Matrix& x, double (*f)(double)) {
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    for (Eigen::Index i = 0; i < x.rows(); ++i) y(i, j) = f(x(i, j));
  return y;
}

double softplus_scalar(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var Graph::append(Matrix value, const char* op, BackwardFn backward_fn) {
  require_finite(value, op, "forward pass");
  Node n;
  n.value = std::move(value);
  n.op = op;
  n.backward_fn = std::move(backward_fn);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Graph::input(Matrix value) {
  return append(std::move(value), "input", nullptr);
}

Var Graph::param(const std::string& name, const Matrix& value) {
  auto it = param_ids_.find(name);
  if (it != param_ids_.end()) return Var{this, it->second};
  Var v = append(value, "param", nullptr);
  nodes_[v.id].param_name = name;
  param_ids_[name] = v.id;
  return v;
}

Var Graph::param(const ParamStore& store, const std::string& name) {
  auto it = store.find(name);
  if (it == store.end())
    throw ConfigError("unknown parameter '" + name + "'");
  return param(name, it->second);
}

void accumulate(Graph& g, int id, const Matrix& contribution) {
  Matrix& slot = g.grad(id);
  if (slot.size() == 0)
    slot = Matrix::Zero(g.value(id).rows(), g.value(id).cols());
  slot += contribution;
  g.touch(id);
}

GradMap Graph::backward(const Var& loss) {
  if (loss.graph != this)
    throw ConfigError("backward: loss from a different graph");
  const Matrix& lv = nodes_[loss.id].value;
  if (lv.rows() != 1 || lv.cols() != 1)
    throw ConfigError("backward: loss must be a 1x1 scalar");

  for (auto& n : nodes_) {
    n.grad.resize(0, 0);
    n.touched = false;
  }
  nodes_[loss.id].grad = Matrix::Constant(1, 1, 1.0);
  nodes_[loss.id].touched = true;

  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.touched || !n.backward_fn) continue;
    require_finite(n.grad, n.op.c_str(), "reverse sweep");
    n.backward_fn(*this, n.grad);
  }

  GradMap grads;
  for (const auto& [name, id] : param_ids_) {
    const Node& n = nodes_[id];
    if (n.touched)
      grads[name] = n.grad;
    else
      grads[name] = Matrix::Zero(n.value.rows(), n.value.cols());
  }
  return grads;
}

Var matmul(Var a, Var b) {
  require_same_graph(a, b, "matmul");
  Graph& g = *a.graph;
  if (a.cols() != b.rows())
    throw ConfigError("matmul: inner dimensions disagree");
  Matrix v = det_matmul(a.value(), b.value());
  return g.append(std::move(v), "matmul", [ia = a.id, ib = b.id](Graph& g, const Matrix& gr) {
    accumulate(g, ia, det_matmul(gr, g.value(ib).transpose()));
    accumulate(g, ib, det_matmul(g.value(ia).transpose(), gr));
  });
}

Var add(Var a, Var b) {
  require_same_graph(a, b, "add");
  Graph& g = *a.graph;
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ConfigError("add: shape mismatch");
  Matrix v = a.value() + b.value();
  return g.append(std::move(v), "add", [ia = a.id, ib = b.id](Graph& g, const Matrix& gr) {
    accumulate(g, ia, gr);
    accumulate(g, ib, gr);
  });
}

Var rowwise_add(Var a, Var b) {
  require_same_graph(a, b, "rowwise_add");
  Graph& g = *a.graph;
  if (b.rows() != 1 || a.cols() != b.cols())
    throw ConfigError("rowwise_add: second operand must be 1 x cols(a)");
  Matrix v = a.value().rowwise() + b.value().row(0);
  return g.append(std::move(v), "rowwise_add", [ia = a.id, ib = b.id](Graph& g, const Matrix& gr) {
    accumulate(g, ia, gr);
    accumulate(g, ib, gr.colwise().sum());
  });
}

Var sub(Var a, Var b) {
  require_same_graph(a, b, "sub");
  Graph& g = *a.graph;
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ConfigError("sub: shape mismatch");
  Matrix v = a.value() - b.value();
  return g.append(std::move(v), "sub", [ia = a.id, ib = b.id](Graph& g, const Matrix& gr) {
    accumulate(g, ia, gr);
    accumulate(g, ib, -gr);
  });
}

Var neg(Var a) {
  Graph& g = *a.graph;
  Matrix v = -a.value();
  return g.append(std::move(v), "neg", [ia = a.id](Graph& g, const Matrix& gr) {
    accumulate(g, ia, -gr);
  });
}

Var cwise_mul(Var a, Var b) {
  require_same_graph(a, b, "cwise_mul");
  Graph& g = *a.graph;
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ConfigError("cwise_mul: shape mismatch");
  Matrix v = a.value().cwiseProduct(b.value());
  return g.append(std::move(v), "cwise_mul", [ia = a.id, ib = b.id](Graph& g, const Matrix& gr) {
    accumulate(g, ia, gr.cwiseProduct(g.value(ib)));
    accumulate(g, ib, gr.cwiseProduct(g.value(ia)));
  });
}

Var scale(Var a, double c) {
  Graph& g = *a.graph;
  Matrix v = c * a.value();
  return g.append(std::move(v), "scale", [ia = a.id, c](Graph& g, const Matrix& gr) {
    accumulate(g, ia, c * gr);
  });
}

Var tanh(Var a) {
  Graph& g = *a.graph;
  Matrix v = cwise_unary(a.value(), [](double x) { return std::tanh(x); });
  return g.append(std::move(v), "tanh",
                  [ia = a.id, iv = static_cast<int>(g.size())](Graph& g, const Matrix& gr) {
                    const Matrix& t = g.value(iv);
                    accumulate(g, ia, gr.cwiseProduct((1.0 - t.array().square()).matrix()));
                  });
}

Var relu(Var a) {
  Graph& g = *a.graph;
  Matrix v = a.value().cwiseMax(0.0);
  return g.append(std::move(v), "relu", [ia = a.id](Graph& g, const Matrix& gr) {
    const Matrix mask = (g.value(ia).array() > 0.0).cast<double>().matrix();
    accumulate(g, ia, gr.cwiseProduct(mask));
  });
}

Var softplus(Var a) {
  Graph& g = *a.graph;
  Matrix v = cwise_unary(a.value(), softplus_scalar);
  return g.append(std::move(v), "softplus", [ia = a.id](Graph& g, const Matrix& gr) {
    const Matrix s = cwise_unary(g.value(ia), sigmoid_scalar);
    accumulate(g, ia, gr.cwiseProduct(s));
  });
}

Var exp(Var a) {
  Graph& g = *a.graph;
  // Scalar loop: Eigen's vectorized exp mixes packet and scalar kernels based
  // on alignment, so its last bit would depend on the expression context.
  Matrix v = cwise_unary(a.value(), [](double x) { return std::exp(x); });
  return g.append(std::move(v), "exp", [ia = a.id, iv = static_cast<int>(g.size())](
                                           Graph& g, const Matrix& gr) {
    accumulate(g, ia, gr.cwiseProduct(g.value(iv)));
  });
}

Var log(Var a) {
  Graph& g = *a.graph;
  Matrix v = a.value().array().log().matrix();
  return g.append(std::move(v), "log", [ia = a.id](Graph& g, const Matrix& gr) {
    accumulate(g, ia, gr.cwiseQuotient(g.value(ia)));
  });
}

Var sum(Var a) {
  Graph& g = *a.graph;
  Matrix v = Matrix::Constant(1, 1, a.value().sum());
  return g.append(std::move(v), "sum", [ia = a.id](Graph& g, const Matrix& gr) {
    accumulate(g, ia, Matrix::Constant(g.value(ia).rows(), g.value(ia).cols(), gr(0, 0)));
  });
}

Var mean(Var a) {
  Graph& g = *a.graph;
  if (a.value().size() == 0)
    throw ConfigError("mean: empty matrix");
  Matrix v = Matrix::Constant(1, 1, a.value().mean());
  return g.append(std::move(v), "mean", [ia = a.id](Graph& g, const Matrix& gr) {
    const double n = static_cast<double>(g.value(ia).size());
    accumulate(g, ia,
               Matrix::Constant(g.value(ia).rows(), g.value(ia).cols(), gr(0, 0) / n));
  });
}

Var rowsum(Var a) {
  Graph& g = *a.graph;
  Matrix v = a.value().rowwise().sum();
  return g.append(std::move(v), "rowsum", [ia = a.id](Graph& g, const Matrix& gr) {
    accumulate(g, ia, gr * Matrix::Ones(1, g.value(ia).cols()));
  });
}

Var colmean(Var a) {
  Graph& g = *a.graph;
  if (a.rows() == 0)
    throw ConfigError("colmean: empty matrix");
  Matrix v = a.value().colwise().mean();
  return g.append(std::move(v), "colmean", [ia = a.id](Graph& g, const Matrix& gr) {
    const double n = static_cast<double>(g.value(ia).rows());
    accumulate(g, ia, Matrix::Ones(g.value(ia).rows(), 1) * (gr / n));
  });
}

Var colmean_sorted(Var a) {
  Graph& g = *a.graph;
  const Matrix& x = a.value();
  if (x.rows() == 0)
    throw ConfigError("colmean_sorted: empty matrix");
  Matrix v(1, x.cols());
  std::vector<double> col(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) col[static_cast<std::size_t>(i)] = x(i, j);
    std::sort(col.begin(), col.end());
    double s = 0.0;
    for (double c : col) s += c;
    v(0, j) = s / static_cast<double>(x.rows());
  }
  return g.append(std::move(v), "colmean_sorted", [ia = a.id](Graph& g, const Matrix& gr) {
    const double n = static_cast<double>(g.value(ia).rows());
    accumulate(g, ia, Matrix::Ones(g.value(ia).rows(), 1) * (gr / n));
  });
}

Var hcat(std::span<const Var> parts) {
  if (parts.empty())
    throw ConfigError("hcat: no operands");
  Graph& g = *parts[0].graph;
  Eigen::Index rows = parts[0].rows();
  Eigen::Index total = 0;
  for (Var p : parts) {
    require_same_graph(parts[0], p, "hcat");
    if (p.rows() != rows)
      throw ConfigError("hcat: row counts disagree");
    total += p.cols();
  }
  Matrix v(rows, total);
  std::vector<int> ids;
  std::vector<Eigen::Index> widths;
  Eigen::Index off = 0;
  for (Var p : parts) {
    v.middleCols(off, p.cols()) = p.value();
    ids.push_back(p.id);
    widths.push_back(p.cols());
    off += p.cols();
  }
  return g.append(std::move(v), "hcat",
                  [ids, widths](Graph& g, const Matrix& gr) {
                    Eigen::Index off = 0;
                    for (std::size_t k = 0; k < ids.size(); ++k) {
                      accumulate(g, ids[k], gr.middleCols(off, widths[k]));
                      off += widths[k];
                    }
                  });
}

Var hcat(Var a, Var b) { return hcat(std::array<Var, 2>{a, b}); }

Var vcat(std::span<const Var> parts) {
  if (parts.empty())
    throw ConfigError("vcat: no operands");
  Graph& g = *parts[0].graph;
  Eigen::Index colsn = parts[0].cols();
  Eigen::Index total = 0;
  for (Var p : parts) {
    require_same_graph(parts[0], p, "vcat");
    if (p.cols() != colsn)
      throw ConfigError("vcat: column counts disagree");
    total += p.rows();
  }
  Matrix v(total, colsn);
  std::vector<int> ids;
  std::vector<Eigen::Index> heights;
  Eigen::Index off = 0;
  for (Var p : parts) {
    v.middleRows(off, p.rows()) = p.value();
    ids.push_back(p.id);
    heights.push_back(p.rows());
    off += p.rows();
  }
  return g.append(std::move(v), "vcat",
                  [ids, heights](Graph& g, const Matrix& gr) {
                    Eigen::Index off = 0;
                    for (std::size_t k = 0; k < ids.size(); ++k) {
                      accumulate(g, ids[k], gr.middleRows(off, heights[k]));
                      off += heights[k];
                    }
                  });
}

Var cols(Var a, Eigen::Index start, Eigen::Index n) {
  Graph& g = *a.graph;
  if (start < 0 || n < 0 || start + n > a.cols())
    throw ConfigError("cols: slice out of range");
  Matrix v = a.value().middleCols(start, n);
  return g.append(std::move(v), "cols", [ia = a.id, start, n](Graph& g, const Matrix& gr) {
    Matrix full = Matrix::Zero(g.value(ia).rows(), g.value(ia).cols());
    full.middleCols(start, n) = gr;
    accumulate(g, ia, full);
  });
}

Var gather_rows(Var a, std::vector<Eigen::Index> idx) {
  Graph& g = *a.graph;
  const Matrix& x = a.value();
  Matrix v(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const Eigen::Index i = idx[k];
    if (i >= x.rows())
      throw ConfigError("gather_rows: index out of range");
    if (i < 0)
      v.row(static_cast<Eigen::Index>(k)).setZero();
    else
      v.row(static_cast<Eigen::Index>(k)) = x.row(i);
  }
  return g.append(std::move(v), "gather_rows",
                  [ia = a.id, idx = std::move(idx)](Graph& g, const Matrix& gr) {
                    Matrix full = Matrix::Zero(g.value(ia).rows(), g.value(ia).cols());
                    for (std::size_t k = 0; k < idx.size(); ++k)
                      if (idx[k] >= 0) full.row(idx[k]) += gr.row(static_cast<Eigen::Index>(k));
                    accumulate(g, ia, full);
                  });
}

Var permute_cols(Var a, const std::vector<Eigen::Index>& perm) {
  Graph& g = *a.graph;
  const Matrix& x = a.value();
  if (static_cast<Eigen::Index>(perm.size()) != x.cols())
    throw ConfigError("permute_cols: permutation size mismatch");
  Matrix v(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) v.col(j) = x.col(perm[static_cast<std::size_t>(j)]);
  return g.append(std::move(v), "permute_cols",
                  [ia = a.id, perm](Graph& g, const Matrix& gr) {
                    Matrix full(gr.rows(), gr.cols());
                    for (Eigen::Index j = 0; j < gr.cols(); ++j)
                      full.col(perm[static_cast<std::size_t>(j)]) = gr.col(j);
                    accumulate(g, ia, full);
                  });
}

Var grad_reverse(Var a, double weight) {
  Graph& g = *a.graph;
  Matrix v = a.value();
  return g.append(std::move(v), "grad_reverse", [ia = a.id, weight](Graph& g, const Matrix& gr) {
    accumulate(g, ia, (-weight) * gr);
  });
}

Var mmd2(Var a, Var b, const kernels::KernelSpec& spec) {
  require_same_graph(a, b, "mmd2");
  Graph& g = *a.graph;
  const double value = kernels::mmd2_biased(a.value(), b.value(), spec);
  return g.append(Matrix::Constant(1, 1, value), "mmd2",
                  [ia = a.id, ib = b.id, spec](Graph& g, const Matrix& gr) {
                    const Matrix& A = g.value(ia);
                    const Matrix& B = g.value(ib);
                    const double n = static_cast<double>(A.rows());
                    const double m = static_cast<double>(B.rows());
                    const double go = gr(0, 0);

                    // d k(u,v) / du = -2 (u - v) sum_s s^2 / (s^2 + d2)^2
                    auto pair_weight = [&spec](const RowVector& u, const RowVector& v) {
                      const double d2 = kernels::squared_distance(u, v);
                      double w = 0.0;
                      for (double s : spec.scales) {
                        const double s2 = s * s;
                        const double den = s2 + d2;
                        w += s2 / (den * den);
                      }
                      return w;
                    };

                    Matrix ga = Matrix::Zero(A.rows(), A.cols());
                    Matrix gb = Matrix::Zero(B.rows(), B.cols());
                    for (Eigen::Index i = 0; i < A.rows(); ++i) {
                      for (Eigen::Index j = 0; j < A.rows(); ++j) {
                        if (i == j) continue;
                        const double w = pair_weight(A.row(i), A.row(j));
                        ga.row(i) += (-2.0 * w * 2.0 / (n * n)) * (A.row(i) - A.row(j));
                      }
                      for (Eigen::Index j = 0; j < B.rows(); ++j) {
                        const double w = pair_weight(A.row(i), B.row(j));
                        ga.row(i) += (2.0 / (n * m)) * 2.0 * w * (A.row(i) - B.row(j));
                      }
                    }
                    for (Eigen::Index i = 0; i < B.rows(); ++i) {
                      for (Eigen::Index j = 0; j < B.rows(); ++j) {
                        if (i == j) continue;
                        const double w = pair_weight(B.row(i), B.row(j));
                        gb.row(i) += (-2.0 * w * 2.0 / (m * m)) * (B.row(i) - B.row(j));
                      }
                      for (Eigen::Index j = 0; j < A.rows(); ++j) {
                        const double w = pair_weight(B.row(i), A.row(j));
                        gb.row(i) += (2.0 / (n * m)) * 2.0 * w * (B.row(i) - A.row(j));
                      }
                    }
                    accumulate(g, ia, go * ga);
                    accumulate(g, ib, go * gb);
                  });
}

}  // namespace abibench::ad
