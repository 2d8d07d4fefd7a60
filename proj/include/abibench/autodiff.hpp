#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "abibench/common.hpp"
#include "abibench/kernels.hpp"

namespace abibench::ad {

class Graph;

// Cheap handle into a Graph tape. Valid for the lifetime of the Graph.
struct Var {
  Graph* graph = nullptr;
  int id = -1;

  const Matrix& value() const;
  Eigen::Index rows() const;
  Eigen::Index cols() const;
};

using GradMap = std::map<std::string, Matrix>;
using ParamStore = std::map<std::string, Matrix>;

// Reverse-mode tape over dense double matrices. Nodes are appended in
// topological order; backward() runs the tape in reverse from a scalar loss.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Constant leaf (no gradient tracked).
  Var input(Matrix value);

  // Named differentiable leaf. Repeated calls with one name return the same
  // node so gradients from every use accumulate into a single slot.
  Var param(const ParamStore& store, const std::string& name);
  Var param(const std::string& name, const Matrix& value);

  // Gradients of `loss` (1x1) with respect to every named parameter in this
  // graph. Parameters not on a path to the loss get zero gradients.
  GradMap backward(const Var& loss);

  const Matrix& value(int id) const { return nodes_[id].value; }
  Matrix& grad(int id) { return nodes_[id].grad; }
  std::size_t size() const { return nodes_.size(); }

  using BackwardFn = std::function<void(Graph&, const Matrix&)>;
  Var append(Matrix value, const char* op, BackwardFn backward_fn);

  void touch(int id) { nodes_[id].touched = true; }
  bool touched(int id) const { return nodes_[id].touched; }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::string op;
    std::string param_name;
    BackwardFn backward_fn;
    bool touched = false;
  };
  std::vector<Node> nodes_;
  std::map<std::string, int> param_ids_;
};

// Accumulates g into the grad slot of node `id` and marks it live.
void accumulate(Graph& g, int id, const Matrix& contribution);

Var matmul(Var a, Var b);
Var add(Var a, Var b);             // same shape
Var rowwise_add(Var a, Var b);     // b is 1 x n, broadcast over rows of a
Var sub(Var a, Var b);
Var neg(Var a);
Var cwise_mul(Var a, Var b);
Var scale(Var a, double c);

Var tanh(Var a);
Var relu(Var a);
Var softplus(Var a);
Var exp(Var a);
Var log(Var a);

Var sum(Var a);       // 1x1
Var mean(Var a);      // 1x1
Var rowsum(Var a);    // n x 1
Var colmean(Var a);   // 1 x n
// Mean over rows with per-column sorted summation, so the result is
// bit-identical under any row permutation of the input.
Var colmean_sorted(Var a);

Var hcat(std::span<const Var> parts);
Var hcat(Var a, Var b);
Var vcat(std::span<const Var> parts);
Var cols(Var a, Eigen::Index start, Eigen::Index n);
// Row gather; an index of -1 produces a zero row (used for conv padding).
Var gather_rows(Var a, std::vector<Eigen::Index> idx);
Var permute_cols(Var a, const std::vector<Eigen::Index>& perm);

// Identity in the forward pass; multiplies the incoming gradient by -weight
// in the backward pass.
Var grad_reverse(Var a, double weight);

// Differentiable biased MMD^2 between the row sets of a and b. The forward
// value is computed by kernels::mmd2_biased, so it matches the plain version
// bit for bit.
Var mmd2(Var a, Var b, const kernels::KernelSpec& spec);

inline Var operator*(Var a, Var b) { return matmul(a, b); }
inline Var operator*(double c, Var a) { return scale(a, c); }
inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator-(Var a) { return neg(a); }

}  // namespace abibench::ad
