#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ganvert/tensor.hpp"

namespace ganvert {

enum class Op : std::uint8_t {
  input,
  matmul,
  conv2d,
  upsample2x,
  maxpool2x,
  add,
  scale,
  mul,
  relu,
  tanh,
  softmax_rows,
  affine_channel,
  reshape,
  reduce_sum,
};

const char* op_name(Op op);

// Non-tensor operands of a primitive.
struct PrimitiveAttrs {
  double factor = 1.0;                   // scale
  bool trans_a = false, trans_b = false; // matmul
  std::vector<std::size_t> target_shape; // reshape
};

// Evaluates one primitive on already-computed operand values. The tape replay
// and the free functions in tensor.hpp share this dispatcher, so recorded and
// recomputed values are bitwise identical.
Tensor primitive_forward(Op op, const std::vector<const Tensor*>& inputs,
                         const PrimitiveAttrs& attrs = {});

// Record-mode computation tape. Nodes are appended in evaluation order, so
// ids are already a topological order; every builder computes its value
// eagerly through primitive_forward. A graph is confined to one thread.
class Graph {
 public:
  struct Node {
    Op op;
    std::vector<int> args;
    Tensor value;
    PrimitiveAttrs attrs;
  };

  int input(Tensor value);
  int matmul(int a, int b, bool trans_a = false, bool trans_b = false);
  int conv2d(int x, int kernel);
  int upsample2x(int x);
  int maxpool2x(int x);
  int add(int a, int b);
  int scale(int x, double factor);
  int mul(int a, int b);
  int relu(int x);
  int tanh(int x);
  int softmax_rows(int x);
  int affine_channel(int x, int ch_scale, int ch_shift);
  int reshape(int x, std::vector<std::size_t> new_shape);
  int reduce_sum(int x);

  int size() const { return static_cast<int>(nodes_.size()); }
  const Node& node(int id) const;
  const Tensor& value(int id) const { return node(id).value; }

  // Vector-Jacobian products of the node `output` with respect to each node
  // in `wrt`, seeded with `output_grad`. Unreachable nodes get zero tensors.
  // The graph itself is left untouched.
  std::vector<Tensor> backward(int output, const Tensor& output_grad,
                               std::span<const int> wrt) const;
  // Convenience for scalar outputs: seeds with grad 1.
  Tensor backward_scalar(int output, int wrt) const;

  // Recomputes every non-input node from the recorded inputs and compares
  // bitwise against the recorded values.
  bool replay_matches() const;

  // Recomputes the final node's value with node `id`'s value replaced;
  // downstream nodes are re-evaluated, everything else keeps its recording.
  Tensor eval_with_override(int id, const Tensor& replacement) const;

 private:
  int push(Node n);
  std::vector<Node> nodes_;
};

struct GradCheckReport {
  double max_abs_dev = 0.0;
  double max_rel_dev = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

// Central finite differences of the graph's final (scalar) node with respect
// to node `wrt`, compared against backward(). The graph must be smooth at the
// recorded point; callers resample inputs that sit near relu/maxpool kinks.
GradCheckReport grad_check(const Graph& g, int wrt, double tolerance, double step = 1e-5);

}  // namespace ganvert
