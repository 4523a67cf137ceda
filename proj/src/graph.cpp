#include "ganvert/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

namespace ganvert {

namespace {

void expect_arity(Op op, const std::vector<const Tensor*>& inputs, std::size_t n) {
  if (inputs.size() != n) {
    throw std::invalid_argument(std::string(op_name(op)) + ": expected " + std::to_string(n) +
                                " operands, got " + std::to_string(inputs.size()));
  }
}

}  // namespace

const char* op_name(Op op) {
  switch (op) {
    case Op::input: return "input";
    case Op::matmul: return "matmul";
    case Op::conv2d: return "conv2d";
    case Op::upsample2x: return "upsample2x";
    case Op::maxpool2x: return "maxpool2x";
    case Op::add: return "add";
    case Op::scale: return "scale";
    case Op::mul: return "mul";
    case Op::relu: return "relu";
    case Op::tanh: return "tanh";
    case Op::softmax_rows: return "softmax_rows";
    case Op::affine_channel: return "affine_channel";
    case Op::reshape: return "reshape";
    case Op::reduce_sum: return "reduce_sum";
  }
  return "unknown";
}

Tensor primitive_forward(Op op, const std::vector<const Tensor*>& inputs,
                         const PrimitiveAttrs& attrs) {
  switch (op) {
    case Op::input:
      throw std::invalid_argument("input nodes have no forward computation");
    case Op::matmul:
      expect_arity(op, inputs, 2);
      return matmul(*inputs[0], *inputs[1], attrs.trans_a, attrs.trans_b);
    case Op::conv2d:
      expect_arity(op, inputs, 2);
      return conv2d(*inputs[0], *inputs[1]);
    case Op::upsample2x:
      expect_arity(op, inputs, 1);
      return upsample2x(*inputs[0]);
    case Op::maxpool2x:
      expect_arity(op, inputs, 1);
      return maxpool2x(*inputs[0]);
    case Op::add:
      expect_arity(op, inputs, 2);
      return add(*inputs[0], *inputs[1]);
    case Op::scale:
      expect_arity(op, inputs, 1);
      return scale(*inputs[0], attrs.factor);
    case Op::mul:
      expect_arity(op, inputs, 2);
      return mul(*inputs[0], *inputs[1]);
    case Op::relu:
      expect_arity(op, inputs, 1);
      return relu(*inputs[0]);
    case Op::tanh:
      expect_arity(op, inputs, 1);
      return tanh(*inputs[0]);
    case Op::softmax_rows:
      expect_arity(op, inputs, 1);
      return softmax_rows(*inputs[0]);
    case Op::affine_channel:
      expect_arity(op, inputs, 3);
      return affine_channel(*inputs[0], *inputs[1], *inputs[2]);
    case Op::reshape:
      expect_arity(op, inputs, 1);
      return reshape(*inputs[0], attrs.target_shape);
    case Op::reduce_sum:
      expect_arity(op, inputs, 1);
      return reduce_sum(*inputs[0]);
  }
  throw std::invalid_argument("primitive_forward: unknown op");
}

const Graph::Node& Graph::node(int id) const {
  if (id < 0 || id >= size()) {
    throw std::out_of_range("graph: node id " + std::to_string(id) + " outside [0," +
                            std::to_string(size()) + ")");
  }
  return nodes_[static_cast<std::size_t>(id)];
}

int Graph::push(Node n) {
  nodes_.push_back(std::move(n));
  return size() - 1;
}

int Graph::input(Tensor value) {
  if (value.empty()) throw shape_error("graph input: empty tensor");
  Node n;
  n.op = Op::input;
  n.value = std::move(value);
  return push(std::move(n));
}

int Graph::matmul(int a, int b, bool trans_a, bool trans_b) {
  Node n;
  n.op = Op::matmul;
  n.args = {a, b};
  n.attrs.trans_a = trans_a;
  n.attrs.trans_b = trans_b;
  n.value = primitive_forward(n.op, {&value(a), &value(b)}, n.attrs);
  return push(std::move(n));
}

int Graph::conv2d(int x, int kernel) {
  Node n;
  n.op = Op::conv2d;
  n.args = {x, kernel};
  n.value = primitive_forward(n.op, {&value(x), &value(kernel)}, n.attrs);
  return push(std::move(n));
}

int Graph::upsample2x(int x) {
  Node n;
  n.op = Op::upsample2x;
  n.args = {x};
  n.value = primitive_forward(n.op, {&value(x)}, n.attrs);
  return push(std::move(n));
}

int Graph::maxpool2x(int x) {
  Node n;
  n.op = Op::maxpool2x;
  n.args = {x};
  n.value = primitive_forward(n.op, {&value(x)}, n.attrs);
  return push(std::move(n));
}

int Graph::add(int a, int b) {
  Node n;
  n.op = Op::add;
  n.args = {a, b};
  n.value = primitive_forward(n.op, {&value(a), &value(b)}, n.attrs);
  return push(std::move(n));
}

int Graph::scale(int x, double factor) {
  Node n;
  n.op = Op::scale;
  n.args = {x};
  n.attrs.factor = factor;
  n.value = primitive_forward(n.op, {&value(x)}, n.attrs);
  return push(std::move(n));
}

int Graph::mul(int a, int b) {
  Node n;
  n.op = Op::mul;
  n.args = {a, b};
  n.value = primitive_forward(n.op, {&value(a), &value(b)}, n.attrs);
  return push(std::move(n));
}

int Graph::relu(int x) {
  Node n;
  n.op = Op::relu;
  n.args = {x};
  n.value = primitive_forward(n.op, {&value(x)}, n.attrs);
  return push(std::move(n));
}

int Graph::tanh(int x) {
  Node n;
  n.op = Op::tanh;
  n.args = {x};
  n.value = primitive_forward(n.op, {&value(x)}, n.attrs);
  return push(std::move(n));
}

int Graph::softmax_rows(int x) {
  Node n;
  n.op = Op::softmax_rows;
  n.args = {x};
  n.value = primitive_forward(n.op, {&value(x)}, n.attrs);
  return push(std::move(n));
}

int Graph::affine_channel(int x, int ch_scale, int ch_shift) {
  Node n;
  n.op = Op::affine_channel;
  n.args = {x, ch_scale, ch_shift};
  n.value = primitive_forward(n.op, {&value(x), &value(ch_scale), &value(ch_shift)}, n.attrs);
  return push(std::move(n));
}

int Graph::reshape(int x, std::vector<std::size_t> new_shape) {
  Node n;
  n.op = Op::reshape;
  n.args = {x};
  n.attrs.target_shape = std::move(new_shape);
  n.value = primitive_forward(n.op, {&value(x)}, n.attrs);
  return push(std::move(n));
}

int Graph::reduce_sum(int x) {
  Node n;
  n.op = Op::reduce_sum;
  n.args = {x};
  n.value = primitive_forward(n.op, {&value(x)}, n.attrs);
  return push(std::move(n));
}

std::vector<Tensor> Graph::backward(int output, const Tensor& output_grad,
                                    std::span<const int> wrt) const {
  const Node& out_node = node(output);
  if (!output_grad.same_shape(out_node.value)) {
    throw shape_error("backward: seed grad " + shape_string(output_grad.shape) +
                      " does not match output " + shape_string(out_node.value.shape));
  }
  for (int id : wrt) node(id);

  std::vector<Tensor> grads(nodes_.size());
  grads[static_cast<std::size_t>(output)] = output_grad;

  for (int i = output; i >= 0; --i) {
    const Tensor& g = grads[static_cast<std::size_t>(i)];
    if (g.empty()) continue;
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.op == Op::input) continue;

    auto accumulate = [&](int arg, Tensor contribution) {
      Tensor& slot = grads[static_cast<std::size_t>(arg)];
      if (slot.empty()) {
        slot = std::move(contribution);
      } else {
        slot = ganvert::add(slot, contribution);
      }
    };

    switch (n.op) {
      case Op::matmul: {
        const Tensor& a = nodes_[static_cast<std::size_t>(n.args[0])].value;
        const Tensor& b = nodes_[static_cast<std::size_t>(n.args[1])].value;
        const bool ta = n.attrs.trans_a, tb = n.attrs.trans_b;
        if (b.ndim() == 1) {
          // y = op(A) b with vector b; grad is a vector of length m.
          Tensor g2 = ganvert::reshape(g, {g.shape[0], 1});
          Tensor b2 = ganvert::reshape(b, {b.shape[0], 1});
          accumulate(n.args[0], ta ? ganvert::matmul(b2, g2, false, true)
                                   : ganvert::matmul(g2, b2, false, true));
          accumulate(n.args[1], ganvert::matmul(a, g, !ta, false));
        } else {
          Tensor da = ta ? ganvert::matmul(b, g, tb, true)
                         : ganvert::matmul(g, b, false, !tb);
          Tensor db = tb ? ganvert::matmul(g, a, true, ta)
                         : ganvert::matmul(a, g, !ta, false);
          accumulate(n.args[0], std::move(da));
          accumulate(n.args[1], std::move(db));
        }
        break;
      }
      case Op::conv2d: {
        const Tensor& x = nodes_[static_cast<std::size_t>(n.args[0])].value;
        const Tensor& k = nodes_[static_cast<std::size_t>(n.args[1])].value;
        accumulate(n.args[0], conv2d_vjp_input(g, k));
        accumulate(n.args[1], conv2d_vjp_kernel(g, x, k.shape[2], k.shape[3]));
        break;
      }
      case Op::upsample2x:
        accumulate(n.args[0], upsample2x_vjp(g));
        break;
      case Op::maxpool2x:
        accumulate(n.args[0],
                   maxpool2x_vjp(g, nodes_[static_cast<std::size_t>(n.args[0])].value, n.value));
        break;
      case Op::add:
        accumulate(n.args[0], g);
        accumulate(n.args[1], g);
        break;
      case Op::scale:
        accumulate(n.args[0], ganvert::scale(g, n.attrs.factor));
        break;
      case Op::mul:
        accumulate(n.args[0], ganvert::mul(g, nodes_[static_cast<std::size_t>(n.args[1])].value));
        accumulate(n.args[1], ganvert::mul(g, nodes_[static_cast<std::size_t>(n.args[0])].value));
        break;
      case Op::relu:
        accumulate(n.args[0], relu_vjp(g, nodes_[static_cast<std::size_t>(n.args[0])].value));
        break;
      case Op::tanh:
        accumulate(n.args[0], tanh_vjp(g, n.value));
        break;
      case Op::softmax_rows:
        accumulate(n.args[0], softmax_rows_vjp(g, n.value));
        break;
      case Op::affine_channel: {
        const Tensor& x = nodes_[static_cast<std::size_t>(n.args[0])].value;
        const Tensor& s = nodes_[static_cast<std::size_t>(n.args[1])].value;
        const std::size_t c = x.shape[0], plane = x.shape[1] * x.shape[2];
        accumulate(n.args[0], ganvert::affine_channel(g, s, Tensor({c}, 0.0)));
        Tensor ds({c}, 0.0), dt({c}, 0.0);
        for (std::size_t ch = 0; ch < c; ++ch) {
          for (std::size_t j = 0; j < plane; ++j) {
            ds[ch] += g.data[ch * plane + j] * x.data[ch * plane + j];
            dt[ch] += g.data[ch * plane + j];
          }
        }
        accumulate(n.args[1], std::move(ds));
        accumulate(n.args[2], std::move(dt));
        break;
      }
      case Op::reshape:
        accumulate(n.args[0],
                   ganvert::reshape(g, nodes_[static_cast<std::size_t>(n.args[0])].value.shape));
        break;
      case Op::reduce_sum:
        accumulate(n.args[0],
                   Tensor(nodes_[static_cast<std::size_t>(n.args[0])].value.shape, g[0]));
        break;
      case Op::input:
        break;
    }
  }

  std::vector<Tensor> out;
  out.reserve(wrt.size());
  for (int id : wrt) {
    const Tensor& slot = grads[static_cast<std::size_t>(id)];
    out.push_back(slot.empty() ? Tensor(value(id).shape, 0.0) : slot);
  }
  return out;
}

Tensor Graph::backward_scalar(int output, int wrt) const {
  if (value(output).size() != 1) {
    throw shape_error("backward_scalar: output has shape " + shape_string(value(output).shape) +
                      ", want a scalar");
  }
  const int ids[1] = {wrt};
  return backward(output, Tensor::scalar(1.0), std::span<const int>(ids, 1))[0];
}

bool Graph::replay_matches() const {
  for (const Node& n : nodes_) {
    if (n.op == Op::input) continue;
    std::vector<const Tensor*> ins;
    ins.reserve(n.args.size());
    for (int a : n.args) ins.push_back(&nodes_[static_cast<std::size_t>(a)].value);
    const Tensor re = primitive_forward(n.op, ins, n.attrs);
    if (!re.same_shape(n.value)) return false;
    if (std::memcmp(re.data.data(), n.value.data.data(), re.size() * sizeof(double)) != 0) {
      return false;
    }
  }
  return true;
}

Tensor Graph::eval_with_override(int id, const Tensor& replacement) const {
  if (!replacement.same_shape(value(id))) {
    throw shape_error("eval_with_override: replacement " + shape_string(replacement.shape) +
                      " does not match node " + shape_string(value(id).shape));
  }
  const int last = size() - 1;
  std::vector<Tensor> storage(nodes_.size());
  std::vector<char> touched(nodes_.size(), 0);
  storage[static_cast<std::size_t>(id)] = replacement;
  touched[static_cast<std::size_t>(id)] = 1;

  auto current = [&](int i) -> const Tensor& {
    return touched[static_cast<std::size_t>(i)] ? storage[static_cast<std::size_t>(i)]
                                                : nodes_[static_cast<std::size_t>(i)].value;
  };

  for (int i = id + 1; i <= last; ++i) {
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.op == Op::input) continue;
    bool stale = false;
    for (int a : n.args) stale = stale || touched[static_cast<std::size_t>(a)];
    if (!stale) continue;
    std::vector<const Tensor*> ins;
    ins.reserve(n.args.size());
    for (int a : n.args) ins.push_back(&current(a));
    storage[static_cast<std::size_t>(i)] = primitive_forward(n.op, ins, n.attrs);
    touched[static_cast<std::size_t>(i)] = 1;
  }
  return current(last);
}

GradCheckReport grad_check(const Graph& g, int wrt, double tolerance, double step) {
  if (g.size() == 0) throw std::invalid_argument("grad_check: empty graph");
  const int output = g.size() - 1;
  if (g.value(output).size() != 1) {
    throw shape_error("grad_check: final node has shape " + shape_string(g.value(output).shape) +
                      ", want a scalar");
  }

  const Tensor analytic = g.backward_scalar(output, wrt);
  const Tensor& x0 = g.value(wrt);

  GradCheckReport report;
  report.tolerance = tolerance;
  for (std::size_t j = 0; j < x0.size(); ++j) {
    Tensor plus = x0;
    plus.data[j] += step;
    Tensor minus = x0;
    minus.data[j] -= step;
    const double fp = g.eval_with_override(wrt, plus)[0];
    const double fm = g.eval_with_override(wrt, minus)[0];
    const double numeric = (fp - fm) / (2.0 * step);
    const double dev = std::abs(analytic[j] - numeric);
    const double rel = dev / std::max({1.0, std::abs(analytic[j]), std::abs(numeric)});
    report.max_abs_dev = std::max(report.max_abs_dev, dev);
    report.max_rel_dev = std::max(report.max_rel_dev, rel);
  }
  report.pass = report.max_rel_dev <= tolerance;
  return report;
}

}  // namespace ganvert
