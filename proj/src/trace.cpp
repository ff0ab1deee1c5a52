#include "cssl/trace.hpp"

#include <cmath>

#include "cssl/error.hpp"

namespace cssl {

namespace {
constexpr double kAcosClamp = 1e-7;
constexpr double kNormFloor = 1e-8;
}  // namespace

const char* op_name(Op op) {
  switch (op) {
    case Op::kConstant: return "constant";
    case Op::kInput: return "input";
    case Op::kParam: return "param";
    case Op::kMatMul: return "matmul";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kRelu: return "relu";
    case Op::kExp: return "exp";
    case Op::kLog: return "log";
    case Op::kSqrt: return "sqrt";
    case Op::kAbs: return "abs";
    case Op::kAcos: return "acos";
    case Op::kDot: return "dot";
    case Op::kL2Normalize: return "l2_normalize";
    case Op::kSoftmax: return "softmax";
    case Op::kSum: return "sum";
    case Op::kMean: return "mean";
    case Op::kConcat: return "concat";
    case Op::kScale: return "scale";
    case Op::kShift: return "shift";
    case Op::kPick: return "pick";
  }
  return "?";
}

namespace {
std::string node_label(NodeId id, Op op) {
  return "node " + std::to_string(id) + " (" + op_name(op) + ")";
}
}  // namespace

NodeId Trace::push(Node n) {
  nodes_.push_back(std::move(n));
  return nodes_.size() - 1;
}

void Trace::check_ref(NodeId id, const char* who) const {
  if (id >= nodes_.size()) {
    throw ValueError(std::string(who) + ": node ref " + std::to_string(id) +
                     " out of range");
  }
}

void Trace::require_rank1(NodeId id, const char* who) const {
  if (nodes_[id].shape.size() != 1) {
    throw ShapeError(std::string(who) + ": expected a vector, got shape " +
                     shape_str(nodes_[id].shape) + " at node " + std::to_string(id));
  }
}

const Node& Trace::node(NodeId id) const {
  check_ref(id, "Trace::node");
  return nodes_[id];
}

NodeId Trace::constant(Tensor value) {
  Node n;
  n.op = Op::kConstant;
  n.shape = value.shape;
  n.value = std::move(value);
  if (!n.value.all_finite()) throw NumericError("Trace::constant: non-finite value");
  return push(std::move(n));
}

NodeId Trace::input(const std::string& name, Shape shape) {
  if (inputs_.count(name) || params_.count(name)) {
    throw ValueError("Trace::input: duplicate name '" + name + "'");
  }
  Node n;
  n.op = Op::kInput;
  n.shape = std::move(shape);
  n.name = name;
  NodeId id = push(std::move(n));
  inputs_[name] = id;
  return id;
}

NodeId Trace::param(const std::string& name, Shape shape) {
  if (inputs_.count(name) || params_.count(name)) {
    throw ValueError("Trace::param: duplicate name '" + name + "'");
  }
  Node n;
  n.op = Op::kParam;
  n.shape = std::move(shape);
  n.name = name;
  NodeId id = push(std::move(n));
  params_[name] = id;
  return id;
}

NodeId Trace::matmul(NodeId a, NodeId b) {
  check_ref(a, "matmul");
  check_ref(b, "matmul");
  const Shape& sa = nodes_[a].shape;
  const Shape& sb = nodes_[b].shape;
  if (sa.size() != 2) {
    throw ShapeError("matmul: left operand must be a matrix, got " + shape_str(sa));
  }
  Shape out;
  if (sb.size() == 1) {
    if (sa[1] != sb[0]) {
      throw ShapeError("matmul: inner dims " + shape_str(sa) + " x " + shape_str(sb));
    }
    out = {sa[0]};
  } else if (sb.size() == 2) {
    if (sa[1] != sb[0]) {
      throw ShapeError("matmul: inner dims " + shape_str(sa) + " x " + shape_str(sb));
    }
    out = {sa[0], sb[1]};
  } else {
    throw ShapeError("matmul: right operand must be a vector or matrix, got " +
                     shape_str(sb));
  }
  Node n;
  n.op = Op::kMatMul;
  n.inputs = {a, b};
  n.shape = std::move(out);
  return push(std::move(n));
}

NodeId Trace::binary_same_shape(Op op, NodeId a, NodeId b) {
  check_ref(a, op_name(op));
  check_ref(b, op_name(op));
  if (nodes_[a].shape != nodes_[b].shape) {
    throw ShapeError(std::string(op_name(op)) + ": shape mismatch " +
                     shape_str(nodes_[a].shape) + " vs " + shape_str(nodes_[b].shape));
  }
  Node n;
  n.op = op;
  n.inputs = {a, b};
  n.shape = nodes_[a].shape;
  return push(std::move(n));
}

NodeId Trace::add(NodeId a, NodeId b) { return binary_same_shape(Op::kAdd, a, b); }
NodeId Trace::sub(NodeId a, NodeId b) { return binary_same_shape(Op::kSub, a, b); }
NodeId Trace::mul(NodeId a, NodeId b) { return binary_same_shape(Op::kMul, a, b); }

NodeId Trace::unary(Op op, NodeId a) {
  check_ref(a, op_name(op));
  Node n;
  n.op = op;
  n.inputs = {a};
  n.shape = nodes_[a].shape;
  return push(std::move(n));
}

NodeId Trace::relu(NodeId a) { return unary(Op::kRelu, a); }
NodeId Trace::exp(NodeId a) { return unary(Op::kExp, a); }
NodeId Trace::log(NodeId a) { return unary(Op::kLog, a); }
NodeId Trace::sqrt(NodeId a) { return unary(Op::kSqrt, a); }
NodeId Trace::abs(NodeId a) { return unary(Op::kAbs, a); }
NodeId Trace::acos(NodeId a) { return unary(Op::kAcos, a); }

NodeId Trace::dot(NodeId a, NodeId b) {
  check_ref(a, "dot");
  check_ref(b, "dot");
  require_rank1(a, "dot");
  require_rank1(b, "dot");
  if (nodes_[a].shape != nodes_[b].shape) {
    throw ShapeError("dot: length mismatch " + shape_str(nodes_[a].shape) + " vs " +
                     shape_str(nodes_[b].shape));
  }
  Node n;
  n.op = Op::kDot;
  n.inputs = {a, b};
  n.shape = {};
  return push(std::move(n));
}

NodeId Trace::l2_normalize(NodeId a) {
  check_ref(a, "l2_normalize");
  require_rank1(a, "l2_normalize");
  return unary(Op::kL2Normalize, a);
}

NodeId Trace::softmax(NodeId a) {
  check_ref(a, "softmax");
  require_rank1(a, "softmax");
  return unary(Op::kSoftmax, a);
}

NodeId Trace::sum(NodeId a) {
  check_ref(a, "sum");
  Node n;
  n.op = Op::kSum;
  n.inputs = {a};
  n.shape = {};
  return push(std::move(n));
}

NodeId Trace::mean(NodeId a) {
  check_ref(a, "mean");
  Node n;
  n.op = Op::kMean;
  n.inputs = {a};
  n.shape = {};
  return push(std::move(n));
}

NodeId Trace::concat(const std::vector<NodeId>& parts) {
  if (parts.empty()) throw ValueError("concat: no parts");
  std::size_t total = 0;
  for (NodeId p : parts) {
    check_ref(p, "concat");
    if (nodes_[p].shape.size() > 1) {
      throw ShapeError("concat: parts must be scalars or vectors, got " +
                       shape_str(nodes_[p].shape));
    }
    total += shape_size(nodes_[p].shape);
  }
  Node n;
  n.op = Op::kConcat;
  n.inputs = parts;
  n.shape = {total};
  return push(std::move(n));
}

NodeId Trace::scale(NodeId a, double factor) {
  check_ref(a, "scale");
  if (!std::isfinite(factor)) throw ValueError("scale: non-finite factor");
  Node n;
  n.op = Op::kScale;
  n.inputs = {a};
  n.shape = nodes_[a].shape;
  n.c = factor;
  return push(std::move(n));
}

NodeId Trace::shift(NodeId a, double offset) {
  check_ref(a, "shift");
  if (!std::isfinite(offset)) throw ValueError("shift: non-finite offset");
  Node n;
  n.op = Op::kShift;
  n.inputs = {a};
  n.shape = nodes_[a].shape;
  n.c = offset;
  return push(std::move(n));
}

NodeId Trace::pick(NodeId a, std::size_t index) {
  check_ref(a, "pick");
  require_rank1(a, "pick");
  if (index >= nodes_[a].shape[0]) {
    throw ShapeError("pick: index " + std::to_string(index) + " out of range for " +
                     shape_str(nodes_[a].shape));
  }
  Node n;
  n.op = Op::kPick;
  n.inputs = {a};
  n.shape = {};
  n.index = index;
  return push(std::move(n));
}

namespace {

void forward_one(const Trace& trace, NodeId id, const Bindings& bindings,
                 std::vector<Tensor>& vals) {
  const Node& n = trace.node(id);
  auto in = [&](std::size_t k) -> const Tensor& { return vals[n.inputs[k]]; };

  switch (n.op) {
    case Op::kConstant:
      vals[id] = n.value;
      return;
    case Op::kInput:
    case Op::kParam: {
      auto it = bindings.find(n.name);
      if (it == bindings.end()) {
        throw ValueError("evaluate: unbound " + std::string(op_name(n.op)) + " '" +
                         n.name + "'");
      }
      if (it->second.shape != n.shape) {
        throw ShapeError("evaluate: " + node_label(id, n.op) + " '" + n.name +
                         "' expects shape " + shape_str(n.shape) + ", got " +
                         shape_str(it->second.shape));
      }
      vals[id] = it->second;
      break;
    }
    case Op::kMatMul: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      std::size_t m = a.shape[0], k = a.shape[1];
      Tensor out = zeros(n.shape);
      if (b.rank() == 1) {
        for (std::size_t i = 0; i < m; ++i) {
          double s = 0.0;
          for (std::size_t l = 0; l < k; ++l) s += a.values[i * k + l] * b.values[l];
          out.values[i] = s;
        }
      } else {
        std::size_t p = b.shape[1];
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < p; ++j) {
            double s = 0.0;
            for (std::size_t l = 0; l < k; ++l) {
              s += a.values[i * k + l] * b.values[l * p + j];
            }
            out.values[i * p + j] = s;
          }
        }
      }
      vals[id] = std::move(out);
      break;
    }
    case Op::kAdd:
    case Op::kSub:
    case Op::kMul: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      Tensor out = zeros(n.shape);
      for (std::size_t i = 0; i < out.size(); ++i) {
        double x = a.values[i], y = b.values[i];
        out.values[i] = n.op == Op::kAdd ? x + y : n.op == Op::kSub ? x - y : x * y;
      }
      vals[id] = std::move(out);
      break;
    }
    case Op::kRelu: {
      Tensor out = in(0);
      for (double& v : out.values) v = v > 0.0 ? v : 0.0;
      vals[id] = std::move(out);
      break;
    }
    case Op::kExp: {
      Tensor out = in(0);
      for (double& v : out.values) v = std::exp(v);
      vals[id] = std::move(out);
      break;
    }
    case Op::kLog: {
      Tensor out = in(0);
      for (double& v : out.values) v = std::log(v);
      vals[id] = std::move(out);
      break;
    }
    case Op::kSqrt: {
      Tensor out = in(0);
      for (double& v : out.values) v = std::sqrt(v);
      vals[id] = std::move(out);
      break;
    }
    case Op::kAbs: {
      Tensor out = in(0);
      for (double& v : out.values) v = std::fabs(v);
      vals[id] = std::move(out);
      break;
    }
    case Op::kAcos: {
      Tensor out = in(0);
      for (double& v : out.values) {
        double x = v;
        if (x < -1.0 + kAcosClamp) x = -1.0 + kAcosClamp;
        if (x > 1.0 - kAcosClamp) x = 1.0 - kAcosClamp;
        v = std::acos(x);
      }
      vals[id] = std::move(out);
      break;
    }
    case Op::kDot: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      double s = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) s += a.values[i] * b.values[i];
      vals[id] = scalar_tensor(s);
      break;
    }
    case Op::kL2Normalize: {
      const Tensor& a = in(0);
      double norm = vec_norm(a.values);
      if (norm < kNormFloor) {
        throw NumericError("evaluate: " + node_label(id, n.op) + ": input norm " +
                           std::to_string(norm) + " below 1e-8");
      }
      Tensor out = a;
      for (double& v : out.values) v /= norm;
      vals[id] = std::move(out);
      break;
    }
    case Op::kSoftmax: {
      const Tensor& a = in(0);
      double mx = a.values[0];
      for (double v : a.values) mx = v > mx ? v : mx;
      Tensor out = a;
      double denom = 0.0;
      for (double& v : out.values) {
        v = std::exp(v - mx);
        denom += v;
      }
      for (double& v : out.values) v /= denom;
      vals[id] = std::move(out);
      break;
    }
    case Op::kSum:
    case Op::kMean: {
      const Tensor& a = in(0);
      double s = 0.0;
      for (double v : a.values) s += v;
      if (n.op == Op::kMean) s /= static_cast<double>(a.size());
      vals[id] = scalar_tensor(s);
      break;
    }
    case Op::kConcat: {
      Tensor out = zeros(n.shape);
      std::size_t pos = 0;
      for (NodeId p : n.inputs) {
        for (double v : vals[p].values) out.values[pos++] = v;
      }
      vals[id] = std::move(out);
      break;
    }
    case Op::kScale: {
      Tensor out = in(0);
      for (double& v : out.values) v *= n.c;
      vals[id] = std::move(out);
      break;
    }
    case Op::kShift: {
      Tensor out = in(0);
      for (double& v : out.values) v += n.c;
      vals[id] = std::move(out);
      break;
    }
    case Op::kPick: {
      vals[id] = scalar_tensor(in(0).values[n.index]);
      break;
    }
  }

  if (!vals[id].all_finite()) {
    throw NumericError("evaluate: non-finite output at " + node_label(id, n.op));
  }
}

}  // namespace

Values evaluate(const Trace& trace, const Bindings& bindings) {
  std::vector<Tensor> vals(trace.size());
  for (NodeId id = 0; id < trace.size(); ++id) {
    forward_one(trace, id, bindings, vals);
  }
  return Values(std::move(vals));
}

namespace {

// Marks every node the loss depends on; adjoints are only propagated there.
std::vector<char> reachable_set(const Trace& trace, NodeId loss) {
  std::vector<char> reach(trace.size(), 0);
  reach[loss] = 1;
  for (NodeId id = loss + 1; id-- > 0;) {
    if (!reach[id]) continue;
    for (NodeId in : trace.node(id).inputs) reach[in] = 1;
  }
  return reach;
}

}  // namespace

GradientMap gradient(const Trace& trace, NodeId loss, const Bindings& bindings) {
  if (loss >= trace.size()) throw ValueError("gradient: loss node out of range");
  if (!trace.node(loss).shape.empty()) {
    throw ShapeError("gradient: loss node must be scalar, got shape " +
                     shape_str(trace.node(loss).shape));
  }

  // Forward pass first; adjoints need the cached outputs.
  std::vector<Tensor> vals(trace.size());
  for (NodeId id = 0; id < trace.size(); ++id) forward_one(trace, id, bindings, vals);

  std::vector<char> reach = reachable_set(trace, loss);
  std::vector<Tensor> adj(trace.size());
  for (NodeId id = 0; id < trace.size(); ++id) {
    if (reach[id]) adj[id] = zeros(trace.node(id).shape);
  }
  adj[loss].values[0] = 1.0;

  for (NodeId id = loss + 1; id-- > 0;) {
    if (!reach[id]) continue;
    const Node& n = trace.node(id);
    const Tensor& g = adj[id];
    auto in_val = [&](std::size_t k) -> const Tensor& { return vals[n.inputs[k]]; };
    auto in_adj = [&](std::size_t k) -> Tensor& { return adj[n.inputs[k]]; };

    switch (n.op) {
      case Op::kConstant:
      case Op::kInput:
      case Op::kParam:
        break;
      case Op::kMatMul: {
        const Tensor& a = in_val(0);
        const Tensor& b = in_val(1);
        Tensor& da = in_adj(0);
        Tensor& db = in_adj(1);
        std::size_t m = a.shape[0], k = a.shape[1];
        if (b.rank() == 1) {
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t l = 0; l < k; ++l) {
              da.values[i * k + l] += g.values[i] * b.values[l];
              db.values[l] += a.values[i * k + l] * g.values[i];
            }
          }
        } else {
          std::size_t p = b.shape[1];
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < p; ++j) {
              double gij = g.values[i * p + j];
              for (std::size_t l = 0; l < k; ++l) {
                da.values[i * k + l] += gij * b.values[l * p + j];
                db.values[l * p + j] += a.values[i * k + l] * gij;
              }
            }
          }
        }
        break;
      }
      case Op::kAdd:
        for (std::size_t i = 0; i < g.size(); ++i) {
          in_adj(0).values[i] += g.values[i];
          in_adj(1).values[i] += g.values[i];
        }
        break;
      case Op::kSub:
        for (std::size_t i = 0; i < g.size(); ++i) {
          in_adj(0).values[i] += g.values[i];
          in_adj(1).values[i] -= g.values[i];
        }
        break;
      case Op::kMul:
        for (std::size_t i = 0; i < g.size(); ++i) {
          in_adj(0).values[i] += g.values[i] * in_val(1).values[i];
          in_adj(1).values[i] += g.values[i] * in_val(0).values[i];
        }
        break;
      case Op::kRelu:
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (in_val(0).values[i] > 0.0) in_adj(0).values[i] += g.values[i];
        }
        break;
      case Op::kExp:
        for (std::size_t i = 0; i < g.size(); ++i) {
          in_adj(0).values[i] += g.values[i] * vals[id].values[i];
        }
        break;
      case Op::kLog:
        for (std::size_t i = 0; i < g.size(); ++i) {
          in_adj(0).values[i] += g.values[i] / in_val(0).values[i];
        }
        break;
      case Op::kSqrt:
        for (std::size_t i = 0; i < g.size(); ++i) {
          double y = vals[id].values[i];
          if (y > 0.0) in_adj(0).values[i] += g.values[i] * 0.5 / y;
        }
        break;
      case Op::kAbs:
        for (std::size_t i = 0; i < g.size(); ++i) {
          double x = in_val(0).values[i];
          if (x > 0.0) in_adj(0).values[i] += g.values[i];
          else if (x < 0.0) in_adj(0).values[i] -= g.values[i];
        }
        break;
      case Op::kAcos:
        for (std::size_t i = 0; i < g.size(); ++i) {
          double x = in_val(0).values[i];
          if (x > -1.0 + kAcosClamp && x < 1.0 - kAcosClamp) {
            in_adj(0).values[i] += -g.values[i] / std::sqrt(1.0 - x * x);
          }
        }
        break;
      case Op::kDot: {
        double gs = g.values[0];
        for (std::size_t i = 0; i < in_val(0).size(); ++i) {
          in_adj(0).values[i] += gs * in_val(1).values[i];
          in_adj(1).values[i] += gs * in_val(0).values[i];
        }
        break;
      }
      case Op::kL2Normalize: {
        const Tensor& x = in_val(0);
        const Tensor& y = vals[id];
        double norm = vec_norm(x.values);
        double gy = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) gy += g.values[i] * y.values[i];
        for (std::size_t i = 0; i < y.size(); ++i) {
          in_adj(0).values[i] += (g.values[i] - gy * y.values[i]) / norm;
        }
        break;
      }
      case Op::kSoftmax: {
        const Tensor& y = vals[id];
        double gy = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) gy += g.values[i] * y.values[i];
        for (std::size_t i = 0; i < y.size(); ++i) {
          in_adj(0).values[i] += y.values[i] * (g.values[i] - gy);
        }
        break;
      }
      case Op::kSum: {
        double gs = g.values[0];
        for (double& v : in_adj(0).values) v += gs;
        break;
      }
      case Op::kMean: {
        double gs = g.values[0] / static_cast<double>(in_val(0).size());
        for (double& v : in_adj(0).values) v += gs;
        break;
      }
      case Op::kConcat: {
        std::size_t pos = 0;
        for (std::size_t k = 0; k < n.inputs.size(); ++k) {
          Tensor& d = in_adj(k);
          for (std::size_t i = 0; i < d.size(); ++i) d.values[i] += g.values[pos++];
        }
        break;
      }
      case Op::kScale:
        for (std::size_t i = 0; i < g.size(); ++i) {
          in_adj(0).values[i] += g.values[i] * n.c;
        }
        break;
      case Op::kShift:
        for (std::size_t i = 0; i < g.size(); ++i) {
          in_adj(0).values[i] += g.values[i];
        }
        break;
      case Op::kPick:
        in_adj(0).values[n.index] += g.values[0];
        break;
    }
  }

  GradientMap out;
  for (const auto& [name, id] : trace.params()) {
    if (reach[id]) {
      out[name] = adj[id];
    } else {
      out[name] = zeros(trace.node(id).shape);
    }
  }
  return out;
}

double check_gradient(const Trace& trace, NodeId loss, const Bindings& bindings,
                      double eps) {
  if (!(eps > 0.0) || eps > 1e-2) {
    throw ValueError("check_gradient: eps must be in (0, 1e-2]");
  }
  GradientMap analytic = gradient(trace, loss, bindings);

  double max_err = 0.0;
  for (const auto& [name, grad] : analytic) {
    Bindings probe = bindings;
    auto it = probe.find(name);
    if (it == probe.end()) {
      throw ValueError("check_gradient: param '" + name + "' is not bound");
    }
    for (std::size_t i = 0; i < grad.size(); ++i) {
      double orig = it->second.values[i];
      it->second.values[i] = orig + eps;
      double lp = evaluate(trace, probe).scalar_at(loss);
      it->second.values[i] = orig - eps;
      double lm = evaluate(trace, probe).scalar_at(loss);
      it->second.values[i] = orig;
      double fd = (lp - lm) / (2.0 * eps);
      if (!std::isfinite(fd)) {
        throw NumericError("check_gradient: non-finite finite-difference estimate for '" +
                           name + "'[" + std::to_string(i) + "]");
      }
      double err = std::fabs(grad.values[i] - fd) / std::max(1.0, std::fabs(fd));
      if (err > max_err) max_err = err;
    }
  }
  return max_err;
}

}  // namespace cssl
