#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "cssl/tensor.hpp"

namespace cssl {

using NodeId = std::size_t;

enum class Op {
  kConstant,
  kInput,
  kParam,
  kMatMul,
  kAdd,
  kSub,
  kMul,
  kRelu,
  kExp,
  kLog,
  kSqrt,
  kAbs,
  kAcos,
  kDot,
  kL2Normalize,
  kSoftmax,
  kSum,
  kMean,
  kConcat,
  kScale,
  kShift,
  kPick,
};

const char* op_name(Op op);

struct Node {
  Op op;
  std::vector<NodeId> inputs;
  Shape shape;         // fixed by the shape rule when the node is built
  std::string name;    // inputs and params only
  Tensor value;        // constants only
  double c = 0.0;      // scale factor / shift offset
  std::size_t index = 0;  // pick index
};

// Recorded differentiable computation. Nodes only reference earlier nodes, so
// construction order is a topological order. Shapes are checked as nodes are
// added; evaluation cannot encounter a shape mismatch that construction did
// not already reject, except for mis-shaped input bindings.
//
// acos clamps its argument to [-1 + 1e-7, 1 - 1e-7] and has zero gradient
// outside that range. relu, abs and sqrt take subgradient 0 at their kinks.
class Trace {
 public:
  NodeId constant(Tensor value);
  NodeId input(const std::string& name, Shape shape);
  NodeId param(const std::string& name, Shape shape);

  NodeId matmul(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId relu(NodeId a);
  NodeId exp(NodeId a);
  NodeId log(NodeId a);
  NodeId sqrt(NodeId a);
  NodeId abs(NodeId a);
  NodeId acos(NodeId a);
  NodeId dot(NodeId a, NodeId b);
  NodeId l2_normalize(NodeId a);
  NodeId softmax(NodeId a);
  NodeId sum(NodeId a);
  NodeId mean(NodeId a);
  NodeId concat(const std::vector<NodeId>& parts);
  NodeId scale(NodeId a, double factor);
  NodeId shift(NodeId a, double offset);
  NodeId pick(NodeId a, std::size_t index);

  const Node& node(NodeId id) const;
  std::size_t size() const { return nodes_.size(); }

  const std::map<std::string, NodeId>& params() const { return params_; }
  const std::map<std::string, NodeId>& inputs() const { return inputs_; }

 private:
  NodeId push(Node n);
  NodeId unary(Op op, NodeId a);
  NodeId binary_same_shape(Op op, NodeId a, NodeId b);
  void check_ref(NodeId id, const char* who) const;
  void require_rank1(NodeId id, const char* who) const;

  std::vector<Node> nodes_;
  std::map<std::string, NodeId> params_;
  std::map<std::string, NodeId> inputs_;
};

using Bindings = std::map<std::string, Tensor>;
using GradientMap = std::map<std::string, Tensor>;

// Per-node outputs of one evaluation. Kept outside the Trace so that a trace
// can be evaluated from several threads at once.
class Values {
 public:
  explicit Values(std::vector<Tensor> vals) : vals_(std::move(vals)) {}
  const Tensor& at(NodeId id) const { return vals_.at(id); }
  double scalar_at(NodeId id) const { return vals_.at(id).values.at(0); }
  std::size_t size() const { return vals_.size(); }

 private:
  std::vector<Tensor> vals_;
};

// Forward pass. Every input and param must be bound by name; every node
// output is checked finite. Deterministic: fixed reduction order throughout.
Values evaluate(const Trace& trace, const Bindings& bindings = {});

// Reverse pass from a scalar loss node: one gradient per param leaf, zeros
// for params the loss does not reach.
GradientMap gradient(const Trace& trace, NodeId loss, const Bindings& bindings = {});

// Max over all param entries of |analytic - central difference| /
// max(1, |central difference|).
double check_gradient(const Trace& trace, NodeId loss, const Bindings& bindings,
                      double eps);

}  // namespace cssl
