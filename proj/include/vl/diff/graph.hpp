#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vl/grid.hpp"
#include "vl/mask.hpp"

namespace vl::diff {

/// The closed set of operations a Graph may contain.
enum class OpKind : std::uint8_t {
  Input,
  Parameter,
  Conv2d,         // zero padding, stride 1, odd square kernel, with bias
  Add,
  Subtract,
  Scale,          // multiply by a scalar constant
  Relu,
  Sigmoid,
  ClampedLog,     // log(clamp(x, eps, 1 - eps))
  ChannelSelect,  // H x W x C -> H x W x 1
  Gather,         // H x W x C -> N x 1 x C at a fixed pixel list
  Mean,           // H x W x C -> 1 x 1 x C, mean over pixels
  Sum,            // any -> 1 x 1 x 1
  Norm,           // H x W x C -> H x W x 1, euclidean norm over channels
  Hinge,          // max(0, margin - x)
};

std::string_view op_name(OpKind kind);

struct NodeId {
  std::uint32_t index = 0;
  friend auto operator<=>(const NodeId&, const NodeId&) = default;
};

struct Node {
  OpKind kind = OpKind::Input;
  std::vector<NodeId> inputs;
  Shape shape;
  std::string name;  // leaves only
  double scalar = 0.0;  // Scale factor, Hinge margin, ClampedLog epsilon
  std::size_t channel = 0;
  std::vector<Pixel> points;
};

using Bindings = std::map<std::string, DenseGrid, std::less<>>;
using GradientSet = Bindings;

/// Static computation graph. Nodes can only reference nodes created before
/// them, so creation order is a topological order and the graph is acyclic
/// by construction. Shapes are inferred and checked as nodes are added.
class Graph {
 public:
  NodeId input(std::string name, Shape shape);
  NodeId parameter(std::string name, Shape shape);

  /// weight has shape (k, k, in_channels * out_channels) laid out as
  /// (ky, kx, ci, co); bias has shape (1, 1, out_channels).
  NodeId conv2d(NodeId x, NodeId weight, NodeId bias);
  NodeId add(NodeId a, NodeId b);
  NodeId subtract(NodeId a, NodeId b);
  NodeId scale(NodeId x, double factor);
  NodeId relu(NodeId x);
  NodeId sigmoid(NodeId x);
  NodeId clamped_log(NodeId x, double eps);
  NodeId channel_select(NodeId x, std::size_t channel);
  NodeId gather(NodeId x, std::vector<Pixel> points);
  NodeId mean(NodeId x);
  NodeId sum(NodeId x);
  NodeId norm(NodeId x);
  NodeId hinge(NodeId x, double margin);

  void set_output(std::string name, NodeId id);
  const std::vector<std::pair<std::string, NodeId>>& outputs() const {
    return outputs_;
  }

  const Node& node(NodeId id) const;
  const std::vector<Node>& nodes() const { return nodes_; }
  std::size_t size() const { return nodes_.size(); }

  /// Input and Parameter nodes, in creation order.
  std::vector<NodeId> leaves() const;
  /// "#<index> <op>" or the leaf name; used in error messages.
  std::string describe(NodeId id) const;

 private:
  NodeId push(Node node);
  NodeId leaf(OpKind kind, std::string name, Shape shape);
  void check(NodeId id) const;

  std::vector<Node> nodes_;
  std::vector<std::pair<std::string, NodeId>> outputs_;
};

/// Gradient seed for a non-scalar backward pass: d(objective)/d(node value).
struct Seed {
  NodeId node;
  const DenseGrid* gradient = nullptr;
};

/// Forward values and reverse accumulation for one Graph instance.
/// Single-threaded; separate tapes over one Graph are independent.
class Tape {
 public:
  explicit Tape(const Graph& graph);

  void forward(const Bindings& bindings);
  bool evaluated() const { return evaluated_; }
  const DenseGrid& value(NodeId id) const;

  /// Hash of every non-smooth branch taken in the last forward pass
  /// (rectifier sign, hinge activity, log clamping, zero norms).
  std::uint64_t branch_signature() const { return signature_; }

  /// Gradient of a 1x1x1 output node w.r.t. every leaf.
  GradientSet backward(NodeId scalar_output) const;
  /// Vector-Jacobian product for arbitrary seeds; unseeded nodes count as 0.
  GradientSet backward(std::span<const Seed> seeds) const;

 private:
  const Graph* graph_;
  std::vector<DenseGrid> values_;
  std::vector<std::vector<double>> columns_;  // im2col buffers of Conv2d nodes
  std::uint64_t signature_ = 0;
  bool evaluated_ = false;
};

/// Forward-evaluate and return every designated output by name.
std::map<std::string, DenseGrid> eval_graph(const Graph& graph,
                                            const Bindings& bindings);

/// Convenience: forward then backward from a scalar node.
GradientSet backprop(const Graph& graph, const Bindings& bindings,
                     NodeId scalar_output);

}  // namespace vl::diff
