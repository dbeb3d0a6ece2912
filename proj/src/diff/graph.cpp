#include "vl/diff/graph.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "vl/random.hpp"

namespace vl::diff {

namespace {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

double stable_sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

struct ConvGeometry {
  std::size_t height, width, in_ch, out_ch, kernel;
  std::size_t taps() const { return kernel * kernel * in_ch; }
  std::size_t pixels() const { return height * width; }
};

ConvGeometry conv_geometry(const Shape& x, const Shape& w) {
  return {x.height, x.width, x.channels, w.channels / x.channels, w.height};
}

// Row p of the column matrix holds the k x k x in_ch receptive field of
// output pixel p, zero outside the image.
void im2col(const ConvGeometry& g, const double* x, double* cols) {
  const auto pad = static_cast<std::ptrdiff_t>(g.kernel / 2);
  const auto h = static_cast<std::ptrdiff_t>(g.height);
  const auto w = static_cast<std::ptrdiff_t>(g.width);
  double* out = cols;
  for (std::ptrdiff_t r = 0; r < h; ++r) {
    for (std::ptrdiff_t c = 0; c < w; ++c) {
      for (std::size_t ky = 0; ky < g.kernel; ++ky) {
        const std::ptrdiff_t sr = r + static_cast<std::ptrdiff_t>(ky) - pad;
        for (std::size_t kx = 0; kx < g.kernel; ++kx) {
          const std::ptrdiff_t sc = c + static_cast<std::ptrdiff_t>(kx) - pad;
          if (sr < 0 || sr >= h || sc < 0 || sc >= w) {
            std::fill(out, out + g.in_ch, 0.0);
          } else {
            const double* src = x + (sr * w + sc) * g.in_ch;
            std::copy(src, src + g.in_ch, out);
          }
          out += g.in_ch;
        }
      }
    }
  }
}

void col2im_add(const ConvGeometry& g, const double* cols, double* gx) {
  const auto pad = static_cast<std::ptrdiff_t>(g.kernel / 2);
  const auto h = static_cast<std::ptrdiff_t>(g.height);
  const auto w = static_cast<std::ptrdiff_t>(g.width);
  const double* in = cols;
  for (std::ptrdiff_t r = 0; r < h; ++r) {
    for (std::ptrdiff_t c = 0; c < w; ++c) {
      for (std::size_t ky = 0; ky < g.kernel; ++ky) {
        const std::ptrdiff_t sr = r + static_cast<std::ptrdiff_t>(ky) - pad;
        for (std::size_t kx = 0; kx < g.kernel; ++kx) {
          const std::ptrdiff_t sc = c + static_cast<std::ptrdiff_t>(kx) - pad;
          if (sr >= 0 && sr < h && sc >= 0 && sc < w) {
            double* dst = gx + (sr * w + sc) * g.in_ch;
            for (std::size_t ci = 0; ci < g.in_ch; ++ci) dst[ci] += in[ci];
          }
          in += g.in_ch;
        }
      }
    }
  }
}

void add_into(DenseGrid& dst, const DenseGrid& src) {
  double* d = dst.data();
  const double* s = src.data();
  for (std::size_t i = 0; i < dst.size(); ++i) d[i] += s[i];
}

}  // namespace

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::Input: return "input";
    case OpKind::Parameter: return "parameter";
    case OpKind::Conv2d: return "conv2d";
    case OpKind::Add: return "add";
    case OpKind::Subtract: return "subtract";
    case OpKind::Scale: return "scale";
    case OpKind::Relu: return "relu";
    case OpKind::Sigmoid: return "sigmoid";
    case OpKind::ClampedLog: return "clamped_log";
    case OpKind::ChannelSelect: return "channel_select";
    case OpKind::Gather: return "gather";
    case OpKind::Mean: return "mean";
    case OpKind::Sum: return "sum";
    case OpKind::Norm: return "norm";
    case OpKind::Hinge: return "hinge";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Graph construction

const Node& Graph::node(NodeId id) const {
  check(id);
  return nodes_[id.index];
}

void Graph::check(NodeId id) const {
  if (id.index >= nodes_.size()) {
    throw std::out_of_range("graph has no node #" + std::to_string(id.index));
  }
}

std::string Graph::describe(NodeId id) const {
  const Node& n = node(id);
  if (!n.name.empty()) return "'" + n.name + "'";
  return "#" + std::to_string(id.index) + " " + std::string(op_name(n.kind));
}

NodeId Graph::push(Node node) {
  for (NodeId in : node.inputs) check(in);
  nodes_.push_back(std::move(node));
  return NodeId{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

NodeId Graph::leaf(OpKind kind, std::string name, Shape shape) {
  if (shape.size() == 0) {
    throw std::invalid_argument("leaf '" + name + "' has empty shape");
  }
  for (const Node& n : nodes_) {
    if (!n.name.empty() && n.name == name) {
      throw std::invalid_argument("duplicate leaf name '" + name + "'");
    }
  }
  Node n;
  n.kind = kind;
  n.shape = shape;
  n.name = std::move(name);
  return push(std::move(n));
}

NodeId Graph::input(std::string name, Shape shape) {
  return leaf(OpKind::Input, std::move(name), shape);
}

NodeId Graph::parameter(std::string name, Shape shape) {
  return leaf(OpKind::Parameter, std::move(name), shape);
}

NodeId Graph::conv2d(NodeId x, NodeId weight, NodeId bias) {
  const Shape& xs = node(x).shape;
  const Shape& ws = node(weight).shape;
  const Shape& bs = node(bias).shape;
  const std::string where = "conv2d(" + describe(x) + ", " + describe(weight) + ")";
  if (ws.height != ws.width || ws.height % 2 == 0) {
    throw std::invalid_argument(where + ": kernel must be odd and square, got " +
                                ws.str());
  }
  if (ws.channels % xs.channels != 0) {
    throw std::invalid_argument(where + ": weight channels " +
                                std::to_string(ws.channels) +
                                " not a multiple of input channels " +
                                std::to_string(xs.channels));
  }
  const std::size_t out_ch = ws.channels / xs.channels;
  if (bs != Shape{1, 1, out_ch}) {
    throw std::invalid_argument(where + ": bias " + describe(bias) + " has shape " +
                                bs.str() + ", expected 1x1x" +
                                std::to_string(out_ch));
  }
  Node n;
  n.kind = OpKind::Conv2d;
  n.inputs = {x, weight, bias};
  n.shape = Shape{xs.height, xs.width, out_ch};
  return push(std::move(n));
}

NodeId Graph::add(NodeId a, NodeId b) {
  if (node(a).shape != node(b).shape) {
    throw std::invalid_argument("add(" + describe(a) + ", " + describe(b) +
                                "): shape " + node(a).shape.str() + " vs " +
                                node(b).shape.str());
  }
  Node n;
  n.kind = OpKind::Add;
  n.inputs = {a, b};
  n.shape = node(a).shape;
  return push(std::move(n));
}

NodeId Graph::subtract(NodeId a, NodeId b) {
  if (node(a).shape != node(b).shape) {
    throw std::invalid_argument("subtract(" + describe(a) + ", " + describe(b) +
                                "): shape " + node(a).shape.str() + " vs " +
                                node(b).shape.str());
  }
  Node n;
  n.kind = OpKind::Subtract;
  n.inputs = {a, b};
  n.shape = node(a).shape;
  return push(std::move(n));
}

NodeId Graph::scale(NodeId x, double factor) {
  Node n;
  n.kind = OpKind::Scale;
  n.inputs = {x};
  n.shape = node(x).shape;
  n.scalar = factor;
  return push(std::move(n));
}

NodeId Graph::relu(NodeId x) {
  Node n;
  n.kind = OpKind::Relu;
  n.inputs = {x};
  n.shape = node(x).shape;
  return push(std::move(n));
}

NodeId Graph::sigmoid(NodeId x) {
  Node n;
  n.kind = OpKind::Sigmoid;
  n.inputs = {x};
  n.shape = node(x).shape;
  return push(std::move(n));
}

NodeId Graph::clamped_log(NodeId x, double eps) {
  if (!(eps > 0.0 && eps < 0.5)) {
    throw std::invalid_argument("clamped_log: epsilon must lie in (0, 0.5)");
  }
  Node n;
  n.kind = OpKind::ClampedLog;
  n.inputs = {x};
  n.shape = node(x).shape;
  n.scalar = eps;
  return push(std::move(n));
}

NodeId Graph::channel_select(NodeId x, std::size_t channel) {
  const Shape& xs = node(x).shape;
  if (channel >= xs.channels) {
    throw std::out_of_range("channel_select(" + describe(x) + "): channel " +
                            std::to_string(channel) + " of " +
                            std::to_string(xs.channels));
  }
  Node n;
  n.kind = OpKind::ChannelSelect;
  n.inputs = {x};
  n.shape = Shape{xs.height, xs.width, 1};
  n.channel = channel;
  return push(std::move(n));
}

NodeId Graph::gather(NodeId x, std::vector<Pixel> points) {
  const Shape& xs = node(x).shape;
  if (points.empty()) {
    throw std::invalid_argument("gather(" + describe(x) + "): empty point list");
  }
  for (const Pixel& p : points) {
    if (p.row >= xs.height || p.col >= xs.width) {
      throw std::out_of_range("gather(" + describe(x) + "): pixel (" +
                              std::to_string(p.row) + "," + std::to_string(p.col) +
                              ") outside " + xs.str());
    }
  }
  Node n;
  n.kind = OpKind::Gather;
  n.inputs = {x};
  n.shape = Shape{points.size(), 1, xs.channels};
  n.points = std::move(points);
  return push(std::move(n));
}

NodeId Graph::mean(NodeId x) {
  Node n;
  n.kind = OpKind::Mean;
  n.inputs = {x};
  n.shape = Shape{1, 1, node(x).shape.channels};
  return push(std::move(n));
}

NodeId Graph::sum(NodeId x) {
  Node n;
  n.kind = OpKind::Sum;
  n.inputs = {x};
  n.shape = Shape{1, 1, 1};
  return push(std::move(n));
}

NodeId Graph::norm(NodeId x) {
  const Shape& xs = node(x).shape;
  Node n;
  n.kind = OpKind::Norm;
  n.inputs = {x};
  n.shape = Shape{xs.height, xs.width, 1};
  return push(std::move(n));
}

NodeId Graph::hinge(NodeId x, double margin) {
  Node n;
  n.kind = OpKind::Hinge;
  n.inputs = {x};
  n.shape = node(x).shape;
  n.scalar = margin;
  return push(std::move(n));
}

void Graph::set_output(std::string name, NodeId id) {
  check(id);
  outputs_.emplace_back(std::move(name), id);
}

std::vector<NodeId> Graph::leaves() const {
  std::vector<NodeId> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const OpKind k = nodes_[i].kind;
    if (k == OpKind::Input || k == OpKind::Parameter) {
      out.push_back(NodeId{static_cast<std::uint32_t>(i)});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Forward

Tape::Tape(const Graph& graph)
    : graph_(&graph), values_(graph.size()), columns_(graph.size()) {}

const DenseGrid& Tape::value(NodeId id) const {
  if (!evaluated_) throw std::logic_error("Tape::value before forward()");
  if (id.index >= values_.size()) {
    throw std::out_of_range("tape has no node #" + std::to_string(id.index));
  }
  return values_[id.index];
}

void Tape::forward(const Bindings& bindings) {
  evaluated_ = false;
  std::uint64_t sig = 0x5bd1e995ULL;
  auto branch = [&sig](bool taken) { sig = mix64(sig ^ (taken ? 0x9fULL : 0x3bULL)); };

  const auto& nodes = graph_->nodes();
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const Node& n = nodes[i];
    DenseGrid& out = values_[i];
    if (n.kind == OpKind::Input || n.kind == OpKind::Parameter) {
      auto it = bindings.find(n.name);
      if (it == bindings.end()) {
        throw std::invalid_argument("unbound " + std::string(op_name(n.kind)) +
                                    " '" + n.name + "'");
      }
      if (it->second.shape() != n.shape) {
        throw std::invalid_argument("leaf '" + n.name + "' bound with shape " +
                                    it->second.shape().str() + ", declared " +
                                    n.shape.str());
      }
      out = it->second;
      continue;
    }

    if (out.shape() != n.shape) out = DenseGrid(n.shape);
    const DenseGrid& a = values_[n.inputs[0].index];
    double* y = out.data();
    const double* x = a.data();
    const std::size_t count = out.size();

    switch (n.kind) {
      case OpKind::Conv2d: {
        const DenseGrid& w = values_[n.inputs[1].index];
        const DenseGrid& b = values_[n.inputs[2].index];
        const ConvGeometry g = conv_geometry(a.shape(), w.shape());
        const double* cols = x;
        if (g.kernel > 1) {
          columns_[i].resize(g.pixels() * g.taps());
          im2col(g, x, columns_[i].data());
          cols = columns_[i].data();
        }
        ConstMatrixMap colm(cols, static_cast<Eigen::Index>(g.pixels()),
                            static_cast<Eigen::Index>(g.taps()));
        ConstMatrixMap wm(w.data(), static_cast<Eigen::Index>(g.taps()),
                          static_cast<Eigen::Index>(g.out_ch));
        MatrixMap ym(y, static_cast<Eigen::Index>(g.pixels()),
                     static_cast<Eigen::Index>(g.out_ch));
        ym.noalias() = colm * wm;
        for (std::size_t p = 0; p < g.pixels(); ++p) {
          double* row = y + p * g.out_ch;
          for (std::size_t co = 0; co < g.out_ch; ++co) row[co] += b[co];
        }
        break;
      }
      case OpKind::Add: {
        const double* bx = values_[n.inputs[1].index].data();
        for (std::size_t k = 0; k < count; ++k) y[k] = x[k] + bx[k];
        break;
      }
      case OpKind::Subtract: {
        const double* bx = values_[n.inputs[1].index].data();
        for (std::size_t k = 0; k < count; ++k) y[k] = x[k] - bx[k];
        break;
      }
      case OpKind::Scale:
        for (std::size_t k = 0; k < count; ++k) y[k] = n.scalar * x[k];
        break;
      case OpKind::Relu:
        for (std::size_t k = 0; k < count; ++k) {
          const bool on = x[k] > 0.0;
          y[k] = on ? x[k] : 0.0;
          branch(on);
        }
        break;
      case OpKind::Sigmoid:
        for (std::size_t k = 0; k < count; ++k) y[k] = stable_sigmoid(x[k]);
        break;
      case OpKind::ClampedLog: {
        const double lo = n.scalar;
        const double hi = 1.0 - n.scalar;
        for (std::size_t k = 0; k < count; ++k) {
          const bool inside = x[k] >= lo && x[k] <= hi;
          y[k] = std::log(std::clamp(x[k], lo, hi));
          branch(inside);
        }
        break;
      }
      case OpKind::ChannelSelect: {
        const std::size_t c = a.channels();
        for (std::size_t p = 0; p < count; ++p) y[p] = x[p * c + n.channel];
        break;
      }
      case OpKind::Gather: {
        const std::size_t c = a.channels();
        for (std::size_t k = 0; k < n.points.size(); ++k) {
          const double* src = x + a.index(n.points[k].row, n.points[k].col, 0);
          std::copy(src, src + c, y + k * c);
        }
        break;
      }
      case OpKind::Mean: {
        const std::size_t c = a.channels();
        const std::size_t pixels = a.shape().pixels();
        out.fill(0.0);
        for (std::size_t p = 0; p < pixels; ++p)
          for (std::size_t ch = 0; ch < c; ++ch) y[ch] += x[p * c + ch];
        for (std::size_t ch = 0; ch < c; ++ch) y[ch] /= static_cast<double>(pixels);
        break;
      }
      case OpKind::Sum: {
        double s = 0.0;
        for (std::size_t k = 0; k < a.size(); ++k) s += x[k];
        y[0] = s;
        break;
      }
      case OpKind::Norm: {
        const std::size_t c = a.channels();
        for (std::size_t p = 0; p < count; ++p) {
          double s = 0.0;
          for (std::size_t ch = 0; ch < c; ++ch) s += x[p * c + ch] * x[p * c + ch];
          y[p] = std::sqrt(s);
          branch(s > 0.0);
        }
        break;
      }
      case OpKind::Hinge:
        for (std::size_t k = 0; k < count; ++k) {
          const double z = n.scalar - x[k];
          const bool active = z > 0.0;
          y[k] = active ? z : 0.0;
          branch(active);
        }
        break;
      case OpKind::Input:
      case OpKind::Parameter:
        break;
    }
  }
  signature_ = sig;
  evaluated_ = true;
}

// ---------------------------------------------------------------------------
// Backward

GradientSet Tape::backward(NodeId scalar_output) const {
  if (!evaluated_) throw std::logic_error("backward on an un-evaluated graph");
  const Node& out = graph_->node(scalar_output);
  if (out.shape != Shape{1, 1, 1}) {
    throw std::invalid_argument("backward: output " + graph_->describe(scalar_output) +
                                " has shape " + out.shape.str() +
                                ", expected scalar 1x1x1");
  }
  const DenseGrid one = DenseGrid::scalar(1.0);
  const Seed seed{scalar_output, &one};
  return backward(std::span<const Seed>(&seed, 1));
}

GradientSet Tape::backward(std::span<const Seed> seeds) const {
  if (!evaluated_) throw std::logic_error("backward on an un-evaluated graph");
  const auto& nodes = graph_->nodes();
  std::vector<DenseGrid> grads(nodes.size());

  auto accumulate = [&](NodeId id) -> DenseGrid& {
    DenseGrid& g = grads[id.index];
    if (g.empty()) g = DenseGrid(nodes[id.index].shape);
    return g;
  };

  for (const Seed& s : seeds) {
    const Node& n = graph_->node(s.node);
    if (s.gradient == nullptr || s.gradient->shape() != n.shape) {
      throw std::invalid_argument("seed for " + graph_->describe(s.node) +
                                  " has wrong shape");
    }
    add_into(accumulate(s.node), *s.gradient);
  }

  for (std::size_t i = nodes.size(); i-- > 0;) {
    const Node& n = nodes[i];
    if (grads[i].empty()) continue;
    if (n.kind == OpKind::Input || n.kind == OpKind::Parameter) continue;
    const double* gy = grads[i].data();
    const DenseGrid& a = values_[n.inputs[0].index];
    const double* x = a.data();
    const double* y = values_[i].data();
    const std::size_t count = n.shape.size();

    switch (n.kind) {
      case OpKind::Conv2d: {
        const DenseGrid& w = values_[n.inputs[1].index];
        const ConvGeometry g = conv_geometry(a.shape(), w.shape());
        const auto pixels = static_cast<Eigen::Index>(g.pixels());
        const auto taps = static_cast<Eigen::Index>(g.taps());
        const auto out_ch = static_cast<Eigen::Index>(g.out_ch);
        const double* cols = g.kernel > 1 ? columns_[i].data() : x;
        ConstMatrixMap colm(cols, pixels, taps);
        ConstMatrixMap wm(w.data(), taps, out_ch);
        ConstMatrixMap gym(gy, pixels, out_ch);

        MatrixMap gw(accumulate(n.inputs[1]).data(), taps, out_ch);
        gw.noalias() += colm.transpose() * gym;

        DenseGrid& gb = accumulate(n.inputs[2]);
        for (std::size_t p = 0; p < g.pixels(); ++p)
          for (std::size_t co = 0; co < g.out_ch; ++co) gb[co] += gy[p * g.out_ch + co];

        DenseGrid& gx = accumulate(n.inputs[0]);
        if (g.kernel > 1) {
          RowMatrix gcols = gym * wm.transpose();
          col2im_add(g, gcols.data(), gx.data());
        } else {
          MatrixMap gxm(gx.data(), pixels, taps);
          gxm.noalias() += gym * wm.transpose();
        }
        break;
      }
      case OpKind::Add: {
        double* ga = accumulate(n.inputs[0]).data();
        for (std::size_t k = 0; k < count; ++k) ga[k] += gy[k];
        double* gb = accumulate(n.inputs[1]).data();
        for (std::size_t k = 0; k < count; ++k) gb[k] += gy[k];
        break;
      }
      case OpKind::Subtract: {
        double* ga = accumulate(n.inputs[0]).data();
        for (std::size_t k = 0; k < count; ++k) ga[k] += gy[k];
        double* gb = accumulate(n.inputs[1]).data();
        for (std::size_t k = 0; k < count; ++k) gb[k] -= gy[k];
        break;
      }
      case OpKind::Scale: {
        double* ga = accumulate(n.inputs[0]).data();
        for (std::size_t k = 0; k < count; ++k) ga[k] += n.scalar * gy[k];
        break;
      }
      case OpKind::Relu: {
        double* ga = accumulate(n.inputs[0]).data();
        for (std::size_t k = 0; k < count; ++k)
          if (x[k] > 0.0) ga[k] += gy[k];
        break;
      }
      case OpKind::Sigmoid: {
        double* ga = accumulate(n.inputs[0]).data();
        for (std::size_t k = 0; k < count; ++k) ga[k] += gy[k] * y[k] * (1.0 - y[k]);
        break;
      }
      case OpKind::ClampedLog: {
        double* ga = accumulate(n.inputs[0]).data();
        const double lo = n.scalar;
        const double hi = 1.0 - n.scalar;
        for (std::size_t k = 0; k < count; ++k)
          if (x[k] >= lo && x[k] <= hi) ga[k] += gy[k] / x[k];
        break;
      }
      case OpKind::ChannelSelect: {
        double* ga = accumulate(n.inputs[0]).data();
        const std::size_t c = a.channels();
        for (std::size_t p = 0; p < count; ++p) ga[p * c + n.channel] += gy[p];
        break;
      }
      case OpKind::Gather: {
        DenseGrid& ga = accumulate(n.inputs[0]);
        const std::size_t c = a.channels();
        for (std::size_t k = 0; k < n.points.size(); ++k) {
          double* dst = ga.data() + a.index(n.points[k].row, n.points[k].col, 0);
          for (std::size_t ch = 0; ch < c; ++ch) dst[ch] += gy[k * c + ch];
        }
        break;
      }
      case OpKind::Mean: {
        double* ga = accumulate(n.inputs[0]).data();
        const std::size_t c = a.channels();
        const std::size_t pixels = a.shape().pixels();
        const double inv = 1.0 / static_cast<double>(pixels);
        for (std::size_t p = 0; p < pixels; ++p)
          for (std::size_t ch = 0; ch < c; ++ch) ga[p * c + ch] += gy[ch] * inv;
        break;
      }
      case OpKind::Sum: {
        double* ga = accumulate(n.inputs[0]).data();
        for (std::size_t k = 0; k < a.size(); ++k) ga[k] += gy[0];
        break;
      }
      case OpKind::Norm: {
        double* ga = accumulate(n.inputs[0]).data();
        const std::size_t c = a.channels();
        for (std::size_t p = 0; p < count; ++p) {
          if (y[p] > 0.0) {
            const double s = gy[p] / y[p];
            for (std::size_t ch = 0; ch < c; ++ch) ga[p * c + ch] += s * x[p * c + ch];
          }
        }
        break;
      }
      case OpKind::Hinge: {
        double* ga = accumulate(n.inputs[0]).data();
        for (std::size_t k = 0; k < count; ++k)
          if (n.scalar - x[k] > 0.0) ga[k] -= gy[k];
        break;
      }
      case OpKind::Input:
      case OpKind::Parameter:
        break;
    }
  }

  GradientSet result;
  for (NodeId leaf : graph_->leaves()) {
    const Node& n = nodes[leaf.index];
    DenseGrid g = grads[leaf.index].empty() ? DenseGrid(n.shape)
                                            : std::move(grads[leaf.index]);
    result.emplace(n.name, std::move(g));
  }
  return result;
}

std::map<std::string, DenseGrid> eval_graph(const Graph& graph,
                                            const Bindings& bindings) {
  Tape tape(graph);
  tape.forward(bindings);
  std::map<std::string, DenseGrid> out;
  for (const auto& [name, id] : graph.outputs()) out.emplace(name, tape.value(id));
  return out;
}

GradientSet backprop(const Graph& graph, const Bindings& bindings,
                     NodeId scalar_output) {
  Tape tape(graph);
  tape.forward(bindings);
  return tape.backward(scalar_output);
}

}  // namespace vl::diff
