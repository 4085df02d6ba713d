#include "semeda/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace semeda {

namespace {

void require_same_shape(const Grid& a, const Grid& b, const char* op) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                                " vs " + shape_string(b.shape()));
  }
}

}  // namespace

NodeId Tape::push_node(Grid value, bool requires_grad) {
  nodes_.push_back(Node{std::move(value), Grid{}, requires_grad});
  return nodes_.size() - 1;
}

NodeId Tape::variable(Grid value) { return push_node(std::move(value), true); }

NodeId Tape::constant(Grid value) { return push_node(std::move(value), false); }

NodeId Tape::record(Op op, std::vector<NodeId> inputs, Grid value, int int_arg, double real_arg,
                    std::shared_ptr<const std::vector<int>> targets) {
  bool needs = false;
  for (auto id : inputs) needs = needs || nodes_.at(id).requires_grad;
  const NodeId out = push_node(std::move(value), needs);
  if (needs) {
    entries_.push_back(Entry{op, std::move(inputs), out, int_arg, real_arg, std::move(targets), nullptr});
  }
  return out;
}

NodeId Tape::conv2d(NodeId input, NodeId kernel, NodeId bias, int stride) {
  auto columns = std::make_shared<std::vector<double>>();
  Grid out = detail::conv2d(value(input), value(kernel), value(bias), stride, columns.get());
  const NodeId id = record(Op::conv2d, {input, kernel, bias}, std::move(out), stride);
  if (requires_grad(kernel) && !columns->empty()) entries_.back().columns = std::move(columns);
  return id;
}

NodeId Tape::relu(NodeId x) { return record(Op::relu, {x}, semeda::relu(value(x))); }

NodeId Tape::channel_softmax(NodeId x) {
  return record(Op::channel_softmax, {x}, semeda::channel_softmax(value(x)));
}

NodeId Tape::bilinear_upsample(NodeId x, int factor) {
  return record(Op::bilinear_upsample, {x}, semeda::bilinear_upsample(value(x), factor), factor);
}

NodeId Tape::add(NodeId a, NodeId b) {
  require_same_shape(value(a), value(b), "add");
  Grid out = value(a);
  const auto rhs = value(b).data();
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += rhs[i];
  return record(Op::add, {a, b}, std::move(out));
}

NodeId Tape::sub(NodeId a, NodeId b) {
  require_same_shape(value(a), value(b), "sub");
  Grid out = value(a);
  const auto rhs = value(b).data();
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] -= rhs[i];
  return record(Op::sub, {a, b}, std::move(out));
}

NodeId Tape::scale(NodeId x, double factor) {
  Grid out = value(x);
  for (auto& v : out.data()) v *= factor;
  return record(Op::scale, {x}, std::move(out), 0, factor);
}

NodeId Tape::abs(NodeId x) {
  Grid out = value(x);
  for (auto& v : out.data()) v = std::fabs(v);
  return record(Op::abs, {x}, std::move(out));
}

NodeId Tape::square(NodeId x) {
  Grid out = value(x);
  for (auto& v : out.data()) v *= v;
  return record(Op::square, {x}, std::move(out));
}

NodeId Tape::sum(NodeId x) {
  double total = 0.0;
  for (double v : value(x).data()) total += v;
  return record(Op::sum, {x}, Grid::scalar(total));
}

NodeId Tape::cross_entropy(NodeId probs, std::vector<int> targets, double weight) {
  const Grid& p = value(probs);
  require_chw(p, "cross_entropy");
  const std::size_t c = p.dim(0), plane = p.dim(1) * p.dim(2);
  if (targets.size() != plane) {
    throw std::invalid_argument("cross_entropy: " + std::to_string(targets.size()) +
                                " targets for prediction " + shape_string(p.shape()));
  }
  double total = 0.0;
  for (std::size_t i = 0; i < plane; ++i) {
    const int t = targets[i];
    if (t < 0) continue;
    if (static_cast<std::size_t>(t) >= c) {
      throw std::invalid_argument("cross_entropy: target " + std::to_string(t) + " at pixel " +
                                  std::to_string(i) + " exceeds channel count " + std::to_string(c));
    }
    total += std::log(std::max(p[static_cast<std::size_t>(t) * plane + i], kLogFloor));
  }
  auto saved = std::make_shared<const std::vector<int>>(std::move(targets));
  return record(Op::cross_entropy, {probs}, Grid::scalar(-weight * total), 0, weight,
                std::move(saved));
}

double Tape::scalar(NodeId id) const {
  const Grid& v = value(id);
  if (v.size() != 1) throw std::invalid_argument("Tape::scalar: node is " + shape_string(v.shape()));
  return v[0];
}

const Grid& Tape::grad(NodeId id) const {
  const Node& n = nodes_.at(id);
  if (n.grad.empty()) throw std::logic_error("Tape::grad: node has no gradient");
  return n.grad;
}

Grid& Tape::grad_slot(NodeId id) { return nodes_[id].grad; }

void Tape::backward(NodeId loss) {
  if (value(loss).size() != 1) {
    throw std::invalid_argument("Tape::backward: loss node must be scalar, got " +
                                shape_string(value(loss).shape()));
  }
  for (auto& n : nodes_) n.grad = Grid{};
  if (!nodes_[loss].requires_grad) return;
  nodes_[loss].grad = Grid(nodes_[loss].value.shape(), 1.0);
  // Only nodes on a path to the loss get a gradient buffer.
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (nodes_[it->output].grad.empty()) continue;
    for (auto id : it->inputs) {
      Node& n = nodes_[id];
      if (n.requires_grad && n.grad.empty()) n.grad = Grid(n.value.shape(), 0.0);
    }
    backward_entry(*it);
  }
}

void Tape::backward_entry(const Entry& e) {
  const Grid& dy = nodes_[e.output].grad;
  auto needs = [&](std::size_t i) { return nodes_[e.inputs[i]].requires_grad; };

  switch (e.op) {
    case Op::conv2d: {
      const Grid& in = value(e.inputs[0]);
      const Grid& kernel = value(e.inputs[1]);
      const auto g = detail::conv_geometry(in, kernel, value(e.inputs[2]), e.int_arg);
      const std::size_t plane = g.out_h * g.out_w;
      const std::size_t depth = g.cin * g.k * g.k;
      const bool pointwise = g.k == 1 && e.int_arg == 1;
      if (needs(1)) {
        const double* columns = pointwise ? in.data().data() : e.columns->data();
        detail::gemm(false, true, g.cout, depth, plane, dy.data().data(), columns, 1.0,
                     grad_slot(e.inputs[1]).data().data());
      }
      if (needs(2)) {
        Grid& db = grad_slot(e.inputs[2]);
        for (std::size_t o = 0; o < g.cout; ++o) {
          double s = 0.0;
          for (std::size_t p = 0; p < plane; ++p) s += dy[o * plane + p];
          db[o] += s;
        }
      }
      if (needs(0)) {
        Grid& dx = grad_slot(e.inputs[0]);
        if (pointwise) {
          detail::gemm(true, false, depth, plane, g.cout, kernel.data().data(), dy.data().data(), 1.0,
                       dx.data().data());
        } else {
          // Fully overwritten by the beta = 0 product.
          const auto dcol = std::make_unique_for_overwrite<double[]>(depth * plane);
          detail::gemm(true, false, depth, plane, g.cout, kernel.data().data(), dy.data().data(), 0.0,
                       dcol.get());
          detail::col2im_add({dcol.get(), depth * plane}, g.k, e.int_arg, g.out_h, g.out_w, dx);
        }
      }
      break;
    }
    case Op::relu: {
      const auto x = value(e.inputs[0]).data();
      auto dx = grad_slot(e.inputs[0]).data();
      for (std::size_t i = 0; i < dx.size(); ++i)
        if (x[i] > 0.0) dx[i] += dy[i];
      break;
    }
    case Op::channel_softmax: {
      const Grid& y = value(e.output);
      auto dx = grad_slot(e.inputs[0]).data();
      const std::size_t c = y.dim(0), plane = y.dim(1) * y.dim(2);
      std::vector<double> dot(plane, 0.0);
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t p = 0; p < plane; ++p) dot[p] += y[ch * plane + p] * dy[ch * plane + p];
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t p = 0; p < plane; ++p) {
          const std::size_t i = ch * plane + p;
          dx[i] += y[i] * (dy[i] - dot[p]);
        }
      break;
    }
    case Op::bilinear_upsample: {
      const int factor = e.int_arg;
      Grid& dx = grad_slot(e.inputs[0]);
      if (factor == 1) {
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[i];
        break;
      }
      const std::size_t c = dx.dim(0), h = dx.dim(1), w = dx.dim(2);
      const auto f = static_cast<std::size_t>(factor);
      const auto ty = detail::upsample_taps(h, factor);
      const auto tx = detail::upsample_taps(w, factor);
      std::vector<double> rows(h * w * f);
      for (std::size_t ch = 0; ch < c; ++ch) {
        std::fill(rows.begin(), rows.end(), 0.0);
        for (std::size_t y = 0; y < h * f; ++y) {
          double* r0 = rows.data() + ty.i0[y] * w * f;
          double* r1 = rows.data() + ty.i1[y] * w * f;
          for (std::size_t x = 0; x < w * f; ++x) {
            const double g = dy.at(ch, y, x);
            r0[x] += ty.w0[y] * g;
            r1[x] += ty.w1[y] * g;
          }
        }
        for (std::size_t y = 0; y < h; ++y) {
          for (std::size_t x = 0; x < w * f; ++x) {
            const double g = rows[y * w * f + x];
            dx.at(ch, y, tx.i0[x]) += tx.w0[x] * g;
            dx.at(ch, y, tx.i1[x]) += tx.w1[x] * g;
          }
        }
      }
      break;
    }
    case Op::add:
    case Op::sub: {
      const double sign = e.op == Op::add ? 1.0 : -1.0;
      if (needs(0)) {
        auto da = grad_slot(e.inputs[0]).data();
        for (std::size_t i = 0; i < da.size(); ++i) da[i] += dy[i];
      }
      if (needs(1)) {
        auto db = grad_slot(e.inputs[1]).data();
        for (std::size_t i = 0; i < db.size(); ++i) db[i] += sign * dy[i];
      }
      break;
    }
    case Op::scale: {
      auto dx = grad_slot(e.inputs[0]).data();
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += e.real_arg * dy[i];
      break;
    }
    case Op::abs: {
      const auto x = value(e.inputs[0]).data();
      auto dx = grad_slot(e.inputs[0]).data();
      for (std::size_t i = 0; i < dx.size(); ++i) {
        if (x[i] > 0.0) dx[i] += dy[i];
        else if (x[i] < 0.0) dx[i] -= dy[i];
      }
      break;
    }
    case Op::square: {
      const auto x = value(e.inputs[0]).data();
      auto dx = grad_slot(e.inputs[0]).data();
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += 2.0 * x[i] * dy[i];
      break;
    }
    case Op::sum: {
      auto dx = grad_slot(e.inputs[0]).data();
      for (auto& v : dx) v += dy[0];
      break;
    }
    case Op::cross_entropy: {
      const Grid& p = value(e.inputs[0]);
      Grid& dp = grad_slot(e.inputs[0]);
      const std::size_t plane = p.dim(1) * p.dim(2);
      const double g = -e.real_arg * dy[0];
      const auto& targets = *e.targets;
      for (std::size_t i = 0; i < plane; ++i) {
        if (targets[i] < 0) continue;
        const std::size_t j = static_cast<std::size_t>(targets[i]) * plane + i;
        if (p[j] >= kLogFloor) dp[j] += g / p[j];
      }
      break;
    }
  }
}

}  // namespace semeda
