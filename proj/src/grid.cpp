#include "semeda/grid.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace semeda {

Grid::Grid(std::vector<std::size_t> shape, double fill) : shape_(std::move(shape)) {
  std::size_t n = 1;
  for (auto d : shape_) {
    if (d == 0) throw std::invalid_argument("Grid: zero dimension in shape " + shape_string(shape_));
    n *= d;
  }
  if (shape_.empty()) throw std::invalid_argument("Grid: empty shape");
  data_.assign(n, fill);
}

Grid::Grid(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_.empty()) throw std::invalid_argument("Grid: empty shape");
  std::size_t n = 1;
  for (auto d : shape_) {
    if (d == 0) throw std::invalid_argument("Grid: zero dimension in shape " + shape_string(shape_));
    n *= d;
  }
  if (n != data_.size()) {
    throw std::invalid_argument("Grid: shape " + shape_string(shape_) + " needs " + std::to_string(n) +
                                " values, got " + std::to_string(data_.size()));
  }
}

bool Grid::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Grid::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

void require_chw(const Grid& g, const char* what) {
  if (g.rank() != 3) {
    throw std::invalid_argument(std::string(what) + ": expected C x H x W grid, got " +
                                shape_string(g.shape()));
  }
}

namespace detail {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstView = Eigen::Map<const RowMajor>;
using View = Eigen::Map<RowMajor>;

template <typename Product>
void store(View out, const Product& product, double beta) {
  if (beta == 0.0) {
    out.noalias() = product;
  } else {
    if (beta != 1.0) out *= beta;
    out.noalias() += product;
  }
}

}  // namespace

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, const double* a,
          const double* b, double beta, double* c) {
  const auto rows = [](std::size_t r, std::size_t c_) { return std::pair{static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c_)}; };
  const auto [am, ak] = trans_a ? rows(k, m) : rows(m, k);
  const auto [bk, bn] = trans_b ? rows(n, k) : rows(k, n);
  const ConstView av(a, am, ak), bv(b, bk, bn);
  View out(c, static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  if (trans_a && trans_b) store(out, av.transpose() * bv.transpose(), beta);
  else if (trans_a) store(out, av.transpose() * bv, beta);
  else if (trans_b) store(out, av * bv.transpose(), beta);
  else store(out, av * bv, beta);
}


ConvGeometry conv_geometry(const Grid& input, const Grid& kernel, const Grid& bias, int stride) {
  require_chw(input, "conv2d input");
  if (kernel.rank() != 4) {
    throw std::invalid_argument("conv2d: kernel must be Cout x Cin x k x k, got " +
                                shape_string(kernel.shape()));
  }
  if (stride < 1) throw std::invalid_argument("conv2d: stride must be positive");
  ConvGeometry g{};
  g.cin = input.dim(0);
  g.h = input.dim(1);
  g.w = input.dim(2);
  g.cout = kernel.dim(0);
  g.k = kernel.dim(2);
  if (kernel.dim(1) != g.cin) {
    throw std::invalid_argument("conv2d: input " + shape_string(input.shape()) +
                                " has a different channel count than kernel " +
                                shape_string(kernel.shape()));
  }
  if (kernel.dim(3) != g.k || g.k % 2 == 0) {
    throw std::invalid_argument("conv2d: kernel must be square with odd size, got " +
                                shape_string(kernel.shape()));
  }
  if (bias.size() != g.cout) {
    throw std::invalid_argument("conv2d: bias " + shape_string(bias.shape()) +
                                " does not match kernel " + shape_string(kernel.shape()));
  }
  const auto s = static_cast<std::size_t>(stride);
  g.out_h = (g.h + s - 1) / s;
  g.out_w = (g.w + s - 1) / s;
  return g;
}

namespace {

/// Output positions o in [lo, hi) whose source o * s + offset lies in [0, n).
struct ValidRange {
  std::size_t lo, hi;
};

ValidRange valid_range(std::ptrdiff_t offset, std::ptrdiff_t s, std::size_t n, std::size_t out) {
  std::ptrdiff_t lo = 0;
  while (lo * s + offset < 0) ++lo;
  std::ptrdiff_t hi = static_cast<std::ptrdiff_t>(out);
  while (hi > lo && (hi - 1) * s + offset >= static_cast<std::ptrdiff_t>(n)) --hi;
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(std::max(lo, hi))};
}

}  // namespace

void im2col(const Grid& input, std::size_t k, int stride, std::size_t out_h, std::size_t out_w,
            std::vector<double>& col) {
  const std::size_t cin = input.dim(0), h = input.dim(1), w = input.dim(2);
  const auto pad = static_cast<std::ptrdiff_t>(k / 2);
  const auto s = static_cast<std::ptrdiff_t>(stride);
  const std::size_t plane = out_h * out_w;
  col.assign(cin * k * k * plane, 0.0);
  const double* src = input.data().data();
  for (std::size_t c = 0; c < cin; ++c) {
    for (std::size_t ky = 0; ky < k; ++ky) {
      const auto dy = static_cast<std::ptrdiff_t>(ky) - pad;
      const auto ys = valid_range(dy, s, h, out_h);
      for (std::size_t kx = 0; kx < k; ++kx) {
        double* row = col.data() + ((c * k + ky) * k + kx) * plane;
        const auto dx = static_cast<std::ptrdiff_t>(kx) - pad;
        const auto xs = valid_range(dx, s, w, out_w);
        for (std::size_t oy = ys.lo; oy < ys.hi; ++oy) {
          const auto iy = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(oy) * s + dy);
          const double* in_row = src + (c * h + iy) * w;
          double* out_row = row + oy * out_w;
          if (xs.lo == xs.hi) continue;
          const auto first = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(xs.lo) * s + dx);
          if (s == 1) {
            std::copy_n(in_row + first, xs.hi - xs.lo, out_row + xs.lo);
          } else {
            for (std::size_t ox = xs.lo, ix = first; ox < xs.hi; ++ox, ix += stride) out_row[ox] = in_row[ix];
          }
        }
      }
    }
  }
}

void col2im_add(std::span<const double> col, std::size_t k, int stride, std::size_t out_h,
                std::size_t out_w, Grid& input_grad) {
  const std::size_t cin = input_grad.dim(0), h = input_grad.dim(1), w = input_grad.dim(2);
  const auto pad = static_cast<std::ptrdiff_t>(k / 2);
  const auto s = static_cast<std::ptrdiff_t>(stride);
  const std::size_t plane = out_h * out_w;
  double* dst = input_grad.data().data();
  for (std::size_t c = 0; c < cin; ++c) {
    for (std::size_t ky = 0; ky < k; ++ky) {
      const auto dy = static_cast<std::ptrdiff_t>(ky) - pad;
      const auto ys = valid_range(dy, s, h, out_h);
      for (std::size_t kx = 0; kx < k; ++kx) {
        const double* row = col.data() + ((c * k + ky) * k + kx) * plane;
        const auto dx = static_cast<std::ptrdiff_t>(kx) - pad;
        const auto xs = valid_range(dx, s, w, out_w);
        for (std::size_t oy = ys.lo; oy < ys.hi; ++oy) {
          const auto iy = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(oy) * s + dy);
          double* in_row = dst + (c * h + iy) * w;
          const double* col_row = row + oy * out_w;
          if (xs.lo == xs.hi) continue;
          const auto first = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(xs.lo) * s + dx);
          for (std::size_t ox = xs.lo, ix = first; ox < xs.hi; ++ox, ix += stride) in_row[ix] += col_row[ox];
        }
      }
    }
  }
}

Taps upsample_taps(std::size_t n, int factor) {
  const std::size_t out = n * static_cast<std::size_t>(factor);
  Taps t;
  t.i0.resize(out);
  t.i1.resize(out);
  t.w0.resize(out);
  t.w1.resize(out);
  const double hi = static_cast<double>(n - 1);
  for (std::size_t d = 0; d < out; ++d) {
    double s = (static_cast<double>(d) + 0.5) / factor - 0.5;
    s = std::clamp(s, 0.0, hi);
    const auto i0 = static_cast<std::size_t>(std::floor(s));
    const std::size_t i1 = std::min(i0 + 1, n - 1);
    const double frac = s - static_cast<double>(i0);
    t.i0[d] = i0;
    t.i1[d] = i1;
    t.w0[d] = 1.0 - frac;
    t.w1[d] = frac;
  }
  return t;
}

}  // namespace detail

Grid detail::conv2d(const Grid& input, const Grid& kernel, const Grid& bias, int stride,
                    std::vector<double>* columns) {
  const auto g = conv_geometry(input, kernel, bias, stride);
  const std::size_t plane = g.out_h * g.out_w;
  const std::size_t depth = g.cin * g.k * g.k;
  Grid out({g.cout, g.out_h, g.out_w});
  double* dst = out.data().data();
  for (std::size_t o = 0; o < g.cout; ++o) std::fill_n(dst + o * plane, plane, bias[o]);

  const double* b = input.data().data();
  if (g.k != 1 || stride != 1) {
    im2col(input, g.k, stride, g.out_h, g.out_w, *columns);
    b = columns->data();
  }
  gemm(false, false, g.cout, plane, depth, kernel.data().data(), b, 1.0, dst);
  return out;
}

Grid conv2d(const Grid& input, const Grid& kernel, const Grid& bias, int stride) {
  std::vector<double> columns;
  return detail::conv2d(input, kernel, bias, stride, &columns);
}

Grid relu(const Grid& input) {
  Grid out = input;
  for (auto& v : out.data()) v = v > 0.0 ? v : 0.0;
  return out;
}

Grid channel_softmax(const Grid& input) {
  require_chw(input, "channel_softmax");
  const std::size_t c = input.dim(0), plane = input.dim(1) * input.dim(2);
  Grid out(input.shape());
  const double* src = input.data().data();
  double* dst = out.data().data();
  std::vector<double> peak(plane), total(plane, 0.0);
  for (std::size_t p = 0; p < plane; ++p) peak[p] = src[p];
  for (std::size_t ch = 1; ch < c; ++ch)
    for (std::size_t p = 0; p < plane; ++p) peak[p] = std::max(peak[p], src[ch * plane + p]);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t p = 0; p < plane; ++p) {
      const double e = std::exp(src[ch * plane + p] - peak[p]);
      dst[ch * plane + p] = e;
      total[p] += e;
    }
  }
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t p = 0; p < plane; ++p) dst[ch * plane + p] /= total[p];
  return out;
}

Grid bilinear_upsample(const Grid& input, int factor) {
  require_chw(input, "bilinear_upsample");
  if (factor < 1) throw std::invalid_argument("bilinear_upsample: factor must be positive");
  if (factor == 1) return input;
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  const auto f = static_cast<std::size_t>(factor);
  const auto ty = detail::upsample_taps(h, factor);
  const auto tx = detail::upsample_taps(w, factor);
  Grid out({c, h * f, w * f});
  std::vector<double> rows(h * w * f);
  for (std::size_t ch = 0; ch < c; ++ch) {
    // Horizontal pass into an H x fW buffer, then vertical.
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w * f; ++x) {
        rows[y * w * f + x] = tx.w0[x] * input.at(ch, y, tx.i0[x]) + tx.w1[x] * input.at(ch, y, tx.i1[x]);
      }
    }
    for (std::size_t y = 0; y < h * f; ++y) {
      const double* r0 = rows.data() + ty.i0[y] * w * f;
      const double* r1 = rows.data() + ty.i1[y] * w * f;
      for (std::size_t x = 0; x < w * f; ++x) out.at(ch, y, x) = ty.w0[y] * r0[x] + ty.w1[y] * r1[x];
    }
  }
  return out;
}

}  // namespace semeda
