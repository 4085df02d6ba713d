#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace semeda {

/// Dense row-major array of doubles. Images, masks, embeddings and
/// parameters are all Grids; by convention the leading axes are
/// channels (or batch) and the last two are height and width.
class Grid {
 public:
  Grid() = default;
  explicit Grid(std::vector<std::size_t> shape, double fill = 0.0);
  Grid(std::vector<std::size_t> shape, std::vector<double> data);

  static Grid scalar(double value) { return Grid({1}, std::vector<double>{value}); }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  /// Element access for rank-3 grids laid out as C x H x W.
  double& at(std::size_t c, std::size_t y, std::size_t x) {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
  }
  double at(std::size_t c, std::size_t y, std::size_t x) const {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
  }

  bool same_shape(const Grid& other) const { return shape_ == other.shape_; }
  bool all_finite() const;
  void fill(double value);

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

std::string shape_string(const std::vector<std::size_t>& shape);

/// Throws std::invalid_argument unless `g` has rank 3.
void require_chw(const Grid& g, const char* what);

// Forward kernels. The Tape wraps these and adds their adjoints.

/// Cross-correlation with zero "same" padding of (k-1)/2. Output spatial
/// size is ceil(H/stride) x ceil(W/stride).
Grid conv2d(const Grid& input, const Grid& kernel, const Grid& bias, int stride);

Grid relu(const Grid& input);

/// Per-pixel softmax over the channel axis of a C x H x W grid.
Grid channel_softmax(const Grid& input);

/// Bilinear upsampling by an integer factor. Output pixel d samples the
/// source at s = (d + 0.5) / factor - 0.5, clamped to [0, n - 1].
Grid bilinear_upsample(const Grid& input, int factor);

namespace detail {

/// C (m x n) = op(A) op(B) + beta C over contiguous row-major operands,
/// where op transposes when the flag is set. A is stored m x k (k x m when
/// transposed), B k x n (n x k when transposed).
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, const double* a,
          const double* b, double beta, double* c);

/// conv2d that leaves its im2col buffer in `*columns` (untouched for a
/// 1x1 stride-1 kernel, which needs none).
Grid conv2d(const Grid& input, const Grid& kernel, const Grid& bias, int stride, std::vector<double>* columns);

/// Column buffer for one convolution: (Cin*k*k) x (H'*W').
void im2col(const Grid& input, std::size_t k, int stride, std::size_t out_h,
            std::size_t out_w, std::vector<double>& col);
void col2im_add(std::span<const double> col, std::size_t k, int stride,
                std::size_t out_h, std::size_t out_w, Grid& input_grad);

struct ConvGeometry {
  std::size_t cin, h, w, cout, k, out_h, out_w;
};
ConvGeometry conv_geometry(const Grid& input, const Grid& kernel, const Grid& bias,
                           int stride);

/// Interpolation taps along one axis: out[d] = w0 * in[i0] + w1 * in[i1].
struct Taps {
  std::vector<std::size_t> i0, i1;
  std::vector<double> w0, w1;
};
Taps upsample_taps(std::size_t n, int factor);

}  // namespace detail

}  // namespace semeda
