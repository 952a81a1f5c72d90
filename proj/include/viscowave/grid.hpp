#pragma once

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <stdexcept>

namespace viscowave {

template <typename Scalar>
using FieldT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using Field = FieldT<double>;

/// Uniform node-centred box grid with homogeneous Dirichlet boundary.
///
/// Only interior nodes are stored. Node (i_0, ..., i_{dim-1}) sits at
/// x_d = (i_d + 1) h_d with h_d = L_d / (n_d + 1), and fields are laid out
/// row-major so the last axis is contiguous.
class Grid {
 public:
  Grid() = default;
  Grid(int dim, std::array<double, 3> extent, std::array<int, 3> nodes);

  static Grid interval(double length, int n) { return Grid(1, {length, 1.0, 1.0}, {n, 1, 1}); }

  int dim() const { return dim_; }
  int nodes(int axis) const { return n_[axis]; }
  double extent(int axis) const { return extent_[axis]; }
  double spacing(int axis) const { return h_[axis]; }
  double min_spacing() const;
  std::ptrdiff_t stride(int axis) const { return stride_[axis]; }
  Eigen::Index size() const { return size_; }
  /// Quadrature weight attached to every node.
  double cell_volume() const { return cell_volume_; }
  /// |Omega|.
  double measure() const;

  std::array<int, 3> multi_index(Eigen::Index flat) const;
  std::array<double, 3> coordinates(Eigen::Index flat) const;

  Field sample(const std::function<double(const std::array<double, 3>&)>& fn) const;
  Field zeros() const { return Field::Zero(size_); }

  friend bool operator==(const Grid& a, const Grid& b) {
    return a.dim_ == b.dim_ && a.n_ == b.n_ && a.extent_ == b.extent_;
  }

 private:
  int dim_ = 1;
  std::array<double, 3> extent_{1.0, 1.0, 1.0};
  std::array<int, 3> n_{3, 1, 1};
  std::array<double, 3> h_{0.25, 1.0, 1.0};
  std::array<std::ptrdiff_t, 3> stride_{1, 1, 1};
  Eigen::Index size_ = 3;
  double cell_volume_ = 0.25;
};

/// Writes node index, coordinates and value, one node per row.
void write_field_csv(std::ostream& os, const Grid& grid, const Field& f);

namespace detail {

template <typename Derived>
void require_on_grid(const Grid& grid, const Eigen::MatrixBase<Derived>& f) {
  if (f.size() != grid.size()) throw std::invalid_argument("field does not belong to grid");
}

/// Calls fn(offset, stride, n) once per grid line along `axis`.
template <typename Fn>
void for_each_line(const Grid& grid, int axis, Fn&& fn) {
  const std::ptrdiff_t stride = grid.stride(axis);
  const std::ptrdiff_t n = grid.nodes(axis);
  const std::ptrdiff_t block = stride * n;
  const std::ptrdiff_t outer = grid.size() / block;
  for (std::ptrdiff_t o = 0; o < outer; ++o)
    for (std::ptrdiff_t i = 0; i < stride; ++i) fn(o * block + i, stride, n);
}

}  // namespace detail

/// Second-order central Laplacian with zero ghost values.
template <typename Derived>
FieldT<typename Derived::Scalar> laplacian(const Grid& grid, const Eigen::MatrixBase<Derived>& f_in) {
  using Scalar = typename Derived::Scalar;
  detail::require_on_grid(grid, f_in);
  const FieldT<Scalar> f = f_in;
  FieldT<Scalar> out = FieldT<Scalar>::Zero(f.size());
  for (int d = 0; d < grid.dim(); ++d) {
    const Scalar inv_h2 = Scalar(1) / Scalar(grid.spacing(d) * grid.spacing(d));
    detail::for_each_line(grid, d, [&](std::ptrdiff_t off, std::ptrdiff_t s, std::ptrdiff_t n) {
      for (std::ptrdiff_t j = 0; j < n; ++j) {
        const Scalar left = j > 0 ? f[off + (j - 1) * s] : Scalar(0);
        const Scalar right = j + 1 < n ? f[off + (j + 1) * s] : Scalar(0);
        out[off + j * s] += (left - Scalar(2) * f[off + j * s] + right) * inv_h2;
      }
    });
  }
  return out;
}

template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar inner_l2(const Grid& grid, const Eigen::MatrixBase<DerivedA>& f,
                                   const Eigen::MatrixBase<DerivedB>& g) {
  detail::require_on_grid(grid, f);
  detail::require_on_grid(grid, g);
  return typename DerivedA::Scalar(grid.cell_volume()) * f.dot(g);
}

template <typename Derived>
typename Derived::Scalar norm_l2(const Grid& grid, const Eigen::MatrixBase<Derived>& f) {
  using std::sqrt;
  return sqrt(inner_l2(grid, f, f));
}

/// Integral of |f|^q; the q-th power of norm_lp.
template <typename Derived>
typename Derived::Scalar lp_power(const Grid& grid, const Eigen::MatrixBase<Derived>& f, double q) {
  using Scalar = typename Derived::Scalar;
  detail::require_on_grid(grid, f);
  if (!(q >= 1.0)) throw std::invalid_argument("Lebesgue exponent must be >= 1");
  Scalar acc(0);
  if (q == 2.0) {
    acc = f.squaredNorm();
  } else {
    for (Eigen::Index i = 0; i < f.size(); ++i) acc += std::pow(std::abs(f[i]), Scalar(q));
  }
  return Scalar(grid.cell_volume()) * acc;
}

template <typename Derived>
typename Derived::Scalar norm_lp(const Grid& grid, const Eigen::MatrixBase<Derived>& f, double q) {
  using Scalar = typename Derived::Scalar;
  return std::pow(lp_power(grid, f, q), Scalar(1.0 / q));
}

/// Discrete <grad f, grad g>: forward differences over every face, boundary
/// faces included. Pairs with `laplacian` by summation by parts.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar inner_grad(const Grid& grid, const Eigen::MatrixBase<DerivedA>& f_in,
                                     const Eigen::MatrixBase<DerivedB>& g_in) {
  using Scalar = typename DerivedA::Scalar;
  detail::require_on_grid(grid, f_in);
  detail::require_on_grid(grid, g_in);
  const FieldT<Scalar> f = f_in;
  const FieldT<Scalar> g = g_in;
  Scalar total(0);
  for (int d = 0; d < grid.dim(); ++d) {
    Scalar axis_sum(0);
    detail::for_each_line(grid, d, [&](std::ptrdiff_t off, std::ptrdiff_t s, std::ptrdiff_t n) {
      Scalar fp(0), gp(0);
      for (std::ptrdiff_t j = 0; j <= n; ++j) {
        const Scalar fj = j < n ? f[off + j * s] : Scalar(0);
        const Scalar gj = j < n ? g[off + j * s] : Scalar(0);
        axis_sum += (fj - fp) * (gj - gp);
        fp = fj;
        gp = gj;
      }
    });
    total += axis_sum / Scalar(grid.spacing(d) * grid.spacing(d));
  }
  return Scalar(grid.cell_volume()) * total;
}

template <typename Derived>
typename Derived::Scalar h1_seminorm(const Grid& grid, const Eigen::MatrixBase<Derived>& f) {
  using std::sqrt;
  return sqrt(inner_grad(grid, f, f));
}

template <typename Derived>
typename Derived::Scalar max_abs(const Eigen::MatrixBase<Derived>& f) {
  return f.size() == 0 ? typename Derived::Scalar(0) : f.cwiseAbs().maxCoeff();
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& f) {
  return f.allFinite();
}

}  // namespace viscowave
