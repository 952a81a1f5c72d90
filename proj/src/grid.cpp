#include "viscowave/grid.hpp"

#include <algorithm>
#include <iomanip>
#include <ostream>
#include <string>

namespace viscowave {

Grid::Grid(int dim, std::array<double, 3> extent, std::array<int, 3> nodes) : dim_(dim) {
  if (dim < 1 || dim > 3) throw std::invalid_argument("grid dimension must be 1, 2 or 3");
  for (int d = 0; d < 3; ++d) {
    if (d < dim) {
      if (nodes[d] < 3) throw std::invalid_argument("grid needs at least 3 interior nodes per axis");
      if (!(extent[d] > 0.0) || !std::isfinite(extent[d]))
        throw std::invalid_argument("grid extent must be positive");
      extent_[d] = extent[d];
      n_[d] = nodes[d];
      h_[d] = extent[d] / (nodes[d] + 1);
    } else {
      extent_[d] = 1.0;
      n_[d] = 1;
      h_[d] = 1.0;
    }
  }
  stride_[dim - 1] = 1;
  for (int d = dim - 2; d >= 0; --d) stride_[d] = stride_[d + 1] * n_[d + 1];
  size_ = 1;
  cell_volume_ = 1.0;
  for (int d = 0; d < dim; ++d) {
    size_ *= n_[d];
    cell_volume_ *= h_[d];
  }
}

double Grid::min_spacing() const {
  double h = h_[0];
  for (int d = 1; d < dim_; ++d) h = std::min(h, h_[d]);
  return h;
}

double Grid::measure() const {
  double v = 1.0;
  for (int d = 0; d < dim_; ++d) v *= extent_[d];
  return v;
}

std::array<int, 3> Grid::multi_index(Eigen::Index flat) const {
  std::array<int, 3> idx{0, 0, 0};
  for (int d = 0; d < dim_; ++d) {
    idx[d] = static_cast<int>(flat / stride_[d]);
    flat %= stride_[d];
  }
  return idx;
}

std::array<double, 3> Grid::coordinates(Eigen::Index flat) const {
  const auto idx = multi_index(flat);
  std::array<double, 3> x{0.0, 0.0, 0.0};
  for (int d = 0; d < dim_; ++d) x[d] = (idx[d] + 1) * h_[d];
  return x;
}

Field Grid::sample(const std::function<double(const std::array<double, 3>&)>& fn) const {
  Field f(size_);
  for (Eigen::Index i = 0; i < size_; ++i) f[i] = fn(coordinates(i));
  return f;
}

void write_field_csv(std::ostream& os, const Grid& grid, const Field& f) {
  detail::require_on_grid(grid, f);
  static const char* axis_names[] = {"x", "y", "z"};
  os << "node";
  for (int d = 0; d < grid.dim(); ++d) os << ',' << axis_names[d];
  os << ",value\n";
  os << std::setprecision(17);
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    const auto x = grid.coordinates(i);
    os << i;
    for (int d = 0; d < grid.dim(); ++d) os << ',' << x[d];
    os << ',' << f[i] << '\n';
  }
}

}  // namespace viscowave
