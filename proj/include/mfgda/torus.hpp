#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>

namespace mfgda {

inline constexpr double kTwoPi = 6.2831853071795864769252867665590;

/// Uniform periodic grid on a flat torus of dimension 1 or 2.
///
/// Nodes sit at coordinates i*h per axis, i in {0..n-1}; indexing wraps
/// modulo n. The spacing h is always derived from the circumference and n,
/// never stored, so n*h == L holds exactly in the stored representation.
struct TorusGrid {
  int dim = 1;
  int n = 64;                                       // nodes per axis
  std::array<double, 2> length{kTwoPi, kTwoPi};     // circumference per axis

  TorusGrid() = default;

  TorusGrid(int dim_, int n_, double circumference = kTwoPi)
      : TorusGrid(dim_, n_, {circumference, circumference}) {}

  TorusGrid(int dim_, int n_, std::array<double, 2> circumference)
      : dim(dim_), n(n_), length(circumference) {
    if (dim < 1 || dim > 2) throw std::invalid_argument("TorusGrid: dim must be 1 or 2");
    if (n < 8) throw std::invalid_argument("TorusGrid: need at least 8 nodes per axis");
    for (int a = 0; a < dim; ++a)
      if (!(length[a] > 0.0)) throw std::invalid_argument("TorusGrid: circumference must be positive");
    if (dim == 1) length[1] = length[0];
  }

  double spacing(int axis) const { return length[axis] / n; }

  double cell_volume() const {
    double v = 1.0;
    for (int a = 0; a < dim; ++a) v *= spacing(a);
    return v;
  }

  std::size_t cells() const {
    return dim == 1 ? static_cast<std::size_t>(n)
                    : static_cast<std::size_t>(n) * static_cast<std::size_t>(n);
  }

  int wrap(int i) const {
    i %= n;
    return i < 0 ? i + n : i;
  }

  /// Flat cell index with periodic wrap; row-major (axis 0 outer) in 2D.
  std::size_t index(int i0, int i1 = 0) const {
    return dim == 1 ? static_cast<std::size_t>(wrap(i0))
                    : static_cast<std::size_t>(wrap(i0)) * n + wrap(i1);
  }

  double node(int axis, int i) const { return spacing(axis) * wrap(i); }

  /// Node coordinates of a flat cell index.
  std::array<double, 2> node_coords(std::size_t idx) const {
    if (dim == 1) return {spacing(0) * static_cast<double>(idx), 0.0};
    return {spacing(0) * static_cast<double>(idx / n), spacing(1) * static_cast<double>(idx % n)};
  }

  /// Reduce a coordinate into [0, L) on the given axis.
  double wrap_coord(int axis, double x) const {
    const double L = length[axis];
    double r = std::fmod(x, L);
    return r < 0.0 ? r + L : r;
  }

  /// Shortest signed displacement a - b on the circle, in [-L/2, L/2).
  double wrap_diff(int axis, double a, double b) const {
    const double L = length[axis];
    double d = std::fmod(a - b, L);
    if (d < -0.5 * L) d += L;
    if (d >= 0.5 * L) d -= L;
    return d;
  }

  /// Geodesic diameter of the flat torus: L/2 per axis, Euclidean across axes.
  double diameter() const {
    double s = 0.0;
    for (int a = 0; a < dim; ++a) {
      const double half = 0.5 * length[a];
      s += half * half;
    }
    return std::sqrt(s);
  }

  bool operator==(const TorusGrid& o) const {
    if (dim != o.dim || n != o.n) return false;
    for (int a = 0; a < dim; ++a)
      if (length[a] != o.length[a]) return false;
    return true;
  }
  bool operator!=(const TorusGrid& o) const { return !(*this == o); }
};

}  // namespace mfgda
