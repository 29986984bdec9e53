#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "horosim/linalg.hpp"

namespace horosim {

// Periodic box in Z^d.  Sites are flattened row-major: for coordinates
// (c_0, ..., c_{d-1}) with side lengths (L_0, ..., L_{d-1}),
//   flat = ((c_0 * L_1 + c_1) * L_2 + c_2) * ...
// Site 0 is the origin.
struct Lattice {
  int dimension = 0;
  std::vector<int> sides;
  int num_sites = 0;
  // Each undirected nearest-neighbor pair appears exactly once, a < b.
  struct Edge {
    int a, b;
  };
  std::vector<Edge> edges;
  std::vector<std::vector<int>> neighbors;
  // True when some direction has side length 2: there the two "distinct"
  // bonds across the ring coincide, so only a single edge is kept.
  bool has_side_two = false;

  std::vector<int> coords(int flat) const {
    std::vector<int> c(dimension);
    for (int k = dimension - 1; k >= 0; --k) {
      c[k] = flat % sides[k];
      flat /= sides[k];
    }
    return c;
  }
  int flat_index(const std::vector<int>& c) const {
    int f = 0;
    for (int k = 0; k < dimension; ++k) {
      int ck = c[k] % sides[k];
      if (ck < 0) ck += sides[k];
      f = f * sides[k] + ck;
    }
    return f;
  }
  // Minimal-image Euclidean distance from the origin.
  double distance_from_origin(int site) const {
    const auto c = coords(site);
    double d2 = 0.0;
    for (int k = 0; k < dimension; ++k) {
      const double m = std::min(c[k], sides[k] - c[k]);
      d2 += m * m;
    }
    return std::sqrt(d2);
  }
};

inline Lattice build_lattice(int dimension, const std::vector<int>& sides) {
  if (dimension < 1) throw std::invalid_argument("build_lattice: dimension must be >= 1");
  if (static_cast<int>(sides.size()) != dimension)
    throw std::invalid_argument("build_lattice: got " + std::to_string(sides.size()) +
                                " side lengths for dimension " + std::to_string(dimension));
  Lattice lat;
  lat.dimension = dimension;
  lat.sides = sides;
  long n = 1;
  for (int k = 0; k < dimension; ++k) {
    if (sides[k] < 2)
      throw std::invalid_argument("build_lattice: side length " + std::to_string(sides[k]) +
                                  " in direction " + std::to_string(k) + " (need >= 2)");
    if (sides[k] == 2) lat.has_side_two = true;
    n *= sides[k];
    if (n > (1L << 26)) throw std::invalid_argument("build_lattice: lattice too large");
  }
  lat.num_sites = static_cast<int>(n);
  lat.neighbors.resize(lat.num_sites);

  for (int s = 0; s < lat.num_sites; ++s) {
    auto c = lat.coords(s);
    for (int k = 0; k < dimension; ++k) {
      auto cp = c;
      cp[k] = (c[k] + 1) % sides[k];
      const int t = lat.flat_index(cp);
      if (t == s) continue;  // side length would be 1; excluded above
      const int a = std::min(s, t), b = std::max(s, t);
      // With side 2 the +1 and -1 hops give the same pair; dedupe.
      bool dup = false;
      for (int nb : lat.neighbors[a])
        if (nb == b) {
          dup = true;
          break;
        }
      if (!dup) {
        lat.edges.push_back({a, b});
        lat.neighbors[a].push_back(b);
        lat.neighbors[b].push_back(a);
      }
    }
  }
  std::sort(lat.edges.begin(), lat.edges.end(), [](const Lattice::Edge& x, const Lattice::Edge& y) {
    return x.a != y.a ? x.a < y.a : x.b < y.b;
  });
  return lat;
}

// Graph Laplacian -Delta as a positive semidefinite operator: quadratic form
// sum over edges of (f_a - f_b)^2.
inline SymmetricOperator laplacian(const Lattice& lat, Storage storage = Storage::Auto) {
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(4 * lat.edges.size());
  for (const auto& e : lat.edges) {
    trips.emplace_back(e.a, e.a, 1.0);
    trips.emplace_back(e.b, e.b, 1.0);
    trips.emplace_back(e.a, e.b, -1.0);
    trips.emplace_back(e.b, e.a, -1.0);
  }
  return SymmetricOperator::from_triplets(lat.num_sites, trips, storage);
}

// sum over edges of (f_a - f_b)^2, computed straight from the edge list.
inline double gradient_form(const Lattice& lat, const Vector& f) {
  if (f.size() != lat.num_sites) throw std::invalid_argument("gradient_form: size mismatch");
  double s = 0.0;
  for (const auto& e : lat.edges) {
    const double d = f(e.a) - f(e.b);
    s += d * d;
  }
  return s;
}

}  // namespace horosim
