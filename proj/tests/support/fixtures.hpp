#pragma once

#include <map>
#include <random>
#include <vector>

#include "voltvar/dynamics.hpp"
#include "voltvar/network.hpp"

namespace voltvar::testing {

/// Slack 0 feeding bus 1 through (r, x); bus 1 carries the given load.
inline Feeder two_bus(double r = 0.1, double x = 0.5, double p_c = 0.0, double q_c = 0.0) {
  return build_feeder({{0}, {1, 1.0, p_c, q_c, 0.0}}, {{0, 1, r, x}}, {}, Bases{});
}

/// Path 0-1-2 with reactances x01 and x12.
inline Feeder path3(double x01, double x12) {
  return build_feeder({{0}, {1}, {2}}, {{0, 1, 0.1, x01}, {1, 2, 0.2, x12}}, {}, Bases{});
}

struct RandomTreeOptions {
  int n = 10;
  bool root_degree_one = false;
  double lo = 0.01;
  double hi = 1.0;
  /// Loads drawn from [0, load_hi] when > 0.
  double load_hi = 0.0;
};

/// Random recursive tree on buses 0..n (slack 0) with uniform r, x.
inline Feeder random_tree(std::mt19937_64& rng, const RandomTreeOptions& o) {
  std::uniform_real_distribution<double> imp(o.lo, o.hi);
  std::uniform_real_distribution<double> load(0.0, o.load_hi);
  std::vector<BusRecord> buses{{0}};
  std::vector<LineRecord> lines;
  for (int k = 1; k <= o.n; ++k) {
    BusRecord b{k};
    if (o.load_hi > 0.0) {
      b.p_c = load(rng);
      b.q_c = load(rng);
    }
    buses.push_back(b);
    int parent = 0;
    if (k > 1) {
      const int first = o.root_degree_one ? 1 : 0;
      parent = std::uniform_int_distribution<int>(first, k - 1)(rng);
    }
    // Random record direction; orientation is derived by build_feeder.
    if (rng() % 2 == 0) {
      lines.push_back({parent, k, imp(rng), imp(rng)});
    } else {
      lines.push_back({k, parent, imp(rng), imp(rng)});
    }
  }
  return build_feeder(buses, lines, {}, Bases{});
}

/// Control problem where every bus is controllable with box [-q_box, q_box].
inline ControlProblem full_problem(const Matrix& x, const Vector& vtilde, const ControlCurve& curve,
                                   double q_box) {
  ControlProblem p;
  p.x = x;
  p.vtilde = vtilde;
  p.v_nom = Vector::Ones(vtilde.size());
  p.curves.assign(static_cast<std::size_t>(vtilde.size()), curve);
  p.limits.assign(static_cast<std::size_t>(vtilde.size()), ReactiveLimits{-q_box, q_box});
  return p;
}

/// Scalar 2-bus control problem: v = x q + vtilde.
inline ControlProblem scalar_problem(double x, double vtilde, const ControlCurve& curve, double q_box = 10.0) {
  return full_problem(Matrix::Constant(1, 1, x), Vector::Constant(1, vtilde), curve, q_box);
}

/// Brute-force path overlap: walk both paths to the root and sum shared lines.
inline Matrix path_overlap(const Feeder& f, bool reactance) {
  const int n = f.size();
  Matrix m = Matrix::Zero(n, n);
  auto path = [&](int i) {
    std::vector<int> p;
    for (int a = i; a != Feeder::kSlack; a = f.parent(a)) p.push_back(a);
    return p;
  };
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      for (int a : path(i)) {
        for (int b : path(j)) {
          if (a == b) m(i, j) += reactance ? f.line(a).x : f.line(a).r;
        }
      }
    }
  }
  return m;
}

}  // namespace voltvar::testing
