#pragma once

#include <map>
#include <optional>
#include <vector>

#include "voltvar/control.hpp"
#include "voltvar/linalg.hpp"

namespace voltvar {

/// Bus record. Powers are in p.u. of the feeder's S_base.
struct BusRecord {
  int id = 0;
  double v_nom = 1.0;
  double p_c = 0.0;
  double q_c = 0.0;
  double p_g = 0.0;

  bool operator==(const BusRecord&) const = default;
};

/// Undirected line record; impedances in p.u. of Z_base.
struct LineRecord {
  int from = 0;
  int to = 0;
  double r = 0.0;
  double x = 0.0;

  bool operator==(const LineRecord&) const = default;
};

struct Bases {
  double v_kv = 1.0;
  double s_kva = 1000.0;
  double z_ohm = 1.0;

  bool operator==(const Bases&) const = default;
};

/// A validated radial feeder oriented away from the slack bus.
///
/// Non-slack buses are addressed by a dense index 0..n-1 (ascending bus id),
/// which is also the row/column index in every n x n matrix of the library.
/// The line feeding bus i (from its parent) shares index i.
class Feeder {
 public:
  static constexpr int kSlack = -1;

  int size() const noexcept { return static_cast<int>(buses_.size()); }
  int slack_id() const noexcept { return slack_.id; }
  double v0() const noexcept { return v0_; }
  const Bases& bases() const noexcept { return bases_; }

  const BusRecord& slack() const noexcept { return slack_; }
  const BusRecord& bus(int index) const { return buses_.at(static_cast<std::size_t>(index)); }
  const std::vector<BusRecord>& buses() const noexcept { return buses_; }

  /// Line from parent(i) to bus i, oriented away from the slack.
  const LineRecord& line(int index) const { return lines_.at(static_cast<std::size_t>(index)); }
  const std::vector<LineRecord>& lines() const noexcept { return lines_; }

  /// Parent index, or kSlack for buses attached to the slack bus.
  int parent(int index) const { return parent_.at(static_cast<std::size_t>(index)); }
  const std::vector<int>& children(int index) const { return children_.at(static_cast<std::size_t>(index)); }
  const std::vector<int>& root_children() const noexcept { return root_children_; }
  /// Descendant set including the bus itself.
  const std::vector<int>& descendants(int index) const {
    return descendants_.at(static_cast<std::size_t>(index));
  }
  /// Depth-first pre-order; parents always precede children.
  const std::vector<int>& order() const noexcept { return order_; }

  /// Dense index of a bus id; throws Error(kUnknownBus) for unknown or slack ids.
  int index_of(int bus_id) const;
  std::optional<int> find(int bus_id) const;

  const std::map<int, Inverter>& inverters() const noexcept { return inverters_; }
  const Inverter* inverter_at(int index) const;

  Vector v_nom() const;
  Vector p_c() const;
  Vector q_c() const;
  Vector p_g() const;

  /// Returns a copy with loads (p_c, q_c) multiplied by `scale`.
  Feeder with_load_scale(double scale) const;

  bool operator==(const Feeder& other) const;

 private:
  friend Feeder build_feeder(const std::vector<BusRecord>&, const std::vector<LineRecord>&,
                             const std::map<int, Inverter>&, const Bases&, int, double);
  Feeder() = default;

  BusRecord slack_;
  double v0_ = 1.0;
  Bases bases_;
  std::vector<BusRecord> buses_;
  std::vector<LineRecord> lines_;
  std::vector<int> parent_;
  std::vector<std::vector<int>> children_;
  std::vector<int> root_children_;
  std::vector<std::vector<int>> descendants_;
  std::vector<int> order_;
  std::map<int, int> index_;
  std::map<int, Inverter> inverters_;
};

/// Validates and orients a radial feeder.
///
/// Errors: kDuplicateId, kUnknownBus, kNonPositiveImpedance, kCycleDetected,
/// kDisconnected, kValidation (slack bus carrying load or an inverter, bad
/// inverter ratings).
Feeder build_feeder(const std::vector<BusRecord>& buses, const std::vector<LineRecord>& lines,
                    const std::map<int, Inverter>& inverters, const Bases& bases, int slack_id = 0,
                    double v0 = 1.0);

struct SensitivityMatrices {
  Matrix r;
  Matrix x;
  /// v0 + R (p_g - p_c) - X q_c
  Vector vtilde;
};

/// R_ij and X_ij are the resistance and reactance summed over the lines
/// shared by the paths from the slack bus to buses i and j.
SensitivityMatrices sensitivity_matrices(const Feeder& feeder);

/// X^-1 as the weighted Laplacian of the tree with weights 1/x, grounded at
/// the slack bus (each child of the slack gets an extra 1/x on its diagonal).
/// Subtrees hanging off the slack yield independent diagonal blocks.
Matrix explicit_inverse_x(const Feeder& feeder);

struct VoltageDeviationCost {
  /// (v_1 - v_nom,1)^2 / x for the bus attached to the slack.
  double head = 0.0;
  /// Sum over internal lines of (dv_i - dv_j)^2 / x_ij, dv = v - v_nom.
  double tree = 0.0;

  /// Equals 1/2 (v - v_nom)^T X^-1 (v - v_nom).
  double half_sum() const noexcept { return 0.5 * (head + tree); }
};

/// Leader-follower split of the voltage-deviation cost at v = X q + vtilde.
/// Requires the slack bus to have exactly one child (kRootDegreeNotOne).
VoltageDeviationCost voltage_deviation_form(const Feeder& feeder, const SensitivityMatrices& mats,
                                            const Vector& q);

}  // namespace voltvar
