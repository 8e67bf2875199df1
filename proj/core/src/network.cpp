#include "voltvar/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>

#include "voltvar/error.hpp"

namespace voltvar {
namespace {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::size_t find(std::size_t a) {
    while (parent_[a] != a) {
      parent_[a] = parent_[parent_[a]];
      a = parent_[a];
    }
    return a;
  }

  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent_[b] = a;
    return true;
  }

 private:
  std::vector<std::size_t> parent_;
};

std::string line_label(const LineRecord& l) {
  return "(" + std::to_string(l.from) + "," + std::to_string(l.to) + ")";
}

}  // namespace

int Feeder::index_of(int bus_id) const {
  auto it = index_.find(bus_id);
  if (it == index_.end()) {
    throw Error(ErrorCode::kUnknownBus, "bus " + std::to_string(bus_id) + " is not a non-slack bus");
  }
  return it->second;
}

std::optional<int> Feeder::find(int bus_id) const {
  auto it = index_.find(bus_id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const Inverter* Feeder::inverter_at(int index) const {
  auto it = inverters_.find(bus(index).id);
  return it == inverters_.end() ? nullptr : &it->second;
}

Vector Feeder::v_nom() const {
  Vector out(size());
  for (int i = 0; i < size(); ++i) out(i) = buses_[static_cast<std::size_t>(i)].v_nom;
  return out;
}

Vector Feeder::p_c() const {
  Vector out(size());
  for (int i = 0; i < size(); ++i) out(i) = buses_[static_cast<std::size_t>(i)].p_c;
  return out;
}

Vector Feeder::q_c() const {
  Vector out(size());
  for (int i = 0; i < size(); ++i) out(i) = buses_[static_cast<std::size_t>(i)].q_c;
  return out;
}

Vector Feeder::p_g() const {
  Vector out(size());
  for (int i = 0; i < size(); ++i) out(i) = buses_[static_cast<std::size_t>(i)].p_g;
  return out;
}

Feeder Feeder::with_load_scale(double scale) const {
  Feeder copy = *this;
  for (BusRecord& b : copy.buses_) {
    b.p_c *= scale;
    b.q_c *= scale;
  }
  return copy;
}

bool Feeder::operator==(const Feeder& other) const {
  return slack_ == other.slack_ && v0_ == other.v0_ && bases_ == other.bases_ &&
         buses_ == other.buses_ && lines_ == other.lines_ && inverters_ == other.inverters_;
}

Feeder build_feeder(const std::vector<BusRecord>& buses, const std::vector<LineRecord>& lines,
                    const std::map<int, Inverter>& inverters, const Bases& bases, int slack_id,
                    double v0) {
  std::map<int, std::size_t> position;
  for (std::size_t k = 0; k < buses.size(); ++k) {
    if (!position.emplace(buses[k].id, k).second) {
      throw Error(ErrorCode::kDuplicateId, "bus id " + std::to_string(buses[k].id) + " appears twice");
    }
  }
  auto slack_it = position.find(slack_id);
  if (slack_it == position.end()) {
    throw Error(ErrorCode::kUnknownBus, "slack bus " + std::to_string(slack_id) + " has no bus record");
  }
  const BusRecord& slack = buses[slack_it->second];
  if (slack.p_c != 0.0 || slack.q_c != 0.0 || slack.p_g != 0.0) {
    throw Error(ErrorCode::kValidation, "slack bus must not carry load or generation");
  }
  if (!(v0 > 0.0)) throw Error(ErrorCode::kValidation, "slack voltage must be positive");

  Feeder f;
  f.slack_ = slack;
  f.v0_ = v0;
  f.bases_ = bases;

  for (const auto& [id, pos] : position) {
    if (id == slack_id) continue;
    f.index_.emplace(id, static_cast<int>(f.buses_.size()));
    f.buses_.push_back(buses[pos]);
  }
  const std::size_t n = f.buses_.size();

  // Union-find over dense ids where slot n is the slack bus.
  auto slot = [&](int id) -> std::size_t {
    if (id == slack_id) return n;
    auto it = f.index_.find(id);
    if (it == f.index_.end()) throw Error(ErrorCode::kUnknownBus, "line references unknown bus " + std::to_string(id));
    return static_cast<std::size_t>(it->second);
  };
  DisjointSets sets(n + 1);
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adjacency(n + 1);
  for (std::size_t k = 0; k < lines.size(); ++k) {
    const LineRecord& l = lines[k];
    const std::size_t a = slot(l.from);
    const std::size_t b = slot(l.to);
    if (!(l.r > 0.0) || !(l.x > 0.0) || !std::isfinite(l.r) || !std::isfinite(l.x)) {
      throw Error(ErrorCode::kNonPositiveImpedance, "line " + line_label(l) + " needs r > 0 and x > 0");
    }
    if (a == b || !sets.unite(a, b)) {
      throw Error(ErrorCode::kCycleDetected, "line " + line_label(l) + " closes a loop");
    }
    adjacency[a].emplace_back(b, k);
    adjacency[b].emplace_back(a, k);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (sets.find(i) != sets.find(n)) {
      throw Error(ErrorCode::kDisconnected,
                  "bus " + std::to_string(f.buses_[i].id) + " is not connected to the slack bus");
    }
  }

  for (const auto& [id, inv] : inverters) {
    if (id == slack_id) throw Error(ErrorCode::kValidation, "slack bus cannot host an inverter");
    if (!f.index_.contains(id)) {
      throw Error(ErrorCode::kUnknownBus, "inverter references unknown bus " + std::to_string(id));
    }
    validate(inv);
  }
  f.inverters_ = inverters;

  f.parent_.assign(n, Feeder::kSlack);
  f.children_.assign(n, {});
  f.lines_.resize(n);
  for (auto& nbrs : adjacency) std::sort(nbrs.begin(), nbrs.end());

  // Iterative DFS from the slack; neighbours are visited in ascending index.
  std::vector<bool> seen(n + 1, false);
  std::vector<std::size_t> stack{n};
  seen[n] = true;
  while (!stack.empty()) {
    const std::size_t u = stack.back();
    stack.pop_back();
    if (u != n) f.order_.push_back(static_cast<int>(u));
    for (auto it = adjacency[u].rbegin(); it != adjacency[u].rend(); ++it) {
      const auto [v, k] = *it;
      if (seen[v]) continue;
      seen[v] = true;
      const int child = static_cast<int>(v);
      const LineRecord& l = lines[k];
      f.lines_[v] = {u == n ? slack_id : f.buses_[u].id, f.buses_[v].id, l.r, l.x};
      if (u == n) {
        f.root_children_.push_back(child);
      } else {
        f.parent_[v] = static_cast<int>(u);
      }
      stack.push_back(v);
    }
  }
  std::sort(f.root_children_.begin(), f.root_children_.end());
  for (std::size_t v = 0; v < n; ++v) {
    if (f.parent_[v] != Feeder::kSlack) f.children_[static_cast<std::size_t>(f.parent_[v])].push_back(static_cast<int>(v));
  }

  f.descendants_.assign(n, {});
  for (auto it = f.order_.rbegin(); it != f.order_.rend(); ++it) {
    const auto i = static_cast<std::size_t>(*it);
    auto& d = f.descendants_[i];
    d.push_back(*it);
    for (int c : f.children_[i]) {
      const auto& dc = f.descendants_[static_cast<std::size_t>(c)];
      d.insert(d.end(), dc.begin(), dc.end());
    }
    std::sort(d.begin(), d.end());
  }
  return f;
}

SensitivityMatrices sensitivity_matrices(const Feeder& feeder) {
  const int n = feeder.size();
  std::vector<double> cum_r(static_cast<std::size_t>(n));
  std::vector<double> cum_x(static_cast<std::size_t>(n));
  for (int i : feeder.order()) {
    const int p = feeder.parent(i);
    const LineRecord& l = feeder.line(i);
    cum_r[static_cast<std::size_t>(i)] = (p == Feeder::kSlack ? 0.0 : cum_r[static_cast<std::size_t>(p)]) + l.r;
    cum_x[static_cast<std::size_t>(i)] = (p == Feeder::kSlack ? 0.0 : cum_x[static_cast<std::size_t>(p)]) + l.x;
  }

  SensitivityMatrices m;
  m.r = Matrix::Zero(n, n);
  m.x = Matrix::Zero(n, n);
  // The shared path of i and j ends at their lowest common ancestor, so the
  // overlap sums are the cumulative sums at that ancestor.
  std::vector<int> stamp(static_cast<std::size_t>(n), -1);
  for (int i = 0; i < n; ++i) {
    for (int a = i; a != Feeder::kSlack; a = feeder.parent(a)) stamp[static_cast<std::size_t>(a)] = i;
    for (int j = i; j < n; ++j) {
      int a = j;
      while (a != Feeder::kSlack && stamp[static_cast<std::size_t>(a)] != i) a = feeder.parent(a);
      if (a == Feeder::kSlack) continue;
      m.r(i, j) = m.r(j, i) = cum_r[static_cast<std::size_t>(a)];
      m.x(i, j) = m.x(j, i) = cum_x[static_cast<std::size_t>(a)];
    }
  }

  m.vtilde = Vector::Constant(n, feeder.v0()) + m.r * (feeder.p_g() - feeder.p_c()) - m.x * feeder.q_c();
  return m;
}

Matrix explicit_inverse_x(const Feeder& feeder) {
  const int n = feeder.size();
  Matrix inv = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const double w = 1.0 / feeder.line(i).x;
    const int p = feeder.parent(i);
    inv(i, i) += w;
    if (p != Feeder::kSlack) {
      inv(p, p) += w;
      inv(i, p) -= w;
      inv(p, i) -= w;
    }
  }
  return inv;
}

VoltageDeviationCost voltage_deviation_form(const Feeder& feeder, const SensitivityMatrices& mats,
                                            const Vector& q) {
  if (feeder.root_children().size() != 1) {
    throw Error(ErrorCode::kRootDegreeNotOne,
                "slack bus has degree " + std::to_string(feeder.root_children().size()));
  }
  if (q.size() != feeder.size()) throw Error(ErrorCode::kDimensionMismatch, "q has wrong length");
  const Vector dev = mats.x * q + mats.vtilde - feeder.v_nom();
  VoltageDeviationCost out;
  const int head = feeder.root_children().front();
  out.head = dev(head) * dev(head) / feeder.line(head).x;
  for (int i = 0; i < feeder.size(); ++i) {
    const int p = feeder.parent(i);
    if (p == Feeder::kSlack) continue;
    const double d = dev(i) - dev(p);
    out.tree += d * d / feeder.line(i).x;
  }
  return out;
}

}  // namespace voltvar
