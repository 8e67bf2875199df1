#include "voltvar/feeder_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "voltvar/error.hpp"

namespace voltvar {
namespace {

using Json = nlohmann::json;

[[noreturn]] void field_error(const std::string& field, const std::string& what) {
  throw Error(ErrorCode::kParse, field + ": " + what);
}

const Json& require(const Json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) field_error(where + "." + key, "missing");
  return *it;
}

double number(const Json& v, const std::string& field) {
  if (!v.is_number()) field_error(field, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) field_error(field, "must be finite");
  return d;
}

double number_or(const Json& obj, const char* key, double fallback, const std::string& where) {
  auto it = obj.find(key);
  return it == obj.end() ? fallback : number(*it, where + "." + key);
}

int integer(const Json& v, const std::string& field) {
  if (!v.is_number_integer()) field_error(field, "expected an integer");
  return v.get<int>();
}

const Json& array_field(const Json& doc, const char* key) {
  const Json& a = require(doc, key, "feeder");
  if (!a.is_array()) field_error(key, "expected an array");
  return a;
}

ControlCurve parse_curve(const Json& c, const std::string& where) {
  if (!c.is_object()) field_error(where, "expected an object");
  const Json& type = require(c, "type", where);
  if (!type.is_string()) field_error(where + ".type", "expected a string");
  const auto kind = type.get<std::string>();
  if (kind == "droop") {
    return ControlCurve::droop(number(require(c, "alpha", where), where + ".alpha"),
                               number(require(c, "deadband", where), where + ".deadband"));
  }
  if (kind == "table") {
    const Json& pts = require(c, "points", where);
    if (!pts.is_array()) field_error(where + ".points", "expected an array");
    std::vector<CurvePoint> points;
    for (std::size_t k = 0; k < pts.size(); ++k) {
      const std::string f = where + ".points[" + std::to_string(k) + "]";
      if (!pts[k].is_array() || pts[k].size() != 2) field_error(f, "expected [v_err, q]");
      points.push_back({number(pts[k][0], f + "[0]"), number(pts[k][1], f + "[1]")});
    }
    return ControlCurve::table(std::move(points));
  }
  field_error(where + ".type", "unknown curve type '" + kind + "'");
}

Json curve_to_json(const ControlCurve& c) {
  switch (c.kind()) {
    case CurveKind::kDroop:
      return {{"type", "droop"}, {"alpha", c.alpha()}, {"deadband", c.deadband()}};
    case CurveKind::kTable: {
      Json pts = Json::array();
      for (const CurvePoint& p : c.points()) pts.push_back({p.v_err, p.q});
      return {{"type", "table"}, {"points", pts}};
    }
    case CurveKind::kCustom:
      break;
  }
  throw Error(ErrorCode::kInvalidArgument, "custom curves cannot be serialized");
}

Feeder ingest(const Json& doc, const IngestOptions& opt) {
  opt.validate();
  if (!doc.is_object()) field_error("feeder", "expected a JSON object");

  std::string unit = "pu";
  if (auto it = doc.find("unit"); it != doc.end()) {
    if (!it->is_string()) field_error("unit", "expected a string");
    unit = it->get<std::string>();
    if (unit != "pu" && unit != "ohm") field_error("unit", "must be \"ohm\" or \"pu\"");
  }

  Bases bases;
  if (auto it = doc.find("bases"); it != doc.end()) {
    if (!it->is_object()) field_error("bases", "expected an object");
    bases.v_kv = number_or(*it, "v_kv", bases.v_kv, "bases");
    bases.s_kva = number_or(*it, "s_kva", bases.s_kva, "bases");
    bases.z_ohm = number_or(*it, "z_ohm", bases.z_ohm, "bases");
    if (!(bases.v_kv > 0 && bases.s_kva > 0 && bases.z_ohm > 0)) field_error("bases", "must be positive");
  } else if (unit == "ohm") {
    field_error("bases", "required when unit is \"ohm\"");
  }
  const double s_base_mva = bases.s_kva / 1000.0;
  const double z_scale = unit == "ohm" ? 1.0 / bases.z_ohm : 1.0;

  const int slack = doc.contains("slack") ? integer(doc["slack"], "slack") : 0;
  const double v0 = number_or(doc, "v0", 1.0, "feeder");
  const double q_share = std::sqrt(1.0 - opt.power_factor * opt.power_factor);

  std::vector<BusRecord> buses;
  const Json& jb = array_field(doc, "buses");
  for (std::size_t k = 0; k < jb.size(); ++k) {
    const std::string where = "buses[" + std::to_string(k) + "]";
    const Json& b = jb[k];
    if (!b.is_object()) field_error(where, "expected an object");
    BusRecord r;
    r.id = integer(require(b, "id", where), where + ".id");
    r.v_nom = number_or(b, "v_nom", 1.0, where);
    r.p_c = number_or(b, "p_c", 0.0, where);
    r.q_c = number_or(b, "q_c", 0.0, where);
    r.p_g = number_or(b, "p_g", 0.0, where);
    if (auto it = b.find("load_mva"); it != b.end()) {
      const double mva = number(*it, where + ".load_mva") / s_base_mva;
      r.p_c += mva * opt.power_factor;
      r.q_c += mva * q_share;
    }
    r.p_c *= opt.load_scale;
    r.q_c *= opt.load_scale;
    buses.push_back(r);
  }

  std::vector<LineRecord> lines;
  const Json& jl = array_field(doc, "lines");
  for (std::size_t k = 0; k < jl.size(); ++k) {
    const std::string where = "lines[" + std::to_string(k) + "]";
    const Json& l = jl[k];
    if (!l.is_object()) field_error(where, "expected an object");
    lines.push_back({integer(require(l, "from", where), where + ".from"),
                     integer(require(l, "to", where), where + ".to"),
                     number(require(l, "r", where), where + ".r") * z_scale,
                     number(require(l, "x", where), where + ".x") * z_scale});
  }

  std::map<int, Inverter> inverters;
  if (auto it = doc.find("inverters"); it != doc.end()) {
    if (!it->is_array()) field_error("inverters", "expected an array");
    for (std::size_t k = 0; k < it->size(); ++k) {
      const std::string where = "inverters[" + std::to_string(k) + "]";
      const Json& j = (*it)[k];
      if (!j.is_object()) field_error(where, "expected an object");
      const int bus = integer(require(j, "bus", where), where + ".bus");
      Inverter inv;
      if (auto cap = j.find("capacity_mw"); cap != j.end()) {
        const double c = number(*cap, where + ".capacity_mw") / s_base_mva;
        inv.s = opt.inverter_oversize * c;
        inv.p = opt.pv_output * c;
        bool placed = false;
        for (BusRecord& b : buses) {
          if (b.id == bus) {
            b.p_g += inv.p;
            placed = true;
          }
        }
        if (!placed) field_error(where + ".bus", "unknown bus " + std::to_string(bus));
      } else {
        inv.s = number(require(j, "s", where), where + ".s");
        inv.p = number_or(j, "p", 0.0, where);
      }
      if (j.contains("rho")) {
        inv.rho = number(j["rho"], where + ".rho");
      } else if (j.contains("tan_rho")) {
        inv.rho = std::atan(number(j["tan_rho"], where + ".tan_rho"));
      }
      if (j.contains("curve")) inv.curve = parse_curve(j["curve"], where + ".curve");
      if (!inverters.emplace(bus, inv).second) {
        field_error(where + ".bus", "bus " + std::to_string(bus) + " already has an inverter");
      }
    }
  }
  return build_feeder(buses, lines, inverters, bases, slack, v0);
}

}  // namespace

void IngestOptions::validate() const {
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!positive(load_scale) && load_scale != 0.0) throw Error(ErrorCode::kInvalidArgument, "load scale must be >= 0");
  if (!(power_factor > 0.0 && power_factor <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "power factor must lie in (0, 1]");
  }
  if (!(pv_output >= 0.0 && std::isfinite(pv_output))) {
    throw Error(ErrorCode::kInvalidArgument, "PV output fraction must be >= 0");
  }
  if (!positive(inverter_oversize)) throw Error(ErrorCode::kInvalidArgument, "inverter oversize must be > 0");
}

Feeder parse_feeder(std::string_view json_text, const IngestOptions& options) {
  Json doc;
  try {
    doc = Json::parse(json_text.begin(), json_text.end());
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::kParse, e.what());
  }
  try {
    return ingest(doc, options);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kParse, e.what());
  }
}

Feeder load_feeder(const std::string& path_or_builtin, const IngestOptions& options) {
  if (path_or_builtin == kBuiltinSce42) return parse_feeder(sce42_document(), options);
  std::ifstream in(path_or_builtin);
  if (!in) throw Error(ErrorCode::kParse, "cannot open feeder file '" + path_or_builtin + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_feeder(text.str(), options);
}

std::string feeder_to_json(const Feeder& feeder) {
  const Bases& b = feeder.bases();
  Json doc;
  doc["unit"] = "pu";
  doc["slack"] = feeder.slack_id();
  doc["v0"] = feeder.v0();
  doc["bases"] = {{"v_kv", b.v_kv}, {"s_kva", b.s_kva}, {"z_ohm", b.z_ohm}};

  auto bus_json = [](const BusRecord& r) {
    return Json{{"id", r.id}, {"v_nom", r.v_nom}, {"p_c", r.p_c}, {"q_c", r.q_c}, {"p_g", r.p_g}};
  };
  Json buses = Json::array();
  buses.push_back(bus_json(feeder.slack()));
  for (const BusRecord& r : feeder.buses()) buses.push_back(bus_json(r));
  doc["buses"] = buses;

  Json lines = Json::array();
  for (int i : feeder.order()) {
    const LineRecord& l = feeder.line(i);
    lines.push_back({{"from", l.from}, {"to", l.to}, {"r", l.r}, {"x", l.x}});
  }
  doc["lines"] = lines;

  Json inverters = Json::array();
  for (const auto& [bus, inv] : feeder.inverters()) {
    Json j{{"bus", bus}, {"s", inv.s}, {"p", inv.p}, {"rho", inv.rho}};
    if (inv.curve) j["curve"] = curve_to_json(*inv.curve);
    inverters.push_back(j);
  }
  doc["inverters"] = inverters;
  return doc.dump(2);
}

std::string feeder_hash(const Feeder& feeder) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : feeder_to_json(feeder)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace voltvar
