// SCE 42-bus distribution feeder: line impedances in ohm, peak loads in MVA,
// PV capacities in MW. Bus 1 is the substation.
#include <array>
#include <string>

#include <json.hpp>

#include "voltvar/feeder_io.hpp"

namespace voltvar {
namespace {

struct RawLine {
  int from;
  int to;
  double r;
  double x;
};

// Line 28-29 is listed with X = 0; a reactance of 0.001 ohm keeps X invertible.
constexpr std::array<RawLine, 41> kLines{{
    {1, 2, 0.259, 0.808},  {2, 3, 0.031, 0.092},   {3, 4, 0.046, 0.092},   {3, 13, 0.092, 0.031},
    {3, 14, 0.214, 0.046}, {4, 17, 0.336, 0.061},  {4, 5, 0.107, 0.183},   {5, 21, 0.061, 0.015},
    {5, 6, 0.015, 0.031},  {6, 22, 0.168, 0.061},  {6, 7, 0.031, 0.046},   {7, 27, 0.076, 0.015},
    {7, 8, 0.015, 0.015},  {8, 35, 0.046, 0.015},  {8, 34, 0.244, 0.046},  {8, 36, 0.107, 0.031},
    {8, 30, 0.076, 0.015}, {8, 9, 0.031, 0.031},   {9, 10, 0.015, 0.015},  {9, 37, 0.153, 0.046},
    {10, 11, 0.107, 0.076}, {10, 41, 0.229, 0.122}, {11, 42, 0.031, 0.015}, {11, 12, 0.076, 0.046},
    {14, 16, 0.046, 0.015}, {14, 15, 0.107, 0.015}, {17, 18, 0.122, 0.092}, {17, 20, 0.214, 0.046},
    {18, 19, 0.198, 0.046}, {22, 26, 0.046, 0.015}, {22, 23, 0.107, 0.031}, {23, 24, 0.107, 0.031},
    {24, 25, 0.061, 0.015}, {27, 28, 0.046, 0.015}, {28, 29, 0.031, 0.001}, {30, 31, 0.076, 0.015},
    {30, 32, 0.076, 0.046}, {30, 33, 0.107, 0.015}, {37, 38, 0.061, 0.015}, {38, 39, 0.061, 0.015},
    {38, 40, 0.061, 0.015},
}};

struct RawValue {
  int bus;
  double value;
};

constexpr std::array<RawValue, 25> kPeakLoadMva{{
    {11, 0.67}, {12, 0.45}, {13, 0.89}, {15, 0.07}, {16, 0.67}, {18, 0.45}, {19, 1.23},
    {20, 0.45}, {21, 0.2},  {23, 0.13}, {24, 0.13}, {25, 0.2},  {26, 0.07}, {27, 0.13},
    {28, 0.27}, {29, 0.2},  {31, 0.27}, {33, 0.45}, {34, 1.34}, {35, 0.13}, {36, 0.67},
    {37, 0.13}, {39, 0.45}, {40, 0.2},  {41, 0.45},
}};

constexpr std::array<RawValue, 5> kPvCapacityMw{{{2, 1.0}, {12, 3.0}, {26, 2.0}, {29, 1.8}, {31, 2.5}}};

std::string build_document() {
  nlohmann::json doc;
  doc["unit"] = "ohm";
  doc["slack"] = 1;
  doc["v0"] = 1.0;
  doc["bases"] = {{"v_kv", 12.35}, {"s_kva", 1000.0}, {"z_ohm", 152.52}};

  nlohmann::json buses = nlohmann::json::array();
  for (int id = 1; id <= 42; ++id) {
    nlohmann::json b{{"id", id}};
    for (const RawValue& l : kPeakLoadMva) {
      if (l.bus == id) b["load_mva"] = l.value;
    }
    buses.push_back(b);
  }
  doc["buses"] = buses;

  nlohmann::json lines = nlohmann::json::array();
  for (const RawLine& l : kLines) lines.push_back({{"from", l.from}, {"to", l.to}, {"r", l.r}, {"x", l.x}});
  doc["lines"] = lines;

  nlohmann::json inverters = nlohmann::json::array();
  for (const RawValue& pv : kPvCapacityMw) inverters.push_back({{"bus", pv.bus}, {"capacity_mw", pv.value}});
  doc["inverters"] = inverters;
  return doc.dump(2);
}

}  // namespace

const std::string& sce42_document() {
  static const std::string doc = build_document();
  return doc;
}

}  // namespace voltvar
