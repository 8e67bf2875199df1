#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "voltvar/network.hpp"

namespace voltvar {

/// Knobs applied while converting a feeder document into p.u.
struct IngestOptions {
  /// Multiplies every load (p_c, q_c) on the way in.
  double load_scale = 1.0;
  /// Power factor used to split `load_mva` entries into p and q (lagging).
  double power_factor = 0.9;
  /// Real PV output as a fraction of `capacity_mw`.
  double pv_output = 1.0;
  /// Apparent-power rating as a multiple of `capacity_mw`.
  double inverter_oversize = 1.1;

  /// Throws Error(kInvalidArgument) for out-of-range values.
  void validate() const;
};

inline constexpr std::string_view kBuiltinSce42 = "builtin:sce42";

/// Parses the feeder JSON schema:
///
///   {
///     "unit": "ohm" | "pu",            // line impedances
///     "slack": 0, "v0": 1.0,
///     "bases": {"v_kv": .., "s_kva": .., "z_ohm": ..},
///     "buses": [{"id": 1, "v_nom": 1.0, "p_c": .., "q_c": .., "p_g": ..}
///               | {"id": 1, "load_mva": ..}],
///     "lines": [{"from": 1, "to": 2, "r": .., "x": ..}],
///     "inverters": [{"bus": 2, "capacity_mw": ..}
///                   | {"bus": 2, "s": .., "p": .., "rho": .. | "tan_rho": ..}]
///   }
///
/// Powers given as p_c/q_c/p_g/s/p are p.u.; load_mva and capacity_mw are
/// converted with S_base. An inverter given by capacity_mw also adds its real
/// output to the bus's p_g. Any inverter may carry a "curve":
/// {"type": "droop", "alpha": .., "deadband": ..} or
/// {"type": "table", "points": [[v_err, q], ...]}.
///
/// Errors: kParse (with line/column or the offending field), plus everything
/// build_feeder raises.
Feeder parse_feeder(std::string_view json_text, const IngestOptions& options = {});

/// Reads a feeder file, or the embedded SCE 42-bus feeder for "builtin:sce42".
Feeder load_feeder(const std::string& path_or_builtin, const IngestOptions& options = {});

/// The embedded SCE 42-bus feeder document (ohm / MVA / MW form).
const std::string& sce42_document();

/// Serializes a feeder in p.u. form. Reloading the text with default options
/// yields an identical Feeder. Custom curves cannot be serialized
/// (kInvalidArgument).
std::string feeder_to_json(const Feeder& feeder);

/// 64-bit FNV-1a hash of feeder_to_json(feeder), as 16 hex digits.
std::string feeder_hash(const Feeder& feeder);

}  // namespace voltvar
