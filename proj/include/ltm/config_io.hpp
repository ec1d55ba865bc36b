#pragma once

// Reading and writing ModelConfig.
//
// Text format: `[section]` headers followed by `key = value unit` lines; `#`
// starts a comment. An optional top-level `preset = <name>` line seeds the
// config before the remaining keys are applied. Every numeric entry must carry
// its unit, e.g.
//
//     preset = baseline
//     [rates]
//     L21 = 68.2e6 rad/s
//     [geometry]
//     nv_concentration = 5.7 ppb
//
// JSON mirrors the text format: {"preset": "baseline",
// "rates": {"L21": {"value": 6.82e7, "unit": "rad/s"}}, ...}.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ltm/model.hpp"

namespace ltm {

/// Canonical unit of a parameter path ("rad/s", "m^3", "1", ...). Throws UsageError for unknown paths.
std::string canonical_unit(std::string_view path);

/// All settable numeric parameter paths, in canonical order.
const std::vector<std::string>& parameter_paths();

double get_parameter(const ModelConfig& config, std::string_view path);

/// Sets a numeric parameter given in its canonical unit. Besides the stored
/// fields, `drive.lambda` sets both pumps and `drive.field` sets the detuning
/// from a field in tesla.
void set_parameter(ModelConfig& config, std::string_view path, double value);

/// Sets a parameter from text: "3e6", "3e6 rad/s", "5.7 ppb", or a mode name for
/// `orientation.mode`. A missing unit means the canonical unit.
void set_parameter(ModelConfig& config, std::string_view path, std::string_view text);

/// Converts `value` given in `unit` to the canonical unit of `path`.
double to_canonical(std::string_view path, double value, std::string_view unit);

ModelConfig parse_config_text(std::string_view text);
ModelConfig parse_config_json(std::string_view text);

/// Loads a config file; `.json` files are read as JSON, anything else as text.
ModelConfig load_config_file(const std::string& path);

/// Canonical text form: every parameter, canonical units, round-trip precision.
std::string to_config_text(const ModelConfig& config);
std::string to_config_json(const ModelConfig& config);

/// FNV-1a hash of the canonical text form. Changes iff any parameter changes.
std::uint64_t config_hash(const ModelConfig& config);

std::string format_double(double v);

}  // namespace ltm
