#pragma once

// Experiment driver behind the `smoothout` executable. Every command takes a
// JSON document, fills in defaults, validates it before doing any work and
// echoes the resolved document into its outputs so a run can be repeated
// from that echo alone.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "smoothout/data.hpp"
#include "smoothout/optim.hpp"

namespace smoothout::cli {

using Json = nlohmann::ordered_json;

enum ExitCode : int { ok = 0, config_error = 2, data_error = 3, numeric_failure = 4 };

int exit_code_for(ErrorKind kind);

// --- configuration -------------------------------------------------------

Json load_json(const std::filesystem::path& path);

/// Overlay `overrides` onto `base` (RFC 7386 merge patch, flags win).
Json merge(Json base, const Json& overrides);

/// Defaults + validation. Each throws Error(config) on a schema violation.
Json resolve_train(const Json& doc);
Json resolve_landscape(const Json& doc);
Json resolve_sharpness(const Json& doc);
Json resolve_compare_noise(const Json& doc);

struct DataSplits {
  Dataset train;
  Dataset test;
};

DataSplits load_data(const Json& resolved);
Model build_model(const Json& resolved, const DataSplits& data);
TrainConfig train_config(const Json& resolved);
std::optional<NoiseSpec> noise_spec(const Json& node);

/// Seed for one purpose, derived from the top-level seed.
std::uint64_t derived_seed(std::uint64_t seed, std::string_view purpose);

// --- commands ------------------------------------------------------------

int cmd_train(const Json& doc, std::ostream& log);
int cmd_landscape(const Json& doc, std::ostream& log);
int cmd_sharpness(const Json& doc, std::ostream& log);
int cmd_compare_noise(const Json& doc, std::ostream& log);

/// Parses argv-style arguments (args[0] is the program name), merges flags
/// over --config and dispatches. Errors are reported on `err` and mapped to
/// the exit codes above.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace smoothout::cli
