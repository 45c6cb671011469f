// Experiment registry: config JSON in, report JSON out, and replay diffs.
#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace polylab::exp {

using json = nlohmann::json;

std::vector<std::string> kinds();
// Defaults for every dial of `kind`; throws a usage error for an unknown kind.
json default_config(const std::string& kind);
// Defaults overlaid with `user`; unknown keys and mistyped values are usage errors.
json resolve_config(const std::string& kind, const json& user);

// {experiment, version, config, jobs, rows, gates, pass, csv, artifacts, wall_clock_s}
json run(const std::string& kind, const json& user_config, int jobs);

// Reruns the embedded config (with `overrides` applied) and diffs the rows.
// {experiment: "replay", replayed, overrides, rows_compared, diffs, first_divergence, pass, report}
json replay(const json& report, const json& overrides, int jobs);

json error_object(int code, const std::string& name, const std::string& message);

}  // namespace polylab::exp
