// Command-line front end over the C interface.
#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "polylab/polylab.h"

using json = nlohmann::json;

namespace {

enum Exit { kPass = 0, kGateFail = 1, kUsage = 2, kParse = 3, kOther = 4, kDiff = 5 };

struct Globals {
  std::uint64_t seed = 0;
  bool seed_set = false;
  int jobs = 1;
  std::string out, config;
  bool csv = false, quiet = false;
};

int exit_for(polylab_status s) {
  switch (s) {
    case POLYLAB_OK: return kPass;
    case POLYLAB_USAGE:
    case POLYLAB_INVALID_ARGUMENT: return kUsage;
    case POLYLAB_PARSE: return kParse;
    default: return kOther;
  }
}

int emit_error(polylab_status s, const std::string& msg) {
  json e{{"error", {{"code", static_cast<int>(s)}, {"name", polylab_status_name(s)}, {"message", msg}}}};
  std::cerr << e.dump() << '\n';
  return exit_for(s);
}

int emit_error(polylab_context* ctx, polylab_status s) {
  std::cerr << polylab_last_error_json(ctx) << '\n';
  return exit_for(s);
}

std::string read_file(const std::string& path, polylab_status& st) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    st = POLYLAB_IO;
    return {};
  }
  std::ostringstream o;
  o << in.rdbuf();
  st = POLYLAB_OK;
  return o.str();
}

// Flag name to config key: leading dashes dropped, '-' becomes '_'.
std::string key_of(std::string flag) {
  while (!flag.empty() && flag[0] == '-') flag.erase(0, 1);
  for (char& c : flag)
    if (c == '-') c = '_';
  return flag;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep))
    if (!cur.empty()) out.push_back(cur);
  return out;
}

json parse_scalar(const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size()) {
      if (text.find_first_of(".eE") == std::string::npos) return json(std::stoll(text));
      return json(v);
    }
  } catch (const std::exception&) {
  }
  if (text == "true") return true;
  if (text == "false") return false;
  return text;
}

// Value typed by the dial's default.
json typed_value(const json& def, const std::string& text) {
  if (def.is_array()) {
    json a = json::array();
    for (const auto& part : split(text, ',')) a.push_back(parse_scalar(part));
    return a;
  }
  if (def.is_string()) return text;
  if (def.is_null()) {
    try {
      return json::parse(text);
    } catch (const json::exception&) {
      return text;  // a file path
    }
  }
  return parse_scalar(text);
}

// Per-kind flag spellings that differ from the config key.
const std::map<std::string, std::map<std::string, std::string>> kAliases = {
    {"restriction.scaling", {{"R", "R_list"}, {"p", "p_list"}}},
    {"restriction.bilinear", {{"R", "R_list"}}},
    {"restriction.field", {{"alpha", "alpha_list"}}},
    {"wongkew", {{"L", "L_list"}}},
    {"incidence", {{"input", "lines"}}},
};

class Runner {
 public:
  explicit Runner(const Globals& g) : g_(g) {}

  int operator()(const std::string& kind, const std::vector<std::string>& extras) {
    polylab_context* ctx = nullptr;
    if (polylab_context_create(g_.jobs, &ctx) != POLYLAB_OK)
      return emit_error(POLYLAB_USAGE, "jobs must be at least 1");
    const int rc = run(ctx, kind, extras);
    polylab_context_destroy(ctx);
    return rc;
  }

 private:
  const Globals& g_;

  int run(polylab_context* ctx, const std::string& kind, const std::vector<std::string>& extras) {
    const char* defaults = polylab_default_config(ctx, kind.c_str());
    if (!defaults) return emit_error(ctx, POLYLAB_USAGE);
    const json def = json::parse(defaults);
    json cfg = json::object();
    if (!g_.config.empty()) {
      polylab_status st;
      const std::string text = read_file(g_.config, st);
      if (st != POLYLAB_OK) return emit_error(st, "cannot open " + g_.config);
      json j;
      try {
        j = json::parse(text);
      } catch (const json::parse_error& e) {
        return emit_error(POLYLAB_PARSE, g_.config + ": " + e.what());
      }
      if (j.is_array() && def.contains("lines")) {
        cfg["lines"] = g_.config;  // a bare line list
      } else if (j.is_object() && j.contains("config") && j.contains("experiment")) {
        cfg = j.at("config");  // a report: reuse its config
      } else if (j.is_object()) {
        cfg = j;
      } else {
        return emit_error(POLYLAB_USAGE, g_.config + " is neither a config object nor a line list");
      }
    }
    const auto alias = kAliases.count(kind) ? kAliases.at(kind) : std::map<std::string, std::string>{};
    for (std::size_t i = 0; i < extras.size(); ++i) {
      const std::string& a = extras[i];
      if (a.rfind("--", 0) != 0) return emit_error(POLYLAB_USAGE, "unexpected argument: " + a);
      std::string key = key_of(a), value;
      const auto eq = key.find('=');
      if (eq != std::string::npos) {
        value = a.substr(a.find('=') + 1);
        key = key.substr(0, eq);
      } else {
        if (i + 1 >= extras.size()) return emit_error(POLYLAB_USAGE, "missing value for " + a);
        value = extras[++i];
      }
      if (alias.count(key)) key = alias.at(key);
      if (!def.contains(key)) return emit_error(POLYLAB_USAGE, "unknown option for " + kind + ": " + a);
      cfg[key] = typed_value(def.at(key), value);
    }
    if (g_.seed_set) cfg["seed"] = g_.seed;
    polylab_report* rep = nullptr;
    const polylab_status st = polylab_run(ctx, kind.c_str(), cfg.dump().c_str(), &rep);
    if (st != POLYLAB_OK) return emit_error(ctx, st);
    const int rc = deliver(rep, kind);
    polylab_report_destroy(rep);
    return rc;
  }

  int deliver(polylab_report* rep, const std::string& kind) {
    const json j = json::parse(polylab_report_json(rep));
    // line generators write the lines themselves, ready for `incidence --config`
    const json& payload = kind == "incidence.gen" ? j.at("artifacts").at("lines") : j;
    if (!g_.out.empty()) {
      std::ofstream o(g_.out);
      if (!o) return emit_error(POLYLAB_IO, "cannot write " + g_.out);
      o << payload.dump(2) << '\n';
    }
    if (g_.csv) {
      std::cout << j.at("csv").get<std::string>();
    } else if (g_.out.empty()) {
      std::cout << payload.dump(2) << '\n';
    }
    if (!g_.quiet) summarize(j);
    return polylab_report_passed(rep) ? kPass : kGateFail;
  }

  static void summarize(const json& j) {
    for (const auto& g : j.at("gates"))
      std::cerr << (g.at("pass").get<bool>() ? "PASS " : "FAIL ") << g.at("name").get<std::string>() << ": "
                << g.at("measured").dump() << ' ' << g.at("relation").get<std::string>() << ' '
                << g.at("bound").dump() << '\n';
    std::cerr << j.at("experiment").get<std::string>() << ": " << (j.at("pass").get<bool>() ? "pass" : "fail")
              << " in " << j.at("wall_clock_s").get<double>() << " s\n";
  }
};

int replay(const Globals& g, const std::string& path, const std::vector<std::string>& sets) {
  polylab_status st;
  const std::string text = read_file(path, st);
  if (st != POLYLAB_OK) return emit_error(st, "cannot open " + path);
  json over = json::object();
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) return emit_error(POLYLAB_USAGE, "--set needs key=value: " + s);
    over[s.substr(0, eq)] = parse_scalar(s.substr(eq + 1));
  }
  if (g.seed_set) over["seed"] = g.seed;
  polylab_context* ctx = nullptr;
  if (polylab_context_create(g.jobs, &ctx) != POLYLAB_OK) return emit_error(POLYLAB_USAGE, "jobs must be at least 1");
  polylab_report* rep = nullptr;
  st = polylab_replay(ctx, text.c_str(), over.empty() ? nullptr : over.dump().c_str(), &rep);
  if (st != POLYLAB_OK) {
    const int rc = emit_error(ctx, st);
    polylab_context_destroy(ctx);
    return rc;
  }
  const json j = json::parse(polylab_report_json(rep));
  json brief = j;
  brief.erase("report");
  if (!g.out.empty()) {
    std::ofstream o(g.out);
    o << j.dump(2) << '\n';
  }
  std::cout << brief.dump(2) << '\n';
  const int rc = polylab_report_diffs(rep) == 0 ? kPass : kDiff;
  polylab_report_destroy(rep);
  polylab_context_destroy(ctx);
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Polynomial partitioning and restriction experiments"};
  app.require_subcommand(1);
  Globals g;
  // global flags are accepted before or after the subcommand
  auto add_globals = [&g](CLI::App* a) {
    a->add_option("--seed", g.seed, "Master seed, overrides the config")->each([&g](const std::string&) {
      g.seed_set = true;
    });
    a->add_option("--jobs", g.jobs, "Worker budget")->check(CLI::PositiveNumber);
    a->add_option("--out", g.out, "Write the report (or generated data) here");
    a->add_option("--config", g.config, "Config JSON, a report to rerun, or a line list for incidence");
    a->add_flag("--csv", g.csv, "Print the CSV block instead of the JSON report");
    a->add_flag("--quiet", g.quiet, "No gate summary on stderr");
  };
  add_globals(&app);

  std::string kind;
  std::function<int()> action;
  auto leaf = [&](CLI::App* sub, const std::string& k) {
    add_globals(sub);
    sub->allow_extras();
    sub->footer("Dials are the config keys of '" + k + "' (polylab defaults " + k +
                "), given as --key value; lists are comma separated.");
    sub->callback([&, sub, k] {
      if (sub->get_subcommands().empty()) action = [&, sub, k] { return Runner(g)(k, sub->remaining()); };
    });
  };

  leaf(app.add_subcommand("partition", "Iterated polynomial partitioning of a point set"), "partition");
  leaf(app.add_subcommand("hamsandwich", "Polynomial ham-sandwich bisection of random point sets"), "hamsandwich");
  auto* inc = app.add_subcommand("incidence", "Rich points by partitioning, with a certificate tree");
  leaf(inc, "incidence");
  leaf(inc->add_subcommand("gen", "Generate a line configuration"), "incidence.gen");
  auto* tubes = app.add_subcommand("tubes", "Tubes against algebraic surfaces");
  tubes->require_subcommand(1);
  leaf(tubes->add_subcommand("classify", "Tangent/transverse classification"), "tubes.classify");
  leaf(tubes->add_subcommand("segments", "Occupied tube segments at angle >= a"), "tubes.segments");
  leaf(tubes->add_subcommand("census", "Direction census of tangent tubes"), "tubes.census");
  leaf(app.add_subcommand("wongkew", "Grid cubes meeting a zero set"), "wongkew");
  auto* res = app.add_subcommand("restriction", "Extension operator laboratory");
  res->require_subcommand(1);
  for (const char* s : {"field", "decompose", "planar", "regulus", "scaling", "bilinear"})
    leaf(res->add_subcommand(s, std::string("restriction ") + s), std::string("restriction.") + s);

  auto* run = app.add_subcommand("run", "Run any experiment kind by name");
  run->add_option("kind", kind, "Experiment kind, e.g. partition or restriction.scaling")->required();
  add_globals(run);
  run->allow_extras();
  run->callback([&] {
    action = [&] {
      // `run incidence gen` style names are accepted too
      std::vector<std::string> rest = run->remaining();
      std::string k = kind;
      if (!rest.empty() && rest[0].rfind("--", 0) != 0) {
        k += "." + rest[0];
        rest.erase(rest.begin());
      }
      return Runner(g)(k, rest);
    };
  });

  std::string report_path;
  std::vector<std::string> sets;
  auto* rep = app.add_subcommand("replay", "Rerun a report's config and diff the rows");
  rep->add_option("report", report_path, "Report JSON")->required();
  add_globals(rep);
  rep->add_option("--set", sets, "Override a config key, key=value");
  rep->callback([&] { action = [&] { return replay(g, report_path, sets); }; });

  std::string dkind;
  auto* defs = app.add_subcommand("defaults", "Print the default config of a kind");
  defs->add_option("kind", dkind)->required();
  defs->callback([&] {
    action = [&] {
      polylab_context* ctx = nullptr;
      polylab_context_create(1, &ctx);
      const char* d = polylab_default_config(ctx, dkind.c_str());
      const int rc = d ? (std::cout << d << '\n', kPass) : emit_error(ctx, POLYLAB_USAGE);
      polylab_context_destroy(ctx);
      return rc;
    };
  });
  app.add_subcommand("list", "List experiment kinds")->callback([&] {
    action = [&] {
      polylab_context* ctx = nullptr;
      polylab_context_create(1, &ctx);
      std::cout << json::parse(polylab_experiments(ctx)).dump(2) << '\n';
      polylab_context_destroy(ctx);
      return static_cast<int>(kPass);
    };
  });
  app.add_subcommand("version", "Print the library version")->callback([&] {
    action = [] {
      std::cout << polylab_version() << '\n';
      return static_cast<int>(kPass);
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return emit_error(POLYLAB_USAGE, e.what());
  }
  return action ? action() : kUsage;
}
