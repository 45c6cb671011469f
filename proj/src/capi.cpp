#include "polylab/polylab.h"

#include <new>
#include <string>

#include "experiments.hpp"
#include "polylab/common.hpp"

using polylab::exp::json;

struct polylab_context {
  int jobs = 1;
  std::string error, error_json, scratch;
};

struct polylab_report {
  std::string text;
  bool passed = false;
  bool is_replay = false;
  long long diffs = 0;
};

namespace {

polylab_status fail(polylab_context* ctx, polylab_status s, const std::string& msg) {
  ctx->error = msg;
  ctx->error_json = polylab::exp::error_object(s, polylab_status_name(s), msg).dump();
  return s;
}

void clear(polylab_context* ctx) {
  ctx->error.clear();
  ctx->error_json.clear();
}

// Runs fn, mapping exceptions to status codes recorded on ctx.
template <class Fn>
polylab_status guarded(polylab_context* ctx, Fn&& fn) {
  clear(ctx);
  try {
    fn();
    return POLYLAB_OK;
  } catch (const polylab::Error& e) {
    return fail(ctx, static_cast<polylab_status>(e.code()), e.what());
  } catch (const json::parse_error& e) {
    return fail(ctx, POLYLAB_PARSE, e.what());
  } catch (const json::exception& e) {
    return fail(ctx, POLYLAB_USAGE, e.what());
  } catch (const std::bad_alloc&) {
    return fail(ctx, POLYLAB_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(ctx, POLYLAB_INTERNAL, e.what());
  }
}

json parse_or_null(const char* text) {
  if (!text || !*text) return nullptr;
  return json::parse(text);
}

}  // namespace

extern "C" {

const char* polylab_version(void) { return "0.1.0"; }

const char* polylab_status_name(polylab_status s) {
  switch (s) {
    case POLYLAB_OK: return "ok";
    case POLYLAB_USAGE: return "usage";
    case POLYLAB_SINGULAR_POINT: return "singular_point";
    case POLYLAB_PERTURBATION_FAILED: return "perturbation_failed";
    case POLYLAB_BISECTION_NOT_FOUND: return "bisection_not_found";
    case POLYLAB_CONTAINED_IN_VARIETY: return "contained_in_variety";
    case POLYLAB_SINGULAR_ONLY: return "singular_only";
    case POLYLAB_PARSE: return "parse";
    case POLYLAB_IO: return "io";
    case POLYLAB_INTERNAL: return "internal";
    case POLYLAB_INVALID_ARGUMENT: return "invalid_argument";
  }
  return "unknown";
}

polylab_status polylab_context_create(int jobs, polylab_context** out) {
  if (!out) return POLYLAB_INVALID_ARGUMENT;
  *out = nullptr;
  if (jobs < 1) return POLYLAB_INVALID_ARGUMENT;
  *out = new (std::nothrow) polylab_context;
  if (!*out) return POLYLAB_INTERNAL;
  (*out)->jobs = jobs;
  return POLYLAB_OK;
}

void polylab_context_destroy(polylab_context* ctx) { delete ctx; }

const char* polylab_last_error(const polylab_context* ctx) { return ctx ? ctx->error.c_str() : ""; }

const char* polylab_last_error_json(const polylab_context* ctx) { return ctx ? ctx->error_json.c_str() : ""; }

const char* polylab_experiments(polylab_context* ctx) {
  if (!ctx) return nullptr;
  const polylab_status s = guarded(ctx, [&] { ctx->scratch = json(polylab::exp::kinds()).dump(); });
  return s == POLYLAB_OK ? ctx->scratch.c_str() : nullptr;
}

const char* polylab_default_config(polylab_context* ctx, const char* kind) {
  if (!ctx) return nullptr;
  if (!kind) {
    fail(ctx, POLYLAB_INVALID_ARGUMENT, "kind is NULL");
    return nullptr;
  }
  const polylab_status s = guarded(ctx, [&] { ctx->scratch = polylab::exp::default_config(kind).dump(2); });
  return s == POLYLAB_OK ? ctx->scratch.c_str() : nullptr;
}

polylab_status polylab_run(polylab_context* ctx, const char* kind, const char* config_json, polylab_report** out) {
  if (!ctx) return POLYLAB_INVALID_ARGUMENT;
  if (!kind || !out) return fail(ctx, POLYLAB_INVALID_ARGUMENT, "kind and out must not be NULL");
  *out = nullptr;
  return guarded(ctx, [&] {
    const json rep = polylab::exp::run(kind, parse_or_null(config_json), ctx->jobs);
    auto* r = new polylab_report;
    r->text = rep.dump(2);
    r->passed = rep.at("pass").get<bool>();
    *out = r;
  });
}

polylab_status polylab_replay(polylab_context* ctx, const char* report_json, const char* overrides_json,
                              polylab_report** out) {
  if (!ctx) return POLYLAB_INVALID_ARGUMENT;
  if (!report_json || !out) return fail(ctx, POLYLAB_INVALID_ARGUMENT, "report and out must not be NULL");
  *out = nullptr;
  return guarded(ctx, [&] {
    const json stored = json::parse(report_json);
    const json rep = polylab::exp::replay(stored, parse_or_null(overrides_json), ctx->jobs);
    auto* r = new polylab_report;
    r->text = rep.dump(2);
    r->passed = rep.at("pass").get<bool>();
    r->is_replay = true;
    r->diffs = rep.at("diffs").get<long long>();
    *out = r;
  });
}

const char* polylab_report_json(const polylab_report* r) { return r ? r->text.c_str() : ""; }
int polylab_report_passed(const polylab_report* r) { return r && r->passed ? 1 : 0; }
long long polylab_report_diffs(const polylab_report* r) { return r ? r->diffs : 0; }
int polylab_report_is_replay(const polylab_report* r) { return r && r->is_replay ? 1 : 0; }
void polylab_report_destroy(polylab_report* r) { delete r; }

}  // extern "C"
