#include "moral_lens/runner.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "json_fields.hpp"
#include "moral_lens/cohort.hpp"
#include "moral_lens/errors.hpp"
#include "moral_lens/instrument.hpp"
#include "moral_lens/judge.hpp"
#include "moral_lens/parser.hpp"
#include "moral_lens/prompt.hpp"
#include "moral_lens/report.hpp"
#include "moral_lens/util.hpp"
#include "parallel.hpp"

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace moral_lens {

namespace {

constexpr int kMaxAttempts = 2;  // first query plus one re-query on a failed parse

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  if (path.is_relative()) path = base / path;
  return path.lexically_normal();
}

ValueSpec parse_value_spec(const nlohmann::json& j, std::string_view where, std::string_view origin) {
  detail::require_object<ConfigError>(j, where, origin);
  detail::allow_keys<ConfigError>(j, {"value", "instrument"}, where, origin);
  return {MoralValue{detail::require_string<ConfigError>(j, "value", where, origin)},
          detail::require_string<ConfigError>(j, "instrument", where, origin)};
}

std::size_t require_count(const nlohmann::json& j, std::string_view key, std::string_view where,
                          std::string_view origin) {
  const auto& v = detail::require_field<ConfigError>(j, key, where, origin);
  if (!v.is_number_unsigned() || v.get<std::uint64_t>() == 0) {
    throw ConfigError(std::string(origin) + ": " + std::string(where) + "." + std::string(key) +
                      " must be a positive integer");
  }
  return v.get<std::size_t>();
}

std::uint64_t require_seed(const nlohmann::json& j, std::string_view where, std::string_view origin) {
  const auto& v = detail::require_field<ConfigError>(j, "seed", where, origin);
  if (!v.is_number_unsigned()) {
    throw ConfigError(std::string(origin) + ": " + std::string(where) +
                      ".seed must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

bool require_bool(const nlohmann::json& j, std::string_view key, std::string_view origin) {
  const auto& v = j.at(std::string(key));
  if (!v.is_boolean()) throw ConfigError(std::string(origin) + ": " + std::string(key) + " must be a boolean");
  return v.get<bool>();
}

ojson value_spec_json(const ValueSpec& v) {
  ojson j;
  j["value"] = v.value.name;
  j["instrument"] = v.instrument;
  return j;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

ExperimentConfig ExperimentConfig::parse(std::string_view json_text, const fs::path& base_dir,
                                         std::string_view origin) {
  auto doc = nlohmann::json::parse(json_text, nullptr, false);
  if (doc.is_discarded()) throw ConfigError(std::string(origin) + ": not valid JSON");
  detail::require_object<ConfigError>(doc, "config", origin);
  detail::allow_keys<ConfigError>(
      doc,
      {"run_id", "instruments", "weights", "templates_dir", "values", "framings", "include_base",
       "models", "backends", "cache_dir", "out_dir", "max_concurrency", "allow_partial", "retry",
       "refusal_phrases", "judge", "cohort", "description"},
      "config", origin);

  ExperimentConfig c;
  c.run_id = detail::require_string<ConfigError>(doc, "run_id", "config", origin);
  if (sanitize_component(c.run_id) != c.run_id) {
    throw ConfigError(std::string(origin) + ": run_id may only use [A-Za-z0-9._-]");
  }

  if (doc.contains("instruments")) {
    if (!doc["instruments"].is_array() || doc["instruments"].empty()) {
      throw ConfigError(std::string(origin) + ": instruments must be a non-empty list of paths");
    }
    for (const auto& p : doc["instruments"]) {
      if (!p.is_string()) throw ConfigError(std::string(origin) + ": instrument paths must be strings");
      c.instruments.push_back(resolve(base_dir, p.get<std::string>()));
    }
  } else {
    for (const char* name : {"mfq", "ous", "factual_dilemmas", "pct"}) {
      c.instruments.push_back(data_dir() / "instruments" / (std::string(name) + ".json"));
    }
  }
  c.weights = doc.contains("weights")
                  ? resolve(base_dir, detail::require_string<ConfigError>(doc, "weights", "config", origin))
                  : data_dir() / "weights" / "default_pct_weights.json";
  if (doc.contains("templates_dir")) {
    c.templates_dir = resolve(base_dir, detail::require_string<ConfigError>(doc, "templates_dir", "config", origin));
  }

  if (doc.contains("values")) {
    if (!doc["values"].is_array()) throw ConfigError(std::string(origin) + ": values must be a list");
    std::set<std::string> seen;
    for (const auto& v : doc["values"]) {
      auto spec = parse_value_spec(v, "values[]", origin);
      if (!seen.insert(spec.value.name).second) {
        throw ConfigError(std::string(origin) + ": value '" + spec.value.name + "' listed twice");
      }
      c.values.push_back(std::move(spec));
    }
  }
  if (doc.contains("framings")) {
    if (!doc["framings"].is_array()) throw ConfigError(std::string(origin) + ": framings must be a list");
    for (const auto& f : doc["framings"]) {
      if (!f.is_string()) throw ConfigError(std::string(origin) + ": framings must be strings");
      Framing framing;
      try {
        framing = parse_framing(f.get<std::string>());
      } catch (const Error& e) {
        throw ConfigError(std::string(origin) + ": " + e.what());
      }
      if (framing == Framing::base) {
        throw ConfigError(std::string(origin) + ": list conditioned framings only; use include_base for base");
      }
      if (std::find(c.framings.begin(), c.framings.end(), framing) != c.framings.end()) {
        throw ConfigError(std::string(origin) + ": framing '" + f.get<std::string>() + "' listed twice");
      }
      c.framings.push_back(framing);
    }
  }
  if (doc.contains("include_base")) c.include_base = require_bool(doc, "include_base", origin);
  if (doc.contains("allow_partial")) c.allow_partial = require_bool(doc, "allow_partial", origin);
  if ((c.values.empty()) != (c.framings.empty())) {
    throw ConfigError(std::string(origin) + ": values and framings must both be given or both be empty");
  }

  const auto& backends = detail::require_field<ConfigError>(doc, "backends", "config", origin);
  if (!backends.is_array() || backends.empty()) {
    throw ConfigError(std::string(origin) + ": backends must be a non-empty list");
  }
  std::set<std::string> backend_ids;
  for (const auto& b : backends) {
    detail::require_object<ConfigError>(b, "backends[]", origin);
    BackendSpec spec;
    spec.id = detail::require_string<ConfigError>(b, "id", "backends[]", origin);
    spec.type = detail::require_string<ConfigError>(b, "type", "backends[]", origin);
    if (!backend_ids.insert(spec.id).second) {
      throw ConfigError(std::string(origin) + ": backend '" + spec.id + "' declared twice");
    }
    if (b.contains("max_concurrency")) spec.max_concurrency = require_count(b, "max_concurrency", "backends[]", origin);
    if (spec.type == "scripted") {
      detail::allow_keys<ConfigError>(b, {"id", "type", "max_concurrency", "fixtures", "fallback"},
                                      "scripted backend", origin);
      if (b.contains("fixtures")) {
        spec.options["fixtures"] =
            resolve(base_dir, detail::require_string<ConfigError>(b, "fixtures", "backend", origin)).string();
      }
      if (b.contains("fallback")) {
        const auto fb = detail::require_string<ConfigError>(b, "fallback", "backend", origin);
        if (fb != "synthetic" && fb != "none") {
          throw ConfigError(std::string(origin) + ": scripted fallback must be 'synthetic' or 'none'");
        }
        spec.options["fallback"] = fb;
      }
    } else if (spec.type == "openai_chat") {
      detail::allow_keys<ConfigError>(
          b, {"id", "type", "max_concurrency", "base_url", "path", "api_key_env", "timeout_s"},
          "openai_chat backend", origin);
      spec.options["base_url"] = detail::require_string<ConfigError>(b, "base_url", "backend", origin);
      if (b.contains("path")) spec.options["path"] = detail::require_string<ConfigError>(b, "path", "backend", origin);
      if (b.contains("api_key_env")) {
        spec.options["api_key_env"] = detail::require_string<ConfigError>(b, "api_key_env", "backend", origin);
      }
      if (b.contains("timeout_s")) spec.options["timeout_s"] = require_count(b, "timeout_s", "backend", origin);
    } else {
      throw ConfigError(std::string(origin) + ": unknown backend type '" + spec.type + "'");
    }
    c.backends.push_back(std::move(spec));
  }

  const auto& models = detail::require_field<ConfigError>(doc, "models", "config", origin);
  if (!models.is_array() || models.empty()) {
    throw ConfigError(std::string(origin) + ": models must be a non-empty list");
  }
  std::set<std::string> model_ids;
  for (const auto& m : models) {
    detail::require_object<ConfigError>(m, "models[]", origin);
    detail::allow_keys<ConfigError>(m, {"id", "backend", "decode"}, "models[]", origin);
    ModelSpec spec;
    spec.id = detail::require_string<ConfigError>(m, "id", "models[]", origin);
    spec.backend = detail::require_string<ConfigError>(m, "backend", "models[]", origin);
    if (!backend_ids.contains(spec.backend)) {
      throw ConfigError(std::string(origin) + ": model '" + spec.id + "' uses unknown backend '" +
                        spec.backend + "'");
    }
    if (m.contains("decode")) spec.decode = DecodeConfig::from_json(m["decode"], origin);
    if (!model_ids.insert(spec.id).second) {
      throw ConfigError(std::string(origin) + ": model '" + spec.id + "' listed twice");
    }
    c.models.push_back(std::move(spec));
  }

  if (doc.contains("cache_dir")) {
    c.cache_dir = resolve(base_dir, detail::require_string<ConfigError>(doc, "cache_dir", "config", origin));
  }
  c.out_dir = resolve(base_dir, doc.contains("out_dir")
                                    ? detail::require_string<ConfigError>(doc, "out_dir", "config", origin)
                                    : std::string("runs"));
  if (doc.contains("max_concurrency")) c.max_concurrency = require_count(doc, "max_concurrency", "config", origin);

  if (doc.contains("retry")) {
    const auto& r = doc["retry"];
    detail::require_object<ConfigError>(r, "retry", origin);
    detail::allow_keys<ConfigError>(r, {"max_attempts", "initial_backoff_ms", "multiplier"}, "retry", origin);
    if (r.contains("max_attempts")) c.retry.max_attempts = static_cast<int>(require_count(r, "max_attempts", "retry", origin));
    if (r.contains("initial_backoff_ms")) {
      const auto& v = r["initial_backoff_ms"];
      if (!v.is_number_unsigned()) throw ConfigError(std::string(origin) + ": retry.initial_backoff_ms must be >= 0");
      c.retry.initial_backoff = std::chrono::milliseconds(v.get<std::uint64_t>());
    }
    if (r.contains("multiplier")) {
      c.retry.multiplier = detail::require_number<ConfigError>(r, "multiplier", "retry", origin);
      if (!(c.retry.multiplier >= 1.0)) throw ConfigError(std::string(origin) + ": retry.multiplier must be >= 1");
    }
  }

  if (doc.contains("refusal_phrases")) {
    const auto& rp = doc["refusal_phrases"];
    if (!rp.is_array()) throw ConfigError(std::string(origin) + ": refusal_phrases must be a list");
    std::vector<std::string> phrases;
    for (const auto& p : rp) {
      if (!p.is_string() || p.get<std::string>().empty()) {
        throw ConfigError(std::string(origin) + ": refusal phrases must be non-empty strings");
      }
      phrases.push_back(p.get<std::string>());
    }
    c.refusal_phrases = std::move(phrases);
  }

  if (doc.contains("judge")) {
    const auto& j = doc["judge"];
    detail::require_object<ConfigError>(j, "judge", origin);
    detail::allow_keys<ConfigError>(j, {"backend", "model", "decode", "sample_size", "seed"}, "judge", origin);
    JudgeSpec spec;
    spec.backend = detail::require_string<ConfigError>(j, "backend", "judge", origin);
    spec.model = detail::require_string<ConfigError>(j, "model", "judge", origin);
    if (!backend_ids.contains(spec.backend)) {
      throw ConfigError(std::string(origin) + ": judge uses unknown backend '" + spec.backend + "'");
    }
    if (j.contains("decode")) spec.decode = DecodeConfig::from_json(j["decode"], origin);
    if (j.contains("sample_size")) spec.sample_size = require_count(j, "sample_size", "judge", origin);
    spec.seed = require_seed(j, "judge", origin);
    c.judge = std::move(spec);
  }

  if (doc.contains("cohort")) {
    const auto& h = doc["cohort"];
    detail::require_object<ConfigError>(h, "cohort", origin);
    detail::allow_keys<ConfigError>(h, {"participants", "values", "n_per_group", "seed"}, "cohort", origin);
    CohortSpec spec;
    spec.participants = resolve(base_dir, detail::require_string<ConfigError>(h, "participants", "cohort", origin));
    const auto& vals = detail::require_field<ConfigError>(h, "values", "cohort", origin);
    if (!vals.is_array() || vals.empty()) throw ConfigError(std::string(origin) + ": cohort.values must be a non-empty list");
    for (const auto& v : vals) spec.values.push_back(parse_value_spec(v, "cohort.values[]", origin));
    if (h.contains("n_per_group")) spec.n_per_group = require_count(h, "n_per_group", "cohort", origin);
    if (h.contains("seed")) spec.seed = require_seed(h, "cohort", origin);
    c.cohort = std::move(spec);
  }

  if (c.cells().empty()) throw ConfigError(std::string(origin) + ": the plan contains no cells");
  return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const SchemaError& e) {
    throw ConfigError(e.what());
  }
  return parse(text, fs::absolute(path).parent_path(), path.string());
}

ojson ExperimentConfig::snapshot() const {
  ojson j;
  j["run_id"] = run_id;
  j["instruments"] = ojson::array();
  for (const auto& p : instruments) j["instruments"].push_back(p.string());
  j["weights"] = weights.string();
  j["templates_dir"] = templates_dir ? ojson(templates_dir->string()) : ojson(nullptr);
  j["values"] = ojson::array();
  for (const auto& v : values) j["values"].push_back(value_spec_json(v));
  j["framings"] = ojson::array();
  for (auto f : framings) j["framings"].push_back(to_string(f));
  j["include_base"] = include_base;
  j["models"] = ojson::array();
  for (const auto& m : models) {
    ojson mj;
    mj["id"] = m.id;
    mj["backend"] = m.backend;
    mj["decode"] = m.decode.to_json();
    j["models"].push_back(std::move(mj));
  }
  j["backends"] = ojson::array();
  for (const auto& b : backends) {
    ojson bj;
    bj["id"] = b.id;
    bj["type"] = b.type;
    bj["max_concurrency"] = b.max_concurrency;
    bj["options"] = b.options;
    j["backends"].push_back(std::move(bj));
  }
  j["cache_dir"] = cache_dir ? ojson(cache_dir->string()) : ojson(nullptr);
  j["allow_partial"] = allow_partial;
  j["retry"] = {{"max_attempts", retry.max_attempts},
                {"initial_backoff_ms", retry.initial_backoff.count()},
                {"multiplier", retry.multiplier}};
  j["refusal_phrases"] = refusal_phrases ? ojson(*refusal_phrases) : ojson(default_refusal_phrases());
  if (judge) {
    ojson jj;
    jj["backend"] = judge->backend;
    jj["model"] = judge->model;
    jj["decode"] = judge->decode.to_json();
    jj["sample_size"] = judge->sample_size;
    jj["seed"] = judge->seed;
    j["judge"] = std::move(jj);
  } else {
    j["judge"] = nullptr;
  }
  if (cohort) {
    ojson cj;
    cj["participants"] = cohort->participants.string();
    cj["values"] = ojson::array();
    for (const auto& v : cohort->values) cj["values"].push_back(value_spec_json(v));
    cj["n_per_group"] = cohort->n_per_group;
    cj["seed"] = cohort->seed;
    cj["tie_rule"] = "ties (exactly half affirming) are assigned to rejection";
    j["cohort"] = std::move(cj);
  } else {
    j["cohort"] = nullptr;
  }
  return j;
}

std::vector<CellKey> ExperimentConfig::cells() const {
  std::vector<CellKey> out;
  for (const auto& m : models) {
    if (include_base) out.push_back({m.id, std::nullopt, std::nullopt, Framing::base});
    for (const auto& v : values) {
      for (Stance s : {Stance::endorse, Stance::reject}) {
        for (Framing f : framings) out.push_back({m.id, v.value, s, f});
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cell documents

std::size_t CellResult::answered() const {
  return static_cast<std::size_t>(
      std::count_if(responses.begin(), responses.end(), [](const auto& r) { return r.label.has_value(); }));
}

std::size_t CellResult::refusals() const {
  return static_cast<std::size_t>(std::count_if(
      responses.begin(), responses.end(), [](const auto& r) { return r.status == "RefusalDetected"; }));
}

std::size_t CellResult::parse_failures() const {
  return static_cast<std::size_t>(std::count_if(responses.begin(), responses.end(), [](const auto& r) {
    return r.status == "NoJsonError" || r.status == "MissingKeyError" || r.status == "AmbiguousLabelError";
  }));
}

std::size_t CellResult::gateway_failures() const {
  return responses.size() - answered() - refusals() - parse_failures();
}

PctResponseSet CellResult::response_set() const {
  PctResponseSet set;
  set.key = key;
  for (int pid = 1; pid <= kPctPropositionCount; ++pid) set.missing.insert(pid);
  for (const auto& r : responses) {
    if (!r.label) continue;
    set.answers[r.proposition_id] = *r.label;
    set.reasons[r.proposition_id] = r.reason;
    set.missing.erase(r.proposition_id);
  }
  return set;
}

std::string cell_file_name(const CellKey& key) {
  std::string name = sanitize_component(key.model_id);
  name += "." + (key.value ? sanitize_component(key.value->name) : std::string("none"));
  name += "." + std::string(key.stance ? to_string(*key.stance) : "none");
  name += "." + std::string(to_string(key.framing));
  name += "-" + sha256_hex(key.to_string()).substr(0, 8) + ".json";
  return name;
}

std::string CellResult::serialize() const {
  ojson j;
  j["key"] = key.to_string();
  j["model_id"] = key.model_id;
  j["backend_id"] = backend_id;
  j["value"] = key.value ? ojson(key.value->name) : ojson(nullptr);
  j["stance"] = key.stance ? ojson(to_string(*key.stance)) : ojson(nullptr);
  j["framing"] = to_string(key.framing);
  j["instrument"] = instrument_id ? ojson(*instrument_id) : ojson(nullptr);
  j["profile"] = profile_id ? ojson(*profile_id) : ojson(nullptr);
  j["status"] = status;
  if (coordinates) {
    j["coordinates"] = {{"economic", coordinates->economic}, {"social", coordinates->social}};
  } else {
    j["coordinates"] = nullptr;
  }
  j["renormalized"] = renormalized;
  j["answered"] = answered();
  ojson missing = ojson::array();
  for (const auto& r : responses) {
    if (!r.label) missing.push_back(r.proposition_id);
  }
  j["missing"] = std::move(missing);
  j["refusals"] = refusals();
  j["parse_failures"] = parse_failures();
  j["gateway_failures"] = gateway_failures();
  auto rs = ojson::array();
  for (const auto& r : responses) {
    ojson rj;
    rj["proposition"] = r.proposition_id;
    rj["label"] = r.label ? ojson(*r.label) : ojson(nullptr);
    rj["reason"] = r.label ? ojson(r.reason) : ojson(nullptr);
    rj["status"] = r.status;
    if (!r.error.empty()) rj["error"] = r.error;
    rj["attempts"] = r.attempts;
    rj["prompt_hash"] = r.prompt_hash;
    rs.push_back(std::move(rj));
  }
  j["responses"] = std::move(rs);
  return j.dump(2) + "\n";
}

CellResult CellResult::parse(std::string_view text, std::string_view origin) {
  auto j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) throw SchemaError(std::string(origin) + ": cell document is not JSON");
  detail::require_object<SchemaError>(j, "cell", origin);
  CellResult r;
  r.key = CellKey::parse(detail::require_string<SchemaError>(j, "key", "cell", origin));
  r.backend_id = detail::require_string<SchemaError>(j, "backend_id", "cell", origin);
  if (j.value("instrument", nlohmann::json()).is_string()) r.instrument_id = j["instrument"].get<std::string>();
  if (j.value("profile", nlohmann::json()).is_string()) r.profile_id = j["profile"].get<std::string>();
  r.status = detail::require_string<SchemaError>(j, "status", "cell", origin);
  const auto& coords = detail::require_field<SchemaError>(j, "coordinates", "cell", origin);
  if (coords.is_object()) {
    r.coordinates = Coordinates{detail::require_number<SchemaError>(coords, "economic", "coordinates", origin),
                                detail::require_number<SchemaError>(coords, "social", "coordinates", origin)};
  }
  r.renormalized = j.value("renormalized", false);
  for (const auto& rj : detail::require_field<SchemaError>(j, "responses", "cell", origin)) {
    PropositionOutcome o;
    o.proposition_id = rj.at("proposition").get<int>();
    if (rj.at("label").is_number_integer()) {
      o.label = rj["label"].get<int>();
      o.reason = rj.at("reason").get<std::string>();
    }
    o.status = rj.at("status").get<std::string>();
    o.error = rj.value("error", std::string());
    o.attempts = rj.at("attempts").get<int>();
    o.prompt_hash = rj.at("prompt_hash").get<std::string>();
    r.responses.push_back(std::move(o));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Metrics over a run

RunMetrics compute_run_metrics(const std::vector<CellResult>& cells, const std::vector<ValueSpec>& values,
                               const std::vector<Framing>& framings, const std::vector<ModelSpec>& models) {
  std::map<CellKey, const CellResult*> by_key;
  for (const auto& c : cells) by_key[c.key] = &c;
  const auto find = [&](const std::string& model, const MoralValue& v, Stance s, Framing f) -> const CellResult* {
    auto it = by_key.find(CellKey{model, v, s, f});
    return it == by_key.end() ? nullptr : it->second;
  };

  RunMetrics out;
  for (const auto& v : values) {
    for (Framing f : framings) {
      ShiftEnsemble ens(v.value, f);
      for (const auto& m : models) {
        const auto* rej = find(m.id, v.value, Stance::reject, f);
        const auto* eds = find(m.id, v.value, Stance::endorse, f);
        if (rej == nullptr || eds == nullptr || !rej->coordinates || !eds->coordinates) continue;
        auto entry = ShiftEntry::from_coordinates(m.id, *rej->coordinates, *eds->coordinates);
        PairRow row;
        row.model_id = m.id;
        row.value = v.value;
        row.framing = f;
        row.reject = entry.reject;
        row.endorse = entry.endorse;
        row.delta = entry.delta;
        const auto rs = rej->response_set();
        const auto es = eds->response_set();
        row.strong_reject = strong_response_rate(rs);
        row.strong_endorse = strong_response_rate(es);
        row.stance_reversal = stance_reversal_rate(rs, es);
        out.pairs.push_back(std::move(row));
        ens.add(std::move(entry));
      }
      if (ens.size() == 0) {
        out.notes.push_back(v.value.name + "/" + std::string(display_name(f)) +
                            ": no model has both conditions scored");
        continue;
      }
      auto summary = summarize(ens);
      if (!summary.mrl) {
        out.notes.push_back(v.value.name + "/" + std::string(display_name(f)) +
                            ": every shift is zero, MRL undefined");
      } else if (summary.mrl_excluded > 0) {
        out.notes.push_back(v.value.name + "/" + std::string(display_name(f)) + ": " +
                            std::to_string(summary.mrl_excluded) + " zero shift(s) excluded from MRL");
      }
      out.summaries.push_back(std::move(summary));
    }
  }

  const bool has_vote = std::find(framings.begin(), framings.end(), Framing::vote) != framings.end();
  const bool has_first = std::find(framings.begin(), framings.end(), Framing::first) != framings.end();
  if (has_vote && has_first) {
    for (const auto& m : models) {
      for (const auto& v : values) {
        for (Stance s : {Stance::endorse, Stance::reject}) {
          const auto* a = find(m.id, v.value, s, Framing::vote);
          const auto* b = find(m.id, v.value, s, Framing::first);
          if (a == nullptr || b == nullptr) continue;
          try {
            out.vote_vs_first.push_back(
                {m.id, v.value, s, mean_abs_distance(a->response_set(), b->response_set())});
          } catch (const NoSharedItemsError&) {
            // Nothing answered in common; no distance to report.
          }
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Experiment

struct Experiment::Impl {
  ExperimentConfig config;
  RunOptions options;
  fs::path run_dir;
  std::optional<InstrumentStore> store;
  std::map<std::string, std::string> instrument_digests;  // id -> sha256 of file
  std::string weights_digest;
  std::optional<WeightTable> weights;
  std::optional<TemplateSet> templates;
  std::shared_ptr<ReplayCache> cache;
  std::unique_ptr<ModelGateway> gateway;
  ParserOptions parser_options;

  const ModelSpec& model(const std::string& id) const {
    for (const auto& m : config.models) {
      if (m.id == id) return m;
    }
    throw ConfigError("unknown model '" + id + "'");
  }

  const ValueSpec& value_spec(const MoralValue& v) const {
    for (const auto& s : config.values) {
      if (s.value == v) return s;
    }
    throw ConfigError("value '" + v.name + "' is not in the plan");
  }

  fs::path cell_path(const CellKey& key) const { return run_dir / "cells" / cell_file_name(key); }
  fs::path manifest_path() const { return run_dir / "manifest.json"; }

  std::shared_ptr<Backend> make_backend(const BackendSpec& spec) const {
    for (const auto& b : options.backend_overrides) {
      if (b->id() == spec.id) return b;
    }
    if (spec.type == "scripted") {
      ScriptedBackend::Responder fallback = synthetic_response;
      if (spec.options.value("fallback", std::string("synthetic")) == "none") fallback = nullptr;
      auto backend = std::make_shared<ScriptedBackend>(spec.id, fallback, spec.max_concurrency);
      if (spec.options.contains("fixtures")) {
        const fs::path path = spec.options["fixtures"].get<std::string>();
        auto fixtures = nlohmann::json::parse(read_text_file(path), nullptr, false);
        if (fixtures.is_discarded() || !fixtures.is_object()) {
          throw ConfigError(path.string() + ": fixtures must be an object of prompt hash -> text");
        }
        for (auto it = fixtures.begin(); it != fixtures.end(); ++it) {
          if (!it.value().is_string()) throw ConfigError(path.string() + ": fixture values must be strings");
          backend->script(it.key(), it.value().get<std::string>());
        }
      }
      return backend;
    }
    HttpBackendOptions o;
    o.id = spec.id;
    o.base_url = spec.options.at("base_url").get<std::string>();
    o.path = spec.options.value("path", std::string("/v1/chat/completions"));
    o.api_key_env = spec.options.value("api_key_env", std::string());
    o.timeout = std::chrono::seconds(spec.options.value("timeout_s", 120));
    o.max_concurrency = spec.max_concurrency;
    return std::make_shared<HttpChatBackend>(o);
  }

  ojson digests_json() const {
    ojson d;
    d["instruments"] = ojson(instrument_digests);
    d["weights"] = weights_digest;
    d["templates"] = ojson(templates->digests());
    return d;
  }

  ojson manifest_json(const std::map<std::string, ojson>& cell_status, const ojson& summary,
                      const ojson& history) const {
    ojson m;
    m["run_id"] = config.run_id;
    m["format_version"] = 1;
    m["digests"] = digests_json();
    m["transport"] = "each prompt is sent as a single user message; no system prompt";
    m["scoring"] = {{"weights", config.weights.string()},
                    {"partial_policy", config.allow_partial ? "renormalize" : "reject"},
                    {"note", "absolute coordinates depend on the weight table; shifts are comparable "
                             "under any fixed table"}};
    ojson models = ojson::array();
    for (const auto& mo : config.models) {
      ojson mj;
      mj["id"] = mo.id;
      mj["backend"] = mo.backend;
      for (const auto& b : config.backends) {
        if (b.id == mo.backend) mj["backend_type"] = b.type;
      }
      mj["decode"] = mo.decode.to_json();
      models.push_back(std::move(mj));
    }
    m["models"] = std::move(models);
    m["values"] = ojson::array();
    for (const auto& v : config.values) m["values"].push_back(value_spec_json(v));
    m["framings"] = ojson::array();
    for (auto f : config.framings) m["framings"].push_back(to_string(f));
    m["include_base"] = config.include_base;
    m["seeds"] = {{"judge", config.judge ? ojson(config.judge->seed) : ojson(nullptr)},
                  {"cohort", config.cohort ? ojson(config.cohort->seed) : ojson(nullptr)}};
    m["judge_model"] = config.judge ? ojson(config.judge->model) : ojson(nullptr);
    ojson cells = ojson::object();
    for (const auto& key : config.cells()) {
      auto it = cell_status.find(key.to_string());
      cells[key.to_string()] = it != cell_status.end() ? it->second : ojson{{"status", "pending"}};
    }
    m["cells"] = std::move(cells);
    m["summary"] = summary;
    m["history"] = history;
    return m;
  }

  ojson existing_history() const {
    if (!fs::exists(manifest_path())) return ojson::array();
    auto old = ojson::parse(read_text_file(manifest_path()), nullptr, false);
    if (old.is_discarded() || !old.contains("history")) return ojson::array();
    return old["history"];
  }

  CellResult run_cell(const CellKey& key) {
    const auto& m = model(key.model_id);
    CellResult r;
    r.key = key;
    r.backend_id = m.backend;
    std::optional<ConditioningProfile> profile;
    if (key.framing != Framing::base) {
      const auto& vs = value_spec(*key.value);
      profile = build_profile(store->get(vs.instrument), *key.value, *key.stance);
      r.instrument_id = vs.instrument;
      r.profile_id = profile->id();
    }
    for (const auto& prop : store->pct().propositions) {
      PropositionOutcome o;
      o.proposition_id = prop.id;
      const auto prompt = render_prompt(key.framing, profile ? &*profile : nullptr, prop, *templates);
      o.prompt_hash = prompt_hash(prompt.body, m.decode);
      for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        o.attempts = attempt + 1;
        std::string raw;
        try {
          raw = gateway->complete(m.backend, m.id, prompt, m.decode, attempt);
        } catch (const GatewayError& e) {
          o.status = e.code();
          o.error = e.what();
          break;
        }
        try {
          const auto parsed = parse_response(raw, parser_options);
          o.label = parsed.label;
          o.reason = parsed.reason;
          o.status = "ok";
          o.error.clear();
          break;
        } catch (const ParseError& e) {
          o.status = e.code();
          o.error = e.what();
        }
      }
      r.responses.push_back(std::move(o));
    }

    const auto n = r.answered();
    r.status = n == r.responses.size() ? "complete" : (n > 0 ? "partial" : "failed");
    if (r.status == "complete") {
      r.coordinates = score(r.response_set(), *weights);
    } else if (r.status == "partial" && config.allow_partial) {
      r.coordinates = score(r.response_set(), *weights, PartialPolicy::renormalize);
      r.renormalized = true;
    }
    return r;
  }

  RunSummary run_cells(bool resume) {
    fs::create_directories(run_dir);
    const bool exists = fs::exists(manifest_path());
    if (!resume && exists) {
      throw ConfigError("run directory " + run_dir.string() + " already holds a run; use resume");
    }
    if (resume && !exists) throw ConfigError("nothing to resume in " + run_dir.string());

    const auto snapshot = config.snapshot().dump(2) + "\n";
    const auto snapshot_path = run_dir / "config.json";
    if (resume && fs::exists(snapshot_path) && read_text_file(snapshot_path) != snapshot) {
      throw ConfigError("config differs from the one the run was started with");
    }
    write_text_file_atomic(snapshot_path, snapshot);
    auto history = existing_history();

    // Digests go to disk before the first completion is requested.
    write_text_file_atomic(manifest_path(), manifest_json({}, ojson::object(), history).dump(2) + "\n");

    const auto keys = config.cells();
    std::vector<CellResult> results(keys.size());
    std::vector<char> skipped(keys.size(), 0);
    const auto calls_before = gateway->backend_calls();
    const std::size_t workers = options.max_concurrency.value_or(config.max_concurrency);
    spdlog::info("run {}: {} cells, {} worker(s), {} mode", config.run_id, keys.size(), workers,
                 options.replay ? "replay" : "live");

    detail::parallel_for(keys.size(), workers, [&](std::size_t i) {
      const auto path = cell_path(keys[i]);
      if (resume && fs::exists(path)) {
        auto doc = CellResult::parse(read_text_file(path), path.string());
        if (doc.status == "complete") {
          results[i] = std::move(doc);
          skipped[i] = 1;
          return;
        }
      }
      results[i] = run_cell(keys[i]);
      write_text_file_atomic(path, results[i].serialize());
      if (results[i].status != "complete") {
        spdlog::warn("cell {} is {} ({} of 62 answered)", keys[i].to_string(), results[i].status,
                     results[i].answered());
      }
    });

    RunSummary s;
    s.run_dir = run_dir;
    s.planned_cells = keys.size();
    std::map<std::string, ojson> status;
    for (std::size_t i = 0; i < keys.size(); ++i) {
      const auto& r = results[i];
      ojson cj;
      cj["status"] = r.status;
      cj["answered"] = r.answered();
      cj["missing"] = r.responses.size() - r.answered();
      cj["refusals"] = r.refusals();
      cj["document"] = "cells/" + cell_file_name(keys[i]);
      status[keys[i].to_string()] = std::move(cj);
      if (r.status == "complete") ++s.complete_cells;
      else if (r.status == "partial") ++s.partial_cells;
      else ++s.failed_cells;
      if (skipped[i]) ++s.skipped_cells;
      s.answered += r.answered();
      s.missing += r.responses.size() - r.answered();
      s.refusals += r.refusals();
    }
    s.backend_calls = gateway->backend_calls() - calls_before;
    last_status = std::move(status);
    return s;
  }

  std::map<std::string, ojson> last_status;

  ojson summary_json(const RunSummary& s) const {
    ojson j;
    j["planned_cells"] = s.planned_cells;
    j["complete_cells"] = s.complete_cells;
    j["partial_cells"] = s.partial_cells;
    j["failed_cells"] = s.failed_cells;
    j["planned_completions"] = s.planned_cells * static_cast<std::size_t>(kPctPropositionCount);
    j["answered"] = s.answered;
    j["missing"] = s.missing;
    j["refusals"] = s.refusals;
    return j;
  }

  void finish_manifest(const RunSummary& s, const std::string& started, std::size_t calls) {
    auto history = existing_history();
    ojson h;
    h["mode"] = options.replay ? "replay" : "live";
    h["started"] = started;
    h["finished"] = utc_timestamp();
    h["backend_calls"] = calls;
    h["skipped_cells"] = s.skipped_cells;
    history.push_back(std::move(h));
    write_text_file_atomic(manifest_path(),
                           manifest_json(last_status, summary_json(s), history).dump(2) + "\n");
  }

  std::vector<CellResult> load_cells() const {
    std::vector<CellResult> out;
    for (const auto& key : config.cells()) {
      const auto path = cell_path(key);
      if (fs::exists(path)) out.push_back(CellResult::parse(read_text_file(path), path.string()));
    }
    return out;
  }

  RunMetrics write_metrics() {
    const auto cells = load_cells();
    auto m = compute_run_metrics(cells, config.values, config.framings, config.models);
    const auto dir = run_dir / "metrics";
    write_text_file_atomic(dir / "summary.csv", metrics_csv(m.summaries));
    write_text_file_atomic(dir / "summary.json", metrics_json(m.summaries));

    std::string pairs =
        "model,value,framing,reject_e,reject_s,endorse_e,endorse_s,shift_e,shift_s,shift_norm,"
        "strong_reject,strong_endorse,stance_reversal\n";
    for (const auto& p : m.pairs) {
      pairs += p.model_id + "," + p.value.name + "," + std::string(display_name(p.framing)) + "," +
               format_number(p.reject.economic) + "," + format_number(p.reject.social) + "," +
               format_number(p.endorse.economic) + "," + format_number(p.endorse.social) + "," +
               format_number(p.delta.d_economic) + "," + format_number(p.delta.d_social) + "," +
               format_number(p.delta.norm()) + "," + format_number(p.strong_reject) + "," +
               format_number(p.strong_endorse) + "," + format_number(p.stance_reversal) + "\n";
    }
    write_text_file_atomic(dir / "pairs.csv", pairs);

    std::string cell_rows =
        "key,status,answered,missing,refusals,parse_failures,gateway_failures,economic,social,"
        "renormalized,strong_rate\n";
    for (const auto& c : cells) {
      const auto set = c.response_set();
      cell_rows += "\"" + c.key.to_string() + "\"," + c.status + "," + std::to_string(c.answered()) + "," +
                   std::to_string(c.responses.size() - c.answered()) + "," + std::to_string(c.refusals()) +
                   "," + std::to_string(c.parse_failures()) + "," + std::to_string(c.gateway_failures()) +
                   "," + (c.coordinates ? format_number(c.coordinates->economic) : "") + "," +
                   (c.coordinates ? format_number(c.coordinates->social) : "") + "," +
                   (c.renormalized ? "true" : "false") + "," +
                   (set.answers.empty() ? "" : format_number(strong_response_rate(set))) + "\n";
    }
    write_text_file_atomic(dir / "cells.csv", cell_rows);

    if (!m.vote_vs_first.empty()) {
      std::string d = "model,value,stance,mean_abs_distance\n";
      for (const auto& r : m.vote_vs_first) {
        d += r.model_id + "," + r.value.name + "," + std::string(to_string(r.stance)) + "," +
             format_number(r.mean_abs_distance) + "\n";
      }
      write_text_file_atomic(dir / "vote_vs_first.csv", d);
    }
    std::string notes;
    for (const auto& n : m.notes) notes += n + "\n";
    write_text_file_atomic(dir / "notes.txt", notes);
    return m;
  }

  void run_judge() {
    if (!config.judge) throw ConfigError("the config has no judge section");
    const auto& spec = *config.judge;
    std::vector<ReasonRecord> reasons;
    for (const auto& c : load_cells()) {
      if (c.key.framing == Framing::base) continue;
      for (const auto& r : c.responses) {
        if (r.label && !r.reason.empty()) reasons.push_back({c.key, r.proposition_id, r.reason});
      }
    }
    std::vector<JudgeResult> results;
    const JudgeTarget target{spec.backend, spec.model, spec.decode};
    for (const auto& v : config.values) {
      for (Framing f : config.framings) {
        try {
          const auto sample = sample_reasons(reasons, v.value, f, spec.sample_size, spec.seed);
          if (sample.shortfall) {
            spdlog::warn("judge {}/{}: only {} of {} reasons available", v.value.name, to_string(f),
                         sample.available, spec.sample_size);
          }
          results.push_back(rate_sample(sample, *gateway, target, *templates,
                                        options.max_concurrency.value_or(config.max_concurrency)));
        } catch (const NoReasonsError& e) {
          spdlog::warn("judge: {}", e.what());
        }
      }
    }
    write_text_file_atomic(run_dir / "judge" / "summary.csv", judge_csv(results));
    write_text_file_atomic(run_dir / "judge" / "ratings.json", judge_json(results));
  }

  void run_cohort() {
    if (!config.cohort) throw ConfigError("the config has no cohort section");
    const auto& spec = *config.cohort;
    std::vector<const Instrument*> moral;
    for (const auto& inst : store->all()) {
      if (inst.kind == InstrumentKind::moral) moral.push_back(&inst);
    }
    const auto participants = load_participants(spec.participants, moral);
    ojson groups = ojson::array();
    std::string csv =
        "value,instrument,endorsement_available,rejection_available,n_per_group,seed,endorse_e,"
        "endorse_s,reject_e,reject_s,shift_e,shift_s\n";
    for (const auto& v : spec.values) {
      const auto& inst = store->get(v.instrument);
      const auto samples = sample_groups(participants, v.value, inst, spec.n_per_group, spec.seed);
      const auto eds = group_coordinates(samples.endorsement, *weights);
      const auto rej = group_coordinates(samples.rejection, *weights);
      const auto d = shift(eds, rej);
      ojson g;
      g["value"] = v.value.name;
      g["instrument"] = v.instrument;
      g["endorsement_available"] = samples.endorsement_available;
      g["rejection_available"] = samples.rejection_available;
      g["n_per_group"] = spec.n_per_group;
      g["seed"] = spec.seed;
      g["tie_rule"] = "rejection";
      g["endorsement"] = {eds.economic, eds.social};
      g["rejection"] = {rej.economic, rej.social};
      g["shift"] = {d.d_economic, d.d_social};
      ojson ids_e = ojson::array();
      ojson ids_r = ojson::array();
      for (const auto& p : samples.endorsement) ids_e.push_back(p.id);
      for (const auto& p : samples.rejection) ids_r.push_back(p.id);
      g["endorsement_ids"] = std::move(ids_e);
      g["rejection_ids"] = std::move(ids_r);
      groups.push_back(std::move(g));
      csv += v.value.name + "," + v.instrument + "," + std::to_string(samples.endorsement_available) + "," +
             std::to_string(samples.rejection_available) + "," + std::to_string(spec.n_per_group) + "," +
             std::to_string(spec.seed) + "," + format_number(eds.economic) + "," + format_number(eds.social) +
             "," + format_number(rej.economic) + "," + format_number(rej.social) + "," +
             format_number(d.d_economic) + "," + format_number(d.d_social) + "\n";
    }
    write_text_file_atomic(run_dir / "cohort" / "summary.json", groups.dump(2) + "\n");
    write_text_file_atomic(run_dir / "cohort" / "summary.csv", csv);
  }

  RunSummary full_run(Experiment& e, bool resume) {
    const auto started = utc_timestamp();
    const auto calls0 = gateway->backend_calls();
    auto summary = run_cells(resume);
    e.metrics();
    if (config.judge) e.judge();
    if (config.cohort) e.cohort();
    try {
      e.report();
    } catch (const NoCompletedCellsError& err) {
      spdlog::warn("report skipped: {}", err.what());
    }
    summary.backend_calls = gateway->backend_calls() - calls0;
    finish_manifest(summary, started, summary.backend_calls);
    return summary;
  }
};

Experiment::Experiment(ExperimentConfig config, RunOptions options) : impl_(std::make_unique<Impl>()) {
  auto& s = *impl_;
  s.config = std::move(config);
  s.options = std::move(options);
  if (s.options.run_id) {
    if (sanitize_component(*s.options.run_id) != *s.options.run_id || s.options.run_id->empty()) {
      throw ConfigError("run id may only use [A-Za-z0-9._-]");
    }
    s.config.run_id = *s.options.run_id;
  }
  const auto out = s.options.out_dir.value_or(s.config.out_dir);
  s.run_dir = out / s.config.run_id;

  std::vector<Instrument> instruments;
  std::set<std::string> ids;
  for (const auto& p : s.config.instruments) {
    auto inst = load_instrument(p);
    if (!ids.insert(inst.id).second) throw DuplicateIdError("instrument '" + inst.id + "' loaded twice");
    s.instrument_digests[inst.id] = sha256_hex(read_text_file(p));
    instruments.push_back(std::move(inst));
  }
  s.store.emplace(std::move(instruments));
  s.store->pct();
  s.weights.emplace(WeightTable::load(s.config.weights));
  s.weights_digest = sha256_hex(read_text_file(s.config.weights));
  s.templates.emplace(s.config.templates_dir ? TemplateSet::load_directory(*s.config.templates_dir)
                                             : TemplateSet::bundled());
  if (s.config.refusal_phrases) s.parser_options.refusal_phrases = *s.config.refusal_phrases;

  for (const auto& v : s.config.values) {
    const auto* inst = s.store->find(v.instrument);
    if (inst == nullptr) throw ConfigError("value '" + v.value.name + "' names unknown instrument '" + v.instrument + "'");
    if (inst->kind != InstrumentKind::moral) throw ConfigError("instrument '" + v.instrument + "' is not a moral instrument");
    build_profile(*inst, v.value, Stance::endorse);
  }
  if (s.config.cohort) {
    for (const auto& v : s.config.cohort->values) {
      const auto* inst = s.store->find(v.instrument);
      if (inst == nullptr || !inst->carries(v.value)) {
        throw ConfigError("cohort value '" + v.value.name + "' is not carried by '" + v.instrument + "'");
      }
    }
  }

  s.cache = std::make_shared<ReplayCache>(s.config.cache_dir);
  s.gateway = std::make_unique<ModelGateway>(s.options.replay ? GatewayMode::replay : GatewayMode::live,
                                             s.cache, s.config.retry);
  for (const auto& b : s.config.backends) s.gateway->add_backend(s.make_backend(b));
}

Experiment::~Experiment() = default;

const ExperimentConfig& Experiment::config() const { return impl_->config; }
fs::path Experiment::run_dir() const { return impl_->run_dir; }
std::size_t Experiment::backend_calls() const { return impl_->gateway->backend_calls(); }
std::vector<CellResult> Experiment::load_cells() const { return impl_->load_cells(); }

std::string Experiment::validate() const {
  const auto& c = impl_->config;
  std::ostringstream out;
  out << "run " << c.run_id << " -> " << impl_->run_dir.string() << "\n";
  out << "instruments:";
  for (const auto& [id, digest] : impl_->instrument_digests) out << " " << id << "(" << digest.substr(0, 12) << ")";
  out << "\nweights: " << c.weights.string() << " (" << impl_->weights_digest.substr(0, 12) << ")\n";
  out << "models: " << c.models.size() << ", values: " << c.values.size()
      << ", framings: " << c.framings.size() << (c.include_base ? " + base" : "") << "\n";
  const auto cells = c.cells().size();
  out << "cells: " << cells << ", completions: " << cells * kPctPropositionCount << "\n";
  if (c.judge) out << "judge: " << c.judge->model << " via " << c.judge->backend << ", n=" << c.judge->sample_size
                   << ", seed=" << c.judge->seed << "\n";
  if (c.cohort) {
    std::vector<const Instrument*> moral;
    for (const auto& inst : impl_->store->all()) {
      if (inst.kind == InstrumentKind::moral) moral.push_back(&inst);
    }
    const auto people = load_participants(c.cohort->participants, moral);
    out << "cohort: " << people.size() << " participants, n_per_group=" << c.cohort->n_per_group
        << ", seed=" << c.cohort->seed << "\n";
  }
  return out.str();
}

RunSummary Experiment::run() { return impl_->full_run(*this, false); }
RunSummary Experiment::resume() { return impl_->full_run(*this, true); }

RunMetrics Experiment::metrics() { return impl_->write_metrics(); }
void Experiment::judge() { impl_->run_judge(); }
void Experiment::cohort() { impl_->run_cohort(); }

void Experiment::report() {
  const auto cells = impl_->load_cells();
  const auto m = compute_run_metrics(cells, impl_->config.values, impl_->config.framings, impl_->config.models);
  write_report(impl_->run_dir, impl_->config, cells, m);
}

}  // namespace moral_lens
