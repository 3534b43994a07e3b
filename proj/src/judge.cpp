#include "moral_lens/judge.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "moral_lens/errors.hpp"
#include "moral_lens/parser.hpp"
#include "moral_lens/sampling.hpp"
#include "moral_lens/util.hpp"
#include "parallel.hpp"

namespace moral_lens {

JudgeSample sample_reasons(const std::vector<ReasonRecord>& run_reasons, const MoralValue& value,
                           Framing framing, std::size_t n, std::uint64_t seed) {
  std::vector<const ReasonRecord*> pool;
  for (const auto& r : run_reasons) {
    if (r.cell.framing == framing && r.cell.value == value) pool.push_back(&r);
  }
  if (pool.empty()) {
    throw NoReasonsError("no brief reasons for " + value.name + "/" + std::string(to_string(framing)));
  }
  std::sort(pool.begin(), pool.end(), [](const ReasonRecord* a, const ReasonRecord* b) {
    if (a->cell != b->cell) return a->cell < b->cell;
    if (a->proposition_id != b->proposition_id) return a->proposition_id < b->proposition_id;
    return a->reason < b->reason;
  });

  JudgeSample s;
  s.value = value;
  s.framing = framing;
  s.seed = seed;
  s.sample_size = n;
  s.available = pool.size();
  s.shortfall = pool.size() < n;
  SeededSampler sampler(seed);
  for (auto idx : sampler.sample_indices(pool.size(), n)) s.reasons.push_back(*pool[idx]);
  return s;
}

JudgeResult rate_sample(const JudgeSample& sample, ModelGateway& gateway, const JudgeTarget& judge,
                        const TemplateSet& templates, std::size_t max_concurrency) {
  JudgeResult out;
  out.value = sample.value;
  out.framing = sample.framing;
  out.judge_model = judge.model_id;
  out.available = sample.available;
  out.shortfall = sample.shortfall;
  out.items.resize(sample.reasons.size());

  detail::parallel_for(sample.reasons.size(), max_concurrency, [&](std::size_t i) {
    auto& slot = out.items[i];
    slot.item = sample.reasons[i];
    try {
      const auto prompt = render_judge_prompt(sample.value, slot.item.reason, templates);
      const auto raw = gateway.complete(judge.backend_id, judge.model_id, prompt, judge.decode);
      slot.rating = parse_judge_rating(raw);
    } catch (const Error& e) {
      slot.error_code = e.code();
      slot.error = e.what();
    }
  });

  long sum = 0;
  for (const auto& item : out.items) {
    if (item.rating) {
      sum += *item.rating;
      ++out.rated;
    } else {
      ++out.failures;
    }
  }
  if (out.rated > 0) out.mean = static_cast<double>(sum) / static_cast<double>(out.rated);
  return out;
}

std::string judge_csv(const std::vector<JudgeResult>& results) {
  std::string out = "value,framing,judge_model,mean,rated,failures,available,shortfall\n";
  for (const auto& r : results) {
    out += r.value.name + "," + std::string(display_name(r.framing)) + "," + r.judge_model + "," +
           (r.mean ? format_number(*r.mean) : std::string()) + "," + std::to_string(r.rated) + "," +
           std::to_string(r.failures) + "," + std::to_string(r.available) + "," +
           (r.shortfall ? "true" : "false") + "\n";
  }
  return out;
}

std::string judge_json(const std::vector<JudgeResult>& results) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& r : results) {
    nlohmann::ordered_json j;
    j["value"] = r.value.name;
    j["framing"] = to_string(r.framing);
    j["judge_model"] = r.judge_model;
    j["mean"] = r.mean ? nlohmann::ordered_json(*r.mean) : nlohmann::ordered_json(nullptr);
    j["rated"] = r.rated;
    j["failures"] = r.failures;
    j["available"] = r.available;
    j["shortfall"] = r.shortfall;
    auto items = nlohmann::ordered_json::array();
    for (const auto& it : r.items) {
      nlohmann::ordered_json row;
      row["cell"] = it.item.cell.to_string();
      row["proposition"] = it.item.proposition_id;
      row["reason"] = it.item.reason;
      row["rating"] = it.rating ? nlohmann::ordered_json(*it.rating) : nlohmann::ordered_json(nullptr);
      if (!it.error_code.empty()) row["error"] = it.error_code + ": " + it.error;
      items.push_back(std::move(row));
    }
    j["items"] = std::move(items);
    arr.push_back(std::move(j));
  }
  return arr.dump(2) + "\n";
}

}  // namespace moral_lens
