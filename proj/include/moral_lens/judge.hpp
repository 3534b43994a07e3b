#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "moral_lens/compass.hpp"
#include "moral_lens/gateway.hpp"
#include "moral_lens/prompt.hpp"
#include "moral_lens/types.hpp"

namespace moral_lens {

/// One brief reason produced during a run.
struct ReasonRecord {
  CellKey cell;
  int proposition_id = 0;
  std::string reason;
};

struct JudgeSample {
  MoralValue value;
  Framing framing = Framing::first;
  std::vector<ReasonRecord> reasons;  // in draw order
  std::uint64_t seed = 0;
  std::size_t sample_size = 0;  // requested
  std::size_t available = 0;
  bool shortfall = false;  // fewer than sample_size reasons existed
};

/// Draws up to n reasons for (value, framing) without replacement. Candidates
/// are put in canonical (cell key, proposition) order first, so the draw does
/// not depend on the order reasons were collected in.
JudgeSample sample_reasons(const std::vector<ReasonRecord>& run_reasons, const MoralValue& value,
                           Framing framing, std::size_t n, std::uint64_t seed);

struct JudgeTarget {
  std::string backend_id;
  std::string model_id;
  DecodeConfig decode;
};

struct ItemRating {
  ReasonRecord item;
  std::optional<int> rating;
  std::string error_code;  // set when rating is empty
  std::string error;
};

struct JudgeResult {
  MoralValue value;
  Framing framing = Framing::first;
  std::string judge_model;
  std::vector<ItemRating> items;
  std::optional<double> mean;  // over successful ratings
  std::size_t rated = 0;
  std::size_t failures = 0;
  std::size_t available = 0;
  bool shortfall = false;
};

/// Rates every sampled reason. Per-item gateway and parse failures are
/// recorded and counted; they do not stop the batch.
JudgeResult rate_sample(const JudgeSample& sample, ModelGateway& gateway, const JudgeTarget& judge,
                        const TemplateSet& templates = TemplateSet::bundled(),
                        std::size_t max_concurrency = 4);

/// value,framing,judge_model,mean,rated,failures,available,shortfall
std::string judge_csv(const std::vector<JudgeResult>& results);
std::string judge_json(const std::vector<JudgeResult>& results);

}  // namespace moral_lens
