#pragma once

#include <nlohmann/json.hpp>

#include <string>

#include "padt/config.hpp"
#include "padt/toy_model.hpp"

namespace padt {

struct EvalResult {
  nlohmann::ordered_json metrics;  // stable key order, byte-reproducible
  nlohmann::ordered_json scenes;   // per-scene predictions
};

// Held-out evaluation: greedy generation, response parsing, structured
// decoding, task metrics. "pro" runs every task on an equal share of
// scenes. When out_dir is non-empty, writes metrics.json, predictions.json
// and a few overlay PNGs there.
EvalResult eval_run(PadtModel& model, const RunConfig& cfg, int n_scenes,
                    const std::string& out_dir = "");

}  // namespace padt
