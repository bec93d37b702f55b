#pragma once

#include <nlohmann/json.hpp>

#include <ostream>
#include <string>
#include <vector>

#include "padt/config.hpp"

namespace padt {

struct AblationCell {
  std::string name;
  RunConfig cfg;
};

struct AblationRow {
  std::string name;
  int n_vrt = 0;  // kAllVrts reported as -1
  bool robust_mask = true;
  bool use_fvp = true;
  nlohmann::ordered_json metrics;
};

// Grid over the mechanism knobs on the base config's task: VRT budget
// sweep, mask off, projector off.
std::vector<AblationCell> default_ablation_cells(const RunConfig& base);

// Trains one fresh model per cell and evaluates on the shared held-out
// split. Writes ablation.json/.csv/.md plus an SVG chart when out_dir is
// set.
std::vector<AblationRow> run_ablation(const std::vector<AblationCell>& cells,
                                      const std::string& out_dir = "",
                                      std::ostream* progress = nullptr);

}  // namespace padt
