#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "padt/autograd.hpp"

namespace padt {

struct Checkpoint {
  uint32_t version = 1;
  std::string meta;  // free-form JSON snapshot, usually the run config
  std::vector<std::pair<std::string, ag::Mat>> tensors;
};

void save_checkpoint(const std::string& path, const ag::ParamStore& params,
                     const std::string& meta = "");
Checkpoint load_checkpoint(const std::string& path);

// Strict: every store entry must be present with matching shape.
void apply_checkpoint(ag::ParamStore& params, const Checkpoint& ck);

}  // namespace padt
