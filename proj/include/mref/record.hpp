// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mref {

/// One subject: per-block feature vectors in schema block order, a
/// per-modality availability flag, and a class label. Blocks of an
/// unavailable modality are zero-filled placeholders.
struct SubjectRecord {
  std::string id;
  std::vector<std::vector<double>> blocks;
  std::vector<std::uint8_t> available;  // per modality
  int label = -1;
};

}  // namespace mref
