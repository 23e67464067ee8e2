#pragma once

#include <cstddef>
#include <vector>

#include "metric_active/labeling.hpp"

namespace metric_active::testing {

struct ReferenceRun {
  LabelTable labels;
  QueryState state;
  EstimateTable estimates{0, 0.5};
  std::vector<int> final_labels;
  std::size_t iterations = 0;
};

// Straight transcription of the learner's main loop on top of the
// brute-force building blocks: full rescans every iteration, no indexes.
// Only suitable for small n.
ReferenceRun reference_run(const BallFamily& fam, LabelSource& labels, const RunOptions& opts);

}  // namespace metric_active::testing
