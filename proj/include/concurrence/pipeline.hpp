#pragma once

#include <cstddef>
#include <vector>

#include "concurrence/dataset.hpp"
#include "concurrence/model.hpp"
#include "concurrence/rng.hpp"
#include "concurrence/significance.hpp"
#include "concurrence/trainer.hpp"

namespace concurrence {

Json to_json(const EncoderConfig& config);
Json to_json(const TrainConfig& config);
Json to_json(const NullFit& fit);
Json to_json(const TestResult& result);

/// Missing keys keep their current values; unknown keys are config errors.
void update_from_json(EncoderConfig& config, const Json& j);
void update_from_json(TrainConfig& config, const Json& j);

/// End-to-end concurrence analysis of one dataset: pair-disjoint split,
/// training, held-out evaluation and a label-permutation test.
struct ConcurrenceOutcome {
    std::vector<std::size_t> train_ids;
    std::vector<std::size_t> test_ids;
    TrainResult training;
    EvalResult evaluation;
    TestResult test;
};

/// Streams: split(0) splits the data, split(1) trains, split(2) draws the
/// evaluation segments and split(3) drives the permutations.
ConcurrenceOutcome run_concurrence(const Dataset& dataset, const EncoderConfig& model_config,
                                   const TrainConfig& config, std::size_t n_perms, const Rng& rng,
                                   std::size_t perm_workers = 1);

}  // namespace concurrence
