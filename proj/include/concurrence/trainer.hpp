#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "concurrence/dataset.hpp"
#include "concurrence/model.hpp"
#include "concurrence/rng.hpp"

namespace concurrence {

/// A classifier sample: label 1 iff the two segments start at the same index.
struct SegmentPair {
    std::vector<double> x;  // Kx x w
    std::vector<double> y;  // Ky x w
    int label = 0;
    std::size_t t = 0;
    std::size_t t_prime = 0;
    std::size_t pair_id = 0;
};

struct TrainConfig {
    std::size_t w = 400;
    std::size_t segments_per_pair = 4;
    std::size_t iterations = 100;
    double learning_rate = 1e-4;
    double train_fraction = 0.8;
    bool early_stop = false;
    double validation_fraction = 0.2;
    std::size_t patience = 10;
    std::size_t eval_segments = 20;  ///< per pair, half concurrent
    std::size_t min_gap = 0;         ///< minimum |t - t'| for negatives; 0 only enforces t != t'
    std::size_t max_batch = 0;       ///< 0: one forward/backward per iteration; else chunk and accumulate

    void validate() const;
};

/// Draws one segment pair. t is uniform on [0, T-w]; negatives draw t' uniformly
/// from the admissible starts other than t.
SegmentPair sample_segment_pair(const SignalPair& pair, std::size_t w, int label, Rng& rng, std::size_t min_gap = 0);

struct TrainResult {
    ConcurrenceModel model;
    std::vector<double> loss_history;
    std::vector<double> validation_history;  ///< empty unless early stopping is on
    std::size_t iterations_run = 0;
};

/// Contrastive training. Each iteration draws segments_per_pair segment pairs
/// from every training pair (concurrent with probability 1/2) and applies one
/// Adam step over the whole minibatch.
TrainResult train(const Dataset& dataset, const EncoderConfig& model_config, const TrainConfig& config, Rng& rng);

struct ScoredSegment {
    std::size_t pair_id = 0;
    std::size_t t = 0;
    std::size_t t_prime = 0;
    int label = 0;
    double score = 0.0;
};

struct EvalResult {
    double accuracy = 0.0;
    double coefficient = 0.0;
    std::vector<ScoredSegment> segments;

    std::vector<double> scores() const;
    std::vector<int> labels() const;
};

/// Scores eval_segments segment pairs per signal pair (exactly half
/// concurrent) in eval mode. The stream for the i-th pair is rng.split(i).
EvalResult evaluate(const ConcurrenceModel& model, const Dataset& dataset, const TrainConfig& config, Rng& rng);

/// Fraction of segments where (score > 0) agrees with (label == 1).
double classification_accuracy(std::span<const double> scores, std::span<const int> labels);

/// 2 * max(accuracy, 0.5) - 1.
double concurrence_coefficient(double accuracy);

struct Split {
    Dataset train;
    Dataset test;
};

/// Pair-disjoint random split; train receives round(fraction * N) pairs.
Split split_dataset(const Dataset& dataset, double train_fraction, Rng& rng);

struct CrossValidationResult {
    std::vector<std::size_t> fold_of_pair;  ///< by position in the input dataset
    std::vector<EvalResult> folds;
    std::vector<double> coefficients;
    double mean_coefficient = 0.0;
};

using ModelFactory = std::function<ConcurrenceModel(const Dataset& train, std::size_t fold)>;

/// Random pair-disjoint fold assignment (fold = rank mod K after shuffling).
std::vector<std::size_t> assign_folds(std::size_t n_pairs, std::size_t folds, Rng& rng);

CrossValidationResult cross_validate(const Dataset& dataset, std::size_t folds, const EncoderConfig& model_config,
                                     const TrainConfig& config, Rng& rng);

/// Cross-validation with an explicit fold assignment and model source.
CrossValidationResult cross_validate(const Dataset& dataset, std::span<const std::size_t> fold_of_pair,
                                     const ModelFactory& make_model, const TrainConfig& config, Rng& rng);

}  // namespace concurrence
