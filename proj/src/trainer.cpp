#include "concurrence/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "concurrence/adam.hpp"
#include "concurrence/error.hpp"
#include "concurrence/ops.hpp"

namespace concurrence {

namespace {

// Stream tags used with Rng::split so every consumer has its own stream.
enum Stream : std::uint64_t { kInit = 0, kValidationSplit = 1, kValidationSegments = 2, kSegments = 3, kDropout = 4 };

void copy_segment(const std::vector<double>& src, std::size_t channels, std::size_t length, std::size_t start,
                  std::size_t w, double* dst) {
    for (std::size_t c = 0; c < channels; ++c) {
        const double* row = src.data() + c * length + start;
        std::copy(row, row + w, dst + c * w);
    }
}

struct SegmentBatch {
    std::vector<double> x;
    std::vector<double> y;
    std::vector<int> labels;
    std::vector<ScoredSegment> meta;
    std::size_t count = 0;
};

void append(SegmentBatch& batch, const SegmentPair& seg) {
    batch.x.insert(batch.x.end(), seg.x.begin(), seg.x.end());
    batch.y.insert(batch.y.end(), seg.y.begin(), seg.y.end());
    batch.labels.push_back(seg.label);
    batch.meta.push_back({seg.pair_id, seg.t, seg.t_prime, seg.label, 0.0});
    ++batch.count;
}

// M segments per pair, exactly M/2 concurrent, interleaved.
SegmentBatch balanced_segments(const Dataset& dataset, const TrainConfig& config, Rng& rng) {
    SegmentBatch batch;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        Rng pair_rng = rng.split(i);
        for (std::size_t m = 0; m < config.eval_segments; ++m) {
            const int label = m % 2 == 0 ? 1 : 0;
            append(batch, sample_segment_pair(dataset.pairs[i], config.w, label, pair_rng, config.min_gap));
        }
    }
    return batch;
}

double eval_loss(const ConcurrenceModel& model, const SegmentBatch& batch) {
    const auto scores = model.score_eval(batch.x, batch.y, batch.count);
    double loss = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) loss += bce_with_logits(scores[i], batch.labels[i]);
    return loss / static_cast<double>(scores.size());
}

}  // namespace

void TrainConfig::validate() const {
    if (w < 1) throw config_error("segment length w must be >= 1");
    if (segments_per_pair < 1) throw config_error("segments_per_pair must be >= 1");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw config_error("train fraction must lie in (0, 1)");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
        throw config_error("validation fraction must lie in (0, 1)");
    }
    if (eval_segments < 2 || eval_segments % 2 != 0) throw config_error("eval segments per pair must be even and >= 2");
    if (!(learning_rate > 0.0)) throw config_error("learning rate must be positive");
}

SegmentPair sample_segment_pair(const SignalPair& pair, std::size_t w, int label, Rng& rng, std::size_t min_gap) {
    if (label != 0 && label != 1) throw config_error("label must be 0 or 1");
    if (w == 0) throw config_error("segment length must be positive");
    if (pair.length < w) throw config_error("signal shorter than segment");
    const std::size_t last = pair.length - w;  // starts lie in [0, last]
    const std::size_t gap = std::max<std::size_t>(1, min_gap);
    if (label == 0 && last < gap) throw config_error("no misaligned start available");

    SegmentPair seg;
    seg.label = label;
    seg.pair_id = pair.id;
    std::size_t below = 0;
    std::size_t above = 0;
    do {
        seg.t = static_cast<std::size_t>(rng.below(last + 1));
        if (label == 1) break;
        below = seg.t >= gap ? seg.t - gap + 1 : 0;            // [0, t - gap]
        above = seg.t + gap <= last ? last - seg.t - gap + 1 : 0;  // [t + gap, last]
    } while (below + above == 0);

    if (label == 1) {
        seg.t_prime = seg.t;
    } else {
        const auto pick = static_cast<std::size_t>(rng.below(below + above));
        seg.t_prime = pick < below ? pick : seg.t + gap + (pick - below);
    }
    seg.x.resize(pair.kx * w);
    seg.y.resize(pair.ky * w);
    copy_segment(pair.x, pair.kx, pair.length, seg.t, w, seg.x.data());
    copy_segment(pair.y, pair.ky, pair.length, seg.t_prime, w, seg.y.data());
    return seg;
}

TrainResult train(const Dataset& dataset, const EncoderConfig& model_config, const TrainConfig& config, Rng& rng) {
    config.validate();
    if (dataset.empty()) throw config_error("cannot train on an empty dataset");
    dataset.validate();
    if (dataset.length() < config.w + 1) throw config_error("signal length must exceed the segment length");

    Dataset fit_set = dataset;
    SegmentBatch validation;
    if (config.early_stop) {
        Rng split_rng = rng.split(kValidationSplit);
        auto parts = split_dataset(dataset, 1.0 - config.validation_fraction, split_rng);
        fit_set = std::move(parts.train);
        Rng seg_rng = rng.split(kValidationSegments);
        validation = balanced_segments(parts.test, config, seg_rng);
    }

    Rng init_rng = rng.split(kInit);
    TrainResult result{build_model(model_config, dataset.kx(), dataset.ky(), config.w, init_rng), {}, {}, 0};
    ConcurrenceModel& model = result.model;
    Adam optimizer(model.parameters(), AdamConfig{config.learning_rate});

    const Rng segment_root = rng.split(kSegments);
    const Rng dropout_root = rng.split(kDropout);
    const std::size_t kx = model.kx;
    const std::size_t ky = model.ky;
    const std::size_t w = config.w;

    double best_loss = std::numeric_limits<double>::infinity();
    std::size_t best_iteration = 0;
    ConcurrenceModel best_model;

    for (std::size_t it = 0; it < config.iterations; ++it) {
        SegmentBatch batch;
        const Rng iteration_rng = segment_root.split(it);
        for (const auto& pair : fit_set.pairs) {
            Rng pair_rng = iteration_rng.split(pair.id);
            for (std::size_t s = 0; s < config.segments_per_pair; ++s) {
                const int label = pair_rng.bernoulli(0.5) ? 1 : 0;
                append(batch, sample_segment_pair(pair, w, label, pair_rng, config.min_gap));
            }
        }

        optimizer.zero_grad();
        Rng drop_rng = dropout_root.split(it);
        const std::size_t chunk = config.max_batch == 0 ? batch.count : std::min(config.max_batch, batch.count);
        double loss_value = 0.0;
        for (std::size_t start = 0; start < batch.count; start += chunk) {
            const std::size_t n = std::min(chunk, batch.count - start);
            Tensor xb({n, kx, w}, Buffer(batch.x.begin() + static_cast<std::ptrdiff_t>(start * kx * w),
                                         batch.x.begin() + static_cast<std::ptrdiff_t>((start + n) * kx * w)));
            Tensor yb({n, ky, w}, Buffer(batch.y.begin() + static_cast<std::ptrdiff_t>(start * ky * w),
                                         batch.y.begin() + static_cast<std::ptrdiff_t>((start + n) * ky * w)));
            Tensor scores = model.scores(xb, yb, Mode::train, drop_rng);
            Tensor loss = bce_with_logits(scores, std::span<const int>(batch.labels).subspan(start, n));
            const double weight = static_cast<double>(n) / static_cast<double>(batch.count);
            loss_value += weight * loss.item();
            if (n == batch.count) {
                backward(loss);
            } else {
                // Rescale so the accumulated gradient is that of the full-batch mean.
                Tensor scaled = Tensor::from_op({1}, {weight * loss.item()}, {loss}, [weight](Tensor::Node& self) {
                    self.parents[0]->grad_buffer()[0] += weight * self.grad[0];
                });
                backward(scaled);
            }
        }
        if (!std::isfinite(loss_value)) throw numeric_error("training loss is not finite");
        optimizer.step();
        result.loss_history.push_back(loss_value);
        result.iterations_run = it + 1;

        if (config.early_stop) {
            const double vloss = eval_loss(model, validation);
            result.validation_history.push_back(vloss);
            if (vloss < best_loss) {
                best_loss = vloss;
                best_iteration = it;
                best_model = model.clone();
            } else if (it - best_iteration >= config.patience) {
                break;
            }
        }
    }
    if (config.early_stop && best_model.w != 0) result.model = std::move(best_model);
    return result;
}

std::vector<double> EvalResult::scores() const {
    std::vector<double> out;
    out.reserve(segments.size());
    for (const auto& s : segments) out.push_back(s.score);
    return out;
}

std::vector<int> EvalResult::labels() const {
    std::vector<int> out;
    out.reserve(segments.size());
    for (const auto& s : segments) out.push_back(s.label);
    return out;
}

EvalResult evaluate(const ConcurrenceModel& model, const Dataset& dataset, const TrainConfig& config, Rng& rng) {
    config.validate();
    if (dataset.empty()) throw config_error("cannot evaluate on an empty dataset");
    dataset.validate();
    if (dataset.kx() != model.kx || dataset.ky() != model.ky) {
        throw config_error("dataset channel counts do not match the model");
    }
    TrainConfig eval_config = config;
    eval_config.w = model.w;
    SegmentBatch batch = balanced_segments(dataset, eval_config, rng);
    const auto scores = model.score_eval(batch.x, batch.y, batch.count);
    EvalResult result;
    result.segments = std::move(batch.meta);
    for (std::size_t i = 0; i < scores.size(); ++i) result.segments[i].score = scores[i];
    result.accuracy = classification_accuracy(scores, batch.labels);
    result.coefficient = concurrence_coefficient(result.accuracy);
    return result;
}

double classification_accuracy(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw config_error("one label per score required");
    if (scores.empty()) throw config_error("accuracy of an empty set");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if ((scores[i] > 0.0) == (labels[i] == 1)) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(scores.size());
}

double concurrence_coefficient(double accuracy) {
    if (!(accuracy >= 0.0 && accuracy <= 1.0)) throw config_error("accuracy must lie in [0, 1]");
    return 2.0 * std::max(accuracy, 0.5) - 1.0;
}

Split split_dataset(const Dataset& dataset, double train_fraction, Rng& rng) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw config_error("train fraction must lie in (0, 1)");
    if (dataset.size() < 2) throw config_error("need at least two pairs to split");
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(std::span<std::size_t>(order));
    auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(dataset.size())));
    n_train = std::clamp<std::size_t>(n_train, 1, dataset.size() - 1);
    std::vector<std::size_t> train_pos(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<std::size_t> test_pos(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    std::sort(train_pos.begin(), train_pos.end());
    std::sort(test_pos.begin(), test_pos.end());
    Split split{subset(dataset, train_pos), subset(dataset, test_pos)};
    require_disjoint(split.train, split.test);
    return split;
}

std::vector<std::size_t> assign_folds(std::size_t n_pairs, std::size_t folds, Rng& rng) {
    if (folds < 2) throw config_error("cross-validation needs at least 2 folds");
    if (folds > n_pairs) throw config_error("more folds than signal pairs");
    std::vector<std::size_t> order(n_pairs);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(std::span<std::size_t>(order));
    std::vector<std::size_t> fold_of(n_pairs);
    for (std::size_t rank = 0; rank < n_pairs; ++rank) fold_of[order[rank]] = rank % folds;
    return fold_of;
}

CrossValidationResult cross_validate(const Dataset& dataset, std::size_t folds, const EncoderConfig& model_config,
                                     const TrainConfig& config, Rng& rng) {
    Rng fold_rng = rng.split(0);
    const auto fold_of = assign_folds(dataset.size(), folds, fold_rng);
    const Rng train_root = rng.split(1);
    ModelFactory factory = [&](const Dataset& train_set, std::size_t fold) {
        Rng r = train_root.split(fold);
        return train(train_set, model_config, config, r).model;
    };
    Rng eval_rng = rng.split(2);
    return cross_validate(dataset, fold_of, factory, config, eval_rng);
}

CrossValidationResult cross_validate(const Dataset& dataset, std::span<const std::size_t> fold_of_pair,
                                     const ModelFactory& make_model, const TrainConfig& config, Rng& rng) {
    if (fold_of_pair.size() != dataset.size()) throw config_error("one fold index per pair required");
    const std::size_t folds = fold_of_pair.empty() ? 0 : *std::max_element(fold_of_pair.begin(), fold_of_pair.end()) + 1;
    if (folds < 2) throw config_error("cross-validation needs at least 2 folds");
    if (folds > dataset.size()) throw config_error("more folds than signal pairs");

    CrossValidationResult result;
    result.fold_of_pair.assign(fold_of_pair.begin(), fold_of_pair.end());
    for (std::size_t k = 0; k < folds; ++k) {
        std::vector<std::size_t> train_pos;
        std::vector<std::size_t> test_pos;
        for (std::size_t i = 0; i < dataset.size(); ++i) (fold_of_pair[i] == k ? test_pos : train_pos).push_back(i);
        if (test_pos.empty() || train_pos.empty()) throw config_error("every fold needs train and test pairs");
        Dataset train_set = subset(dataset, train_pos);
        Dataset test_set = subset(dataset, test_pos);
        require_disjoint(train_set, test_set);
        const ConcurrenceModel model = make_model(train_set, k);
        Rng eval_rng = rng;  // same per-position streams in every fold
        result.folds.push_back(evaluate(model, test_set, config, eval_rng));
        result.coefficients.push_back(result.folds.back().coefficient);
    }
    result.mean_coefficient = std::accumulate(result.coefficients.begin(), result.coefficients.end(), 0.0) /
                              static_cast<double>(folds);
    return result;
}

}  // namespace concurrence
