#include "concurrence/pipeline.hpp"

#include "concurrence/error.hpp"

namespace concurrence {

namespace {

template <class T>
void take(const Json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw config_error(std::string("config key '") + key + "' has the wrong type");
    }
}

void reject_unknown(const Json& j, std::initializer_list<const char*> known, const char* section) {
    if (!j.is_object()) throw config_error(std::string(section) + " config must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : known) ok = ok || it.key() == k;
        if (!ok) throw config_error("unknown " + std::string(section) + " config key '" + it.key() + "'");
    }
}

}  // namespace

Json to_json(const EncoderConfig& c) {
    return Json{{"blocks", c.blocks},       {"first_channels", c.first_channels}, {"first_kernel", c.first_kernel},
                {"kernel", c.kernel},       {"first_stride", c.first_stride},     {"stride", c.stride},
                {"dropout", c.dropout}};
}

Json to_json(const TrainConfig& c) {
    return Json{{"w", c.w},
                {"segments_per_pair", c.segments_per_pair},
                {"iterations", c.iterations},
                {"learning_rate", c.learning_rate},
                {"train_fraction", c.train_fraction},
                {"early_stop", c.early_stop},
                {"validation_fraction", c.validation_fraction},
                {"patience", c.patience},
                {"eval_segments", c.eval_segments},
                {"min_gap", c.min_gap},
                {"max_batch", c.max_batch}};
}

void update_from_json(EncoderConfig& c, const Json& j) {
    reject_unknown(j, {"blocks", "first_channels", "first_kernel", "kernel", "first_stride", "stride", "dropout"},
                   "encoder");
    take(j, "blocks", c.blocks);
    take(j, "first_channels", c.first_channels);
    take(j, "first_kernel", c.first_kernel);
    take(j, "kernel", c.kernel);
    take(j, "first_stride", c.first_stride);
    take(j, "stride", c.stride);
    take(j, "dropout", c.dropout);
}

void update_from_json(TrainConfig& c, const Json& j) {
    reject_unknown(j,
                   {"w", "segments_per_pair", "iterations", "learning_rate", "train_fraction", "early_stop",
                    "validation_fraction", "patience", "eval_segments", "min_gap", "max_batch"},
                   "train");
    take(j, "w", c.w);
    take(j, "segments_per_pair", c.segments_per_pair);
    take(j, "iterations", c.iterations);
    take(j, "learning_rate", c.learning_rate);
    take(j, "train_fraction", c.train_fraction);
    take(j, "early_stop", c.early_stop);
    take(j, "validation_fraction", c.validation_fraction);
    take(j, "patience", c.patience);
    take(j, "eval_segments", c.eval_segments);
    take(j, "min_gap", c.min_gap);
    take(j, "max_batch", c.max_batch);
}

Json to_json(const NullFit& f) {
    Json j{{"family", f.family == NullFamily::pearson3 ? "pearson3" : "normal"},
           {"location", f.location},
           {"scale", f.scale}};
    if (f.family == NullFamily::pearson3) {
        j["shape"] = f.shape;
        j["reflected"] = f.reflected;
    }
    j["n_samples"] = f.n;
    j["sample_mean"] = f.mean;
    j["sample_variance"] = f.variance;
    j["sample_skewness"] = f.skewness;
    return j;
}

Json to_json(const TestResult& r) {
    Json j{{"observed", r.observed},
           {"p_value", r.p_value},
           {"empirical_p", r.empirical_p},
           {"n_permutations", r.n_permutations}};
    j["null_fit"] = r.fit ? to_json(*r.fit) : Json(nullptr);
    return j;
}

ConcurrenceOutcome run_concurrence(const Dataset& dataset, const EncoderConfig& model_config,
                                   const TrainConfig& config, std::size_t n_perms, const Rng& rng,
                                   std::size_t perm_workers) {
    config.validate();
    Rng split_rng = rng.split(0);
    Split parts = split_dataset(dataset, config.train_fraction, split_rng);
    require_disjoint(parts.train, parts.test);
    ConcurrenceOutcome out;
    out.train_ids = pair_ids(parts.train);
    out.test_ids = pair_ids(parts.test);
    Rng train_rng = rng.split(1);
    out.training = train(parts.train, model_config, config, train_rng);
    Rng eval_rng = rng.split(2);
    out.evaluation = evaluate(out.training.model, parts.test, config, eval_rng);
    const auto scores = out.evaluation.scores();
    const auto labels = out.evaluation.labels();
    out.test = permutation_test(scores, labels, n_perms, rng.split(3), perm_workers);
    return out;
}

}  // namespace concurrence
