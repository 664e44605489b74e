#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "concurrence/baselines.hpp"
#include "concurrence/bernoulli.hpp"
#include "concurrence/dataio.hpp"
#include "concurrence/error.hpp"
#include "concurrence/generators.hpp"
#include "concurrence/parallel.hpp"
#include "concurrence/pipeline.hpp"
#include "concurrence/report.hpp"
#include "concurrence/significance.hpp"
#include "concurrence/trainer.hpp"
#include "json_config.hpp"

namespace fs = std::filesystem;
using namespace concurrence;

namespace {

// Options shared by every subcommand.
struct Common {
    std::uint64_t seed = 0;
    std::size_t workers = 0;
    std::string report;
    std::string format;
};

void add_common(CLI::App* sub, Common& c, bool with_report = true) {
    sub->add_option("--seed", c.seed, "Root random seed");
    sub->add_option("--workers", c.workers, "Worker threads (default: CONC_WORKERS, else all cores)");
    if (with_report) {
        sub->add_option("--report", c.report, "Report path (.json or .csv); stdout when omitted");
        sub->add_option("--format", c.format, "Report format override: json|csv");
    }
}

Json meta_for(const CLI::App* sub, const Common& c) {
    Json meta;
    meta["command"] = sub->get_name();
    meta["version"] = CONCURRENCE_VERSION;
    meta["seed"] = c.seed;
    meta["config"] = cli::JsonConfig::resolved(sub);
    return meta;
}

void emit(const Report& report, const Common& c) {
    if (c.report.empty()) {
        std::cout << render_report(report, c.format.empty() ? ReportFormat::json : parse_report_format(c.format));
        return;
    }
    const fs::path path(c.report);
    write_report(report, path, c.format.empty() ? format_for_path(path) : parse_report_format(c.format));
}

KernelSpec kernel_arg(const std::string& text) {
    // name[:scale]
    const auto colon = text.find(':');
    double scale = 4.0;
    if (colon != std::string::npos) {
        try {
            scale = std::stod(text.substr(colon + 1));
        } catch (const std::exception&) {
            throw config_error("bad kernel scale in '" + text + "'");
        }
    }
    return parse_kernel(text.substr(0, colon), scale);
}

struct InputData {
    std::string name;
    std::string hash;
    Dataset data;
};

InputData load(const std::string& path) {
    InputData in;
    in.name = fs::path(path).filename().string();
    in.data = read_dataset(path);
    in.hash = manifest_hash(path);
    return in;
}

// ---------------------------------------------------------------------------
// model/training flags

struct ModelOptions {
    EncoderConfig enc;
    TrainConfig train;
};

void add_model_options(CLI::App* sub, ModelOptions& m) {
    sub->add_option("--w", m.train.w, "Segment length");
    sub->add_option("--split", m.train.train_fraction, "Fraction of pairs used for training");
    sub->add_option("--iterations", m.train.iterations, "Optimizer steps");
    sub->add_option("--segments-per-pair", m.train.segments_per_pair, "Training segment pairs per signal pair");
    sub->add_option("--lr", m.train.learning_rate, "Adam learning rate");
    sub->add_option("--eval-segments", m.train.eval_segments, "Evaluation segment pairs per signal pair (even)");
    sub->add_option("--min-gap", m.train.min_gap, "Minimum |t - t'| for non-concurrent segments");
    sub->add_option("--max-batch", m.train.max_batch, "Chunk size for gradient accumulation (0: whole batch)");
    sub->add_flag("--early-stop", m.train.early_stop, "Stop when validation loss stalls");
    sub->add_option("--val-fraction", m.train.validation_fraction, "Validation fraction for early stopping");
    sub->add_option("--patience", m.train.patience, "Early-stopping patience");
    sub->add_option("--blocks", m.enc.blocks, "Encoder blocks");
    sub->add_option("--channels", m.enc.first_channels, "Channels of the first block");
    sub->add_option("--first-kernel", m.enc.first_kernel, "Kernel size of the first block");
    sub->add_option("--kernel", m.enc.kernel, "Kernel size of later blocks");
    sub->add_option("--first-stride", m.enc.first_stride, "Stride of the first block");
    sub->add_option("--stride", m.enc.stride, "Stride of later blocks");
    sub->add_option("--dropout", m.enc.dropout, "Dropout rate");
}

// ---------------------------------------------------------------------------
// gen

struct GenOptions {
    Common common;
    std::string preset = "wavelet";
    std::string out;
    std::size_t count = 1;
    std::size_t n = 0;
    std::size_t t = 0;
    double xi = 1.0;
    double snr = 1.0;
    bool snr_power = false;
    double event_rate = 0.02;
    double ramp = 0.9;
    std::size_t lag_min = 0;
    std::size_t lag_max = 50;
    std::size_t lag = 0;
    double scale_min = 2.0;
    double scale_max = 12.0;
    double p_alpha = 1.0;
    double p_beta = 1.0;
    std::vector<std::string> families;
    std::string k1, k2, noise_x, noise_y;
    bool mismatch = false;
};

Dataset generate(const GenOptions& o, const CLI::App* sub, std::uint64_t seed, std::size_t workers) {
    auto given = [&](const char* name) { return sub->get_option(name)->count() > 0; };
    // generators take a std ratio; a variance ratio is its square
    const double snr = o.snr_power ? std::sqrt(o.snr) : o.snr;
    Dataset ds;
    if (o.preset == "wavelet") {
        WaveletDatasetConfig c;
        if (given("--n")) c.n_pairs = o.n;
        if (given("--t")) c.length = o.t;
        c.event_rate = o.event_rate;
        c.ramp = o.ramp;
        c.lag_min = o.lag_min;
        c.lag_max = o.lag_max;
        c.p_alpha = o.p_alpha;
        c.p_beta = o.p_beta;
        c.snr = snr;
        c.scale_min = o.scale_min;
        c.scale_max = o.scale_max;
        c.families = o.families;
        if (!o.k1.empty()) c.k1 = kernel_arg(o.k1);
        if (!o.k2.empty()) c.k2 = kernel_arg(o.k2);
        if (!o.noise_x.empty()) c.noise_x = kernel_arg(o.noise_x);
        if (!o.noise_y.empty()) c.noise_y = kernel_arg(o.noise_y);
        c.seed = seed;
        ds = gen_wavelet_dataset(c, workers);
    } else if (o.preset == "xi" || o.preset == "snr") {
        XiDatasetConfig c;
        if (given("--n")) c.n_pairs = o.n;
        if (given("--t")) c.length = o.t;
        c.xi = o.xi;
        c.event_rate = o.event_rate;
        c.lag = o.lag;
        // xi: noiseless unless --snr is given; snr: noise at --snr (default 1)
        c.snr = (o.preset == "snr" || given("--snr")) ? snr : kNoNoise;
        if (!o.k1.empty()) c.kernel_x = kernel_arg(o.k1);
        if (!o.k2.empty()) c.kernel_y = kernel_arg(o.k2);
        c.seed = seed;
        ds = gen_xi_dataset(c, workers);
        ds.manifest["preset"] = o.preset;
    } else {
        throw config_error("unknown preset '" + o.preset + "' (expected wavelet, xi or snr)");
    }
    if (o.mismatch) ds = mismatch_pairs(ds, Rng(seed).split(7));
    return ds;
}

int cmd_gen(const GenOptions& o, const CLI::App* sub) {
    if (o.out.empty()) throw config_error("--out is required");
    if (o.count < 1) throw config_error("--count must be >= 1");
    const std::size_t workers = resolve_workers(o.common.workers);
    for (std::size_t i = 0; i < o.count; ++i) {
        fs::path path(o.out);
        if (o.count > 1) {
            fs::create_directories(path);
            char name[64];
            std::snprintf(name, sizeof name, "%s_%03zu.ccd", o.preset.c_str(), i);
            path /= name;
        }
        const std::uint64_t seed = o.common.seed + i;
        Dataset ds = generate(o, sub, seed, workers);
        const Json manifest = write_dataset(ds, path);
        std::cout << "wrote " << path.string() << ": N=" << ds.size() << " T=" << ds.length() << " Kx=" << ds.kx()
                  << " Ky=" << ds.ky() << " seed=" << seed << " payload=" << manifest["payload_fnv1a64"].get<std::string>()
                  << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// sim

struct SimOptions {
    Common common;
    std::string scenario;
    std::vector<std::size_t> w{25, 100, 400};
    std::size_t trials = 100000;
    BernoulliConfig params;
    std::size_t bins = 50;
    std::string hist;
};

int cmd_sim(SimOptions& o, const CLI::App* sub) {
    auto given = [&](const char* name) { return sub->get_option(name)->count() > 0; };
    if (o.w.empty()) throw config_error("--w needs at least one window length");
    if (o.bins < 1) throw config_error("--bins must be >= 1");
    const std::size_t workers = resolve_workers(o.common.workers);
    Report report;
    report.meta = meta_for(sub, o.common);
    Report hist;
    hist.meta = report.meta;
    for (std::size_t w : o.w) {
        BernoulliConfig c = o.params;
        if (!o.scenario.empty()) {
            if (o.scenario.size() != 1) throw config_error("--scenario expects one of a..e");
            c = scenario(o.scenario[0], w);
            if (given("--p")) c.p = o.params.p;
            if (given("--p-alpha")) c.p_alpha = o.params.p_alpha;
            if (given("--p-beta")) c.p_beta = o.params.p_beta;
            if (given("--p-eps-x")) c.p_eps_x = o.params.p_eps_x;
            if (given("--p-eps-y")) c.p_eps_y = o.params.p_eps_y;
            if (given("--tau")) c.tau_prime = o.params.tau_prime;
            if (given("--nonstationary")) c.nonstationary = o.params.nonstationary;
            if (given("--p-start")) c.p_start = o.params.p_start;
            if (given("--p-end")) c.p_end = o.params.p_end;
        }
        c.w = w;
        const ZSimResult r = simulate_z(c, o.trials, Rng(o.common.seed).split(w), workers);
        const double gap = r.p_plus - r.p_minus;
        const double gap_mc = r.mean_plus - r.mean_minus;
        const double se = std::hypot(r.se_plus(), r.se_minus());
        Json row;
        row["w"] = w;
        row["trials"] = r.trials;
        row["p_plus"] = r.p_plus;
        row["p_minus"] = r.p_minus;
        row["theta"] = r.theta;
        row["gap"] = gap;
        row["mean_plus"] = r.mean_plus;
        row["mean_minus"] = r.mean_minus;
        row["var_plus"] = r.var_plus;
        row["var_minus"] = r.var_minus;
        row["gap_mc"] = gap_mc;
        row["gap_se"] = se;
        row["gap_z"] = se > 0 ? (gap_mc - gap) / se : 0.0;
        row["error_rate"] = classify_by_theta(r.z_plus, r.z_minus, r.theta);
        report.rows.push_back(row);

        double lo = 1.0, hi = 0.0;
        for (double z : r.z_plus) lo = std::min(lo, z), hi = std::max(hi, z);
        for (double z : r.z_minus) lo = std::min(lo, z), hi = std::max(hi, z);
        if (hi <= lo) hi = lo + 1.0 / static_cast<double>(w);
        std::vector<std::size_t> cp(o.bins), cm(o.bins);
        auto bin_of = [&](double z) {
            auto b = static_cast<std::size_t>((z - lo) / (hi - lo) * static_cast<double>(o.bins));
            return std::min(b, o.bins - 1);
        };
        for (double z : r.z_plus) ++cp[bin_of(z)];
        for (double z : r.z_minus) ++cm[bin_of(z)];
        for (std::size_t b = 0; b < o.bins; ++b) {
            const double width = (hi - lo) / static_cast<double>(o.bins);
            hist.rows.push_back(Json{{"w", w},
                                     {"bin", b},
                                     {"lo", lo + width * static_cast<double>(b)},
                                     {"hi", lo + width * static_cast<double>(b + 1)},
                                     {"count_plus", cp[b]},
                                     {"count_minus", cm[b]}});
        }
    }
    emit(report, o.common);
    if (!o.hist.empty()) write_report(hist, o.hist, ReportFormat::csv);
    return 0;
}

// ---------------------------------------------------------------------------
// train / eval / test

struct TrainOptions {
    Common common;
    ModelOptions model;
    std::string data;
    std::string out;
    std::size_t folds = 0;
};

int cmd_train(TrainOptions& o, const CLI::App* sub) {
    const InputData in = load(o.data);
    o.model.train.validate();
    o.model.enc.validate();
    const Rng root(o.common.seed);
    Report report;
    report.meta = meta_for(sub, o.common);
    report.meta["input"] = {{"path", o.data}, {"manifest_hash", in.hash}};
    report.meta["encoder"] = to_json(o.model.enc);
    report.meta["train"] = to_json(o.model.train);

    if (o.folds > 0) {
        Rng rng = root.split(4);
        const auto cv = cross_validate(in.data, o.folds, o.model.enc, o.model.train, rng);
        for (std::size_t k = 0; k < cv.folds.size(); ++k) {
            report.rows.push_back(Json{{"fold", k},
                                       {"n_segments", cv.folds[k].segments.size()},
                                       {"accuracy", cv.folds[k].accuracy},
                                       {"coefficient", cv.coefficients[k]}});
        }
        report.summary = {{"folds", o.folds}, {"mean_coefficient", cv.mean_coefficient}};
        emit(report, o.common);
        return 0;
    }

    if (o.out.empty()) throw config_error("--out is required unless --folds is given");
    Rng split_rng = root.split(0);
    Split parts = split_dataset(in.data, o.model.train.train_fraction, split_rng);
    require_disjoint(parts.train, parts.test);
    Rng train_rng = root.split(1);
    TrainResult result = train(parts.train, o.model.enc, o.model.train, train_rng);

    Json extra;
    extra["dataset_manifest_hash"] = in.hash;
    extra["seed"] = o.common.seed;
    extra["train"] = to_json(o.model.train);
    extra["train_ids"] = pair_ids(parts.train);
    extra["test_ids"] = pair_ids(parts.test);
    write_model(result.model, o.out, extra);

    for (std::size_t i = 0; i < result.loss_history.size(); ++i) {
        Json row{{"iteration", i + 1}, {"loss", result.loss_history[i]}};
        if (i < result.validation_history.size()) row["validation_loss"] = result.validation_history[i];
        report.rows.push_back(row);
    }
    report.summary = {{"model", o.out},
                      {"n_train", parts.train.size()},
                      {"n_test", parts.test.size()},
                      {"iterations_run", result.iterations_run}};
    if (!o.common.report.empty()) {
        emit(report, o.common);
        std::cout << "wrote " << o.out << ": " << result.iterations_run << " iterations, final loss "
                  << result.loss_history.back() << "\n";
    } else {
        emit(report, o.common);
    }
    return 0;
}

struct EvalOptions {
    Common common;
    std::string data;
    std::string model;
    std::string pairs = "heldout";
    std::size_t eval_segments = 20;
    std::size_t min_gap = 0;
    std::size_t perms = 1000;
};

struct Scored {
    ConcurrenceModel model;
    Dataset eval_set;
    EvalResult result;
    std::string hash;
};

// Loads the model, selects the evaluation pairs and scores them. Pairs the
// model was trained on are refused.
Scored score_model(const EvalOptions& o) {
    InputData in = load(o.data);
    Json extra;
    Scored s;
    s.model = read_model(o.model, &extra);
    s.hash = in.hash;
    const bool same_data = extra.is_object() && extra.value("dataset_manifest_hash", "") == in.hash;

    std::vector<std::size_t> positions;
    if (o.pairs == "heldout") {
        if (same_data && extra.contains("test_ids")) {
            positions = extra["test_ids"].get<std::vector<std::size_t>>();
        } else {
            for (std::size_t i = 0; i < in.data.size(); ++i) positions.push_back(i);
        }
    } else if (o.pairs == "all") {
        for (std::size_t i = 0; i < in.data.size(); ++i) positions.push_back(i);
    } else {
        std::stringstream ss(o.pairs);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            try {
                positions.push_back(std::stoul(tok));
            } catch (const std::exception&) {
                throw config_error("--pairs expects heldout, all or a comma-separated id list");
            }
        }
    }
    for (std::size_t p : positions) {
        if (p >= in.data.size()) throw config_error("pair id " + std::to_string(p) + " is out of range");
    }
    s.eval_set = subset(in.data, positions);
    if (same_data && extra.contains("train_ids")) {
        const auto train_ids = extra["train_ids"].get<std::vector<std::size_t>>();
        require_disjoint(subset(in.data, train_ids), s.eval_set);
    }
    TrainConfig tc;
    tc.w = s.model.w;
    tc.eval_segments = o.eval_segments;
    tc.min_gap = o.min_gap;
    Rng eval_rng = Rng(o.common.seed).split(2);
    s.result = evaluate(s.model, s.eval_set, tc, eval_rng);
    return s;
}

void add_eval_options(CLI::App* sub, EvalOptions& o) {
    sub->add_option("--data", o.data, "Dataset file")->required();
    sub->add_option("--model", o.model, "Model file")->required();
    sub->add_option("--pairs", o.pairs, "heldout, all, or comma-separated pair ids");
    sub->add_option("--eval-segments", o.eval_segments, "Segment pairs per signal pair (even)");
    sub->add_option("--min-gap", o.min_gap, "Minimum |t - t'| for non-concurrent segments");
}

Json model_meta(const std::string& path, const ConcurrenceModel& m) {
    return Json{{"path", path}, {"w", m.w}, {"w_out", m.w_out}, {"encoder", to_json(m.config)}};
}

int cmd_eval(const EvalOptions& o, const CLI::App* sub) {
    const Scored s = score_model(o);
    Report report;
    report.meta = meta_for(sub, o.common);
    report.meta["input"] = {{"path", o.data}, {"manifest_hash", s.hash}};
    report.meta["model"] = model_meta(o.model, s.model);
    for (const auto& seg : s.result.segments) {
        report.rows.push_back(Json{{"pair_id", seg.pair_id},
                                   {"t", seg.t},
                                   {"t_prime", seg.t_prime},
                                   {"label", seg.label},
                                   {"score", seg.score}});
    }
    report.summary = {{"n_pairs", s.eval_set.size()},
                      {"n_segments", s.result.segments.size()},
                      {"accuracy", s.result.accuracy},
                      {"coefficient", s.result.coefficient},
                      {"ucc", ucc(s.result.accuracy)}};
    emit(report, o.common);
    return 0;
}

struct TestOptions {
    EvalOptions eval;
    ModelOptions model;
};

Json test_row(const TestResult& t, double accuracy, double coefficient) {
    Json row{{"accuracy", accuracy},
             {"coefficient", coefficient},
             {"observed_ucc", t.observed},
             {"p_value", t.p_value},
             {"empirical_p", t.empirical_p},
             {"n_permutations", t.n_permutations}};
    if (t.fit) {
        row["null_family"] = t.fit->family == NullFamily::pearson3 ? "pearson3" : "normal";
        row["null_location"] = t.fit->location;
        row["null_scale"] = t.fit->scale;
        row["null_shape"] = t.fit->family == NullFamily::pearson3 ? Json(t.fit->shape) : Json(nullptr);
        row["null_reflected"] = t.fit->reflected;
        row["null_mean"] = t.fit->mean;
        row["null_variance"] = t.fit->variance;
        row["null_skewness"] = t.fit->skewness;
    }
    return row;
}

int cmd_test(TestOptions& o, const CLI::App* sub) {
    const Common& c = o.eval.common;
    const std::size_t workers = resolve_workers(c.workers);
    o.eval.eval_segments = o.model.train.eval_segments;
    o.eval.min_gap = o.model.train.min_gap;
    Report report;
    report.meta = meta_for(sub, c);
    if (!o.eval.model.empty()) {
        const Scored s = score_model(o.eval);
        report.meta["input"] = {{"path", o.eval.data}, {"manifest_hash", s.hash}};
        report.meta["model"] = model_meta(o.eval.model, s.model);
        const auto scores = s.result.scores();
        const auto labels = s.result.labels();
        const TestResult t = permutation_test(scores, labels, o.eval.perms, Rng(c.seed).split(3), workers);
        report.rows.push_back(test_row(t, s.result.accuracy, s.result.coefficient));
        report.summary = {{"n_pairs", s.eval_set.size()}, {"n_segments", scores.size()}};
    } else {
        const InputData in = load(o.eval.data);
        report.meta["input"] = {{"path", o.eval.data}, {"manifest_hash", in.hash}};
        report.meta["encoder"] = to_json(o.model.enc);
        report.meta["train"] = to_json(o.model.train);
        const auto out = run_concurrence(in.data, o.model.enc, o.model.train, o.eval.perms, Rng(c.seed), workers);
        report.rows.push_back(test_row(out.test, out.evaluation.accuracy, out.evaluation.coefficient));
        report.summary = {{"n_train", out.train_ids.size()},
                          {"n_test", out.test_ids.size()},
                          {"final_loss", out.training.loss_history.back()}};
    }
    emit(report, c);
    return 0;
}

// ---------------------------------------------------------------------------
// baseline / bench

struct BaselineOptions {
    Common common;
    std::vector<std::string> data;
    std::string datasets_dir;
    std::size_t generate = 0;
    std::size_t n = 200;
    std::size_t t = 1000;
    std::vector<std::string> methods{"pearson"};
    std::size_t perms = 1000;
    std::string scheme = "circular";
    std::size_t guard = 50;
    std::size_t bins = 0;
    std::size_t wcc_window = 0;
    std::size_t wcc_max_lag = 50;
    bool two_sided = false;
    double alpha = 0.05;
    ModelOptions model;
};

void add_baseline_options(CLI::App* sub, BaselineOptions& o) {
    sub->add_option("--methods", o.methods, "Methods: pearson, wcc, dcor, hsic, mi, cmi (bench also: concurrence)")
        ->delimiter(',');
    sub->add_option("--perms", o.perms, "Permutations per test");
    sub->add_option("--scheme", o.scheme, "Null scheme: circular|pair");
    sub->add_option("--guard", o.guard, "Minimum circular shift");
    sub->add_option("--bins", o.bins, "MI/CMI bins (0: ceil(sqrt(T/5)) in [4, 32])");
    sub->add_option("--wcc-window", o.wcc_window, "WCC window (0: T/8)");
    sub->add_option("--wcc-max-lag", o.wcc_max_lag, "WCC maximum lag");
    sub->add_flag("--two-sided", o.two_sided, "Pearson: test |mean r| instead of mean r");
    sub->add_option("--alpha", o.alpha, "Significance level for the detected flag");
}

BaselineConfig baseline_config(const BaselineOptions& o, Method m) {
    BaselineConfig bc;
    bc.method = m;
    bc.n_permutations = o.perms;
    if (o.scheme == "circular" || o.scheme == "circular-shift") {
        bc.scheme = NullScheme::circular_shift;
    } else if (o.scheme == "pair" || o.scheme == "pair-shuffle") {
        bc.scheme = NullScheme::pair_shuffle;
    } else {
        throw config_error("unknown null scheme '" + o.scheme + "' (expected circular or pair)");
    }
    bc.guard = o.guard;
    bc.bins = o.bins;
    bc.wcc_window = o.wcc_window;
    bc.wcc_max_lag = o.wcc_max_lag;
    bc.two_sided = o.two_sided;
    return bc;
}

struct MethodSpec {
    std::string name;
    std::optional<Method> baseline;  // empty: concurrence
    std::uint64_t stream = 0;
};

std::vector<MethodSpec> parse_methods(const std::vector<std::string>& names, bool allow_concurrence) {
    if (names.empty()) throw config_error("at least one method is required");
    std::vector<MethodSpec> out;
    for (const auto& n : names) {
        if (n == "concurrence") {
            if (!allow_concurrence) throw config_error("method 'concurrence' is only available in bench");
            out.push_back({n, std::nullopt, 100});
        } else {
            const Method m = parse_method(n);
            out.push_back({method_name(m), m, static_cast<std::uint64_t>(m)});
        }
    }
    return out;
}

std::vector<InputData> gather_inputs(const BaselineOptions& o, std::size_t workers) {
    std::vector<InputData> inputs;
    for (const auto& p : o.data) inputs.push_back(load(p));
    if (!o.datasets_dir.empty()) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(o.datasets_dir)) {
            if (e.is_regular_file() && e.path().extension() == ".ccd") files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) inputs.push_back(load(f.string()));
    }
    for (std::size_t i = 0; i < o.generate; ++i) {
        WaveletDatasetConfig c;
        c.n_pairs = o.n;
        c.length = o.t;
        c.seed = o.common.seed + i;
        InputData in;
        in.data = gen_wavelet_dataset(c, workers);
        char name[64];
        std::snprintf(name, sizeof name, "wavelet_%03zu", i);
        in.name = name;
        in.hash = hex64(fnv1a64(in.data.manifest.dump(2)));
        inputs.push_back(std::move(in));
    }
    if (inputs.empty()) throw config_error("no datasets given (use --data, --datasets or --generate)");
    return inputs;
}

int run_tables(BaselineOptions& o, const CLI::App* sub, bool bench) {
    if (!(o.alpha >= 0.0 && o.alpha <= 1.0)) throw config_error("--alpha must lie in [0, 1]");
    const auto methods = parse_methods(o.methods, bench);
    const std::size_t workers = resolve_workers(o.common.workers);
    const auto inputs = gather_inputs(o, workers);
    Report report;
    report.meta = meta_for(sub, o.common);
    Json in_meta = Json::array();
    for (const auto& in : inputs) in_meta.push_back(Json{{"dataset", in.name}, {"manifest_hash", in.hash}});
    report.meta["inputs"] = in_meta;
    if (bench) {
        report.meta["encoder"] = to_json(o.model.enc);
        report.meta["train"] = to_json(o.model.train);
    }
    std::map<std::string, std::size_t> detections;
    for (const auto& m : methods) detections[m.name] = 0;

    for (std::size_t d = 0; d < inputs.size(); ++d) {
        const auto& in = inputs[d];
        const Rng rng = Rng(o.common.seed).split(d);
        for (const auto& m : methods) {
            Json row{{"dataset", in.name}, {"manifest_hash", in.hash}, {"method", m.name}};
            TestResult t;
            if (m.baseline) {
                t = baseline_test(in.data, baseline_config(o, *m.baseline), rng.split(m.stream), workers);
                row["statistic"] = t.observed;
            } else {
                const auto out = run_concurrence(in.data, o.model.enc, o.model.train, o.perms, rng.split(m.stream),
                                                 workers);
                t = out.test;
                row["statistic"] = out.evaluation.coefficient;
                row["ucc"] = out.test.observed;
                row["accuracy"] = out.evaluation.accuracy;
            }
            row["p_value"] = t.p_value;
            row["empirical_p"] = t.empirical_p;
            const bool detected = t.p_value <= o.alpha;
            row["detected"] = detected;
            detections[m.name] += detected ? 1 : 0;
            report.rows.push_back(row);
            std::cerr << in.name << " " << m.name << " p=" << t.p_value << (detected ? " detected" : "") << "\n";
        }
    }
    Json counts = Json::object();
    for (const auto& m : methods) counts[m.name] = detections[m.name];
    report.summary = {{"alpha", o.alpha}, {"n_datasets", inputs.size()}, {"detections", counts}};
    emit(report, o.common);
    return 0;
}

int exit_code(ErrorKind k) { return static_cast<int>(k); }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Concurrence: dependence between paired time series"};
    app.require_subcommand(1);
    app.fallthrough();
    app.option_defaults()->always_capture_default();
    auto formatter = std::make_shared<cli::JsonConfig>();
    app.config_formatter(formatter);
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.set_config("--config", "", "JSON config file; command-line flags win");
    app.set_version_flag("--version", CONCURRENCE_VERSION);

    // gen
    GenOptions gen;
    auto* g = app.add_subcommand("gen", "Generate synthetic datasets");
    add_common(g, gen.common, false);
    g->add_option("--preset", gen.preset, "wavelet | xi | snr");
    g->add_option("--out", gen.out, "Output dataset path (a directory when --count > 1)");
    g->add_option("--count", gen.count, "Number of datasets (seeds seed, seed+1, ...)");
    g->add_option("--n", gen.n, "Signal pairs per dataset");
    g->add_option("--t", gen.t, "Samples per signal");
    g->add_option("--xi", gen.xi, "Shared-event fraction (xi, snr presets)");
    g->add_option("--snr", gen.snr, "std(clean) / std(noise)");
    g->add_flag("--snr-power", gen.snr_power, "Read --snr as var(clean) / var(noise)");
    g->add_option("--event-rate", gen.event_rate, "Mean event rate per frame");
    g->add_option("--ramp", gen.ramp, "Maximum relative event-rate slope (wavelet)");
    g->add_option("--lag-min", gen.lag_min, "Minimum circular lag (wavelet)");
    g->add_option("--lag-max", gen.lag_max, "Maximum circular lag (wavelet)");
    g->add_option("--lag", gen.lag, "Fixed circular lag (xi, snr)");
    g->add_option("--scale-min", gen.scale_min, "Smallest random kernel scale (wavelet)");
    g->add_option("--scale-max", gen.scale_max, "Largest random kernel scale (wavelet)");
    g->add_option("--p-alpha", gen.p_alpha, "Event recovery probability in x (wavelet)");
    g->add_option("--p-beta", gen.p_beta, "Event recovery probability in y (wavelet)");
    g->add_option("--families", gen.families, "Kernel families to draw from (wavelet)")->delimiter(',');
    g->add_option("--k1", gen.k1, "Fixed x kernel, name[:scale]");
    g->add_option("--k2", gen.k2, "Fixed y kernel, name[:scale]");
    g->add_option("--noise-x", gen.noise_x, "Fixed x noise kernel (wavelet)");
    g->add_option("--noise-y", gen.noise_y, "Fixed y noise kernel (wavelet)");
    g->add_flag("--mismatch", gen.mismatch, "Re-pair signals across pairs (independent pairs)");

    // sim
    SimOptions sim;
    auto* s = app.add_subcommand("sim", "Bernoulli-process simulation of z+ and z-");
    add_common(s, sim.common);
    s->add_option("--scenario", sim.scenario, "Named scenario a..e");
    s->add_option("--w", sim.w, "Window lengths")->delimiter(',');
    s->add_option("--trials", sim.trials, "Monte Carlo trials per window length");
    s->add_option("--p", sim.params.p, "Event probability");
    s->add_option("--p-alpha", sim.params.p_alpha, "Recovery probability in x");
    s->add_option("--p-beta", sim.params.p_beta, "Recovery probability in y");
    s->add_option("--p-eps-x", sim.params.p_eps_x, "Spurious event probability in x");
    s->add_option("--p-eps-y", sim.params.p_eps_y, "Spurious event probability in y");
    s->add_option("--tau", sim.params.tau_prime, "Nonzero lag for z-");
    s->add_flag("--nonstationary", sim.params.nonstationary, "Ramp p linearly over the window");
    s->add_option("--p-start", sim.params.p_start, "Ramp start");
    s->add_option("--p-end", sim.params.p_end, "Ramp end");
    s->add_option("--bins", sim.bins, "Histogram bins");
    s->add_option("--hist", sim.hist, "Histogram CSV path");

    // train
    TrainOptions tr;
    auto* t = app.add_subcommand("train", "Train a concurrence model");
    add_common(t, tr.common);
    t->add_option("--data", tr.data, "Dataset file")->required();
    t->add_option("--out", tr.out, "Model output path");
    t->add_option("--folds", tr.folds, "Cross-validation folds (no model file is written)");
    add_model_options(t, tr.model);

    // eval
    EvalOptions ev;
    auto* e = app.add_subcommand("eval", "Evaluate a trained model on held-out pairs");
    add_common(e, ev.common);
    add_eval_options(e, ev);

    // test
    TestOptions ts;
    auto* x = app.add_subcommand("test", "Permutation test of the concurrence result");
    add_common(x, ts.eval.common);
    x->add_option("--data", ts.eval.data, "Dataset file")->required();
    x->add_option("--model", ts.eval.model, "Trained model (omit to train on --split of the data)");
    x->add_option("--pairs", ts.eval.pairs, "heldout, all, or comma-separated pair ids");
    x->add_option("--perms", ts.eval.perms, "Label permutations");
    add_model_options(x, ts.model);

    // baseline
    BaselineOptions bl;
    auto* b = app.add_subcommand("baseline", "Classical dependence measures with permutation tests");
    add_common(b, bl.common);
    b->add_option("--data", bl.data, "Dataset files")->delimiter(',');
    b->add_option("--datasets", bl.datasets_dir, "Directory of .ccd datasets");
    add_baseline_options(b, bl);

    // bench
    BaselineOptions bn;
    bn.methods = {"pearson", "concurrence"};
    bn.model.enc.first_channels = 128;
    auto* n = app.add_subcommand("bench", "Detection table over many datasets");
    add_common(n, bn.common);
    n->add_option("--data", bn.data, "Dataset files")->delimiter(',');
    n->add_option("--datasets", bn.datasets_dir, "Directory of .ccd datasets");
    n->add_option("--generate", bn.generate, "Generate this many wavelet datasets (seeds seed, seed+1, ...)");
    n->add_option("--n", bn.n, "Pairs per generated dataset");
    n->add_option("--t", bn.t, "Samples per generated signal");
    add_baseline_options(n, bn);
    add_model_options(n, bn.model);

    // top-level config keys go to the subcommand named on the command line
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        for (const auto* sub : app.get_subcommands({})) {
            if (sub->get_name() == arg) formatter->section = arg;
        }
        if (!formatter->section.empty()) break;
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& ex) {
        return app.exit(ex);
    } catch (const CLI::CallForAllHelp& ex) {
        return app.exit(ex);
    } catch (const CLI::CallForVersion& ex) {
        return app.exit(ex);
    } catch (const CLI::ConfigError& ex) {
        std::cerr << "error: config file: " << ex.what() << "\n";
        return exit_code(ErrorKind::config);
    } catch (const CLI::ParseError& ex) {
        app.exit(ex);
        return exit_code(ErrorKind::config);
    } catch (const Error& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return exit_code(ex.kind());
    }

    try {
        if (*g) return cmd_gen(gen, g);
        if (*s) return cmd_sim(sim, s);
        if (*t) return cmd_train(tr, t);
        if (*e) return cmd_eval(ev, e);
        if (*x) return cmd_test(ts, x);
        if (*b) return run_tables(bl, b, false);
        if (*n) return run_tables(bn, n, true);
    } catch (const Error& ex) {
        std::cerr << "error: " << ex.what();
        if (!ex.code().empty()) std::cerr << " [" << ex.code() << "]";
        std::cerr << "\n";
        return exit_code(ex.kind());
    } catch (const fs::filesystem_error& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return exit_code(ErrorKind::config);
    } catch (const std::exception& ex) {
        std::cerr << "internal error: " << ex.what() << "\n";
        return 1;
    }
    return 0;
}
