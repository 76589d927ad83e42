#pragma once

// Experiment configuration: TOML in, validated struct out, and a hash over
// the fields that change results.
//
// Schema (every key optional; defaults shown in configs/default.toml):
//
//   seeds = [1, 2, 3]          jobs = 1
//   [data]            source = "synthetic" | "csv", ili, queries
//   [data.synthetic]  seed, start_year, years, peak_*, baseline, noise_scale, query_drift
//   [protocol]        seasons, horizons, lookback, delay
//   [models]          ids, samples, rho, rho_q, sigma_p, sigma, ff_hidden,
//                     lstm_hidden, lstm_dense, batch_norm_momentum, batch_norm_epsilon
//   [training]        epochs, batch_size, ff_lr, ff_decay, lstm_lr, lstm_warmup,
//                     lstm_min_lr, lstm_clip
//   [preprocessing]   smoothing_window, smooth_before_normalize, selection_threshold
//   [gp]              window_days, stride
//   [evaluation]      alpha, std_floor, sdp_window
//   [output]          dir, save_checkpoints

#include "ilicast/core/errors.hpp"
#include "ilicast/data/prep.hpp"
#include "ilicast/data/synthetic.hpp"
#include "ilicast/forecast/gp.hpp"
#include "ilicast/forecast/neural.hpp"
#include "ilicast/forecast/spec.hpp"

#include <json.hpp>
#include <toml.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace ilicast::harness {

struct DataSource {
    std::string kind = "synthetic"; // or "csv"
    data::SyntheticConfig synthetic;
    std::filesystem::path ili_csv;     // weekly `date,ili_rate`
    std::filesystem::path queries_csv; // daily panel; optional
};

struct TrainingOptions {
    int epochs = 200;
    int batch_size = 32;
    double ff_lr = 0.01;
    double ff_decay = 0.98;
    double lstm_lr = 0.005;
    std::optional<int> lstm_warmup; // default min(10, epochs / 2)
    double lstm_min_lr = 1e-5;
    double lstm_clip = 5.0;
};

struct EvaluationOptions {
    double alpha = 0.05;
    double std_floor = 1e-6;
    int sdp_window = 15;
};

inline std::vector<std::string> default_model_ids() {
    return {"ff-v", "ff-d", "ff-m", "ff-c", "lstm-v", "lstm-d", "lstm-m", "lstm-c", "naive", "hist", "gp"};
}

struct ExperimentConfig {
    DataSource data;
    std::vector<int> seasons{2014, 2015, 2016, 2017};
    std::vector<int> horizons{7, 14, 21};
    std::vector<std::string> models = default_model_ids();
    std::vector<std::uint64_t> seeds{1, 2, 3};
    int lookback = 28;
    int delay = 7;
    forecast::ForecasterSpec hyper; // hyperparameters shared by every neural model
    TrainingOptions training;
    data::PrepOptions prep;
    forecast::GpWindow gp;
    EvaluationOptions evaluation;
    std::filesystem::path out = "results";
    bool save_checkpoints = true;
    int jobs = 1;

    /// Spec for one model id with the shared hyperparameters applied.
    forecast::ForecasterSpec spec_for(const std::string& id) const {
        const auto parsed = forecast::ForecasterSpec::parse(id);
        forecast::ForecasterSpec s = hyper;
        s.architecture = parsed.architecture;
        s.uncertainty = parsed.uncertainty;
        s.use_queries = parsed.use_queries;
        s.batch_norm.reset();
        return s;
    }

    data::WindowShape shape(int gamma) const { return {lookback, delay, gamma}; }

    /// Training schedule for `spec`, seeded per run.
    train::TrainConfig train_config(const forecast::ForecasterSpec& spec, std::uint64_t seed) const {
        train::TrainConfig cfg;
        cfg.epochs = training.epochs;
        cfg.batch_size = training.batch_size;
        cfg.seed = seed;
        const int total = training.epochs > 0 ? training.epochs : 1;
        if (spec.architecture == forecast::Architecture::lstm) {
            const int warmup = training.lstm_warmup.value_or(std::min(10, training.epochs / 2));
            cfg.schedule = train::ScheduleSpec::cosine_warmup(training.lstm_lr, warmup, training.lstm_min_lr, total);
            cfg.clip_norm = training.lstm_clip;
        } else {
            cfg.schedule = train::ScheduleSpec::exponential(training.ff_lr, training.ff_decay, total);
        }
        return cfg;
    }

    void validate() const {
        auto fail = [](const std::string& m) { throw ConfigurationError("config: " + m); };
        if (data.kind != "synthetic" && data.kind != "csv") {
            fail("data.source must be \"synthetic\" or \"csv\"");
        }
        if (data.kind == "csv" && data.ili_csv.empty()) {
            fail("data.ili is required when data.source = \"csv\"");
        }
        if (data.kind == "synthetic") {
            data.synthetic.validate();
        }
        if (seasons.empty() || horizons.empty() || models.empty()) {
            fail("seasons, horizons and models must be nonempty");
        }
        if (seeds.empty()) {
            fail("seeds must be nonempty");
        }
        auto unique = [](auto v) {
            std::sort(v.begin(), v.end());
            return std::adjacent_find(v.begin(), v.end()) == v.end();
        };
        if (!unique(seasons) || !unique(horizons) || !unique(models) || !unique(seeds)) {
            fail("seasons, horizons, models and seeds must not repeat");
        }
        for (int g : horizons) {
            if (g < 1) {
                fail("horizons must be >= 1 day");
            }
        }
        if (lookback < 1 || delay < 0) {
            fail("lookback must be >= 1 and delay >= 0");
        }
        for (const auto& id : models) {
            spec_for(id).validate();
        }
        if (training.epochs < 1 || training.batch_size < 1) {
            fail("training.epochs and training.batch_size must be >= 1");
        }
        for (const auto& id : models) {
            const auto s = spec_for(id);
            if (s.neural()) {
                train_config(s, 0).validate();
            }
        }
        if (prep.smoothing_window < 1) {
            fail("preprocessing.smoothing_window must be >= 1");
        }
        if (!(prep.selection_threshold >= 0.0 && prep.selection_threshold <= 1.0)) {
            fail("preprocessing.selection_threshold must be in [0, 1]");
        }
        if (gp.days < 1 || gp.stride < 1) {
            fail("gp.window_days and gp.stride must be >= 1");
        }
        if (!(evaluation.alpha > 0.0 && evaluation.alpha < 1.0)) {
            fail("evaluation.alpha must be in (0, 1)");
        }
        if (!(evaluation.std_floor > 0.0) || evaluation.sdp_window < 1 || evaluation.sdp_window % 2 == 0) {
            fail("evaluation.std_floor must be > 0 and sdp_window a positive odd number");
        }
        if (jobs < 1) {
            fail("jobs must be >= 1");
        }
    }
};

namespace detail {

inline nlohmann::json synthetic_to_json(const data::SyntheticConfig& s) {
    nlohmann::json q = nlohmann::json::array();
    for (const auto& x : s.queries) {
        q.push_back({x.lag, x.response_noise, x.distractor});
    }
    return {{"seed", s.seed},
            {"start_year", s.start_year},
            {"years", s.years},
            {"peak_day_mean", s.peak_day_mean},
            {"peak_day_jitter", s.peak_day_jitter},
            {"peak_width", s.peak_width},
            {"peak_intensity_mean", s.peak_intensity_mean},
            {"peak_intensity_jitter", s.peak_intensity_jitter},
            {"baseline", s.baseline},
            {"noise_scale", s.noise_scale},
            {"query_drift", s.query_drift},
            {"queries", q}};
}

inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 1469598103934665603ULL) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline std::string file_digest(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) {
        return "missing:" + p.string();
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return hex64(fnv1a(ss.str()));
}

} // namespace detail

/// Fully resolved configuration as JSON. With `semantic_only`, fields that
/// cannot change any number (output location, parallelism, checkpoint
/// saving) are left out and CSV inputs are identified by content.
inline nlohmann::json config_to_json(const ExperimentConfig& c, bool semantic_only = false) {
    nlohmann::json j;
    nlohmann::json d{{"source", c.data.kind}};
    if (c.data.kind == "synthetic") {
        d["synthetic"] = detail::synthetic_to_json(c.data.synthetic);
    } else if (semantic_only) {
        d["ili"] = detail::file_digest(c.data.ili_csv);
        d["queries"] = c.data.queries_csv.empty() ? "" : detail::file_digest(c.data.queries_csv);
    } else {
        d["ili"] = c.data.ili_csv.string();
        d["queries"] = c.data.queries_csv.string();
    }
    j["data"] = d;
    j["seeds"] = c.seeds;
    j["protocol"] = {{"seasons", c.seasons}, {"horizons", c.horizons}, {"lookback", c.lookback}, {"delay", c.delay}};
    const auto& h = c.hyper;
    j["models"] = {{"ids", c.models},
                   {"samples", h.samples},
                   {"rho", h.rho},
                   {"rho_q", h.rho_q},
                   {"sigma_p", h.sigma_p},
                   {"sigma", h.sigma},
                   {"ff_hidden", h.ff_hidden},
                   {"lstm_hidden", h.lstm_hidden},
                   {"lstm_dense", h.lstm_dense},
                   {"batch_norm_momentum", h.bn_momentum},
                   {"batch_norm_epsilon", h.bn_epsilon}};
    const auto& t = c.training;
    j["training"] = {{"epochs", t.epochs},
                     {"batch_size", t.batch_size},
                     {"ff_lr", t.ff_lr},
                     {"ff_decay", t.ff_decay},
                     {"lstm_lr", t.lstm_lr},
                     {"lstm_warmup", t.lstm_warmup.value_or(std::min(10, t.epochs / 2))},
                     {"lstm_min_lr", t.lstm_min_lr},
                     {"lstm_clip", t.lstm_clip}};
    j["preprocessing"] = {{"smoothing_window", c.prep.smoothing_window},
                          {"smooth_before_normalize", c.prep.smooth_before_normalize},
                          {"selection_threshold", c.prep.selection_threshold}};
    j["gp"] = {{"window_days", c.gp.days}, {"stride", c.gp.stride}};
    j["evaluation"] = {{"alpha", c.evaluation.alpha},
                       {"std_floor", c.evaluation.std_floor},
                       {"sdp_window", c.evaluation.sdp_window}};
    if (!semantic_only) {
        j["output"] = {{"dir", c.out.string()}, {"save_checkpoints", c.save_checkpoints}};
        j["jobs"] = c.jobs;
    }
    return j;
}

/// 16-hex-digit FNV-1a hash of the semantic configuration. Keys are sorted
/// and numbers printed exactly, so equal settings hash equally however the
/// TOML spelled them.
inline std::string config_hash(const ExperimentConfig& c) {
    return detail::hex64(detail::fnv1a(config_to_json(c, true).dump()));
}

namespace detail {

/// Reads typed values out of one TOML table and rejects unknown keys.
class TableReader {
public:
    TableReader(const toml::table* t, std::string path) : table_(t), path_(std::move(path)) {}

    bool has(const std::string& key) {
        seen_.insert(key);
        return table_ && table_->contains(key);
    }

    template <typename T>
    void get(const std::string& key, T& out) {
        if (!has(key)) {
            return;
        }
        const toml::node& n = *table_->get(key);
        if constexpr (std::is_same_v<T, bool>) {
            if (!n.is_boolean()) type_error(key, "a boolean");
            out = n.as_boolean()->get();
        } else if constexpr (std::is_same_v<T, std::string> || std::is_same_v<T, std::filesystem::path>) {
            if (!n.is_string()) type_error(key, "a string");
            out = n.as_string()->get();
        } else if constexpr (std::is_floating_point_v<T>) {
            if (n.is_integer()) {
                out = static_cast<T>(n.as_integer()->get());
            } else if (n.is_floating_point()) {
                out = static_cast<T>(n.as_floating_point()->get());
            } else {
                type_error(key, "a number");
            }
        } else if constexpr (std::is_integral_v<T>) {
            if (!n.is_integer()) type_error(key, "an integer");
            const auto v = n.as_integer()->get();
            if (std::is_unsigned_v<T> && v < 0) type_error(key, "a nonnegative integer");
            out = static_cast<T>(v);
        } else {
            get_array(key, n, out);
        }
    }

    template <typename T>
    void get(const std::string& key, std::optional<T>& out) {
        if (has(key)) {
            T v{};
            get(key, v);
            out = v;
        }
    }

    const toml::table* sub(const std::string& key) {
        if (!has(key)) {
            return nullptr;
        }
        const auto* t = table_->get(key)->as_table();
        if (!t) type_error(key, "a table");
        return t;
    }

    void finish() const {
        if (!table_) {
            return;
        }
        for (const auto& [k, v] : *table_) {
            if (!seen_.count(std::string(k.str()))) {
                throw ConfigurationError("config: unknown key '" + qualified(std::string(k.str())) + "'");
            }
        }
    }

private:
    template <typename T>
    void get_array(const std::string& key, const toml::node& n, std::vector<T>& out) {
        const auto* arr = n.as_array();
        if (!arr) type_error(key, "an array");
        out.clear();
        for (const auto& el : *arr) {
            if constexpr (std::is_same_v<T, std::string>) {
                if (!el.is_string()) type_error(key, "an array of strings");
                out.push_back(el.as_string()->get());
            } else {
                if (!el.is_integer()) type_error(key, "an array of integers");
                const auto v = el.as_integer()->get();
                if (std::is_unsigned_v<T> && v < 0) type_error(key, "an array of nonnegative integers");
                out.push_back(static_cast<T>(v));
            }
        }
    }

    std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    [[noreturn]] void type_error(const std::string& key, const std::string& what) const {
        throw ConfigurationError("config: '" + qualified(key) + "' must be " + what);
    }

    const toml::table* table_;
    std::string path_;
    std::set<std::string> seen_;
};

} // namespace detail

/// Parses TOML text. Relative CSV paths resolve against `base_dir`.
inline ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {}) {
    toml::table root;
    try {
        root = toml::parse(text);
    } catch (const toml::parse_error& e) {
        throw ParseError(std::string("config: ") + std::string(e.description()),
                         static_cast<std::size_t>(e.source().begin.line));
    }
    ExperimentConfig c;
    detail::TableReader top(&root, "");
    top.get("seeds", c.seeds);
    top.get("jobs", c.jobs);

    detail::TableReader data(top.sub("data"), "data");
    data.get("source", c.data.kind);
    data.get("ili", c.data.ili_csv);
    data.get("queries", c.data.queries_csv);
    detail::TableReader syn(data.sub("synthetic"), "data.synthetic");
    auto& s = c.data.synthetic;
    syn.get("seed", s.seed);
    syn.get("start_year", s.start_year);
    syn.get("years", s.years);
    syn.get("peak_day_mean", s.peak_day_mean);
    syn.get("peak_day_jitter", s.peak_day_jitter);
    syn.get("peak_width", s.peak_width);
    syn.get("peak_intensity_mean", s.peak_intensity_mean);
    syn.get("peak_intensity_jitter", s.peak_intensity_jitter);
    syn.get("baseline", s.baseline);
    syn.get("noise_scale", s.noise_scale);
    syn.get("query_drift", s.query_drift);
    syn.finish();
    data.finish();
    for (auto* p : {&c.data.ili_csv, &c.data.queries_csv}) {
        if (!p->empty() && p->is_relative() && !base_dir.empty()) {
            *p = base_dir / *p;
        }
    }

    detail::TableReader proto(top.sub("protocol"), "protocol");
    proto.get("seasons", c.seasons);
    proto.get("horizons", c.horizons);
    proto.get("lookback", c.lookback);
    proto.get("delay", c.delay);
    proto.finish();

    detail::TableReader models(top.sub("models"), "models");
    auto& h = c.hyper;
    models.get("ids", c.models);
    models.get("samples", h.samples);
    models.get("rho", h.rho);
    models.get("rho_q", h.rho_q);
    models.get("sigma_p", h.sigma_p);
    models.get("sigma", h.sigma);
    models.get("ff_hidden", h.ff_hidden);
    models.get("lstm_hidden", h.lstm_hidden);
    models.get("lstm_dense", h.lstm_dense);
    models.get("batch_norm_momentum", h.bn_momentum);
    models.get("batch_norm_epsilon", h.bn_epsilon);
    models.finish();

    detail::TableReader tr(top.sub("training"), "training");
    auto& t = c.training;
    tr.get("epochs", t.epochs);
    tr.get("batch_size", t.batch_size);
    tr.get("ff_lr", t.ff_lr);
    tr.get("ff_decay", t.ff_decay);
    tr.get("lstm_lr", t.lstm_lr);
    tr.get("lstm_warmup", t.lstm_warmup);
    tr.get("lstm_min_lr", t.lstm_min_lr);
    tr.get("lstm_clip", t.lstm_clip);
    tr.finish();

    detail::TableReader pre(top.sub("preprocessing"), "preprocessing");
    pre.get("smoothing_window", c.prep.smoothing_window);
    pre.get("smooth_before_normalize", c.prep.smooth_before_normalize);
    pre.get("selection_threshold", c.prep.selection_threshold);
    pre.finish();

    detail::TableReader gp(top.sub("gp"), "gp");
    gp.get("window_days", c.gp.days);
    gp.get("stride", c.gp.stride);
    gp.finish();

    detail::TableReader ev(top.sub("evaluation"), "evaluation");
    ev.get("alpha", c.evaluation.alpha);
    ev.get("std_floor", c.evaluation.std_floor);
    ev.get("sdp_window", c.evaluation.sdp_window);
    ev.finish();

    detail::TableReader out(top.sub("output"), "output");
    out.get("dir", c.out);
    out.get("save_checkpoints", c.save_checkpoints);
    out.finish();

    top.finish();
    c.validate();
    return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigurationError("cannot open config " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.parent_path());
}

} // namespace ilicast::harness
