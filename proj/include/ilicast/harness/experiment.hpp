#pragma once

// Rolling-season experiment: for every (season, horizon, model, seed) fit the
// preprocessing on pre-season data, train on an expanding window, forecast
// each day of the season and score it. Runs are independent and may execute
// in parallel; every run derives its random streams from its own key, so the
// worker count never changes a number.

#include "ilicast/core/log.hpp"
#include "ilicast/data/csv.hpp"
#include "ilicast/data/prep.hpp"
#include "ilicast/data/synthetic.hpp"
#include "ilicast/data/transforms.hpp"
#include "ilicast/data/windows.hpp"
#include "ilicast/forecast/baselines.hpp"
#include "ilicast/forecast/checkpoint.hpp"
#include "ilicast/forecast/gp.hpp"
#include "ilicast/forecast/neural.hpp"
#include "ilicast/harness/artifacts.hpp"
#include "ilicast/harness/config.hpp"
#include "ilicast/metrics/report.hpp"
#include "ilicast/version.hpp"

#include <json.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>
#include <thread>
#include <tuple>

namespace ilicast::harness {

struct Dataset {
    data::DailySeries ili;   // daily, never normalized
    data::QueryPanel queries; // raw
};

inline Dataset load_dataset(const DataSource& src) {
    if (src.kind == "synthetic") {
        const auto d = data::synthesize(src.synthetic);
        return {data::weekly_to_daily(d.ili), d.panel};
    }
    Dataset out{data::weekly_to_daily(data::load_weekly_csv(src.ili_csv)), {}};
    if (!src.queries_csv.empty()) {
        out.queries = data::load_panel_csv(src.queries_csv);
    }
    return out;
}

inline data::Date season_end(int season) { return data::season_start(season + 1) - data::Days{1}; }

/// One cell of the grid. Baselines are deterministic and run once per
/// (season, horizon), so their seed is empty.
struct RunKey {
    int season = 0;
    int gamma = 0;
    std::string model;
    std::optional<std::uint64_t> seed;

    std::string label() const {
        return model + " season " + std::to_string(season) + " gamma " + std::to_string(gamma) +
               (seed ? " seed " + std::to_string(*seed) : "");
    }

    std::filesystem::path dir() const {
        std::filesystem::path p = std::filesystem::path("runs") / std::to_string(season) /
                                  ("g" + std::to_string(gamma)) / model;
        return seed ? p / ("seed" + std::to_string(*seed)) : p;
    }

    bool operator==(const RunKey&) const = default;
};

/// Grid in a fixed order: season, horizon, model, seed.
inline std::vector<RunKey> enumerate_runs(const ExperimentConfig& c) {
    std::vector<RunKey> keys;
    for (int s : c.seasons) {
        for (int g : c.horizons) {
            for (const auto& m : c.models) {
                if (c.spec_for(m).neural()) {
                    for (auto seed : c.seeds) {
                        keys.push_back({s, g, m, seed});
                    }
                } else {
                    keys.push_back({s, g, m, std::nullopt});
                }
            }
        }
    }
    return keys;
}

/// Seed of a run, a hash of its key.
inline std::uint64_t run_seed(const RunKey& k) {
    const std::string text = k.model + "|" + std::to_string(k.season) + "|" + std::to_string(k.gamma) + "|" +
                             (k.seed ? std::to_string(*k.seed) : "-");
    return detail::fnv1a(text);
}

/// Date boundaries actually used by a run, for the leakage audit.
struct RunBoundaries {
    data::Date season_start{};
    data::Date season_end{};
    std::size_t train_samples = 0;
    std::optional<data::Date> train_first_target;
    std::optional<data::Date> train_last_target;
    std::optional<data::Date> prep_fit_from;
    std::optional<data::Date> prep_fit_to;
    std::vector<std::string> query_ids;
    data::Date test_first_target{};
    data::Date test_last_target{};
};

struct RunRecord {
    RunKey key;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    double seconds = 0.0;
    RunBoundaries bounds;
    std::map<std::string, std::filesystem::path> artifacts; // relative to the output dir
    forecast::ProbabilisticForecast forecast;              // kept in memory, not serialized
    metrics::MetricsRow metrics;
};

struct RunManifest {
    std::string config_hash;
    std::string version = kVersion;
    double wall_clock_seconds = 0.0;
    std::filesystem::path out;
    std::vector<RunRecord> runs;
    std::map<std::string, std::filesystem::path> tables; // relative to `out`

    std::size_t failures() const {
        return static_cast<std::size_t>(std::count_if(runs.begin(), runs.end(), [](const auto& r) { return !r.ok; }));
    }
};

namespace detail {

inline nlohmann::json opt_date(const std::optional<data::Date>& d) {
    return d ? nlohmann::json(data::format_date(*d)) : nlohmann::json(nullptr);
}

inline std::optional<data::Date> date_opt(const nlohmann::json& j) {
    if (j.is_null()) {
        return std::nullopt;
    }
    return data::parse_date(j.get<std::string>());
}

inline nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

} // namespace detail

inline nlohmann::json metrics_to_json(const metrics::MetricsRow& row) {
    nlohmann::json j{{"model", row.model}, {"gamma", row.gamma}};
    for (const auto& name : metrics::metric_names()) {
        const auto v = metrics::metric_value(row, name);
        j[name] = v ? detail::finite_or_null(*v) : nlohmann::json(nullptr);
    }
    j["probabilistic"] = row.probabilistic();
    return j;
}

inline metrics::MetricsRow metrics_from_json(const nlohmann::json& j) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    auto num = [&](const char* k) { return j.at(k).is_null() ? nan : j.at(k).get<double>(); };
    metrics::MetricsRow row;
    row.model = j.at("model").get<std::string>();
    row.gamma = j.at("gamma").get<int>();
    row.mae = num("MAE");
    row.rmse = num("RMSE");
    row.smape = num("SMAPE");
    row.r = num("r");
    row.sdp = num("SDP");
    if (j.at("probabilistic").get<bool>()) {
        row.crps = num("CRPS");
        row.nll = num("NLL");
    }
    return row;
}

inline nlohmann::json run_to_json(const RunRecord& r) {
    nlohmann::json a = nlohmann::json::object();
    for (const auto& [k, p] : r.artifacts) {
        a[k] = p.generic_string();
    }
    const auto& b = r.bounds;
    return {{"season", r.key.season},
            {"gamma", r.key.gamma},
            {"model", r.key.model},
            {"seed", r.key.seed ? nlohmann::json(*r.key.seed) : nlohmann::json(nullptr)},
            {"run_seed", r.seed},
            {"ok", r.ok},
            {"error", r.error},
            {"seconds", r.seconds},
            {"artifacts", a},
            {"boundaries",
             {{"season_start", data::format_date(b.season_start)},
              {"season_end", data::format_date(b.season_end)},
              {"train_samples", b.train_samples},
              {"train_first_target", detail::opt_date(b.train_first_target)},
              {"train_last_target", detail::opt_date(b.train_last_target)},
              {"prep_fit_from", detail::opt_date(b.prep_fit_from)},
              {"prep_fit_to", detail::opt_date(b.prep_fit_to)},
              {"query_ids", b.query_ids},
              {"test_first_target", data::format_date(b.test_first_target)},
              {"test_last_target", data::format_date(b.test_last_target)}}}};
}

inline RunRecord run_from_json(const nlohmann::json& j) {
    RunRecord r;
    r.key.season = j.at("season").get<int>();
    r.key.gamma = j.at("gamma").get<int>();
    r.key.model = j.at("model").get<std::string>();
    if (!j.at("seed").is_null()) {
        r.key.seed = j.at("seed").get<std::uint64_t>();
    }
    r.seed = j.at("run_seed").get<std::uint64_t>();
    r.ok = j.at("ok").get<bool>();
    r.error = j.at("error").get<std::string>();
    r.seconds = j.at("seconds").get<double>();
    for (const auto& [k, v] : j.at("artifacts").items()) {
        r.artifacts[k] = v.get<std::string>();
    }
    const auto& b = j.at("boundaries");
    r.bounds.season_start = data::parse_date(b.at("season_start").get<std::string>());
    r.bounds.season_end = data::parse_date(b.at("season_end").get<std::string>());
    r.bounds.train_samples = b.at("train_samples").get<std::size_t>();
    r.bounds.train_first_target = detail::date_opt(b.at("train_first_target"));
    r.bounds.train_last_target = detail::date_opt(b.at("train_last_target"));
    r.bounds.prep_fit_from = detail::date_opt(b.at("prep_fit_from"));
    r.bounds.prep_fit_to = detail::date_opt(b.at("prep_fit_to"));
    r.bounds.query_ids = b.at("query_ids").get<std::vector<std::string>>();
    r.bounds.test_first_target = data::parse_date(b.at("test_first_target").get<std::string>());
    r.bounds.test_last_target = data::parse_date(b.at("test_last_target").get<std::string>());
    return r;
}

inline nlohmann::json manifest_to_json(const RunManifest& m) {
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& r : m.runs) {
        runs.push_back(run_to_json(r));
    }
    nlohmann::json tables = nlohmann::json::object();
    for (const auto& [k, p] : m.tables) {
        tables[k] = p.generic_string();
    }
    return {{"format", "ilicast-manifest"},
            {"config_hash", m.config_hash},
            {"version", m.version},
            {"wall_clock_seconds", m.wall_clock_seconds},
            {"failures", m.failures()},
            {"runs", runs},
            {"tables", tables}};
}

inline RunManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IntegrityError("cannot open manifest " + path.string());
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw IntegrityError("manifest " + path.string() + ": " + e.what());
    }
    if (j.value("format", "") != "ilicast-manifest") {
        throw IntegrityError(path.string() + " is not an ilicast manifest");
    }
    RunManifest m;
    m.out = path.parent_path();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.version = j.at("version").get<std::string>();
    m.wall_clock_seconds = j.at("wall_clock_seconds").get<double>();
    for (const auto& r : j.at("runs")) {
        m.runs.push_back(run_from_json(r));
    }
    for (const auto& [k, v] : j.at("tables").items()) {
        m.tables[k] = v.get<std::string>();
    }
    return m;
}

/// Inputs shared by all runs of one (season, horizon, query usage).
struct SliceInputs {
    data::PrepState prep;
    data::WindowedDataset train;
    data::WindowedDataset test;
};

/// Training targets run from the first origin with a full window up to the
/// day before the season; test targets cover the season.
inline SliceInputs prepare_slice(const Dataset& d, const ExperimentConfig& c, int season, int gamma, bool use_queries) {
    const data::Date start = data::season_start(season);
    const data::Date end = season_end(season);
    const data::Date before = start - data::Days{1};
    SliceInputs s;
    data::PrepOptions opts = c.prep;
    opts.use_queries = use_queries && !d.queries.empty();
    data::Date fit_from = d.ili.start();
    if (opts.use_queries) {
        fit_from = std::max(fit_from, d.queries[0].start());
    }
    s.prep = data::fit_prep(d.queries, d.ili, fit_from, before, opts);
    const auto panel = s.prep.apply(d.queries);
    const data::WindowShape shape = c.shape(gamma);
    data::Date first_origin = d.ili.start() + data::Days{c.lookback - 1 + c.delay};
    if (!panel.empty()) {
        first_origin = std::max(first_origin, panel[0].start() + data::Days{c.lookback - 1});
    }
    const data::Date last_origin = before - data::Days{gamma};
    if (last_origin < first_origin) {
        throw InsufficientData("season " + std::to_string(season) + ": no training data before " +
                               data::format_date(start));
    }
    s.train = data::build_windows(d.ili, panel, shape, first_origin, last_origin);
    s.test = data::build_windows(d.ili, panel, shape, start - data::Days{gamma}, end - data::Days{gamma});
    return s;
}

/// Checks that the data cover every test season plus its lead-in.
inline void check_coverage(const Dataset& d, const ExperimentConfig& c) {
    const int max_gamma = *std::max_element(c.horizons.begin(), c.horizons.end());
    for (int season : c.seasons) {
        const data::Date need_from = data::season_start(season) - data::Days{max_gamma + c.lookback - 1 + c.delay};
        const data::Date need_to = season_end(season);
        auto covers = [&](const data::DailySeries& s) { return s.start() <= need_from && s.last() >= need_to; };
        if (!covers(d.ili)) {
            throw ConfigurationError("config: ILI data " + d.ili.range_text() + " do not cover season " +
                                     std::to_string(season) + " with its lead-in (" + data::format_date(need_from) +
                                     ".." + data::format_date(need_to) + ")");
        }
        if (!d.queries.empty() && !covers(d.queries[0])) {
            throw ConfigurationError("config: query data " + d.queries[0].range_text() + " do not cover season " +
                                     std::to_string(season) + " with its lead-in");
        }
    }
}

namespace detail {

inline forecast::ProbabilisticForecast attach_truth(forecast::ProbabilisticForecast f, const data::DailySeries& ili) {
    f.truth.clear();
    for (const auto& d : f.dates) {
        f.truth.push_back(ili.at(d));
    }
    return f;
}

inline int cost_rank(const forecast::ForecasterSpec& s) {
    switch (s.architecture) {
    case forecast::Architecture::lstm: return 0;
    case forecast::Architecture::ff: return 1;
    case forecast::Architecture::gp: return 2;
    default: return 3;
    }
}

inline void write_json(const std::filesystem::path& p, const nlohmann::json& j) {
    data::detail::write_atomically(p, j.dump(2) + "\n");
}

} // namespace detail

/// Runs one grid cell and writes its artifacts. Throws on failure.
inline void execute_run(RunRecord& rec, const Dataset& d, const ExperimentConfig& c,
                        const std::map<std::tuple<int, int, bool>, SliceInputs>& slices) {
    const auto& k = rec.key;
    const auto spec = c.spec_for(k.model);
    const data::Date start = data::season_start(k.season);
    const data::Date end = season_end(k.season);
    auto& b = rec.bounds;
    b.season_start = start;
    b.season_end = end;
    forecast::ProbabilisticForecast f;
    std::optional<nlohmann::json> checkpoint;
    if (spec.neural()) {
        const auto& s = slices.at({k.season, k.gamma, spec.use_queries});
        b.train_samples = s.train.size();
        for (const auto& smp : s.train.samples) {
            b.train_first_target = b.train_first_target ? std::min(*b.train_first_target, smp.target) : smp.target;
            b.train_last_target = b.train_last_target ? std::max(*b.train_last_target, smp.target) : smp.target;
        }
        b.prep_fit_from = s.prep.fit_from;
        b.prep_fit_to = s.prep.fit_to;
        b.query_ids = s.prep.query_ids;
        forecast::NeuralForecaster model(spec, static_cast<nn::Index>(s.train.input_rows()), c.lookback, rec.seed);
        train::train(model, s.train, s.train.size(), c.train_config(spec, rec.seed + 1));
        f = model.predict(s.test, spec.samples, rec.seed + 2);
        if (c.save_checkpoints) {
            checkpoint = forecast::checkpoint_to_json(model, &s.prep, c.shape(k.gamma));
        }
    } else {
        const data::Date from = start - data::Days{k.gamma};
        const data::Date to = end - data::Days{k.gamma};
        switch (spec.architecture) {
        case forecast::Architecture::naive: f = forecast::naive_forecast(d.ili, from, to, k.gamma, c.delay); break;
        case forecast::Architecture::historical: f = forecast::historical_forecast(d.ili, from, to, k.gamma); break;
        default: f = forecast::gp_forecast(d.ili, from, to, k.gamma, c.delay, c.gp); break;
        }
        f = detail::attach_truth(std::move(f), d.ili);
    }
    b.test_first_target = f.dates.front();
    b.test_last_target = f.dates.back();
    rec.metrics = metrics::score_forecast(f, k.model, k.gamma, c.evaluation.std_floor,
                                          static_cast<std::size_t>(c.evaluation.sdp_window));
    const auto dir = k.dir();
    save_forecast_csv(f, c.out / dir / "forecast.csv");
    rec.artifacts["forecast"] = dir / "forecast.csv";
    auto mj = metrics_to_json(rec.metrics);
    mj["season"] = k.season;
    mj["seed"] = k.seed ? nlohmann::json(*k.seed) : nlohmann::json(nullptr);
    detail::write_json(c.out / dir / "metrics.json", mj);
    rec.artifacts["metrics"] = dir / "metrics.json";
    if (checkpoint) {
        data::detail::write_atomically(c.out / dir / "checkpoint.json", checkpoint->dump() + "\n");
        rec.artifacts["checkpoint"] = dir / "checkpoint.json";
    }
    rec.forecast = std::move(f);
}

/// Runs the whole grid and writes per-run artifacts plus manifest.json.
/// Failures are recorded per run; the rest proceed. Tables come from
/// emit_tables.
inline RunManifest run_experiment(const ExperimentConfig& c) {
    c.validate();
    const auto t0 = std::chrono::steady_clock::now();
    RunManifest m;
    m.config_hash = config_hash(c);
    m.out = c.out;
    const Dataset d = load_dataset(c.data);
    check_coverage(d, c);

    std::map<std::tuple<int, int, bool>, SliceInputs> slices;
    for (const auto& id : c.models) {
        const auto spec = c.spec_for(id);
        if (!spec.neural()) {
            continue;
        }
        for (int s : c.seasons) {
            for (int g : c.horizons) {
                const std::tuple key{s, g, spec.use_queries};
                if (!slices.count(key)) {
                    slices.emplace(key, prepare_slice(d, c, s, g, spec.use_queries));
                }
            }
        }
    }

    for (const auto& k : enumerate_runs(c)) {
        RunRecord r;
        r.key = k;
        r.seed = run_seed(k);
        m.runs.push_back(std::move(r));
    }
    // Long runs first so the workers finish together; order never affects results.
    std::vector<std::size_t> order(m.runs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return detail::cost_rank(c.spec_for(m.runs[a].key.model)) < detail::cost_rank(c.spec_for(m.runs[b].key.model));
    });

    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> done{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < order.size(); i = next++) {
            RunRecord& rec = m.runs[order[i]];
            const auto r0 = std::chrono::steady_clock::now();
            try {
                execute_run(rec, d, c, slices);
                rec.ok = true;
            } catch (const std::exception& e) {
                rec.ok = false;
                rec.error = e.what();
                log::warn(rec.key.label() + " failed: " + e.what());
            }
            rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - r0).count();
            const std::size_t n = ++done;
            log::info("[" + std::to_string(n) + "/" + std::to_string(order.size()) + "] " + rec.key.label() +
                      (rec.ok ? "" : " FAILED") + " (" + std::to_string(rec.seconds) + " s)");
        }
    };
    const int workers = std::max(1, std::min<int>(c.jobs, static_cast<int>(order.size())));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back(worker);
        }
        for (auto& t : pool) {
            t.join();
        }
    }

    detail::write_json(c.out / "config.json", config_to_json(c));
    m.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    detail::write_json(c.out / "manifest.json", manifest_to_json(m));
    return m;
}

struct AuditReport {
    std::vector<std::string> violations;
    std::size_t runs_checked = 0;

    bool ok() const { return violations.empty(); }
};

/// Leakage and integrity audit: every training target precedes the season,
/// preprocessing statistics were fit before it, the test covers exactly the
/// season, and every recorded artifact exists.
inline AuditReport audit_manifest(const RunManifest& m) {
    AuditReport a;
    for (const auto& r : m.runs) {
        if (!r.ok) {
            continue;
        }
        ++a.runs_checked;
        const auto& b = r.bounds;
        const std::string who = r.key.label() + ": ";
        if (b.train_samples > 0 && (!b.train_last_target || *b.train_last_target >= b.season_start)) {
            a.violations.push_back(who + "training target on or after the season start");
        }
        if (b.prep_fit_to && *b.prep_fit_to >= b.season_start) {
            a.violations.push_back(who + "preprocessing fit on data from the test season");
        }
        if (b.train_samples > 0 && !b.prep_fit_to) {
            a.violations.push_back(who + "no record of the preprocessing fit range");
        }
        if (b.test_first_target != b.season_start || b.test_last_target != b.season_end) {
            a.violations.push_back(who + "test targets do not span the season");
        }
        for (const auto& [name, p] : r.artifacts) {
            if (!std::filesystem::exists(m.out / p)) {
                a.violations.push_back(who + "missing " + name + " artifact " + p.generic_string());
            }
        }
    }
    for (const auto& [name, p] : m.tables) {
        if (!std::filesystem::exists(m.out / p)) {
            a.violations.push_back("missing table " + name + " at " + p.generic_string());
        }
    }
    return a;
}

} // namespace ilicast::harness
