// ilicast command line: synth, train, forecast, evaluate, experiment, calibration.
//
// Exit codes: 0 success, 1 validation or run failure, 2 usage error.

#include "ilicast/core/alloc.hpp"
#include "ilicast/harness/config.hpp"
#include "ilicast/harness/experiment.hpp"
#include "ilicast/harness/tables.hpp"
#include "ilicast/metrics/calibration.hpp"
#include "ilicast/version.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

using namespace ilicast;
namespace fs = std::filesystem;

namespace {

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<int> gamma;
    std::optional<int> season;
    std::string model;
    std::string out;
    std::optional<int> jobs;
    std::string checkpoint;
    std::vector<std::string> forecasts;
    std::optional<int> samples;
};

harness::ExperimentConfig base_config(const Options& o) {
    auto c = o.config.empty() ? harness::ExperimentConfig{} : harness::load_config(o.config);
    if (!o.out.empty()) {
        c.out = o.out;
    }
    if (o.jobs) {
        c.jobs = *o.jobs;
    }
    c.validate();
    return c;
}

int synth(const Options& o) {
    auto c = base_config(o);
    auto cfg = c.data.synthetic;
    if (o.seed) {
        cfg.seed = *o.seed;
    }
    const fs::path out = o.out.empty() ? fs::path("synthetic") : fs::path(o.out);
    const auto d = data::synthesize(cfg);
    data::save_csv(d.ili, out / "ili.csv");
    data::save_csv(d.panel, out / "queries.csv");
    std::string peaks = "season,peak_date\n";
    for (std::size_t s = 0; s < d.peak_dates.size(); ++s) {
        peaks += std::to_string(cfg.start_year + static_cast<int>(s)) + "," + data::format_date(d.peak_dates[s]) + "\n";
    }
    data::detail::write_atomically(out / "peaks.csv", peaks);
    std::cout << "wrote " << d.ili.size() << " weeks of ILI and " << d.panel.size() << " queries to " << out.string()
              << "\n";
    return 0;
}

int train_one(const Options& o) {
    auto c = base_config(o);
    if (o.model.empty() || !o.gamma || !o.season) {
        throw ConfigurationError("train needs --model, --gamma and --season");
    }
    const auto spec = c.spec_for(o.model);
    if (!spec.neural()) {
        throw ConfigurationError("train: '" + o.model + "' has no trainable parameters");
    }
    c.horizons = {*o.gamma};
    c.seasons = {*o.season};
    c.validate();
    const auto d = harness::load_dataset(c.data);
    harness::check_coverage(d, c);
    const auto slice = harness::prepare_slice(d, c, *o.season, *o.gamma, spec.use_queries);
    const std::uint64_t seed = o.seed.value_or(1);
    forecast::NeuralForecaster model(spec, static_cast<nn::Index>(slice.train.input_rows()), c.lookback, seed);
    const auto result = train::train(model, slice.train, slice.train.size(), c.train_config(spec, seed + 1));
    const fs::path out = o.out.empty() ? fs::path(".") : fs::path(o.out);
    forecast::save_checkpoint(out / "checkpoint.json", model, &slice.prep, c.shape(*o.gamma));
    std::string trace = "epoch,loss\n";
    for (std::size_t e = 0; e < result.loss_trace.size(); ++e) {
        trace += std::to_string(e) + "," + data::format_number(result.loss_trace[e]) + "\n";
    }
    data::detail::write_atomically(out / "loss.csv", trace);
    std::cout << o.model << ": " << slice.train.size() << " samples, " << result.steps << " steps, final loss "
              << data::format_number(result.loss_trace.empty() ? 0.0 : result.loss_trace.back()) << "\n"
              << "checkpoint written to " << (out / "checkpoint.json").string() << "\n";
    return 0;
}

int forecast_cmd(const Options& o) {
    if (o.checkpoint.empty() || !o.season) {
        throw ConfigurationError("forecast needs --checkpoint and --season");
    }
    auto c = base_config(o);
    auto ck = forecast::load_checkpoint(o.checkpoint);
    const int gamma = ck.shape.horizon;
    if (o.gamma && *o.gamma != gamma) {
        throw ConfigurationError("forecast: checkpoint was trained for gamma " + std::to_string(gamma));
    }
    if (ck.shape.lookback != ck.model.lookback()) {
        throw ConfigurationError("forecast: checkpoint window shape disagrees with the model");
    }
    c.seasons = {*o.season};
    c.horizons = {gamma};
    c.lookback = ck.shape.lookback;
    c.delay = ck.shape.delay;
    const auto d = harness::load_dataset(c.data);
    harness::check_coverage(d, c);
    const auto panel = ck.prep ? ck.prep->apply(d.queries) : data::QueryPanel{};
    const auto start = data::season_start(*o.season);
    const auto test = data::build_windows(d.ili, panel, ck.shape, start - data::Days{gamma},
                                          harness::season_end(*o.season) - data::Days{gamma});
    if (static_cast<nn::Index>(test.input_rows()) != ck.model.input_rows()) {
        throw ConfigurationError("forecast: data provide " + std::to_string(test.input_rows()) +
                                 " input rows, checkpoint expects " + std::to_string(ck.model.input_rows()));
    }
    const int k = o.samples.value_or(ck.model.spec().samples);
    const auto f = ck.model.predict(test, k, o.seed.value_or(1));
    const fs::path out = o.out.empty() ? fs::path("forecast.csv") : fs::path(o.out);
    harness::save_forecast_csv(f, out);
    std::cout << "wrote " << f.size() << " forecasts to " << out.string() << "\n";
    return 0;
}

std::string cell(const std::optional<double>& v) {
    if (!v) {
        return "--";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", *v);
    return buf;
}

int evaluate(const Options& o) {
    if (o.forecasts.empty()) {
        throw ConfigurationError("evaluate needs at least one --forecast");
    }
    nlohmann::json rows = nlohmann::json::array();
    std::printf("%-24s %5s", "model", "gamma");
    for (const auto& n : metrics::metric_names()) {
        std::printf(" %10s", n.c_str());
    }
    std::printf("\n");
    for (const auto& path : o.forecasts) {
        const auto f = harness::load_forecast_csv(path);
        if (f.truth.size() != f.size()) {
            throw InvalidInput(path + ": forecast has no truth column to score against");
        }
        const std::string name = !o.model.empty() ? o.model : fs::path(path).parent_path().filename().string();
        const auto row = metrics::score_forecast(f, name.empty() ? path : name, o.gamma.value_or(0));
        std::printf("%-24s %5d", row.model.c_str(), row.gamma);
        for (const auto& n : metrics::metric_names()) {
            std::printf(" %10s", cell(metrics::metric_value(row, n)).c_str());
        }
        std::printf("\n");
        auto j = harness::metrics_to_json(row);
        j["forecast"] = path;
        rows.push_back(j);
    }
    if (!o.out.empty()) {
        data::detail::write_atomically(o.out, rows.dump(2) + "\n");
    }
    return 0;
}

int calibration(const Options& o) {
    if (o.forecasts.size() != 1) {
        throw ConfigurationError("calibration needs exactly one --forecast");
    }
    const auto f = harness::load_forecast_csv(o.forecasts[0]);
    if (!f.std) {
        throw InvalidInput(o.forecasts[0] + ": point forecasts have no calibration curve");
    }
    if (f.truth.size() != f.size()) {
        throw InvalidInput(o.forecasts[0] + ": forecast has no truth column");
    }
    std::vector<double> sd(*f.std);
    for (double& s : sd) {
        s = std::max(s, forecast::kStdFloor);
    }
    const auto curve = metrics::calibration_curve(f.truth, f.mean, sd);
    std::string out = "level,coverage\n";
    for (std::size_t i = 0; i < curve.levels.size(); ++i) {
        out += data::format_number(curve.levels[i]) + "," + data::format_number(curve.coverage[i]) + "\n";
    }
    if (o.out.empty()) {
        std::cout << out;
    } else {
        data::detail::write_atomically(o.out, out);
    }
    return 0;
}

int experiment(const Options& o) {
    const auto c = base_config(o);
    auto m = harness::run_experiment(c);
    harness::emit_tables(m, c);
    const auto audit = harness::audit_manifest(m);
    std::cout << m.runs.size() << " runs, " << m.failures() << " failed, " << m.wall_clock_seconds
              << " s; config " << m.config_hash << "; results in " << c.out.string() << "\n";
    for (const auto& r : m.runs) {
        if (!r.ok) {
            std::cerr << "failed: " << r.key.label() << ": " << r.error << "\n";
        }
    }
    for (const auto& v : audit.violations) {
        std::cerr << "audit: " << v << "\n";
    }
    std::cout << "leakage audit: " << (audit.ok() ? "passed" : "FAILED") << " (" << audit.runs_checked
              << " runs)\n";
    return m.failures() == 0 && audit.ok() ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    tune_allocator();
    CLI::App app{"Probabilistic ILI forecasting toolkit"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    bool verbose = false;
    bool quiet = false;
    app.add_flag("-v,--verbose", verbose, "Log progress");
    app.add_flag("-q,--quiet", quiet, "Suppress warnings");
    Options o;

    auto add_config = [&](CLI::App* s) { s->add_option("--config", o.config, "TOML configuration")->check(CLI::ExistingFile); };
    auto add_out = [&](CLI::App* s, const std::string& what) { s->add_option("--out", o.out, what); };

    auto* s_synth = app.add_subcommand("synth", "Generate a synthetic data set");
    add_config(s_synth);
    s_synth->add_option("--seed", o.seed, "Generator seed");
    add_out(s_synth, "Output directory");

    auto* s_train = app.add_subcommand("train", "Train one neural model for one season");
    add_config(s_train);
    s_train->add_option("--model", o.model, "Model id, e.g. lstm-c")->required();
    s_train->add_option("--gamma", o.gamma, "Horizon in days")->required();
    s_train->add_option("--season", o.season, "Test season (start year); training ends before it")->required();
    s_train->add_option("--seed", o.seed, "Run seed");
    add_out(s_train, "Directory for checkpoint.json and loss.csv");

    auto* s_forecast = app.add_subcommand("forecast", "Forecast a season from a checkpoint");
    add_config(s_forecast);
    s_forecast->add_option("--checkpoint", o.checkpoint, "checkpoint.json")->required()->check(CLI::ExistingFile);
    s_forecast->add_option("--season", o.season, "Season to forecast")->required();
    s_forecast->add_option("--gamma", o.gamma, "Expected horizon (checked against the checkpoint)");
    s_forecast->add_option("--seed", o.seed, "Sampling seed");
    s_forecast->add_option("--samples", o.samples, "Posterior draws K");
    add_out(s_forecast, "Forecast CSV path");

    auto* s_eval = app.add_subcommand("evaluate", "Score forecast CSVs");
    s_eval->add_option("--forecast", o.forecasts, "Forecast CSV (date,truth,mean,std)")->required()->check(CLI::ExistingFile);
    s_eval->add_option("--model", o.model, "Label for the table");
    s_eval->add_option("--gamma", o.gamma, "Horizon label");
    add_out(s_eval, "Write the scores as JSON");

    auto* s_exp = app.add_subcommand("experiment", "Run the rolling-season protocol");
    add_config(s_exp);
    s_exp->add_option("--jobs", o.jobs, "Parallel workers")->check(CLI::PositiveNumber);
    add_out(s_exp, "Output directory");

    auto* s_cal = app.add_subcommand("calibration", "Calibration curve of a forecast CSV");
    s_cal->add_option("--forecast", o.forecasts, "Forecast CSV")->required()->check(CLI::ExistingFile);
    add_out(s_cal, "Curve CSV path (stdout if omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    log::set_level(quiet ? log::Level::quiet : verbose ? log::Level::info : log::Level::warn);

    try {
        if (s_synth->parsed()) return synth(o);
        if (s_train->parsed()) return train_one(o);
        if (s_forecast->parsed()) return forecast_cmd(o);
        if (s_eval->parsed()) return evaluate(o);
        if (s_exp->parsed()) return experiment(o);
        if (s_cal->parsed()) return calibration(o);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
