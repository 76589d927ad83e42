#pragma once

// JSON checkpoint of a trained neural forecaster.
//
// {
//   "format": "ilicast-checkpoint", "version": 1,
//   "spec": {...}, "input_rows": n, "lookback": l,
//   "parameters": [{"name", "rows", "cols", "data": [column-major values]}],
//   "batch_norm": {"running_mean": [...], "running_var": [...]} | null,
//   "preprocessing": {...} | null
// }
//
// Doubles are written by nlohmann::json with round-trip precision, so a
// save/load cycle reproduces predictions bit for bit.

#include "ilicast/data/prep.hpp"
#include "ilicast/data/csv.hpp"
#include "ilicast/forecast/neural.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

namespace ilicast::forecast {

inline constexpr int kCheckpointVersion = 1;

inline nlohmann::json spec_to_json(const ForecasterSpec& s) {
    nlohmann::json j{{"id", s.id()},
                     {"ff_hidden", s.ff_hidden},
                     {"lstm_hidden", s.lstm_hidden},
                     {"lstm_dense", s.lstm_dense},
                     {"samples", s.samples},
                     {"rho", s.rho},
                     {"rho_q", s.rho_q},
                     {"sigma_p", s.sigma_p},
                     {"sigma", s.sigma},
                     {"bn_momentum", s.bn_momentum},
                     {"bn_epsilon", s.bn_epsilon}};
    j["batch_norm"] = s.batch_norm ? nlohmann::json(*s.batch_norm) : nlohmann::json(nullptr);
    return j;
}

inline ForecasterSpec spec_from_json(const nlohmann::json& j) {
    ForecasterSpec s = ForecasterSpec::parse(j.at("id").get<std::string>());
    s.ff_hidden = j.at("ff_hidden").get<int>();
    s.lstm_hidden = j.at("lstm_hidden").get<int>();
    s.lstm_dense = j.at("lstm_dense").get<int>();
    s.samples = j.at("samples").get<int>();
    s.rho = j.at("rho").get<double>();
    s.rho_q = j.at("rho_q").get<double>();
    s.sigma_p = j.at("sigma_p").get<double>();
    s.sigma = j.at("sigma").get<double>();
    s.bn_momentum = j.at("bn_momentum").get<double>();
    s.bn_epsilon = j.at("bn_epsilon").get<double>();
    if (!j.at("batch_norm").is_null()) {
        s.batch_norm = j.at("batch_norm").get<bool>();
    }
    return s;
}

inline nlohmann::json prep_to_json(const data::PrepState& p) {
    nlohmann::json stats = nlohmann::json::array();
    for (const auto& mm : p.stats) {
        stats.push_back({mm.min, mm.max});
    }
    return {{"smoothing_window", p.options.smoothing_window},
            {"smooth_before_normalize", p.options.smooth_before_normalize},
            {"selection_threshold", p.options.selection_threshold},
            {"use_queries", p.options.use_queries},
            {"fit_from", data::format_date(p.fit_from)},
            {"fit_to", data::format_date(p.fit_to)},
            {"query_ids", p.query_ids},
            {"minmax", stats},
            {"correlations", p.correlations}};
}

inline data::PrepState prep_from_json(const nlohmann::json& j) {
    data::PrepState p;
    p.options.smoothing_window = j.at("smoothing_window").get<std::size_t>();
    p.options.smooth_before_normalize = j.at("smooth_before_normalize").get<bool>();
    p.options.selection_threshold = j.at("selection_threshold").get<double>();
    p.options.use_queries = j.at("use_queries").get<bool>();
    p.fit_from = data::parse_date(j.at("fit_from").get<std::string>());
    p.fit_to = data::parse_date(j.at("fit_to").get<std::string>());
    p.query_ids = j.at("query_ids").get<std::vector<std::string>>();
    for (const auto& mm : j.at("minmax")) {
        p.stats.push_back({mm.at(0).get<double>(), mm.at(1).get<double>()});
    }
    p.correlations = j.at("correlations").get<std::vector<double>>();
    if (p.stats.size() != p.query_ids.size()) {
        throw InvalidInput("checkpoint: preprocessing stats do not match the query list");
    }
    return p;
}

/// Trained model plus the preprocessing that produced its inputs.
struct Checkpoint {
    NeuralForecaster model;
    std::optional<data::PrepState> prep;
    data::WindowShape shape;
};

inline nlohmann::json checkpoint_to_json(NeuralForecaster& model, const data::PrepState* prep = nullptr,
                                         const data::WindowShape& shape = {}) {
    nlohmann::json j;
    j["format"] = "ilicast-checkpoint";
    j["version"] = kCheckpointVersion;
    j["spec"] = spec_to_json(model.spec());
    j["input_rows"] = model.input_rows();
    j["lookback"] = model.lookback();
    j["shape"] = {{"lookback", shape.lookback}, {"delay", shape.delay}, {"horizon", shape.horizon}};
    nlohmann::json params = nlohmann::json::array();
    for (const auto* p : model.parameters()) {
        params.push_back({{"name", p->name},
                          {"rows", p->value.rows()},
                          {"cols", p->value.cols()},
                          {"data", std::vector<double>(p->value.data(), p->value.data() + p->value.size())}});
    }
    j["parameters"] = std::move(params);
    if (auto* bn = model.batch_norm()) {
        j["batch_norm"] = {
            {"running_mean", std::vector<double>(bn->running_mean().data(), bn->running_mean().data() + bn->running_mean().size())},
            {"running_var", std::vector<double>(bn->running_var().data(), bn->running_var().data() + bn->running_var().size())}};
    } else {
        j["batch_norm"] = nullptr;
    }
    j["preprocessing"] = prep ? prep_to_json(*prep) : nlohmann::json(nullptr);
    return j;
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "ilicast-checkpoint") {
        throw InvalidInput("checkpoint: not an ilicast checkpoint");
    }
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion) {
        throw InvalidInput("checkpoint: unsupported version " + std::to_string(version));
    }
    const ForecasterSpec spec = spec_from_json(j.at("spec"));
    NeuralForecaster model(spec, j.at("input_rows").get<Index>(), j.at("lookback").get<Index>());
    const auto& params = j.at("parameters");
    auto targets = model.parameters();
    if (params.size() != targets.size()) {
        throw ShapeError("checkpoint: " + std::to_string(params.size()) + " parameters stored, model has " +
                         std::to_string(targets.size()));
    }
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const auto& p = params[i];
        auto* dst = targets[i];
        const auto rows = p.at("rows").get<Index>();
        const auto cols = p.at("cols").get<Index>();
        if (p.at("name").get<std::string>() != dst->name || rows != dst->value.rows() || cols != dst->value.cols()) {
            throw ShapeError("checkpoint: parameter '" + p.at("name").get<std::string>() + "' does not match '" +
                             dst->name + "'");
        }
        const auto values = p.at("data").get<std::vector<double>>();
        if (static_cast<Index>(values.size()) != rows * cols) {
            throw ShapeError("checkpoint: parameter '" + dst->name + "' has the wrong number of values");
        }
        dst->value = Eigen::Map<const Matrix>(values.data(), rows, cols);
    }
    if (auto* bn = model.batch_norm()) {
        const auto& b = j.at("batch_norm");
        const auto mean = b.at("running_mean").get<std::vector<double>>();
        const auto var = b.at("running_var").get<std::vector<double>>();
        if (static_cast<Index>(mean.size()) != bn->running_mean().size() ||
            static_cast<Index>(var.size()) != bn->running_var().size()) {
            throw ShapeError("checkpoint: batch norm statistics have the wrong size");
        }
        bn->running_mean() = Eigen::Map<const nn::Vector>(mean.data(), static_cast<Index>(mean.size()));
        bn->running_var() = Eigen::Map<const nn::Vector>(var.data(), static_cast<Index>(var.size()));
    }
    data::WindowShape shape;
    if (j.contains("shape")) {
        shape.lookback = j["shape"].at("lookback").get<int>();
        shape.delay = j["shape"].at("delay").get<int>();
        shape.horizon = j["shape"].at("horizon").get<int>();
    }
    std::optional<data::PrepState> prep;
    if (!j.at("preprocessing").is_null()) {
        prep = prep_from_json(j.at("preprocessing"));
    }
    return Checkpoint{std::move(model), std::move(prep), shape};
}

inline void save_checkpoint(const std::filesystem::path& path, NeuralForecaster& model,
                            const data::PrepState* prep = nullptr, const data::WindowShape& shape = {}) {
    data::detail::write_atomically(path, checkpoint_to_json(model, prep, shape).dump() + "\n");
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open checkpoint " + path.string());
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw InvalidInput("checkpoint " + path.string() + ": " + e.what());
    }
    return checkpoint_from_json(j);
}

} // namespace ilicast::forecast
