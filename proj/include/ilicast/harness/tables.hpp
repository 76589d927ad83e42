#pragma once

// Aggregate tables built from a manifest's artifacts:
//   metrics.csv / metrics.json       model,gamma,metric,value (seasons averaged, then seeds)
//   metrics_by_season.csv            model,gamma,season,seed,metric,value
//   significance.csv                 Welch tests across seeds, Bonferroni per (gamma, metric)
//   calibration/<model>_g<gamma>.csv level,coverage pooled over seasons and seeds
// Point models carry no CRPS/NLL; those cells stay empty.

#include "ilicast/harness/experiment.hpp"
#include "ilicast/metrics/calibration.hpp"
#include "ilicast/metrics/significance.hpp"

#include <json.hpp>

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace ilicast::harness {

/// Each uncertainty variant against its architecture's -v model, and each
/// model against the same variant of the other architecture. Only pairs whose
/// models are both configured are kept.
inline std::vector<std::pair<std::string, std::string>> significance_pairs(const std::vector<std::string>& models) {
    auto has = [&](const std::string& id) { return std::find(models.begin(), models.end(), id) != models.end(); };
    std::vector<std::pair<std::string, std::string>> pairs;
    auto add = [&](const std::string& a, const std::string& b) {
        if (has(a) && has(b) && a != b &&
            std::find(pairs.begin(), pairs.end(), std::pair{b, a}) == pairs.end() &&
            std::find(pairs.begin(), pairs.end(), std::pair{a, b}) == pairs.end()) {
            pairs.emplace_back(a, b);
        }
    };
    for (const auto& id : models) {
        const auto s = forecast::ForecasterSpec::parse(id);
        if (!s.neural()) {
            continue;
        }
        const std::string arch = forecast::to_string(s.architecture);
        const std::string other = s.architecture == forecast::Architecture::ff ? "lstm" : "ff";
        const std::string suffix = s.use_queries ? "" : "-nq";
        if (s.uncertainty != forecast::Uncertainty::v) {
            add(id, arch + "-v" + suffix);
        }
        if (s.architecture == forecast::Architecture::ff) {
            add(id, other + "-" + forecast::to_string(s.uncertainty) + suffix);
        }
    }
    return pairs;
}

/// Season-averaged scores per seed for one (model, gamma); seeds missing a
/// season are dropped.
struct SeedScores {
    std::vector<std::uint64_t> seeds; // 0 for baselines
    std::vector<metrics::MetricsRow> rows;
};

namespace detail {

inline std::string cell(const std::optional<double>& v) {
    return v ? data::format_number(*v) : std::string();
}

inline double mean_or_nan(const std::vector<double>& v) {
    if (v.empty()) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    double s = 0.0;
    for (double x : v) {
        s += x;
    }
    return s / static_cast<double>(v.size());
}

} // namespace detail

/// Writes all tables under `m.out`, records them in the manifest, and
/// rewrites manifest.json. Throws IntegrityError when an artifact of a
/// successful run is missing or unreadable.
inline void emit_tables(RunManifest& m, const ExperimentConfig& c) {
    // Load every successful run back from disk.
    struct Loaded {
        const RunRecord* run;
        metrics::MetricsRow row;
        forecast::ProbabilisticForecast forecast;
    };
    std::vector<Loaded> loaded;
    for (const auto& r : m.runs) {
        if (!r.ok) {
            continue;
        }
        auto path_of = [&](const std::string& name) {
            const auto it = r.artifacts.find(name);
            if (it == r.artifacts.end() || !std::filesystem::exists(m.out / it->second)) {
                throw IntegrityError(r.key.label() + ": missing " + name + " artifact");
            }
            return m.out / it->second;
        };
        nlohmann::json mj;
        try {
            std::ifstream in(path_of("metrics"));
            in >> mj;
            loaded.push_back({&r, metrics_from_json(mj), load_forecast_csv(path_of("forecast"))});
        } catch (const IntegrityError&) {
            throw;
        } catch (const std::exception& e) {
            throw IntegrityError(r.key.label() + ": unreadable artifact: " + e.what());
        }
    }

    // (model, gamma) -> seed -> season rows
    std::map<std::pair<std::string, int>, std::map<std::uint64_t, std::vector<metrics::MetricsRow>>> by_seed;
    for (const auto& l : loaded) {
        by_seed[{l.run->key.model, l.run->key.gamma}][l.run->key.seed.value_or(0)].push_back(l.row);
    }
    auto scores = [&](const std::string& model, int gamma) {
        SeedScores s;
        const auto it = by_seed.find({model, gamma});
        if (it == by_seed.end()) {
            return s;
        }
        for (const auto& [seed, rows] : it->second) {
            if (rows.size() == c.seasons.size()) {
                s.seeds.push_back(seed);
                s.rows.push_back(metrics::aggregate_report(rows));
            }
        }
        return s;
    };

    std::string csv = "model,gamma,metric,value\n";
    std::string by_season = "model,gamma,season,seed,metric,value\n";
    nlohmann::json mjson = nlohmann::json::array();
    for (const auto& model : c.models) {
        const bool prob = c.spec_for(model).probabilistic();
        for (int g : c.horizons) {
            const auto s = scores(model, g);
            nlohmann::json entry{{"model", model}, {"gamma", g}, {"seeds", s.seeds}};
            nlohmann::json vals = nlohmann::json::object();
            for (const auto& name : metrics::metric_names()) {
                std::optional<double> v;
                if (prob || (name != "CRPS" && name != "NLL")) {
                    std::vector<double> xs;
                    for (const auto& row : s.rows) {
                        if (auto x = metrics::metric_value(row, name)) {
                            xs.push_back(*x);
                        }
                    }
                    if (!xs.empty()) {
                        v = detail::mean_or_nan(xs);
                    }
                }
                csv += model + "," + std::to_string(g) + "," + name + "," + detail::cell(v) + "\n";
                vals[name] = v ? detail::finite_or_null(*v) : nlohmann::json(nullptr);
            }
            entry["metrics"] = vals;
            mjson.push_back(entry);
        }
    }
    for (const auto& l : loaded) {
        const auto& k = l.run->key;
        for (const auto& name : metrics::metric_names()) {
            by_season += k.model + "," + std::to_string(k.gamma) + "," + std::to_string(k.season) + "," +
                         (k.seed ? std::to_string(*k.seed) : std::string()) + "," + name + "," +
                         detail::cell(metrics::metric_value(l.row, name)) + "\n";
        }
    }
    data::detail::write_atomically(m.out / "metrics.csv", csv);
    data::detail::write_atomically(m.out / "metrics_by_season.csv", by_season);
    detail::write_json(m.out / "metrics.json", mjson);
    m.tables["metrics"] = "metrics.csv";
    m.tables["metrics_json"] = "metrics.json";
    m.tables["metrics_by_season"] = "metrics_by_season.csv";

    // Significance across seeds.
    const auto pairs = significance_pairs(c.models);
    std::string sig = "model_a,model_b,gamma,metric,mean_a,mean_b,t,dof,p_value,threshold,significant\n";
    for (int g : c.horizons) {
        for (const auto& name : metrics::metric_names()) {
            struct Pending {
                std::string a, b;
                std::vector<double> xa, xb;
            };
            std::vector<Pending> tests;
            for (const auto& [a, b] : pairs) {
                const auto sa = scores(a, g);
                const auto sb = scores(b, g);
                Pending p{a, b, {}, {}};
                for (const auto& row : sa.rows) {
                    if (auto v = metrics::metric_value(row, name); v && std::isfinite(*v)) p.xa.push_back(*v);
                }
                for (const auto& row : sb.rows) {
                    if (auto v = metrics::metric_value(row, name); v && std::isfinite(*v)) p.xb.push_back(*v);
                }
                if (p.xa.size() >= 2 && p.xb.size() >= 2) {
                    tests.push_back(std::move(p));
                }
            }
            for (const auto& p : tests) {
                const auto r = metrics::significance(p.xa, p.xb, c.evaluation.alpha, static_cast<int>(tests.size()));
                sig += p.a + "," + p.b + "," + std::to_string(g) + "," + name + "," +
                       data::format_number(detail::mean_or_nan(p.xa)) + "," +
                       data::format_number(detail::mean_or_nan(p.xb)) + "," + data::format_number(r.t) + "," +
                       data::format_number(r.dof) + "," + data::format_number(r.p_value) + "," +
                       data::format_number(r.threshold) + "," + (r.significant ? "true" : "false") + "\n";
            }
        }
    }
    data::detail::write_atomically(m.out / "significance.csv", sig);
    m.tables["significance"] = "significance.csv";

    // Calibration curves, pooled over seasons and seeds.
    for (const auto& model : c.models) {
        if (!c.spec_for(model).probabilistic()) {
            continue;
        }
        for (int g : c.horizons) {
            std::vector<double> y, mu, sd;
            for (const auto& l : loaded) {
                if (l.run->key.model != model || l.run->key.gamma != g || !l.forecast.std ||
                    l.forecast.truth.size() != l.forecast.size()) {
                    continue;
                }
                for (std::size_t i = 0; i < l.forecast.size(); ++i) {
                    y.push_back(l.forecast.truth[i]);
                    mu.push_back(l.forecast.mean[i]);
                    sd.push_back(std::max((*l.forecast.std)[i], c.evaluation.std_floor));
                }
            }
            if (y.empty()) {
                continue;
            }
            const auto curve = metrics::calibration_curve(y, mu, sd);
            std::string out = "level,coverage\n";
            for (std::size_t i = 0; i < curve.levels.size(); ++i) {
                out += data::format_number(curve.levels[i]) + "," + data::format_number(curve.coverage[i]) + "\n";
            }
            const std::string rel = "calibration/" + model + "_g" + std::to_string(g) + ".csv";
            data::detail::write_atomically(m.out / rel, out);
            m.tables["calibration:" + model + ":" + std::to_string(g)] = rel;
        }
    }

    detail::write_json(m.out / "manifest.json", manifest_to_json(m));
}

} // namespace ilicast::harness
