#pragma once

#include "ilicast/core/errors.hpp"

#include <cctype>
#include <optional>
#include <string>
#include <vector>

namespace ilicast::forecast {

enum class Architecture { ff, lstm, naive, historical, gp };
enum class Uncertainty { v, d, m, c };

inline std::string to_string(Architecture a) {
    switch (a) {
    case Architecture::ff: return "ff";
    case Architecture::lstm: return "lstm";
    case Architecture::naive: return "naive";
    case Architecture::historical: return "hist";
    case Architecture::gp: return "gp";
    }
    return "?";
}

inline std::string to_string(Uncertainty u) {
    switch (u) {
    case Uncertainty::v: return "v";
    case Uncertainty::d: return "d";
    case Uncertainty::m: return "m";
    case Uncertainty::c: return "c";
    }
    return "?";
}

/// Model choice plus its hyperparameters. Identifiers look like `ff-v`,
/// `lstm-c`, `lstm-c-nq`, `naive`, `hist`, `gp`.
struct ForecasterSpec {
    Architecture architecture = Architecture::ff;
    Uncertainty uncertainty = Uncertainty::v;
    bool use_queries = true;

    int ff_hidden = 25;
    int lstm_hidden = 32;
    int lstm_dense = 16;

    int samples = 100; // K at prediction time
    double rho = 0.25;   // sharpening of the predicted std
    double rho_q = 10.0; // sharpening of the posterior std
    double sigma_p = 0.5;
    double sigma = 5.0; // output std for model-uncertainty likelihoods

    std::optional<bool> batch_norm; // default: every model except ff-v
    double bn_momentum = 0.99;
    double bn_epsilon = 1e-3;

    bool neural() const { return architecture == Architecture::ff || architecture == Architecture::lstm; }

    bool probabilistic() const {
        if (neural()) {
            return uncertainty != Uncertainty::v;
        }
        return architecture != Architecture::naive;
    }

    bool bayesian() const { return neural() && (uncertainty == Uncertainty::m || uncertainty == Uncertainty::c); }

    bool uses_batch_norm() const {
        if (batch_norm) {
            return *batch_norm;
        }
        return !(architecture == Architecture::ff && uncertainty == Uncertainty::v);
    }

    std::string id() const {
        if (!neural()) {
            return to_string(architecture);
        }
        std::string s = to_string(architecture) + "-" + to_string(uncertainty);
        if (!use_queries) {
            s += "-nq";
        }
        return s;
    }

    void validate() const {
        if (samples < 1) {
            throw ConfigurationError("forecaster '" + id() + "': K must be >= 1");
        }
        if (!(rho > 0.0) || !(rho_q > 0.0) || !(sigma_p > 0.0) || !(sigma > 0.0)) {
            throw ConfigurationError("forecaster '" + id() + "': rho, rho_q, sigma_p and sigma must be > 0");
        }
        if (ff_hidden < 1 || lstm_hidden < 1 || lstm_dense < 1) {
            throw ConfigurationError("forecaster '" + id() + "': hidden sizes must be positive");
        }
    }

    static ForecasterSpec parse(const std::string& text) {
        ForecasterSpec s;
        std::vector<std::string> parts;
        std::string cur;
        for (char ch : text) {
            if (ch == '-') {
                parts.push_back(cur);
                cur.clear();
            } else {
                cur += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
            }
        }
        parts.push_back(cur);
        const std::string& head = parts[0];
        if (head == "naive" || head == "hist" || head == "historical" || head == "gp") {
            if (parts.size() != 1) {
                throw ConfigurationError("baseline '" + text + "' takes no uncertainty suffix");
            }
            s.architecture = head == "naive" ? Architecture::naive
                             : head == "gp"  ? Architecture::gp
                                             : Architecture::historical;
            return s;
        }
        if (head == "ff") {
            s.architecture = Architecture::ff;
        } else if (head == "lstm") {
            s.architecture = Architecture::lstm;
        } else {
            throw ConfigurationError("unknown model '" + text + "'");
        }
        if (parts.size() < 2 || parts.size() > 3) {
            throw ConfigurationError("model '" + text + "' must look like ff-v, lstm-c or lstm-c-nq");
        }
        const std::string& u = parts[1];
        if (u == "v") {
            s.uncertainty = Uncertainty::v;
        } else if (u == "d") {
            s.uncertainty = Uncertainty::d;
        } else if (u == "m") {
            s.uncertainty = Uncertainty::m;
        } else if (u == "c") {
            s.uncertainty = Uncertainty::c;
        } else {
            throw ConfigurationError("unknown uncertainty mode '" + u + "' in '" + text + "'");
        }
        if (parts.size() == 3) {
            if (parts[2] != "nq") {
                throw ConfigurationError("unknown model suffix '" + parts[2] + "' in '" + text + "'");
            }
            s.use_queries = false;
        }
        return s;
    }
};

} // namespace ilicast::forecast
