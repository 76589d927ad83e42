#pragma once

// Gaussian-process regression baseline on (day index, ILI rate) pairs.

#include "ilicast/core/errors.hpp"
#include "ilicast/core/optimize.hpp"
#include "ilicast/core/stats.hpp"
#include "ilicast/data/date.hpp"
#include "ilicast/data/series.hpp"
#include "ilicast/forecast/uncertainty.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

namespace ilicast::forecast {

struct GpHyper {
    double amplitude = 1.0;   // kernel std
    double lengthscale = 1.0; // in days
    double noise = 0.1;       // observation noise std
};

/// Squared-exponential kernel amp^2 exp(-(a-b)^2 / (2 l^2)).
inline double se_kernel(double a, double b, double amplitude, double lengthscale) {
    const double r = (a - b) / lengthscale;
    return amplitude * amplitude * std::exp(-0.5 * r * r);
}

/// Cholesky factor of `k`, adding diagonal jitter (1e-10 up to 1e-4 times the
/// mean diagonal) when the plain factorization fails.
inline Eigen::LLT<Eigen::MatrixXd> robust_cholesky(const Eigen::MatrixXd& k) {
    Eigen::LLT<Eigen::MatrixXd> llt(k);
    if (llt.info() == Eigen::Success) {
        return llt;
    }
    const double scale = std::max(k.diagonal().mean(), 1e-300);
    for (double jitter = 1e-10; jitter <= 1e-4 * 1.0001; jitter *= 10.0) {
        Eigen::MatrixXd kj = k;
        kj.diagonal().array() += jitter * scale;
        llt.compute(kj);
        if (llt.info() == Eigen::Success) {
            return llt;
        }
    }
    throw NumericalError("gaussian process: kernel matrix not positive definite after jitter");
}

class GaussianProcess {
public:
    /// Conditions a GP with fixed hyperparameters and constant prior mean.
    GaussianProcess(std::vector<double> x, std::vector<double> y, const GpHyper& hyper, double prior_mean)
        : x_(std::move(x)), hyper_(hyper), prior_mean_(prior_mean) {
        if (x_.empty() || x_.size() != y.size()) {
            throw InvalidInput("gaussian process: need matching, nonempty x and y");
        }
        if (!(hyper.amplitude > 0.0) || !(hyper.lengthscale > 0.0) || hyper.noise < 0.0) {
            throw InvalidParameter("gaussian process: amplitude and lengthscale must be > 0, noise >= 0");
        }
        const auto n = static_cast<Eigen::Index>(x_.size());
        Eigen::VectorXd r(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            r(i) = y[static_cast<std::size_t>(i)] - prior_mean_;
        }
        llt_ = robust_cholesky(gram());
        alpha_ = llt_.solve(r);
        const Eigen::MatrixXd l = llt_.matrixL();
        lml_ = -0.5 * r.dot(alpha_) - l.diagonal().array().log().sum() -
               0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
    }

    /// Fits hyperparameters by maximizing the log marginal likelihood
    /// (Nelder-Mead on log parameters, several lengthscale starts). The prior
    /// mean is the training mean.
    static GaussianProcess fit(std::vector<double> x, std::vector<double> y) {
        if (x.empty() || x.size() != y.size()) {
            throw InvalidInput("gaussian process: need matching, nonempty x and y");
        }
        const double mu = mean_of(y);
        double scale = std::sqrt(population_variance(y));
        if (!(scale > 0.0)) {
            scale = 1.0;
        }
        double span = 1.0;
        if (x.size() > 1) {
            const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
            span = std::max(*hi - *lo, 1.0);
        }
        const double ls_lo = std::log(1.0);
        const double ls_hi = std::log(10.0 * span);
        auto objective = [&](const std::vector<double>& p) {
            if (p[0] < std::log(1e-3) || p[0] > std::log(1e2) || p[1] < ls_lo || p[1] > ls_hi ||
                p[2] < std::log(1e-4) || p[2] > std::log(1e1)) {
                return 1e300;
            }
            try {
                GaussianProcess gp(x, y, {scale * std::exp(p[0]), std::exp(p[1]), scale * std::exp(p[2])}, mu);
                const double v = -gp.log_marginal_likelihood();
                return std::isfinite(v) ? v : 1e300;
            } catch (const NumericalError&) {
                return 1e300;
            }
        };
        std::optional<MinimizeResult> best;
        for (double ls : {span / 16.0, span / 4.0, span}) {
            const double start_ls = std::clamp(std::log(std::max(ls, 1.0)), ls_lo, ls_hi);
            auto r = nelder_mead(objective, {0.0, start_ls, std::log(0.1)}, 0.5, 1e-8, 400);
            if (!best || r.value < best->value) {
                best = std::move(r);
            }
        }
        const auto& p = best->x;
        return GaussianProcess(std::move(x), std::move(y),
                               {scale * std::exp(p[0]), std::exp(p[1]), scale * std::exp(p[2])}, mu);
    }

    const GpHyper& hyper() const { return hyper_; }
    double prior_mean() const { return prior_mean_; }
    double log_marginal_likelihood() const { return lml_; }

    /// Posterior of the latent function at `x`; variance clipped at 0.
    MeanStd predict_latent(double x) const {
        const auto n = static_cast<Eigen::Index>(x_.size());
        Eigen::VectorXd ks(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            ks(i) = se_kernel(x, x_[static_cast<std::size_t>(i)], hyper_.amplitude, hyper_.lengthscale);
        }
        const Eigen::VectorXd v = llt_.matrixL().solve(ks);
        const double var = hyper_.amplitude * hyper_.amplitude - v.squaredNorm();
        return {prior_mean_ + ks.dot(alpha_), std::sqrt(std::max(var, 0.0))};
    }

    /// Predictive distribution of a new observation (latent plus noise).
    MeanStd predict(double x) const {
        const MeanStd f = predict_latent(x);
        return {f.mean, std::sqrt(f.std * f.std + hyper_.noise * hyper_.noise)};
    }

private:
    Eigen::MatrixXd gram() const {
        const auto n = static_cast<Eigen::Index>(x_.size());
        Eigen::MatrixXd k(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j <= i; ++j) {
                k(i, j) = k(j, i) = se_kernel(x_[static_cast<std::size_t>(i)], x_[static_cast<std::size_t>(j)],
                                              hyper_.amplitude, hyper_.lengthscale);
            }
            k(i, i) += hyper_.noise * hyper_.noise;
        }
        return k;
    }

    std::vector<double> x_;
    GpHyper hyper_;
    double prior_mean_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
    Eigen::VectorXd alpha_;
    double lml_ = 0.0;
};

struct GpWindow {
    int days = 365; // trailing window length
    int stride = 7; // sampling stride inside the window
};

/// GP fitted on the data available at the Thursday on or before `origin`
/// (the window ends at that Thursday minus `delay`). Day indices are relative
/// to the window end.
inline GaussianProcess fit_gp_at(const data::DailySeries& ili, data::Date origin, int delay, const GpWindow& window = {}) {
    if (window.days < 1 || window.stride < 1) {
        throw InvalidParameter("gp: window and stride must be positive");
    }
    const data::Date end = data::thursday_on_or_before(origin) - data::Days{delay};
    std::vector<double> x;
    std::vector<double> y;
    for (int back = 0; back < window.days; back += window.stride) {
        const data::Date d = end - data::Days{back};
        if (!ili.contains(d)) {
            break;
        }
        x.push_back(static_cast<double>(-back));
        y.push_back(ili.at(d));
    }
    if (x.empty()) {
        throw DataGapError("gp: no ILI data on or before " + data::format_date(end));
    }
    std::reverse(x.begin(), x.end());
    std::reverse(y.begin(), y.end());
    return GaussianProcess::fit(std::move(x), std::move(y));
}

/// Predictive mean/std for origin + gamma (no query data is used).
inline MeanStd gp_forecast(const data::DailySeries& ili, data::Date origin, int gamma, int delay = 7,
                           const GpWindow& window = {}) {
    const auto gp = fit_gp_at(ili, origin, delay, window);
    const data::Date end = data::thursday_on_or_before(origin) - data::Days{delay};
    return gp.predict(static_cast<double>(data::days_between(end, origin + data::Days{gamma})));
}

/// GP forecasts over origins [from, to], refitting once per Thursday.
inline ProbabilisticForecast gp_forecast(const data::DailySeries& ili, data::Date from, data::Date to, int gamma,
                                         int delay = 7, const GpWindow& window = {}) {
    ProbabilisticForecast f;
    std::vector<double> sd;
    std::optional<GaussianProcess> gp;
    std::optional<data::Date> fitted_for;
    for (data::Date t = from; t <= to; t += data::Days{1}) {
        const data::Date thursday = data::thursday_on_or_before(t);
        if (!fitted_for || *fitted_for != thursday) {
            gp = fit_gp_at(ili, t, delay, window);
            fitted_for = thursday;
        }
        const data::Date end = thursday - data::Days{delay};
        const MeanStd ms = gp->predict(static_cast<double>(data::days_between(end, t + data::Days{gamma})));
        f.dates.push_back(t + data::Days{gamma});
        f.mean.push_back(ms.mean);
        sd.push_back(ms.std);
    }
    f.std = std::move(sd);
    return f;
}

} // namespace ilicast::forecast
