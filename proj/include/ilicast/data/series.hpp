#pragma once

#include "ilicast/data/date.hpp"

#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace ilicast::data {

/// Contiguous daily values starting at `start`.
class DailySeries {
public:
    DailySeries() = default;
    DailySeries(Date start, std::vector<double> values) : start_(start), values_(std::move(values)) {
        for (std::size_t i = 0; i < values_.size(); ++i) {
            if (!std::isfinite(values_[i])) {
                throw InvalidInput("DailySeries: non-finite value on " + format_date(date_at(i)));
            }
        }
    }

    Date start() const { return start_; }
    /// Last covered date (meaningless when empty).
    Date last() const { return start_ + Days{static_cast<long>(values_.size()) - 1}; }
    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }

    Date date_at(std::size_t i) const { return start_ + Days{static_cast<long>(i)}; }

    bool contains(Date d) const {
        const long k = days_between(start_, d);
        return k >= 0 && static_cast<std::size_t>(k) < values_.size();
    }

    std::size_t index_of(Date d) const {
        if (!contains(d)) {
            throw DataGapError("no value for " + format_date(d) + " (series covers " + range_text() + ")");
        }
        return static_cast<std::size_t>(days_between(start_, d));
    }

    double at(Date d) const { return values_[index_of(d)]; }
    double operator[](std::size_t i) const { return values_[i]; }

    const std::vector<double>& values() const { return values_; }

    /// Inclusive date range [from, to].
    DailySeries slice(Date from, Date to) const {
        const std::size_t a = index_of(from);
        const std::size_t b = index_of(to);
        if (b < a) {
            throw InvalidInput("DailySeries::slice: empty range");
        }
        return DailySeries(from, std::vector<double>(values_.begin() + static_cast<long>(a),
                                                     values_.begin() + static_cast<long>(b) + 1));
    }

    std::string range_text() const {
        if (values_.empty()) {
            return "nothing";
        }
        return format_date(start_) + ".." + format_date(last());
    }

    bool operator==(const DailySeries&) const = default;

private:
    Date start_{};
    std::vector<double> values_;
};

/// Weekly ILI rates keyed by week-ending date.
class WeeklySeries {
public:
    WeeklySeries() = default;
    WeeklySeries(std::vector<Date> dates, std::vector<double> values)
        : dates_(std::move(dates)), values_(std::move(values)) {
        if (dates_.size() != values_.size()) {
            throw InvalidInput("WeeklySeries: dates and values differ in length");
        }
        for (std::size_t i = 0; i < dates_.size(); ++i) {
            if (!std::isfinite(values_[i]) || values_[i] < 0.0) {
                throw InvalidInput("WeeklySeries: value on " + format_date(dates_[i]) + " must be finite and >= 0");
            }
            if (i > 0 && days_between(dates_[i - 1], dates_[i]) != 7) {
                throw DataGapError("WeeklySeries: dates must be 7 days apart (" + format_date(dates_[i - 1]) +
                                   " -> " + format_date(dates_[i]) + ")");
            }
        }
    }

    std::size_t size() const { return dates_.size(); }
    const std::vector<Date>& dates() const { return dates_; }
    const std::vector<double>& values() const { return values_; }

    bool operator==(const WeeklySeries&) const = default;

private:
    std::vector<Date> dates_;
    std::vector<double> values_;
};

/// Query frequencies sharing one daily date range.
class QueryPanel {
public:
    QueryPanel() = default;
    QueryPanel(std::vector<std::string> ids, std::vector<DailySeries> series)
        : ids_(std::move(ids)), series_(std::move(series)) {
        if (ids_.size() != series_.size()) {
            throw InvalidInput("QueryPanel: id and series counts differ");
        }
        for (std::size_t i = 1; i < series_.size(); ++i) {
            if (series_[i].start() != series_[0].start() || series_[i].size() != series_[0].size()) {
                throw InvalidInput("QueryPanel: query '" + ids_[i] + "' covers a different date range");
            }
        }
    }

    std::size_t size() const { return ids_.size(); }
    bool empty() const { return ids_.empty(); }
    const std::vector<std::string>& ids() const { return ids_; }
    const std::vector<DailySeries>& series() const { return series_; }
    const DailySeries& operator[](std::size_t i) const { return series_[i]; }

    std::size_t find(const std::string& id) const {
        for (std::size_t i = 0; i < ids_.size(); ++i) {
            if (ids_[i] == id) {
                return i;
            }
        }
        throw InvalidInput("QueryPanel: unknown query '" + id + "'");
    }

    bool operator==(const QueryPanel&) const = default;

private:
    std::vector<std::string> ids_;
    std::vector<DailySeries> series_;
};

} // namespace ilicast::data
