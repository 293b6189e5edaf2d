#ifndef TRUG_METRICS_HPP
#define TRUG_METRICS_HPP

// JSON-lines metrics log. One object per record: {"step", "wall_time", ...named values}.
// Non-finite numbers are written as null.

#include "errors.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <string>
#include <variant>

namespace trug {

using MetricValue = std::variant<double, long, std::string>;
using MetricRecord = std::map<std::string, MetricValue>;

inline nlohmann::json metric_to_json(const MetricValue& v) {
    if (const double* d = std::get_if<double>(&v)) return std::isfinite(*d) ? nlohmann::json(*d) : nlohmann::json();
    if (const long* l = std::get_if<long>(&v)) return *l;
    return std::get<std::string>(v);
}

inline nlohmann::json record_to_json(long step, double wall_time, const MetricRecord& values) {
    nlohmann::json j = nlohmann::json::object();
    j["step"] = step;
    j["wall_time"] = std::isfinite(wall_time) ? nlohmann::json(wall_time) : nlohmann::json();
    for (const auto& [name, value] : values) j[name] = metric_to_json(value);
    return j;
}

class MetricsLog {
public:
    explicit MetricsLog(const std::string& path)
        : out_(path, std::ios::app), start_(std::chrono::steady_clock::now()) {
        if (!out_) throw ConfigError("cannot open metrics log '" + path + "'");
    }

    double elapsed() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

    void write(long step, const MetricRecord& values) {
        out_ << record_to_json(step, elapsed(), values).dump() << '\n';
        out_.flush();
    }

private:
    std::ofstream out_;
    std::chrono::steady_clock::time_point start_;
};

}  // namespace trug

#endif  // TRUG_METRICS_HPP
