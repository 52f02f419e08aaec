#pragma once

#include <cmath>
#include <ctime>
#include <stdexcept>
#include <string>
#include <vector>

#include "config.hpp"
#include "csv.hpp"

namespace boundedgeo {

inline constexpr const char* kToolVersion = "1.0.0";

// Non-finite values become the strings "inf", "-inf", "nan".
inline Json json_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

// One PASS/FAIL verdict: value `relation` bound, with the tolerance folded in.
struct Finding {
    std::string name;
    bool pass = true;
    double value = 0.0;
    std::string relation;  // "<=", ">=", "~=", "holds"
    double bound = 0.0;
    double tolerance = 0.0;
    bool relative = false;
    std::string note;
};

// slack = tol (absolute) or tol |bound| (relative); NaN never passes.
inline Finding compare(std::string name, double value, const std::string& relation, double bound, double tol,
                       bool relative, std::string note = {}) {
    const double slack = relative ? tol * std::abs(bound) : tol;
    bool pass = false;
    if (relation == "<=")
        pass = value <= bound + slack;
    else if (relation == ">=")
        pass = value >= bound - slack;
    else if (relation == "~=")
        pass = std::abs(value - bound) <= slack;
    else
        throw std::logic_error("unknown relation " + relation);
    return {std::move(name), pass, value, relation, bound, tol, relative, std::move(note)};
}

inline Finding holds(std::string name, bool ok, double value, std::string note = {}) {
    return {std::move(name), ok, value, "holds", 0.0, 0.0, false, std::move(note)};
}

struct RunReport {
    std::string task;
    Json config;
    std::vector<Finding> findings;
    Json values = Json::object();
    std::vector<std::string> files;

    bool all_pass() const {
        for (const auto& f : findings)
            if (!f.pass) return false;
        return true;
    }

    Json to_json() const {
        Json j;
        j["task"] = task;
        j["config"] = config;
        j["values"] = values;
        Json fs = Json::array();
        for (const auto& f : findings) {
            Json e;
            e["name"] = f.name;
            e["status"] = f.pass ? "PASS" : "FAIL";
            e["value"] = json_number(f.value);
            e["relation"] = f.relation;
            e["bound"] = json_number(f.bound);
            e["tolerance"] = json_number(f.tolerance);
            e["tolerance_kind"] = f.relative ? "relative" : "absolute";
            if (!f.note.empty()) e["note"] = f.note;
            fs.push_back(e);
        }
        j["findings"] = fs;
        j["files"] = files;
        char stamp[32];
        const std::time_t now = std::time(nullptr);
        std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
        j["provenance"] = {{"tool", "boundedgeo"}, {"version", kToolVersion}, {"timestamp", stamp}};
        return j;
    }
};

}  // namespace boundedgeo
