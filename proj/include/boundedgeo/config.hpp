#pragma once

// Run configuration: JSON text with a closed key set per block.
//
// {
//   "task": "eigen",
//   "domain": {"dimension": 2, "base_family": "flat", "phi": "", "parameters": {},
//              "top": "1", "bot": "0", "extent": [{"lo": 0, "hi": "2*pi", "periodic": true}],
//              "dirichlet": ["bottom"], "sample_resolution": 256,
//              "deform": {"r_prime": 0.1, "r_boundary": 0.9}},
//   "domains": [ ...domain blocks, family task... ],
//   "numeric": {"n": 64, "seed": 0, "p": 2, "lambda": [0, 0.3], "trials": 200, ...},
//   "data": {"source": "0", "dirichlet": "0", "neumann": "0", "exact": ""},
//   "output": {"dir": "out"}
// }

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "domain.hpp"

namespace boundedgeo {

using Json = nlohmann::ordered_json;

inline const std::vector<std::string>& task_names() {
    static const std::vector<std::string> names{"describe", "audit-geometry", "poincare", "hk-audit",
                                                "fiber-check", "deform", "atlas", "eigen",
                                                "solve", "converge", "family"};
    return names;
}

struct DeformBlock {
    bool enabled = false;
    double r_prime = 0.0;     // 0: default from r_boundary and epsilon
    double r_boundary = 0.0;  // 0: audited
};

struct DomainBlock {
    DomainConfig config;
    DeformBlock deform;
};

struct NumericBlock {
    int n = 64;
    std::uint64_t seed = 0;
    std::vector<double> p{2.0};
    std::vector<double> lambda{0.0};
    int trials = 200;
    double tolerance = 1e-10;
    double r = 0.25;
    double r_fc = 0.0;
    std::vector<double> r_prime;  // deform task sweep
    double r_boundary = 0.0;
    std::vector<int> grids{16, 32, 64};
    std::optional<double> oracle;  // expected lambda_min
    double oracle_tolerance = 0.01;
    double expected_l2_order = 2.0;
    double expected_h1_order = 1.0;
    double order_tolerance = 0.15;
    int audit_n = 32;
    int roundtrip_samples = 100;
};

struct DataBlock {
    std::string source = "0";
    std::string dirichlet = "0";
    std::string neumann = "0";
    std::string exact;
};

struct RunConfig {
    std::string task;
    std::vector<DomainBlock> domains;  // one entry unless task == family
    NumericBlock numeric;
    DataBlock data;
    std::string out_dir = ".";
    Json raw;

    int dimension() const { return domains.empty() ? 2 : domains.front().config.dimension; }
};

namespace detail {

inline void check_keys(const Json& obj, const std::string& where, const std::set<std::string>& allowed) {
    if (!obj.is_object()) throw ArgumentError(where + " must be a JSON object");
    for (const auto& [key, value] : obj.items())
        if (!allowed.count(key)) throw ArgumentError("unknown key '" + key + "' in " + where);
}

inline double number(const Json& v, const std::string& key, const ParameterMap& parameters = {}) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        return eval_constant(s, parameters);
    }
    throw ArgumentError("'" + key + "' must be a number or a constant expression");
}

inline int integer(const Json& v, const std::string& key) {
    if (!v.is_number_integer()) throw ArgumentError("'" + key + "' must be an integer");
    return v.get<int>();
}

inline std::string text(const Json& v, const std::string& key) {
    if (!v.is_string()) throw ArgumentError("'" + key + "' must be a string");
    return v.get<std::string>();
}

inline std::vector<double> numbers(const Json& v, const std::string& key) {
    std::vector<double> out;
    if (v.is_array()) {
        for (const auto& e : v) out.push_back(number(e, key));
        if (out.empty()) throw ArgumentError("'" + key + "' must not be empty");
    } else {
        out.push_back(number(v, key));
    }
    return out;
}

inline std::vector<std::string> coordinate_names(int dimension) {
    auto names = default_coordinate_names(dimension - 1);
    names.push_back("t");
    return names;
}

inline DomainBlock parse_domain(const Json& j, const std::string& where) {
    check_keys(j, where, {"dimension", "base_family", "phi", "parameters", "top", "bot", "extent", "dirichlet",
                          "sample_resolution", "deform"});
    DomainBlock b;
    auto& c = b.config;
    if (j.contains("dimension")) c.dimension = integer(j["dimension"], "dimension");
    if (c.dimension != 2 && c.dimension != 3) throw ArgumentError("dimension must be 2 or 3");
    if (j.contains("parameters")) {
        if (!j["parameters"].is_object()) throw ArgumentError("'parameters' must be an object");
        for (const auto& [k, v] : j["parameters"].items()) c.parameters[k] = number(v, k);
    }
    if (j.contains("base_family")) c.base_family = text(j["base_family"], "base_family");
    if (c.base_family != "flat" && c.base_family != "conformal")
        throw ArgumentError("unknown base family '" + c.base_family + "'");
    if (j.contains("phi")) c.phi = text(j["phi"], "phi");
    if (j.contains("top")) c.top = text(j["top"], "top");
    if (j.contains("bot")) c.bot = text(j["bot"], "bot");
    if (j.contains("extent")) {
        if (!j["extent"].is_array()) throw ArgumentError("'extent' must be an array");
        for (const auto& e : j["extent"]) {
            check_keys(e, where + ".extent", {"lo", "hi", "periodic"});
            AxisExtent a;
            if (e.contains("lo")) a.lo = number(e["lo"], "lo", c.parameters);
            if (e.contains("hi")) a.hi = number(e["hi"], "hi", c.parameters);
            if (e.contains("periodic")) {
                if (!e["periodic"].is_boolean()) throw ArgumentError("'periodic' must be true or false");
                a.periodic = e["periodic"].get<bool>();
            }
            c.extent.push_back(a);
        }
    }
    if (j.contains("dirichlet")) {
        if (!j["dirichlet"].is_array()) throw ArgumentError("'dirichlet' must be an array of face names");
        c.dirichlet.clear();
        for (const auto& f : j["dirichlet"]) {
            c.dirichlet.push_back(text(f, "dirichlet"));
            parse_face(c.dirichlet.back());
        }
    }
    if (j.contains("sample_resolution")) c.sample_resolution = integer(j["sample_resolution"], "sample_resolution");
    if (j.contains("deform")) {
        check_keys(j["deform"], where + ".deform", {"r_prime", "r_boundary"});
        b.deform.enabled = true;
        if (j["deform"].contains("r_prime")) b.deform.r_prime = number(j["deform"]["r_prime"], "r_prime");
        if (j["deform"].contains("r_boundary")) b.deform.r_boundary = number(j["deform"]["r_boundary"], "r_boundary");
    }
    // Expressions are parsed here so malformed text fails at load time.
    const auto base = default_coordinate_names(c.dimension - 1);
    Expression::parse(c.top, base, c.parameters);
    Expression::parse(c.bot, base, c.parameters);
    if (c.base_family == "conformal") Expression::parse(c.phi, base, c.parameters);
    return b;
}

}  // namespace detail

// Line and column (1-based) of a byte offset.
inline std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t offset) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

inline RunConfig parse_config(const std::string& text) {
    RunConfig cfg;
    try {
        cfg.raw = Json::parse(text);
    } catch (const Json::parse_error& e) {
        const std::size_t offset = e.byte > 0 ? e.byte - 1 : 0;
        const auto [line, col] = line_column(text, offset);
        throw ParseError("config is not valid JSON (line " + std::to_string(line) + ", column " +
                             std::to_string(col) + ")",
                         offset);
    }
    const Json& j = cfg.raw;
    detail::check_keys(j, "config", {"task", "domain", "domains", "numeric", "data", "output"});
    if (j.contains("task")) cfg.task = detail::text(j["task"], "task");
    if (j.contains("domain")) cfg.domains.push_back(detail::parse_domain(j["domain"], "domain"));
    if (j.contains("domains")) {
        if (!j["domains"].is_array()) throw ArgumentError("'domains' must be an array");
        if (j.contains("domain")) throw ArgumentError("give either 'domain' or 'domains', not both");
        for (std::size_t i = 0; i < j["domains"].size(); ++i)
            cfg.domains.push_back(detail::parse_domain(j["domains"][i], "domains[" + std::to_string(i) + "]"));
    }
    if (j.contains("numeric")) {
        const Json& n = j["numeric"];
        detail::check_keys(n, "numeric",
                           {"n", "seed", "p", "lambda", "trials", "tolerance", "r", "r_fc", "r_prime", "r_boundary",
                            "grids", "oracle", "oracle_tolerance", "expected_l2_order", "expected_h1_order",
                            "order_tolerance", "audit_n", "roundtrip_samples"});
        auto& o = cfg.numeric;
        if (n.contains("n")) o.n = detail::integer(n["n"], "n");
        if (n.contains("seed")) {
            if (!n["seed"].is_number_unsigned()) throw ArgumentError("'seed' must be a non-negative integer");
            o.seed = n["seed"].get<std::uint64_t>();
        }
        if (n.contains("p")) o.p = detail::numbers(n["p"], "p");
        if (n.contains("lambda")) o.lambda = detail::numbers(n["lambda"], "lambda");
        if (n.contains("trials")) o.trials = detail::integer(n["trials"], "trials");
        if (n.contains("tolerance")) o.tolerance = detail::number(n["tolerance"], "tolerance");
        if (n.contains("r")) o.r = detail::number(n["r"], "r");
        if (n.contains("r_fc")) o.r_fc = detail::number(n["r_fc"], "r_fc");
        if (n.contains("r_prime")) o.r_prime = detail::numbers(n["r_prime"], "r_prime");
        if (n.contains("r_boundary")) o.r_boundary = detail::number(n["r_boundary"], "r_boundary");
        if (n.contains("grids")) {
            o.grids.clear();
            if (!n["grids"].is_array()) throw ArgumentError("'grids' must be an array of integers");
            for (const auto& g : n["grids"]) o.grids.push_back(detail::integer(g, "grids"));
        }
        if (n.contains("oracle")) o.oracle = detail::number(n["oracle"], "oracle");
        if (n.contains("oracle_tolerance")) o.oracle_tolerance = detail::number(n["oracle_tolerance"], "oracle_tolerance");
        if (n.contains("expected_l2_order")) o.expected_l2_order = detail::number(n["expected_l2_order"], "expected_l2_order");
        if (n.contains("expected_h1_order")) o.expected_h1_order = detail::number(n["expected_h1_order"], "expected_h1_order");
        if (n.contains("order_tolerance")) o.order_tolerance = detail::number(n["order_tolerance"], "order_tolerance");
        if (n.contains("audit_n")) o.audit_n = detail::integer(n["audit_n"], "audit_n");
        if (n.contains("roundtrip_samples")) o.roundtrip_samples = detail::integer(n["roundtrip_samples"], "roundtrip_samples");
        for (double p : o.p)
            if (!(p >= 1)) throw ArgumentError("'p' must be >= 1 or \"inf\"");
    }
    if (j.contains("data")) {
        detail::check_keys(j["data"], "data", {"source", "dirichlet", "neumann", "exact"});
        auto& d = cfg.data;
        if (j["data"].contains("source")) d.source = detail::text(j["data"]["source"], "source");
        if (j["data"].contains("dirichlet")) d.dirichlet = detail::text(j["data"]["dirichlet"], "dirichlet");
        if (j["data"].contains("neumann")) d.neumann = detail::text(j["data"]["neumann"], "neumann");
        if (j["data"].contains("exact")) d.exact = detail::text(j["data"]["exact"], "exact");
    }
    if (j.contains("output")) {
        detail::check_keys(j["output"], "output", {"dir"});
        if (j["output"].contains("dir")) cfg.out_dir = detail::text(j["output"]["dir"], "dir");
    }
    const int dim = cfg.dimension();
    for (const auto& b : cfg.domains)
        if (b.config.dimension != dim) throw ArgumentError("all domains must share one dimension");
    if (!cfg.domains.empty()) {
        const auto names = detail::coordinate_names(dim);
        const auto& params = cfg.domains.front().config.parameters;
        for (const auto* e : {&cfg.data.source, &cfg.data.dirichlet, &cfg.data.neumann, &cfg.data.exact})
            if (!e->empty()) Expression::parse(*e, names, params);
    }
    return cfg;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ArgumentError("cannot open config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

// Required fields of a task, checked before any computation.
inline void validate_for_task(const RunConfig& cfg, const std::string& task) {
    const auto& names = task_names();
    if (std::find(names.begin(), names.end(), task) == names.end()) throw ArgumentError("unknown task '" + task + "'");
    if (!cfg.task.empty() && cfg.task != task)
        throw ArgumentError("config task '" + cfg.task + "' does not match command-line task '" + task + "'");
    if (task == "family") {
        if (cfg.domains.empty() || !cfg.raw.contains("domains"))
            throw ArgumentError("task 'family' requires 'domains'");
    } else if (!cfg.raw.contains("domain")) {
        throw ArgumentError("task '" + task + "' requires 'domain'");
    }
    const auto& n = cfg.numeric;
    if (n.n < 8) throw ArgumentError("'n' must be at least 8");
    if (n.trials < 1) throw ArgumentError("'trials' must be positive");
    if ((task == "poincare" || task == "family") && n.trials < 50)
        throw ArgumentError("task '" + task + "' needs 'trials' >= 50");
    if ((task == "poincare" || task == "family" || task == "audit-geometry" || task == "hk-audit") && n.n < 16)
        throw ArgumentError("task '" + task + "' needs 'n' >= 16");
    if (task == "converge") {
        if (cfg.data.exact.empty()) throw ArgumentError("task 'converge' requires data.exact");
        if (n.grids.size() < 2) throw ArgumentError("task 'converge' needs at least two grids");
        for (int g : n.grids)
            if (g < 8) throw ArgumentError("'grids' entries must be at least 8");
    }
    if (task == "atlas" && !(n.r > 0)) throw ArgumentError("task 'atlas' needs 'r' > 0");
    if (task == "deform" && n.r_prime.empty() && !cfg.domains.front().deform.enabled)
        throw ArgumentError("task 'deform' requires numeric.r_prime or domain.deform");
}

}  // namespace boundedgeo
