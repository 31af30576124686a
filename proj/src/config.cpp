#include "misim/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <vector>

namespace misim::config {

namespace {

const std::vector<std::string> kKnownKeys = {
    "seed",       "n",         "p_miss",        "p_ext",
    "rho",        "M",         "n_sim",         "methods",
    "branches",   "workers",   "allow_custom",  "keep_replicates",
    "dump_data",  "dump_fits", "d_pool",        "n_trees",
    "min_leaf",   "max_depth", "support_threshold"};

std::size_t edit_distance(const std::string& a, const std::string& b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t sub = prev[j - 1] + (a[i - 1] != b[j - 1]);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

std::string nearest_key(const std::string& key) {
    std::string best;
    std::size_t best_d = 4;  // only suggest close matches
    for (const auto& k : kKnownKeys) {
        const std::size_t d = edit_distance(key, k);
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    return best;
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> out;
    std::string token;
    for (char c : value) {
        if (c == ',' || c == ' ' || c == '\t') {
            if (!token.empty()) out.push_back(std::move(token));
            token.clear();
        } else {
            token += c;
        }
    }
    if (!token.empty()) out.push_back(std::move(token));
    return out;
}

double parse_double(const std::string& s, const std::string& key) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("invalid numeric value '" + s + "' for key " + key);
    }
}

long parse_long(const std::string& s, const std::string& key) {
    try {
        std::size_t pos = 0;
        const long v = std::stol(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("invalid integer value '" + s + "' for key " + key);
    }
}

bool parse_bool(const std::string& s, const std::string& key) {
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError("invalid boolean value '" + s + "' for key " + key);
}

imputers::MethodId parse_method(const std::string& s) {
    for (imputers::MethodId m : imputers::all_methods())
        if (imputers::method_name(m) == s) return m;
    throw ConfigError("unknown method '" + s + "' (expected T1..T6)");
}

mc::BranchId parse_branch(const std::string& s) {
    if (s == "clean-ols") return mc::BranchId::clean_ols;
    if (s == "contaminated-en") return mc::BranchId::contaminated_en;
    throw ConfigError("unknown branch '" + s + "' (expected clean-ols or contaminated-en)");
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

RunConfig::RunConfig() {
    // The single smoke scenario used when no factors are given.
    grid.n_levels = {40};
    grid.p_miss_levels = {0.25};
    grid.p_ext_levels = {0.05};
    grid.rho_levels = {0.6};
    grid.m_levels = {5};
    grid.n_sim_levels = {50};
}

std::vector<mc::Scenario> RunConfig::scenarios() const {
    std::vector<mc::Scenario> out = mc::expand_grid(grid);
    for (const auto& sc : out) sc.validate(allow_custom);
    return out;
}

RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto list = split_list(value);

        if (key == "seed") {
            cfg.seed = static_cast<std::uint64_t>(std::stoull(value));
        } else if (key == "n") {
            cfg.grid.n_levels.clear();
            for (const auto& v : list)
                cfg.grid.n_levels.push_back(static_cast<std::size_t>(parse_long(v, key)));
        } else if (key == "p_miss") {
            cfg.grid.p_miss_levels.clear();
            for (const auto& v : list) cfg.grid.p_miss_levels.push_back(parse_double(v, key));
        } else if (key == "p_ext") {
            cfg.grid.p_ext_levels.clear();
            for (const auto& v : list) cfg.grid.p_ext_levels.push_back(parse_double(v, key));
        } else if (key == "rho") {
            cfg.grid.rho_levels.clear();
            for (const auto& v : list) cfg.grid.rho_levels.push_back(parse_double(v, key));
        } else if (key == "M") {
            cfg.grid.m_levels.clear();
            for (const auto& v : list)
                cfg.grid.m_levels.push_back(static_cast<int>(parse_long(v, key)));
        } else if (key == "n_sim") {
            cfg.grid.n_sim_levels.clear();
            for (const auto& v : list)
                cfg.grid.n_sim_levels.push_back(static_cast<int>(parse_long(v, key)));
        } else if (key == "methods") {
            cfg.grid.methods.clear();
            for (const auto& v : list) cfg.grid.methods.push_back(parse_method(v));
        } else if (key == "branches") {
            cfg.grid.branches.clear();
            for (const auto& v : list) cfg.grid.branches.push_back(parse_branch(v));
        } else if (key == "workers") {
            cfg.workers = static_cast<int>(parse_long(value, key));
        } else if (key == "allow_custom") {
            cfg.allow_custom = parse_bool(value, key);
        } else if (key == "keep_replicates") {
            cfg.keep_replicates = parse_bool(value, key);
        } else if (key == "dump_data") {
            cfg.dump_data = parse_bool(value, key);
        } else if (key == "dump_fits") {
            cfg.dump_fits = parse_bool(value, key);
        } else if (key == "d_pool") {
            cfg.imputer.d_pool = static_cast<int>(parse_long(value, key));
        } else if (key == "n_trees") {
            cfg.imputer.n_trees = static_cast<int>(parse_long(value, key));
        } else if (key == "min_leaf") {
            cfg.imputer.min_leaf = static_cast<int>(parse_long(value, key));
        } else if (key == "max_depth") {
            cfg.imputer.max_depth = static_cast<int>(parse_long(value, key));
        } else if (key == "support_threshold") {
            cfg.imputer.support_threshold = parse_double(value, key);
        } else {
            const std::string hint = nearest_key(key);
            std::string msg = "unknown key " + key;
            if (!hint.empty()) msg += " (did you mean " + hint + "?)";
            throw ConfigError(msg);
        }
    }
    return cfg;
}

RunConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

std::string serialize(const RunConfig& c) {
    std::ostringstream out;
    out << "seed = " << c.seed << "\n";
    auto list = [&out](const char* key, const auto& values, auto format) {
        out << key << " =";
        for (const auto& v : values) out << " " << format(v);
        out << "\n";
    };
    auto num = [](const auto& v) {
        std::ostringstream s;
        s << v;
        return s.str();
    };
    list("n", c.grid.n_levels, num);
    list("p_miss", c.grid.p_miss_levels, num);
    list("p_ext", c.grid.p_ext_levels, num);
    list("rho", c.grid.rho_levels, num);
    list("M", c.grid.m_levels, num);
    list("n_sim", c.grid.n_sim_levels, num);
    list("methods", c.grid.methods, [](imputers::MethodId m) { return imputers::method_name(m); });
    list("branches", c.grid.branches, [](mc::BranchId b) { return mc::branch_name(b); });
    out << "workers = " << c.workers << "\n";
    out << "allow_custom = " << (c.allow_custom ? "true" : "false") << "\n";
    out << "keep_replicates = " << (c.keep_replicates ? "true" : "false") << "\n";
    out << "dump_data = " << (c.dump_data ? "true" : "false") << "\n";
    out << "dump_fits = " << (c.dump_fits ? "true" : "false") << "\n";
    out << "d_pool = " << c.imputer.d_pool << "\n";
    out << "n_trees = " << c.imputer.n_trees << "\n";
    out << "min_leaf = " << c.imputer.min_leaf << "\n";
    out << "max_depth = " << c.imputer.max_depth << "\n";
    out << "support_threshold = " << c.imputer.support_threshold << "\n";
    return out.str();
}

}  // namespace misim::config
