#include "moelab/io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace moelab {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

TokenBatch load_token_csv(std::istream& in, const std::string& name) {
    TokenBatch batch;
    std::vector<double> values;
    std::string line;
    std::size_t lineno = 0;
    std::size_t dim = 0;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::size_t cols = 0;
        while (std::getline(ss, cell, ',')) {
            const std::string v = trim(cell);
            try {
                std::size_t used = 0;
                const double x = std::stod(v, &used);
                if (used != v.size()) throw std::invalid_argument("trailing junk");
                values.push_back(x);
            } catch (const std::exception&) {
                throw InputError(name + ":" + std::to_string(lineno) +
                                 ": cannot parse value '" + v + "'");
            }
            ++cols;
        }
        if (cols == 0) {
            throw InputError(name + ":" + std::to_string(lineno) + ": empty row");
        }
        if (dim == 0) {
            dim = cols;
        } else if (cols != dim) {
            throw InputError(name + ":" + std::to_string(lineno) + ": row has " +
                             std::to_string(cols) + " values, expected " + std::to_string(dim));
        }
        ++rows;
    }
    if (rows == 0) throw InputError(name + ": no tokens");
    batch.tokens.rows = rows;
    batch.tokens.cols = dim;
    batch.tokens.data = std::move(values);
    require_finite(batch.tokens, name);
    return batch;
}

TokenBatch load_token_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError(path + ": cannot open");
    return load_token_csv(in, path);
}

void save_token_csv(const TokenBatch& batch, std::ostream& out) {
    char buf[64];
    for (std::size_t t = 0; t < batch.token_count(); ++t) {
        for (std::size_t j = 0; j < batch.dim(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", batch.tokens(t, j));
            out << (j ? "," : "") << buf;
        }
        out << "\n";
    }
}

TokenBatch load_token_bin_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError(path + ": cannot open");
    std::uint32_t s = 0, d = 0;
    in.read(reinterpret_cast<char*>(&s), 4);
    in.read(reinterpret_cast<char*>(&d), 4);
    if (!in) throw InputError(path + ": truncated header");
    if (s == 0 || d == 0) throw InputError(path + ": header declares empty batch");
    std::vector<float> raw(static_cast<std::size_t>(s) * d);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size() * 4));
    if (!in) throw InputError(path + ": truncated payload");
    TokenBatch batch;
    batch.tokens = Matrix(s, d);
    for (std::size_t k = 0; k < raw.size(); ++k) batch.tokens.data[k] = raw[k];
    require_finite(batch.tokens, path);
    return batch;
}

void save_token_bin_file(const TokenBatch& batch, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError(path + ": cannot open for writing");
    const std::uint32_t s = static_cast<std::uint32_t>(batch.token_count());
    const std::uint32_t d = static_cast<std::uint32_t>(batch.dim());
    out.write(reinterpret_cast<const char*>(&s), 4);
    out.write(reinterpret_cast<const char*>(&d), 4);
    std::vector<float> raw(batch.tokens.data.size());
    for (std::size_t k = 0; k < raw.size(); ++k) raw[k] = static_cast<float>(batch.tokens.data[k]);
    out.write(reinterpret_cast<const char*>(raw.data()),
              static_cast<std::streamsize>(raw.size() * 4));
}

TokenBatch load_token_file(const std::string& path) {
    if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".bin") == 0) {
        return load_token_bin_file(path);
    }
    return load_token_csv_file(path);
}

void save_matrix_csv(const Matrix& m, std::ostream& out) {
    char buf[64];
    for (std::size_t r = 0; r < m.rows; ++r) {
        for (std::size_t c = 0; c < m.cols; ++c) {
            std::snprintf(buf, sizeof(buf), "%.17g", m(r, c));
            out << (c ? "," : "") << buf;
        }
        out << "\n";
    }
}

KeyValueConfig parse_kv_config(std::istream& in, const std::string& name) {
    KeyValueConfig cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string t = trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw InputError(name + ":" + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.empty()) {
            throw InputError(name + ":" + std::to_string(lineno) + ": empty key");
        }
        if (cfg.count(key)) {
            throw InputError(name + ":" + std::to_string(lineno) + ": duplicate key '" + key +
                             "'");
        }
        cfg[key] = value;
    }
    return cfg;
}

KeyValueConfig parse_kv_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError(path + ": cannot open");
    return parse_kv_config(in, path);
}

nlohmann::json plan_to_json(const DispatchPlan& plan) {
    nlohmann::json j;
    j["mode"] = route_mode_name(plan.mode);
    j["capacity"] = plan.capacity;
    j["experts"] = plan.per_expert;
    auto& dropped = j["dropped"] = nlohmann::json::array();
    for (const auto& [token, expert] : plan.dropped) {
        dropped.push_back({token, expert});
    }
    j["ell_star"] = plan.ell_star;
    return j;
}

nlohmann::json bounds_to_json(const TheoremBounds& b) {
    return {
        {"tcr_lower", b.tcr_lower},
        {"tcr_upper", b.tcr_upper},
        {"ecr_upper_tail", b.ecr_upper_tail},
        {"ecr_lower_tail", b.ecr_lower_tail},
        {"validity",
         {{"tcr_lower", b.tcr_lower_valid},
          {"ecr_upper_tail", b.ecr_upper_valid},
          {"ecr_lower_tail", b.ecr_lower_valid}}},
    };
}

nlohmann::json spec_to_json(const SimSpec& spec) {
    return {
        {"s", spec.tokens},         {"n", spec.experts}, {"c", spec.capacity},
        {"p", spec.true_positive},  {"q", spec.false_positive},
        {"trials", spec.trials},    {"seed", spec.seed},
    };
}

nlohmann::json estimate_to_json(const SuccessEstimate& est) {
    nlohmann::json j;
    j["estimate"] = est.estimate;
    j["std_error"] = est.std_error;
    if (est.exact) j["exact"] = *est.exact;
    if (est.bounds) j["bounds"] = bounds_to_json(*est.bounds);
    return j;
}

}  // namespace moelab
