// io.hpp - Token batch file formats, flat key/value configs, JSON encoding.
//
// Token CSV: one token per line, d comma-separated decimals.
// Token binary: 8-byte header (u32 token count, u32 dim, little endian)
// followed by count*dim float32 values, row-major, little endian.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "moelab/gating.hpp"
#include "moelab/routing.hpp"
#include "moelab/theory.hpp"

namespace moelab {

// Thrown for malformed input files; messages carry line numbers where known.
struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

TokenBatch load_token_csv(std::istream& in, const std::string& name = "<stream>");
TokenBatch load_token_csv_file(const std::string& path);
void save_token_csv(const TokenBatch& batch, std::ostream& out);

TokenBatch load_token_bin_file(const std::string& path);
void save_token_bin_file(const TokenBatch& batch, const std::string& path);

// Loads by extension: ".bin" binary, anything else CSV.
TokenBatch load_token_file(const std::string& path);

void save_matrix_csv(const Matrix& m, std::ostream& out);

// Flat "key = value" document; '#' starts a comment, blank lines ignored.
using KeyValueConfig = std::map<std::string, std::string>;
KeyValueConfig parse_kv_config(std::istream& in, const std::string& name = "<stream>");
KeyValueConfig parse_kv_config_file(const std::string& path);

nlohmann::json plan_to_json(const DispatchPlan& plan);
nlohmann::json bounds_to_json(const TheoremBounds& b);
nlohmann::json spec_to_json(const SimSpec& spec);
nlohmann::json estimate_to_json(const SuccessEstimate& est);

}  // namespace moelab
