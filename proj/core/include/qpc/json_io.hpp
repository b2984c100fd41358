#ifndef QPC_JSON_IO_HPP
#define QPC_JSON_IO_HPP

#include <json.hpp>

#include "qpc/arithmetic.hpp"
#include "qpc/cocycle.hpp"
#include "qpc/reducer.hpp"

namespace qpc {

// StripFunction wire format (bit-exact double round-trip):
//   {parity, half_width, N, coeffs: [[re, im], ...]} with coeffs k = -N..N.
nlohmann::json to_json(const StripFunction& f);
StripFunction strip_function_from_json(const nlohmann::json& j);

nlohmann::json to_json(const MatrixFunction& m);
MatrixFunction matrix_function_from_json(const nlohmann::json& j);

nlohmann::json to_json(const RegimeReport& r);
nlohmann::json to_json(const CondReport& r);
nlohmann::json to_json(const ReductionResult& r);
nlohmann::json to_json(const CFExpansion& cf);

// Applies the keys present in j on top of cfg (names mirror the struct).
void apply_config_json(const nlohmann::json& j, ReductionConfig& cfg);
nlohmann::json to_json(const ReductionConfig& cfg);

}  // namespace qpc

#endif  // QPC_JSON_IO_HPP
