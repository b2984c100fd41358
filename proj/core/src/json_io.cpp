#include "qpc/json_io.hpp"

#include "qpc/errors.hpp"

namespace qpc {

using json = nlohmann::json;

json to_json(const StripFunction& f) {
  json coeffs = json::array();
  for (int k = -f.order(); k <= f.order(); ++k) {
    const cdouble c = f.coeff(k);
    coeffs.push_back({c.real(), c.imag()});
  }
  return json{{"parity", f.parity() == Parity::Antiperiodic ? "antiperiodic"
                                                            : "periodic"},
              {"half_width", f.half_width()},
              {"N", f.order()},
              {"coeffs", std::move(coeffs)}};
}

StripFunction strip_function_from_json(const json& j) {
  const std::string parity = j.at("parity").get<std::string>();
  if (parity != "periodic" && parity != "antiperiodic")
    throw DomainError("unknown parity '" + parity + "'");
  const double hw = j.at("half_width").get<double>();
  const int n = j.at("N").get<int>();
  const json& coeffs = j.at("coeffs");
  if (static_cast<int>(coeffs.size()) != 2 * n + 1)
    throw DomainError("coeffs length must be 2N+1");
  std::vector<cdouble> c;
  c.reserve(coeffs.size());
  for (const json& e : coeffs)
    c.emplace_back(e.at(0).get<double>(), e.at(1).get<double>());
  return StripFunction(std::move(c), hw,
                       parity == "antiperiodic" ? Parity::Antiperiodic
                                                : Parity::Periodic);
}

json to_json(const MatrixFunction& m) {
  return json{{"a", to_json(m.a)},
              {"b", to_json(m.b)},
              {"c", to_json(m.c)},
              {"d", to_json(m.d)}};
}

MatrixFunction matrix_function_from_json(const json& j) {
  return MatrixFunction(
      strip_function_from_json(j.at("a")), strip_function_from_json(j.at("b")),
      strip_function_from_json(j.at("c")), strip_function_from_json(j.at("d")));
}

json to_json(const RegimeReport& r) {
  json profile = json::array();
  for (const auto& [eps, l] : r.profile) profile.push_back({eps, l});
  return json{{"L0", r.L0},
              {"profile", std::move(profile)},
              {"classification", regime_name(r.classification)},
              {"n_used", r.n_used},
              {"certificate", r.uh_verdict ? json(r.certificate) : json()}};
}

json to_json(const CondReport& r) {
  return json{{"delta1", r.delta1}, {"log_norm_profile", r.log_norms}};
}

json to_json(const ReductionResult& r) {
  json target = json::array();
  for (int i = 0; i < 2; ++i)
    for (int k = 0; k < 2; ++k) target.push_back(r.target(i, k));
  return json{{"case", reduction_case_name(r.kind)},
              {"residual", r.residual},
              {"delta_target", r.delta_target},
              {"eps", r.eps},
              {"B", to_json(r.B)},
              {"theta", to_json(r.theta)},
              {"target", std::move(target)},
              {"B_norm", r.B_norm},
              {"diagnostics", r.diagnostics}};
}

json to_json(const CFExpansion& cf) {
  json a = json::array();
  for (const BigInt& an : cf.a) a.push_back(an.str());
  json conv = json::array();
  for (const Convergent& c : cf.convergents)
    conv.push_back({c.p.str(), c.q.str()});
  json out{{"a", std::move(a)}, {"convergents", std::move(conv)}};
  if (cf.convergents.size() >= 2) out["beta_estimate"] = beta_estimate(cf);
  out["precision_exhausted"] = cf.precision_exhausted;
  out["terminated"] = cf.terminated;
  return out;
}

namespace {
template <typename T>
void maybe(const json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}
}  // namespace

void apply_config_json(const json& j, ReductionConfig& cfg) {
  maybe(j, "strip_ladder", cfg.strip_ladder);
  maybe(j, "delta1", cfg.delta1);
  maybe(j, "delta1q_max", cfg.delta1q_max);
  maybe(j, "delta3", cfg.delta3);
  maybe(j, "C0", cfg.C0);
  maybe(j, "C1", cfg.C1);
  maybe(j, "C3", cfg.C3);
  maybe(j, "C4", cfg.C4);
  maybe(j, "C5", cfg.C5);
  maybe(j, "q_min", cfg.q_min);
  maybe(j, "det_target", cfg.det_target);
  maybe(j, "residual_tol", cfg.residual_tol);
  maybe(j, "trunc_tol", cfg.trunc_tol);
  maybe(j, "lambda_tail_tol", cfg.lambda_tail_tol);
  maybe(j, "grid_oversample", cfg.grid_oversample);
  maybe(j, "x0_scan", cfg.x0_scan);
  maybe(j, "bezout_budget_C", cfg.bezout_budget_C);
  maybe(j, "floor_c", cfg.floor_c);
  maybe(j, "floor_C", cfg.floor_C);
  maybe(j, "b_floor", cfg.b_floor);
}

json to_json(const ReductionConfig& cfg) {
  return json{{"strip_ladder", cfg.strip_ladder},
              {"delta1", cfg.delta1},
              {"delta1q_max", cfg.delta1q_max},
              {"delta3", cfg.delta3},
              {"C0", cfg.C0},
              {"C1", cfg.C1},
              {"C3", cfg.C3},
              {"C4", cfg.C4},
              {"C5", cfg.C5},
              {"q_min", cfg.q_min},
              {"det_target", cfg.det_target},
              {"residual_tol", cfg.residual_tol},
              {"trunc_tol", cfg.trunc_tol},
              {"lambda_tail_tol", cfg.lambda_tail_tol},
              {"grid_oversample", cfg.grid_oversample},
              {"x0_scan", cfg.x0_scan},
              {"bezout_budget_C", cfg.bezout_budget_C},
              {"floor_c", cfg.floor_c},
              {"floor_C", cfg.floor_C},
              {"b_floor", cfg.b_floor}};
}

}  // namespace qpc
