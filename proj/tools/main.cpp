// qpc: classify / reduce / lyap / sweep / cf front door.
//
// Exit codes: 0 success, 2 precondition or solver failure (JSON error with
// the failing check's name and margins on stdout), 1 internal error.

#include <CLI11.hpp>
#include <atomic>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include "qpc/errors.hpp"
#include "qpc/json_io.hpp"

namespace {

using json = nlohmann::json;

struct CommonArgs {
  std::string family = "amo";
  double lambda = 0.5;
  double energy = 0.0;
  std::string freq = "golden";
  double eps0 = 0.05;
  long terms = 10000;
  int grid = 64;
  int workers = 1;
  std::string config_path;
  std::string out_path;
  std::string format = "json";
};

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw qpc::DomainError("cannot open config '" + path + "'");
  json j;
  in >> j;
  return j;
}

qpc::Cocycle make_cocycle(const CommonArgs& args, const json& cfg,
                          double energy) {
  const qpc::Frequency alpha = qpc::Frequency::parse(args.freq);
  const double hw = cfg.value("map_half_width", 2.0 * args.eps0);
  if (args.family == "amo")
    return qpc::almost_mathieu(args.lambda, energy, alpha, hw);
  if (args.family == "schrodinger" || args.family == "file") {
    if (cfg.contains("map")) {
      return qpc::Cocycle(alpha, qpc::matrix_function_from_json(cfg.at("map")));
    }
    json pot;
    if (cfg.contains("potential")) {
      pot = cfg.at("potential");
    } else if (cfg.contains("potential_file")) {
      std::ifstream in(cfg.at("potential_file").get<std::string>());
      if (!in) throw qpc::DomainError("cannot open potential file");
      in >> pot;
    } else {
      throw qpc::DomainError(
          "family '" + args.family +
          "' needs a 'potential', 'potential_file' or 'map' config entry");
    }
    return qpc::schrodinger(qpc::strip_function_from_json(pot), energy, alpha);
  }
  throw qpc::DomainError("unknown family '" + args.family + "'");
}

qpc::ReductionConfig make_reduction_config(const CommonArgs& args,
                                           const json& cfg) {
  qpc::ReductionConfig rc = qpc::ReductionConfig::defaults_for(args.eps0);
  qpc::apply_config_json(cfg, rc);
  return rc;
}

void emit(const CommonArgs& args, const std::string& text) {
  if (args.out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(args.out_path, std::ios::binary);
  if (!out) throw qpc::DomainError("cannot write '" + args.out_path + "'");
  out << text;
}

json run_classify(const CommonArgs& args, const json& cfg) {
  const qpc::Cocycle c = make_cocycle(args, cfg, args.energy);
  qpc::ClassifyOptions opt;
  opt.n = args.terms;
  opt.grid = args.grid;
  std::vector<double> eps_grid;
  for (int i = 1; i <= 4; ++i) eps_grid.push_back(args.eps0 * i / 4.0);
  return qpc::to_json(qpc::classify(c, eps_grid, opt));
}

json run_reduce(const CommonArgs& args, const json& cfg) {
  const qpc::Cocycle c = make_cocycle(args, cfg, args.energy);
  if (!c.alpha.is_rational())
    throw qpc::PreconditionFailed(
        "reduce needs an exact rational frequency (got '" + args.freq + "')");
  return qpc::to_json(qpc::reduce(c, make_reduction_config(args, cfg)));
}

json run_lyap(const CommonArgs& args, const json& cfg) {
  const qpc::Cocycle c = make_cocycle(args, cfg, args.energy);
  json profile = json::array();
  for (int i = 0; i <= 4; ++i) {
    const double eps = args.eps0 * i / 4.0;
    profile.push_back({eps, qpc::lyapunov(c, eps, args.terms, args.grid)});
  }
  return json{{"n", args.terms},
              {"grid", args.grid},
              {"profile", std::move(profile)}};
}

json run_cf(const std::string& alpha, long terms) {
  const qpc::CFExpansion cf =
      qpc::expand(qpc::Frequency::parse(alpha), static_cast<int>(terms));
  return qpc::to_json(cf);
}

struct SweepRow {
  double energy = 0.0;
  json payload;
};

json run_sweep(const CommonArgs& args, const json& cfg,
               const std::string& energy_spec) {
  double lo = args.energy, hi = args.energy;
  int steps = 1;
  {
    std::istringstream ss(energy_spec);
    std::string a, b, c;
    std::getline(ss, a, ':');
    if (std::getline(ss, b, ':')) {
      if (!std::getline(ss, c, ':'))
        throw qpc::DomainError("sweep energy spec must be min:max:steps");
      lo = std::stod(a);
      hi = std::stod(b);
      steps = std::stoi(c);
      if (steps < 1) throw qpc::DomainError("steps must be >= 1");
    } else {
      lo = hi = std::stod(a);
    }
  }

  std::vector<SweepRow> rows(steps);
  std::atomic<int> next{0};
  const int workers = std::max(1, args.workers);
  auto work = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= steps) return;
      const double e = steps == 1 ? lo : lo + (hi - lo) * i / (steps - 1);
      SweepRow row;
      row.energy = e;
      try {
        const qpc::Cocycle c = make_cocycle(args, cfg, e);
        qpc::ClassifyOptions opt;
        opt.n = args.terms;
        opt.grid = args.grid;
        std::vector<double> eps_grid;
        for (int k = 1; k <= 4; ++k) eps_grid.push_back(args.eps0 * k / 4.0);
        const qpc::RegimeReport rep = qpc::classify(c, eps_grid, opt);
        row.payload["L0"] = rep.L0;
        row.payload["classification"] = qpc::regime_name(rep.classification);
        if (c.alpha.is_rational()) {
          try {
            const qpc::ReductionResult rr =
                qpc::reduce(c, make_reduction_config(args, cfg));
            row.payload["case"] = qpc::reduction_case_name(rr.kind);
            row.payload["residual"] = rr.residual;
            row.payload["delta_target"] = rr.delta_target;
          } catch (const qpc::Error& err) {
            row.payload["reduce_error"] = err.kind();
          }
        }
      } catch (const qpc::Error& err) {
        row.payload["error"] = err.kind();
      }
      rows[i] = std::move(row);
    }
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (std::thread& th : pool) th.join();

  json out = json::array();
  for (const SweepRow& row : rows) {
    json r = row.payload;
    r["energy"] = row.energy;
    out.push_back(std::move(r));
  }
  return out;
}

std::string sweep_csv(const json& rows) {
  std::ostringstream os;
  os << "energy,L0,classification,case,residual,delta_target,error\n";
  auto fmt = [](const json& row, const char* key) -> std::string {
    if (!row.contains(key)) return "";
    const json& v = row.at(key);
    if (v.is_string()) return v.get<std::string>();
    return json(v).dump();
  };
  for (const json& row : rows) {
    std::string err = fmt(row, "error");
    if (err.empty()) err = fmt(row, "reduce_error");
    os << json(row.at("energy")).dump() << ',' << fmt(row, "L0") << ','
       << fmt(row, "classification") << ',' << fmt(row, "case") << ','
       << fmt(row, "residual") << ',' << fmt(row, "delta_target") << ','
       << err << '\n';
  }
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Analytic quasi-periodic SL(2,R) cocycles: Lyapunov regimes "
               "and constructive rational reduction"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string cf_alpha;
  std::string sweep_energy;

  auto add_common = [&](CLI::App* sub, bool with_family = true) {
    if (with_family)
      sub->add_option("--family", args.family, "amo | schrodinger | file");
    sub->add_option("--lambda", args.lambda, "coupling for the amo family");
    sub->add_option("--freq", args.freq,
                    "frequency: p/q, decimal string, or 'golden'");
    sub->add_option("--eps0", args.eps0, "base strip half-width");
    sub->add_option("--terms", args.terms, "iterate count (cf: CF terms)");
    sub->add_option("--grid", args.grid, "sample grid size");
    sub->add_option("--workers", args.workers, "parallel workers (sweep)");
    sub->add_option("--config", args.config_path,
                    "JSON config (ReductionConfig field names)");
    sub->add_option("--out", args.out_path, "output path (default stdout)");
    sub->add_option("--format", args.format, "json | csv");
  };

  CLI::App* classify = app.add_subcommand("classify", "regime classification");
  add_common(classify);
  classify->add_option("--energy", args.energy, "spectral parameter");

  CLI::App* reduce = app.add_subcommand("reduce", "rational reduction");
  add_common(reduce);
  reduce->add_option("--energy", args.energy, "spectral parameter");

  CLI::App* lyap = app.add_subcommand("lyap", "Lyapunov profile");
  add_common(lyap);
  lyap->add_option("--energy", args.energy, "spectral parameter");

  CLI::App* sweep = app.add_subcommand("sweep", "parameter sweep over energy");
  add_common(sweep);
  sweep->add_option("--energy", sweep_energy, "min:max:steps or single value")
      ->required();

  CLI::App* cf = app.add_subcommand("cf", "continued fraction expansion");
  cf->add_option("alpha", cf_alpha, "frequency to expand")->required();
  add_common(cf, false);

  CLI11_PARSE(app, argc, argv);

  try {
    const json cfg = load_config(args.config_path);
    json result;
    std::string text;
    if (app.got_subcommand(classify)) {
      result = run_classify(args, cfg);
    } else if (app.got_subcommand(reduce)) {
      result = run_reduce(args, cfg);
    } else if (app.got_subcommand(lyap)) {
      result = run_lyap(args, cfg);
    } else if (app.got_subcommand(sweep)) {
      result = run_sweep(args, cfg, sweep_energy);
      if (args.format == "csv") text = sweep_csv(result);
    } else if (app.got_subcommand(cf)) {
      result = run_cf(cf_alpha, args.terms);
    }
    if (text.empty()) text = result.dump(2) + "\n";
    emit(args, text);
    return 0;
  } catch (const qpc::Error& e) {
    json err{{"error", {{"kind", e.kind()}, {"message", e.what()}}}};
    json margins = json::object();
    for (const auto& [name, value] : e.margins()) margins[name] = value;
    if (!margins.empty()) err["error"]["margins"] = margins;
    std::cout << err.dump(2) << std::endl;
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << std::endl;
    return 1;
  }
}
