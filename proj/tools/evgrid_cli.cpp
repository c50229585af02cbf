// evgrid: run the two-stage charging/dispatch simulation, the offline
// enumeration oracle, case validation, or a single-slot debug solve.
//
// Exit codes: 0 success, 1 infeasible, 2 input error, 3 nonconvergence.

#include <evgrid/report.hpp>

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

namespace {

bool verbose_logging() {
  const char* v = std::getenv("EVGRID_LOG");
  return v && std::string(v) != "" && std::string(v) != "0";
}

struct Args {
  std::string mode = "simulate";
  std::string case_path;
  std::string fleet_path;
  std::string out_dir = ".";
  double mu = 10.0, lambda = 1.0, L = 1.5, eps = 1e-4;
  int max_iters = 100;
  int slot = 0;
  unsigned long long seed = 0;
  bool seed_set = false;
};

evgrid::mpc::MpcOptions make_options(const Args& a) {
  evgrid::mpc::MpcOptions opts;
  opts.stage1.penalty.mu = a.mu;
  opts.stage1.penalty.lambda = a.lambda;
  opts.stage1.penalty.L = a.L;
  opts.stage1.penalty.eps = a.eps;
  opts.stage1.max_outer = a.max_iters;
  opts.stage2.lambda = a.lambda;
  opts.stage2.eps = a.eps;
  opts.rank_eps = a.eps;
  return opts;
}

std::vector<evgrid::fleet::PevRecord> load_fleet_arg(const Args& a,
                                                     const evgrid::grid::GridCase& gc,
                                                     const evgrid::grid::ScenarioProfiles& pr) {
  if (a.fleet_path.empty()) return {};
  if (!a.seed_set) return evgrid::fleet::load_fleet(a.fleet_path, gc.station_buses(),
                                                    pr.slot_hours, pr.slot_count);
  // --seed overrides the seed embedded in a fleet config document
  std::ifstream in(a.fleet_path);
  if (!in) throw evgrid::fleet::FleetError("cannot open fleet file: " + a.fleet_path);
  nlohmann::json j;
  in >> j;
  if (j.is_array())
    return evgrid::fleet::records_from_json(j, pr.slot_count, pr.slot_hours);
  auto cfg = evgrid::fleet::fleet_config_from_json(j);
  cfg.seed = a.seed;
  return evgrid::fleet::generate_fleet(cfg, gc.station_buses(), pr.slot_hours, pr.slot_count);
}

int run_simulate(const Args& a) {
  auto [gc, pr] = evgrid::grid::load_case(a.case_path);
  auto records = load_fleet_arg(a, gc, pr);
  auto trace = evgrid::mpc::run_mpc(gc, pr, records, make_options(a));

  if (trace.status != evgrid::mpc::MpcStatus::Ok) {
    std::cerr << "simulation failed at slot " << trace.failed_slot << ": " << trace.message
              << "\n";
    return trace.status == evgrid::mpc::MpcStatus::Infeasible ? 1 : 3;
  }

  namespace fs = std::filesystem;
  fs::create_directories(a.out_dir);
  const std::string trace_csv = (fs::path(a.out_dir) / "trace.csv").string();
  const std::string trace_json = (fs::path(a.out_dir) / "trace.json").string();
  const std::string soc_csv = (fs::path(a.out_dir) / "soc.csv").string();
  const std::string summary = (fs::path(a.out_dir) / "summary.json").string();
  const std::string manifest = (fs::path(a.out_dir) / "manifest.json").string();

  evgrid::report::write_trace_csv(trace_csv, gc, trace);
  evgrid::report::write_soc_csv(soc_csv, records, trace);
  evgrid::report::write_json(trace_json, evgrid::report::trace_to_json(gc, trace));
  evgrid::report::write_json(summary,
                             evgrid::report::summary_json(trace, records, a.mu, a.lambda));
  evgrid::report::write_json(
      manifest, {{"files", {"trace.csv", "trace.json", "soc.csv", "summary.json"}}});

  if (!trace.unmet_demand_pevs.empty()) {
    std::cerr << "warning: unmet demand for pevs:";
    for (int id : trace.unmet_demand_pevs) std::cerr << " " << id;
    std::cerr << "\n";
  }
  std::cout << "objective " << evgrid::report::fmt(trace.objective) << " over "
            << trace.slots.size() << " slots; outputs in " << a.out_dir << "\n";
  return 0;
}

int run_oracle(const Args& a) {
  auto [gc, pr] = evgrid::grid::load_case(a.case_path);
  auto records = load_fleet_arg(a, gc, pr);

  auto trace = evgrid::mpc::run_mpc(gc, pr, records, make_options(a));
  if (trace.status != evgrid::mpc::MpcStatus::Ok) {
    std::cerr << "mpc failed at slot " << trace.failed_slot << ": " << trace.message << "\n";
    return trace.status == evgrid::mpc::MpcStatus::Infeasible ? 1 : 3;
  }
  auto oracle = evgrid::mpc::brute_force_oracle(gc, pr, records);

  nlohmann::json j;
  j["mpc_objective"] = trace.objective;
  j["oracle_objective"] = oracle.objective;
  j["relative_difference"] =
      std::abs(trace.objective - oracle.objective) / std::max(1.0, std::abs(oracle.objective));
  j["candidates"] = oracle.candidates;
  for (const auto& [id, slots] : oracle.schedule)
    j["oracle_schedule"][std::to_string(id)] = slots;

  namespace fs = std::filesystem;
  fs::create_directories(a.out_dir);
  evgrid::report::write_json((fs::path(a.out_dir) / "oracle.json").string(), j);
  evgrid::report::write_json((fs::path(a.out_dir) / "manifest.json").string(),
                             {{"files", {"oracle.json"}}});
  std::cout << "mpc " << evgrid::report::fmt(trace.objective) << " vs oracle "
            << evgrid::report::fmt(oracle.objective) << " (" << oracle.candidates
            << " candidates)\n";
  return 0;
}

int run_validate(const Args& a) {
  auto [gc, pr] = evgrid::grid::load_case(a.case_path);
  std::cout << "case ok: " << gc.bus_count << " buses, " << gc.lines.size() << " lines, "
            << gc.generators.size() << " generators, " << pr.slot_count << " slots\n";
  if (!a.fleet_path.empty()) {
    auto records = load_fleet_arg(a, gc, pr);
    std::cout << "fleet ok: " << records.size() << " pevs\n";
  }
  return 0;
}

int run_solve_slot(const Args& a) {
  auto [gc, pr] = evgrid::grid::load_case(a.case_path);
  auto records = load_fleet_arg(a, gc, pr);
  evgrid::fleet::FleetState st(records);
  // fast-forward (no charging applied) so arrivals up to the slot are visible
  while (st.clock < a.slot) st.advance({}, pr.slot_hours);

  auto opts = make_options(a);
  auto res = evgrid::micp::solve_micp(gc, pr, st, opts.stage1);
  if (verbose_logging()) std::cerr << res.diagnostics_jsonl();
  if (res.verdict == evgrid::micp::MicpVerdict::Infeasible) {
    std::cerr << "slot " << a.slot << " infeasible\n";
    return 1;
  }
  if (res.verdict != evgrid::micp::MicpVerdict::Optimal) {
    std::cerr << "slot " << a.slot << " did not converge: " << evgrid::micp::to_string(res.verdict)
              << "\n";
    return 3;
  }
  nlohmann::json j;
  j["slot"] = a.slot;
  j["horizon"] = {res.t0, res.t1};
  j["objective"] = res.objective;
  j["relaxed_objective"] = res.relaxed_objective;
  j["iterations"] = res.iterations.size();
  for (const auto& [key, tau] : res.tau)
    j["tau"][std::to_string(key.first)][std::to_string(key.second)] = tau;
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"two-stage PEV charging and grid dispatch"};
  Args a;
  app.add_option("--mode", a.mode, "simulate | oracle | validate | solve-slot")
      ->check(CLI::IsMember({"simulate", "oracle", "validate", "solve-slot"}));
  app.add_option("--case", a.case_path, "grid case JSON")->required();
  app.add_option("--fleet", a.fleet_path, "fleet config or record-list JSON");
  app.add_option("--mu", a.mu, "binary penalty weight");
  app.add_option("--lambda", a.lambda, "rank-one penalty weight");
  app.add_option("--L", a.L, "penalty exponent (> 1)");
  app.add_option("--eps", a.eps, "binary/rank tolerance");
  app.add_option("--seed", a.seed, "override fleet generation seed");
  app.add_option("--out", a.out_dir, "output directory");
  app.add_option("--max-iters", a.max_iters, "outer iteration cap");
  app.add_option("--slot", a.slot, "slot index for solve-slot");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) ? 2 : 0;
  }
  for (int i = 1; i < argc; ++i)
    if (std::string(argv[i]).rfind("--seed", 0) == 0) a.seed_set = true;
  if (a.L <= 1.0 || a.eps <= 0.0 || a.mu <= 0.0 || a.lambda <= 0.0) {
    std::cerr << "invalid parameters: require mu > 0, lambda > 0, L > 1, eps > 0\n";
    return 2;
  }

  try {
    if (a.mode == "simulate") return run_simulate(a);
    if (a.mode == "oracle") return run_oracle(a);
    if (a.mode == "validate") return run_validate(a);
    return run_solve_slot(a);
  } catch (const evgrid::grid::CaseError& e) {
    std::cerr << "case error: " << e.what() << "\n";
    return 2;
  } catch (const evgrid::fleet::FleetError& e) {
    std::cerr << "fleet error: " << e.what() << "\n";
    return 2;
  } catch (const evgrid::builder::InfeasibleDemand& e) {
    std::cerr << "infeasible demand: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
