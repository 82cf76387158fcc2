// handsoff: command-line front end.
//
//   handsoff check    problem.json [--json]
//   handsoff solve    problem.json [--n-grid N] [--tol t] [--out u.csv]
//                                  [--signal s.json]
//   handsoff encode   signal.json out.hoc [--bits b] [--problem problem.json]
//   handsoff decode   in.hoc [--out signal.json]
//   handsoff simulate problem.json [--horizons K] [--loss p] [--seed s]
//                                  [--budget bits] [--bits b] [--out prefix]
//   handsoff sweep    problem.json [--bits 4..12] [--horizons K] [--out t.csv]
//
// Exit codes: 0 ok, 1 internal error, 2 malformed input, 3 infeasible,
// 4 iteration limit, 5 codec error, 6 divergence.

#include <cstdint>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "handsoff/codec.hpp"
#include "handsoff/errors.hpp"
#include "handsoff/io.hpp"
#include "handsoff/model.hpp"
#include "handsoff/netsim.hpp"
#include "handsoff/plot.hpp"
#include "handsoff/solver.hpp"
#include "handsoff/structure.hpp"

namespace {

using namespace handsoff;

enum ExitCode {
  kOk = 0,
  kInternal = 1,
  kMalformed = 2,
  kInfeasible = 3,
  kMaxIters = 4,
  kCodec = 5,
  kDivergence = 6,
};

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

SwitchPlacement parse_placement(const std::string& s) {
  if (s == "left") return SwitchPlacement::left_edge;
  if (s == "area") return SwitchPlacement::area;
  throw InvalidInput("placement must be \"left\" or \"area\"");
}

std::vector<int> parse_bits(const std::string& text) {
  std::vector<int> out;
  const auto dots = text.find("..");
  try {
    if (dots != std::string::npos) {
      const int lo = std::stoi(text.substr(0, dots));
      const int hi = std::stoi(text.substr(dots + 2));
      for (int b = lo; b <= hi; ++b) out.push_back(b);
    } else {
      std::stringstream ss(text);
      std::string item;
      while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
    }
  } catch (const std::exception&) {
    throw InvalidInput("--bits expects a range like 4..12 or a list 4,8,12");
  }
  if (out.empty()) throw InvalidInput("--bits selects no values");
  for (int b : out) {
    if (b < 1 || b > 32) throw InvalidInput("bit counts must lie in 1..32");
  }
  return out;
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("HANDSOFF_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw InvalidInput("HANDSOFF_SEED is not an unsigned integer");
    }
  }
  return kDefaultSeed;
}

int cmd_check(const std::string& path, bool as_json) {
  const ProblemFile pf = load_problem(path);
  const PlantModel plant = pf.plant();
  const ControllabilityResult ctrb = is_controllable(plant);
  const SpectralInfo spectrum = spectral_info(plant.A());
  std::optional<double> tmin;
  if (ctrb.controllable) {
    try {
      tmin = minimum_time(plant, pf.x0);
    } catch (const UnboundedSearch&) {
    }
  }

  json eig = json::array();
  for (const auto& l : spectrum.eigenvalues) eig.push_back({l.real(), l.imag()});
  json out = {{"n", plant.n()},
              {"m", plant.m()},
              {"controllable", ctrb.controllable},
              {"rank", ctrb.rank},
              {"eigenvalues", eig},
              {"omega", spectrum.omega},
              {"a_nonsingular", spectrum.a_nonsingular},
              {"minimum_time", tmin ? json(*tmin) : json(nullptr)}};
  if (as_json) {
    std::cout << out.dump(2) << "\n";
    return kOk;
  }
  std::cout << "n = " << plant.n() << ", m = " << plant.m() << "\n"
            << "controllable: " << (ctrb.controllable ? "yes" : "no")
            << " (rank " << ctrb.rank << ")\n"
            << "eigenvalues:";
  for (const auto& l : spectrum.eigenvalues) {
    std::cout << " " << fmt(l.real()) << (l.imag() < 0 ? "-" : "+")
              << fmt(std::abs(l.imag())) << "i";
  }
  std::cout << "\nomega: " << fmt(spectrum.omega) << "\n"
            << "A nonsingular: " << (spectrum.a_nonsingular ? "yes" : "no") << "\n"
            << "minimum time: " << (tmin ? fmt(*tmin) : "not found") << "\n";
  return kOk;
}

int cmd_solve(const std::string& path, std::size_t n_grid,
              std::optional<double> tol, const std::string& out_csv,
              const std::string& out_signal) {
  ProblemFile pf = load_problem(path);
  if (n_grid > 0) pf.N = n_grid;
  const ControlProblem problem = pf.problem();
  AdmmSettings settings;
  if (tol) {
    if (!(*tol > 0.0)) throw InvalidInput("--tol must be positive");
    settings.eps_abs = *tol;
  }
  const ReachabilityProgram prog = build_reachability(problem);
  const SolveResult sol = solve_l1(prog, settings);
  const Extraction ex = extract_switching(sol.u, problem.T);
  const StructureReport rep = verify_structure(
      ex.signal, problem.plant, problem.T, ex.bang_bang_fraction);

  if (!out_csv.empty()) {
    std::ostringstream os;
    os << "t";
    for (Eigen::Index j = 0; j < sol.u.cols(); ++j) os << ",u" << j + 1;
    os << "\n";
    for (Eigen::Index k = 0; k < sol.u.rows(); ++k) {
      os << fmt(static_cast<double>(k) * prog.dt);
      for (Eigen::Index j = 0; j < sol.u.cols(); ++j) os << "," << fmt(sol.u(k, j));
      os << "\n";
    }
    write_file(out_csv, os.str());
  }
  if (!out_signal.empty()) {
    write_file(out_signal, signal_to_json(ex.signal).dump(2) + "\n");
  }

  json summary = {{"status", to_string(sol.status)},
                  {"J1", sol.J1},
                  {"J0", sol.J0},
                  {"iterations", sol.iterations},
                  {"N", prog.N},
                  {"dt", prog.dt},
                  {"switch_count", rep.total_switches},
                  {"bound", rep.bound},
                  {"bound_applicable", rep.bound_applicable},
                  {"sign_flip_violations", rep.sign_flip_violations},
                  {"bang_bang_fraction", rep.bang_bang_fraction}};
  if (prog.warning) summary["warning"] = *prog.warning;
  std::cout << summary.dump(2) << "\n";
  switch (sol.status) {
    case SolveStatus::optimal:
      return kOk;
    case SolveStatus::infeasible:
      return kInfeasible;
    case SolveStatus::max_iters:
      return kMaxIters;
  }
  return kInternal;
}

int cmd_encode(const std::string& in, const std::string& out, int b,
               const std::string& problem_path) {
  const SwitchingSignal sig = signal_from_json(parse_json(read_file(in)));
  const EncodedControl packet = encode(sig, b);
  write_file(out, std::string(packet.bytes.begin(), packet.bytes.end()));
  const BitCount bc = bit_count(packet);
  json report = {{"bytes", packet.bytes.size()},
                 {"header_bits", bc.header_bits},
                 {"payload_bits", bc.payload_bits},
                 {"switch_count", decode(packet).switch_count()}};
  if (!problem_path.empty()) {
    const ProblemFile pf = load_problem(problem_path);
    const PlantModel plant = pf.plant();
    const double omega = spectral_info(plant.A()).omega;
    const BitBudget budget =
        theoretical_bits(static_cast<double>(plant.n()),
                         static_cast<double>(plant.m()), b, sig.T, omega);
    report["theoretical_bits"] = budget.total_bits;
    report["theoretical_bitrate_bps"] = budget.bitrate_bps;
    report["overhead_bound"] =
        budget.total_bits + static_cast<double>(sig.switch_count()) +
        18.0 * static_cast<double>(sig.m());
  }
  std::cout << report.dump(2) << "\n";
  return kOk;
}

int cmd_decode(const std::string& in, const std::string& out) {
  const std::string raw = read_file(in);
  const EncodedControl packet{std::vector<std::uint8_t>(raw.begin(), raw.end())};
  const std::string text = signal_to_json(decode(packet)).dump(2) + "\n";
  if (!out.empty()) write_file(out, text);
  std::cout << text;
  return kOk;
}

SimConfig config_from(const ProblemFile& pf, std::size_t horizons,
                      const std::string& placement) {
  SimConfig c;
  c.horizons = horizons;
  c.T = pf.T;
  c.b = pf.b;
  c.N = pf.N;
  c.lambda = pf.lambda;
  c.placement = parse_placement(placement);
  return c;
}

int cmd_simulate(const std::string& path, std::size_t horizons, double loss,
                 std::optional<std::uint64_t> seed, std::size_t budget,
                 std::optional<int> bits, const std::string& placement,
                 const std::string& prefix) {
  ProblemFile pf = load_problem(path);
  if (bits) pf.b = *bits;
  const SimConfig config = config_from(pf, horizons, placement);
  ChannelModel channel;
  channel.loss_prob = loss;
  channel.bit_budget = budget;
  channel.seed = resolve_seed(seed);
  const SimTrace trace = run_closed_loop(pf.plant(), pf.x0, config, channel);

  const json j = trace_json(trace);
  if (!prefix.empty()) {
    write_file(prefix + ".csv", trace_csv(trace));
    write_file(prefix + ".json", j.dump(2) + "\n");
    PlotPanel states{"state", {}};
    PlotPanel controls{"control", {}};
    for (Eigen::Index i = 0; i < pf.plant().n(); ++i) {
      Series s{"x" + std::to_string(i + 1), {}};
      for (const Vector& x : trace.x) s.y.push_back(x(i));
      states.series.push_back(std::move(s));
    }
    for (Eigen::Index i = 0; i < pf.plant().m(); ++i) {
      Series s{"u" + std::to_string(i + 1), {}};
      for (const Vector& u : trace.u) s.y.push_back(u(i));
      controls.series.push_back(std::move(s));
    }
    write_file(prefix + ".svg", svg_chart(trace.t, {states, controls}));
  }
  std::cout << j.at("summary").dump(2) << "\n";
  return kOk;
}

int cmd_sweep(const std::string& path, const std::string& bits,
              std::size_t horizons, const std::string& placement,
              const std::string& out) {
  const ProblemFile pf = load_problem(path);
  const SimConfig config = config_from(pf, horizons, placement);
  const std::string table =
      sweep_csv(sweep_bits(pf.plant(), pf.x0, config, parse_bits(bits)));
  if (!out.empty()) write_file(out, table);
  std::cout << table;
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse (hands-off) control: solve, encode, simulate"};
  app.require_subcommand(1);

  std::string problem, input, output, out_signal, placement = "left";
  bool as_json = false;
  std::size_t n_grid = 0;
  std::optional<double> tol;
  int bits = 8;
  std::optional<int> sim_bits;
  std::string problem_opt;
  std::size_t horizons = 1;
  double loss = 0.0;
  std::optional<std::uint64_t> seed;
  std::size_t budget = 0;
  std::string bit_range = "4..12";

  auto* check = app.add_subcommand("check", "controllability and spectrum");
  check->add_option("problem", problem, "problem JSON")->required();
  check->add_flag("--json", as_json, "machine-readable output");

  auto* solve = app.add_subcommand("solve", "fuel-optimal control");
  solve->add_option("problem", problem, "problem JSON")->required();
  solve->add_option("--n-grid", n_grid, "grid size N (overrides the file)");
  solve->add_option("--tol", tol, "absolute ADMM tolerance");
  solve->add_option("--out", output, "control CSV (t,u1..um)");
  solve->add_option("--signal", out_signal, "switching signal JSON");

  auto* enc = app.add_subcommand("encode", "signal JSON to packet");
  enc->add_option("signal", input, "signal JSON")->required();
  enc->add_option("packet", output, "output .hoc")->required();
  enc->add_option("--bits,-b", bits, "bits per switching time");
  enc->add_option("--problem", problem_opt, "compare with the bit budget");

  auto* dec = app.add_subcommand("decode", "packet to signal JSON");
  dec->add_option("packet", input, "input .hoc")->required();
  dec->add_option("--out", output, "signal JSON");

  auto* sim = app.add_subcommand("simulate", "closed loop over a lossy channel");
  sim->add_option("problem", problem, "problem JSON")->required();
  sim->add_option("--horizons,-K", horizons, "number of horizons");
  sim->add_option("--loss", loss, "packet loss probability");
  sim->add_option("--seed", seed, "loss RNG seed");
  sim->add_option("--budget", budget, "max packet bits (0 = unlimited)");
  sim->add_option("--bits,-b", sim_bits, "bits per switching time");
  sim->add_option("--placement", placement, "switch placement: left or area");
  sim->add_option("--out", output, "output prefix (.csv, .json, .svg)");

  auto* sweep = app.add_subcommand("sweep", "final error against bits");
  sweep->add_option("problem", problem, "problem JSON")->required();
  sweep->add_option("--bits", bit_range, "range a..b or list a,b,c");
  sweep->add_option("--horizons,-K", horizons, "number of horizons");
  sweep->add_option("--placement", placement, "switch placement: left or area");
  sweep->add_option("--out", output, "CSV output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kMalformed;
  }

  try {
    if (*check) return cmd_check(problem, as_json);
    if (*solve) return cmd_solve(problem, n_grid, tol, output, out_signal);
    if (*enc) return cmd_encode(input, output, bits, problem_opt);
    if (*dec) return cmd_decode(input, output);
    if (*sim) {
      return cmd_simulate(problem, horizons, loss, seed, budget, sim_bits,
                          placement, output);
    }
    if (*sweep) return cmd_sweep(problem, bit_range, horizons, placement, output);
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDivergence;
  } catch (const PacketError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kCodec;
  } catch (const StructureViolation& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kCodec;
  } catch (const CapacityError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kCodec;
  } catch (const DegenerateProgram& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInfeasible;
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kMalformed;
  } catch (const DimensionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kMalformed;
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kMalformed;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInternal;
  }
  return kInternal;
}
