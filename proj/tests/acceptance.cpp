// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "handsoff/codec.hpp"
#include "handsoff/io.hpp"
#include "handsoff/model.hpp"
#include "handsoff/netsim.hpp"
#include "handsoff/oracle.hpp"
#include "handsoff/solver.hpp"
#include "handsoff/structure.hpp"
#include "test_util.hpp"

namespace {

using namespace handsoff;
using testing::RandomInstance;

// Tolerances, pinned.
constexpr std::size_t kInstances = 25;
constexpr std::size_t kGridN = 1000;
constexpr double kHorizonFactor = 1.5;
constexpr double kJ0Tolerance = 0.05;       // times T
constexpr double kRuntimeLimitSec = 120.0;
constexpr std::size_t kOracleGrid = 100;
constexpr double kJ1RelTolerance = 0.01;
constexpr double kSwitchTimeTolerance = 0.02;
constexpr double kLevelDistance = 1e-2;
constexpr double kBangBangFraction = 0.99;
constexpr double kStructureEps = 0.25;
constexpr int kCodecBits = 8;
constexpr double kReachTolerance = 1e-6;    // times (1 + |x0|)
constexpr double kExpmTolerance = 1e-8;
constexpr double kSpearmanLimit = -0.8;
constexpr double kFinalErrorLimit = 1e-2;
constexpr double kFreeResponseTolerance = 1e-8;

struct Line {
  int id;
  bool pass;
  std::string detail;
};

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(4) << v;
  return os.str();
}

// Everything the instance-class criteria share.
struct InstanceRun {
  RandomInstance inst;
  double T = 0.0;
  SolveResult sol;
  OracleResult oracle;
  Extraction extraction;
};

struct Corpus {
  std::vector<InstanceRun> runs;
  double seconds = 0.0;
};

Corpus build_corpus() {
  const auto start = std::chrono::steady_clock::now();
  Corpus c;
  for (const RandomInstance& inst : testing::random_instances(kInstances, 42)) {
    InstanceRun r;
    r.inst = inst;
    r.T = kHorizonFactor * inst.T_min;
    const PlantModel plant(inst.A, inst.B);
    r.sol = solve_l1(build_reachability(ControlProblem(plant, inst.x0, r.T, kGridN)));
    OracleOptions opt;
    opt.grid = kOracleGrid;
    opt.K_max = 4;
    r.oracle = oracle_bang_off_bang(plant, inst.x0, r.T, opt);
    r.extraction = extract_switching(r.sol.u, r.T, kStructureEps);
    c.runs.push_back(std::move(r));
  }
  c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                  .count();
  return c;
}

Line criterion1(const Corpus& c) {
  double worst = 0.0;
  std::size_t bad = 0;
  for (const InstanceRun& r : c.runs) {
    const double dev = std::abs(r.sol.J0 - r.oracle.J0);
    if (r.sol.status != SolveStatus::optimal || !r.oracle.feasible ||
        !(dev <= kJ0Tolerance * r.T)) {
      ++bad;
    }
    worst = std::max(worst, dev / r.T);
  }
  const bool ok = c.runs.size() >= 20 && bad == 0 && c.seconds <= kRuntimeLimitSec;
  return {1, ok,
          "L0/L1 equivalence on " + std::to_string(c.runs.size()) +
              " random plants: worst |dJ0|/T = " + num(worst) + " (limit " +
              num(kJ0Tolerance) + "), " + std::to_string(bad) + " failing, " +
              num(c.seconds) + " s (limit " + num(kRuntimeLimitSec) + ")"};
}

Line criterion2() {
  const PlantModel plant = testing::double_integrator();
  const Vector x0 = testing::vec({1, 0});
  const double T = 4.0;
  const std::size_t N = 400;
  // Closed form: u = -1 on [0, t1), 0, +1 on [t2, T) with t1 = (T - sqrt(T^2 - 4)) / 2.
  const double t1 = (T - std::sqrt(T * T - 4.0 * x0(0))) / 2.0;
  const double t2 = T - t1;
  const double J1_exact = 2.0 * t1;
  const SolveResult sol = solve_l1(build_reachability(ControlProblem(plant, x0, T, N)));
  const Extraction ex = extract_switching(sol.u, T);
  const OracleResult orc = oracle_bang_off_bang(plant, x0, T);
  const auto& sw = ex.signal.channels[0].switches;
  const auto& osw = orc.signal.channels[0].switches;
  const double rel = std::abs(sol.J1 - J1_exact) / J1_exact;
  double dt_err = 1e9;
  if (sw.size() == 2) {
    dt_err = std::max(std::abs(sw[0].time - t1), std::abs(sw[1].time - t2));
  }
  double oracle_err = 1e9;
  if (osw.size() == 2) {
    oracle_err = std::max(std::abs(osw[0].time - t1), std::abs(osw[1].time - t2));
  }
  const bool ok = sol.status == SolveStatus::optimal && rel <= kJ1RelTolerance &&
                  dt_err <= kSwitchTimeTolerance && oracle_err <= kSwitchTimeTolerance;
  return {2, ok,
          "double integrator J1 = " + num(sol.J1) + " vs " + num(J1_exact) +
              " (rel " + num(rel) + "), switch time error " + num(dt_err) +
              ", oracle switch time error " + num(oracle_err)};
}

Line criterion3(const Corpus& c) {
  double worst = 1.0;
  std::size_t near = 0;
  std::size_t total = 0;
  for (const InstanceRun& r : c.runs) {
    std::size_t here = 0;
    for (Eigen::Index k = 0; k < r.sol.u.size(); ++k) {
      const double v = r.sol.u.data()[k];
      const double d = std::min({std::abs(v + 1.0), std::abs(v), std::abs(v - 1.0)});
      if (d <= kLevelDistance) ++here;
    }
    near += here;
    total += static_cast<std::size_t>(r.sol.u.size());
    worst = std::min(worst, static_cast<double>(here) / static_cast<double>(r.sol.u.size()));
  }
  return {3, worst >= kBangBangFraction,
          "samples within " + num(kLevelDistance) + " of {-1,0,1}: worst instance " +
              num(worst) + ", pooled " +
              num(static_cast<double>(near) / static_cast<double>(total)) + " (limit " +
              num(kBangBangFraction) + ")"};
}

Line criterion4(const Corpus& c) {
  std::size_t over = 0;
  std::size_t flips = 0;
  std::size_t max_s = 0;
  for (const InstanceRun& r : c.runs) {
    const PlantModel plant(r.inst.A, r.inst.B);
    const StructureReport rep = verify_structure(r.extraction.signal, plant, r.T);
    if (!rep.within_bound()) ++over;
    flips += rep.sign_flip_violations;
    max_s = std::max(max_s, rep.total_switches);
  }
  return {4, over == 0 && flips == 0,
          std::to_string(over) + " instances over the switch bound, " +
              std::to_string(flips) + " sign flips, max switch count " +
              std::to_string(max_s)};
}

Line criterion5(const Corpus& c) {
  std::size_t over = 0;
  std::size_t checked = 0;
  double worst_margin = 1e9;
  const auto check = [&](const SwitchingSignal& s, const PlantModel& plant, double T) {
    const EncodedControl packet = encode(s, kCodecBits);
    const BitCount bc = bit_count(packet);
    const double omega = spectral_info(plant.A()).omega;
    const double S = static_cast<double>(decode(packet).switch_count());
    const double m = static_cast<double>(plant.m());
    // 1 + 2nmb(1 + T omega / pi), written out independently.
    const double formula = 1.0 + 2.0 * static_cast<double>(plant.n()) * m * kCodecBits *
                                   (1.0 + T * omega / std::numbers::pi);
    const double limit = formula + S + 18.0 * m;
    worst_margin = std::min(worst_margin, limit - static_cast<double>(bc.payload_bits));
    if (static_cast<double>(bc.payload_bits) > limit) ++over;
    ++checked;
  };
  for (const InstanceRun& r : c.runs) {
    check(r.extraction.signal, PlantModel(r.inst.A, r.inst.B), r.T);
  }
  const PlantModel di = testing::double_integrator();
  const SolveResult sol = solve_l1(
      build_reachability(ControlProblem(di, testing::vec({1, 0}), 4.0, 400)));
  check(extract_switching(sol.u, 4.0).signal, di, 4.0);
  const double worked = theoretical_bits(2, 1, 8, std::numbers::pi, 1.0).total_bits;
  return {5, over == 0 && worked == 65.0,
          std::to_string(checked) + " packets, " + std::to_string(over) +
              " over the overhead bound (smallest margin " + num(worst_margin) +
              " bits); worked example = " + num(worked) + " bits (expected 65)"};
}

Line criterion6() {
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<int> bits(1, 16);
  std::uniform_int_distribution<int> channels(1, 3);
  std::uniform_int_distribution<int> count(0, 12);
  std::uniform_real_distribution<double> horizon(0.1, 50.0);
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int b = bits(rng);
    const double T = horizon(rng);
    const auto grid = static_cast<std::uint64_t>(std::ldexp(1.0, b));
    SwitchingSignal s = SwitchingSignal::zero(T, static_cast<std::size_t>(channels(rng)));
    for (Channel& ch : s.channels) {
      ch.initial = std::uniform_int_distribution<int>(-1, 1)(rng);
      // Distinct grid indices, sorted; values alternate through zero.
      std::vector<std::uint64_t> idx;
      const int want = std::min<int>(count(rng), static_cast<int>(grid));
      std::uniform_int_distribution<std::uint64_t> pick(0, grid - 1);
      while (static_cast<int>(idx.size()) < want) {
        const std::uint64_t i = pick(rng);
        if (std::find(idx.begin(), idx.end(), i) == idx.end()) idx.push_back(i);
      }
      std::sort(idx.begin(), idx.end());
      int v = ch.initial;
      for (std::uint64_t i : idx) {
        v = v != 0 ? 0 : (rng() & 1 ? 1 : -1);
        ch.switches.push_back(
            {T * static_cast<double>(i + 1) / (std::ldexp(1.0, b) + 1.0), v});
      }
    }
    if (!(decode(encode(s, b)) == s)) ++mismatches;
  }

  std::size_t structured = 0;
  std::size_t accepted = 0;
  std::size_t other = 0;
  std::uniform_int_distribution<int> len(0, 64);
  for (int trial = 0; trial < 10000; ++trial) {
    EncodedControl p;
    if (trial % 2 == 0) {
      p.bytes.resize(static_cast<std::size_t>(len(rng)));
      for (auto& byte : p.bytes) byte = static_cast<std::uint8_t>(rng());
    } else {
      // A few flipped bits in a valid packet.
      SwitchingSignal s = SwitchingSignal::zero(2.0, 1 + rng() % 2);
      s.channels[0].initial = 1;
      s.channels[0].switches = {{0.5, 0}, {1.5, -1}};
      p = encode(s, 1 + static_cast<int>(rng() % 12));
      for (int f = 0, flips = 1 + static_cast<int>(rng() % 3); f < flips; ++f) {
        const std::size_t bit = rng() % (8 * p.bytes.size());
        p.bytes[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
      }
    }
    try {
      decode(p).validate();
      ++accepted;
    } catch (const PacketError&) {
      ++structured;
    } catch (...) {
      ++other;
    }
  }
  return {6, mismatches == 0 && other == 0,
          "1000 round trips, " + std::to_string(mismatches) +
              " mismatches; 10000 fuzz packets: " + std::to_string(structured) +
              " structured errors, " + std::to_string(accepted) + " valid, " +
              std::to_string(other) + " other"};
}

Line criterion7(const Corpus& c) {
  std::size_t feasible = 0;
  std::size_t bad = 0;
  double worst = 0.0;
  for (const InstanceRun& r : c.runs) {
    if (!r.oracle.feasible) continue;
    ++feasible;
    const PlantModel plant(r.inst.A, r.inst.B);
    const double err = propagate_signal(plant, r.inst.x0, r.oracle.signal).norm();
    const double scaled = err / (1.0 + r.inst.x0.norm());
    worst = std::max(worst, scaled);
    if (!(scaled <= kReachTolerance)) ++bad;
  }

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> entry(-2.0, 2.0);
  std::uniform_real_distribution<double> time(0.0, 2.0);
  double expm_worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    Matrix A(3, 3);
    for (Eigen::Index i = 0; i < 9; ++i) A.data()[i] = entry(rng);
    const double s = time(rng);
    const double t = time(rng);
    expm_worst = std::max(
        {expm_worst, (expm(A * (s + t)) - expm(A * s) * expm(A * t)).norm(),
         (expm(A) * expm(-A) - Matrix::Identity(3, 3)).norm(),
         (expm(A) - testing::taylor_expm(A)).norm() / testing::taylor_expm(A).norm()});
  }
  return {7, feasible > 0 && bad == 0 && expm_worst <= kExpmTolerance,
          std::to_string(feasible) + " oracle signals, worst |x(T)|/(1+|x0|) = " +
              num(worst) + "; worst expm identity residual " + num(expm_worst)};
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  const auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> order(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < order.size();) {
      std::size_t j = i;
      while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
      const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const std::vector<double> rx = ranks(x);
  const std::vector<double> ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

Line criterion8() {
  SimConfig c;
  c.horizons = 1;
  c.T = 2.0 * std::numbers::pi;
  std::vector<int> bs;
  for (int b = 4; b <= 12; ++b) bs.push_back(b);
  const auto rows =
      sweep_bits(testing::harmonic_oscillator(), testing::vec({1, 0}), c, bs);
  std::vector<double> x;
  std::vector<double> y;
  for (const SweepRow& r : rows) {
    x.push_back(r.b);
    y.push_back(r.final_error);
  }
  const double rho = spearman(x, y);
  const double at12 = rows.back().final_error;
  return {8, rho <= kSpearmanLimit && at12 <= kFinalErrorLimit,
          "Spearman(b, final error) over b = 4..12 is " + num(rho) + " (limit " +
              num(kSpearmanLimit) + "), final error at b = 12 is " + num(at12)};
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(HANDSOFF_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Line criterion9() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "handsoff_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto at = [&](const std::string& name) { return (dir / name).string(); };

  write_file(at("osc.json"),
             R"({"A": [[0, 1], [-1, 0]], "B": [[0], [1]], "x0": [1, 0],
                 "T": 6.283185307179586, "b": 10})");
  const std::string sim = "simulate " + at("osc.json") + " -K 5 --loss 0.4 --seed 2014 --out ";
  const int c1 = run_cli(sim + at("run1"));
  const int c2 = run_cli(sim + at("run2"));
  bool identical = c1 == 0 && c2 == 0;
  for (const char* ext : {".csv", ".json"}) {
    const std::string a = read_file(at("run1") + ext);
    identical = identical && !a.empty() && a == read_file(at("run2") + ext);
  }

  Matrix A(2, 2);
  A << 0.1, 1, -1, 0;
  const Vector x0 = testing::vec({1, 0.5});
  const double T = 2.0;
  const int K = 3;
  write_file(at("drift.json"),
             R"({"A": [[0.1, 1], [-1, 0]], "B": [[0], [1]], "x0": [1, 0.5], "T": 2})");
  double free_err = 1e9;
  if (run_cli("simulate " + at("drift.json") + " -K 3 --loss 1 --out " + at("free")) == 0) {
    const json j = parse_json(read_file(at("free.json")));
    const auto& xs = j.at("summary").at("final_state");
    const Vector expect = testing::taylor_expm(A * (K * T)) * x0;
    free_err = std::hypot(xs[0].get<double>() - expect(0), xs[1].get<double>() - expect(1));
  }
  fs::remove_all(dir);
  return {9, identical && free_err <= kFreeResponseTolerance,
          std::string("repeated simulate outputs ") +
              (identical ? "byte-identical" : "differ") +
              "; loss = 1 final state error vs expm(A K T) x0 = " + num(free_err)};
}

}  // namespace

int main() {
  const Corpus corpus = build_corpus();
  const std::vector<Line> lines = {
      criterion1(corpus), criterion2(),       criterion3(corpus),
      criterion4(corpus), criterion5(corpus), criterion6(),
      criterion7(corpus), criterion8(),       criterion9(),
  };
  bool all = true;
  for (const Line& l : lines) {
    std::cout << (l.pass ? "PASS" : "FAIL") << " criterion " << l.id << ": "
              << l.detail << "\n";
    all = all && l.pass;
  }
  return all ? 0 : 1;
}
