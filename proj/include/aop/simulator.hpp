#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "aop/lagrangian.hpp"
#include "aop/model.hpp"

namespace aop {

class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Seedable generator with a fixed algorithm (64-bit Mersenne Twister) and
/// a hand-rolled uniform mapping, so draws are identical on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  /// Index drawn from a probability row by inverse CDF.
  std::size_t categorical(const std::vector<double>& probabilities);

 private:
  std::mt19937_64 engine_;
};

enum class Benchmark { AEZW, AECW, ALCW };

const char* to_string(Benchmark b);

struct SolvedPolicy {
  StationaryDeterministicPolicy policy;
};

struct MixedPolicy {
  MixturePolicy mixture;
};

using PolicyKind = std::variant<SolvedPolicy, MixedPolicy, Benchmark>;

std::string policy_name(const PolicyKind& kind);

struct BenchmarkDecision {
  double wait_ms = 0.0;
  Origin origin = Origin::Edge;
  bool clamped = false;  // ALCW with t_l > t_min
};

/// AEZW: (0, Edge). AECW: (max(t_min - age, 0), Edge). ALCW: (t_min - t_l, Local).
BenchmarkDecision benchmark_decision(Benchmark kind, double current_age, const SystemConfig& cfg);

struct UpdateRecord {
  double age = 0.0;           // Y_i
  double wait = 0.0;          // Z_i
  std::size_t channel = 0;    // X_i
  Origin origin = Origin::Local;
  double area = 0.0;          // Q_i
  double relaxed = 0.0;       // Q-tilde_i
};

struct TrajectorySummary {
  double avg_aop_ratio_of_sums = 0.0;
  double avg_aop_mean_of_ratios = 0.0;
  double avg_cycle = 0.0;
};

/// Summary of the first `count` records, accumulated in order.
TrajectorySummary summarize(const std::vector<UpdateRecord>& records, std::size_t count);

struct Trajectory {
  std::string policy;
  std::uint64_t seed = 0;
  std::vector<UpdateRecord> records;
  TrajectorySummary summary;
  double initial_prev_cycle = 0.0;  // Y_0 + Z_0 seen by the first record
  bool clamped_wait = false;

  std::size_t n() const { return records.size(); }
};

/// Simulates n decision epochs. The chain starts in channel state 0 with a
/// locally processed update and zero prior wait; that warm-up epoch is run
/// but not recorded.
Trajectory simulate(const PolicyKind& kind, std::size_t n, std::uint64_t seed,
                    const AopModel& model);

struct RatioPoint {
  std::size_t n_prefix = 0;
  double q_bar = 0.0;
  double q_tilde = 0.0;
  double ratio = 0.0;
};

/// Running estimators on a 1-2-5 logarithmic grid of prefix lengths, always
/// ending at the full trajectory length.
std::vector<RatioPoint> ratio_report(const Trajectory& t);

struct AgeBreakpoint {
  double time = 0.0;        // D_i
  double age_before = 0.0;  // Delta(D_i^-)
  double age_after = 0.0;   // Delta(D_i) = Y_i
};

/// Sawtooth corner points of the continuous-time AoP curve, one per epoch.
std::vector<AgeBreakpoint> age_breakpoints(const Trajectory& t);

}  // namespace aop
