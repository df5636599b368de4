#pragma once
// Precision-tier assignment: polling-behavior classification, the N-sample
// run rule, the gtRTT and mean+sigma filters, EWMA smoothing, and the
// per-pair minimum OWD extraction.
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "ntpowd/session.hpp"

namespace ntpowd {

struct InvalidPoll : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ClassifierConfig {
  double tier_boundary_ms{1000.0};
  std::vector<double> ewma_alpha_grid{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  double sigma_k{1.0};
};

struct PollRun {
  int poll_exponent{0};
  std::size_t first{0};   // index of the run's first sample in the session
  std::size_t count{0};
  std::optional<int> next_exponent;
};

enum class RunDecision { Accept, Reject };

PollKind classify_polling(const ClientSession& session);
std::vector<PollRun> segment_runs(const ClientSession& session);

// The minimum healthy run length for a poll exponent: ceil(30 / P).
int n_required(int poll_exponent);
RunDecision apply_run_rule(const PollRun& run);

// Keeps samples with c2s + s2c <= gt_rtt and both directions positive.
std::vector<OwdSample> apply_gtrtt_filter(const std::vector<OwdSample>& samples,
                                          double gt_rtt);
// Per-direction mean + k*sigma (sample stddev); a sample must pass both
// directions. Returns indices into `samples`.
std::vector<std::size_t> apply_mean_sigma_filter(const std::vector<OwdSample>& samples,
                                                 double sigma_k = 1.0);

struct EwmaResult {
  std::vector<double> smoothed;
  double alpha{0.1};
};
// Grid search over alpha; picks the minimizer of one-step-ahead prediction
// MSE, ties toward the smaller alpha.
EwmaResult smooth_ewma(const std::vector<double>& series,
                       const std::vector<double>& alpha_grid);

// Full assignment: every sample in the session ends up with exactly one tier.
void assign_tiers(ClientSession& session, const ClassifierConfig& config = {});

struct MinOwd {
  std::optional<double> c2s_ms;
  std::optional<double> s2c_ms;
};
// Directional minima over samples at or above tier_floor, smoothed values
// preferred. Pairs with no qualifying sample are absent from the map.
std::map<std::pair<IpAddress, IpAddress>, MinOwd> min_owd(
    const std::vector<ClientSession>& sessions, Tier tier_floor = Tier::T3);

}  // namespace ntpowd
