#include "ntpowd/tier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ntpowd {

PollKind classify_polling(const ClientSession& session) {
  if (detect_one_shot(session)) return PollKind::OneShot;
  int first = session.samples.front().poll_exponent;
  for (const auto& s : session.samples)
    if (s.poll_exponent != first) return PollKind::NonConstant;
  return PollKind::Constant;
}

std::vector<PollRun> segment_runs(const ClientSession& session) {
  std::vector<PollRun> runs;
  for (std::size_t i = 0; i < session.samples.size(); ++i) {
    const int p = session.samples[i].poll_exponent;
    if (runs.empty() || runs.back().poll_exponent != p) {
      runs.push_back(PollRun{p, i, 1, std::nullopt});
    } else {
      ++runs.back().count;
    }
  }
  for (std::size_t r = 0; r + 1 < runs.size(); ++r)
    runs[r].next_exponent = runs[r + 1].poll_exponent;
  return runs;
}

int n_required(int poll_exponent) {
  if (poll_exponent <= 0) throw InvalidPoll("poll exponent must be positive");
  return (30 + poll_exponent - 1) / poll_exponent;
}

RunDecision apply_run_rule(const PollRun& run) {
  const int N = n_required(run.poll_exponent);
  const auto n = static_cast<int>(run.count);
  if (n < N) return RunDecision::Reject;            // clock heading to a bad state
  if (n > N) return RunDecision::Reject;            // oscillating
  if (!run.next_exponent) return RunDecision::Reject;  // increase never observed
  return (*run.next_exponent > run.poll_exponent) ? RunDecision::Accept
                                                  : RunDecision::Reject;
}

namespace {

bool positive_owds(const OwdSample& s) {
  if (s.c2s_owd && *s.c2s_owd <= 0.0) return false;
  if (s.s2c_owd && *s.s2c_owd <= 0.0) return false;
  return s.c2s_owd || s.s2c_owd;
}

bool passes_gtrtt(const OwdSample& s, double gt_rtt) {
  if (!s.c2s_owd || !s.s2c_owd) return false;
  if (*s.c2s_owd <= 0.0 || *s.s2c_owd <= 0.0) return false;
  return *s.c2s_owd + *s.s2c_owd <= gt_rtt;
}

double mean_of(const std::vector<double>& v) {
  double acc = 0;
  for (double x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

double sample_stddev(const std::vector<double>& v, double mean) {
  double acc = 0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

}  // namespace

std::vector<OwdSample> apply_gtrtt_filter(const std::vector<OwdSample>& samples,
                                          double gt_rtt) {
  std::vector<OwdSample> out;
  for (const auto& s : samples)
    if (passes_gtrtt(s, gt_rtt)) out.push_back(s);
  return out;
}

std::vector<std::size_t> apply_mean_sigma_filter(const std::vector<OwdSample>& samples,
                                                 double sigma_k) {
  std::vector<std::size_t> eligible;
  std::vector<double> c2s, s2c;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].c2s_owd && samples[i].s2c_owd) {
      eligible.push_back(i);
      c2s.push_back(*samples[i].c2s_owd);
      s2c.push_back(*samples[i].s2c_owd);
    }
  }
  if (eligible.size() < 2) return {};  // TooFewSamples: nothing accepted

  const double mc = mean_of(c2s), ms = mean_of(s2c);
  const double tc = mc + sigma_k * sample_stddev(c2s, mc);
  const double ts = ms + sigma_k * sample_stddev(s2c, ms);

  std::vector<std::size_t> accepted;
  for (std::size_t k = 0; k < eligible.size(); ++k) {
    if (c2s[k] <= tc && s2c[k] <= ts && c2s[k] > 0.0 && s2c[k] > 0.0)
      accepted.push_back(eligible[k]);
  }
  return accepted;
}

EwmaResult smooth_ewma(const std::vector<double>& series,
                       const std::vector<double>& alpha_grid) {
  EwmaResult best;
  double best_mse = std::numeric_limits<double>::infinity();
  for (double alpha : alpha_grid) {
    std::vector<double> y(series.size());
    double mse = 0.0;
    for (std::size_t i = 0; i < series.size(); ++i) {
      if (i == 0) {
        y[0] = series[0];
      } else {
        mse += (y[i - 1] - series[i]) * (y[i - 1] - series[i]);
        y[i] = alpha * series[i] + (1.0 - alpha) * y[i - 1];
      }
    }
    if (series.size() > 1) mse /= static_cast<double>(series.size() - 1);
    if (mse < best_mse) {  // strict: ties keep the earlier (smaller) alpha
      best_mse = mse;
      best.alpha = alpha;
      best.smoothed = std::move(y);
    }
  }
  if (best.smoothed.empty()) best.smoothed = series;
  return best;
}

namespace {

// Smooths the accepted samples per direction and writes tier + smoothed values.
void promote_accepted(ClientSession& session, std::vector<std::size_t>& accepted,
                      const ClassifierConfig& config) {
  if (accepted.empty()) return;
  std::sort(accepted.begin(), accepted.end());

  std::vector<std::size_t> c2s_idx, s2c_idx;
  std::vector<double> c2s, s2c;
  for (auto i : accepted) {
    session.samples[i].tier = Tier::T3;
    if (session.samples[i].c2s_owd) {
      c2s_idx.push_back(i);
      c2s.push_back(*session.samples[i].c2s_owd);
    }
    if (session.samples[i].s2c_owd) {
      s2c_idx.push_back(i);
      s2c.push_back(*session.samples[i].s2c_owd);
    }
  }
  if (!c2s.empty()) {
    auto r = smooth_ewma(c2s, config.ewma_alpha_grid);
    session.alpha_c2s = r.alpha;
    for (std::size_t k = 0; k < c2s_idx.size(); ++k)
      session.samples[c2s_idx[k]].c2s_smooth = r.smoothed[k];
  }
  if (!s2c.empty()) {
    auto r = smooth_ewma(s2c, config.ewma_alpha_grid);
    session.alpha_s2c = r.alpha;
    for (std::size_t k = 0; k < s2c_idx.size(); ++k)
      session.samples[s2c_idx[k]].s2c_smooth = r.smoothed[k];
  }
}

// Tier for a sample every filter rejected: the 1000 ms boundary on the worst
// direction, Tier0 when no OWD exists at all.
Tier rejected_tier(const OwdSample& s, const ClassifierConfig& config) {
  if (!s.c2s_owd && !s.s2c_owd) return Tier::T0;
  double worst = -std::numeric_limits<double>::infinity();
  if (s.c2s_owd) worst = std::max(worst, *s.c2s_owd);
  if (s.s2c_owd) worst = std::max(worst, *s.s2c_owd);
  return (worst * 1000.0 < config.tier_boundary_ms) ? Tier::T2 : Tier::T1;
}

}  // namespace

void assign_tiers(ClientSession& session, const ClassifierConfig& config) {
  if (session.samples.empty()) {
    session.kind = PollKind::OneShot;
    return;
  }
  const PollKind kind = classify_polling(session);
  session.kind = kind;

  if (kind == PollKind::OneShot) {
    // Multiple requests carrying some OWD reach tier 1; a lone request
    // stays at tier 0 whatever it carried.
    const bool multi = session.samples.size() > 1;
    for (auto& s : session.samples) {
      if (multi && (s.c2s_owd || s.s2c_owd))
        s.tier = Tier::T1;
      else
        s.tier = Tier::T0;
    }
    return;
  }

  std::vector<std::size_t> accepted;

  if (kind == PollKind::NonConstant) {
    for (const auto& run : segment_runs(session)) {
      RunDecision d;
      try {
        d = apply_run_rule(run);
      } catch (const InvalidPoll&) {
        d = RunDecision::Reject;
      }
      if (d == RunDecision::Accept) {
        for (std::size_t i = run.first; i < run.first + run.count; ++i)
          if (positive_owds(session.samples[i])) accepted.push_back(i);
      }
    }
  } else {  // Constant
    const bool has_gtrtt = std::any_of(session.samples.begin(), session.samples.end(),
                                       [](const OwdSample& s) { return s.gt_rtt.has_value(); });
    if (has_gtrtt) {
      for (std::size_t i = 0; i < session.samples.size(); ++i) {
        const auto& s = session.samples[i];
        if (s.gt_rtt && passes_gtrtt(s, *s.gt_rtt)) accepted.push_back(i);
      }
    } else {
      accepted = apply_mean_sigma_filter(session.samples, config.sigma_k);
    }
  }

  promote_accepted(session, accepted, config);
  for (auto& s : session.samples)
    if (!s.tier) s.tier = rejected_tier(s, config);
}

std::map<std::pair<IpAddress, IpAddress>, MinOwd> min_owd(
    const std::vector<ClientSession>& sessions, Tier tier_floor) {
  std::map<std::pair<IpAddress, IpAddress>, MinOwd> out;
  for (const auto& session : sessions) {
    for (const auto& s : session.samples) {
      if (!s.tier || static_cast<int>(*s.tier) < static_cast<int>(tier_floor)) continue;
      const auto c2s = s.c2s_smooth ? s.c2s_smooth : s.c2s_owd;
      const auto s2c = s.s2c_smooth ? s.s2c_smooth : s.s2c_owd;
      if (!c2s && !s2c) continue;
      auto& m = out[{session.client, session.server}];
      if (c2s) {
        const double ms = *c2s * 1000.0;
        if (!m.c2s_ms || ms < *m.c2s_ms) m.c2s_ms = ms;
      }
      if (s2c) {
        const double ms = *s2c * 1000.0;
        if (!m.s2c_ms || ms < *m.s2c_ms) m.s2c_ms = ms;
      }
    }
  }
  return out;
}

}  // namespace ntpowd
