#pragma once
// Grouping decoded packets into per-(client, server) sessions and deriving
// raw directional OWDs via timestamp rotation.
#include <map>
#include <optional>
#include <vector>

#include "ntpowd/ntp.hpp"

namespace ntpowd {

enum class Tier : int { T0 = 0, T1 = 1, T2 = 2, T3 = 3 };
enum class PollKind { Constant, NonConstant, OneShot };

struct OwdSample {
  IpAddress client, server;
  TimeSpec when;                         // capture time of the request
  std::optional<double> c2s_owd;         // seconds, offset-contaminated
  std::optional<double> s2c_owd;         // seconds, offset-contaminated
  int poll_exponent{0};
  std::optional<double> gt_rtt;          // seconds, >= 0 when present
  std::optional<Tier> tier;
  std::optional<double> c2s_smooth;      // EWMA output, set on top-tier samples
  std::optional<double> s2c_smooth;
};

struct ClientSession {
  IpAddress client, server;
  std::vector<OwdSample> samples;        // strictly time-ordered (capture order)
  std::size_t one_shot_count{0};         // requests with no rotation link
  std::optional<PollKind> kind;          // assigned by the classifier
  std::optional<double> alpha_c2s, alpha_s2c;
  // diagnostics
  std::size_t unmatched_responses{0};
  std::size_t duplicate_requests{0};
};

struct SessionOptions {
  enum class T1Source {
    PreferResponseReceive,  // paired response's receive_ts when set
    CaptureOnly             // always the request's capture timestamp
  };
  T1Source t1_source{T1Source::PreferResponseReceive};
  std::size_t rotation_depth{4};  // recent responses kept for rotation matching
};

// root_delay as the client's own RTT estimate, present iff ref_id names one
// of the servers under the v4-bytes / v6-MD5 match rule.
std::optional<double> extract_gtrtt(const NtpPacket& request,
                                    const std::vector<IpAddress>& server_addrs);

std::vector<ClientSession> build_sessions(const std::vector<NtpPacket>& packets,
                                          const std::vector<IpAddress>& server_addrs,
                                          const SessionOptions& opts = {});

// A client with no sustained exchange: a single request, or nothing but
// zero-timestamp (SNTP-style) requests.
bool detect_one_shot(const ClientSession& session);

}  // namespace ntpowd
