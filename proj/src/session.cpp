#include "ntpowd/session.hpp"

#include <algorithm>
#include <deque>

namespace ntpowd {

namespace {

struct PendingRequest {
  std::uint64_t transmit_raw;
  std::size_t sample_index;
};

struct SessionBuild {
  ClientSession session;
  std::deque<std::uint64_t> rotation;       // recent response transmit_ts values
  std::deque<PendingRequest> pending;       // requests awaiting their response
};

NtpTimestamp capture_to_ntp(TimeSpec ts) { return NtpTimestamp::from_unix(ts); }

}  // namespace

std::optional<double> extract_gtrtt(const NtpPacket& request,
                                    const std::vector<IpAddress>& server_addrs) {
  if (request.mode != 3) return std::nullopt;
  if (request.root_delay < 0) return std::nullopt;
  for (const auto& addr : server_addrs) {
    if (ref_id_for(addr) == request.ref_id)
      return fixed_16_16_to_seconds(request.root_delay);
  }
  return std::nullopt;
}

std::vector<ClientSession> build_sessions(const std::vector<NtpPacket>& packets,
                                          const std::vector<IpAddress>& server_addrs,
                                          const SessionOptions& opts) {
  std::map<std::pair<IpAddress, IpAddress>, SessionBuild> builds;

  auto is_server = [&](const IpAddress& a) {
    return std::find(server_addrs.begin(), server_addrs.end(), a) != server_addrs.end();
  };

  for (const auto& pkt : packets) {
    if (pkt.mode == 3 && is_server(pkt.dst_addr)) {
      const auto key = std::make_pair(pkt.src_addr, pkt.dst_addr);
      auto& b = builds[key];
      b.session.client = pkt.src_addr;
      b.session.server = pkt.dst_addr;

      OwdSample s;
      s.client = pkt.src_addr;
      s.server = pkt.dst_addr;
      s.when = pkt.capture_ts;
      s.poll_exponent = pkt.poll_exponent;
      s.gt_rtt = extract_gtrtt(pkt, server_addrs);

      if (!pkt.transmit_ts.unset()) {
        // t1 defaults to the server-side capture instant; a paired response
        // may upgrade it to the server's own receive_ts below.
        s.c2s_owd = ntp_diff_seconds(capture_to_ntp(pkt.capture_ts), pkt.transmit_ts);
      }

      bool rotated = false;
      if (!pkt.origin_ts.unset() && !pkt.receive_ts.unset()) {
        auto it = std::find(b.rotation.begin(), b.rotation.end(), pkt.origin_ts.raw());
        if (it != b.rotation.end()) {
          s.s2c_owd = ntp_diff_seconds(pkt.receive_ts, NtpTimestamp::from_raw(*it));
          b.rotation.erase(it);  // each response links at most once
          rotated = true;
        }
      }
      if (!rotated) ++b.session.one_shot_count;

      if (!pkt.transmit_ts.unset()) {
        const auto raw = pkt.transmit_ts.raw();
        const bool dup = std::any_of(b.pending.begin(), b.pending.end(),
                                     [&](const PendingRequest& p) {
                                       return p.transmit_raw == raw;
                                     });
        if (dup) ++b.session.duplicate_requests;
        b.pending.push_back({raw, b.session.samples.size()});
        while (b.pending.size() > 8) b.pending.pop_front();
      }
      b.session.samples.push_back(std::move(s));
    } else if (pkt.mode == 4 && is_server(pkt.src_addr)) {
      const auto key = std::make_pair(pkt.dst_addr, pkt.src_addr);
      auto it = builds.find(key);
      if (it == builds.end()) continue;
      auto& b = it->second;

      bool matched = false;
      if (!pkt.origin_ts.unset()) {
        const auto raw = pkt.origin_ts.raw();
        auto p = std::find_if(b.pending.begin(), b.pending.end(),
                              [&](const PendingRequest& q) { return q.transmit_raw == raw; });
        if (p != b.pending.end()) {
          matched = true;
          if (opts.t1_source == SessionOptions::T1Source::PreferResponseReceive &&
              !pkt.receive_ts.unset()) {
            b.session.samples[p->sample_index].c2s_owd =
                ntp_diff_seconds(pkt.receive_ts, NtpTimestamp::from_raw(raw));
          }
          b.pending.erase(p);
        }
      }
      if (!matched) ++b.session.unmatched_responses;

      if (!pkt.transmit_ts.unset()) {
        b.rotation.push_back(pkt.transmit_ts.raw());
        while (b.rotation.size() > opts.rotation_depth) b.rotation.pop_front();
      }
    }
  }

  std::vector<ClientSession> out;
  out.reserve(builds.size());
  for (auto& [key, b] : builds) out.push_back(std::move(b.session));
  return out;
}

bool detect_one_shot(const ClientSession& session) {
  if (session.samples.size() <= 1) return true;
  return std::all_of(session.samples.begin(), session.samples.end(),
                     [](const OwdSample& s) { return !s.c2s_owd && !s.s2c_owd; });
}

}  // namespace ntpowd
