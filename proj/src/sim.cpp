#include "ntpowd/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <stdexcept>

#include <Eigen/SVD>

#include "ntpowd/geo.hpp"
#include "ntpowd/ntp.hpp"

namespace ntpowd {
namespace {

double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Event times are kept as small offsets from the trace start and the epoch is
// reattached as exact integer seconds here; carrying absolute unix time in a
// double would cost ~2e-7 s of precision and swamp the wire's 2^-32 grid.
TimeSpec to_timespec(double rel_seconds, std::int64_t base_sec) {
  double whole = std::floor(rel_seconds);
  auto nsec = static_cast<std::int64_t>(std::llround((rel_seconds - whole) * 1e9));
  auto sec = base_sec + static_cast<std::int64_t>(whole);
  if (nsec >= 1000000000) {
    ++sec;
    nsec -= 1000000000;
  }
  return TimeSpec{sec, static_cast<std::uint32_t>(nsec)};
}

struct Event {
  double ts{0};
  CaptureRecord rec;
  int truth{-1};  // index into truth vector, requests only
};

constexpr double kServerProcessing = 10e-6;

const char* sync_label(ProfileKind k) {
  switch (k) {
    case ProfileKind::OutOfSync:
      return "out_of_sync";
    case ProfileKind::SntpOneShot:
      return "one_shot";
    default:
      return "well_sync";
  }
}

}  // namespace

SimResult simulate_trace(const std::vector<ClientProfile>& profiles, const SimOptions& opts) {
  std::mt19937_64 rng(opts.seed);
  std::vector<Event> events;
  SimResult out;
  std::array<std::uint8_t, 4> server_ref = ref_id_for(opts.server);

  const auto base_sec = static_cast<std::int64_t>(opts.start_unix);
  const double base_frac = opts.start_unix - static_cast<double>(base_sec);
  auto cap_at = [&](double rel) { return to_timespec(rel, base_sec); };
  auto ntp_at = [&](double rel) {
    return NtpTimestamp::from_unix(to_timespec(rel, base_sec));
  };

  int ordinal = 0;
  for (const auto& prof : profiles) {
    for (int c = 0; c < prof.count; ++c, ++ordinal) {
      int id = ordinal + 1;
      IpAddress client = IpAddress::v4(10, static_cast<std::uint8_t>((id >> 16) & 0xff),
                                       static_cast<std::uint8_t>((id >> 8) & 0xff),
                                       static_cast<std::uint8_t>(id & 0xff));
      out.clients.push_back(client);
      std::uint16_t sport = prof.kind == ProfileKind::SntpOneShot
                                ? static_cast<std::uint16_t>(40000 + ordinal)
                                : std::uint16_t{123};

      // Poll schedule: (exponent, polls at that exponent).
      std::vector<std::pair<int, int>> schedule;
      if (prof.duration_s <= 0) {
        // nothing to emit
      } else if (prof.kind == ProfileKind::WellSyncBackoff) {
        for (int p : prof.backoff_sequence) {
          if (p <= 0) throw std::invalid_argument("backoff exponent must be positive");
          schedule.emplace_back(p, (30 + p - 1) / p);
        }
      } else {
        int p = prof.poll_exponent;
        int polls = prof.kind == ProfileKind::SntpOneShot
                        ? 1
                        : static_cast<int>(std::floor(prof.duration_s / std::ldexp(1.0, p))) + 1;
        schedule.emplace_back(p, polls);
      }

      double t_start = base_frac + 0.37 * ordinal;
      double t = t_start;
      auto clock_at = [&](double when) {
        return when + prof.offset_ms / 1e3 + prof.drift_ppm * 1e-6 * (when - t_start);
      };

      bool have_prev = false;
      NtpTimestamp prev_transmit{};
      double prev_arrival_true = 0;  // when the previous response reached the client
      double prev_c2s = 0, prev_s2c = 0;

      for (const auto& [poll, polls] : schedule) {
        for (int k = 0; k < polls; ++k) {
          if (t - t_start >= prof.duration_s + 1e-9 &&
              prof.kind != ProfileKind::WellSyncBackoff)
            break;
          double d_c2s = (prof.true_c2s_ms + unit_uniform(rng) * prof.jitter_ms) / 1e3;
          double d_s2c = (prof.true_s2c_ms + unit_uniform(rng) * prof.jitter_ms) / 1e3;

          NtpPacket req;
          req.leap = 0;
          req.version = 4;
          req.mode = 3;
          req.poll_exponent = static_cast<std::int8_t>(poll);
          bool sntp = prof.kind == ProfileKind::SntpOneShot;
          if (sntp) {
            req.stratum = 0;
            req.poll_exponent = 0;
            // everything else stays zero, transmit included
          } else {
            req.stratum = 3;
            req.precision = -20;
            req.root_dispersion = 0x100;
            if (have_prev) {
              req.ref_id = server_ref;
              req.root_delay = prof.emits_gtrtt
                                   ? seconds_to_fixed_16_16_ceil_plus(prev_c2s + prev_s2c)
                                   : 0;
              req.origin_ts = prev_transmit;
              req.receive_ts = ntp_at(clock_at(prev_arrival_true));
            }
            req.transmit_ts = ntp_at(clock_at(t));
          }

          double arr_server = t + d_c2s;
          TruthRow truth;
          truth.true_c2s = d_c2s;
          if (have_prev) truth.true_s2c = prev_s2c;
          truth.offset = clock_at(t) - t;
          truth.sync_state = sync_label(prof.kind);
          int truth_idx = static_cast<int>(out.truths.size());
          out.truths.push_back(truth);

          Event ereq;
          ereq.ts = arr_server;
          ereq.rec.ts = cap_at(arr_server);
          ereq.rec.src = client;
          ereq.rec.dst = opts.server;
          ereq.rec.sport = sport;
          ereq.rec.dport = 123;
          auto req_wire = encode_packet(req);
          ereq.rec.payload.assign(req_wire.begin(), req_wire.end());
          ereq.truth = truth_idx;
          events.push_back(std::move(ereq));

          double t2 = arr_server + kServerProcessing;
          NtpPacket resp;
          resp.leap = 0;
          resp.version = 4;
          resp.mode = 4;
          resp.stratum = 1;
          resp.poll_exponent = req.poll_exponent;
          resp.precision = -24;
          resp.root_delay = 0;
          resp.root_dispersion = 0x20;
          resp.ref_id = {0x47, 0x50, 0x53, 0x00};  // "GPS"
          resp.reference_ts = ntp_at(t2 - 16.0);
          resp.origin_ts = req.transmit_ts;
          resp.receive_ts = ntp_at(arr_server);
          resp.transmit_ts = ntp_at(t2);

          Event eresp;
          eresp.ts = t2;
          eresp.rec.ts = cap_at(t2);
          eresp.rec.src = opts.server;
          eresp.rec.dst = client;
          eresp.rec.sport = 123;
          eresp.rec.dport = sport;
          auto resp_wire = encode_packet(resp);
          eresp.rec.payload.assign(resp_wire.begin(), resp_wire.end());
          events.push_back(std::move(eresp));

          prev_transmit = resp.transmit_ts;
          prev_arrival_true = t2 + d_s2c;
          prev_c2s = d_c2s;
          prev_s2c = d_s2c;
          have_prev = true;
          t += std::ldexp(1.0, poll);
        }
      }
    }
  }

  std::stable_sort(events.begin(), events.end(),
                   [](const Event& a, const Event& b) { return a.ts < b.ts; });
  out.records.reserve(events.size());
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (events[i].truth >= 0) out.truths[events[i].truth].packet_index = i;
    out.records.push_back(events[i].rec);
  }
  std::sort(out.truths.begin(), out.truths.end(),
            [](const TruthRow& a, const TruthRow& b) { return a.packet_index < b.packet_index; });
  return out;
}

GeometryInstance generate_geometry(const GeometryOptions& opts, std::uint64_t seed) {
  if (opts.m < 1 || opts.n < 0) throw std::invalid_argument("geometry needs m >= 1, n >= 0");
  std::mt19937_64 rng(seed);
  GeometryInstance g;
  g.m = opts.m;
  g.n = opts.n;

  auto rand_point = [&]() {
    return std::array<double, 2>{unit_uniform(rng) * opts.box_km,
                                 unit_uniform(rng) * opts.box_km};
  };
  auto dist_km = [](const std::array<double, 2>& a, const std::array<double, 2>& b) {
    return std::hypot(a[0] - b[0], a[1] - b[1]);
  };

  if (!opts.fixed_servers.empty()) {
    if (static_cast<int>(opts.fixed_servers.size()) != opts.m)
      throw std::invalid_argument("fixed_servers size must equal m");
    g.points_km = opts.fixed_servers;
  } else if (opts.ring_servers) {
    double cx = opts.box_km / 2, cy = opts.box_km / 2;
    double r = opts.ring_radius_frac * opts.box_km;
    for (int i = 0; i < opts.m; ++i) {
      double th = 2.0 * M_PI * i / opts.m + 0.2;
      g.points_km.push_back({cx + r * std::cos(th), cy + r * std::sin(th)});
    }
  } else {
    while (static_cast<int>(g.points_km.size()) < opts.m) {
      auto p = rand_point();
      bool ok = true;
      for (const auto& q : g.points_km)
        if (dist_km(p, q) < opts.client_min_sep_km) ok = false;
      if (ok) g.points_km.push_back(p);
    }
  }

  int placed = 0, attempts = 0;
  while (placed < opts.n) {
    if (++attempts > 200000) throw std::runtime_error("client placement did not converge");
    auto p = rand_point();
    bool ok = true;
    for (int s = 0; s < opts.m && ok; ++s)
      if (dist_km(p, g.points_km[s]) < opts.client_server_min_km) ok = false;
    for (int c = opts.m; c < static_cast<int>(g.points_km.size()) && ok; ++c)
      if (dist_km(p, g.points_km[c]) < opts.client_min_sep_km) ok = false;
    if (!ok) continue;
    g.points_km.push_back(p);
    ++placed;
  }

  int total = opts.m + opts.n;
  g.true_latency_ms.setZero(total, total);
  for (int i = 0; i < total; ++i)
    for (int j = i + 1; j < total; ++j) {
      double ms = geo_latency_ms(dist_km(g.points_km[i], g.points_km[j]) * 1000.0);
      g.true_latency_ms(i, j) = ms;
      g.true_latency_ms(j, i) = ms;
    }

  g.mask = MaskMatrix::Constant(total, total, false);
  for (int i = 0; i < total; ++i) g.mask(i, i) = true;
  for (int i = 0; i < opts.m; ++i)
    for (int j = 0; j < opts.m; ++j) g.mask(i, j) = true;
  for (int s = 0; s < opts.m; ++s)
    for (int c = opts.m; c < total; ++c) {
      bool seen = opts.mask_density >= 1.0 || unit_uniform(rng) < opts.mask_density;
      g.mask(s, c) = seen;
      g.mask(c, s) = seen;
    }

  g.observed = g.true_latency_ms;
  if (opts.noise > 0) {
    for (int s = 0; s < total; ++s)
      for (int c = std::max(s + 1, opts.m); c < total; ++c) {
        if (!g.mask(s, c) || c < opts.m) continue;
        double eps = (2.0 * unit_uniform(rng) - 1.0) * opts.noise;
        g.observed(s, c) *= 1.0 + eps;
        g.observed(c, s) = g.observed(s, c);
      }
  }

  // Collinearity check on centered server coordinates.
  Eigen::MatrixXd S(opts.m, 2);
  for (int i = 0; i < opts.m; ++i) {
    S(i, 0) = g.points_km[i][0];
    S(i, 1) = g.points_km[i][1];
  }
  S.rowwise() -= S.colwise().mean();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(S);
  auto sv = svd.singularValues();
  if (opts.m < 3 || sv(1) <= 1e-9 * std::max(sv(0), 1.0)) g.degenerate = true;

  return g;
}

LatencyMatrix to_latency_matrix(const GeometryInstance& g) {
  LatencyMatrix lm;
  lm.m = g.m;
  lm.n = g.n;
  char buf[32];
  for (int i = 0; i < g.m; ++i) {
    std::snprintf(buf, sizeof buf, "s%d", i);
    lm.ids.emplace_back(buf);
  }
  for (int j = 0; j < g.n; ++j) {
    std::snprintf(buf, sizeof buf, "c%d", j);
    lm.ids.emplace_back(buf);
  }
  lm.entries = g.observed;
  lm.mask = g.mask;
  return lm;
}

}  // namespace ntpowd
