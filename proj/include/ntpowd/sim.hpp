#pragma once
// Ground-truth simulator: NTP request/response traces with scripted clock
// offset/drift and polling behavior, plus planar geometry instances for the
// completion pipeline.
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ntpowd/capture.hpp"
#include "ntpowd/estimator.hpp"

namespace ntpowd {

enum class ProfileKind { WellSyncConstant, WellSyncBackoff, OutOfSync, SntpOneShot };

struct ClientProfile {
  ProfileKind kind{ProfileKind::WellSyncConstant};
  int count{1};                   // clients stamped from this profile
  double true_c2s_ms{10.0};
  double true_s2c_ms{10.0};
  double jitter_ms{0.0};          // additive uniform [0, jitter_ms) per direction
  double offset_ms{0.0};          // initial clock offset
  double drift_ppm{0.0};
  int poll_exponent{6};           // constant-polling profiles
  std::vector<int> backoff_sequence{6, 7, 8, 9, 10};
  bool emits_gtrtt{true};
  double duration_s{6400.0};
};

struct SimOptions {
  IpAddress server{IpAddress::v4(192, 0, 2, 1)};
  double start_unix{1700000000.0};
  std::uint64_t seed{1};
};

struct TruthRow {
  std::size_t packet_index{0};        // request's index in the record stream
  std::optional<double> true_c2s;     // seconds; actual path delay of this request
  std::optional<double> true_s2c;     // seconds; delay the rotated response took
  double offset{0};                   // seconds, client clock minus true time
  std::string sync_state;
};

struct SimResult {
  std::vector<CaptureRecord> records;    // capture order (non-decreasing ts)
  std::vector<TruthRow> truths;          // one row per request
  std::vector<IpAddress> clients;        // in emission order
};

SimResult simulate_trace(const std::vector<ClientProfile>& profiles,
                         const SimOptions& opts = {});

// ---- geometry instances ----

struct GeometryOptions {
  int m{6};
  int n{50};
  double box_km{4000.0};
  bool ring_servers{true};
  double ring_radius_frac{0.32};
  double client_min_sep_km{150.0};
  double client_server_min_km{300.0};
  double mask_density{1.0};  // fraction of server-client pairs observed
  double noise{0.0};         // multiplicative uniform [-noise, +noise], symmetric
  std::vector<std::array<double, 2>> fixed_servers;  // overrides placement
};

struct GeometryInstance {
  int m{0}, n{0};
  std::vector<std::array<double, 2>> points_km;  // servers first, then clients
  DenseMatrix<double> true_latency_ms;
  DenseMatrix<double> observed;  // truth with noise applied at observed entries
  MaskMatrix mask;               // A block + diagonal + sampled B pairs
  bool degenerate{false};        // servers (nearly) collinear
};

GeometryInstance generate_geometry(const GeometryOptions& opts, std::uint64_t seed);

// Views an instance as the pipeline's partially observed block matrix.
LatencyMatrix to_latency_matrix(const GeometryInstance& g);

}  // namespace ntpowd
