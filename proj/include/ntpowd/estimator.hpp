#pragma once
// Pipeline around the completion core: building the block matrix from server
// geography plus per-pair minimum OWDs, hold-out evaluation, and the
// disc-based geolocation step.
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ntpowd/geo.hpp"
#include "ntpowd/matrix.hpp"
#include "ntpowd/tier.hpp"

namespace ntpowd {

struct ServerMeta {
  std::string id;
  IpAddress address;
  GeoCoordinate<double> coordinate;
};

// Block layout: A = [0..m)^2 server-server; B = rows [0..m) x cols [m..m+n)
// holding server->client (s2c) minima; transposed positions hold client->server
// (c2s) minima; the client-client block starts fully unobserved. Milliseconds.
struct LatencyMatrix {
  Eigen::Index m{0}, n{0};
  std::vector<std::string> ids;  // m server ids then n client ids
  DenseMatrix<double> entries;
  MaskMatrix mask;
  Eigen::Index size() const { return m + n; }
};

struct RegressionCoeffs {
  double beta0{0};
  double beta1{1};
};

struct BuildAResult {
  DenseMatrix<double> A;      // ms, symmetric, zero diagonal, >= A_geo
  DenseMatrix<double> A_geo;  // speed-of-light floor
  RegressionCoeffs coeffs;
  bool insufficient_observations{false};
};

// Fuses measured server-server half-RTTs with the geographic floor: fits
// a_rtt ~ beta0 + beta1 * a_geo by OLS over observed off-diagonal pairs and
// fills the rest from the fit, clamped to >= a_geo.
BuildAResult build_A(const std::vector<ServerMeta>& servers,
                     const DenseMatrix<double>& a_rtt, const MaskMatrix& observed);

struct NoEligibleClients : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DegenerateAfterHoldout : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct AssembleOptions {
  int min_servers{4};
  enum class Symmetrize { None, Min, Mean } symmetrize{Symmetrize::None};
  std::vector<IpAddress> excluded_clients;
};

LatencyMatrix assemble_X(const DenseMatrix<double>& A,
                         const std::vector<ServerMeta>& servers,
                         const std::map<std::pair<IpAddress, IpAddress>, MinOwd>& min_owds,
                         const AssembleOptions& opts = {});

enum class CompletionMethod { Ihtsvd, ClosedForm };

struct CompleteOptions {
  CompletionMethod method{CompletionMethod::Ihtsvd};
  IhtsvdOptions ihtsvd{};
  // Complete elementwise squares and square-root the result. Squared
  // Euclidean distance matrices have exact rank <= 4; plain ones do not.
  bool squared{false};
  double pinv_cutoff{1e-10};
};

// Completes the whole matrix. ClosedForm requires fully observed A and B.
DenseMatrix<double> complete_matrix(const LatencyMatrix& x, const CompleteOptions& opts,
                                    IhtsvdResult<double>* stats = nullptr);

struct HoldoutEntry {
  Eigen::Index row{0}, col{0};
  double true_value{0};
  double predicted{0};
  double rel_error{0};
};

struct HoldoutReport {
  std::vector<HoldoutEntry> entries;
  double mean_rel_error{0};
  std::vector<std::pair<double, double>> cdf;  // (error, cumulative fraction)
};

struct EvaluateOptions {
  double holdout_fraction{0.1};
  std::uint64_t seed{0};
  CompleteOptions completion{};
  // Every client keeps at least this many observed server pairings; columns
  // with fewer anchors than the completion rank are unrecoverable and would
  // measure the draw, not the estimator.
  int min_keep_per_client{4};
};

// Hides randomly chosen observed server-client pairs (both directions),
// completes, and reports per-entry relative errors against the hidden values.
HoldoutReport holdout_evaluate(const LatencyMatrix& x, const EvaluateOptions& opts);

struct GeoEstimate {
  IpAddress client;
  std::optional<GeoCoordinate<double>> coordinate;
  double error_bound_km{0};
  std::string reason;  // set when unlocatable
};

// Disc step: a client whose smallest minOWD-implied distance to some server
// is within radius_km adopts that server's coordinates.
std::vector<GeoEstimate> disc_geolocate(
    const std::map<std::pair<IpAddress, IpAddress>, MinOwd>& min_owds,
    const std::vector<ServerMeta>& servers, double radius_km);

}  // namespace ntpowd
