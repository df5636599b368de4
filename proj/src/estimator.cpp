#include "ntpowd/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <set>

namespace ntpowd {

BuildAResult build_A(const std::vector<ServerMeta>& servers,
                     const DenseMatrix<double>& a_rtt, const MaskMatrix& observed) {
  const auto m = static_cast<Eigen::Index>(servers.size());
  if (m < 2) throw std::invalid_argument("need at least two servers");
  if (a_rtt.rows() != m || a_rtt.cols() != m || observed.rows() != m ||
      observed.cols() != m)
    throw std::invalid_argument("a_rtt/mask shape mismatch");

  BuildAResult out;
  out.A_geo = DenseMatrix<double>::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i + 1; j < m; ++j) {
      const auto d = geodesic_distance(servers[i].coordinate, servers[j].coordinate);
      const double ms = geo_latency_ms(d.meters);
      out.A_geo(i, j) = out.A_geo(j, i) = ms;
    }
  }

  std::vector<double> xs, ys;
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i + 1; j < m; ++j) {
      if (observed(i, j) || observed(j, i)) {
        xs.push_back(out.A_geo(i, j));
        ys.push_back(observed(i, j) ? a_rtt(i, j) : a_rtt(j, i));
      }
    }
  }

  if (xs.size() < 2) {
    out.insufficient_observations = true;
    out.coeffs = {0.0, 1.0};
    out.A = out.A_geo;
    return out;
  }

  // OLS through an SVD solve: robust to a degenerate (constant-x) design.
  DenseMatrix<double> design(xs.size(), 2);
  Eigen::VectorXd rhs(xs.size());
  for (std::size_t k = 0; k < xs.size(); ++k) {
    design(static_cast<Eigen::Index>(k), 0) = 1.0;
    design(static_cast<Eigen::Index>(k), 1) = xs[k];
    rhs(static_cast<Eigen::Index>(k)) = ys[k];
  }
  Eigen::Vector2d beta =
      design.bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(rhs);
  out.coeffs = {beta(0), beta(1)};

  out.A = DenseMatrix<double>::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i + 1; j < m; ++j) {
      double v;
      if (observed(i, j) || observed(j, i)) {
        v = observed(i, j) ? a_rtt(i, j) : a_rtt(j, i);
      } else {
        v = out.coeffs.beta0 + out.coeffs.beta1 * out.A_geo(i, j);
      }
      v = std::max(v, out.A_geo(i, j));  // speed-of-light floor
      out.A(i, j) = out.A(j, i) = v;
    }
  }
  return out;
}

LatencyMatrix assemble_X(const DenseMatrix<double>& A,
                         const std::vector<ServerMeta>& servers,
                         const std::map<std::pair<IpAddress, IpAddress>, MinOwd>& min_owds,
                         const AssembleOptions& opts) {
  const auto m = static_cast<Eigen::Index>(servers.size());
  if (A.rows() != m || A.cols() != m)
    throw std::invalid_argument("A does not match the server list");

  std::map<IpAddress, Eigen::Index> server_index;
  for (Eigen::Index i = 0; i < m; ++i) server_index[servers[i].address] = i;

  const std::set<IpAddress> excluded(opts.excluded_clients.begin(),
                                     opts.excluded_clients.end());

  // Count, per client, the servers it has a usable (positive) minimum with.
  std::map<IpAddress, std::set<Eigen::Index>> reach;
  for (const auto& [key, mo] : min_owds) {
    const auto& [client, server] = key;
    if (excluded.count(client)) continue;
    auto it = server_index.find(server);
    if (it == server_index.end()) continue;
    const bool usable = (mo.c2s_ms && *mo.c2s_ms > 0.0) || (mo.s2c_ms && *mo.s2c_ms > 0.0);
    if (usable) reach[client].insert(it->second);
  }

  std::vector<IpAddress> clients;
  for (const auto& [client, servers_seen] : reach)
    if (static_cast<int>(servers_seen.size()) >= opts.min_servers)
      clients.push_back(client);
  if (clients.empty()) throw NoEligibleClients("no client contacts enough servers");

  const auto n = static_cast<Eigen::Index>(clients.size());
  LatencyMatrix x;
  x.m = m;
  x.n = n;
  x.entries = DenseMatrix<double>::Zero(m + n, m + n);
  x.mask = MaskMatrix::Constant(m + n, m + n, false);

  for (auto& s : servers) x.ids.push_back(s.id);
  for (auto& c : clients) x.ids.push_back(c.to_string());

  x.entries.topLeftCorner(m, m) = A;
  x.mask.topLeftCorner(m, m) = true;
  for (Eigen::Index d = 0; d < m + n; ++d) {
    x.entries(d, d) = 0.0;
    x.mask(d, d) = true;
  }

  std::map<IpAddress, Eigen::Index> client_index;
  for (Eigen::Index j = 0; j < n; ++j) client_index[clients[j]] = m + j;

  for (const auto& [key, mo] : min_owds) {
    const auto& [client, server] = key;
    auto ci = client_index.find(client);
    auto si = server_index.find(server);
    if (ci == client_index.end() || si == server_index.end()) continue;
    const Eigen::Index c = ci->second, s = si->second;
    if (mo.s2c_ms && *mo.s2c_ms > 0.0) {  // server -> client
      x.entries(s, c) = *mo.s2c_ms;
      x.mask(s, c) = true;
    }
    if (mo.c2s_ms && *mo.c2s_ms > 0.0) {  // client -> server
      x.entries(c, s) = *mo.c2s_ms;
      x.mask(c, s) = true;
    }
  }

  if (opts.symmetrize != AssembleOptions::Symmetrize::None) {
    for (Eigen::Index s = 0; s < m; ++s) {
      for (Eigen::Index c = m; c < m + n; ++c) {
        if (x.mask(s, c) && x.mask(c, s)) {
          const double v =
              opts.symmetrize == AssembleOptions::Symmetrize::Min
                  ? std::min(x.entries(s, c), x.entries(c, s))
                  : 0.5 * (x.entries(s, c) + x.entries(c, s));
          x.entries(s, c) = x.entries(c, s) = v;
        }
      }
    }
  }
  return x;
}

namespace {

DenseMatrix<double> complete_ihtsvd(const DenseMatrix<double>& entries,
                                    const MaskMatrix& mask, const CompleteOptions& opts,
                                    IhtsvdResult<double>* stats) {
  if (opts.squared) {
    DenseMatrix<double> sq = elementwise_square(entries);
    auto r = ihtsvd_complete(sq, mask, opts.ihtsvd);
    if (stats) *stats = r;
    DenseMatrix<double> out = elementwise_sqrt_clamped(r.completed);
    return mask.select(entries, out);  // keep observed entries bit-exact
  }
  auto r = ihtsvd_complete(entries, mask, opts.ihtsvd);
  if (stats) *stats = r;
  return r.completed;
}

DenseMatrix<double> complete_closed_form(const LatencyMatrix& x,
                                         const CompleteOptions& opts) {
  const auto m = x.m, n = x.n;
  if (!x.mask.topLeftCorner(m, m).all())
    throw MaskDegenerate("closed form requires a fully observed server block");
  for (Eigen::Index s = 0; s < m; ++s)
    for (Eigen::Index c = m; c < m + n; ++c)
      if (!x.mask(s, c) || !x.mask(c, s))
        throw MaskDegenerate("closed form requires fully observed B blocks");

  DenseMatrix<double> A = x.entries.topLeftCorner(m, m);
  DenseMatrix<double> B = x.entries.topRightCorner(m, n);
  if (opts.squared) {
    A = elementwise_square(A);
    B = elementwise_square(B);
  }
  DenseMatrix<double> C = closed_form_C(A, B, opts.pinv_cutoff);
  if (opts.squared) C = elementwise_sqrt_clamped(C);

  DenseMatrix<double> out = x.entries;
  out.bottomRightCorner(n, n) = C;
  for (Eigen::Index d = m; d < m + n; ++d) out(d, d) = 0.0;
  return out;
}

}  // namespace

DenseMatrix<double> complete_matrix(const LatencyMatrix& x, const CompleteOptions& opts,
                                    IhtsvdResult<double>* stats) {
  if (opts.method == CompletionMethod::ClosedForm) return complete_closed_form(x, opts);
  return complete_ihtsvd(x.entries, x.mask, opts, stats);
}

namespace {

// Rank-consistent extension of a partially observed client column: least
// squares against the observed rows of A, prediction through the full A.
double predict_from_column_span(const DenseMatrix<double>& A,
                                const DenseMatrix<double>& entries,
                                const MaskMatrix& mask, Eigen::Index server_row,
                                Eigen::Index client_col, bool transposed,
                                bool squared) {
  const Eigen::Index m = A.rows();
  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < m; ++i) {
    const bool obs = transposed ? mask(client_col, i) : mask(i, client_col);
    if (obs) rows.push_back(i);
  }
  if (rows.empty()) return 0.0;

  DenseMatrix<double> Asub(static_cast<Eigen::Index>(rows.size()), m);
  Eigen::VectorXd b(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    Asub.row(static_cast<Eigen::Index>(k)) = A.row(rows[k]);
    double v = transposed ? entries(client_col, rows[k]) : entries(rows[k], client_col);
    if (squared) v *= v;
    b(static_cast<Eigen::Index>(k)) = v;
  }
  Eigen::VectorXd w = Asub.bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(b);
  double pred = A.row(server_row).dot(w);
  if (squared) pred = std::sqrt(std::max(0.0, pred));
  return pred;
}

}  // namespace

HoldoutReport holdout_evaluate(const LatencyMatrix& x, const EvaluateOptions& opts) {
  const Eigen::Index m = x.m, n = x.n;
  if (opts.holdout_fraction < 0 || opts.holdout_fraction >= 1)
    throw std::invalid_argument("holdout fraction must be in [0, 1)");

  // Candidate units are (server, client) pairs with at least one observed
  // direction; hiding a unit removes both directions at once.
  struct Unit {
    Eigen::Index s, c;
    int entries;
  };
  std::vector<Unit> units;
  std::vector<int> kept(static_cast<std::size_t>(n), 0);
  std::size_t observed_entries = 0;
  for (Eigen::Index c = m; c < m + n; ++c) {
    for (Eigen::Index s = 0; s < m; ++s) {
      const int cnt = (x.mask(s, c) ? 1 : 0) + (x.mask(c, s) ? 1 : 0);
      if (cnt > 0) {
        units.push_back({s, c, cnt});
        ++kept[static_cast<std::size_t>(c - m)];
        observed_entries += static_cast<std::size_t>(cnt);
      }
    }
  }

  HoldoutReport report;
  const auto target = static_cast<std::size_t>(
      std::llround(opts.holdout_fraction * static_cast<double>(observed_entries)));
  if (target == 0) return report;

  std::mt19937_64 rng(opts.seed);
  // Fisher-Yates with an explicit generator so reruns are bit-reproducible.
  for (std::size_t i = units.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng() % i);
    std::swap(units[i - 1], units[j]);
  }

  std::vector<Unit> hidden;
  std::size_t hidden_entries = 0;
  for (const auto& u : units) {
    if (hidden_entries >= target) break;
    auto& k = kept[static_cast<std::size_t>(u.c - m)];
    if (k - 1 < opts.min_keep_per_client) continue;
    --k;
    hidden.push_back(u);
    hidden_entries += static_cast<std::size_t>(u.entries);
  }
  if (hidden.empty())
    throw DegenerateAfterHoldout("recoverability floor rejects every candidate");

  LatencyMatrix work = x;
  for (const auto& u : hidden) {
    work.mask(u.s, u.c) = false;
    work.mask(u.c, u.s) = false;
  }

  DenseMatrix<double> predicted;
  if (opts.completion.method == CompletionMethod::Ihtsvd) {
    predicted = complete_matrix(work, opts.completion);
  } else {
    const DenseMatrix<double> A = x.entries.topLeftCorner(m, m);
    DenseMatrix<double> Asq = opts.completion.squared ? elementwise_square(A) : A;
    predicted = x.entries;
    for (const auto& u : hidden) {
      predicted(u.s, u.c) = predict_from_column_span(
          Asq, work.entries, work.mask, u.s, u.c, false, opts.completion.squared);
      predicted(u.c, u.s) = predict_from_column_span(
          Asq, work.entries, work.mask, u.s, u.c, true, opts.completion.squared);
    }
  }

  for (const auto& u : hidden) {
    for (const auto& [r, c] : {std::pair{u.s, u.c}, std::pair{u.c, u.s}}) {
      if (!x.mask(r, c)) continue;
      const double truth = x.entries(r, c);
      if (truth <= 0.0) continue;  // relative error undefined
      HoldoutEntry e;
      e.row = r;
      e.col = c;
      e.true_value = truth;
      e.predicted = predicted(r, c);
      e.rel_error = std::abs(e.predicted - truth) / truth;
      report.entries.push_back(e);
    }
  }

  if (!report.entries.empty()) {
    double acc = 0;
    for (const auto& e : report.entries) acc += e.rel_error;
    report.mean_rel_error = acc / static_cast<double>(report.entries.size());

    std::vector<double> errs;
    errs.reserve(report.entries.size());
    for (const auto& e : report.entries) errs.push_back(e.rel_error);
    std::sort(errs.begin(), errs.end());
    for (std::size_t i = 0; i < errs.size(); ++i) {
      report.cdf.emplace_back(errs[i], static_cast<double>(i + 1) /
                                           static_cast<double>(errs.size()));
    }
  }
  return report;
}

std::vector<GeoEstimate> disc_geolocate(
    const std::map<std::pair<IpAddress, IpAddress>, MinOwd>& min_owds,
    const std::vector<ServerMeta>& servers, double radius_km) {
  if (radius_km <= 0) throw std::invalid_argument("radius must be positive");

  std::map<IpAddress, const ServerMeta*> by_addr;
  for (const auto& s : servers) by_addr[s.address] = &s;

  struct Best {
    double km;
    const ServerMeta* server;
  };
  std::map<IpAddress, Best> best;
  for (const auto& [key, mo] : min_owds) {
    const auto& [client, server] = key;
    auto it = by_addr.find(server);
    if (it == by_addr.end()) continue;
    double ms = std::numeric_limits<double>::infinity();
    if (mo.c2s_ms && *mo.c2s_ms > 0.0) ms = std::min(ms, *mo.c2s_ms);
    if (mo.s2c_ms && *mo.s2c_ms > 0.0) ms = std::min(ms, *mo.s2c_ms);
    if (!std::isfinite(ms)) continue;
    const double km = latency_to_distance_m(ms) / 1000.0;
    auto b = best.find(client);
    if (b == best.end() || km < b->second.km) best[client] = {km, it->second};
  }

  std::vector<GeoEstimate> out;
  for (const auto& [client, b] : best) {
    GeoEstimate e;
    e.client = client;
    if (b.km <= radius_km) {
      e.coordinate = b.server->coordinate;
      e.error_bound_km = radius_km;
    } else {
      char buf[96];
      std::snprintf(buf, sizeof buf, "nearest disc boundary at %.1f km", b.km);
      e.reason = buf;
    }
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace ntpowd
