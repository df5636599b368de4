#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <random>

#include "ntpowd/estimator.hpp"

using namespace ntpowd;

namespace {

using Point = std::array<double, 2>;  // km in the plane

double dist_km(const Point& a, const Point& b) {
  return std::hypot(a[0] - b[0], a[1] - b[1]);
}

// Pairwise one-way latency, ms, at 200 km per ms.
DenseMatrix<double> pairwise_ms(const std::vector<Point>& pts) {
  const auto n = static_cast<Eigen::Index>(pts.size());
  DenseMatrix<double> d = DenseMatrix<double>::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      d(i, j) = dist_km(pts[i], pts[j]) / 200.0;
  return d;
}

std::vector<Point> random_points(std::size_t count, std::uint64_t seed,
                                 double box_km = 4000.0) {
  std::mt19937_64 rng(seed);
  auto u = [&] { return (rng() >> 11) * 0x1.0p-53 * box_km; };
  std::vector<Point> pts;
  for (std::size_t i = 0; i < count; ++i) pts.push_back({u(), u()});
  return pts;
}

double rel_frob(const DenseMatrix<double>& got, const DenseMatrix<double>& want) {
  return (got - want).norm() / want.norm();
}

ServerMeta server_at(const std::string& id, const IpAddress& addr, double lat,
                     double lon) {
  return ServerMeta{id, addr, GeoCoordinate<double>{lat, lon}};
}

MinOwd both_ms(double c2s, double s2c) { return MinOwd{c2s, s2c}; }

// A scattered-servers-plus-random-clients latency matrix with fully observed
// server-client blocks; the geometry is planar so element squares have rank
// four. Server radii are jittered: co-circular anchors would collapse the
// server block to rank three and leave the client block under-determined.
LatencyMatrix planar_instance(Eigen::Index m, Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto u = [&] { return (rng() >> 11) * 0x1.0p-53; };
  std::vector<Point> pts;
  for (Eigen::Index s = 0; s < m; ++s) {
    const double th = 2.0 * M_PI * double(s) / double(m) + 0.2;
    const double r = 1280.0 * (0.7 + 0.6 * u());
    pts.push_back({2000.0 + r * std::cos(th), 2000.0 + r * std::sin(th)});
  }
  while (static_cast<Eigen::Index>(pts.size()) < m + n) {
    Point p{u() * 4000.0, u() * 4000.0};
    bool ok = true;
    for (Eigen::Index s = 0; s < m; ++s)
      if (dist_km(p, pts[static_cast<std::size_t>(s)]) < 300.0) ok = false;
    if (ok) pts.push_back(p);
  }

  LatencyMatrix x;
  x.m = m;
  x.n = n;
  x.entries = pairwise_ms(pts);
  x.mask = MaskMatrix::Constant(m + n, m + n, false);
  x.mask.topLeftCorner(m, m) = true;
  for (Eigen::Index d = 0; d < m + n; ++d) x.mask(d, d) = true;
  for (Eigen::Index s = 0; s < m; ++s) {
    for (Eigen::Index c = m; c < m + n; ++c) {
      x.mask(s, c) = x.mask(c, s) = true;
    }
  }
  // client-client values exist in `entries` as ground truth but are unobserved
  for (Eigen::Index i = m; i < m + n; ++i)
    for (Eigen::Index j = m; j < m + n; ++j)
      if (i != j) x.mask(i, j) = false;
  for (Eigen::Index i = 0; i < m + n; ++i) x.ids.push_back("p" + std::to_string(i));
  return x;
}

}  // namespace

TEST_CASE("pseudo-inverse satisfies the Penrose identity") {
  std::mt19937_64 rng(11);
  auto fill = [&](Eigen::Index r, Eigen::Index c) {
    DenseMatrix<double> a(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
      for (Eigen::Index i = 0; i < r; ++i)
        a(i, j) = (rng() >> 11) * 0x1.0p-53 - 0.5;
    return a;
  };
  for (auto [r, c] : {std::pair{5, 5}, std::pair{7, 3}, std::pair{3, 7}}) {
    auto a = fill(r, c);
    auto dag = pseudo_inverse(a);
    CHECK(rel_frob(a * dag * a, a) < 1e-12);
  }

  // exact rank detection on a product of thin factors
  auto u = fill(6, 2);
  auto v = fill(2, 6);
  DenseMatrix<double> low = u * v;
  int rank = 0;
  auto dag = pseudo_inverse(low, 1e-10, &rank);
  CHECK(rank == 2);
  CHECK(rel_frob(low * dag * low, low) < 1e-10);
}

TEST_CASE("squared planar distances have rank four") {
  auto pts = random_points(30, 3);
  DenseMatrix<double> sq = elementwise_square(pairwise_ms(pts));
  int rank = 0;
  (void)pseudo_inverse(sq, 1e-9, &rank);
  CHECK(rank == 4);
}

TEST_CASE("closed-form client block") {
  SUBCASE("planar configurations reproduce the hidden block") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      auto pts = random_points(6, seed);  // 4 servers + 2 clients
      DenseMatrix<double> sq = elementwise_square(pairwise_ms(pts));
      DenseMatrix<double> A = sq.topLeftCorner(4, 4);
      DenseMatrix<double> B = sq.topRightCorner(4, 2);
      DenseMatrix<double> C_true = sq.bottomRightCorner(2, 2);
      auto C = closed_form_C(A, B);
      CHECK(rel_frob(C, C_true) < 1e-8);
    }
  }
  SUBCASE("B equal to A returns A") {
    auto pts = random_points(5, 9);
    DenseMatrix<double> A = elementwise_square(pairwise_ms(pts));
    auto C = closed_form_C(A, A);
    CHECK(rel_frob(C, A) < 1e-10);
  }
  SUBCASE("rank-one outer products are exact") {
    Eigen::VectorXd v(6);
    v << 1, 2, 3, 4, 5, 6;
    DenseMatrix<double> X = v * v.transpose();
    DenseMatrix<double> A = X.topLeftCorner(3, 3);
    DenseMatrix<double> B = X.topRightCorner(3, 3);
    DenseMatrix<double> C_true = X.bottomRightCorner(3, 3);
    bool deficient = false;
    auto C = closed_form_C(A, B, 1e-10, &deficient);
    CHECK(rel_frob(C, C_true) < 1e-12);
    CHECK(deficient);  // rank one is below the nominal four
  }
  SUBCASE("collinear servers are flagged but still exact in-span") {
    std::vector<Point> pts = {{0, 0}, {100, 0}, {200, 0}, {300, 0},
                              {150, 0}, {260, 0}};  // clients on the same line
    DenseMatrix<double> sq = elementwise_square(pairwise_ms(pts));
    bool deficient = false;
    auto C = closed_form_C(sq.topLeftCorner(4, 4), sq.topRightCorner(4, 2), 1e-10,
                           &deficient);
    CHECK(deficient);
    CHECK(rel_frob(C, sq.bottomRightCorner(2, 2)) < 1e-8);
  }
}

TEST_CASE("iterative completion") {
  SUBCASE("fully observed input is returned unchanged") {
    auto pts = random_points(8, 21);
    DenseMatrix<double> x = pairwise_ms(pts);
    MaskMatrix mask = MaskMatrix::Constant(8, 8, true);
    auto r = ihtsvd_complete(x, mask);
    CHECK(r.converged);
    CHECK(r.completed == x);
  }
  SUBCASE("rank-one recovery from a sparse mask") {
    std::mt19937_64 rng(5);
    Eigen::VectorXd u(20), v(20);
    for (int i = 0; i < 20; ++i) {
      u(i) = 1.0 + (rng() >> 11) * 0x1.0p-53;
      v(i) = 1.0 + (rng() >> 11) * 0x1.0p-53;
    }
    DenseMatrix<double> x = u * v.transpose();
    MaskMatrix mask = MaskMatrix::Constant(20, 20, false);
    for (Eigen::Index i = 0; i < 20; ++i) mask(i, i) = true;
    std::size_t shown = 0;
    for (Eigen::Index j = 0; j < 20; ++j)
      for (Eigen::Index i = 0; i < 20; ++i)
        if ((rng() >> 11) * 0x1.0p-53 < 0.3 && ++shown) mask(i, j) = true;

    IhtsvdOptions opts;
    opts.rank = 1;
    opts.tol = 1e-12;
    auto r = ihtsvd_complete(x, mask, opts);
    CHECK(r.converged);
    CHECK(rel_frob(r.completed, x) < 1e-8);
  }
  SUBCASE("observed entries survive bit-exact") {
    auto pts = random_points(10, 33);
    DenseMatrix<double> x = pairwise_ms(pts);
    std::mt19937_64 rng(7);
    MaskMatrix mask = MaskMatrix::Constant(10, 10, false);
    for (Eigen::Index i = 0; i < 10; ++i) mask(i, i) = true;
    for (Eigen::Index j = 0; j < 10; ++j)
      for (Eigen::Index i = 0; i < 10; ++i)
        if ((rng() >> 11) * 0x1.0p-53 < 0.6) mask(i, j) = true;
    IhtsvdOptions opts;
    opts.max_iter = 50;  // exactness must not depend on convergence
    auto r = ihtsvd_complete(x, mask, opts);
    for (Eigen::Index j = 0; j < 10; ++j)
      for (Eigen::Index i = 0; i < 10; ++i)
        if (mask(i, j)) CHECK(r.completed(i, j) == x(i, j));
  }
  SUBCASE("degenerate masks are rejected") {
    DenseMatrix<double> x = DenseMatrix<double>::Ones(4, 4);
    MaskMatrix mask = MaskMatrix::Constant(4, 4, true);
    mask.row(2).setConstant(false);
    CHECK_THROWS_AS(ihtsvd_complete(x, mask), MaskDegenerate);
    mask.row(2).setConstant(true);
    mask.col(1).setConstant(false);
    CHECK_THROWS_AS(ihtsvd_complete(x, mask), MaskDegenerate);
  }
  SUBCASE("shape and rank validation") {
    DenseMatrix<double> x = DenseMatrix<double>::Ones(4, 4);
    MaskMatrix bad = MaskMatrix::Constant(4, 3, true);
    CHECK_THROWS_AS(ihtsvd_complete(x, bad), std::invalid_argument);
    MaskMatrix mask = MaskMatrix::Constant(4, 4, true);
    IhtsvdOptions opts;
    opts.rank = 0;
    CHECK_THROWS_AS(ihtsvd_complete(x, mask, opts), std::invalid_argument);
  }
}

TEST_CASE("server-block fusion") {
  std::vector<ServerMeta> servers = {
      server_at("bos", IpAddress::v4(192, 0, 2, 1), 42.36, -71.06),
      server_at("nyc", IpAddress::v4(192, 0, 2, 2), 40.71, -74.01),
      server_at("chi", IpAddress::v4(192, 0, 2, 3), 41.88, -87.63),
      server_at("sfo", IpAddress::v4(192, 0, 2, 4), 37.77, -122.42)};

  DenseMatrix<double> geo(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      geo(i, j) = i == j ? 0.0
                         : geo_latency_ms(
                               geodesic_distance(servers[i].coordinate,
                                                 servers[j].coordinate)
                                   .meters);

  SUBCASE("fully observed measurements are kept") {
    DenseMatrix<double> rtt = 2.0 * geo;  // comfortably above the floor
    MaskMatrix obs = MaskMatrix::Constant(4, 4, true);
    auto r = build_A(servers, rtt, obs);
    CHECK_FALSE(r.insufficient_observations);
    CHECK(rel_frob(r.A, rtt) < 1e-12);
    CHECK(rel_frob(r.A_geo, geo) < 1e-12);
  }
  SUBCASE("affine structure is recovered and used for gaps") {
    DenseMatrix<double> rtt = DenseMatrix<double>::Zero(4, 4);
    MaskMatrix obs = MaskMatrix::Constant(4, 4, false);
    for (auto [i, j] : {std::pair{0, 1}, std::pair{0, 2}, std::pair{1, 3}}) {
      rtt(i, j) = rtt(j, i) = 5.0 + 2.0 * geo(i, j);
      obs(i, j) = obs(j, i) = true;
    }
    auto r = build_A(servers, rtt, obs);
    CHECK(r.coeffs.beta0 == doctest::Approx(5.0).epsilon(1e-9));
    CHECK(r.coeffs.beta1 == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(r.A(2, 3) == doctest::Approx(5.0 + 2.0 * geo(2, 3)).epsilon(1e-9));
    CHECK(r.A(0, 3) == doctest::Approx(5.0 + 2.0 * geo(0, 3)).epsilon(1e-9));
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) CHECK(r.A(i, j) >= geo(i, j) - 1e-12);
    CHECK((r.A - r.A.transpose()).norm() == 0.0);
    for (int i = 0; i < 4; ++i) CHECK(r.A(i, i) == 0.0);
  }
  SUBCASE("measurements below the light floor are lifted to it") {
    DenseMatrix<double> rtt = 0.5 * geo;
    MaskMatrix obs = MaskMatrix::Constant(4, 4, true);
    auto r = build_A(servers, rtt, obs);
    CHECK(rel_frob(r.A, geo) < 1e-12);
  }
  SUBCASE("one observed pair is not enough for a fit") {
    DenseMatrix<double> rtt = DenseMatrix<double>::Zero(4, 4);
    MaskMatrix obs = MaskMatrix::Constant(4, 4, false);
    obs(0, 1) = true;
    rtt(0, 1) = 30.0;
    auto r = build_A(servers, rtt, obs);
    CHECK(r.insufficient_observations);
    CHECK(r.coeffs.beta0 == 0.0);
    CHECK(r.coeffs.beta1 == 1.0);
    CHECK(rel_frob(r.A, geo) < 1e-12);
  }
  SUBCASE("input validation") {
    CHECK_THROWS_AS(build_A({servers[0]}, DenseMatrix<double>::Zero(1, 1),
                            MaskMatrix::Constant(1, 1, true)),
                    std::invalid_argument);
    CHECK_THROWS_AS(build_A(servers, DenseMatrix<double>::Zero(3, 3),
                            MaskMatrix::Constant(3, 3, true)),
                    std::invalid_argument);
  }
}

TEST_CASE("block-matrix assembly") {
  std::vector<ServerMeta> servers = {
      server_at("s0", IpAddress::v4(192, 0, 2, 1), 0, 0),
      server_at("s1", IpAddress::v4(192, 0, 2, 2), 0, 5),
      server_at("s2", IpAddress::v4(192, 0, 2, 3), 5, 0),
      server_at("s3", IpAddress::v4(192, 0, 2, 4), 5, 5)};
  DenseMatrix<double> A = DenseMatrix<double>::Constant(4, 4, 12.0);
  A.diagonal().setZero();

  const auto c1 = IpAddress::v4(10, 0, 0, 1);
  const auto c2 = IpAddress::v4(10, 0, 0, 2);

  std::map<std::pair<IpAddress, IpAddress>, MinOwd> minima;
  for (int s = 0; s < 4; ++s)
    minima[{c1, servers[s].address}] = both_ms(10.0 + s, 20.0 + s);
  for (int s = 0; s < 3; ++s)  // c2 reaches only three servers
    minima[{c2, servers[s].address}] = both_ms(30.0 + s, 40.0 + s);

  SUBCASE("placement, ids, and the observation mask") {
    auto x = assemble_X(A, servers, minima);
    CHECK(x.m == 4);
    CHECK(x.n == 1);  // c2 misses the default four-server floor
    REQUIRE(x.ids.size() == 5);
    CHECK(x.ids[0] == "s0");
    CHECK(x.ids[4] == c1.to_string());
    CHECK(x.entries.topLeftCorner(4, 4) == A);
    for (int s = 0; s < 4; ++s) {
      CHECK(x.entries(s, 4) == 20.0 + s);  // server->client
      CHECK(x.entries(4, s) == 10.0 + s);  // client->server
      CHECK(x.mask(s, 4));
      CHECK(x.mask(4, s));
    }
    int observed = 0;
    for (Eigen::Index j = 0; j < 5; ++j)
      for (Eigen::Index i = 0; i < 5; ++i)
        if (x.mask(i, j)) ++observed;
    CHECK(observed == 16 + 1 + 8);  // A block, client diagonal, both B strips
  }
  SUBCASE("lower floors admit more clients") {
    AssembleOptions opts;
    opts.min_servers = 3;
    auto x = assemble_X(A, servers, minima, opts);
    CHECK(x.n == 2);
    CHECK(x.ids[5] == c2.to_string());
    CHECK_FALSE(x.mask(3, 5));  // the pair c2 never contacted stays unobserved
    CHECK(x.entries(5, 0) == 30.0);
  }
  SUBCASE("exclusion and emptiness") {
    AssembleOptions opts;
    opts.excluded_clients = {c1};
    CHECK_THROWS_AS(assemble_X(A, servers, minima, opts), NoEligibleClients);
  }
  SUBCASE("non-positive minima are unusable") {
    auto broken = minima;
    for (int s = 0; s < 4; ++s)
      broken[{c1, servers[s].address}] = both_ms(-1.0, -2.0);
    CHECK_THROWS_AS(assemble_X(A, servers, broken), NoEligibleClients);
  }
  SUBCASE("one usable direction still counts for reach") {
    auto one_dir = minima;
    for (int s = 0; s < 4; ++s) {
      MinOwd mo;
      mo.s2c_ms = 20.0 + s;  // forward direction never measured
      one_dir[{c1, servers[s].address}] = mo;
    }
    auto x = assemble_X(A, servers, one_dir);
    CHECK(x.n == 1);
    CHECK(x.mask(0, 4));
    CHECK_FALSE(x.mask(4, 0));
  }
  SUBCASE("symmetrization variants") {
    AssembleOptions mn;
    mn.symmetrize = AssembleOptions::Symmetrize::Min;
    auto xmin = assemble_X(A, servers, minima, mn);
    CHECK(xmin.entries(0, 4) == 10.0);
    CHECK(xmin.entries(4, 0) == 10.0);

    AssembleOptions me;
    me.symmetrize = AssembleOptions::Symmetrize::Mean;
    auto xmean = assemble_X(A, servers, minima, me);
    CHECK(xmean.entries(0, 4) == 15.0);
    CHECK(xmean.entries(4, 0) == 15.0);
  }
  SUBCASE("shape validation") {
    CHECK_THROWS_AS(assemble_X(DenseMatrix<double>::Zero(3, 3), servers, minima),
                    std::invalid_argument);
  }
}

TEST_CASE("the two completion methods agree on planar instances") {
  auto x = planar_instance(5, 3, 17);
  CompleteOptions cf;
  cf.method = CompletionMethod::ClosedForm;
  cf.squared = true;
  auto via_cf = complete_matrix(x, cf);

  CompleteOptions ih;
  ih.squared = true;
  IhtsvdResult<double> stats;
  auto via_ih = complete_matrix(x, ih, &stats);
  CHECK(stats.converged);

  DenseMatrix<double> truth = x.entries;  // planar_instance stores full truth
  CHECK(rel_frob(via_cf.bottomRightCorner(3, 3), truth.bottomRightCorner(3, 3)) < 1e-8);
  CHECK(rel_frob(via_ih.bottomRightCorner(3, 3), truth.bottomRightCorner(3, 3)) < 1e-5);
  CHECK(rel_frob(via_ih.bottomRightCorner(3, 3), via_cf.bottomRightCorner(3, 3)) < 1e-5);
  // observed region passes through untouched
  for (Eigen::Index j = 0; j < x.size(); ++j)
    for (Eigen::Index i = 0; i < x.size(); ++i)
      if (x.mask(i, j)) CHECK(via_ih(i, j) == x.entries(i, j));
}

TEST_CASE("closed form refuses partial observation") {
  auto x = planar_instance(5, 3, 4);
  x.mask(0, 6) = false;
  CompleteOptions cf;
  cf.method = CompletionMethod::ClosedForm;
  CHECK_THROWS_AS(complete_matrix(x, cf), MaskDegenerate);
}

TEST_CASE("hold-out evaluation") {
  auto x = planar_instance(6, 12, 8);

  SUBCASE("zero fraction is a no-op") {
    EvaluateOptions opts;
    opts.holdout_fraction = 0.0;
    auto r = holdout_evaluate(x, opts);
    CHECK(r.entries.empty());
    CHECK(r.mean_rel_error == 0.0);
  }
  SUBCASE("same seed, same report") {
    EvaluateOptions opts;
    opts.seed = 42;
    opts.completion.squared = true;
    auto r1 = holdout_evaluate(x, opts);
    auto r2 = holdout_evaluate(x, opts);
    REQUIRE(r1.entries.size() == r2.entries.size());
    for (std::size_t i = 0; i < r1.entries.size(); ++i) {
      CHECK(r1.entries[i].row == r2.entries[i].row);
      CHECK(r1.entries[i].col == r2.entries[i].col);
      CHECK(r1.entries[i].predicted == r2.entries[i].predicted);
    }
    CHECK(r1.mean_rel_error == r2.mean_rel_error);

    opts.seed = 43;
    auto r3 = holdout_evaluate(x, opts);
    bool same = r1.entries.size() == r3.entries.size();
    if (same)
      for (std::size_t i = 0; i < r1.entries.size(); ++i)
        same = same && r1.entries[i].row == r3.entries[i].row &&
               r1.entries[i].col == r3.entries[i].col;
    CHECK_FALSE(same);
  }
  SUBCASE("noiseless planar squared completion recovers hidden pairs") {
    EvaluateOptions opts;
    opts.seed = 7;
    opts.completion.squared = true;
    auto r = holdout_evaluate(x, opts);
    REQUIRE_FALSE(r.entries.empty());
    CHECK(r.mean_rel_error < 1e-3);
    REQUIRE_FALSE(r.cdf.empty());
    CHECK(r.cdf.back().second == 1.0);
    for (std::size_t i = 1; i < r.cdf.size(); ++i) {
      CHECK(r.cdf[i].first >= r.cdf[i - 1].first);
      CHECK(r.cdf[i].second > r.cdf[i - 1].second);
    }
  }
  SUBCASE("closed-form holdout is exact on consistent data") {
    EvaluateOptions opts;
    opts.seed = 7;
    opts.completion.method = CompletionMethod::ClosedForm;
    opts.completion.squared = true;
    auto r = holdout_evaluate(x, opts);
    REQUIRE_FALSE(r.entries.empty());
    CHECK(r.mean_rel_error < 1e-6);
  }
  SUBCASE("recoverability floor can reject every candidate") {
    auto small = planar_instance(4, 6, 5);
    EvaluateOptions opts;
    opts.min_keep_per_client = 4;  // equal to the server count: nothing can go
    CHECK_THROWS_AS(holdout_evaluate(small, opts), DegenerateAfterHoldout);
  }
  SUBCASE("fraction validation") {
    EvaluateOptions opts;
    opts.holdout_fraction = 1.0;
    CHECK_THROWS_AS(holdout_evaluate(x, opts), std::invalid_argument);
    opts.holdout_fraction = -0.1;
    CHECK_THROWS_AS(holdout_evaluate(x, opts), std::invalid_argument);
  }
}

TEST_CASE("disc geolocation") {
  std::vector<ServerMeta> servers = {
      server_at("bos", IpAddress::v4(192, 0, 2, 1), 42.36, -71.06),
      server_at("sfo", IpAddress::v4(192, 0, 2, 2), 37.77, -122.42)};
  const auto near = IpAddress::v4(10, 0, 0, 1);
  const auto far = IpAddress::v4(10, 0, 0, 2);
  const auto dark = IpAddress::v4(10, 0, 0, 3);

  std::map<std::pair<IpAddress, IpAddress>, MinOwd> minima;
  minima[{near, servers[0].address}] = both_ms(0.5, 0.7);    // 100 km
  minima[{near, servers[1].address}] = both_ms(21.0, 22.0);  // the wrong coast
  minima[{far, servers[0].address}] = both_ms(30.0, 31.0);   // 6000 km
  minima[{dark, servers[0].address}] = both_ms(-2.0, -1.0);  // nothing usable

  auto out = disc_geolocate(minima, servers, 200.0);
  REQUIRE(out.size() == 2);  // `dark` has no usable minimum at all

  const GeoEstimate* got_near = nullptr;
  for (const auto& e : out)
    if (e.client == near) got_near = &e;
  REQUIRE(got_near != nullptr);
  REQUIRE(got_near->coordinate.has_value());
  CHECK(got_near->coordinate->lat_deg == 42.36);
  CHECK(got_near->coordinate->lon_deg == -71.06);
  CHECK(got_near->error_bound_km == 200.0);
  CHECK(got_near->reason.empty());

  const GeoEstimate* got_far = nullptr;
  for (const auto& e : out)
    if (e.client == far) got_far = &e;
  REQUIRE(got_far != nullptr);
  CHECK_FALSE(got_far->coordinate.has_value());
  CHECK(got_far->reason == "nearest disc boundary at 6000.0 km");

  CHECK_THROWS_AS(disc_geolocate(minima, servers, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(disc_geolocate(minima, servers, -5.0), std::invalid_argument);
}
