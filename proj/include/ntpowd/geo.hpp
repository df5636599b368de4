#pragma once
// WGS-84 inverse geodesic (Vincenty) with a great-circle fallback for the
// near-antipodal non-convergence region, plus the latency<->distance maps.
#include <cmath>
#include <stdexcept>

namespace ntpowd {

struct NoConvergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <typename Scalar = double>
struct GeoCoordinate {
  Scalar lat_deg{0};
  Scalar lon_deg{0};
};

namespace wgs84 {
inline constexpr double kA = 6378137.0;
inline constexpr double kF = 1.0 / 298.257223563;
inline constexpr double kMeanRadius = 6371008.7714;  // (2a + b) / 3
}  // namespace wgs84

template <typename Scalar>
Scalar great_circle_distance(const GeoCoordinate<Scalar>& p,
                             const GeoCoordinate<Scalar>& q) {
  const Scalar d2r = static_cast<Scalar>(M_PI / 180.0);
  const Scalar phi1 = p.lat_deg * d2r, phi2 = q.lat_deg * d2r;
  const Scalar dphi = (q.lat_deg - p.lat_deg) * d2r;
  const Scalar dlam = (q.lon_deg - p.lon_deg) * d2r;
  const Scalar sp = std::sin(dphi / 2), sl = std::sin(dlam / 2);
  const Scalar h = sp * sp + std::cos(phi1) * std::cos(phi2) * sl * sl;
  return static_cast<Scalar>(2.0 * wgs84::kMeanRadius) *
         std::asin(std::min<Scalar>(1, std::sqrt(h)));
}

template <typename Scalar>
Scalar vincenty_distance(const GeoCoordinate<Scalar>& p, const GeoCoordinate<Scalar>& q,
                         Scalar tol = static_cast<Scalar>(1e-12), int max_iter = 200) {
  const Scalar a = static_cast<Scalar>(wgs84::kA);
  const Scalar f = static_cast<Scalar>(wgs84::kF);
  const Scalar b = a * (1 - f);
  const Scalar d2r = static_cast<Scalar>(M_PI / 180.0);

  const Scalar L = (q.lon_deg - p.lon_deg) * d2r;
  const Scalar U1 = std::atan((1 - f) * std::tan(p.lat_deg * d2r));
  const Scalar U2 = std::atan((1 - f) * std::tan(q.lat_deg * d2r));
  const Scalar sinU1 = std::sin(U1), cosU1 = std::cos(U1);
  const Scalar sinU2 = std::sin(U2), cosU2 = std::cos(U2);

  Scalar lambda = L;
  Scalar sinSigma = 0, cosSigma = 0, sigma = 0, cosSqAlpha = 0, cos2SigmaM = 0;
  bool converged = false;
  for (int it = 0; it < max_iter; ++it) {
    const Scalar sinLambda = std::sin(lambda), cosLambda = std::cos(lambda);
    const Scalar t1 = cosU2 * sinLambda;
    const Scalar t2 = cosU1 * sinU2 - sinU1 * cosU2 * cosLambda;
    sinSigma = std::sqrt(t1 * t1 + t2 * t2);
    if (sinSigma == 0) return 0;  // coincident points
    cosSigma = sinU1 * sinU2 + cosU1 * cosU2 * cosLambda;
    sigma = std::atan2(sinSigma, cosSigma);
    const Scalar sinAlpha = cosU1 * cosU2 * sinLambda / sinSigma;
    cosSqAlpha = 1 - sinAlpha * sinAlpha;
    cos2SigmaM = (cosSqAlpha != 0)
                     ? cosSigma - 2 * sinU1 * sinU2 / cosSqAlpha
                     : Scalar(0);  // equatorial line
    const Scalar C = f / 16 * cosSqAlpha * (4 + f * (4 - 3 * cosSqAlpha));
    const Scalar lambdaPrev = lambda;
    lambda = L + (1 - C) * f * sinAlpha *
                     (sigma + C * sinSigma *
                                  (cos2SigmaM + C * cosSigma *
                                                    (-1 + 2 * cos2SigmaM * cos2SigmaM)));
    if (std::abs(lambda - lambdaPrev) < tol) {
      converged = true;
      break;
    }
  }
  if (!converged) throw NoConvergence("vincenty iteration did not converge");

  const Scalar uSq = cosSqAlpha * (a * a - b * b) / (b * b);
  const Scalar A = 1 + uSq / 16384 * (4096 + uSq * (-768 + uSq * (320 - 175 * uSq)));
  const Scalar B = uSq / 1024 * (256 + uSq * (-128 + uSq * (74 - 47 * uSq)));
  const Scalar deltaSigma =
      B * sinSigma *
      (cos2SigmaM +
       B / 4 *
           (cosSigma * (-1 + 2 * cos2SigmaM * cos2SigmaM) -
            B / 6 * cos2SigmaM * (-3 + 4 * sinSigma * sinSigma) *
                (-3 + 4 * cos2SigmaM * cos2SigmaM)));
  return b * A * (sigma - deltaSigma);
}

template <typename Scalar>
struct GeodesicResult {
  Scalar meters{0};
  bool great_circle_fallback{false};
};

template <typename Scalar>
GeodesicResult<Scalar> geodesic_distance(const GeoCoordinate<Scalar>& p,
                                         const GeoCoordinate<Scalar>& q) {
  try {
    return {vincenty_distance(p, q), false};
  } catch (const NoConvergence&) {
    return {great_circle_distance(p, q), true};
  }
}

// Latency of light through fiber-like media at 2/3 c: 2e8 m/s.
inline double geo_latency_ms(double meters) { return meters / 2.0e5; }
inline double latency_to_distance_m(double ms) { return ms * 2.0e5; }

}  // namespace ntpowd
