#include <cstdio>
#include <fstream>
#include <memory>
#include <string>

#include "commands.hpp"
#include "ntpowd/estimator.hpp"
#include "ntpowd/io.hpp"

namespace ntpowd::cli {
namespace {

struct Opts {
  std::string labeled, min_owd_csv;
  std::string servers_csv;
  double radius_km{200.0};
  int tier_floor{3};
  std::string out;
};

void run(const Opts& o) {
  if (o.labeled.empty() == o.min_owd_csv.empty())
    throw std::invalid_argument("pass exactly one of --labeled or --min-owd");
  auto servers = read_servers_csv(o.servers_csv);
  if (servers.empty()) throw std::invalid_argument("server list is empty");
  if (o.radius_km <= 0) throw std::invalid_argument("--radius-km must be positive");

  MinOwdMap owds = o.labeled.empty()
                       ? read_min_owd_csv(o.min_owd_csv)
                       : [&] {
                           auto sessions = read_labeled_jsonl(o.labeled);
                           return min_owd(sessions, static_cast<Tier>(o.tier_floor));
                         }();

  auto estimates = disc_geolocate(owds, servers, o.radius_km);

  std::size_t located = 0;
  for (const auto& e : estimates)
    if (e.coordinate) ++located;

  if (!o.out.empty()) {
    std::ofstream out(o.out, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + o.out);
    out << "client,lat,lon,error_bound_km,reason\n";
    char buf[96];
    for (const auto& e : estimates) {
      out << e.client.to_string() << ',';
      if (e.coordinate) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g", e.coordinate->lat_deg,
                      e.coordinate->lon_deg, e.error_bound_km);
        out << buf;
      } else {
        out << ",,";
      }
      out << ',' << e.reason << '\n';
    }
  }

  std::printf("geolocate: %zu clients, %zu located within %.1f km, %zu unlocatable\n",
              estimates.size(), located, o.radius_km, estimates.size() - located);
  for (const auto& e : estimates)
    if (!e.coordinate)
      std::printf("unlocatable %s: %s\n", e.client.to_string().c_str(),
                  e.reason.c_str());
}

}  // namespace

void register_geolocate(CLI::App& app) {
  auto o = std::make_shared<Opts>();
  auto* c = app.add_subcommand(
      "geolocate", "Place clients at the nearest server within a latency disc");
  c->add_option("--labeled", o->labeled, "labeled samples JSONL (classify output)");
  c->add_option("--min-owd", o->min_owd_csv, "per-pair minimum OWD CSV");
  c->add_option("--servers", o->servers_csv, "server metadata CSV with coordinates")
      ->required();
  c->add_option("--radius-km", o->radius_km, "disc radius")->capture_default_str();
  c->add_option("--tier-floor", o->tier_floor, "lowest tier admitted into minima")
      ->capture_default_str()
      ->check(CLI::Range(0, 3));
  c->add_option("--out", o->out, "client coordinates CSV");
  c->callback([o] { run(*o); });
}

}  // namespace ntpowd::cli
