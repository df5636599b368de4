#include <cstdio>
#include <fstream>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "commands.hpp"
#include "ntpowd/capture.hpp"
#include "ntpowd/io.hpp"
#include "ntpowd/sim.hpp"

namespace ntpowd::cli {
namespace {

using nlohmann::json;

struct Opts {
  std::string spec_path;
  std::uint64_t seed{1};
  std::string server{"192.0.2.1"};
  double start_unix{1700000000.0};
  std::string out_pcap, out_jsonl, out_truth;
};

ProfileKind parse_kind(const std::string& s) {
  if (s == "well_sync_constant") return ProfileKind::WellSyncConstant;
  if (s == "well_sync_backoff") return ProfileKind::WellSyncBackoff;
  if (s == "out_of_sync") return ProfileKind::OutOfSync;
  if (s == "sntp_one_shot") return ProfileKind::SntpOneShot;
  throw std::invalid_argument(
      "unknown profile kind '" + s +
      "' (expected well_sync_constant, well_sync_backoff, out_of_sync, sntp_one_shot)");
}

std::vector<ClientProfile> parse_spec(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open spec: " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ParseError("bad JSON in " + path + ": " + e.what());
  }
  const json& arr = j.is_array() ? j : j.at("profiles");
  if (!arr.is_array() || arr.empty())
    throw std::invalid_argument("spec must contain a non-empty profile array");
  std::vector<ClientProfile> profiles;
  for (const auto& p : arr) {
    ClientProfile prof;
    prof.kind = parse_kind(p.at("kind").get<std::string>());
    prof.count = p.value("count", prof.count);
    prof.true_c2s_ms = p.value("true_c2s_ms", prof.true_c2s_ms);
    prof.true_s2c_ms = p.value("true_s2c_ms", prof.true_s2c_ms);
    prof.jitter_ms = p.value("jitter_ms", prof.jitter_ms);
    prof.offset_ms = p.value("offset_ms", prof.offset_ms);
    prof.drift_ppm = p.value("drift_ppm", prof.drift_ppm);
    prof.poll_exponent = p.value("poll_exponent", prof.poll_exponent);
    if (p.contains("backoff_sequence"))
      prof.backoff_sequence = p.at("backoff_sequence").get<std::vector<int>>();
    prof.emits_gtrtt = p.value("emits_gtrtt", prof.emits_gtrtt);
    prof.duration_s = p.value("duration_s", prof.duration_s);
    if (prof.count < 0) throw std::invalid_argument("profile count must be >= 0");
    if (prof.kind != ProfileKind::SntpOneShot && prof.poll_exponent <= 0)
      throw std::invalid_argument("poll_exponent must be positive");
    profiles.push_back(std::move(prof));
  }
  return profiles;
}

void run(const Opts& o) {
  if (o.out_pcap.empty() && o.out_jsonl.empty() && o.out_truth.empty())
    throw std::invalid_argument(
        "nothing to write: pass --out-pcap, --out-jsonl, or --truth");
  auto profiles = parse_spec(o.spec_path);
  SimOptions so;
  auto addr = IpAddress::parse(o.server);
  if (!addr) throw std::invalid_argument("bad --server address: " + o.server);
  so.server = *addr;
  so.seed = o.seed;
  so.start_unix = o.start_unix;
  auto result = simulate_trace(profiles, so);

  if (!o.out_pcap.empty()) {
    PcapWriter w(o.out_pcap);
    for (const auto& r : result.records) w.write(r);
  }
  if (!o.out_jsonl.empty()) {
    JsonlWriter w(o.out_jsonl);
    for (const auto& r : result.records) w.write(r);
  }
  if (!o.out_truth.empty()) write_truth_jsonl(o.out_truth, result.truths);

  std::printf("simulate: %zu packets, %zu requests, %zu clients, seed %llu\n",
              result.records.size(), result.truths.size(), result.clients.size(),
              static_cast<unsigned long long>(o.seed));
}

}  // namespace

void register_simulate(CLI::App& app) {
  auto o = std::make_shared<Opts>();
  auto* c = app.add_subcommand("simulate",
                               "Generate a synthetic NTP trace with ground truth");
  c->add_option("--spec", o->spec_path, "profile spec JSON file")->required();
  c->add_option("--seed", o->seed, "RNG seed")->capture_default_str();
  c->add_option("--server", o->server, "simulated server address")
      ->capture_default_str();
  c->add_option("--start-unix", o->start_unix, "capture start time (unix seconds)")
      ->capture_default_str();
  c->add_option("--out-pcap", o->out_pcap, "write packets as classic pcap");
  c->add_option("--out-jsonl", o->out_jsonl, "write packets as JSONL trace");
  c->add_option("--truth", o->out_truth, "write ground-truth sidecar JSONL");
  c->callback([o] { run(*o); });
}

}  // namespace ntpowd::cli
