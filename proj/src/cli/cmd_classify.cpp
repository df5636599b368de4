#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "commands.hpp"
#include "ntpowd/capture.hpp"
#include "ntpowd/io.hpp"
#include "ntpowd/tier.hpp"

namespace ntpowd::cli {
namespace {

struct Opts {
  std::vector<std::string> traces;
  std::string servers_csv;
  std::string out_labeled, out_summary, out_min_owd;
  int tier_floor{3};
  bool capture_t1{false};
};

void run(const Opts& o) {
  auto servers = read_servers_csv(o.servers_csv);
  if (servers.empty()) throw std::invalid_argument("server list is empty");
  std::vector<IpAddress> addrs;
  for (const auto& s : servers) addrs.push_back(s.address);

  std::vector<NtpPacket> packets;
  std::size_t undecodable = 0;
  ReadStats agg;
  for (const auto& path : o.traces) {
    ReadStats st = read_capture(path, [&](CaptureRecord&& rec) {
      try {
        packets.push_back(decode_packet(rec.payload, rec));
      } catch (const std::exception&) {
        ++undecodable;
      }
    });
    agg.yielded += st.yielded;
    agg.skipped += st.skipped;
    agg.truncated = agg.truncated || st.truncated;
  }

  SessionOptions sopts;
  if (o.capture_t1) sopts.t1_source = SessionOptions::T1Source::CaptureOnly;
  auto sessions = build_sessions(packets, addrs, sopts);
  for (auto& sess : sessions) assign_tiers(sess);

  if (!o.out_labeled.empty()) write_labeled_jsonl(o.out_labeled, sessions);
  if (!o.out_summary.empty()) write_summary_csv(o.out_summary, sessions);
  if (!o.out_min_owd.empty())
    write_min_owd_csv(o.out_min_owd,
                      min_owd(sessions, static_cast<Tier>(o.tier_floor)));

  auto totals = tier_totals(sessions);
  std::printf("tier,count\n");
  for (int t = 0; t < 4; ++t) std::printf("%d,%zu\n", t, totals[static_cast<std::size_t>(t)]);
  std::fprintf(stderr,
               "classify: %zu datagrams, %zu skipped, %zu undecodable, %zu sessions%s\n",
               agg.yielded, agg.skipped, undecodable, sessions.size(),
               agg.truncated ? ", input truncated" : "");
}

}  // namespace

void register_classify(CLI::App& app) {
  auto o = std::make_shared<Opts>();
  auto* c = app.add_subcommand(
      "classify", "Extract OWD samples from traces and assign precision tiers");
  c->add_option("traces", o->traces, "pcap or JSONL trace files")
      ->required()
      ->expected(-1);
  c->add_option("--servers", o->servers_csv, "server metadata CSV (id,address,lat,lon)")
      ->required();
  c->add_option("--out-labeled", o->out_labeled, "labeled samples JSONL");
  c->add_option("--out-summary", o->out_summary, "per-(client,server) summary CSV");
  c->add_option("--out-min-owd", o->out_min_owd, "per-pair minimum OWD CSV");
  c->add_option("--tier-floor", o->tier_floor,
                "lowest tier admitted into the min-OWD table")
      ->capture_default_str()
      ->check(CLI::Range(0, 3));
  c->add_flag("--capture-t1", o->capture_t1,
              "derive c2s from capture timestamps only (skip response receive)");
  c->callback([o] { run(*o); });
}

}  // namespace ntpowd::cli
