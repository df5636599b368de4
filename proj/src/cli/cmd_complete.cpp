#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "commands.hpp"
#include "ntpowd/estimator.hpp"
#include "ntpowd/io.hpp"

namespace ntpowd::cli {
namespace {

struct SourceOpts {
  std::string matrix_path;           // pre-assembled block matrix
  std::string labeled, min_owd_csv;  // or measurement inputs...
  std::string servers_csv, a_rtt_csv;
  int min_servers{4};
  int tier_floor{3};
  std::string symmetrize{"none"};
  std::vector<std::string> exclude;
};

struct CompletionOpts {
  int rank{4};
  double tol{1e-9};
  int max_iter{10000};
  std::string method{"ihtsvd"};
  bool squared{false};
  double pinv_cutoff{1e-10};
};

void add_source_flags(CLI::App* c, SourceOpts& o) {
  c->add_option("--matrix", o.matrix_path,
                "partially observed block matrix (CSV or JSON)");
  c->add_option("--labeled", o.labeled, "labeled samples JSONL (classify output)");
  c->add_option("--min-owd", o.min_owd_csv, "per-pair minimum OWD CSV");
  c->add_option("--servers", o.servers_csv, "server metadata CSV");
  c->add_option("--a-rtt", o.a_rtt_csv,
                "server-server matrix CSV, ms, half the minimum measured RTT");
  c->add_option("--min-servers", o.min_servers,
                "clients must reach at least this many servers")
      ->capture_default_str();
  c->add_option("--tier-floor", o.tier_floor, "lowest tier admitted into minima")
      ->capture_default_str()
      ->check(CLI::Range(0, 3));
  c->add_option("--symmetrize", o.symmetrize, "fold B/B^T: none, min, or mean")
      ->capture_default_str()
      ->check(CLI::IsMember({"none", "min", "mean"}));
  c->add_option("--exclude", o.exclude, "client address to leave out (repeatable)");
}

void add_completion_flags(CLI::App* c, CompletionOpts& o) {
  c->add_option("--rank", o.rank, "target rank")->capture_default_str();
  c->add_option("--tol", o.tol, "relative-change stopping tolerance")
      ->capture_default_str();
  c->add_option("--max-iter", o.max_iter, "iteration cap")->capture_default_str();
  c->add_option("--method", o.method, "completion method")
      ->capture_default_str()
      ->check(CLI::IsMember({"ihtsvd", "closed-form"}));
  c->add_flag("--squared", o.squared,
              "complete elementwise squares, square-root the result");
  c->add_option("--pinv-cutoff", o.pinv_cutoff,
                "relative singular-value cutoff for the pseudo-inverse")
      ->capture_default_str();
}

CompleteOptions to_complete_options(const CompletionOpts& o) {
  if (o.rank < 1) throw std::invalid_argument("--rank must be >= 1");
  if (o.tol <= 0) throw std::invalid_argument("--tol must be positive");
  if (o.max_iter < 1) throw std::invalid_argument("--max-iter must be >= 1");
  if (o.pinv_cutoff <= 0) throw std::invalid_argument("--pinv-cutoff must be positive");
  CompleteOptions c;
  c.method = o.method == "closed-form" ? CompletionMethod::ClosedForm
                                       : CompletionMethod::Ihtsvd;
  c.ihtsvd.rank = o.rank;
  c.ihtsvd.tol = o.tol;
  c.ihtsvd.max_iter = o.max_iter;
  c.squared = o.squared;
  c.pinv_cutoff = o.pinv_cutoff;
  return c;
}

LatencyMatrix load_source(const SourceOpts& o) {
  const bool has_measurements = !o.labeled.empty() || !o.min_owd_csv.empty();
  if (!o.matrix_path.empty()) {
    if (has_measurements)
      throw std::invalid_argument("--matrix excludes --labeled/--min-owd");
    auto x = read_matrix(o.matrix_path);
    if (x.m == 0 && !o.servers_csv.empty()) {
      auto servers = read_servers_csv(o.servers_csv);
      std::vector<std::string> ids;
      for (const auto& s : servers) ids.push_back(s.id);
      split_by_servers(x, ids);
    }
    if (x.m == 0)
      throw std::invalid_argument(
          "matrix has no server block; pass --servers or use the JSON form");
    return x;
  }

  if (o.labeled.empty() == o.min_owd_csv.empty())
    throw std::invalid_argument(
        "pass exactly one input: --matrix, --labeled, or --min-owd");
  if (o.servers_csv.empty() || o.a_rtt_csv.empty())
    throw std::invalid_argument("--servers and --a-rtt are required");

  auto servers = read_servers_csv(o.servers_csv);
  auto artt = read_a_rtt_csv(o.a_rtt_csv);
  const auto m = static_cast<Eigen::Index>(servers.size());
  if (static_cast<Eigen::Index>(artt.ids.size()) != m)
    throw ParseError("--a-rtt ids do not match the server list");
  DenseMatrix<double> half = DenseMatrix<double>::Zero(m, m);
  MaskMatrix seen = MaskMatrix::Constant(m, m, false);
  // reorder the one-way (rtt/2) table into server-list order
  for (Eigen::Index i = 0; i < m; ++i) {
    Eigen::Index ri = -1;
    for (Eigen::Index k = 0; k < m; ++k)
      if (artt.ids[static_cast<std::size_t>(k)] == servers[static_cast<std::size_t>(i)].id)
        ri = k;
    if (ri < 0) throw ParseError("server id missing from --a-rtt: " +
                                 servers[static_cast<std::size_t>(i)].id);
    for (Eigen::Index j = 0; j < m; ++j) {
      Eigen::Index rj = -1;
      for (Eigen::Index k = 0; k < m; ++k)
        if (artt.ids[static_cast<std::size_t>(k)] ==
            servers[static_cast<std::size_t>(j)].id)
          rj = k;
      if (artt.mask(ri, rj)) {
        half(i, j) = artt.rtt(ri, rj);
        seen(i, j) = true;
      }
    }
  }

  MinOwdMap owds = o.labeled.empty()
                       ? read_min_owd_csv(o.min_owd_csv)
                       : [&] {
                           auto sessions = read_labeled_jsonl(o.labeled);
                           return min_owd(sessions, static_cast<Tier>(o.tier_floor));
                         }();

  AssembleOptions aopts;
  aopts.min_servers = o.min_servers;
  aopts.symmetrize = o.symmetrize == "min"    ? AssembleOptions::Symmetrize::Min
                     : o.symmetrize == "mean" ? AssembleOptions::Symmetrize::Mean
                                              : AssembleOptions::Symmetrize::None;
  for (const auto& e : o.exclude) {
    auto a = IpAddress::parse(e);
    if (!a) throw std::invalid_argument("bad --exclude address: " + e);
    aopts.excluded_clients.push_back(*a);
  }

  auto built = build_A(servers, half, seen);
  return assemble_X(built.A, servers, owds, aopts);
}

struct CompleteOpts {
  SourceOpts source;
  CompletionOpts completion;
  std::string out;
  double holdout{0.0};
  std::uint64_t seed{0};
  std::string out_holdout, out_cdf;
};

void run_complete(const CompleteOpts& o) {
  if (o.out.empty()) throw std::invalid_argument("--out is required");
  auto x = load_source(o.source);
  auto copts = to_complete_options(o.completion);

  IhtsvdResult<double> stats;
  auto completed = complete_matrix(x, copts, &stats);
  LatencyMatrix full;
  full.m = x.m;
  full.n = x.n;
  full.ids = x.ids;
  full.entries = completed;
  full.mask = MaskMatrix::Constant(x.size(), x.size(), true);
  write_matrix(o.out, full);
  if (copts.method == CompletionMethod::Ihtsvd)
    std::printf("complete: %lld x %lld, %d iterations, %sconverged\n",
                static_cast<long long>(x.size()), static_cast<long long>(x.size()),
                stats.iterations, stats.converged ? "" : "NOT ");
  else
    std::printf("complete: %lld x %lld, closed form\n",
                static_cast<long long>(x.size()), static_cast<long long>(x.size()));

  if (o.holdout > 0.0) {
    EvaluateOptions eopts;
    eopts.holdout_fraction = o.holdout;
    eopts.seed = o.seed;
    eopts.completion = copts;
    auto report = holdout_evaluate(x, eopts);
    if (!o.out_holdout.empty()) write_holdout_csv(o.out_holdout, report, x.ids);
    if (!o.out_cdf.empty()) write_cdf_csv(o.out_cdf, report.cdf);
    std::printf("holdout: %zu entries, mean_rel_error %.6g\n", report.entries.size(),
                report.mean_rel_error);
  }
}

struct EvaluateOpts {
  SourceOpts source;
  CompletionOpts completion;
  double holdout{0.1};
  std::uint64_t seed{0};
  int min_keep{4};
  std::string out_holdout, out_cdf;
};

void run_evaluate(const EvaluateOpts& o) {
  if (o.holdout <= 0.0 || o.holdout >= 1.0)
    throw std::invalid_argument("--holdout must be in (0, 1)");
  auto x = load_source(o.source);
  EvaluateOptions eopts;
  eopts.holdout_fraction = o.holdout;
  eopts.seed = o.seed;
  eopts.completion = to_complete_options(o.completion);
  eopts.min_keep_per_client = o.min_keep;
  auto report = holdout_evaluate(x, eopts);
  if (!o.out_holdout.empty()) write_holdout_csv(o.out_holdout, report, x.ids);
  if (!o.out_cdf.empty()) write_cdf_csv(o.out_cdf, report.cdf);
  std::printf("evaluate: %zu held-out entries, mean_rel_error %.6g\n",
              report.entries.size(), report.mean_rel_error);
}

}  // namespace

void register_complete(CLI::App& app) {
  {
    auto o = std::make_shared<CompleteOpts>();
    auto* c = app.add_subcommand("complete",
                                 "Fill the unobserved client-client latency block");
    add_source_flags(c, o->source);
    add_completion_flags(c, o->completion);
    c->add_option("--out", o->out, "completed matrix output (CSV or JSON)")
        ->required();
    c->add_option("--holdout", o->holdout,
                  "also hold out this fraction of observed pairs and report error")
        ->capture_default_str();
    c->add_option("--seed", o->seed, "hold-out RNG seed")->capture_default_str();
    c->add_option("--out-holdout", o->out_holdout, "per-entry hold-out CSV");
    c->add_option("--out-cdf", o->out_cdf, "hold-out error CDF CSV");
    c->callback([o] { run_complete(*o); });
  }
  {
    auto o = std::make_shared<EvaluateOpts>();
    auto* c = app.add_subcommand(
        "evaluate", "Hold out observed pairs, complete, and report accuracy");
    add_source_flags(c, o->source);
    add_completion_flags(c, o->completion);
    c->add_option("--holdout", o->holdout, "fraction of observed pairs to hide")
        ->capture_default_str();
    c->add_option("--seed", o->seed, "hold-out RNG seed")->capture_default_str();
    c->add_option("--min-keep", o->min_keep,
                  "observed server pairings every client must keep")
        ->capture_default_str();
    c->add_option("--out-holdout", o->out_holdout, "per-entry hold-out CSV");
    c->add_option("--out-cdf", o->out_cdf, "hold-out error CDF CSV");
    c->callback([o] { run_evaluate(*o); });
  }
}

}  // namespace ntpowd::cli
