#pragma once
// File formats shared by the CLI: matrix CSV/JSON, server metadata, min-OWD
// tables, labeled-sample JSONL (schema v1), CDF and summary CSVs, ground
// truth sidecars.
#include <array>
#include <map>
#include <string>
#include <vector>

#include "ntpowd/estimator.hpp"
#include "ntpowd/sim.hpp"

namespace ntpowd {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Matrix CSV: header row `,id0,id1,...`; one row per node `id,v,v,...`;
// an empty cell is an unobserved entry. The CSV carries no server/client
// split — readers get m = 0 until split_by_servers assigns one.
void write_matrix_csv(const std::string& path, const LatencyMatrix& x);
LatencyMatrix read_matrix_csv(const std::string& path);

// JSON container {m, n, ids, entries, mask}.
void write_matrix_json(const std::string& path, const LatencyMatrix& x);
LatencyMatrix read_matrix_json(const std::string& path);

// Dispatch on extension: .json -> JSON, anything else -> CSV.
void write_matrix(const std::string& path, const LatencyMatrix& x);
LatencyMatrix read_matrix(const std::string& path);

// Marks the ids found in `server_ids` as the matrix's server block. They
// must occupy a prefix of x.ids (the layout the writers produce).
void split_by_servers(LatencyMatrix& x, const std::vector<std::string>& server_ids);

// Server metadata CSV: header `id,address,lat,lon`.
std::vector<ServerMeta> read_servers_csv(const std::string& path);
void write_servers_csv(const std::string& path, const std::vector<ServerMeta>& servers);

// Server-server latency table in matrix-CSV form (ids must match the servers
// file; entries are rtt/2 of minimum pings, ms; empty cell = unmeasured).
struct ARttTable {
  std::vector<std::string> ids;
  DenseMatrix<double> rtt;
  MaskMatrix mask;
};
ARttTable read_a_rtt_csv(const std::string& path);

using MinOwdMap = std::map<std::pair<IpAddress, IpAddress>, MinOwd>;

// Min-OWD CSV: header `client,server,min_c2s_ms,min_s2c_ms`, empty cell for
// a direction with no qualifying sample.
void write_min_owd_csv(const std::string& path, const MinOwdMap& owds);
MinOwdMap read_min_owd_csv(const std::string& path);

// Labeled samples, one JSON object per line, all sample fields, "v": 1.
void write_labeled_jsonl(const std::string& path,
                         const std::vector<ClientSession>& sessions);
std::vector<ClientSession> read_labeled_jsonl(const std::string& path);

// Per-(client, server) summary CSV: sample/tier counts, min and mean OWD per
// direction (ms), chosen smoothing alphas.
void write_summary_csv(const std::string& path,
                       const std::vector<ClientSession>& sessions);

std::array<std::size_t, 4> tier_totals(const std::vector<ClientSession>& sessions);

// Two columns: error, cumulative_fraction.
void write_cdf_csv(const std::string& path,
                   const std::vector<std::pair<double, double>>& cdf);

// Hold-out report CSV: row,col,row_id,col_id,true_value,predicted,rel_error.
void write_holdout_csv(const std::string& path, const HoldoutReport& report,
                       const std::vector<std::string>& ids);

// Ground-truth sidecar JSONL:
// {packet_index, true_c2s, true_s2c, offset, sync_state}, delays in seconds.
void write_truth_jsonl(const std::string& path, const std::vector<TruthRow>& rows);
std::vector<TruthRow> read_truth_jsonl(const std::string& path);

}  // namespace ntpowd
