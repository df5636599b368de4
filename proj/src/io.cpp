#include "ntpowd/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace ntpowd {
namespace {

using nlohmann::json;

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open: " + path);
  return in;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Keeps empty fields, so `a,,b` has three cells.
std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  if (!out.empty() && !out.back().empty() && out.back().back() == '\r')
    out.back().pop_back();
  return out;
}

double parse_double(const std::string& s, const std::string& context) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw ParseError("trailing junk in number: " + context);
    return v;
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception&) {
    throw ParseError("bad number '" + s + "' in " + context);
  }
}

IpAddress parse_addr(const std::string& s, const std::string& context) {
  auto a = IpAddress::parse(s);
  if (!a) throw ParseError("bad address '" + s + "' in " + context);
  return *a;
}

json sample_to_json(const ClientSession& sess, const OwdSample& s) {
  json j;
  j["v"] = 1;
  j["client"] = sess.client.to_string();
  j["server"] = sess.server.to_string();
  j["when_sec"] = s.when.sec;
  j["when_nsec"] = s.when.nsec;
  auto opt = [&](const char* key, const std::optional<double>& v) {
    if (v)
      j[key] = *v;
    else
      j[key] = nullptr;
  };
  opt("c2s_owd", s.c2s_owd);
  opt("s2c_owd", s.s2c_owd);
  j["poll_exponent"] = s.poll_exponent;
  opt("gt_rtt", s.gt_rtt);
  if (s.tier)
    j["tier"] = static_cast<int>(*s.tier);
  else
    j["tier"] = nullptr;
  opt("c2s_smooth", s.c2s_smooth);
  opt("s2c_smooth", s.s2c_smooth);
  return j;
}

}  // namespace

void write_matrix_csv(const std::string& path, const LatencyMatrix& x) {
  auto out = open_out(path);
  for (const auto& id : x.ids) out << ',' << id;
  out << '\n';
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    out << x.ids[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      out << ',';
      if (x.mask(i, j)) out << fmt(x.entries(i, j));
    }
    out << '\n';
  }
}

LatencyMatrix read_matrix_csv(const std::string& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty matrix file: " + path);
  auto header = split_csv(line);
  if (header.size() < 2 || !header[0].empty())
    throw ParseError("matrix header must start with an empty cell: " + path);
  LatencyMatrix x;
  x.ids.assign(header.begin() + 1, header.end());
  auto size = static_cast<Eigen::Index>(x.ids.size());
  x.m = 0;
  x.n = size;
  x.entries.setZero(size, size);
  x.mask = MaskMatrix::Constant(size, size, false);
  Eigen::Index row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    if (row >= size) throw ParseError("more rows than header ids in " + path);
    auto cells = split_csv(line);
    if (static_cast<Eigen::Index>(cells.size()) != size + 1)
      throw ParseError("row with wrong cell count in " + path);
    if (cells[0] != x.ids[static_cast<std::size_t>(row)])
      throw ParseError("row id order must match the header in " + path);
    for (Eigen::Index j = 0; j < size; ++j) {
      const auto& cell = cells[static_cast<std::size_t>(j) + 1];
      if (cell.empty()) continue;
      x.entries(row, j) = parse_double(cell, path);
      x.mask(row, j) = true;
    }
    ++row;
  }
  if (row != size) throw ParseError("fewer rows than header ids in " + path);
  return x;
}

void write_matrix_json(const std::string& path, const LatencyMatrix& x) {
  json j;
  j["m"] = x.m;
  j["n"] = x.n;
  j["ids"] = x.ids;
  json entries = json::array(), mask = json::array();
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    json erow = json::array(), mrow = json::array();
    for (Eigen::Index jx = 0; jx < x.size(); ++jx) {
      erow.push_back(x.mask(i, jx) ? x.entries(i, jx) : 0.0);
      mrow.push_back(static_cast<bool>(x.mask(i, jx)));
    }
    entries.push_back(std::move(erow));
    mask.push_back(std::move(mrow));
  }
  j["entries"] = std::move(entries);
  j["mask"] = std::move(mask);
  auto out = open_out(path);
  out << j.dump() << '\n';
}

LatencyMatrix read_matrix_json(const std::string& path) {
  auto in = open_in(path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ParseError("bad JSON in " + path + ": " + e.what());
  }
  LatencyMatrix x;
  try {
    x.m = j.at("m").get<Eigen::Index>();
    x.n = j.at("n").get<Eigen::Index>();
    x.ids = j.at("ids").get<std::vector<std::string>>();
    auto size = x.m + x.n;
    if (static_cast<Eigen::Index>(x.ids.size()) != size)
      throw ParseError("ids length disagrees with m+n in " + path);
    const auto& entries = j.at("entries");
    const auto& mask = j.at("mask");
    x.entries.setZero(size, size);
    x.mask = MaskMatrix::Constant(size, size, false);
    if (static_cast<Eigen::Index>(entries.size()) != size ||
        static_cast<Eigen::Index>(mask.size()) != size)
      throw ParseError("entries/mask row count disagrees with m+n in " + path);
    for (Eigen::Index i = 0; i < size; ++i) {
      const auto& erow = entries[static_cast<std::size_t>(i)];
      const auto& mrow = mask[static_cast<std::size_t>(i)];
      if (static_cast<Eigen::Index>(erow.size()) != size ||
          static_cast<Eigen::Index>(mrow.size()) != size)
        throw ParseError("ragged entries/mask in " + path);
      for (Eigen::Index jx = 0; jx < size; ++jx) {
        x.entries(i, jx) = erow[static_cast<std::size_t>(jx)].get<double>();
        x.mask(i, jx) = mrow[static_cast<std::size_t>(jx)].get<bool>();
      }
    }
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    throw ParseError("bad matrix JSON in " + path + ": " + e.what());
  }
  return x;
}

namespace {
bool has_suffix(const std::string& s, const std::string& suf) {
  return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
}
}  // namespace

void write_matrix(const std::string& path, const LatencyMatrix& x) {
  if (has_suffix(path, ".json"))
    write_matrix_json(path, x);
  else
    write_matrix_csv(path, x);
}

LatencyMatrix read_matrix(const std::string& path) {
  return has_suffix(path, ".json") ? read_matrix_json(path) : read_matrix_csv(path);
}

void split_by_servers(LatencyMatrix& x, const std::vector<std::string>& server_ids) {
  // a listed server missing from the matrix would otherwise silently demote a
  // typo'd row to a client, so require every id to resolve
  for (const auto& sid : server_ids)
    if (std::find(x.ids.begin(), x.ids.end(), sid) == x.ids.end())
      throw ParseError("server id not present in matrix: " + sid);
  Eigen::Index m = 0;
  for (const auto& id : x.ids) {
    bool is_server = std::find(server_ids.begin(), server_ids.end(), id) != server_ids.end();
    if (is_server) {
      if (static_cast<std::size_t>(m) !=
          static_cast<std::size_t>(&id - x.ids.data()))
        throw ParseError("server ids must occupy the leading matrix rows");
      ++m;
    }
  }
  x.m = m;
  x.n = static_cast<Eigen::Index>(x.ids.size()) - m;
}

std::vector<ServerMeta> read_servers_csv(const std::string& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty servers file: " + path);
  auto header = split_csv(line);
  if (header.size() < 4 || header[0] != "id" || header[1] != "address")
    throw ParseError("servers header must be id,address,lat,lon: " + path);
  std::vector<ServerMeta> out;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto cells = split_csv(line);
    if (cells.size() < 4) throw ParseError("short server row in " + path);
    ServerMeta s;
    s.id = cells[0];
    s.address = parse_addr(cells[1], path);
    s.coordinate.lat_deg = parse_double(cells[2], path);
    s.coordinate.lon_deg = parse_double(cells[3], path);
    out.push_back(std::move(s));
  }
  return out;
}

void write_servers_csv(const std::string& path, const std::vector<ServerMeta>& servers) {
  auto out = open_out(path);
  out << "id,address,lat,lon\n";
  for (const auto& s : servers)
    out << s.id << ',' << s.address.to_string() << ',' << fmt(s.coordinate.lat_deg)
        << ',' << fmt(s.coordinate.lon_deg) << '\n';
}

ARttTable read_a_rtt_csv(const std::string& path) {
  auto x = read_matrix_csv(path);
  ARttTable t;
  t.ids = x.ids;
  t.rtt = x.entries;
  t.mask = x.mask;
  return t;
}

void write_min_owd_csv(const std::string& path, const MinOwdMap& owds) {
  auto out = open_out(path);
  out << "client,server,min_c2s_ms,min_s2c_ms\n";
  for (const auto& [key, v] : owds) {
    out << key.first.to_string() << ',' << key.second.to_string() << ',';
    if (v.c2s_ms) out << fmt(*v.c2s_ms);
    out << ',';
    if (v.s2c_ms) out << fmt(*v.s2c_ms);
    out << '\n';
  }
}

MinOwdMap read_min_owd_csv(const std::string& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty min-owd file: " + path);
  auto header = split_csv(line);
  if (header.size() != 4 || header[0] != "client" || header[1] != "server")
    throw ParseError("min-owd header must be client,server,min_c2s_ms,min_s2c_ms: " + path);
  MinOwdMap out;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto cells = split_csv(line);
    if (cells.size() != 4) throw ParseError("min-owd row needs 4 cells in " + path);
    MinOwd v;
    if (!cells[2].empty()) v.c2s_ms = parse_double(cells[2], path);
    if (!cells[3].empty()) v.s2c_ms = parse_double(cells[3], path);
    out[{parse_addr(cells[0], path), parse_addr(cells[1], path)}] = v;
  }
  return out;
}

void write_labeled_jsonl(const std::string& path,
                         const std::vector<ClientSession>& sessions) {
  auto out = open_out(path);
  for (const auto& sess : sessions)
    for (const auto& s : sess.samples) out << sample_to_json(sess, s).dump() << '\n';
}

std::vector<ClientSession> read_labeled_jsonl(const std::string& path) {
  auto in = open_in(path);
  std::vector<ClientSession> sessions;
  std::map<std::pair<IpAddress, IpAddress>, std::size_t> index;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const std::exception& e) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    try {
      OwdSample s;
      s.client = parse_addr(j.at("client").get<std::string>(), path);
      s.server = parse_addr(j.at("server").get<std::string>(), path);
      s.when.sec = j.at("when_sec").get<std::int64_t>();
      s.when.nsec = j.at("when_nsec").get<std::uint32_t>();
      auto opt = [&](const char* key) -> std::optional<double> {
        const auto& v = j.at(key);
        if (v.is_null()) return std::nullopt;
        return v.get<double>();
      };
      s.c2s_owd = opt("c2s_owd");
      s.s2c_owd = opt("s2c_owd");
      s.poll_exponent = j.at("poll_exponent").get<int>();
      s.gt_rtt = opt("gt_rtt");
      if (!j.at("tier").is_null()) {
        int t = j.at("tier").get<int>();
        if (t < 0 || t > 3)
          throw ParseError(path + ":" + std::to_string(lineno) + ": tier out of range");
        s.tier = static_cast<Tier>(t);
      }
      s.c2s_smooth = opt("c2s_smooth");
      s.s2c_smooth = opt("s2c_smooth");
      auto key = std::make_pair(s.client, s.server);
      auto it = index.find(key);
      if (it == index.end()) {
        index.emplace(key, sessions.size());
        ClientSession sess;
        sess.client = s.client;
        sess.server = s.server;
        sessions.push_back(std::move(sess));
        it = index.find(key);
      }
      sessions[it->second].samples.push_back(std::move(s));
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return sessions;
}

void write_summary_csv(const std::string& path,
                       const std::vector<ClientSession>& sessions) {
  auto out = open_out(path);
  out << "client,server,kind,samples,tier0,tier1,tier2,tier3,"
         "min_c2s_ms,min_s2c_ms,mean_c2s_ms,mean_s2c_ms,alpha_c2s,alpha_s2c\n";
  for (const auto& sess : sessions) {
    std::array<std::size_t, 4> tiers{};
    double min_c2s = 0, min_s2c = 0, sum_c2s = 0, sum_s2c = 0;
    std::size_t n_c2s = 0, n_s2c = 0;
    for (const auto& s : sess.samples) {
      if (s.tier) ++tiers[static_cast<std::size_t>(*s.tier)];
      if (s.c2s_owd) {
        double ms = *s.c2s_owd * 1e3;
        min_c2s = n_c2s == 0 ? ms : std::min(min_c2s, ms);
        sum_c2s += ms;
        ++n_c2s;
      }
      if (s.s2c_owd) {
        double ms = *s.s2c_owd * 1e3;
        min_s2c = n_s2c == 0 ? ms : std::min(min_s2c, ms);
        sum_s2c += ms;
        ++n_s2c;
      }
    }
    const char* kind = "";
    if (sess.kind) {
      switch (*sess.kind) {
        case PollKind::Constant: kind = "constant"; break;
        case PollKind::NonConstant: kind = "non_constant"; break;
        case PollKind::OneShot: kind = "one_shot"; break;
      }
    }
    out << sess.client.to_string() << ',' << sess.server.to_string() << ',' << kind
        << ',' << sess.samples.size() << ',' << tiers[0] << ',' << tiers[1] << ','
        << tiers[2] << ',' << tiers[3] << ',';
    if (n_c2s) out << fmt(min_c2s);
    out << ',';
    if (n_s2c) out << fmt(min_s2c);
    out << ',';
    if (n_c2s) out << fmt(sum_c2s / static_cast<double>(n_c2s));
    out << ',';
    if (n_s2c) out << fmt(sum_s2c / static_cast<double>(n_s2c));
    out << ',';
    if (sess.alpha_c2s) out << fmt(*sess.alpha_c2s);
    out << ',';
    if (sess.alpha_s2c) out << fmt(*sess.alpha_s2c);
    out << '\n';
  }
}

std::array<std::size_t, 4> tier_totals(const std::vector<ClientSession>& sessions) {
  std::array<std::size_t, 4> totals{};
  for (const auto& sess : sessions)
    for (const auto& s : sess.samples)
      if (s.tier) ++totals[static_cast<std::size_t>(*s.tier)];
  return totals;
}

void write_cdf_csv(const std::string& path,
                   const std::vector<std::pair<double, double>>& cdf) {
  auto out = open_out(path);
  out << "error,cumulative_fraction\n";
  for (const auto& [e, f] : cdf) out << fmt(e) << ',' << fmt(f) << '\n';
}

void write_holdout_csv(const std::string& path, const HoldoutReport& report,
                       const std::vector<std::string>& ids) {
  auto out = open_out(path);
  out << "row,col,row_id,col_id,true_value,predicted,rel_error\n";
  for (const auto& e : report.entries) {
    out << e.row << ',' << e.col << ','
        << ids[static_cast<std::size_t>(e.row)] << ','
        << ids[static_cast<std::size_t>(e.col)] << ',' << fmt(e.true_value) << ','
        << fmt(e.predicted) << ',' << fmt(e.rel_error) << '\n';
  }
}

void write_truth_jsonl(const std::string& path, const std::vector<TruthRow>& rows) {
  auto out = open_out(path);
  for (const auto& r : rows) {
    json j;
    j["packet_index"] = r.packet_index;
    if (r.true_c2s)
      j["true_c2s"] = *r.true_c2s;
    else
      j["true_c2s"] = nullptr;
    if (r.true_s2c)
      j["true_s2c"] = *r.true_s2c;
    else
      j["true_s2c"] = nullptr;
    j["offset"] = r.offset;
    j["sync_state"] = r.sync_state;
    out << j.dump() << '\n';
  }
}

std::vector<TruthRow> read_truth_jsonl(const std::string& path) {
  auto in = open_in(path);
  std::vector<TruthRow> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      json j = json::parse(line);
      TruthRow r;
      r.packet_index = j.at("packet_index").get<std::size_t>();
      if (!j.at("true_c2s").is_null()) r.true_c2s = j.at("true_c2s").get<double>();
      if (!j.at("true_s2c").is_null()) r.true_s2c = j.at("true_s2c").get<double>();
      r.offset = j.at("offset").get<double>();
      r.sync_state = j.at("sync_state").get<std::string>();
      rows.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

}  // namespace ntpowd
