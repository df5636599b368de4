#pragma once
// Classic pcap (µs and ns, both endiannesses) and the JSONL trace format.
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ntpowd/ntp.hpp"

namespace ntpowd {

struct BadMagic : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ReadStats {
  std::size_t yielded{0};
  std::size_t skipped{0};   // non-UDP, fragments, non-123 ports, undecodable frames
  bool truncated{false};    // stream ended mid-record; prior records were yielded
};

// Reads a pcap file or a JSONL trace (sniffed by content), yielding UDP
// datagrams with src or dst port 123 in capture order.
ReadStats read_capture(const std::string& path,
                       const std::function<void(CaptureRecord&&)>& sink);
std::vector<CaptureRecord> read_capture_all(const std::string& path,
                                            ReadStats* stats = nullptr);

// Writes classic pcap, microsecond resolution, Ethernet link layer.
class PcapWriter {
 public:
  explicit PcapWriter(const std::string& path);
  ~PcapWriter();
  PcapWriter(const PcapWriter&) = delete;
  PcapWriter& operator=(const PcapWriter&) = delete;
  void write(const CaptureRecord& rec);
  void close();

 private:
  struct Impl;
  Impl* impl_;
};

class JsonlWriter {
 public:
  explicit JsonlWriter(const std::string& path);
  ~JsonlWriter();
  JsonlWriter(const JsonlWriter&) = delete;
  JsonlWriter& operator=(const JsonlWriter&) = delete;
  void write(const CaptureRecord& rec);
  void close();

 private:
  struct Impl;
  Impl* impl_;
};

}  // namespace ntpowd
