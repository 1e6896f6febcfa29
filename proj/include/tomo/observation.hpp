#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tomo/bitvec.hpp"
#include "tomo/error.hpp"
#include "tomo/topology.hpp"

namespace tomo {

// Per-probe receiver outcomes: entry (i, j) is 1 iff probe i reached the
// receiver in column j.  Stored column-wise (one bit vector per receiver)
// because every consumer reduces over probes.
class ObservationMatrix {
 public:
  ObservationMatrix(std::uint64_t probe_count, std::vector<NodeId> receivers);

  std::uint64_t probe_count() const { return probe_count_; }
  const std::vector<NodeId>& receivers() const { return receivers_; }
  std::size_t receiver_count() const { return receivers_.size(); }

  bool get(std::uint64_t probe, std::size_t col) const {
    return columns_[col].get(probe);
  }
  void set(std::uint64_t probe, std::size_t col, bool value) {
    columns_[col].set(probe, value);
  }

  const BitVec& column(std::size_t col) const { return columns_[col]; }

  // Column index of receiver id j; throws ObservationError if absent.
  std::size_t column_of(NodeId j) const;

  bool operator==(const ObservationMatrix& other) const {
    return probe_count_ == other.probe_count_ && receivers_ == other.receivers_ &&
           columns_ == other.columns_;
  }

 private:
  std::uint64_t probe_count_;
  std::vector<NodeId> receivers_;
  std::vector<BitVec> columns_;
};

// Text form: header `n,<receiver ids comma-separated>`, then one line of
// '0'/'1' characters per probe, columns in header order.
std::string write_observations_text(const ObservationMatrix& obs);

// Binary form: magic "TOMO", version byte 1, u64 probe count, u32 receiver
// count, receiver ids (u32 each), then one bit-packed row per probe padded to
// a byte boundary; all integers little-endian, bits LSB-first within a byte.
std::string write_observations_binary(const ObservationMatrix& obs);

// Auto-detects the binary magic and falls back to the text reader.
ObservationMatrix read_observations(const std::string& bytes);

}  // namespace tomo
