#include "tomo/observation.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>

namespace tomo {

ObservationMatrix::ObservationMatrix(std::uint64_t probe_count,
                                     std::vector<NodeId> receivers)
    : probe_count_(probe_count), receivers_(std::move(receivers)) {
  if (probe_count_ == 0) throw ObservationError("probe count must be >= 1");
  if (receivers_.empty()) throw ObservationError("receiver list must be non-empty");
  for (std::size_t a = 0; a + 1 < receivers_.size(); ++a) {
    for (std::size_t b = a + 1; b < receivers_.size(); ++b) {
      if (receivers_[a] == receivers_[b]) {
        throw ObservationError("duplicate receiver id " +
                               std::to_string(receivers_[a]));
      }
    }
  }
  columns_.assign(receivers_.size(), BitVec(probe_count_));
}

std::size_t ObservationMatrix::column_of(NodeId j) const {
  const auto it = std::find(receivers_.begin(), receivers_.end(), j);
  if (it == receivers_.end()) {
    throw ObservationError("receiver " + std::to_string(j) +
                           " absent from observation matrix");
  }
  return static_cast<std::size_t>(it - receivers_.begin());
}

std::string write_observations_text(const ObservationMatrix& obs) {
  std::string out = std::to_string(obs.probe_count());
  for (NodeId j : obs.receivers()) {
    out += ',';
    out += std::to_string(j);
  }
  out += '\n';
  const std::size_t cols = obs.receiver_count();
  out.reserve(out.size() + obs.probe_count() * (cols + 1));
  for (std::uint64_t i = 0; i < obs.probe_count(); ++i) {
    for (std::size_t c = 0; c < cols; ++c) out += obs.get(i, c) ? '1' : '0';
    out += '\n';
  }
  return out;
}

namespace {

constexpr char kMagic[4] = {'T', 'O', 'M', 'O'};
constexpr unsigned char kVersion = 1;

void append_u32(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out += static_cast<char>((v >> (8 * b)) & 0xFF);
}

void append_u64(std::string& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out += static_cast<char>((v >> (8 * b)) & 0xFF);
}

std::uint64_t read_le(const std::string& bytes, std::size_t at, int width) {
  std::uint64_t v = 0;
  for (int b = 0; b < width; ++b) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[at + b]))
         << (8 * b);
  }
  return v;
}

ObservationMatrix read_binary(const std::string& bytes) {
  if (bytes.size() < 17) throw ObservationError("binary observation file truncated");
  if (static_cast<unsigned char>(bytes[4]) != kVersion) {
    throw ObservationError("unsupported binary observation version " +
                           std::to_string(static_cast<unsigned>(
                               static_cast<unsigned char>(bytes[4]))));
  }
  const std::uint64_t n = read_le(bytes, 5, 8);
  const std::uint32_t cols = static_cast<std::uint32_t>(read_le(bytes, 13, 4));
  std::size_t at = 17;
  if (bytes.size() < at + 4ull * cols) {
    throw ObservationError("binary observation file truncated in receiver list");
  }
  std::vector<NodeId> receivers(cols);
  for (std::uint32_t c = 0; c < cols; ++c) {
    receivers[c] = static_cast<NodeId>(read_le(bytes, at, 4));
    at += 4;
  }
  ObservationMatrix obs(n, std::move(receivers));
  const std::size_t row_bytes = (cols + 7) / 8;
  if (bytes.size() != at + row_bytes * n) {
    throw ObservationError("binary observation payload size mismatch");
  }
  for (std::uint64_t i = 0; i < n; ++i) {
    for (std::uint32_t c = 0; c < cols; ++c) {
      const unsigned char byte =
          static_cast<unsigned char>(bytes[at + i * row_bytes + c / 8]);
      if ((byte >> (c % 8)) & 1u) obs.set(i, c, true);
    }
  }
  return obs;
}

ObservationMatrix read_text(const std::string& bytes) {
  std::size_t pos = 0;
  const auto next_line = [&](std::string& line) {
    if (pos >= bytes.size()) return false;
    const auto nl = bytes.find('\n', pos);
    if (nl == std::string::npos) {
      line = bytes.substr(pos);
      pos = bytes.size();
    } else {
      line = bytes.substr(pos, nl - pos);
      pos = nl + 1;
    }
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };

  std::string header;
  if (!next_line(header) || header.empty()) {
    throw ObservationError("missing observation header line");
  }
  std::vector<std::uint64_t> fields;
  std::size_t at = 0;
  while (at <= header.size()) {
    const auto comma = header.find(',', at);
    const std::string tok =
        header.substr(at, comma == std::string::npos ? comma : comma - at);
    std::uint64_t value = 0;
    const auto [ptr, ec] =
        std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) {
      throw ObservationError("malformed observation header field `" + tok + "`");
    }
    fields.push_back(value);
    if (comma == std::string::npos) break;
    at = comma + 1;
  }
  if (fields.size() < 2) {
    throw ObservationError("observation header needs `n` and at least one receiver");
  }
  const std::uint64_t n = fields[0];
  std::vector<NodeId> receivers(fields.begin() + 1, fields.end());
  ObservationMatrix obs(n, std::move(receivers));

  std::string line;
  for (std::uint64_t i = 0; i < n; ++i) {
    if (!next_line(line)) {
      throw ObservationError("observation rows truncated at probe " +
                             std::to_string(i));
    }
    if (line.size() != obs.receiver_count()) {
      throw ObservationError("probe row " + std::to_string(i) + " has " +
                             std::to_string(line.size()) + " columns, expected " +
                             std::to_string(obs.receiver_count()));
    }
    for (std::size_t c = 0; c < line.size(); ++c) {
      if (line[c] == '1') {
        obs.set(i, c, true);
      } else if (line[c] != '0') {
        throw ObservationError("probe row " + std::to_string(i) +
                               " contains a byte other than '0'/'1'");
      }
    }
  }
  while (next_line(line)) {
    if (!line.empty()) {
      throw ObservationError("trailing content after the last probe row");
    }
  }
  return obs;
}

}  // namespace

std::string write_observations_binary(const ObservationMatrix& obs) {
  std::string out(kMagic, 4);
  out += static_cast<char>(kVersion);
  append_u64(out, obs.probe_count());
  append_u32(out, static_cast<std::uint32_t>(obs.receiver_count()));
  for (NodeId j : obs.receivers()) append_u32(out, j);
  const std::size_t row_bytes = (obs.receiver_count() + 7) / 8;
  for (std::uint64_t i = 0; i < obs.probe_count(); ++i) {
    std::string row(row_bytes, '\0');
    for (std::size_t c = 0; c < obs.receiver_count(); ++c) {
      if (obs.get(i, c)) row[c / 8] |= static_cast<char>(1u << (c % 8));
    }
    out += row;
  }
  return out;
}

ObservationMatrix read_observations(const std::string& bytes) {
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), kMagic, 4) == 0) {
    return read_binary(bytes);
  }
  return read_text(bytes);
}

}  // namespace tomo
