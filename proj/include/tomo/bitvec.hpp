#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace tomo {

// Fixed-length bit vector packed into 64-bit words.  Bit i of probe record i
// is stored LSB-first inside word i/64.  Trailing bits of the last word are
// kept zero so word-wise reductions need no masking.
class BitVec {
 public:
  BitVec() = default;
  explicit BitVec(std::size_t size)
      : size_(size), words_((size + 63) / 64, 0) {}

  std::size_t size() const { return size_; }
  std::size_t word_count() const { return words_.size(); }

  bool get(std::size_t i) const {
    return (words_[i >> 6] >> (i & 63)) & 1u;
  }

  void set(std::size_t i, bool value) {
    const std::uint64_t mask = std::uint64_t{1} << (i & 63);
    if (value) {
      words_[i >> 6] |= mask;
    } else {
      words_[i >> 6] &= ~mask;
    }
  }

  std::uint64_t word(std::size_t w) const { return words_[w]; }
  std::uint64_t& word(std::size_t w) { return words_[w]; }

  std::size_t count() const {
    std::size_t total = 0;
    for (std::uint64_t w : words_) total += std::popcount(w);
    return total;
  }

  // In-place bitwise OR; both operands must have equal size.
  BitVec& operator|=(const BitVec& other) {
    for (std::size_t w = 0; w < words_.size(); ++w) words_[w] |= other.words_[w];
    return *this;
  }

  // In-place bitwise AND; both operands must have equal size.
  BitVec& operator&=(const BitVec& other) {
    for (std::size_t w = 0; w < words_.size(); ++w) words_[w] &= other.words_[w];
    return *this;
  }

  bool operator==(const BitVec& other) const {
    return size_ == other.size_ && words_ == other.words_;
  }

  // Popcount of the word-wise AND of many vectors, without materialising the
  // intermediate vector.
  static std::size_t and_count(const std::vector<const BitVec*>& vs) {
    if (vs.empty()) return 0;
    std::size_t total = 0;
    const std::size_t words = vs[0]->word_count();
    for (std::size_t w = 0; w < words; ++w) {
      std::uint64_t acc = vs[0]->words_[w];
      for (std::size_t v = 1; v < vs.size() && acc; ++v) acc &= vs[v]->words_[w];
      total += std::popcount(acc);
    }
    return total;
  }

  // Popcount of the word-wise OR of many vectors.
  static std::size_t or_count(const std::vector<const BitVec*>& vs) {
    if (vs.empty()) return 0;
    std::size_t total = 0;
    const std::size_t words = vs[0]->word_count();
    for (std::size_t w = 0; w < words; ++w) {
      std::uint64_t acc = 0;
      for (const BitVec* v : vs) acc |= v->words_[w];
      total += std::popcount(acc);
    }
    return total;
  }

 private:
  std::size_t size_ = 0;
  std::vector<std::uint64_t> words_;
};

}  // namespace tomo
