#pragma once

#include <cstddef>
#include <cstdint>
#include <iterator>
#include <span>
#include <string>
#include <vector>

namespace areuredi {

using Token = std::int32_t;
using Sequence = std::vector<Token>;
using StateIndex = std::uint64_t;

// Dense probability vector over the states of an enumerable space, indexed by StateIndex.
using Distribution = std::vector<double>;

inline constexpr std::uint64_t kDefaultEnumerationCap = 10'000'000;

class Vocabulary {
 public:
  explicit Vocabulary(std::vector<std::string> labels);

  // Labels "0", "1", ..., "K-1".
  static Vocabulary numbered(int size);

  int size() const noexcept { return static_cast<int>(labels_.size()); }
  const std::string& label(Token t) const;
  const std::vector<std::string>& labels() const noexcept { return labels_; }

  std::string to_json() const;
  static Vocabulary from_json(const std::string& text);

  friend bool operator==(const Vocabulary&, const Vocabulary&) = default;

 private:
  std::vector<std::string> labels_;
};

class StateRange;

// The space V^L of fixed-length sequences over K tokens.
//
// StateIndex is a mixed-radix integer with token 0 as the least significant digit.
class StateSpace {
 public:
  StateSpace(int vocab_size, int length);

  int vocab_size() const noexcept { return k_; }
  int length() const noexcept { return l_; }

  // K^L, or 0 when it overflows 64 bits.
  std::uint64_t size_or_zero() const noexcept { return size_; }
  bool enumerable(std::uint64_t cap = kDefaultEnumerationCap) const noexcept {
    return size_ != 0 && size_ <= cap;
  }
  // Throws ResourceError when the space exceeds `cap`.
  std::uint64_t require_enumerable(std::uint64_t cap = kDefaultEnumerationCap) const;

  StateIndex encode(std::span<const Token> seq) const;
  Sequence decode(StateIndex idx) const;
  void decode_into(StateIndex idx, std::span<Token> out) const;

  // Throws DomainError unless `seq` has length L and every token is in [0, K).
  void validate(std::span<const Token> seq) const;
  bool contains(std::span<const Token> seq) const noexcept;

  // All K^L states in StateIndex order.
  StateRange states(std::uint64_t cap = kDefaultEnumerationCap) const;

  friend bool operator==(const StateSpace& a, const StateSpace& b) noexcept {
    return a.k_ == b.k_ && a.l_ == b.l_;
  }

 private:
  int k_;
  int l_;
  std::uint64_t size_;
};

// Input range over every state of a space, yielded in StateIndex order.
class StateRange {
 public:
  class iterator {
   public:
    using value_type = Sequence;
    using difference_type = std::ptrdiff_t;
    using reference = const Sequence&;
    using pointer = const Sequence*;
    using iterator_category = std::input_iterator_tag;

    iterator() = default;
    reference operator*() const noexcept { return current_; }
    pointer operator->() const noexcept { return &current_; }
    iterator& operator++() noexcept;
    iterator operator++(int) noexcept {
      auto copy = *this;
      ++*this;
      return copy;
    }
    StateIndex index() const noexcept { return index_; }
    friend bool operator==(const iterator& a, const iterator& b) noexcept { return a.index_ == b.index_; }

   private:
    friend class StateRange;
    iterator(int k, Sequence start, StateIndex index) : k_(k), current_(std::move(start)), index_(index) {}

    int k_ = 0;
    Sequence current_;
    StateIndex index_ = 0;
  };

  iterator begin() const { return iterator(k_, Sequence(static_cast<std::size_t>(l_), 0), 0); }
  iterator end() const { return iterator(k_, {}, count_); }
  std::uint64_t size() const noexcept { return count_; }

 private:
  friend class StateSpace;
  StateRange(int k, int l, std::uint64_t count) : k_(k), l_(l), count_(count) {}

  int k_;
  int l_;
  std::uint64_t count_;
};

StateIndex encode(std::span<const Token> seq, int vocab_size);
Sequence decode(StateIndex idx, int vocab_size, int length);
StateRange enumerate_states(int vocab_size, int length, std::uint64_t cap = kDefaultEnumerationCap);

// Compact textual form, e.g. "0110" for K <= 10 and "3,11,0" otherwise.
std::string to_string(std::span<const Token> seq);

}  // namespace areuredi
