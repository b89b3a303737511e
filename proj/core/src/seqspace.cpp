#include "areuredi/seqspace.hpp"

#include <limits>
#include <set>

#include "json_compat.hpp"

#include "areuredi/errors.hpp"

namespace areuredi {

Vocabulary::Vocabulary(std::vector<std::string> labels) : labels_(std::move(labels)) {
  if (labels_.size() < 2) throw DomainError("vocabulary needs at least 2 labels");
  std::set<std::string> seen(labels_.begin(), labels_.end());
  if (seen.size() != labels_.size()) throw DomainError("vocabulary labels must be distinct");
}

Vocabulary Vocabulary::numbered(int size) {
  if (size < 2) throw DomainError("vocabulary size must be >= 2");
  std::vector<std::string> labels;
  labels.reserve(static_cast<std::size_t>(size));
  for (int k = 0; k < size; ++k) labels.push_back(std::to_string(k));
  return Vocabulary(std::move(labels));
}

const std::string& Vocabulary::label(Token t) const {
  if (t < 0 || t >= size()) throw DomainError("token out of range: " + std::to_string(t));
  return labels_[static_cast<std::size_t>(t)];
}

std::string Vocabulary::to_json() const { return nlohmann::json{{"labels", labels_}}.dump(); }

Vocabulary Vocabulary::from_json(const std::string& text) {
  const auto doc = nlohmann::json::parse(text);
  return Vocabulary(doc.at("labels").get<std::vector<std::string>>());
}

StateSpace::StateSpace(int vocab_size, int length) : k_(vocab_size), l_(length), size_(1) {
  if (vocab_size < 2) throw DomainError("vocabulary size K must be >= 2");
  if (length < 1) throw DomainError("sequence length L must be >= 1");
  const auto k = static_cast<std::uint64_t>(vocab_size);
  for (int j = 0; j < length; ++j) {
    if (size_ > std::numeric_limits<std::uint64_t>::max() / k) {
      size_ = 0;
      break;
    }
    size_ *= k;
  }
}

std::uint64_t StateSpace::require_enumerable(std::uint64_t cap) const {
  if (!enumerable(cap)) {
    throw ResourceError("state space K^L with K=" + std::to_string(k_) + ", L=" + std::to_string(l_) +
                        " exceeds enumeration cap " + std::to_string(cap));
  }
  return size_;
}

void StateSpace::validate(std::span<const Token> seq) const {
  if (static_cast<int>(seq.size()) != l_) {
    throw DomainError("sequence length " + std::to_string(seq.size()) + " != L=" + std::to_string(l_));
  }
  for (Token t : seq) {
    if (t < 0 || t >= k_) throw DomainError("token " + std::to_string(t) + " outside [0, " + std::to_string(k_) + ")");
  }
}

bool StateSpace::contains(std::span<const Token> seq) const noexcept {
  if (static_cast<int>(seq.size()) != l_) return false;
  for (Token t : seq) {
    if (t < 0 || t >= k_) return false;
  }
  return true;
}

StateIndex StateSpace::encode(std::span<const Token> seq) const {
  validate(seq);
  if (size_ == 0) throw ResourceError("state space too large for 64-bit indices");
  StateIndex idx = 0;
  for (int j = l_ - 1; j >= 0; --j) idx = idx * static_cast<StateIndex>(k_) + static_cast<StateIndex>(seq[j]);
  return idx;
}

void StateSpace::decode_into(StateIndex idx, std::span<Token> out) const {
  if (size_ == 0) throw ResourceError("state space too large for 64-bit indices");
  if (idx >= size_) throw DomainError("state index " + std::to_string(idx) + " out of range");
  if (static_cast<int>(out.size()) != l_) throw DomainError("decode buffer has wrong length");
  for (int j = 0; j < l_; ++j) {
    out[j] = static_cast<Token>(idx % static_cast<StateIndex>(k_));
    idx /= static_cast<StateIndex>(k_);
  }
}

Sequence StateSpace::decode(StateIndex idx) const {
  Sequence out(static_cast<std::size_t>(l_));
  decode_into(idx, out);
  return out;
}

StateRange StateSpace::states(std::uint64_t cap) const { return StateRange(k_, l_, require_enumerable(cap)); }

StateRange::iterator& StateRange::iterator::operator++() noexcept {
  ++index_;
  for (auto& t : current_) {
    if (++t < k_) break;
    t = 0;
  }
  return *this;
}

StateIndex encode(std::span<const Token> seq, int vocab_size) {
  return StateSpace(vocab_size, static_cast<int>(seq.size())).encode(seq);
}

Sequence decode(StateIndex idx, int vocab_size, int length) { return StateSpace(vocab_size, length).decode(idx); }

StateRange enumerate_states(int vocab_size, int length, std::uint64_t cap) {
  return StateSpace(vocab_size, length).states(cap);
}

std::string to_string(std::span<const Token> seq) {
  bool compact = true;
  for (Token t : seq) compact = compact && t >= 0 && t < 10;
  std::string out;
  for (std::size_t j = 0; j < seq.size(); ++j) {
    if (!compact && j > 0) out += ',';
    out += std::to_string(seq[j]);
  }
  return out;
}

}  // namespace areuredi
