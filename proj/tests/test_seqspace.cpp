#include <gtest/gtest.h>

#include <set>

#include "areuredi/errors.hpp"
#include "areuredi/seqspace.hpp"

using namespace areuredi;

TEST(Encode, ZeroState) { EXPECT_EQ(encode(Sequence{0, 0, 0}, 2), 0u); }

TEST(Encode, FirstTokenIsLeastSignificant) { EXPECT_EQ(encode(Sequence{1, 0, 0}, 2), 1u); }

TEST(Encode, MixedRadixByHand) { EXPECT_EQ(encode(Sequence{2, 1, 0}, 3), 2u + 1u * 3u + 0u * 9u); }

TEST(Encode, RejectsOutOfRangeToken) {
  EXPECT_THROW(encode(Sequence{0, 2}, 2), DomainError);
  EXPECT_THROW(encode(Sequence{-1}, 2), DomainError);
}

TEST(Decode, Examples) {
  EXPECT_EQ(decode(0, 2, 3), (Sequence{0, 0, 0}));
  EXPECT_EQ(decode(7, 2, 3), (Sequence{1, 1, 1}));
  EXPECT_EQ(decode(5, 3, 2), (Sequence{2, 1}));
}

TEST(Decode, RejectsOutOfRangeIndex) {
  EXPECT_THROW(decode(8, 2, 3), DomainError);
  EXPECT_THROW(decode(9, 3, 2), DomainError);
}

TEST(Decode, RoundTripsEveryState) {
  const StateSpace space(3, 4);
  for (StateIndex idx = 0; idx < space.size_or_zero(); ++idx) {
    EXPECT_EQ(space.encode(space.decode(idx)), idx);
  }
}

TEST(Enumerate, BinaryPairsInIndexOrder) {
  std::vector<Sequence> got;
  for (const auto& x : enumerate_states(2, 2)) got.push_back(x);
  const std::vector<Sequence> want{{0, 0}, {1, 0}, {0, 1}, {1, 1}};
  EXPECT_EQ(got, want);
}

TEST(Enumerate, SingleCoordinate) {
  std::vector<Sequence> got;
  for (const auto& x : enumerate_states(2, 1)) got.push_back(x);
  EXPECT_EQ(got, (std::vector<Sequence>{{0}, {1}}));
}

TEST(Enumerate, TernaryCubeHasNoDuplicates) {
  std::set<Sequence> seen;
  std::size_t count = 0;
  auto range = enumerate_states(3, 3);
  for (auto it = range.begin(); it != range.end(); ++it) {
    EXPECT_EQ(encode(*it, 3), it.index());
    seen.insert(*it);
    ++count;
  }
  EXPECT_EQ(count, 27u);
  EXPECT_EQ(seen.size(), 27u);
}

TEST(Enumerate, CapExceededIsResourceError) {
  EXPECT_THROW(enumerate_states(2, 30, 1000), ResourceError);
  EXPECT_THROW(StateSpace(20, 30).require_enumerable(), ResourceError);
}

TEST(StateSpace, HugeSpaceReportsOverflow) {
  const StateSpace space(20, 200);
  EXPECT_EQ(space.size_or_zero(), 0u);
  EXPECT_FALSE(space.enumerable());
}

TEST(StateSpace, ValidateChecksLength) {
  const StateSpace space(2, 3);
  EXPECT_THROW(space.validate(Sequence{0, 1}), DomainError);
  EXPECT_FALSE(space.contains(Sequence{0, 1, 2}));
  EXPECT_TRUE(space.contains(Sequence{0, 1, 1}));
}

TEST(Vocabulary, JsonRoundTrip) {
  const Vocabulary v({"A", "C", "G", "T"});
  EXPECT_EQ(Vocabulary::from_json(v.to_json()), v);
  EXPECT_EQ(Vocabulary::numbered(3).label(2), "2");
}
