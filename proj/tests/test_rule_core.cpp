#include "ruleopt/rule.hpp"

#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "helpers.hpp"

using namespace ruleopt;

namespace {

BitRule bits(const std::string& s) { return BitRule::from_string(s); }

TEST(Encode, DryEyeWorkedExample) {
    const auto universe = testutil::paper_universe();
    // r1 = moderate dry eye with MGD present; r2 = female patients.
    const BitRule r1 = encode({2, 7}, universe);
    const BitRule r2 = encode({5}, universe);
    EXPECT_EQ(r1.to_string(), "00100001");
    EXPECT_EQ(r2.to_string(), "00000100");

    const BitRule combined = compose(r1, r2);
    EXPECT_EQ(combined.to_string(), "00100101");
    EXPECT_EQ(hamming(r1, r2), 3u);
}

TEST(Encode, EmptyConjunctionIsIdentity) {
    const auto universe = testutil::paper_universe();
    const BitRule eps = encode({}, universe);
    EXPECT_TRUE(eps.none());
    EXPECT_EQ(eps.to_string(), "00000000");
}

TEST(Encode, OutOfRangeIdRejected) {
    const auto universe = testutil::paper_universe();
    EXPECT_THROW(encode({8}, universe), UniverseMismatchError);
}

TEST(Encode, InjectiveOverSubsetsExhaustiveSmallN) {
    // n <= 4: every subset hits a distinct vector and every vector is hit.
    for (std::size_t n = 1; n <= 4; ++n) {
        std::vector<AtomicRule> atoms;
        for (std::size_t i = 0; i < n; ++i) {
            AtomicRule a;
            a.id = i;
            a.field = "f" + std::to_string(i);
            a.kind = PredicateKind::NumericGT;
            a.threshold = static_cast<double>(i);
            atoms.push_back(a);
        }
        const RuleUniverse universe(std::move(atoms));
        std::set<std::string> seen;
        for (std::uint64_t mask = 0; mask < (1ull << n); ++mask) {
            std::set<std::size_t> subset;
            for (std::size_t i = 0; i < n; ++i)
                if ((mask >> i) & 1) subset.insert(i);
            seen.insert(encode(subset, universe).to_string());
        }
        EXPECT_EQ(seen.size(), 1ull << n) << "n=" << n;
    }
}

TEST(Compose, MismatchedLengthsRejected) {
    EXPECT_THROW(compose(bits("0101"), bits("01011")), UniverseMismatchError);
    EXPECT_THROW(hamming(bits("0101"), bits("01011")), UniverseMismatchError);
}

TEST(Compose, SemilatticeLawsRandom) {
    Rng rng(20240517);
    const std::size_t n = 64;
    const BitRule zero(n);
    for (int iter = 0; iter < 2000; ++iter) {
        const BitRule a = testutil::random_rule(n, rng);
        const BitRule b = testutil::random_rule(n, rng);
        const BitRule c = testutil::random_rule(n, rng);
        EXPECT_EQ(compose(compose(a, b), c), compose(a, compose(b, c)));
        EXPECT_EQ(compose(a, b), compose(b, a));
        EXPECT_EQ(compose(a, a), a);
        EXPECT_EQ(compose(a, zero), a);
        EXPECT_EQ(compose(zero, a), a);
    }
}

TEST(Compose, HomomorphismFromSubsetUnion) {
    // encode(S1 u S2) == compose(encode(S1), encode(S2)), random and exhaustive.
    Rng rng(7);
    const auto universe = testutil::paper_universe();
    for (int iter = 0; iter < 500; ++iter) {
        const auto s1 = testutil::random_subset(universe.size(), rng);
        const auto s2 = testutil::random_subset(universe.size(), rng);
        std::set<std::size_t> u;
        u.insert(s1.begin(), s1.end());
        u.insert(s2.begin(), s2.end());
        EXPECT_EQ(encode(u, universe), compose(encode(s1, universe), encode(s2, universe)));
    }
}

TEST(Hamming, MetricAxiomsRandomTriples) {
    Rng rng(99);
    const std::size_t n = 48;
    for (int iter = 0; iter < 1000; ++iter) {
        const BitRule a = testutil::random_rule(n, rng);
        const BitRule b = testutil::random_rule(n, rng);
        const BitRule c = testutil::random_rule(n, rng);
        EXPECT_EQ(hamming(a, a), 0u);
        EXPECT_EQ(hamming(a, b), hamming(b, a));
        EXPECT_LE(hamming(a, c), hamming(a, b) + hamming(b, c));
        if (hamming(a, b) == 0) EXPECT_EQ(a, b);
    }
}

TEST(Hamming, ComplementCase) {
    BitRule ones(8);
    for (std::size_t i = 0; i < 8; ++i) ones.set(i);
    EXPECT_EQ(hamming(BitRule(8), ones), 8u);
}

TEST(Decode, IdentityRule) {
    const auto universe = testutil::paper_universe();
    EXPECT_EQ(decode(BitRule(8), universe), "TRUE (no filtering)");
}

TEST(Decode, SingletonNumeric) {
    std::vector<AtomicRule> atoms;
    AtomicRule a;
    a.id = 0;
    a.field = "OSDI";
    a.kind = PredicateKind::NumericGT;
    a.threshold = 12.0;
    atoms.push_back(a);
    AtomicRule b;
    b.id = 1;
    b.field = "TBUT";
    b.kind = PredicateKind::NumericLE;
    b.threshold = 10.0;
    atoms.push_back(b);
    const RuleUniverse universe(std::move(atoms));
    EXPECT_EQ(decode(bits("10"), universe), "OSDI > 12");
    EXPECT_EQ(decode(bits("11"), universe), "OSDI > 12 AND TBUT <= 10");
}

TEST(Decode, PaperCompositeText) {
    const auto universe = testutil::paper_universe();
    EXPECT_EQ(decode(bits("00100101"), universe),
              "DED = moderate AND Gender = female AND MGD = present");
}

TEST(Decode, RoundTripListsExactConjuncts) {
    Rng rng(3);
    const auto universe = testutil::paper_universe();
    for (int iter = 0; iter < 100; ++iter) {
        const auto subset = testutil::random_subset(universe.size(), rng);
        const BitRule r = encode(subset, universe);
        std::set<std::size_t> back;
        for (std::size_t i : r.set_bits()) back.insert(i);
        EXPECT_EQ(back, subset);
    }
}

TEST(UniverseIO, SerializeParseRoundTrip) {
    const auto universe = testutil::paper_universe();
    std::ostringstream os;
    universe.serialize(os);
    std::istringstream is(os.str());
    const RuleUniverse parsed = RuleUniverse::parse(is);
    ASSERT_EQ(parsed.size(), universe.size());
    for (std::size_t i = 0; i < universe.size(); ++i)
        EXPECT_EQ(parsed.atom(i), universe.atom(i));
    EXPECT_EQ(parsed.content_hash(), universe.content_hash());
}

TEST(UniverseIO, NumericThresholdsSurviveRoundTrip) {
    std::vector<AtomicRule> atoms;
    AtomicRule a;
    a.id = 0;
    a.field = "x";
    a.kind = PredicateKind::NumericLE;
    a.threshold = 0.1 + 0.2; // not exactly representable
    atoms.push_back(a);
    const RuleUniverse universe(std::move(atoms));
    std::ostringstream os;
    universe.serialize(os);
    std::istringstream is(os.str());
    const RuleUniverse parsed = RuleUniverse::parse(is);
    EXPECT_EQ(parsed.atom(0).threshold, universe.atom(0).threshold);
}

TEST(UniverseIO, MalformedLinesRejected) {
    std::istringstream missing("0\tA\tcat_eq\n");
    EXPECT_THROW(RuleUniverse::parse(missing), DataError);
    std::istringstream kind("0\tA\tweird\tx\n");
    EXPECT_THROW(RuleUniverse::parse(kind), DataError);
    std::istringstream gap("1\tA\tcat_eq\tx\n");
    EXPECT_THROW(RuleUniverse::parse(gap), DataError);
}

} // namespace
