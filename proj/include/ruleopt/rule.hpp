#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ruleopt/detail/format.hpp"
#include "ruleopt/detail/hash.hpp"
#include "ruleopt/errors.hpp"

namespace ruleopt {

// ---------------------------------------------------------------------------
// Atomic rules and the rule universe
// ---------------------------------------------------------------------------

enum class PredicateKind {
    NumericLE,  // field <= threshold
    NumericGT,  // field > threshold
    CategoryEq, // field == level
};

/// One boolean predicate over a single record field. Composite rules are
/// conjunctions of these; the universe fixes their ids and ordering.
struct AtomicRule {
    std::size_t id = 0;
    std::string field;
    PredicateKind kind = PredicateKind::CategoryEq;
    double threshold = 0.0; // NumericLE / NumericGT
    std::string level;      // CategoryEq

    std::string text() const {
        switch (kind) {
        case PredicateKind::NumericLE:
            return field + " <= " + detail::format_double(threshold);
        case PredicateKind::NumericGT:
            return field + " > " + detail::format_double(threshold);
        case PredicateKind::CategoryEq:
            return field + " = " + level;
        }
        return {};
    }

    bool operator==(const AtomicRule& o) const {
        return id == o.id && field == o.field && kind == o.kind &&
               threshold == o.threshold && level == o.level;
    }
};

/// The ordered, finite set of atomic rules a problem instance is built from.
/// Atom ids equal positions; every BitRule is interpreted relative to one
/// universe. Immutable after construction.
class RuleUniverse {
public:
    RuleUniverse() = default;

    explicit RuleUniverse(std::vector<AtomicRule> atoms) : atoms_(std::move(atoms)) {
        for (std::size_t i = 0; i < atoms_.size(); ++i) {
            if (atoms_[i].id != i)
                throw DataError("universe atom id " + std::to_string(atoms_[i].id) +
                                " does not match position " + std::to_string(i));
            if (atoms_[i].kind != PredicateKind::CategoryEq &&
                !std::isfinite(atoms_[i].threshold))
                throw DataError("non-finite threshold in atom " + std::to_string(i));
        }
        if (atoms_.empty()) throw DataError("universe must contain at least one atom");
    }

    std::size_t size() const { return atoms_.size(); }
    const AtomicRule& atom(std::size_t i) const { return atoms_.at(i); }
    const std::vector<AtomicRule>& atoms() const { return atoms_; }

    /// Content hash over the canonical serialization; identifies the universe
    /// in dataset manifests and oracle cache keys.
    std::uint64_t content_hash() const {
        std::ostringstream os;
        serialize(os);
        return detail::fnv1a(os.str());
    }

    /// One atom per line: id, field, predicate kind, parameter (tab-separated).
    void serialize(std::ostream& os) const {
        os << "# ruleopt-universe v1\n";
        os << "# atoms: " << atoms_.size() << "\n";
        for (const auto& a : atoms_) {
            os << a.id << '\t' << a.field << '\t';
            switch (a.kind) {
            case PredicateKind::NumericLE:
                os << "num_le\t" << detail::format_double(a.threshold);
                break;
            case PredicateKind::NumericGT:
                os << "num_gt\t" << detail::format_double(a.threshold);
                break;
            case PredicateKind::CategoryEq:
                os << "cat_eq\t" << a.level;
                break;
            }
            os << '\n';
        }
    }

    static RuleUniverse parse(std::istream& is) {
        std::vector<AtomicRule> atoms;
        std::string line;
        while (std::getline(is, line)) {
            if (line.empty() || line[0] == '#') continue;
            std::vector<std::string> parts;
            std::size_t start = 0;
            while (true) {
                auto tab = line.find('\t', start);
                parts.push_back(line.substr(start, tab - start));
                if (tab == std::string::npos) break;
                start = tab + 1;
            }
            if (parts.size() != 4)
                throw DataError("universe line needs 4 tab-separated fields: " + line);
            AtomicRule a;
            a.id = static_cast<std::size_t>(detail::parse_long(parts[0], "universe id"));
            a.field = parts[1];
            if (parts[2] == "num_le") {
                a.kind = PredicateKind::NumericLE;
                a.threshold = detail::parse_double(parts[3], "universe threshold");
            } else if (parts[2] == "num_gt") {
                a.kind = PredicateKind::NumericGT;
                a.threshold = detail::parse_double(parts[3], "universe threshold");
            } else if (parts[2] == "cat_eq") {
                a.kind = PredicateKind::CategoryEq;
                a.level = parts[3];
            } else {
                throw DataError("unknown predicate kind '" + parts[2] + "'");
            }
            atoms.push_back(std::move(a));
        }
        return RuleUniverse(std::move(atoms));
    }

private:
    std::vector<AtomicRule> atoms_;
};

// ---------------------------------------------------------------------------
// BitRule: the characteristic-vector encoding on {0,1}^n
// ---------------------------------------------------------------------------

/// Fixed-length binary vector; bit i set means atom i is a conjunct.
/// The all-zeros vector is the identity rule (no filtering). Packed into
/// 64-bit words; compose and hamming are word-wise.
class BitRule {
public:
    BitRule() = default;

    explicit BitRule(std::size_t n)
        : n_(n), words_((n + 63) / 64, 0ull) {}

    /// Builds from a "0101..." string, most significant atom last (index order).
    static BitRule from_string(std::string_view bits) {
        BitRule r(bits.size());
        for (std::size_t i = 0; i < bits.size(); ++i) {
            if (bits[i] == '1')
                r.set(i);
            else if (bits[i] != '0')
                throw DataError("bit string may contain only 0/1");
        }
        return r;
    }

    /// Builds from the low n bits of a mask (atom i = bit i). n must be <= 64.
    static BitRule from_mask(std::uint64_t mask, std::size_t n) {
        BitRule r(n);
        if (n > 0) r.words_[0] = (n >= 64) ? mask : (mask & ((1ull << n) - 1));
        return r;
    }

    std::size_t size() const { return n_; }

    bool test(std::size_t i) const {
        return (words_[i / 64] >> (i % 64)) & 1ull;
    }

    void set(std::size_t i, bool v = true) {
        if (v)
            words_[i / 64] |= (1ull << (i % 64));
        else
            words_[i / 64] &= ~(1ull << (i % 64));
    }

    std::size_t count() const {
        std::size_t c = 0;
        for (auto w : words_) c += static_cast<std::size_t>(std::popcount(w));
        return c;
    }

    bool none() const {
        for (auto w : words_)
            if (w) return false;
        return true;
    }

    bool any() const { return !none(); }

    const std::vector<std::uint64_t>& words() const { return words_; }

    std::string to_string() const {
        std::string s(n_, '0');
        for (std::size_t i = 0; i < n_; ++i)
            if (test(i)) s[i] = '1';
        return s;
    }

    std::vector<std::size_t> set_bits() const {
        std::vector<std::size_t> out;
        for (std::size_t w = 0; w < words_.size(); ++w) {
            std::uint64_t word = words_[w];
            while (word) {
                const int b = std::countr_zero(word);
                out.push_back(w * 64 + static_cast<std::size_t>(b));
                word &= word - 1;
            }
        }
        return out;
    }

    bool operator==(const BitRule& o) const {
        return n_ == o.n_ && words_ == o.words_;
    }

    friend BitRule compose(const BitRule& a, const BitRule& b);
    friend std::size_t hamming(const BitRule& a, const BitRule& b);

private:
    std::size_t n_ = 0;
    std::vector<std::uint64_t> words_;
};

/// Rule conjunction in the encoding: bitwise OR. Associative, commutative,
/// idempotent; the all-zeros vector is the two-sided identity.
inline BitRule compose(const BitRule& a, const BitRule& b) {
    if (a.size() != b.size())
        throw UniverseMismatchError("compose: rules of length " +
                                    std::to_string(a.size()) + " and " +
                                    std::to_string(b.size()));
    BitRule out = a;
    for (std::size_t i = 0; i < out.words_.size(); ++i) out.words_[i] |= b.words_[i];
    return out;
}

/// Number of differing positions. A metric on the hypercube.
inline std::size_t hamming(const BitRule& a, const BitRule& b) {
    if (a.size() != b.size())
        throw UniverseMismatchError("hamming: rules of length " +
                                    std::to_string(a.size()) + " and " +
                                    std::to_string(b.size()));
    std::size_t d = 0;
    for (std::size_t i = 0; i < a.words_.size(); ++i)
        d += static_cast<std::size_t>(std::popcount(a.words_[i] ^ b.words_[i]));
    return d;
}

/// Characteristic-vector encoding: bit i set iff atom i is a conjunct.
inline BitRule encode(const std::set<std::size_t>& conjuncts,
                      const RuleUniverse& universe) {
    BitRule r(universe.size());
    for (std::size_t id : conjuncts) {
        if (id >= universe.size())
            throw UniverseMismatchError("encode: atom id " + std::to_string(id) +
                                        " outside universe of size " +
                                        std::to_string(universe.size()));
        r.set(id);
    }
    return r;
}

/// Deterministic textual conjunction, atoms in id order. The identity rule
/// decodes to "TRUE (no filtering)".
inline std::string decode(const BitRule& r, const RuleUniverse& universe) {
    if (r.size() != universe.size())
        throw UniverseMismatchError("decode: rule length " + std::to_string(r.size()) +
                                    " vs universe size " +
                                    std::to_string(universe.size()));
    if (r.none()) return "TRUE (no filtering)";
    std::string out;
    for (std::size_t i : r.set_bits()) {
        if (!out.empty()) out += " AND ";
        out += universe.atom(i).text();
    }
    return out;
}

} // namespace ruleopt
