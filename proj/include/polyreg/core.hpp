#pragma once

// Words, alphabets, finite automata, finite monoids and transition monoids.
// Everything here is immutable after construction and safe to share.

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace polyreg {

using SymbolId = std::uint32_t;

struct PolyregError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct AlphabetMismatchError : PolyregError {
    using PolyregError::PolyregError;
};
struct ParseError : PolyregError {
    using PolyregError::PolyregError;
};
struct RejectedInputError : PolyregError {
    using PolyregError::PolyregError;
};

class Alphabet;
using AlphabetRef = std::shared_ptr<const Alphabet>;

// An ordered set of printable symbol tokens. Tokens may span several
// characters (underlined letters are "_a", recolored copies "~a").
// The bare escape character "_" is not a valid token.
class Alphabet {
  public:
    explicit Alphabet(std::vector<std::string> letters);

    static AlphabetRef make(std::vector<std::string> letters);

    std::size_t size() const { return tokens_.size(); }
    const std::string& token(SymbolId id) const { return tokens_.at(id); }
    const std::vector<std::string>& tokens() const { return tokens_; }
    std::optional<SymbolId> find(const std::string& tok) const;
    bool contains(const std::string& tok) const { return find(tok).has_value(); }
    SymbolId id(const std::string& tok) const;

    bool operator==(const Alphabet& other) const { return tokens_ == other.tokens_; }
    bool sameLetterSet(const Alphabet& other) const;
    bool disjointFrom(const Alphabet& other) const;

    // Greedy longest-match tokenization of a rendered word.
    std::vector<SymbolId> tokenize(const std::string& text) const;

  private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, SymbolId> index_;
};

struct Word {
    AlphabetRef alphabet;
    std::vector<SymbolId> syms;

    std::size_t size() const { return syms.size(); }
    bool empty() const { return syms.empty(); }
    const std::string& tokenAt(std::size_t pos0) const { return alphabet->token(syms[pos0]); }
    std::string render() const;

    bool operator==(const Word& other) const;
};

Word wordFromTokens(const AlphabetRef& alphabet, const std::vector<std::string>& toks);
Word wordFromText(const AlphabetRef& alphabet, const std::string& text);
// Re-index a word over a letter-set-equal alphabet (identity when alphabets
// are token-for-token identical).
Word rebaseWord(const Word& w, const AlphabetRef& target);

// Deterministic automaton; delta is total on states x alphabet.
struct Dfa {
    AlphabetRef alphabet;
    std::vector<std::string> stateNames;
    std::size_t initial = 0;
    std::vector<bool> accepting;
    // delta[state * |alphabet| + symbol]
    std::vector<std::size_t> delta;

    std::size_t numStates() const { return stateNames.size(); }
    std::size_t step(std::size_t state, SymbolId a) const {
        return delta[state * alphabet->size() + a];
    }
    void validate() const;
};

struct Nfa {
    AlphabetRef alphabet;
    std::vector<std::string> stateNames;
    std::vector<std::size_t> initial;
    std::vector<bool> accepting;
    // post[state][symbol] = successor states
    std::vector<std::vector<std::vector<std::size_t>>> post;

    std::size_t numStates() const { return stateNames.size(); }
    bool accepts(const Word& w) const;
};

std::size_t dfaRun(const Dfa& dfa, const Word& w);
bool dfaAccepts(const Dfa& dfa, const Word& w);
bool dfaIsEmpty(const Dfa& dfa);
Dfa nfaDeterminize(const Nfa& nfa);

// Total multiplication table over a finite carrier; associativity and the
// identity laws are checked exhaustively at construction.
class FiniteMonoid {
  public:
    FiniteMonoid(std::vector<std::string> elementNames, std::vector<std::size_t> table,
                 std::size_t identity);

    std::size_t size() const { return names_.size(); }
    std::size_t identity() const { return identity_; }
    const std::string& name(std::size_t e) const { return names_.at(e); }
    const std::vector<std::string>& names() const { return names_; }
    std::optional<std::size_t> find(const std::string& name) const;
    std::size_t mul(std::size_t a, std::size_t b) const { return table_[a * size() + b]; }
    std::size_t power(std::size_t a, std::size_t n) const;
    bool isGroup() const;

  private:
    std::vector<std::string> names_;
    std::vector<std::size_t> table_;
    std::size_t identity_;
};

using MonoidRef = std::shared_ptr<const FiniteMonoid>;

struct LetterHom {
    AlphabetRef alphabet;
    MonoidRef monoid;
    std::vector<std::size_t> image;  // symbol id -> element

    std::size_t letterImage(SymbolId a) const { return image.at(a); }
};

// Monoid of state transformations generated by the letter actions of a dfa,
// together with the letter homomorphism. Elements are deduplicated
// transformation vectors, so equality is structural.
std::pair<MonoidRef, LetterHom> transitionMonoid(const Dfa& dfa, std::size_t cap = 2000000);

bool monoidIsAperiodic(const FiniteMonoid& m);
std::size_t homImage(const LetterHom& h, const Word& w);

}  // namespace polyreg
