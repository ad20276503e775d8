#pragma once

// The three atomic polyregular functions: sequential transducers, squaring
// and iterated reverse, plus the counter-free (first-order) test.

#include "polyreg/core.hpp"

namespace polyreg {

// Total sequential transducer: a dfa (all states accepting) with an output
// word per transition and an end-of-input word per state.
struct SequentialTransducer {
    AlphabetRef inputAlphabet;
    AlphabetRef outputAlphabet;
    Dfa dfa;
    // transitionOutput[state * |Sigma| + symbol] = output word (symbol ids
    // over the output alphabet)
    std::vector<std::vector<SymbolId>> transitionOutput;
    std::vector<std::vector<SymbolId>> endOfInput;  // per state

    void validate() const;
};

// Squaring over an alphabet; the output alphabet is the input plus a
// disjoint underlined copy ("a" -> "_a").
struct SquaringSpec {
    AlphabetRef alphabet;
    AlphabetRef squaredAlphabet;  // plain letters first, then underlined copies

    explicit SquaringSpec(AlphabetRef a);
    SymbolId plain(SymbolId a) const { return a; }
    SymbolId underlined(SymbolId a) const {
        return static_cast<SymbolId>(a + alphabet->size());
    }
};

struct IterRevSpec {
    AlphabetRef alphabet;
    SymbolId separator;

    IterRevSpec(AlphabetRef a, const std::string& sepToken);
};

std::string underlineToken(const std::string& token);

Word seqEval(const SequentialTransducer& t, const Word& w);
bool seqIsCounterFree(const SequentialTransducer& t);
Word squaringEval(const SquaringSpec& s, const Word& w);
Word iteratedReverseEval(const IterRevSpec& s, const Word& w);

// Identity transducer over an alphabet (optionally into a larger output
// alphabet containing the same letters).
SequentialTransducer seqIdentity(const AlphabetRef& alphabet);
SequentialTransducer seqIdentityInto(const AlphabetRef& input, const AlphabetRef& output);
// Single-state transducer defined by a per-letter output map plus an
// end-of-input word.
SequentialTransducer seqLetterMap(const AlphabetRef& input, const AlphabetRef& output,
                                  const std::vector<std::vector<SymbolId>>& letterOut,
                                  std::vector<SymbolId> endWord = {});

}  // namespace polyreg
