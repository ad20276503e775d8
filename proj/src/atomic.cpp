#include "polyreg/atomic.hpp"

namespace polyreg {

void SequentialTransducer::validate() const {
    dfa.validate();
    if (!(*dfa.alphabet == *inputAlphabet))
        throw PolyregError("sequential: dfa alphabet differs from input alphabet");
    if (transitionOutput.size() != dfa.numStates() * inputAlphabet->size())
        throw PolyregError("sequential: transitionOutput not total");
    if (endOfInput.size() != dfa.numStates())
        throw PolyregError("sequential: endOfInput not total");
    for (const auto& w : transitionOutput)
        for (auto a : w)
            if (a >= outputAlphabet->size())
                throw PolyregError("sequential: output symbol out of range");
    for (const auto& w : endOfInput)
        for (auto a : w)
            if (a >= outputAlphabet->size())
                throw PolyregError("sequential: end word symbol out of range");
}

std::string underlineToken(const std::string& token) { return "_" + token; }

SquaringSpec::SquaringSpec(AlphabetRef a) : alphabet(std::move(a)) {
    std::vector<std::string> toks = alphabet->tokens();
    for (const auto& t : alphabet->tokens()) {
        auto u = underlineToken(t);
        if (alphabet->contains(u))
            throw PolyregError("squaring: underlined copy collides with alphabet symbol " + u);
        toks.push_back(u);
    }
    squaredAlphabet = Alphabet::make(std::move(toks));
}

IterRevSpec::IterRevSpec(AlphabetRef a, const std::string& sepToken) : alphabet(std::move(a)) {
    separator = alphabet->id(sepToken);
}

Word seqEval(const SequentialTransducer& t, const Word& w) {
    if (!(*w.alphabet == *t.inputAlphabet) && !w.alphabet->sameLetterSet(*t.inputAlphabet))
        throw AlphabetMismatchError("seq_eval: word over a different alphabet");
    Word ww = rebaseWord(w, t.inputAlphabet);
    Word out{t.outputAlphabet, {}};
    std::size_t q = t.dfa.initial;
    std::size_t sigma = t.inputAlphabet->size();
    for (auto a : ww.syms) {
        const auto& piece = t.transitionOutput[q * sigma + a];
        out.syms.insert(out.syms.end(), piece.begin(), piece.end());
        q = t.dfa.step(q, a);
    }
    const auto& endw = t.endOfInput[q];
    out.syms.insert(out.syms.end(), endw.begin(), endw.end());
    return out;
}

bool seqIsCounterFree(const SequentialTransducer& t) {
    auto [monoid, hom] = transitionMonoid(t.dfa);
    (void)hom;
    return monoidIsAperiodic(*monoid);
}

Word squaringEval(const SquaringSpec& s, const Word& w) {
    Word ww = rebaseWord(w, s.alphabet);
    std::size_t n = ww.size();
    Word out{s.squaredAlphabet, {}};
    out.syms.reserve(n * n);
    for (std::size_t x = 0; x < n; ++x)
        for (std::size_t y = 0; y < n; ++y)
            out.syms.push_back(y == x ? s.underlined(ww.syms[y]) : s.plain(ww.syms[y]));
    return out;
}

Word iteratedReverseEval(const IterRevSpec& s, const Word& w) {
    Word ww = rebaseWord(w, s.alphabet);
    Word out{s.alphabet, {}};
    out.syms.reserve(ww.size());
    std::size_t blockStart = 0;
    for (std::size_t i = 0; i <= ww.size(); ++i) {
        if (i == ww.size() || ww.syms[i] == s.separator) {
            for (std::size_t j = i; j > blockStart; --j) out.syms.push_back(ww.syms[j - 1]);
            if (i < ww.size()) out.syms.push_back(s.separator);
            blockStart = i + 1;
        }
    }
    return out;
}

SequentialTransducer seqIdentity(const AlphabetRef& alphabet) {
    return seqIdentityInto(alphabet, alphabet);
}

SequentialTransducer seqIdentityInto(const AlphabetRef& input, const AlphabetRef& output) {
    std::vector<std::vector<SymbolId>> letterOut(input->size());
    for (SymbolId a = 0; a < input->size(); ++a) letterOut[a] = {output->id(input->token(a))};
    return seqLetterMap(input, output, letterOut);
}

SequentialTransducer seqLetterMap(const AlphabetRef& input, const AlphabetRef& output,
                                  const std::vector<std::vector<SymbolId>>& letterOut,
                                  std::vector<SymbolId> endWord) {
    SequentialTransducer t;
    t.inputAlphabet = input;
    t.outputAlphabet = output;
    t.dfa.alphabet = input;
    t.dfa.stateNames = {"q0"};
    t.dfa.initial = 0;
    t.dfa.accepting = {true};
    t.dfa.delta.assign(input->size(), 0);
    t.transitionOutput = letterOut;
    t.endOfInput = {std::move(endWord)};
    t.validate();
    return t;
}

}  // namespace polyreg
