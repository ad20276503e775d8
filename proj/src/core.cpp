#include "polyreg/core.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <set>

namespace polyreg {

Alphabet::Alphabet(std::vector<std::string> letters) : tokens_(std::move(letters)) {
    if (tokens_.empty()) throw PolyregError("alphabet must be non-empty");
    for (SymbolId i = 0; i < tokens_.size(); ++i) {
        const auto& t = tokens_[i];
        if (t.empty()) throw PolyregError("empty symbol token");
        if (t == "_") throw PolyregError("'_' is reserved as the underline escape");
        if (!index_.emplace(t, i).second)
            throw PolyregError("duplicate symbol in alphabet: " + t);
    }
}

AlphabetRef Alphabet::make(std::vector<std::string> letters) {
    return std::make_shared<Alphabet>(std::move(letters));
}

std::optional<SymbolId> Alphabet::find(const std::string& tok) const {
    auto it = index_.find(tok);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

SymbolId Alphabet::id(const std::string& tok) const {
    auto v = find(tok);
    if (!v) throw AlphabetMismatchError("symbol not in alphabet: " + tok);
    return *v;
}

bool Alphabet::sameLetterSet(const Alphabet& other) const {
    if (size() != other.size()) return false;
    for (const auto& t : tokens_)
        if (!other.contains(t)) return false;
    return true;
}

bool Alphabet::disjointFrom(const Alphabet& other) const {
    for (const auto& t : tokens_)
        if (other.contains(t)) return false;
    return true;
}

std::vector<SymbolId> Alphabet::tokenize(const std::string& text) const {
    std::size_t maxLen = 0;
    for (const auto& t : tokens_) maxLen = std::max(maxLen, t.size());
    std::vector<SymbolId> out;
    std::size_t i = 0;
    while (i < text.size()) {
        std::optional<SymbolId> best;
        std::size_t bestLen = 0;
        for (std::size_t len = std::min(maxLen, text.size() - i); len >= 1; --len) {
            auto v = find(text.substr(i, len));
            if (v) {
                best = v;
                bestLen = len;
                break;
            }
        }
        if (!best)
            throw AlphabetMismatchError("cannot tokenize input at offset " + std::to_string(i) +
                                        ": " + text.substr(i, 8));
        out.push_back(*best);
        i += bestLen;
    }
    return out;
}

std::string Word::render() const {
    std::string s;
    for (auto a : syms) s += alphabet->token(a);
    return s;
}

bool Word::operator==(const Word& other) const {
    if (alphabet == other.alphabet || *alphabet == *other.alphabet) return syms == other.syms;
    if (syms.size() != other.syms.size()) return false;
    for (std::size_t i = 0; i < syms.size(); ++i)
        if (alphabet->token(syms[i]) != other.alphabet->token(other.syms[i])) return false;
    return true;
}

Word wordFromTokens(const AlphabetRef& alphabet, const std::vector<std::string>& toks) {
    Word w{alphabet, {}};
    w.syms.reserve(toks.size());
    for (const auto& t : toks) w.syms.push_back(alphabet->id(t));
    return w;
}

Word wordFromText(const AlphabetRef& alphabet, const std::string& text) {
    return Word{alphabet, alphabet->tokenize(text)};
}

Word rebaseWord(const Word& w, const AlphabetRef& target) {
    if (w.alphabet == target || *w.alphabet == *target) return Word{target, w.syms};
    std::vector<SymbolId> remap(w.alphabet->size());
    for (SymbolId a = 0; a < w.alphabet->size(); ++a) remap[a] = target->id(w.alphabet->token(a));
    Word out{target, {}};
    out.syms.reserve(w.syms.size());
    for (auto a : w.syms) out.syms.push_back(remap[a]);
    return out;
}

void Dfa::validate() const {
    if (initial >= numStates()) throw PolyregError("dfa: initial state out of range");
    if (accepting.size() != numStates()) throw PolyregError("dfa: accepting vector size mismatch");
    if (delta.size() != numStates() * alphabet->size())
        throw PolyregError("dfa: delta is not total");
    for (auto t : delta)
        if (t >= numStates()) throw PolyregError("dfa: transition target out of range");
}

bool Nfa::accepts(const Word& w) const {
    if (!(*w.alphabet == *alphabet) && !w.alphabet->sameLetterSet(*alphabet))
        throw AlphabetMismatchError("nfa_accepts: word over a different alphabet");
    Word ww = rebaseWord(w, alphabet);
    std::set<std::size_t> cur(initial.begin(), initial.end());
    for (auto a : ww.syms) {
        std::set<std::size_t> next;
        for (auto s : cur)
            for (auto t : post[s][a]) next.insert(t);
        cur = std::move(next);
    }
    for (auto s : cur)
        if (accepting[s]) return true;
    return false;
}

std::size_t dfaRun(const Dfa& dfa, const Word& w) {
    if (!(*w.alphabet == *dfa.alphabet) && !w.alphabet->sameLetterSet(*dfa.alphabet))
        throw AlphabetMismatchError("dfa_run: word over a different alphabet");
    Word ww = rebaseWord(w, dfa.alphabet);
    std::size_t q = dfa.initial;
    for (auto a : ww.syms) q = dfa.step(q, a);
    return q;
}

bool dfaAccepts(const Dfa& dfa, const Word& w) { return dfa.accepting[dfaRun(dfa, w)]; }

bool dfaIsEmpty(const Dfa& dfa) {
    std::vector<bool> seen(dfa.numStates(), false);
    std::deque<std::size_t> queue{dfa.initial};
    seen[dfa.initial] = true;
    while (!queue.empty()) {
        auto q = queue.front();
        queue.pop_front();
        if (dfa.accepting[q]) return false;
        for (SymbolId a = 0; a < dfa.alphabet->size(); ++a) {
            auto t = dfa.step(q, a);
            if (!seen[t]) {
                seen[t] = true;
                queue.push_back(t);
            }
        }
    }
    return true;
}

Dfa nfaDeterminize(const Nfa& nfa) {
    std::map<std::vector<std::size_t>, std::size_t> index;
    std::vector<std::vector<std::size_t>> subsets;
    auto intern = [&](std::vector<std::size_t> s) {
        std::sort(s.begin(), s.end());
        s.erase(std::unique(s.begin(), s.end()), s.end());
        auto it = index.find(s);
        if (it != index.end()) return it->second;
        std::size_t id = subsets.size();
        index.emplace(s, id);
        subsets.push_back(std::move(s));
        return id;
    };

    Dfa dfa;
    dfa.alphabet = nfa.alphabet;
    std::size_t start = intern(nfa.initial);
    std::vector<std::vector<std::size_t>> deltaRows;
    for (std::size_t cur = 0; cur < subsets.size(); ++cur) {
        std::vector<std::size_t> row(nfa.alphabet->size());
        for (SymbolId a = 0; a < nfa.alphabet->size(); ++a) {
            std::vector<std::size_t> next;
            for (auto s : subsets[cur])
                for (auto t : nfa.post[s][a]) next.push_back(t);
            row[a] = intern(std::move(next));
        }
        deltaRows.push_back(std::move(row));
    }

    dfa.initial = start;
    dfa.stateNames.resize(subsets.size());
    dfa.accepting.assign(subsets.size(), false);
    for (std::size_t q = 0; q < subsets.size(); ++q) {
        std::string nm = "{";
        for (std::size_t i = 0; i < subsets[q].size(); ++i) {
            if (i) nm += ',';
            nm += nfa.stateNames[subsets[q][i]];
        }
        nm += '}';
        dfa.stateNames[q] = nm;
        for (auto s : subsets[q])
            if (nfa.accepting[s]) dfa.accepting[q] = true;
    }
    dfa.delta.assign(subsets.size() * nfa.alphabet->size(), 0);
    for (std::size_t q = 0; q < subsets.size(); ++q)
        for (SymbolId a = 0; a < nfa.alphabet->size(); ++a)
            dfa.delta[q * nfa.alphabet->size() + a] = deltaRows[q][a];
    dfa.validate();
    return dfa;
}

FiniteMonoid::FiniteMonoid(std::vector<std::string> elementNames, std::vector<std::size_t> table,
                           std::size_t identity)
    : names_(std::move(elementNames)), table_(std::move(table)), identity_(identity) {
    std::size_t n = names_.size();
    if (n == 0) throw PolyregError("monoid must be non-empty");
    if (table_.size() != n * n) throw PolyregError("monoid table size mismatch");
    if (identity_ >= n) throw PolyregError("monoid identity out of range");
    for (auto e : table_)
        if (e >= n) throw PolyregError("monoid table entry out of range");
    for (std::size_t a = 0; a < n; ++a) {
        if (mul(identity_, a) != a || mul(a, identity_) != a)
            throw PolyregError("monoid identity laws violated at " + names_[a]);
    }
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t c = 0; c < n; ++c)
                if (mul(mul(a, b), c) != mul(a, mul(b, c)))
                    throw PolyregError("monoid multiplication not associative");
}

std::optional<std::size_t> FiniteMonoid::find(const std::string& name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
        if (names_[i] == name) return i;
    return std::nullopt;
}

std::size_t FiniteMonoid::power(std::size_t a, std::size_t n) const {
    std::size_t acc = identity_;
    for (std::size_t i = 0; i < n; ++i) acc = mul(acc, a);
    return acc;
}

bool FiniteMonoid::isGroup() const {
    for (std::size_t a = 0; a < size(); ++a) {
        bool hasInverse = false;
        for (std::size_t b = 0; b < size(); ++b)
            if (mul(a, b) == identity_ && mul(b, a) == identity_) hasInverse = true;
        if (!hasInverse) return false;
    }
    return true;
}

std::pair<MonoidRef, LetterHom> transitionMonoid(const Dfa& dfa, std::size_t cap) {
    std::size_t n = dfa.numStates();
    using Transf = std::vector<std::size_t>;
    std::map<Transf, std::size_t> index;
    std::vector<Transf> elems;
    auto intern = [&](const Transf& t) {
        auto it = index.find(t);
        if (it != index.end()) return it->second;
        std::size_t id = elems.size();
        index.emplace(t, id);
        elems.push_back(t);
        if (elems.size() > cap) throw PolyregError("transition monoid exceeds generation cap");
        return id;
    };

    Transf identity(n);
    for (std::size_t q = 0; q < n; ++q) identity[q] = q;
    std::size_t idElem = intern(identity);

    std::vector<std::size_t> letterElem(dfa.alphabet->size());
    std::vector<Transf> generators;
    for (SymbolId a = 0; a < dfa.alphabet->size(); ++a) {
        Transf t(n);
        for (std::size_t q = 0; q < n; ++q) t[q] = dfa.step(q, a);
        letterElem[a] = intern(t);
        generators.push_back(t);
    }

    // Close under right multiplication by generators.
    for (std::size_t cur = 0; cur < elems.size(); ++cur) {
        for (const auto& g : generators) {
            Transf t(n);
            for (std::size_t q = 0; q < n; ++q) t[q] = g[elems[cur][q]];
            intern(t);
        }
    }

    std::size_t m = elems.size();
    std::vector<std::size_t> table(m * m);
    for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = 0; b < m; ++b) {
            Transf t(n);
            for (std::size_t q = 0; q < n; ++q) t[q] = elems[b][elems[a][q]];
            auto it = index.find(t);
            if (it == index.end()) throw PolyregError("transition monoid not closed");
            table[a * m + b] = it->second;
        }

    std::vector<std::string> names(m);
    for (std::size_t e = 0; e < m; ++e) {
        std::string nm = "[";
        for (std::size_t q = 0; q < n; ++q) {
            if (q) nm += ' ';
            nm += std::to_string(elems[e][q]);
        }
        nm += ']';
        names[e] = nm;
    }

    auto monoid = std::make_shared<FiniteMonoid>(std::move(names), std::move(table), idElem);
    LetterHom hom{dfa.alphabet, monoid, letterElem};
    return {monoid, hom};
}

bool monoidIsAperiodic(const FiniteMonoid& m) {
    std::size_t n = m.size();
    for (std::size_t s = 0; s < n; ++s)
        if (m.power(s, n) != m.power(s, n + 1)) return false;
    return true;
}

std::size_t homImage(const LetterHom& h, const Word& w) {
    if (!(*w.alphabet == *h.alphabet) && !w.alphabet->sameLetterSet(*h.alphabet))
        throw AlphabetMismatchError("hom_image: word over a different alphabet");
    Word ww = rebaseWord(w, h.alphabet);
    std::size_t acc = h.monoid->identity();
    for (auto a : ww.syms) acc = h.monoid->mul(acc, h.letterImage(a));
    return acc;
}

}  // namespace polyreg
