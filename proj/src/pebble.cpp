#include "polyreg/pebble.hpp"

#include <algorithm>
#include <cassert>
#include <functional>
#include <map>
#include <set>

namespace polyreg {

std::string GuardExpr::print() const {
    switch (kind) {
        case Kind::True:
            return "true";
        case Kind::Le:
            return "p" + std::to_string(i) + "<=p" + std::to_string(j);
        case Kind::AtFirst:
            return "p" + std::to_string(i) + "<=first";
        case Kind::AtLast:
            return "last<=p" + std::to_string(i);
        case Kind::Height:
            return "height=" + std::to_string(i);
        case Kind::Placed:
            return "placed(p" + std::to_string(i) + ")";
        case Kind::And:
            return "(" + args[0].print() + " & " + args[1].print() + ")";
        case Kind::Or:
            return "(" + args[0].print() + " | " + args[1].print() + ")";
        case Kind::Not:
            return "!" + args[0].print();
    }
    return "?";
}

namespace {

bool evalGuard(const GuardExpr& g, const std::vector<std::size_t>& stack, std::size_t n,
               PartialMarks marks) {
    switch (g.kind) {
        case GuardExpr::Kind::True:
            return true;
        case GuardExpr::Kind::Le:
            return g.i <= stack.size() && g.j <= stack.size() &&
                   stack[g.i - 1] <= stack[g.j - 1];
        case GuardExpr::Kind::AtFirst:
            return marks.first && g.i <= stack.size() && stack[g.i - 1] == 1;
        case GuardExpr::Kind::AtLast:
            return marks.last && g.i <= stack.size() && stack[g.i - 1] == n;
        case GuardExpr::Kind::Height:
            return stack.size() == g.i;
        case GuardExpr::Kind::Placed:
            return g.i <= stack.size();
        case GuardExpr::Kind::And:
            return evalGuard(g.args[0], stack, n, marks) && evalGuard(g.args[1], stack, n, marks);
        case GuardExpr::Kind::Or:
            return evalGuard(g.args[0], stack, n, marks) || evalGuard(g.args[1], stack, n, marks);
        case GuardExpr::Kind::Not:
            return !evalGuard(g.args[0], stack, n, marks);
    }
    return false;
}

void checkGuardIndices(const GuardExpr& g, std::size_t k) {
    switch (g.kind) {
        case GuardExpr::Kind::Le:
            if (g.i == 0 || g.j == 0 || g.i > k || g.j > k)
                throw PolyregError("guard references pebble index beyond k");
            break;
        case GuardExpr::Kind::AtFirst:
        case GuardExpr::Kind::AtLast:
        case GuardExpr::Kind::Placed:
            if (g.i == 0 || g.i > k)
                throw PolyregError("guard references pebble index beyond k");
            break;
        case GuardExpr::Kind::Height:
            if (g.i == 0 || g.i > k) throw PolyregError("guard height beyond k");
            break;
        default:
            break;
    }
    for (const auto& a : g.args) checkGuardIndices(a, k);
}

}  // namespace

void PebbleTransducer::validate() const {
    if (maxPebbles < 1) throw PolyregError("pebble transducer needs k >= 1");
    if (initial >= numStates() || final >= numStates())
        throw PolyregError("pebble transducer: designated state out of range");
    if (stateOutput.size() != numStates())
        throw PolyregError("pebble transducer: output function not total");
    for (const auto& r : rules) {
        if (r.sourceState >= numStates() || r.targetState >= numStates())
            throw PolyregError("pebble rule references undeclared state");
        if (r.letters.size() != inputAlphabet->size())
            throw PolyregError("pebble rule letter predicate size mismatch");
        checkGuardIndices(r.guard, maxPebbles);
    }
    for (const auto& w : stateOutput)
        for (auto a : w)
            if (a >= outputAlphabet->size())
                throw PolyregError("pebble state output symbol out of range");
}

std::optional<PebbleConfig> pebbleStep(const PebbleTransducer& t, const Word& w,
                                       const PebbleConfig& c, PartialMarks marks) {
    std::size_t n = w.size();
    SymbolId label = w.syms[c.stack.back() - 1];
    for (const auto& r : t.rules) {
        if (r.sourceState != c.state) continue;
        if (!r.letters[label]) continue;
        if (!evalGuard(r.guard, c.stack, n, marks)) continue;
        PebbleConfig next = c;
        next.state = r.targetState;
        switch (r.action) {
            case PebbleAction::MoveLeft:
                if (next.stack.back() == 1) return std::nullopt;
                --next.stack.back();
                break;
            case PebbleAction::Stay:
                break;
            case PebbleAction::MoveRight:
                if (next.stack.back() == n) return std::nullopt;
                ++next.stack.back();
                break;
            case PebbleAction::Push:
                if (next.stack.size() == t.maxPebbles) return std::nullopt;
                next.stack.push_back(next.stack.back());
                break;
            case PebbleAction::Pop:
                if (next.stack.size() == 1) return std::nullopt;
                next.stack.pop_back();
                break;
        }
        // stack discipline: nothing below the top may change
        for (std::size_t i = 0; i + 1 < std::min(next.stack.size(), c.stack.size()); ++i)
            assert(next.stack[i] == c.stack[i]);
        return next;
    }
    return std::nullopt;
}

PebbleRunResult pebbleRun(const PebbleTransducer& t, const Word& w) {
    if (w.empty()) throw PolyregError("pebble_run requires a nonempty input");
    Word ww = rebaseWord(w, t.inputAlphabet);
    std::size_t n = ww.size();
    // exact configuration count |Q| * sum_{h=1..k} n^h, saturating
    const std::size_t kCap = 200000000;
    std::size_t configs = 0, pw = 1;
    for (std::size_t h = 1; h <= t.maxPebbles; ++h) {
        if (pw > kCap / n) {
            configs = kCap;
            break;
        }
        pw *= n;
        if (configs > kCap - pw) {
            configs = kCap;
            break;
        }
        configs += pw;
    }
    std::size_t bound =
        t.numStates() > kCap / configs ? kCap : t.numStates() * configs + 1;

    PebbleRunResult res;
    res.run.push_back(PebbleConfig{t.initial, {1}});
    if (t.initial == t.final) {
        res.accepted = true;
        return res;
    }
    while (res.run.size() < bound) {
        auto next = pebbleStep(t, ww, res.run.back());
        if (!next) return res;  // stuck: rejected
        bool isFinal = next->state == t.final;
        res.run.push_back(std::move(*next));
        if (isFinal) {
            res.accepted = true;
            return res;
        }
    }
    res.accepted = false;  // exceeded the configuration count: looping
    return res;
}

Word pebbleEval(const PebbleTransducer& t, const Word& w) {
    if (w.empty()) return Word{t.outputAlphabet, t.emptyInputOutput};
    auto res = pebbleRun(t, w);
    if (!res.accepted) throw RejectedInputError("pebble transducer rejected the input");
    Word out{t.outputAlphabet, {}};
    for (const auto& c : res.run) {
        const auto& piece = t.stateOutput[c.state];
        out.syms.insert(out.syms.end(), piece.begin(), piece.end());
    }
    return out;
}

Word pebbleRunWord(const PebbleTransducer& t, const Word& w) {
    auto res = pebbleRun(t, w);
    if (!res.accepted) throw RejectedInputError("pebble transducer rejected the input");
    Word ww = rebaseWord(w, t.inputAlphabet);

    std::vector<std::string> toks = t.inputAlphabet->tokens();
    if (std::find(toks.begin(), toks.end(), "|") == toks.end()) toks.push_back("|");
    for (std::size_t i = 1; i <= t.maxPebbles; ++i) toks.push_back("[" + std::to_string(i) + "]");
    for (std::size_t i = 1; i <= t.maxPebbles; ++i)
        for (const auto& q : t.stateNames)
            toks.push_back("[" + std::to_string(i) + ":" + q + "]");
    AlphabetRef alpha = Alphabet::make(std::move(toks));

    Word out{alpha, {}};
    bool firstConfig = true;
    for (const auto& c : res.run) {
        if (!firstConfig) out.syms.push_back(alpha->id("|"));
        firstConfig = false;
        for (std::size_t p = 1; p <= ww.size(); ++p) {
            for (std::size_t i = 0; i < c.stack.size(); ++i) {
                if (c.stack[i] != p) continue;
                bool head = i + 1 == c.stack.size();
                std::string tok = head ? "[" + std::to_string(i + 1) + ":" +
                                             t.stateNames[c.state] + "]"
                                       : "[" + std::to_string(i + 1) + "]";
                out.syms.push_back(alpha->id(tok));
            }
            out.syms.push_back(alpha->id(t.inputAlphabet->token(ww.syms[p - 1])));
        }
    }
    return out;
}

namespace {

std::vector<bool> allLetters(const AlphabetRef& a) { return std::vector<bool>(a->size(), true); }

std::vector<bool> oneLetter(const AlphabetRef& a, SymbolId s) {
    std::vector<bool> v(a->size(), false);
    v[s] = true;
    return v;
}

struct PebbleBuilder {
    PebbleTransducer t;
    std::map<std::string, std::size_t> index;

    std::size_t state(const std::string& name, std::vector<SymbolId> output = {}) {
        auto it = index.find(name);
        if (it != index.end()) return it->second;
        std::size_t id = t.stateNames.size();
        index.emplace(name, id);
        t.stateNames.push_back(name);
        t.stateOutput.push_back(std::move(output));
        return id;
    }
    void rule(std::size_t src, std::vector<bool> letters, GuardExpr g, std::size_t dst,
              PebbleAction a) {
        t.rules.push_back(GuardedRule{src, std::move(letters), std::move(g), dst, a});
    }
};

}  // namespace

PebbleTransducer pebbleFromSequential(const SequentialTransducer& seq) {
    PebbleBuilder b;
    b.t.inputAlphabet = seq.inputAlphabet;
    b.t.outputAlphabet = seq.outputAlphabet;
    b.t.maxPebbles = 1;
    b.t.emptyInputOutput = seq.endOfInput[seq.dfa.initial];

    std::size_t final = b.state("final");
    std::size_t start = b.state("run:" + std::to_string(seq.dfa.initial) + ":-");
    b.t.initial = start;
    b.t.final = final;

    std::size_t sigma = seq.inputAlphabet->size();
    // states that read the next letter, keyed by the reached dfa state
    std::vector<std::pair<std::size_t, std::size_t>> work{{start, seq.dfa.initial}};
    std::set<std::size_t> seen{start};
    for (std::size_t i = 0; i < work.size(); ++i) {
        auto [sid, q] = work[i];
        for (SymbolId a = 0; a < sigma; ++a) {
            std::size_t q2 = seq.dfa.step(q, a);
            const auto& outw = seq.transitionOutput[q * sigma + a];
            std::string key = std::to_string(q) + "." + std::to_string(a);
            std::size_t moveId = b.state("run:" + std::to_string(q2) + ":" + key, outw);
            std::vector<SymbolId> endOut = outw;
            endOut.insert(endOut.end(), seq.endOfInput[q2].begin(), seq.endOfInput[q2].end());
            std::size_t endId = b.state("end:" + std::to_string(q2) + ":" + key, endOut);

            b.rule(sid, oneLetter(seq.inputAlphabet, a), GuardExpr::atLast(1), endId,
                   PebbleAction::Stay);
            b.rule(sid, oneLetter(seq.inputAlphabet, a), GuardExpr::mkTrue(), moveId,
                   PebbleAction::MoveRight);
            b.rule(endId, allLetters(seq.inputAlphabet), GuardExpr::mkTrue(), final,
                   PebbleAction::Stay);
            if (seen.insert(moveId).second) work.push_back({moveId, q2});
        }
    }
    b.t.validate();
    return b.t;
}

PebbleTransducer pebbleSquaring(const AlphabetRef& alphabet) {
    SquaringSpec spec(alphabet);
    PebbleBuilder b;
    b.t.inputAlphabet = alphabet;
    b.t.outputAlphabet = spec.squaredAlphabet;
    b.t.maxPebbles = 2;

    std::size_t final = b.state("final");
    std::size_t start = b.state("start");
    std::size_t copyL = b.state("copyL");
    std::size_t scan0 = b.state("scan0");
    b.t.initial = start;
    b.t.final = final;

    b.rule(start, allLetters(alphabet), GuardExpr::mkTrue(), copyL, PebbleAction::Push);
    b.rule(copyL, allLetters(alphabet), GuardExpr::atFirst(2), scan0, PebbleAction::Stay);
    b.rule(copyL, allLetters(alphabet), GuardExpr::mkTrue(), copyL, PebbleAction::MoveLeft);

    GuardExpr eq12 = GuardExpr::conj(GuardExpr::le(1, 2), GuardExpr::le(2, 1));
    std::vector<std::size_t> scanFamily{scan0};
    std::vector<std::size_t> emit(alphabet->size() * 2), fin(alphabet->size() * 2);
    for (SymbolId a = 0; a < alphabet->size(); ++a)
        for (int u = 0; u < 2; ++u) {
            SymbolId tok = u ? spec.underlined(a) : spec.plain(a);
            emit[a * 2 + u] = b.state("em:" + alphabet->token(a) + ":" + std::to_string(u), {tok});
            fin[a * 2 + u] = b.state("end:" + alphabet->token(a) + ":" + std::to_string(u), {tok});
            scanFamily.push_back(emit[a * 2 + u]);
        }
    for (std::size_t s : scanFamily)
        for (SymbolId a = 0; a < alphabet->size(); ++a) {
            b.rule(s, oneLetter(alphabet, a), GuardExpr::conj(eq12, GuardExpr::atLast(2)),
                   fin[a * 2 + 1], PebbleAction::Pop);
            b.rule(s, oneLetter(alphabet, a), eq12, emit[a * 2 + 1], PebbleAction::MoveRight);
            b.rule(s, oneLetter(alphabet, a), GuardExpr::atLast(2), fin[a * 2 + 0],
                   PebbleAction::Pop);
            b.rule(s, oneLetter(alphabet, a), GuardExpr::mkTrue(), emit[a * 2 + 0],
                   PebbleAction::MoveRight);
        }
    for (SymbolId a = 0; a < alphabet->size(); ++a)
        for (int u = 0; u < 2; ++u) {
            b.rule(fin[a * 2 + u], allLetters(alphabet), GuardExpr::atLast(1), final,
                   PebbleAction::Stay);
            b.rule(fin[a * 2 + u], allLetters(alphabet), GuardExpr::mkTrue(), start,
                   PebbleAction::MoveRight);
        }
    b.t.validate();
    return b.t;
}

PebbleTransducer pebbleIteratedReverse(const IterRevSpec& spec) {
    const AlphabetRef& al = spec.alphabet;
    SymbolId sep = spec.separator;
    std::vector<bool> SEP = oneLetter(al, sep);
    std::vector<bool> OTH(al->size(), true);
    OTH[sep] = false;
    std::vector<bool> ALL = allLetters(al);

    PebbleBuilder b;
    b.t.inputAlphabet = al;
    b.t.outputAlphabet = al;
    b.t.maxPebbles = 1;

    std::size_t final = b.state("final");
    std::size_t seek = b.state("seek");
    std::size_t sepEmit = b.state("sepEmit", {sep});
    std::size_t backEntry = b.state("backEntry");
    std::size_t returnR = b.state("returnR");
    std::size_t sepEnd = b.state("sepEnd", {sep});
    b.t.initial = seek;
    b.t.final = final;

    std::vector<std::size_t> em(al->size()), emFirst(al->size()), solo(al->size());
    for (SymbolId a = 0; a < al->size(); ++a) {
        if (a == sep) continue;
        em[a] = b.state("em:" + al->token(a), {a});
        emFirst[a] = b.state("emFirst:" + al->token(a), {a});
        solo[a] = b.state("solo:" + al->token(a), {a});
    }

    GuardExpr first1 = GuardExpr::atFirst(1);
    GuardExpr last1 = GuardExpr::atLast(1);

    for (std::size_t s : {seek, sepEmit}) {
        b.rule(s, SEP, GuardExpr::conj(first1, last1), sepEnd, PebbleAction::Stay);
        b.rule(s, SEP, first1, sepEmit, PebbleAction::MoveRight);
        // a separator anywhere else (also at the last position) first emits
        // the block to its left via the backwards walk
        b.rule(s, SEP, GuardExpr::mkTrue(), backEntry, PebbleAction::MoveLeft);
        for (SymbolId a = 0; a < al->size(); ++a) {
            if (a == sep) continue;
            b.rule(s, oneLetter(al, a), GuardExpr::conj(first1, last1), solo[a],
                   PebbleAction::Stay);
            b.rule(s, oneLetter(al, a), last1, em[a], PebbleAction::MoveLeft);
        }
        b.rule(s, OTH, GuardExpr::mkTrue(), seek, PebbleAction::MoveRight);
    }

    b.rule(backEntry, SEP, GuardExpr::mkTrue(), returnR, PebbleAction::MoveRight);
    for (SymbolId a = 0; a < al->size(); ++a) {
        if (a == sep) continue;
        b.rule(backEntry, oneLetter(al, a), first1, emFirst[a], PebbleAction::Stay);
        b.rule(backEntry, oneLetter(al, a), GuardExpr::mkTrue(), em[a], PebbleAction::MoveLeft);
    }

    for (SymbolId x = 0; x < al->size(); ++x) {
        if (x == sep) continue;
        b.rule(em[x], SEP, GuardExpr::mkTrue(), returnR, PebbleAction::MoveRight);
        for (SymbolId a = 0; a < al->size(); ++a) {
            if (a == sep) continue;
            b.rule(em[x], oneLetter(al, a), first1, emFirst[a], PebbleAction::Stay);
            b.rule(em[x], oneLetter(al, a), GuardExpr::mkTrue(), em[a], PebbleAction::MoveLeft);
        }
        b.rule(emFirst[x], ALL, GuardExpr::mkTrue(), returnR, PebbleAction::MoveRight);
        b.rule(solo[x], ALL, GuardExpr::mkTrue(), final, PebbleAction::Stay);
    }

    b.rule(returnR, SEP, last1, sepEnd, PebbleAction::Stay);
    b.rule(returnR, SEP, GuardExpr::mkTrue(), sepEmit, PebbleAction::MoveRight);
    b.rule(returnR, OTH, last1, final, PebbleAction::Stay);
    b.rule(returnR, OTH, GuardExpr::mkTrue(), returnR, PebbleAction::MoveRight);

    b.rule(sepEnd, ALL, GuardExpr::mkTrue(), final, PebbleAction::Stay);

    b.t.emptyInputOutput = {};
    b.t.validate();
    return b.t;
}

Word PebbleComposition::eval(const Word& w) const {
    return pebbleEval(outer, pebbleEval(inner, w));
}

PebbleComposition pebbleComposeRuntime(const PebbleTransducer& outer,
                                       const PebbleTransducer& inner) {
    if (!inner.outputAlphabet->sameLetterSet(*outer.inputAlphabet))
        throw AlphabetMismatchError("pebble composition: alphabets do not chain");
    return PebbleComposition{outer, inner};
}

PebbleValidationReport pebbleValidate(const PebbleTransducer& t) {
    PebbleValidationReport rep;
    try {
        t.validate();
    } catch (const PolyregError& e) {
        rep.ok = false;
        rep.problems.push_back(e.what());
        return rep;
    }
    // Overlap check: enumerate stacks over a small virtual word and warn when
    // two rules of the same state could both fire (first match applies).
    if (t.maxPebbles <= 3) {
        std::size_t n = t.maxPebbles + 2;
        std::vector<std::vector<std::size_t>> stacks;
        std::vector<std::size_t> cur;
        std::function<void()> gen = [&]() {
            if (!cur.empty()) stacks.push_back(cur);
            if (cur.size() == t.maxPebbles) return;
            for (std::size_t p = 1; p <= n; ++p) {
                cur.push_back(p);
                gen();
                cur.pop_back();
            }
        };
        gen();
        for (std::size_t i = 0; i < t.rules.size(); ++i)
            for (std::size_t j = i + 1; j < t.rules.size(); ++j) {
                const auto& a = t.rules[i];
                const auto& c = t.rules[j];
                if (a.sourceState != c.sourceState) continue;
                bool lettersMeet = false;
                for (std::size_t s = 0; s < a.letters.size(); ++s)
                    if (a.letters[s] && c.letters[s]) lettersMeet = true;
                if (!lettersMeet) continue;
                for (const auto& st : stacks) {
                    if (evalGuard(a.guard, st, n, {true, true}) &&
                        evalGuard(c.guard, st, n, {true, true})) {
                        rep.overlapWarnings.push_back(
                            "rules " + std::to_string(i) + " and " + std::to_string(j) +
                            " of state " + t.stateNames[a.sourceState] +
                            " overlap; first match applies");
                        break;
                    }
                }
            }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Crossing types
// ---------------------------------------------------------------------------

bool CrossingType::operator<(const CrossingType& o) const {
    auto key = [](const CrossingType& c) {
        std::vector<std::size_t> k{c.numStates, c.marks.first ? 1u : 0u, c.marks.last ? 1u : 0u};
        for (const auto& b : c.behavior) {
            k.push_back(static_cast<std::size_t>(b.kind));
            k.push_back(b.kind == CrossingOutcome::Kind::Exit ? b.state : 0);
            k.push_back(b.kind == CrossingOutcome::Kind::Exit && b.exitRight ? 1 : 0);
        }
        return k;
    };
    return key(*this) < key(o);
}

CrossingType crossingType(const PebbleTransducer& t, const Word& partial, PartialMarks marks) {
    if (t.maxPebbles != 1) throw PolyregError("crossing types require a 1-pebble transducer");
    if (partial.empty()) throw PolyregError("crossing types need a nonempty partial input");
    Word w = rebaseWord(partial, t.inputAlphabet);
    std::size_t n = w.size();

    CrossingType ct;
    ct.numStates = t.numStates();
    ct.marks = marks;
    ct.behavior.resize(t.numStates() * 2);

    for (std::size_t q = 0; q < t.numStates(); ++q)
        for (int side = 0; side < 2; ++side) {
            PebbleConfig c{q, {side == 0 ? std::size_t(1) : n}};
            CrossingOutcome out;
            std::set<std::pair<std::size_t, std::size_t>> visited;
            for (;;) {
                if (c.state == t.final) {
                    out.kind = CrossingOutcome::Kind::Accept;
                    break;
                }
                if (!visited.insert({c.state, c.stack[0]}).second) {
                    out.kind = CrossingOutcome::Kind::Reject;  // cycle
                    break;
                }
                SymbolId label = w.syms[c.stack[0] - 1];
                const GuardedRule* hit = nullptr;
                for (const auto& r : t.rules) {
                    if (r.sourceState != c.state || !r.letters[label]) continue;
                    if (!evalGuard(r.guard, c.stack, n, marks)) continue;
                    hit = &r;
                    break;
                }
                if (!hit) {
                    out.kind = CrossingOutcome::Kind::Reject;  // stuck
                    break;
                }
                if (hit->action == PebbleAction::Push || hit->action == PebbleAction::Pop) {
                    out.kind = CrossingOutcome::Kind::Reject;  // undefined when k = 1
                    break;
                }
                std::size_t pos = c.stack[0];
                if (hit->action == PebbleAction::MoveLeft) {
                    if (pos == 1) {
                        out = {CrossingOutcome::Kind::Exit, hit->targetState, false};
                        break;
                    }
                    --pos;
                } else if (hit->action == PebbleAction::MoveRight) {
                    if (pos == n) {
                        out = {CrossingOutcome::Kind::Exit, hit->targetState, true};
                        break;
                    }
                    ++pos;
                }
                c.state = hit->targetState;
                c.stack[0] = pos;
            }
            ct.behavior[q * 2 + side] = out;
        }
    return ct;
}

CrossingType crossingIdentity(std::size_t numStates) {
    CrossingType ct;
    ct.numStates = numStates;
    ct.behavior.resize(numStates * 2);
    for (std::size_t q = 0; q < numStates; ++q) {
        ct.behavior[q * 2 + 0] = {CrossingOutcome::Kind::Exit, q, true};
        ct.behavior[q * 2 + 1] = {CrossingOutcome::Kind::Exit, q, false};
    }
    return ct;
}

CrossingType crossingCompose(const CrossingType& a, const CrossingType& b) {
    if (a.numStates != b.numStates) throw PolyregError("crossing compose: state count mismatch");
    if (a.marks.last || b.marks.first)
        throw PolyregError("crossing compose: incompatible annotations");
    std::size_t nq = a.numStates;
    CrossingType ct;
    ct.numStates = nq;
    ct.marks = {a.marks.first, b.marks.last};
    ct.behavior.resize(nq * 2);

    std::size_t cap = 4 * nq + 2;
    for (std::size_t q = 0; q < nq; ++q)
        for (int side = 0; side < 2; ++side) {
            bool inA = side == 0;
            std::size_t st = q;
            int entry = side;  // 0 = entered from the left
            CrossingOutcome out;
            out.kind = CrossingOutcome::Kind::Reject;
            for (std::size_t steps = 0; steps <= cap; ++steps) {
                const CrossingType& comp = inA ? a : b;
                CrossingOutcome o = comp.behavior[st * 2 + entry];
                if (o.kind != CrossingOutcome::Kind::Exit) {
                    out = o;
                    break;
                }
                if (inA && o.exitRight) {
                    inA = false;
                    st = o.state;
                    entry = 0;
                    continue;
                }
                if (!inA && !o.exitRight) {
                    inA = true;
                    st = o.state;
                    entry = 1;
                    continue;
                }
                out = o;  // leaves the concatenation
                break;
            }
            ct.behavior[q * 2 + side] = out;
        }
    return ct;
}

std::pair<MonoidRef, LetterHom> crossingSemigroup(const PebbleTransducer& t, std::size_t cap) {
    if (t.maxPebbles != 1) throw PolyregError("crossing semigroup requires a 1-pebble transducer");
    std::map<CrossingType, std::size_t> index;
    std::vector<CrossingType> elems;
    auto intern = [&](const CrossingType& c) {
        auto it = index.find(c);
        if (it != index.end()) return it->second;
        std::size_t id = elems.size();
        if (id >= cap) throw PolyregError("crossing semigroup generation cap exceeded");
        index.emplace(c, id);
        elems.push_back(c);
        return id;
    };

    std::size_t idElem = intern(crossingIdentity(t.numStates()));
    std::vector<std::size_t> letterElem(t.inputAlphabet->size());
    for (SymbolId a = 0; a < t.inputAlphabet->size(); ++a) {
        Word la{t.inputAlphabet, {a}};
        letterElem[a] = intern(crossingType(t, la, {false, false}));
    }

    for (std::size_t cur = 0; cur < elems.size(); ++cur)
        for (SymbolId a = 0; a < t.inputAlphabet->size(); ++a)
            intern(crossingCompose(elems[cur], elems[letterElem[a]]));

    std::size_t m = elems.size();
    std::vector<std::size_t> table(m * m);
    for (std::size_t x = 0; x < m; ++x)
        for (std::size_t y = 0; y < m; ++y) {
            CrossingType prod = x == idElem  ? elems[y]
                                : y == idElem ? elems[x]
                                              : crossingCompose(elems[x], elems[y]);
            auto it = index.find(prod);
            if (it == index.end())
                throw PolyregError("crossing semigroup not closed under composition");
            table[x * m + y] = it->second;
        }
    std::vector<std::string> names(m);
    for (std::size_t e = 0; e < m; ++e) names[e] = "c" + std::to_string(e);
    auto monoid = std::make_shared<FiniteMonoid>(std::move(names), std::move(table), idElem);
    LetterHom hom{t.inputAlphabet, monoid, letterElem};
    return {monoid, hom};
}

}  // namespace polyreg
