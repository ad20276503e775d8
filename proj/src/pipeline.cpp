#include "polyreg/pipeline.hpp"

#include <algorithm>
#include <functional>

#include "polyreg/machine_builder.hpp"

namespace polyreg {

const AlphabetRef& Stage::inputAlphabet() const {
    if (auto* s = std::get_if<SequentialTransducer>(&v)) return s->inputAlphabet;
    if (auto* s = std::get_if<SquaringSpec>(&v)) return s->alphabet;
    return std::get<IterRevSpec>(v).alphabet;
}

const AlphabetRef& Stage::outputAlphabet() const {
    if (auto* s = std::get_if<SequentialTransducer>(&v)) return s->outputAlphabet;
    if (auto* s = std::get_if<SquaringSpec>(&v)) return s->squaredAlphabet;
    return std::get<IterRevSpec>(v).alphabet;
}

Word pipelineEval(const Pipeline& p, const Word& w) {
    if (p.stages.empty()) throw PolyregError("pipeline must have at least one stage");
    Word cur = rebaseWord(w, p.inputAlphabet());
    for (const auto& st : p.stages) {
        cur = rebaseWord(cur, st.inputAlphabet());
        if (auto* s = std::get_if<SequentialTransducer>(&st.v))
            cur = seqEval(*s, cur);
        else if (auto* s = std::get_if<SquaringSpec>(&st.v))
            cur = squaringEval(*s, cur);
        else
            cur = iteratedReverseEval(std::get<IterRevSpec>(st.v), cur);
    }
    return cur;
}

PipelineReport pipelineValidate(const Pipeline& p) {
    PipelineReport r;
    if (p.stages.empty()) {
        r.ok = false;
        r.message = "pipeline has no stages";
        return r;
    }
    for (std::size_t i = 0; i + 1 < p.stages.size(); ++i) {
        if (!p.stages[i].outputAlphabet()->sameLetterSet(*p.stages[i + 1].inputAlphabet())) {
            r.ok = false;
            r.errorIndex = i + 1;
            r.message = "alphabet mismatch entering stage " + std::to_string(i + 1);
            return r;
        }
    }
    for (const auto& st : p.stages) {
        if (auto* s = std::get_if<SequentialTransducer>(&st.v)) {
            if (!seqIsCounterFree(*s)) {
                r.firstOrder = false;
                break;
            }
        }
    }
    return r;
}

Pipeline composePipelines(const Pipeline& first, const Pipeline& then) {
    if (!first.outputAlphabet()->sameLetterSet(*then.inputAlphabet()))
        throw AlphabetMismatchError("composePipelines: alphabets do not chain");
    Pipeline p = first;
    p.stages.insert(p.stages.end(), then.stages.begin(), then.stages.end());
    return p;
}

Pipeline pipelineFromStage(Stage s) {
    Pipeline p;
    p.stages.push_back(std::move(s));
    return p;
}

std::string freshTagToken(const std::vector<AlphabetRef>& avoid) {
    std::size_t maxRun = 0;
    for (const auto& a : avoid)
        for (const auto& t : a->tokens()) {
            std::size_t run = 0;
            while (run < t.size() && t[run] == '~') ++run;
            maxRun = std::max(maxRun, run);
        }
    return std::string(maxRun + 1, '~');
}

std::string freshSeparatorToken(const std::vector<AlphabetRef>& avoid) {
    auto taken = [&](const std::string& tok) {
        for (const auto& a : avoid)
            if (a->contains(tok)) return true;
        return false;
    };
    for (const char* cand : {"|", ",", "#", ";", "^", "@", "%", "!", "?"})
        if (!taken(cand)) return cand;
    std::string t = freshTagToken(avoid);
    while (taken(t + "|")) t += '~';
    return t + "|";
}

AlphabetRef tagAlphabet(const AlphabetRef& base, const std::string& tag) {
    std::vector<std::string> toks;
    toks.reserve(base->size());
    for (const auto& t : base->tokens()) toks.push_back(tag + t);
    return Alphabet::make(std::move(toks));
}

AlphabetRef unionAlphabet(const AlphabetRef& a, const AlphabetRef& b) {
    std::vector<std::string> toks = a->tokens();
    for (const auto& t : b->tokens())
        if (!a->contains(t)) toks.push_back(t);
    return Alphabet::make(std::move(toks));
}

AlphabetRef extendAlphabet(const AlphabetRef& a, const std::vector<std::string>& extraTokens) {
    std::vector<std::string> toks = a->tokens();
    for (const auto& t : extraTokens)
        if (std::find(toks.begin(), toks.end(), t) == toks.end()) toks.push_back(t);
    return Alphabet::make(std::move(toks));
}

Pipeline pipelineReverse(const AlphabetRef& alphabet) {
    std::string sep = freshSeparatorToken({alphabet});
    AlphabetRef wide = extendAlphabet(alphabet, {sep});
    Pipeline p;
    p.stages.push_back(Stage{seqIdentityInto(alphabet, wide)});
    p.stages.push_back(Stage{IterRevSpec(wide, sep)});
    std::vector<std::vector<SymbolId>> proj(wide->size());
    for (SymbolId s = 0; s < wide->size(); ++s) {
        const auto& tok = wide->token(s);
        if (tok != sep) proj[s] = {alphabet->id(tok)};
    }
    p.stages.push_back(Stage{seqLetterMap(wide, alphabet, proj)});
    return p;
}

Pipeline rationalFromBidirectional(const SequentialTransducer& left,
                                   const SequentialTransducer& right) {
    if (!right.outputAlphabet->sameLetterSet(*left.inputAlphabet))
        throw AlphabetMismatchError("rational_from_bidirectional: alphabets do not chain");
    Pipeline p = pipelineReverse(right.inputAlphabet);
    p.stages.push_back(Stage{right});
    Pipeline rev2 = pipelineReverse(right.outputAlphabet);
    p.stages.insert(p.stages.end(), rev2.stages.begin(), rev2.stages.end());
    p.stages.push_back(Stage{left});
    return p;
}

namespace {

// Annotated alphabet: one token per (base letter, annotation index).
struct Annotated {
    AlphabetRef alphabet;
    int annCount = 0;

    SymbolId enc(SymbolId base, int ann) const {
        return static_cast<SymbolId>(base * annCount + ann);
    }
    SymbolId baseOf(SymbolId sym) const { return sym / annCount; }
    int annOf(SymbolId sym) const { return static_cast<int>(sym % annCount); }
};

Annotated makeAnnotated(const AlphabetRef& base, int annCount) {
    std::vector<std::string> toks;
    toks.reserve(base->size() * annCount);
    for (const auto& t : base->tokens())
        for (int k = 0; k < annCount; ++k) toks.push_back(t + "#" + std::to_string(k));
    Annotated a;
    a.alphabet = Alphabet::make(std::move(toks));
    a.annCount = annCount;
    return a;
}

// Bidirectional rational function: reverse, an annotating sweep (which sees
// the word right-to-left), reverse back, then an emitting sweep that reads
// each letter together with its right-context annotation.
std::vector<Stage> annotateRational(
    const AlphabetRef& input, int annCount, const std::string& rightInit,
    const std::function<std::pair<std::string, int>(const std::string&, SymbolId)>& rightStep,
    const AlphabetRef& output, const std::string& leftInit,
    const std::function<SeqStep(const std::string&, SymbolId, int)>& leftStep,
    const std::function<std::vector<SymbolId>(const std::string&)>& leftEnd) {
    Annotated ann = makeAnnotated(input, annCount);
    SequentialTransducer annotator = buildSequential(
        input, ann.alphabet, rightInit,
        [&](const std::string& st, SymbolId a) {
            auto [next, k] = rightStep(st, a);
            return SeqStep{next, {ann.enc(a, k)}};
        },
        [](const std::string&) { return std::vector<SymbolId>{}; });
    SequentialTransducer emitter = buildSequential(
        ann.alphabet, output, leftInit,
        [&](const std::string& st, SymbolId sym) {
            return leftStep(st, ann.baseOf(sym), ann.annOf(sym));
        },
        leftEnd);

    std::vector<Stage> stages;
    Pipeline r1 = pipelineReverse(input);
    stages.insert(stages.end(), r1.stages.begin(), r1.stages.end());
    stages.push_back(Stage{annotator});
    Pipeline r2 = pipelineReverse(ann.alphabet);
    stages.insert(stages.end(), r2.stages.begin(), r2.stages.end());
    stages.push_back(Stage{emitter});
    return stages;
}

std::string encodeStateSet(const std::vector<bool>& s) {
    std::string e;
    e.reserve(s.size());
    for (bool b : s) e += b ? '1' : '0';
    return e;
}

std::vector<bool> decodeStateSet(const std::string& e) {
    std::vector<bool> s(e.size());
    for (std::size_t i = 0; i < e.size(); ++i) s[i] = e[i] == '1';
    return s;
}

Dfa rebaseDfa(const Dfa& d, const AlphabetRef& target) {
    if (*d.alphabet == *target) return d;
    if (!d.alphabet->sameLetterSet(*target))
        throw AlphabetMismatchError("dfa alphabet does not match");
    Dfa out = d;
    out.alphabet = target;
    out.delta.assign(d.numStates() * target->size(), 0);
    for (std::size_t q = 0; q < d.numStates(); ++q)
        for (SymbolId a = 0; a < target->size(); ++a)
            out.delta[q * target->size() + a] = d.step(q, d.alphabet->id(target->token(a)));
    out.validate();
    return out;
}

Dfa complementDfa(const Dfa& d) {
    Dfa out = d;
    for (std::size_t q = 0; q < out.numStates(); ++q) out.accepting[q] = !out.accepting[q];
    return out;
}

// Accepts words containing no symbol from `bad`.
Dfa avoidsDfa(const AlphabetRef& alphabet, const std::vector<bool>& bad) {
    Dfa d;
    d.alphabet = alphabet;
    d.stateNames = {"clean", "dirty"};
    d.initial = 0;
    d.accepting = {true, false};
    d.delta.resize(2 * alphabet->size());
    for (SymbolId a = 0; a < alphabet->size(); ++a) {
        d.delta[a] = bad[a] ? 1 : 0;
        d.delta[alphabet->size() + a] = 1;
    }
    return d;
}

std::vector<SymbolId> mapWordTokens(const std::vector<SymbolId>& w, const AlphabetRef& from,
                                    const AlphabetRef& to,
                                    const std::string& prefix = std::string()) {
    std::vector<SymbolId> out;
    out.reserve(w.size());
    for (auto a : w) out.push_back(to->id(prefix + from->token(a)));
    return out;
}

}  // namespace

std::vector<Stage> recolorByMembership(const Dfa& Lin, const std::string& tag) {
    const AlphabetRef& sigma = Lin.alphabet;
    AlphabetRef tagged = tagAlphabet(sigma, tag);
    AlphabetRef out = unionAlphabet(sigma, tagged);
    const Dfa& L = Lin;
    std::size_t n = L.numStates();

    // Right sweep: S = states from which the already-seen suffix accepts.
    std::string init = encodeStateSet(L.accepting);
    auto rightStep = [&L, n](const std::string& st, SymbolId a) {
        std::vector<bool> S = decodeStateSet(st);
        std::vector<bool> S2(n, false);
        for (std::size_t q = 0; q < n; ++q)
            if (S[L.step(q, a)]) S2[q] = true;
        int bit = S2[L.initial] ? 1 : 0;
        return std::make_pair(encodeStateSet(S2), bit);
    };
    auto leftStep = [sigma, out, tag](const std::string& st, SymbolId base, int ann) {
        std::string mode = st;
        if (mode == "s") mode = ann ? "k" : "t";
        SymbolId o = mode == "k" ? out->id(sigma->token(base)) : out->id(tag + sigma->token(base));
        return SeqStep{mode, {o}};
    };
    auto leftEnd = [](const std::string&) { return std::vector<SymbolId>{}; };
    return annotateRational(sigma, 2, init, rightStep, out, "s", leftStep, leftEnd);
}

// ---------------------------------------------------------------------------
// Domain extension (Sublemma if-identity): h^Delta agrees with h on Sigma*
// and is the identity on nonempty Delta*; empty input follows h.
// ---------------------------------------------------------------------------

namespace {

std::vector<Stage> extendSequential(const SequentialTransducer& t, const AlphabetRef& delta) {
    AlphabetRef inU = unionAlphabet(t.inputAlphabet, delta);
    AlphabetRef outU = unionAlphabet(t.outputAlphabet, delta);
    std::size_t sigma = t.inputAlphabet->size();
    auto step = [&t, inU, outU, sigma, delta](const std::string& st, SymbolId a) {
        const std::string& tok = inU->token(a);
        bool isDelta = delta->contains(tok);
        std::string phase = st.substr(0, 1);
        std::size_t q = std::stoul(st.substr(2));
        if (isDelta) {
            std::string next = phase == "S" ? "D:" + std::to_string(q) : st;
            return SeqStep{next, {outU->id(tok)}};
        }
        SymbolId in = t.inputAlphabet->id(tok);
        std::vector<SymbolId> outw =
            mapWordTokens(t.transitionOutput[q * sigma + in], t.outputAlphabet, outU);
        return SeqStep{"Q:" + std::to_string(t.dfa.step(q, in)), std::move(outw)};
    };
    auto end = [&t, outU](const std::string& st) {
        if (st.substr(0, 1) == "D") return std::vector<SymbolId>{};
        std::size_t q = std::stoul(st.substr(2));
        return mapWordTokens(t.endOfInput[q], t.outputAlphabet, outU);
    };
    SequentialTransducer e = buildSequential(inU, outU, "S:" + std::to_string(t.dfa.initial),
                                             step, end);
    return {Stage{e}};
}

std::vector<Stage> extendSquaring(const SquaringSpec& s, const AlphabetRef& delta) {
    AlphabetRef inU = unionAlphabet(s.alphabet, delta);
    SquaringSpec bigSq(inU);
    const AlphabetRef& sqU = bigSq.squaredAlphabet;
    SquaringSpec plainSq(s.alphabet);
    AlphabetRef outU = unionAlphabet(plainSq.squaredAlphabet, delta);

    // Letters of the squared word that witness a Delta letter in the input.
    std::vector<bool> bad(sqU->size(), false);
    for (SymbolId a = 0; a < sqU->size(); ++a) {
        SymbolId base = a < inU->size() ? a : static_cast<SymbolId>(a - inU->size());
        if (delta->contains(inU->token(base))) bad[a] = true;
    }
    std::string tag = freshTagToken({sqU, outU});
    std::vector<Stage> stages;
    stages.push_back(Stage{bigSq});
    auto recolor = recolorByMembership(avoidsDfa(sqU, bad), tag);
    stages.insert(stages.end(), recolor.begin(), recolor.end());

    AlphabetRef mixed = unionAlphabet(sqU, tagAlphabet(sqU, tag));
    std::vector<std::vector<SymbolId>> map(mixed->size());
    for (SymbolId a = 0; a < mixed->size(); ++a) {
        std::string tok = mixed->token(a);
        bool isTagged = tok.compare(0, tag.size(), tag) == 0;
        if (isTagged) tok = tok.substr(tag.size());
        SymbolId sq = sqU->id(tok);
        bool underlined = sq >= inU->size();
        std::string base = underlined ? inU->token(sq - inU->size()) : inU->token(sq);
        if (!isTagged) {
            // Pure-Sigma squared word: keep Sigma letters with their marks.
            if (!delta->contains(base))
                map[a] = {outU->id(underlined ? underlineToken(base) : base)};
        } else {
            // Tagged: recover the original input from the underlined spine.
            if (underlined) map[a] = {outU->id(base)};
        }
    }
    stages.push_back(Stage{seqLetterMap(mixed, outU, map)});
    return stages;
}

std::vector<Stage> extendIterRev(const IterRevSpec& s, const AlphabetRef& delta) {
    AlphabetRef inU = unionAlphabet(s.alphabet, delta);
    const std::string sepTok = s.alphabet->token(s.separator);
    SymbolId sepU = inU->id(sepTok);

    // Classifying sweep: pure Sigma stays put, pure Delta gets the separator
    // interspersed, mixed words map to the empty word.
    auto rightStep = [inU, delta](const std::string& st, SymbolId a) {
        bool sawS = st[0] == '1' || !delta->contains(inU->token(a));
        bool sawD = st[1] == '1' || delta->contains(inU->token(a));
        std::string next{sawS ? '1' : '0', sawD ? '1' : '0'};
        int ann = (sawS ? 1 : 0) + (sawD ? 2 : 0);
        return std::make_pair(next, ann);
    };
    auto leftStep = [inU, sepU](const std::string& st, SymbolId base, int ann) {
        std::string mode = st;
        if (mode == "s") mode = ann == 1 ? "A" : (ann == 2 ? "d" : "M");
        if (mode == "A") return SeqStep{"A", {base}};
        if (mode == "M") return SeqStep{"M", {}};
        if (mode == "d") return SeqStep{"D", {base}};  // first Delta letter
        return SeqStep{"D", {sepU, base}};
    };
    auto leftEnd = [](const std::string&) { return std::vector<SymbolId>{}; };

    std::vector<Stage> stages =
        annotateRational(inU, 4, "00", rightStep, inU, "s", leftStep, leftEnd);
    stages.push_back(Stage{IterRevSpec(inU, sepTok)});

    std::vector<bool> bad(inU->size(), false);
    for (SymbolId a = 0; a < inU->size(); ++a)
        if (delta->contains(inU->token(a))) bad[a] = true;
    std::string tag = freshTagToken({inU});
    auto recolor = recolorByMembership(avoidsDfa(inU, bad), tag);
    stages.insert(stages.end(), recolor.begin(), recolor.end());

    AlphabetRef mixed = unionAlphabet(inU, tagAlphabet(inU, tag));
    std::vector<std::vector<SymbolId>> map(mixed->size());
    for (SymbolId a = 0; a < mixed->size(); ++a) {
        std::string tok = mixed->token(a);
        bool isTagged = tok.compare(0, tag.size(), tag) == 0;
        if (isTagged) tok = tok.substr(tag.size());
        if (isTagged && tok == sepTok) continue;  // drop separators of Delta words
        map[a] = {inU->id(tok)};
    }
    stages.push_back(Stage{seqLetterMap(mixed, inU, map)});
    return stages;
}

}  // namespace

Pipeline combDomainExtend(const Pipeline& h, const AlphabetRef& delta) {
    for (const auto& st : h.stages) {
        if (!delta->disjointFrom(*st.inputAlphabet()) || !delta->disjointFrom(*st.outputAlphabet()))
            throw PolyregError("comb_domain_extend: delta overlaps a stage alphabet");
    }
    Pipeline out;
    for (const auto& st : h.stages) {
        std::vector<Stage> ext;
        if (auto* s = std::get_if<SequentialTransducer>(&st.v))
            ext = extendSequential(*s, delta);
        else if (auto* s = std::get_if<SquaringSpec>(&st.v))
            ext = extendSquaring(*s, delta);
        else
            ext = extendIterRev(std::get<IterRevSpec>(st.v), delta);
        out.stages.insert(out.stages.end(), ext.begin(), ext.end());
    }
    return out;
}

Pipeline combIfThenElse(const Dfa& Lraw, const Pipeline& f, const Pipeline& g) {
    if (!f.inputAlphabet()->sameLetterSet(*g.inputAlphabet()) ||
        !f.outputAlphabet()->sameLetterSet(*g.outputAlphabet()) ||
        !Lraw.alphabet->sameLetterSet(*f.inputAlphabet()))
        throw AlphabetMismatchError("comb_if_then_else: alphabet constraints violated");

    const AlphabetRef& sigma = f.inputAlphabet();
    const AlphabetRef& gamma = f.outputAlphabet();
    Dfa L = rebaseDfa(Lraw, sigma);

    // The epsilon input cannot be recolored; it always follows the first
    // branch, so make the first branch the one that owns epsilon.
    if (!dfaAccepts(L, Word{sigma, {}})) return combIfThenElse(complementDfa(L), g, f);

    std::vector<AlphabetRef> scope{sigma, gamma};
    for (const auto& st : f.stages) {
        scope.push_back(st.inputAlphabet());
        scope.push_back(st.outputAlphabet());
    }
    for (const auto& st : g.stages) {
        scope.push_back(st.inputAlphabet());
        scope.push_back(st.outputAlphabet());
    }
    std::string tag = freshTagToken(scope);
    AlphabetRef sigmaBar = tagAlphabet(sigma, tag);
    AlphabetRef gammaBar = tagAlphabet(gamma, tag);

    Pipeline p;
    auto recolor = recolorByMembership(L, tag);
    p.stages.insert(p.stages.end(), recolor.begin(), recolor.end());

    Pipeline fExt = combDomainExtend(f, sigmaBar);
    p.stages.insert(p.stages.end(), fExt.stages.begin(), fExt.stages.end());

    // Swap: untag the not-in-L copy, tag the already-computed f output.
    AlphabetRef swapIn = fExt.outputAlphabet();
    AlphabetRef swapOut = unionAlphabet(sigma, gammaBar);
    std::vector<std::vector<SymbolId>> swapMap(swapIn->size());
    for (SymbolId a = 0; a < swapIn->size(); ++a) {
        const std::string& tok = swapIn->token(a);
        if (tok.compare(0, tag.size(), tag) == 0)
            swapMap[a] = {swapOut->id(tok.substr(tag.size()))};
        else
            swapMap[a] = {swapOut->id(tag + tok)};
    }
    p.stages.push_back(Stage{seqLetterMap(swapIn, swapOut, swapMap)});

    Pipeline gExt = combDomainExtend(g, gammaBar);
    // Chain: swap emits sigma + gammaBar; g's extension starts there.
    p.stages.insert(p.stages.end(), gExt.stages.begin(), gExt.stages.end());

    AlphabetRef stripIn = gExt.outputAlphabet();
    std::vector<std::vector<SymbolId>> stripMap(stripIn->size());
    for (SymbolId a = 0; a < stripIn->size(); ++a) {
        const std::string& tok = stripIn->token(a);
        if (tok.compare(0, tag.size(), tag) == 0)
            stripMap[a] = {gamma->id(tok.substr(tag.size()))};
        else
            stripMap[a] = {gamma->id(tok)};
    }
    p.stages.push_back(Stage{seqLetterMap(stripIn, gamma, stripMap)});
    return p;
}

// ---------------------------------------------------------------------------
// Pairwise concatenation (Sublemma poly-cat): w |-> f(w) g(w).
// The word is duplicated into "f-side marker red-side"; the f stages run on
// the black part, the g stages on the red part, and a final sweep strips the
// scaffolding.
// ---------------------------------------------------------------------------

namespace {

enum class Zone { Black, Marker, Red };

struct ZoneView {
    // classify each symbol of a squared alphabet
    const AlphabetRef& sq;
    std::size_t baseSize;
    std::function<Zone(const std::string&)> zoneOfBase;

    bool underlined(SymbolId a) const { return a >= baseSize; }
    std::string baseTok(SymbolId a) const {
        return underlined(a) ? sq->token(a).substr(1) : sq->token(a);
    }
    Zone zone(SymbolId a) const { return zoneOfBase(baseTok(a)); }
};

char zoneChar(Zone z) { return z == Zone::Black ? 'B' : (z == Zone::Marker ? 'M' : 'R'); }

// Annotate every letter of a squared word with the zone of its copy's
// underline when that underline lies at or to the right of the letter.
// Copies here are copies of a word shaped black* marker red*.
std::vector<Stage> copyZoneCleanup(
    const SquaringSpec& bigSq, const ZoneView& view, const AlphabetRef& output,
    const std::function<std::vector<SymbolId>(Zone copyZone, SymbolId sqSym)>& emit) {
    const AlphabetRef& sqU = bigSq.squaredAlphabet;
    // annotations: 0 = unknown, 1 = B, 2 = M, 3 = R
    auto rightStep = [view](const std::string& st, SymbolId a) {
        char undZone = st[0];
        char prev = st[1];
        Zone z = view.zone(a);
        bool boundary = prev == '-' || ((z == Zone::Red || z == Zone::Marker) &&
                                        (prev == 'B' || prev == 'M'));
        if (boundary) undZone = '0';
        if (view.underlined(a)) undZone = zoneChar(z);
        int ann = undZone == 'B' ? 1 : (undZone == 'M' ? 2 : (undZone == 'R' ? 3 : 0));
        std::string next{undZone, zoneChar(z)};
        return std::make_pair(next, ann);
    };
    auto leftStep = [view, &emit](const std::string& st, SymbolId a, int ann) {
        char undZone = st[0];
        char prev = st[1];
        Zone z = view.zone(a);
        bool boundary = prev == '-' || ((prev == 'R' || prev == 'M') &&
                                        (z == Zone::Black || z == Zone::Marker));
        if (boundary) undZone = '0';
        if (view.underlined(a)) undZone = zoneChar(z);
        char copyZone = undZone != '0'
                            ? undZone
                            : (ann == 1 ? 'B' : (ann == 2 ? 'M' : (ann == 3 ? 'R' : '0')));
        std::vector<SymbolId> out;
        if (copyZone == 'B')
            out = emit(Zone::Black, a);
        else if (copyZone == 'M')
            out = emit(Zone::Marker, a);
        else if (copyZone == 'R')
            out = emit(Zone::Red, a);
        return SeqStep{std::string{undZone, zoneChar(z)}, std::move(out)};
    };
    auto leftEnd = [](const std::string&) { return std::vector<SymbolId>{}; };
    return annotateRational(sqU, 4, "0-", rightStep, output, "0-", leftStep, leftEnd);
}

struct PairSides {
    AlphabetRef sigma;   // original input alphabet
    std::string marker;  // black/red divider
    std::string tag;     // red recoloring prefix
};

AlphabetRef sideUnion(const PairSides& ps, const AlphabetRef& black, const AlphabetRef& red) {
    AlphabetRef withM = extendAlphabet(black, {ps.marker});
    return unionAlphabet(withM, tagAlphabet(red, ps.tag));
}

std::vector<Stage> blackSeq(const PairSides& ps, const SequentialTransducer& t) {
    AlphabetRef inU = sideUnion(ps, t.inputAlphabet, ps.sigma);
    AlphabetRef outU = sideUnion(ps, t.outputAlphabet, ps.sigma);
    std::size_t sw = t.inputAlphabet->size();
    auto step = [&t, inU, outU, sw, &ps](const std::string& st, SymbolId a) {
        const std::string& tok = inU->token(a);
        if (st == "R") return SeqStep{"R", {outU->id(tok)}};
        std::size_t q = std::stoul(st.substr(2));
        if (tok == ps.marker) {
            auto w = mapWordTokens(t.endOfInput[q], t.outputAlphabet, outU);
            w.push_back(outU->id(ps.marker));
            return SeqStep{"R", std::move(w)};
        }
        if (tok.compare(0, ps.tag.size(), ps.tag) == 0)
            return SeqStep{st, {outU->id(tok)}};  // stray red letter
        SymbolId in = t.inputAlphabet->id(tok);
        return SeqStep{"B:" + std::to_string(t.dfa.step(q, in)),
                       mapWordTokens(t.transitionOutput[q * sw + in], t.outputAlphabet, outU)};
    };
    auto end = [&t, outU](const std::string& st) {
        if (st == "R") return std::vector<SymbolId>{};
        return mapWordTokens(t.endOfInput[std::stoul(st.substr(2))], t.outputAlphabet, outU);
    };
    return {Stage{buildSequential(inU, outU, "B:" + std::to_string(t.dfa.initial), step, end)}};
}

std::vector<Stage> blackSquaring(const PairSides& ps, const SquaringSpec& s) {
    AlphabetRef inU = sideUnion(ps, s.alphabet, ps.sigma);
    SquaringSpec bigSq(inU);
    SquaringSpec plainSq(s.alphabet);
    AlphabetRef outU = sideUnion(ps, plainSq.squaredAlphabet, ps.sigma);

    ZoneView view{bigSq.squaredAlphabet, inU->size(), [ps](const std::string& b) {
                      if (b == ps.marker) return Zone::Marker;
                      if (b.compare(0, ps.tag.size(), ps.tag) == 0) return Zone::Red;
                      return Zone::Black;
                  }};
    auto emit = [&, outU](Zone copyZone, SymbolId sqSym) -> std::vector<SymbolId> {
        Zone z = view.zone(sqSym);
        std::string base = view.baseTok(sqSym);
        bool und = view.underlined(sqSym);
        if (copyZone == Zone::Black) {
            if (z == Zone::Black) return {outU->id(und ? underlineToken(base) : base)};
            return {};
        }
        if (copyZone == Zone::Marker) {
            if (z == Zone::Marker) return {outU->id(ps.marker)};
            if (z == Zone::Red) return {outU->id(base)};
            return {};
        }
        return {};
    };
    std::vector<Stage> stages;
    stages.push_back(Stage{bigSq});
    auto cleanup = copyZoneCleanup(bigSq, view, outU, emit);
    stages.insert(stages.end(), cleanup.begin(), cleanup.end());
    return stages;
}

std::vector<Stage> blackIterRev(const PairSides& ps, const IterRevSpec& s) {
    AlphabetRef u = sideUnion(ps, s.alphabet, ps.sigma);
    std::string sepTok = s.alphabet->token(s.separator);
    SymbolId sep = u->id(sepTok);
    SymbolId marker = u->id(ps.marker);
    auto isRed = [&ps, u](SymbolId a) {
        return u->token(a).compare(0, ps.tag.size(), ps.tag) == 0;
    };

    auto preStep = [u, sep, marker, isRed](const std::string& st, SymbolId a) -> SeqStep {
        if (st == "B") {
            if (a == marker) return {"R0", {sep, marker, sep}};
            return {"B", {a}};
        }
        if (st == "R0") {
            if (isRed(a)) return {"R1", {a}};
            return {"R0", {a}};
        }
        if (isRed(a)) return {"R1", {sep, a}};
        return {"R1", {a}};
    };
    auto preEnd = [](const std::string&) { return std::vector<SymbolId>{}; };
    SequentialTransducer pre = buildSequential(u, u, "B", preStep, preEnd);

    auto postStep = [u, sep, marker](const std::string& st, SymbolId a) -> SeqStep {
        if (st == "B") {
            if (a == sep) return {"P", {}};
            if (a == marker) return {"E", {marker}};
            return {"B", {a}};
        }
        if (st == "P") {
            if (a == sep) return {"P", {sep}};
            if (a == marker) return {"E", {marker}};
            return {"B", {sep, a}};
        }
        if (st == "E") {
            if (a == sep) return {"R", {}};
            return {"R", {a}};
        }
        return {"R", {a}};
    };
    auto postEnd = [sep](const std::string& st) {
        if (st == "P") return std::vector<SymbolId>{sep};
        return std::vector<SymbolId>{};
    };
    SequentialTransducer post = buildSequential(u, u, "B", postStep, postEnd);

    return {Stage{pre}, Stage{IterRevSpec(u, sepTok)}, Stage{post}};
}

std::vector<Stage> redSeq(const PairSides& ps, const AlphabetRef& gamma,
                          const SequentialTransducer& t) {
    AlphabetRef inU = sideUnion(ps, gamma, t.inputAlphabet);
    AlphabetRef outU = sideUnion(ps, gamma, t.outputAlphabet);
    std::size_t sw = t.inputAlphabet->size();
    auto step = [&t, inU, outU, sw, &ps, gamma](const std::string& st, SymbolId a) -> SeqStep {
        const std::string& tok = inU->token(a);
        if (st == "P") {
            if (tok == ps.marker)
                return {"R:" + std::to_string(t.dfa.initial), {outU->id(ps.marker)}};
            if (gamma->contains(tok)) return {"P", {outU->id(tok)}};
            return {"P", {}};  // stray red letter before the marker
        }
        std::size_t q = std::stoul(st.substr(2));
        if (tok.compare(0, ps.tag.size(), ps.tag) == 0) {
            SymbolId in = t.inputAlphabet->id(tok.substr(ps.tag.size()));
            return {"R:" + std::to_string(t.dfa.step(q, in)),
                    mapWordTokens(t.transitionOutput[q * sw + in], t.outputAlphabet, outU,
                                  ps.tag)};
        }
        if (outU->contains(tok)) return {st, {outU->id(tok)}};
        return {st, {}};
    };
    auto end = [&t, outU, &ps](const std::string& st) {
        if (st == "P") return std::vector<SymbolId>{};
        return mapWordTokens(t.endOfInput[std::stoul(st.substr(2))], t.outputAlphabet, outU,
                             ps.tag);
    };
    return {Stage{buildSequential(inU, outU, "P", step, end)}};
}

std::vector<Stage> redSquaring(const PairSides& ps, const AlphabetRef& gamma,
                               const SquaringSpec& s) {
    AlphabetRef inU = sideUnion(ps, gamma, s.alphabet);
    SquaringSpec bigSq(inU);
    SquaringSpec plainSq(s.alphabet);
    AlphabetRef outU = sideUnion(ps, gamma, plainSq.squaredAlphabet);

    ZoneView view{bigSq.squaredAlphabet, inU->size(), [ps](const std::string& b) {
                      if (b == ps.marker) return Zone::Marker;
                      if (b.compare(0, ps.tag.size(), ps.tag) == 0) return Zone::Red;
                      return Zone::Black;
                  }};
    auto emit = [&, outU](Zone copyZone, SymbolId sqSym) -> std::vector<SymbolId> {
        Zone z = view.zone(sqSym);
        std::string base = view.baseTok(sqSym);
        bool und = view.underlined(sqSym);
        if (copyZone == Zone::Marker) {
            if (z == Zone::Black) return {outU->id(base)};
            if (z == Zone::Marker) return {outU->id(ps.marker)};
            return {};
        }
        if (copyZone == Zone::Red) {
            if (z == Zone::Red) {
                std::string inner = base.substr(ps.tag.size());
                return {outU->id(ps.tag + (und ? underlineToken(inner) : inner))};
            }
            return {};
        }
        return {};
    };
    std::vector<Stage> stages;
    stages.push_back(Stage{bigSq});
    auto cleanup = copyZoneCleanup(bigSq, view, outU, emit);
    stages.insert(stages.end(), cleanup.begin(), cleanup.end());
    return stages;
}

std::vector<Stage> redIterRev(const PairSides& ps, const AlphabetRef& gamma,
                              const IterRevSpec& s) {
    AlphabetRef u = sideUnion(ps, gamma, s.alphabet);
    std::string sepTok = ps.tag + s.alphabet->token(s.separator);
    SymbolId sep = u->id(sepTok);
    SymbolId marker = u->id(ps.marker);
    auto isRed = [&ps, u](SymbolId a) {
        return u->token(a).compare(0, ps.tag.size(), ps.tag) == 0;
    };

    auto preStep = [sep, marker, isRed](const std::string& st, SymbolId a) -> SeqStep {
        if (st == "B") {
            if (a == marker) return {"R", {marker, sep}};
            if (!isRed(a)) return {"B", {a, sep}};
            return {"B", {a}};
        }
        return {"R", {a}};
    };
    auto preEnd = [](const std::string&) { return std::vector<SymbolId>{}; };
    SequentialTransducer pre = buildSequential(u, u, "B", preStep, preEnd);

    auto postStep = [sep, marker](const std::string& st, SymbolId a) -> SeqStep {
        if (st == "B") {
            if (a == sep) return {"B", {}};
            if (a == marker) return {"E", {marker}};
            return {"B", {a}};
        }
        if (st == "E") {
            if (a == sep) return {"R", {}};
            return {"R", {a}};
        }
        return {"R", {a}};
    };
    auto postEnd = [](const std::string&) { return std::vector<SymbolId>{}; };
    SequentialTransducer post = buildSequential(u, u, "B", postStep, postEnd);

    return {Stage{pre}, Stage{IterRevSpec(u, sepTok)}, Stage{post}};
}

}  // namespace

Pipeline combPairConcat(const Pipeline& f, const Pipeline& g) {
    if (!f.inputAlphabet()->sameLetterSet(*g.inputAlphabet()) ||
        !f.outputAlphabet()->sameLetterSet(*g.outputAlphabet()))
        throw AlphabetMismatchError("comb_pair_concat: alphabet constraints violated");
    const AlphabetRef& sigma = f.inputAlphabet();
    const AlphabetRef& gamma = f.outputAlphabet();

    std::vector<AlphabetRef> scope{sigma, gamma};
    for (const auto& st : f.stages) {
        scope.push_back(st.inputAlphabet());
        scope.push_back(st.outputAlphabet());
    }
    for (const auto& st : g.stages) {
        scope.push_back(st.inputAlphabet());
        scope.push_back(st.outputAlphabet());
    }
    std::string tag = freshTagToken(scope);
    std::vector<AlphabetRef> scope2 = scope;
    for (const auto& a : scope) scope2.push_back(tagAlphabet(a, tag));
    std::string marker = freshSeparatorToken(scope2);
    PairSides ps{sigma, marker, tag};

    Pipeline p;
    // Duplicate: w -> w marker red(w), via endmarker + squaring + cleanup.
    AlphabetRef sigmaM = extendAlphabet(sigma, {marker});
    {
        SequentialTransducer app = seqIdentityInto(sigma, sigmaM);
        for (auto& e : app.endOfInput) e = {sigmaM->id(marker)};
        p.stages.push_back(Stage{app});
    }
    SquaringSpec dupSq(sigmaM);
    p.stages.push_back(Stage{dupSq});
    {
        AlphabetRef d1 = sideUnion(ps, sigma, sigma);
        const AlphabetRef& sq = dupSq.squaredAlphabet;
        auto step = [&, d1](const std::string& st, SymbolId a) -> SeqStep {
            SymbolId base = a < sigmaM->size() ? a : static_cast<SymbolId>(a - sigmaM->size());
            bool isMarker = sigmaM->token(base) == marker;
            if (st == "0") {
                if (isMarker) return {"1", {d1->id(marker)}};
                return {"0", {d1->id(sigmaM->token(base))}};
            }
            if (st == "1") {
                if (isMarker) return {"2", {}};
                return {"1", {d1->id(tag + sigmaM->token(base))}};
            }
            return {"2", {}};
        };
        auto end = [](const std::string&) { return std::vector<SymbolId>{}; };
        p.stages.push_back(Stage{buildSequential(sq, d1, "0", step, end)});
    }

    // f on the black side.
    for (const auto& st : f.stages) {
        std::vector<Stage> ext;
        if (auto* s = std::get_if<SequentialTransducer>(&st.v))
            ext = blackSeq(ps, *s);
        else if (auto* s = std::get_if<SquaringSpec>(&st.v))
            ext = blackSquaring(ps, *s);
        else
            ext = blackIterRev(ps, std::get<IterRevSpec>(st.v));
        p.stages.insert(p.stages.end(), ext.begin(), ext.end());
    }
    // g on the red side.
    for (const auto& st : g.stages) {
        std::vector<Stage> ext;
        if (auto* s = std::get_if<SequentialTransducer>(&st.v))
            ext = redSeq(ps, gamma, *s);
        else if (auto* s = std::get_if<SquaringSpec>(&st.v))
            ext = redSquaring(ps, gamma, *s);
        else
            ext = redIterRev(ps, gamma, std::get<IterRevSpec>(st.v));
        p.stages.insert(p.stages.end(), ext.begin(), ext.end());
    }
    // Strip the marker and the red tags.
    AlphabetRef fin = p.stages.back().outputAlphabet();
    std::vector<std::vector<SymbolId>> stripMap(fin->size());
    for (SymbolId a = 0; a < fin->size(); ++a) {
        const std::string& tok = fin->token(a);
        if (tok == marker) continue;
        if (tok.compare(0, tag.size(), tag) == 0)
            stripMap[a] = {gamma->id(tok.substr(tag.size()))};
        else
            stripMap[a] = {gamma->id(tok)};
    }
    p.stages.push_back(Stage{seqLetterMap(fin, gamma, stripMap)});
    return p;
}

Pipeline combIterAppend(const AlphabetRef& alphabet, const std::string& sepToken) {
    SymbolId sep = alphabet->id(sepToken);
    std::string comma = freshSeparatorToken({alphabet});
    AlphabetRef wide = extendAlphabet(alphabet, {comma});
    SymbolId commaW = wide->id(comma);

    Pipeline p;
    SequentialTransducer app = seqIdentityInto(alphabet, wide);
    for (auto& e : app.endOfInput) e = {commaW};
    p.stages.push_back(Stage{app});
    SquaringSpec sq(wide);
    p.stages.push_back(Stage{sq});

    std::size_t baseSize = wide->size();
    auto kindOf = [baseSize, commaW, wide, sepToken](SymbolId a) {
        SymbolId base = a < baseSize ? a : static_cast<SymbolId>(a - baseSize);
        char k = base == commaW ? 'c' : (wide->token(base) == sepToken ? 's' : 'a');
        return std::make_pair(k, base);
    };
    std::size_t undOffset = baseSize;

    // Right-to-left sweep per copy (copies end with the comma, so reversed
    // copies begin with it). Annotation bits: 1 = nearest separator to the
    // right is the underlined one; 2 = no separator between me and the comma
    // (final block); 4 = the copy's underline lies on a separator to my right.
    auto rightStep = [kindOf, undOffset](const std::string& st, SymbolId a) {
        bool lastSepWasUnd = st[0] == '1';
        bool sawSep = st[1] == '1';
        bool undOnSep = st[2] == '1';
        auto [k, base] = kindOf(a);
        (void)base;
        bool und = a >= undOffset;
        if (k == 'c') {
            lastSepWasUnd = sawSep = undOnSep = false;
            return std::make_pair(std::string{'0', '0', '0'}, 0);
        }
        int ann = 0;
        if (k == 'a') {
            ann = (lastSepWasUnd ? 1 : 0) | (!sawSep ? 2 : 0) | (undOnSep ? 4 : 0);
        }
        if (k == 's') {
            lastSepWasUnd = und;
            if (und) undOnSep = true;
            sawSep = true;
        }
        std::string next{lastSepWasUnd ? '1' : '0', sawSep ? '1' : '0', undOnSep ? '1' : '0'};
        return std::make_pair(next, ann);
    };
    // extendAlphabet keeps the base ids, so every non-comma id over `wide`
    // is also the right id over `alphabet`.
    auto leftStep = [kindOf, undOffset, sep](const std::string& st, SymbolId a,
                                             int ann) -> SeqStep {
        bool fwdUndOnSep = st[0] == '1';
        bool fwdSepAfterUnd = st[1] == '1';
        auto [k, base] = kindOf(a);
        bool und = a >= undOffset;
        std::vector<SymbolId> out;
        if (k == 'c') {
            if (fwdUndOnSep && fwdSepAfterUnd) out = {sep};
            return SeqStep{"00", std::move(out)};
        }
        if (k == 's') {
            if (und)
                fwdUndOnSep = true, fwdSepAfterUnd = false;
            else if (fwdUndOnSep)
                fwdSepAfterUnd = true;
        } else {
            bool copyKept = fwdUndOnSep || (ann & 4);
            bool adjacent = (ann & 1) != 0;
            bool finalBlock = (ann & 2) != 0;
            if (copyKept && (adjacent || finalBlock)) out = {base};
        }
        return SeqStep{std::string{fwdUndOnSep ? '1' : '0', fwdSepAfterUnd ? '1' : '0'},
                       std::move(out)};
    };
    auto leftEnd = [](const std::string&) { return std::vector<SymbolId>{}; };

    // Left-side kept letters live in the w-prefix alphabet; rebuild their ids
    // against the target alphabet. (Token text is shared between wide and
    // alphabet for non-comma letters.)
    auto cleanup = annotateRational(sq.squaredAlphabet, 8, "000", rightStep, alphabet, "00",
                                    leftStep, leftEnd);
    p.stages.insert(p.stages.end(), cleanup.begin(), cleanup.end());
    return p;
}

namespace {

std::vector<Stage> blockwiseSeq(const SequentialTransducer& t, const std::string& sepTok) {
    AlphabetRef inU = extendAlphabet(t.inputAlphabet, {sepTok});
    AlphabetRef outU = extendAlphabet(t.outputAlphabet, {sepTok});
    SymbolId sepIn = inU->id(sepTok);
    SymbolId sepOut = outU->id(sepTok);
    std::size_t sw = t.inputAlphabet->size();
    auto step = [&t, inU, outU, sw, sepIn, sepOut](const std::string& st, SymbolId a) -> SeqStep {
        std::size_t q = std::stoul(st);
        if (a == sepIn) {
            auto w = mapWordTokens(t.endOfInput[q], t.outputAlphabet, outU);
            w.push_back(sepOut);
            return {std::to_string(t.dfa.initial), std::move(w)};
        }
        SymbolId in = t.inputAlphabet->id(inU->token(a));
        return {std::to_string(t.dfa.step(q, in)),
                mapWordTokens(t.transitionOutput[q * sw + in], t.outputAlphabet, outU)};
    };
    auto end = [&t, outU](const std::string& st) {
        return mapWordTokens(t.endOfInput[std::stoul(st)], t.outputAlphabet, outU);
    };
    return {Stage{buildSequential(inU, outU, std::to_string(t.dfa.initial), step, end)}};
}

std::vector<Stage> blockwiseIterRev(const IterRevSpec& s, const std::string& sepTok) {
    AlphabetRef u = extendAlphabet(s.alphabet, {sepTok});
    std::string innerTok = s.alphabet->token(s.separator);
    SymbolId inner = u->id(innerTok);
    SymbolId outer = u->id(sepTok);

    auto preStep = [inner, outer](const std::string&, SymbolId a) -> SeqStep {
        if (a == outer) return {"", {inner, outer, inner}};
        return {"", {a}};
    };
    auto preEnd = [](const std::string&) { return std::vector<SymbolId>{}; };
    SequentialTransducer pre = buildSequential(u, u, "", preStep, preEnd);

    auto postStep = [inner, outer](const std::string& st, SymbolId a) -> SeqStep {
        if (st == "n") {
            if (a == inner) return {"p", {}};
            if (a == outer) return {"s", {outer}};
            return {"n", {a}};
        }
        if (st == "p") {
            if (a == inner) return {"p", {inner}};
            if (a == outer) return {"s", {outer}};
            return {"n", {inner, a}};
        }
        // st == "s": just after an outer separator
        if (a == inner) return {"n", {}};
        if (a == outer) return {"s", {outer}};
        return {"n", {a}};
    };
    auto postEnd = [inner](const std::string& st) {
        if (st == "p") return std::vector<SymbolId>{inner};
        return std::vector<SymbolId>{};
    };
    SequentialTransducer post = buildSequential(u, u, "n", postStep, postEnd);

    return {Stage{pre}, Stage{IterRevSpec(u, innerTok)}, Stage{post}};
}

std::vector<Stage> blockwiseSquaring(const SquaringSpec& s, const std::string& sepTok) {
    AlphabetRef inU = extendAlphabet(s.alphabet, {sepTok});
    std::string comma = freshSeparatorToken({inU});
    AlphabetRef wide = extendAlphabet(inU, {comma});
    SquaringSpec bigSq(wide);
    SquaringSpec plainSq(s.alphabet);
    AlphabetRef outU = extendAlphabet(plainSq.squaredAlphabet, {sepTok});
    SymbolId sepOut = outU->id(sepTok);

    std::vector<Stage> stages;
    SequentialTransducer app = seqIdentityInto(inU, wide);
    for (auto& e : app.endOfInput) e = {wide->id(comma)};
    stages.push_back(Stage{app});
    stages.push_back(Stage{bigSq});

    std::size_t baseSize = wide->size();
    auto kindOf = [baseSize, wide, sepTok, comma](SymbolId a) {
        SymbolId base = a < baseSize ? a : static_cast<SymbolId>(a - baseSize);
        const std::string& tok = wide->token(base);
        char k = tok == comma ? 'c' : (tok == sepTok ? 's' : 'a');
        return std::make_pair(k, tok);
    };

    // ann bit 1: the copy's underline sits on a plain letter of my block,
    // to my right.
    auto rightStep = [kindOf, baseSize](const std::string& st, SymbolId a) {
        bool undInBlock = st[0] == '1';
        auto [k, tok] = kindOf(a);
        (void)tok;
        bool und = a >= baseSize;
        if (k == 'c' || k == 's') {
            return std::make_pair(std::string{'0'}, 0);
        }
        int ann = undInBlock ? 1 : 0;
        if (und) undInBlock = true;
        return std::make_pair(std::string{undInBlock ? '1' : '0'}, ann);
    };
    auto leftStep = [kindOf, baseSize, outU, sepOut](const std::string& st, SymbolId a,
                                                     int ann) -> SeqStep {
        bool fwdUndInBlock = st[0] == '1';
        auto [k, tok] = kindOf(a);
        bool und = a >= baseSize;
        std::vector<SymbolId> out;
        if (k == 'c' || k == 's') {
            if (k == 's' && und) out = {sepOut};
            return SeqStep{"0", std::move(out)};
        }
        if (und) fwdUndInBlock = true;
        if (fwdUndInBlock || (ann & 1)) out = {outU->id(und ? underlineToken(tok) : tok)};
        return SeqStep{std::string{fwdUndInBlock ? '1' : '0'}, std::move(out)};
    };
    auto leftEnd = [](const std::string&) { return std::vector<SymbolId>{}; };
    auto cleanup =
        annotateRational(bigSq.squaredAlphabet, 2, "0", rightStep, outU, "0", leftStep, leftEnd);
    stages.insert(stages.end(), cleanup.begin(), cleanup.end());
    return stages;
}

}  // namespace

Pipeline combBlockwiseMap(const Pipeline& f, const std::string& sepToken) {
    if (f.inputAlphabet()->contains(sepToken) || f.outputAlphabet()->contains(sepToken))
        throw PolyregError("comb_blockwise_map: separator collides with f's alphabet");
    // Interior stages may use the separator token for their own scaffolding;
    // rename it to a fresh token while inside.
    std::vector<AlphabetRef> scope{f.inputAlphabet(), f.outputAlphabet()};
    bool collides = false;
    for (const auto& st : f.stages) {
        scope.push_back(st.inputAlphabet());
        scope.push_back(st.outputAlphabet());
        if (st.inputAlphabet()->contains(sepToken) || st.outputAlphabet()->contains(sepToken))
            collides = true;
    }
    std::string inner = sepToken;
    Pipeline p;
    if (collides) {
        inner = freshSeparatorToken(scope);
        AlphabetRef from = extendAlphabet(f.inputAlphabet(), {sepToken});
        AlphabetRef to = extendAlphabet(f.inputAlphabet(), {inner});
        std::vector<std::vector<SymbolId>> ren(from->size());
        for (SymbolId a = 0; a < from->size(); ++a)
            ren[a] = {to->id(from->token(a) == sepToken ? inner : from->token(a))};
        p.stages.push_back(Stage{seqLetterMap(from, to, ren)});
    }
    for (const auto& st : f.stages) {
        std::vector<Stage> ext;
        if (auto* s = std::get_if<SequentialTransducer>(&st.v))
            ext = blockwiseSeq(*s, inner);
        else if (auto* s = std::get_if<SquaringSpec>(&st.v))
            ext = blockwiseSquaring(*s, inner);
        else
            ext = blockwiseIterRev(std::get<IterRevSpec>(st.v), inner);
        p.stages.insert(p.stages.end(), ext.begin(), ext.end());
    }
    if (collides) {
        AlphabetRef from = extendAlphabet(f.outputAlphabet(), {inner});
        AlphabetRef to = extendAlphabet(f.outputAlphabet(), {sepToken});
        std::vector<std::vector<SymbolId>> ren(from->size());
        for (SymbolId a = 0; a < from->size(); ++a)
            ren[a] = {to->id(from->token(a) == inner ? sepToken : from->token(a))};
        p.stages.push_back(Stage{seqLetterMap(from, to, ren)});
    }
    return p;
}

Pipeline runningExamplePipeline() {
    AlphabetRef sigma = Alphabet::make({"a", "b"});
    AlphabetRef wide = extendAlphabet(sigma, {"|"});
    SymbolId bar = wide->id("|");

    Pipeline p;
    SequentialTransducer app = seqIdentityInto(sigma, wide);
    for (auto& e : app.endOfInput) e = {bar};
    p.stages.push_back(Stage{app});

    SquaringSpec sq(wide);
    p.stages.push_back(Stage{sq});

    // Cleanup: per copy keep positions up to and including the underline and
    // the closing separator; drop the copy whose underline is the separator.
    std::size_t baseSize = wide->size();
    auto rightStep = [baseSize, bar](const std::string& st, SymbolId a) {
        char undZone = st[0];
        SymbolId base = a < baseSize ? a : static_cast<SymbolId>(a - baseSize);
        bool und = a >= baseSize;
        if (base == bar) undZone = '0';  // separators start a copy (reversed)
        if (und) undZone = base == bar ? 'S' : 'A';
        int ann = undZone == 'A' ? 1 : (undZone == 'S' ? 2 : 0);
        return std::make_pair(std::string{undZone}, ann);
    };
    auto leftStep = [baseSize, bar, wide](const std::string&, SymbolId a, int ann) -> SeqStep {
        SymbolId base = a < baseSize ? a : static_cast<SymbolId>(a - baseSize);
        std::vector<SymbolId> out;
        if (base == bar) {
            if (ann == 0) out = {bar};
        } else if (ann == 1) {
            out = {base};
        }
        return SeqStep{"", std::move(out)};
    };
    auto leftEnd = [](const std::string&) { return std::vector<SymbolId>{}; };
    auto cleanup =
        annotateRational(sq.squaredAlphabet, 3, "0", rightStep, wide, "", leftStep, leftEnd);
    p.stages.insert(p.stages.end(), cleanup.begin(), cleanup.end());

    p.stages.push_back(Stage{IterRevSpec(wide, "|")});
    return p;
}

}  // namespace polyreg
