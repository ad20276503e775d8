#include <random>

#include "doctest.h"
#include "polyreg/pebble.hpp"

using namespace polyreg;

namespace {

std::vector<Word> allWords(const AlphabetRef& a, std::size_t maxLen, bool skipEmpty = false) {
    std::vector<Word> out;
    if (!skipEmpty) out.push_back(Word{a, {}});
    std::vector<std::vector<SymbolId>> layer{{}};
    for (std::size_t n = 1; n <= maxLen; ++n) {
        std::vector<std::vector<SymbolId>> next;
        for (const auto& w : layer)
            for (SymbolId s = 0; s < a->size(); ++s) {
                auto v = w;
                v.push_back(s);
                out.push_back(Word{a, v});
                next.push_back(std::move(v));
            }
        layer = std::move(next);
    }
    return out;
}

Word randomWord(const AlphabetRef& a, std::size_t len, std::mt19937& rng) {
    std::uniform_int_distribution<SymbolId> sym(0, static_cast<SymbolId>(a->size() - 1));
    Word w{a, {}};
    for (std::size_t i = 0; i < len; ++i) w.syms.push_back(sym(rng));
    return w;
}

SequentialTransducer doubleA() {
    auto in = Alphabet::make({"a", "b"});
    auto out = Alphabet::make({"a", "b", "#"});
    SequentialTransducer t;
    t.inputAlphabet = in;
    t.outputAlphabet = out;
    t.dfa.alphabet = in;
    t.dfa.stateNames = {"even", "odd"};
    t.dfa.initial = 0;
    t.dfa.accepting = {true, true};
    t.dfa.delta = {1, 1, 0, 0};
    t.transitionOutput = {{0, 0}, {1}, {0, 0}, {1}};
    t.endOfInput = {{}, {2}};
    return t;
}

PebbleTransducer randomTwoWay(std::mt19937& rng, const AlphabetRef& al) {
    std::uniform_int_distribution<int> nstates(2, 4);
    int n = nstates(rng);
    PebbleTransducer t;
    t.inputAlphabet = al;
    t.outputAlphabet = al;
    t.maxPebbles = 1;
    for (int i = 0; i < n; ++i) t.stateNames.push_back("q" + std::to_string(i));
    t.initial = 0;
    t.final = static_cast<std::size_t>(n - 1);
    t.stateOutput.assign(n, {});
    std::uniform_int_distribution<int> coin(0, 2), tgt(0, n - 1), act(0, 2);
    for (int q = 0; q + 1 < n; ++q)
        for (SymbolId a = 0; a < al->size(); ++a) {
            if (coin(rng) == 0) continue;  // leave some (state, letter) stuck
            GuardedRule r;
            r.sourceState = static_cast<std::size_t>(q);
            r.letters.assign(al->size(), false);
            r.letters[a] = true;
            r.guard = GuardExpr::mkTrue();
            r.targetState = static_cast<std::size_t>(tgt(rng));
            int k = act(rng);
            r.action = k == 0   ? PebbleAction::MoveLeft
                       : k == 1 ? PebbleAction::MoveRight
                                : PebbleAction::Stay;
            if (r.action == PebbleAction::Stay && r.targetState == r.sourceState)
                r.action = PebbleAction::MoveRight;
            t.rules.push_back(std::move(r));
        }
    return t;
}

CrossingType crossingOracle(const PebbleTransducer& t, const Word& w) {
    return crossingType(t, w, {false, false});
}

}  // namespace

TEST_CASE("pebble step terminal cases") {
    auto ab = Alphabet::make({"a", "b"});
    PebbleTransducer t;
    t.inputAlphabet = ab;
    t.outputAlphabet = ab;
    t.maxPebbles = 1;
    t.stateNames = {"s", "f"};
    t.initial = 0;
    t.final = 1;
    t.stateOutput = {{}, {}};
    t.rules.push_back(GuardedRule{0, {true, true}, GuardExpr::mkTrue(), 0,
                                  PebbleAction::MoveRight});

    Word w = wordFromText(ab, "ab");
    PebbleConfig atLast{0, {2}};
    CHECK(!pebbleStep(t, w, atLast).has_value());  // move right off the last position

    PebbleConfig atOne{0, {1}};
    auto next = pebbleStep(t, w, atOne);
    REQUIRE(next.has_value());
    CHECK(next->stack == std::vector<std::size_t>{2});

    PebbleTransducer p = t;
    p.rules.clear();
    p.rules.push_back(GuardedRule{0, {true, true}, GuardExpr::mkTrue(), 0, PebbleAction::Push});
    CHECK(!pebbleStep(p, w, atOne).has_value());  // push at full height
}

TEST_CASE("pebble run accepting and loop detection") {
    auto ab = Alphabet::make({"a", "b"});
    PebbleTransducer t;
    t.inputAlphabet = ab;
    t.outputAlphabet = ab;
    t.maxPebbles = 1;
    t.stateNames = {"s"};
    t.initial = 0;
    t.final = 0;
    t.stateOutput = {{}};
    auto res = pebbleRun(t, wordFromText(ab, "a"));
    CHECK(res.accepted);
    CHECK(res.run.size() == 1);

    PebbleTransducer loop;
    loop.inputAlphabet = ab;
    loop.outputAlphabet = ab;
    loop.maxPebbles = 1;
    loop.stateNames = {"s", "t", "f"};
    loop.initial = 0;
    loop.final = 2;
    loop.stateOutput = {{}, {}, {}};
    loop.rules.push_back(GuardedRule{0, {true, true}, GuardExpr::mkTrue(), 1, PebbleAction::Stay});
    loop.rules.push_back(GuardedRule{1, {true, true}, GuardExpr::mkTrue(), 0, PebbleAction::Stay});
    auto res2 = pebbleRun(loop, wordFromText(ab, "ab"));
    CHECK(!res2.accepted);
}

TEST_CASE("pebble_from_sequential matches seq_eval") {
    auto t = doubleA();
    auto p = pebbleFromSequential(t);
    CHECK(pebbleValidate(p).ok);

    CHECK(pebbleEval(p, Word{t.inputAlphabet, {}}).render().empty());
    CHECK(pebbleEval(p, wordFromText(t.inputAlphabet, "aba")).render() == "aabaa#");

    for (const auto& w : allWords(t.inputAlphabet, 5))
        CHECK(pebbleEval(p, w) == seqEval(t, w));
    std::mt19937 rng(17);
    std::uniform_int_distribution<std::size_t> len(0, 20);
    for (int i = 0; i < 500; ++i) {
        Word w = randomWord(t.inputAlphabet, len(rng), rng);
        CHECK(pebbleEval(p, w) == seqEval(t, w));
    }

    auto id = seqIdentity(Alphabet::make({"a", "b", "c"}));
    auto pid = pebbleFromSequential(id);
    CHECK(pebbleEval(pid, wordFromText(id.inputAlphabet, "abc")).render() == "abc");
}

TEST_CASE("pebble squaring matches squaring_eval") {
    auto digits = Alphabet::make({"1", "2", "3", "4"});
    auto p = pebbleSquaring(digits);
    CHECK(pebbleEval(p, wordFromText(digits, "1234")).render() == "_12341_23412_34123_4");
    CHECK(pebbleEval(p, wordFromText(digits, "1")).render() == "_1");

    auto ab = Alphabet::make({"a", "b"});
    auto pab = pebbleSquaring(ab);
    SquaringSpec sab(ab);
    for (const auto& w : allWords(ab, 5)) CHECK(pebbleEval(pab, w) == squaringEval(sab, w));
    std::mt19937 rng(23);
    std::uniform_int_distribution<std::size_t> len(0, 8);
    for (int i = 0; i < 500; ++i) {
        Word w = randomWord(ab, len(rng), rng);
        CHECK(pebbleEval(pab, w) == squaringEval(sab, w));
    }

    // run-length invariant for an accepting run: at most |Q| * n^k
    Word w8 = randomWord(ab, 8, rng);
    auto run = pebbleRun(pab, w8);
    CHECK(run.accepted);
    CHECK(run.run.size() <= pab.numStates() * 8 * 8);
}

TEST_CASE("pebble iterated reverse matches iterated_reverse_eval") {
    auto al = Alphabet::make({"1", "2", "3", "4", "5", "6", "7", "8", "9", "|"});
    IterRevSpec spec(al, "|");
    auto p = pebbleIteratedReverse(spec);
    CHECK(pebbleEval(p, wordFromText(al, "123|45|678|9")).render() == "321|54|876|9");
    CHECK(pebbleEval(p, Word{al, {}}).render().empty());

    auto ab = Alphabet::make({"a", "b", "|"});
    IterRevSpec spec2(ab, "|");
    auto p2 = pebbleIteratedReverse(spec2);
    for (const auto& w : allWords(ab, 5)) CHECK(pebbleEval(p2, w) == iteratedReverseEval(spec2, w));
    std::mt19937 rng(29);
    std::uniform_int_distribution<std::size_t> len(0, 16);
    for (int i = 0; i < 500; ++i) {
        Word w = randomWord(ab, len(rng), rng);
        CHECK(pebbleEval(p2, w) == iteratedReverseEval(spec2, w));
    }
}

TEST_CASE("pebble run word serialization") {
    auto ab = Alphabet::make({"a", "b"});
    PebbleTransducer t;
    t.inputAlphabet = ab;
    t.outputAlphabet = ab;
    t.maxPebbles = 1;
    t.stateNames = {"qf"};
    t.initial = 0;
    t.final = 0;
    t.stateOutput = {{}};
    Word rw = pebbleRunWord(t, wordFromText(ab, "a"));
    CHECK(rw.render() == "[1:qf]a");

    PebbleTransducer sweep;
    sweep.inputAlphabet = ab;
    sweep.outputAlphabet = ab;
    sweep.maxPebbles = 1;
    sweep.stateNames = {"s", "f"};
    sweep.initial = 0;
    sweep.final = 1;
    sweep.stateOutput = {{}, {}};
    sweep.rules.push_back(
        GuardedRule{0, {true, true}, GuardExpr::atLast(1), 1, PebbleAction::Stay});
    sweep.rules.push_back(
        GuardedRule{0, {true, true}, GuardExpr::mkTrue(), 0, PebbleAction::MoveRight});
    Word rw2 = pebbleRunWord(sweep, wordFromText(ab, "ab"));
    CHECK(rw2.render() == "[1:s]ab|a[1:s]b|a[1:f]b");
    auto res = pebbleRun(sweep, wordFromText(ab, "ab"));
    std::size_t bars = 0;
    for (auto s : rw2.syms)
        if (rw2.alphabet->token(s) == "|") ++bars;
    CHECK(res.run.size() == bars + 1);
}

TEST_CASE("pebble compose runtime") {
    auto ab = Alphabet::make({"a", "b"});
    auto sq = pebbleSquaring(ab);
    auto id = pebbleFromSequential(seqIdentity(ab));
    auto comp = pebbleComposeRuntime(sq, id);
    SquaringSpec s(ab);
    std::mt19937 rng(31);
    for (int i = 0; i < 50; ++i) {
        Word w = randomWord(ab, i % 7, rng);
        CHECK(comp.eval(w) == squaringEval(s, w));
    }

    auto abp = Alphabet::make({"a", "b", "|"});
    IterRevSpec spec(abp, "|");
    auto rev = pebbleIteratedReverse(spec);
    auto twice = pebbleComposeRuntime(rev, rev);
    for (int i = 0; i < 50; ++i) {
        Word w = randomWord(abp, i % 9, rng);
        CHECK(twice.eval(w) == rebaseWord(w, abp));
    }
}

TEST_CASE("crossing type basics") {
    auto ab = Alphabet::make({"a", "b"});
    PebbleTransducer t;
    t.inputAlphabet = ab;
    t.outputAlphabet = ab;
    t.maxPebbles = 1;
    t.stateNames = {"q0", "q1", "f"};
    t.initial = 0;
    t.final = 2;
    t.stateOutput = {{}, {}, {}};
    t.rules.push_back(
        GuardedRule{0, {true, true}, GuardExpr::mkTrue(), 1, PebbleAction::MoveRight});
    t.rules.push_back(
        GuardedRule{1, {true, true}, GuardExpr::mkTrue(), 1, PebbleAction::MoveRight});

    Word one = wordFromText(ab, "a");
    CrossingType ct = crossingType(t, one, {false, false});
    CHECK(ct.behavior[0].kind == CrossingOutcome::Kind::Exit);
    CHECK(ct.behavior[0].state == 1);
    CHECK(ct.behavior[0].exitRight);

    PebbleTransducer stuck = t;
    stuck.rules.clear();
    CrossingType cs = crossingType(stuck, one, {false, false});
    for (std::size_t q = 0; q < 2; ++q)
        for (int s2 = 0; s2 < 2; ++s2)
            CHECK(cs.behavior[q * 2 + s2].kind == CrossingOutcome::Kind::Reject);
    CHECK(cs.behavior[2 * 2].kind == CrossingOutcome::Kind::Accept);
}

TEST_CASE("crossing types form a semigroup homomorphism") {
    auto ab = Alphabet::make({"a", "b"});
    std::mt19937 rng(41);
    std::uniform_int_distribution<std::size_t> len(1, 6);
    int checked = 0;
    for (int trial = 0; trial < 60; ++trial) {
        PebbleTransducer t = randomTwoWay(rng, ab);
        for (int i = 0; i < 10; ++i, ++checked) {
            Word u = randomWord(ab, len(rng), rng);
            Word v = randomWord(ab, len(rng), rng);
            Word uv = u;
            uv.syms.insert(uv.syms.end(), v.syms.begin(), v.syms.end());
            CrossingType lhs = crossingOracle(t, uv);
            CrossingType rhs = crossingCompose(crossingOracle(t, u), crossingOracle(t, v));
            CHECK(lhs == rhs);
        }
        Word x = randomWord(ab, len(rng), rng);
        Word y = randomWord(ab, len(rng), rng);
        Word z = randomWord(ab, len(rng), rng);
        auto cx = crossingOracle(t, x), cy = crossingOracle(t, y), cz = crossingOracle(t, z);
        CHECK(crossingCompose(crossingCompose(cx, cy), cz) ==
              crossingCompose(cx, crossingCompose(cy, cz)));
    }
    CHECK(checked >= 500);
}

TEST_CASE("crossing compose with an all-reject type") {
    auto ab = Alphabet::make({"a", "b"});
    std::mt19937 rng(43);
    PebbleTransducer t = randomTwoWay(rng, ab);
    CrossingType rej;
    rej.numStates = t.numStates();
    rej.behavior.assign(t.numStates() * 2, CrossingOutcome{});
    CrossingType some = crossingOracle(t, wordFromText(ab, "ab"));
    CrossingType prod = crossingCompose(some, rej);
    for (std::size_t q = 0; q < t.numStates(); ++q) {
        const auto& left = some.behavior[q * 2];
        if (left.kind == CrossingOutcome::Kind::Exit && left.exitRight)
            CHECK(prod.behavior[q * 2].kind == CrossingOutcome::Kind::Reject);
    }
}

TEST_CASE("crossing semigroup of builders") {
    auto ab = Alphabet::make({"a", "b", "|"});
    IterRevSpec spec(ab, "|");
    auto rev = pebbleIteratedReverse(spec);
    auto [mon, hom] = crossingSemigroup(rev);
    CHECK(monoidIsAperiodic(*mon));

    Word w = wordFromText(ab, "ab");
    std::size_t viaHom = homImage(hom, w);
    CrossingType direct = crossingOracle(rev, w);
    CrossingType viaLetters = crossingCompose(crossingOracle(rev, wordFromText(ab, "a")),
                                              crossingOracle(rev, wordFromText(ab, "b")));
    CHECK(direct == viaLetters);
    CHECK(viaHom == mon->mul(hom.letterImage(ab->id("a")), hom.letterImage(ab->id("b"))));

    PebbleTransducer sweeper;
    sweeper.inputAlphabet = ab;
    sweeper.outputAlphabet = ab;
    sweeper.maxPebbles = 1;
    sweeper.stateNames = {"s", "f"};
    sweeper.initial = 0;
    sweeper.final = 1;
    sweeper.stateOutput = {{}, {}};
    sweeper.rules.push_back(
        GuardedRule{0, {true, true, true}, GuardExpr::mkTrue(), 0, PebbleAction::MoveRight});
    auto [smon, shom] = crossingSemigroup(sweeper);
    (void)shom;
    CHECK(monoidIsAperiodic(*smon));
    CHECK(smon->size() <= 3);
}
