#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <set>

#include "dsrl/rng.hpp"
#include "dsrl/tracker.hpp"

using namespace dsrl;

TEST_CASE("l_dist follows 1/(1+d)") {
    REQUIRE(l_dist({3, 4}, {3, 4}) == 1.0);
    REQUIRE(l_dist({3, 4}, {4, 4}) == 0.5);
    REQUIRE(l_dist({0, 0}, {3, 0}) == 0.25);
    REQUIRE_THAT(l_dist({0, 0}, {3, 4}), Catch::Matchers::WithinAbs(1.0 / 6.0, 1e-12));
}

TEST_CASE("l_neigh follows 1/(1+|dN|)") {
    REQUIRE(l_neigh(4, 4) == 1.0);
    REQUIRE(l_neigh(2, 3) == 0.5);
    REQUIRE(l_neigh(5, 2) == 0.25);
}

TEST_CASE("fresh transition matrix carries the smoothing prior") {
    TransitionMatrix m(3); // types {0,1,2,3}
    REQUIRE(m.dim() == 4);
    REQUIRE(m.count(1, 1) == 6);
    REQUIRE(m.count(1, 2) == 1);
    REQUIRE_THAT(m.prob(1, 1), Catch::Matchers::WithinAbs(6.0 / 9.0, 1e-12));
    REQUIRE_THAT(m.prob(0, 0), Catch::Matchers::WithinAbs(6.0 / 9.0, 1e-12));
    REQUIRE_THAT(m.prob(1, 0), Catch::Matchers::WithinAbs(1.0 / 9.0, 1e-12));
}

TEST_CASE("observations shift the row distribution as hand-counted") {
    TransitionMatrix m(3);
    for (int i = 0; i < 9; ++i) m.record(1, 1);
    m.record(1, 0);
    REQUIRE(m.count(1, 1) == 15);
    REQUIRE_THAT(m.prob(1, 1), Catch::Matchers::WithinAbs(15.0 / 19.0, 1e-12));
    REQUIRE_THAT(m.prob(1, 0), Catch::Matchers::WithinAbs(2.0 / 19.0, 1e-12));
}

TEST_CASE("rows of the probability view always sum to one") {
    TransitionMatrix m(3);
    Rng rng(5);
    for (int i = 0; i < 10000; ++i)
        m.record(static_cast<int>(rng.uniform_index(4)), static_cast<int>(rng.uniform_index(4)));
    for (int r = 0; r < m.dim(); ++r) {
        double s = 0;
        for (int c = 0; c < m.dim(); ++c) {
            REQUIRE(m.prob(r, c) >= 0.0);
            s += m.prob(r, c);
        }
        REQUIRE_THAT(s, Catch::Matchers::WithinAbs(1.0, 1e-9));
    }
    // counts never fall below the prior
    for (int r = 0; r < m.dim(); ++r)
        for (int c = 0; c < m.dim(); ++c)
            REQUIRE(m.count(r, c) >= (r == c ? 6u : 1u));
}

TEST_CASE("unknown type ids are rejected") {
    TransitionMatrix m(3);
    REQUIRE_THROWS_AS(m.prob(1, 4), std::invalid_argument);
    REQUIRE_THROWS_AS(m.prob(-1, 0), std::invalid_argument);
    REQUIRE_THROWS_AS(m.record(4, 0), std::invalid_argument);
    REQUIRE_THROWS_AS(l_trans(9, 0, m), std::invalid_argument);
}

TEST_CASE("growing the matrix preserves counts and seeds the prior") {
    TransitionMatrix m(2); // dim 3
    m.record(1, 2);
    m.ensure_type(2); // no-op
    REQUIRE(m.dim() == 3);
    m.ensure_type(4);
    REQUIRE(m.dim() == 5);
    REQUIRE(m.count(1, 2) == 2);
    REQUIRE(m.count(4, 4) == 6);
    REQUIRE(m.count(1, 4) == 1);
    double s = 0;
    for (int c = 0; c < 5; ++c) s += m.prob(1, c);
    REQUIRE_THAT(s, Catch::Matchers::WithinAbs(1.0, 1e-12));
}

TEST_CASE("match config is validated") {
    TransitionMatrix m(3);
    MatchConfig bad;
    bad.w1 = 0.9; // sums to 1.3
    REQUIRE_THROWS_AS(match({}, {}, bad, m), std::invalid_argument);
    bad = MatchConfig{};
    bad.d_max = 0;
    REQUIRE_THROWS_AS(match({}, {}, bad, m), std::invalid_argument);
    bad = MatchConfig{};
    bad.l_min = 1.5;
    REQUIRE_THROWS_AS(match({}, {}, bad, m), std::invalid_argument);
    REQUIRE_THROWS_AS(Tracker(MatchConfig{}, nullptr), std::invalid_argument);
}

TEST_CASE("likelihood stays within [0,1]") {
    TransitionMatrix m(3);
    MatchConfig cfg;
    Rng rng(17);
    for (int i = 0; i < 2000; ++i) {
        TrackedObject p;
        p.type = 1 + static_cast<int>(rng.uniform_index(3));
        p.cell = {static_cast<int>(rng.uniform_index(10)), static_cast<int>(rng.uniform_index(10))};
        Candidate c{1 + static_cast<int>(rng.uniform_index(3)),
                    {static_cast<int>(rng.uniform_index(10)), static_cast<int>(rng.uniform_index(10))}};
        double l = match_likelihood(p, c, static_cast<int>(rng.uniform_index(8)),
                                    static_cast<int>(rng.uniform_index(8)), cfg, m);
        REQUIRE(l >= 0.0);
        REQUIRE(l <= 1.0);
        if (i % 50 == 0) m.record(static_cast<int>(rng.uniform_index(4)),
                                  static_cast<int>(rng.uniform_index(4)));
    }
}

TEST_CASE("static scenes match perfectly on the prior alone") {
    TransitionMatrix m(3);
    Tracker tr(MatchConfig{}, &m);
    std::vector<Candidate> scene = {{1, {2, 2}}, {2, {7, 3}}, {3, {5, 8}}, {2, {0, 9}}};
    auto first = tr.step(scene);
    REQUIRE(first.appeared_ids.size() == 4);
    for (int i = 0; i < 5; ++i) {
        auto res = tr.step(scene);
        REQUIRE(res.matched_ids.size() == 4);
        REQUIRE(res.appeared_ids.empty());
        REQUIRE(res.departed.empty());
    }
    // ids remained those of the first frame
    std::set<int> ids;
    for (const auto& o : tr.objects()) ids.insert(o.id);
    REQUIRE(ids == std::set<int>{1, 2, 3, 4});
}

TEST_CASE("empty previous frame turns every detection into an appearance") {
    TransitionMatrix m(3);
    MatchConfig cfg;
    auto res = match({}, {{1, {4, 4}}}, cfg, m);
    REQUIRE(res.assignments.empty());
    REQUIRE(res.appearances == std::vector<std::size_t>{0});
    REQUIRE(res.disappearances.empty());

    Tracker tr(cfg, &m);
    auto step = tr.step(std::vector<Candidate>{{1, {4, 4}}});
    REQUIRE(step.appeared_ids == std::vector<int>{1});
    REQUIRE(m.count(0, 1) == 2); // prior 1 + observed appearance
}

TEST_CASE("a consumed object is recorded as a disappearance") {
    TransitionMatrix m(3);
    Tracker tr(MatchConfig{}, &m);
    tr.step(std::vector<Candidate>{{1, {5, 5}}, {3, {5, 4}}});
    std::uint64_t before = m.count(3, 0);
    auto res = tr.step(std::vector<Candidate>{{1, {5, 4}}}); // agent moved onto the circle
    REQUIRE(res.matched_ids.size() == 1);
    REQUIRE(res.departed.size() == 1);
    REQUIRE(res.departed[0].type == 3);
    REQUIRE(res.departed[0].cell == CellPos{5, 4});
    REQUIRE(m.count(3, 0) == before + 1);
}

TEST_CASE("single mover keeps its identity; greedy agrees with the exhaustive oracle") {
    Rng rng(23);
    MatchConfig cfg;
    for (int trial = 0; trial < 200; ++trial) {
        TransitionMatrix m(3);
        int statics = 1 + static_cast<int>(rng.uniform_index(2)); // up to 3 objects total
        std::vector<TrackedObject> prev;
        std::set<std::pair<int, int>> used;
        auto place = [&] {
            while (true) {
                CellPos c{static_cast<int>(rng.uniform_index(10)),
                          static_cast<int>(rng.uniform_index(10))};
                if (used.insert({c.x, c.y}).second) return c;
            }
        };
        for (int i = 0; i < statics; ++i) {
            TrackedObject o;
            o.id = i + 1;
            o.type = 2 + static_cast<int>(rng.uniform_index(2));
            o.cell = place();
            prev.push_back(o);
        }
        TrackedObject mover;
        mover.id = statics + 1;
        mover.type = 1;
        // keep the mover clearly separated so the optimum is unambiguous
        CellPos from;
        CellPos to;
        bool ok = false;
        while (!ok) {
            from = {1 + static_cast<int>(rng.uniform_index(8)),
                    1 + static_cast<int>(rng.uniform_index(8))};
            int dir = static_cast<int>(rng.uniform_index(4));
            to = from;
            if (dir == 0) to.y -= 1;
            else if (dir == 1) to.y += 1;
            else if (dir == 2) to.x -= 1;
            else to.x += 1;
            ok = true;
            for (const auto& s : prev) {
                for (CellPos p : {from, to}) {
                    double dx = s.cell.x - p.x, dy = s.cell.y - p.y;
                    if (std::sqrt(dx * dx + dy * dy) < 2.0) ok = false;
                }
            }
        }
        mover.cell = from;
        prev.push_back(mover);

        std::vector<Candidate> cur;
        for (int i = 0; i < statics; ++i) cur.push_back({prev[static_cast<std::size_t>(i)].type,
                                                         prev[static_cast<std::size_t>(i)].cell});
        cur.push_back({1, to});

        auto res = match(prev, cur, cfg, m);
        REQUIRE(res.assignments.size() == prev.size());

        // exhaustive oracle: max-total-likelihood complete assignment
        std::vector<int> nc_p, nc_c;
        {
            std::vector<CellPos> a, b;
            for (auto& p : prev) a.push_back(p.cell);
            for (auto& c : cur) b.push_back(c.cell);
            nc_p = detail::neighbour_counts(a, cfg.d_max);
            nc_c = detail::neighbour_counts(b, cfg.d_max);
        }
        std::vector<std::size_t> perm(prev.size());
        for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
        double best = -1;
        std::vector<std::size_t> best_perm;
        do {
            double total = 0;
            bool feasible = true;
            for (std::size_t pi = 0; pi < perm.size(); ++pi) {
                double l = match_likelihood(prev[pi], cur[perm[pi]], nc_p[pi],
                                            nc_c[perm[pi]], cfg, m);
                if (l < cfg.l_min) feasible = false;
                total += l;
            }
            if (feasible && total > best) {
                best = total;
                best_perm = perm;
            }
        } while (std::next_permutation(perm.begin(), perm.end()));

        REQUIRE(best >= 0);
        for (auto [pi, ci] : res.assignments) REQUIRE(best_perm[pi] == ci);
        // and the oracle's optimum is the identity map: the mover kept its id
        for (std::size_t i = 0; i < best_perm.size(); ++i) REQUIRE(best_perm[i] == i);
    }
}

TEST_CASE("assignment bookkeeping is bijective on random inputs") {
    Rng rng(29);
    MatchConfig cfg;
    TransitionMatrix m(3);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<TrackedObject> prev(rng.uniform_index(8));
        for (std::size_t i = 0; i < prev.size(); ++i) {
            prev[i].id = static_cast<int>(i) + 1;
            prev[i].type = 1 + static_cast<int>(rng.uniform_index(3));
            prev[i].cell = {static_cast<int>(rng.uniform_index(10)),
                            static_cast<int>(rng.uniform_index(10))};
        }
        std::vector<Candidate> cur(rng.uniform_index(8));
        for (auto& c : cur)
            c = {1 + static_cast<int>(rng.uniform_index(3)),
                 {static_cast<int>(rng.uniform_index(10)), static_cast<int>(rng.uniform_index(10))}};

        auto res = match(prev, cur, cfg, m);
        REQUIRE(res.assignments.size() + res.appearances.size() == cur.size());
        REQUIRE(res.assignments.size() + res.disappearances.size() == prev.size());
        std::set<std::size_t> ps, cs;
        for (auto [pi, ci] : res.assignments) {
            REQUIRE(ps.insert(pi).second);
            REQUIRE(cs.insert(ci).second);
        }
        for (auto ci : res.appearances) REQUIRE(cs.insert(ci).second);
        for (auto pi : res.disappearances) REQUIRE(ps.insert(pi).second);
    }
}

TEST_CASE("identity preservation across scripted random walks") {
    Rng rng(31);
    MatchConfig cfg;
    int preserved = 0, total = 0;
    for (int script = 0; script < 100; ++script) {
        TransitionMatrix m(3);
        Tracker tr(cfg, &m);
        std::set<std::pair<int, int>> occupied;
        auto place = [&] {
            while (true) {
                CellPos c{static_cast<int>(rng.uniform_index(10)),
                          static_cast<int>(rng.uniform_index(10))};
                if (occupied.insert({c.x, c.y}).second) return c;
            }
        };
        int statics = 3 + static_cast<int>(rng.uniform_index(6));
        std::vector<Candidate> fixed;
        for (int i = 0; i < statics; ++i)
            fixed.push_back({2 + static_cast<int>(rng.uniform_index(2)), place()});
        CellPos mover = place();

        auto frame = [&](CellPos mv) {
            std::vector<Candidate> all = fixed;
            all.push_back({1, mv});
            std::sort(all.begin(), all.end(), [](const Candidate& a, const Candidate& b) {
                return a.cell.y != b.cell.y ? a.cell.y < b.cell.y : a.cell.x < b.cell.x;
            });
            return all;
        };

        auto first = tr.step(frame(mover));
        int mover_id = 0;
        for (const auto& o : tr.objects())
            if (o.type == 1) mover_id = o.id;
        REQUIRE(mover_id != 0);

        for (int t = 0; t < 30; ++t) {
            // random 1-cell step avoiding statics and the border
            for (int attempt = 0; attempt < 20; ++attempt) {
                CellPos next = mover;
                int dir = static_cast<int>(rng.uniform_index(4));
                next.x += dir == 2 ? -1 : dir == 3 ? 1 : 0;
                next.y += dir == 0 ? -1 : dir == 1 ? 1 : 0;
                if (next.x < 0 || next.x > 9 || next.y < 0 || next.y > 9) continue;
                bool clash = false;
                for (const auto& s : fixed) clash |= s.cell == next;
                if (!clash) {
                    mover = next;
                    break;
                }
            }
            tr.step(frame(mover));
            ++total;
            for (const auto& o : tr.objects())
                if (o.cell == mover && o.type == 1 && o.id == mover_id) ++preserved;
        }
    }
    REQUIRE(total == 3000);
    REQUIRE(static_cast<double>(preserved) / static_cast<double>(total) >= 0.99);
}

TEST_CASE("a scripted episode tallies the exact transition ledger") {
    TransitionMatrix m(3);
    Tracker tr(MatchConfig{}, &m);

    tr.step(std::vector<Candidate>{{1, {2, 2}}});                 // A appears
    tr.step(std::vector<Candidate>{{1, {2, 3}}, {2, {6, 6}}});    // A moves, B appears
    auto r2 = tr.step(std::vector<Candidate>{{2, {6, 6}}});       // A disappears
    auto r3 = tr.step(std::vector<Candidate>{});                  // B disappears

    REQUIRE(r2.departed.size() == 1);
    REQUIRE(r2.departed[0].type == 1);
    REQUIRE(r2.departed[0].history.size() == 2); // one entry per frame while present
    REQUIRE(r3.departed.size() == 1);
    REQUIRE(r3.departed[0].type == 2);

    REQUIRE(m.count(0, 1) == 1 + 1); // prior + A's appearance
    REQUIRE(m.count(0, 2) == 1 + 1);
    REQUIRE(m.count(1, 1) == 6 + 1); // A's move
    REQUIRE(m.count(2, 2) == 6 + 1); // B held still once
    REQUIRE(m.count(1, 0) == 1 + 1);
    REQUIRE(m.count(2, 0) == 1 + 1);
    REQUIRE(m.count(0, 0) == 6); // never observed, prior only
}

TEST_CASE("update_transitions with no events changes nothing") {
    TransitionMatrix m(3);
    MatchResult empty;
    update_transitions(m, empty, {}, {});
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) REQUIRE(m.count(r, c) == (r == c ? 6u : 1u));
}

TEST_CASE("a frozen tracker leaves the matrix untouched") {
    TransitionMatrix m(3);
    Tracker tr(MatchConfig{}, &m, false);
    tr.step(std::vector<Candidate>{{1, {2, 2}}});
    tr.step(std::vector<Candidate>{{1, {2, 3}}});
    tr.step(std::vector<Candidate>{});
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) REQUIRE(m.count(r, c) == (r == c ? 6u : 1u));
}

TEST_CASE("tracker rejects invalid detections") {
    TransitionMatrix m(3);
    Tracker tr(MatchConfig{}, &m);
    REQUIRE_THROWS_AS(tr.step(std::vector<Candidate>{{0, {1, 1}}}), std::invalid_argument);
}

TEST_CASE("transition matrix round-trips through its text format") {
    TransitionMatrix m(3);
    Rng rng(41);
    for (int i = 0; i < 500; ++i)
        m.record(static_cast<int>(rng.uniform_index(4)), static_cast<int>(rng.uniform_index(4)));
    m.save("trans_roundtrip.txt");
    auto loaded = TransitionMatrix::load("trans_roundtrip.txt");
    REQUIRE(loaded.dim() == m.dim());
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) REQUIRE(loaded.count(r, c) == m.count(r, c));
    std::remove("trans_roundtrip.txt");

    REQUIRE_THROWS_AS(TransitionMatrix::load("no_such_matrix.txt"), std::runtime_error);
    {
        std::ofstream bad("trans_bad.txt");
        bad << "dim 3\nrow 1 2 3\nrow 4 5\n";
    }
    REQUIRE_THROWS_AS(TransitionMatrix::load("trans_bad.txt"), std::runtime_error);
    std::remove("trans_bad.txt");
}
