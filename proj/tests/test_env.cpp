#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>

#include "dsrl/env.hpp"

using namespace dsrl;

namespace {

int on_pixels(const Frame& f) {
    int n = 0;
    for (float p : f.pixels) {
        if (p == 1.0f) ++n;
        else if (p != 0.0f) FAIL("frame pixel not binary");
    }
    return n;
}

int stencil_pixels(Glyph g) {
    const auto& st = glyph_stencil(g);
    return static_cast<int>(std::count(st.begin(), st.end(), std::uint8_t{1}));
}

} // namespace

TEST_CASE("stencils are pairwise distinct (Hamming >= 4)") {
    const Glyph glyphs[] = {Glyph::Agent, Glyph::Cross, Glyph::Circle};
    for (Glyph a : glyphs) {
        for (Glyph b : glyphs) {
            if (a == b) continue;
            int hamming = 0;
            for (int i = 0; i < 25; ++i)
                hamming += glyph_stencil(a)[i] != glyph_stencil(b)[i];
            REQUIRE(hamming >= 4);
        }
    }
}

TEST_CASE("grid-neg layout: circles on the odd lattice, agent centered") {
    GridGame g(Variant::GridNeg, 7);
    // independent enumeration of the expected lattice
    std::set<std::pair<int, int>> expected;
    for (int y = 1; y < 10; y += 2)
        for (int x = 1; x < 10; x += 2)
            if (!(x == 5 && y == 5)) expected.insert({x, y});
    REQUIRE(expected.size() == 24);

    REQUIRE(g.agent_pos() == CellPos{5, 5});
    REQUIRE(g.objects().size() == 24);
    std::set<std::pair<int, int>> got;
    for (const auto& o : g.objects()) {
        REQUIRE(o.glyph == Glyph::Circle);
        got.insert({o.pos.x, o.pos.y});
    }
    REQUIRE(got == expected);
}

TEST_CASE("grid layouts are seed independent") {
    for (Variant v : {Variant::GridNeg, Variant::GridMixed}) {
        GridGame a(v, 1), b(v, 999);
        REQUIRE(a.render() == b.render());
    }
}

TEST_CASE("grid-mixed alternates circles and crosses on the lattice") {
    GridGame g(Variant::GridMixed, 0);
    int circles = 0, crosses = 0;
    for (const auto& o : g.objects()) {
        (o.glyph == Glyph::Circle ? circles : crosses)++;
        // neighbours along the lattice have the other glyph
        for (const auto& p : g.objects()) {
            bool adjacent = (std::abs(p.pos.x - o.pos.x) + std::abs(p.pos.y - o.pos.y)) == 2
                            && (p.pos.x == o.pos.x || p.pos.y == o.pos.y);
            if (adjacent) REQUIRE(p.glyph != o.glyph);
        }
    }
    REQUIRE(circles == 12);
    REQUIRE(crosses == 12);
}

TEST_CASE("random variants are reproducible under the seed") {
    GridGame a(Variant::RandomMixed, 42), b(Variant::RandomMixed, 42);
    REQUIRE(a.render() == b.render());
    REQUIRE(a.agent_pos() == b.agent_pos());

    GridGame c(Variant::RandomNeg, 42);
    REQUIRE(c.objects().size() == 12);
    for (const auto& o : c.objects()) REQUIRE(o.glyph == Glyph::Circle);

    GridGame d(Variant::RandomMixed, 43);
    int crosses = 0;
    for (const auto& o : d.objects()) crosses += o.glyph == Glyph::Cross;
    REQUIRE(crosses == 6);
    REQUIRE(d.objects().size() == 12);
}

TEST_CASE("random layouts differ across seeds") {
    std::set<std::string> layouts;
    for (std::uint64_t s = 0; s < 100; ++s) {
        GridGame g(Variant::RandomNeg, s);
        std::string key;
        for (const auto& o : g.objects()) {
            key += std::to_string(o.pos.x) + "," + std::to_string(o.pos.y) + ";";
        }
        layouts.insert(key);
    }
    REQUIRE(layouts.size() >= 95);
}

TEST_CASE("objects and agent never share a cell") {
    for (std::uint64_t s = 0; s < 50; ++s) {
        GridGame g(Variant::RandomMixed, s);
        std::set<std::pair<int, int>> cells;
        for (const auto& o : g.objects()) {
            REQUIRE(cells.insert({o.pos.x, o.pos.y}).second);
            REQUIRE(!(o.pos == g.agent_pos()));
        }
    }
}

TEST_CASE("step moves the agent one cell") {
    GridGame g(Variant::GridNeg, 0, GameConfig{.episode_steps = 50});
    REQUIRE(g.agent_pos() == CellPos{5, 5});
    auto out = g.step(Action::Up); // (5,4) holds no object on the odd lattice
    REQUIRE(g.agent_pos() == CellPos{5, 4});
    REQUIRE(out.reward == 0);
    REQUIRE(!out.collected.has_value());
}

TEST_CASE("stepping onto a circle removes it and pays -1") {
    GridGame g(Variant::GridNeg, 0);
    g.step(Action::Up);                  // (5,4), free
    auto out = g.step(Action::Up);       // (5,3), circle
    REQUIRE(out.reward == -1);
    REQUIRE(out.collected == Glyph::Circle);
    REQUIRE(g.objects().size() == 23);
    REQUIRE(g.negatives_collected() == 1);
    REQUIRE(g.score() == -1);
    // the cell is free now
    g.step(Action::Down);
    auto again = g.step(Action::Up);
    REQUIRE(again.reward == 0);
}

TEST_CASE("moves clamp at the board edge") {
    GridGame g(Variant::RandomNeg, 3, GameConfig{.random_objects = 0});
    // walk to the left wall
    for (int i = 0; i < 12; ++i) g.step(Action::Left);
    REQUIRE(g.agent_pos().x == 0);
    int y = g.agent_pos().y;
    auto out = g.step(Action::Left);
    REQUIRE(g.agent_pos() == CellPos{0, y});
    REQUIRE(out.reward == 0);
}

TEST_CASE("stepping a terminal game is a contract violation") {
    GridGame g(Variant::GridNeg, 0, GameConfig{.episode_steps = 2});
    g.step(Action::Up);
    auto out = g.step(Action::Down);
    REQUIRE(out.terminal);
    REQUIRE(g.terminal());
    REQUIRE_THROWS_AS(g.step(Action::Up), std::logic_error);
}

TEST_CASE("render: empty scene is all zero") {
    Frame f = render_scene(10, 10, {});
    REQUIRE(f.width == 50);
    REQUIRE(f.height == 50);
    REQUIRE(on_pixels(f) == 0);
}

TEST_CASE("render: single circle blits exactly its stencil") {
    Frame f = render_scene(10, 10, {{CellPos{3, 7}, Glyph::Circle}});
    REQUIRE(on_pixels(f) == stencil_pixels(Glyph::Circle));
    // stencil lands in the cell's pixel block
    for (int py = 0; py < f.height; ++py)
        for (int px = 0; px < f.width; ++px)
            if (f.at(px, py) == 1.0f) {
                REQUIRE(px / kCellPx == 3);
                REQUIRE(py / kCellPx == 7);
            }
}

TEST_CASE("render of a fresh grid-neg game holds 25 stencils") {
    GridGame g(Variant::GridNeg, 11);
    Frame f = g.render();
    int expected = 24 * stencil_pixels(Glyph::Circle) + stencil_pixels(Glyph::Agent);
    REQUIRE(on_pixels(f) == expected);
}

TEST_CASE("ground truth matches rendered stencil pixels on random worlds") {
    for (std::uint64_t s = 0; s < 100; ++s) {
        GridGame g(Variant::RandomMixed, s);
        int expected = 0;
        for (const auto& [pos, glyph] : g.ground_truth()) expected += stencil_pixels(glyph);
        REQUIRE(on_pixels(g.render()) == expected);
    }
}

TEST_CASE("ground truth shrinks by one after a collection") {
    GridGame g(Variant::GridNeg, 0);
    REQUIRE(g.ground_truth().size() == 25);
    g.step(Action::Up);
    g.step(Action::Up); // collects
    REQUIRE(g.ground_truth().size() == 24);
}

TEST_CASE("score ledger: score == crosses - circles at every step") {
    for (std::uint64_t s = 0; s < 20; ++s) {
        GridGame g(Variant::RandomMixed, s, GameConfig{.episode_steps = 200});
        Rng rng(s);
        size_t prev_objects = g.objects().size();
        while (!g.terminal()) {
            auto out = g.step(static_cast<Action>(rng.uniform_index(4)));
            REQUIRE(g.score() == g.positives_collected() - g.negatives_collected());
            REQUIRE((out.reward != 0) == out.collected.has_value());
            size_t now = g.objects().size();
            if (out.reward != 0)
                REQUIRE(now == prev_objects - 1);
            else
                REQUIRE(now == prev_objects);
            prev_objects = now;
        }
    }
}

TEST_CASE("render then step is deterministic") {
    GridGame a(Variant::RandomMixed, 5), b(Variant::RandomMixed, 5);
    Rng rng(99);
    for (int i = 0; i < 60; ++i) {
        auto act = static_cast<Action>(rng.uniform_index(4));
        auto oa = a.step(act);
        auto ob = b.step(act);
        REQUIRE(oa.frame == ob.frame);
        REQUIRE(oa.reward == ob.reward);
    }
}

TEST_CASE("pgm export") {
    Frame f = render_scene(2, 1, {{CellPos{0, 0}, Glyph::Agent}});
    std::string bytes = to_pgm(f);
    REQUIRE(bytes.substr(0, 12) == "P5\n10 5\n255\n");
    REQUIRE(bytes.size() == 12 + 50);
    REQUIRE(bytes[12 + 2] == '\xff'); // top of the '+' at pixel (2,0)
    REQUIRE(bytes[12] == '\0');
}
